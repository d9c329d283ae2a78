"""Episode loop shared by the SAC and random-shooting optimizers, with
episode-granular checkpoint/resume."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import BestConfig, StepRecord
from .sac import RandomAgent, SACAgent, SACConfig

log = logging.getLogger(__name__)


@dataclass
class CampaignResult:
    best: BestConfig | None
    history: list                      # StepRecord, in order
    episodes: list                     # per-episode summary dicts
    alpha0: float
    beta0: float
    floor: float
    agent: object = field(default=None, repr=False)

    @property
    def feasible(self):
        return self.best is not None

    @property
    def energy_reduction(self):
        return self.beta0 / self.best.beta if self.best else 1.0

    def returns(self):
        return [e["return"] for e in self.episodes]


class Campaign:
    def __init__(self, env, agent, episodes, checkpoint_path=None):
        self.env = env
        self.agent = agent
        self.budget = episodes
        self.checkpoint_path = checkpoint_path
        self.episode = 0
        self.history = []
        self.episodes = []
        self.best = None

    def _consider(self, rec, info):
        if not info["feasible"]:
            return
        if self.best is None or rec.beta < self.best.beta:
            self.best = BestConfig(q=tuple(rec.q), p=tuple(rec.p), bits=tuple(info["bits"]),
                                   alpha=rec.alpha, beta=rec.beta, episode=rec.episode,
                                   step=rec.t, checkpoint=self.env.snapshot())

    def run_episode(self):
        env, agent = self.env, self.agent
        env.episode = self.episode - 1
        obs = env.reset()
        agent.begin_episode()
        total = 0.0
        done = False
        while not done:
            action = agent.act(obs)
            nxt, reward, done, info = env.step(action)
            agent.observe(obs, action, reward, nxt, done, info["steps_left"])
            rec = StepRecord(episode=self.episode, t=env.state.t, state=obs,
                             action=np.asarray(action, dtype=np.float64), reward=reward,
                             next_state=nxt, done=done, alpha=info["alpha"],
                             beta=info["beta"], q=info["q"], p=info["p"])
            self.history.append(rec)
            self._consider(rec, info)
            total += reward
            obs = nxt
        summary = {"episode": self.episode, "steps": env.state.t, "return": total,
                   "final_alpha": env.alpha, "final_beta": env.beta,
                   "best_beta": self.best.beta if self.best else None}
        self.episodes.append(summary)
        log.info("episode %d: %d steps, return %.4f, energy %.4g (x%.2f), acc %.4f",
                 self.episode, env.state.t, total, env.beta, env.beta0 / env.beta, env.alpha)
        self.episode += 1
        return summary

    def run(self, stop_after=None):
        """Run until the episode budget is spent.  ``stop_after`` interrupts
        after that many episodes in this call (the checkpoint stays resumable)."""
        ran = 0
        while self.episode < self.budget:
            if stop_after is not None and ran >= stop_after:
                break
            self.run_episode()
            ran += 1
            if self.checkpoint_path:
                self.save(self.checkpoint_path)
        return self.result()

    def result(self):
        if self.env.alpha0 is None:
            self.env.reset()
            self.env.episode -= 1
        return CampaignResult(best=self.best, history=self.history, episodes=self.episodes,
                              alpha0=self.env.alpha0, beta0=self.env.beta0, floor=self.env.floor,
                              agent=self.agent)

    # -- persistence -----------------------------------------------------------

    def state_dict(self):
        return {"episode": self.episode, "history": self.history, "episodes": self.episodes,
                "best": self.best, "agent": self.agent.state_dict(), "budget": self.budget}

    def load_state_dict(self, d):
        self.episode = d["episode"]
        self.history = list(d["history"])
        self.episodes = list(d["episodes"])
        self.best = d["best"]
        self.agent.load_state_dict(d["agent"])

    def save(self, path):
        from ..report import atomic_write_bytes

        buf = io.BytesIO()
        torch.save(self.state_dict(), buf)
        atomic_write_bytes(path, buf.getvalue())

    def load(self, path):
        with open(path, "rb") as f:
            self.load_state_dict(torch.load(f, weights_only=False))


def _make_env(env_or_factory):
    return env_or_factory() if callable(env_or_factory) else env_or_factory


def sac_train(env_factory, episodes, config=SACConfig(), checkpoint_path=None, resume=False,
              stop_after=None):
    """Train SAC for ``episodes`` episodes; returns a CampaignResult whose
    ``agent`` is the trained policy."""
    env = _make_env(env_factory)
    agent = SACAgent(env.state_dim, env.action_dim, config)
    camp = Campaign(env, agent, episodes, checkpoint_path)
    if resume and checkpoint_path:
        camp.load(checkpoint_path)
    return camp.run(stop_after=stop_after)


def random_search(env_factory, budget, seed=0, checkpoint_path=None, resume=False,
                  stop_after=None):
    """Random shooting: ``budget`` episodes of uniform actions."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    env = _make_env(env_factory)
    agent = RandomAgent(env.state_dim, env.action_dim, seed=seed)
    camp = Campaign(env, agent, budget, checkpoint_path)
    if resume and checkpoint_path:
        camp.load(checkpoint_path)
    return camp.run(stop_after=stop_after)
