"""Soft actor-critic for the continuous compression action space.

Squashed-Gaussian policy, twin Q critics with Polyak-averaged targets, a ring
replay buffer and automatic entropy-temperature tuning.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0


REWARD_TRANSFORMS = ("raw", "log", "centered")


@dataclass(frozen=True)
class SACConfig:
    hidden: int = 64
    buffer_size: int = 10_000
    batch_size: int = 64
    lr: float = 1e-3
    discount: float = 0.99
    polyak: float = 0.005
    updates_per_step: int = 8
    start_steps: int = 0
    init_alpha: float = 0.1
    entropy_per_dim: float = -1.0   # target entropy = entropy_per_dim * action_dim
    reward_scale: float = 10.0
    reward_transform: str = "raw"   # critics learn from r itself ("log": log r)
    noise_hold: int = 0             # steps an exploration draw is reused (0: whole episode)
    seed: int = 0

    def __post_init__(self):
        if self.reward_transform not in REWARD_TRANSFORMS:
            raise ValueError(f"reward_transform must be one of {REWARD_TRANSFORMS}")
        if self.noise_hold < 0:
            raise ValueError("noise_hold must be >= 0")
        if self.updates_per_step < 1 or self.batch_size < 1 or self.buffer_size < self.batch_size:
            raise ValueError("need updates_per_step >= 1 and buffer_size >= batch_size >= 1")

    def to_dict(self):
        return asdict(self)


class ReplayBuffer:
    """Fixed-capacity ring buffer; once full, the oldest transition is overwritten."""

    def __init__(self, obs_dim, act_dim, capacity):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), np.float32)
        self.act = np.zeros((capacity, act_dim), np.float32)
        self.rew = np.zeros(capacity, np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), np.float32)
        self.done = np.zeros(capacity, np.float32)
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done):
        i = self.ptr
        self.obs[i], self.act[i], self.rew[i] = obs, act, rew
        self.next_obs[i], self.done[i] = next_obs, done
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng, n):
        idx = rng.integers(0, self.size, size=n)
        return tuple(torch.as_tensor(a[idx]) for a in
                     (self.obs, self.act, self.rew, self.next_obs, self.done))

    def state_dict(self):
        return {k: getattr(self, k).copy() if isinstance(getattr(self, k), np.ndarray)
                else getattr(self, k)
                for k in ("obs", "act", "rew", "next_obs", "done", "ptr", "size")}

    def load_state_dict(self, d):
        for k, v in d.items():
            setattr(self, k, v.copy() if isinstance(v, np.ndarray) else v)


def mlp(n_in, n_out, hidden):
    return nn.Sequential(nn.Linear(n_in, hidden), nn.ReLU(),
                         nn.Linear(hidden, hidden), nn.ReLU(),
                         nn.Linear(hidden, n_out))


class Actor(nn.Module):
    def __init__(self, obs_dim, act_dim, hidden):
        super().__init__()
        self.body = mlp(obs_dim, 2 * act_dim, hidden)
        self.act_dim = act_dim

    def head(self, obs):
        mu, log_std = self.body(obs).split(self.act_dim, dim=-1)
        return mu, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def forward(self, obs, generator=None, deterministic=False, noise=None):
        mu, log_std = self.head(obs)
        std = log_std.exp()
        if deterministic:
            u = mu
        else:
            if noise is None:
                noise = torch.randn(mu.shape, generator=generator)
            u = mu + std * noise
        a = torch.tanh(u)
        # log-density of the tanh-squashed Gaussian
        logp = (-0.5 * ((u - mu) / std) ** 2 - log_std - 0.5 * math.log(2 * math.pi)).sum(-1)
        logp = logp - (2 * (math.log(2) - u - F.softplus(-2 * u))).sum(-1)
        return a, logp


class Critic(nn.Module):
    def __init__(self, obs_dim, act_dim, hidden):
        super().__init__()
        self.q1 = mlp(obs_dim + act_dim, 1, hidden)
        self.q2 = mlp(obs_dim + act_dim, 1, hidden)

    def forward(self, obs, act):
        x = torch.cat([obs, act], dim=-1)
        return self.q1(x).squeeze(-1), self.q2(x).squeeze(-1)


class SACAgent:
    def __init__(self, obs_dim, act_dim, config=SACConfig()):
        self.config = config
        self.obs_dim, self.act_dim = obs_dim, act_dim
        torch.manual_seed(config.seed)
        self.actor = Actor(obs_dim, act_dim, config.hidden)
        self.critic = Critic(obs_dim, act_dim, config.hidden)
        self.critic_target = copy.deepcopy(self.critic)
        for p in self.critic_target.parameters():
            p.requires_grad_(False)
        self.log_alpha = torch.tensor(math.log(config.init_alpha), requires_grad=True)
        self.target_entropy = config.entropy_per_dim * act_dim
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=config.lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=config.lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=config.lr)
        self.buffer = ReplayBuffer(obs_dim, act_dim, config.buffer_size)
        self.gen = torch.Generator().manual_seed(config.seed)
        self.rng = np.random.default_rng(config.seed)
        self.steps = 0
        self.updates = 0
        self._draws = {}

    @property
    def alpha(self):
        return float(self.log_alpha.exp())

    def _held(self, kind, draw):
        # a held draw keeps exploration consistent across steps instead of
        # averaging out over the discounted deltas
        hold = self.config.noise_hold
        slot = self._draws.get(kind)
        if slot is None or (hold and slot[1] >= hold):
            slot = self._draws[kind] = [draw(), 0]
        slot[1] += 1
        return slot[0]

    def act(self, obs, deterministic=False):
        if not deterministic and self.steps < self.config.start_steps:
            return self._held("uniform", lambda: self.rng.uniform(-1, 1, self.act_dim)).copy()
        noise = None
        if not deterministic:
            noise = self._held("gauss", lambda: torch.randn((1, self.act_dim), generator=self.gen))
        with torch.no_grad():
            a, _ = self.actor(torch.as_tensor(obs, dtype=torch.float32)[None],
                              deterministic=deterministic, noise=noise)
        return a[0].numpy().astype(np.float64)

    def begin_episode(self):
        self._draws.clear()

    def shaped_reward(self, r, steps_left=0):
        """Critic-side learning signal; the environment reward is untouched.

        "centered" learns ``r - 1`` and charges an early stop the ``steps_left``
        neutral rewards it forfeits, so undiscounted it ranks policies exactly
        like the raw return while keeping values near zero.
        """
        kind = self.config.reward_transform
        if kind == "log":
            r = math.log(r)
        elif kind == "centered":
            r = r - 1.0 - steps_left
        return self.config.reward_scale * r

    def observe(self, obs, act, reward, next_obs, done, steps_left=0):
        self.buffer.add(obs, act, self.shaped_reward(reward, steps_left), next_obs, float(done))
        self.steps += 1
        if len(self.buffer) >= self.config.batch_size:
            for _ in range(self.config.updates_per_step):
                self.update()

    def update(self):
        cfg = self.config
        obs, act, rew, nxt, done = self.buffer.sample(self.rng, cfg.batch_size)
        alpha = self.log_alpha.exp().detach()

        with torch.no_grad():
            a2, logp2 = self.actor(nxt, generator=self.gen)
            q1t, q2t = self.critic_target(nxt, a2)
            target = rew + cfg.discount * (1 - done) * (torch.min(q1t, q2t) - alpha * logp2)
        q1, q2 = self.critic(obs, act)
        critic_loss = F.mse_loss(q1, target) + F.mse_loss(q2, target)
        self.critic_opt.zero_grad()
        critic_loss.backward()
        self.critic_opt.step()

        a, logp = self.actor(obs, generator=self.gen)
        q1p, q2p = self.critic(obs, a)
        actor_loss = (alpha * logp - torch.min(q1p, q2p)).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        alpha_loss = -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()

        with torch.no_grad():
            for p, pt in zip(self.critic.parameters(), self.critic_target.parameters()):
                pt.mul_(1 - cfg.polyak).add_(cfg.polyak * p)
        self.updates += 1
        return float(critic_loss.detach()), float(actor_loss.detach())

    def state_dict(self):
        """A detached deep copy of everything needed to resume training."""
        return copy.deepcopy({
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "critic_target": self.critic_target.state_dict(),
            "log_alpha": self.log_alpha.detach().clone(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "alpha_opt": self.alpha_opt.state_dict(),
            "buffer": self.buffer.state_dict(),
            "gen": self.gen.get_state(),
            "rng": self.rng.bit_generator.state,
            "steps": self.steps,
            "updates": self.updates,
            "draws": self._draws,
        })

    def load_state_dict(self, d):
        self.actor.load_state_dict(d["actor"])
        self.critic.load_state_dict(d["critic"])
        self.critic_target.load_state_dict(d["critic_target"])
        with torch.no_grad():
            self.log_alpha.copy_(d["log_alpha"])
        self.actor_opt.load_state_dict(d["actor_opt"])
        self.critic_opt.load_state_dict(d["critic_opt"])
        self.alpha_opt.load_state_dict(d["alpha_opt"])
        self.buffer.load_state_dict(d["buffer"])
        self.gen.set_state(d["gen"])
        self.rng.bit_generator.state = d["rng"]
        self.steps = d["steps"]
        self.updates = d["updates"]
        self._draws = copy.deepcopy(d["draws"])


class RandomAgent:
    """Uniform actions in [-1, 1]; the random-shooting baseline."""

    def __init__(self, obs_dim, act_dim, seed=0):
        self.act_dim = act_dim
        self.rng = np.random.default_rng(seed)

    def act(self, obs, deterministic=False):
        return self.rng.uniform(-1, 1, self.act_dim)

    def begin_episode(self):
        pass

    def observe(self, *transition):
        pass

    def state_dict(self):
        return {"rng": self.rng.bit_generator.state}

    def load_state_dict(self, d):
        self.rng.bit_generator.state = d["rng"]
