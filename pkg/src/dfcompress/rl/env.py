"""Multi-step compression environment.

Each step nudges every layer's quantization depth and pruning remaining amount
by a discounted action, recompresses (and optionally fine-tunes) the model,
and pays ``(acc_t / acc_{t-1})**lam * energy_{t-1} / energy_t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..compression import (DELTA_P_MAX, DELTA_Q_MAX, Q_MAX, CompressionState, apply_compression,
                           schedule_update)
from ..cost import CostConstants, Dataflow, network_energy
from ..trainer import TrainConfig, checkpoint_restore, checkpoint_save, evaluate, train_epoch

ABLATIONS = ("none", "quant", "prune")


def compute_reward(alpha, alpha_prev, beta, beta_prev, lam=3.0):
    if min(alpha, alpha_prev, beta, beta_prev) <= 0:
        raise ValueError("accuracies and energies must be positive")
    return (alpha / alpha_prev) ** lam * beta_prev / beta


@dataclass(frozen=True)
class EnvConfig:
    dataflow: Dataflow = Dataflow.XY
    gamma: float = 0.9
    lam: float = 3.0
    tau: int = 4
    max_steps: int = 32
    accuracy_floor: float | None = None   # None: baseline minus floor_margin
    floor_margin: float = 0.03
    dq_max: float = DELTA_Q_MAX
    dp_max: float = DELTA_P_MAX
    finetune_epochs: int = 1
    skip_finetune_steps: int = 0
    ablate: str = "none"                  # "quant": quantization only, "prune": pruning only
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        if self.tau < 1 or self.max_steps < 1:
            raise ValueError("tau and max_steps must be >= 1")
        if self.ablate not in ABLATIONS:
            raise ValueError(f"ablate must be one of {ABLATIONS}")

    def to_dict(self):
        d = dict(self.__dict__)
        d["dataflow"] = self.dataflow.value
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "dataflow" in d:
            d["dataflow"] = Dataflow.parse(d["dataflow"])
        return cls(**d)


@dataclass
class StepRecord:
    episode: int
    t: int
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    alpha: float
    beta: float
    q: tuple
    p: tuple


@dataclass
class BestConfig:
    q: tuple
    p: tuple
    bits: tuple
    alpha: float
    beta: float
    episode: int
    step: int
    checkpoint: bytes | None = field(default=None, repr=False)

    def summary(self):
        return {"q": list(self.q), "p": list(self.p), "bits": list(self.bits),
                "alpha": self.alpha, "beta": self.beta, "episode": self.episode,
                "step": self.step}


class TrainerBackend:
    """Real accuracy: compress the model, fine-tune on ``train``, score on ``test``."""

    def __init__(self, baseline_checkpoint, train, test, train_config=TrainConfig()):
        self.baseline = bytes(baseline_checkpoint)
        self.train = train
        self.test = test
        self.train_config = train_config
        self.model = None
        self._alpha0 = None

    def reset(self, state):
        """Restore the baseline weights and compress them to ``state``."""
        self.model = checkpoint_restore(self.baseline)
        apply_compression(self.model, state)
        if self._alpha0 is None:
            self._alpha0 = evaluate(self.model, self.test)
        return self._alpha0

    def apply(self, state, finetune_epochs, seed):
        apply_compression(self.model, state)
        cfg = replace(self.train_config, seed=seed)
        for _ in range(finetune_epochs):
            train_epoch(self.model, self.train, cfg)
        return evaluate(self.model, self.test)

    def snapshot(self):
        return checkpoint_save(self.model)


class SurrogateBackend:
    """Deterministic synthetic accuracy, quadratic below per-layer knees:

    ``acc = base - sum_l [cq * max(0, q_knee - Q_l)**2 + cp * max(0, p_knee - P_l)**2]``
    """

    def __init__(self, n_layers, base=0.98, q_knee=3.0, p_knee=0.2, cq=0.004, cp=0.3,
                 floor=0.01):
        self.n_layers = n_layers
        self.base = base
        self.q_knee, self.p_knee = q_knee, p_knee
        self.cq, self.cp = cq, cp
        self.floor = floor

    def accuracy(self, q, p):
        q = np.asarray(q, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        loss = (self.cq * np.maximum(0.0, self.q_knee - q) ** 2
                + self.cp * np.maximum(0.0, self.p_knee - p) ** 2).sum()
        return float(max(self.floor, self.base - loss))

    def reset(self, state):
        return self.accuracy(state.q, state.p)

    def apply(self, state, finetune_epochs, seed):
        return self.accuracy(state.q, state.p)

    def snapshot(self):
        return None


class CompressionEnv:
    def __init__(self, net, backend, config=EnvConfig(), constants=CostConstants()):
        self.net = net
        self.backend = backend
        self.config = config
        self.constants = constants
        self.n_layers = len(net.layers)
        self.episode = -1
        self.state = None
        self.done = True
        self.alpha0 = None
        self.beta0 = None
        self.floor = None

    @property
    def state_dim(self):
        return 2 * self.n_layers * self.config.tau + self.config.tau + 1

    @property
    def action_dim(self):
        return 2 * self.n_layers

    def energy(self, state):
        rep = network_energy(self.net, state.bits, state.p, self.config.dataflow,
                             self.constants, with_area=False)
        return rep.total

    def reset(self):
        cfg = self.config
        self.episode += 1
        self.state = CompressionState.initial(self.n_layers, gamma=cfg.gamma)
        self.alpha0 = self.backend.reset(self.state)
        self.beta0 = self.energy(self.state)
        self.floor = (cfg.accuracy_floor if cfg.accuracy_floor is not None
                      else self.alpha0 - cfg.floor_margin)
        self.alpha, self.beta = self.alpha0, self.beta0
        self._qs = [self.state.q] * cfg.tau
        self._ps = [self.state.p] * cfg.tau
        self._rewards = [1.0] * cfg.tau
        self.done = False
        return self.observe()

    def observe(self):
        cfg = self.config
        return np.concatenate([np.ravel(self._qs[-cfg.tau:]) / Q_MAX, np.ravel(self._ps[-cfg.tau:]),
                               self._rewards[-cfg.tau:], [self.state.t / cfg.max_steps]])

    def scale_action(self, action):
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        if a.shape != (self.action_dim,):
            raise ValueError(f"action must have length {self.action_dim}")
        dq = a[:self.n_layers] * self.config.dq_max
        dp = a[self.n_layers:] * self.config.dp_max
        if self.config.ablate == "quant":
            dp = np.zeros_like(dp)
        elif self.config.ablate == "prune":
            dq = np.zeros_like(dq)
        return dq, dp

    def step(self, action):
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        cfg = self.config
        dq, dp = self.scale_action(action)
        t = self.state.t
        self.state = schedule_update(self.state, dq, dp, cfg.dq_max, cfg.dp_max)
        epochs = cfg.finetune_epochs if t >= cfg.skip_finetune_steps else 0
        alpha = self.backend.apply(self.state, epochs, seed=cfg.seed * 1_000_003 + self.episode)
        beta = self.energy(self.state)
        reward = compute_reward(max(alpha, 1e-12), self.alpha, beta, self.beta, cfg.lam)
        self.alpha, self.beta = alpha, beta
        self._qs.append(self.state.q)
        self._ps.append(self.state.p)
        self._rewards.append(reward)
        self.done = self.state.t >= cfg.max_steps or alpha < self.floor
        info = {"alpha": alpha, "beta": beta, "q": self.state.q, "p": self.state.p,
                "bits": self.state.bits, "feasible": alpha >= self.floor,
                "steps_left": cfg.max_steps - self.state.t if self.done else 0}
        return self.observe(), reward, self.done, info

    def snapshot(self):
        return self.backend.snapshot()
