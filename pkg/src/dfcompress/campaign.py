"""Campaign configuration and the runners behind ``compress`` and ``compare``."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import report
from .cost import ALL_DATAFLOWS, CostConstants, Dataflow, calibrate_energy_constants, network_energy
from .network import load_network
from .rl import (Campaign, CompressionEnv, EnvConfig, RandomAgent, SACAgent, SACConfig,
                 SurrogateBackend, TrainerBackend)
from .trainer import (Model, TrainConfig, checkpoint_save, fit, load_idx, mnist_subset,
                      synthetic_dataset)

log = logging.getLogger(__name__)

SEED_ENV = "EDC_SEED"
INFEASIBLE_EXIT = 3
MNIST_KEYS = ("train_images", "train_labels", "test_images", "test_labels")
FINETUNE_LR = 0.005


class ConfigError(ValueError):
    """Invalid campaign configuration (usage error)."""


@dataclass
class CampaignConfig:
    network: str = "lenet5"
    dataset: str = "mnist"                 # "mnist" or "synthetic"
    mnist: dict | None = None              # IDX paths; None: bundled subset
    synthetic_seed: int = 0
    synthetic_classes: int = 2
    train_size: int | None = None
    test_size: int | None = None
    surrogate: dict | None = None          # SurrogateBackend kwargs; set = no trainer
    dataflows: tuple = (Dataflow.XY,)
    env: dict = field(default_factory=dict)
    sac: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)           # fine-tuning; lr defaults to FINETUNE_LR
    baseline_train: dict = field(default_factory=dict)  # baseline training before annealing
    baseline_epochs: int = 6
    baseline_anneal_epochs: int = 2                     # extra baseline epochs at fine-tune settings
    constants: dict = field(default_factory=dict)
    calibrate_target: float | None = None
    optimizer: str = "sac"
    episodes: int = 20
    ablate: str = "none"
    out: str = "runs/campaign"
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"dataflow"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        if "dataflow" in d:
            if "dataflows" in d:
                raise ConfigError("give either 'dataflow' or 'dataflows', not both")
            d["dataflows"] = d.pop("dataflow")
        cfg = cls(**d)
        cfg.dataflows = parse_dataflows(cfg.dataflows)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e

    def validate(self):
        if self.dataset not in ("mnist", "synthetic"):
            raise ConfigError(f"dataset must be 'mnist' or 'synthetic', got {self.dataset!r}")
        if self.dataset == "synthetic" and self.mnist:
            raise ConfigError("exactly one dataset source: drop 'mnist' paths or use dataset=mnist")
        if self.mnist:
            missing = [k for k in MNIST_KEYS if k not in self.mnist]
            if missing:
                raise ConfigError(f"mnist paths missing: {', '.join(missing)}")
            for k in MNIST_KEYS:
                if not Path(self.mnist[k]).is_file():
                    raise ConfigError(f"mnist file not found: {self.mnist[k]}")
        if self.optimizer not in ("sac", "random"):
            raise ConfigError(f"optimizer must be 'sac' or 'random', got {self.optimizer!r}")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.ablate not in ("none", "quant", "prune"):
            raise ConfigError(f"ablate must be none, quant or prune, got {self.ablate!r}")
        if self.baseline_epochs < 0 or self.baseline_anneal_epochs < 0:
            raise ConfigError("baseline epoch counts must be non-negative")
        for name, cls_ in (("env", EnvConfig), ("sac", SACConfig), ("train", TrainConfig),
                           ("baseline_train", TrainConfig)):
            known = {f.name for f in fields(cls_)}
            bad = set(getattr(self, name)) - known
            if bad:
                raise ConfigError(f"unknown {name} keys: {', '.join(sorted(bad))}")
        try:
            self.cost_constants()
            self.env_config(self.dataflows[0])
            SACConfig(**self.sac)
            self.finetune_config()
            self.baseline_config()
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    def env_config(self, dataflow, ablate=None):
        d = dict(self.env)
        d.pop("dataflow", None)
        return EnvConfig.from_dict({**d, "dataflow": dataflow.value, "seed": self.seed,
                                    "ablate": ablate or self.ablate})

    def finetune_config(self):
        return TrainConfig(**{"lr": FINETUNE_LR, **self.train, "seed": self.seed})

    def baseline_config(self):
        return TrainConfig(**{**self.baseline_train, "epochs": self.baseline_epochs,
                              "seed": self.seed})

    def cost_constants(self, net=None):
        k = CostConstants.from_dict(self.constants) if self.constants else CostConstants()
        if self.calibrate_target is not None:
            net = net or load_network(self.network)
            k = calibrate_energy_constants(net, self.dataflows[0], self.calibrate_target, k)
        return k

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["dataflows"] = [df.value for df in self.dataflows]
        return d


def parse_dataflows(sel):
    if isinstance(sel, Dataflow):
        return (sel,)
    if isinstance(sel, str):
        sel = [s for s in sel.split(",") if s]
    out = []
    for s in sel:
        if isinstance(s, Dataflow):
            out.append(s)
        elif s.strip().lower() == "all":
            out.extend(ALL_DATAFLOWS)
        else:
            try:
                out.append(Dataflow.parse(s))
            except ValueError as e:
                raise ConfigError(str(e)) from e
    if not out:
        raise ConfigError("no dataflow selected")
    return tuple(dict.fromkeys(out))


def resolve_seed(cli_seed, config_seed):
    """Command-line seed, else EDC_SEED, else the config value."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from e
    return config_seed


# -- data and baseline ---------------------------------------------------------

def load_datasets(cfg):
    if cfg.dataset == "synthetic":
        train = synthetic_dataset(cfg.synthetic_seed, cfg.train_size or 512,
                                  classes=cfg.synthetic_classes, split="train")
        test = synthetic_dataset(cfg.synthetic_seed + 1, cfg.test_size or 256,
                                 classes=cfg.synthetic_classes, split="test")
        return train, test
    if cfg.mnist:
        m = cfg.mnist
        train = load_idx(m["train_images"], m["train_labels"], split="train")
        test = load_idx(m["test_images"], m["test_labels"], split="test")
    else:
        train, test = mnist_subset("train"), mnist_subset("test")
    if cfg.train_size:
        train = train.take(cfg.train_size)
    if cfg.test_size:
        test = test.take(cfg.test_size)
    return train, test


def baseline_checkpoint(cfg, net, train, cache=None):
    """Train (or load a cached) float baseline: ``baseline_epochs`` at the
    baseline settings, then ``baseline_anneal_epochs`` at the fine-tune settings
    so that fine-tuning an uncompressed model barely moves its accuracy."""
    if cache is not None and Path(cache).is_file():
        return Path(cache).read_bytes()
    if tuple(net.input_shape) != tuple(train.shape):
        raise ConfigError(f"network input {tuple(net.input_shape)} does not match "
                          f"dataset images {tuple(train.shape)}")
    model = Model(net, seed=cfg.seed)
    fit(model, train, cfg.baseline_config())
    fit(model, train, replace(cfg.finetune_config(), epochs=cfg.baseline_anneal_epochs))
    blob = checkpoint_save(model)
    if cache is not None:
        report.atomic_write_bytes(cache, blob)
    return blob


class Workspace:
    """Network, data and baseline shared by every campaign of one command."""

    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = Path(out)
        self.net = load_network(cfg.network)
        self.constants = cfg.cost_constants(self.net)
        self.train = self.test = self.baseline = None
        if cfg.surrogate is None:
            self.train, self.test = load_datasets(cfg)
            self.baseline = baseline_checkpoint(cfg, self.net, self.train,
                                                cache=self.out / "baseline.dfck")

    def backend(self):
        if self.cfg.surrogate is not None:
            return SurrogateBackend(len(self.net.layers), **self.cfg.surrogate)
        return TrainerBackend(self.baseline, self.train, self.test, self.cfg.finetune_config())

    def env(self, dataflow, ablate=None):
        return CompressionEnv(self.net, self.backend(), self.cfg.env_config(dataflow, ablate),
                              self.constants)


# -- one campaign --------------------------------------------------------------

def run_campaign(ws, dataflow, out_dir, ablate=None, resume=False, stop_after=None):
    cfg = ws.cfg
    out_dir = Path(out_dir)
    env = ws.env(dataflow, ablate)
    if cfg.optimizer == "sac":
        agent = SACAgent(env.state_dim, env.action_dim, replace(SACConfig(**cfg.sac),
                                                                seed=cfg.seed))
    else:
        agent = RandomAgent(env.state_dim, env.action_dim, seed=cfg.seed)
    state_path = out_dir / "campaign.state"
    camp = Campaign(env, agent, cfg.episodes, checkpoint_path=state_path)
    if resume and state_path.is_file():
        camp.load(state_path)
        log.info("resumed %s at episode %d", out_dir, camp.episode)
    result = camp.run(stop_after=stop_after)
    summary = None
    if camp.episode >= cfg.episodes:
        summary = write_campaign_artifacts(ws, dataflow, out_dir, result, ablate or cfg.ablate)
    return result, summary


def campaign_summary(ws, dataflow, result, ablate):
    cfg = ws.cfg
    base = network_energy(ws.net, 8, 1.0, dataflow, ws.constants)
    summary = {
        "network": ws.net.name, "dataflow": dataflow.value, "optimizer": cfg.optimizer,
        "episodes": cfg.episodes, "seed": cfg.seed, "ablate": ablate,
        "mode": "surrogate" if cfg.surrogate is not None else "trainer",
        "baseline": {"accuracy": result.alpha0, "energy": result.beta0,
                     "area": base.area.total, "logic_area": base.area.logic_area,
                     "memory_bits": base.area.memory_bits},
        "accuracy_floor": result.floor,
        "feasible": result.feasible,
        "best": None,
        "returns": result.returns(),
        "constants": ws.constants.to_dict(),
    }
    if result.best:
        b = result.best
        rep = network_energy(ws.net, b.bits, b.p, dataflow, ws.constants)
        summary["best"] = {**b.summary(), "energy_reduction": result.energy_reduction,
                           "accuracy_drop": result.alpha0 - b.alpha,
                           "area": rep.area.total, "logic_area": rep.area.logic_area,
                           "memory_bits": rep.area.memory_bits,
                           "breakdown": {k: getattr(rep, k) for k in
                                         ("pe_energy", "input_move", "weight_move",
                                          "output_move", "register_energy", "total")}}
    return summary


def write_campaign_artifacts(ws, dataflow, out_dir, result, ablate):
    out_dir = Path(out_dir)
    report.write_csv(out_dir / "history.csv", report.HISTORY_HEADER,
                     report.history_rows(result.history))
    summary = campaign_summary(ws, dataflow, result, ablate)
    report.write_json(out_dir / "summary.json", summary)
    report.write_svg(out_dir / "campaign.svg",
                     report.campaign_svg(result.episodes, result.beta0,
                                         f"{ws.net.name} / {dataflow.label}: energy and accuracy"))
    if result.best and result.best.checkpoint:
        report.atomic_write_bytes(out_dir / "best_model.dfck", result.best.checkpoint)
    return summary


# -- comparison across dataflows -------------------------------------------------

COMPARE_HEADER = ["dataflow", "baseline_energy", "optimized_energy", "reduction", "accuracy",
                  "area", "rank_before", "rank_after"]
ABLATION_HEADER = ["quant_only_energy", "quant_only_reduction", "prune_only_energy",
                   "prune_only_reduction"]


def _ranks(values):
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    ranks = [0] * len(values)
    for r, i in enumerate(order, 1):
        ranks[i] = r
    return ranks


def compare_rows(entries, with_ablation):
    before = _ranks([e["baseline_energy"] for e in entries])
    after = _ranks([e["optimized_energy"] for e in entries])
    rows = []
    for e, rb, ra in zip(entries, before, after):
        row = [e["dataflow"], e["baseline_energy"], e["optimized_energy"],
               e["baseline_energy"] / e["optimized_energy"], e["accuracy"], e["area"], rb, ra]
        if with_ablation:
            for kind in ("quant", "prune"):
                opt = e[f"{kind}_only_energy"]
                row += [opt, e["baseline_energy"] / opt]
        rows.append(row)
    return rows


def compare_entry(summary):
    best = summary["best"]
    base = summary["baseline"]
    return {"dataflow": summary["dataflow"], "baseline_energy": base["energy"],
            "optimized_energy": best["beta"] if best else base["energy"],
            "accuracy": best["alpha"] if best else base["accuracy"],
            "area": best["area"] if best else base["area"], "feasible": summary["feasible"]}
