from __future__ import annotations

from dataclasses import dataclass, replace

from ..compression import prune_mask
from ..trainer import TrainConfig, checkpoint_restore, evaluate, train_epoch


@dataclass
class PruningComparison:
    target: float
    steps: int
    schedule: list           # remaining fraction after each multi-step step
    multi_curve: list        # accuracy after each multi-step step
    single_curve: list       # accuracy after each single-step epoch

    @property
    def multi_accuracy(self):
        return self.multi_curve[-1]

    @property
    def single_accuracy(self):
        return self.single_curve[-1]


def geometric_schedule(target, steps):
    """Remaining fractions ``target ** (k / steps)`` for ``k = 1..steps``."""
    return [target ** (k / steps) for k in range(1, steps + 1)]


def _prune(model, remaining):
    for layer in model.weight_layers:
        layer.mask[...] = prune_mask(layer.weight * layer.mask, remaining)
        layer.weight *= layer.mask
        layer.v_weight *= layer.mask


def multistep_vs_onestep_pruning(baseline_checkpoint, train, test, target=0.05, steps=32,
                                 config=TrainConfig()):
    """Prune every layer to ``target`` remaining two ways, from the same trained
    model: gradually over ``steps`` steps with one fine-tune epoch each, or in
    one jump followed by ``steps`` fine-tune epochs."""
    if target >= 1.0:
        acc = evaluate(checkpoint_restore(baseline_checkpoint), test)
        return PruningComparison(target, steps, [1.0] * steps, [acc] * steps, [acc] * steps)

    schedule = geometric_schedule(target, steps)
    multi = checkpoint_restore(baseline_checkpoint)
    multi_curve = []
    for k, remaining in enumerate(schedule):
        _prune(multi, remaining)
        train_epoch(multi, train, replace(config, seed=config.seed + k))
        multi_curve.append(evaluate(multi, test))

    single = checkpoint_restore(baseline_checkpoint)
    _prune(single, target)
    single_curve = []
    for k in range(steps):
        train_epoch(single, train, replace(config, seed=config.seed + k))
        single_curve.append(evaluate(single, test))
    return PruningComparison(target, steps, schedule, multi_curve, single_curve)
