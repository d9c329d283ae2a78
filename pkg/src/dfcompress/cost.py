"""Analytic energy and area model for CNN accelerator dataflows.

A dataflow ``A:B`` unrolls two of the six convolution loops onto an ``A*B``
processing-element array.  Four are modeled:

``XY``    output-stationary: each PE keeps an accumulator for one output pixel;
          weights are broadcast to the whole array every step.
``FXFY``  weight-stationary: the ``F_X*F_Y`` filter taps sit in PE registers and
          are reused over all ``X*Y`` positions; partial sums are reduced by an
          adder tree and spilled to memory.
``XFX``   weights for one filter row are broadcast across the ``X`` rows of the
          array (reused ``X`` times) and latched in ``F_X`` column registers;
          partial sums spill to memory.
``CICO``  the input pixel of each channel is broadcast to all ``C_O`` columns;
          partial sums reduced over ``C_I`` spill to memory.

Overlapping-window input reuse is not modeled.  Energy and area are in
arbitrary units.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

from . import kernels
from ._kernels_py import CI, CO, FX, FY, X, Y
from .network import mac_count, param_count

ORACLE_MAC_LIMIT = 10**7


class Dataflow(enum.Enum):
    XY = "xy"
    FXFY = "fxfy"
    XFX = "xfx"
    CICO = "cico"

    @classmethod
    def parse(cls, name):
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown dataflow {name!r}; expected one of "
                             f"{', '.join(d.value for d in cls)}") from None

    @property
    def label(self):
        return {"xy": "X:Y", "fxfy": "FX:FY", "xfx": "X:FX", "cico": "CI:CO"}[self.value]


ALL_DATAFLOWS = tuple(Dataflow)


@dataclass(frozen=True)
class LoopNestPolicy:
    """Reuse policy of one dataflow, as simulated by the loop-nest oracle.

    Any of the 15 loop pairs can be described this way; only the four
    ``Dataflow`` members carry closed-form counts.
    """
    spatial: tuple
    temporal: tuple
    input: int
    weight: int
    weight_latch: bool
    output: int


POLICIES = {
    Dataflow.XY: LoopNestPolicy((X, Y), (CO, CI, FX, FY), kernels.PER_PE,
                                kernels.BROADCAST, False, kernels.ACCUMULATE),
    Dataflow.FXFY: LoopNestPolicy((FX, FY), (CO, CI, X, Y), kernels.PER_PE,
                                  kernels.STATIONARY, True, kernels.SPILL),
    Dataflow.XFX: LoopNestPolicy((X, FX), (CO, CI, FY, Y), kernels.PER_PE,
                                 kernels.BROADCAST, True, kernels.SPILL),
    Dataflow.CICO: LoopNestPolicy((CI, CO), (X, Y, FX, FY), kernels.BROADCAST,
                                  kernels.PER_PE, False, kernels.SPILL),
}


@dataclass(frozen=True)
class CostConstants:
    e_adder: float = 1.0
    e_bit: float = 1.0
    e_reg: float = 0.0
    a_bits: int = 10
    lut_area_unit: float = 1.0
    ram_area_per_bit: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.a_bits < 1 or int(self.a_bits) != self.a_bits:
            raise ValueError("a_bits must be a positive integer")

    def scaled(self, c):
        """All energy and area constants multiplied by ``c``."""
        return replace(self, e_adder=self.e_adder * c, e_bit=self.e_bit * c,
                       e_reg=self.e_reg * c, lut_area_unit=self.lut_area_unit * c,
                       ram_area_per_bit=self.ram_area_per_bit * c)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown cost constants: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class AccessCounts:
    input_reads: int
    weight_reads: int
    output_reads: int
    output_writes: int
    register_accesses: int

    def as_tuple(self):
        return (self.input_reads, self.weight_reads, self.output_reads,
                self.output_writes, self.register_accesses)

    def mismatches(self, other):
        return [f.name for f in fields(self) if getattr(self, f.name) != getattr(other, f.name)]


@dataclass(frozen=True)
class LayerEnergy:
    pe_energy: float
    input_move: float
    weight_move: float
    output_move: float
    register_energy: float

    @property
    def movement(self):
        return self.input_move + self.weight_move + self.output_move

    @property
    def total(self):
        return self.pe_energy + self.movement + self.register_energy


@dataclass(frozen=True)
class AreaReport:
    pe_count: int
    luts_per_pe: int
    logic_area: float
    memory_bits: int
    memory_area: float

    @property
    def total(self):
        return self.logic_area + self.memory_area


@dataclass(frozen=True)
class CostReport:
    dataflow: Dataflow
    layers: tuple          # LayerEnergy per layer
    q_bits: tuple          # rounded weight bits per layer
    remaining: tuple       # remaining fraction per layer
    area: AreaReport | None = None

    def _sum(self, name):
        return math.fsum(getattr(e, name) for e in self.layers)

    @property
    def pe_energy(self):
        return self._sum("pe_energy")

    @property
    def input_move(self):
        return self._sum("input_move")

    @property
    def weight_move(self):
        return self._sum("weight_move")

    @property
    def output_move(self):
        return self._sum("output_move")

    @property
    def register_energy(self):
        return self._sum("register_energy")

    @property
    def movement(self):
        return self.input_move + self.weight_move + self.output_move

    @property
    def total(self):
        return math.fsum(e.total for e in self.layers)

    @property
    def movement_fraction(self):
        return self.movement / self.total


# -- logic resources -----------------------------------------------------------

def adder_count(a_bits, w_bits):
    """Adders in an ``a_bits x w_bits`` array multiplier."""
    if a_bits < 1 or w_bits < 1:
        raise ValueError("bit-widths must be >= 1")
    return (a_bits - 1) * w_bits


def lut_count(a_bits, w_bits):
    """LUTs for an ``a_bits x w_bits`` multiplier on the FPGA fabric."""
    if a_bits % 2:
        raise ValueError(f"a_bits must be even, got {a_bits}")
    if w_bits < 0:
        raise ValueError("w_bits must be non-negative")
    return a_bits // 2 * (w_bits + 1)


# -- memory traffic ------------------------------------------------------------

def access_counts(layer, dataflow):
    m = mac_count(layer)
    co, ci, x, y, fx, fy = layer.c_out, layer.c_in, layer.x, layer.y, layer.f_x, layer.f_y
    if dataflow is Dataflow.XY:
        return AccessCounts(m, m // (x * y), 0, co * x * y, m)
    if dataflow is Dataflow.FXFY:
        return AccessCounts(m, m // (x * y), co * x * y * (ci - 1), co * x * y * ci,
                            co * ci * fx * fy)
    if dataflow is Dataflow.XFX:
        return AccessCounts(m, m // x, co * x * y * (ci * fy - 1), co * x * y * ci * fy,
                            co * ci * fy * fx)
    if dataflow is Dataflow.CICO:
        return AccessCounts(m // co, m, co * x * y * (fx * fy - 1), co * x * y * fx * fy, 0)
    raise ValueError(f"no closed-form counts for {dataflow!r}")


def oracle_access_counts(layer, dataflow, limit=ORACLE_MAC_LIMIT):
    """Count accesses by walking the loop nest under the dataflow's policy."""
    if mac_count(layer) > limit:
        raise ValueError(f"layer has {mac_count(layer)} MACs, above the oracle cap of {limit}")
    pol = POLICIES[dataflow] if isinstance(dataflow, Dataflow) else dataflow
    bounds = (layer.c_out, layer.c_in, layer.x, layer.y, layer.f_x, layer.f_y)
    px = layer.in_x + 2 * layer.padding
    py = layer.in_y + 2 * layer.padding
    counts = kernels.simulate_loop_nest(bounds, pol.spatial, pol.temporal, layer.stride, px, py,
                                        pol.input, pol.weight, pol.weight_latch, pol.output)
    return AccessCounts(*(int(c) for c in counts))


def pe_array_size(layer, dataflow):
    """PEs needed to unroll the dataflow's loop pair for this layer."""
    sa, sb = POLICIES[dataflow].spatial
    dims = (layer.c_out, layer.c_in, layer.x, layer.y, layer.f_x, layer.f_y)
    return dims[sa] * dims[sb]


# -- energy --------------------------------------------------------------------

def weight_move_energy(weight_reads, remaining, q_bits, e_bit):
    """Energy of streaming weights: only surviving weights are fetched, each
    ``q_bits`` wide."""
    return weight_reads * remaining * q_bits * e_bit


def _check_config(q_bits, p):
    if int(q_bits) != q_bits or not 1 <= q_bits <= 8:
        raise ValueError(f"q_bits must be an integer in [1, 8], got {q_bits}")
    if not 0 < p <= 1:
        raise ValueError(f"remaining fraction must be in (0, 1], got {p}")


def layer_energy(layer, dataflow, q_bits, p, k=CostConstants()):
    _check_config(q_bits, p)
    acc = access_counts(layer, dataflow)
    m = mac_count(layer)
    return LayerEnergy(
        pe_energy=m * p * k.e_adder * adder_count(k.a_bits, q_bits),
        input_move=acc.input_reads * k.a_bits * k.e_bit,
        weight_move=weight_move_energy(acc.weight_reads, p, q_bits, k.e_bit),
        output_move=(acc.output_reads + acc.output_writes) * k.a_bits * k.e_bit,
        register_energy=acc.register_accesses * k.e_reg,
    )


def _per_layer(net, q_bits, remaining):
    n = len(net.layers)
    if isinstance(q_bits, (int, float)):
        q_bits = [q_bits] * n
    if isinstance(remaining, (int, float)):
        remaining = [remaining] * n
    q_bits, remaining = list(q_bits), list(remaining)
    if len(q_bits) != n or len(remaining) != n:
        raise ValueError(f"expected {n} per-layer values, got {len(q_bits)} bits "
                         f"and {len(remaining)} remaining fractions")
    return q_bits, remaining


def area(net, dataflow, q_bits, remaining, k=CostConstants()):
    """Logic area of the PE array plus on-chip memory for all weights and the
    largest feature map."""
    q_bits, remaining = _per_layer(net, q_bits, remaining)
    q_max = max(q_bits)
    pes = max(pe_array_size(layer, dataflow) for layer in net.layers)
    luts = lut_count(k.a_bits, q_max)
    bits = 0
    for layer, q, p in zip(net.layers, q_bits, remaining):
        n = param_count(layer)
        bits += math.ceil(n * p - 1e-9) * q + n  # surviving weights + 1-bit mask
    bits += k.a_bits * max(net.feature_map_elements())
    return AreaReport(pe_count=pes, luts_per_pe=luts, logic_area=pes * luts * k.lut_area_unit,
                      memory_bits=bits, memory_area=bits * k.ram_area_per_bit)


def network_energy(net, q_bits, remaining, dataflow, k=CostConstants(), with_area=True):
    """Per-layer energy breakdown for a whole network.  ``q_bits`` and
    ``remaining`` are per-layer sequences or scalars applied to every layer."""
    q_bits, remaining = _per_layer(net, q_bits, remaining)
    layers = tuple(layer_energy(layer, dataflow, q, p, k)
                   for layer, q, p in zip(net.layers, q_bits, remaining))
    rep_area = area(net, dataflow, q_bits, remaining, k) if with_area else None
    return CostReport(dataflow=dataflow, layers=layers, q_bits=tuple(q_bits),
                      remaining=tuple(remaining), area=rep_area)


def calibrate_energy_constants(net, dataflow, target_move_fraction, base=CostConstants()):
    """Pick ``e_bit`` (with ``e_adder = 1``) so data movement is the requested
    share of total energy for the uncompressed 8-bit network."""
    if not 0 < target_move_fraction < 1:
        raise ValueError("target fraction must be in (0, 1)")
    unit = replace(base, e_adder=1.0, e_bit=1.0)
    rep = network_energy(net, 8, 1.0, dataflow, unit, with_area=False)
    if rep.movement == 0:
        raise ValueError("network has no data movement to calibrate against")
    fixed = rep.pe_energy + rep.register_energy
    e_bit = target_move_fraction * fixed / ((1 - target_move_fraction) * rep.movement)
    return replace(unit, e_bit=e_bit)
