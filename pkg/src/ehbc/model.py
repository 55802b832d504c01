"""Problem instances, epoch grids, schedules and the causality constraints."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import LN2, ChannelParams, total_power
from .errors import InstanceError

ABS_TOL = 1e-9
REL_TOL = 1e-9


def feas_tol(scale: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> float:
    return max(abs_, rel * abs(scale))


@dataclass(frozen=True)
class ArrivalEvent:
    t: float
    energy: float = 0.0
    bits1: float = 0.0
    bits2: float = 0.0

    def __post_init__(self):
        for name in ("t", "energy", "bits1", "bits2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InstanceError(f"event field {name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class Instance:
    """Channel plus arrival events; events are merged and sorted on construction."""
    channel: ChannelParams
    events: tuple[ArrivalEvent, ...]
    window: float

    def __init__(self, channel: ChannelParams, events: Sequence[ArrivalEvent],
                 window: Optional[float] = None):
        merged: dict[float, list[float]] = {}
        for ev in events:
            acc = merged.setdefault(ev.t, [0.0, 0.0, 0.0])
            acc[0] += ev.energy
            acc[1] += ev.bits1
            acc[2] += ev.bits2
        evs = tuple(ArrivalEvent(t, *merged[t]) for t in sorted(merged))
        if not evs or evs[0].t != 0.0:
            raise InstanceError("the first event must occur at t = 0")
        for ev in evs[1:]:
            if ev.energy == 0 and ev.bits1 == 0 and ev.bits2 == 0:
                raise InstanceError(f"event at t={ev.t} carries no energy or data")
        if window is None:
            window = evs[-1].t
        if not math.isfinite(window) or window < evs[-1].t:
            raise InstanceError(f"events after the window W={window} are not allowed")
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "events", evs)
        object.__setattr__(self, "window", float(window))

    @property
    def times(self) -> list[float]:
        return [ev.t for ev in self.events]

    @property
    def energy_cum(self) -> np.ndarray:
        """Energy available during epoch j (harvests at events 0..j)."""
        return np.cumsum([ev.energy for ev in self.events])

    @property
    def bits1_cum(self) -> np.ndarray:
        return np.cumsum([ev.bits1 for ev in self.events])

    @property
    def bits2_cum(self) -> np.ndarray:
        return np.cumsum([ev.bits2 for ev in self.events])

    def _curve(self, t: float, attr: str) -> float:
        # right-continuous: arrivals at t are included
        idx = bisect.bisect_right(self.times, t)
        return float(sum(getattr(ev, attr) for ev in self.events[:idx]))

    def E(self, t: float) -> float:
        return self._curve(t, "energy")

    def B1(self, t: float) -> float:
        return self._curve(t, "bits1")

    def B2(self, t: float) -> float:
        return self._curve(t, "bits2")

    @property
    def total_energy(self) -> float:
        return float(sum(ev.energy for ev in self.events))

    @property
    def total_bits(self) -> tuple[float, float]:
        return (float(sum(ev.bits1 for ev in self.events)),
                float(sum(ev.bits2 for ev in self.events)))


@dataclass(frozen=True)
class EpochGrid:
    starts: tuple[float, ...]
    lengths: tuple[float, ...]

    @property
    def boundaries(self) -> tuple[float, ...]:
        return self.starts + (self.starts[-1] + self.lengths[-1],)

    @property
    def sentinel(self) -> int:
        """Index of the open epoch that starts at the last event."""
        return len(self.starts) - 1

    def __len__(self):
        return len(self.starts)


def build_epochs(inst: Instance, horizon_hint: float) -> EpochGrid:
    """Epochs between consecutive events, closed by a sentinel of length ``horizon_hint``."""
    starts = tuple(inst.times)
    lengths = tuple(b - a for a, b in zip(starts, starts[1:])) + (float(horizon_hint),)
    return EpochGrid(starts, lengths)


@dataclass(frozen=True)
class EpochAllocation:
    power: float = 0.0
    r1: float = 0.0
    r2: float = 0.0
    active: float = 0.0

    @property
    def energy(self) -> float:
        return self.power * self.active

    @property
    def bits1(self) -> float:
        return self.r1 * self.active

    @property
    def bits2(self) -> float:
        return self.r2 * self.active


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant allocation, one entry per epoch starting at ``starts[i]``."""
    starts: tuple[float, ...]
    allocations: tuple[EpochAllocation, ...]

    def __post_init__(self):
        if len(self.starts) != len(self.allocations):
            raise InstanceError("schedule starts and allocations differ in length")

    @property
    def T(self) -> float:
        return completion_time(self)

    def last_used(self) -> int:
        """Index of the last epoch with positive power, -1 if none."""
        for i in range(len(self.allocations) - 1, -1, -1):
            a = self.allocations[i]
            if a.power > 0 and a.active > 0:
                return i
        return -1

    @classmethod
    def empty(cls, grid: EpochGrid) -> "Schedule":
        return cls(grid.starts, tuple(EpochAllocation() for _ in grid.starts))


def completion_time(sched: Schedule) -> float:
    """Last instant with positive power."""
    last = sched.last_used()
    if last < 0:
        return 0.0
    return sched.starts[last] + sched.allocations[last].active


@dataclass
class FeasibilityReport:
    energy_slacks: list[float] = field(default_factory=list)
    bits1_slacks: list[float] = field(default_factory=list)
    bits2_slacks: list[float] = field(default_factory=list)
    completion_residuals: list[float] = field(default_factory=list)
    region_excess: list[float] = field(default_factory=list)
    duration_excess: list[float] = field(default_factory=list)
    feasible: bool = True
    tol_energy: float = ABS_TOL
    tol_bits: float = ABS_TOL


def check_feasibility(inst: Instance, sched: Schedule, grid: Optional[EpochGrid] = None,
                      rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> FeasibilityReport:
    """Evaluate energy/data causality and completion of every bit."""
    n_ev = len(inst.events)
    if len(sched.allocations) != n_ev or tuple(sched.starts) != tuple(inst.times):
        raise InstanceError(
            f"schedule has {len(sched.allocations)} epochs, instance has {n_ev}")
    ch = inst.channel
    E_cum, B1_cum, B2_cum = inst.energy_cum, inst.bits1_cum, inst.bits2_cum
    B1_tot, B2_tot = inst.total_bits
    tol_e = feas_tol(inst.total_energy, rel_tol, abs_tol)
    tol_b = feas_tol(max(B1_tot, B2_tot), rel_tol, abs_tol)
    rep = FeasibilityReport(tol_energy=tol_e, tol_bits=tol_b)
    e = b1 = b2 = 0.0
    starts = list(sched.starts)
    for k, alloc in enumerate(sched.allocations):
        e += alloc.energy
        b1 += alloc.bits1
        b2 += alloc.bits2
        rep.energy_slacks.append(float(E_cum[k]) - e)
        rep.bits1_slacks.append(float(B1_cum[k]) - b1)
        rep.bits2_slacks.append(float(B2_cum[k]) - b2)
        need = total_power(ch, alloc.r1, alloc.r2) if alloc.active > 0 else 0.0
        rep.region_excess.append(max(0.0, need - alloc.power) * alloc.active)
        if k + 1 < len(starts):
            rep.duration_excess.append(max(0.0, alloc.active - (starts[k + 1] - starts[k])))
        else:
            rep.duration_excess.append(0.0)
    rep.completion_residuals = [b1 - B1_tot, b2 - B2_tot]
    rep.feasible = (
        min(rep.energy_slacks, default=0.0) >= -tol_e
        and min(rep.bits1_slacks, default=0.0) >= -tol_b
        and min(rep.bits2_slacks, default=0.0) >= -tol_b
        and all(abs(r) <= tol_b for r in rep.completion_residuals)
        and max(rep.region_excess, default=0.0) <= tol_e
        and max(rep.duration_excess, default=0.0) <= feas_tol(max(starts[-1], 1.0), rel_tol, abs_tol)
    )
    return rep


def vanishing_power_energy(ch: ChannelParams, B1: float, B2: float) -> float:
    """Infimum energy to deliver (B1, B2) as the duration grows without bound."""
    return ch.sigma2 * LN2 / ch.kappa * (B1 / ch.s1 + B2 / ch.s2)


def asymptotic_feasible(inst: Instance) -> bool:
    """True when the total harvest beats the vanishing-power energy bound."""
    B1, B2 = inst.total_bits
    if B1 == 0 and B2 == 0:
        return True
    return inst.total_energy > vanishing_power_energy(inst.channel, B1, B2)
