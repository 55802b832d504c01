"""Runtime checkers for the structure every optimal schedule must have.

Each check returns a status, the smallest margin seen (negative means the
check failed) and free-form details.  Power and rate rises at epoch
boundaries are listed together with the conditions that license them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelParams, total_power
from .model import EpochAllocation, Instance, Schedule, check_feasibility

ACTIVE_REL_TOL = 1e-7
RISE_REL_TOL = 1e-7

PASS, FAIL, NA = "pass", "fail", "not-applicable"


def is_wufbc(inst: Instance) -> bool:
    """All weaker-user bits are present at t = 0."""
    return all(ev.bits2 == 0 for ev in inst.events[1:])


@dataclass
class CheckResult:
    name: str
    status: str = PASS
    slack: float = math.inf
    details: list[str] = field(default_factory=list)

    def fail(self, msg: str, margin: float) -> None:
        self.status = FAIL
        self.slack = min(self.slack, margin)
        self.details.append(msg)

    def margin(self, m: float) -> None:
        self.slack = min(self.slack, m)


@dataclass
class RiseRecord:
    boundary: int          # rise between epoch boundary-1 and epoch boundary
    t: float
    quantity: str          # "power" or "r1"
    before: float
    after: float
    licenses: list[str] = field(default_factory=list)


@dataclass
class VerificationReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)
    rises: list[RiseRecord] = field(default_factory=list)
    wufbc: bool = False
    T: float = 0.0

    @property
    def failures(self) -> list[str]:
        return [k for k, c in self.checks.items() if c.status == FAIL]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "ok": self.ok,
            "wufbc": self.wufbc,
            "T": self.T,
            "checks": {k: {"status": c.status, "slack": num(c.slack), "details": c.details}
                       for k, c in self.checks.items()},
            "rises": [asdict(r) for r in self.rises],
        }


class _Boundaries:
    """Cumulative consumption and activity of each causality constraint."""

    def __init__(self, inst: Instance, sched: Schedule, tol: float):
        allocs = sched.allocations
        self.E = inst.energy_cum
        self.B1 = inst.bits1_cum
        self.B2 = inst.bits2_cum
        self.used_e = np.cumsum([a.energy for a in allocs])
        self.used_1 = np.cumsum([a.bits1 for a in allocs])
        self.used_2 = np.cumsum([a.bits2 for a in allocs])
        self.tol = tol

    def _active(self, cap, used, i) -> bool:
        return cap[i] - used[i] <= self.tol * max(abs(cap[i]), 1e-300)

    def energy(self, i) -> bool:
        return self._active(self.E, self.used_e, i)

    def bits1(self, i) -> bool:
        return self._active(self.B1, self.used_1, i)

    def bits2(self, i) -> bool:
        return self._active(self.B2, self.used_2, i)


def _rises(before: float, after: float, tol: float) -> bool:
    return after > before + tol * max(abs(before), abs(after))


def verify_structure(inst: Instance, sched: Schedule, tol: float = ACTIVE_REL_TOL,
                     rise_tol: Optional[float] = None) -> VerificationReport:
    """Audit a schedule against the necessary conditions for optimality.

    Checks: L1 constant allocation per epoch with no interior idle time and
    rates on the power frontier; L2 power nondecreasing; L3 every power rise
    licensed; L4 (weaker buffer full at t = 0 only) stronger rate
    nondecreasing with licensed rises; L5 all energy harvested before T is
    used; C1 the arrival-type implications at every power rise.
    """
    rise_tol = tol if rise_tol is None else rise_tol
    ch = inst.channel
    allocs = sched.allocations
    starts = list(sched.starts)
    n = len(allocs)
    L = sched.last_used()
    rep = VerificationReport(wufbc=is_wufbc(inst), T=sched.T)
    names = ("L1", "L2", "L3", "L4", "L5", "C1")
    rep.checks = {k: CheckResult(k) for k in names}
    if not rep.wufbc:
        rep.checks["L4"].status = NA
        rep.checks["L4"].details.append("weaker-user data arrives after t = 0")
    if L < 0:
        return rep

    act = _Boundaries(inst, sched, tol)
    evs = inst.events

    _check_epochs(rep.checks["L1"], ch, allocs, starts, L, tol)

    P = [a.power for a in allocs[:L + 1]]
    pscale = max(P)
    for i in range(L):
        # boundary i+1 separates epoch i from epoch i+1; constraints at index i
        t = starts[i + 1]
        ev = evs[i + 1]
        margin = (P[i + 1] - P[i] + tol * pscale) / pscale
        rep.checks["L2"].margin(margin)
        if margin < 0:
            rep.checks["L2"].fail(f"power drops at t={t:.12g}: {P[i]:.12g} -> {P[i + 1]:.12g}", margin)
        if not _rises(P[i], P[i + 1], rise_tol):
            continue
        lic = []
        if act.energy(i):
            lic.append("energy_active")
        if act.bits1(i) and act.bits2(i):
            lic.append("both_data_active")
        if act.bits2(i) and ev.bits2 > 0:
            lic.append("weaker_data_active_with_arrival")
        rep.rises.append(RiseRecord(i + 1, t, "power", P[i], P[i + 1], lic))
        if not lic:
            rep.checks["L3"].fail(f"unlicensed power rise at t={t:.12g}", -1.0)
        _corollary(rep.checks["C1"], act, ev, i, t)

    if rep.wufbc:
        _check_stronger_rate(rep, act, allocs, starts, evs, L, tol, rise_tol)

    _check_energy_use(rep.checks["L5"], inst, sched, tol)
    return rep


def _check_epochs(chk: CheckResult, ch: ChannelParams, allocs, starts, L, tol) -> None:
    for i in range(L + 1):
        a = allocs[i]
        if i < L:
            length = starts[i + 1] - starts[i]
            gap = (length - a.active) / length
            if gap > tol:
                chk.fail(f"epoch {i} idle for a fraction {gap:.3g} before the last epoch", -gap)
        if a.active <= 0:
            continue
        need = total_power(ch, a.r1, a.r2)
        dev = abs(need - a.power) / max(a.power, need, 1e-300)
        chk.margin(tol - dev)
        if dev > tol:
            chk.fail(f"epoch {i} power {a.power:.12g} off the frontier value {need:.12g}", tol - dev)


def _corollary(chk: CheckResult, act: _Boundaries, ev, i: int, t: float) -> None:
    harvest = ev.energy > 0
    if ev.bits2 > 0 and not harvest and not act.bits2(i):
        chk.fail(f"power rises on a weaker arrival at t={t:.12g} with weaker backlog left", -1.0)
    if ev.bits1 > 0 and ev.bits2 == 0 and not harvest and not (act.bits1(i) and act.bits2(i)):
        chk.fail(f"power rises on a stronger arrival at t={t:.12g} with data left", -1.0)
    if harvest and ev.bits1 == 0 and ev.bits2 == 0 and not act.energy(i):
        chk.fail(f"power rises on a harvest at t={t:.12g} with energy left", -1.0)


def _check_stronger_rate(rep: VerificationReport, act: _Boundaries, allocs, starts, evs,
                         L: int, tol: float, rise_tol: float) -> None:
    chk = rep.checks["L4"]
    r1 = [a.r1 for a in allocs[:L + 1]]
    scale = max(max(r1), 1e-300)
    for i in range(L):
        t = starts[i + 1]
        margin = (r1[i + 1] - r1[i] + tol * scale) / scale
        chk.margin(margin)
        if margin < 0:
            chk.fail(f"stronger rate drops at t={t:.12g}: {r1[i]:.12g} -> {r1[i + 1]:.12g}", margin)
        if not _rises(r1[i], r1[i + 1], rise_tol):
            continue
        ev = evs[i + 1]
        lic = []
        if ev.bits1 > 0 and act.bits1(i):
            lic.append("stronger_arrival_backlog_empty")
        a = allocs[i]
        if ev.energy > 0 and a.r2 <= tol * max(a.r1, 1e-300):
            lic.append("harvest_with_stronger_only")
        rep.rises.append(RiseRecord(i + 1, t, "r1", r1[i], r1[i + 1], lic))
        if not lic:
            chk.fail(f"unlicensed stronger-rate rise at t={t:.12g}", -1.0)


def _check_energy_use(chk: CheckResult, inst: Instance, sched: Schedule, tol: float) -> None:
    T = sched.T
    # harvests arriving exactly at T cannot be spent
    avail = sum(ev.energy for ev in inst.events if ev.t < T)
    used = sum(a.energy for a in sched.allocations)
    dev = abs(avail - used) / max(avail, 1e-300)
    chk.margin(tol - dev)
    if dev > tol:
        chk.fail(f"consumed {used:.12g} J of {avail:.12g} J harvested before T", tol - dev)


# --- uniqueness probe -------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    trials: int = 100
    scale: float = 1e-3     # relative size of each transfer
    seed: int = 0


@dataclass
class ProbeReport:
    trials: int = 0
    rejected: int = 0       # perturbed schedule breaks causality
    worse: int = 0          # feasible but finishes later
    unchanged: int = 0      # zero-size perturbations
    falsifications: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.falsifications


def _epoch_energy(ch: ChannelParams, length: float, b1: float, b2: float) -> float:
    if b1 <= 0 and b2 <= 0:
        return 0.0
    try:
        return length * total_power(ch, b1 / length, b2 / length)
    except Exception:
        return math.inf


def _tail_duration(ch: ChannelParams, b1: float, b2: float, energy: float,
                   lo: float, hi: float) -> float:
    """Shortest duration in (lo, hi] that sends (b1, b2) with ``energy``; inf if none."""
    if b1 <= 0 and b2 <= 0:
        return 0.0
    if _epoch_energy(ch, hi, b1, b2) > energy:
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _epoch_energy(ch, mid, b1, b2) <= energy:
            hi = mid
        else:
            lo = mid
    return hi


def certify_uniqueness_probe(inst: Instance, sched: Schedule,
                             spec: PerturbationSpec = PerturbationSpec(),
                             rel_tol: float = 1e-12) -> ProbeReport:
    """Move small amounts of bits between adjacent used epochs and confirm
    that no perturbed schedule finishes as early as ``sched``.

    After each move, every epoch is re-priced at its minimum energy and the
    last epoch is shortened as far as the remaining harvest allows.
    """
    ch = inst.channel
    rng = np.random.default_rng(spec.seed)
    rep = ProbeReport()
    L = sched.last_used()
    T = sched.T
    if L < 0:
        return rep
    starts = list(sched.starts)
    lengths = [starts[i + 1] - starts[i] for i in range(L)] + [sched.allocations[L].active]
    b1 = [a.bits1 for a in sched.allocations[:L + 1]]
    b2 = [a.bits2 for a in sched.allocations[:L + 1]]
    E, B1, B2 = inst.energy_cum, inst.bits1_cum, inst.bits2_cum
    tot1, tot2 = inst.total_bits
    for _ in range(spec.trials):
        rep.trials += 1
        if L == 0 or spec.scale == 0:
            rep.unchanged += 1
            continue
        i = int(rng.integers(0, L))
        d1 = spec.scale * tot1 * rng.uniform(-1, 1)
        d2 = spec.scale * tot2 * rng.uniform(-1, 1)
        # positive d moves bits from epoch i+1 to epoch i
        n1, n2 = list(b1), list(b2)
        n1[i] += d1
        n1[i + 1] -= d1
        n2[i] += d2
        n2[i + 1] -= d2
        if min(n1) < 0 or min(n2) < 0:
            rep.rejected += 1
            continue
        c1, c2 = np.cumsum(n1), np.cumsum(n2)
        if any(c1[j] > B1[j] * (1 + rel_tol) or c2[j] > B2[j] * (1 + rel_tol) for j in range(L)):
            rep.rejected += 1
            continue
        en = [_epoch_energy(ch, lengths[j], n1[j], n2[j]) for j in range(L)]
        ce = np.cumsum(en) if en else np.zeros(0)
        if any(ce[j] > E[j] * (1 + rel_tol) for j in range(L)):
            rep.rejected += 1
            continue
        left = E[L] - (ce[-1] if L else 0.0)
        full = (starts[L + 1] - starts[L]) if L + 1 < len(starts) else math.inf
        hi = min(full, 4 * lengths[L] + 1.0)
        d = _tail_duration(ch, n1[L], n2[L], left, 0.0, hi)
        T_new = starts[L] + d
        if not math.isfinite(T_new):
            rep.rejected += 1
            continue
        if T_new > T * (1 + rel_tol):
            rep.worse += 1
        else:
            rep.falsifications.append({"pair": i, "d1": d1, "d2": d2, "T": T, "T_perturbed": T_new})
    return rep
