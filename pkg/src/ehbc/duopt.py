"""DuOpt: block coordinate descent over consecutive epoch pairs.

Each sweep visits the pairs (0,1), (1,2), ... up to the last used epoch.
Pairs left of the Flag are re-solved for minimum energy, with the saved
energy pushed two epochs ahead; the remaining pairs are re-solved for
minimum time, which opens a gap that the next pair absorbs.  The Flag moves
to pair ``i`` once epoch ``i`` has sent every bit that has arrived.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import total_power
from .errors import InfeasibleInstanceError, PairInfeasibleError
from .localopt import (TwoEpochProblem, _decreasing_root, _Region, minimize_energy,
                       minimize_time)
from .model import (EpochAllocation, EpochGrid, Instance, Schedule, asymptotic_feasible,
                    build_epochs)

log = logging.getLogger(__name__)

FLAG_REL_TOL = 1e-9
RESIDUE_REL = 1e-12  # bit residues below this fraction of the total are rounding noise


@dataclass(frozen=True)
class SolverConfig:
    epsilon: Optional[float] = None      # absolute; default 1e-9 * T_up
    max_iterations: int = 10_000
    horizon_hint: Optional[float] = None  # sentinel length; default from initial schedule
    rel_epsilon: float = 1e-9
    # the per-epoch state must also settle: a tiny T decrease alone can hide
    # allocations still far from the fixed point (T error ~ square of theirs)
    state_tol: float = 1e-12

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class IterationTrace:
    T: list[float] = field(default_factory=list)
    flags: list[int] = field(default_factory=list)
    patterns: list[list[str]] = field(default_factory=list)
    T_up: float = 0.0
    converged: bool = True

    @property
    def iterations(self) -> int:
        return len(self.T) - 1

    def monotone_violations(self, rel: float = 1e-12) -> int:
        slack = rel * self.T_up
        return sum(1 for a, b in zip(self.T, self.T[1:]) if b > a + slack)


class _State:
    """Mutable per-epoch bits / energy / active duration during the sweep."""

    def __init__(self, grid: EpochGrid):
        m = len(grid)
        self.grid = grid
        self.b1 = [0.0] * m
        self.b2 = [0.0] * m
        self.e = [0.0] * m
        self.d = [0.0] * m

    def last_used(self) -> int:
        for i in range(len(self.b1) - 1, -1, -1):
            if self.b1[i] > 0 or self.b2[i] > 0:
                return i
        return -1

    def snapshot(self) -> tuple[list[float], ...]:
        return list(self.b1), list(self.b2), list(self.e)

    def completion(self) -> float:
        L = self.last_used()
        return 0.0 if L < 0 else self.grid.starts[L] + self.d[L]

    def to_schedule(self) -> Schedule:
        allocs = []
        for b1, b2, e, d in zip(self.b1, self.b2, self.e, self.d):
            if d > 0 and (b1 > 0 or b2 > 0):
                allocs.append(EpochAllocation(e / d, b1 / d, b2 / d, d))
            else:
                allocs.append(EpochAllocation())
        return Schedule(self.grid.starts, tuple(allocs))


def _initial_duration(inst: Instance) -> float:
    B1, B2 = inst.total_bits
    E = inst.total_energy
    R = _Region(inst.channel)

    def f(T):
        return R.energy(T, B1, B2) - E

    hi = max(inst.window, 1.0)
    for _ in range(2000):
        if f(hi) <= 0:
            break
        hi *= 2.0
    else:
        raise InfeasibleInstanceError("no finite duration delivers the bits")
    return _decreasing_root(f, 0.0, hi, xtol=4e-16 * hi, ftol=1e-15 * E)


def initial_schedule(inst: Instance) -> tuple[Schedule, float]:
    """Idle until the last event, then constant power and rates until every
    bit is sent with the whole harvest.  Returns the schedule and T_up."""
    if not asymptotic_feasible(inst):
        raise InfeasibleInstanceError("total harvest cannot deliver the bits at any rate")
    B1, B2 = inst.total_bits
    t_last = inst.events[-1].t
    if B1 == 0 and B2 == 0:
        grid = build_epochs(inst, 0.0)
        return Schedule.empty(grid), t_last
    T0 = _initial_duration(inst)
    grid = build_epochs(inst, T0)
    st = _initial_state(inst, grid, T0)
    return st.to_schedule(), t_last + T0


def _initial_state(inst: Instance, grid: EpochGrid, T0: float) -> _State:
    st = _State(grid)
    B1, B2 = inst.total_bits
    st.b1[-1], st.b2[-1] = B1, B2
    st.e[-1] = inst.total_energy
    st.d[-1] = T0
    return st


def compact_gaps(sched: Schedule, grid: EpochGrid, ch=None) -> Schedule:
    """Re-spread every interior partially used epoch over its full length so
    idle time only follows the final transmission."""
    last = sched.last_used()
    out = []
    for i, a in enumerate(sched.allocations):
        length = grid.lengths[i]
        if i < last and 0 < a.active < length and (a.r1 > 0 or a.r2 > 0):
            scale = a.active / length
            r1, r2 = a.r1 * scale, a.r2 * scale
            P = total_power(ch, r1, r2) if ch is not None else a.power * scale
            out.append(EpochAllocation(P, r1, r2, length))
        else:
            out.append(a)
    return Schedule(sched.starts, tuple(out))


def solve(inst: Instance, cfg: Optional[SolverConfig] = None) -> tuple[Schedule, IterationTrace]:
    """Run DuOpt to a fixed point; returns the final schedule and its trace."""
    cfg = cfg or SolverConfig()
    if not asymptotic_feasible(inst):
        raise InfeasibleInstanceError("total harvest cannot deliver the bits at any rate")
    trace = IterationTrace()
    B1_tot, B2_tot = inst.total_bits
    if B1_tot == 0 and B2_tot == 0:
        grid = build_epochs(inst, cfg.horizon_hint or 0.0)
        trace.T.append(0.0)
        return Schedule.empty(grid), trace

    T0 = _initial_duration(inst)
    hint = max(cfg.horizon_hint or T0, T0)
    grid = build_epochs(inst, hint)
    st = _initial_state(inst, grid, T0)
    T_up = st.completion()
    eps = cfg.epsilon if cfg.epsilon is not None else cfg.rel_epsilon * T_up
    trace.T_up = T_up
    trace.T.append(T_up)

    E_cum = inst.energy_cum.tolist()
    B1_cum = inst.bits1_cum.tolist()
    B2_cum = inst.bits2_cum.tolist()
    lengths = grid.lengths
    ch = inst.channel
    flag = -1  # pair index; -1 means unset
    snap1, snap2 = RESIDUE_REL * B1_tot, RESIDUE_REL * B2_tot

    converged = False
    E_tot = inst.total_energy
    prev = st.snapshot()
    for n in range(1, cfg.max_iterations + 1):
        L = st.last_used()
        _reclaim_energy(st, L, E_cum)
        k = L + 1
        flag = min(flag, k - 3)
        pats = []
        e_pre = b1_pre = b2_pre = 0.0
        for i in range(k - 1):
            e1_cap = max(E_cum[i] - e_pre, 0.0)
            b11_cap = max(B1_cum[i] - b1_pre, 0.0)
            b21_cap = max(B2_cum[i] - b2_pre, 0.0)
            use_energy = i <= flag and i + 2 <= L
            p = TwoEpochProblem(
                ch, lengths[i], lengths[i + 1], st.e[i], st.e[i + 1],
                st.b1[i] + st.b1[i + 1], st.b2[i] + st.b2[i + 1],
                e1_cap, b11_cap, b21_cap,
                E_next=st.e[i + 2] if i + 2 < len(st.e) else 0.0)
            try:
                sol = minimize_energy(p) if use_energy else minimize_time(p)
            except PairInfeasibleError:
                # rounding drift: keep the pair as it is
                log.debug("pair %d left unchanged (infeasible local problem)", i)
                pats.append("--")
                e_pre += st.e[i]
                b1_pre += st.b1[i]
                b2_pre += st.b2[i]
                continue
            pats.append(sol.pattern.label())
            st.b1[i], st.b2[i], st.e[i] = sol.b11, sol.b21, sol.e1
            st.d[i] = lengths[i] if (sol.b11 > 0 or sol.b21 > 0) else 0.0
            st.b1[i + 1], st.b2[i + 1] = sol.b12, sol.b22
            if use_energy:
                st.e[i + 1] = sol.e2
                st.e[i + 2] += sol.E_transfer
                st.d[i + 1] = lengths[i + 1] if (sol.b12 > 0 or sol.b22 > 0) else 0.0
            else:
                st.e[i + 1] = max(p.budget - sol.e1, 0.0)
                st.d[i + 1] = sol.T2_used
            _fold_residue(st.b1, i, snap1)
            _fold_residue(st.b2, i, snap2)
            e_pre += st.e[i]
            b1_pre += st.b1[i]
            b2_pre += st.b2[i]
            if (flag < i < k - 2
                    and abs(b11_cap - st.b1[i]) <= FLAG_REL_TOL * max(B1_cum[i], 1e-300)
                    and abs(b21_cap - st.b2[i]) <= FLAG_REL_TOL * max(B2_cum[i], 1e-300)):
                flag = i
        if k == 1:
            pats.append(_shrink_single(st, lengths[0], E_cum[0], ch))
        T_n = st.completion()
        trace.T.append(T_n)
        trace.flags.append(flag)
        trace.patterns.append(pats)
        cur = st.snapshot()
        moved = _state_change(prev, cur, (B1_tot, B2_tot, E_tot))
        prev = cur
        if trace.T[-2] - T_n <= eps and moved <= cfg.state_tol:
            converged = True
            break
    if not converged:
        log.warning("DuOpt stopped at max_iterations=%d without meeting epsilon", cfg.max_iterations)
    trace.converged = converged
    sched = compact_gaps(st.to_schedule(), grid, ch)
    return sched, trace


def _reclaim_energy(st: _State, L: int, E_cum: list[float]) -> None:
    """Give the last used epoch every joule harvested before it that is not
    already allocated; allocations past it are dropped."""
    if L < 0:
        return
    prefix = math.fsum(st.e[:L])
    st.e[L] = max(st.e[L], E_cum[L] - prefix)
    for j in range(L + 1, len(st.e)):
        st.e[j] = 0.0
        st.d[j] = 0.0


def _state_change(prev, cur, totals) -> float:
    """Largest per-epoch change in bits or energy, relative to the totals."""
    worst = 0.0
    for old, new, tot in zip(prev, cur, totals):
        if tot > 0:
            worst = max(worst, max(abs(x - y) for x, y in zip(old, new)) / tot)
    return worst


def _fold_residue(bits: list[float], i: int, snap: float) -> None:
    # a rounding residue left in epoch i+1 would pin the completion time there
    if 0.0 < bits[i + 1] <= snap:
        bits[i] += bits[i + 1]
        bits[i + 1] = 0.0


def _shrink_single(st: _State, length: float, energy: float, ch) -> str:
    """Only epoch 0 is used: finish as early as its harvest allows."""
    R = _Region(ch)
    b1, b2 = st.b1[0], st.b2[0]
    if R.energy(length, b1, b2) > energy:
        return "--"

    def f(d):
        return R.energy(d, b1, b2) - energy

    st.d[0] = _decreasing_root(f, 0.0, length, xtol=4e-16 * length, ftol=1e-14 * energy)
    st.e[0] = energy
    return "single"
