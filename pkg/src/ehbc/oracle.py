"""Brute-force reference solvers, independent of the DuOpt code paths.

``oracle_min_time`` searches a grid of cumulative bit states at every epoch
boundary.  For a fixed horizon the cheapest way to reach each state is a
min-plus dynamic program; the horizon only enters through the last epoch,
so the outer bisection on T re-evaluates a single transition.  Each
refinement round zooms the grids around the best path, so the returned T
never increases from one round to the next.

``oracle_single_user`` handles the case where one user has no data: the
optimal power is constant between binding constraints, so every choice of
binding boundaries gives one explicit candidate schedule.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import LN2, ChannelParams
from .errors import InfeasibleInstanceError, SizeCapError
from .model import Instance, asymptotic_feasible

MAX_ORACLE_EPOCHS = 4
_CHUNK = 2_000_000  # state pairs evaluated per numpy block


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: float = 1 / 64
    refinement_rounds: int = 4
    T_tolerance: Optional[float] = None   # seconds; default 1e-10 * T
    refine_factor: int = 4
    window: int = 2                       # half-width of the zoom window, in old steps

    def __post_init__(self):
        if not 0 < self.grid_resolution < 1:
            raise ValueError("grid_resolution must lie in (0, 1)")
        if self.refinement_rounds < 1:
            raise ValueError("refinement_rounds must be >= 1")
        if self.refine_factor < 2 or self.window < 1:
            raise ValueError("refine_factor must be >= 2 and window >= 1")


@dataclass
class OracleResult:
    T: float
    round_T: list[float] = field(default_factory=list)
    path: list[tuple[float, float]] = field(default_factory=list)


def _energy(ch: ChannelParams, length, d1, d2):
    """Minimum energy to send d1, d2 bits at constant rates over ``length``."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    g = LN2 / (ch.kappa * length)
    with np.errstate(over="ignore", invalid="ignore"):
        x1 = np.minimum((d1 + d2) * g, 1400.0)
        x2 = np.minimum(d2 * g, 1400.0)
        e = length * (ch.a * np.expm1(x1) + (ch.c - ch.a) * np.expm1(x2))
    e = np.where((d1 < 0) | (d2 < 0), np.inf, e)
    return np.where((d1 == 0) & (d2 == 0), 0.0, e)


class _Grid:
    """Candidate cumulative bit pairs at one boundary."""

    def __init__(self, g1: np.ndarray, g2: np.ndarray):
        self.g1 = g1
        self.g2 = g2
        G1, G2 = np.meshgrid(g1, g2, indexing="ij")
        self.c1 = G1.ravel()
        self.c2 = G2.ravel()

    def __len__(self):
        return self.c1.size


def _axis(step: float, hi: float, cap: float) -> np.ndarray:
    if hi <= 0:
        return np.zeros(1)
    top = min(cap, hi)
    n = int(math.floor(top / step + 1e-9))
    pts = np.arange(n + 1) * step
    return np.unique(np.concatenate([pts[pts <= top], [top]]))


def _window(center: float, step: float, half: int, cap: float, total: float) -> np.ndarray:
    if total <= 0:
        return np.zeros(1)
    top = min(cap, total)
    pts = center + step * np.arange(-half, half + 1)
    pts = pts[(pts >= 0) & (pts <= top)]
    extra = [center, top] if abs(top - center) <= half * step else [center]
    if center - half * step <= 0:
        extra.append(0.0)
    return np.unique(np.concatenate([pts, extra]))


class _Search:
    def __init__(self, inst: Instance, grids: list[_Grid]):
        self.inst = inst
        self.ch = inst.channel
        self.t = inst.times
        self.E = inst.energy_cum
        self.B1, self.B2 = inst.total_bits
        self.grids = grids
        self.V: list[np.ndarray] = []
        self.parent: list[np.ndarray] = []

    def values(self, j: int) -> np.ndarray:
        """Least cumulative energy reaching each state after epoch j."""
        while len(self.V) <= j:
            k = len(self.V)
            grid = self.grids[k]
            length = self.t[k + 1] - self.t[k]
            if k == 0:
                v = _energy(self.ch, length, grid.c1, grid.c2)
                par = np.zeros(len(grid), dtype=int)
            else:
                v, par = self._transition(self.V[k - 1], self.grids[k - 1], grid, length)
            v = np.where(v <= self.E[k] * (1 + 1e-12), v, np.inf)
            self.V.append(v)
            self.parent.append(par)
        return self.V[j]

    def _transition(self, v_prev, g_prev: _Grid, g_new: _Grid, length):
        best = np.full(len(g_new), np.inf)
        arg = np.zeros(len(g_new), dtype=int)
        live = np.flatnonzero(np.isfinite(v_prev))
        block = max(1, _CHUNK // max(len(g_new), 1))
        for lo in range(0, live.size, block):
            idx = live[lo:lo + block]
            cost = v_prev[idx, None] + _energy(
                self.ch, length,
                g_new.c1[None, :] - g_prev.c1[idx, None],
                g_new.c2[None, :] - g_prev.c2[idx, None])
            k = np.argmin(cost, axis=0)
            c = cost[k, np.arange(len(g_new))]
            better = c < best
            best[better] = c[better]
            arg[better] = idx[k[better]]
        return best, arg

    def epoch_of(self, T: float) -> int:
        return max(j for j, tj in enumerate(self.t) if tj < T)

    def final(self, T: float) -> tuple[float, int, int]:
        """(least total energy, epoch containing T, best last state) at horizon T."""
        m = self.epoch_of(T)
        if self.inst.bits1_cum[m] < self.B1 or self.inst.bits2_cum[m] < self.B2:
            return math.inf, m, -1
        length = T - self.t[m]
        if m == 0:
            return float(_energy(self.ch, length, self.B1, self.B2)), 0, -1
        if m - 1 >= len(self.grids):
            return math.inf, m, -1
        v = self.values(m - 1)
        g = self.grids[m - 1]
        tot = v + _energy(self.ch, length, self.B1 - g.c1, self.B2 - g.c2)
        k = int(np.argmin(tot))
        return float(tot[k]), m, k

    def feasible(self, T: float) -> bool:
        e, m, _ = self.final(T)
        return e <= self.E[m] * (1 + 1e-12)

    def path(self, T: float) -> list[tuple[float, float]]:
        _, m, k = self.final(T)
        out = []
        for j in range(m - 1, -1, -1):
            g = self.grids[j]
            out.append((float(g.c1[k]), float(g.c2[k])))
            k = int(self.parent[j][k])
        return out[::-1]


def _bisect_T(s: _Search, lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if s.feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def oracle_search(inst: Instance, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Grid search with refinement; returns the final T and the per-round history."""
    n = len(inst.events)
    if n > MAX_ORACLE_EPOCHS:
        raise SizeCapError(f"oracle handles at most {MAX_ORACLE_EPOCHS} epochs, instance has {n}")
    B1, B2 = inst.total_bits
    if B1 == 0 and B2 == 0:
        return OracleResult(0.0, [0.0])
    if not asymptotic_feasible(inst):
        raise InfeasibleInstanceError("total harvest cannot deliver the bits at any rate")

    caps1 = inst.bits1_cum
    caps2 = inst.bits2_cum
    h1, h2 = B1 * cfg.grid_resolution, B2 * cfg.grid_resolution
    grids = [_Grid(_axis(h1, B1, caps1[j]) if B1 > 0 else np.zeros(1),
                   _axis(h2, B2, caps2[j]) if B2 > 0 else np.zeros(1))
             for j in range(n - 1)]
    s = _Search(inst, grids)

    t_last = inst.times[-1]
    hi = t_last + max(t_last, 1.0)
    for _ in range(400):
        if s.feasible(hi):
            break
        hi = t_last + 2.0 * (hi - t_last)
    else:
        raise InfeasibleInstanceError("no horizon found on the oracle grid")
    tol = cfg.T_tolerance if cfg.T_tolerance is not None else 1e-10 * hi
    T = _bisect_T(s, 0.0, hi, tol)
    res = OracleResult(T, [T])

    for _ in range(cfg.refinement_rounds):
        path = s.path(T)
        h1 /= cfg.refine_factor
        h2 /= cfg.refine_factor
        half = cfg.window * cfg.refine_factor
        grids = [_Grid(_window(c1, h1, half, caps1[j], B1), _window(c2, h2, half, caps2[j], B2))
                 for j, (c1, c2) in enumerate(path)]
        s = _Search(inst, grids)
        # the previous best path is still on the grid, so T stays feasible
        if s.feasible(T):
            T = min(T, _bisect_T(s, 0.0, T, tol))
        res.round_T.append(T)
    res.T = T
    res.path = s.path(T) if s.feasible(T) else []
    return res


def oracle_min_time(inst: Instance, cfg: OracleConfig = OracleConfig()) -> float:
    """Smallest completion time found by the refined grid search (an upper
    bound on the optimum that tightens with the grid)."""
    return oracle_search(inst, cfg).T


# --- single user ----------------------------------------------------------

def _single_rate(ch: ChannelParams, gain: float, P: float) -> float:
    return ch.kappa * math.log2(1.0 + gain * P / ch.sigma2)


def _single_power(ch: ChannelParams, gain: float, r: float) -> float:
    x = r / ch.kappa * LN2
    if x > 700:
        return math.inf
    return ch.sigma2 / gain * math.expm1(x)


def _single_feasible(times: Sequence[float], E: Sequence[float], B: Sequence[float],
                     ch: ChannelParams, gain: float, T: float, rtol: float = 1e-12) -> bool:
    m = max(j for j, tj in enumerate(times) if tj < T)
    total = B[-1]
    if B[m] < total * (1 - rtol):
        return False
    bounds = list(times[1:m + 1]) + [T]
    # interior boundaries 0..m-1 each free, energy-binding or data-binding
    for status in itertools.product((0, 1, 2), repeat=m):
        if _candidate_ok(bounds, E, B, ch, gain, status, total, rtol):
            return True
    return False


def _candidate_ok(bounds, E, B, ch, gain, status, total, rtol) -> bool:
    m = len(status)
    e_used = b_used = 0.0
    t0 = 0.0
    seg_start = 0
    powers = []
    for j in range(m + 1):
        if j < m and status[j] == 0:
            continue
        end = bounds[j]
        length = end - t0
        if length <= 0:
            return False
        if j == m:
            r = (total - b_used) / length
            P = _single_power(ch, gain, r)
        elif status[j] == 1:
            P = (E[j] - e_used) / length
            if P < 0:
                return False
            r = _single_rate(ch, gain, P)
        else:
            r = (B[j] - b_used) / length
            if r < 0:
                return False
            P = _single_power(ch, gain, r)
        powers.append((seg_start, j, P, r))
        e_used += P * length
        b_used += r * length
        t0 = end
        seg_start = j + 1
    # audit every boundary, including the free ones
    e = b = 0.0
    t_prev = 0.0
    for a, bnd, P, r in powers:
        for j in range(a, bnd + 1):
            dt = bounds[j] - t_prev
            e += P * dt
            b += r * dt
            t_prev = bounds[j]
            if e > E[j] * (1 + rtol) + 1e-300 or b > B[j] * (1 + rtol) + 1e-300:
                return False
    return True


def oracle_single_user(E_curve: Sequence[tuple[float, float]], B_curve: Sequence[tuple[float, float]],
                       ch: ChannelParams, user: int = 1, rtol: float = 1e-13) -> float:
    """Minimum completion time for one user.

    ``E_curve`` and ``B_curve`` list (t, amount) arrivals.  ``user`` picks the
    channel gain (1 = stronger, 2 = weaker).
    """
    if user not in (1, 2):
        raise ValueError("user must be 1 or 2")
    gain = ch.s1 if user == 1 else ch.s2
    times = sorted({t for t, _ in E_curve} | {t for t, _ in B_curve} | {0.0})
    if len(times) > MAX_ORACLE_EPOCHS:
        raise SizeCapError(f"oracle handles at most {MAX_ORACLE_EPOCHS} epochs, got {len(times)}")
    E = np.cumsum([sum(a for t, a in E_curve if t == tj) for tj in times])
    B = np.cumsum([sum(a for t, a in B_curve if t == tj) for tj in times])
    total = float(B[-1])
    if total <= 0:
        return 0.0
    if not E[-1] > ch.sigma2 * LN2 / ch.kappa * total / gain:
        raise InfeasibleInstanceError("harvest cannot deliver the demand at any rate")
    t_last = times[-1]
    hi = t_last + max(t_last, 1.0)
    for _ in range(400):
        if _single_feasible(times, E, B, ch, gain, hi):
            break
        hi = t_last + 2.0 * (hi - t_last)
    else:
        raise InfeasibleInstanceError("no finite completion time found")
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _single_feasible(times, E, B, ch, gain, mid):
            hi = mid
        else:
            lo = mid
    return hi


def single_user_curves(inst: Instance, user: int = 1):
    """(E_curve, B_curve) arguments for ``oracle_single_user`` from an instance."""
    E_curve = [(ev.t, ev.energy) for ev in inst.events]
    B_curve = [(ev.t, ev.bits1 if user == 1 else ev.bits2) for ev in inst.events]
    return E_curve, B_curve
