"""Two-epoch local optimizers used by the DuOpt sweep.

A local problem covers epoch ``i`` (length ``T1``, fully usable) and epoch
``i + 1`` (up to ``T2_max``).  The three constraints that may bind at the
boundary are the energy cap and the two data caps of epoch ``i``; every
local optimum has one of the 2^3 activity patterns.  For a fixed epoch-2
duration each pattern reduces to closed forms:

* power is equal across the boundary unless the energy cap binds,
* the stronger user's rate is equal across the boundary unless its data cap
  binds (with the energy cap binding this follows from the KKT conditions,
  since (p1 + sigma2/s1) / (p1 + sigma2/s2) is strictly increasing in p1),
* with only the weaker cap binding, the sum rate r1 + r2 is equal.

Energy minimization evaluates all patterns at ``T2_max`` and keeps the
cheapest feasible candidate.  Time minimization finds the shortest epoch-2
duration whose minimal energy fits the pair's budget; the minimal energy is
nonincreasing in the duration, so a bracketing root search applies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .channel import LN2, MAX_EXPONENT, ChannelParams
from .errors import ConvergenceError, NoCandidateError, PairInfeasibleError

MAX_ITER = 200
BITS_ABS_TOL = 1e-12
BITS_REL_TOL = 1e-10
TIE_REL = 1e-9
_CAP_SLACK = 1e-12


class CasePattern(NamedTuple):
    energy_active: bool
    b1_active: bool
    b2_active: bool

    @property
    def n_active(self) -> int:
        return int(self.energy_active) + int(self.b1_active) + int(self.b2_active)

    def label(self) -> str:
        return "".join("T" if f else "F" for f in self)


# fewest active constraints first, then lexicographic (False < True)
ALL_PATTERNS: tuple[CasePattern, ...] = tuple(sorted(
    (CasePattern(e, b1, b2) for e in (False, True) for b1 in (False, True) for b2 in (False, True)),
    key=lambda p: (p.n_active, tuple(p)),
))
NO_ACTIVE = ALL_PATTERNS[0]


@dataclass(frozen=True)
class TwoEpochProblem:
    ch: ChannelParams
    T1: float
    T2_max: float
    E1: float
    E2: float
    b1_total: float
    b2_total: float
    e1_cap: float
    b11_cap: float
    b21_cap: float
    E_next: float = 0.0

    def __post_init__(self):
        for name in ("T1", "T2_max", "E1", "E2", "b1_total", "b2_total",
                     "e1_cap", "b11_cap", "b21_cap", "E_next"):
            v = getattr(self, name)
            if not v >= 0:
                raise ValueError(f"{name} must be nonnegative, got {v!r}")
        if self.T1 <= 0:
            raise ValueError("first epoch of a local problem must have positive length")

    @property
    def budget(self) -> float:
        return self.E1 + self.E2


@dataclass(frozen=True)
class Candidate:
    pattern: CasePattern
    T2: float
    b11: float
    b21: float
    e1: float
    e2: float

    @property
    def energy(self) -> float:
        return self.e1 + self.e2


@dataclass(frozen=True)
class TwoEpochSolution:
    epoch1: tuple[float, float, float]
    epoch2: tuple[float, float, float]
    T2_used: float
    E_transfer: float
    pattern: CasePattern
    b11: float
    b21: float
    b12: float
    b22: float
    e1: float
    e2: float

    @property
    def consumed(self) -> float:
        return self.e1 + self.e2


class _Region:
    """Scalar rate-region helpers bound to one channel (hot path)."""
    __slots__ = ("a", "c", "k", "g")

    def __init__(self, ch: ChannelParams):
        self.a = ch.a
        self.c = ch.c
        self.k = ch.kappa
        self.g = LN2 / ch.kappa

    def p1(self, r1):
        x = r1 * self.g
        if x > MAX_EXPONENT * LN2:
            return math.inf
        return self.a * math.expm1(x)

    def power(self, r1, r2):
        x1 = r1 * self.g
        x2 = r2 * self.g
        if x1 > MAX_EXPONENT * LN2 or x2 > MAX_EXPONENT * LN2:
            return math.inf
        p1 = self.a * math.expm1(x1)
        return p1 + math.expm1(x2) * (p1 + self.c)

    def energy(self, T, b1, b2):
        if b1 <= 0 and b2 <= 0:
            return 0.0
        if T <= 0:
            return math.inf
        return T * self.power(max(b1, 0.0) / T, max(b2, 0.0) / T)

    def h2(self, P, r1):
        """Weaker rate at power P given r1; negative when r1 is unreachable."""
        return self.k * math.log2((P + self.c) / (self.p1(r1) + self.c))

    def h1(self, P, r2):
        """Stronger rate at power P given r2; None when r2 is unreachable."""
        alpha_P = (P + self.c) * 2.0 ** (-r2 / self.k) - self.c
        if alpha_P < 0:
            if alpha_P > -1e-12 * (P + self.c):
                return 0.0
            return None
        return self.k * math.log2(1.0 + alpha_P / self.a)


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def _case_point(R: _Region, p: TwoEpochProblem, pat: CasePattern, T2: float):
    """Boundary-epoch bit split (b11, b21) for a pattern at fixed T2, or None."""
    T1, B1, B2 = p.T1, p.b1_total, p.b2_total
    C1, C2 = p.b11_cap, p.b21_cap
    tau = T1 + T2
    if pat.b1_active and C1 > B1:
        return None
    if pat.b2_active and C2 > B2:
        return None
    if not pat.energy_active:
        if pat.b1_active and pat.b2_active:
            return C1, C2
        if pat.b1_active:
            x = C1
            # equal total power across the boundary, weaker bits split freely
            lp11 = math.log(R.p1(C1 / T1) + R.c)
            lp12 = math.log(R.p1((B1 - C1) / T2) + R.c)
            lPc = (B2 * R.g + T1 * lp11 + T2 * lp12) / tau
            if lPc < lp11:
                y = 0.0
            elif lPc < lp12:
                y = B2
            else:
                y = _clamp(T1 * (lPc - lp11) / R.g, 0.0, B2)
            return x, y
        if pat.b2_active:
            # equal sum rate across the boundary
            return _clamp(T1 * (B1 + B2) / tau - C2, 0.0, B1), C2
        return T1 * B1 / tau, T1 * B2 / tau
    # energy cap binds: epoch-1 power fixed
    P1 = p.e1_cap / T1
    if pat.b1_active and pat.b2_active:
        e1 = R.energy(T1, C1, C2)
        if abs(e1 - p.e1_cap) > 1e-9 * max(p.e1_cap, 1e-300):
            return None
        return C1, C2
    if pat.b1_active:
        y = T1 * R.h2(P1, C1 / T1)
        if y < 0 or y > B2 * (1 + _CAP_SLACK):
            return None
        return C1, min(y, B2)
    if pat.b2_active:
        r11 = R.h1(P1, C2 / T1)
        if r11 is None or T1 * r11 > B1 * (1 + _CAP_SLACK):
            return None
        return min(T1 * r11, B1), C2
    # equal stronger rate across the boundary, clipped to the level curve ends
    y_hi = min(B2, T1 * R.h2(P1, 0.0))
    y_lo = max(0.0, T1 * R.h2(P1, B1 / T1)) if R.p1(B1 / T1) <= P1 else 0.0
    if y_lo > y_hi:
        return None
    r1s = B1 / tau
    y_stat = T1 * R.h2(P1, r1s) if R.p1(r1s) <= P1 else -math.inf
    y = _clamp(y_stat, y_lo, y_hi)
    r11 = R.h1(P1, y / T1)
    if r11 is None:
        return None
    return min(T1 * r11, B1), y


def _make_candidate(R: _Region, p: TwoEpochProblem, pat: CasePattern, T2: float, pt) -> Optional[Candidate]:
    x, y = pt
    B1, B2 = p.b1_total, p.b2_total
    if x < 0 or y < 0 or x > B1 * (1 + _CAP_SLACK) or y > B2 * (1 + _CAP_SLACK):
        return None
    if x > p.b11_cap * (1 + _CAP_SLACK) + 1e-300 or y > p.b21_cap * (1 + _CAP_SLACK) + 1e-300:
        return None
    x = min(x, B1, p.b11_cap)
    y = min(y, B2, p.b21_cap)
    e1 = R.energy(p.T1, x, y)
    if e1 > p.e1_cap * (1 + _CAP_SLACK) + 1e-300:
        return None
    e1 = min(e1, p.e1_cap)
    if T2 > 0:
        e2 = R.energy(T2, B1 - x, B2 - y)
    else:
        if B1 - x > _CAP_SLACK * B1 or B2 - y > _CAP_SLACK * B2:
            return None
        e2 = 0.0
    if not math.isfinite(e2):
        return None
    return Candidate(pat, T2, x, y, e1, e2)


def _zero_T2_candidate(R: _Region, p: TwoEpochProblem) -> Optional[Candidate]:
    B1, B2 = p.b1_total, p.b2_total
    if B1 > p.b11_cap * (1 + _CAP_SLACK) or B2 > p.b21_cap * (1 + _CAP_SLACK):
        return None
    e1 = R.energy(p.T1, B1, B2)
    if e1 > p.e1_cap * (1 + _CAP_SLACK) + 1e-300:
        return None
    pat = CasePattern(abs(e1 - p.e1_cap) <= 1e-9 * max(p.e1_cap, 1e-300),
                      B1 >= p.b11_cap * (1 - 1e-9) and B1 > 0,
                      B2 >= p.b21_cap * (1 - 1e-9) and B2 > 0)
    return Candidate(pat, 0.0, min(B1, p.b11_cap), min(B2, p.b21_cap), min(e1, p.e1_cap), 0.0)


def case_candidate(p: TwoEpochProblem, pattern: CasePattern, T2: float,
                   _R: Optional[_Region] = None) -> Optional[Candidate]:
    """Candidate for one activity pattern at a fixed epoch-2 duration.

    Feasibility is enforced (caps, energy cap, bit bounds); ``None`` when the
    pattern has no feasible solution.
    """
    R = _R or _Region(p.ch)
    if T2 <= 0:
        c = _zero_T2_candidate(R, p)
        return c if c is not None and c.pattern == pattern else None
    try:
        pt = _case_point(R, p, pattern, T2)
    except (ValueError, OverflowError, ZeroDivisionError):
        return None
    if pt is None:
        return None
    return _make_candidate(R, p, pattern, T2, pt)


def _better(a: Candidate, b: Optional[Candidate]) -> bool:
    if b is None:
        return True
    ea, eb = a.energy, b.energy
    if abs(ea - eb) <= TIE_REL * max(ea, eb):
        return (a.pattern.n_active, tuple(a.pattern)) < (b.pattern.n_active, tuple(b.pattern))
    return ea < eb


def best_candidate(p: TwoEpochProblem, T2: float, _R: Optional[_Region] = None) -> Optional[Candidate]:
    """Minimum-energy feasible candidate over all patterns at fixed T2."""
    R = _R or _Region(p.ch)
    if p.b1_total <= 0 and p.b2_total <= 0:
        return Candidate(NO_ACTIVE, T2, 0.0, 0.0, 0.0, 0.0)
    if T2 <= 0:
        return _zero_T2_candidate(R, p)
    best = None
    for pat in ALL_PATTERNS:
        c = case_candidate(p, pat, T2, R)
        if c is None:
            continue
        if pat == NO_ACTIVE:
            # relaxed optimum that happens to be feasible is the optimum
            return c
        if _better(c, best):
            best = c
    return best


def min_pair_energy(p: TwoEpochProblem, T2: float) -> float:
    c = best_candidate(p, T2)
    return math.inf if c is None else c.energy


def _decreasing_root(f: Callable[[float], float], lo: float, hi: float,
                     xtol: float, ftol: float) -> float:
    """Smallest x in (lo, hi] with f(x) <= 0 for nonincreasing f, f(hi) <= 0 < f(lo).

    Bisection until both ends are finite, then Illinois false position;
    the returned point always satisfies f(x) <= 0.
    """
    f_hi = f(hi)
    f_lo = math.inf
    it = 0
    while not math.isfinite(f_lo):
        if hi - lo <= xtol:
            return hi
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        it += 1
        if fm <= 0:
            hi, f_hi = mid, fm
        elif math.isfinite(fm):
            lo, f_lo = mid, fm
        else:
            lo = mid
        if it > MAX_ITER:
            raise ConvergenceError("root bracket search did not converge")
    side = 0
    while hi - lo > xtol and -f_hi > ftol:
        it += 1
        if it > MAX_ITER:
            raise ConvergenceError("local time minimization did not converge")
        x = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        if not (lo < x < hi):
            x = 0.5 * (lo + hi)
        # keep a bisection step in the mix so the bracket always shrinks
        if it % 4 == 0:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx <= 0:
            hi, f_hi = x, fx
            if side == -1:
                f_lo *= 0.5
            side = -1
        else:
            lo, f_lo = x, fx
            if side == 1:
                f_hi *= 0.5
            side = 1
    return hi


def _solution(p: TwoEpochProblem, c: Candidate, T2_used: float, e2: float,
              transfer: float) -> TwoEpochSolution:
    b12 = max(p.b1_total - c.b11, 0.0)
    b22 = max(p.b2_total - c.b21, 0.0)
    ep1 = (c.e1 / p.T1, c.b11 / p.T1, c.b21 / p.T1)
    ep2 = (e2 / T2_used, b12 / T2_used, b22 / T2_used) if T2_used > 0 else (0.0, 0.0, 0.0)
    return TwoEpochSolution(ep1, ep2, T2_used, transfer, c.pattern,
                            c.b11, c.b21, b12, b22, c.e1, e2)


def minimize_energy(p: TwoEpochProblem) -> TwoEpochSolution:
    """Cheapest delivery of the pair's bits over the full length T1 + T2_max.

    Energy left over from the pair's allocation is reported as
    ``E_transfer`` for the epoch after the pair.
    """
    c = best_candidate(p, p.T2_max)
    if c is None:
        raise PairInfeasibleError("no feasible split of the pair's bits")
    transfer = p.budget - c.energy
    if transfer < -1e-9 * max(p.budget, c.energy, 1e-300):
        raise PairInfeasibleError(
            f"pair needs {c.energy:g} J but holds {p.budget:g} J")
    return _solution(p, c, p.T2_max, c.e2, max(transfer, 0.0))


def minimize_time(p: TwoEpochProblem) -> TwoEpochSolution:
    """Shortest use of the second epoch that delivers the pair's bits within
    the pair's energy budget.  The budget is spent in full unless the bits
    fit in the first epoch alone."""
    R = _Region(p.ch)
    budget = p.budget
    if p.b1_total <= 0 and p.b2_total <= 0:
        c = Candidate(NO_ACTIVE, 0.0, 0.0, 0.0, 0.0, 0.0)
        return _solution(p, c, 0.0, budget, 0.0)
    etol = 1e-9 * max(budget, 1e-300)

    c0 = _zero_T2_candidate(R, p)
    if c0 is not None and c0.energy <= budget + etol:
        return _solution(p, c0, 0.0, budget - c0.e1, 0.0)
    c_max = best_candidate(p, p.T2_max, R)
    if c_max is None or c_max.energy > budget + etol:
        raise PairInfeasibleError("pair cannot deliver its bits within T1 + T2_max")
    if c_max.energy >= budget:
        T2 = p.T2_max
    else:
        def f(t):
            c = best_candidate(p, t, R)
            return math.inf if c is None else c.energy - budget

        T2 = _decreasing_root(f, 0.0, p.T2_max, xtol=4e-16 * p.T2_max,
                              ftol=1e-14 * budget)
    c = best_candidate(p, T2, R)
    return _solution(p, c, T2, max(budget - c.e1, c.e2), 0.0)


def solve_case(p: TwoEpochProblem, pattern: CasePattern, objective: str = "energy") -> Candidate:
    """Candidate for a single activity pattern.

    ``objective="energy"`` evaluates the pattern at ``T2_max``;
    ``objective="time"`` returns the shortest T2 at which the pattern's
    candidate fits the budget (bisection over T2).
    """
    R = _Region(p.ch)
    if objective == "energy":
        c = case_candidate(p, pattern, p.T2_max, R)
        if c is None:
            raise NoCandidateError(f"pattern {pattern.label()} has no feasible solution")
        return c
    if objective != "time":
        raise ValueError("objective must be 'energy' or 'time'")
    budget = p.budget
    etol = 1e-9 * max(budget, 1e-300)
    c0 = case_candidate(p, pattern, 0.0, R)
    if c0 is not None and c0.energy <= budget + etol:
        return c0
    c_max = case_candidate(p, pattern, p.T2_max, R)
    if c_max is None or c_max.energy > budget + etol:
        raise NoCandidateError(f"pattern {pattern.label()} cannot meet the budget")

    def f(t):
        c = case_candidate(p, pattern, t, R)
        return math.inf if c is None else c.energy - budget

    lo, hi = 0.0, p.T2_max
    for _ in range(MAX_ITER):
        if hi - lo <= 4e-16 * p.T2_max:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return case_candidate(p, pattern, hi, R)


# --- only-stronger-cap-active closed forms ----------------------------------

def b2_delivered_b1_active(ch: ChannelParams, E: float, T1: float, B11: float,
                           B12: float, T2: float) -> float:
    """Weaker-user bits carried over T1 + T2 at constant total power
    E / (T1 + T2) when the stronger user sends B11 then B12."""
    R = _Region(ch)
    P = E / (T1 + T2)
    out = T1 * R.k * math.log2((P + R.c) / (R.p1(B11 / T1) + R.c))
    if T2 > 0:
        out += T2 * R.k * math.log2((P + R.c) / (R.p1(B12 / T2) + R.c))
    elif B12 > 0:
        out -= B12
    return out


def b1_active_energy_closed_form(ch: ChannelParams, T1: float, T2: float, B11: float,
                                 B12: float, B2: float) -> dict:
    """Minimum pair energy with the stronger cap pinned at B11 and power held
    constant across the boundary (weaker rates allowed to be any sign)."""
    a, c, k = ch.a, ch.c, ch.kappa
    P11 = a * math.expm1(B11 / (k * T1) * LN2)
    P12 = a * math.expm1(B12 / (k * T2) * LN2)
    s2, sig = ch.s2, ch.sigma2
    logterm = (B2 / k * LN2 + T1 * math.log(P11 * s2 + sig) + T2 * math.log(P12 * s2 + sig)) / (T1 + T2)
    P21 = -P11 + (math.exp(logterm) - sig) / s2
    P22 = P11 + P21 - P12
    return {"P11": P11, "P12": P12, "P21": P21, "P22": P22, "E_min": (P11 + P21) * (T1 + T2)}


def bisect_T2_b1_active(p: TwoEpochProblem, B11: Optional[float] = None) -> float:
    """Epoch-2 duration at which the constant-power, stronger-cap-active
    allocation carries exactly the weaker user's bits (bisection; the
    carried bits are increasing and concave in T2)."""
    ch = p.ch
    E = p.budget
    B11 = p.b11_cap if B11 is None else B11
    B12 = p.b1_total - B11
    target = p.b2_total
    if B12 < 0:
        raise ValueError("stronger-user cap exceeds the pair's stronger bits")

    def B2(t):
        try:
            return b2_delivered_b1_active(ch, E, p.T1, B11, B12, t)
        except (OverflowError, ValueError):
            return -math.inf

    tol = max(BITS_ABS_TOL, BITS_REL_TOL * target)
    top = B2(p.T2_max)
    if target > top + tol:
        raise ValueError(f"target {target:g} exceeds reachable {top:g} bits")
    if abs(target - top) <= tol:
        return p.T2_max
    lo, hi = 0.0, p.T2_max
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if B2(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2e-16 * p.T2_max:
            break
    else:
        raise ConvergenceError("bisection on T2 did not converge")
    t = 0.5 * (lo + hi)
    if abs(B2(t) - target) > max(tol, 1e-6 * abs(target)):
        raise ConvergenceError("bisection on T2 missed the bit target")
    return t
