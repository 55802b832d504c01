"""Two-user degraded AWGN broadcast rate region.

Rates are in bits per second with the scale constant ``kappa``: kappa = 0.5
gives the per-channel-use region, kappa = bandwidth (Hz) gives the
continuous-time region.  The stronger user (gain ``s1``) decodes and cancels
the weaker user's layer, so

    r1 = kappa * log2(1 + s1 * p1 / sigma2)
    r2 = kappa * log2(1 + s2 * p2 / (s2 * p1 + sigma2))

for a power split ``p1 + p2 = P``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InfeasibleRateError, RateRangeError

LN2 = math.log(2.0)
MAX_EXPONENT = 1000.0
_RATE_SLACK = 1e-12


@dataclass(frozen=True)
class ChannelParams:
    s1: float
    s2: float
    sigma2: float
    kappa: float = 0.5

    def __post_init__(self):
        for name in ("s1", "s2", "sigma2", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v!r}")
        if not self.s1 > self.s2:
            raise ValueError("stronger user gain s1 must exceed weaker gain s2")

    @property
    def a(self) -> float:
        """Noise-to-gain ratio of the stronger user, sigma2 / s1."""
        return self.sigma2 / self.s1

    @property
    def c(self) -> float:
        """Noise-to-gain ratio of the weaker user, sigma2 / s2."""
        return self.sigma2 / self.s2


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("rates must be nonnegative")


@dataclass(frozen=True)
class PowerSplit:
    p1: float
    p2: float

    @property
    def total(self) -> float:
        return self.p1 + self.p2

    @property
    def alpha(self) -> float:
        """Fraction of total power given to the stronger user."""
        t = self.p1 + self.p2
        return self.p1 / t if t > 0 else 0.0


def _exp2m1(x: float) -> float:
    if x > MAX_EXPONENT:
        raise RateRangeError(f"rate exponent r/kappa={x:g} exceeds {MAX_EXPONENT:g}")
    return math.expm1(x * LN2)


def stronger_power(ch: ChannelParams, r1: float) -> float:
    """Power needed by the stronger user alone to reach ``r1``."""
    return ch.a * _exp2m1(r1 / ch.kappa)


def rate_weaker(ch: ChannelParams, P: float, r1: float) -> float:
    """Largest weaker-user rate at total power ``P`` given stronger rate ``r1``."""
    if P < 0 or r1 < 0:
        raise ValueError("power and rate must be nonnegative")
    p1 = stronger_power(ch, r1)
    if p1 > P * (1 + _RATE_SLACK) + 1e-300:
        raise InfeasibleRateError(f"r1={r1:g} needs power {p1:g} > P={P:g}")
    p1 = min(p1, P)
    return ch.kappa * math.log2((ch.s2 * P + ch.sigma2) / (ch.s2 * p1 + ch.sigma2))


def rate_stronger(ch: ChannelParams, P: float, r2: float) -> float:
    """Largest stronger-user rate at total power ``P`` given weaker rate ``r2``."""
    if P < 0 or r2 < 0:
        raise ValueError("power and rate must be nonnegative")
    if P == 0:
        if r2 > 0:
            raise InfeasibleRateError("positive rate with zero power")
        return 0.0
    if r2 / ch.kappa > MAX_EXPONENT:
        raise RateRangeError(f"rate exponent r/kappa={r2 / ch.kappa:g} exceeds {MAX_EXPONENT:g}")
    r2_max = ch.kappa * math.log2(1 + ch.s2 * P / ch.sigma2)
    if r2 > r2_max * (1 + _RATE_SLACK):
        raise InfeasibleRateError(f"r2={r2:g} exceeds weaker-user limit {r2_max:g}")
    # alpha * s2 * P = (s2 P + sigma2) 2^(-r2/kappa) - sigma2
    alpha_s2P = max((ch.s2 * P + ch.sigma2) * 2.0 ** (-r2 / ch.kappa) - ch.sigma2, 0.0)
    return ch.kappa * math.log2(1 + alpha_s2P * ch.s1 / (ch.s2 * ch.sigma2))


def min_power(ch: ChannelParams, r1: float, r2: float) -> tuple[float, PowerSplit]:
    """Minimum total power supporting the rate pair ``(r1, r2)``."""
    if r1 < 0 or r2 < 0:
        raise ValueError("rates must be nonnegative")
    p1 = stronger_power(ch, r1)
    p2 = _exp2m1(r2 / ch.kappa) * (p1 + ch.c)
    return p1 + p2, PowerSplit(p1, p2)


def total_power(ch: ChannelParams, r1: float, r2: float) -> float:
    """Scalar shortcut for ``min_power(...)[0]``."""
    p1 = ch.a * _exp2m1(r1 / ch.kappa)
    return p1 + _exp2m1(r2 / ch.kappa) * (p1 + ch.c)


def epoch_energy(ch: ChannelParams, duration: float, b1: float, b2: float) -> float:
    """Energy to send ``b1``/``b2`` bits at constant rates over ``duration``."""
    if b1 <= 0 and b2 <= 0:
        return 0.0
    if duration <= 0:
        return math.inf
    try:
        return duration * total_power(ch, b1 / duration, b2 / duration)
    except RateRangeError:
        return math.inf


# --- certification of the region's structural properties -------------------

@dataclass
class RegionViolation:
    prop: str
    P: float
    r: float
    value: float


@dataclass
class RegionReport:
    points_checked: int = 0
    points_skipped: int = 0
    violations: list[RegionViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class RegionGrid:
    """Sample box: powers in [P_min, P_max], rates as fractions of the
    maximum single-user rate at that power."""
    P_min: float
    P_max: float
    n_power: int = 12
    n_rate: int = 12
    rate_frac_max: float = 0.95


def default_grid(ch: ChannelParams) -> RegionGrid:
    # span low to high SNR for both users
    return RegionGrid(P_min=0.0, P_max=50.0 * ch.c)


RateFn = Callable[[float, float], float]


def certify_region_properties(ch: ChannelParams, grid: Optional[RegionGrid] = None,
                              h1: Optional[RateFn] = None, h2: Optional[RateFn] = None,
                              rel_step: float = 1e-5, tol: float = 1e-4) -> RegionReport:
    """Finite-difference audit of the rate functions h1(P, r2), h2(P, r1).

    Checks nonnegativity, monotonicity (decreasing in r, increasing in P),
    concavity in P and in r, a nonnegative cross partial for h1 and a
    vanishing cross partial for h2.  Derivatives are scaled to be
    dimensionless before comparison with ``tol``.  Points whose stencil would
    leave the domain (P = 0 boundary, r at its maximum) are skipped.
    """
    grid = grid or default_grid(ch)
    h1 = h1 or (lambda P, r: rate_stronger(ch, P, r))
    h2 = h2 or (lambda P, r: rate_weaker(ch, P, r))
    rep = RegionReport()
    powers = np.linspace(grid.P_min, grid.P_max, grid.n_power)
    fracs = np.linspace(0.0, grid.rate_frac_max, grid.n_rate)

    for name, h, other_max in (
        ("h1", h1, lambda P: ch.kappa * math.log2(1 + ch.s2 * P / ch.sigma2)),
        ("h2", h2, lambda P: ch.kappa * math.log2(1 + ch.s1 * P / ch.sigma2)),
    ):
        for P in powers:
            for f in fracs:
                r = f * other_max(P)
                dP = rel_step * P
                dr = rel_step * max(r, other_max(P))
                if P <= 0 or dP <= 0 or r - dr < 0 or r + dr > other_max(P - dP):
                    rep.points_skipped += 1
                    continue
                try:
                    v = {(i, j): h(P + i * dP, r + j * dr)
                         for i in (-1, 0, 1) for j in (-1, 0, 1)}
                except (InfeasibleRateError, ValueError):
                    rep.points_skipped += 1
                    continue
                rep.points_checked += 1
                # dimensionless scaling: derivatives times P or r, over kappa
                k = ch.kappa
                d_P = (v[1, 0] - v[-1, 0]) / (2 * dP) * P / k
                d_r = (v[0, 1] - v[0, -1]) / (2 * dr) * dr / rel_step / k
                d_PP = (v[1, 0] - 2 * v[0, 0] + v[-1, 0]) / dP**2 * P**2 / k
                d_rr = (v[0, 1] - 2 * v[0, 0] + v[0, -1]) / dr**2 * (dr / rel_step) ** 2 / k
                d_rP = ((v[1, 1] - v[1, -1] - v[-1, 1] + v[-1, -1])
                        / (4 * dP * dr) * P * (dr / rel_step) / k)
                checks = [
                    ("nonnegative", -v[0, 0] / k),
                    ("increasing_in_P", -d_P),
                    ("decreasing_in_r", d_r),
                    ("concave_in_P", d_PP),
                    ("concave_in_r", d_rr),
                ]
                if name == "h1":
                    checks.append(("cross_partial_nonneg", -d_rP))
                else:
                    checks.append(("cross_partial_zero", abs(d_rP)))
                for prop, excess in checks:
                    if excess > tol:
                        rep.violations.append(RegionViolation(f"{name}:{prop}", float(P), float(r), excess))
    return rep
