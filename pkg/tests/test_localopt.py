import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehbc.channel import ChannelParams, epoch_energy
from ehbc.errors import PairInfeasibleError
from ehbc.localopt import (ALL_PATTERNS, CasePattern, TwoEpochProblem, b1_active_energy_closed_form,
                           b2_delivered_b1_active, best_candidate, bisect_T2_b1_active,
                           minimize_energy, minimize_time)

CH = ChannelParams(1.0, 0.4, 1.0, 0.5)


def _problem(rng, ch=CH):
    T1, T2 = rng.uniform(0.3, 2.0, 2)
    b1, b2 = rng.uniform(0.1, 1.5, 2)
    E = epoch_energy(ch, T1 + T2, b1, b2) * rng.uniform(1.2, 3.0)
    E1 = E * rng.uniform(0.2, 0.9)
    return TwoEpochProblem(ch, T1, T2, E1, E - E1, b1, b2, E1,
                           b1 * rng.uniform(0.2, 1.0), b2 * rng.uniform(0.2, 1.0))


def _brute(p, n=61):
    """Cheapest split on a grid of first-epoch bit amounts."""
    best = math.inf
    for f1, f2 in itertools.product(np.linspace(0, 1, n), repeat=2):
        b11, b21 = f1 * p.b11_cap, f2 * p.b21_cap
        e1 = epoch_energy(p.ch, p.T1, b11, b21)
        if e1 > p.e1_cap:
            continue
        e2 = epoch_energy(p.ch, p.T2_max, p.b1_total - b11, p.b2_total - b21)
        best = min(best, e1 + e2)
    return best


def test_patterns_enumerated_fewest_active_first():
    assert len(ALL_PATTERNS) == 8
    assert ALL_PATTERNS[0] == CasePattern(False, False, False)
    assert [p.n_active for p in ALL_PATTERNS] == sorted(p.n_active for p in ALL_PATTERNS)


@pytest.mark.parametrize("seed", range(15))
def test_energy_min_beats_brute_force(seed):
    p = _problem(np.random.default_rng(seed))
    c = best_candidate(p, p.T2_max)
    assert c is not None
    assert c.b11 <= p.b11_cap * (1 + 1e-9) and c.b21 <= p.b21_cap * (1 + 1e-9)
    assert c.e1 <= p.e1_cap * (1 + 1e-9)
    assert c.energy <= _brute(p) * (1 + 1e-9)
    # reported energies agree with the region
    assert c.e1 == pytest.approx(epoch_energy(CH, p.T1, c.b11, c.b21), rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_time_min_conserves_bits_and_energy(seed):
    p = _problem(np.random.default_rng(100 + seed))
    sol = minimize_time(p)
    assert sol.b11 + sol.b12 == pytest.approx(p.b1_total, rel=1e-9)
    assert sol.b21 + sol.b22 == pytest.approx(p.b2_total, rel=1e-9)
    assert sol.consumed + sol.E_transfer == pytest.approx(p.budget, rel=1e-9)
    assert 0 <= sol.T2_used <= p.T2_max * (1 + 1e-12)
    # a shorter second epoch cannot carry the bits within budget
    if sol.T2_used > 1e-9:
        shorter = best_candidate(p, sol.T2_used * (1 - 1e-6))
        assert shorter is None or shorter.energy > p.budget * (1 - 1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_energy_min_is_no_costlier_than_time_min(seed):
    p = _problem(np.random.default_rng(200 + seed))
    assert minimize_energy(p).consumed <= minimize_time(p).consumed * (1 + 1e-9)


def test_energy_min_rejects_short_budget():
    p = TwoEpochProblem(CH, 1.0, 1.0, 0.01, 0.01, 1.0, 1.0, 0.01, 1.0, 1.0)
    with pytest.raises(PairInfeasibleError):
        minimize_energy(p)


@settings(max_examples=100, deadline=None)
@given(T1=st.floats(0.2, 3.0), T2=st.floats(0.2, 3.0), B11=st.floats(0.05, 1.0),
       B12=st.floats(0.05, 1.0), B2=st.floats(0.05, 1.0))
def test_closed_form_carries_the_weaker_bits(T1, T2, B11, B12, B2):
    cf = b1_active_energy_closed_form(CH, T1, T2, B11, B12, B2)
    assert cf["P11"] + cf["P21"] == pytest.approx(cf["P12"] + cf["P22"], rel=1e-9)
    back = b2_delivered_b1_active(CH, cf["E_min"], T1, B11, B12, T2)
    assert back == pytest.approx(B2, rel=1e-8, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_bisect_recovers_duration(seed):
    rng = np.random.default_rng(seed)
    T1 = rng.uniform(0.3, 2.0)
    B11, B12 = rng.uniform(0.1, 1.0, 2)
    E = rng.uniform(2.0, 8.0)
    T2 = rng.uniform(0.2, 3.0)
    B2 = b2_delivered_b1_active(CH, E, T1, B11, B12, T2)
    if B2 <= 0.01:
        return
    p = TwoEpochProblem(CH, T1, 4.0, E, 0.0, B11 + B12, B2, E, B11, B2)
    assert bisect_T2_b1_active(p) == pytest.approx(T2, rel=1e-9)


def test_bisect_unreachable_target():
    p = TwoEpochProblem(CH, 1.0, 1.0, 1.0, 0.0, 0.5, 50.0, 1.0, 0.2, 50.0)
    with pytest.raises(ValueError):
        bisect_T2_b1_active(p)
