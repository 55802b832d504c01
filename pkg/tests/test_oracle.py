import math

import numpy as np
import pytest

from ehbc.channel import ChannelParams
from ehbc.duopt import solve
from ehbc.errors import InfeasibleInstanceError, SizeCapError
from ehbc.generate import GenSpec, random_instance
from ehbc.model import ArrivalEvent, Instance
from ehbc.oracle import (OracleConfig, oracle_min_time, oracle_search, oracle_single_user,
                         single_user_curves)

CH = ChannelParams(1.0, 0.5, 1.0, 0.5)


def _single_harvest_time(B, E, s, ch):
    """Solve B = kappa*T*log2(1 + s*E/(T*sigma2)) for T by bisection."""
    f = lambda T: ch.kappa * T * math.log2(1 + s * E / (T * ch.sigma2)) - B
    lo, hi = 1e-9, 1.0
    while f(hi) < 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return hi


def test_zero_bits():
    assert oracle_min_time(Instance(CH, [ArrivalEvent(0, 1.0)])) == 0.0


def test_single_harvest_formula_stronger():
    T = oracle_single_user([(0, 3.0)], [(0, 1.5)], CH, user=1)
    assert T == pytest.approx(_single_harvest_time(1.5, 3.0, CH.s1, CH), rel=1e-10)


def test_single_harvest_formula_weaker():
    T = oracle_single_user([(0, 3.0)], [(0, 1.0)], CH, user=2)
    assert T == pytest.approx(_single_harvest_time(1.0, 3.0, CH.s2, CH), rel=1e-10)


def test_single_user_grid_oracle_agree():
    inst = Instance(CH, [ArrivalEvent(0, 1.0, 1.0), ArrivalEvent(1.0, 2.0, 0.5)])
    T1 = oracle_single_user(*single_user_curves(inst, 1), CH, user=1)
    assert oracle_min_time(inst) == pytest.approx(T1, rel=1e-3)


def test_size_cap():
    events = [ArrivalEvent(0, 2.0, 1.0)] + [ArrivalEvent(t, 1.0) for t in (1, 2, 3, 4)]
    with pytest.raises(SizeCapError):
        oracle_min_time(Instance(CH, events))


def test_infeasible():
    with pytest.raises(InfeasibleInstanceError):
        oracle_min_time(Instance(CH, [ArrivalEvent(0, 1.0, 1.0, 1.0)]))


def test_rounds_never_increase_and_are_deterministic(small_instance):
    res = oracle_search(small_instance)
    assert len(res.round_T) == 1 + 4  # initial grid plus refinements
    assert all(b <= a for a, b in zip(res.round_T, res.round_T[1:]))
    assert oracle_search(small_instance).T == res.T


@pytest.mark.parametrize("seed", range(5))
def test_oracle_never_beats_duopt(seed):
    # the oracle's grid restricts the allocation, so it is an upper bound
    inst = random_instance(np.random.default_rng(seed), GenSpec(n_events=(2, 3)))
    sched, _ = solve(inst)
    T = oracle_min_time(inst)
    assert T >= sched.T * (1 - 1e-9)
    assert T == pytest.approx(sched.T, rel=1e-2)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(grid_resolution=0.0)
    with pytest.raises(ValueError):
        OracleConfig(refinement_rounds=0)
