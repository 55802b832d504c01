import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehbc.channel import ChannelParams
from ehbc.duopt import SolverConfig, compact_gaps, initial_schedule, solve
from ehbc.errors import InfeasibleInstanceError
from ehbc.generate import GenSpec, random_instance
from ehbc.model import (ArrivalEvent, EpochAllocation, Instance, Schedule, build_epochs,
                        check_feasibility)
from ehbc.oracle import oracle_min_time

from conftest import flowright

CH = ChannelParams(1.0, 0.5, 1.0, 0.5)

# optimal completion times from an independent convex feasibility bisection
FROZEN = [
    ([(0, 3.0, 1.0, 1.0), (1.0, 4.0, 1.5, 0)], 18.216985544521105),
    ([(0, 3.0, 0.5, 0.8), (0.8, 4.0, 0.0, 0), (2.0, 3.0, 1.0, 0)], 2.590073442401097),
    ([(0, 2.0, 1.0, 1.0), (1.0, 3.0), (1.5, 3.0)], 2.183738612707926),
]


@pytest.mark.parametrize("events,T_ref", FROZEN)
def test_frozen_optima(events, T_ref):
    inst = Instance(CH, [ArrivalEvent(*e) for e in events])
    sched, trace = solve(inst)
    assert trace.converged
    assert sched.T == pytest.approx(T_ref, rel=1e-5)
    assert check_feasibility(inst, sched).feasible


def test_initial_schedule_single_event():
    # one harvest: constant power E/T0 must carry the bits
    inst = Instance(CH, [ArrivalEvent(0, 4.0, 0.5, 0.5)])
    sched, T_up = initial_schedule(inst)
    assert T_up == pytest.approx(1.0, rel=1e-9)
    assert check_feasibility(inst, sched).feasible


def test_initial_schedule_waits_for_last_event():
    inst = Instance(CH, [ArrivalEvent(0, 3.0, 1.0, 1.0), ArrivalEvent(1.0, 4.0, 1.5)])
    sched, T_up = initial_schedule(inst)
    assert sched.allocations[0].active == 0
    assert T_up > 1.0
    assert check_feasibility(inst, sched).feasible


def test_infeasible_instance_raises():
    with pytest.raises(InfeasibleInstanceError):
        solve(Instance(CH, [ArrivalEvent(0, 1.0, 1.0, 1.0)]))


def test_zero_bits():
    sched, trace = solve(Instance(CH, [ArrivalEvent(0, 1.0)]))
    assert sched.T == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), wufbc=st.booleans())
def test_solve_properties(seed, wufbc):
    inst = random_instance(np.random.default_rng(seed), GenSpec(n_events=(1, 5), wufbc=wufbc))
    sched, trace = solve(inst)
    _, T_up = initial_schedule(inst)
    assert check_feasibility(inst, sched).feasible
    assert trace.monotone_violations() == 0
    assert sched.T <= T_up * (1 + 1e-12)
    k = len(inst.events)
    assert all(a <= b for a, b in zip(trace.flags, trace.flags[1:]))
    assert all(f <= max(k - 2, 0) for f in trace.flags)


@pytest.mark.parametrize("inst", flowright(7, 10))
def test_flowright_matches_oracle(inst):
    sched, _ = solve(inst)
    assert sched.T == pytest.approx(oracle_min_time(inst), rel=1e-2)


def test_compact_gaps_spreads_interior_epoch():
    inst = Instance(CH, [ArrivalEvent(0, 5.0, 1.0), ArrivalEvent(2.0, 1.0, 0.5)])
    grid = build_epochs(inst, 1.0)
    sched = Schedule(grid.starts, (EpochAllocation(3.0, 1.0, 0.0, 1.0),
                                   EpochAllocation(1.0, 0.5, 0.0, 1.0)))
    out = compact_gaps(sched, grid, CH)
    a = out.allocations[0]
    assert a.active == 2.0
    assert a.bits1 == pytest.approx(1.0)
    assert a.power < 3.0
    assert out.allocations[1] == sched.allocations[1]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
