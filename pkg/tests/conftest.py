import numpy as np
import pytest

from ehbc.generate import GenSpec, random_instance
from ehbc.channel import ChannelParams
from ehbc.model import ArrivalEvent, Instance


def draw(seed: int, count: int, spec: GenSpec) -> list[Instance]:
    rng = np.random.default_rng(seed)
    return [random_instance(rng, spec) for _ in range(count)]


def flowright(seed: int, count: int) -> list[Instance]:
    """All data at t = 0; later events carry energy only."""
    rng = np.random.default_rng(seed)
    spec = GenSpec(p_energy=1.0, p_bits1=0.0)
    return [random_instance(rng, spec) for _ in range(count)]


@pytest.fixture
def unit_channel():
    return ChannelParams(1.0, 0.5, 1.0, 0.5)


@pytest.fixture
def small_instance(unit_channel):
    return Instance(unit_channel, [ArrivalEvent(0, 3.0, 0.5, 0.8), ArrivalEvent(0.8, 4.0),
                                   ArrivalEvent(2.0, 3.0, 1.0)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
