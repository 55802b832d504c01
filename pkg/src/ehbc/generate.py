"""Seeded random instance generator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelParams
from .model import ArrivalEvent, Instance, asymptotic_feasible


@dataclass(frozen=True)
class GenSpec:
    n_events: tuple[int, int] = (2, 3)
    energy: tuple[float, float] = (0.5, 5.0)
    bits: tuple[float, float] = (0.2, 2.0)
    gap: tuple[float, float] = (0.3, 2.0)
    s2_ratio: tuple[float, float] = (0.1, 0.8)
    p_energy: float = 0.7      # chance a later event carries energy
    p_bits1: float = 0.6
    p_bits2: float = 0.5       # ignored under WUFBC
    wufbc: bool = True
    kappa: float = 0.5


def random_instance(rng: np.random.Generator, spec: GenSpec = GenSpec(),
                    channel: Optional[ChannelParams] = None) -> Instance:
    """Draw one instance; retried until it is asymptotically feasible."""
    while True:
        ch = channel or ChannelParams(1.0, float(rng.uniform(*spec.s2_ratio)), 1.0, spec.kappa)
        n = int(rng.integers(spec.n_events[0], spec.n_events[1] + 1))
        t = 0.0
        events = [ArrivalEvent(0.0, float(rng.uniform(*spec.energy)),
                               float(rng.uniform(*spec.bits)), float(rng.uniform(*spec.bits)))]
        for _ in range(n - 1):
            t += float(rng.uniform(*spec.gap))
            e = float(rng.uniform(*spec.energy)) if rng.random() < spec.p_energy else 0.0
            b1 = float(rng.uniform(*spec.bits)) if rng.random() < spec.p_bits1 else 0.0
            b2 = 0.0
            if not spec.wufbc and rng.random() < spec.p_bits2:
                b2 = float(rng.uniform(*spec.bits))
            if e == 0 and b1 == 0 and b2 == 0:
                e = float(rng.uniform(*spec.energy))
            events.append(ArrivalEvent(t, e, b1, b2))
        inst = Instance(ch, events)
        if asymptotic_feasible(inst):
            return inst


def khz_example() -> Instance:
    """1 kHz bandwidth, noise density 1e-12 W/Hz, path losses 70 dB and 75 dB.

    Harvests are in joules and data in bits; all weaker-user data is
    present at t = 0.
    """
    ch = ChannelParams(s1=1e-7, s2=10 ** -7.5, sigma2=1e-9, kappa=1000.0)
    events = [
        ArrivalEvent(0.0, energy=0.040, bits1=1000.0, bits2=1000.0),
        ArrivalEvent(1.5, energy=0.020, bits1=500.0),
        ArrivalEvent(3.0, bits1=800.0),
        ArrivalEvent(4.0, energy=0.030),
        ArrivalEvent(6.0, energy=0.025, bits1=400.0),
    ]
    return Instance(ch, events)
