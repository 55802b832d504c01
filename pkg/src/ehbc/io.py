"""JSON instance/schedule documents and the plot table."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from typing import Any, Optional, Union

from .channel import ChannelParams, stronger_power
from .errors import EhbcError, InstanceError
from .model import ArrivalEvent, EpochAllocation, Instance, Schedule, asymptotic_feasible

log = logging.getLogger(__name__)

PLOT_HEADER = ("t", "P_total", "P_strong", "r1", "r2")


class ParseError(EhbcError, ValueError):
    """Instance or schedule document does not match the schema."""


def _num(obj: dict, key: str, default: Optional[float] = None, where: str = "") -> float:
    if key not in obj:
        if default is None:
            raise ParseError(f"missing field {where}{key}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"field {where}{key} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ParseError(f"field {where}{key} must be finite")
    return v


def parse_instance(doc: Union[str, bytes, dict]) -> Instance:
    """Validate an instance document (JSON text or already-decoded dict).

    Events may come in any order; they are sorted and coincident ones merged.
    An instance with no finite completion time only logs a warning here.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    chd = doc.get("channel")
    if not isinstance(chd, dict):
        raise ParseError("missing object field channel")
    evs = doc.get("events")
    if not isinstance(evs, list) or not evs:
        raise ParseError("events must be a non-empty list")
    try:
        ch = ChannelParams(_num(chd, "s1", where="channel."), _num(chd, "s2", where="channel."),
                           _num(chd, "sigma2", where="channel."),
                           _num(chd, "kappa", 0.5, where="channel."))
        events = []
        for k, e in enumerate(evs):
            if not isinstance(e, dict):
                raise ParseError(f"events[{k}] must be an object")
            w = f"events[{k}]."
            events.append(ArrivalEvent(_num(e, "t", where=w), _num(e, "energy", 0.0, w),
                                       _num(e, "bits1", 0.0, w), _num(e, "bits2", 0.0, w)))
        window = _num(doc, "window", where="") if "window" in doc else None
        inst = Instance(ch, events, window)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if not asymptotic_feasible(inst):
        log.warning("instance has no finite completion time with its total harvest")
    return inst


def instance_to_dict(inst: Instance) -> dict:
    ch = inst.channel
    return {
        "channel": {"s1": ch.s1, "s2": ch.s2, "sigma2": ch.sigma2, "kappa": ch.kappa},
        "window": inst.window,
        "events": [{"t": e.t, "energy": e.energy, "bits1": e.bits1, "bits2": e.bits2}
                   for e in inst.events],
    }


def dumps(obj: Any) -> str:
    """Deterministic JSON text; floats keep their shortest round-trip form."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def schedule_to_dict(sched: Schedule) -> dict:
    return {
        "T": sched.T,
        "epochs": [{"start": t, "power": a.power, "r1": a.r1, "r2": a.r2, "active": a.active}
                   for t, a in zip(sched.starts, sched.allocations)],
    }


def parse_schedule(doc: Union[str, bytes, dict]) -> Schedule:
    """Read a schedule document (or a solve result holding one under "schedule")."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "schedule" in doc:
        doc = doc["schedule"]
    if not isinstance(doc, dict) or not isinstance(doc.get("epochs"), list):
        raise ParseError("schedule document needs an epochs list")
    starts, allocs = [], []
    for k, e in enumerate(doc["epochs"]):
        if not isinstance(e, dict):
            raise ParseError(f"epochs[{k}] must be an object")
        w = f"epochs[{k}]."
        starts.append(_num(e, "start", where=w))
        allocs.append(EpochAllocation(_num(e, "power", 0.0, w), _num(e, "r1", 0.0, w),
                                      _num(e, "r2", 0.0, w), _num(e, "active", 0.0, w)))
    try:
        return Schedule(tuple(starts), tuple(allocs))
    except InstanceError as exc:
        raise ParseError(str(exc)) from exc


def plot_rows(ch: ChannelParams, sched: Schedule) -> list[tuple[float, ...]]:
    """Breakpoints of the piecewise-constant schedule, sorted by time.

    One row per used epoch start with the level that holds from there on,
    and a closing row of zeros at the completion time.
    """
    last = sched.last_used()
    rows = []
    for i in range(last + 1):
        a = sched.allocations[i]
        p1 = min(stronger_power(ch, a.r1), a.power) if a.active > 0 else 0.0
        if a.active > 0:
            rows.append((sched.starts[i], a.power, p1, a.r1, a.r2))
        else:
            rows.append((sched.starts[i], 0.0, 0.0, 0.0, 0.0))
    if last >= 0:
        rows.append((sched.T, 0.0, 0.0, 0.0, 0.0))
    return rows


def plot_csv(ch: ChannelParams, sched: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for row in plot_rows(ch, sched):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def schedule_csv(sched: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("start", "active", "power", "r1", "r2"))
    for t, a in zip(sched.starts, sched.allocations):
        w.writerow([repr(float(x)) for x in (t, a.active, a.power, a.r1, a.r2)])
    return buf.getvalue()
