"""Command-line harness: solve, verify, oracle, sweep and gen."""
from __future__ import annotations

import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import click
import numpy as np

from .duopt import IterationTrace, SolverConfig, solve
from .errors import InfeasibleInstanceError, SizeCapError
from .generate import GenSpec, khz_example, random_instance
from .io import (ParseError, dumps, instance_to_dict, parse_instance, parse_schedule, plot_csv,
                 schedule_csv, schedule_to_dict)
from .model import Instance, Schedule, check_feasibility
from .oracle import OracleConfig, oracle_search
from .structure import verify_structure

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_SIZE_CAP = 5

log = logging.getLogger("ehbc")


@dataclass
class RunArtifacts:
    schedule: Schedule
    trace: IterationTrace
    report: dict
    document: dict
    plot: str


def _setup_logging() -> None:
    level = os.environ.get("BCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load_instance(path: str) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_instance(text)


def _stamp(doc: dict, stamp: bool) -> dict:
    if stamp:
        doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def run_solve(inst: Instance, epsilon: Optional[float] = None, max_iters: int = 10_000,
              tol: float = 1e-7) -> RunArtifacts:
    """Solve and verify one instance; no file I/O."""
    cfg = SolverConfig(epsilon=epsilon, max_iterations=max_iters)
    sched, trace = solve(inst, cfg)
    feas = check_feasibility(inst, sched)
    report = verify_structure(inst, sched, tol).to_dict()
    doc = {
        "instance": instance_to_dict(inst),
        "schedule": schedule_to_dict(sched),
        "trace": {"T": trace.T, "flags": trace.flags, "patterns": trace.patterns,
                  "T_up": trace.T_up, "converged": trace.converged},
        "feasible": feas.feasible,
        "verification": report,
    }
    return RunArtifacts(sched, trace, report, doc, plot_csv(inst.channel, sched))


def run_verify(inst: Instance, sched: Schedule, tol: float = 1e-7) -> dict:
    feas = check_feasibility(inst, sched)
    rep = verify_structure(inst, sched, tol).to_dict()
    rep["feasible"] = feas.feasible
    return rep


def run_oracle(inst: Instance, cfg: OracleConfig = OracleConfig(),
               compare: Optional[Schedule] = None, tol: float = 1e-2) -> dict:
    res = oracle_search(inst, cfg)
    out = {"T_oracle": res.T, "round_T": res.round_T}
    if compare is not None:
        T = compare.T
        rel = abs(T - res.T) / res.T if res.T > 0 else abs(T)
        out.update({"T_schedule": T, "delta_T": T - res.T, "relative": rel, "tol": tol,
                    "pass": rel <= tol})
    return out


def _fail(code: int, msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Minimum-completion-time scheduling on an energy-harvesting broadcast channel."""
    _setup_logging()


@main.command("solve")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Result file (stdout if omitted).")
@click.option("--epsilon", type=float, default=None, help="Stop threshold on T decrease (s).")
@click.option("--max-iters", type=int, default=10_000, show_default=True)
@click.option("--tol", type=float, default=1e-7, show_default=True, help="Structural check tolerance.")
@click.option("--plot", "plot_path", type=click.Path(dir_okay=False), help="Write breakpoint CSV here.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--stamp", is_flag=True, help="Add a generation timestamp to the JSON result.")
def solve_cmd(in_path, out_path, epsilon, max_iters, tol, plot_path, fmt, stamp):
    """Run DuOpt on an instance file."""
    try:
        inst = _load_instance(in_path)
        art = run_solve(inst, epsilon, max_iters, tol)
    except ParseError as exc:
        _fail(EXIT_PARSE, str(exc))
    except InfeasibleInstanceError as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except ValueError as exc:
        _fail(EXIT_PARSE, str(exc))
    text = dumps(_stamp(art.document, stamp)) if fmt == "json" else schedule_csv(art.schedule)
    _emit(text, out_path)
    if plot_path:
        Path(plot_path).write_text(art.plot, encoding="utf-8")
    if not art.trace.converged:
        _fail(EXIT_NO_CONVERGENCE, f"no convergence within {max_iters} sweeps")


@main.command("verify")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--schedule", "sched_path", required=True, type=click.Path(dir_okay=False),
              help="Schedule document or a solve result.")
@click.option("--tol", type=float, default=1e-7, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def verify_cmd(in_path, sched_path, tol, out_path):
    """Check a schedule for feasibility and optimal-schedule structure."""
    try:
        inst = _load_instance(in_path)
        sched = parse_schedule(Path(sched_path).read_text(encoding="utf-8"))
        rep = run_verify(inst, sched, tol)
    except (ParseError, OSError, ValueError) as exc:
        _fail(EXIT_PARSE, str(exc))
    _emit(dumps(rep), out_path)
    if not (rep["ok"] and rep["feasible"]):
        sys.exit(EXIT_CHECK_FAILED)


@main.command("oracle")
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--compare", "cmp_path", type=click.Path(dir_okay=False),
              help="Schedule whose T is compared with the oracle.")
@click.option("--tol", type=float, default=1e-2, show_default=True, help="Relative T tolerance.")
@click.option("--resolution", type=float, default=1 / 64, show_default=True)
@click.option("--rounds", type=int, default=4, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def oracle_cmd(in_path, cmp_path, tol, resolution, rounds, out_path):
    """Brute-force completion time for instances of at most 4 epochs."""
    try:
        inst = _load_instance(in_path)
        sched = parse_schedule(Path(cmp_path).read_text(encoding="utf-8")) if cmp_path else None
        res = run_oracle(inst, OracleConfig(resolution, rounds), sched, tol)
    except SizeCapError as exc:
        _fail(EXIT_SIZE_CAP, str(exc))
    except InfeasibleInstanceError as exc:
        _fail(EXIT_INFEASIBLE, str(exc))
    except (ParseError, OSError, ValueError) as exc:
        _fail(EXIT_PARSE, str(exc))
    _emit(dumps(res), out_path)
    if cmp_path:
        click.echo(f"delta_T={res['delta_T']:.6g} relative={res['relative']:.3g} "
                   f"{'PASS' if res['pass'] else 'FAIL'}", err=True)
        if not res["pass"]:
            sys.exit(EXIT_CHECK_FAILED)


SWEEP_HEADER = ("file", "status", "T", "iterations", "converged", "feasible", "structure_ok", "failures")


def _sweep_one(args) -> tuple:
    path, epsilon, max_iters, tol = args
    name = Path(path).name
    try:
        art = run_solve(_load_instance(path), epsilon, max_iters, tol)
    except ParseError as exc:
        return (name, "parse-error", "", "", "", "", "", str(exc))
    except InfeasibleInstanceError:
        return (name, "infeasible", "", "", "", "", "", "")
    rep = art.report
    fails = ";".join(k for k, c in rep["checks"].items() if c["status"] == "fail")
    return (name, "ok", repr(art.schedule.T), art.trace.iterations, art.trace.converged,
            art.document["feasible"], rep["ok"], fails)


@main.command("sweep")
@click.option("--dir", "dir_path", required=True, type=click.Path(file_okay=False, exists=True))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Summary CSV (stdout if omitted).")
@click.option("--epsilon", type=float, default=None)
@click.option("--max-iters", type=int, default=10_000, show_default=True)
@click.option("--tol", type=float, default=1e-7, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes.")
def sweep_cmd(dir_path, out_path, epsilon, max_iters, tol, jobs):
    """Solve and verify every *.json instance in a directory."""
    files = sorted(str(p) for p in Path(dir_path).glob("*.json"))
    tasks = [(f, epsilon, max_iters, tol) for f in files]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    w.writerows(rows)
    _emit(buf.getvalue(), out_path)


@main.command("gen")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), help="Write inst_0000.json ... here.")
@click.option("--wufbc/--no-wufbc", default=True, show_default=True,
              help="Keep all weaker-user data at t = 0.")
@click.option("--events", nargs=2, type=int, default=(2, 3), show_default=True)
@click.option("--energy", nargs=2, type=float, default=(0.5, 5.0), show_default=True)
@click.option("--bits", nargs=2, type=float, default=(0.2, 2.0), show_default=True)
@click.option("--gap", nargs=2, type=float, default=(0.3, 2.0), show_default=True)
@click.option("--preset", type=click.Choice(["khz"]), default=None,
              help="Emit a fixed reference instance instead of random ones.")
def gen_cmd(seed, count, out_dir, wufbc, events, energy, bits, gap, preset):
    """Generate random instances (asymptotically feasible by construction)."""
    if preset == "khz":
        insts = [khz_example()]
    else:
        rng = np.random.default_rng(seed)
        spec = GenSpec(n_events=tuple(events), energy=tuple(energy), bits=tuple(bits),
                       gap=tuple(gap), wufbc=wufbc)
        insts = [random_instance(rng, spec) for _ in range(count)]
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for k, inst in enumerate(insts):
            (d / f"inst_{k:04d}.json").write_text(dumps(instance_to_dict(inst)), encoding="utf-8")
    elif len(insts) == 1:
        click.echo(dumps(instance_to_dict(insts[0])), nl=False)
    else:
        click.echo(dumps([instance_to_dict(i) for i in insts]), nl=False)


if __name__ == "__main__":
    main()
