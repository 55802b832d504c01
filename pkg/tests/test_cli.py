import json

import pytest
from click.testing import CliRunner

from ehbc.cli import main
from ehbc.duopt import solve
from ehbc.generate import khz_example
from ehbc.io import (PLOT_HEADER, ParseError, dumps, instance_to_dict, parse_instance,
                     parse_schedule, plot_rows, schedule_to_dict)

DOC = {
    "channel": {"s1": 1.0, "s2": 0.5, "sigma2": 1.0},
    "events": [{"t": 0, "energy": 3.0, "bits1": 0.5, "bits2": 0.8},
               {"t": 0.8, "energy": 4.0},
               {"t": 2.0, "energy": 3.0, "bits1": 1.0}],
}


@pytest.fixture
def inst_file(tmp_path):
    p = tmp_path / "inst.json"
    p.write_text(json.dumps(DOC))
    return p


def test_parse_defaults():
    inst = parse_instance(DOC)
    assert inst.channel.kappa == 0.5
    assert inst.events[1].bits1 == 0.0


def test_parse_khz_parameters():
    doc = json.loads(dumps(instance_to_dict(khz_example())))
    inst = parse_instance(doc)
    assert inst.channel.kappa == 1000.0
    assert inst.channel.sigma2 == 1e-9
    assert inst.channel.s2 == 10 ** -7.5


def test_parse_merges_duplicates():
    doc = dict(DOC, events=DOC["events"] + [{"t": 0.8, "energy": 1.0, "bits1": 0.25}])
    inst = parse_instance(doc)
    assert len(inst.events) == 3
    assert inst.events[1].energy == 5.0 and inst.events[1].bits1 == 0.25


@pytest.mark.parametrize("bad", [
    "not json",
    {"events": DOC["events"]},
    {"channel": DOC["channel"], "events": []},
    {"channel": {"s1": "x", "s2": 0.5, "sigma2": 1.0}, "events": DOC["events"]},
    {"channel": DOC["channel"], "events": [{"t": 1.0, "energy": 1.0}]},
    {"channel": {"s1": 0.5, "s2": 1.0, "sigma2": 1.0}, "events": DOC["events"]},
])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_instance(json.dumps(bad) if isinstance(bad, dict) else bad)


def test_instance_round_trip_bit_exact():
    inst = khz_example()
    again = parse_instance(dumps(instance_to_dict(inst)))
    assert again == inst


def test_schedule_round_trip_bit_exact():
    sched, _ = solve(khz_example())
    again = parse_schedule(dumps(schedule_to_dict(sched)))
    assert again == sched


def test_plot_rows_end_at_completion():
    inst = parse_instance(DOC)
    sched, _ = solve(inst)
    rows = plot_rows(inst.channel, sched)
    assert rows[-1] == (sched.T, 0.0, 0.0, 0.0, 0.0)
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)


def test_solve_output_is_byte_identical(inst_file, tmp_path):
    r = CliRunner()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert r.invoke(main, ["solve", "--in", str(inst_file), "--out", str(a)]).exit_code == 0
    assert r.invoke(main, ["solve", "--in", str(inst_file), "--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["feasible"] and doc["verification"]["ok"]


def test_plot_header(inst_file, tmp_path):
    plot = tmp_path / "p.csv"
    res = CliRunner().invoke(main, ["solve", "--in", str(inst_file), "--out",
                                    str(tmp_path / "o.json"), "--plot", str(plot)])
    assert res.exit_code == 0
    assert plot.read_text().splitlines()[0] == ",".join(PLOT_HEADER)


def test_verify_round_trip(inst_file, tmp_path):
    out = tmp_path / "o.json"
    r = CliRunner()
    r.invoke(main, ["solve", "--in", str(inst_file), "--out", str(out)])
    res = r.invoke(main, ["verify", "--in", str(inst_file), "--schedule", str(out)])
    assert res.exit_code == 0
    assert json.loads(res.output)["ok"] is True


def test_verify_flags_bad_schedule(inst_file, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"epochs": [
        {"start": 0.0, "power": 0.0, "r1": 0.0, "r2": 0.0, "active": 0.0},
        {"start": 0.8, "power": 0.0, "r1": 0.0, "r2": 0.0, "active": 0.0},
        {"start": 2.0, "power": 1.0, "r1": 0.1, "r2": 0.1, "active": 1.0}]}))
    res = CliRunner().invoke(main, ["verify", "--in", str(inst_file), "--schedule", str(bad)])
    assert res.exit_code == 1


def test_oracle_compare(inst_file, tmp_path):
    out = tmp_path / "o.json"
    r = CliRunner()
    r.invoke(main, ["solve", "--in", str(inst_file), "--out", str(out)])
    res = r.invoke(main, ["oracle", "--in", str(inst_file), "--compare", str(out)])
    assert res.exit_code == 0
    assert "PASS" in res.stderr


def test_exit_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert CliRunner().invoke(main, ["solve", "--in", str(p)]).exit_code == 2


def test_exit_infeasible(tmp_path):
    p = tmp_path / "inf.json"
    p.write_text(json.dumps({"channel": DOC["channel"],
                             "events": [{"t": 0, "energy": 1.0, "bits1": 1.0, "bits2": 1.0}]}))
    assert CliRunner().invoke(main, ["solve", "--in", str(p)]).exit_code == 3


def test_exit_no_convergence(inst_file):
    res = CliRunner().invoke(main, ["solve", "--in", str(inst_file), "--max-iters", "1"])
    assert res.exit_code == 4


def test_exit_size_cap(tmp_path):
    ev = [{"t": 0, "energy": 2.0, "bits1": 1.0}] + [{"t": t, "energy": 1.0} for t in (1, 2, 3, 4)]
    p = tmp_path / "big.json"
    p.write_text(json.dumps({"channel": DOC["channel"], "events": ev}))
    assert CliRunner().invoke(main, ["oracle", "--in", str(p)]).exit_code == 5


def test_gen_and_sweep(tmp_path):
    r = CliRunner()
    d = tmp_path / "corpus"
    assert r.invoke(main, ["gen", "--seed", "1", "--count", "3", "--out-dir", str(d)]).exit_code == 0
    assert len(list(d.glob("*.json"))) == 3
    res = r.invoke(main, ["sweep", "--dir", str(d)])
    lines = res.output.strip().splitlines()
    assert lines[0].startswith("file,status,T")
    assert len(lines) == 4 and all(",ok," in l for l in lines[1:])
