import csv
import io
from pathlib import Path

import pytest

from llcsim.cli import BOUND_HEADER, main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("argv,tail", [
    (["--mode", "nss", "--n", "4", "--N", "4", "--w", "16", "--M", "16", "--mcua", "64", "--sw", "50"], ",979250,19585"),
    (["--mode", "ss", "--n", "4", "--N", "4", "--sw", "50"], ",5000,100"),
    (["--mode", "p", "--N", "4", "--sw", "50"], ",450,9"),
])
def test_bound(capsys, argv, tail):
    code, out, _ = run(capsys, "bound", *argv)
    header, row = out.splitlines()
    assert code == 0 and header == BOUND_HEADER
    assert row.endswith(tail)
    assert len(row.split(",")) == len(header.split(","))


@pytest.mark.parametrize("argv", [
    ["bound", "--mode", "nss", "--N", "2", "--n", "3"],
    ["bound", "--mode", "p", "--N", "4", "--n", "2"],
    ["bound", "--mode", "zz", "--N", "4"],
    ["bound", "--N", "4"],
    ["nosuchcommand"],
    [],
])
def test_usage_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as e:
        code = main(argv)
        raise SystemExit(code)
    assert e.value.code == 1


def test_gen_is_deterministic_and_honours_env(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("LLCSIM_SEED", "7")
    run(capsys, "gen", "--range", "1024", "--count", "20", "-o", str(tmp_path / "a.trace"))
    _, out, _ = run(capsys, "gen", "--range", "1024", "--count", "20", "--seed", "7")
    text = (tmp_path / "a.trace").read_text()
    assert text == out
    assert "rng=python-random-MT19937 seed=7" in text.splitlines()[0]
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == 20


def test_gen_per_core_directory(capsys, tmp_path):
    code, _, _ = run(capsys, "gen", "--range", "2048", "--count", "10", "--cores", "3", "-o", str(tmp_path))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["core0.trace", "core1.trace", "core2.trace"]


def test_gen_bad_range(capsys):
    code, _, err = run(capsys, "gen", "--range", "1000")
    assert code == 1 and "1000" in err


def test_simulate_paper_eval_ss_passes(capsys, tmp_path):
    traces = tmp_path / "traces"
    run(capsys, "gen", "--range", "4096", "--count", "2000", "--cores", "4", "--seed", "3", "-o", str(traces))
    out = tmp_path / "out"
    code, stdout, _ = run(capsys, "simulate", "--config", str(CONFIGS / "paper_eval_ss.toml"),
                          *sum((["--trace", str(traces / f"core{c}.trace")] for c in range(4)), []),
                          "--out", str(out), "--emit-events")
    assert code == 0
    assert (out / "verdict.txt").read_text().startswith("PASS")
    report = (out / "report.csv").read_text()
    rows = list(csv.DictReader(io.StringIO("".join(l + "\n" for l in report.splitlines() if not l.startswith("#")))))
    assert len(rows) == 4 and all(int(r["max_latency_cycles"]) <= 5000 for r in rows)
    assert (out / "events.log").read_text().startswith("slot=0 ")


def test_simulate_generated_traces_records_rng(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--preset", "paper-eval", "--mode", "nss", "--range", "2048",
                     "--count", "500", "--seed", "1", "--out", str(tmp_path))
    assert code == 0
    assert "# rng=python-random-MT19937" in (tmp_path / "report.csv").read_text()


def test_simulate_fig2_is_incomplete(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--config", str(CONFIGS / "fig2.toml"),
                       "--trace", str(CONFIGS / "fig2_traces" / "core0.trace"),
                       "--trace", str(CONFIGS / "fig2_traces" / "core1.trace"), "--out", str(tmp_path))
    assert code == 4
    assert (tmp_path / "verdict.txt").read_text().startswith("INCOMPLETE after 100 periods")


def test_simulate_missing_trace_is_usage_error(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", str(CONFIGS / "paper_eval_p.toml"),
                       *["--trace", str(tmp_path / "nope.trace")] * 4, "--out", str(tmp_path))
    assert code == 1 and "not found" in err


def test_simulate_protocol_error_exit_2(capsys, tmp_path):
    from fuzzing import random_machine
    from llcsim.workload import save_trace

    # same machine as the kernel overflow test, with a one-entry PWB
    _, traces = random_machine(24)
    cfg = tmp_path / "tiny.toml"
    cfg.write_text("cores = 4\nschedule = [3, 2, 0, 1]\npwb_capacity = 1\nslot_width = 1\n"
                   "[l1i]\nsets = 1\nways = 1\n[l1d]\nsets = 2\nways = 1\n[l2]\nsets = 2\nways = 2\n"
                   "[llc]\nsets = 4\nways = 3\n"
                   "[[partitions]]\nsets = \"0..0\"\nways = \"0..2\"\nsharers = [0, 1, 2, 3]\nmode = \"nss\"\n")
    args = []
    for c, tr in enumerate(traces):
        save_trace(tr, tmp_path / f"c{c}.trace")
        args += ["--trace", str(tmp_path / f"c{c}.trace")]
    code, _, err = run(capsys, "simulate", "--config", str(cfg), *args, "--out", str(tmp_path / "o"))
    assert code == 2 and "PWB full" in err
    assert (tmp_path / "o" / "verdict.txt").read_text().startswith("PROTOCOL-ERROR")


def test_simulate_bound_violation_exit_3(capsys, tmp_path, monkeypatch):
    from llcsim import cli
    from llcsim.analysis import BoundVerdict

    monkeypatch.setattr(cli, "check_bound", lambda rep, **kw: BoundVerdict("FAIL", detail="forged"))
    code, _, _ = run(capsys, "simulate", "--preset", "paper-eval", "--mode", "p", "--range", "1024",
                     "--count", "20", "--out", str(tmp_path))
    assert code == 3


@pytest.mark.parametrize("name,needle", [("fig3", "2,1,free"), ("fig4", "1,free,3"),
                                         ("fig2", "INCOMPLETE after 100 periods")])
def test_scenario(capsys, name, needle):
    code, out, _ = run(capsys, "scenario", name)
    assert code == 0
    assert needle in out and "golden: match" in out
    assert out.startswith("slot=0 ")


def test_scenario_unknown(capsys):
    code, _, err = run(capsys, "scenario", "nosuch")
    assert code == 1 and "nosuch" in err


def test_sweep_empty_spec_gives_header(capsys, tmp_path):
    spec = tmp_path / "empty.toml"
    spec.write_text("")
    code, out, _ = run(capsys, "sweep", str(spec))
    assert code == 0
    assert out.splitlines() == ["config,mode,cores,range_bytes,seed,llc_requests,observed_wcl_cycles,"
                                "bound_cycles,exec_time_cycles,speedup_vs_p,status,error"]


def test_sweep_records_bad_cells_and_continues(capsys, tmp_path):
    spec = tmp_path / "s.toml"
    spec.write_text('cores = 2\nconfigs = ["P(2,4)", "SS(2,4,3)"]\nranges = [512]\nseeds = [0]\ncount = 50\n')
    code, out, _ = run(capsys, "sweep", str(spec), "-o", str(tmp_path / "o.csv"))
    rows = list(csv.DictReader(open(tmp_path / "o.csv")))
    assert code == 0 and len(rows) == 2
    assert rows[0]["config"] == "P(2,4)" and rows[0]["status"] == "PASS"
    assert rows[1]["status"] == "ERROR" and "sharers" in rows[1]["error"]


def test_sweep_missing_spec(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", str(tmp_path / "nope.toml"))
    assert code == 1
