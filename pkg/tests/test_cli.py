import json
import math

import numpy as np
import pytest

from massext import substream
from massext.cli import main

pytestmark = pytest.mark.usefixtures("kernels_warm")


def _read(path):
    with open(path, "rb") as f:
        return f.read()


# ---------------------------------------------------------------------------
# critical

def test_critical_csv(tmp_path):
    out = tmp_path / "crit.csv"
    assert main(["critical", "--d", "2,3", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "d,lambda_c,lambda_s"
    d2 = lines[1].split(",")
    assert d2[0] == "2"
    assert d2[2].startswith("1.61803")  # golden ratio
    assert abs(float(d2[1]) - 0.29335) < 1e-4


def test_critical_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["critical", "--out", str(a)])
    main(["critical", "--out", str(b)])
    assert _read(a) == _read(b)


def test_critical_stdout(capsys):
    assert main(["critical", "--d", "2"]) == 0
    assert capsys.readouterr().out.startswith("d,lambda_c,lambda_s")


# ---------------------------------------------------------------------------
# simulate

def test_simulate_without_births(tmp_path):
    out = tmp_path / "sim.json"
    per_run = tmp_path / "runs.csv"
    rc = main(["simulate", "--d", "2", "--lambda", "0", "--replicas", "50",
               "--seed", "5", "--out", str(out), "--per-run", str(per_run)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["survival"]["p_hat"] == 0.0
    assert doc["aggregates"]["mean_total_born"] == 1.0
    assert doc["aggregates"]["max_type_histogram"] == {"0": 50}
    lines = per_run.read_text().strip().split("\n")
    assert lines[0] == ("replica,outcome,reason,end_time,total_born,"
                        "max_type_reached,event_count")
    assert len(lines) == 51
    assert lines[1].startswith("0,extinct,")


def test_simulate_deterministic_bytes(tmp_path):
    args = ["simulate", "--d", "2", "--lambda", "0.6", "--replicas", "60",
            "--seed", "11", "--max-live", "2000"]
    outs = []
    for name in ("x", "y"):
        o, p = tmp_path / f"{name}.json", tmp_path / f"{name}.csv"
        assert main(args + ["--out", str(o), "--per-run", str(p)]) == 0
        outs.append((_read(o), _read(p)))
    assert outs[0] == outs[1]
    # thread count does not change the bytes either
    o2, p2 = tmp_path / "z.json", tmp_path / "z.csv"
    main(args + ["--threads", "2", "--out", str(o2), "--per-run", str(p2)])
    assert (_read(o2), _read(p2)) == outs[0]


def test_simulate_subcritical_upper_bound(tmp_path):
    out = tmp_path / "sub.json"
    main(["simulate", "--d", "2", "--lambda", "0.2", "--replicas", "10000",
          "--seed", "6", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert doc["survival"]["p_hat"] == 0.0
    assert doc["survival"]["wilson_95"][1] < 0.001


def test_simulate_trace(tmp_path):
    trace = tmp_path / "run.trace"
    out = tmp_path / "sim.json"
    rc = main(["simulate", "--d", "2", "--lambda", "1.0", "--replicas", "1",
               "--seed", "9", "--max-events", "200",
               "--trace", str(trace), "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    lines = trace.read_text().strip().split("\n")
    assert len(lines) == int(doc["aggregates"]["mean_event_count"])
    first = lines[0].split(",")
    assert first[0] == "0" and first[2] in ("B", "K")


def test_simulate_trace_needs_single_replica(capsys):
    rc = main(["simulate", "--d", "2", "--lambda", "1.0", "--replicas", "2",
               "--trace", "/tmp/nope.trace"])
    assert rc == 2
    assert "--replicas 1" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# branch

def test_branch_gamblers_ruin(tmp_path):
    out = tmp_path / "branch.json"
    rc = main(["branch", "--d", "2", "--lambda", "3", "--replicas", "20000",
               "--max-steps", "2000", "--seed", "13", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["p_up"] == pytest.approx(21 / 32, abs=1e-12)
    assert doc["extinction_prob_analytic"] == pytest.approx(11 / 21, abs=1e-12)
    lo, hi = doc["chain"]["wilson_95"]
    assert lo <= 11 / 21 <= hi


def test_branch_cross_check(tmp_path):
    out = tmp_path / "bx.json"
    rc = main(["branch", "--d", "2", "--lambda", "1.0", "--replicas", "2000",
               "--max-steps", "10000", "--seed", "14", "--cross-check", "30",
               "--max-live", "2000", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    cc = doc["engine_cross_check"]
    assert cc["n_runs"] == 30
    # lam = 1 < lambda_s(2): the branch clan should essentially always die
    assert cc["branch_extinct_fraction"] + cc["indeterminate_fraction"] == \
        pytest.approx(1.0)
    assert cc["branch_extinct_fraction"] > 0.8
    assert doc["chain"]["extinct_fraction"] == 1.0


# ---------------------------------------------------------------------------
# oracle

def test_oracle_report(tmp_path):
    out = tmp_path / "oracle.json"
    rc = main(["oracle", "--d", "2", "--lambda", "0.25", "--k", "1",
               "--n", "50000", "--seed", "15", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    p = doc["p_up"]
    assert abs(doc["levelk_direct"]["p_hat"] - p) < 4 * doc["levelk_direct"]["se"]
    assert abs(doc["rate"]["p_hat"] - p) < 5 * max(doc["rate"]["se"], 1e-6)
    # analytic rate is log(f_2(0.25)/2)
    assert doc["rate"]["analytic_rate"] == pytest.approx(
        math.log(0.88124847783505 / 2), abs=1e-6)


def test_oracle_engine_cross_check(tmp_path):
    out = tmp_path / "oracle2.json"
    rc = main(["oracle", "--d", "2", "--lambda", "0.2", "--k", "2",
               "--n", "20000", "--seed", "16", "--engine-replicas", "5000",
               "--out", str(out)])
    assert rc == 0
    cc = json.loads(out.read_text())["engine_cross_check"]
    gap = abs(cc["mean_type_k_born"] - cc["dk_times_levelk"])
    assert gap <= 4 * (cc["se_type_k_born"] + cc["se_dk_times_levelk"])


def test_oracle_precondition_exit_code(capsys):
    rc = main(["oracle", "--d", "2", "--lambda", "2", "--k", "5", "--n", "100"])
    assert rc == 4
    assert "(d+1)/2" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sweep

SWEEP_HEADER = "d,lambda,target,estimate,ci_lo,ci_hi,n,censored_fraction,seed"


def _sweep_args(tmp_path, cfg=None, extra=()):
    args = ["sweep"]
    if cfg is not None:
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        args += ["--config", str(cfg_path)]
    return args + list(extra)


def test_sweep_intermediate_phase(tmp_path):
    cfg = {
        "d_values": [2],
        "lambda_grid": [0.5, 1.0, 1.5],
        "n_replicas": 300,
        "stop": {"max_live_particles": 10000},
        "master_seed": 404,
        "targets": ["tree_survival", "branch_extinction", "critical_values"],
        "chain_max_steps": 20000,
    }
    out = tmp_path / "sweep.csv"
    rc = main(_sweep_args(tmp_path, cfg, ["--out", str(out)]))
    assert rc == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == SWEEP_HEADER

    rows = [dict(zip(SWEEP_HEADER.split(","), ln.split(","))) for ln in lines[1:]]
    # critical rows come first (empty lambda), then (lambda, target) sorted
    assert [r["target"] for r in rows[:2]] == ["lambda_c", "lambda_s"]
    assert rows[0]["lambda"] == ""
    assert float(rows[0]["estimate"]) == pytest.approx(0.293367, abs=1e-5)
    assert float(rows[1]["estimate"]) == pytest.approx(1.61803, abs=1e-5)

    keys = [(r["lambda"], r["target"]) for r in rows[2:]]
    assert keys == sorted(keys, key=lambda x: (float(x[0]), x[1]))

    for r in rows[2:]:
        est = float(r["estimate"])
        assert float(r["ci_lo"]) <= est <= float(r["ci_hi"])
        if r["target"] == "tree_survival":
            # all three lambdas are supercritical for the whole tree
            assert est > 0.0
        else:
            # but lie at or below lambda_s(2): certain branch extinction
            assert est == 1.0


def test_sweep_branch_row_supercritical(tmp_path):
    out = tmp_path / "sweep2.csv"
    rc = main(["sweep", "--d", "2", "--lambda", "3", "--replicas", "20000",
               "--seed", "7", "--targets", "branch_extinction",
               "--chain-max-steps", "2000", "--out", str(out)])
    assert rc == 0
    row = out.read_text().strip().split("\n")[1].split(",")
    est, lo, hi = float(row[3]), float(row[4]), float(row[5])
    assert lo <= 11 / 21 <= hi
    assert est == pytest.approx(11 / 21, abs=0.02)


def test_sweep_deterministic_and_thread_invariant(tmp_path):
    base = ["sweep", "--d", "2", "--lambda", "0.9", "--replicas", "200",
            "--seed", "21", "--targets", "tree_survival,branch_extinction",
            "--max-live", "3000", "--chain-max-steps", "5000"]
    paths = [tmp_path / f"s{i}.csv" for i in range(3)]
    main(base + ["--out", str(paths[0])])
    main(base + ["--out", str(paths[1])])
    main(base + ["--threads", "2", "--out", str(paths[2])])
    assert _read(paths[0]) == _read(paths[1]) == _read(paths[2])


def test_sweep_flag_overrides_config(tmp_path):
    cfg = {"d_values": [2], "lambda_grid": [0.5], "n_replicas": 50,
           "master_seed": 1, "targets": ["critical_values"]}
    out1, out2 = tmp_path / "o1.csv", tmp_path / "o2.csv"
    main(_sweep_args(tmp_path, cfg, ["--out", str(out1)]))
    main(_sweep_args(tmp_path, cfg, ["--d", "3", "--out", str(out2)]))
    assert out1.read_text().split("\n")[1].startswith("2,")
    assert out2.read_text().split("\n")[1].startswith("3,")


def test_sweep_no_targets(capsys):
    rc = main(["sweep", "--d", "2", "--lambda", "1", "--targets", ""])
    assert rc == 2
    assert "no targets selected" in capsys.readouterr().err


def test_sweep_unknown_target(capsys):
    rc = main(["sweep", "--d", "2", "--lambda", "1", "--targets", "bogus"])
    assert rc == 2
    assert "bogus" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# plumbing

def test_unwritable_out_is_io_error(capsys):
    rc = main(["critical", "--d", "2", "--out", "/nonexistent-dir/x.csv"])
    assert rc == 3
    assert "nonexistent-dir" in capsys.readouterr().err


def test_bad_usage_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--d", "2"])  # missing --lambda
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2


def test_substreams_never_collide():
    # harness invariant: no two (tag, row, replica) keys share a stream
    draws = set()
    for tag in (1, 2):
        for row in range(20):
            for r in range(5):
                g = substream(999, tag, row, r)
                draws.add(g.integers(0, 2**63))
    assert len(draws) == 2 * 20 * 5


def test_substream_determinism():
    a = substream(5, 1, 2).standard_exponential(4)
    b = substream(5, 1, 2).standard_exponential(4)
    assert np.array_equal(a, b)
    c = substream(5, 1, 3).standard_exponential(4)
    assert not np.array_equal(a, c)
