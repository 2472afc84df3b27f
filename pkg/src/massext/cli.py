"""Command-line front end: critical values, simulation, sweeps, oracles.

Subcommands: critical, simulate, branch, oracle, sweep.  All randomness
flows from one 64-bit --seed through counter-based substreams; repeated
invocations with identical arguments produce byte-identical outputs, at any
--threads setting.  Exit codes: 0 success, 2 invalid arguments, 3 I/O
failure, 4 precondition violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .branch import extinction_prob_branch, p_up, run_chain_replicas
from .criticality import solve_lambda_c, solve_lambda_s
from .engine import (
    RECORDED_TYPES,
    StopRule,
    outcome_reason,
    run_replicas,
    run_traced,
    survival_from_replicas,
    write_trace,
)
from .model import ModelParams
from .oracles import PreconditionError, estimate_levelk_prob, ld_rate
from .stats import wilson_interval

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PRECONDITION = 4

VALID_TARGETS = ("tree_survival", "branch_extinction", "critical_values")
# command tags keyed into sweep substreams: (master_seed, tag, row_index, r)
_TARGET_TAGS = {"tree_survival": 1, "branch_extinction": 2}
_SIM_TAG = 3
_ORACLE_ENGINE_TAG = 4
_BRANCH_CROSS_TAG = 5

_SWEEP_HEADER = "d,lambda,target,estimate,ci_lo,ci_hi,n,censored_fraction,seed"


@dataclass
class SweepSpec:
    """Resolved sweep configuration (config file merged with flag overrides)."""

    d_values: list[int]
    lambda_grid: list[float]
    n_replicas: int
    stop: StopRule
    master_seed: int
    targets: list[str]
    chain_max_steps: int = 100_000


@dataclass(frozen=True)
class ResultRow:
    d: int
    lam: float | None  # empty CSV field for critical-value rows
    target: str
    estimate: float
    ci_lo: float
    ci_hi: float
    n: int
    censored_fraction: float
    seed: int


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as f:
            f.write(text)


def _emit_json(obj, out_path: str | None) -> None:
    _emit(json.dumps(obj, indent=2) + "\n", out_path)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _stop_from_args(args) -> StopRule:
    return StopRule(
        max_time=args.max_time,
        max_live_particles=args.max_live,
        max_type_born=args.max_type,
        max_events=args.max_events,
    )


def _add_stop_flags(sp) -> None:
    sp.add_argument("--max-time", type=float, default=None)
    sp.add_argument("--max-live", type=int, default=100_000)
    sp.add_argument("--max-type", type=int, default=10_000)
    sp.add_argument("--max-events", type=int, default=10_000_000)


# ---------------------------------------------------------------------------
# critical

def cmd_critical(args) -> int:
    lines = ["d,lambda_c,lambda_s"]
    for d in args.d:
        lc = solve_lambda_c(d, args.tol)
        ls = solve_lambda_s(d, args.tol)
        lines.append(f"{d},{_fmt(lc.value)},{_fmt(ls.value)}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _survival_dict(est) -> dict:
    return {
        "p_hat": est.p_hat,
        "wilson_95": [est.wilson_95_interval[0], est.wilson_95_interval[1]],
        "censored_fraction": est.censored_fraction,
        "n_survived": est.n_survived,
        "n_extinct": est.n_extinct,
        "n_indeterminate": est.n_indeterminate,
    }


def cmd_simulate(args) -> int:
    params = ModelParams(d=args.d, lam=args.lam)
    stop = _stop_from_args(args)
    summary = {
        "command": "simulate",
        "d": params.d,
        "lambda": params.lam,
        "stop": {
            "max_time": stop.max_time,
            "max_live_particles": stop.max_live_particles,
            "max_type_born": stop.max_type_born,
            "max_events": stop.max_events,
        },
        "n_replicas": args.replicas,
        "master_seed": args.seed,
    }

    if args.trace is not None:
        if args.replicas != 1:
            raise ValueError("--trace requires --replicas 1")
        record, log = run_traced(params, stop, args.seed)
        with open(args.trace, "w") as f:
            write_trace(log, f)
        survived = 1 if record.survival_proxy else 0
        indet = 1 if (record.outcome == "censored"
                      and not record.survival_proxy) else 0
        summary["survival"] = {
            "p_hat": float(survived),
            "wilson_95": list(wilson_interval(survived, 1)),
            "censored_fraction": float(indet),
            "n_survived": survived,
            "n_extinct": 1 if record.outcome == "extinct" else 0,
            "n_indeterminate": indet,
        }
        summary["aggregates"] = {
            "mean_total_born": float(record.total_born),
            "mean_event_count": float(record.event_count),
            "mean_max_type": float(record.max_type_reached),
            "max_type_histogram": {str(record.max_type_reached): 1},
        }
        rows = [(0, record.outcome, record.reason or "", record.end_time,
                 record.total_born, record.max_type_reached,
                 record.event_count)]
    else:
        rs = run_replicas(params, stop, args.replicas, args.seed,
                          threads=args.threads, key_prefix=(_SIM_TAG,))
        est = survival_from_replicas(rs)
        hist = np.bincount(rs.max_types)
        summary["survival"] = _survival_dict(est)
        summary["aggregates"] = {
            "mean_total_born": float(rs.total_born.mean()),
            "mean_event_count": float(rs.event_counts.mean()),
            "mean_max_type": float(rs.max_types.mean()),
            "max_type_histogram": {
                str(i): int(c) for i, c in enumerate(hist) if c > 0
            },
        }
        rows = []
        for r in range(rs.n):
            outcome, reason = outcome_reason(int(rs.outcome_codes[r]))
            rows.append((r, outcome, reason or "", float(rs.end_times[r]),
                         int(rs.total_born[r]), int(rs.max_types[r]),
                         int(rs.event_counts[r])))

    if args.per_run is not None:
        lines = ["replica,outcome,reason,end_time,total_born,"
                 "max_type_reached,event_count"]
        for r, outcome, reason, t, born, mt, ev in rows:
            lines.append(f"{r},{outcome},{reason},{_fmt(t)},{born},{mt},{ev}")
        with open(args.per_run, "w") as f:
            f.write("\n".join(lines) + "\n")

    _emit_json(summary, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# branch

def _branch_outcome_from_log(log) -> str:
    """Fate of the all-ones branch in one recorded engine run."""
    occupied = {0}  # the root lies on every branch; fix B = (1,1,1,...)
    for i in range(len(log.kinds)):
        if log.kinds[i] == 0:  # birth
            if all(x == 1 for x in log.paths[i]):
                occupied.add(int(log.types[i]))
        else:
            occupied.discard(int(log.types[i]))
        if not occupied:
            return "extinct"
    return "indeterminate"  # run censored with the branch clan still alive


def cmd_branch(args) -> int:
    p = p_up(args.d, args.lam)
    analytic = extinction_prob_branch(args.d, args.lam)
    crs = run_chain_replicas(args.d, args.lam, args.max_steps, args.replicas,
                             args.seed, threads=args.threads)
    n_ext = int(np.count_nonzero(crs.absorbed))
    ext_steps = crs.steps[crs.absorbed]
    out = {
        "command": "branch",
        "d": args.d,
        "lambda": args.lam,
        "p_up": p,
        "extinction_prob_analytic": analytic,
        "chain": {
            "n_replicas": crs.n,
            "max_steps": crs.max_steps,
            "master_seed": crs.master_seed,
            "extinct_fraction": crs.extinct_fraction,
            "wilson_95": list(wilson_interval(n_ext, crs.n)),
            "censored_fraction": crs.censored_fraction,
            "mean_steps_extinct": float(ext_steps.mean()) if n_ext else None,
            "mean_max_clan_size": float(crs.max_states.mean()),
        },
    }

    if args.cross_check:
        # exploratory comparison against the full engine restricted to one
        # branch; reported side by side, never asserted
        params = ModelParams(d=args.d, lam=args.lam)
        stop = _stop_from_args(args)
        counts = {"extinct": 0, "indeterminate": 0}
        for r in range(args.cross_check):
            _, log = run_traced(params, stop, _derive_seed(args.seed, r))
            counts[_branch_outcome_from_log(log)] += 1
        out["engine_cross_check"] = {
            "n_runs": args.cross_check,
            "branch_extinct_fraction": counts["extinct"] / args.cross_check,
            "indeterminate_fraction": counts["indeterminate"] / args.cross_check,
            "chain_extinct_fraction": crs.extinct_fraction,
        }

    _emit_json(out, args.out)
    return EXIT_OK


def _derive_seed(master: int, r: int) -> int:
    # distinct deterministic per-run seeds for the traced cross-check runs
    ss = np.random.SeedSequence(master, spawn_key=(_BRANCH_CROSS_TAG, r))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(args) -> int:
    rate = ld_rate(args.d, args.lam, args.k, args.n, args.seed)
    levelk = estimate_levelk_prob(args.d, args.lam, args.k, args.n, args.seed)
    out = {
        "command": "oracle",
        "d": args.d,
        "lambda": args.lam,
        "k": args.k,
        "n_samples": args.n,
        "master_seed": args.seed,
        "p_up": p_up(args.d, args.lam),
        "rate": {
            "p_hat": rate.p_hat,
            "se": rate.se,
            "log_rate": rate.log_rate,
            "analytic_rate": rate.analytic_rate,
        },
        "levelk_direct": {"p_hat": levelk.p_hat, "se": levelk.se},
    }

    if args.engine_replicas:
        params = ModelParams(d=args.d, lam=args.lam)
        stop = _stop_from_args(args)
        rs = run_replicas(params, stop, args.engine_replicas, args.seed,
                          threads=args.threads,
                          key_prefix=(_ORACLE_ENGINE_TAG,))
        k = args.k
        if k < RECORDED_TYPES:
            col = rs.born_by_type_mat[:, k].astype(float)
            mean_eng = float(col.mean())
            se_eng = float(col.std(ddof=1) / math.sqrt(rs.n)) if rs.n > 1 else 0.0
        else:
            mean_eng = float(rs.born_by_type_sum[k]) / rs.n if k < len(
                rs.born_by_type_sum) else 0.0
            se_eng = float("nan")
        scaled = args.d ** k * levelk.p_hat
        scaled_se = args.d ** k * levelk.se
        out["engine_cross_check"] = {
            "n_runs": rs.n,
            "mean_type_k_born": mean_eng,
            "se_type_k_born": se_eng,
            "dk_times_levelk": scaled,
            "se_dk_times_levelk": scaled_se,
        }

    _emit_json(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _resolve_sweep_spec(args) -> SweepSpec:
    cfg = {}
    if args.config is not None:
        with open(args.config) as f:
            cfg = json.load(f)

    d_values = args.d if args.d is not None else cfg.get("d_values")
    if d_values is None:
        raise ValueError("sweep needs d values (--d or config d_values)")

    if args.lam is not None:
        lambdas = list(args.lam)
    else:
        grid = cfg.get("lambda_grid")
        if grid is None:
            raise ValueError("sweep needs a lambda grid (--lambda or config "
                             "lambda_grid)")
        if isinstance(grid, dict):
            steps = int(grid["steps"])
            if steps < 1:
                raise ValueError("lambda_grid.steps must be >= 1")
            if steps == 1:
                lambdas = [float(grid["min"])]
            else:
                lambdas = list(np.linspace(float(grid["min"]),
                                           float(grid["max"]), steps))
        else:
            lambdas = [float(x) for x in grid]
    if not lambdas:
        raise ValueError("empty lambda grid")

    targets = args.targets if args.targets is not None else cfg.get("targets")
    if not targets:
        raise ValueError("no targets selected")
    bad = [t for t in targets if t not in VALID_TARGETS]
    if bad:
        raise ValueError(f"unknown targets {bad}; valid: {list(VALID_TARGETS)}")

    stop_cfg = cfg.get("stop", {})
    stop = StopRule(
        max_time=(args.max_time if args.max_time is not None
                  else stop_cfg.get("max_time")),
        max_live_particles=(args.max_live if args.max_live is not None
                            else stop_cfg.get("max_live_particles", 100_000)),
        max_type_born=(args.max_type if args.max_type is not None
                       else stop_cfg.get("max_type_born", 10_000)),
        max_events=(args.max_events if args.max_events is not None
                    else stop_cfg.get("max_events", 10_000_000)),
    )

    return SweepSpec(
        d_values=sorted(set(int(d) for d in d_values)),
        lambda_grid=sorted(set(float(x) for x in lambdas)),
        n_replicas=(args.replicas if args.replicas is not None
                    else int(cfg.get("n_replicas", 1000))),
        stop=stop,
        master_seed=(args.seed if args.seed is not None
                     else int(cfg.get("master_seed", 0))),
        targets=sorted(set(targets)),
        chain_max_steps=(args.chain_max_steps
                         if args.chain_max_steps is not None
                         else int(cfg.get("chain_max_steps", 100_000))),
    )


def _sweep_rows(spec: SweepSpec, tol: float, threads: int) -> list[ResultRow]:
    # enumerate rows in output order first; the row index keys the substream
    entries = []
    for d in spec.d_values:
        if "critical_values" in spec.targets:
            entries.append((d, None, "lambda_c"))
            entries.append((d, None, "lambda_s"))
        for lam in spec.lambda_grid:
            for target in ("branch_extinction", "tree_survival"):
                if target in spec.targets:
                    entries.append((d, lam, target))
    entries.sort(key=lambda e: (e[0], -math.inf if e[1] is None else e[1], e[2]))

    rows = []
    for row_index, (d, lam, target) in enumerate(entries):
        if target == "lambda_c":
            res = solve_lambda_c(d, tol)
            rows.append(ResultRow(d, None, target, res.value,
                                  res.bracket[0], res.bracket[1], 0, 0.0,
                                  spec.master_seed))
        elif target == "lambda_s":
            res = solve_lambda_s(d, tol)
            rows.append(ResultRow(d, None, target, res.value,
                                  res.bracket[0], res.bracket[1], 0, 0.0,
                                  spec.master_seed))
        elif target == "tree_survival":
            params = ModelParams(d=d, lam=lam)
            rs = run_replicas(params, spec.stop, spec.n_replicas,
                              spec.master_seed, threads=threads,
                              key_prefix=(_TARGET_TAGS[target], row_index))
            est = survival_from_replicas(rs)
            rows.append(ResultRow(d, lam, target, est.p_hat,
                                  est.wilson_95_interval[0],
                                  est.wilson_95_interval[1],
                                  spec.n_replicas, est.censored_fraction,
                                  spec.master_seed))
        else:  # branch_extinction
            crs = run_chain_replicas(d, lam, spec.chain_max_steps,
                                     spec.n_replicas, spec.master_seed,
                                     threads=threads,
                                     key_prefix=(_TARGET_TAGS[target],
                                                 row_index))
            n_ext = int(np.count_nonzero(crs.absorbed))
            lo, hi = wilson_interval(n_ext, crs.n)
            rows.append(ResultRow(d, lam, target, crs.extinct_fraction,
                                  lo, hi, crs.n, crs.censored_fraction,
                                  spec.master_seed))
    return rows


def cmd_sweep(args) -> int:
    spec = _resolve_sweep_spec(args)
    rows = _sweep_rows(spec, args.tol, args.threads)
    lines = [_SWEEP_HEADER]
    for r in rows:
        lam_field = "" if r.lam is None else _fmt(r.lam)
        lines.append(
            f"{r.d},{lam_field},{r.target},{_fmt(r.estimate)},"
            f"{_fmt(r.ci_lo)},{_fmt(r.ci_hi)},{r.n},"
            f"{_fmt(r.censored_fraction)},{r.seed}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="massext",
        description="Branching evolution with mass extinction on the rooted "
                    "d-ary tree: simulation, critical values, oracles.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("critical", help="solve lambda_c(d) and lambda_s(d)")
    sp.add_argument("--d", type=_int_list, default=[2, 3, 4, 5, 6, 7],
                    help="comma-separated branching degrees")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_critical)

    sp = sub.add_parser("simulate", help="replicated tree-process runs")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    _add_stop_flags(sp)
    sp.add_argument("--out", default=None)
    sp.add_argument("--per-run", default=None,
                    help="write per-replica CSV to this path")
    sp.add_argument("--trace", default=None,
                    help="write the event trace (requires --replicas 1)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("branch", help="embedded chain on a fixed branch")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--replicas", type=int, default=100_000)
    sp.add_argument("--max-steps", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--cross-check", type=int, default=0, metavar="N",
                    help="also run N full-engine replicas and report the "
                         "branch-restricted extinction fraction")
    _add_stop_flags(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_branch)

    sp = sub.add_parser("oracle", help="level-k race probabilities and the "
                                       "large-deviation rate")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--engine-replicas", type=int, default=0, metavar="N",
                    help="cross-check d^k * p against N engine runs")
    _add_stop_flags(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("sweep", help="parameter sweep to CSV")
    sp.add_argument("--config", default=None, help="JSON sweep spec")
    sp.add_argument("--d", type=_int_list, default=None)
    sp.add_argument("--lambda", dest="lam", type=_float_list, default=None)
    sp.add_argument("--replicas", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--targets", type=lambda s: [t for t in s.split(",") if t],
                    default=None,
                    help=f"comma-separated subset of {','.join(VALID_TARGETS)}")
    sp.add_argument("--chain-max-steps", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--max-time", type=float, default=None)
    sp.add_argument("--max-live", type=int, default=None)
    sp.add_argument("--max-type", type=int, default=None)
    sp.add_argument("--max-events", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_sweep)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as e:
        print(f"error: I/O failure: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
