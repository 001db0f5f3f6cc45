"""``tlps`` command line: train, monitor, parse, beta-sweep.

Exit codes: 0 success, 1 runtime failure, 2 configuration or input error,
3 spec parse error. ``monitor`` exits 0 / 10 / 11 for rho > 0 / < 0 / = 0.
Failures print a single ``error <kind>: <reason>`` line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .config import ConfigError, load_config, with_overrides
from .env import STATE_NAMES, Vehicle
from .policy import save_policy
from .search import train, write_learning_curve
from .smoothing import build_dag
from .tltl import (
    ColumnMismatch,
    ParseError,
    SpecError,
    eval_boolean,
    node_counts,
    parse_file,
    read_trajectory_csv,
    robustness,
    tree,
    write_trajectory_csv,
)
from .tltl.ast import max_component

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_PARSE = 0, 1, 2, 3
EXIT_VIOLATED, EXIT_BOUNDARY = 10, 11

# containment is checked with a little room for rounding in the log-sum-exp
CONTAIN_TOL = 1e-9


class _Fail(Exception):
    def __init__(self, code: int, kind: str, reason: str):
        super().__init__(reason)
        self.code, self.kind, self.reason = code, kind, reason


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def _load_spec(path):
    try:
        return parse_file(path)
    except ParseError as e:
        raise _Fail(EXIT_PARSE, "parse", f"{path}: {e}") from None
    except SpecError as e:
        raise _Fail(EXIT_PARSE, "spec", f"{path}: {e}") from None
    except OSError as e:
        raise _Fail(EXIT_CONFIG, "io", f"cannot read spec: {e.strerror}: {path}") from None


def _load_traj(path, vm):
    try:
        return read_trajectory_csv(path, vm)
    except ColumnMismatch as e:
        raise _Fail(EXIT_CONFIG, "columns", f"{path}: {e}") from None
    except OSError as e:
        raise _Fail(EXIT_CONFIG, "io", f"cannot read trajectory: {e.strerror}: {path}") from None
    except ValueError as e:
        raise _Fail(EXIT_CONFIG, "trajectory", str(e)) from None


def _fmt(v: float) -> str:
    return repr(float(v))


# -- commands -----------------------------------------------------------------


def cmd_train(args) -> int:
    try:
        cfg = with_overrides(load_config(args.config), args.seed, args.beta, args.out, args.dump_trajectories)
    except ConfigError as e:
        raise _Fail(EXIT_CONFIG, "config", str(e)) from None
    vm, phi = _load_spec(cfg.spec_path)
    if tuple(vm.names) != STATE_NAMES[: len(vm.names)] or max_component(phi) > len(STATE_NAMES):
        raise _Fail(
            EXIT_CONFIG,
            "config",
            f"spec variables {list(vm.names)} must be a prefix of {list(STATE_NAMES)}",
        )
    env = Vehicle(cfg.env)
    out = cfg.output.directory
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as e:
        raise _Fail(EXIT_RUNTIME, "io", f"cannot create output directory: {e.strerror}: {out}") from None
    names = list(STATE_NAMES)

    def dump(report, batch, imp):
        d = os.path.join(out, "trajectories", f"iter_{report.iteration:03d}")
        os.makedirs(d, exist_ok=True)
        for i, s in enumerate(batch.states):
            write_trajectory_csv(os.path.join(d, f"traj_{i:03d}.csv"), s, names)

    try:
        policy, reports = train(
            cfg.train, env, phi, callback=dump if cfg.output.dump_trajectories else None
        )
    except ConfigError as e:
        raise _Fail(EXIT_CONFIG, "config", str(e)) from None
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        raise _Fail(EXIT_RUNTIME, "runtime", str(e)) from None
    write_learning_curve(os.path.join(out, "learning_curve.csv"), reports, cfg.output.wall_clock)
    save_policy(policy, os.path.join(out, "policy.txt"))
    if not args.quiet:
        if reports:
            last = reports[-1]
            print(
                f"iterations {len(reports)}  final mean rho {_fmt(last.mean_rho)}  "
                f"satisfied {last.frac_satisfied:.2f}"
            )
        else:
            print("iterations 0")
        print(f"wrote {out}")
    return EXIT_OK


def cmd_monitor(args) -> int:
    vm, phi = _load_spec(args.spec)
    tau = _load_traj(args.traj, vm)
    rho = robustness(tau, phi)
    sat = eval_boolean(tau, phi)
    verdict = "SAT" if rho > 0 else "VIOL" if rho < 0 else "BOUNDARY"
    print(f"rho {_fmt(rho)}")
    print(f"verdict {verdict} (boolean {str(sat).lower()})")
    if args.beta is not None:
        beta = args.beta[-1]
        if not (np.isfinite(beta) and beta > 0):
            raise _Fail(EXIT_CONFIG, "argument", f"beta must be > 0 (got {beta})")
        dag = build_dag(phi, tau.shape[0])
        smooth = float(dag.value(tau[None], beta)[0])
        lo, hi = dag.error_bound(beta)
        print(f"rho_smooth {_fmt(smooth)} (beta {_fmt(beta)})")
        print(f"slack_min {_fmt(lo)}  slack_max {_fmt(hi)}")
    if rho > 0:
        return EXIT_OK
    return EXIT_VIOLATED if rho < 0 else EXIT_BOUNDARY


def cmd_parse(args) -> int:
    vm, phi = _load_spec(args.spec)
    print(tree(phi, vm.names or None))
    counts = node_counts(phi)
    print("counts " + " ".join(f"{k}={counts[k]}" for k in sorted(counts)))
    if args.horizon:
        dag = build_dag(phi, args.horizon)
        k = np.diff(dag.ptr)
        soft = dag.kind >= 2
        print(f"dag T={args.horizon} nodes {dag.n_nodes} edges {dag.n_edges} soft {int(soft.sum())}")
        print("fan-in " + " ".join(str(int(v)) for v in sorted(set(k[soft]))))
    return EXIT_OK


SWEEP_COLUMNS = ("beta", "rho", "rho_smooth", "abs_error", "slack_min", "slack_max", "contained")


def cmd_beta_sweep(args) -> int:
    vm, phi = _load_spec(args.spec)
    tau = _load_traj(args.traj, vm)
    betas = args.beta or [1.0, 3.0, 9.0, 27.0, 81.0]
    for b in betas:
        if not (np.isfinite(b) and b > 0):
            raise _Fail(EXIT_CONFIG, "argument", f"beta must be > 0 (got {b})")
    rho = robustness(tau, phi)
    dag = build_dag(phi, tau.shape[0])
    rows = []
    for b in betas:
        smooth = float(dag.value(tau[None], b)[0])
        lo, hi = dag.error_bound(b)
        ok = rho - lo - CONTAIN_TOL <= smooth <= rho + hi + CONTAIN_TOL
        rows.append((b, rho, smooth, abs(smooth - rho), lo, hi, "PASS" if ok else "FAIL"))
    print(f"{'beta':>10} {'rho_smooth':>14} {'|err|':>12} {'slack_min':>12} {'slack_max':>12}  bound")
    for b, _, s, err, lo, hi, ok in rows:
        print(f"{b:>10.4g} {s:>14.6g} {err:>12.4g} {lo:>12.4g} {hi:>12.4g}  {ok}")
    print(f"rho {_fmt(rho)}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for r in rows:
                w.writerow([_fmt(v) for v in r[:6]] + [r[6]])
    return EXIT_OK


def read_sweep_csv(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != SWEEP_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        return [{k: (v if k == "contained" else float(v)) for k, v in r.items()} for r in rd]


# -- entry point ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Fail(EXIT_CONFIG, "usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tlps", description="Temporal logic policy search toolkit.")
    p.add_argument("--version", action="version", version=f"tlps {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="run policy search from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--beta", type=float)
    t.add_argument("--out", help="output directory (overrides [output] directory)")
    t.add_argument("--dump-trajectories", action="store_true", help="write every sampled trajectory")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("monitor", help="robustness of one trajectory CSV against a spec")
    m.add_argument("--spec", required=True)
    m.add_argument("--traj", required=True)
    m.add_argument("--beta", type=float, nargs=1)
    m.set_defaults(func=cmd_monitor)

    q = sub.add_parser("parse", help="print the syntax tree of a spec file")
    q.add_argument("--spec", required=True)
    q.add_argument("--horizon", type=int, default=0, help="also report the smoothing DAG for this T")
    q.set_defaults(func=cmd_parse)

    b = sub.add_parser("beta-sweep", help="smoothed robustness and error bounds over several beta")
    b.add_argument("--spec", required=True)
    b.add_argument("--traj", required=True)
    b.add_argument("--beta", type=float, nargs="+")
    b.add_argument("--out", help="write the table as CSV")
    b.set_defaults(func=cmd_beta_sweep)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
            format="%(levelname)s %(message)s",
        )
        return args.func(args)
    except _Fail as f:
        print(f"error {f.kind}: {_one_line(f.reason)}", file=sys.stderr)
        return f.code


if __name__ == "__main__":
    sys.exit(main())
