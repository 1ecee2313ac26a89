"""Command-line entry point for certified variable-metric proximal ADMM runs.

``solve`` runs one instance with per-iteration verification and writes a CSV
iteration log plus a JSON verification report; ``batch`` sweeps a corpus of
instances and writes an aggregate report.  Exit codes: 0 all enabled
verifications pass, 2 verification failure, 1 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .admm import VmPadmmRun, compute_sigma_theta
from .problems import ProblemSpec, generate, load_problem
from .schedule import load_schedule

__all__ = ["main", "run_solve", "run_batch", "parse_generator_spec"]

CSV_COLUMNS = [
    "k", "res_x_dual", "res_y_dual", "res_gamma_dual", "res_max",
    "bound_pointwise", "erg_res_max", "bound_erg_res", "eps_x_a", "eps_y_a",
    "eps_sum", "bound_erg_eps", "eta_k", "hpe_lhs", "hpe_rhs", "hpe_slack",
]
VERIFY_FLAGS = ("hpe", "bounds", "memberships", "fejer")


class ConfigError(Exception):
    """Bad configuration or unreadable/malformed input files (exit 1)."""


def parse_generator_spec(spec: str, seed_override: int | None = None) -> ProblemSpec:
    """Parse ``gen:kind:dims:seed`` (dims like ``10x5``) into an instance."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] != "gen":
        raise ConfigError(f"generator spec must be gen:kind:dims:seed, got {spec!r}")
    _, kind, dims_s, seed_s = parts
    try:
        dims = tuple(int(d) for d in dims_s.split("x"))
        seed = int(seed_s)
    except ValueError as exc:
        raise ConfigError(f"bad dims/seed in generator spec {spec!r}: {exc}") from exc
    if seed_override is not None:
        seed = seed_override
    try:
        return generate(kind, dims if len(dims) > 1 else dims[0], seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_problem_arg(arg: str, seed_override: int | None) -> ProblemSpec:
    if arg.startswith("gen:"):
        return parse_generator_spec(arg, seed_override)
    if not os.path.exists(arg):
        raise ConfigError(f"problem file not found: {arg}")
    try:
        return load_problem(arg)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"malformed problem file {arg}: {exc}") from exc


def _fmt(v: float) -> str:
    return repr(float(v))


def run_solve(args) -> int:
    """Run one certified solve; writes the CSV log and JSON report."""
    seed_env = os.environ.get("VMPADMM_SEED")
    seed = int(seed_env) if seed_env is not None else args.seed
    verify = [f.strip() for f in args.verify.split(",") if f.strip()]
    for f in verify:
        if f not in VERIFY_FLAGS:
            raise ConfigError(f"unknown verify flag {f!r}; choose from {VERIFY_FLAGS}")
    if args.rho <= 0 or args.eps <= 0 or args.max_iters < 1:
        raise ConfigError("rho and eps must be positive and max_iters >= 1")

    problem = _load_problem_arg(args.problem, seed)
    try:
        schedule = load_schedule(args.schedule, problem.dims, A=problem.A)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"malformed schedule file {args.schedule}: {exc}") from exc
    report = schedule.validate(admm_mode=True)
    if not report.ok_for_admm():
        bad = report.sandwich_failures[:3] or [(k, "c") for k in report.c_over_one[:3]]
        raise ConfigError(f"schedule validation failed at (k, family) = {bad}")
    try:
        params = compute_sigma_theta(args.theta, margin=args.sigma_margin)
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from exc

    iters = min(args.max_iters, schedule.k_max)
    run = VmPadmmRun(problem, schedule, params)
    rows, checks = _drive(run, iters, args.rho, args.eps, verify, seed)
    first_pw = next((r["k"] for r in rows if r["res_max"] <= args.rho), None)
    first_erg = next(
        (r["k"] for r in rows if r["erg_res_max"] <= args.rho and r["eps_sum"] <= args.eps),
        None,
    )

    failures = {
        name: [k for k, ok, _ in results if not ok]
        for name, results in checks.items()
    }
    all_pass = not any(failures.values())
    doc = {
        "problem": problem.name or args.problem,
        "theta": args.theta,
        "verify": verify,
        "constants": {
            "sigma_theta": params.sigma,
            "tau_theta": params.tau,
            "C_S": schedule.C_S,
            "C_P": schedule.C_P,
            "E": run.bounds.E,
            "E_hat": run.bounds.E_hat,
            "d0_upper_bound": run.d0,
            "eta0": run.eta0,
        },
        "iterations": len(rows),
        "max_iters": args.max_iters,
        "checks": checks,
        "failures": failures,
        "all_pass": all_pass,
        "stopping": {
            "rho": args.rho,
            "eps": args.eps,
            "first_k_pointwise": first_pw if first_pw is not None else "not reached",
            "first_k_ergodic": first_erg if first_erg is not None else "not reached",
        },
    }
    _write_csv(args.log, rows)
    _write_json(args.report, doc)
    return 0 if all_pass else 2


def _drive(run: VmPadmmRun, iters: int, rho: float, eps: float, verify, seed):
    """Step the solver, collecting CSV rows and per-k check outcomes."""
    rows = []
    checks: dict[str, list] = {f: [] for f in verify}
    membership_seed = 0 if seed is None else seed
    stopped_pw = stopped_erg = False
    for _ in range(iters):
        it = run.step()
        k = it.k
        pw = run.pointwise_kkt_certificate(k)
        rng = np.random.default_rng(membership_seed * 100_003 + k)
        erg = run.ergodic_kkt_certificate(
            k, rng=rng, check_memberships="memberships" in verify
        )
        rows.append({
            "k": k,
            "res_x_dual": it.dual_x,
            "res_y_dual": it.dual_y,
            "res_gamma_dual": it.dual_gamma,
            "res_max": pw.dual_max,
            "bound_pointwise": pw.bound_residual,
            "erg_res_max": erg.dual_max,
            "bound_erg_res": erg.bound_residual,
            "eps_x_a": erg.eps_x,
            "eps_y_a": erg.eps_y,
            "eps_sum": erg.eps_x + erg.eps_y,
            "bound_erg_eps": erg.bound_eps,
            "eta_k": it.eta,
            "hpe_lhs": it.hpe_check.lhs,
            "hpe_rhs": it.hpe_check.rhs,
            "hpe_slack": it.hpe_check.slack,
        })
        if "hpe" in verify:
            checks["hpe"].append([k, it.hpe_check.ok, it.hpe_check.slack])
        if "bounds" in verify:
            for name in ("pointwise_res",):
                c = pw.checks[name]
                checks.setdefault("bounds", []).append([k, c.ok, c.slack])
            for name in ("ergodic_res", "ergodic_eps", "eps_x_nonneg",
                         "eps_y_nonneg", "eps_decomposition"):
                c = erg.checks[name]
                checks["bounds"].append([k, c.ok, c.slack])
        if "memberships" in verify:
            checks["memberships"].append(
                [k, pw.membership_ok and erg.membership_ok,
                 pw.membership_detail or erg.membership_detail]
            )
        if "fejer" in verify:
            ref = run.reference
            z_star = np.concatenate([ref.x, ref.y, ref.gamma])
            fc = run.hpe.fejer_check(z_star, k)
            checks["fejer"].append([k, fc.ok, fc.slack])
        stopped_pw = stopped_pw or pw.dual_max <= rho
        stopped_erg = stopped_erg or (erg.dual_max <= rho and erg.eps_x + erg.eps_y <= eps)
        if stopped_pw and stopped_erg:
            break
    return rows, checks


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r["k"]] + [_fmt(r[c]) for c in CSV_COLUMNS[1:]])


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def run_batch(args) -> int:
    """Run each corpus entry through ``solve``; write an aggregate report."""
    entries = _load_corpus(args.corpus)
    if not entries:
        raise ConfigError("corpus is empty")
    os.makedirs(args.out_dir, exist_ok=True)
    results = []
    worst_exit = 0
    for i, entry in enumerate(entries):
        tag = f"instance-{i:03d}"
        sub = argparse.Namespace(**vars(args))
        sub.problem = entry
        sub.log = os.path.join(args.out_dir, f"{tag}.csv")
        sub.report = os.path.join(args.out_dir, f"{tag}.json")
        try:
            code = run_solve(sub)
            with open(sub.report) as fh:
                rep = json.load(fh)
            worst = min(
                (min((s for _, _, s in v if isinstance(s, float)), default=np.inf)
                 for v in rep["checks"].values()),
                default=np.inf,
            )
            results.append({
                "problem": entry, "exit": code, "all_pass": rep["all_pass"],
                "worst_slack": None if np.isinf(worst) else worst,
            })
        except ConfigError as exc:
            code = 1
            results.append({"problem": entry, "exit": 1, "error": str(exc)})
        worst_exit = max(worst_exit, code if code != 1 else 2)
    doc = {"corpus": args.corpus, "instances": results,
           "all_pass": all(r.get("all_pass") for r in results)}
    _write_json(os.path.join(args.out_dir, "aggregate.json"), doc)
    return 0 if doc["all_pass"] else 2 if worst_exit else 0


def _load_corpus(spec: str) -> list[str]:
    """A corpus is either comma-separated gen: specs or a JSON list file."""
    if spec.startswith("gen:"):
        return [s.strip() for s in spec.split(",") if s.strip()]
    if not os.path.exists(spec):
        raise ConfigError(f"corpus file not found: {spec}")
    try:
        with open(spec) as fh:
            entries = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed corpus file {spec}: {exc}") from exc
    if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
        raise ConfigError("corpus file must hold a JSON list of problem entries")
    return entries


def _add_common(p):
    p.add_argument("--schedule", required=True, help="schedule JSON file")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma-margin", type=float, default=1e-3, dest="sigma_margin")
    p.add_argument("--max-iters", type=int, default=1000, dest="max_iters")
    p.add_argument("--rho", type=float, default=1e-6)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--verify", default="hpe,bounds,memberships,fejer")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmpadmm")
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run one certified solve")
    solve.add_argument("--problem", required=True,
                       help="problem JSON path or gen:kind:dims:seed")
    _add_common(solve)
    solve.add_argument("--log", required=True, help="CSV iteration log path")
    solve.add_argument("--report", required=True, help="JSON report path")
    batch = sub.add_parser("batch", help="run a corpus of instances")
    batch.add_argument("--corpus", required=True,
                       help="JSON list file or comma-separated gen: specs")
    _add_common(batch)
    batch.add_argument("--out-dir", default="vmpadmm-batch", dest="out_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return run_solve(args)
        return run_batch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
