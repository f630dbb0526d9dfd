"""Command-line entry point wiring all modules together.

Subcommands: analytic, estimate, lmo, train, concentration, verify.  JSON is
used for scalars and models, CSV for tables; floats are serialized with 17
significant digits so outputs round-trip and diff cleanly.  Every run
records a metadata block (version, seed, RNG identity, full flag set)
alongside its results, and all files are written atomically.

Exit codes: 0 success, 1 check or numeric failure, 2 usage or data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, estimator, lmo, verify
from .distributions import (
    RNG_IDENTITY,
    EmptyAcceptanceSetError,
    SampleVector,
    parse_distribution,
    ubsr_exact,
)
from .estimator import SrProblem, parse_tail
from .lmo import LmoSettings, RegressionDataset
from .optimizer import BisectionConfig, split_dataset, train
from .rootfind import BracketExpansionError
from .utility import parse_utility

SEED_ENV_VAR = "SHORTFALL_SEED"


class DataError(ValueError):
    """Malformed input file; message names the offending row/column."""


# ---------------------------------------------------------------- serialization

def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _json_fragment(obj, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [inner + _json_fragment(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            inner + json.dumps(str(k)) + ": " + _json_fragment(v, indent + 2)
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def json_dumps(obj) -> str:
    """JSON with floats at 17 significant digits (diff-stable outputs)."""
    return _json_fragment(obj, 0) + "\n"


def write_text_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv_atomic(path: str, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    write_text_atomic(path, "\n".join(lines) + "\n")


def emit_json(obj, out_path: str | None) -> None:
    text = json_dumps(obj)
    if out_path:
        write_text_atomic(out_path, text)
    else:
        sys.stdout.write(text)


def run_metadata(args: argparse.Namespace, seed: int) -> dict:
    flags = {
        k: (v.tolist() if isinstance(v, np.ndarray) else v)
        for k, v in sorted(vars(args).items())
        if k != "func" and v is not None
    }
    return {
        "version": __version__,
        "seed": seed,
        "rng": RNG_IDENTITY,
        "flags": flags,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


# ---------------------------------------------------------------- file loading

def _read_rows(path: str) -> list[list[str]]:
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError(f"{path}: empty file (header row required)")
    return rows


def _parse_cell(path: str, rownum: int, col: str, text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DataError(f"{path}: row {rownum}, column {col}: cannot parse {text!r}") from None
    if not math.isfinite(val):
        raise DataError(f"{path}: row {rownum}, column {col}: non-finite value {text!r}")
    return val


def load_dataset(path: str) -> RegressionDataset:
    """CSV with header x1..xd,y; rejects NaN/Inf and ragged rows by number."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"x{i + 1}" for i in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise DataError(
            f"{path}: header must be x1..xd,y (got {','.join(header)!r})"
        )
    xs, ys = [], []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise DataError(
                f"{path}: row {rownum}: expected {d + 1} columns, found {len(row)}"
            )
        xs.append([_parse_cell(path, rownum, header[j], row[j]) for j in range(d)])
        ys.append(_parse_cell(path, rownum, "y", row[d]))
    if not xs:
        raise DataError(f"{path}: no data rows")
    return RegressionDataset(np.array(xs), np.array(ys))


def load_samples(path: str) -> SampleVector:
    """CSV with a single column z."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if header != ["z"]:
        raise DataError(f"{path}: sample file header must be the single column z")
    vals = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != 1:
            raise DataError(f"{path}: row {rownum}: expected 1 column, found {len(row)}")
        vals.append(_parse_cell(path, rownum, "z", row[0]))
    if not vals:
        raise DataError(f"{path}: no data rows")
    return SampleVector(np.array(vals), seed=None)


# ---------------------------------------------------------------- arg helpers

def expand_config(argv: list[str]) -> list[str]:
    """Splice `--config file.json` into flag form.

    The JSON object maps flag names (without leading dashes) to values,
    using the same grammars as the command line; explicit command-line
    flags win because they come later.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise DataError("--config requires a path")
    path = argv[i + 1]
    if not os.path.exists(path):
        raise DataError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: invalid JSON config: {err}") from None
    if not isinstance(cfg, dict):
        raise DataError(f"{path}: config must be a JSON object of flag: value")
    injected: list[str] = []
    for key, value in cfg.items():
        injected.append(f"--{key}")
        if isinstance(value, (list, tuple)):
            injected.append(",".join(str(v) for v in value))
        else:
            injected.append(str(value))
    head = argv[: i if i >= 1 else 0]
    tail = argv[i + 2 :]
    # config flags go right after the subcommand so later flags override
    if head:
        return head[:1] + injected + head[1:] + tail
    return injected + tail


def _parse_pair(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise DataError(f"{flag} expects lo,hi (got {text!r})")
    return float(parts[0]), float(parts[1])


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(","))


def _resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _problem_from_args(args, z, lam: float) -> SrProblem:
    if args.bracket is not None:
        lo, hi = _parse_pair(args.bracket, "--bracket")
        return SrProblem(lam, lo, hi, eta=1.0)
    return estimator.default_problem(z, lam)


# ---------------------------------------------------------------- subcommands

def cmd_analytic(args) -> int:
    d = parse_distribution(args.dist)
    u = parse_utility(args.utility)
    value = ubsr_exact(d, u, args.lam, tol=args.tol)
    emit_json({"ubsr": value, "meta": run_metadata(args, _resolve_seed(args))}, args.out)
    return 0


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args)
    u = parse_utility(args.utility)
    if os.path.exists(args.input):
        z = load_samples(args.input)
    else:
        try:
            d = parse_distribution(args.input)
        except ValueError:
            raise DataError(
                f"--input {args.input!r} is neither an existing file nor a distribution spec"
            ) from None
        if args.n is None:
            raise DataError("--n is required when --input is a distribution spec")
        z = d.sample(args.n, seed)
    prob = _problem_from_args(args, z, args.lam)
    est = estimator.estimate_ubsr(z, u, prob, args.tol)
    emit_json(
        {
            "estimate": est.value,
            "iterations": est.iterations,
            "bracket_used": list(est.bracket_used),
            "q_at_estimate": est.q_at_estimate,
            "expanded": est.expanded,
            "meta": run_metadata(args, seed),
        },
        args.out,
    )
    return 0


def cmd_lmo(args) -> int:
    data = load_dataset(args.data)
    u = parse_utility(args.utility)
    settings = LmoSettings(grad_tol=args.grad_tol, max_iter=args.max_iter)
    res = lmo.solve(data, u, args.gamma, args.norm_bound, settings)
    emit_json(
        {
            "weights": res.model.weights,
            "objective": res.objective,
            "iterations": res.iterations,
            "grad_norm": res.grad_norm,
            "meta": run_metadata(args, _resolve_seed(args)),
        },
        args.out,
    )
    return 0


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    data = load_dataset(args.data)
    u = parse_utility(args.utility)
    train_half, estimate_half = split_dataset(data, args.shuffle_seed)
    cfg = BisectionConfig(
        iterations_T=args.T,
        lam=args.lam,
        utility=u,
        norm_bound=args.norm_bound,
        estimator_tol=args.estimator_tol,
    )
    model, trace = train(train_half, estimate_half, cfg)
    if trace.exceeded_beta0:
        sys.stderr.write(
            "warning: final risk estimate exceeds beta0; the initial upper bound "
            "undershot the true risk (consider a positive beta0 margin)\n"
        )

    header = ["t", "alpha", "beta", "gamma_t", "gamma_hat", "branch", "lmo_objective", "lmo_iters"]
    rows = [
        [
            str(r.t),
            fmt17(r.alpha),
            fmt17(r.beta),
            fmt17(r.gamma),
            fmt17(r.gamma_hat),
            r.branch,
            fmt17(r.lmo_objective),
            str(r.lmo_iterations),
        ]
        for r in trace.rows
    ]
    write_csv_atomic(args.trace, header, rows)

    payload = {
        "weights": model.weights,
        "lambda": args.lam,
        "utility": u.spec(),
        "T": args.T,
        "beta0": trace.beta0,
        "final_ubsr_estimate": trace.rows[-1].gamma_hat,
        "meta": run_metadata(args, seed),
    }
    emit_json(payload, args.out)
    if args.figures:
        from . import figures

        for path in figures.trace_figure(trace, args.figures):
            sys.stderr.write(f"figure written: {path}\n")
    return 0


def cmd_concentration(args) -> int:
    if not args.out:
        raise DataError("--out CSV path is required for concentration")
    seed = _resolve_seed(args)
    d = parse_distribution(args.dist)
    u = parse_utility(args.utility)
    tail = parse_tail(args.tail)
    if args.bracket is not None:
        lo, hi = _parse_pair(args.bracket, "--bracket")
        prob = estimator.certify_problem(d, u, args.lam, lo, hi)
    else:
        t_star = ubsr_exact(d, u, args.lam)
        s = max(1.0, math.sqrt(max(d.variance(), 0.0)))
        prob = estimator.certify_problem(d, u, args.lam, t_star - s, t_star + s)
    report, records = verify.run_concentration_suite(
        tail, d, u, prob, args.n_grid, args.delta_grid, args.trials, seed
    )
    header = ["n", "delta", "trial", "abs_error", "bound", "covered"]
    rows = [
        [str(r.n), fmt17(r.delta), str(r.trial), fmt17(r.abs_error), fmt17(r.bound), str(int(r.covered))]
        for r in records
    ]
    write_csv_atomic(args.out, header, rows)
    meta = run_metadata(args, seed)
    meta["bracket"] = [prob.t_lo, prob.t_hi]
    meta["eta"] = prob.eta
    write_text_atomic(args.out + ".meta.json", json_dumps({"report": report.to_dict(), "meta": meta}))
    if args.figures:
        from . import figures

        for path in figures.concentration_figures(report.details, args.figures):
            sys.stderr.write(f"figure written: {path}\n")
    sys.stdout.write(json_dumps({"passed": report.passed, "csv": args.out}))
    return 0 if report.passed else 1


def _verify_dist(args, name, default):
    spec = getattr(args, name, None)
    return parse_distribution(spec) if spec else default


def cmd_verify(args) -> int:
    seed = _resolve_seed(args)
    u = parse_utility(args.utility) if args.utility else None
    lam = args.lam
    reports: list[verify.VerificationReport] = []

    if args.check in ("nonconvexity", "all"):
        reports.append(verify.check_nonconvexity())
    if args.check == "pseudolinear":
        if args.dist1 and args.dist2:
            reports.append(
                verify.check_pseudolinearity(
                    parse_distribution(args.dist1),
                    parse_distribution(args.dist2),
                    u or verify.hinge(),
                    lam if lam is not None else 2.0,
                    grid=args.grid,
                )
            )
        else:
            rng = np.random.Generator(np.random.Philox(seed))
            for k in range(args.pairs):
                f1 = verify.random_distribution(rng)
                f2 = verify.random_distribution(rng)
                util = [verify.hinge(), verify.linear(), verify.blend()][k % 3]
                rep = verify.check_pseudolinearity(
                    f1, f2, util, float(rng.uniform(0.2, 3.0)), grid=args.grid
                )
                rep.details["pair"] = k
                reports.append(rep)
    if args.check == "gradient":
        f1 = _verify_dist(args, "dist1", verify.Uniform(0.0, 10.0))
        f2 = _verify_dist(args, "dist2", verify.Uniform(10.0, 20.0))
        reports.append(
            verify.check_gradient(
                f1,
                f2,
                u or verify.blend(a=0.9, tau=0.5),
                lam if lam is not None else 2.0,
                eps_grid=args.eps_grid,
            )
        )
    if args.check == "randomization":
        f1 = _verify_dist(args, "dist1", verify.Uniform(0.0, 10.0))
        f2 = _verify_dist(args, "dist2", verify.Uniform(0.0, 4.0))
        reports.append(
            verify.check_randomization_invariance(
                f1, f2, u or verify.hinge(), lam if lam is not None else 6.0, alphas=args.alphas
            )
        )
    if args.check == "concentration":
        d = _verify_dist(args, "dist", verify.Uniform(0.0, 10.0))
        util = u or verify.hinge()
        level = lam if lam is not None else 2.0
        tail = parse_tail(args.tail) if args.tail else estimator.TailSpec("subgauss", 5.0)
        if args.bracket is not None:
            lo, hi = _parse_pair(args.bracket, "--bracket")
            prob = estimator.certify_problem(d, util, level, lo, hi)
        else:
            t_star = ubsr_exact(d, util, level)
            s = max(1.0, math.sqrt(max(d.variance(), 0.0)))
            prob = estimator.certify_problem(d, util, level, t_star - s, t_star + s)
        report, records = verify.run_concentration_suite(
            tail, d, util, prob, args.n_grid, args.delta_grid, args.trials, seed
        )
        reports.append(report)
        if args.out:
            header = ["n", "delta", "trial", "abs_error", "bound", "covered"]
            rows = [
                [str(r.n), fmt17(r.delta), str(r.trial), fmt17(r.abs_error), fmt17(r.bound), str(int(r.covered))]
                for r in records
            ]
            write_csv_atomic(args.out, header, rows)
        if args.figures:
            from . import figures

            for path in figures.concentration_figures(report.details, args.figures):
                sys.stderr.write(f"figure written: {path}\n")
    if args.check == "all":
        reports.extend(verify.default_checks(seed=seed, trials=args.trials, pairs=args.pairs)[1:])

    payload = {
        "checks": [r.to_dict() for r in reports],
        "all_passed": all(r.passed for r in reports),
        "meta": run_metadata(args, seed),
    }
    if args.report:
        write_text_atomic(args.report, json_dumps(payload))
    for r in reports:
        status = "SKIP" if r.skipped else ("PASS" if r.passed else "FAIL")
        sys.stdout.write(f"{status} {r.name}\n")
    return 0 if payload["all_passed"] else 1


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shortfall",
        description="Estimate and minimize utility-based shortfall risk of squared losses.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    common.add_argument("--threads", type=int, default=1, help="parallelism cap; results are identical at any value")
    common.add_argument("--out", default=None, help="output path (JSON commands default to stdout)")
    common.add_argument("--config", default=None, help="JSON file of flag defaults (same grammars; explicit flags win)")

    p = sub.add_parser("analytic", parents=[common], help="exact shortfall risk of an analytic law")
    p.add_argument("--dist", required=True)
    p.add_argument("--utility", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("estimate", parents=[common], help="sample-average shortfall risk estimate")
    p.add_argument("--input", required=True, help="sample CSV (column z) or a distribution spec")
    p.add_argument("--utility", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--bracket", default=None, help="lo,hi root bracket (expanded automatically if wrong)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="draw count when --input is a distribution spec")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("lmo", parents=[common], help="solve the surrogate minimization at a level gamma")
    p.add_argument("--data", required=True, help="dataset CSV with header x1..xd,y")
    p.add_argument("--utility", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--norm-bound", type=float, default=None)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=50_000)
    p.set_defaults(func=cmd_lmo)

    p = sub.add_parser("train", parents=[common], help="risk-minimizing regression via level bisection")
    p.add_argument("--data", required=True)
    p.add_argument("--utility", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--norm-bound", type=float, default=None)
    p.add_argument("--shuffle-seed", type=int, default=None, help="shuffle before the half split (default: no shuffle)")
    p.add_argument("--estimator-tol", type=float, default=None)
    p.add_argument("--trace", required=True, help="per-iteration trace CSV path")
    p.add_argument("--figures", default=None, help="directory for trace figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("concentration", parents=[common], help="Monte-Carlo coverage of the deviation bounds")
    p.add_argument("--dist", required=True)
    p.add_argument("--utility", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--tail", required=True, help="subgauss:sigma | subexp:K")
    p.add_argument("--n-grid", type=_parse_ints, default=(100, 1000, 10000))
    p.add_argument("--delta-grid", type=_parse_floats, default=(0.05, 0.1))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--bracket", default=None, help="lo,hi bracket (default: auto around the exact value)")
    p.add_argument("--figures", default=None, help="directory for coverage/error figures")
    p.set_defaults(func=cmd_concentration)

    p = sub.add_parser("verify", parents=[common], help="structural property checks")
    p.add_argument(
        "--check",
        required=True,
        choices=["nonconvexity", "pseudolinear", "gradient", "randomization", "concentration", "all"],
    )
    p.add_argument("--report", default=None, help="write the check reports as JSON")
    p.add_argument("--dist", default=None)
    p.add_argument("--dist1", default=None)
    p.add_argument("--dist2", default=None)
    p.add_argument("--utility", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--eps-grid", type=_parse_floats, default=(1e-3, 1e-4, 1e-5))
    p.add_argument("--alphas", type=_parse_floats, default=(0.1, 0.25, 0.5, 0.75, 0.9))
    p.add_argument("--tail", default=None)
    p.add_argument("--n-grid", type=_parse_ints, default=(100, 1000))
    p.add_argument("--delta-grid", type=_parse_floats, default=(0.05, 0.1))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--bracket", default=None)
    p.add_argument("--figures", default=None)
    p.set_defaults(func=cmd_verify)

    return parser


def parse_and_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        argv = expand_config(argv)
    except DataError as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as err:  # DataError and grammar/validation failures
        sys.stderr.write(f"error: {err}\n")
        return 2
    except (EmptyAcceptanceSetError, BracketExpansionError, FloatingPointError, RuntimeError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


def main(argv: list[str] | None = None) -> int:
    return parse_and_dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
