"""Command-line entry point: ``condtau {test,tree,simulate,verify-counterexamples}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 coverage
failure of the conditional bootstrap.  Failures print a JSON error object
on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap_tests
from .covariance import delta_hat
from .data import box_family_from_config, category_family, load_sample, quantile_family
from .errors import CondTauError, ValidationError
from .estimators import tau_matrix
from .inference import METHODS, wald_statistic
from .io import dumps, envelope, write_text
from .simulation import Scenario, TAGS, report_csv, run_study, verify_counterexamples
from .tree import TreeConfig, cut_ckt, leaves

THREADS_ENV = "CONDTAU_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ValidationError(f"{THREADS_ENV} must be >= 1")
        return value
    return os.cpu_count() or 1


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def run_methods(sample, family, methods, B, seed, threads=1, covariance="auto",
                ridge=False, smoothed=False, stream=()) -> tuple:
    """Run the requested tests on one sample and box family."""
    if family.m < 2:
        raise ValidationError(f"testing needs at least 2 boxes, got {family.m}")
    tau = tau_matrix(sample, family)
    results = []
    if "wald" in methods:
        disjoint = {"auto": None, "disjoint": True, "general": False}[covariance]
        cov = delta_hat(sample, family, disjoint=disjoint, tau=tau)
        results.append(wald_statistic(tau, cov, ridge=ridge))
    for j, scheme in enumerate(("classical", "conditional")):
        wanted = [s for s in ("inf", "l2") if f"boot_{s}_{scheme}" in methods]
        if wanted:
            cfg = BootstrapConfig(B=B, seed=seed, smoothed=smoothed, workers=threads,
                                  stream=tuple(stream) + (j,))
            results.extend(bootstrap_tests(sample, family, scheme=scheme, config=cfg,
                                           statistics=wanted, tau=tau))
    order = {m: i for i, m in enumerate(METHODS)}
    results.sort(key=lambda r: order[r.method])
    return tau, results


def _family(args, sample):
    chosen = [x for x in (args.boxes, args.category_boxes, args.quantile_boxes) if x]
    if len(chosen) != 1:
        raise ValidationError("give exactly one of --boxes, --category-boxes, --quantile-boxes")
    if args.boxes:
        path = Path(args.boxes)
        if not path.exists():
            raise ValidationError(f"box file {args.boxes!r} does not exist")
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"box file is not valid JSON: {exc}") from None
        return box_family_from_config(config, sample)
    names = sample.conditioning_names
    if args.category_boxes:
        if args.category_boxes not in names:
            raise ValidationError(f"{args.category_boxes!r} is not a conditioning column")
        return category_family(sample, names.index(args.category_boxes))
    col, _, m = args.quantile_boxes.rpartition(":")
    if col not in names or not m.isdigit():
        raise ValidationError("--quantile-boxes expects COLUMN:M with COLUMN a conditioning column")
    return quantile_family(sample, names.index(col), int(m))


def cmd_test(args) -> int:
    sample = load_sample(args.input, args.roles)
    family = _family(args, sample)
    methods = args.method or list(METHODS)
    config = {
        "input": str(args.input), "roles": args.roles, "boxes": family.to_dict(sample.conditioning_names),
        "methods": methods, "B": args.B, "seed": args.seed, "covariance": args.covariance,
        "ridge": args.ridge, "smoothed": args.smoothed, "n": sample.n,
    }
    tau, results = run_methods(sample, family, methods, args.B, args.seed, args.threads,
                               args.covariance, args.ridge, args.smoothed)
    out = envelope("test", config, args.seed, taus=tau.to_dict(),
                   results=[r.to_dict() for r in results])
    write_text(args.out, dumps(out))
    return 0


def cmd_tree(args) -> int:
    sample = load_sample(args.input, args.roles)
    tree_cfg = TreeConfig(min_cut=args.min_cut, min_size=args.min_size, alpha=args.alpha,
                          max_depth=args.max_depth)
    methods = args.method or ["boot_inf_classical"]
    if not 0 < args.split_fraction <= 1:
        raise ValidationError("--split-fraction must lie in (0, 1]")
    config = {
        "input": str(args.input), "roles": args.roles, "tree": tree_cfg.__dict__.copy(),
        "split_fraction": args.split_fraction, "methods": methods, "B": args.B, "seed": args.seed,
        "n": sample.n,
    }
    notices = []
    if args.split_fraction < 1:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed, spawn_key=(0,))))
        perm = rng.permutation(sample.n)
        n_build = int(round(args.split_fraction * sample.n))
        build = sample.take(np.sort(perm[:n_build]))
        held_out = sample.take(np.sort(perm[n_build:]))
    else:
        build, held_out = sample, None
        notices.append("split fraction 1.0: tree grown on all data, no held-out test")
    tree = cut_ckt(build, tree_cfg)
    family = leaves(tree)
    results = []
    if held_out is not None:
        if family.m < 2:
            notices.append("tree has a single leaf; test skipped")
        else:
            _, res = run_methods(held_out, family, methods, args.B, args.seed, args.threads,
                                 stream=(1,))
            results = [r.to_dict() for r in res]
    for note in notices:
        _warn(note)
    dot = tree.to_dot()
    out = envelope("tree", config, args.seed, tree=tree.to_dict(), leaves=family.labels,
                   n_build=build.n, n_test=held_out.n if held_out is not None else 0,
                   results=results, notices=notices)
    write_text(args.out, dumps(out))
    dot_path = args.dot
    if dot_path is None and args.out not in (None, "-"):
        dot_path = str(Path(args.out).with_suffix(".dot"))
    if dot_path:
        write_text(dot_path, dot)
    return 0


def cmd_simulate(args) -> int:
    if args.config:
        base = json.loads(Path(args.config).read_text())
    else:
        base = {}
    base.setdefault("tag", args.scenario)
    if base["tag"] is None:
        raise ValidationError("give --scenario or --config")
    for key in ("n", "lam", "p", "q"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.alternative:
        base["alternative"] = True
    tree = {k: v for k, v in (("min_cut", args.min_cut), ("min_size", args.min_size),
                              ("alpha", args.alpha), ("max_depth", args.max_depth)) if v is not None}
    if tree:
        base["tree"] = {**base.get("tree", {}), **tree}
    ms = args.m or [base.get("m", 4)]
    methods = args.method or (["wald", "boot_inf_classical"] if base["tag"] == "dvine_datadriven"
                              else list(METHODS))
    reports = []
    for m in ms:
        scenario = Scenario.from_dict({**base, "m": m})
        reports.append(run_study(scenario, methods, R=args.R, seed=args.seed, B=args.B,
                                 workers=args.threads))
    config = {"scenario": base, "m": ms, "methods": methods, "R": args.R, "B": args.B,
              "seed": args.seed}
    out = envelope("simulate", config, args.seed, reports=[r.to_dict() for r in reports])
    write_text(args.out, dumps(out))
    if args.csv:
        write_text(args.csv, report_csv(reports))
    return 0


def cmd_verify(args) -> int:
    claims = verify_counterexamples(n=args.n, seed=args.seed)
    for c in claims:
        print(f"{c.status:4s}  {c.name}: {c.value:+.4f} (target {c.target}, tol {c.tolerance:.3g})",
              file=sys.stderr)
    config = {"n": args.n, "seed": args.seed}
    out = envelope("verify-counterexamples", config, args.seed, claims=[c.to_dict() for c in claims],
                   passed=all(c.status == "PASS" for c in claims))
    write_text(args.out, dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condtau", description="Tests of equal conditional Kendall's tau across boxes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_input=True):
        if with_input:
            p.add_argument("--input", required=True, help="headed UTF-8 CSV file")
            p.add_argument("--roles", required=True,
                           help="NAME:ROLE,... with ROLE in conditioned|conditioning|categorical|ignored, "
                                "or a JSON object / file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker budget (default ${THREADS_ENV} or all cores); results do not depend on it")
        p.add_argument("--out", default=None, help="output JSON path (default stdout)")

    def methods(p):
        p.add_argument("--method", action="append", choices=METHODS,
                       help="test to run; repeat for several")
        p.add_argument("--B", type=int, default=1000, help="bootstrap replicates")

    t = sub.add_parser("test", help="test equality of box taus on a CSV sample")
    common(t)
    methods(t)
    t.add_argument("--boxes", help="JSON box configuration")
    t.add_argument("--category-boxes", help="one box per level of this categorical column")
    t.add_argument("--quantile-boxes", help="COLUMN:M, M boxes at empirical quantiles")
    t.add_argument("--covariance", choices=("auto", "disjoint", "general"), default="auto")
    t.add_argument("--ridge", action="store_true", help="add 1e-8*trace/size to the Wald matrix")
    t.add_argument("--smoothed", action="store_true", help="bootstrap p-value (1+#)/(B+1)")
    t.set_defaults(func=cmd_test)

    r = sub.add_parser("tree", help="grow a dependence tree and test its leaves on held-out data")
    common(r)
    methods(r)
    r.add_argument("--min-cut", type=float, default=TreeConfig.min_cut)
    r.add_argument("--min-size", type=float, default=TreeConfig.min_size)
    r.add_argument("--alpha", type=float, default=TreeConfig.alpha)
    r.add_argument("--max-depth", type=int, default=TreeConfig.max_depth)
    r.add_argument("--split-fraction", type=float, default=0.5,
                   help="share of rows used to grow the tree (1.0 disables the held-out test)")
    r.add_argument("--dot", default=None, help="DOT output path (default: next to --out)")
    r.set_defaults(func=cmd_tree)

    s = sub.add_parser("simulate", help="Monte Carlo level/power study")
    common(s, with_input=False)
    methods(s)
    s.add_argument("--scenario", choices=TAGS)
    s.add_argument("--config", help="scenario JSON")
    s.add_argument("--n", type=int)
    s.add_argument("--m", type=int, action="append", help="number of boxes; repeat for a sweep")
    s.add_argument("--p", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--lam", type=float, help="break point of clayton_break")
    s.add_argument("--alternative", action="store_true", help="dvine_datadriven under the alternative")
    s.add_argument("--R", type=int, default=200, help="Monte Carlo replications")
    s.add_argument("--min-cut", type=float)
    s.add_argument("--min-size", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--max-depth", type=int)
    s.add_argument("--csv", help="CSV table output path")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-counterexamples", help="Monte Carlo check of the two counter-examples")
    common(v, with_input=False)
    v.add_argument("--n", type=int, default=100_000)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = default_threads()
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        return args.func(args)
    except CondTauError as exc:
        print(dumps(exc.to_dict(), indent=None), end="", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
