"""Command-line interface: order certification, experiments, defect scans.

Subcommands:

* ``verify-algebra`` -- certify the formal order of built-in or custom scheme
  expressions in exact arithmetic and report the first defect;
* ``run``            -- run a weak-error experiment from a TOML config, write
  CSV plus a plot script, print the fitted order;
* ``convergence``    -- compare several schemes on one experiment;
* ``defect-scan``    -- tabulate per-step generator defects against the
  cutoff and fit their exponents.

The experiment file is TOML with ``[model]``, ``[scheme]`` and
``[experiment]`` tables (see the README for the full key reference).  With a
fixed ``--seed`` every output file is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import algebra, models
from .exceptions import ConfigurationError, SplitSdeError
from .jumps import per_step_defect
from .montecarlo import (
    estimate,
    parse_test_function,
    write_plot_script,
    write_report_csv,
)
from .schemes import JumpApproxConfig, SchemeConfig, resolve_eps


@dataclass
class ExperimentConfig:
    """Validated contents of the experiment file."""

    model: models.SdeModel
    scheme: SchemeConfig
    functions: list
    T: float
    x0: float
    n_list: list[int]
    paths: int
    seed: int
    schemes_to_compare: list[str] = field(default_factory=list)
    defect_functions: list[str] = field(default_factory=list)
    defect_eps: list[float] = field(default_factory=list)
    defect_x0: float = 1.0


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigurationError(f"config: [{section}] is missing required key {key!r}")
    return table[key]


def load_config(path: str | Path, scheme_kind: str | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"config: TOML parse error in {path}: {exc}") from exc
    model_table = _require(raw, "model", "top level")
    model = models.from_config(model_table)
    scheme_table = raw.get("scheme", {})
    jump_table = scheme_table.get("jump", {})
    jump_cfg = JumpApproxConfig(
        kind=jump_table.get("kind", "auto"),
        M=jump_table.get("M"),
        eps_mode=jump_table.get("eps_mode", "ar"),
        eps=jump_table.get("eps"),
        order_target=jump_table.get("order_target", 2),
        bernoulli=jump_table.get("bernoulli", "one"),
        localization_r=jump_table.get("localization_r", 2.0),
        l3_r=jump_table.get("l3_r", 0.0),
        substeps=jump_table.get("substeps", 1),
    )
    scheme = SchemeConfig(
        kind=scheme_kind or scheme_table.get("kind", "nv_b"),
        model=model,
        diffusion_flow=scheme_table.get("diffusion_flow", "exact"),
        noise=scheme_table.get("noise", "gaussian"),
        jump=jump_cfg,
    )
    exp = _require(raw, "experiment", "top level")
    n_list = [int(v) for v in _require(exp, "n_list", "experiment")]
    functions = [parse_test_function(name) for name in exp.get("f", ["x"])]
    conv = raw.get("convergence", {})
    scan = raw.get("defect_scan", {})
    return ExperimentConfig(
        model=model,
        scheme=scheme,
        functions=functions,
        T=float(_require(exp, "T", "experiment")),
        x0=float(exp.get("x0", 1.0)),
        n_list=n_list,
        paths=int(exp.get("paths", 10_000)),
        seed=int(exp.get("seed", 0)),
        schemes_to_compare=list(conv.get("schemes", [])),
        defect_functions=list(scan.get("f", ["x3", "x4"])),
        defect_eps=[float(e) for e in scan.get("eps_list", [1e-1, 1e-2, 1e-3])],
        defect_x0=float(scan.get("x0", 1.0)),
    )


def _defect_word(word) -> str:
    return " ".join(f"L{g}" for g in word) if word else "(empty)"


def cmd_verify_algebra(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    targets: list[tuple[str, algebra.SchemeExpr, int]] = []
    for name in args.scheme or []:
        if name not in algebra.BUILTIN_EXPRS:
            print(
                f"error: unknown scheme {name!r}; builtins: "
                f"{', '.join(sorted(algebra.BUILTIN_EXPRS))}",
                file=sys.stderr,
            )
            return 2
        targets.append((name, algebra.BUILTIN_EXPRS[name](args.d), args.d))
    if args.expr:
        try:
            expr = algebra.parse_scheme_expr(args.expr)
        except ConfigurationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        targets.append(("custom", expr, args.d))
    if not targets:
        print("error: provide --scheme names and/or an --expr string", file=sys.stderr)
        return 2
    for name, expr, d in targets:
        order, defect = algebra.order_of(expr, d, args.max_order)
        line = f"scheme {name} (d={d}): order {order} (checked to {args.max_order})"
        if defect is not None:
            line += (
                f"; first defect at degree {defect.degree}: word {_defect_word(defect.word)}"
                f" coefficient {defect.actual} expected {defect.expected}"
            )
        if args.oracle_trials > 0:
            check_m = min(order, args.max_order)
            agrees = algebra.matrix_oracle_check(expr, d, check_m, args.oracle_trials, rng)
            line += f"; matrix oracle at degree {check_m}: {'agrees' if agrees else 'DISAGREES'}"
            if not agrees:
                failures += 1
        documented = algebra.DOCUMENTED_ORDERS.get(name)
        if documented is not None and order < documented:
            line += f"  [FAIL: documented order {documented}]"
            failures += 1
        print(line)
    return 1 if failures else 0


def _print_report(report, fit_note=""):
    print(f"scheme={report.scheme} f={report.f_name} reference={report.provenance}")
    for row in report.rows:
        print(
            f"  n={row.n:5d} estimate={row.estimate:+.8e} stderr={row.stderr:.2e} "
            f"error={row.error:.3e} aborted={row.aborted}"
        )
    fit = report.fit
    if fit.status == "ok":
        print(f"  fitted order: {fit.order:.3f} +/- {fit.ci:.3f} "
              f"({fit.points_used} points){fit_note}")
    else:
        print(f"  fitted order: indeterminate ({fit.points_used} usable points){fit_note}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    out_dir = Path(args.out_dir)
    if args.dry_run:
        print("plan:")
        print(f"  model: {cfg.model.name} (dim={cfg.model.dim}, d={cfg.model.d})")
        print(f"  scheme: {cfg.scheme.kind} flow={cfg.scheme.diffusion_flow} "
              f"noise={cfg.scheme.noise} jump={cfg.scheme.resolved_jump_kind()}")
        for n in cfg.n_list:
            eps = resolve_eps(cfg.scheme, cfg.T / n)
            print(f"  n={n}: step={cfg.T / n:.6g} eps={eps if eps is not None else '-'}")
        print(f"  f={[f.name for f in cfg.functions]} T={cfg.T} x0={cfg.x0} "
              f"paths={cfg.paths} seed={seed} out={out_dir}")
        return 0
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in cfg.functions:
        report = estimate(
            cfg.scheme, f, cfg.T, cfg.x0, cfg.n_list, cfg.paths, seed, workers=args.threads
        )
        stem = f"{cfg.scheme.kind}_{f.name}"
        csv_path = out_dir / f"{stem}.csv"
        write_report_csv(report, csv_path)
        write_plot_script(report, csv_path, out_dir / f"plot_{stem}.py", out_dir / f"{stem}.png")
        _print_report(report)
        print(f"  wrote {csv_path}")
    return 0


def cmd_convergence(args) -> int:
    base = load_config(args.config)
    if not base.schemes_to_compare:
        print("error: config needs [convergence] schemes = [...]", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else base.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f = base.functions[0]
    print(f"{'scheme':<22} {'order':>8} {'ci':>7} {'error@n_max':>12}")
    for kind in base.schemes_to_compare:
        cfg = load_config(args.config, scheme_kind=kind)
        report = estimate(
            cfg.scheme, f, cfg.T, cfg.x0, cfg.n_list, cfg.paths, seed, workers=args.threads
        )
        write_report_csv(report, out_dir / f"convergence_{kind}_{f.name}.csv")
        fit = report.fit
        order = f"{fit.order:.3f}" if fit.status == "ok" else "indet."
        ci = f"{fit.ci:.3f}" if fit.status == "ok" else "-"
        print(f"{kind:<22} {order:>8} {ci:>7} {report.rows[-1].error:>12.3e}")
    return 0


def cmd_defect_scan(args) -> int:
    cfg = load_config(args.config)
    model = cfg.model
    if model.dim != 1 or model.triplet is None:
        print("error: defect scan needs a 1-d model with a jump measure", file=sys.stderr)
        return 2
    h = model.h
    measure = model.triplet.measure
    functions = []
    for name in cfg.defect_functions:
        f = parse_test_function(name)
        if f.degree > 6:
            print(f"error: unsupported test function {name!r} (degree > 6)", file=sys.stderr)
            return 2
        functions.append(f)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["f,eps,ignore_defect,ar_defect"]
    print(f"{'f':<4} {'eps':>10} {'ignore':>13} {'ar':>13}")
    exponents = {}
    for f in functions:
        coeffs = [0.0] * f.degree + [1.0]
        rows = []
        for eps in cfg.defect_eps:
            ig = per_step_defect(measure, h, coeffs, cfg.defect_x0, eps, "ignore")
            ar = per_step_defect(measure, h, coeffs, cfg.defect_x0, eps, "ar")
            rows.append((eps, ig, ar))
            lines.append(f"{f.name},{eps!r},{ig!r},{ar!r}")
            print(f"{f.name:<4} {eps:>10.1e} {ig:>13.4e} {ar:>13.4e}")
        eps_arr = np.log([r[0] for r in rows])
        for label, idx in (("ignore", 1), ("ar", 2)):
            vals = np.abs([r[idx] for r in rows])
            if np.all(vals > 0):
                slope = float(np.polyfit(eps_arr, np.log(vals), 1)[0])
                exponents[(f.name, label)] = slope
    for (fname, label), slope in exponents.items():
        print(f"fitted eps-exponent f={fname} {label}: {slope:.3f}")
    csv_path = out_dir / "defect_scan.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitsde",
        description="Operator-splitting weak approximation toolkit for Levy driven SDEs.",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for path batches")
    parser.add_argument("--out-dir", default="out", help="output directory")
    parser.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
    sub = parser.add_subparsers(dest="command", required=True)

    va = sub.add_parser(
        "verify-algebra",
        help="certify formal scheme order in exact arithmetic",
        description="Scheme expressions use the grammar "
        "'1/2 * exp(1/2,0) exp(1,1) + 1/2 * ...': each term is a weight, '*', "
        "then exp(fraction, generator) factors; generators are 0..d+1.",
    )
    va.add_argument("--scheme", action="append", help="built-in scheme name (repeatable)")
    va.add_argument("--expr", help="custom scheme expression string")
    va.add_argument("--d", type=int, default=1, help="driver dimension d (alphabet L_0..L_{d+1})")
    va.add_argument("--max-order", type=int, default=3, help="largest order to certify")
    va.add_argument("--oracle-trials", type=int, default=2,
                    help="matrix polynomial-identity oracle trials (0 disables)")
    va.set_defaults(func=cmd_verify_algebra)

    run = sub.add_parser("run", help="run a weak-error experiment from a config file")
    run.add_argument("--config", required=True)
    run.set_defaults(func=cmd_run)

    conv = sub.add_parser("convergence", help="multi-scheme comparison table")
    conv.add_argument("--config", required=True)
    conv.set_defaults(func=cmd_convergence)

    scan = sub.add_parser("defect-scan", help="per-step generator defects vs eps")
    scan.add_argument("--config", required=True)
    scan.set_defaults(func=cmd_defect_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SplitSdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
