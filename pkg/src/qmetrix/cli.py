"""Command-line surface tying the toolkit into reproduction recipes.

Subcommands: law, optimize, sweep, sample-gm, fit, verify. Flags mirror a
simple key = value config file (flags win); every randomized command
requires a seed or generates and prints one; every output file gets a
schema comment line and a replay manifest.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fitting import QuadraticOrdinate, fit_quadratic, fit_rational
from .laws import q_opt_entropy, q_opt_ggm, q_opt_unequal_d3
from .measures import GmSearchConfig, Measure
from .optimizer import (
    ConstrainedProblem,
    EsConfig,
    SearchSpace,
    maximize_qfi,
    sweep,
)
from .reporting import (
    RunManifest,
    StopWatch,
    default_threads,
    parse_config_file,
    read_csv,
    write_csv,
    write_svg_polyline,
)
from .sampler import SamplerConfig, convergence_check, run_sampler
from .states import GeneratorKind, make_generator

_SPECTRA = {
    "pauliz": GeneratorKind.PAULI_Z,
    "spin": GeneratorKind.SPIN_RESCALED,
    "custom": GeneratorKind.CUSTOM,
}


def _parse_grid(text: str) -> list[float]:
    """start:step:stop inclusive grid, stop admitted within half a step."""
    try:
        start, step, stop = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"grid must be start:step:stop, got {text!r}") from exc
    if step <= 0 or stop < start:
        raise ValueError(f"bad grid {text!r}")
    n = int(math.floor((stop - start) / step + 0.5))
    grid = [start + k * step for k in range(n + 1)]
    if grid[-1] > stop + step * 1e-9:
        grid.pop()
    if abs(grid[-1] - stop) > step * 1e-9:
        grid.append(stop)
    return [round(v, 12) for v in grid]


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    seed = int(np.random.SeedSequence().entropy % (2**32))
    print(f"seed not given, generated seed={seed}")
    return seed


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Splice config-file entries in as flags; explicit flags still win
    because they appear later and argparse keeps the last occurrence."""
    if "--config" not in argv:
        return argv
    path = argv[argv.index("--config") + 1]
    values = parse_config_file(path)
    sub_name = next((a for a in argv if not a.startswith("-")), None)
    subaction = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    sp = subaction.choices.get(sub_name or "")
    if sp is None:
        return argv
    option_strings = {s for action in sp._actions for s in action.option_strings}
    flag_only = {
        action.option_strings[-1]
        for action in sp._actions
        if isinstance(action, argparse._StoreTrueAction)
    }
    inject: list[str] = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if flag not in option_strings:
            raise ValueError(f"config key {key!r} is not a flag of {sub_name!r}")
        if flag in flag_only:
            if value.lower() in ("1", "true", "yes", "on"):
                inject.append(flag)
        else:
            inject.extend([flag, value])
    pos = argv.index(sub_name) + 1
    return argv[:pos] + inject + argv[pos:]


def _generator_from_args(args):
    kind = _SPECTRA[args.spectrum]
    custom = None
    if kind == GeneratorKind.CUSTOM:
        if not args.custom_eigenvalues:
            raise ValueError("--custom-eigenvalues required with --spectrum custom")
        custom = [float(v) for v in args.custom_eigenvalues.split(",")]
    return make_generator(args.parties, args.d, kind, custom)


def _manifest(args, command: str, seed, watch, outputs) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    man = RunManifest(
        command=command,
        config={k: (v if not isinstance(v, Path) else str(v)) for k, v in config.items()},
        seed=seed,
        version=__version__,
        wall_time_s=watch.elapsed,
    )
    for out in outputs:
        man.add_output(out)
    man.write(str(outputs[0]) + ".manifest.json")


def cmd_law(args) -> int:
    grid = _parse_grid(args.grid)
    rows = []
    for value in grid:
        if args.unequal_d3:
            if args.measure != "ggm":
                raise ValueError("--unequal-d3 applies to the ggm curve")
            q = q_opt_unequal_d3(value)
        elif args.measure == "ggm":
            q = q_opt_ggm(value)
        else:
            q = q_opt_entropy(value)
        rows.append([args.measure, float(value), q, q**-0.5])
    with StopWatch() as watch:
        write_csv(
            args.out,
            "law",
            ["measure", "value", "q_opt", "stddev"],
            rows,
            config_line=f"measure={args.measure} d={args.d} unequal_d3={args.unequal_d3}",
        )
        if args.svg:
            write_svg_polyline(
                args.svg,
                [r[1] for r in rows],
                [r[3] for r in rows],
                title=f"optimal stddev vs {args.measure}",
                x_label=args.measure,
                y_label="stddev",
            )
    outputs = [args.out] + ([args.svg] if args.svg else [])
    _manifest(args, "law", None, watch, outputs)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _optimize_rows(args, targets, seed):
    generator = _generator_from_args(args)
    measure = Measure(args.measure)
    space = SearchSpace.CORNER_SIMPLEX if args.corner else SearchSpace.FULL_SIMPLEX
    problem = ConstrainedProblem(
        generator, measure, targets[0], constraint_tol=args.tol, search_space=space
    )
    cfg = EsConfig(
        population=args.population,
        generations=args.generations,
        restarts=args.restarts,
        seed=seed,
        polish_iters=args.polish_iters,
    )
    results = sweep(problem, targets, cfg)
    rows = []
    for target, res in results:
        ok = res.best_weights is not None
        rows.append(
            [
                float(target),
                res.q_best if ok else None,
                res.q_best**-0.5 if ok and res.q_best > 0 else None,
                res.constraint_residual if ok else None,
                res.generations,
                res.feasible_fraction,
                res.seed,
                res.converged,
            ]
        )
    return rows


def cmd_optimize(args) -> int:
    seed = _resolve_seed(args)
    targets = _parse_grid(args.grid) if args.grid else [args.target]
    if targets[0] is None:
        raise ValueError("give --target or --grid")
    with StopWatch() as watch:
        rows = _optimize_rows(args, targets, seed)
        write_csv(
            args.out,
            "optimize",
            [
                "target",
                "q_best",
                "stddev",
                "residual",
                "generations",
                "feasible_fraction",
                "seed",
                "converged",
            ],
            rows,
            config_line=(
                f"N={args.parties} d={args.d} spectrum={args.spectrum} "
                f"measure={args.measure} tol={args.tol} seed={seed}"
            ),
        )
        if args.svg:
            xs = [r[0] for r in rows if r[2] is not None]
            ys = [r[2] for r in rows if r[2] is not None]
            write_svg_polyline(args.svg, xs, ys, title="optimized stddev",
                               x_label=args.measure, y_label="stddev")
    outputs = [args.out] + ([args.svg] if args.svg else [])
    _manifest(args, args.command_name, seed, watch, outputs)
    failures = sum(1 for r in rows if not r[-1])
    print(f"wrote {args.out} ({len(rows)} rows, {failures} not converged)")
    return 0


def cmd_sample_gm(args) -> int:
    if args.compare:
        return _compare_sampler_files(args)
    seed = _resolve_seed(args)
    cfg = SamplerConfig(
        samples=args.nu,
        parties=args.parties,
        local_dim=args.d,
        bin_width=args.bin_width,
        seed=seed,
        fast_gm=GmSearchConfig(
            restarts=args.gm_restarts, max_sweeps=args.gm_sweeps, tol=args.gm_tol
        ),
    )
    with StopWatch() as watch:
        reports = run_sampler(cfg, threads=args.threads or 1)
        rows = [
            [
                r.bin_index,
                r.gm_lo,
                r.gm_hi,
                r.count,
                r.q_max,
                r.q_max**-0.5 if r.q_max else None,
            ]
            for r in reports
        ]
        write_csv(
            args.out,
            "sample-gm",
            ["k", "gm_lo", "gm_hi", "count", "q_max", "stddev"],
            rows,
            config_line=(
                f"nu={args.nu} N={args.parties} d={args.d} "
                f"bin_width={args.bin_width} seed={seed}"
            ),
        )
        if args.svg:
            xs = [r[0] for r in rows if r[5] is not None]
            ys = [r[5] for r in rows if r[5] is not None]
            write_svg_polyline(args.svg, xs, ys, title="stddev vs GM bin",
                               x_label="bin k", y_label="stddev")
    outputs = [args.out] + ([args.svg] if args.svg else [])
    _manifest(args, "sample-gm", seed, watch, outputs)
    print(f"wrote {args.out}")
    return 0


def _compare_sampler_files(args) -> int:
    from .sampler import BinReport

    def load(path):
        kind, config, header, rows = read_csv(path)
        if kind != "sample-gm":
            raise ValueError(f"{path} is not a sample-gm file")
        reports = []
        for row in rows:
            vals = dict(zip(header, row))
            q = float(vals["q_max"]) if vals["q_max"] else None
            reports.append(
                BinReport(
                    int(vals["k"]), float(vals["gm_lo"]), float(vals["gm_hi"]),
                    int(vals["count"]), q, None, None,
                )
            )
        return config, reports

    cfg_a, run_a = load(args.compare[0])
    cfg_b, run_b = load(args.compare[1])
    for key in ("N", "d", "bin_width"):
        if cfg_a.get(key) != cfg_b.get(key):
            raise ValueError(f"runs differ in {key}: {cfg_a.get(key)} vs {cfg_b.get(key)}")
    report = convergence_check(run_a, run_b, rel_tol=args.rel_tol)
    for cmp in report.bins:
        rel = "n/a" if cmp.rel_diff is None else f"{cmp.rel_diff:.4f}"
        print(f"k={cmp.bin_index} q_a={cmp.q_a} q_b={cmp.q_b} rel_diff={rel} "
              f"within_tol={cmp.within_tol}")
    print(f"converged through k={report.converged_through}")
    return 0


def cmd_fit(args) -> int:
    kind, _, header, rows = read_csv(args.infile)
    try:
        xi = header.index(args.x_col)
        yi = header.index(args.y_col)
    except ValueError as exc:
        raise ValueError(
            f"columns {args.x_col!r}/{args.y_col!r} not in {header}"
        ) from exc
    pts = [
        (float(r[xi]), float(r[yi]))
        for r in rows
        if r[xi] and r[yi]
    ]
    with StopWatch() as watch:
        if args.family == "quadratic":
            res = fit_quadratic(pts, ordinate=QuadraticOrdinate(args.ordinate))
        else:
            res = fit_rational(pts)
        payload = {
            "family": res.family.value,
            "params": list(res.params),
            "residual_norm": res.residual_norm,
            "original_residual_norm": res.original_residual_norm,
            "points_used": res.points_used,
            "ordinate": res.ordinate,
            "converged": res.converged,
            "source": str(args.infile),
            "source_kind": kind,
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    _manifest(args, "fit", None, watch, [args.out])
    print(f"wrote {args.out}: params={np.round(res.params, 6).tolist()}")
    return 0


def cmd_verify(args) -> int:
    """Run the acceptance suite via pytest."""
    import pytest

    path = Path(args.acceptance_path) if args.acceptance_path else None
    if path is None:
        here = Path.cwd()
        for base in (here, *here.parents):
            cand = base / "tests" / "test_acceptance.py"
            if cand.exists():
                path = cand
                break
    if path is None or not path.exists():
        print("could not locate tests/test_acceptance.py; pass --acceptance-path",
              file=sys.stderr)
        return 2
    return pytest.main(["-v", "-s", str(path)])


def _add_common_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--parties", "-N", "--N", type=int, default=2,
                   help="number of parties")
    p.add_argument("--d", type=int, default=2, help="local dimension")
    p.add_argument("--spectrum", choices=sorted(_SPECTRA), default="pauliz")
    p.add_argument("--custom-eigenvalues", type=str, default="",
                   help="comma list, with --spectrum custom")
    p.add_argument("--measure", choices=["ggm", "entropy", "gm"], default="ggm")
    p.add_argument("--tol", type=float, default=1e-6, help="constraint band")
    p.add_argument("--population", type=int, default=0, help="0 = 20*(dim+1)")
    p.add_argument("--generations", type=int, default=150)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--polish-iters", type=int, default=300)
    p.add_argument("--corner", action="store_true",
                   help="restrict search to the four corner levels")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmetrix",
        description="entanglement-constrained optimal QFI toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("law", help="tabulate an analytic ceiling curve")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--measure", choices=["ggm", "entropy"], default="ggm")
    p.add_argument("--grid", type=str, default="0:0.05:0.5",
                   help="start:step:stop, inclusive")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--unequal-d3", action="store_true",
                   help="tabulate the reported (0,2,3)-spectrum curve")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--svg", type=str, default=None)
    p.set_defaults(func=cmd_law)

    for name, needs_grid in (("optimize", False), ("sweep", True)):
        p = sub.add_parser(name, help="constrained QFI maximization")
        p.add_argument("--config", type=str, default=None)
        _add_common_problem_flags(p)
        if needs_grid:
            p.add_argument("--grid", type=str, required=True)
        else:
            p.add_argument("--target", type=float, default=None)
            p.add_argument("--grid", type=str, default=None)
        p.add_argument("--out", type=str, required=True)
        p.add_argument("--svg", type=str, default=None)
        p.set_defaults(func=cmd_optimize, command_name=name)

    p = sub.add_parser("sample-gm", help="random-state GM binning pipeline")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--nu", type=int, default=100000, help="number of samples")
    p.add_argument("--parties", "-N", "--N", type=int, default=3)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--bin-width", type=float, default=0.05)
    p.add_argument("--gm-restarts", type=int, default=4)
    p.add_argument("--gm-sweeps", type=int, default=100)
    p.add_argument("--gm-tol", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", type=str, default="sample_gm.csv")
    p.add_argument("--svg", type=str, default=None)
    p.add_argument("--compare", nargs=2, metavar=("A", "B"), default=None,
                   help="convergence-check two output files")
    p.add_argument("--rel-tol", type=float, default=0.05)
    p.set_defaults(func=cmd_sample_gm)

    p = sub.add_parser("fit", help="fit a stddev curve family to a CSV")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--family", choices=["quadratic", "rational"], required=True)
    p.add_argument("--ordinate", choices=[o.value for o in QuadraticOrdinate],
                   default=QuadraticOrdinate.INV_SQUARE.value)
    p.add_argument("--in", dest="infile", type=str, required=True)
    p.add_argument("--x-col", type=str, default="target")
    p.add_argument("--y-col", type=str, default="stddev")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--acceptance-path", type=str, default=None)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if getattr(args, "threads", None) is None and hasattr(args, "threads"):
            args.threads = default_threads()
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
