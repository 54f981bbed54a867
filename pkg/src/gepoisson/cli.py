"""Command-line front end: run an evolution and export its results, or
verify a given expression against a problem.

Outputs are written as plain text and CSV and are byte-identical for
identical flags and seed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import evolve, pde, suite
from .expr import ExpressionError, parse, serialize
from .grammar import Grammar, GrammarError, default_grammar, parse_bnf
from .pde import Problem

__all__ = ["main", "console_main"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_ABOVE_TARGET = 3


class _UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gepoisson",
        description="Evolve closed-form solutions of Poisson-type problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="evolve a solution and export results")
    _add_problem_flags(run_p)
    run_p.add_argument("--config", help="key=value file; flags override it")
    run_p.add_argument("--pop", type=int, help="population size (default 500)")
    run_p.add_argument("--chrom-len", type=int, help="chromosome length (default 50)")
    run_p.add_argument("--gens", type=int, help="generation budget (default 1000)")
    run_p.add_argument("--pc", type=float, help="crossover rate (default 0.7)")
    run_p.add_argument("--pm", type=float, help="mutation rate (default 0.1)")
    run_p.add_argument("--tournament", type=int, help="tournament size (default 2)")
    run_p.add_argument("--elite", type=int, help="elite count (default 1)")
    run_p.add_argument("--lambda", dest="penalty_weight", type=float,
                       help="boundary penalty weight (default 1)")
    run_p.add_argument("--target", type=float,
                       help="stop when best fitness reaches this (default 1e-7)")
    run_p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    run_p.add_argument("--threads", type=int, help="evaluation thread cap (default 1)")
    run_p.add_argument("--rbf-shape", type=float,
                       help="shape parameter c of the RBF terminals (default 1)")
    run_p.add_argument("--diff-points", type=int, default=50,
                       help="points per axis of the exported difference grid")
    run_p.add_argument("--out", default=".", help="output directory")

    ver_p = sub.add_parser("verify", help="score an expression against a problem")
    ver_p.add_argument("expression", help="candidate in canonical infix form")
    _add_problem_flags(ver_p)
    ver_p.add_argument("--lambda", dest="penalty_weight", type=float, default=1.0)
    ver_p.add_argument("--target", type=float, default=1e-7,
                       help="exit 0 iff total fitness <= target")
    ver_p.add_argument("--rbf-shape", type=float, default=1.0)
    return parser


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="built-in problem name (u1..u5)")
    p.add_argument("--problem-file", help="problem definition file")
    p.add_argument("--grammar", default="default",
                   help="'default', 'strict', or a grammar file path")
    p.add_argument("--strict-grammar", action="store_true",
                   help="shorthand for --grammar strict")
    p.add_argument("--grid", type=int, help="collocation points per axis (T)")


def _load_problem(args) -> Problem:
    if bool(args.problem) == bool(args.problem_file):
        raise _UsageError("exactly one of --problem / --problem-file is required")
    if args.problem:
        try:
            problem = suite.get_problem(args.problem)
        except KeyError as exc:
            raise _UsageError(str(exc.args[0])) from None
    else:
        try:
            problem = pde.load_problem(args.problem_file)
        except OSError as exc:
            raise _UsageError(f"cannot read problem file: {exc}") from None
        except (ValueError, ExpressionError) as exc:
            raise _UsageError(f"malformed problem file: {exc}") from None
    if args.grid is not None:
        problem = problem.with_grid_points(args.grid)
    return problem


def _load_grammar(args) -> Grammar:
    source = "strict" if args.strict_grammar else args.grammar
    if source == "default":
        return default_grammar()
    if source == "strict":
        return default_grammar(strict=True)
    try:
        return parse_bnf(Path(source).read_text())
    except OSError as exc:
        raise _UsageError(f"cannot read grammar file: {exc}") from None
    except GrammarError as exc:
        raise _UsageError(f"malformed grammar file: {exc}") from None


def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_CONFIG_KEYS = {
    # config-file key -> (GaConfig field, converter)
    "pop": ("population_size", int),
    "chrom_len": ("chromosome_length", int),
    "gens": ("max_generations", int),
    "pc": ("crossover_rate", float),
    "pm": ("mutation_rate", float),
    "tournament": ("tournament_size", int),
    "elite": ("elite_count", int),
    "lambda": ("penalty_weight", float),
    "target": ("target_fitness", float),
    "seed": ("rng_seed", int),
    "threads": ("threads", int),
    "rbf_shape": ("rbf_shape", float),
}

_FLAG_TO_FIELD = {
    "pop": "population_size",
    "chrom_len": "chromosome_length",
    "gens": "max_generations",
    "pc": "crossover_rate",
    "pm": "mutation_rate",
    "tournament": "tournament_size",
    "elite": "elite_count",
    "penalty_weight": "penalty_weight",
    "target": "target_fitness",
    "seed": "rng_seed",
    "threads": "threads",
    "rbf_shape": "rbf_shape",
}


def _build_ga_config(args) -> evolve.GaConfig:
    values: dict[str, object] = {}
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise _UsageError(f"unknown config key {key!r}")
            field, conv = _CONFIG_KEYS[key]
            try:
                values[field] = conv(raw)
            except ValueError:
                raise _UsageError(f"bad value for config key {key!r}: {raw!r}") from None
    for flag, field in _FLAG_TO_FIELD.items():
        flag_value = getattr(args, flag)
        if flag_value is not None:
            values[field] = flag_value
    try:
        return evolve.GaConfig(**values)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _fmt(value: float) -> str:
    return repr(float(value))


def _cmd_run(args) -> int:
    problem = _load_problem(args)
    grammar = _load_grammar(args)
    config = _build_ga_config(args)
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise _UsageError(f"output directory is not writable: {exc}") from None

    print(f"running {args.problem or args.problem_file}: pop={config.population_size} "
          f"gens<={config.max_generations} T={problem.grid_points} "
          f"seed={config.rng_seed}", file=sys.stderr)
    result = evolve.run(problem, grammar, config)
    best = result.best
    print(f"finished after {result.generations_run} generations "
          f"({result.termination}); best fitness {best.fitness.total:.6g}",
          file=sys.stderr)

    diff = None
    if problem.exact is not None and best.mapping.mapped:
        diff = pde.compare_to_exact(
            parse(best.mapping.phenotype, rbf_shape=config.rbf_shape),
            problem, args.diff_points)
    _write_summary(out_dir / "summary.txt", args, config, problem, result, diff)
    _write_trace(out_dir / "trace.csv", result)
    if diff is not None:
        _write_diffgrid(out_dir / "diffgrid.csv", diff)
    return EXIT_OK


def _write_summary(path: Path, args, config, problem: Problem,
                   result: evolve.RunResult,
                   diff: pde.DifferenceGrid | None) -> None:
    best = result.best
    lines = [
        f"problem = {args.problem or args.problem_file}",
        f"seed = {config.rng_seed}",
        f"population = {config.population_size}",
        f"chromosome_length = {config.chromosome_length}",
        f"grid_points = {problem.grid_points}",
        f"generations_run = {result.generations_run}",
        f"termination = {result.termination}",
        f"best_expression = {best.mapping.phenotype or '<rejected>'}",
        f"fitness_total = {_fmt(best.fitness.total)}",
        f"feasible = {best.fitness.feasible}",
        f"interior_error = {_fmt(best.fitness.interior_error)}",
    ]
    for face, value in best.fitness.face_penalties.items():
        lines.append(f"penalty_{face} = {_fmt(value)}")
    if diff is not None:
        lines.append(f"max_abs_diff = {_fmt(diff.max_abs)}")
    path.write_text("\n".join(lines) + "\n")


def _write_trace(path: Path, result: evolve.RunResult) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["generation", "best_fitness", "mean_fitness",
                         "best_expression"])
        for rec in result.trace:
            writer.writerow([rec.generation, _fmt(rec.best_fitness),
                             _fmt(rec.mean_fitness), rec.best_phenotype])


def _write_diffgrid(path: Path, diff: pde.DifferenceGrid) -> None:
    names = diff.columns[:-1]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(diff.columns)
        for i in range(diff.diffs.size):
            row = [_fmt(diff.points[n][i]) for n in names]
            row.append(_fmt(diff.diffs[i]))
            writer.writerow(row)


def _cmd_verify(args) -> int:
    problem = _load_problem(args)
    try:
        candidate = parse(args.expression, rbf_shape=args.rbf_shape)
    except ExpressionError as exc:
        raise _UsageError(f"cannot parse expression: {exc}") from None
    report = pde.fitness(candidate, problem, penalty_weight=args.penalty_weight)
    print(f"expression = {serialize(candidate)}")
    print(f"fitness_total = {_fmt(report.total)}")
    print(f"feasible = {report.feasible}")
    print(f"interior_error = {_fmt(report.interior_error)}")
    for face, value in report.face_penalties.items():
        print(f"penalty_{face} = {_fmt(value)}")
    if problem.exact is not None:
        diff = pde.compare_to_exact(candidate, problem)
        print(f"max_abs_diff = {_fmt(diff.max_abs)}")
    return EXIT_OK if report.total <= args.target else EXIT_ABOVE_TARGET


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_verify(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def console_main() -> None:
    sys.exit(main())
