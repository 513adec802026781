"""Command-line front end: estimate, train, evaluate, compare, check.

Exit codes: 0 success, 1 audit or validation failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import ConfigurationError, DomainError, Family, NFCocomoError, ProjectRecord, RatingLevel, parse_rating
from .evaluation import (
    DEFAULT_PRED_LEVELS,
    Comparison,
    DatasetError,
    EvaluationReport,
    Dataset,
    dataset_to_csv,
    load_dataset,
    loocv_predictions,
    report_gnuplot,
)
from .fuzzy import rule_firing
from .learning import TrainConfig, TrainingError, finite_difference_check, predict_many, train
from .model import (
    TABLE_ENV_VAR,
    ModelParams,
    default_rules,
    dumps_params,
    explain_effort,
    load_params,
    load_rules,
    load_table,
)
from .synthetic import perturb_levels, synthetic_projects

log = logging.getLogger("nfcocomo")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _levels(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad PRED level list {text!r}") from None
    if not levels or any(p <= 0 for p in levels):
        raise argparse.ArgumentTypeError("PRED levels must be positive")
    return levels


def _add_model_args(p: argparse.ArgumentParser, flag: str = "--model") -> None:
    p.add_argument(flag, type=Path, help="parameter file; without it the coefficient table is used")
    p.add_argument("--family", choices=[f.value for f in Family], default=Family.COCOMO_II.value,
                   help="bundled table to use when no parameter or table file is given")
    p.add_argument("--table", type=Path, help=f"coefficient table file (default: ${TABLE_ENV_VAR} or bundled)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rules", type=Path, help="dependency rule file (default: bundled rule base)")
    g.add_argument("--no-rules", action="store_true", help="start from a table without dependency rules")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--iterations", type=int, default=d.max_iterations)
    p.add_argument("--tolerance", type=float, default=d.tolerance)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--freeze-dnfis", action="store_true", help="keep rule deltas fixed")
    p.add_argument("--freeze-nf", action="store_true", help="keep level values fixed")
    p.add_argument("--train-coefficients", action="store_true", help="also learn A, B (or a, b per mode)")
    p.add_argument("--plain", action="store_true", help="plain gradient steps, no step rejection")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate,
        max_iterations=args.iterations,
        tolerance=args.tolerance,
        seed=args.seed,
        freeze_dnfis=args.freeze_dnfis,
        freeze_nf=args.freeze_nf,
        train_coefficients=args.train_coefficients,
        safeguarded=not args.plain,
    )


def _resolve_model(path: Optional[Path], args) -> ModelParams:
    if path is not None:
        _require_file(path)
        return load_params(path)
    if args.table is not None:
        _require_file(args.table)
    if args.no_rules:
        rules = ()
    elif args.rules is not None:
        _require_file(args.rules)
        rules = load_rules(args.rules)
    else:
        rules = default_rules()
    family = None if args.table else args.family
    return load_table(family, args.table, rules)


def _require_file(path: Path) -> None:
    if not path.is_file():
        raise UsageError(f"no such file: {path}")


def _dataset(path: Path, params: ModelParams) -> Dataset:
    _require_file(path)
    return load_dataset(path, params.family, params.driver_ids)


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        return
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------- subcommands


def cmd_init(args) -> int:
    params = _resolve_model(None, args)
    text = dumps_params(params)
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_estimate(args) -> int:
    params = _resolve_model(args.model, args)
    valid = params.driver_ids
    ratings: dict[str, float] = {}
    for item in args.assignments:
        if "=" not in item:
            raise UsageError(f"expected DRIVER=RATING, got {item!r}")
        name, value = item.split("=", 1)
        name = name.strip().upper()
        if name not in valid:
            raise UsageError(f"unknown driver {name!r}; valid drivers: {', '.join(valid)}")
        try:
            ratings[name] = parse_rating(value)
        except DomainError as exc:
            raise UsageError(f"{name}: {exc}") from None
    nominal = params.nominal_ratings()
    unset = [d for d in valid if d not in ratings]
    if unset:
        log.warning("drivers not assigned, using Nominal: %s", ", ".join(unset))
    for d in unset:
        ratings[d] = nominal[d]
    project = ProjectRecord("estimate", args.size, ratings, 1.0, mode=args.mode)
    b = explain_effort(params, project)

    print(f"Effort: {b.effort:.4f} staff-months  (size {args.size:g}, {params.family.value})")
    print(f"{'driver':<8}{'rating':>8}{'adjusted':>10}{'value':>10}")
    for d in valid:
        print(f"{d:<8}{b.ratings[d]:>8.3f}{b.adjusted[d]:>10.3f}{b.values[d]:>10.4f}")
    families = params.families
    fired = [(r, rule_firing(r, ratings, families)) for r in params.rules]
    fired = [(r, f) for r, f in fired if f > 0]
    if fired:
        print("fired dependency rules:")
        for r, f in fired:
            print(f"  {r.describe()}  (strength {f:.3f})")
    return EXIT_OK


def cmd_train(args) -> int:
    params = _resolve_model(args.model, args)
    data = _dataset(args.data, params)
    config = _train_config(args)
    trained, trace = train(params, data, config)
    _write(args.output, dumps_params(trained))
    _write(args.trace, trace.to_csv())
    print(f"initial E = {trace.initial_objective:.6g}")
    print(f"final E   = {trace.final_objective:.6g}")
    print(f"iterations = {trace.rows[-1].iteration}  ({trace.stop_reason})")
    return EXIT_OK


def _held_out_or_fit(args, params: ModelParams, data: Dataset, label: str) -> EvaluationReport:
    actuals = [r.actual_effort for r in data]
    if getattr(args, "loocv", False):
        estimates, _ = loocv_predictions(data, params, _train_config(args))
        label = f"{label} (leave-one-out)"
    else:
        estimates = predict_many(params, data)
    return EvaluationReport.from_predictions(label, estimates, actuals, args.pred_levels, not args.strict)


def cmd_evaluate(args) -> int:
    params = _resolve_model(args.model, args)
    data = _dataset(args.data, params)
    report = _held_out_or_fit(args, params, data, args.label or (args.model.stem if args.model else "model"))
    print(report.format_table())
    _write(args.csv, report.to_csv())
    _write(args.gnuplot, report_gnuplot(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    model_b = _resolve_model(args.model_b, args)
    if args.model_a is not None:
        _require_file(args.model_a)
        model_a = load_params(args.model_a)
    else:
        model_a = load_table(None if args.table else model_b.family, args.table, rules=())
    if model_a.family is not model_b.family:
        raise UsageError("models belong to different COCOMO families")
    data = _dataset(args.data, model_b)
    label_a = args.label_a or (args.model_a.stem if args.model_a else "COCOMO")
    label_b = args.label_b or (args.model_b.stem if args.model_b else "neuro-fuzzy")
    actuals = [r.actual_effort for r in data]
    report_a = EvaluationReport.from_predictions(
        label_a, predict_many(model_a, data), actuals, args.pred_levels, not args.strict
    )
    report_b = _held_out_or_fit(args, model_b, data, label_b)
    cmp = Comparison(report_a, report_b)
    print(cmp.format_table())
    _write(args.csv, cmp.to_csv())
    _write(args.gnuplot, cmp.to_gnuplot())
    return EXIT_OK


def cmd_check(args) -> int:
    _require_file(args.model)
    try:
        params = load_params(args.model)
    except ConfigurationError as exc:
        print(f"FAIL model file: {exc}")
        return EXIT_FAIL
    data = _dataset(args.data, params)
    ok = True
    for c in params.calibrations.values():
        bad = c.monotone_violations()
        if bad:
            ok = False
            steps = ", ".join(f"{RatingLevel(k).abbrev}->{RatingLevel(k + 1).abbrev}" for k in bad)
            print(f"FAIL monotonicity: driver {c.driver.id} ({c.driver.direction.value}) breaks at {steps}")
    err = finite_difference_check(params, data, h=args.h)
    print(f"max relative gradient error: {err:.3e} (limit {args.limit:g})")
    if not err < args.limit:
        ok = False
        print("FAIL gradient check")
    if ok:
        print("OK")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_synth(args) -> int:
    params = _resolve_model(args.model, args)
    rng = np.random.default_rng(args.seed)
    records = synthetic_projects(params, args.n, rng, noise=args.noise)
    data = Dataset(tuple(records), params.family, "synthetic")
    _write(args.output, dataset_to_csv(data, params.driver_ids))
    if args.perturbed:
        _write(args.perturbed, dumps_params(perturb_levels(params, rng, args.perturb)))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfcocomo", description="Neuro-fuzzy COCOMO effort estimation")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write an initial parameter file from a coefficient table")
    _add_model_args(p)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_init, model=None)

    p = sub.add_parser("estimate", help="estimate effort for one project")
    _add_model_args(p)
    p.add_argument("--size", type=float, required=True, help="KSLOC / KDSI")
    p.add_argument("--mode", help="COCOMO'81 development mode")
    p.add_argument("assignments", nargs="*", metavar="DRIVER=RATING")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="calibrate a model on a project dataset")
    _add_model_args(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("-o", "--output", type=Path, required=True, help="trained parameter file")
    p.add_argument("--trace", type=Path, help="per-iteration trace CSV")
    _add_train_args(p)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("evaluate", cmd_evaluate, "PRED/MMRE report for one model"),
        ("compare", cmd_compare, "side-by-side PRED report for two models"),
    ):
        p = sub.add_parser(name, help=help_)
        if name == "compare":
            p.add_argument("--model-a", type=Path, help="baseline (default: bundled table, no rules)")
            _add_model_args(p, "--model-b")
            p.add_argument("--label-a")
            p.add_argument("--label-b")
        else:
            _add_model_args(p)
            p.add_argument("--label")
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--pred-levels", type=_levels, default=DEFAULT_PRED_LEVELS)
        p.add_argument("--strict", action="store_true", help="count |RE| == p as outside the level")
        p.add_argument("--loocv", action="store_true",
                       help="leave-one-out: train on all other projects before predicting each one")
        p.add_argument("--csv", type=Path)
        p.add_argument("--gnuplot", type=Path)
        _add_train_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("check", help="gradient and constraint audit of a parameter file")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--limit", type=float, default=1e-5)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synth", help="write a synthetic dataset generated by a model")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--perturbed", type=Path, help="also write the model with level values perturbed")
    p.add_argument("--perturb", type=float, default=0.1)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, DomainError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NFCocomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
