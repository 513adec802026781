"""Project datasets, PRED/MMRE accuracy, model comparison and leave-one-out runs.

Dataset CSV schema (one project per row)::

    name,size_kdsi,<one column per driver id>,actual_effort_sm[,weight][,mode]

``size_ksloc`` is accepted in place of ``size_kdsi``.  Driver cells take a
linguistic level (``VL``, ``nominal``, ``Very High``...) or a number on the
1..6 rating axis.  ``mode`` (organic, semidetached, embedded) applies to
COCOMO'81 tables only.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import DomainError, Family, NFCocomoError, ProjectRecord, parse_rating
from .learning import Problem, TrainConfig, TrainTrace, descend, predict_many
from .model import ModelParams, load_table

DEFAULT_PRED_LEVELS = (20.0, 30.0, 50.0, 100.0)
# slack so that a relative error equal to the threshold up to rounding counts as a tie
TIE_EPS = 1e-12


class DatasetError(NFCocomoError, ValueError):
    """A dataset file is malformed."""


class SchemaError(DatasetError):
    """A dataset header does not match the model's drivers."""


@dataclass(frozen=True)
class Dataset:
    records: tuple[ProjectRecord, ...]
    family: Family
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


# ---------------------------------------------------------------- csv io

_SIZE_COLUMNS = ("size_kdsi", "size_ksloc")


def _parse_float(text: str, row: int, col: str, path: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"{path}: row {row}, column {col}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"{path}: row {row}, column {col}: not finite: {text!r}")
    return value


def parse_dataset(
    text: str,
    family: "Family | str",
    driver_ids: Optional[Sequence[str]] = None,
    source: str = "<string>",
) -> Dataset:
    family = Family(family)
    if driver_ids is None:
        driver_ids = load_table(family).driver_ids
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if any(cell.strip() for cell in r)]
    if not rows:
        raise DatasetError(f"{source}: empty file (expected a header row)")
    header = [h.strip() for h in rows[0]]
    known = {"name", "actual_effort_sm", "weight", "mode", *_SIZE_COLUMNS, *driver_ids}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise SchemaError(f"{source}: unknown column(s) {', '.join(unknown)}")
    if "mode" in header and family is not Family.COCOMO_81:
        raise SchemaError(f"{source}: 'mode' column only applies to cocomo-81 data")
    size_cols = [c for c in _SIZE_COLUMNS if c in header]
    if len(size_cols) != 1:
        raise SchemaError(f"{source}: need exactly one of {', '.join(_SIZE_COLUMNS)}")
    missing = [c for c in ("name", "actual_effort_sm", *driver_ids) if c not in header]
    if missing:
        raise SchemaError(f"{source}: missing column(s) {', '.join(missing)}")
    if len(set(header)) != len(header):
        raise SchemaError(f"{source}: duplicate column names")
    size_col = size_cols[0]

    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(f"{source}: row {line_no}: {len(row)} cells, header has {len(header)}")
        cells = {h: c.strip() for h, c in zip(header, row)}
        for col, val in cells.items():
            if val == "" and col not in ("weight", "mode"):
                raise DatasetError(f"{source}: row {line_no}, column {col}: missing value")
        ratings = {}
        for d in driver_ids:
            try:
                ratings[d] = parse_rating(cells[d])
            except DomainError as exc:
                raise DatasetError(f"{source}: row {line_no}, column {d}: {exc}") from None
        weight = 1.0
        if cells.get("weight"):
            weight = _parse_float(cells["weight"], line_no, "weight", source)
        try:
            records.append(
                ProjectRecord(
                    name=cells["name"],
                    size=_parse_float(cells[size_col], line_no, size_col, source),
                    ratings=ratings,
                    actual_effort=_parse_float(cells["actual_effort_sm"], line_no, "actual_effort_sm", source),
                    weight=weight,
                    mode=cells.get("mode") or None,
                )
            )
        except DomainError as exc:
            raise DatasetError(f"{source}: row {line_no}: {exc}") from None
    if not records:
        raise DatasetError(f"{source}: no project rows")
    return Dataset(tuple(records), family, source)


def load_dataset(
    path: "str | os.PathLike[str]",
    family: "Family | str",
    driver_ids: Optional[Sequence[str]] = None,
) -> Dataset:
    """Read and validate a project CSV; ``driver_ids`` defaults to the bundled table's."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_dataset(text, family, driver_ids, str(path))


def dataset_to_csv(dataset: Dataset, driver_ids: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_mode = dataset.family is Family.COCOMO_81
    header = ["name", "size_kdsi", *driver_ids, "actual_effort_sm", "weight"]
    if with_mode:
        header.append("mode")
    writer.writerow(header)
    for r in dataset.records:
        row = [r.name, repr(r.size), *(repr(r.ratings[d]) for d in driver_ids), repr(r.actual_effort), repr(r.weight)]
        if with_mode:
            row.append(r.mode or "")
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------- metrics


def _check_pairs(estimates: Sequence[float], actuals: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    est = np.asarray(estimates, dtype=float)
    act = np.asarray(actuals, dtype=float)
    if est.shape != act.shape or est.ndim != 1:
        raise DomainError(f"estimates ({est.shape}) and actuals ({act.shape}) must be equal-length lists")
    if est.size == 0:
        raise DomainError("no projects to evaluate")
    if np.any(~(act > 0)):
        raise DomainError("actual efforts must be > 0")
    return est, act


def relative_errors(estimates: Sequence[float], actuals: Sequence[float]) -> np.ndarray:
    est, act = _check_pairs(estimates, actuals)
    return np.abs(est - act) / act


def pred(
    estimates: Sequence[float], actuals: Sequence[float], p: float, inclusive: bool = True
) -> tuple[int, float]:
    """Number and fraction of projects whose relative error is within ``p`` percent."""
    if not p > 0:
        raise DomainError(f"PRED level must be > 0, got {p}")
    re = relative_errors(estimates, actuals)
    threshold = p / 100.0
    if inclusive:
        k = int(np.sum(re <= threshold + TIE_EPS))
    else:
        k = int(np.sum(re < threshold - TIE_EPS))
    return k, k / re.size


def mmre(estimates: Sequence[float], actuals: Sequence[float]) -> float:
    return math.fsum(relative_errors(estimates, actuals)) / len(estimates)


def whole_percent(fraction: float) -> int:
    # accuracy columns truncate: 62/69 = 89.9% is reported as 89%
    return int(math.floor(100.0 * fraction + 1e-9))


@dataclass(frozen=True)
class EvaluationReport:
    label: str
    n: int
    levels: tuple[float, ...]
    counts: tuple[int, ...]
    mmre: float = float("nan")

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.counts):
            raise DomainError("one count per PRED level")
        for k in self.counts:
            if not 0 <= k <= self.n:
                raise DomainError(f"count {k} outside 0..{self.n}")

    @property
    def fractions(self) -> tuple[float, ...]:
        return tuple(k / self.n for k in self.counts)

    @property
    def percents(self) -> tuple[int, ...]:
        return tuple(whole_percent(f) for f in self.fractions)

    @classmethod
    def from_predictions(
        cls,
        label: str,
        estimates: Sequence[float],
        actuals: Sequence[float],
        levels: Sequence[float] = DEFAULT_PRED_LEVELS,
        inclusive: bool = True,
    ) -> "EvaluationReport":
        counts = tuple(pred(estimates, actuals, p, inclusive)[0] for p in levels)
        return cls(label, len(actuals), tuple(float(p) for p in levels), counts, mmre(estimates, actuals))

    def format_table(self) -> str:
        lines = [f"{self.label}  (N = {self.n})", f"{'PRED':<8}{'# Projects':>12}{'Accuracy':>10}"]
        for p, k, pct in zip(self.levels, self.counts, self.percents):
            lines.append(f"{_level(p):<8}{k:>12}{pct:>9}%")
        lines.append(f"{'MMRE':<8}{self.mmre:>22.4f}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "pred_level", "count", "n", "fraction", "percent"])
        for p, k, f, pct in zip(self.levels, self.counts, self.fractions, self.percents):
            w.writerow([self.label, _level(p), k, self.n, repr(f), pct])
        w.writerow([self.label, "MMRE", "", self.n, repr(self.mmre), ""])
        return buf.getvalue()


def _level(p: float) -> str:
    return f"{p:g}%"


@dataclass(frozen=True)
class Comparison:
    """Two reports over the same projects, laid out like a PRED improvement table."""

    baseline: EvaluationReport
    candidate: EvaluationReport

    def __post_init__(self) -> None:
        if self.baseline.levels != self.candidate.levels or self.baseline.n != self.candidate.n:
            raise DomainError("reports must share PRED levels and project count")

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.baseline.fractions, self.candidate.fractions))

    @property
    def improvement_percents(self) -> tuple[int, ...]:
        """Difference of the displayed whole percents (what the table prints)."""
        return tuple(b - a for a, b in zip(self.baseline.percents, self.candidate.percents))

    def format_table(self) -> str:
        a, b = self.baseline, self.candidate
        w = max(22, len(a.label) + 2, len(b.label) + 2)
        head = f"{'PRED':<8}{a.label:^{w}}{b.label:^{w}}{'Improvement':>12}"
        sub = f"{'':<8}{'# Projects  Accuracy':^{w}}{'# Projects  Accuracy':^{w}}{'':>12}"
        lines = [f"N = {a.n}", head, sub]
        for i, p in enumerate(a.levels):
            ca = f"{a.counts[i]:>6}{a.percents[i]:>11}%"
            cb = f"{b.counts[i]:>6}{b.percents[i]:>11}%"
            lines.append(f"{_level(p):<8}{ca:^{w}}{cb:^{w}}{self.improvement_percents[i]:>11}%")
        lines.append(f"{'MMRE':<8}{a.mmre:^{w}.4f}{b.mmre:^{w}.4f}{b.mmre - a.mmre:>12.4f}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        a, b = self.baseline, self.candidate
        w.writerow([
            "pred_level", "n",
            "baseline_count", "baseline_fraction", "baseline_percent",
            "candidate_count", "candidate_fraction", "candidate_percent",
            "improvement_fraction", "improvement_percent",
        ])
        for i, p in enumerate(a.levels):
            w.writerow([
                _level(p), a.n,
                a.counts[i], repr(a.fractions[i]), a.percents[i],
                b.counts[i], repr(b.fractions[i]), b.percents[i],
                repr(self.deltas[i]), self.improvement_percents[i],
            ])
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        lines = [f"# pred_level {self.baseline.label!r} {self.candidate.label!r}"]
        for p, fa, fb in zip(self.baseline.levels, self.baseline.fractions, self.candidate.fractions):
            lines.append(f"{p:g} {fa!r} {fb!r}")
        return "\n".join(lines) + "\n"


def report_gnuplot(report: EvaluationReport) -> str:
    lines = [f"# pred_level {report.label!r}"]
    lines += [f"{p:g} {f!r}" for p, f in zip(report.levels, report.fractions)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- model runs


def evaluate(
    dataset,
    params: ModelParams,
    levels: Sequence[float] = DEFAULT_PRED_LEVELS,
    label: str = "model",
    inclusive: bool = True,
) -> EvaluationReport:
    records = list(getattr(dataset, "records", dataset))
    estimates = predict_many(params, records)
    actuals = [r.actual_effort for r in records]
    return EvaluationReport.from_predictions(label, estimates, actuals, levels, inclusive)


def compare_models(
    dataset,
    model_a: ModelParams,
    model_b: ModelParams,
    levels: Sequence[float] = DEFAULT_PRED_LEVELS,
    labels: tuple[str, str] = ("baseline", "candidate"),
    inclusive: bool = True,
) -> Comparison:
    return Comparison(
        evaluate(dataset, model_a, levels, labels[0], inclusive),
        evaluate(dataset, model_b, levels, labels[1], inclusive),
    )


def loocv_predictions(
    dataset, params: ModelParams, config: TrainConfig | None = None
) -> tuple[np.ndarray, list[TrainTrace]]:
    """Held-out estimate for every project, each from a model trained on the others.

    All folds train together: fold ``n`` is the full dataset with project
    ``n``'s weight set to zero, which removes it from the objective and the
    gradient exactly.
    """
    records = list(getattr(dataset, "records", dataset))
    n = len(records)
    if n < 2:
        raise DomainError("leave-one-out needs at least two projects")
    base = np.array([r.weight for r in records], dtype=float)
    weights = np.tile(base, (n, 1))
    np.fill_diagonal(weights, 0.0)
    problem = Problem(params, records, config, weights=weights)
    theta, traces = descend(problem, np.tile(problem.flatten(), (n, 1)))
    estimates = problem.predict(theta)[np.arange(n), np.arange(n)]
    return estimates, traces


def loocv(
    dataset,
    params: ModelParams,
    config: TrainConfig | None = None,
    levels: Sequence[float] = DEFAULT_PRED_LEVELS,
    label: str = "leave-one-out",
    inclusive: bool = True,
) -> EvaluationReport:
    records = list(getattr(dataset, "records", dataset))
    estimates, _ = loocv_predictions(records, params, config)
    actuals = [r.actual_effort for r in records]
    return EvaluationReport.from_predictions(label, estimates, actuals, levels, inclusive)
