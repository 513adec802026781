"""Calibration of level values and rule deltas from historical projects.

The objective is the weighted squared relative error

    E = sum_n 1/2 * w_n * ((E_n - Ed_n) / Ed_n) ** 2

minimised by projected gradient descent: after every step each driver's
level values are projected back onto its monotone cone (pool adjacent
violators), effort-multiplier values are floored at a small positive
number, and rule deltas are clipped to +/- MAX_DELTA.

All batch arithmetic goes through :class:`Problem`, which evaluates the
whole dataset with numpy; :func:`nfcocomo.model.predict_effort` is the
scalar reference path it is tested against.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    CocomoCoefficients,
    ConfigurationError,
    Direction,
    DomainError,
    Family,
    NFCocomoError,
    ProjectRecord,
)
from .fuzzy import MAX_DELTA, DriverCalibration, triangle_weights
from .model import ModelParams

EM_FLOOR = 1e-4
COEFF_FLOOR = 1e-6
ALPHA_FLOOR = 1e-12


class TrainingError(NFCocomoError):
    """Training hit a non-finite objective or gradient."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_iterations: int = 5000
    tolerance: float = 1e-8
    seed: int = 0
    freeze_dnfis: bool = False
    freeze_nf: bool = False
    train_coefficients: bool = False
    # False gives the bare update P <- P - alpha * dE/dP (still projected)
    safeguarded: bool = True
    em_floor: float = EM_FLOOR

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise DomainError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.max_iterations < 0:
            raise DomainError("max_iterations must be >= 0")
        if self.tolerance < 0:
            raise DomainError("tolerance must be >= 0")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    grad_norm: float
    accepted: bool
    learning_rate: float


@dataclass
class TrainTrace:
    rows: list[TraceRow] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def initial_objective(self) -> float:
        return self.rows[0].objective

    @property
    def final_objective(self) -> float:
        return self.rows[-1].objective

    @property
    def accepted_objectives(self) -> list[float]:
        return [r.objective for r in self.rows if r.accepted]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "objective", "grad_norm", "accepted", "learning_rate"])
        for r in self.rows:
            writer.writerow(
                [r.iteration, repr(r.objective), repr(r.grad_norm), int(r.accepted), repr(r.learning_rate)]
            )
        return buf.getvalue()


@dataclass(frozen=True)
class ParamGradient:
    """dE/dP in the shape of the parameters: per-driver level arrays, per-rule deltas."""

    levels: Mapping[str, np.ndarray]
    deltas: np.ndarray
    coefficients: Mapping[str, float]

    def norm(self) -> float:
        parts = [*self.levels.values(), self.deltas, np.array(list(self.coefficients.values()))]
        return float(np.sqrt(sum(float(np.sum(p * p)) for p in parts)))


# ---------------------------------------------------------------- projection


def pava(values: Sequence[float], weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Least-squares projection onto non-decreasing sequences."""
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    means: list[float] = []
    mass: list[float] = []
    counts: list[int] = []
    for yi, wi in zip(y, w):
        means.append(float(yi))
        mass.append(float(wi))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, c2 = means.pop(), mass.pop(), counts.pop()
            m1, w1, c1 = means.pop(), mass.pop(), counts.pop()
            wt = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt)
            mass.append(wt)
            counts.append(c1 + c2)
    return np.repeat(means, counts)


def _project_values(values: np.ndarray, direction: Direction, floor: Optional[float]) -> np.ndarray:
    if direction is Direction.INCREASING:
        out = pava(values)
    elif direction is Direction.DECREASING:
        out = pava(values[::-1])[::-1]
    else:
        out = np.array(values, dtype=float)
    if floor is not None:
        out = np.maximum(out, floor)
    return out


def project_monotone(calib: DriverCalibration, em_floor: float = EM_FLOOR) -> DriverCalibration:
    """Nearest calibration (Euclidean) that respects the driver's direction."""
    floor = None if calib.driver.is_scale_factor else em_floor
    values = _project_values(np.asarray(calib.level_values), calib.driver.direction, floor)
    return DriverCalibration(calib.driver, tuple(float(v) for v in values))


def isotonic_rows(y: np.ndarray) -> np.ndarray:
    """Row-wise non-decreasing least-squares fit via the max-min formula.

    ``fit_i = max_{j<=i} min_{k>=i} mean(y[j..k])``; vectorized over rows,
    meant for the short sequences (at most six levels) drivers carry.
    """
    rows, m = y.shape
    cs = np.concatenate([np.zeros((rows, 1)), np.cumsum(y, axis=1)], axis=1)
    j = np.arange(m)[:, None]
    k = np.arange(m)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        means = (cs[:, k + 1] - cs[:, j]) / (k - j + 1)
    means = np.where(k >= j, means, np.inf)  # (rows, j, k)
    i = np.arange(m)
    upper = np.where(k[None, :, :] >= i[:, None, None], means[:, None, :, :], np.inf)  # (rows, i, j, k)
    inner = upper.min(axis=3)  # (rows, i, j)
    inner = np.where(j.T[None, :, :] <= i[None, :, None], inner, -np.inf)
    return inner.max(axis=2)


# ---------------------------------------------------------------- batch engine


def _bracket(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, start: np.ndarray):
    """Flat-vector slots of the two levels around each clamped rating.

    With unit-spaced triangles that partition unity, the normalized firing
    strengths are ``1 - frac`` on the lower level and ``frac`` on the upper
    one, so the driver value is a linear interpolation.  ``moving`` is False
    where the right-hand slope vanishes (at the top of the range).
    """
    k0 = np.clip(np.floor(x), lo, np.maximum(hi - 1, lo))
    k1 = np.minimum(k0 + 1, hi)
    frac = np.where(k1 > k0, x - k0, 0.0)
    lower = (start + (k0 - lo)).astype(int)
    upper = (start + (k1 - lo)).astype(int)
    moving = (x < hi) & (hi > lo)
    return lower, upper, frac, moving


def _coefficient_names(coeffs: CocomoCoefficients) -> list[str]:
    if coeffs.family is Family.COCOMO_II:
        return ["A", "B"]
    return [f"{m}.{p}" for m in sorted(coeffs.modes) for p in ("a", "b")]


class Problem:
    """A model structure bound to a dataset, evaluated over flat parameter vectors.

    The flat vector holds, in order: the defined level values of every driver
    (drivers in model order, levels ascending), one delta per rule, then the
    COCOMO coefficients (``A, B`` or ``a, b`` per mode in sorted mode order).

    Methods accept a single vector ``(P,)`` or a batch ``(F, P)``.  A batch
    pairs row ``f`` with row ``f`` of ``weights`` (shape ``(F, N)``), which is
    how leave-one-out folds are trained side by side.
    """

    def __init__(
        self,
        params: ModelParams,
        records: Sequence[ProjectRecord],
        config: TrainConfig | None = None,
        weights: np.ndarray | None = None,
    ):
        if not records:
            raise DomainError("dataset is empty")
        self.params = params
        self.config = config or TrainConfig()
        ids = params.driver_ids
        calibs = list(params.calibrations.values())
        for r in records:
            r.require(ids)
        self.records = list(records)
        self.family = params.family
        self.driver_ids = ids
        n = len(records)
        self.lo = np.array([c.driver.lo for c in calibs], dtype=float)
        self.hi = np.array([c.driver.hi for c in calibs], dtype=float)
        self.sf = np.array([c.driver.is_scale_factor for c in calibs])

        self.raw = np.array([[r.ratings[d] for d in ids] for r in records], dtype=float)
        clamped = np.clip(self.raw, self.lo, self.hi)
        self.size = np.array([r.size for r in records], dtype=float)
        self.log_size = np.log(self.size)
        self.actual = np.array([r.actual_effort for r in records], dtype=float)
        if weights is None:
            weights = np.array([[r.weight for r in records]], dtype=float)
        self.weights = np.atleast_2d(np.asarray(weights, dtype=float))
        if self.weights.shape[1] != n:
            raise DomainError(f"weights cover {self.weights.shape[1]} projects, dataset has {n}")

        self.driver_slices = []
        start = 0
        for c in calibs:
            self.driver_slices.append(slice(start, start + len(c.driver.levels)))
            start += len(c.driver.levels)
        self.n_levels = start
        self.slot_start = np.array([sl.start for sl in self.driver_slices], dtype=int)

        index = {d: i for i, d in enumerate(ids)}
        self.rules = params.rules
        self.n_rules = len(self.rules)
        self.targets = np.array([index[r.target] for r in self.rules], dtype=int)
        fires = np.ones((n, self.n_rules))
        for j, rule in enumerate(self.rules):
            for d, k in rule.antecedent:
                i = index[d]
                mu, _ = triangle_weights(clamped[:, i], self.lo[i], self.hi[i])
                fires[:, j] *= mu[:, int(k) - 1]
        self.fires = fires
        self.tcols = np.unique(self.targets)
        self.tcol_map = np.zeros((self.n_rules, len(self.tcols)))
        if self.n_rules:
            self.tcol_map[np.arange(self.n_rules), np.searchsorted(self.tcols, self.targets)] = 1.0

        # brackets of drivers no rule targets never change
        self.static_bracket = _bracket(clamped, self.lo, self.hi, self.slot_start)
        self.static_inside = (self.raw >= self.lo) & (self.raw <= self.hi)

        self.coeff_names = _coefficient_names(params.coeffs)
        if self.family is Family.COCOMO_81:
            modes = sorted(params.coeffs.modes)
            mode_index = {m: i for i, m in enumerate(modes)}
            idx = []
            for r in records:
                m = r.mode if r.mode is not None else params.coeffs.mode
                if m not in mode_index:
                    raise ConfigurationError(f"project {r.name}: no coefficients for mode {m!r}")
                idx.append(mode_index[m])
            self.mode_idx = np.array(idx, dtype=int)
            self.mode_onehot = np.eye(len(modes))[self.mode_idx]
        self.rule_start = self.n_levels
        self.coeff_start = self.n_levels + self.n_rules
        self.size_flat = self.coeff_start + len(self.coeff_names)

        self.directions = [c.driver.direction for c in calibs]
        self._build_projection(calibs)

        mask = np.ones(self.size_flat)
        if self.config.freeze_nf:
            mask[: self.n_levels] = 0.0
        if self.config.freeze_dnfis:
            mask[self.rule_start : self.coeff_start] = 0.0
        if not self.config.train_coefficients:
            mask[self.coeff_start :] = 0.0
        self.mask = mask

    def _build_projection(self, calibs) -> None:
        # slots of each constrained driver ordered so the fit must be non-decreasing
        self.iso_groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        by_len: dict[int, list[tuple[int, list[int]]]] = {}
        for i, (c, sl) in enumerate(zip(calibs, self.driver_slices)):
            direction = c.driver.direction
            if direction is Direction.NONE or sl.stop - sl.start < 2:
                continue
            slots = list(range(sl.start, sl.stop))
            if direction is Direction.DECREASING:
                slots.reverse()
            by_len.setdefault(len(slots), []).append((i, slots))
        for m, items in by_len.items():
            owners = np.array([i for i, _ in items], dtype=int)
            self.iso_groups[m] = (owners, np.array([s for _, s in items], dtype=int))
        self.em_slots = np.array(
            [j for c, sl in zip(calibs, self.driver_slices) if not c.driver.is_scale_factor
             for j in range(sl.start, sl.stop)],
            dtype=int,
        )

    # -- packing

    def flatten(self, params: ModelParams | None = None) -> np.ndarray:
        params = params or self.params
        theta = [v for c in params.calibrations.values() for v in c.level_values]
        theta.extend(r.delta for r in params.rules)
        co = params.coeffs
        if self.family is Family.COCOMO_II:
            theta.extend([co.A, co.B])
        else:
            for m in sorted(co.modes):
                theta.extend(co.modes[m])
        return np.array(theta, dtype=float)

    def unflatten(self, theta: np.ndarray) -> ModelParams:
        base = self.params
        calibs = {}
        for (d, c), sl in zip(base.calibrations.items(), self.driver_slices):
            calibs[d] = DriverCalibration(c.driver, tuple(float(v) for v in theta[sl]))
        rules = tuple(
            replace(r, delta=float(theta[self.rule_start + j])) for j, r in enumerate(base.rules)
        )
        co_vals = theta[self.coeff_start :]
        if self.family is Family.COCOMO_II:
            coeffs = replace(base.coeffs, A=float(co_vals[0]), B=float(co_vals[1]))
        else:
            modes = {
                m: (float(co_vals[2 * i]), float(co_vals[2 * i + 1]))
                for i, m in enumerate(sorted(base.coeffs.modes))
            }
            coeffs = replace(base.coeffs, modes=modes)
        return replace(base, coeffs=coeffs, calibrations=calibs, rules=rules)

    # -- constraints

    def project(self, theta: np.ndarray) -> np.ndarray:
        """Monotone cones per driver, EM floor, delta clip, positive constant."""
        single = theta.ndim == 1
        out = np.atleast_2d(theta).copy()
        for owners, slots in self.iso_groups.values():
            vals = out[:, slots]  # (F, drivers, m)
            bad = np.any(np.diff(vals, axis=2) < 0, axis=2)
            if bad.any():
                f_idx, g_idx = np.nonzero(bad)
                fitted = isotonic_rows(vals[f_idx, g_idx])
                out[f_idx[:, None], slots[g_idx]] = fitted
        out[:, self.em_slots] = np.maximum(out[:, self.em_slots], self.config.em_floor)
        out[:, self.rule_start : self.coeff_start] = np.clip(
            out[:, self.rule_start : self.coeff_start], -MAX_DELTA, MAX_DELTA
        )
        if self.family is Family.COCOMO_II:
            out[:, self.coeff_start] = np.maximum(out[:, self.coeff_start], COEFF_FLOOR)
        else:
            out[:, self.coeff_start :: 2] = np.maximum(out[:, self.coeff_start :: 2], COEFF_FLOOR)
        return out[0] if single else out

    def violations(self, theta: np.ndarray) -> list[str]:
        """Drivers whose level values in ``theta`` break their direction."""
        bad = set()
        for owners, slots in self.iso_groups.values():
            steps = np.diff(theta[slots], axis=1)
            bad.update(owners[np.any(steps < 0, axis=1)].tolist())
        return [self.driver_ids[i] for i in sorted(bad)]

    # -- evaluation

    def _forward(self, theta: np.ndarray):
        F = theta.shape[0]
        levels = theta[:, : self.n_levels]
        deltas = theta[:, self.rule_start : self.coeff_start]
        offset = (np.arange(F) * self.n_levels)[:, None, None]

        lower, upper, frac, moving = (a[None] for a in self.static_bracket)
        inside = self.static_inside[None]
        if self.n_rules:
            cols = self.tcols
            shape = (F,) + self.raw.shape
            lower, upper, frac, moving, inside = (
                np.broadcast_to(a, shape).copy() for a in (lower, upper, frac, moving, inside)
            )
            shifted = self.raw[None, :, cols] + (self.fires[None] * deltas[:, None, :]) @ self.tcol_map
            lo, hi = self.lo[cols], self.hi[cols]
            x = np.clip(shifted, lo, hi)
            lower[:, :, cols], upper[:, :, cols], frac[:, :, cols], moving[:, :, cols] = _bracket(
                x, lo, hi, self.slot_start[cols]
            )
            inside[:, :, cols] = (shifted >= lo) & (shifted <= hi)
        lower = lower + offset
        upper = upper + offset
        flat = levels.ravel()
        v_lo, v_up = flat[lower], flat[upper]
        cd = (1.0 - frac) * v_lo + frac * v_up
        dcd = np.where(moving, v_up - v_lo, 0.0)

        co = theta[:, self.coeff_start :]
        if self.family is Family.COCOMO_II:
            exponent = co[:, 1:2] + 0.01 * cd[:, :, self.sf].sum(axis=2)
            effort = co[:, 0:1] * self.size**exponent * np.prod(cd[:, :, ~self.sf], axis=2)
        else:
            a = co[:, 0::2][:, self.mode_idx]
            b = co[:, 1::2][:, self.mode_idx]
            effort = a * self.size**b * np.prod(cd, axis=2)
        return effort, cd, dcd, (lower, upper, frac), inside

    def _values(self, effort: np.ndarray) -> np.ndarray:
        rel = (effort - self.actual) / self.actual
        terms = 0.5 * self.weights * rel * rel
        return np.array([math.fsum(row) for row in terms])

    def predict(self, theta: np.ndarray) -> np.ndarray:
        single = theta.ndim == 1
        effort = self._forward(np.atleast_2d(theta))[0]
        return effort[0] if single else effort

    def objective(self, theta: np.ndarray):
        single = theta.ndim == 1
        values = self._values(self._forward(np.atleast_2d(theta))[0])
        return float(values[0]) if single else values

    def value_and_grad(self, theta: np.ndarray, masked: bool = True):
        single = theta.ndim == 1
        theta = np.atleast_2d(theta)
        F = theta.shape[0]
        effort, cd, dcd, (lower, upper, frac), inside = self._forward(theta)
        values = self._values(effort)

        resid = self.weights * (effort - self.actual) / self.actual**2
        with np.errstate(divide="ignore", invalid="ignore"):
            d_effort = np.where(
                self.sf,
                0.01 * self.log_size[None, :, None] * effort[:, :, None],
                effort[:, :, None] / cd,
            )
        g_cd = resid[:, :, None] * d_effort

        grad = np.zeros((F, self.size_flat))
        n_flat = F * self.n_levels
        lower = np.broadcast_to(lower, g_cd.shape)
        upper = np.broadcast_to(upper, g_cd.shape)
        g_levels = np.bincount(lower.ravel(), (g_cd * (1.0 - frac)).ravel(), n_flat) + np.bincount(
            upper.ravel(), (g_cd * frac).ravel(), n_flat
        )
        grad[:, : self.n_levels] = g_levels.reshape(F, self.n_levels)
        if self.n_rules:
            t = self.targets
            chain = g_cd[:, :, t] * dcd[:, :, t] * inside[:, :, t] * self.fires[None]
            grad[:, self.rule_start : self.coeff_start] = chain.sum(axis=1)
        co = theta[:, self.coeff_start :]
        scaled = resid * effort
        if self.family is Family.COCOMO_II:
            grad[:, self.coeff_start] = scaled.sum(axis=1) / co[:, 0]
            grad[:, self.coeff_start + 1] = (scaled * self.log_size).sum(axis=1)
        else:
            grad[:, self.coeff_start :: 2] = (scaled @ self.mode_onehot) / co[:, 0::2]
            grad[:, self.coeff_start + 1 :: 2] = (scaled * self.log_size) @ self.mode_onehot
        if masked:
            grad = grad * self.mask
        if single:
            return float(values[0]), grad[0]
        return values, grad

    def block_of(self, index: int) -> str:
        if index < self.n_levels:
            for d, sl in zip(self.driver_ids, self.driver_slices):
                if sl.start <= index < sl.stop:
                    return f"level values of driver {d}"
        if index < self.coeff_start:
            j = index - self.rule_start
            return f"delta of rule {j} ({self.rules[j].describe()})"
        return f"coefficient {self.coeff_names[index - self.coeff_start]}"


def _records(dataset) -> list[ProjectRecord]:
    return list(getattr(dataset, "records", dataset))


def predict_many(params: ModelParams, dataset) -> np.ndarray:
    problem = Problem(params, _records(dataset))
    return problem.predict(problem.flatten())


def objective(params: ModelParams, dataset) -> float:
    problem = Problem(params, _records(dataset))
    return problem.objective(problem.flatten())


def gradient(params: ModelParams, dataset, config: TrainConfig | None = None) -> ParamGradient:
    """dE/dP through the effort equation, the driver subsystems and the rule deltas.

    With ``config`` the frozen blocks come back as exact zeros; the
    coefficient entries are reported only when ``train_coefficients`` is set.
    """
    problem = Problem(params, _records(dataset), config)
    _, g = problem.value_and_grad(problem.flatten(), masked=config is not None)
    levels = {d: g[sl].copy() for d, sl in zip(problem.driver_ids, problem.driver_slices)}
    coeffs = {}
    if problem.config.train_coefficients:
        coeffs = dict(zip(problem.coeff_names, map(float, g[problem.coeff_start :])))
    return ParamGradient(levels, g[problem.rule_start : problem.coeff_start].copy(), coeffs)


# ---------------------------------------------------------------- training


def descend(problem: Problem, theta0: np.ndarray) -> tuple[np.ndarray, list[TrainTrace]]:
    """Projected gradient descent on every row of ``theta0`` at once.

    Each row keeps its own step size, acceptance decisions and stopping
    point, so a row's trajectory does not depend on the other rows.
    """
    config = problem.config
    theta = np.atleast_2d(np.asarray(theta0, dtype=float)).copy()
    F = theta.shape[0]
    for f in range(F):
        bad = problem.violations(theta[f])
        if bad:
            raise DomainError(f"initial calibration is not monotone for: {', '.join(bad)}")

    traces = [TrainTrace() for _ in range(F)]
    alpha = np.full(F, float(config.learning_rate))
    value, grad = problem.value_and_grad(theta)
    if not np.all(np.isfinite(value)):
        raise TrainingError("initial objective is not finite")
    for f in range(F):
        traces[f].rows.append(TraceRow(0, float(value[f]), float(np.linalg.norm(grad[f])), True, alpha[f]))
    active = np.ones(F, dtype=bool)

    def finish(f: int, reason: str) -> None:
        active[f] = False
        traces[f].stop_reason = reason

    for it in range(1, config.max_iterations + 1):
        for f in np.flatnonzero(active):
            if value[f] == 0.0:
                finish(f, "zero-objective")
                continue
            bad_idx = np.flatnonzero(~np.isfinite(grad[f]))
            if bad_idx.size:
                raise TrainingError(f"non-finite gradient in {problem.block_of(int(bad_idx[0]))}")
        gnorm = np.linalg.norm(grad, axis=1)
        for f in np.flatnonzero(active & (gnorm == 0.0)):
            finish(f, "zero-gradient")
        if not active.any():
            break

        candidate = problem.project(theta - alpha[:, None] * grad)
        cand_value, cand_grad = problem.value_and_grad(candidate)
        if config.safeguarded:
            accept = active & (cand_value < value)
        else:
            accept = active.copy()
            broken = accept & ~np.isfinite(cand_value)
            if broken.any():
                raise TrainingError(f"objective became non-finite at iteration {it}")

        for f in np.flatnonzero(active & ~accept):
            alpha[f] *= 0.5
            traces[f].rows.append(TraceRow(it, float(value[f]), float(gnorm[f]), False, float(alpha[f])))
            if alpha[f] < ALPHA_FLOOR:
                finish(f, "step-floor")
        acc = np.flatnonzero(accept)
        if acc.size:
            improvement = (value[acc] - cand_value[acc]) / value[acc]
            theta[acc] = candidate[acc]
            value[acc] = cand_value[acc]
            grad[acc] = cand_grad[acc]
            for f, imp in zip(acc, improvement):
                traces[f].rows.append(TraceRow(it, float(value[f]), float(gnorm[f]), True, float(alpha[f])))
                if abs(imp) < config.tolerance:
                    finish(f, "tolerance")
    for f in np.flatnonzero(active):
        traces[f].stop_reason = "max-iterations"
    return theta, traces


def train(params: ModelParams, dataset, config: TrainConfig | None = None) -> tuple[ModelParams, TrainTrace]:
    """Calibrate ``params`` on ``dataset``; returns the fitted model and its trace.

    Steps that fail to lower the objective are rejected and the learning
    rate halved (unless ``config.safeguarded`` is off).  Stops at
    ``max_iterations``, when the relative improvement of an accepted step
    drops below ``tolerance``, or when the learning rate falls below 1e-12.
    """
    problem = Problem(params, _records(dataset), config)
    theta, traces = descend(problem, problem.flatten())
    bad = problem.violations(theta[0])
    assert not bad, f"projection left non-monotone drivers: {bad}"
    return problem.unflatten(theta[0]), traces[0]


# ---------------------------------------------------------------- gradient audit


def check_gradient(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    h: float = 1e-6,
) -> float:
    """Max over coordinates of |analytic - central difference| / max(|analytic|, 1e-12)."""
    if not h > 0:
        raise DomainError("step h must be > 0")
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(grad(theta), dtype=float)
    worst = 0.0
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        numeric = (fun(up) - fun(down)) / (2 * h)
        err = abs(analytic[i] - numeric) / max(abs(analytic[i]), 1e-12)
        worst = max(worst, err)
    return worst


def jitter_off_breakpoints(params: ModelParams, records: Sequence[ProjectRecord], h: float) -> list[ProjectRecord]:
    """Nudge ratings so no adjusted rating of a rule target sits within 2h of an integer.

    Integers are the breakpoints of the driver subsystems; moving a rule delta
    by +/-h moves its target's adjusted rating by at most h.
    """
    step = 10 * h
    families = params.families
    out = []
    for rec in records:
        ratings = dict(rec.ratings)
        for _ in range(100):
            problem = Problem(params, [replace(rec, ratings=ratings)])
            deltas = problem.flatten()[problem.rule_start : problem.coeff_start]
            shift = (problem.fires[0] * deltas) @ problem.tcol_map if problem.n_rules else []
            moved = False
            for d, s_shift in zip((problem.driver_ids[c] for c in problem.tcols), shift):
                s = ratings[d] + s_shift
                if abs(s - round(s)) <= 2 * h:
                    ratings[d] += step if s + step <= families[d].hi else -step
                    moved = True
            if not moved:
                break
        out.append(replace(rec, ratings=ratings))
    return out


def finite_difference_check(
    params: ModelParams, dataset, h: float = 1e-6, config: TrainConfig | None = None
) -> float:
    """Max relative disagreement between the analytic gradient and central differences.

    Covers every trainable block under ``config`` (level values and rule
    deltas by default).
    """
    config = config or TrainConfig()
    records = jitter_off_breakpoints(params, _records(dataset), h)
    problem = Problem(params, records, config)
    theta = problem.flatten()
    active = np.flatnonzero(problem.mask)

    def fun(sub):
        full = theta.copy()
        full[active] = sub
        return problem.objective(full)

    def grad(sub):
        full = theta.copy()
        full[active] = sub
        return problem.value_and_grad(full)[1][active]

    return check_gradient(fun, grad, theta[active], h)
