"""Synthetic projects and models for recovery experiments and gradient audits."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .core import CocomoCoefficients, Direction, DriverKind, DriverSpec, Family, ProjectRecord, RatingLevel
from .fuzzy import DependencyRule, DriverCalibration
from .learning import Problem, project_monotone
from .model import ModelParams


def random_ratings(params: ModelParams, rng: np.random.Generator) -> dict[str, float]:
    return {
        c.driver.id: float(rng.uniform(c.driver.lo, c.driver.hi)) for c in params.calibrations.values()
    }


def synthetic_projects(
    params: ModelParams,
    n: int,
    rng: np.random.Generator,
    size_range: tuple[float, float] = (2.0, 500.0),
    noise: float = 0.0,
) -> list[ProjectRecord]:
    """Projects whose actual effort is exactly what ``params`` predicts.

    Sizes are log-uniform over ``size_range``; ratings are uniform over each
    driver's defined range.  ``noise`` multiplies the efforts by a lognormal
    factor with that sigma.
    """
    modes = sorted(params.coeffs.modes)
    drafts = []
    for i in range(n):
        size = float(np.exp(rng.uniform(*np.log(size_range))))
        mode = str(rng.choice(modes)) if params.family is Family.COCOMO_81 else None
        drafts.append(ProjectRecord(f"syn{i:03d}", size, random_ratings(params, rng), 1.0, mode=mode))
    problem = Problem(params, drafts)
    efforts = problem.predict(problem.flatten())
    if noise:
        efforts = efforts * np.exp(rng.normal(0.0, noise, size=n))
    return [replace(r, actual_effort=float(e)) for r, e in zip(drafts, efforts)]


def perturb_levels(params: ModelParams, rng: np.random.Generator, fraction: float = 0.1) -> ModelParams:
    """Scale every level value by ``1 +/- fraction`` (random sign), then restore monotonicity."""
    calibs = {}
    for d, c in params.calibrations.items():
        signs = rng.choice([-1.0, 1.0], size=len(c.level_values))
        values = tuple(float(v * (1.0 + s * fraction)) for v, s in zip(c.level_values, signs))
        calibs[d] = project_monotone(DriverCalibration(c.driver, values))
    return replace(params, calibrations=calibs)


def random_model(
    rng: np.random.Generator,
    n_scale: int = 2,
    n_multipliers: int = 3,
    n_rules: int = 2,
) -> ModelParams:
    """A small random COCOMO II style model with monotone calibrations and rules."""
    calibs = {}
    for i in range(n_scale + n_multipliers):
        is_sf = i < n_scale
        lo = int(rng.integers(1, 3))
        hi = int(rng.integers(lo + 2, 7))
        direction = Direction.DECREASING if rng.random() < 0.5 else Direction.INCREASING
        spec = DriverSpec(
            f"{'SF' if is_sf else 'EM'}{i}",
            DriverKind.SCALE_FACTOR if is_sf else DriverKind.EFFORT_MULTIPLIER,
            direction,
            tuple(range(lo, hi + 1)),
        )
        steps = np.cumsum(rng.uniform(0.02, 0.3, size=hi - lo + 1))
        if is_sf:
            values = steps * 5.0
        else:
            values = 0.6 + steps
        if direction is Direction.DECREASING:
            values = values[::-1]
        calibs[spec.id] = DriverCalibration(spec, tuple(float(v) for v in values))
    ids = list(calibs)
    rules = []
    for _ in range(n_rules):
        target, cond = rng.choice(ids, size=2, replace=False)
        spec = calibs[str(cond)].driver
        level = RatingLevel(int(rng.integers(spec.lo, spec.hi + 1)))
        rules.append(DependencyRule(((str(cond), level),), str(target), float(rng.uniform(-1.0, 1.0))))
    coeffs = CocomoCoefficients(Family.COCOMO_II, A=float(rng.uniform(1.0, 4.0)), B=float(rng.uniform(0.85, 1.1)))
    return ModelParams(coeffs, calibs, tuple(rules))
