"""Triangular rating memberships, the per-driver Takagi-Sugeno subsystem and
the dependency adjustment of ratings.

Each driver owns six single-antecedent rules, one per rating level ``k``:
``IF rating is A_k THEN value = CD_k``.  Memberships are unit-spaced
triangles centred on the integer levels, with flat shoulders at the two ends
of the driver's defined range, so they form a partition of unity and the
subsystem interpolates linearly between adjacent level values.

Derivatives at breakpoints (apexes, feet, range ends) are right-hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    Direction,
    DomainError,
    DriverSpec,
    RatingLevel,
)

MAX_DELTA = 2.5
N_LEVELS = 6


@dataclass(frozen=True)
class MembershipFamily:
    """Triangular fuzzy sets over the contiguous levels ``lo..hi``."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 1 <= self.lo <= self.hi <= N_LEVELS:
            raise ConfigurationError(f"invalid level range {self.lo}..{self.hi}")

    @classmethod
    def for_driver(cls, driver: DriverSpec) -> "MembershipFamily":
        return cls(driver.lo, driver.hi)

    @property
    def levels(self) -> range:
        return range(self.lo, self.hi + 1)

    def clamp(self, rating: float) -> float:
        if not math.isfinite(rating):
            raise DomainError(f"rating must be finite, got {rating}")
        return min(max(float(rating), float(self.lo)), float(self.hi))

    def membership(self, level: int, rating: float) -> float:
        if level < self.lo or level > self.hi:
            return 0.0
        if self.lo == self.hi:
            return 1.0
        if level == self.lo and rating <= level:
            return 1.0
        if level == self.hi and rating >= level:
            return 1.0
        return max(0.0, 1.0 - abs(rating - level))

    def membership_slope(self, level: int, rating: float) -> float:
        """Right-hand derivative of ``membership(level, .)`` at ``rating``."""
        if level < self.lo or level > self.hi or self.lo == self.hi:
            return 0.0
        if level - 1 <= rating < level and level != self.lo:
            return 1.0
        if level <= rating < level + 1 and level != self.hi:
            return -1.0
        return 0.0


@dataclass(frozen=True)
class DriverCalibration:
    """Learnable level values of one driver, aligned with ``driver.levels``."""

    driver: DriverSpec
    level_values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.level_values)
        object.__setattr__(self, "level_values", values)
        if len(values) != len(self.driver.levels):
            raise ConfigurationError(
                f"driver {self.driver.id}: {len(values)} level values for "
                f"{len(self.driver.levels)} defined levels"
            )
        for v in values:
            if not math.isfinite(v):
                raise ConfigurationError(f"driver {self.driver.id}: non-finite level value {v}")
            if not self.driver.is_scale_factor and v <= 0:
                raise ConfigurationError(
                    f"driver {self.driver.id}: effort-multiplier level values must be > 0, got {v}"
                )

    def value_at(self, level: "int | str | RatingLevel") -> float:
        k = int(RatingLevel.parse(level))
        if k not in self.driver.levels:
            raise DomainError(f"driver {self.driver.id} has no level {RatingLevel(k).abbrev}")
        return self.level_values[k - self.driver.lo]

    def monotone_violations(self) -> list[int]:
        """Levels ``k`` where the step from ``k`` to ``k+1`` breaks the direction."""
        direction = self.driver.direction
        out = []
        for j in range(len(self.level_values) - 1):
            a, b = self.level_values[j], self.level_values[j + 1]
            if (direction is Direction.INCREASING and b < a) or (
                direction is Direction.DECREASING and b > a
            ):
                out.append(self.driver.lo + j)
        return out

    def is_monotone(self) -> bool:
        return not self.monotone_violations()


class RuleActivation(NamedTuple):
    raw: tuple[float, ...]
    normalized: tuple[float, ...]


class NFGradient(NamedTuple):
    levels: tuple[float, ...]  # d value / d CD_k, aligned with the calibration's levels
    rating: float


@dataclass(frozen=True)
class DependencyRule:
    """``IF d1 is k1 AND d2 is k2 ... THEN shift target by delta``."""

    antecedent: tuple[tuple[str, RatingLevel], ...]
    target: str
    delta: float

    def __post_init__(self) -> None:
        antecedent = tuple((str(d), RatingLevel.parse(k)) for d, k in self.antecedent)
        object.__setattr__(self, "antecedent", antecedent)
        object.__setattr__(self, "delta", float(self.delta))
        if not antecedent:
            raise ConfigurationError(f"rule targeting {self.target}: empty antecedent")
        if any(d == self.target for d, _ in antecedent):
            raise ConfigurationError(f"rule targeting {self.target} also conditions on it")
        if not math.isfinite(self.delta) or abs(self.delta) > MAX_DELTA:
            raise ConfigurationError(
                f"rule targeting {self.target}: |delta| must be <= {MAX_DELTA}, got {self.delta}"
            )

    def describe(self) -> str:
        cond = " AND ".join(f"{d} is {k.abbrev}" for d, k in self.antecedent)
        verb = "lowered" if self.delta < 0 else "raised"
        return f"IF {cond} THEN {self.target} {verb} by {abs(self.delta):g}"


def fuzzify(rating: float, family: MembershipFamily) -> RuleActivation:
    x = family.clamp(rating)
    raw = tuple(family.membership(k, x) for k in range(1, N_LEVELS + 1))
    total = math.fsum(raw)
    assert total > 0, f"memberships vanish at rating {x}: broken membership family"
    return RuleActivation(raw, tuple(w / total for w in raw))


def nf_output(
    rating: float, calib: DriverCalibration, family: MembershipFamily | None = None
) -> float:
    """Defuzzified driver value: the normalized-strength average of the level values."""
    family = family or MembershipFamily.for_driver(calib.driver)
    act = fuzzify(rating, family)
    lo = calib.driver.lo
    return math.fsum(act.normalized[k - 1] * calib.level_values[k - lo] for k in calib.driver.levels)


def nf_output_gradient(
    rating: float, calib: DriverCalibration, family: MembershipFamily | None = None
) -> NFGradient:
    family = family or MembershipFamily.for_driver(calib.driver)
    act = fuzzify(rating, family)
    lo = calib.driver.lo
    levels = tuple(act.normalized[k - 1] for k in calib.driver.levels)
    if rating < family.lo or rating > family.hi:
        # clamped: the output does not move with the rating
        return NFGradient(levels, 0.0)
    x = float(rating)
    slopes = [family.membership_slope(k, x) for k in range(1, N_LEVELS + 1)]
    total = math.fsum(act.raw)
    total_slope = math.fsum(slopes)
    d_rating = math.fsum(
        (slopes[k - 1] - act.normalized[k - 1] * total_slope) / total * calib.level_values[k - lo]
        for k in calib.driver.levels
    )
    return NFGradient(levels, d_rating)


def _families_for(
    rules: Sequence[DependencyRule], families: Mapping[str, MembershipFamily]
) -> None:
    for i, rule in enumerate(rules):
        for d in [rule.target, *(d for d, _ in rule.antecedent)]:
            if d not in families:
                raise ConfigurationError(f"rule {i} references unknown driver {d}")


def rule_firing(
    rule: DependencyRule, ratings: Mapping[str, float], families: Mapping[str, MembershipFamily]
) -> float:
    """Product of antecedent memberships evaluated on the (clamped) input ratings."""
    fire = 1.0
    for d, k in rule.antecedent:
        if d not in ratings:
            raise DomainError(f"missing rating for {d}, referenced by a dependency rule")
        fam = families[d]
        fire *= fam.membership(int(k), fam.clamp(ratings[d]))
    return fire


def _unclamped_targets(ratings, rules, families):
    _families_for(rules, families)
    shifts: dict[str, list[float]] = {}
    fires = []
    for rule in rules:
        f = rule_firing(rule, ratings, families)
        fires.append(f)
        shifts.setdefault(rule.target, []).append(f * rule.delta)
    sums = {}
    for target, terms in shifts.items():
        if target not in ratings:
            raise DomainError(f"missing rating for {target}, targeted by a dependency rule")
        sums[target] = ratings[target] + math.fsum(terms)
    return fires, sums


def dnfis_adjust(
    ratings: Mapping[str, float],
    rules: Sequence[DependencyRule],
    families: Mapping[str, MembershipFamily],
) -> dict[str, float]:
    """Shift each targeted rating by the firing-weighted deltas of its rules, then clamp.

    Drivers that no rule targets are returned unchanged.
    """
    _, sums = _unclamped_targets(ratings, rules, families)
    adjusted = dict(ratings)
    for target, s in sums.items():
        adjusted[target] = families[target].clamp(s)
    return adjusted


def dnfis_gradient(
    ratings: Mapping[str, float],
    rules: Sequence[DependencyRule],
    families: Mapping[str, MembershipFamily],
) -> tuple[float, ...]:
    """d(adjusted rating of rule r's target) / d(delta_r), one entry per rule.

    Cross terms (rule r against any other driver) are identically zero.
    A target pushed outside its range by the shift is clamped and gets 0.
    """
    fires, sums = _unclamped_targets(ratings, rules, families)
    out = []
    for rule, f in zip(rules, fires):
        fam = families[rule.target]
        s = sums[rule.target]
        out.append(f if fam.lo <= s <= fam.hi else 0.0)
    return tuple(out)


def triangle_weights(x: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Vectorized memberships and right-hand slopes for already-clamped ratings.

    ``x``, ``lo`` and ``hi`` broadcast together; returns arrays with a
    trailing axis of length 6 (levels 1..6), zero on undefined levels.
    """
    x = np.asarray(x, dtype=float)[..., None]
    lo = np.asarray(lo)[..., None]
    hi = np.asarray(hi)[..., None]
    k = np.arange(1, N_LEVELS + 1)
    defined = (k >= lo) & (k <= hi)
    mu = np.where(defined, np.maximum(0.0, 1.0 - np.abs(x - k)), 0.0)
    mu = np.where(defined & (lo == hi), 1.0, mu)
    rising = (x >= k - 1) & (x < k) & (k != lo)
    falling = (x >= k) & (x < k + 1) & (k != hi)
    slope = np.where(defined, rising * 1.0 - falling * 1.0, 0.0)
    return mu, slope
