"""Cost-driver vocabulary, project records and the COCOMO effort equations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence


class NFCocomoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NFCocomoError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ConfigurationError(NFCocomoError):
    """A coefficient table, rule file or parameter file is inconsistent."""


class RatingLevel(enum.IntEnum):
    VERY_LOW = 1
    LOW = 2
    NOMINAL = 3
    HIGH = 4
    VERY_HIGH = 5
    EXTRA_HIGH = 6

    @property
    def abbrev(self) -> str:
        return _ABBREVIATIONS[self]

    @classmethod
    def parse(cls, token: "str | int | RatingLevel") -> "RatingLevel":
        """Parse a level name, abbreviation or ordinal (case-insensitive)."""
        if isinstance(token, RatingLevel):
            return token
        if isinstance(token, int) and not isinstance(token, bool):
            return cls(token)
        key = str(token).strip().upper().replace("_", " ").replace("-", " ")
        key = " ".join(key.split())
        try:
            return _LEVEL_TOKENS[key]
        except KeyError:
            raise DomainError(f"unknown rating level {token!r}") from None


_ABBREVIATIONS = {
    RatingLevel.VERY_LOW: "VL",
    RatingLevel.LOW: "L",
    RatingLevel.NOMINAL: "N",
    RatingLevel.HIGH: "H",
    RatingLevel.VERY_HIGH: "VH",
    RatingLevel.EXTRA_HIGH: "XH",
}

_LEVEL_TOKENS: dict[str, RatingLevel] = {}
for _level, _abbrev in _ABBREVIATIONS.items():
    _LEVEL_TOKENS[_abbrev] = _level
    _LEVEL_TOKENS[_level.name.replace("_", " ")] = _level
    _LEVEL_TOKENS[_level.name.replace("_", "")] = _level
    _LEVEL_TOKENS[str(int(_level))] = _level
_LEVEL_TOKENS["EH"] = RatingLevel.EXTRA_HIGH
_LEVEL_TOKENS["NOM"] = RatingLevel.NOMINAL


def parse_rating(token: "str | float | int") -> float:
    """Map a linguistic term or a numeric string onto the continuous rating axis.

    Linguistic terms land on their integer centers (``"VH"`` -> 5.0);
    numeric values pass through unchanged.
    """
    if isinstance(token, (int, float)) and not isinstance(token, bool):
        value = float(token)
    else:
        text = str(token).strip()
        try:
            value = float(text)
        except ValueError:
            return float(RatingLevel.parse(text))
    if not math.isfinite(value):
        raise DomainError(f"rating must be finite, got {token!r}")
    return value


class DriverKind(str, enum.Enum):
    SCALE_FACTOR = "scale-factor"
    EFFORT_MULTIPLIER = "effort-multiplier"


class Direction(str, enum.Enum):
    """Monotonic direction of a driver's level values.

    ``NONE`` marks drivers that belong to neither the increasing nor the
    decreasing set and are therefore left unconstrained (the published
    COCOMO'81 SCED table is U-shaped).
    """

    INCREASING = "increasing"
    DECREASING = "decreasing"
    NONE = "none"


class Family(str, enum.Enum):
    COCOMO_II = "cocomo-ii"
    COCOMO_81 = "cocomo-81"


@dataclass(frozen=True)
class DriverSpec:
    id: str
    kind: DriverKind
    direction: Direction
    levels: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DriverKind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))
        levels = tuple(int(RatingLevel.parse(k)) for k in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ConfigurationError(f"driver {self.id}: no defined levels")
        if list(levels) != list(range(levels[0], levels[0] + len(levels))):
            raise ConfigurationError(
                f"driver {self.id}: defined levels must be contiguous and ascending, got {levels}"
            )

    @property
    def lo(self) -> int:
        return self.levels[0]

    @property
    def hi(self) -> int:
        return self.levels[-1]

    @property
    def is_scale_factor(self) -> bool:
        return self.kind is DriverKind.SCALE_FACTOR

    def clamp(self, rating: float) -> float:
        return min(max(float(rating), float(self.lo)), float(self.hi))


@dataclass(frozen=True)
class ProjectRecord:
    """One historical project: size in KSLOC/KDSI, ratings, actual staff-months."""

    name: str
    size: float
    ratings: Mapping[str, float]
    actual_effort: float
    weight: float = 1.0
    mode: Optional[str] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.size) and self.size > 0):
            raise DomainError(f"project {self.name}: size must be > 0, got {self.size}")
        if not (math.isfinite(self.actual_effort) and self.actual_effort > 0):
            raise DomainError(
                f"project {self.name}: actual effort must be > 0, got {self.actual_effort}"
            )
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise DomainError(f"project {self.name}: weight must be >= 0, got {self.weight}")
        ratings = {k: parse_rating(v) for k, v in self.ratings.items()}
        object.__setattr__(self, "ratings", ratings)

    def require(self, driver_ids: Sequence[str]) -> None:
        missing = [d for d in driver_ids if d not in self.ratings]
        if missing:
            raise DomainError(f"project {self.name}: missing ratings for {', '.join(missing)}")


@dataclass(frozen=True)
class CocomoCoefficients:
    """Multiplicative constant and baseline exponent of an effort equation.

    For COCOMO II ``A`` and ``B`` are used directly.  For COCOMO'81 the
    per-mode ``(a, b)`` pairs in ``modes`` apply, with ``mode`` selecting the
    default when a project does not name its own.
    """

    family: Family
    A: float = 1.0
    B: float = 1.0
    modes: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    mode: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        modes = {str(m): (float(a), float(b)) for m, (a, b) in self.modes.items()}
        object.__setattr__(self, "modes", modes)
        if self.family is Family.COCOMO_II:
            if not self.A > 0:
                raise ConfigurationError(f"coefficient A must be > 0, got {self.A}")
        else:
            for m, (a, _) in modes.items():
                if not a > 0:
                    raise ConfigurationError(f"mode {m}: coefficient a must be > 0, got {a}")
            if self.mode is not None and self.mode not in modes:
                raise ConfigurationError(f"default mode {self.mode!r} has no coefficients")

    def mode_coefficients(self, mode: Optional[str] = None) -> tuple[float, float]:
        name = mode if mode is not None else self.mode
        if name is None:
            raise ConfigurationError("COCOMO'81 evaluation needs a development mode")
        try:
            return self.modes[name]
        except KeyError:
            raise ConfigurationError(
                f"no coefficients for mode {name!r} (known: {', '.join(sorted(self.modes))})"
            ) from None


def _check_positive(name: str, values: Sequence[float]) -> None:
    for i, v in enumerate(values):
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{name}[{i}] must be > 0, got {v}")


def cocomo2_effort(
    size: float,
    scale_factors: Sequence[float],
    multipliers: Sequence[float],
    coeffs: CocomoCoefficients,
) -> float:
    """COCOMO II post-architecture effort: ``A * size**(B + 0.01*sum(SF)) * prod(EM)``."""
    if coeffs.family is not Family.COCOMO_II:
        raise ConfigurationError(f"cocomo2_effort needs cocomo-ii coefficients, got {coeffs.family.value}")
    if not (math.isfinite(size) and size > 0):
        raise DomainError(f"size must be > 0, got {size}")
    _check_positive("multipliers", multipliers)
    exponent = coeffs.B + 0.01 * math.fsum(scale_factors)
    return coeffs.A * size**exponent * math.prod(multipliers)


def cocomo81_effort(
    size: float,
    multipliers: Sequence[float],
    coeffs: CocomoCoefficients,
    mode: Optional[str] = None,
) -> float:
    """Intermediate COCOMO'81 effort: ``a * size**b * prod(EM)`` for the chosen mode."""
    if coeffs.family is not Family.COCOMO_81:
        raise ConfigurationError(f"cocomo81_effort needs cocomo-81 coefficients, got {coeffs.family.value}")
    if not (math.isfinite(size) and size > 0):
        raise DomainError(f"size must be > 0, got {size}")
    _check_positive("multipliers", multipliers)
    a, b = coeffs.mode_coefficients(mode)
    return a * size**b * math.prod(multipliers)
