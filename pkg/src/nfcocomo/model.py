"""Model parameters, the composed effort prediction and their file formats.

Coefficient tables and trained parameter files share one JSON layout::

    {
      "schema_version": 1,
      "family": "cocomo-81" | "cocomo-ii",
      "A": 2.94, "B": 0.91,                          # cocomo-ii
      "default_mode": "organic",                     # cocomo-81
      "modes": {"organic": {"a": 3.2, "b": 1.05}},   # cocomo-81
      "drivers": [
        {"id": "ACAP", "kind": "effort-multiplier", "direction": "decreasing",
         "levels": {"VL": 1.46, "L": 1.19, "N": 1.0, "H": 0.86, "VH": 0.71}}
      ],
      "rules": [{"if": [["CPLX", "XH"]], "then": "ACAP", "delta": -0.5}]
    }

``rules`` is optional in a table; a standalone rule file holds only
``{"schema_version": 1, "rules": [...]}``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .core import (
    CocomoCoefficients,
    ConfigurationError,
    DriverSpec,
    Family,
    ProjectRecord,
    RatingLevel,
    cocomo2_effort,
    cocomo81_effort,
)
from .fuzzy import (
    DependencyRule,
    DriverCalibration,
    MembershipFamily,
    dnfis_adjust,
    nf_output,
)

SCHEMA_VERSION = 1
TABLE_ENV_VAR = "NFCOCOMO_TABLE"
BUILTIN_TABLES = {
    Family.COCOMO_81: "cocomo81.json",
    Family.COCOMO_II: "cocomo2000.json",
}


@dataclass(frozen=True)
class ModelParams:
    coeffs: CocomoCoefficients
    calibrations: Mapping[str, DriverCalibration]
    rules: tuple[DependencyRule, ...] = ()
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "calibrations", dict(self.calibrations))
        families = self.families
        for i, rule in enumerate(self.rules):
            for d in [rule.target, *(d for d, _ in rule.antecedent)]:
                if d not in families:
                    raise ConfigurationError(f"rule {i} references unknown driver {d}")
            for d, k in rule.antecedent:
                if int(k) not in self.calibrations[d].driver.levels:
                    raise ConfigurationError(f"rule {i}: driver {d} has no level {k.abbrev}")
        if self.family is Family.COCOMO_81 and any(
            c.driver.is_scale_factor for c in self.calibrations.values()
        ):
            raise ConfigurationError("COCOMO'81 models take effort multipliers only")

    @property
    def family(self) -> Family:
        return self.coeffs.family

    @property
    def drivers(self) -> tuple[DriverSpec, ...]:
        return tuple(c.driver for c in self.calibrations.values())

    @property
    def driver_ids(self) -> tuple[str, ...]:
        return tuple(self.calibrations)

    @property
    def families(self) -> dict[str, MembershipFamily]:
        return {d: MembershipFamily.for_driver(c.driver) for d, c in self.calibrations.items()}

    def with_rules(self, rules: Iterable[DependencyRule]) -> "ModelParams":
        return replace(self, rules=tuple(rules))

    def nominal_ratings(self) -> dict[str, float]:
        out = {}
        for d, c in self.calibrations.items():
            out[d] = float(c.driver.clamp(float(RatingLevel.NOMINAL)))
        return out


@dataclass(frozen=True)
class Breakdown:
    """Intermediate values of one prediction, for display."""

    effort: float
    ratings: dict[str, float]
    adjusted: dict[str, float]
    values: dict[str, float]


def explain_effort(params: ModelParams, project: ProjectRecord) -> Breakdown:
    project.require(params.driver_ids)
    families = params.families
    ratings = {d: project.ratings[d] for d in params.driver_ids}
    adjusted = dnfis_adjust(ratings, params.rules, families)
    values = {
        d: nf_output(adjusted[d], c, families[d]) for d, c in params.calibrations.items()
    }
    if params.family is Family.COCOMO_II:
        sf = [values[d] for d, c in params.calibrations.items() if c.driver.is_scale_factor]
        em = [values[d] for d, c in params.calibrations.items() if not c.driver.is_scale_factor]
        effort = cocomo2_effort(project.size, sf, em, params.coeffs)
    else:
        effort = cocomo81_effort(project.size, list(values.values()), params.coeffs, project.mode)
    return Breakdown(effort, ratings, adjusted, values)


def predict_effort(params: ModelParams, project: ProjectRecord) -> float:
    """Staff-months predicted for ``project``: adjust ratings, defuzzify, apply COCOMO."""
    return explain_effort(params, project).effort


# ---------------------------------------------------------------- file formats


def _read_json(path: "str | os.PathLike[str]") -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"{path}: unsupported schema_version {version}")
    return doc


def rules_from_doc(items: Sequence[Mapping[str, Any]]) -> tuple[DependencyRule, ...]:
    rules = []
    for i, item in enumerate(items):
        try:
            antecedent = tuple((str(d), RatingLevel.parse(k)) for d, k in item["if"])
            rules.append(DependencyRule(antecedent, str(item["then"]), float(item["delta"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"rule {i}: {exc}") from None
    return tuple(rules)


def rules_to_doc(rules: Sequence[DependencyRule]) -> list[dict]:
    return [
        {"if": [[d, k.abbrev] for d, k in r.antecedent], "then": r.target, "delta": r.delta}
        for r in rules
    ]


def params_from_doc(doc: Mapping[str, Any], source: str = "<memory>") -> ModelParams:
    try:
        family = Family(doc["family"])
        if family is Family.COCOMO_II:
            coeffs = CocomoCoefficients(family, A=float(doc["A"]), B=float(doc["B"]))
        else:
            modes = {m: (float(v["a"]), float(v["b"])) for m, v in doc["modes"].items()}
            coeffs = CocomoCoefficients(family, modes=modes, mode=doc.get("default_mode"))
        calibrations = {}
        for item in doc["drivers"]:
            levels = {int(RatingLevel.parse(k)): float(v) for k, v in item["levels"].items()}
            ordered = sorted(levels)
            spec = DriverSpec(item["id"], item["kind"], item["direction"], tuple(ordered))
            if spec.id in calibrations:
                raise ConfigurationError(f"duplicate driver {spec.id}")
            calibrations[spec.id] = DriverCalibration(spec, tuple(levels[k] for k in ordered))
        rules = rules_from_doc(doc.get("rules", []))
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{source}: malformed model description ({exc!r})") from None
    meta = {k: doc[k] for k in ("source", "note") if k in doc}
    return ModelParams(coeffs, calibrations, rules, meta)


def params_to_doc(params: ModelParams) -> dict:
    doc: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "family": params.family.value}
    doc.update(params.meta)
    if params.family is Family.COCOMO_II:
        doc["A"] = params.coeffs.A
        doc["B"] = params.coeffs.B
    else:
        doc["default_mode"] = params.coeffs.mode
        doc["modes"] = {m: {"a": a, "b": b} for m, (a, b) in params.coeffs.modes.items()}
    doc["drivers"] = [
        {
            "id": c.driver.id,
            "kind": c.driver.kind.value,
            "direction": c.driver.direction.value,
            "levels": {
                RatingLevel(k).abbrev: v for k, v in zip(c.driver.levels, c.level_values)
            },
        }
        for c in params.calibrations.values()
    ]
    doc["rules"] = rules_to_doc(params.rules)
    return doc


def load_params(path: "str | os.PathLike[str]") -> ModelParams:
    return params_from_doc(_read_json(path), str(path))


def dumps_params(params: ModelParams) -> str:
    for c in params.calibrations.values():
        if not all(math.isfinite(v) for v in c.level_values):
            raise ConfigurationError(f"driver {c.driver.id}: refusing to write non-finite values")
    return json.dumps(params_to_doc(params), indent=2) + "\n"


def save_params(params: ModelParams, path: "str | os.PathLike[str]") -> None:
    Path(path).write_text(dumps_params(params), encoding="utf-8")


def load_rules(path: "str | os.PathLike[str]") -> tuple[DependencyRule, ...]:
    doc = _read_json(path)
    try:
        return rules_from_doc(doc["rules"])
    except KeyError:
        raise ConfigurationError(f"{path}: missing 'rules' list") from None


def _builtin_text(name: str) -> str:
    return resources.files("nfcocomo").joinpath("data", name).read_text(encoding="utf-8")


def default_rules() -> tuple[DependencyRule, ...]:
    return rules_from_doc(json.loads(_builtin_text("rules_default.json"))["rules"])


def load_table(
    family: "Family | str | None" = None,
    path: "str | os.PathLike[str] | None" = None,
    rules: Optional[Sequence[DependencyRule]] = None,
) -> ModelParams:
    """Initial model from a coefficient table.

    ``path`` wins, then the ``NFCOCOMO_TABLE`` environment variable, then the
    bundled table for ``family``.  ``rules=None`` keeps whatever rules the
    table itself lists (the bundled tables list none).
    """
    path = path or os.environ.get(TABLE_ENV_VAR)
    if path:
        params = load_params(path)
        if family is not None and params.family is not Family(family):
            raise ConfigurationError(
                f"{path}: table is {params.family.value}, expected {Family(family).value}"
            )
    else:
        fam = Family(family or Family.COCOMO_II)
        name = BUILTIN_TABLES[fam]
        params = params_from_doc(json.loads(_builtin_text(name)), f"<builtin {name}>")
    if rules is not None:
        params = params.with_rules(rules)
    return params
