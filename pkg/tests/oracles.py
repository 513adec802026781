"""Reference computations written without the package's code paths.

Everything here works on the raw JSON tables and plain Python floats so it
can serve as an independent check of the engine.
"""

from __future__ import annotations

import itertools
import json
import math
from importlib import resources

ORDINAL = {"VL": 1, "L": 2, "N": 3, "H": 4, "VH": 5, "XH": 6}


def raw_table(name: str) -> dict:
    return json.loads(resources.files("nfcocomo").joinpath("data", name).read_text())


def _levels(driver: dict) -> dict[int, float]:
    return {ORDINAL[k]: v for k, v in driver["levels"].items()}


def straight_line_value(driver: dict, rating: float) -> float:
    """Weighted average of the level values with triangle weights, written out longhand."""
    levels = _levels(driver)
    lo, hi = min(levels), max(levels)
    x = min(max(rating, lo), hi)
    num = 0.0
    den = 0.0
    for k, v in levels.items():
        if lo == hi:
            mu = 1.0
        elif k == lo and x <= k:
            mu = 1.0
        elif k == hi and x >= k:
            mu = 1.0
        else:
            mu = max(0.0, 1.0 - abs(x - k))
        num += mu * v
        den += mu
    return num / den


def straight_line_effort(table: dict, size: float, ratings: dict, rules=(), mode=None) -> float:
    """Rules are ``(conditions, target, delta)`` with conditions a list of (driver, abbrev)."""
    drivers = {d["id"]: d for d in table["drivers"]}

    def clamp(d, x):
        lv = _levels(drivers[d])
        return min(max(x, min(lv)), max(lv))

    adjusted = dict(ratings)
    shifts: dict[str, float] = {}
    for conditions, target, delta in rules:
        fire = 1.0
        for d, abbrev in conditions:
            k = ORDINAL[abbrev]
            x = clamp(d, ratings[d])
            lv = _levels(drivers[d])
            if k == min(lv) and x <= k or k == max(lv) and x >= k:
                mu = 1.0
            else:
                mu = max(0.0, 1.0 - abs(x - k))
            fire *= mu
        shifts[target] = shifts.get(target, 0.0) + fire * delta
    for target, s in shifts.items():
        adjusted[target] = clamp(target, ratings[target] + s)

    sf_sum = 0.0
    em_prod = 1.0
    for d in table["drivers"]:
        v = straight_line_value(d, adjusted[d["id"]])
        if d["kind"] == "scale-factor":
            sf_sum += v
        else:
            em_prod *= v
    if table["family"] == "cocomo-ii":
        return table["A"] * size ** (table["B"] + 0.01 * sf_sum) * em_prod
    coeffs = table["modes"][mode or table["default_mode"]]
    return coeffs["a"] * size ** coeffs["b"] * em_prod


def integer_level_effort(table: dict, size: float, levels: dict[str, int], mode=None) -> float:
    """Plain COCOMO: look the multipliers up, no fuzzy machinery at all."""
    sf, em = [], []
    for d in table["drivers"]:
        inv = {ORDINAL[k]: v for k, v in d["levels"].items()}
        (sf if d["kind"] == "scale-factor" else em).append(inv[levels[d["id"]]])
    if table["family"] == "cocomo-ii":
        return table["A"] * size ** (table["B"] + 0.01 * sum(sf)) * math.prod(em)
    coeffs = table["modes"][mode or table["default_mode"]]
    return coeffs["a"] * size ** coeffs["b"] * math.prod(em)


def brute_force_isotonic(y, grid, increasing=True):
    """Exhaustive search for the closest monotone sequence with entries on ``grid``."""
    best, best_cost = None, math.inf
    for cand in itertools.product(grid, repeat=len(y)):
        pairs = zip(cand, cand[1:])
        if increasing and any(a > b for a, b in pairs):
            continue
        if not increasing and any(a < b for a, b in pairs):
            continue
        cost = sum((a - b) ** 2 for a, b in zip(cand, y))
        if cost < best_cost:
            best, best_cost = cand, cost
    return best, best_cost


def central_difference(f, x: float, h: float) -> float:
    return (f(x + h) - f(x - h)) / (2 * h)
