"""Instance files: a single self-describing JSON document with market,
utility, ambiguity and run blocks. Validation re-checks every module
invariant on load and reports failures with dotted field paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import (
    CustomGrid,
    EntropicPenalty,
    Measure,
    MeasureFamily,
    MultiplePriors,
    SmoothCriterion,
    TabulatedPenalty,
    Variational,
    default_family,
)
from .errors import AmbigoptError, SchemaError
from .market import FiniteMarket
from .utility import UtilitySpec, log_utility, power_utility, table_utility


@dataclass(frozen=True)
class RunBlock:
    x: float = 1.0
    x_grid: tuple = ()
    seed: int = 0
    oracle: bool = True
    tol: float = 1.0
    jobs: int | None = None


@dataclass(frozen=True)
class Instance:
    market: FiniteMarket
    utility: UtilitySpec
    ambiguity: object
    family: MeasureFamily
    run: RunBlock
    path: str = ""


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise SchemaError(f"{where}.{key}", "missing required field")
    return block[key]


def _numbers(value, where: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise SchemaError(where, "expected a non-empty array of numbers")
    out = []
    for i, v in enumerate(value):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaError(f"{where}[{i}]", "expected a number")
        out.append(float(v))
    return out


def _matrix(value, where: str) -> list[list[float]]:
    if not isinstance(value, (list, tuple)) or not value:
        raise SchemaError(where, "expected a non-empty array of rows")
    return [_numbers(row, f"{where}[{i}]") for i, row in enumerate(value)]


def _parse_market(block, where="market") -> FiniteMarket:
    if not isinstance(block, dict):
        raise SchemaError(where, "expected an object")
    s0 = _numbers(_need(block, "s0", where), f"{where}.s0")
    st = _matrix(_need(block, "st", where), f"{where}.st")
    p = _numbers(_need(block, "p", where), f"{where}.p")
    try:
        return FiniteMarket(np.array(s0), np.array(st), np.array(p))
    except AmbigoptError as exc:
        raise SchemaError(where, str(exc)) from exc


def _parse_utility(block, where="utility") -> UtilitySpec:
    if not isinstance(block, dict):
        raise SchemaError(where, "expected an object")
    family = _need(block, "family", where)
    try:
        if family == "log":
            return log_utility()
        if family == "power":
            return power_utility(float(_need(block, "p", where)))
        if family == "table":
            return table_utility(_matrix(_need(block, "points", where),
                                         f"{where}.points"))
    except (AmbigoptError, ValueError) as exc:
        raise SchemaError(where, str(exc)) from exc
    raise SchemaError(f"{where}.family", f"unknown family {family!r}")


def _measure_list(rows, reference, where) -> list[Measure]:
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(Measure(np.array(row), reference))
        except AmbigoptError as exc:
            raise SchemaError(f"{where}[{i}]", str(exc)) from exc
    return out


def _parse_ambiguity(block, market: FiniteMarket, where="ambiguity"):
    if not isinstance(block, dict):
        raise SchemaError(where, "expected an object")
    variant = _need(block, "variant", where)
    ref = market.reference
    try:
        if variant == "multiple_priors":
            if block.get("full_simplex"):
                fam = MeasureFamily.full_simplex(ref)
            else:
                rows = _matrix(_need(block, "generators", where),
                               f"{where}.generators")
                fam = MeasureFamily.from_generators(
                    _measure_list(rows, ref, f"{where}.generators"))
            return MultiplePriors(family=fam)
        if variant == "variational":
            pen = _need(block, "penalty", where)
            if "entropic" in pen:
                theta = float(_need(pen["entropic"], "theta",
                                    f"{where}.penalty.entropic"))
                return Variational(penalty=EntropicPenalty(theta=theta))
            if "table" in pen:
                tw = f"{where}.penalty.table"
                rows = _matrix(_need(pen["table"], "measures", tw),
                               f"{tw}.measures")
                gammas = _numbers(_need(pen["table"], "gamma", tw),
                                  f"{tw}.gamma")
                return Variational(penalty=TabulatedPenalty(
                    measures=tuple(_measure_list(rows, ref, f"{tw}.measures")),
                    gammas=tuple(gammas)))
            raise SchemaError(f"{where}.penalty",
                              "expected 'entropic' or 'table'")
        if variant == "smooth":
            phi = _need(block, "phi", where)
            if "exponential" in phi:
                kind, param = "exponential", float(
                    _need(phi["exponential"], "alpha", f"{where}.phi.exponential"))
            elif "power" in phi:
                kind, param = "power", float(
                    _need(phi["power"], "beta", f"{where}.phi.power"))
            else:
                raise SchemaError(f"{where}.phi",
                                  "expected 'exponential' or 'power'")
            mixture = []
            mix = _need(block, "mixture", where)
            if not isinstance(mix, list) or not mix:
                raise SchemaError(f"{where}.mixture", "expected a non-empty array")
            for i, entry in enumerate(mix):
                mw = f"{where}.mixture[{i}]"
                qrow = _numbers(_need(entry, "q", mw), f"{mw}.q")
                weight = float(_need(entry, "weight", mw))
                mixture.append((Measure(np.array(qrow), ref), weight))
            return SmoothCriterion(phi_kind=kind, phi_param=param,
                                   mixture=tuple(mixture))
        if variant == "custom":
            rows = _matrix(_need(block, "generators", where),
                           f"{where}.generators")
            gens = _measure_list(rows, ref, f"{where}.generators")
            t_grid = _numbers(_need(block, "t_grid", where), f"{where}.t_grid")
            values = _matrix(_need(block, "values", where), f"{where}.values")
            am_val = block.get("asymptotic_maximum", float("inf"))
            return CustomGrid(generators=tuple(gens),
                              t_grid=np.array(t_grid),
                              values=np.array(values),
                              asymptotic_maximum=float(am_val))
    except SchemaError:
        raise
    except (AmbigoptError, ValueError) as exc:
        raise SchemaError(where, str(exc)) from exc
    raise SchemaError(f"{where}.variant", f"unknown variant {variant!r}")


def _parse_family(block, market, spec, where="family") -> MeasureFamily:
    if block is None:
        try:
            return default_family(spec, reference=market.reference)
        except (AmbigoptError, ValueError) as exc:
            raise SchemaError(where, str(exc)) from exc
    if not isinstance(block, dict):
        raise SchemaError(where, "expected an object")
    if block.get("full_simplex"):
        return MeasureFamily.full_simplex(market.reference)
    rows = _matrix(_need(block, "generators", where), f"{where}.generators")
    return MeasureFamily.from_generators(
        _measure_list(rows, market.reference, f"{where}.generators"))


def _parse_run(block, where="run") -> RunBlock:
    if block is None:
        return RunBlock()
    if not isinstance(block, dict):
        raise SchemaError(where, "expected an object")
    kwargs = {}
    if "x" in block:
        x = block["x"]
        if not isinstance(x, (int, float)) or isinstance(x, bool) or x <= 0:
            raise SchemaError(f"{where}.x", "expected a positive number")
        kwargs["x"] = float(x)
    if "x_grid" in block:
        grid = _numbers(block["x_grid"], f"{where}.x_grid")
        if any(v <= 0 for v in grid) or any(
                b <= a for a, b in zip(grid, grid[1:])):
            raise SchemaError(f"{where}.x_grid",
                              "expected positive ascending budgets")
        kwargs["x_grid"] = tuple(grid)
    if "seed" in block:
        if not isinstance(block["seed"], int) or isinstance(block["seed"], bool):
            raise SchemaError(f"{where}.seed", "expected an integer")
        kwargs["seed"] = block["seed"]
    if "oracle" in block:
        if not isinstance(block["oracle"], bool):
            raise SchemaError(f"{where}.oracle", "expected a boolean")
        kwargs["oracle"] = block["oracle"]
    if "tol" in block:
        tol = block["tol"]
        if not isinstance(tol, (int, float)) or isinstance(tol, bool) or tol <= 0:
            raise SchemaError(f"{where}.tol", "expected a positive number")
        kwargs["tol"] = float(tol)
    if "jobs" in block:
        if not isinstance(block["jobs"], int) or block["jobs"] < 1:
            raise SchemaError(f"{where}.jobs", "expected a positive integer")
        kwargs["jobs"] = block["jobs"]
    return RunBlock(**kwargs)


def load_instance(path: str) -> Instance:
    """Parse and validate an instance file; every failure names its field."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError("(file)", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("(file)", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("(root)", "expected a JSON object")
    market = _parse_market(_need(doc, "market", "(root)"))
    utility = _parse_utility(_need(doc, "utility", "(root)"))
    spec = _parse_ambiguity(_need(doc, "ambiguity", "(root)"), market)
    family = _parse_family(doc.get("family"), market, spec)
    if family.n_states != market.n_states:
        raise SchemaError("family", "family state count does not match market")
    run = _parse_run(doc.get("run"))
    return Instance(market=market, utility=utility, ambiguity=spec,
                    family=family, run=run, path=path)
