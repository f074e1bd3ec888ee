"""JSON experiment configuration.

Schema (all keys optional except ``methods`` and ``horizons``)::

    {
      "methods": ["gc_exact", "gc_neural", "fqi", "ppo", "tree_search"],
      "horizons": [5, 10],
      "runs": 10,
      "master_seed": 0,
      "n_eval": 1000,
      "b": {"6": "0110"},          # fixed words per horizon; other horizons sample b per run
      "record_seconds": false,     # wall-clock times make the CSV non-reproducible
      "budgets": {
        "gc_exact":   {"N": 1000, "alpha": 1},
        "gc_neural":  {"I": 1000, "hidden": [256, 256], "steps": 30000, "lr": 0.02, ...},
        "fqi":        {"K": 50, "I": 1000, "epsilon": 0.3, "steps": 1000, "lr": 0.0003, ...},
        "ppo":        {"K": 50, "I": 1000, "clip": 0.2, "beta": 0.001, "steps": 500, ...},
        "tree_search": {"H_S": 4}
      }
    }

Budget keys not given keep the defaults of the solver config classes.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..solvers.fqi import FqiConfig
from ..solvers.gc_neural import GcNeuralConfig
from ..solvers.ppo import PpoConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class GcExactBudget:
    N: int = 1000
    alpha: int = 1


@dataclass
class TreeSearchBudget:
    H_S: int = 4


BUDGET_TYPES = {
    "gc_exact": GcExactBudget,
    "gc_neural": GcNeuralConfig,
    "fqi": FqiConfig,
    "ppo": PpoConfig,
    "tree_search": TreeSearchBudget,
}
METHODS = tuple(BUDGET_TYPES)


@dataclass
class ExperimentConfig:
    methods: list
    horizons: list
    runs: int = 10
    master_seed: int = 0
    n_eval: int = 1000
    b: dict = field(default_factory=dict)  # horizon -> fixed bit word
    record_seconds: bool = False
    budgets: dict = field(default_factory=dict)  # method -> budget dataclass

    def budget(self, method: str):
        return self.budgets.get(method) or BUDGET_TYPES[method]()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["b"] = {str(k): v for k, v in self.b.items()}
        return d


def _check_int(path, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return value


def _budget_from_dict(method: str, raw, path: str):
    cls = BUDGET_TYPES[method]
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"{path}.{key}", f"unknown key for {method}")
        default = fields[key].default
        if isinstance(default, tuple):
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}.{key}", "expected a non-empty list of integers")
            value = tuple(_check_int(f"{path}.{key}[{i}]", v, 1) for i, v in enumerate(value))
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{path}.{key}", "expected true or false")
        elif isinstance(default, int):
            value = _check_int(f"{path}.{key}", value)
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
            value = float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(f"{path}.{key}", "expected a string")
        kw[key] = value
    try:
        budget = cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    for name in ("N", "I", "K", "steps", "n_batches", "H_S"):
        if hasattr(budget, name) and getattr(budget, name) < 1:
            raise ConfigError(f"{path}.{name}", "must be >= 1")
    if getattr(budget, "dtype", "float64") not in ("float32", "float64"):
        raise ConfigError(f"{path}.dtype", "must be float32 or float64")
    if method == "fqi" and not 0.0 <= budget.epsilon <= 1.0:
        raise ConfigError(f"{path}.epsilon", "must lie in [0, 1]")
    if method == "ppo" and not 0.0 < budget.clip < 1.0:
        raise ConfigError(f"{path}.clip", "must lie in (0, 1)")
    if method == "gc_exact" and budget.alpha != 1:
        raise ConfigError(f"{path}.alpha", "only alpha = 1 is supported")
    return budget


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected an object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    for key in ("methods", "horizons"):
        if key not in raw:
            raise ConfigError(key, "missing")

    methods = raw["methods"]
    if isinstance(methods, str):
        methods = [methods]
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods", "expected a non-empty list")
    for i, m in enumerate(methods):
        if m not in BUDGET_TYPES:
            raise ConfigError(f"methods[{i}]", f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if len(set(methods)) != len(methods):
        raise ConfigError("methods", "duplicate method")

    horizons = raw["horizons"]
    if not isinstance(horizons, list) or not horizons:
        raise ConfigError("horizons", "expected a non-empty list")
    horizons = [_check_int(f"horizons[{i}]", h, 3) for i, h in enumerate(horizons)]
    if len(set(horizons)) != len(horizons):
        raise ConfigError("horizons", "duplicate horizon")

    runs = _check_int("runs", raw.get("runs", 10), 1)
    master_seed = _check_int("master_seed", raw.get("master_seed", 0), 0)
    n_eval = _check_int("n_eval", raw.get("n_eval", 1000), 1)
    record_seconds = raw.get("record_seconds", False)
    if not isinstance(record_seconds, bool):
        raise ConfigError("record_seconds", "expected true or false")

    b = {}
    raw_b = raw.get("b") or {}
    if not isinstance(raw_b, dict):
        raise ConfigError("b", "expected an object mapping horizon to bit word")
    for key, word in raw_b.items():
        try:
            H = int(key)
        except ValueError:
            raise ConfigError(f"b.{key}", "key must be a horizon") from None
        if H not in horizons:
            raise ConfigError(f"b.{key}", "horizon not in horizons")
        if not isinstance(word, str) or len(word) != H - 2 or set(word) - {"0", "1"}:
            raise ConfigError(f"b.{key}", f"expected a bit string of length {H - 2}")
        b[H] = word

    budgets = {}
    raw_budgets = raw.get("budgets") or {}
    if not isinstance(raw_budgets, dict):
        raise ConfigError("budgets", "expected an object")
    for method, sub in raw_budgets.items():
        if method not in BUDGET_TYPES:
            raise ConfigError(f"budgets.{method}", "unknown method")
        budgets[method] = _budget_from_dict(method, sub, f"budgets.{method}")

    return ExperimentConfig(methods, horizons, runs, master_seed, n_eval, b, record_seconds, budgets)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(raw)
