"""Experiment configuration files.

A config is a TOML document with an ``[experiment]`` table (kind, repeats,
seed, output) and a ``[params]`` table whose keys depend on the kind.  Every
validation error names the file line it refers to.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..debias import AUTO, AUTO_MIN, METHODS
from ..synth import MANIFOLDS, PAIRS

KINDS = ("fig1_dim_benchmark", "fig2_d_sensitivity", "fig3_bagging_variance",
         "table1_w2_benchmark", "discr_error_curve")


class ConfigError(ValueError):
    def __init__(self, path, line: int | None, msg: str):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {msg}")


def _positive_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _positive(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _unit(v) -> bool:
    return isinstance(v, float) and 0 < v < 1


def _auto_or_positive(v) -> bool:
    return v == AUTO or _positive(v)


def _int_list(v) -> bool:
    return isinstance(v, list) and len(v) >= 1 and all(_positive_int(x) for x in v)


def _increasing(v) -> bool:
    return _int_list(v) and len(v) >= 2 and all(b > a for a, b in zip(v, v[1:]))


def _manifolds(v) -> bool:
    return isinstance(v, list) and len(v) >= 1 and all(x in MANIFOLDS for x in v)


def _pair(v) -> bool:
    return v in PAIRS


def _methods(v) -> bool:
    return isinstance(v, list) and len(v) >= 1 and all(x in METHODS for x in v)


def _bool(v) -> bool:
    return isinstance(v, bool)


# name -> (default, check, description used in messages)
Schema = dict[str, tuple[Any, Callable[[Any], bool], str]]

_SINKHORN: Schema = {
    "tol": (1e-6, _positive, "a positive number"),
    "max_iter": (10_000, _positive_int, "a positive integer"),
}

PARAMS: dict[str, Schema] = {
    "fig1_dim_benchmark": {
        "manifolds": (["hypercube_mixture", "lowrank_gaussian_mixture", "lowrank_gaussian"],
                      _manifolds, f"a list drawn from {sorted(MANIFOLDS)}"),
        "n": (2000, _positive_int, "a positive integer"),
        "eta": (1.5, lambda v: _positive(v) and v > 1, "a number above 1"),
        "mc_n": (20_000, lambda v: _positive_int(v) and v >= 2, "an integer >= 2"),
        "delta": (0.05, _unit, "a float in (0, 1)"),
        "baseline": (False, _bool, "true or false"),
        "baseline_n": (341, _positive_int, "a positive integer"),
    },
    "fig2_d_sensitivity": {
        "pair": ("sensitivity_mixture", _pair, f"one of {sorted(PAIRS)}"),
        "n": (2000, lambda v: _positive_int(v) and v % 2 == 0 and v >= 4, "an even integer >= 4"),
        "d_grid": ([2, 3, 4, 5, 6, 7, 8, 9, 10], _int_list, "a list of positive integers"),
        "eps0": (AUTO, _auto_or_positive, '"auto" or a positive number'),
        **_SINKHORN,
    },
    "fig3_bagging_variance": {
        "pair": ("sensitivity_mixture", _pair, f"one of {sorted(PAIRS)}"),
        "n": (1000, lambda v: _positive_int(v) and v % 2 == 0 and v >= 4, "an even integer >= 4"),
        "bags": ([1, 2, 4, 8, 16], _increasing, "a strictly increasing list of positive integers"),
        "runs": (20, lambda v: _positive_int(v) and v >= 2, "an integer >= 2"),
        "d_int": (5.0, _positive, "a positive number"),
        "eps0": (AUTO, _auto_or_positive, '"auto" or a positive number'),
        **_SINKHORN,
    },
    "table1_w2_benchmark": {
        "pair": ("gaussian_translation", _pair, f"one of {sorted(PAIRS)}"),
        "n": (2000, lambda v: _positive_int(v) and v % 2 == 0 and v >= 4, "an even integer >= 4"),
        "methods": (list(METHODS), _methods, f"a list drawn from {list(METHODS)}"),
        "bags": (8, _positive_int, "a positive integer"),
        "d_int": (AUTO, lambda v: v == AUTO_MIN or _auto_or_positive(v),
                  '"auto", "auto-min" or a positive number'),
        "eps0": (AUTO, _auto_or_positive, '"auto" or a positive number'),
        **_SINKHORN,
    },
    "discr_error_curve": {
        "manifold": ("uniform_cube", lambda v: v in MANIFOLDS or v == "uniform_cube",
                     f"one of {sorted(MANIFOLDS) + ['uniform_cube']}"),
        "ambient_d": (3, _positive_int, "a positive integer"),
        "grid": ([250, 500, 1000, 2000], _increasing, "a strictly increasing list of positive integers"),
        "mc_n": (50_000, lambda v: _positive_int(v) and v >= 2, "an integer >= 2"),
        "delta": (0.05, _unit, "a float in (0, 1)"),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    repeats: int
    seed: int
    output: Path
    params: dict = field(default_factory=dict)
    svg: bool = False
    timing: bool = False
    config_hash: str = ""


def _line_of(text: str, table: str | None, key: str) -> int | None:
    """1-based line of ``key = ...`` inside ``[table]`` (or of the table header)."""
    current = None
    key_re = re.compile(rf"^\s*(\"?){re.escape(key)}\1\s*=")
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", stripped)
        if m:
            current = m.group(1)
            if table is not None and key == "" and current == table:
                return lineno
            continue
        if current == table and key and key_re.match(line):
            return lineno
    return None


def parse_config(text: str, path: str | Path = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(path, int(m.group(1)) if m else None, f"syntax error: {exc}") from None

    for top in doc:
        if top not in ("experiment", "params"):
            raise ConfigError(path, _line_of(text, top, ""), f"unknown table [{top}]")
    exp = doc.get("experiment")
    if not isinstance(exp, dict):
        raise ConfigError(path, None, "missing [experiment] table")

    def fail(key: str, msg: str, table: str = "experiment"):
        raise ConfigError(path, _line_of(text, table, key) or _line_of(text, table, ""), msg)

    allowed = {"kind", "repeats", "seed", "output", "svg", "timing"}
    for key in exp:
        if key not in allowed:
            fail(key, f"unknown key {key!r} in [experiment]")
    kind = exp.get("kind")
    if kind is None:
        fail("", "missing required key 'kind'")
    if kind not in KINDS:
        fail("kind", f"unknown experiment kind {kind!r}; expected one of {list(KINDS)}")
    if "repeats" not in exp:
        fail("", "missing required key 'repeats'")
    if not _positive_int(exp["repeats"]):
        fail("repeats", f"repeats must be a positive integer, got {exp['repeats']!r}")
    seed = exp.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        fail("seed", f"seed must be an integer in [0, 2^64), got {seed!r}")
    output = exp.get("output", f"{kind}.csv")
    if not isinstance(output, str) or not output:
        fail("output", "output must be a non-empty path string")
    for flag in ("svg", "timing"):
        if flag in exp and not _bool(exp[flag]):
            fail(flag, f"{flag} must be true or false")

    schema = PARAMS[kind]
    given = doc.get("params", {})
    params = {}
    for key, value in given.items():
        if key not in schema:
            fail(key, f"unknown parameter {key!r} for {kind}; expected one of {sorted(schema)}", "params")
        default, check, desc = schema[key]
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not check(value):
            fail(key, f"parameter {key!r} must be {desc}, got {value!r}", "params")
        params[key] = value
    for key, (default, _, _) in schema.items():
        params.setdefault(key, default)

    out = Path(output)
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return ExperimentConfig(kind, exp["repeats"], seed, out, params, exp.get("svg", False),
                            exp.get("timing", False), digest)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file; relative outputs resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, None, f"cannot read config: {exc.strerror}") from None
    return parse_config(text, path, path.parent)
