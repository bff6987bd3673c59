"""Scenario configuration: loading, range validation, canonical form and hashing.

A scenario file is YAML (JSON is accepted as a subset) with a ``kind`` key,
an optional ``output_dir`` and the parameters of that kind at top level:

    kind: euler1d
    gamma: 2.0
    n_nodes: 64
    T_end: 50.0
    perturbation: {kind: fourier, amplitude: 1.0e-3, mode: 1}

Missing parameters take their defaults; unknown keys are rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError

KINDS = ("affine", "euler1d", "geom3d-suite", "weights-suite")


# --------------------------------------------------------------------------
# field validators
# --------------------------------------------------------------------------
def _num(path, v, lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    if isinstance(v, str):  # YAML 1.1 reads exponent forms like 1e-3 as strings
        try:
            v = float(v)
        except ValueError:
            raise ConfigError(f"expected a number, got {v!r}", path) from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError("must be finite", path)
    if v < lo or (lo_open and v == lo) or v > hi or (hi_open and v == hi):
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigError(f"{v!r} outside {lb}{lo}, {hi}{rb}", path)
    return v


def _int(path, v, lo=-(2**63), hi=2**63):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", path)
    if not lo <= v <= hi:
        raise ConfigError(f"{v} outside [{lo}, {hi}]", path)
    return int(v)


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(f"expected true or false, got {v!r}", path)
    return v


def _choice(path, v, choices):
    if v not in choices:
        raise ConfigError(f"{v!r} is not one of {list(choices)}", path)
    return v


def _list(path, v, item, min_len=0):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list):
        raise ConfigError(f"expected a list, got {v!r}", path)
    if len(v) < min_len:
        raise ConfigError(f"needs at least {min_len} entries", path)
    return [item(f"{path}[{i}]", x) for i, x in enumerate(v)]


def _matrix(path, v):
    if v is None:
        return None
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(r, list) and len(r) == 3 for r in v)):
        raise ConfigError("expected a 3x3 nested list", path)
    return [[_num(f"{path}[{i}][{j}]", x) for j, x in enumerate(r)] for i, r in enumerate(v)]


def _opt(fn):
    def wrapped(path, v):
        return None if v is None else fn(path, v)
    return wrapped


def _gamma(path, v):
    return _num(path, v, 1.0, 20.0, lo_open=True)


# each schema entry: name -> (default, validator)
SCHEMAS = {
    "affine": {
        "gamma": (1.5, _gamma),
        "A0": (None, _matrix),
        "Adot0": (None, _matrix),
        "T_end": (1000.0, lambda p, v: _num(p, v, 0.0, 1e7, lo_open=True)),
        "dt_output": (1.0, lambda p, v: _num(p, v, 0.0, 1e6, lo_open=True)),
        "fit_window": (None, _opt(lambda p, v: _list(p, v, lambda q, x: _num(q, x, 0.0), 2))),
        "slope_tolerance": (0.05, lambda p, v: _num(p, v, 0.0, 10.0, lo_open=True)),
        "tail_tol": (1e-2, lambda p, v: _num(p, v, 0.0, 1.0, lo_open=True)),
    },
    "euler1d": {
        "gamma": (2.0, _gamma),
        "n_nodes": (64, lambda p, v: _int(p, v, 8, 1024)),
        "T_end": (50.0, lambda p, v: _num(p, v, 0.0, 1e6, lo_open=True)),
        "dt": (None, _opt(lambda p, v: _num(p, v, 0.0, 1.0, lo_open=True))),
        "cfl": (0.5, lambda p, v: _num(p, v, 0.0, 1.0, lo_open=True)),
        "perturbation": ({"kind": "fourier", "amplitude": 1e-3, "mode": 1}, None),
        "filter": (False, _bool),
        "output_every": (50, lambda p, v: _int(p, v, 1, 10**9)),
        "alphadot0": (0.0, lambda p, v: _num(p, v, -10.0, 10.0)),
        "family": ("jacobi", lambda p, v: _choice(p, v, ("jacobi", "uniform"))),
        "energy_tolerance": (10.0, lambda p, v: _num(p, v, 0.0, lo_open=True)),
        "decay_fraction": (0.25, lambda p, v: _num(p, v, 0.0, 1.0, lo_open=True)),
        "epsilon": (None, _opt(lambda p, v: _num(p, v, 0.0, lo_open=True))),
        "velocity_power": (None, _opt(lambda p, v: _num(p, v, -10.0, 10.0))),
        "checkpoint": (True, _bool),
    },
    "geom3d-suite": {
        "seed": (42, lambda p, v: _int(p, v, 0)),
        "n_fields": (20, lambda p, v: _int(p, v, 1, 1000)),
        "n_points": (40, lambda p, v: _int(p, v, 1, 100000)),
        "piola_ns": ([17, 33, 65], lambda p, v: _list(p, v, lambda q, x: _int(q, x, 5, 257), 1)),
        "atan_refinements": (3, lambda p, v: _int(p, v, 0, 1000)),
        "piola_refinements": (5, lambda p, v: _int(p, v, 0, 1000)),
        "dts": ([0.04, 0.02, 0.01],
                lambda p, v: _list(p, v, lambda q, x: _num(q, x, 0.0, 1.0, lo_open=True), 2)),
        "curl_dts": ([0.05, 0.025, 0.0125],
                     lambda p, v: _list(p, v, lambda q, x: _num(q, x, 0.0, 1.0, lo_open=True), 2)),
        "curl_T": (1.0, lambda p, v: _num(p, v, 0.0, 10.0, lo_open=True)),
    },
    "weights-suite": {
        "gamma": (2.0, _gamma),
        "ns": ([32, 64, 128], lambda p, v: _list(p, v, lambda q, x: _int(q, x, 8, 2048), 1)),
        "n_fields": (10, lambda p, v: _int(p, v, 1, 100)),
        "kappas": ([math.exp(-3), math.exp(-4), math.exp(-5)],
                   lambda p, v: _list(p, v, lambda q, x: _num(q, x, 0.0, math.exp(-2),
                                                              lo_open=True, hi_open=True), 1)),
        "mollifier_n": (129, lambda p, v: _int(p, v, 16, 4096)),
        "tolerance": (0.05, lambda p, v: _num(p, v, 0.0, 1.0, lo_open=True)),
    },
}


def _perturbation(path, v):
    if not isinstance(v, dict):
        raise ConfigError("expected a mapping", path)
    extra = set(v) - {"kind", "amplitude", "mode"}
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", path)
    return {"kind": _choice(f"{path}.kind", v.get("kind", "fourier"), ("fourier", "bump")),
            "amplitude": _num(f"{path}.amplitude", v.get("amplitude", 1e-3), 0.0, 0.5),
            "mode": _int(f"{path}.mode", v.get("mode", 1), 1, 512)}


def _validate_params(kind: str, params: dict) -> dict:
    schema = SCHEMAS[kind]
    extra = set(params) - set(schema)
    if extra:
        raise ConfigError(f"unknown parameter(s) {sorted(extra)} for kind {kind}", sorted(extra)[0])
    out = {}
    for name, (default, fn) in schema.items():
        v = params.get(name, copy.deepcopy(default))
        if name == "perturbation":
            out[name] = _perturbation(name, v)
        else:
            out[name] = fn(name, v)
    # cross-field checks
    if kind == "affine":
        w = out["fit_window"]
        if w is not None and not 0 < w[0] < w[1] <= out["T_end"]:
            raise ConfigError("need 0 < lo < hi <= T_end", "fit_window")
    if kind == "euler1d":
        if out["family"] == "uniform" and out["filter"]:
            raise ConfigError("spectral filtering needs the jacobi family", "filter")
        if out["dt"] is not None:
            n = round(out["T_end"] / out["dt"])
            if abs(n * out["dt"] - out["T_end"]) > 1e-9 * out["T_end"]:
                raise ConfigError("T_end must be an integer multiple of dt", "dt")
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    params: dict
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("scenario must be a mapping", "<root>")
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise ConfigError("missing", "kind")
        _choice("kind", kind, KINDS)
        out = d.pop("output_dir", None)
        if out is not None and not isinstance(out, str):
            raise ConfigError("expected a path string", "output_dir")
        return cls(kind, _validate_params(kind, d), out)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, **copy.deepcopy(self.params)}
        if self.output_dir is not None:
            d["output_dir"] = self.output_dir
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @property
    def hash(self) -> str:
        canon = dict(self.to_dict())
        canon.pop("output_dir", None)
        return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()

    def value_of(self, axis: str):
        """Current value of a (dotted) parameter."""
        tgt = self.to_dict()
        for p in axis.split("."):
            if not isinstance(tgt, dict) or p not in tgt or p in ("kind", "output_dir"):
                raise ConfigError(f"unknown sweep axis for kind {self.kind}", axis)
            tgt = tgt[p]
        return tgt

    def with_value(self, axis: str, value) -> "ScenarioConfig":
        """Copy with a (dotted) parameter replaced, re-validated."""
        d = self.to_dict()
        parts = axis.split(".")
        tgt = d
        for p in parts[:-1]:
            if not isinstance(tgt.get(p), dict):
                raise ConfigError("not a nested parameter", axis)
            tgt = tgt[p]
        if parts[-1] not in tgt or parts[-1] in ("kind", "output_dir"):
            raise ConfigError(f"unknown sweep axis for kind {self.kind}", axis)
        tgt[parts[-1]] = value
        return ScenarioConfig.from_dict(d)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc}", str(path)) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML/JSON: {exc}", str(path)) from exc
    return ScenarioConfig.from_dict(data)


def parse_values(text: str) -> list:
    """Comma-separated sweep values, each parsed as a YAML scalar."""
    text = text.strip()
    if not text:
        return []
    return [yaml.safe_load(tok.strip()) for tok in text.split(",")]
