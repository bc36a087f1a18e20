"""Experiment configs: YAML with strict field checking and line-numbered errors."""
from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import yaml

from .errors import ConfigError

REQUIRED = object()


def _int(lo=None):
    def conv(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v
    return conv


def _float(lo=None, hi=None, open_lo=False):
    def conv(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"expected a number, got {v!r}")
        v = float(v)
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ValueError(f"must be {'>' if open_lo else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}, got {v}")
        return v
    return conv


def _fraction(v):
    if isinstance(v, bool):
        raise ValueError(f"expected a rational, got {v!r}")
    if isinstance(v, float):
        return Fraction(str(v))
    try:
        return Fraction(v)
    except (TypeError, ValueError):
        raise ValueError(f"expected a rational such as 7/8, got {v!r}") from None


def _fractions(v):
    if not isinstance(v, list):
        v = [v]
    return [_fraction(x) for x in v]


def _matrix(v):
    if isinstance(v, int) and not isinstance(v, bool):
        return [[v]]
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ValueError("expected a square integer matrix as a list of rows")
    n = len(v)
    for r in v:
        if len(r) != n or not all(isinstance(x, int) and not isinstance(x, bool) for x in r):
            raise ValueError("expected a square integer matrix as a list of rows")
    return v


def _int_list(v):
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ValueError("expected a list of integers")
    return v


def _opt(conv):
    def wrapped(v):
        return None if v is None else conv(v)
    return wrapped


def _str(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _cartan_element(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a list of numbers (or a list of lists for several factors)")
    parts = v if isinstance(v[0], list) else [v]
    return [[_fraction(x) for x in p] for p in parts]


BALL = {"center": (_fractions, REQUIRED), "radius": (_fraction, REQUIRED)}

_SFT = {
    "base": (_int(2), 2),
    "ball": (BALL, {"center": ["7/8"], "radius": "1/8"}),
    "window": (_int(1), 2),
}

SCHEMAS: dict = {
    "flagship": {
        **_SFT,
        "multiplier": (_int(2), 3),
        "samples": (_int(0), 1000),
        "steps": (_int(1), 1_000_000),
        "epsilon": (_float(0, 1, open_lo=True), 0.02),
        "depth": (_int(1), 7),
        "seed": (_int(0), 0),
        "tolerance": (_float(0, open_lo=True), 1e-12),
        "threads": (_int(1), 1),
        "keep_samples": (_int(0), 0),
    },
    "analyze-map": {
        "matrix": (_matrix, REQUIRED),
        "precision": (_float(0, open_lo=True), 1e-12),
    },
    "make-pairs": {
        "seed_matrix": (_opt(_matrix), None),
        "seed_poly": (_opt(_int_list), None),
        "coeff_bound": (_int(0), 3),
        "bound": (_int(1), 20),
    },
    "rank-one-scan": {
        "t": (_matrix, REQUIRED),
        "s": (_matrix, REQUIRED),
        "bound": (_int(1), 20),
        "twist_cap": (_int(1), 12),
    },
    "avoid-sft": {**_SFT, "tolerance": (_float(0, open_lo=True), 1e-12)},
    "sample": {
        **_SFT,
        "length": (_int(1), 1000),
        "count": (_int(0), 10),
        "seed": (_int(0), 0),
        "tolerance": (_float(0, open_lo=True), 1e-12),
    },
    "density": {
        "matrix": (_matrix, [[3]]),
        "start": (_opt(_fractions), None),
        "radix": (_int(2), 2),
        "precision": (_opt(_int(1)), None),
        "steps": (_int(1), 100_000),
        "depth": (_int(1), 7),
        "epsilon": (_float(0, 1, open_lo=True), 0.02),
        "seed": (_int(0), 0),
    },
    "average": {
        **_SFT,
        "matrix": (_matrix, [[3]]),
        "depth": (_int(1), 8),
        "checkpoints": (_int_list, [64, 256, 1024, 4096]),
        "tolerance": (_float(0, open_lo=True), 1e-12),
    },
    "bound-chain": {
        "matrix": (_matrix, REQUIRED),
        "dim_E": (_float(0), REQUIRED),
        "neutral_dim": (_opt(_float(0)), None),
    },
    "cartan": {
        "factors": (_int_list, [3]),
        "multiplicities": (_opt(_int_list), None),
        "a1": (_cartan_element, REQUIRED),
        "a2": (_opt(_cartan_element), None),
        "assumed_dim": (_opt(_float(0)), None),
    },
}


def _line_map(text: str) -> dict:
    """Dotted field path -> 1-based line number, from the YAML node tree."""
    out: dict = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None)

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}{k.value}"
                out[path] = k.start_mark.line + 1
                walk(v, path + ".")

    if root is not None:
        walk(root, "")
    return out


def _validate(data: dict, schema: dict, lines: dict, prefix: str = "") -> dict:
    out = {}
    for key in data:
        if key not in schema:
            raise ConfigError("unknown field", field=prefix + str(key), line=lines.get(prefix + str(key)))
    for key, (conv, default) in schema.items():
        path = prefix + key
        if key not in data:
            if default is REQUIRED:
                raise ConfigError("missing required field", field=path)
            out[key] = _validate(default, conv, lines, path + ".") if isinstance(conv, dict) else default
            continue
        value = data[key]
        if isinstance(conv, dict):
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", field=path, line=lines.get(path))
            out[key] = _validate(value, conv, lines, path + ".")
            continue
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(str(exc), field=path, line=lines.get(path)) from None
    return out


def parse_config(text: str, command: str) -> dict:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {command!r}")
    lines = _line_map(text)
    data = yaml.safe_load(text) if text.strip() else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of field: value")
    # a file may hold blocks for several subcommands
    if command in data and isinstance(data[command], dict) and set(data) <= set(SCHEMAS):
        sub_lines = {k[len(command) + 1:]: v for k, v in lines.items() if k.startswith(command + ".")}
        return _validate(data[command], SCHEMAS[command], sub_lines)
    return _validate(data, SCHEMAS[command], lines)


def load_config(path, command: str) -> dict:
    if path is None:
        return parse_config("", command)
    with open(path) as fh:
        return parse_config(fh.read(), command)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def canonical(config: dict) -> str:
    return json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical(config).encode()).hexdigest()[:16]
