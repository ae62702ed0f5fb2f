"""Experiment configuration: JSON files, per-command defaults and ``key=value`` overrides."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

import numpy as np

from .potentials import (PotentialSeq, bernoulli_potential, constant, load_potential, sturmian,
                         thue_morse, two_valued)
from .transfer import DiracParams


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


_MODEL = {"m": 0.0, "c": 1.0, "seed": 20240501,
          "potential": {"family": "bernoulli", "a": 0.0, "b": 1.0, "p": 0.5, "length": 330}}

DEFAULTS: dict[str, dict[str, Any]] = {
    "moments": {
        "model": _MODEL,
        "task": {"T": {"min": 10.0, "max": 40.0, "count": 3}, "q": [0, 1, 2], "size": None,
                 "check_boundary": True},
        "tolerances": {"rel_diff": 0.02},
        "output": {"csv": "moments.csv"},
    },
    "beta": {
        "model": dict(_MODEL, potential=dict(_MODEL["potential"], length=1170)),
        "task": {"input": None, "T": {"min": 10.0, "max": 160.0, "count": 9}, "q": [2],
                 "size": None, "check_boundary": True, "window": 4},
        "tolerances": {"rel_diff": 0.02},
        "output": {"json": "beta.json", "csv": "beta_moments.csv"},
    },
    "transfer-scan": {
        "model": dict(_MODEL, potential=dict(_MODEL["potential"], length=1024)),
        "task": {"E": {"start": -0.5, "stop": 0.5, "step": 0.25}, "N": [16, 32, 64, 128, 256, 512, 1024]},
        "tolerances": {},
        "output": {"csv": "transfer_scan.csv", "json": "transfer_scan.json"},
    },
    "critical": {
        "model": {"m": 0.0, "c": 1.0},
        "task": {"coupling": 1.0, "E": {"start": 0.0, "stop": 5.0, "step": 1e-3}, "window_n": 1,
                 "admissibility": {"n": 1, "n_tilde": 1, "grid_step": 1.0 / 256}},
        "tolerances": {"commutator": 1e-8},
        "output": {"json": "critical.json"},
    },
    "bernoulli": {
        "model": {"m": 0.0, "c": 1.0, "seed": 20240501},
        "task": {"coupling": 1.0, "E0": float(np.pi), "window_exp": 0.25, "N": [32, 64, 128, 256],
                 "trials": 500, "p": 0.5, "C_test": None, "n_energies": 9, "quantile": 0.99,
                 "control_offset": 0.5},
        "tolerances": {"control_min_fraction": None},
        "output": {"csv": "bernoulli.csv", "json": "bernoulli.json"},
    },
    "admissibility": {
        "model": {"m": 0.0, "c": 1.0},
        "task": {"E": None, "state": None, "interference": {"n": 1, "n_tilde": 1, "sign": 1},
                 "grid_step": 1.0 / 256},
        "tolerances": {"rel_tol": 1e-9},
        "output": {"json": "admissibility.json"},
    },
}


def merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_assignment(text: str) -> tuple[list[str], Any]:
    """``a.b.c=value`` with ``value`` read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"empty key in {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_assignment(cfg: dict, path: list[str], value: Any) -> None:
    node = cfg
    for p in path[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {'.'.join(path)}: {p} is not a table")
        node = nxt
    node[path[-1]] = value


def load_config(command: str, path: str | None = None, overrides: list[str] = ()) -> dict:
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = copy.deepcopy(DEFAULTS[command])
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be an object")
        cfg = merge(cfg, user)
    for item in overrides:
        apply_assignment(cfg, *parse_assignment(item))
    return cfg


def params_from(model: dict) -> DiracParams:
    try:
        return DiracParams(float(model.get("m", 0.0)), float(model.get("c", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from exc


def potential_from(model: dict) -> PotentialSeq:
    entry = dict(model.get("potential") or {})
    fam = entry.pop("family", None)
    seed = int(entry.pop("seed", model.get("seed", 0)))
    try:
        if fam == "constant":
            return constant(float(entry["value"]), int(entry["length"]))
        if fam == "two_valued":
            return two_valued(float(entry["a"]), float(entry["b"]), entry["pattern"])
        if fam == "bernoulli":
            return bernoulli_potential(float(entry["a"]), float(entry["b"]), float(entry.get("p", 0.5)),
                                       seed, int(entry["length"]))
        if fam == "thue_morse":
            return thue_morse(float(entry["a"]), float(entry["b"]), int(entry["length"]))
        if fam == "sturmian":
            kw = {k: float(entry[k]) for k in ("rho", "theta") if k in entry}
            return sturmian(float(entry["coupling"]), length=int(entry["length"]), **kw)
        if fam == "file":
            return load_potential(entry["path"])
    except KeyError as exc:
        raise ConfigError(f"potential family {fam!r} needs field {exc}") from exc
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"bad potential: {exc}") from exc
    raise ConfigError(f"unknown potential family {fam!r}")


def grid_from(entry, name: str) -> np.ndarray:
    """List of values, or ``{start, stop, step}`` (inclusive), or ``{min, max, count}`` (geometric)."""
    if isinstance(entry, (list, tuple)):
        return np.asarray(entry, dtype=float)
    if isinstance(entry, (int, float)):
        return np.asarray([entry], dtype=float)
    if isinstance(entry, dict):
        try:
            if "step" in entry:
                a, b, h = float(entry["start"]), float(entry["stop"]), float(entry["step"])
                if h <= 0 or b < a:
                    raise ConfigError(f"{name}: need step > 0 and stop >= start")
                n = int(np.floor((b - a) / h + 1e-9)) + 1
                return a + h * np.arange(n)
            lo, hi, n = float(entry["min"]), float(entry["max"]), int(entry["count"])
            if lo <= 0 or hi <= lo or n < 2:
                raise ConfigError(f"{name}: need 0 < min < max and count >= 2")
            return np.geomspace(lo, hi, n)
        except KeyError as exc:
            raise ConfigError(f"{name}: missing field {exc}") from exc
    raise ConfigError(f"{name}: cannot build a grid from {entry!r}")
