"""Experiment configuration: JSON schema, validation and model construction.

All physical quantities are given in units of the coupling ``v``: the level
splitting as ``epsilon_bar = epsilon / v``, rates as multiples of ``v`` and
times as multiples of ``1 / v``.  ``v`` itself is a scale field (default 1).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .inversion import InversionSettings
from .liouville import RelaxationParams, SystemModel, TwoLevelParams
from .montecarlo import McConfig
from .renewal import Equidistant, MittagLeffler, Poisson, RenewalModel

RUN_KINDS = ("survival", "tz-scan", "counts", "fig1", "fig2", "validate")

_positive = {"type": "number", "exclusiveMinimum": 0}
_grid = {
    "type": "object",
    "properties": {
        "spacing": {"enum": ["linear", "log"]},
        "min": {"type": "number", "minimum": 0},
        "max": _positive,
        "points": {"type": "integer", "minimum": 1},
    },
    "required": ["min", "max", "points"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "run": {"enum": list(RUN_KINDS)},
        "system": {
            "type": "object",
            "properties": {
                "epsilon_bar": {"type": "number", "minimum": 0},
                "v": _positive,
                "relaxation": {
                    "type": "object",
                    "properties": {"w_d": {"type": "number", "minimum": 0}, "w_p": {"type": "number", "minimum": 0}},
                    "additionalProperties": False,
                },
            },
            "required": ["epsilon_bar"],
            "additionalProperties": False,
        },
        "renewal": {
            "oneOf": [
                {
                    "type": "object",
                    "properties": {"kind": {"const": "poisson"}, "w_r": _positive},
                    "required": ["kind", "w_r"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {"kind": {"const": "equidistant"}, "t_r": _positive},
                    "required": ["kind", "t_r"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "kind": {"const": "mittag-leffler"},
                        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        "w_r": _positive,
                    },
                    "required": ["kind", "alpha", "w_r"],
                    "additionalProperties": False,
                },
            ]
        },
        "grids": {
            "type": "object",
            "properties": {"time": _grid, "w_r": _grid},
            "additionalProperties": False,
        },
        "engines": {
            "type": "array",
            "items": {"enum": ["analytic", "mc"]},
            "minItems": 1,
            "uniqueItems": True,
        },
        "method": {"enum": ["supermatrix", "scalar"]},
        "counts": {
            "type": "object",
            "properties": {"t": _positive, "n_max": {"type": "integer", "minimum": 0}},
            "required": ["t"],
            "additionalProperties": False,
        },
        "mc": {
            "type": "object",
            "properties": {
                "n_trajectories": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "estimator": {"enum": ["product", "bernoulli"]},
                "block_size": {"type": "integer", "minimum": 1},
                "p1": {"enum": ["interpolated", "direct"]},
            },
            "additionalProperties": False,
        },
        "inversion": {
            "type": "object",
            "properties": {
                "n_terms": {"type": "integer", "minimum": 5},
                "shift": _positive,
                "period_factor": {"type": "number", "minimum": 1},
                "grouping": {"enum": ["point", "decade", "grid"]},
                "head_margin": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "validate": {
            "type": "object",
            "properties": {"filter": {"type": "string"}},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "svg"]}, "uniqueItems": True},
            },
            "additionalProperties": False,
        },
    },
    "required": ["run"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"run": {"const": "survival"}}},
         "then": {"required": ["system", "renewal", "grids"],
                  "properties": {"grids": {"required": ["time"]}}}},
        {"if": {"properties": {"run": {"const": "tz-scan"}}},
         "then": {"required": ["system", "grids"], "properties": {"grids": {"required": ["w_r"]}}}},
        {"if": {"properties": {"run": {"const": "counts"}}},
         "then": {"required": ["renewal", "counts"]}},
    ],
}


class ConfigError(ValueError):
    """Invalid experiment configuration; messages carry JSON-pointer paths."""


def _pointer(path) -> str:
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate(cfg: dict) -> None:
    """Raise :class:`ConfigError` listing every violation with its JSON pointer."""
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            # oneOf failures: report the branch matching the given kind
            best = jsonschema.exceptions.best_match([e])
            lines.append(f"{_pointer(best.absolute_path)}: {best.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    for name in ("time", "w_r"):
        g = cfg.get("grids", {}).get(name)
        if g is None:
            continue
        where = f"/grids/{name}"
        if g["points"] > 1 and not g["max"] > g["min"]:
            raise ConfigError(f"{where}: max must exceed min for a strictly increasing grid")
        if g.get("spacing") == "log" and not g["min"] > 0:
            raise ConfigError(f"{where}/min: log spacing needs a positive minimum")
        if name == "w_r" and not g["min"] > 0:
            raise ConfigError(f"{where}/min: measurement rates must be positive")
    relax = cfg.get("system", {}).get("relaxation")
    if relax is not None:
        try:
            RelaxationParams(relax.get("w_d", 0.0), relax.get("w_p", 0.0))
        except ValueError as exc:
            raise ConfigError(f"/system/relaxation: {exc}") from None


def load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError("/: configuration must be a JSON object")
    validate(cfg)
    return cfg


def make_grid(g: dict) -> np.ndarray:
    if g["points"] == 1:
        return np.array([float(g["min"])])
    if g.get("spacing", "linear") == "log":
        return np.geomspace(g["min"], g["max"], g["points"])
    return np.linspace(g["min"], g["max"], g["points"])


def scale(cfg: dict) -> float:
    return float(cfg.get("system", {}).get("v", 1.0))


def build_system(cfg: dict) -> SystemModel:
    s = cfg["system"]
    v = scale(cfg)
    relax = None
    if "relaxation" in s:
        r = s["relaxation"]
        relax = RelaxationParams(r.get("w_d", 0.0) * v, r.get("w_p", 0.0) * v)
    return SystemModel.two_level(TwoLevelParams(s["epsilon_bar"] * v, v), relax)


def build_renewal(cfg: dict) -> RenewalModel:
    r = cfg["renewal"]
    v = scale(cfg)
    if r["kind"] == "poisson":
        return Poisson(r["w_r"] * v)
    if r["kind"] == "equidistant":
        return Equidistant(r["t_r"] / v)
    return MittagLeffler(r["alpha"], r["w_r"] * v)


def inversion_settings(cfg: dict) -> InversionSettings:
    return InversionSettings(**cfg.get("inversion", {}))


def mc_config(cfg: dict, times: np.ndarray, seed: Optional[int] = None) -> McConfig:
    mc = dict(cfg.get("mc", {}))
    if seed is not None:
        mc["master_seed"] = seed
    return McConfig(times=times, **mc)


def with_overrides(cfg: dict, engines=None, seed=None, out=None) -> dict:
    """Copy of ``cfg`` with command-line overrides folded in (so summaries round-trip)."""
    cfg = copy.deepcopy(cfg)
    if engines is not None:
        cfg["engines"] = list(engines)
    if seed is not None:
        cfg.setdefault("mc", {})["master_seed"] = int(seed)
    if out is not None:
        cfg.setdefault("output", {})["dir"] = str(out)
    validate(cfg)
    return cfg
