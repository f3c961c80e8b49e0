"""Run configuration: INI files with a fixed set of sections and keys."""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field

from .decoderopt import PRESETS, CostWeights
from .optcore import MinimizeOptions
from .waveletopt import OptWeights

_ALPHAS = {f"alpha_{t}" for t in ("P", "VR", "VT", "E", "IR", "IT", "ph")}
_SCHEMA = {
    "mesh": {"levels": int, "area_method": str},
    "family": {"name": str, "init": str, "level": int},
    "optimizer": {"max_iter": int, "max_inner": int, "tol_c": float, "tol_g": float,
                  "penalty": float, "penalty_growth": float, "seed": int},
    "eval": {"n": int, "plane": str, "directions": int},
}
_WEIGHT_KEYS = {**{a: float for a in _ALPHAS}, "beta": float, "d_tilde_deg": float}
_FILTER_KEYS = {"alpha_lambda": float, "alpha_p1": float, "alpha_p2": float, "alpha_neg": float}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mesh_levels: int = 2
    area_method: str = "voronoi"
    family: str = "sint"
    family_init: str = "sint"
    family_level: int | None = None
    optimizer: MinimizeOptions = field(default_factory=MinimizeOptions)
    presets: dict = field(default_factory=lambda: {k: dict(v) for k, v in PRESETS.items()})
    filter_weights: OptWeights = field(default_factory=OptWeights)
    eval_n: int = 360
    eval_plane: str = "horizontal"
    eval_directions: int = 900

    def weights(self, preset: str) -> CostWeights:
        if preset not in self.presets:
            raise ConfigError(f"unknown preset {preset!r}; known: {sorted(self.presets)}")
        vals = dict(self.presets[preset])
        if "d_tilde_deg" in vals:
            vals["d_tilde"] = math.radians(vals.pop("d_tilde_deg"))
        return CostWeights(**vals, preset=preset)

    @property
    def seed(self) -> int:
        return self.optimizer.seed


def _convert(section, key, typ, raw):
    try:
        val = typ(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
    if isinstance(val, float) and not math.isfinite(val):
        raise ConfigError(f"[{section}] {key}: value must be finite")
    return val


def load_config(path=None, seed: int | None = None) -> RunConfig:
    """Read ``path`` (optional) and apply the seed override.

    Precedence for the seed: explicit argument, then ``SPHWAVE_SEED``, then the file.
    """
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            items = dict(parser.items(section))
            if section.startswith("weights."):
                name = section.split(".", 1)[1]
                schema = _FILTER_KEYS if name == "filters" else _WEIGHT_KEYS
            elif section in _SCHEMA:
                schema = _SCHEMA[section]
            else:
                raise ConfigError(f"unknown section [{section}]")
            unknown = set(items) - set(schema)
            if unknown:
                raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
            vals = {k: _convert(section, k, schema[k], v) for k, v in items.items()}
            _apply(cfg, section, vals)
    env = os.environ.get("SPHWAVE_SEED")
    if env is not None:
        cfg.optimizer.seed = _convert("env", "SPHWAVE_SEED", int, env)
    if seed is not None:
        cfg.optimizer.seed = int(seed)
    return cfg


def _apply(cfg: RunConfig, section: str, vals: dict) -> None:
    if section == "mesh":
        cfg.mesh_levels = vals.get("levels", cfg.mesh_levels)
        cfg.area_method = vals.get("area_method", cfg.area_method)
    elif section == "family":
        cfg.family = vals.get("name", cfg.family)
        cfg.family_init = vals.get("init", cfg.family_init)
        cfg.family_level = vals.get("level", cfg.family_level)
    elif section == "optimizer":
        for k, v in vals.items():
            setattr(cfg.optimizer, k, v)
    elif section == "eval":
        cfg.eval_n = vals.get("n", cfg.eval_n)
        cfg.eval_plane = vals.get("plane", cfg.eval_plane)
        cfg.eval_directions = vals.get("directions", cfg.eval_directions)
    elif section == "weights.filters":
        cfg.filter_weights = OptWeights(**{**cfg.filter_weights.__dict__, **vals})
    else:
        name = section.split(".", 1)[1]
        base = cfg.presets.get(name, {}) if not vals.keys() & _ALPHAS else {}
        cfg.presets[name] = {**base, **vals}
