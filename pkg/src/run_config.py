"""
Run config - lecture des fichiers de run (clé: valeur) et presets.
运行配置 - 解析键值配置文件与预设

Vue d'ensemble / 功能概述 :
  - format plat `clé: valeur` ou `clé = valeur`, commentaires `#`
  - priorité : preset < fichier < options de la ligne de commande
  - presets "isolated" / "overlapping" : espacement de H_tr = ratio * gamma_typ,
    gamma_typ = (V1^2 + V2^2) / lambda
  - "custom" : H_tr et sv_1, sv_2 doivent être donnés explicitement

Flux / 执行顺序 :
  _parse_lines → _resolve (preset, canaux, grille) → EnsembleConfig.validate
"""

import sys
import os
from dataclasses import dataclass, field

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import (
    DEFAULT_COUPLING_X,
    DEFAULT_ENERGY_MAX,
    DEFAULT_ENERGY_MIN,
    DEFAULT_ENERGY_POINTS,
    DEFAULT_FORMATS,
    DEFAULT_K_TRANS,
    DEFAULT_LAMBDA,
    DEFAULT_N_CHANNELS,
    DEFAULT_N_DIM,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_PRESET,
    DEFAULT_REALIZATIONS,
    DEFAULT_RESAMPLE_FRAMES,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    PRESET_SPACING,
    PRESET_SV_DECAY,
    PRESET_SV_SCALE,
    PRESETS,
)
from src.ensemble import EnsembleConfig
from src.errors import ParseError, ValidationError
from src.model_core import ModelConfig


# ============================================================
# 1. Clés reconnues / 可识别的键
# ============================================================

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_EXACT_FLOAT_INT = 2 ** 53


def _to_int(raw):
    try:
        return int(raw)
    except ValueError:
        pass
    # forme flottante (« 1e3 ») : entière et exacte en double précision
    value = float(raw)
    if not value.is_integer() or abs(value) > _EXACT_FLOAT_INT:
        raise ValueError(f"integer expected, got {raw!r}")
    return int(value)


def _to_bool(raw):
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"boolean expected, got {raw!r}")


def _to_list(raw):
    body = raw.strip().strip("[]()")
    if not body.strip():
        return ()
    return tuple(float(x) for x in body.split(","))


def _to_scalar_or_list(raw):
    values = _to_list(raw)
    return values[0] if len(values) == 1 and "," not in raw else values


def _to_matrix(raw):
    rows = [r for r in raw.strip().strip("[]").split(";") if r.strip()]
    matrix = tuple(_to_list(r) for r in rows)
    if len({len(r) for r in matrix}) > 1:
        raise ValueError("htr_matrix rows have different lengths")
    return matrix


def _to_preset(raw):
    name = raw.strip().lower()
    if name not in PRESETS:
        raise ValueError(f"preset must be one of {', '.join(PRESETS)}")
    return name


KEY_TYPES = {
    "preset": _to_preset,
    "n_dim": _to_int,
    "k_trans": _to_int,
    "lambda": float,
    "n_channels_1": _to_int,
    "n_channels_2": _to_int,
    "coupling_x_1": _to_scalar_or_list,
    "coupling_x_2": _to_scalar_or_list,
    "channel_strengths_1": _to_list,
    "channel_strengths_2": _to_list,
    "htr_eigenvalues": _to_list,
    "htr_matrix": _to_matrix,
    "sv_1": _to_list,
    "sv_2": _to_list,
    "n_realizations": _to_int,
    "energy_min": float,
    "energy_max": float,
    "energy_points": _to_int,
    "resample_frames": _to_bool,
    "seed": _to_int,
    "workers": _to_int,
}

DEFAULTS = {
    "preset": DEFAULT_PRESET,
    "n_dim": DEFAULT_N_DIM,
    "k_trans": DEFAULT_K_TRANS,
    "lambda": DEFAULT_LAMBDA,
    "n_channels_1": DEFAULT_N_CHANNELS,
    "n_channels_2": DEFAULT_N_CHANNELS,
    "coupling_x_1": DEFAULT_COUPLING_X,
    "coupling_x_2": DEFAULT_COUPLING_X,
    "n_realizations": DEFAULT_REALIZATIONS,
    "energy_min": DEFAULT_ENERGY_MIN,
    "energy_max": DEFAULT_ENERGY_MAX,
    "energy_points": DEFAULT_ENERGY_POINTS,
    "resample_frames": DEFAULT_RESAMPLE_FRAMES,
    "seed": DEFAULT_SEED,
    "workers": DEFAULT_WORKERS,
}


# ============================================================
# 2. Lecture du texte / 文本解析
# ============================================================

def _parse_lines(text):
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        cut = [i for i in (content.find(":"), content.find("=")) if i >= 0]
        if not cut:
            raise ParseError("expected 'key: value'", line=number)
        key = content[:min(cut)].strip().lower()
        raw = content[min(cut) + 1:].strip()
        if key not in KEY_TYPES:
            raise ParseError("unknown key", line=number, key=key)
        if key in values:
            raise ParseError("key given twice", line=number, key=key)
        if not raw:
            raise ParseError("missing value", line=number, key=key)
        try:
            values[key] = KEY_TYPES[key](raw)
        except ValueError as e:
            raise ParseError(str(e), line=number, key=key) from e
    if "htr_eigenvalues" in values and "htr_matrix" in values:
        raise ParseError("give htr_eigenvalues or htr_matrix, not both", key="htr_matrix")
    return values


# ============================================================
# 3. Presets et résolution / 预设与参数解析
# ============================================================

def preset_singular_values(lam, k):
    """V (1, 1/2, 1/4, ...) with V = 0.1 lambda: anisotropic widths."""
    return tuple(PRESET_SV_SCALE * lam * PRESET_SV_DECAY ** m for m in range(k))


def preset_htr_eigenvalues(name, lam, k, sv_1, sv_2):
    """k eigenvalues centered on E = 0, spacing = ratio * gamma_typ."""
    v1 = max(sv_1, default=0.0)
    v2 = max(sv_2, default=0.0)
    gamma_typ = (v1 ** 2 + v2 ** 2) / lam if lam > 0 else 0.0
    spacing = PRESET_SPACING[name] * gamma_typ
    return tuple(spacing * (m - (k - 1) / 2.0) for m in range(k))


def _channel_strengths(values, side, lam, problems):
    explicit = values.get(f"channel_strengths_{side}")
    if explicit is not None:
        return explicit
    x = values[f"coupling_x_{side}"]
    n_channels = values[f"n_channels_{side}"]
    if isinstance(x, tuple):
        if f"n_channels_{side}" in values.get("_given", ()) and len(x) != n_channels:
            problems.append(f"coupling_x_{side}: {len(x)} values for n_channels_{side} = {n_channels}")
        xs = x
    else:
        xs = (x,) * max(n_channels, 0)
    # x = pi v^2 / lambda
    return tuple(float(xi) * lam / np.pi for xi in xs)


def _resolve(values):
    problems = []
    preset = values["preset"]
    lam = values["lambda"]
    k = values["k_trans"]

    if preset == "custom":
        missing = [key for key in ("sv_1", "sv_2") if key not in values]
        if "htr_eigenvalues" not in values and "htr_matrix" not in values:
            missing.append("htr_eigenvalues or htr_matrix")
        if missing:
            problems.append(f"preset custom requires {', '.join(missing)}")
    sv_default = preset_singular_values(lam, max(k, 0))
    sv_1 = values.get("sv_1", sv_default)
    sv_2 = values.get("sv_2", sv_default)
    if "htr_matrix" in values:
        htr_spec = values["htr_matrix"]
    elif "htr_eigenvalues" in values:
        htr_spec = values["htr_eigenvalues"]
    elif preset in PRESET_SPACING:
        htr_spec = preset_htr_eigenvalues(preset, lam, max(k, 0), sv_1, sv_2)
    else:
        htr_spec = (0.0,) * max(k, 0)

    model = ModelConfig(
        n_dim=values["n_dim"],
        k_trans=k,
        lam=lam,
        channel_strengths_1=_channel_strengths(values, 1, lam, problems),
        channel_strengths_2=_channel_strengths(values, 2, lam, problems),
        htr_spec=htr_spec,
        sv_1=tuple(sv_1),
        sv_2=tuple(sv_2),
        seed=values["seed"],
    )
    if values["energy_points"] < 1:
        problems.append(f"energy_points must be >= 1 (got {values['energy_points']})")
        grid = ()
    elif values["energy_min"] > values["energy_max"]:
        problems.append("energy_min must not exceed energy_max")
        grid = ()
    else:
        grid = tuple(float(e) for e in np.linspace(values["energy_min"], values["energy_max"], values["energy_points"]))

    cfg = EnsembleConfig(
        model=model,
        n_realizations=values["n_realizations"],
        energy_grid=grid,
        resample_frames=values["resample_frames"],
        master_seed=values["seed"],
        worker_hint=values["workers"],
    )
    if not 0 <= values["seed"] < 2 ** 64:
        problems.append(f"seed must be an unsigned 64-bit integer (got {values['seed']})")
    problems.extend(cfg.problems() if grid else model.problems())
    if problems:
        raise ValidationError(problems)
    cfg.validate()
    return cfg


def parse_config(text, overrides=None):
    """
    Parse a run file into a validated EnsembleConfig.

    overrides holds already-typed values (command line) and wins over the file.
    Raises ParseError (line/key) for malformed text, ValidationError with every
    violated invariant otherwise.
    """
    given = _parse_lines(text or "")
    for key, value in (overrides or {}).items():
        if key not in KEY_TYPES:
            raise ParseError("unknown override", key=key)
        if value is not None:
            given[key] = value
    values = {**DEFAULTS, **given, "_given": tuple(given)}
    return _resolve(values)


def resolved_values(cfg):
    """
    Echo of every materialized setting for the JSON provenance block.
    worker_hint is left out: results do not depend on it.
    """
    grid = cfg.energies()
    echo = cfg.to_dict()
    echo.pop("worker_hint")
    return {
        **echo,
        "energy_min": float(grid[0]) if grid.size else None,
        "energy_max": float(grid[-1]) if grid.size else None,
        "energy_points": int(grid.size),
    }


# ============================================================
# 4. RunSpec / 运行规格
# ============================================================

@dataclass
class RunSpec:
    config_path: str = None
    preset: str = None
    overrides: dict = field(default_factory=dict)
    output_dir: str = DEFAULT_OUTPUT_DIR
    formats: tuple = DEFAULT_FORMATS
    check_only: bool = False

    def problems(self):
        found = []
        if self.preset is not None and self.preset not in PRESETS:
            found.append(f"preset must be one of {', '.join(PRESETS)} (got {self.preset!r})")
        bad = [f for f in self.formats if f not in ("csv", "json")]
        if bad or not self.formats:
            found.append(f"formats must be a non-empty subset of csv, json (got {list(self.formats)})")
        parent = os.path.abspath(self.output_dir)
        while not os.path.exists(parent):
            parent = os.path.dirname(parent)
        if not os.access(parent, os.W_OK):
            found.append(f"output_dir not writable: {self.output_dir}")
        if self.config_path is not None and not os.path.isfile(self.config_path):
            found.append(f"config file not found: {self.config_path}")
        return found

    def load(self):
        """Read the run file (if any) and resolve it with the command-line overrides."""
        found = self.problems()
        if found:
            raise ValidationError(found)
        text = ""
        if self.config_path is not None:
            with open(self.config_path, encoding="utf-8") as f:
                text = f.read()
        overrides = dict(self.overrides)
        if self.preset is not None:
            overrides["preset"] = self.preset
        return parse_config(text, overrides)
