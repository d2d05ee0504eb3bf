"""Load, save, and evaluate run configurations.

The on-disk format is YAML with one section per concern.  Spatial fields
accept plain numbers, node-value lists, or expression strings over a small
numpy vocabulary (x, and t for sources), e.g. ``p: "0.5*sin(pi*x) + 0.3"``.
"""
from __future__ import annotations

from dataclasses import asdict
from typing import Any, Union

import numpy as np
import yaml

from .core import RunConfig

# Names available inside field expression strings.
_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "arctan": np.arctan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "pi": np.pi, "e": np.e, "where": np.where, "minimum": np.minimum,
    "maximum": np.maximum,
}

_SECTIONS = {
    "grid": ("nx", "ell", "nt_half", "T"),
    "physics": ("d", "p", "p_gamma", "p1"),
    "initial": ("y0", "y_gamma0"),
    "sources": ("g", "g_gamma"),
    "carleman": ("s", "lam", "alpha", "a"),
    "algorithm": ("m", "r0", "max_iter", "stop_tol", "cg_tol", "cg_max_iter",
                  "eps", "extension_tol", "update", "sigma", "seed"),
}

# YAML key for the attribute whose natural name is a Python keyword.
_RENAMES = {"lam": "lambda"}


def _eval_expr(expr: str, names: dict[str, Any]) -> Any:
    scope = dict(_EXPR_NAMES)
    scope.update(names)
    try:
        return eval(compile(expr, "<config>", "eval"), {"__builtins__": {}}, scope)
    except Exception as exc:
        raise ValueError(f"cannot evaluate expression {expr!r}: {exc}") from None


def sample_on_x(value: Union[str, float, int, list], x: np.ndarray) -> np.ndarray:
    """Evaluate a spatial field spec on the space nodes."""
    if isinstance(value, str):
        out = _eval_expr(value, {"x": x})
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(x.shape, float(arr))
    if arr.shape != x.shape:
        raise ValueError(f"field has {arr.shape[0]} values, grid has {x.shape[0]} nodes")
    return arr.copy()


def sample_on_xt(value: Union[str, float, int, list],
                 x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate a source spec on the (time, space) node product, complex-valued."""
    shape = (t.shape[0], x.shape[0])
    if isinstance(value, str):
        out = _eval_expr(value, {"x": x[None, :], "t": t[:, None],
                                 "i1": 1j, "j1": 1j})
        return np.broadcast_to(np.asarray(out, dtype=complex), shape).copy()
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return np.full(shape, complex(arr))
    if arr.shape != shape:
        raise ValueError(f"source has shape {arr.shape}, grid product is {shape}")
    return arr.copy()


def sample_on_t(value: Union[str, float, int, list], t: np.ndarray) -> np.ndarray:
    """Evaluate a boundary source spec on the time nodes, complex-valued."""
    if isinstance(value, str):
        out = _eval_expr(value, {"t": t, "i1": 1j, "j1": 1j})
        return np.broadcast_to(np.asarray(out, dtype=complex), t.shape).copy()
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return np.full(t.shape, complex(arr))
    if arr.shape != t.shape:
        raise ValueError(f"series has {arr.shape[0]} values, grid has {t.shape[0]} nodes")
    return arr.copy()


def config_to_dict(config: RunConfig) -> dict:
    flat = asdict(config)
    out: dict[str, dict] = {}
    for section, keys in _SECTIONS.items():
        out[section] = {_RENAMES.get(k, k): flat[k] for k in keys}
    return out


def config_from_dict(data: dict) -> RunConfig:
    kwargs: dict[str, Any] = {}
    unrenames = {v: k for k, v in _RENAMES.items()}
    for section, keys in _SECTIONS.items():
        block = data.get(section, {}) or {}
        if not isinstance(block, dict):
            raise ValueError(f"config section {section!r} must be a mapping")
        for yaml_key, value in block.items():
            attr = unrenames.get(yaml_key, yaml_key)
            if attr not in keys:
                raise ValueError(f"unknown key {yaml_key!r} in section {section!r}")
            kwargs[attr] = value
    return RunConfig(**kwargs)


def save_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} does not contain a mapping")
    return config_from_dict(data)
