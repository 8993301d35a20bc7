"""Experiment configuration: a JSON document with nested arrays for matrices.

Parsing validates every field and reports failures with a dotted path
(``triplet.measure.alpha``).  ``ExperimentConfig.to_dict`` gives the
normalised form; parsing that form again reproduces it exactly.
"""

from __future__ import annotations

import hashlib
import math
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..density import GridSpec
from ..errors import ConfigError, LevyOUError
from ..levy import (
    IsotropicStable,
    LevyTriplet,
    SumOf,
    gaussian_bump_measure,
    uniform_box_measure,
)
from ..linalg import OUSystem, kolmogorov_system
from ..simulate import SimConfig

SCENARIOS = ("rank-check", "hypothesis", "charfn", "density", "simulate", "validate", "kolmogorov")
SAMPLERS = ("path", "kolmogorov", "compound")
MEASURE_FAMILIES = ("stable", "uniform-box", "gaussian-bump", "sum")


def _get(d: dict, key: str, path: str, default: Any = ..., kind=None):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    val = d[key]
    where = f"{path}.{key}" if path else key
    if kind is not None and val is not None and not isinstance(val, kind):
        raise ConfigError(where, f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _number(val, path, positive=False, nonneg=False):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, "expected a number")
    val = float(val)
    if not np.isfinite(val):
        raise ConfigError(path, "must be finite")
    if positive and not val > 0:
        raise ConfigError(path, "must be positive")
    if nonneg and val < 0:
        raise ConfigError(path, "must be nonnegative")
    return val


def _integer(val, path, minimum=None):
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(path, "expected an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return val


def _matrix(val, path, rows=None, cols=None):
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected a nested array of numbers") from None
    if arr.ndim != 2:
        raise ConfigError(path, "expected a matrix (nested array, row-major)")
    if rows is not None and arr.shape[0] != rows:
        raise ConfigError(path, f"expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ConfigError(path, f"expected {cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(path, "entries must be finite")
    return arr


def _vector(val, path, length=None):
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(path, "expected an array of numbers") from None
    if arr.ndim != 1:
        raise ConfigError(path, "expected a flat array")
    if length is not None and arr.shape[0] != length:
        raise ConfigError(path, f"expected length {length}, got {arr.shape[0]}")
    return arr


def _parse_measure(raw, path, dim):
    if raw is None:
        return None, None
    family = _get(raw, "family", path, kind=str)
    if family not in MEASURE_FAMILIES:
        raise ConfigError(f"{path}.family", f"unknown family {family!r}; expected one of {MEASURE_FAMILIES}")
    try:
        if family == "stable":
            alpha = _number(_get(raw, "alpha", path), f"{path}.alpha")
            if not 0 < alpha < 2:
                raise ConfigError(f"{path}.alpha", "must lie in (0, 2)")
            c = _number(_get(raw, "c_alpha", path, 1.0), f"{path}.c_alpha", positive=True)
            return IsotropicStable(alpha, c, dim), {"family": family, "alpha": alpha, "c_alpha": c}
        if family == "uniform-box":
            if dim != 1:
                raise ConfigError(f"{path}.family", "uniform-box is one dimensional")
            lo = _number(_get(raw, "lower", path), f"{path}.lower")
            hi = _number(_get(raw, "upper", path), f"{path}.upper")
            rate = _number(_get(raw, "rate", path, 1.0), f"{path}.rate", positive=True)
            if not hi > lo:
                raise ConfigError(f"{path}.upper", "must exceed lower")
            norm = {"family": family, "lower": lo, "upper": hi, "rate": rate}
            return uniform_box_measure(lo, hi, rate), norm
        if family == "gaussian-bump":
            scale = _number(_get(raw, "scale", path, 0.5), f"{path}.scale", positive=True)
            rate = _number(_get(raw, "rate", path, 1.0), f"{path}.rate", positive=True)
            center = _get(raw, "center", path, None)
            center = None if center is None else _vector(center, f"{path}.center", dim)
            norm = {"family": family, "scale": scale, "rate": rate, "center": None if center is None else center.tolist()}
            return gaussian_bump_measure(dim, scale, rate, center), norm
        comps_raw = _get(raw, "components", path, kind=list)
        if not comps_raw:
            raise ConfigError(f"{path}.components", "must not be empty")
        parsed = [_parse_measure(c, f"{path}.components[{i}]", dim) for i, c in enumerate(comps_raw)]
        return SumOf(tuple(p[0] for p in parsed)), {"family": "sum", "components": [p[1] for p in parsed]}
    except ConfigError:
        raise
    except LevyOUError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass
class ExperimentConfig:
    scenario: str
    system: OUSystem
    triplet: LevyTriplet
    t: float
    x: np.ndarray
    grid: GridSpec | None
    sim: SimConfig
    sampler: str
    jump_shell: tuple
    hypothesis: dict
    charfn: dict
    validate: dict
    output: str | None
    normalized: dict = field(repr=False)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.normalized))

    def to_json(self) -> str:
        return json.dumps(self.normalized, indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """Short hash of the normalised configuration."""
        return hashlib.sha256(json.dumps(self.normalized, sort_keys=True).encode()).hexdigest()[:12]


def parse_config(raw: dict | str, scenario: str | None = None) -> ExperimentConfig:
    """Validate a configuration object (or JSON text)."""
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    norm: dict[str, Any] = {}

    sc = _get(raw, "scenario", "", scenario, kind=str)
    if scenario is not None and sc != scenario:
        raise ConfigError("scenario", f"config is for {sc!r} but {scenario!r} was requested")
    if sc not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {sc!r}; expected one of {SCENARIOS}")
    norm["scenario"] = sc

    sys_raw = _get(raw, "system", "", {"preset": "kolmogorov"} if sc == "kolmogorov" else ..., kind=dict)
    if "preset" in sys_raw:
        if sys_raw["preset"] != "kolmogorov":
            raise ConfigError("system.preset", "only the 'kolmogorov' preset exists")
        system = kolmogorov_system()
    else:
        A = _matrix(_get(sys_raw, "A", "system"), "system.A")
        if A.shape[0] != A.shape[1]:
            raise ConfigError("system.A", "must be square")
        B = _matrix(_get(sys_raw, "B", "system"), "system.B", rows=A.shape[0])
        system = OUSystem(A, B)
    if sc == "kolmogorov" and system != kolmogorov_system():
        raise ConfigError("system", "the kolmogorov scenario uses A = [[0,0],[1,0]], B = [[1],[0]]")
    norm["system"] = system.to_dict()
    n, d = system.n, system.d

    tr_raw = _get(raw, "triplet", "", {}, kind=dict)
    Q = _matrix(_get(tr_raw, "Q", "triplet", np.zeros((d, d)).tolist()), "triplet.Q", rows=d, cols=d)
    a = _vector(_get(tr_raw, "a", "triplet", [0.0] * d), "triplet.a", d)
    nu, nu_norm = _parse_measure(_get(tr_raw, "measure", "triplet", None), "triplet.measure", d)
    try:
        triplet = LevyTriplet(Q, a, nu)
    except LevyOUError as exc:
        raise ConfigError("triplet", str(exc)) from None
    norm["triplet"] = {"Q": Q.tolist(), "a": a.tolist(), "measure": nu_norm}

    t = _number(_get(raw, "t", "", 1.0), "t", positive=True)
    x = _vector(_get(raw, "x", "", [0.0] * n), "x", n)
    norm["t"], norm["x"] = t, x.tolist()

    grid_raw = _get(raw, "grid", "", None, kind=dict)
    grid = None
    if grid_raw is not None:
        H = _get(grid_raw, "freq_radius", "grid", None)
        if H is not None:
            H = [_number(v, "grid.freq_radius", positive=True) for v in (H if isinstance(H, list) else [H])]
            if len(H) not in (1, n):
                raise ConfigError("grid.freq_radius", f"give one value or {n}")
        N = _integer(_get(grid_raw, "points_per_axis", "grid", 256), "grid.points_per_axis", 16)
        center = _get(grid_raw, "center", "grid", None)
        center = None if center is None else _vector(center, "grid.center", n).tolist()
        fallback = _get(grid_raw, "fallback_freq_radius", "grid", None)
        fallback = None if fallback is None else _number(fallback, "grid.fallback_freq_radius", positive=True)
        try:
            grid = GridSpec(n, N, None if H is None else (H[0] if len(H) == 1 else tuple(H)), center, fallback)
        except LevyOUError as exc:
            raise ConfigError("grid", str(exc)) from None
        norm["grid"] = {
            "points_per_axis": N,
            "freq_radius": H,
            "center": list(grid.center),
            "fallback_freq_radius": fallback,
        }
    elif sc in ("density", "validate", "kolmogorov"):
        grid = GridSpec(n, 256)
        norm["grid"] = {"points_per_axis": 256, "freq_radius": None, "center": [0.0] * n, "fallback_freq_radius": None}

    sim_raw = dict(_get(raw, "sim", "", {}, kind=dict))
    sampler = sim_raw.pop("sampler", "kolmogorov" if sc == "kolmogorov" else "path")
    if sampler not in SAMPLERS:
        raise ConfigError("sim.sampler", f"expected one of {SAMPLERS}")
    shell = sim_raw.pop("jump_shell", [0.0, None])
    if not isinstance(shell, list) or len(shell) != 2:
        raise ConfigError("sim.jump_shell", "expected [inner, outer] (outer may be null for infinity)")
    inner = _number(shell[0], "sim.jump_shell[0]", nonneg=True)
    outer = None if shell[1] is None else _number(shell[1], "sim.jump_shell[1]", positive=True)
    if sampler == "compound" and triplet.nu is None:
        raise ConfigError("triplet.measure", "the compound sampler needs a jump measure")
    allowed = set(SimConfig.__dataclass_fields__)
    for key in sim_raw:
        if key not in allowed:
            raise ConfigError(f"sim.{key}", "unknown field")
    try:
        sim = SimConfig(**sim_raw)
    except (TypeError, LevyOUError) as exc:
        raise ConfigError("sim", str(exc)) from None
    norm["sim"] = {**sim.to_dict(), "sampler": sampler, "jump_shell": [inner, outer]}

    hyp = dict(_get(raw, "hypothesis", "", {}, kind=dict))
    C = hyp.get("C", "derived")
    if C != "derived":
        C = _number(C, "hypothesis.C", positive=True)
    hyp_norm = {
        "alpha": _number(hyp.get("alpha", 1.5), "hypothesis.alpha", positive=True),
        "C": C,
        "r_grid": [_number(v, "hypothesis.r_grid", positive=True) for v in hyp.get("r_grid", [1.0, 0.5, 0.25, 0.1, 0.05, 0.01])],
        "dir_count": _integer(hyp.get("dir_count", 8), "hypothesis.dir_count", 1),
        "c0": _number(hyp.get("c0", 1.0), "hypothesis.c0", positive=True),
        "k_norms": None,
    }
    if hyp.get("k_norms") is not None:
        hyp_norm["k_norms"] = [_number(v, "hypothesis.k_norms", positive=True) for v in hyp["k_norms"]]
    norm["hypothesis"] = hyp_norm

    cf = dict(_get(raw, "charfn", "", {}, kind=dict))
    freqs = cf.get("frequencies", [[1.0] * n])
    freqs = _matrix(freqs, "charfn.frequencies", cols=n).tolist()
    cf_norm = {
        "frequencies": freqs,
        "ray_count": _integer(cf.get("ray_count", 64), "charfn.ray_count", 1),
        "r_max": _number(cf.get("r_max", 64.0), "charfn.r_max", positive=True),
        "radius_count": _integer(cf.get("radius_count", 32), "charfn.radius_count", 2),
    }
    norm["charfn"] = cf_norm

    val = dict(_get(raw, "validate", "", {}, kind=dict))
    val_norm = {
        "ks_level": _number(val.get("ks_level", 0.001), "validate.ks_level", positive=True),
        "l1_threshold": _number(val.get("l1_threshold", 0.05), "validate.l1_threshold", positive=True),
        "hist_block": val.get("hist_block"),
        "marginal_points": _integer(val.get("marginal_points", 65536), "validate.marginal_points", 16),
        "marginal_window_factor": _number(val.get("marginal_window_factor", 4.0), "validate.marginal_window_factor", positive=True),
        "mass_tolerance": _number(val.get("mass_tolerance", 5e-3), "validate.mass_tolerance", positive=True),
        "residual_threshold": _number(val.get("residual_threshold", 0.05), "validate.residual_threshold", positive=True),
        "expect_decaying": val.get("expect_decaying"),
        "expect_alpha": None,
        "alpha_tolerance": _number(val.get("alpha_tolerance", 0.05), "validate.alpha_tolerance", positive=True),
    }
    if val_norm["expect_decaying"] is not None and not isinstance(val_norm["expect_decaying"], bool):
        raise ConfigError("validate.expect_decaying", "expected true, false or null")
    if val.get("expect_alpha") is not None:
        val_norm["expect_alpha"] = _number(val["expect_alpha"], "validate.expect_alpha", positive=True)
    if val_norm["hist_block"] is not None:
        val_norm["hist_block"] = _integer(val_norm["hist_block"], "validate.hist_block", 1)
    norm["validate"] = val_norm

    out = _get(raw, "output", "", None, kind=str)
    norm["output"] = out

    return ExperimentConfig(
        scenario=sc,
        system=system,
        triplet=triplet,
        t=t,
        x=x,
        grid=grid,
        sim=sim,
        sampler=sampler,
        jump_shell=(inner, math.inf if outer is None else outer),
        hypothesis=hyp_norm,
        charfn=cf_norm,
        validate=val_norm,
        output=out,
        normalized=norm,
    )


def load_config(path: str, scenario: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    return parse_config(text, scenario)
