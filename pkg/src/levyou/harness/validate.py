"""Scenario dispatch and the Monte Carlo versus density comparison."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import kstest, kstwobign

from ..charfn import ExponentField, decay_probe, ou_charfn, ou_exponent
from ..density import DensityGrid, GridSpec, cell_cdf, invert_density, marginal_grid
from ..errors import ConfigError, CoverageError, DimensionError, ParameterError
from ..levy import IsotropicStable, hypothesis_check, truncate_measure
from ..linalg import gramian_floor, kolmogorov_system, mat_exp, rank_condition
from ..simulate import (
    EndpointSample,
    kolmogorov_example,
    sample_compound_convolution,
    sample_path_endpoint,
)
from . import io
from .config import ExperimentConfig, parse_config

RELATIONS = {
    "<=": lambda v, th: v <= th,
    ">=": lambda v, th: v >= th,
    "==": lambda v, th: v == th,
}


@dataclass
class Criterion:
    name: str
    value: float
    relation: str
    threshold: float
    passed: bool

    def line(self) -> str:
        tag = "pass" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {_fmt(self.value)} {self.relation} {_fmt(self.threshold)}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def criterion(name: str, value, relation: str, threshold) -> Criterion:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        ok = value == threshold
    else:
        ok = math.isfinite(value) and RELATIONS[relation](value, threshold)
    return Criterion(name, value, relation, threshold, bool(ok))


@dataclass
class ValidationReport:
    """Outcome of one experiment: criteria rows plus the measured quantities.

    ``ks_distances`` holds one KS distance per one-dimensional marginal;
    ``l1_error`` the block-histogram L1 distance; ``mass_check`` the
    deviation of the grid mass from 1.
    """

    scenario: str
    criteria: list = field(default_factory=list)
    ks_distances: list = field(default_factory=list)
    l1_error: float | None = None
    mass_check: float | None = None
    decay_summary: dict | None = None
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def add(self, name, value, relation, threshold) -> Criterion:
        c = criterion(name, value, relation, threshold)
        self.criteria.append(c)
        return c

    def absorb(self, other: "ValidationReport") -> None:
        self.criteria.extend(other.criteria)
        self.ks_distances.extend(other.ks_distances)
        if other.l1_error is not None:
            self.l1_error = other.l1_error
        self.metrics.update(other.metrics)
        self.notes.extend(other.notes)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "criteria": [
                {"name": c.name, "value": c.value, "relation": c.relation, "threshold": c.threshold, "passed": c.passed}
                for c in self.criteria
            ],
            "ks_distances": list(self.ks_distances),
            "l1_error": self.l1_error,
            "mass_check": self.mass_check,
            "decay": self.decay_summary,
            "metrics": self.metrics,
        }

    def to_text(self, header: list[str] = ()) -> str:
        lines = list(header)
        lines += self.notes
        lines += [c.line() for c in self.criteria]
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


# -- comparison ---------------------------------------------------------------


def ks_critical_value(count: int, level: float = 1e-3) -> float:
    """Asymptotic one-sample KS critical value at the given level."""
    return float(kstwobign.isf(level) / math.sqrt(count))


def _block_sum(values: np.ndarray, b: int) -> np.ndarray:
    n = values.ndim
    shape = []
    for size in values.shape:
        shape += [size // b, b]
    return values.reshape(shape).sum(axis=tuple(range(1, 2 * n, 2)))


def _choose_block(values: np.ndarray, cell_volume: float, count: int, target: float) -> int:
    """Smallest power-of-two block whose expected sampling L1 is <= target."""
    N = values.shape[0]
    b = 1
    while True:
        m = np.clip(_block_sum(values, b) * cell_volume, 0.0, None)
        noise = float(np.sum(np.sqrt(2.0 * m / (math.pi * count))))
        if noise <= target or b * 2 > N // 4 or N % (2 * b):
            return b
        b *= 2


def _grid_marginal(grid: DensityGrid, axis: int) -> DensityGrid:
    other = tuple(i for i in range(grid.dim) if i != axis)
    vals = np.sum(grid.values, axis=other) * np.prod(grid.spacing[list(other)]) if other else grid.values
    spec = GridSpec(1, grid.spec.points_per_axis, float(grid.freq_radius[axis]), center=[float(grid.center[axis])])
    return DensityGrid(spec, grid.t, vals, (0,), math.nan, np.array([grid.freq_radius[axis]]), None)


def compare_mc_density(
    samples: EndpointSample,
    grid: DensityGrid,
    field_: ExponentField | None = None,
    shift=None,
    ks_level: float = 1e-3,
    l1_threshold: float = 0.05,
    hist_block: int | None = None,
    marginal_points: int = 65536,
    window_factor: float = 4.0,
) -> ValidationReport:
    """KS distance per marginal and block-histogram L1 error.

    ``shift`` (default 0) is subtracted from the samples so that they follow
    the law of the grid.  Marginal CDFs come from one-dimensional inversions
    through ``field_`` over a window ``window_factor`` times wider than the
    grid; without ``field_`` the grid's own marginals are used.  Histogram
    bins are unions of ``hist_block``-wide blocks of grid cells.
    """
    if samples.dim != grid.dim:
        raise DimensionError(f"samples have dimension {samples.dim}, grid has {grid.dim}")
    if any(grid.beta):
        raise ParameterError("compare_mc_density needs a density grid (beta = 0)")
    n = grid.dim
    y = samples.values - (np.zeros(n) if shift is None else np.asarray(shift, dtype=float))
    count = y.shape[0]
    N = grid.spec.points_per_axis
    lo, hi = grid.window()
    idx = np.floor((y - lo) / grid.spacing).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < N), axis=1)
    frac_in = float(np.mean(inside))
    if frac_in < 0.999:
        raise CoverageError(f"only {frac_in:.5f} of the samples fall inside the grid window; widen the grid")

    rep = ValidationReport("compare")
    crit = ks_critical_value(count, ks_level)
    rep.notes.append(f"KS critical value at level {ks_level:g} for {count} samples: {crit:.6g}")
    for axis in range(n):
        if field_ is not None:
            span = window_factor * (hi[axis] - lo[axis])
            marg = marginal_grid(field_, axis, marginal_points, span / marginal_points, float(grid.center[axis]))
        else:
            marg = _grid_marginal(grid, axis)
        d = float(kstest(y[:, axis], cell_cdf(marg)).statistic)
        rep.ks_distances.append(d)
        rep.add(f"KS marginal {axis + 1}", d, "<=", crit)

    if hist_block is None:
        b = _choose_block(grid.values, grid.cell_volume, count, l1_threshold / 4.0)
    else:
        b = int(hist_block)
        if b < 1 or N % b:
            raise ParameterError("hist_block must divide points_per_axis")
    model = _block_sum(grid.values, b) * grid.cell_volume
    nb = N // b
    flat = np.ravel_multi_index(tuple((idx[inside] // b).T), (nb,) * n)
    hist = np.bincount(flat, minlength=nb**n).reshape((nb,) * n) / count
    outside_model = max(0.0, 1.0 - float(np.sum(model)))
    l1 = float(np.sum(np.abs(hist - model)) + abs((1.0 - frac_in) - outside_model))
    rep.l1_error = l1
    rep.add("L1 histogram vs density", l1, "<=", l1_threshold)
    rep.metrics.update({"hist_block": b, "sample_fraction_in_window": frac_in, "ks_critical": crit})
    rep.notes.append(f"histogram bins: blocks of {b}^{n} grid cells")
    return rep


def sample_from_grid(grid: DensityGrid, count: int, seed: int = 0) -> EndpointSample:
    """Draws from the piecewise-constant law of the (clipped) grid values."""
    rng = np.random.default_rng(seed)
    p = np.clip(grid.values.ravel(), 0.0, None)
    cells = rng.choice(p.size, size=count, p=p / p.sum())
    idx = np.stack(np.unravel_index(cells, grid.values.shape), axis=-1)
    lo, _ = grid.window()
    vals = lo + (idx + rng.random(idx.shape)) * grid.spacing
    return EndpointSample(vals, grid.t, np.zeros(grid.dim), "grid", seed)


# -- scenarios -------------------------------------------------------------------


def _decay_summary(rep) -> dict:
    return {
        "decaying": bool(rep.decaying),
        "fitted_alpha": rep.fitted_alpha,
        "fitted_a_t": rep.fitted_a_t,
        "fitted_log_c": rep.fitted_log_c,
        "fit_residual": rep.fit_residual,
        "tail_exponent": rep.tail_exponent,
        "saturated": bool(rep.saturated),
    }


def _decay_criteria(report: ValidationReport, decay, cfg: ExperimentConfig) -> None:
    v = cfg.validate
    report.decay_summary = _decay_summary(decay)
    if v["expect_decaying"] is not None:
        report.add("decay classification", bool(decay.decaying), "==", v["expect_decaying"])
    if decay.decaying:
        report.add("decay fit log-scale RMS residual", decay.fit_residual, "<=", v["residual_threshold"])
        if v["expect_alpha"] is not None:
            report.add("fitted decay exponent error", abs(decay.fitted_alpha - v["expect_alpha"]), "<=", v["alpha_tolerance"])


def _rank_check(cfg, report, out_dir):
    rr = rank_condition(cfg.system)
    floor = gramian_floor(cfg.system, cfg.t)
    word = "satisfied" if rr.satisfied else "not satisfied"
    report.notes.append(f"rank {rr.rank}/{cfg.system.n}, {word}")
    report.notes.append(f"smallest Gramian eigenvalue at t={cfg.t:g}: {floor:.6g}")
    report.metrics.update({"rank": rr.rank, "n": cfg.system.n, "satisfied": rr.satisfied, "gramian_floor": floor})
    report.add("rank condition", rr.rank, "==", cfg.system.n)


def _hypothesis(cfg, report, out_dir):
    nu = cfg.triplet.nu
    if nu is None:
        raise ConfigError("triplet.measure", "the hypothesis scenario needs a jump measure")
    h = cfg.hypothesis
    C = h["C"]
    if C == "derived":
        if not isinstance(nu, IsotropicStable):
            raise ConfigError("hypothesis.C", "a derived constant exists only for a stable measure")
        if h["alpha"] != nu.alpha:
            raise ConfigError("hypothesis.alpha", "must equal the stable index when C is derived")
        C = 2.0 * nu.projected_constant / (2.0 - nu.alpha)
    try:
        res = hypothesis_check(nu, h["alpha"], C, h["r_grid"], h["dir_count"], cfg.sim.seed, h["c0"], h["k_norms"])
    except ParameterError as exc:
        raise ConfigError("hypothesis", str(exc)) from None
    report.notes.append(f"constant C = {C:.12g}, worst ratio {res.worst_ratio:.12g}")
    report.metrics.update({"C": C, "worst_ratio": res.worst_ratio, "satisfied": res.satisfied})
    report.add("small-ball moment ratio", res.worst_ratio, ">=", 1.0)
    if res.rescaled_worst_ratio is not None:
        report.metrics["rescaled_worst_ratio"] = res.rescaled_worst_ratio
        report.add("rescaled moment ratio", res.rescaled_worst_ratio, ">=", 1.0)
    if out_dir:
        report.files += io.write_hypothesis(out_dir, res)


def _charfn(cfg, report, out_dir):
    h = np.array(cfg.charfn["frequencies"], dtype=float)
    phi = np.atleast_1d(ou_exponent(cfg.system, cfg.triplet, cfg.t, h))
    cf = np.atleast_1d(ou_charfn(cfg.system, cfg.triplet, cfg.t, cfg.x, h))
    report.metrics["max_modulus"] = float(np.max(np.abs(cf)))
    report.add("modulus bound", float(np.max(np.abs(cf))), "<=", 1.0 + 1e-12)
    c = cfg.charfn
    radii = np.geomspace(1.0, c["r_max"], c["radius_count"])
    decay = decay_probe(cfg.system, cfg.triplet, cfg.t, c["ray_count"], radii, r_max=c["r_max"], seed=cfg.sim.seed)
    _decay_criteria(report, decay, cfg)
    report.notes.append(
        "decay fit: "
        + ("decaying" if decay.decaying else "not decaying")
        + f", alpha {decay.fitted_alpha:.6g}, a_t {decay.fitted_a_t:.6g}, residual {decay.fit_residual:.3g}"
    )
    if out_dir:
        report.files += io.write_charfn(out_dir, h, cf, phi)
        report.files += io.write_decay(out_dir, decay)
    return decay


def _density(cfg, report, out_dir, field_=None):
    field_ = field_ or ExponentField(cfg.system, cfg.triplet, cfg.t)
    grid = invert_density(cfg.system, cfg.triplet, cfg.t, cfg.grid, field_=field_)
    mass_err = abs(grid.mass() - 1.0)
    report.mass_check = mass_err
    report.metrics.update(
        {"mass": grid.mass(), "freq_radius": grid.freq_radius.tolist(), "truncation_error_bound": grid.truncation_error_bound}
    )
    report.add("grid mass deviation", mass_err, "<=", cfg.validate["mass_tolerance"])
    _decay_criteria(report, grid.decay, cfg)
    H = ", ".join(f"{v:.6g}" for v in grid.freq_radius)
    report.notes.append(f"frequency radius ({H}), truncation error bound {grid.truncation_error_bound:.3g}")
    if out_dir:
        shift = mat_exp(cfg.system.A, cfg.t) @ cfg.x
        shown = replace(grid, spec=replace(grid.spec, center=tuple(np.asarray(grid.spec.center) + shift)))
        report.files += io.write_density(out_dir, shown)
    return grid, field_


def _simulate(cfg, report, out_dir, threads):
    if cfg.sampler == "kolmogorov":
        if cfg.system != kolmogorov_system():
            raise ConfigError("sim.sampler", "the kolmogorov sampler needs the kolmogorov system")
        sample = kolmogorov_example(cfg.x, cfg.t, cfg.sim, cfg.triplet, threads=threads)
    elif cfg.sampler == "compound":
        try:
            tm = truncate_measure(cfg.triplet.nu, *cfg.jump_shell)
        except ParameterError as exc:
            raise ConfigError("sim.jump_shell", str(exc)) from None
        sample = sample_compound_convolution(cfg.system, tm, cfg.t, cfg.sim, x=cfg.x, threads=threads)
        ex = sample.extras
        report.metrics.update({k: float(v) for k, v in ex.items()})
        report.notes.append(
            f"zero-jump frequency {ex['zero_atom_frequency']:.6g}, exact {ex['zero_atom_expected']:.6g}"
        )
        report.add(
            "zero-jump frequency error (in standard errors)",
            abs(ex["zero_atom_frequency"] - ex["zero_atom_expected"]) / ex["zero_atom_stderr"],
            "<=",
            3.0,
        )
    else:
        sample = sample_path_endpoint(cfg.system, cfg.triplet, cfg.t, cfg.x, cfg.sim, threads=threads)
    report.metrics["sample_count"] = sample.count
    report.metrics["sample_mean"] = sample.values.mean(axis=0).tolist()
    if out_dir:
        report.files += io.write_samples(out_dir, sample)
    return sample


def _validate(cfg, report, out_dir, threads):
    grid, field_ = _density(cfg, report, out_dir)
    sample = _simulate(cfg, report, out_dir, threads)
    v = cfg.validate
    frag = compare_mc_density(
        sample,
        grid,
        field_,
        shift=mat_exp(cfg.system.A, cfg.t) @ cfg.x,
        ks_level=v["ks_level"],
        l1_threshold=v["l1_threshold"],
        hist_block=v["hist_block"],
        marginal_points=v["marginal_points"],
        window_factor=v["marginal_window_factor"],
    )
    report.absorb(frag)


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None, threads: int = 1) -> ValidationReport:
    """Run one scenario, write its files into ``out_dir`` and return the report.

    Refusals (rank condition, non-decaying characteristic function, coverage)
    propagate as the library's exceptions.
    """
    if out_dir is None and cfg.output is not None:
        out_dir = cfg.output
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    report = ValidationReport(cfg.scenario)
    start = time.perf_counter()
    sc = cfg.scenario
    if sc == "rank-check":
        _rank_check(cfg, report, out_dir)
    elif sc == "hypothesis":
        _hypothesis(cfg, report, out_dir)
    elif sc == "charfn":
        _charfn(cfg, report, out_dir)
    elif sc == "density":
        _density(cfg, report, out_dir)
    elif sc == "simulate":
        _simulate(cfg, report, out_dir, threads)
    else:
        _validate(cfg, report, out_dir, threads)
    elapsed = time.perf_counter() - start
    header = [
        f"scenario: {sc}",
        f"config digest: {cfg.digest()}",
        f"seed: {cfg.sim.seed}",
    ]
    if out_dir:
        summary = {**report.to_dict(), "config_digest": cfg.digest(), "seed": cfg.sim.seed, "config": cfg.to_dict()}
        path = os.path.join(out_dir, "summary.json")
        io.write_json(path, summary)
        report.files.append(path)
        rpath = os.path.join(out_dir, "report.txt")
        io.write_text(rpath, report.to_text(header + [f"elapsed seconds: {elapsed:.2f}"]))
        report.files.append(rpath)
    report.metrics["elapsed_seconds"] = elapsed
    return report


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    """The same configuration with ``sim.seed`` replaced."""
    if seed is None:
        return cfg
    raw = cfg.to_dict()
    raw["sim"]["seed"] = int(seed)
    return parse_config(raw)
