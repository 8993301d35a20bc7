"""Densities of the OU law by discrete Fourier inversion.

The law mu_t of the stochastic convolution Y_t has the density

    p_t(y) = (2 pi)^{-n} int e^{-i<y, h>} mu_t^hat(h) dh,

truncated to the box [-H, H]^n and sampled with N points per axis.  With
frequency step 2H/N the spatial step is pi/H, and the sum is an FFT after
(-1)^k pre- and (-1)^j post-modulation (this centres both grids).

Also here: derivatives of p_t, the transition operator
P_t f(x) = E f(X_t^x) as a Riemann sum over the density grid, a modulus of
continuity probe for P_t f, and the density of a linear image of an
absolutely continuous law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .charfn import DEFAULT_QUAD, DecayReport, ExponentField, ExponentQuadConfig, decay_probe
from .errors import (
    ConditioningError,
    DimensionError,
    NonDecayingError,
    ParameterError,
    RankConditionError,
    UnsupportedError,
)
from .levy import LevyTriplet
from .linalg import OUSystem, mat_exp, numerical_rank, rank_condition
from .quadrature import box_rule

MAX_DIM = 3
TRUNCATION_LEVEL = 1e-7
MAX_DERIVATIVE_ORDER = 4
COVERAGE_TARGET = 0.999


@dataclass(frozen=True)
class GridSpec:
    """Frequency box and spatial grid for the inversion.

    ``freq_radius`` is H (scalar, or one value per axis).  When it is None
    H is taken from the decay fit so the fitted envelope drops below 1e-7;
    ``fallback_freq_radius`` is used instead if that fit is unreliable.
    """

    dim: int
    points_per_axis: int = 256
    freq_radius: float | Sequence[float] | None = None
    center: Sequence[float] | None = None
    fallback_freq_radius: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError("dim must be >= 1")
        N = int(self.points_per_axis)
        if N < 16 or N & (N - 1):
            raise ParameterError("points_per_axis must be a power of two >= 16")
        if self.freq_radius is not None:
            H = np.broadcast_to(np.asarray(self.freq_radius, dtype=float), (self.dim,))
            if not np.all(H > 0):
                raise ParameterError("freq_radius must be positive")
        c = np.zeros(self.dim) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.dim,):
            raise DimensionError(f"center must have length {self.dim}")
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        object.__setattr__(self, "points_per_axis", N)

    def radii(self, auto: float | None = None) -> np.ndarray:
        H = self.freq_radius if self.freq_radius is not None else auto
        if H is None:
            raise ParameterError("no frequency radius available")
        return np.broadcast_to(np.asarray(H, dtype=float), (self.dim,)).copy()


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Samples of p_t (or D^beta p_t) at y_j = center + (j - N/2) pi / H."""

    spec: GridSpec
    t: float
    values: np.ndarray
    beta: tuple
    truncation_error_bound: float
    freq_radius: np.ndarray
    spectrum: np.ndarray = field(repr=False)
    decay: DecayReport | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def spacing(self) -> np.ndarray:
        return math.pi / self.freq_radius

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.spec.center)

    def axes(self) -> list:
        N = self.spec.points_per_axis
        idx = np.arange(N) - N // 2
        return [c + idx * dy for c, dy in zip(self.center, self.spacing)]

    def freq_axes(self) -> list:
        N = self.spec.points_per_axis
        idx = np.arange(N) - N // 2
        return [idx * (2.0 * H / N) for H in self.freq_radius]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def window(self):
        """Lower and upper edges of the cells around the grid points."""
        lo = np.array([ax[0] for ax in self.axes()]) - 0.5 * self.spacing
        return lo, lo + self.spec.points_per_axis * self.spacing

    def mass(self) -> float:
        return float(np.sum(self.values) * self.cell_volume)

    def abs_integral(self) -> float:
        """Riemann sum of |values|; for beta != 0 this is int |D^beta p_t|."""
        return float(np.sum(np.abs(self.values)) * self.cell_volume)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def outside_mass_estimate(self) -> float:
        """Heuristic mass outside the window.

        Takes the marginal mass in the outer quarter of each half-axis and
        extrapolates a power tail with the fitted decay exponent (heavier
        tails give larger estimates).
        """
        if any(self.beta):
            raise ParameterError("coverage is defined for densities only")
        al = self.decay.fitted_alpha if self.decay is not None else 1.0
        al = min(max(al, 0.5), 2.0)
        N = self.spec.points_per_axis
        band = N // 8
        total = 0.0
        for axis in range(self.dim):
            other = tuple(i for i in range(self.dim) if i != axis)
            marg = np.sum(self.values, axis=other) * self.cell_volume if other else self.values * self.cell_volume
            edge = float(np.sum(np.clip(marg[:band], 0, None)) + np.sum(np.clip(marg[-band:], 0, None)))
            total += edge / ((4.0 / 3.0) ** al - 1.0)
        return total

    def coverage(self) -> float:
        return max(0.0, 1.0 - self.outside_mass_estimate())


def _fft_inverse(spectrum: np.ndarray, freq_radius: np.ndarray, center: np.ndarray) -> np.ndarray:
    n = spectrum.ndim
    N = spectrum.shape[0]
    idx = np.arange(N) - N // 2
    sign = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    work = spectrum.astype(complex, copy=True)
    for ax in range(n):
        h = idx * (2.0 * freq_radius[ax] / N)
        shape = [1] * n
        shape[ax] = N
        work = work * (sign * np.exp(-1j * h * center[ax])).reshape(shape)
    out = np.fft.fftn(work)
    for ax in range(n):
        shape = [1] * n
        shape[ax] = N
        out = out * sign.reshape(shape)
    scale = np.prod(2.0 * freq_radius / N) / (2.0 * math.pi) ** n
    # N/2 is even for N >= 4, so the centring leaves no global phase
    return (out * scale).real


def _check_inputs(sys: OUSystem, triplet: LevyTriplet, t: float, spec: GridSpec):
    if spec.dim != sys.n:
        raise DimensionError(f"grid dimension {spec.dim} does not match n = {sys.n}")
    if sys.n > MAX_DIM:
        raise UnsupportedError(f"full density grids are limited to n <= {MAX_DIM}")
    if not t > 0:
        raise ParameterError("t must be positive")
    if not rank_condition(sys).satisfied:
        raise RankConditionError(
            "density needs Rank[B, AB, ..., A^{n-1}B] = n; the law is concentrated on a proper subspace"
        )


def _decay_for(sys, triplet, t, cfg, decay):
    if decay is None:
        decay = decay_probe(sys, triplet, t, cfg=cfg)
    if not decay.decaying:
        raise NonDecayingError(
            "the characteristic function does not decay (finite Levy measure and no Gaussian part?); "
            f"tail exponent {decay.tail_exponent:.3g}, fitted alpha {decay.fitted_alpha:.3g}"
        )
    return decay


def _auto_radius(spec, decay):
    if spec.freq_radius is not None:
        return None
    if decay.fit_residual < 0.05:
        return decay.truncation_radius(TRUNCATION_LEVEL)
    if spec.fallback_freq_radius is None:
        raise ParameterError(
            f"decay fit is unreliable (residual {decay.fit_residual:.3g}); give freq_radius explicitly"
        )
    return spec.fallback_freq_radius


def sample_spectrum(field_: ExponentField, freq_axes: list, chunk: int = 1 << 18) -> np.ndarray:
    """mu_t^hat on the tensor grid of ``freq_axes``."""
    shape = tuple(len(a) for a in freq_axes)
    mesh = np.meshgrid(*freq_axes, indexing="ij")
    H = np.stack([m.ravel() for m in mesh], axis=-1)
    out = np.empty(H.shape[0], dtype=complex)
    for start in range(0, H.shape[0], chunk):
        out[start : start + chunk] = np.exp(-field_(H[start : start + chunk]))
    return out.reshape(shape)


def derivative_grid(
    sys: OUSystem,
    triplet: LevyTriplet,
    t: float,
    spec: GridSpec,
    beta: Sequence[int],
    cfg: ExponentQuadConfig = DEFAULT_QUAD,
    decay: DecayReport | None = None,
    field_: ExponentField | None = None,
) -> DensityGrid:
    """D^beta p_t on the grid, from the spectrum (-i h)^beta mu_t^hat(h)."""
    _check_inputs(sys, triplet, t, spec)
    beta = tuple(int(b) for b in beta)
    if len(beta) != sys.n or any(b < 0 for b in beta):
        raise ParameterError(f"beta must be a multi-index of length {sys.n}")
    if sum(beta) > MAX_DERIVATIVE_ORDER:
        raise ParameterError(f"|beta| must be <= {MAX_DERIVATIVE_ORDER}")
    decay = _decay_for(sys, triplet, t, cfg, decay)
    H = spec.radii(_auto_radius(spec, decay))
    if field_ is None:
        field_ = ExponentField(sys, triplet, t, cfg)
    N = spec.points_per_axis
    idx = np.arange(N) - N // 2
    freq_axes = [idx * (2.0 * Hi / N) for Hi in H]
    spectrum = sample_spectrum(field_, freq_axes)
    for ax, b in enumerate(beta):
        if b:
            shape = [1] * sys.n
            shape[ax] = N
            spectrum = spectrum * ((-1j * freq_axes[ax]) ** b).reshape(shape)
    values = _fft_inverse(spectrum, H, np.asarray(spec.center))
    values.setflags(write=False)
    bound = decay.tail_mass(float(np.min(H)), sys.n, power=sum(beta))
    return DensityGrid(
        spec=spec,
        t=float(t),
        values=values,
        beta=beta,
        truncation_error_bound=bound,
        freq_radius=H,
        spectrum=spectrum,
        decay=decay,
    )


def invert_density(
    sys: OUSystem,
    triplet: LevyTriplet,
    t: float,
    spec: GridSpec,
    cfg: ExponentQuadConfig = DEFAULT_QUAD,
    decay: DecayReport | None = None,
    field_: ExponentField | None = None,
) -> DensityGrid:
    """Density p_t of the law of Y_t on the grid described by ``spec``."""
    return derivative_grid(sys, triplet, t, spec, (0,) * spec.dim, cfg, decay, field_)


def marginal_grid(
    field_: ExponentField,
    axis: int,
    points: int,
    spacing: float,
    center: float = 0.0,
) -> DensityGrid:
    """Density of the ``axis`` coordinate of Y_t on a 1-d grid.

    Inverts h -> mu_t^hat(h e_axis); the frequency radius follows from the
    requested spacing, pi / spacing.
    """
    n = field_.sys.n
    if not 0 <= axis < n:
        raise DimensionError(f"axis must lie in [0, {n})")
    spec = GridSpec(1, points, math.pi / spacing, center=[center])
    H = spec.radii()
    idx = np.arange(points) - points // 2
    h = idx * (2.0 * H[0] / points)
    full = np.zeros((points, n))
    full[:, axis] = h
    spectrum = np.exp(-field_(full))
    values = _fft_inverse(spectrum, H, np.array([center]))
    values.setflags(write=False)
    return DensityGrid(
        spec=spec,
        t=field_.t,
        values=values,
        beta=(0,),
        truncation_error_bound=float("nan"),
        freq_radius=H,
        spectrum=spectrum,
    )


def cell_cdf(grid: DensityGrid):
    """Piecewise-linear CDF through the cumulative cell masses of a 1-d grid."""
    if grid.dim != 1:
        raise DimensionError("cell_cdf needs a 1-d grid")
    y = grid.axes()[0]
    dy = grid.spacing[0]
    edges = np.concatenate([[y[0] - 0.5 * dy], y + 0.5 * dy])
    cum = np.concatenate([[0.0], np.cumsum(np.clip(grid.values, 0.0, None)) * dy])
    cum /= cum[-1]

    def cdf(v):
        return np.interp(v, edges, cum, left=0.0, right=1.0)

    return cdf


def forward_transform(grid: DensityGrid, h) -> np.ndarray:
    """sum_j e^{i<h, y_j>} values_j dy^n at frequencies ``h`` (shape (m, n))."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    pts = grid.points()
    vals = grid.values.ravel()
    return np.exp(1j * (h @ pts.T)) @ vals * grid.cell_volume


# -- transition operator -------------------------------------------------------


def transition_apply(
    sys: OUSystem,
    triplet: LevyTriplet,
    t: float,
    x,
    f: Callable[[np.ndarray], np.ndarray],
    spec: GridSpec | None = None,
    cfg: ExponentQuadConfig = DEFAULT_QUAD,
    grid: DensityGrid | None = None,
    chunk: int = 1 << 22,
):
    """P_t f(x) = sum_j f(e^{tA} x + y_j) p_t(y_j) dy^n.

    ``f`` maps an (m, n) array of points to m values.  ``x`` may be a single
    point or an (k, n) array of starting points.
    """
    if grid is None:
        if spec is None:
            raise ParameterError("need a GridSpec or a DensityGrid")
        grid = invert_density(sys, triplet, t, spec, cfg)
    if any(grid.beta):
        raise ParameterError("transition_apply needs a density grid (beta = 0)")
    if grid.t != float(t):
        raise ParameterError(f"grid is for t = {grid.t}, not {t}")
    cov = grid.coverage()
    if cov < COVERAGE_TARGET:
        warnings.warn(f"density grid captures only about {cov:.5f} of the mass", RuntimeWarning, stacklevel=2)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != sys.n:
        raise DimensionError(f"x must have length {sys.n}")
    shift = X @ mat_exp(sys.A, t).T
    pts = grid.points()
    w = grid.values.ravel() * grid.cell_volume
    per = max(1, chunk // pts.shape[0])
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], per):
        s = shift[start : start + per]
        z = (s[:, None, :] + pts[None, :, :]).reshape(-1, sys.n)
        fz = np.asarray(f(z), dtype=float).reshape(s.shape[0], -1)
        out[start : start + per] = fz @ w
    return float(out[0]) if single else out


def _shifted_values(grid: DensityGrid, v: np.ndarray) -> np.ndarray:
    """Samples of p(. - v) on the grid points (trigonometric interpolation)."""
    phase = 1.0
    n = grid.dim
    N = grid.spec.points_per_axis
    for ax, h in enumerate(grid.freq_axes()):
        shape = [1] * n
        shape[ax] = N
        phase = phase * np.exp(-1j * h * v[ax]).reshape(shape)
    return _fft_inverse(grid.spectrum * phase, grid.freq_radius, grid.center)


@dataclass
class FellerTable:
    deltas: np.ndarray
    omega: np.ndarray
    shift_bound: np.ndarray
    values: np.ndarray  # P_t f at the probe points

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.omega <= self.shift_bound + 1e-12))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.omega) >= -1e-15))


def strong_feller_probe(
    sys: OUSystem,
    triplet: LevyTriplet,
    t: float,
    f: Callable[[np.ndarray], np.ndarray],
    x_grid,
    cfg: ExponentQuadConfig = DEFAULT_QUAD,
    deltas=None,
    spec: GridSpec | None = None,
    grid: DensityGrid | None = None,
) -> FellerTable:
    """Modulus of continuity of x -> P_t f(x) over the probe points.

    P_t f(x) is evaluated as sum_j f(z_j) p_t(z_j - e^{tA} x) dz^n on one
    fixed grid z_j, with the shifted density obtained spectrally.  Then for
    every pair the difference is bounded by ||f||_inf times the discrete L1
    distance of the two shifted densities, which is tabulated alongside.
    """
    if grid is None:
        if spec is None:
            raise ParameterError("need a GridSpec or a DensityGrid")
        grid = invert_density(sys, triplet, t, spec, cfg)
    X = np.atleast_2d(np.asarray(x_grid, dtype=float))
    if X.shape[1] != sys.n:
        raise DimensionError(f"probe points must have length {sys.n}")
    E = mat_exp(sys.A, t)
    shifts = X @ E.T
    z = grid.points()
    pts_center = np.mean(shifts, axis=0)
    z = z + pts_center  # keep the probe shifts near the window centre
    fz = np.asarray(f(z), dtype=float)
    if np.max(np.abs(fz)) > 1.0 + 1e-12:
        raise ParameterError("strong_feller_probe expects |f| <= 1")
    dens = np.stack([_shifted_values(grid, s - pts_center).ravel() for s in shifts])
    vol = grid.cell_volume
    values = dens @ fz * vol
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    diff = np.abs(values[:, None] - values[None, :])
    l1 = np.array([[np.sum(np.abs(a - b)) * vol for b in dens] for a in dens])
    if deltas is None:
        positive = np.unique(dist[dist > 0])
        deltas = np.concatenate([[0.0], positive])
    deltas = np.sort(np.asarray(deltas, dtype=float))
    omega = np.array([np.max(np.where(dist <= d + 1e-15, diff, 0.0)) for d in deltas])
    bound = np.array([np.max(np.where(dist <= d + 1e-15, l1, 0.0)) for d in deltas])
    return FellerTable(deltas=deltas, omega=omega, shift_bound=bound, values=values)


# -- linear images of densities ---------------------------------------------------


@dataclass(frozen=True)
class PushforwardConfig:
    lower: float = -8.0
    upper: float = 8.0
    panels: int = 64
    node_count: int = 16
    max_condition: float = 1e12


def complete_basis(L) -> np.ndarray:
    """Square S whose first q rows are L, completed by canonical vectors.

    At each step the canonical vector with the largest component orthogonal
    to the rows chosen so far is appended (ties go to the lowest index).
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    q, p = L.shape
    if q > p:
        raise DimensionError("L must have at least as many columns as rows")
    if numerical_rank(L) != q:
        raise ParameterError("L must have full row rank (onto)")
    rows = [r for r in L]
    basis, _ = np.linalg.qr(L.T)  # orthonormal basis of the row space
    basis = basis[:, :q]
    eye = np.eye(p)
    for _ in range(p - q):
        resid = eye - basis @ (basis.T @ eye)
        norms = np.linalg.norm(resid, axis=0)
        i = int(np.argmax(norms - 1e-12 * np.arange(p)))
        rows.append(eye[i])
        new = resid[:, i] / norms[i]
        basis = np.column_stack([basis, new])
    return np.array(rows)


def pushforward_density(
    L,
    h_density: Callable[[np.ndarray], np.ndarray],
    eval_points,
    cfg: PushforwardConfig = PushforwardConfig(),
) -> np.ndarray:
    """Density of L X at ``eval_points`` when X has density ``h_density`` on R^p.

    With S = [L; completion], the density is
    |det S|^{-1} int h(S^{-1}(y, w)) dw over the p - q completed coordinates,
    integrated by tensor Gauss-Legendre on [lower, upper]^{p-q}.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    q, p = L.shape
    S = complete_basis(L)
    if np.max(np.abs(S[:q] - L)) > 1e-10:
        raise ConditioningError("completion does not reproduce L")
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > cfg.max_condition:
        raise ConditioningError(f"completed matrix is ill-conditioned (cond = {cond:.3g})")
    S_inv = np.linalg.inv(S)
    jac = 1.0 / abs(np.linalg.det(S))
    Y = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if Y.shape[1] != q:
        Y = Y.reshape(-1, q)
    if p == q:
        return jac * np.asarray(h_density(Y @ S_inv.T), dtype=float)
    W, w = box_rule([cfg.lower] * (p - q), [cfg.upper] * (p - q), cfg.panels, cfg.node_count)
    out = np.empty(Y.shape[0])
    per = max(1, (1 << 21) // W.shape[0])
    for start in range(0, Y.shape[0], per):
        y = Y[start : start + per]
        full = np.concatenate(
            [np.repeat(y[:, None, :], W.shape[0], axis=1), np.broadcast_to(W, (y.shape[0],) + W.shape)], axis=-1
        )
        x = full.reshape(-1, p) @ S_inv.T
        out[start : start + per] = np.asarray(h_density(x), dtype=float).reshape(y.shape[0], -1) @ w
    return jac * out
