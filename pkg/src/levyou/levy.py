"""Levy triplets (Q, a, nu), the characteristic exponent psi, the
directional small-ball moment check, and truncation of nu to shells
{inner <= |z| <= outer} for compound Poisson simulation.

Levy measures are parametric.  Three families are provided:

* :class:`IsotropicStable` -- nu(dz) = K |z|^{-d-alpha} dz, with exponent
  psi(h) = c_alpha |h|^alpha;
* :class:`CompoundPoisson` -- a finite measure given by a density on a ball;
* :class:`SumOf` -- sums of the above.

The small-jump compensator uses the closed unit ball D = {|y| <= 1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import AccuracyError, DimensionError, ParameterError, SamplingError, UnsupportedError
from .quadrature import composite_rule

PSI_REL_TOL = 1e-8
MAX_REFINEMENTS = 12
MAX_REJECTION_ATTEMPTS = 10**6


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def stable_integral_factor(alpha: float, d: int) -> float:
    """int_{R^d} (1 - cos<e_1, z>) |z|^{-d-alpha} dz.

    Converts between the Levy density constant K and the exponent constant
    c_alpha = K * factor.  Smooth through alpha = 1.
    """
    return (
        math.pi ** (d / 2.0)
        * math.gamma(1.0 - alpha / 2.0)
        / (alpha * 2.0 ** (alpha - 1.0) * math.gamma((d + alpha) / 2.0))
    )


def sphere_directions(d: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vectors for directional checks.

    Low-discrepancy sets for d <= 3 (alternating signs, a rotated equispaced
    circle, a randomly rotated Fibonacci sphere); seeded Gaussian directions
    beyond that.
    """
    if count < 1:
        raise ParameterError("need at least one direction")
    rng = np.random.default_rng(seed)
    if d == 1:
        return np.where(np.arange(count) % 2 == 0, 1.0, -1.0)[:, None]
    if d == 2:
        theta = 2.0 * np.pi * (np.arange(count) + rng.uniform()) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if d == 3:
        golden = math.pi * (3.0 - math.sqrt(5.0))
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        rad = np.sqrt(1.0 - z * z)
        phi = golden * i
        pts = np.stack([rad * np.cos(phi), rad * np.sin(phi), z], axis=-1)
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q = q * np.sign(np.diag(r))
        return pts @ q.T
    v = rng.normal(size=(count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _one_minus_cis(phase):
    # 1 - e^{i phase} without cancellation for small phases
    return 2.0 * np.sin(0.5 * phase) ** 2 - 1j * np.sin(phase)


def _uniform_directions(size: int, d: int, rng) -> np.ndarray:
    if d == 1:
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)[:, None]
    v = rng.normal(size=(size, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class SmallJumpSplit(NamedTuple):
    """Levy-Ito split of a measure at radius ``eps``.

    ``big`` are compound Poisson pieces (exact), ``drift`` the deterministic
    correction per unit time coming from the compensator, ``small_cov`` the
    covariance per unit time of the discarded compensated small jumps.
    """

    big: list
    drift: np.ndarray
    small_cov: np.ndarray


class LevyMeasureSpec:
    """Common interface of the parametric Levy measure families."""

    dim: int

    # subclasses provide ``is_finite`` and ``total_mass``

    def psi_jump(self, u) -> np.ndarray:
        """Jump part -int (e^{i<u,y>} - 1 - i<u,y> 1_D(y)) nu(dy); u has shape (..., d)."""
        raise NotImplementedError

    def directional_moment(self, h, r: float) -> np.ndarray:
        """int_{|<z,h>| <= r} <z,h>^2 nu(dz) for directions h of shape (k, d)."""
        raise NotImplementedError

    def shell_mass(self, inner: float, outer: float) -> float:
        raise NotImplementedError

    def sample_shell(self, inner: float, outer: float, mass: float, size: int, rng) -> np.ndarray:
        raise NotImplementedError

    def split(self, eps: float) -> SmallJumpSplit:
        raise NotImplementedError

    def stable_components(self) -> list:
        return []


@dataclass(frozen=True)
class IsotropicStable(LevyMeasureSpec):
    """Rotation invariant alpha-stable measure with psi(h) = c_alpha |h|^alpha."""

    alpha: float
    c_alpha: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ParameterError(f"stable index must lie in (0, 2), got {self.alpha}")
        if not self.c_alpha > 0:
            raise ParameterError("c_alpha must be positive")
        if self.dim < 1:
            raise DimensionError("dimension must be >= 1")

    @classmethod
    def from_density_constant(cls, alpha: float, k: float, dim: int = 1) -> "IsotropicStable":
        """Build from nu(dz) = k |z|^{-dim-alpha} dz."""
        return cls(alpha=alpha, c_alpha=k * stable_integral_factor(alpha, dim), dim=dim)

    @property
    def density_constant(self) -> float:
        return self.c_alpha / stable_integral_factor(self.alpha, self.dim)

    @property
    def projected_constant(self) -> float:
        """K_1 such that <z, e> has one-dimensional Levy density K_1 |w|^{-1-alpha}."""
        return self.c_alpha / stable_integral_factor(self.alpha, 1)

    @property
    def is_finite(self) -> bool:
        return False

    @property
    def total_mass(self) -> float:
        return math.inf

    def psi_jump(self, u):
        u = np.asarray(u, dtype=float)
        return (self.c_alpha * np.linalg.norm(u, axis=-1) ** self.alpha).astype(complex)

    def directional_moment(self, h, r):
        h = np.atleast_2d(np.asarray(h, dtype=float))
        hn = np.linalg.norm(h, axis=-1)
        a = self.alpha
        return 2.0 * self.projected_constant * hn**a * r ** (2.0 - a) / (2.0 - a)

    def shell_mass(self, inner, outer):
        a = self.alpha
        outer_term = 0.0 if math.isinf(outer) else outer ** (-a)
        if inner <= 0:
            return math.inf
        return self.density_constant * sphere_area(self.dim) * (inner ** (-a) - outer_term) / a

    def sample_radius(self, inner, outer, size, rng):
        # inverse CDF of the radial density proportional to r^{-1-alpha} on [inner, outer]
        a = self.alpha
        lo = inner ** (-a)
        hi = 0.0 if math.isinf(outer) else outer ** (-a)
        u = rng.random(size)
        return (lo - u * (lo - hi)) ** (-1.0 / a)

    def sample_shell(self, inner, outer, mass, size, rng):
        r = self.sample_radius(inner, outer, size, rng)
        return r[:, None] * _uniform_directions(size, self.dim, rng)

    def split(self, eps):
        d = self.dim
        a = self.alpha
        big = [truncate_measure(self, eps, math.inf)]
        var = self.density_constant * sphere_area(d) / d * eps ** (2.0 - a) / (2.0 - a)
        return SmallJumpSplit(big, np.zeros(d), var * np.eye(d))

    def stable_components(self):
        return [self]


@dataclass(frozen=True, eq=False)
class CompoundPoisson(LevyMeasureSpec):
    """Finite Levy measure nu(dy) = density(y) dy supported in |y| <= support_radius.

    ``density`` maps an (m, d) array to m nonnegative values.  ``breakpoints``
    lists radii (or, for d = 1, coordinates) where the density jumps, so the
    quadrature panels can be aligned with them.  The declared ``total_mass``
    is checked against quadrature at construction.
    """

    density: Callable[[np.ndarray], np.ndarray]
    total_mass: float
    support_radius: float
    dim: int = 1
    breakpoints: Sequence[float] = ()
    node_count: int = 16
    label: str = "compound-poisson"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1 or self.dim > 3:
            raise UnsupportedError("compound Poisson measures are supported for d <= 3")
        if not self.total_mass > 0:
            raise ParameterError("total_mass must be positive")
        if not self.support_radius > 0:
            raise ParameterError("support_radius must be positive")
        got = self._adaptive(lambda pts: np.ones((len(pts), 1)), 0.0, self.support_radius, 1e-10, strict=False)[0]
        if abs(got - self.total_mass) > 1e-6 * max(1.0, self.total_mass):
            raise ParameterError(
                f"density integrates to {got:.10g}, declared total_mass is {self.total_mass:.10g}"
            )
        # mean of the jumps inside the unit ball, used by the compensator
        m_d = self._adaptive(lambda pts: pts, 0.0, min(1.0, self.support_radius), 1e-12, strict=False)
        self._cache["m_D"] = m_d

    @property
    def is_finite(self):
        return True

    @property
    def ball_mean(self) -> np.ndarray:
        """int_{|y| <= 1} y nu(dy)."""
        return self._cache["m_D"]

    # -- quadrature -------------------------------------------------------

    def _radial_breaks(self, inner, outer, extra=()):
        pts = {inner, outer}
        for b in list(self.breakpoints) + [1.0] + list(extra):
            b = abs(float(b))
            if inner < b < outer:
                pts.add(b)
        return np.array(sorted(pts))

    def rule(self, inner, outer, level, extra=()):
        """Nodes and density-weighted weights on the shell {inner <= |y| <= outer}."""
        key = (inner, outer, level, tuple(extra))
        if key in self._cache:
            return self._cache[key]
        breaks = self._radial_breaks(inner, outer, extra)
        panels = 2**level
        r, wr = composite_rule(breaks[:-1], breaks[1:], panels, self.node_count)
        r = r.ravel()
        wr = wr.ravel()
        d = self.dim
        if d == 1:
            pts = np.concatenate([r, -r])[:, None]
            w = np.concatenate([wr, wr])
        elif d == 2:
            m = 16 * panels
            theta = 2.0 * np.pi * np.arange(m) / m
            pts = (r[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], -1)[None]).reshape(-1, 2)
            w = np.repeat(wr * r * (2.0 * np.pi / m), m)
        else:
            c, wc = composite_rule(-1.0, 1.0, panels, self.node_count)
            m = 16 * panels
            phi = 2.0 * np.pi * np.arange(m) / m
            sin_t = np.sqrt(1.0 - c * c)
            dirs = np.stack(
                [
                    (sin_t[:, None] * np.cos(phi)[None]).ravel(),
                    (sin_t[:, None] * np.sin(phi)[None]).ravel(),
                    np.repeat(c, m),
                ],
                axis=-1,
            )
            wdir = np.repeat(wc, m) * (2.0 * np.pi / m)
            pts = (r[:, None, None] * dirs[None]).reshape(-1, 3)
            w = (wr[:, None] * r[:, None] ** 2 * wdir[None]).ravel()
        dens = np.asarray(self.density(pts), dtype=float).reshape(-1)
        if np.any(dens < 0):
            raise ParameterError("density must be nonnegative")
        out = (pts, w * dens)
        if len(self._cache) < 256:
            self._cache[key] = out
        return out

    def _adaptive(self, fn, inner, outer, rel_tol, extra=(), strict=True):
        prev = None
        for level in range(MAX_REFINEMENTS + 1):
            pts, w = self.rule(inner, outer, level, extra)
            val = np.einsum("m,m...->...", w, fn(pts))
            if prev is not None:
                err = np.max(np.abs(val - prev))
                if err <= rel_tol * max(np.max(np.abs(val)), 1e-300) or err == 0.0:
                    return val
            prev = val
            if pts.shape[0] > 2_000_000:
                break
        if strict:
            raise AccuracyError("Levy-measure quadrature did not converge", estimate=val, achieved=err)
        return val

    # -- interface ----------------------------------------------------------

    def psi_jump(self, u, rel_tol=PSI_REL_TOL):
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1, self.dim)
        if flat.shape[0] == 0:
            return np.zeros(u.shape[:-1], dtype=complex)
        # choose the level on a probe set dominated by the largest frequencies
        norms = np.linalg.norm(flat, axis=1)
        probe_idx = np.unique(np.concatenate([np.argsort(norms)[-64:], np.linspace(0, len(flat) - 1, 64).astype(int)]))
        probe = flat[probe_idx]
        level = self._psi_level(probe, rel_tol)
        pts, w = self.rule(0.0, self.support_radius, level)
        out = np.empty(flat.shape[0], dtype=complex)
        chunk = max(1, 4_000_000 // max(1, pts.shape[0]))
        m_d = self.ball_mean
        for start in range(0, flat.shape[0], chunk):
            uu = flat[start : start + chunk]
            phase = uu @ pts.T
            out[start : start + chunk] = _one_minus_cis(phase) @ w + 1j * (uu @ m_d)
        return out.reshape(u.shape[:-1])

    def _psi_level(self, probe, rel_tol):
        prev = None
        m_d = self.ball_mean
        for level in range(MAX_REFINEMENTS + 1):
            pts, w = self.rule(0.0, self.support_radius, level)
            val = _one_minus_cis(probe @ pts.T) @ w + 1j * (probe @ m_d)
            if prev is not None:
                err = np.abs(val - prev)
                if np.all(err <= rel_tol * np.abs(val) + 1e-15 * self.total_mass):
                    return level
            prev = val
        raise AccuracyError(
            "psi quadrature did not converge", estimate=val, achieved=float(np.max(err))
        )

    def directional_moment(self, h, r):
        h = np.atleast_2d(np.asarray(h, dtype=float))
        out = np.empty(h.shape[0])
        for i, hi in enumerate(h):
            hn = np.linalg.norm(hi)
            extra = (r / hn,) if self.dim == 1 and hn > 0 else ()

            def fn(pts, hi=hi):
                proj = pts @ hi
                return np.where(np.abs(proj) <= r, proj * proj, 0.0)

            out[i] = self._adaptive(fn, 0.0, self.support_radius, 1e-8, extra=extra, strict=False)
        return out

    def shell_mass(self, inner, outer):
        outer = min(outer, self.support_radius)
        if outer <= inner:
            return 0.0
        return float(self._adaptive(lambda pts: np.ones(len(pts)), inner, outer, 1e-12, strict=False))

    def density_bound(self, inner, outer):
        key = ("bound", inner, outer)
        if key not in self._cache:
            pts, _ = self.rule(inner, min(outer, self.support_radius), 3)
            self._cache[key] = 1.1 * float(np.max(np.asarray(self.density(pts), dtype=float)))
        return self._cache[key]

    def sample_shell(self, inner, outer, mass, size, rng):
        outer = min(outer, self.support_radius)
        bound = self.density_bound(inner, outer)
        d = self.dim
        out = np.empty((size, d))
        filled = 0
        attempts = 0
        while filled < size:
            need = size - filled
            batch = max(64, 2 * need)
            # uniform proposals in the ball of radius ``outer``
            r = outer * rng.random(batch) ** (1.0 / d)
            y = r[:, None] * _uniform_directions(batch, d, rng)
            keep = (r >= inner) & (rng.random(batch) * bound <= np.asarray(self.density(y), dtype=float))
            acc = y[keep][:need]
            out[filled : filled + len(acc)] = acc
            filled += len(acc)
            attempts += batch
            if attempts > MAX_REJECTION_ATTEMPTS * max(1, size) or (attempts > MAX_REJECTION_ATTEMPTS and filled == 0):
                raise SamplingError("rejection sampler exceeded its attempt budget")
        return out

    def split(self, eps):
        # finite measure: every jump is simulated, the compensator becomes a drift
        big = [truncate_measure(self, 0.0, self.support_radius)]
        return SmallJumpSplit(big, -self.ball_mean, np.zeros((self.dim, self.dim)))


@dataclass(frozen=True)
class SumOf(LevyMeasureSpec):
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ParameterError("SumOf needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise DimensionError(f"components have different dimensions {sorted(dims)}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def is_finite(self):
        return all(c.is_finite for c in self.components)

    @property
    def total_mass(self):
        return float(sum(c.total_mass for c in self.components))

    def psi_jump(self, u):
        return sum(c.psi_jump(u) for c in self.components)

    def directional_moment(self, h, r):
        return sum(c.directional_moment(h, r) for c in self.components)

    def shell_mass(self, inner, outer):
        return float(sum(c.shell_mass(inner, outer) for c in self.components))

    def sample_shell(self, inner, outer, mass, size, rng):
        masses = np.array([c.shell_mass(inner, outer) for c in self.components])
        which = rng.choice(len(masses), size=size, p=masses / masses.sum())
        out = np.empty((size, self.dim))
        for i, c in enumerate(self.components):
            sel = which == i
            if np.any(sel):
                out[sel] = c.sample_shell(inner, outer, masses[i], int(sel.sum()), rng)
        return out

    def split(self, eps):
        big, drift, cov = [], np.zeros(self.dim), np.zeros((self.dim, self.dim))
        for c in self.components:
            s = c.split(eps)
            big += s.big
            drift = drift + s.drift
            cov = cov + s.small_cov
        return SmallJumpSplit(big, drift, cov)

    def stable_components(self):
        return [s for c in self.components for s in c.stable_components()]


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    """Gaussian covariance Q (d x d), drift a, Levy measure nu (or None)."""

    Q: np.ndarray
    a: np.ndarray
    nu: LevyMeasureSpec | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float, ndmin=2)
        a = np.array(self.a, dtype=float, ndmin=1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got {Q.shape}")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12:
            raise ParameterError("Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-12:
            raise ParameterError("Q must be positive semidefinite")
        if a.shape != (Q.shape[0],):
            raise DimensionError(f"a must have length {Q.shape[0]}")
        if self.nu is not None and self.nu.dim != Q.shape[0]:
            raise DimensionError(f"Levy measure has dimension {self.nu.dim}, expected {Q.shape[0]}")
        Q.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    def stable_components(self):
        return [] if self.nu is None else self.nu.stable_components()


def gaussian_triplet(d: int = 1, Q=None, a=None) -> LevyTriplet:
    Q = np.eye(d) if Q is None else Q
    return LevyTriplet(Q=Q, a=np.zeros(d) if a is None else a)


def stable_triplet(alpha: float, c_alpha: float = 1.0, d: int = 1) -> LevyTriplet:
    return LevyTriplet(Q=np.zeros((d, d)), a=np.zeros(d), nu=IsotropicStable(alpha, c_alpha, d))


def psi(triplet: LevyTriplet, s) -> np.ndarray | complex:
    """Levy-Khintchine exponent; ``s`` of shape (d,) or (..., d)."""
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 1
    s = np.atleast_2d(s) if scalar else s
    if s.shape[-1] != triplet.d:
        raise DimensionError(f"argument has dimension {s.shape[-1]}, expected {triplet.d}")
    if not np.all(np.isfinite(s)):
        raise ParameterError("psi argument must be finite")
    quad = 0.5 * np.einsum("...i,ij,...j->...", s, triplet.Q, s)
    val = quad - 1j * (s @ triplet.a)
    if triplet.nu is not None:
        val = val + triplet.nu.psi_jump(s)
    return complex(val[0]) if scalar else val


# -- truncation --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TruncatedMeasure:
    """nu restricted to {inner_radius <= |z| <= outer_radius}, with total mass c_N.

    ``outer_radius`` may be infinite for stable measures (big-jump part).
    ``inner_radius`` may be 0 only for finite base measures.
    """

    base: LevyMeasureSpec
    inner_radius: float
    outer_radius: float
    mass: float

    @property
    def dim(self):
        return self.base.dim

    def sample(self, size: int, rng) -> np.ndarray:
        if size == 0:
            return np.empty((0, self.dim))
        return self.base.sample_shell(self.inner_radius, self.outer_radius, self.mass, size, rng)


def truncate_measure(nu: LevyMeasureSpec, inner_radius: float, outer_radius: float) -> TruncatedMeasure:
    if not inner_radius < outer_radius:
        raise ParameterError("inner radius must be smaller than outer radius")
    if inner_radius < 0 or (inner_radius == 0 and not nu.is_finite):
        raise ParameterError("inner radius must be positive for an infinite Levy measure")
    mass = nu.shell_mass(inner_radius, outer_radius)
    return TruncatedMeasure(nu, float(inner_radius), float(outer_radius), float(mass))


def sample_jump(tm: TruncatedMeasure, rng) -> np.ndarray:
    """One draw from nu_N / c_N."""
    return tm.sample(1, rng)[0]


# -- Hypothesis check ----------------------------------------------------------


class HypothesisRow(NamedTuple):
    direction: int
    r: float
    moment: float
    bound: float
    ratio: float


class HypothesisReport(NamedTuple):
    satisfied: bool
    worst_ratio: float
    rows: list
    directions: np.ndarray
    rescaled_satisfied: bool | None = None
    rescaled_worst_ratio: float | None = None
    rescaled_rows: list | None = None


def hypothesis_check(
    nu: LevyMeasureSpec,
    alpha: float,
    C: float,
    r_grid: Sequence[float],
    dir_count: int = 8,
    seed: int = 0,
    c0: float = 1.0,
    k_norms: Sequence[float] | None = None,
) -> HypothesisReport:
    """Check int_{|<z,h>| <= r} <z,h>^2 nu(dz) >= C r^{2-alpha} for unit h.

    Every (direction, r) pair contributes a row with ratio moment / bound;
    the check passes iff the worst ratio is >= 1.  When ``k_norms`` is given
    the equivalent rescaled statement
    int_{|<z,k>| <= 1} <z,k>^2 nu(dz) >= C |k|^alpha is also checked for
    |k| >= c0 along the same directions.
    """
    if not 0.0 < alpha < 2.0:
        raise ParameterError("alpha must lie in (0, 2)")
    if not C > 0:
        raise ParameterError("C must be positive")
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid <= 0) or np.any(np.diff(r_grid) >= 0):
        raise ParameterError("r_grid must be positive and strictly decreasing")
    dirs = sphere_directions(nu.dim, dir_count, seed)
    rows = []
    for r in r_grid:
        moments = nu.directional_moment(dirs, r)
        bound = C * r ** (2.0 - alpha)
        for i, m in enumerate(moments):
            rows.append(HypothesisRow(i, float(r), float(m), float(bound), float(m / bound)))
    worst = min(row.ratio for row in rows)
    report = HypothesisReport(worst >= 1.0, worst, rows, dirs)
    if k_norms is None:
        return report
    k_norms = np.asarray(k_norms, dtype=float)
    k_norms = k_norms[k_norms >= c0]
    rrows = []
    for kn in k_norms:
        # substitution h = k r with r = 1 / |k|
        moments = nu.directional_moment(dirs * kn, 1.0)
        bound = C * kn**alpha
        for i, m in enumerate(moments):
            rrows.append(HypothesisRow(i, float(kn), float(m), float(bound), float(m / bound)))
    rworst = min((row.ratio for row in rrows), default=math.inf)
    return report._replace(
        rescaled_satisfied=rworst >= 1.0, rescaled_worst_ratio=rworst, rescaled_rows=rrows
    )


def uniform_box_measure(lower, upper, rate: float = 1.0) -> CompoundPoisson:
    """One-dimensional compound Poisson measure with constant density on [lower, upper].

    Only d = 1: the density jumps at the interval ends, which the radial
    quadrature can align with; box indicators in d >= 2 cannot be integrated
    to the construction tolerance.
    """
    lower = float(np.ravel(lower)[0]) if np.ndim(lower) else float(lower)
    upper = float(np.ravel(upper)[0]) if np.ndim(upper) else float(upper)
    if np.size(lower) != 1 or not upper > lower:
        raise ParameterError("need lower < upper")
    level = rate / (upper - lower)

    def density(y):
        y = np.asarray(y, dtype=float)[..., 0]
        return np.where((y >= lower) & (y <= upper), level, 0.0)

    radius = max(abs(lower), abs(upper))
    return CompoundPoisson(density, rate, radius, dim=1, breakpoints=(lower, upper), label="uniform-box")


def gaussian_bump_measure(
    dim: int, scale: float = 0.5, rate: float = 1.0, center=None, radius_sigmas: float = 12.0
) -> CompoundPoisson:
    """Compound Poisson measure whose jumps are N(center, scale^2 I)."""
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    norm = rate / ((2.0 * math.pi * scale**2) ** (dim / 2.0))

    def density(y):
        y = np.asarray(y, dtype=float) - center
        return norm * np.exp(-0.5 * np.sum(y * y, axis=-1) / scale**2)

    radius = float(np.linalg.norm(center)) + radius_sigmas * scale
    return CompoundPoisson(density, rate, radius, dim=dim, label="gaussian")
