"""Monte Carlo sampling of X_t^x = e^{tA} x + int_0^t e^{(t-s)A} B dZ_s.

Z is built from its Levy-Ito pieces: drift, a Brownian part with
covariance Q, jumps larger than a cutoff eps (a compound Poisson process
sampled at exact times) and a treatment of the jumps below eps.  Every
piece is propagated to time t with exact exponentials of A.

Random numbers come from counter-based Philox streams keyed by
(seed, stream tag, block index), so a block's draws do not depend on how
blocks are scheduled over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .errors import ParameterError, SamplingError, UnsupportedError
from .levy import IsotropicStable, LevyTriplet, SumOf, TruncatedMeasure
from .linalg import OUSystem, mat_exp, response_propagator, symmetric_sqrt
from .quadrature import composite_rule

SMALL_JUMP_MODES = ("compensate-drift", "gaussian-substitute")
STABLE_SCHEMES = ("levy-ito", "increments")
BLOCK_SIZE = 4096
MAX_JUMPS_PER_SAMPLE = 1e5

# stream tags; distinct tags give independent streams
_GAUSS, _STABLE, _JUMPS, _MARKS, _CONV = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class SimConfig:
    step_count: int = 200
    small_jump_cutoff: float = 0.1
    small_jump_mode: str = "compensate-drift"
    sample_count: int = 10_000
    seed: int = 0
    stable_scheme: str = "levy-ito"

    def __post_init__(self):
        if self.step_count < 1:
            raise ParameterError("step_count must be >= 1")
        if not 0 < self.small_jump_cutoff <= 1:
            raise ParameterError("small_jump_cutoff must lie in (0, 1]")
        if self.small_jump_mode not in SMALL_JUMP_MODES:
            raise ParameterError(f"small_jump_mode must be one of {SMALL_JUMP_MODES}")
        if self.stable_scheme not in STABLE_SCHEMES:
            raise ParameterError(f"stable_scheme must be one of {STABLE_SCHEMES}")
        if self.sample_count < 1:
            raise ParameterError("sample_count must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class EndpointSample:
    values: np.ndarray
    t: float
    x: np.ndarray
    scheme: str
    seed: int = 0
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SamplingError("non-finite sample values")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Generator for one (seed, stream, block) counter key."""
    ss = np.random.SeedSequence([int(seed), int(stream), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def _resolve_seed(cfg: SimConfig, rng) -> int:
    if rng is None:
        return cfg.seed
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(rng.integers(0, 2**63))


def _blocks(count: int):
    return [(b, min(BLOCK_SIZE, count - b * BLOCK_SIZE)) for b in range(math.ceil(count / BLOCK_SIZE))]


def _run_blocks(fn, count: int, threads: int):
    blocks = _blocks(count)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda bm: fn(*bm), blocks))
    else:
        parts = [fn(b, m) for b, m in blocks]
    return parts


# -- stable increments -----------------------------------------------------------


def sample_stable_increment(alpha: float, scale: float, dt: float, rng, size=None):
    """Symmetric alpha-stable increment with characteristic function
    exp(-dt * scale * |h|^alpha) (Chambers-Mallows-Stuck)."""
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    if alpha == 1:
        raise UnsupportedError("alpha = 1 is not supported by the stable sampler")
    if not (scale > 0 and dt > 0):
        raise ParameterError("scale and dt must be positive")
    V = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    W = rng.standard_exponential(size=size)
    X = (
        np.sin(alpha * V)
        / np.cos(V) ** (1.0 / alpha)
        * (np.cos(V - alpha * V) / W) ** ((1.0 - alpha) / alpha)
    )
    return (dt * scale) ** (1.0 / alpha) * X


# -- building blocks -----------------------------------------------------------


def integrated_exp(A, t: float) -> np.ndarray:
    """int_0^t e^{uA} du, from the exponential of [[A, I], [0, 0]]."""
    n = A.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = A
    big[:n, n:] = np.eye(n)
    return scipy.linalg.expm(t * big)[:n, n:]


def step_covariance(sys: OUSystem, Q, dt: float, nodes: int = 32) -> np.ndarray:
    """int_0^dt e^{uA} B Q B* e^{uA*} du."""
    s, w = composite_rule(0.0, dt, 1, nodes)
    S = np.zeros((sys.n, sys.n))
    for si, wi in zip(s, w):
        EB = mat_exp(sys.A, si) @ sys.B
        S += wi * EB @ Q @ EB.T
    return 0.5 * (S + S.T)


def _stable_parts(nu):
    if nu is None:
        return [], None
    if isinstance(nu, IsotropicStable):
        return [nu], None
    if isinstance(nu, SumOf):
        stable = [c for c in nu.components if isinstance(c, IsotropicStable)]
        rest = [c for c in nu.components if not isinstance(c, IsotropicStable)]
        if not rest:
            return stable, None
        return stable, rest[0] if len(rest) == 1 else SumOf(tuple(rest))
    return [], nu


@dataclass
class _Plan:
    """Everything a block needs, prepared once per call."""

    E_step: np.ndarray
    gauss_factor: np.ndarray | None
    drift_term: np.ndarray
    big: list
    increments: list  # (alpha, c_alpha) handled by CMS increments
    E_half_B: np.ndarray


def _plan(sys: OUSystem, triplet: LevyTriplet, t: float, cfg: SimConfig) -> _Plan:
    if triplet.d != sys.d:
        raise ParameterError("triplet dimension must match B")
    eps = cfg.small_jump_cutoff
    dt = t / cfg.step_count
    Q = np.array(triplet.Q, dtype=float)
    drift = np.array(triplet.a, dtype=float)
    big: list[TruncatedMeasure] = []
    increments = []
    stable, rest = _stable_parts(triplet.nu)
    if cfg.stable_scheme == "increments" and stable:
        if sys.d != 1:
            raise UnsupportedError("stable increments are implemented for scalar noise only")
        increments = [(s.alpha, s.c_alpha) for s in stable]
        for a_, _ in increments:
            if a_ == 1:
                raise UnsupportedError("alpha = 1 is not supported by the stable sampler")
        stable = []
    parts = list(stable) + ([rest] if rest is not None else [])
    for comp in parts:
        split = comp.split(eps)
        big += [tm for tm in split.big if tm.mass > 0]
        drift = drift + split.drift
        if cfg.small_jump_mode == "gaussian-substitute":
            Q = Q + split.small_cov
    rate = sum(tm.mass for tm in big) * t
    if rate > MAX_JUMPS_PER_SAMPLE:
        raise ParameterError(
            f"cutoff {eps} gives {rate:.3g} expected jumps per path; raise small_jump_cutoff"
        )
    G = step_covariance(sys, Q, dt) if np.any(Q) else None
    return _Plan(
        E_step=mat_exp(sys.A, dt),
        gauss_factor=None if G is None else symmetric_sqrt(G),
        drift_term=integrated_exp(sys.A, t) @ sys.B @ drift,
        big=big,
        increments=increments,
        E_half_B=mat_exp(sys.A, 0.5 * dt) @ sys.B,
    )


def _jump_contribution(sys, t, tm: TruncatedMeasure, m: int, rng_times, rng_marks) -> np.ndarray:
    """sum over jumps tau_i <= t of e^{(t - tau_i)A} B U_i for m paths."""
    counts = rng_times.poisson(tm.mass * t, size=m)
    total = int(counts.sum())
    out = np.zeros((m, sys.n))
    if total == 0:
        return out
    lag = rng_times.uniform(0.0, t, size=total)  # t - tau is uniform as well
    marks = tm.sample(total, rng_marks)
    prop = response_propagator(sys, float(t))
    vec = np.einsum("knd,kd->kn", prop(lag), marks)
    owner = np.repeat(np.arange(m), counts)
    for i in range(sys.n):
        out[:, i] = np.bincount(owner, weights=vec[:, i], minlength=m)
    return out


def sample_path_endpoint(
    sys: OUSystem,
    triplet: LevyTriplet,
    t: float,
    x,
    cfg: SimConfig = SimConfig(),
    rng=None,
    threads: int = 1,
) -> EndpointSample:
    """Draw ``cfg.sample_count`` copies of X_t^x.

    The Brownian part runs on the uniform grid with exact step
    covariances, jumps above the cutoff enter at their exact times, and the
    drift (including the compensator of the truncated jumps) is integrated
    exactly.  Jumps below the cutoff are either dropped after compensating
    their mean or replaced by a Brownian motion with the same covariance.
    With ``stable_scheme="increments"`` stable components of scalar noise are
    instead sampled as grid increments and propagated from step midpoints.
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ParameterError(f"x must have length {sys.n}")
    seed = _resolve_seed(cfg, rng)
    plan = _plan(sys, triplet, float(t), cfg)
    base = mat_exp(sys.A, t) @ x + plan.drift_term
    dt = t / cfg.step_count

    def block(b, m):
        Y = np.zeros((m, sys.n))
        if plan.gauss_factor is not None or plan.increments:
            g_rng = block_rng(seed, _GAUSS, b)
            s_rng = block_rng(seed, _STABLE, b)
            for _ in range(cfg.step_count):
                Y = Y @ plan.E_step.T
                if plan.gauss_factor is not None:
                    Y += g_rng.standard_normal((m, sys.n)) @ plan.gauss_factor.T
                for alpha, c in plan.increments:
                    dZ = sample_stable_increment(alpha, c, dt, s_rng, size=m)
                    Y += dZ[:, None] * plan.E_half_B[:, 0][None, :]
        for j, tm in enumerate(plan.big):
            Y += _jump_contribution(
                sys, t, tm, m, block_rng(seed, _JUMPS + 16 * j, b), block_rng(seed, _MARKS + 16 * j, b)
            )
        return Y + base

    values = np.concatenate(_run_blocks(block, cfg.sample_count, threads))
    scheme = cfg.stable_scheme if plan.increments else f"levy-ito/{cfg.small_jump_mode}"
    return EndpointSample(values, float(t), x, scheme, seed, cfg.to_dict())


def sample_compound_convolution(
    sys: OUSystem,
    tm: TruncatedMeasure,
    t: float,
    cfg: SimConfig = SimConfig(),
    rng=None,
    x=None,
    threads: int = 1,
) -> EndpointSample:
    """Exact samples of e^{tA} x + sum_k e^{(xi_1 + ... + xi_k)A} B U_k.

    The xi are exponential gaps with rate c_N = tm.mass, the sum runs over
    the k with xi_1 + ... + xi_k <= t, and the marks U_k have law
    nu_N / c_N.  ``extras`` holds the empirical frequency of paths with no
    jump next to its exact value e^{-c_N t}.
    """
    if not tm.mass > 0:
        raise ParameterError("truncated measure must have positive mass")
    if not t > 0:
        raise ParameterError("t must be positive")
    x = np.zeros(sys.n) if x is None else np.asarray(x, dtype=float)
    seed = _resolve_seed(cfg, rng)
    prop = response_propagator(sys, float(t))
    rate = tm.mass

    def block(b, m):
        gaps = block_rng(seed, _CONV, b)
        marks_rng = block_rng(seed, _MARKS, b)
        Y = np.zeros((m, sys.n))
        clock = np.zeros(m)
        active = np.arange(m)
        no_jump = np.zeros(m, dtype=bool)
        first = True
        while active.size:
            clock[active] += gaps.exponential(1.0 / rate, size=active.size)
            alive = clock[active] <= t
            if first:
                no_jump[active[~alive]] = True
                first = False
            active = active[alive]
            if not active.size:
                break
            U = tm.sample(active.size, marks_rng)
            Y[active] += np.einsum("knd,kd->kn", prop(clock[active]), U)
        return Y, no_jump

    parts = _run_blocks(block, cfg.sample_count, threads)
    Y = np.concatenate([p[0] for p in parts])
    zero = np.concatenate([p[1] for p in parts])
    values = Y + mat_exp(sys.A, t) @ x
    freq = float(zero.mean())
    extras = {
        "zero_atom_frequency": freq,
        "zero_atom_expected": math.exp(-rate * t),
        "zero_atom_stderr": math.sqrt(math.exp(-rate * t) * (1 - math.exp(-rate * t)) / values.shape[0]),
    }
    return EndpointSample(values, float(t), x, "compound-convolution", seed, cfg.to_dict(), extras)


def kolmogorov_example(
    x0,
    t: float,
    cfg: SimConfig = SimConfig(),
    triplet: LevyTriplet | None = None,
    rng=None,
    threads: int = 1,
) -> EndpointSample:
    """Pathwise (Z_t, int_0^t Z_s ds) for scalar Z, shifted by the start.

    Returns X^1 = x0^1 + Z_t and X^2 = x0^1 t + int_0^t Z_s ds + x0^2.  The
    time integral is accumulated by the trapezoid rule on the grid for the
    continuous part (plus the exact Brownian-bridge area correction) and
    exactly, as U (t - tau), for each jump.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,):
        raise ParameterError("x0 must have length 2")
    if triplet is None:
        from .levy import gaussian_triplet

        triplet = gaussian_triplet(1)
    if triplet.d != 1:
        raise ParameterError("the Kolmogorov example is driven by scalar noise")
    if not t > 0:
        raise ParameterError("t must be positive")
    seed = _resolve_seed(cfg, rng)
    scalar = OUSystem([[0.0]], [[1.0]])
    plan = _plan(scalar, triplet, float(t), cfg)
    n_steps = cfg.step_count
    dt = t / n_steps
    a = float(plan.drift_term[0]) / t  # effective drift of Z
    q = float(plan.gauss_factor[0, 0] ** 2 / dt) if plan.gauss_factor is not None else 0.0

    def block(b, m):
        Z = np.zeros(m)
        area = np.zeros(m)
        if q > 0 or plan.increments:
            g_rng = block_rng(seed, _GAUSS, b)
            s_rng = block_rng(seed, _STABLE, b)
            for _ in range(n_steps):
                dZ = np.zeros(m)
                bridge = 0.0
                if q > 0:
                    dZ += math.sqrt(q * dt) * g_rng.standard_normal(m)
                    # area of the Brownian bridge over one step: N(0, q dt^3 / 12)
                    bridge = math.sqrt(q * dt**3 / 12.0) * g_rng.standard_normal(m)
                for alpha, c in plan.increments:
                    dZ += sample_stable_increment(alpha, c, dt, s_rng, size=m)
                area += dt * (Z + 0.5 * dZ) + bridge
                Z += dZ
        for j, tm in enumerate(plan.big):
            t_rng = block_rng(seed, _JUMPS + 16 * j, b)
            counts = t_rng.poisson(tm.mass * t, size=m)
            total = int(counts.sum())
            if total:
                lag = t_rng.uniform(0.0, t, size=total)
                U = tm.sample(total, block_rng(seed, _MARKS + 16 * j, b))[:, 0]
                owner = np.repeat(np.arange(m), counts)
                Z += np.bincount(owner, weights=U, minlength=m)
                area += np.bincount(owner, weights=U * lag, minlength=m)
        Z += a * t
        area += 0.5 * a * t * t
        return np.stack([x0[0] + Z, x0[0] * t + area + x0[1]], axis=1)

    values = np.concatenate(_run_blocks(block, cfg.sample_count, threads))
    return EndpointSample(values, float(t), x0, "kolmogorov-pathwise", seed, cfg.to_dict())


# -- estimates -------------------------------------------------------------------


class MCEstimate(NamedTuple):
    mean: float
    stderr: float


def mc_estimate(samples: EndpointSample, f: Callable[[np.ndarray], np.ndarray]) -> MCEstimate:
    """Sample mean and standard error of f over the endpoint draws."""
    if samples.count == 0:
        raise ParameterError("empty sample")
    vals = np.asarray(f(samples.values), dtype=float).reshape(-1)
    if vals.size == 1:
        return MCEstimate(float(vals[0]), 0.0)
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))


def empirical_charfn(values: np.ndarray, h) -> tuple[np.ndarray, np.ndarray]:
    """Empirical characteristic function at frequencies h (shape (k, n)) and
    the CLT standard error of its real and imaginary parts (combined)."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    phase = values @ h.T
    c, s = np.cos(phase), np.sin(phase)
    m = values.shape[0]
    cf = c.mean(axis=0) + 1j * s.mean(axis=0)
    se = np.sqrt((c.var(axis=0, ddof=1) + s.var(axis=0, ddof=1)) / m)
    return cf, se
