"""Dense real linear algebra for the system dX = A X dt + B dZ.

Matrix exponentials, the Kalman controllability matrix, controllability
Gramians and surjectivity checks for the maps
``(y_1, ..., y_m) -> sum_j e^{s_j A} B y_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, ParameterError
from .quadrature import composite_rule

DEFAULT_RANK_TOL = 1e-10
DEFAULT_GRAMIAN_NODES = 64


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Validate and copy ``value`` into a read-only 2-d float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OUSystem:
    """Drift matrix ``A`` (n x n) and noise matrix ``B`` (n x d).

    ``d`` may be smaller than ``n``; the Kolmogorov system has n=2, d=1.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.B.shape[1]

    def _key(self):
        return (self.A.shape, self.A.tobytes(), self.B.shape, self.B.tobytes())

    def __eq__(self, other):
        return isinstance(other, OUSystem) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}


def kolmogorov_system() -> OUSystem:
    """dX^1 = dZ, dX^2 = X^1 dt."""
    return OUSystem(A=[[0.0, 0.0], [1.0, 0.0]], B=[[1.0], [0.0]])


def mat_exp(M, s: float = 1.0) -> np.ndarray:
    """Return e^{sM}.

    Scaling and squaring with a Pade core (scipy's implementation of
    Higham's algorithm); no eigendecomposition, so defective matrices such
    as nilpotent drifts are handled exactly.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"mat_exp needs a square matrix, got shape {M.shape}")
    s = float(s)
    if not np.isfinite(s):
        raise ParameterError("s must be finite")
    if s == 0.0:
        return np.eye(M.shape[0])
    return scipy.linalg.expm(s * M)


def kalman_matrix(sys: OUSystem) -> np.ndarray:
    """The n x (n d) block matrix [B, AB, ..., A^{n-1} B]."""
    blocks = [sys.B]
    for _ in range(sys.n - 1):
        blocks.append(sys.A @ blocks[-1])
    return np.hstack(blocks)


def numerical_rank(M, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    sv = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


class RankResult(NamedTuple):
    rank: int
    satisfied: bool


def rank_condition(sys: OUSystem, tol: float = DEFAULT_RANK_TOL) -> RankResult:
    if tol <= 0:
        raise ParameterError("tol must be positive")
    r = numerical_rank(kalman_matrix(sys), tol)
    return RankResult(rank=r, satisfied=r == sys.n)


def gramian(sys: OUSystem, t: float, quad_nodes: int = DEFAULT_GRAMIAN_NODES) -> np.ndarray:
    """Controllability Gramian int_0^t e^{sA} B B* e^{sA*} ds.

    Plain ``quad_nodes``-point Gauss-Legendre on [0, t]; the integrand is
    entire, so this converges spectrally (and is exact for nilpotent A).
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    if quad_nodes < 2:
        raise ParameterError("quad_nodes must be at least 2")
    s, w = composite_rule(0.0, t, 1, quad_nodes)
    G = np.zeros((sys.n, sys.n))
    for si, wi in zip(s, w):
        EB = mat_exp(sys.A, si) @ sys.B
        G += wi * (EB @ EB.T)
    return 0.5 * (G + G.T)


def gramian_floor(sys: OUSystem, t: float, quad_nodes: int = DEFAULT_GRAMIAN_NODES) -> float:
    """Smallest eigenvalue of the Gramian: the constant C_t with
    int_0^t |B* e^{sA*} u|^2 ds >= C_t |u|^2."""
    return float(np.linalg.eigvalsh(gramian(sys, t, quad_nodes))[0])


def onto_check(sys: OUSystem, times: Sequence[float], tol: float = DEFAULT_RANK_TOL) -> bool:
    """Whether (y_1..y_m) -> sum_j e^{s_j A} B y_j maps onto R^n."""
    times = np.asarray(times, dtype=float).ravel()
    if times.size < 1:
        raise ParameterError("need at least one time")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ParameterError("times must be nonnegative and strictly increasing")
    L = np.hstack([mat_exp(sys.A, s) @ sys.B for s in times])
    return numerical_rank(L, tol) == sys.n


def symmetric_sqrt(Q) -> np.ndarray:
    """Symmetric PSD square root R with R R* = Q."""
    Q = np.asarray(Q, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (Q + Q.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


class ExpInterpolant:
    """Piecewise Chebyshev representation of s -> L e^{sM} R on [0, T].

    Used wherever e^{sA} is needed at many scattered times (quadrature nodes
    that differ per frequency, exact jump times).  Pieces are short enough
    that ||M|| * width <= 2, where ``degree`` coefficients reach round-off.
    """

    def __init__(self, M, T: float, left=None, right=None, degree: int = 22):
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        L = np.eye(n) if left is None else np.asarray(left, dtype=float)
        R = np.eye(n) if right is None else np.asarray(right, dtype=float)
        if not T > 0:
            raise ParameterError("interpolation horizon must be positive")
        self.T = float(T)
        norm = np.linalg.norm(M, 2)
        pieces = max(1, int(np.ceil(norm * self.T / 2.0)))
        self.width = self.T / pieces
        theta = np.pi * (np.arange(degree) + 0.5) / degree
        x = np.cos(theta)
        cosm = np.cos(np.outer(np.arange(degree), theta))
        step = mat_exp(M, self.width)
        base = np.eye(n)
        coeffs = []
        for _ in range(pieces):
            vals = np.stack([L @ base @ mat_exp(M, 0.5 * self.width * (xi + 1.0)) @ R for xi in x])
            C = (2.0 / degree) * np.einsum("kj,jrc->krc", cosm, vals)
            C[0] *= 0.5
            coeffs.append(C)
            base = base @ step
        self.coeffs = np.stack(coeffs)  # (pieces, degree, rows, cols)

    @property
    def shape(self):
        return self.coeffs.shape[2:]

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        pieces = self.coeffs.shape[0]
        idx = np.clip(np.floor(s / self.width).astype(np.int64), 0, pieces - 1)
        x = 2.0 * (s - idx * self.width) / self.width - 1.0
        return idx, x

    def __call__(self, s) -> np.ndarray:
        """Matrix values at times ``s`` (1-d array) -> (len(s), rows, cols)."""
        idx, x = self._locate(np.atleast_1d(s))
        C = self.coeffs[idx]  # (m, K, r, c)
        x = x[:, None, None]
        b1 = np.zeros(C.shape[:1] + C.shape[2:])
        b2 = np.zeros_like(b1)
        for k in range(C.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * x * b1 - b2 + C[:, k], b1
        return x * b1 - b2 + C[:, 0]

    def apply(self, s, vecs) -> np.ndarray:
        """Evaluate F(s_{hj}) v_h for per-row times.

        ``s`` has shape (H, m) and ``vecs`` shape (H, cols); returns
        (H, m, rows).
        """
        s = np.asarray(s, dtype=float)
        vecs = np.asarray(vecs, dtype=float)
        cc = np.einsum("pkrc,hc->phkr", self.coeffs, vecs)
        idx, x = self._locate(s)
        x = x[..., None]
        if cc.shape[0] == 1:
            # one piece: coefficients broadcast along the time axis
            coef = lambda k: cc[0, :, None, k]
        else:
            rows = np.arange(s.shape[0])[:, None]
            coef = lambda k: cc[idx, rows, k]
        b1 = np.zeros(s.shape + (cc.shape[-1],))
        b2 = np.zeros_like(b1)
        for k in range(cc.shape[2] - 1, 0, -1):
            b1, b2 = 2.0 * x * b1 - b2 + coef(k), b1
        return x * b1 - b2 + coef(0)


@lru_cache(maxsize=32)
def noise_propagator(sys: OUSystem, T: float) -> ExpInterpolant:
    """s -> B* e^{sA*} on [0, T] (shape d x n)."""
    return ExpInterpolant(sys.A.T, T, left=sys.B.T)


@lru_cache(maxsize=32)
def response_propagator(sys: OUSystem, T: float) -> ExpInterpolant:
    """s -> e^{sA} B on [0, T] (shape n x d)."""
    return ExpInterpolant(sys.A, T, right=sys.B)
