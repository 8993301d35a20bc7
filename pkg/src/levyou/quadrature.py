"""Gauss-Legendre building blocks used by the Gramian, exponent and
Levy-measure integrals."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(node_count: int):
    """Nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(int(node_count))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(a, b, panels: int, node_count: int):
    """Composite Gauss-Legendre rule on [a, b].

    ``a`` and ``b`` may be arrays of the same shape ``S``; the result then has
    shape ``S + (panels * node_count,)`` so every interval gets its own nodes.
    Degenerate intervals (a == b) get zero weights.
    """
    x, w = gauss_legendre(node_count)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    edges = np.linspace(0.0, 1.0, panels + 1)
    left = edges[:-1]
    width = 1.0 / panels
    # unit-interval nodes, shape (panels * node_count,)
    unit = (left[:, None] + 0.5 * width * (x[None, :] + 1.0)).ravel()
    unit_w = np.broadcast_to(0.5 * width * w, (panels, node_count)).ravel()
    span = (b - a)[..., None]
    nodes = a[..., None] + span * unit
    weights = span * unit_w
    return nodes, weights


def box_rule(lower, upper, panels: int, node_count: int):
    """Tensorised composite Gauss-Legendre rule on a box in R^d.

    Returns ``(points, weights)`` with ``points`` of shape ``(m, d)``.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    axes = [composite_rule(lo, hi, panels, node_count) for lo, hi in zip(lower, upper)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return points, weights


@lru_cache(maxsize=64)
def _graded_unit(panels: int, node_count: int, layers: int, ratio: float):
    x, w = gauss_legendre(node_count)
    inner = np.linspace(0.0, 1.0, panels + 1)
    first = inner[1]
    # geometric layers toward both ends of the first and last panel
    grade = first * ratio ** np.arange(layers, 0, -1)
    edges = np.concatenate([[0.0], grade, inner[1:-1], 1.0 - grade[::-1], [1.0]])
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    unit = (lo[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    unit_w = (half[:, None] * w[None, :]).ravel()
    unit.setflags(write=False)
    unit_w.setflags(write=False)
    return unit, unit_w


def graded_rule(a, b, panels: int, node_count: int, layers: int, ratio: float = 0.15):
    """Composite Gauss-Legendre rule refined geometrically toward both ends.

    Meant for integrands like |s - a|^p that are smooth inside [a, b] but
    not at the endpoints; the extra ``layers`` panels shrink by ``ratio``.
    Shapes follow :func:`composite_rule`.
    """
    unit, unit_w = _graded_unit(int(panels), int(node_count), int(layers), float(ratio))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    span = (b - a)[..., None]
    return a[..., None] + span * unit, span * unit_w
