"""Adaptive nested Gauss-Legendre quadrature.

Each panel is integrated with an ``n``-point and a ``2n``-point Gauss-Legendre
rule; the difference is the panel's error estimate.  The panel with the largest
estimate is bisected until the summed estimate meets the tolerance.

The accepted partition is returned so that nearby integrals (finite-difference
stencils) can be evaluated on the *same* panels.  That keeps the quadrature
error a smooth function of the parameters, which matters once it gets divided
by ``h**2``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 400
    z_trunc_sigmas: float = 8.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.z_trunc_sigmas < 4:
            raise ValueError("z_trunc_sigmas must be >= 4")


class QuadratureError(RuntimeError):
    """Adaptive refinement ran out of subdivisions before meeting the tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass
class QuadResult:
    value: float
    error: float
    partition: np.ndarray = field(repr=False)

    @property
    def n_panels(self) -> int:
        return len(self.partition) - 1


@lru_cache(maxsize=None)
def gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_sums(f, lo, hi, n):
    """Integrate ``f`` over many panels at once with the n-point rule."""
    x, w = gl_rule(n)
    lo = np.asarray(lo, dtype=float)
    width = np.asarray(hi, dtype=float) - lo
    nodes = lo[:, None] + width[:, None] * x[None, :]
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return (vals * w[None, :]).sum(axis=1) * width


def fixed_gauss_legendre(f, partition, order: int = 20) -> float:
    """Integrate over a given partition with the ``order``-point rule on each panel."""
    p = np.asarray(partition, dtype=float)
    return float(_panel_sums(f, p[:-1], p[1:], order).sum())


def adaptive_gauss_legendre(
    f,
    a: float,
    b: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-12,
    max_subdivisions: int = 400,
    order: int = 10,
    breakpoints=None,
) -> QuadResult:
    """Integrate a vectorised ``f`` over ``[a, b]``.

    ``breakpoints`` seeds the initial partition.  The reported value is the
    ``2 * order`` rule on every accepted panel; the returned partition is what
    :func:`fixed_gauss_legendre` needs (with ``order=2*order``) to reproduce it.
    """
    if b == a:
        return QuadResult(0.0, 0.0, np.array([a, b]))
    if b < a:
        raise ValueError("integration limits must satisfy a <= b")
    edges = np.unique(np.clip(np.concatenate([[a, b], np.asarray(breakpoints if breakpoints is not None else [], float)]), a, b))

    coarse = _panel_sums(f, edges[:-1], edges[1:], order)
    fine = _panel_sums(f, edges[:-1], edges[1:], 2 * order)
    heap = [(-abs(fi - co), lo, hi, fi) for co, fi, lo, hi in zip(coarse, fine, edges[:-1], edges[1:])]
    heapq.heapify(heap)
    total = float(np.sum(fine))
    err = float(np.sum(np.abs(fine - coarse)))

    while err > max(abs_tol, rel_tol * abs(total)):
        if len(heap) >= max_subdivisions:
            raise QuadratureError(
                f"no convergence in {max_subdivisions} panels (estimate {total:.6g}, error {err:.2e})",
                total,
                err,
            )
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        lows = np.array([lo, mid])
        highs = np.array([mid, hi])
        co = _panel_sums(f, lows, highs, order)
        fi = _panel_sums(f, lows, highs, 2 * order)
        total += float(fi.sum()) - val
        err += float(np.abs(fi - co).sum()) + neg_e
        for k in range(2):
            heapq.heappush(heap, (-abs(fi[k] - co[k]), lows[k], highs[k], fi[k]))

    # re-sum from panels to shed accumulated rounding in the running total
    vals = sorted((lo, val) for _, lo, _, val in heap)
    total = float(np.sum([v for _, v in vals]))
    partition = np.array(sorted([lo for _, lo, _, _ in heap]) + [b])
    return QuadResult(total, max(err, 0.0), partition)
