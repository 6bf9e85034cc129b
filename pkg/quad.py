"""
Radial Quadrature for spinboson-spectrum

This module provides the composite Gauss-Legendre rules used for every
one-dimensional radial integral of the library. Rules carry the surface
measure S_{d-1} r^{d-1} in their weights, panels are graded geometrically
toward the origin and toward both sides of declared breakpoints, and no
node ever sits on an endpoint so that integrands singular there can be
sampled. Adaptive integration bisects panels locally until their error
estimates meet the tolerance.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma

from config import (DEFAULT_ORDER, DEFAULT_PANELS, INTEGRAL_REL_TOL,
                    MAX_ADAPTIVE_NODES)
from errors import DomainError, NoConvergence, NonFiniteIntegrand

logger = logging.getLogger(__name__)

# 2^-511 is still a normal double, deeper grading underflows
MAX_GRADED_PANELS = 512

# Adaptive panels narrower than R 2^-200 sit on a genuine singularity
MAX_BISECTION_DEPTH = 200

RadialFunction = Callable[[np.ndarray], np.ndarray]


def sphere_area(d: int) -> float:
    """
    Surface area S_{d-1} of the unit sphere in R^d.

    Args:
        d: Spatial dimension (d >= 1)

    Returns:
        2 pi^(d/2) / Gamma(d/2), exact for d = 1, 2, 3
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    exact = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}
    if d in exact:
        return exact[d]
    return float(2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite radial rule on [0, radius] with the surface weight folded in."""

    nodes: np.ndarray
    weights: np.ndarray
    radius: float
    panels: int
    order: int
    dimension: int
    breakpoints: Tuple[float, ...] = field(default=())

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)


def _geometric_fractions(panels: int) -> np.ndarray:
    # [0, 2^-(P-1), ..., 1/2, 1]
    return np.concatenate(([0.0], 2.0 ** -np.arange(panels - 1, -1, -1, dtype=float)))


def _graded_edges(lo: float, hi: float, panels: int, both_ends: bool = False) -> np.ndarray:
    if not both_ends or panels < 2:
        return lo + (hi - lo) * _geometric_fractions(panels)
    left = (panels + 1) // 2
    mid = 0.5 * (lo + hi)
    rising = lo + (mid - lo) * _geometric_fractions(left)
    falling = hi - (hi - mid) * _geometric_fractions(panels - left)[::-1]
    return np.concatenate((rising, falling[1:]))


def panel_edges(R: float, panels: int, breakpoints: Sequence[float] = ()) -> Tuple[np.ndarray, Tuple[float, ...]]:
    """
    Edges of the graded panels on [0, R].

    Panels halve toward the origin and toward every breakpoint inside
    (0, R), from both sides. The outer end R is not graded.

    Returns:
        (increasing edges, breakpoints kept)
    """
    if R <= 0:
        raise DomainError(f"rule radius must be positive, got {R}")
    if panels < 1:
        raise DomainError("panels and order must be positive integers")
    if panels > MAX_GRADED_PANELS:
        raise DomainError(f"at most {MAX_GRADED_PANELS} graded panels are supported")

    kinks = tuple(sorted({float(b) for b in breakpoints if 0.0 < b < R}))
    segments = (0.0,) + kinks + (float(R),)
    edges = [np.array([0.0])]
    for lo, hi in zip(segments[:-1], segments[1:]):
        edges.append(_graded_edges(lo, hi, panels, both_ends=hi < R)[1:])
    return np.concatenate(edges), kinks


def build_rule(R: float, panels: int = DEFAULT_PANELS, order: int = DEFAULT_ORDER,
               d: int = 1, breakpoints: Sequence[float] = ()) -> QuadratureRule:
    """
    Build a composite Gauss-Legendre rule on [0, R].

    Each segment between consecutive breakpoints (the origin, any declared
    kink inside (0, R), and R) is split into `panels` panels. Widths halve
    toward the origin and toward both sides of every kink, where the
    integrands of the library peak.

    Args:
        R: Right end of the radial interval
        panels: Panels per segment
        order: Gauss-Legendre points per panel
        d: Spatial dimension, enters through S_{d-1} r^{d-1}
        breakpoints: Radii where the integrand has kinks

    Returns:
        QuadratureRule with increasing nodes strictly inside (0, R)
    """
    if order < 1:
        raise DomainError("panels and order must be positive integers")
    edges, kinks = panel_edges(R, panels, breakpoints)

    y, w = leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    r = (half * y + 0.5 * (a + b)).ravel()
    W = (half * w).ravel() * sphere_area(d) * r ** (d - 1)
    r.setflags(write=False)
    W.setflags(write=False)
    return QuadratureRule(nodes=r, weights=W, radius=float(R), panels=panels,
                          order=order, dimension=d, breakpoints=kinks)


def integrate(rule: QuadratureRule, f: RadialFunction) -> float:
    """
    Apply a rule to a vectorized radial integrand.

    Args:
        rule: Quadrature rule
        f: Callable mapping an array of radii to integrand values

    Returns:
        Sum of W_i f(r_i)
    """
    values = np.asarray(f(rule.nodes), dtype=float)
    if not np.all(np.isfinite(values)):
        bad = rule.nodes[~np.isfinite(values)]
        raise NonFiniteIntegrand(f"integrand is not finite at r = {bad[:3].tolist()}")
    return float(np.dot(rule.weights, values))


def _panel_sums(f: RadialFunction, a: np.ndarray, b: np.ndarray, y: np.ndarray,
                w: np.ndarray, d: int) -> np.ndarray:
    half = 0.5 * (b - a)
    r = half[:, None] * y + 0.5 * (a + b)[:, None]
    values = np.asarray(f(r.ravel()), dtype=float).reshape(r.shape)
    if not np.all(np.isfinite(values)):
        bad = r[~np.isfinite(values)]
        raise NonFiniteIntegrand(f"integrand is not finite at r = {bad[:3].tolist()}")
    return sphere_area(d) * half * ((values * r ** (d - 1)) @ w)


def integrate_adaptive(R: float, f: RadialFunction, rel_tol: float = INTEGRAL_REL_TOL,
                       d: int = 1, breakpoints: Sequence[float] = (),
                       order: int = DEFAULT_ORDER, panels: int = DEFAULT_PANELS,
                       max_nodes: int = MAX_ADAPTIVE_NODES) -> float:
    """
    Integrate by bisecting panels until the error estimate meets the tolerance.

    Every panel carries its Gauss-Legendre sum and the sum over its two
    halves; their difference is the panel's error estimate. Panels whose
    estimate exceeds an equal share of rel_tol * |total| are bisected, all
    others keep their values, so the estimate converges on every part of
    [0, R] and not only where the starting grid is fine. A non-finite sample
    during refinement means the panels have reached a genuine singularity and
    is reported as non-convergence.

    Args:
        R: Right end of the radial interval
        f: Vectorized radial integrand
        rel_tol: Relative tolerance of the summed error estimates
        d: Spatial dimension
        breakpoints: Kink radii of the integrand
        order: Gauss-Legendre order per panel
        panels: Starting panel count per segment
        max_nodes: Node cap before giving up

    Returns:
        Sum of the half-panel estimates
    """
    if order < 1:
        raise DomainError("panels and order must be positive integers")
    edges, _ = panel_edges(R, panels, breakpoints)
    y, w = leggauss(order)
    a, b = edges[:-1], edges[1:]
    whole = _panel_sums(f, a, b, y, w, d)
    min_width = R * 2.0 ** -MAX_BISECTION_DEPTH
    noise = 64.0 * np.finfo(float).eps

    try:
        mid = 0.5 * (a + b)
        left, right = _panel_sums(f, a, mid, y, w, d), _panel_sums(f, mid, b, y, w, d)
        while True:
            halves = left + right
            errors = np.abs(halves - whole)
            total = float(halves.sum())
            budget = rel_tol * abs(total)
            if errors.sum() <= budget:
                logger.debug("adaptive integral converged on %d panels: %r", a.size, total)
                return total
            flagged = errors > np.maximum(budget / errors.size, noise * np.abs(halves))
            if not flagged.any():
                logger.debug("adaptive integral limited by rounding on %d panels: %r", a.size, total)
                return total
            if (b - a)[flagged].min() <= min_width or 3 * (a.size + flagged.sum()) * order > max_nodes:
                raise NoConvergence(
                    f"no agreement to {rel_tol:g} before {max_nodes} nodes; last estimate {total!r}")

            mid = 0.5 * (a + b)
            keep = ~flagged
            new_a = np.concatenate((a[flagged], mid[flagged]))
            new_b = np.concatenate((mid[flagged], b[flagged]))
            new_whole = np.concatenate((left[flagged], right[flagged]))
            new_mid = 0.5 * (new_a + new_b)
            new_left = _panel_sums(f, new_a, new_mid, y, w, d)
            new_right = _panel_sums(f, new_mid, new_b, y, w, d)

            a = np.concatenate((a[keep], new_a))
            b = np.concatenate((b[keep], new_b))
            whole = np.concatenate((whole[keep], new_whole))
            left = np.concatenate((left[keep], new_left))
            right = np.concatenate((right[keep], new_right))
    except NonFiniteIntegrand as exc:
        raise NoConvergence(f"integrand singular under refinement: {exc}") from exc
