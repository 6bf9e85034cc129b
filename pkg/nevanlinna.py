"""
Nevanlinna Functions for spinboson-spectrum

This module provides the scalar functions

    Phi^(sigma)_alpha(z) = -sigma*eps - z - alpha^2 * int |lambda|^2 / (omega + sigma*eps - z)

defined for z < m + sigma*eps, their unique zeros E_{sigma eps}(alpha), the
bottom of the essential spectrum and the weak-coupling asymptotics of the
ground-state branch.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from config import (BOUNDARY_GAP, INTEGRAL_REL_TOL, MAX_BRACKET_DOUBLINGS,
                    ROOT_ABS_TOL)
from errors import BracketFailure, DomainError
from model import (CASE2B, CouplingClass, ValidatedModel, classify,
                   infrared_norm_sq, weighted_l2_norm_sq)
from quad import QuadratureRule

logger = logging.getLogger(__name__)

SIGMAS = (1, -1)
UNPERTURBED_BRANCH = "unperturbed-branch"


class _NotApplicable:
    """Marker returned by checks that do not apply to Case 1 models."""

    def __repr__(self) -> str:
        return "NOT_APPLICABLE"

    def __bool__(self) -> bool:
        return False


NOT_APPLICABLE = _NotApplicable()


@dataclass(frozen=True)
class EssentialSpectrum:
    bottom: float
    attaining_sigma: Union[int, str]
    sector_bottoms: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bottom": self.bottom,
            "attaining_sigma": self.attaining_sigma,
            "sector_bottoms": {sigma_label(s): v for s, v in self.sector_bottoms.items()},
        }


def sigma_label(sigma: int) -> str:
    return "+" if sigma > 0 else "-"


def check_sigma(sigma: int) -> int:
    if sigma not in SIGMAS:
        raise DomainError(f"sigma must be +1 or -1, got {sigma}")
    return sigma


def phi_boundary(model: ValidatedModel, sigma: int) -> float:
    """The right end m + sigma*eps of the domain of Phi^(sigma)."""
    return model.m + sigma * model.epsilon


@lru_cache(maxsize=8192)
def _resolvent_integral(model: ValidatedModel, sigma: int, z: float, rel_tol: float) -> float:
    # omega + sigma*eps - z written as (omega - m) + (m + sigma*eps - z)
    shift = phi_boundary(model, sigma) - z
    return weighted_l2_norm_sq(model, lambda r: 1.0 / (model.excess(r) + shift), rel_tol)


def phi(model: ValidatedModel, sigma: int, alpha: float, z: float,
        rule: Optional[QuadratureRule] = None, rel_tol: float = INTEGRAL_REL_TOL,
        boundary_gap: float = BOUNDARY_GAP) -> float:
    """
    Evaluate Phi^(sigma)_alpha(z).

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength (alpha >= 0)
        z: Spectral parameter below m + sigma*eps
        rule: When given, the integral is the fixed sum on this rule instead
            of an adaptive integral
        rel_tol: Relative tolerance of the adaptive integral
        boundary_gap: Minimal distance from m + sigma*eps for adaptive evaluation

    Returns:
        The value of Phi
    """
    check_sigma(sigma)
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    b = phi_boundary(model, sigma)
    if rule is not None:
        return float(phi_on_rule(model, sigma, alpha, np.array([z]), rule)[0])
    if b - z < boundary_gap:
        raise DomainError(f"phi needs z < m + sigma*eps - {boundary_gap:g} = {b - boundary_gap!r}, got {z!r}")
    value = -sigma * model.epsilon - z
    if alpha == 0:
        return value
    return value - alpha ** 2 * _resolvent_integral(model, sigma, float(z), rel_tol)


def phi_on_rule(model: ValidatedModel, sigma: int, alpha: float, z: np.ndarray,
                rule: QuadratureRule) -> np.ndarray:
    """
    Evaluate Phi^(sigma)_alpha at many points with the integral discretized on `rule`.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        z: Array of spectral parameters, each below m + sigma*eps
        rule: Quadrature rule matched to the model

    Returns:
        Array of Phi values
    """
    check_sigma(sigma)
    z = np.asarray(z, dtype=float)
    shift = phi_boundary(model, sigma) - z
    if np.any(shift <= 0):
        raise DomainError("phi needs every z below m + sigma*eps")
    weighted = rule.weights * model.coupling_sq(rule.nodes)
    excess = model.excess(rule.nodes)
    integral = (weighted[None, :] / (excess[None, :] + shift[:, None])).sum(axis=1)
    return -sigma * model.epsilon - z - alpha ** 2 * integral


def phi_derivative(model: ValidatedModel, sigma: int, alpha: float, z: float,
                   rel_tol: float = INTEGRAL_REL_TOL) -> float:
    """d Phi / dz = -1 - alpha^2 * int |lambda|^2 / (omega + sigma*eps - z)^2."""
    check_sigma(sigma)
    shift = phi_boundary(model, sigma) - z
    if shift <= 0:
        raise DomainError("phi_derivative needs z below m + sigma*eps")
    integral = weighted_l2_norm_sq(model, lambda r: 1.0 / (model.excess(r) + shift) ** 2, rel_tol)
    return -1.0 - alpha ** 2 * integral


def phi_boundary_limit(model: ValidatedModel, sigma: int, alpha: float) -> float:
    """
    Limit of Phi^(sigma)_alpha(z) as z increases to m + sigma*eps.

    Returns:
        -inf in Case 1, otherwise -2 sigma eps - m - alpha^2 ||lambda / sqrt(omega - m)||^2
    """
    check_sigma(sigma)
    finite_part = -2.0 * sigma * model.epsilon - model.m
    if alpha == 0:
        return finite_part
    if not model.integrable:
        return -math.inf
    return finite_part - alpha ** 2 * infrared_norm_sq(model)


@lru_cache(maxsize=1024)
def find_zero(model: ValidatedModel, sigma: int, alpha: float,
              root_tol: float = ROOT_ABS_TOL, rel_tol: float = INTEGRAL_REL_TOL,
              boundary_gap: float = BOUNDARY_GAP) -> Optional[float]:
    """
    Locate the unique zero E_{sigma eps}(alpha) of Phi^(sigma)_alpha.

    The lower end of the bracket starts max(1, eps) below m + sigma*eps and
    doubles its distance until Phi > 0. In Case 2 the upper end is the
    boundary itself, where Phi takes its finite limit; in Case 1 the
    distance is halved until Phi < 0.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength (alpha > 0)
        root_tol: Absolute tolerance on the root
        rel_tol: Relative tolerance of the integrals
        boundary_gap: Closest approach to m + sigma*eps

    Returns:
        The zero, or None for sigma = -1 in Case 2b
    """
    check_sigma(sigma)
    regime = classify(model, alpha)
    if sigma == -1 and regime.tag == CASE2B:
        return None

    b = phi_boundary(model, sigma)

    def f(z: float) -> float:
        return phi(model, sigma, alpha, z, rel_tol=rel_tol, boundary_gap=boundary_gap)

    distance = max(1.0, model.epsilon)
    value = f(b - distance)
    if value == 0.0:
        return b - distance

    if value < 0:
        hi = b - distance
        for _ in range(MAX_BRACKET_DOUBLINGS):
            distance *= 2.0
            if f(b - distance) > 0:
                break
        else:
            raise BracketFailure(f"Phi^({sigma_label(sigma)}) stays negative down to z = {b - distance!r}")
        lo = b - distance
        g = f
    elif model.integrable:
        lo, hi = b - distance, b
        limit = phi_boundary_limit(model, sigma, alpha)
        if limit >= 0:
            raise BracketFailure(f"Phi^({sigma_label(sigma)}) has non-negative boundary limit {limit!r}")

        def g(z: float) -> float:
            return limit if b - z < boundary_gap else f(z)
    else:
        lo = b - distance
        while f(b - distance) >= 0:
            distance /= 2.0
            if distance < boundary_gap:
                logger.warning("zero of Phi^(%s) for %s at alpha=%g lies within %g of the boundary; "
                               "returning m + sigma*eps - gap", sigma_label(sigma), model.name,
                               alpha, boundary_gap)
                return b - boundary_gap
        hi = b - distance
        g = f

    logger.debug("bracket for Phi^(%s) at alpha=%g: [%r, %r]", sigma_label(sigma), alpha, lo, hi)
    return float(brentq(g, lo, hi, xtol=root_tol, maxiter=500))


def bottom_energy(model: ValidatedModel, alpha: float, root_tol: float = ROOT_ABS_TOL,
                  rel_tol: float = INTEGRAL_REL_TOL) -> Tuple[float, CouplingClass]:
    """
    Compute E(alpha) and the coupling regime.

    Returns:
        (min of the two zeros, regime) in Cases 1 and 2a, (E_eps(alpha), regime) in Case 2b
    """
    regime = classify(model, alpha)
    e_plus = find_zero(model, 1, alpha, root_tol, rel_tol)
    e_minus = find_zero(model, -1, alpha, root_tol, rel_tol)
    energy = e_plus if e_minus is None else min(e_plus, e_minus)
    return energy, regime


def sector_bottom(model: ValidatedModel, sigma: int, alpha: float,
                  root_tol: float = ROOT_ABS_TOL) -> float:
    """
    Bottom of the essential spectrum of the sigma-sector operator.

    Returns:
        m + E_{sigma eps}(alpha), or 2m - eps for sigma = -1 in Case 2b
    """
    check_sigma(sigma)
    root = find_zero(model, sigma, alpha, root_tol)
    if root is None:
        return 2.0 * model.m - model.epsilon
    return model.m + root


def essential_spectrum(model: ValidatedModel, alpha: float,
                       root_tol: float = ROOT_ABS_TOL) -> EssentialSpectrum:
    """
    Assemble the essential spectrum [m + E(alpha), inf) of the Hamiltonian.
    """
    bottoms = {sigma: sector_bottom(model, sigma, alpha, root_tol) for sigma in SIGMAS}
    attaining: Union[int, str] = 1 if bottoms[1] <= bottoms[-1] else -1
    if attaining == -1 and find_zero(model, -1, alpha, root_tol) is None:
        attaining = UNPERTURBED_BRANCH
    return EssentialSpectrum(bottom=min(bottoms.values()), attaining_sigma=attaining,
                             sector_bottoms=bottoms)


@lru_cache(maxsize=256)
def asymptotic_coefficient(model: ValidatedModel) -> float:
    """
    Weak-coupling coefficient c = ||lambda / sqrt(omega + 2 eps)||^2.

    E_eps(alpha) = -eps - c alpha^2 + o(alpha^2) as alpha decreases to 0.
    """
    return weighted_l2_norm_sq(model, lambda r: 1.0 / (model.omega(r) + 2.0 * model.epsilon))


def check_small_alpha_regime(model: ValidatedModel, alpha: float):
    """
    Test the weak-coupling bound alpha <= sqrt(2 eps) / ||lambda / sqrt(omega - m)||.

    Returns:
        bool for Case 2 models, NOT_APPLICABLE for Case 1 models
    """
    if not model.integrable:
        return NOT_APPLICABLE
    return bool(alpha <= math.sqrt(2.0 * model.epsilon / infrared_norm_sq(model)))


def weak_coupling_margin(model: ValidatedModel, alpha: float,
                         root_tol: float = ROOT_ABS_TOL) -> float:
    """
    Phi^(-)_alpha evaluated at E_eps(alpha).

    Under the weak-coupling bound this is positive, so the ground-state branch
    is sigma = +1.
    """
    e_plus = find_zero(model, 1, alpha, root_tol)
    return phi(model, -1, alpha, e_plus)


def _check_grid(alphas: Iterable[float]) -> np.ndarray:
    grid = np.asarray(list(alphas), dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("alpha grid must be non-empty, positive and strictly increasing")
    return grid


def scan_alpha(model: ValidatedModel, alphas: Iterable[float],
               root_tol: float = ROOT_ABS_TOL, rel_tol: float = INTEGRAL_REL_TOL) -> pd.DataFrame:
    """
    Sweep the coupling strength.

    Args:
        model: Validated model
        alphas: Strictly increasing positive grid
        root_tol: Absolute tolerance of the zeros
        rel_tol: Relative tolerance of the integrals

    Returns:
        DataFrame with columns alpha, E_plus, E_minus (NaN when absent), E, ess_bottom
    """
    rows = []
    for alpha in _check_grid(alphas):
        e_plus = find_zero(model, 1, float(alpha), root_tol, rel_tol)
        e_minus = find_zero(model, -1, float(alpha), root_tol, rel_tol)
        energy = e_plus if e_minus is None else min(e_plus, e_minus)
        rows.append({
            "alpha": float(alpha),
            "E_plus": e_plus,
            "E_minus": np.nan if e_minus is None else e_minus,
            "E": energy,
            "ess_bottom": model.m + energy,
        })
    return pd.DataFrame(rows, columns=["alpha", "E_plus", "E_minus", "E", "ess_bottom"])


def asymptotics_table(model: ValidatedModel, alphas: Iterable[float],
                      root_tol: float = 1e-14) -> pd.DataFrame:
    """
    Compare (E_eps(alpha) + eps) / alpha^2 with its limit -c.

    Returns:
        DataFrame with columns alpha, E_plus, ratio, target, discrepancy
    """
    target = -asymptotic_coefficient(model)
    rows = []
    for alpha in _check_grid(alphas):
        e_plus = find_zero(model, 1, float(alpha), root_tol)
        ratio = (e_plus + model.epsilon) / alpha ** 2
        rows.append({"alpha": float(alpha), "E_plus": e_plus, "ratio": ratio,
                     "target": target, "discrepancy": abs(ratio - target)})
    return pd.DataFrame(rows, columns=["alpha", "E_plus", "ratio", "target", "discrepancy"])
