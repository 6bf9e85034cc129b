"""
Schur Complement Counting for spinboson-spectrum

This module discretizes the Schur complement S(z) = Delta(z) - alpha^2 K(z)
of the sigma-sector operator on the radial one-photon grid and counts its
negative eigenvalues, which equals the number of eigenvalues of the
sigma-sector Hamiltonian below z. It also provides the kernel splitting
K = K1 + K2 (a rank-two part and a part that vanishes on the level set
omega = m) and the Birman-Schwinger operators built from them.

All matrices are symmetrized with the square roots of the quadrature
weights, so they represent the operators in an orthonormal basis.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from config import EIGEN_ZERO_THRESHOLD, JUMP_TOL, LEVEL_SET_TOL, MAX_BRACKET_DOUBLINGS
from errors import BracketFailure, DomainError, NonPositiveDelta
from model import ValidatedModel
from nevanlinna import check_sigma, find_zero, phi, phi_on_rule, sector_bottom
from quad import QuadratureRule

logger = logging.getLogger(__name__)

ONE_PHOTON = "one-photon-radial"

FULL_K = "full-K"
K2_ONLY = "K2-only"


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    """
    Symmetric matrix over the nodes of a rule.

    `indices` lists the rule nodes the rows refer to when the operator is
    restricted (Birman-Schwinger operators on the complement of the level set).
    """

    rule: QuadratureRule
    matrix: np.ndarray
    sector: str
    z: float
    sigma: int
    indices: Optional[np.ndarray] = None

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, "fro"))

    def symmetry_residual(self) -> float:
        return float(np.abs(self.matrix - self.matrix.T).max(initial=0.0))

    def eigenvalues(self) -> np.ndarray:
        return eigvalsh(self.matrix)


def _kernel_offset(model: ValidatedModel, sigma: int, z: float) -> float:
    # c = 2m + sigma*eps - z, the two-photon threshold distance
    check_sigma(sigma)
    c = 2.0 * model.m + sigma * model.epsilon - z
    if c <= 0:
        raise DomainError(f"z must lie below 2m + sigma*eps = {z + c!r}, got {z!r}")
    return c


def _scaled_coupling(model: ValidatedModel, rule: QuadratureRule) -> np.ndarray:
    return rule.sqrt_weights * model.coupling(rule.nodes)


def delta_values(model: ValidatedModel, sigma: int, alpha: float, z: float,
                 radii: np.ndarray, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """
    Evaluate Delta(r; z) = Phi^(sigma)_alpha(z - omega(r)).

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        z: Spectral parameter below 2m + sigma*eps
        radii: Radii to evaluate at
        rule: Discretize the inner integral on this rule; adaptive integrals otherwise

    Returns:
        Array of Delta values
    """
    _kernel_offset(model, sigma, z)
    radii = np.asarray(radii, dtype=float)
    arguments = z - model.omega(radii)
    if rule is not None:
        return phi_on_rule(model, sigma, alpha, arguments, rule)
    return np.array([phi(model, sigma, alpha, float(w)) for w in arguments])


def delta_diag(model: ValidatedModel, sigma: int, alpha: float, z: float,
               rule: QuadratureRule) -> DiscretizedOperator:
    """Diagonal operator of multiplication by Delta(r_i; z) on the rule nodes."""
    values = delta_values(model, sigma, alpha, z, rule.nodes, rule)
    return DiscretizedOperator(rule, np.diag(values), ONE_PHOTON, z, sigma)


def delta_factored(model: ValidatedModel, sigma: int, alpha: float, z0: float,
                   radii: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """
    Delta(r; z0) at the sector bottom z0 = m + E_{sigma eps}(alpha), written as

        (omega(r) - m) * (1 + alpha^2 * int |lambda|^2 / ((omega_q + sigma eps - z0 + m)(omega_q + omega(r) + sigma eps - z0)))

    so that it vanishes exactly on the level set omega = m.
    """
    c = _kernel_offset(model, sigma, z0)
    radii = np.asarray(radii, dtype=float)
    excess_r = model.excess(radii)
    excess_q = model.excess(rule.nodes)
    weighted = rule.weights * model.coupling_sq(rule.nodes)
    # omega_q + sigma*eps - z0 + m = excess_q + c, likewise with omega(r)
    denominators = (excess_q[None, :] + c) * (excess_q[None, :] + excess_r[:, None] + c)
    integral = (weighted[None, :] / denominators).sum(axis=1)
    return excess_r * (1.0 + alpha ** 2 * integral)


def kernel_K(model: ValidatedModel, sigma: int, alpha: float, z: float,
             rule: QuadratureRule) -> DiscretizedOperator:
    """
    Nystrom matrix of K(z) with kernel lambda(r) lambda(s) / (omega(r) + omega(s) + sigma eps - z).

    The factor alpha^2 is left to the caller.
    """
    c = _kernel_offset(model, sigma, z)
    s = _scaled_coupling(model, rule)
    a = model.excess(rule.nodes)
    matrix = np.outer(s, s) / (a[:, None] + a[None, :] + c)
    return DiscretizedOperator(rule, matrix, ONE_PHOTON, z, sigma)


def _psi_parts(a: np.ndarray, b: np.ndarray, c: float) -> Tuple[np.ndarray, np.ndarray]:
    psi1 = 1.0 / (a + c) + 1.0 / (b + c) - 1.0 / c
    psi2 = a * b * (a + b + 2.0 * c) / (c * (a + c) * (b + c) * (a + b + c))
    return psi1, psi2


def split_K(model: ValidatedModel, sigma: int, alpha: float, z: float,
            rule: QuadratureRule) -> Tuple[DiscretizedOperator, DiscretizedOperator]:
    """
    Split K into a rank-two part K1 and a remainder K2.

    With a = omega(r) - m, b = omega(s) - m and c = 2m + sigma eps - z:

        Psi1 = 1/(a + c) + 1/(b + c) - 1/c
        Psi2 = ab(a + b + 2c) / (c (a + c)(b + c)(a + b + c))

    and Psi1 + Psi2 = 1/(a + b + c). Psi2 is evaluated in this product form,
    which has no cancellation and vanishes when a = 0 or b = 0.

    Returns:
        (K1, K2)
    """
    c = _kernel_offset(model, sigma, z)
    s = _scaled_coupling(model, rule)
    a = model.excess(rule.nodes)
    psi1, psi2 = _psi_parts(a[:, None], a[None, :], c)
    ss = np.outer(s, s)
    return (DiscretizedOperator(rule, ss * psi1, ONE_PHOTON, z, sigma),
            DiscretizedOperator(rule, ss * psi2, ONE_PHOTON, z, sigma))


def schur_complement(model: ValidatedModel, sigma: int, alpha: float, z: float,
                     rule: QuadratureRule) -> np.ndarray:
    """The symmetric matrix D - alpha^2 K on the rule nodes."""
    delta = delta_values(model, sigma, alpha, z, rule.nodes, rule)
    kernel = kernel_K(model, sigma, alpha, z, rule).matrix
    return np.diag(delta) - alpha ** 2 * kernel


def birman_schwinger_T(model: ValidatedModel, sigma: int, alpha: float, z: float,
                       rule: QuadratureRule, which: str = FULL_K) -> DiscretizedOperator:
    """
    Birman-Schwinger operator D^(-1/2) K_sel D^(-1/2).

    In full-K mode below the sector bottom, D is Delta(z) on every node and
    must be positive. At the sector bottom z0, and in K2-only mode for any
    z <= z0, D is the factored Delta(z0) plus the increment
    Delta(z) - Delta(z0), and nodes on the level set omega = m are dropped;
    at z = z0 with K2-only this is the boundary kernel
    lambda lambda Psi2 / sqrt(Delta(z0) Delta(z0)).

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        z: Spectral parameter
        rule: Quadrature rule matched to the model
        which: "full-K" or "K2-only"

    Returns:
        DiscretizedOperator, restricted to the kept nodes
    """
    if which not in (FULL_K, K2_ONLY):
        raise DomainError(f"which must be '{FULL_K}' or '{K2_ONLY}', got '{which}'")
    root = find_zero(model, sigma, alpha)
    z0 = None if root is None else model.m + root
    at_bottom = z0 is not None and abs(z - z0) <= 1e-12 * (1.0 + abs(z0))

    if which == FULL_K and not at_bottom:
        if z0 is not None and z > z0:
            raise DomainError(f"full-K needs z below the sector bottom {z0!r}")
        delta = delta_values(model, sigma, alpha, z, rule.nodes, rule)
        if np.any(delta <= 0):
            raise NonPositiveDelta(f"Delta has {int(np.sum(delta <= 0))} non-positive node values at z = {z!r}")
        kernel = kernel_K(model, sigma, alpha, z, rule).matrix
        scale = 1.0 / np.sqrt(delta)
        return DiscretizedOperator(rule, scale[:, None] * kernel * scale[None, :], ONE_PHOTON, z, sigma,
                                   indices=np.arange(rule.size))

    if z0 is None:
        raise DomainError(f"sigma = {sigma} sector has no Phi zero at alpha = {alpha}")
    if z > z0 and not at_bottom:
        raise DomainError(f"z must not exceed the sector bottom {z0!r}")
    z_eval = z0 if at_bottom else z

    keep = np.flatnonzero(model.excess(rule.nodes) >= LEVEL_SET_TOL)
    radii = rule.nodes[keep]
    delta = delta_factored(model, sigma, alpha, z0, radii, rule)
    if not at_bottom:
        delta = delta + (delta_values(model, sigma, alpha, z_eval, radii, rule)
                         - delta_values(model, sigma, alpha, z0, radii, rule))
    if which == FULL_K:
        kernel = kernel_K(model, sigma, alpha, z_eval, rule).matrix
    else:
        kernel = split_K(model, sigma, alpha, z_eval, rule)[1].matrix
    kernel = kernel[np.ix_(keep, keep)]
    scale = 1.0 / np.sqrt(delta)
    return DiscretizedOperator(rule, scale[:, None] * kernel * scale[None, :], ONE_PHOTON, z_eval, sigma,
                               indices=keep)


def _check_count_domain(model: ValidatedModel, sigma: int, alpha: float, z: float):
    bottom = sector_bottom(model, sigma, alpha)
    if z >= bottom:
        raise DomainError(f"z = {z!r} is not below the sigma = {sigma} sector bottom {bottom!r}")


def _negative_count(eigenvalues: np.ndarray, threshold: float) -> int:
    scale = np.abs(eigenvalues).max(initial=0.0)
    return int(np.sum(eigenvalues < -threshold * scale))


def count_below(model: ValidatedModel, sigma: int, alpha: float, z: float,
                rule: QuadratureRule, zero_threshold: float = EIGEN_ZERO_THRESHOLD) -> int:
    """
    Number of eigenvalues of the sigma-sector operator below z.

    Counts the negative eigenvalues of D - alpha^2 K. Only the radial
    one-photon grid is needed: below the sector bottom D is positive, and K
    maps into radial functions.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        z: Energy strictly below the sector bottom
        rule: Quadrature rule matched to the model
        zero_threshold: Eigenvalues above -zero_threshold * ||S|| count as zero

    Returns:
        The eigenvalue count
    """
    _check_count_domain(model, sigma, alpha, z)
    eigenvalues = eigvalsh(schur_complement(model, sigma, alpha, z, rule))
    return _negative_count(eigenvalues, zero_threshold)


def birman_schwinger_count(model: ValidatedModel, sigma: int, alpha: float, z: float,
                           rule: QuadratureRule, zero_threshold: float = EIGEN_ZERO_THRESHOLD) -> int:
    """
    The same count as `count_below`, taken as the number of eigenvalues of T above 1/alpha^2.
    """
    _check_count_domain(model, sigma, alpha, z)
    if alpha == 0:
        return 0
    T = birman_schwinger_T(model, sigma, alpha, z, rule, FULL_K)
    shifted = T.eigenvalues() - 1.0 / alpha ** 2
    scale = max(np.abs(shifted).max(initial=0.0), 1.0 / alpha ** 2)
    return int(np.sum(shifted > zero_threshold * scale))


def discrete_eigenvalues(model: ValidatedModel, sigma: int, alpha: float, rule: QuadratureRule,
                         gap: float, tol: float = JUMP_TOL) -> List[float]:
    """
    Locate the eigenvalues below (sector bottom - gap) as jumps of `count_below`.

    Each jump is bisected to width `tol`; a jump of size k is reported k times.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        rule: Quadrature rule matched to the model
        gap: Distance kept from the sector bottom (gap > 0)
        tol: Width at which a jump is considered located

    Returns:
        Sorted eigenvalues with multiplicity
    """
    if not gap > 0:
        raise DomainError(f"gap must be positive, got {gap}")
    upper = sector_bottom(model, sigma, alpha) - gap

    def count(z: float) -> int:
        return count_below(model, sigma, alpha, z, rule)

    n_upper = count(upper)
    if n_upper == 0:
        return []

    distance = 1.0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        lower = upper - distance
        n_lower = count(lower)
        if n_lower == 0:
            break
        distance *= 2.0
    else:
        raise BracketFailure(f"eigenvalue count stays positive down to z = {upper - distance!r}")

    found: List[float] = []
    stack = [(lower, upper, n_lower, n_upper)]
    while stack:
        lo, hi, n_lo, n_hi = stack.pop()
        if n_lo == n_hi:
            continue
        if hi - lo < tol:
            found.extend([0.5 * (lo + hi)] * (n_hi - n_lo))
            continue
        mid = 0.5 * (lo + hi)
        n_mid = count(mid)
        stack.append((lo, mid, n_lo, n_mid))
        stack.append((mid, hi, n_mid, n_hi))
    found.sort()
    logger.debug("sigma=%d alpha=%g: %d eigenvalues below %r", sigma, alpha, len(found), upper)
    return found


def full_count_bound_check(model: ValidatedModel, alpha: float, z: float,
                           rule: QuadratureRule) -> bool:
    """
    Check N(z; H) <= N(z; H^(+)) + N(z; H^(-)) + 4.

    The left side is counted on the dense truncation including the vacuum,
    the right side with `count_below` on the same rule.
    """
    from oracle import eigs_below, truncate_full

    full = sum(len(eigs_below(truncate_full(model, sigma, alpha, rule).matrix, z)) for sigma in (1, -1))
    reduced = sum(count_below(model, sigma, alpha, z, rule) for sigma in (1, -1))
    logger.debug("full-count check at z=%r: %d <= %d + 4", z, full, reduced)
    return full <= reduced + 4
