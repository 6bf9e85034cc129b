"""
Dense Truncation Oracle for spinboson-spectrum

This module provides an independent ground truth for the Schur complement
counts: dense matrices of the sigma-sector Hamiltonian truncated to the
nodes of a quadrature rule, with and without the vacuum, the one-boson
system with its closed-form spectrum, the elementary inequality behind the
kernel bounds, and the regression fixtures file.

Basis of the truncation, orthonormal in the weighted inner product:
    vacuum (optional), one-photon states sqrt(W_i) at node i, and symmetric
    two-photon states at node pairs i <= j, with weight W_i W_j for i < j
    and W_i^2 / 2 on the diagonal.
"""
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import eigvalsh

from config import (CLUSTER_FLOOR, CLUSTER_MATCH_TOL, JSON_SCHEMA_VERSION,
                    THRESHOLD_NOISE_TOL)
from errors import DomainError, NoCluster
from model import (ValidatedModel, alpha_critical, lambda_norm_sq, model_rule,
                   weighted_l2_norm_sq)
from nevanlinna import (SIGMAS, asymptotic_coefficient, bottom_energy, check_sigma,
                        find_zero, phi, phi_boundary_limit, sector_bottom, sigma_label)
from presets import get_preset
from quad import QuadratureRule
from schur import count_below, delta_values

logger = logging.getLogger(__name__)

# Default number of inequality triples in a fuzz run
FUZZ_COUNT = 100000
FUZZ_RANGE = (1e-6, 1e6)
INEQUALITY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class TruncatedHamiltonian:
    """Dense sigma-sector matrix over [vacuum] + one-photon nodes + node pairs."""

    matrix: np.ndarray
    sigma: int
    alpha: float
    model: ValidatedModel
    rule: QuadratureRule
    has_vacuum: bool
    pairs: np.ndarray

    @property
    def offset(self) -> int:
        return 1 if self.has_vacuum else 0

    @property
    def n_one(self) -> int:
        return self.rule.size

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def block(self, row: str, col: str) -> np.ndarray:
        """Sub-block by sector name: 'vacuum', 'one' or 'two'."""
        bounds = {
            "vacuum": (0, self.offset),
            "one": (self.offset, self.offset + self.n_one),
            "two": (self.offset + self.n_one, self.size),
        }
        (r0, r1), (c0, c1) = bounds[row], bounds[col]
        return self.matrix[r0:r1, c0:c1]


def _pair_coupling(model: ValidatedModel, rule: QuadratureRule):
    n = rule.size
    i, j = np.triu_indices(n)
    s = rule.sqrt_weights * model.coupling(rule.nodes)
    B = np.zeros((n, i.size))
    cols = np.arange(i.size)
    off = i < j
    # (H12 f2)(k) = int f2(k, q) lambda(q) dq against the orthonormal pair states
    B[i[off], cols[off]] = s[j[off]]
    B[j[off], cols[off]] = s[i[off]]
    on = ~off
    B[i[on], cols[on]] = math.sqrt(2.0) * s[i[on]]
    return B, np.column_stack((i, j))


def truncate_hhat(model: ValidatedModel, sigma: int, alpha: float,
                  rule: QuadratureRule) -> TruncatedHamiltonian:
    """
    Dense matrix of the sigma-sector operator on one- and two-photon states.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        rule: Quadrature rule whose nodes carry the truncation

    Returns:
        TruncatedHamiltonian of size n + n(n+1)/2
    """
    check_sigma(sigma)
    eps = model.epsilon
    omega = model.omega(rule.nodes)
    B, pairs = _pair_coupling(model, rule)
    two_photon = omega[pairs[:, 0]] + omega[pairs[:, 1]] + sigma * eps
    n, p = B.shape

    matrix = np.zeros((n + p, n + p))
    matrix[:n, :n] = np.diag(omega - sigma * eps)
    matrix[n:, n:] = np.diag(two_photon)
    matrix[:n, n:] = alpha * B
    matrix[n:, :n] = alpha * B.T
    logger.debug("truncated sigma=%d operator: %d one-photon + %d pair states", sigma, n, p)
    return TruncatedHamiltonian(matrix, sigma, alpha, model, rule, False, pairs)


def truncate_full(model: ValidatedModel, sigma: int, alpha: float,
                  rule: QuadratureRule) -> TruncatedHamiltonian:
    """
    `truncate_hhat` with the vacuum state (energy sigma*eps) prepended.
    """
    hat = truncate_hhat(model, sigma, alpha, rule)
    coupling = alpha * rule.sqrt_weights * model.coupling(rule.nodes)
    size = hat.size + 1
    matrix = np.zeros((size, size))
    matrix[1:, 1:] = hat.matrix
    matrix[0, 0] = sigma * model.epsilon
    matrix[0, 1:1 + rule.size] = coupling
    matrix[1:1 + rule.size, 0] = coupling
    return TruncatedHamiltonian(matrix, sigma, alpha, model, rule, True, hat.pairs)


def adjointness_residual(th: TruncatedHamiltonian) -> float:
    """Max-norm of H21 - H12^T (and H10 - H01^T with a vacuum)."""
    residual = np.abs(th.block("two", "one") - th.block("one", "two").T).max(initial=0.0)
    if th.has_vacuum:
        residual = max(residual, np.abs(th.block("one", "vacuum") - th.block("vacuum", "one").T).max(initial=0.0))
    return float(residual)


def symmetry_residual(th: TruncatedHamiltonian) -> float:
    return float(np.abs(th.matrix - th.matrix.T).max(initial=0.0))


def eigs_below(matrix, z: float) -> List[float]:
    """
    All eigenvalues below z of a symmetric matrix, sorted.

    Args:
        matrix: ndarray or TruncatedHamiltonian
        z: Upper cut

    Returns:
        Sorted list of eigenvalues < z
    """
    matrix = getattr(matrix, "matrix", matrix)
    if matrix.size == 0:
        return []
    values = eigvalsh(matrix, subset_by_value=(-np.inf, z))
    return sorted(float(v) for v in values if v < z)


def _cluster_edge(values: np.ndarray, previous: np.ndarray) -> Optional[float]:
    # continuum eigenvalues either move with the nodes or are degenerate
    if values.size == 0:
        return None
    scale = 1.0 + np.abs(values)
    gaps = np.diff(values)
    spacing = np.minimum(np.concatenate(([np.inf], gaps)), np.concatenate((gaps, [np.inf])))
    degenerate = spacing <= CLUSTER_FLOOR * scale
    if previous.size:
        moved = np.abs(previous[None, :] - values[:, None]).min(axis=1) > CLUSTER_MATCH_TOL * scale
    else:
        moved = np.ones(values.size, dtype=bool)
    clustered = degenerate | moved
    if not clustered.any():
        return None
    return float(values[clustered].min())


def ess_bottom_estimate(model: ValidatedModel, sigma: int, alpha: float,
                        rules: Sequence[QuadratureRule]) -> float:
    """
    Estimate the bottom of the essential spectrum from truncations.

    On every rule the eigenvalues below the two-photon threshold
    2m + sigma*eps are collected. Isolated eigenvalues converge under
    refinement and reappear in the previous rule; an eigenvalue belongs to
    the accumulating part when it has no counterpart there or when it is
    numerically degenerate (a level set of positive measure). The lowest
    such eigenvalue is the edge; the last two edges are Richardson-
    extrapolated assuming an error quadratic in the node spacing, which
    holds when the Gauss order doubles at fixed panels.

    Args:
        model: Validated model
        sigma: +1 or -1
        alpha: Coupling strength
        rules: At least two rules of increasing size

    Returns:
        Extrapolated edge
    """
    if len(rules) < 2:
        raise NoCluster("at least two rules are needed to detect accumulation")
    ceiling = 2.0 * model.m + sigma * model.epsilon
    edges: List[float] = []
    previous = None
    for rule in rules:
        values = np.asarray(eigs_below(truncate_hhat(model, sigma, alpha, rule), ceiling))
        if previous is not None:
            edge = _cluster_edge(values, previous)
            if edge is not None:
                edges.append(edge)
        previous = values
    if not edges:
        raise NoCluster(f"no accumulating eigenvalues below {ceiling!r}")
    logger.debug("cluster edges for sigma=%d alpha=%g: %s", sigma, alpha, edges)
    if len(edges) == 1:
        return edges[0]
    coarse, fine = edges[-2], edges[-1]
    return fine + (fine - coarse) / 3.0


def oneboson_spectrum(model: ValidatedModel, alpha: float,
                      rule: Optional[QuadratureRule] = None) -> Dict[str, Any]:
    """
    Spectrum of the atom coupled to at most one boson.

    The sector with vacuum energy sigma*eps has the eigenvalue condition
    Phi^(-sigma)(z) = 0 and essential spectrum [m - sigma*eps, inf). Its
    truncation on `rule` is an arrow matrix; eigenvalues within a relative
    THRESHOLD_NOISE_TOL of the threshold are rounding copies of degenerate
    diagonal entries (level sets of the mass) and are discarded. Each
    closed-form eigenvalue is matched with the isolated truncated eigenvalue
    of its sector; a zero clamped at the boundary has no counterpart.

    Returns:
        Dict with ess_bottom, eigenvalues, truncated_eigenvalues, matched,
        ground_state, truncated_ground_state and regime
    """
    energy, regime = bottom_energy(model, alpha)
    rule = rule or model_rule(model)
    coupling = alpha * rule.sqrt_weights * model.coupling(rule.nodes)
    omega = model.omega(rule.nodes)

    theory: List[float] = []
    truncated: List[float] = []
    matched: List[Dict[str, Any]] = []
    for sigma in SIGMAS:
        threshold = model.m - sigma * model.epsilon
        n = rule.size
        matrix = np.zeros((n + 1, n + 1))
        matrix[0, 0] = sigma * model.epsilon
        matrix[0, 1:] = coupling
        matrix[1:, 0] = coupling
        matrix[1:, 1:] = np.diag(omega - sigma * model.epsilon)
        isolated = eigs_below(matrix, threshold - THRESHOLD_NOISE_TOL * (1.0 + abs(threshold)))
        truncated.extend(isolated)

        root = find_zero(model, -sigma, alpha)
        if root is None:
            continue
        theory.append(root)
        partner = min(isolated, key=lambda e: abs(e - root)) if isolated else None
        matched.append({
            "phi_sigma": sigma_label(-sigma),
            "eigenvalue": root,
            "truncated": partner,
            "difference": None if partner is None else abs(partner - root),
        })
    theory.sort()
    truncated.sort()
    matched.sort(key=lambda entry: entry["eigenvalue"])

    return {
        "ess_bottom": model.m - model.epsilon,
        "eigenvalues": theory,
        "truncated_eigenvalues": truncated,
        "matched": matched,
        "ground_state": energy,
        "truncated_ground_state": truncated[0] if truncated else None,
        "regime": regime.tag,
    }


def elementary_inequality(a, b, c):
    """
    Check 0 <= 1/(a+b+c) - 1/(a+c) - 1/(b+c) + 1/c <= sqrt(ab) / (2c^2).

    Works elementwise on arrays; both sides get a slack of 1e-12 / c.

    Args:
        a: Non-negative
        b: Non-negative
        c: Positive

    Returns:
        (lhs, upper, ok), floats for scalar input
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    if np.any(a < 0) or np.any(b < 0) or np.any(c <= 0):
        raise DomainError("elementary inequality needs a, b >= 0 and c > 0")
    lhs = 1.0 / (a + b + c) - 1.0 / (a + c) - 1.0 / (b + c) + 1.0 / c
    upper = np.sqrt(a * b) / (2.0 * c ** 2)
    slack = INEQUALITY_SLACK / c
    ok = (lhs >= -slack) & (lhs <= upper + slack)
    if lhs.ndim == 0:
        return float(lhs), float(upper), bool(ok)
    return lhs, upper, ok


def fuzz_elementary_inequality(count: int = FUZZ_COUNT, seed: int = 0) -> Dict[str, Any]:
    """
    Test the elementary inequality on log-uniform random triples.

    Args:
        count: Number of triples
        seed: Seed of numpy's default generator

    Returns:
        Summary with the number of violations and the worst excess
    """
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    low, high = np.log10(FUZZ_RANGE[0]), np.log10(FUZZ_RANGE[1])
    a, b, c = 10.0 ** rng.uniform(low, high, size=(3, count))
    lhs, upper, ok = elementary_inequality(a, b, c)
    excess = np.maximum(lhs - upper, -lhs) * c
    return {
        "count": int(count),
        "seed": int(seed),
        "violations": int(np.sum(~ok)),
        "max_scaled_excess": float(excess.max()),
        "passed": bool(ok.all()),
    }


def probe_points(eigs: Sequence[float], lower: float, upper: float, count: int,
                 separation: float = 1e-6) -> List[float]:
    """
    Pick up to `count` energies in (lower, upper) farther than `separation` from every eigenvalue.
    """
    if not lower < upper:
        raise DomainError(f"empty probe interval ({lower}, {upper})")
    candidates = np.linspace(lower, upper, 64 * max(count, 1) + 2)[1:-1]
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size:
        distance = np.abs(candidates[:, None] - eigs[None, :]).min(axis=1)
        candidates = candidates[distance > separation * (1.0 + np.abs(candidates))]
    if candidates.size <= count:
        return candidates.tolist()
    picks = np.linspace(0, candidates.size - 1, count).round().astype(int)
    return candidates[picks].tolist()


def compare_counts(model: ValidatedModel, sigma: int, alpha: float, rule: QuadratureRule,
                   count: int = 5, gap: float = 1e-3) -> pd.DataFrame:
    """
    Compare `count_below` with the eigencount of the dense truncation.

    Probe energies are spread between one unit below the lowest oracle
    eigenvalue and (sector bottom - gap).

    Returns:
        DataFrame with columns z, schur_count, oracle_count, agree
    """
    upper = sector_bottom(model, sigma, alpha) - gap
    eigs = eigs_below(truncate_hhat(model, sigma, alpha, rule), upper)
    lower = (eigs[0] if eigs else upper) - 1.0
    rows = []
    for z in probe_points(eigs, lower, upper, count):
        oracle_count = int(np.searchsorted(eigs, z))
        schur_count = count_below(model, sigma, alpha, z, rule)
        rows.append({"z": z, "schur_count": schur_count, "oracle_count": oracle_count,
                     "agree": schur_count == oracle_count})
    return pd.DataFrame(rows, columns=["z", "schur_count", "oracle_count", "agree"])


# Regression fixtures

def closed_form_fixtures() -> List[Dict[str, Any]]:
    """Fixture entries whose values follow from closed-form antiderivatives."""
    log32 = math.log(1.5)

    def entry(model, quantity, value, tolerance, sigma=None, alpha=None, rule=None, **arguments):
        return {"model": model, "sigma": sigma, "alpha": alpha, "rule": rule, "quantity": quantity,
                "arguments": arguments, "value": value, "tolerance": tolerance}

    return [
        entry("M1", "lambda_norm_sq", 2.0, 1e-12),
        entry("M1", "phi", -2.0 * log32, 1e-10, sigma=1, alpha=1.0, z=-1.0),
        entry("M1", "phi", 0.0, 1e-14, sigma=1, alpha=0.0, z=-1.0),
        entry("M3", "weighted_norm_inverse_omega", 2.0 * math.pi, 1e-10),
        entry("M3", "alpha_critical", 1.0 / math.sqrt(math.pi), 1e-10),
        entry("M3", "phi_boundary_limit", 0.0, 1e-9, sigma=-1, alpha=1.0 / math.sqrt(math.pi)),
        entry("M3", "phi_boundary_limit", -2.0 - 2.0 * math.pi, 1e-9, sigma=1, alpha=1.0),
        entry("M1", "asymptotic_coefficient", 2.0 * log32, 1e-10),
        entry("M3", "asymptotic_coefficient", 4.0 * math.pi * (4.0 * log32 - 1.5), 1e-10),
        entry("M1", "delta", 2.0 - 2.0 * math.log(1.25), 1e-10, sigma=1, alpha=1.0, z=-2.0, r=1.0),
    ]


def evaluate_fixture(entry: Dict[str, Any]) -> float:
    """Recompute the quantity a fixture entry records."""
    model = get_preset(entry["model"])
    quantity, args = entry["quantity"], entry.get("arguments", {})
    sigma, alpha = entry.get("sigma"), entry.get("alpha")
    if quantity == "lambda_norm_sq":
        return lambda_norm_sq(model)
    if quantity == "phi":
        return phi(model, sigma, alpha, args["z"])
    if quantity == "weighted_norm_inverse_omega":
        return weighted_l2_norm_sq(model, lambda r: 1.0 / model.omega(r))
    if quantity == "alpha_critical":
        return alpha_critical(model)
    if quantity == "phi_boundary_limit":
        return phi_boundary_limit(model, sigma, alpha)
    if quantity == "asymptotic_coefficient":
        return asymptotic_coefficient(model)
    if quantity == "delta":
        return float(delta_values(model, sigma, alpha, args["z"], np.array([args["r"]]))[0])
    raise DomainError(f"unknown fixture quantity '{quantity}'")


def load_fixtures(path: str) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)["fixtures"]


def write_fixtures(path: str, fixtures: Optional[List[Dict[str, Any]]] = None):
    """
    Write fixture entries with generation metadata.

    Args:
        path: Output JSON path
        fixtures: Entries to write, the closed-form set by default
    """
    document = {
        "schema_version": JSON_SCHEMA_VERSION,
        "metadata": {"generator": "oracle.write_fixtures", "source": "closed-form antiderivatives"},
        "fixtures": fixtures if fixtures is not None else closed_form_fixtures(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")
