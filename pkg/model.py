"""
Model Definitions for spinboson-spectrum

This module provides the radial parameter functions of the two-photon
spin-boson model (the dispersion relation omega and the coupling function
lambda), validates a model description, computes the weighted norms of the
coupling and classifies the coupling regime (Case 1, Case 2a, Case 2b).
Model files are JSON documents, see `model_from_dict` for the accepted shape.
"""
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from config import (DEFAULT_ORDER, DEFAULT_PANELS, INTEGRABILITY_PROBE_EXPONENTS,
                    INTEGRAL_REL_TOL)
from errors import (BoundedDispersion, DivergentIntegral, DomainError,
                    IntegrabilityWarning, ModelFileError, ModelValidationError,
                    NegativeEpsilon, NoConvergence, NonFiniteIntegrand,
                    ZeroCoupling)
from quad import QuadratureRule, build_rule, integrate, integrate_adaptive

logger = logging.getLogger(__name__)

CASE1_DIVERGENT = "case1-divergent"
CASE2_INTEGRABLE = "case2-integrable"
INTEGRABILITY_FLAGS = (CASE1_DIVERGENT, CASE2_INTEGRABLE)

CASE1 = "Case1"
CASE2A = "Case2a"
CASE2B = "Case2b"

# Accepted parameters per profile kind in model files
OMEGA_FIELDS = {
    "abs": {"required": set(), "optional": set()},
    "relativistic": {"required": {"mass"}, "optional": set()},
    "flat-bottom": {"required": {"a"}, "optional": {"mass"}},
    "tabulated": {"required": {"points"}, "optional": set()},
}
LAMBDA_FIELDS = {
    "box": {"required": {"support_radius"}, "optional": {"scale"}},
    "sqrt-omega-box": {"required": {"support_radius"}, "optional": {"scale"}},
    "tabulated": {"required": {"points"}, "optional": {"scale"}},
}
MODEL_FIELDS = {"name", "dimension", "epsilon", "omega", "lambda", "integrability"}

# Radii used by the unboundedness sample test
_GROWTH_SAMPLES = 10.0 ** np.arange(0, 10)
_GROWTH_THRESHOLD = 1e6

# Fixed rule for the integrability probe; 64 graded panels reach far below 2^-30
_PROBE_PANELS = 64

RadialFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RadialProfile:
    """
    A radial dispersion or coupling profile.

    Only the fields relevant to `kind` are read: `mass` for relativistic and
    flat-bottom dispersions, `kink` (the flat-bottom radius a), `radius` (the
    support of box couplings), `scale` for couplings and `table` for
    tabulated profiles as sorted (r, value) pairs.
    """

    kind: str
    mass: float = 0.0
    kink: float = 0.0
    radius: float = math.inf
    scale: float = 1.0
    table: Tuple[Tuple[float, float], ...] = field(default=())

    def table_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        points = np.asarray(self.table, dtype=float)
        return points[:, 0], points[:, 1]

    def scaled(self, c: float) -> "RadialProfile":
        """Return the same profile multiplied by c (couplings only)."""
        return RadialProfile(self.kind, self.mass, self.kink, self.radius,
                             self.scale * c, self.table)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dimension: int
    epsilon: float
    omega: RadialProfile
    coupling: RadialProfile
    integrability: str


@dataclass(frozen=True)
class CouplingClass:
    tag: str
    alpha_cr: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"tag": self.tag, "alpha_cr": self.alpha_cr}


def evaluate_dispersion(profile: RadialProfile, r: np.ndarray) -> np.ndarray:
    """
    Evaluate omega(r) for an array of radii.

    Tabulated dispersions interpolate linearly and continue their last
    segment beyond the final node.
    """
    r = np.asarray(r, dtype=float)
    if profile.kind == "abs":
        return r.copy()
    if profile.kind == "relativistic":
        return np.hypot(r, profile.mass)
    if profile.kind == "flat-bottom":
        return np.maximum(r - profile.kink, 0.0) + profile.mass
    if profile.kind == "tabulated":
        xs, ys = profile.table_arrays()
        values = np.interp(r, xs, ys)
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        beyond = r > xs[-1]
        values[beyond] = ys[-1] + slope * (r[beyond] - xs[-1])
        return values
    raise ModelFileError(f"unknown dispersion kind '{profile.kind}'")


def evaluate_coupling(profile: RadialProfile, r: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """
    Evaluate lambda(r) given the dispersion values at the same radii.
    """
    r = np.asarray(r, dtype=float)
    if profile.kind == "box":
        values = np.where(r <= profile.radius, 1.0, 0.0)
    elif profile.kind == "sqrt-omega-box":
        values = np.where(r <= profile.radius, np.sqrt(np.maximum(omega, 0.0)), 0.0)
    elif profile.kind == "tabulated":
        xs, ys = profile.table_arrays()
        values = np.where(r <= xs[-1], np.interp(r, xs, ys), 0.0)
    else:
        raise ModelFileError(f"unknown coupling kind '{profile.kind}'")
    return profile.scale * values


def _dispersion_infimum(profile: RadialProfile) -> float:
    if profile.kind == "abs":
        return 0.0
    if profile.kind in ("relativistic", "flat-bottom"):
        return float(profile.mass)
    _, ys = profile.table_arrays()
    return float(ys.min())


def _support_radius(profile: RadialProfile) -> float:
    if profile.kind == "tabulated":
        return float(profile.table[-1][0])
    return float(profile.radius)


@dataclass(frozen=True)
class ValidatedModel:
    """A model that passed validation, annotated with its photon mass m."""

    spec: ModelSpec
    m: float

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def epsilon(self) -> float:
        return self.spec.epsilon

    @property
    def integrable(self) -> bool:
        return self.spec.integrability == CASE2_INTEGRABLE

    @property
    def support_radius(self) -> float:
        return _support_radius(self.spec.coupling)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        points = set()
        for profile in (self.spec.omega, self.spec.coupling):
            if profile.kind == "flat-bottom":
                points.add(float(profile.kink))
            elif profile.kind == "tabulated":
                points.update(float(x) for x, _ in profile.table)
        R = self.support_radius
        return tuple(sorted(p for p in points if 0.0 < p < R))

    def omega(self, r) -> np.ndarray:
        return evaluate_dispersion(self.spec.omega, r)

    def excess(self, r) -> np.ndarray:
        """omega(r) - m, evaluated without cancellation near the minimum."""
        profile = self.spec.omega
        r = np.asarray(r, dtype=float)
        if profile.kind == "abs":
            return r.copy()
        if profile.kind == "relativistic":
            return r * r / (np.hypot(r, profile.mass) + profile.mass) if profile.mass > 0 else r.copy()
        if profile.kind == "flat-bottom":
            return np.maximum(r - profile.kink, 0.0)
        return np.maximum(evaluate_dispersion(profile, r) - self.m, 0.0)

    def coupling(self, r) -> np.ndarray:
        return evaluate_coupling(self.spec.coupling, r, self.omega(r))

    def coupling_sq(self, r) -> np.ndarray:
        return self.coupling(r) ** 2

    def with_scaled_coupling(self, c: float) -> "ValidatedModel":
        """Model with lambda replaced by c * lambda."""
        spec = self.spec
        scaled = ModelSpec(spec.name, spec.dimension, spec.epsilon, spec.omega,
                           spec.coupling.scaled(c), spec.integrability)
        return validate_model(scaled)


def model_rule(model: ValidatedModel, panels: int = DEFAULT_PANELS,
               order: int = DEFAULT_ORDER) -> QuadratureRule:
    """
    Build the quadrature rule matched to a model's support, dimension and kinks.
    """
    return build_rule(model.support_radius, panels, order, model.dimension, model.breakpoints)


def _check_profiles(spec: ModelSpec):
    omega, coupling = spec.omega, spec.coupling
    if omega.kind not in OMEGA_FIELDS:
        raise ModelValidationError(f"unknown dispersion kind '{omega.kind}'")
    if coupling.kind not in LAMBDA_FIELDS:
        raise ModelValidationError(f"unknown coupling kind '{coupling.kind}'")
    if omega.mass < 0 or omega.kink < 0:
        raise ModelValidationError("dispersion parameters must be non-negative")
    for profile in (omega, coupling):
        if profile.kind != "tabulated":
            continue
        if len(profile.table) < 2:
            raise ModelValidationError("tabulated profiles need at least two points")
        xs, _ = profile.table_arrays()
        if xs[0] < 0 or np.any(np.diff(xs) <= 0):
            raise ModelValidationError("tabulated radii must be non-negative and strictly increasing")
    if coupling.kind != "tabulated" and not (0 < coupling.radius < math.inf):
        raise ModelValidationError("coupling support radius must be positive and finite")
    if not math.isfinite(coupling.scale):
        raise ModelValidationError("coupling scale must be finite")


def validate_model(spec: ModelSpec) -> ValidatedModel:
    """
    Validate a model description and compute its photon mass.

    Args:
        spec: Model description

    Returns:
        ValidatedModel carrying m = inf omega

    Raises:
        NegativeEpsilon, BoundedDispersion, ZeroCoupling or
        ModelValidationError for malformed parameters
    """
    if not spec.epsilon > 0:
        raise NegativeEpsilon(f"epsilon must be positive, got {spec.epsilon}")
    if isinstance(spec.dimension, bool) or int(spec.dimension) != spec.dimension or spec.dimension < 1:
        raise ModelValidationError(f"dimension must be a positive integer, got {spec.dimension}")
    if spec.integrability not in INTEGRABILITY_FLAGS:
        raise ModelValidationError(f"integrability must be one of {INTEGRABILITY_FLAGS}")
    _check_profiles(spec)

    m = _dispersion_infimum(spec.omega)
    if m < 0:
        raise ModelValidationError(f"dispersion must be non-negative, infimum is {m}")

    samples = evaluate_dispersion(spec.omega, _GROWTH_SAMPLES)
    if not (np.all(np.isfinite(samples)) and samples[-1] - m > _GROWTH_THRESHOLD
            and samples[-1] > samples[-2]):
        raise BoundedDispersion(f"dispersion of '{spec.name}' does not grow without bound")

    model = ValidatedModel(spec=spec, m=m)
    rule = model_rule(model)
    if integrate(rule, model.coupling_sq) <= 0.0:
        raise ZeroCoupling(f"coupling of '{spec.name}' vanishes identically")

    probed = probe_integrability(model)
    if probed != spec.integrability:
        message = (f"model '{spec.name}' declares {spec.integrability} but the dyadic "
                   f"probe suggests {probed}; keeping the declared flag")
        logger.warning(message)
        warnings.warn(message, IntegrabilityWarning, stacklevel=2)

    logger.debug("validated model %s: d=%d eps=%g m=%g", spec.name, spec.dimension, spec.epsilon, m)
    return model


def probe_integrability(model: ValidatedModel) -> str:
    """
    Guess whether lambda / sqrt(omega - m) is square integrable.

    The integrals I_k of |lambda|^2 / (omega - m + 2^-k) are compared for
    k = 10, 20, 30; an integral that keeps growing by a comparable amount
    per decade of k is declared divergent.

    Returns:
        "case1-divergent" or "case2-integrable"
    """
    rule = build_rule(model.support_radius, _PROBE_PANELS, DEFAULT_ORDER,
                      model.dimension, model.breakpoints)
    values = []
    for k in INTEGRABILITY_PROBE_EXPONENTS:
        shift = 2.0 ** -k
        values.append(integrate(rule, lambda r, s=shift: model.coupling_sq(r) / (model.excess(r) + s)))
    first, second = values[1] - values[0], values[2] - values[1]
    growing = second > 0.5 * first and second > 1e-9 * (1.0 + abs(values[2]))
    return CASE1_DIVERGENT if growing else CASE2_INTEGRABLE


def weighted_l2_norm_sq(model: ValidatedModel, weight: RadialFunction,
                        rel_tol: float = INTEGRAL_REL_TOL) -> float:
    """
    Compute S_{d-1} * integral of weight(r) |lambda(r)|^2 r^(d-1) over [0, R].

    Args:
        model: Validated model
        weight: Vectorized radial weight
        rel_tol: Relative tolerance of the adaptive integration

    Returns:
        The weighted squared norm

    Raises:
        DivergentIntegral: when refinement does not converge
    """
    try:
        return integrate_adaptive(model.support_radius,
                                  lambda r: weight(r) * model.coupling_sq(r),
                                  rel_tol=rel_tol, d=model.dimension,
                                  breakpoints=model.breakpoints)
    except (NoConvergence, NonFiniteIntegrand) as exc:
        raise DivergentIntegral(f"weighted norm of '{model.name}' diverges: {exc}") from exc


@lru_cache(maxsize=256)
def lambda_norm_sq(model: ValidatedModel) -> float:
    """||lambda||^2."""
    return weighted_l2_norm_sq(model, np.ones_like)


@lru_cache(maxsize=256)
def infrared_norm_sq(model: ValidatedModel) -> float:
    """||lambda / sqrt(omega - m)||^2, finite only for Case 2 models."""
    return weighted_l2_norm_sq(model, lambda r: 1.0 / model.excess(r))


def alpha_critical(model: ValidatedModel) -> Optional[float]:
    """
    Critical coupling sqrt(2 eps - m) / ||lambda / sqrt(omega - m)||.

    Returns:
        The critical coupling, or None in Case 1 and when m >= 2 eps
    """
    if not model.integrable or model.m >= 2.0 * model.epsilon:
        return None
    return math.sqrt(2.0 * model.epsilon - model.m) / math.sqrt(infrared_norm_sq(model))


def classify(model: ValidatedModel, alpha: float) -> CouplingClass:
    """
    Classify the coupling regime at strength alpha.

    Case 2b includes alpha equal to the critical coupling.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not model.integrable:
        return CouplingClass(CASE1)
    alpha_cr = alpha_critical(model)
    if alpha_cr is None or alpha > alpha_cr:
        return CouplingClass(CASE2A, alpha_cr)
    return CouplingClass(CASE2B, alpha_cr)


# Model files

def _check_fields(section: str, data: Dict[str, Any], allowed: set, required: set):
    unknown = set(data) - allowed
    if unknown:
        raise ModelFileError(f"unknown field(s) in {section}: {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ModelFileError(f"missing field(s) in {section}: {sorted(missing)}")


def _number(section: str, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFileError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _table(section: str, value: Any) -> Tuple[Tuple[float, float], ...]:
    try:
        return tuple((float(r), float(v)) for r, v in value)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{section}.points must be a list of [r, value] pairs") from exc


def _profile_from_dict(section: str, data: Any, fields: Dict[str, Dict[str, set]]) -> RadialProfile:
    if not isinstance(data, dict) or "kind" not in data:
        raise ModelFileError(f"{section} must be an object with a 'kind'")
    kind = data["kind"]
    if kind not in fields:
        raise ModelFileError(f"unknown {section} kind '{kind}'")
    params = {k: v for k, v in data.items() if k != "kind"}
    spec = fields[kind]
    _check_fields(section, params, spec["required"] | spec["optional"], spec["required"])

    kwargs: Dict[str, Any] = {"kind": kind}
    if "mass" in params:
        kwargs["mass"] = _number(section, "mass", params["mass"])
    if "a" in params:
        kwargs["kink"] = _number(section, "a", params["a"])
    if "support_radius" in params:
        kwargs["radius"] = _number(section, "support_radius", params["support_radius"])
    if "scale" in params:
        kwargs["scale"] = _number(section, "scale", params["scale"])
    if "points" in params:
        kwargs["table"] = _table(section, params["points"])
    return RadialProfile(**kwargs)


def model_from_dict(data: Dict[str, Any]) -> ModelSpec:
    """
    Build a model description from its JSON form.

    Args:
        data: Dict with exactly the keys name, dimension, epsilon, omega,
            lambda and integrability

    Returns:
        ModelSpec (not yet validated)
    """
    if not isinstance(data, dict):
        raise ModelFileError("model file must contain a JSON object")
    _check_fields("model", data, MODEL_FIELDS, MODEL_FIELDS)
    dimension = data["dimension"]
    if isinstance(dimension, bool) or not isinstance(dimension, int):
        raise ModelFileError(f"dimension must be an integer, got {dimension!r}")
    return ModelSpec(
        name=str(data["name"]),
        dimension=dimension,
        epsilon=_number("model", "epsilon", data["epsilon"]),
        omega=_profile_from_dict("omega", data["omega"], OMEGA_FIELDS),
        coupling=_profile_from_dict("lambda", data["lambda"], LAMBDA_FIELDS),
        integrability=str(data["integrability"]),
    )


def _profile_to_dict(profile: RadialProfile) -> Dict[str, Any]:
    data: Dict[str, Any] = {"kind": profile.kind}
    if profile.kind == "relativistic":
        data["mass"] = profile.mass
    elif profile.kind == "flat-bottom":
        data["a"] = profile.kink
        data["mass"] = profile.mass
    elif profile.kind in ("box", "sqrt-omega-box"):
        data["support_radius"] = profile.radius
        data["scale"] = profile.scale
    elif profile.kind == "tabulated":
        data["points"] = [list(p) for p in profile.table]
        if profile.kind in LAMBDA_FIELDS and profile.scale != 1.0:
            data["scale"] = profile.scale
    return data


def model_to_dict(spec: ModelSpec) -> Dict[str, Any]:
    """Inverse of `model_from_dict`."""
    return {
        "name": spec.name,
        "dimension": spec.dimension,
        "epsilon": spec.epsilon,
        "omega": _profile_to_dict(spec.omega),
        "lambda": _profile_to_dict(spec.coupling),
        "integrability": spec.integrability,
    }


def load_model(path: str) -> ValidatedModel:
    """
    Load and validate a JSON model file.

    Args:
        path: Path of the model file

    Returns:
        ValidatedModel
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file {path} is not valid JSON: {exc}") from exc
    return validate_model(model_from_dict(data))
