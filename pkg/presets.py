"""
Bundled Models for spinboson-spectrum

This module embeds the reference models addressable by name from the
command line and the tests:

- M1: d=1, omega(k)=|k|, box coupling on [0, 1] (Case 1)
- M3: d=3, omega(k)=|k|, box coupling on [0, 1] (Case 2)
- MF: d=1, flat-bottom dispersion max(|k|-1, 0), box coupling on [0, 2] (Case 1)
- MR: d=3, relativistic dispersion sqrt(k^2+9), box coupling on [0, 1] (Case 2)
"""
from functools import lru_cache
from typing import Dict, List

from errors import ModelFileError
from model import (CASE1_DIVERGENT, CASE2_INTEGRABLE, ModelSpec, RadialProfile,
                   ValidatedModel, validate_model)

PRESETS: Dict[str, ModelSpec] = {
    "M1": ModelSpec(
        name="M1", dimension=1, epsilon=1.0,
        omega=RadialProfile("abs"),
        coupling=RadialProfile("box", radius=1.0),
        integrability=CASE1_DIVERGENT,
    ),
    "M3": ModelSpec(
        name="M3", dimension=3, epsilon=1.0,
        omega=RadialProfile("abs"),
        coupling=RadialProfile("box", radius=1.0),
        integrability=CASE2_INTEGRABLE,
    ),
    "MF": ModelSpec(
        name="MF", dimension=1, epsilon=1.0,
        omega=RadialProfile("flat-bottom", mass=0.0, kink=1.0),
        coupling=RadialProfile("box", radius=2.0),
        integrability=CASE1_DIVERGENT,
    ),
    "MR": ModelSpec(
        name="MR", dimension=3, epsilon=1.0,
        omega=RadialProfile("relativistic", mass=3.0),
        coupling=RadialProfile("box", radius=1.0),
        integrability=CASE2_INTEGRABLE,
    ),
}


def preset_names() -> List[str]:
    return list(PRESETS)


@lru_cache(maxsize=None)
def get_preset(name: str) -> ValidatedModel:
    """
    Return a validated bundled model.

    Args:
        name: One of M1, M3, MF, MR

    Returns:
        ValidatedModel
    """
    if name not in PRESETS:
        raise ModelFileError(f"unknown preset '{name}', choose from {preset_names()}")
    return validate_model(PRESETS[name])
