"""Poisson ML-EM reconstruction, dual certificates and concentration bounds."""

from ._core import (
    CapabilityError,
    ConditionError,
    DimensionError,
    DomainError,
    Error,
    Operator,
    ParameterError,
    StateError,
    bell_number,
    bounds,
    certify,
    cone_membership,
    dual_value,
    epsilon_by_search,
    escape_probability,
    kl,
    loss,
    loss_gradient,
    mlem,
    sample_counts,
    single_detector_iterate,
)

__all__ = [
    "CapabilityError",
    "ConditionError",
    "DimensionError",
    "DomainError",
    "Error",
    "Operator",
    "ParameterError",
    "StateError",
    "bell_number",
    "bounds",
    "certify",
    "cone_membership",
    "dual_value",
    "epsilon_by_search",
    "escape_probability",
    "kl",
    "loss",
    "loss_gradient",
    "mlem",
    "sample_counts",
    "single_detector_iterate",
]
