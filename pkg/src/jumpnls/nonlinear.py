"""Power nonlinearity |u|^(alpha-1) u with sign, and its antiderivative functional.

Evaluation is pseudospectral: synthesize to the (oversampled) quadrature grid,
apply the pointwise power, and analyze back.  The grid pairing makes
``<u, F(u)>`` a nonnegative quadrature sum times the sign, so the structural
identity ``Re <i u, F(u)> = 0`` holds to rounding regardless of aliasing.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .exceptions import ConfigurationError
from .spectral import SpectralModel

DEFOCUSING = +1
FOCUSING = -1

#: amplitudes below this are treated as exactly zero in the pointwise power
_UNDERFLOW_FLOOR = 1e-300


@dataclasses.dataclass(frozen=True)
class Nonlinearity:
    """Exponent alpha > 1 and sign (+1 defocusing, -1 focusing)."""

    alpha: float
    sign: int

    def __post_init__(self):
        if not (self.alpha > 1.0) or not math.isfinite(self.alpha):
            raise ConfigurationError(f"alpha must be > 1, got {self.alpha}")
        if self.sign not in (DEFOCUSING, FOCUSING):
            raise ConfigurationError(f"sign must be +1 or -1, got {self.sign}")


def defocusing(alpha: float) -> Nonlinearity:
    return Nonlinearity(alpha=float(alpha), sign=DEFOCUSING)


def focusing(alpha: float) -> Nonlinearity:
    return Nonlinearity(alpha=float(alpha), sign=FOCUSING)


def admissible_alpha_cap(sign: int, dimension: int, beta: float = 1.0) -> float:
    """Largest admissible exponent (exclusive) for global well-posedness.

    Defocusing: ``1 + 4*beta / (d - 2*beta)`` when ``d > 2*beta``, else
    unbounded.  Focusing: ``1 + 4*beta / d``.  ``beta = 1`` gives the
    classical windows; the fractional scaling shrinks them accordingly.
    """
    if dimension not in (1, 2):
        raise ConfigurationError(f"dimension must be 1 or 2, got {dimension}")
    if sign == DEFOCUSING:
        if dimension <= 2 * beta:
            return math.inf
        return 1.0 + 4.0 * beta / (dimension - 2.0 * beta)
    if sign == FOCUSING:
        return 1.0 + 4.0 * beta / dimension
    raise ConfigurationError(f"sign must be +1 or -1, got {sign}")


def validate_exponent(nl: Nonlinearity, dimension: int, beta: float = 1.0) -> None:
    """Reject exponents outside the admissible window (strict upper bound)."""
    cap = admissible_alpha_cap(nl.sign, dimension, beta)
    if not (nl.alpha < cap):
        kind = "defocusing" if nl.sign == DEFOCUSING else "focusing"
        raise ConfigurationError(
            f"{kind} alpha={nl.alpha} not admissible in dimension {dimension} "
            f"with beta={beta}: requires alpha < {cap}"
        )


def _pointwise_power(values: np.ndarray, alpha: float) -> np.ndarray:
    amp = np.abs(values)
    # overflow to inf is acceptable: callers iterating toward a fixed point
    # read it as a diverged step and shorten
    with np.errstate(over="ignore", invalid="ignore"):
        factor = np.where(amp < _UNDERFLOW_FLOOR, 0.0, amp ** (alpha - 1.0))
        return factor * values


def eval_F(
    model: SpectralModel,
    nl: Nonlinearity,
    coefficients: np.ndarray,
    indices=None,
) -> np.ndarray:
    """Coefficients of sign * |u|^(alpha-1) u on the selected mode set.

    Computing only the selected coefficients is exactly the composition with
    the orthogonal projection onto that mode set.
    """
    values = model.synthesize(coefficients, indices=indices)
    return nl.sign * model.analyze(_pointwise_power(values, nl.alpha), indices=indices)


def eval_Fhat(
    model: SpectralModel,
    nl: Nonlinearity,
    coefficients: np.ndarray,
    indices=None,
) -> float:
    """Antiderivative functional sign/(alpha+1) * ||u||_{L^{alpha+1}}^{alpha+1}.

    Its directional derivative in h is ``Re <F(u), h>``, which pairs it with
    :func:`eval_F`; both use the same quadrature so the identity survives
    discretisation.
    """
    values = model.synthesize(coefficients, indices=indices)
    integral = float(np.sum(model.grid_weights * np.abs(values) ** (nl.alpha + 1.0)))
    return nl.sign * integral / (nl.alpha + 1.0)
