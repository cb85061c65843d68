"""Pure-jump driving noise: intensity measures, Poisson sampling, moments.

All marks live in the closed unit ball of R^N.  A cutoff ``epsilon`` splits
the measure: jumps with ``|l| >= epsilon`` are simulated as discrete events,
the remainder enters the dynamics only through its first/second moments.

Two measure families:

* ``AtomicMeasure`` — finitely many weighted atoms; exact simulation with
  ``epsilon = 0`` is allowed (finite activity).
* ``RadialStableMeasure`` — density ``c |l|^(-N-beta)`` on the punctured unit
  ball, ``beta`` in (0, 2); infinite activity, so ``epsilon > 0`` is required
  to simulate.

Randomness: one master seed; trajectory k draws from an independent stream
whose seed is a fixed 64-bit hash (splitmix64) of ``master_seed`` and ``k``,
so trajectories are reproducible regardless of scheduling or worker count.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .exceptions import ConfigurationError, ShapeError

_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def trajectory_seed(master_seed: int, index: int) -> int:
    """Fixed 64-bit hash mixing the trajectory index into the master seed."""
    if index < 0:
        raise ValueError(f"trajectory index must be >= 0, got {index}")
    return _splitmix64((int(master_seed) + (index + 1) * _GOLDEN64) & _MASK64)


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(trajectory_seed(master_seed, index))


def _sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclasses.dataclass(frozen=True)
class JumpEvent:
    time: float
    mark: np.ndarray  # shape (N,)


@dataclasses.dataclass(frozen=True)
class NoiseMoments:
    """Closed-form moments of one intensity measure at its cutoff.

    ``mean_simulated`` is the first moment over the simulated region
    ``epsilon <= |l| <= 1``; ``second_moment_small`` and its trace
    ``variance_budget`` cover the neglected region ``|l| < epsilon`` and
    bound the error of dropping its martingale part.
    """

    mean_simulated: np.ndarray        # (N,)
    second_moment_small: np.ndarray   # (N, N)
    variance_budget: float


@dataclasses.dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of weighted atoms inside the closed unit ball."""

    marks: np.ndarray    # (J, N)
    weights: np.ndarray  # (J,)
    epsilon: float = 0.0

    def __post_init__(self):
        marks = np.atleast_2d(np.asarray(self.marks, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if marks.ndim != 2 or marks.shape[0] != len(weights):
            raise ShapeError("marks must be (J, N) with one weight per atom")
        if len(weights) == 0:
            raise ConfigurationError("need at least one atom")
        if np.any(weights <= 0):
            raise ConfigurationError("atom weights must be positive")
        radii = np.linalg.norm(marks, axis=1)
        if np.any(radii > 1.0 + 1e-12):
            raise ConfigurationError("atom marks must lie in the closed unit ball")
        if np.any(radii == 0.0):
            raise ConfigurationError("atom marks must be nonzero")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return self.marks.shape[1]

    @property
    def infinite_activity(self) -> bool:
        return False

    def _split(self):
        radii = np.linalg.norm(self.marks, axis=1)
        simulated = radii >= self.epsilon
        return simulated, ~simulated

    def simulated_intensity(self) -> float:
        simulated, _ = self._split()
        return float(np.sum(self.weights[simulated]))

    def simulated_second_moment(self) -> float:
        simulated, _ = self._split()
        r2 = np.sum(self.marks[simulated] ** 2, axis=1)
        return float(np.sum(self.weights[simulated] * r2))

    def moments(self) -> NoiseMoments:
        simulated, small = self._split()
        mean = self.weights[simulated] @ self.marks[simulated]
        sm = (self.weights[small, None] * self.marks[small]).T @ self.marks[small]
        return NoiseMoments(
            mean_simulated=np.asarray(mean, dtype=float).reshape(self.dimension),
            second_moment_small=np.asarray(sm, dtype=float),
            variance_budget=float(np.trace(sm)),
        )

    def small_atoms(self):
        """Atoms below the cutoff: (marks, weights) of the neglected region."""
        _, small = self._split()
        return self.marks[small], self.weights[small]

    def sample_mark(self, rng: np.random.Generator) -> np.ndarray:
        simulated, _ = self._split()
        marks = self.marks[simulated]
        weights = self.weights[simulated]
        j = rng.choice(len(weights), p=weights / np.sum(weights))
        return marks[j].copy()


@dataclasses.dataclass(frozen=True)
class RadialStableMeasure:
    """Density c |l|^(-N-beta) on {0 < |l| <= 1}; infinite activity at 0."""

    activity: float          # c > 0
    stability: float         # beta in (0, 2)
    dimension: int = 1
    epsilon: float = 0.1

    def __post_init__(self):
        if not (self.activity > 0) or not math.isfinite(self.activity):
            raise ConfigurationError(f"activity must be positive, got {self.activity}")
        if not (0.0 < self.stability < 2.0):
            raise ConfigurationError(
                f"stability must be in (0, 2), got {self.stability}"
            )
        if self.dimension < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.dimension}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigurationError(
                f"epsilon must be in (0, 1] for infinite activity, got {self.epsilon}"
            )

    @property
    def infinite_activity(self) -> bool:
        return True

    def simulated_intensity(self) -> float:
        c, b = self.activity, self.stability
        return c * _sphere_area(self.dimension) * (self.epsilon**-b - 1.0) / b

    def simulated_second_moment(self) -> float:
        c, b, n = self.activity, self.stability, self.dimension
        return c * _sphere_area(n) * (1.0 - self.epsilon ** (2.0 - b)) / (2.0 - b)

    def moments(self) -> NoiseMoments:
        n = self.dimension
        c, b = self.activity, self.stability
        sigma2 = c * _sphere_area(n) * self.epsilon ** (2.0 - b) / (2.0 - b)
        return NoiseMoments(
            mean_simulated=np.zeros(n),  # radial symmetry
            second_moment_small=(sigma2 / n) * np.eye(n),
            variance_budget=sigma2,
        )

    def sample_mark(self, rng: np.random.Generator) -> np.ndarray:
        # inverse-CDF radius on [epsilon, 1]; isotropic direction
        b = self.stability
        u = rng.uniform()
        eb = self.epsilon**-b
        r = (eb - u * (eb - 1.0)) ** (-1.0 / b)
        if self.dimension == 1:
            sign = 1.0 if rng.uniform() < 0.5 else -1.0
            return np.array([sign * r])
        vec = rng.standard_normal(self.dimension)
        vec /= np.linalg.norm(vec)
        return r * vec


def compute_moments(measure) -> NoiseMoments:
    """Closed-form mean / small-jump second moment / variance budget."""
    return measure.moments()


def sample_prm(measure, horizon: float, rng: np.random.Generator) -> list[JumpEvent]:
    """Draw the events of the simulated region on [0, horizon].

    Count ~ Poisson(intensity * horizon), times i.i.d. uniform (sorted),
    marks i.i.d. from the normalized restriction of the measure.
    """
    if not (horizon > 0):
        raise ValueError(f"horizon must be positive, got {horizon}")
    total = measure.simulated_intensity()
    if total == 0.0:
        return []
    count = rng.poisson(total * horizon)
    times = np.sort(rng.uniform(0.0, horizon, size=count))
    return [JumpEvent(time=float(t), mark=measure.sample_mark(rng)) for t in times]


def reconstruct_levy_path(
    events: list[JumpEvent],
    moments: NoiseMoments,
    time_grid: np.ndarray,
) -> np.ndarray:
    """Compensated path: sum of marks up to t minus t * mean_simulated.

    Returns an array of shape (len(time_grid), N).
    """
    time_grid = np.asarray(time_grid, dtype=float)
    n = len(moments.mean_simulated)
    out = np.zeros((len(time_grid), n))
    if events:
        times = np.array([e.time for e in events])
        marks = np.vstack([e.mark for e in events])
        cumulative = np.vstack([np.zeros(n), np.cumsum(marks, axis=0)])
        counts = np.searchsorted(times, time_grid, side="right")
        out = cumulative[counts]
    return out - np.outer(time_grid, moments.mean_simulated)
