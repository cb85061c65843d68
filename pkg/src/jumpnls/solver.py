"""Jump-adapted time stepping for the truncated dynamics.

Between jumps the state follows the drift

    du/dt = -i A u - i F_n(u) + i B_n(m) u + D(u),

where ``m`` is the mean of the simulated jump marks, and ``D`` closes the
compensator of the jumps below the simulation cutoff (second-order Taylor
form, or exact per-atom form for purely atomic measures).  At each sampled
jump the state is pushed through the unitary time-1 flow ``exp(-i B(l))``.

Two steppers are provided.  ``FaithfulMidpoint`` treats the diagonal part
exactly (half-step phase factors) and applies the implicit midpoint rule to
the remaining non-stiff drift, so mass is conserved to the fixed-point
tolerance and the pure-diagonal flow is reproduced to rounding.  ``SplitStep``
composes half-step phases with an exact pointwise gauge rotation for the
nonlinearity and an explicit Euler substep for the noise drift; it is cheaper
and first-order accurate in the mass budget, second order in the state.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .exceptions import ConfigurationError, NumericsError, ShapeError
from .jumps import (
    NoiseOperators,
    assemble_noise_operators,
    generator,
    jump_difference_2,
    jump_map,
)
from .noise import AtomicMeasure, JumpEvent, NoiseMoments, compute_moments, sample_prm
from .nonlinear import Nonlinearity, eval_F, eval_Fhat, validate_exponent
from .spectral import GalerkinLevel, SpectralModel, apply_smoothing, build_level

MODE_MIDPOINT = "FaithfulMidpoint"
MODE_SPLITSTEP = "SplitStep"
CLOSURE_TAYLOR2 = "Taylor2"
CLOSURE_ATOMIC = "AtomicExact"

_MODES = (MODE_MIDPOINT, MODE_SPLITSTEP)
_CLOSURES = (CLOSURE_TAYLOR2, CLOSURE_ATOMIC)


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    mode: str = MODE_MIDPOINT
    dt: float = 1e-3
    closure: str = CLOSURE_TAYLOR2
    fp_tol: float = 1e-12
    max_fp_iters: int = 100
    max_halvings: int = 20

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigurationError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.closure not in _CLOSURES:
            raise ConfigurationError(
                f"closure must be one of {_CLOSURES}, got {self.closure!r}"
            )
        if not (self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.fp_tol > 0):
            raise ConfigurationError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.max_fp_iters < 1:
            raise ConfigurationError("max_fp_iters must be at least 1")
        if self.max_halvings < 0:
            raise ConfigurationError("max_halvings must be nonnegative")


@dataclasses.dataclass(frozen=True)
class GalerkinProblem:
    """One truncation level with its drift ingredients and initial state.

    ``initial`` holds level coefficients (already smoothed and renormalized);
    ``ops``/``measure``/``moments`` are None for deterministic runs.
    """

    model: SpectralModel
    level: GalerkinLevel
    horizon: float
    initial: np.ndarray
    nonlinearity: Nonlinearity | None = None
    ops: NoiseOperators | None = None
    measure: object | None = None
    moments: NoiseMoments | None = None

    def __post_init__(self):
        if not (self.horizon > 0):
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.initial.shape != (self.level.dim,):
            raise ShapeError(
                f"initial state must have {self.level.dim} coefficients, "
                f"got shape {self.initial.shape}"
            )
        if self.measure is not None and self.ops is None:
            raise ConfigurationError("a jump measure requires noise operators")
        if self.ops is not None and self.measure is not None:
            if self.measure.dimension != self.ops.num_channels:
                raise ConfigurationError(
                    f"measure has {self.measure.dimension} mark components but "
                    f"{self.ops.num_channels} noise channels are assembled"
                )
        if self.measure is not None and self.moments is None:
            raise ConfigurationError("a jump measure requires precomputed moments")


def renormalize_initial(
    model: SpectralModel, level: GalerkinLevel, initial_full: np.ndarray
) -> np.ndarray:
    """Smooth-truncate full-space data onto the level, restoring its H norm.

    Returns S_n u0 scaled so its norm equals ||u0||; the zero vector if the
    truncation annihilates u0 entirely.
    """
    initial_full = np.asarray(initial_full, dtype=complex)
    smoothed = apply_smoothing(level, initial_full)
    norm_full = float(np.linalg.norm(initial_full))
    norm_smoothed = float(np.linalg.norm(smoothed))
    if norm_smoothed == 0.0:
        return np.zeros(level.dim, dtype=complex)
    return smoothed * (norm_full / norm_smoothed)


def build_problem(
    model: SpectralModel,
    level_n: int,
    initial_full: np.ndarray,
    horizon: float,
    nonlinearity: Nonlinearity | None = None,
    symbols: np.ndarray | None = None,
    measure=None,
    lp_exponent: float | None = None,
    rng: np.random.Generator | None = None,
) -> GalerkinProblem:
    """Assemble level, noise operators, and moments for one truncation."""
    level = build_level(model, level_n)
    if nonlinearity is not None:
        validate_exponent(nonlinearity, model.domain.dimension, model.beta)
    ops = None
    moments = None
    if symbols is not None:
        symbols = np.atleast_2d(np.asarray(symbols, dtype=float))
        ops = assemble_noise_operators(
            model, level, symbols, lp_exponent=lp_exponent, rng=rng
        )
    if measure is not None:
        if ops is None:
            raise ConfigurationError("a jump measure requires noise symbols")
        moments = compute_moments(measure)
    initial = renormalize_initial(model, level, initial_full)
    return GalerkinProblem(
        model=model,
        level=level,
        horizon=float(horizon),
        initial=initial,
        nonlinearity=nonlinearity,
        ops=ops,
        measure=measure,
        moments=moments,
    )


# ---------------------------------------------------------------------------
# drift assembly
# ---------------------------------------------------------------------------

class _Dynamics:
    """Per-run workspace: precomputed drift matrices and phase cache."""

    def __init__(self, problem: GalerkinProblem, config: SolverConfig):
        self.model = problem.model
        self.idx = problem.level.indices
        self.lam = problem.model.eigenvalues_A[self.idx]
        self.nl = problem.nonlinearity
        self.ops = problem.ops
        self.mean_matrix = None
        self.closure_matrix = None
        self.small_atoms = ()
        self._phase_cache: dict[float, np.ndarray] = {}
        self.fp_iters_max = 0

        if problem.ops is not None and problem.moments is not None:
            moments = problem.moments
            if np.any(moments.mean_simulated != 0.0):
                self.mean_matrix = generator(problem.ops, moments.mean_simulated)
            if config.closure == CLOSURE_TAYLOR2:
                cov = moments.second_moment_small
                if np.any(cov != 0.0):
                    mats = problem.ops.matrices
                    self.closure_matrix = -0.5 * np.einsum(
                        "mn,mab,nbc->ac", cov, mats, mats
                    )
            else:
                if not isinstance(problem.measure, AtomicMeasure):
                    raise ConfigurationError(
                        "AtomicExact closure needs an atomic jump measure; "
                        "use Taylor2 for measures with infinitely many small jumps"
                    )
                marks, weights = problem.measure.small_atoms()
                problem.ops.warm_cache(marks)
                self.small_atoms = tuple(
                    (float(w), np.asarray(a, dtype=float))
                    for w, a in zip(weights, marks)
                )

        self.has_remainder = (
            self.nl is not None
            or self.mean_matrix is not None
            or self.closure_matrix is not None
            or len(self.small_atoms) > 0
        )

    def half_phase(self, tau: float) -> np.ndarray:
        phase = self._phase_cache.get(tau)
        if phase is None:
            phase = np.exp(-0.5j * tau * self.lam)
            self._phase_cache[tau] = phase
        return phase

    def noise_drift(self, state: np.ndarray) -> np.ndarray:
        out = np.zeros_like(state)
        if self.mean_matrix is not None:
            out += 1j * (self.mean_matrix @ state)
        if self.closure_matrix is not None:
            out += self.closure_matrix @ state
        for weight, mark in self.small_atoms:
            out += weight * jump_difference_2(self.ops, mark, state)
        return out

    def remainder(self, state: np.ndarray) -> np.ndarray:
        """All drift terms except the diagonal -i*lambda_A part."""
        out = self.noise_drift(state)
        if self.nl is not None:
            out -= 1j * eval_F(self.model, self.nl, state, indices=self.idx)
        return out

    def drift(self, state: np.ndarray) -> np.ndarray:
        return -1j * (self.lam * state) + self.remainder(state)


def drift(problem: GalerkinProblem, config: SolverConfig, state: np.ndarray) -> np.ndarray:
    """Full drift vector field at ``state`` (level coefficients)."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (problem.level.dim,):
        raise ShapeError(
            f"state must have {problem.level.dim} coefficients, got {state.shape}"
        )
    return _Dynamics(problem, config).drift(state)


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

def _midpoint_remainder(dyn: _Dynamics, state, tau, config, depth=0):
    """Implicit midpoint step for the non-diagonal drift, with halving fallback.

    Iterates d_{k+1} = r(u + (tau/2) d_k); the increment criterion bounds the
    state change per iteration, so the per-step mass defect is
    O(tau * fp_tol * |r|).
    """
    if not dyn.has_remainder:
        return state
    scale = max(1.0, float(np.linalg.norm(state)))
    # a diverging iterate may overflow through the nonlinearity; the inf/nan
    # gap simply reads as non-converged and the clean-state halving below
    # takes over, so the intermediate arithmetic warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        d = dyn.remainder(state)
        for iteration in range(config.max_fp_iters):
            d_next = dyn.remainder(state + (0.5 * tau) * d)
            gap = float(np.linalg.norm(d_next - d))
            d = d_next
            if tau * gap <= config.fp_tol * scale:
                if iteration + 1 > dyn.fp_iters_max:
                    dyn.fp_iters_max = iteration + 1
                return state + tau * d
    if depth >= config.max_halvings:
        raise NumericsError(
            f"midpoint iteration failed to converge at tau={tau:.3e} "
            f"after {config.max_halvings} halvings"
        )
    half = _midpoint_remainder(dyn, state, 0.5 * tau, config, depth + 1)
    return _midpoint_remainder(dyn, half, 0.5 * tau, config, depth + 1)


def _step_midpoint(dyn: _Dynamics, state, tau, config):
    phase = dyn.half_phase(tau)
    mid = _midpoint_remainder(dyn, phase * state, tau, config)
    return phase * mid


def _step_splitstep(dyn: _Dynamics, state, tau, config):
    phase = dyn.half_phase(tau)
    v = phase * state
    if dyn.nl is not None:
        values = dyn.model.synthesize(v, indices=dyn.idx)
        rotation = np.exp(
            -1j * tau * dyn.nl.sign * np.abs(values) ** (dyn.nl.alpha - 1)
        )
        v = dyn.model.analyze(values * rotation, indices=dyn.idx)
    noise = dyn.noise_drift(v)
    if np.any(noise != 0.0):
        v = v + tau * noise
    return phase * v


def step_between_jumps(
    problem: GalerkinProblem,
    config: SolverConfig,
    state: np.ndarray,
    tau: float,
) -> np.ndarray:
    """Advance one step of length ``tau`` using the configured stepper."""
    if not (tau > 0):
        raise ConfigurationError(f"step size must be positive, got {tau}")
    state = np.asarray(state, dtype=complex)
    if state.shape != (problem.level.dim,):
        raise ShapeError(
            f"state must have {problem.level.dim} coefficients, got {state.shape}"
        )
    dyn = _Dynamics(problem, config)
    if config.mode == MODE_MIDPOINT:
        return _step_midpoint(dyn, state, tau, config)
    return _step_splitstep(dyn, state, tau, config)


# ---------------------------------------------------------------------------
# trajectory integration
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class TrajectoryRecord:
    """One simulated path sampled on the jump-adapted grid (cadlag: the value
    recorded at a jump time is the post-jump state)."""

    level_n: int
    indices: np.ndarray
    ea_weights: np.ndarray
    times: np.ndarray
    states: np.ndarray | None
    mass: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    energy: np.ndarray
    ea_norm: np.ndarray
    events: list[JumpEvent]
    variance_budget: float
    fp_iters_max: int = 0


def _time_grid(horizon: float, dt: float, event_times) -> np.ndarray:
    n_steps = max(1, int(np.ceil(horizon / dt - 1e-9)))
    base = np.linspace(0.0, horizon, n_steps + 1)
    if len(event_times) == 0:
        return base
    return np.union1d(base, event_times)


def simulate(
    problem: GalerkinProblem,
    config: SolverConfig,
    rng: np.random.Generator | None = None,
    events: list[JumpEvent] | None = None,
    record_states: bool = True,
) -> TrajectoryRecord:
    """Integrate one trajectory over [0, horizon].

    Jumps are sampled from the problem's measure with ``rng`` unless an
    explicit ``events`` list is supplied (it must be time-sorted within the
    horizon).  The state is recorded at every grid node and every jump time,
    after the jump is applied.
    """
    if events is None:
        if problem.measure is None:
            events = []
        else:
            if rng is None:
                raise ConfigurationError(
                    "sampling jumps requires a random generator"
                )
            events = sample_prm(problem.measure, problem.horizon, rng)
    else:
        events = list(events)
        times = [e.time for e in events]
        if any(t < 0.0 or t > problem.horizon for t in times):
            raise ConfigurationError("jump events must lie within [0, horizon]")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ConfigurationError("jump events must be time-sorted")
        if events and problem.ops is None:
            raise ConfigurationError("jump events supplied without noise operators")

    dyn = _Dynamics(problem, config)
    stepper = _step_midpoint if config.mode == MODE_MIDPOINT else _step_splitstep

    grid = _time_grid(problem.horizon, config.dt, [e.time for e in events])
    num_nodes = len(grid)
    dim = problem.level.dim
    lam = problem.model.eigenvalues_A[problem.level.indices]
    ea_weights = 1.0 + lam

    states = np.zeros((num_nodes, dim), dtype=complex) if record_states else None
    mass = np.zeros(num_nodes)
    kinetic = np.zeros(num_nodes)
    potential = np.zeros(num_nodes)
    ea_norm = np.zeros(num_nodes)

    u = problem.initial.astype(complex, copy=True)
    event_iter = iter(events)
    pending = next(event_iter, None)

    def record(i, u):
        sq = np.abs(u) ** 2
        mass[i] = np.sum(sq)
        kinetic[i] = 0.5 * np.sum(lam * sq)
        if problem.nonlinearity is not None:
            potential[i] = eval_Fhat(
                problem.model, problem.nonlinearity, u, indices=problem.level.indices
            )
        ea_norm[i] = np.sqrt(np.sum(ea_weights * sq))
        if states is not None:
            states[i] = u

    for i, t in enumerate(grid):
        if i > 0:
            tau = t - grid[i - 1]
            u = stepper(dyn, u, tau, config)
        while pending is not None and pending.time <= t:
            u = jump_map(problem.ops, pending.mark, u)
            pending = next(event_iter, None)
        record(i, u)

    return TrajectoryRecord(
        level_n=problem.level.n,
        indices=problem.level.indices.copy(),
        ea_weights=ea_weights,
        times=grid,
        states=states,
        mass=mass,
        kinetic=kinetic,
        potential=potential,
        energy=kinetic + potential,
        ea_norm=ea_norm,
        events=events,
        variance_budget=(
            0.0 if problem.moments is None else problem.moments.variance_budget
        ),
        fp_iters_max=dyn.fp_iters_max,
    )


@dataclasses.dataclass(frozen=True)
class CoupledResult:
    """Two levels driven by one jump realization, with their dual-norm gap."""

    record_low: TrajectoryRecord
    record_high: TrajectoryRecord
    distances: np.ndarray       # per recorded time, || . ||_{E_A*}
    distance: float             # sup over recorded times

    @property
    def levels(self) -> tuple[int, int]:
        return (self.record_low.level_n, self.record_high.level_n)


def simulate_coupled(
    problem_low: GalerkinProblem,
    problem_high: GalerkinProblem,
    config: SolverConfig,
    rng: np.random.Generator | None = None,
    events: list[JumpEvent] | None = None,
    record_states: bool = True,
) -> CoupledResult:
    """Run two truncation levels against the same sampled jump path.

    Both problems must share the spectral model and horizon, with the first
    strictly coarser.  The returned distance is the supremum over recorded
    times of the dual-norm difference, computed on the finer level's modes
    (the coarse path embeds by zero padding).
    """
    if problem_low.model is not problem_high.model:
        raise ConfigurationError("coupled runs need a shared spectral model")
    if problem_low.horizon != problem_high.horizon:
        raise ConfigurationError("coupled runs need a common horizon")
    if problem_low.level.n >= problem_high.level.n:
        raise ConfigurationError("first problem must be the coarser level")
    if (problem_low.measure is None) != (problem_high.measure is None):
        raise ConfigurationError("both levels need the same jump measure")

    if events is None and problem_low.measure is not None:
        if rng is None:
            raise ConfigurationError("sampling jumps requires a random generator")
        events = sample_prm(problem_low.measure, problem_low.horizon, rng)
    if events is None:
        events = []

    rec_low = simulate(problem_low, config, events=events, record_states=True)
    rec_high = simulate(problem_high, config, events=events, record_states=True)

    # nested dyadic blocks: the coarse indices are a prefix of the fine ones
    positions = np.searchsorted(rec_high.indices, rec_low.indices)
    if not np.array_equal(rec_high.indices[positions], rec_low.indices):
        raise ConfigurationError("levels are not nested in the mode table")

    low_embedded = np.zeros_like(rec_high.states)
    low_embedded[:, positions] = rec_low.states
    inv_w = 1.0 / rec_high.ea_weights
    distances = np.sqrt(
        np.sum(np.abs(rec_high.states - low_embedded) ** 2 * inv_w, axis=1)
    )
    if not record_states:
        rec_low.states = None
        rec_high.states = None
    return CoupledResult(
        record_low=rec_low,
        record_high=rec_high,
        distances=distances,
        distance=float(np.max(distances)),
    )
