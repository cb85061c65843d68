"""Stepper and trajectory tests: exactness, conservation, order, jump handling."""

import numpy as np
import pytest

from jumpnls.exceptions import ConfigurationError, NumericsError, ShapeError
from jumpnls.jumps import jump_map
from jumpnls.noise import (
    AtomicMeasure,
    JumpEvent,
    RadialStableMeasure,
    trajectory_rng,
)
from jumpnls.nonlinear import defocusing
from jumpnls.solver import (
    CLOSURE_ATOMIC,
    CLOSURE_TAYLOR2,
    MODE_MIDPOINT,
    MODE_SPLITSTEP,
    GalerkinProblem,
    SolverConfig,
    build_problem,
    drift,
    renormalize_initial,
    simulate,
    simulate_coupled,
    step_between_jumps,
)
from jumpnls.spectral import build_level


def decaying_initial(model, seed=11, rate=0.4):
    rng = np.random.default_rng(seed)
    lam = model.eigenvalues_S
    phases = np.exp(2j * np.pi * rng.random(model.num_modes))
    return np.exp(-rate * np.sqrt(lam)) * phases


@pytest.fixture(scope="module")
def cos_symbol(torus_model):
    return np.cos(torus_model.grid_points[:, 0])


# ---------------------------------------------------------------------------
# configuration and initial data
# ---------------------------------------------------------------------------

def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(mode="midpoint")
    with pytest.raises(ConfigurationError):
        SolverConfig(closure="taylor")
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=-1e-3)
    with pytest.raises(ConfigurationError):
        SolverConfig(fp_tol=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(max_fp_iters=0)


def test_problem_validation(torus_model):
    u0 = decaying_initial(torus_model)
    with pytest.raises(ConfigurationError):
        build_problem(torus_model, 4, u0, horizon=0.0)
    with pytest.raises(ConfigurationError):
        build_problem(torus_model, 4, u0, horizon=-1.0)
    # a measure without symbols has no operators to act through
    measure = AtomicMeasure(marks=[[0.3]], weights=[1.0])
    with pytest.raises(ConfigurationError):
        build_problem(torus_model, 4, u0, horizon=1.0, measure=measure)
    # channel count must match the mark dimension
    with pytest.raises(ConfigurationError):
        build_problem(
            torus_model, 4, u0, horizon=1.0,
            symbols=np.cos(torus_model.grid_points[:, 0]),
            measure=AtomicMeasure(marks=[[0.3, 0.1]], weights=[1.0]),
        )


def test_renormalize_preserves_norm(torus_model):
    level = build_level(torus_model, 4)
    u0 = decaying_initial(torus_model)
    tilde = renormalize_initial(torus_model, level, u0)
    assert tilde.shape == (level.dim,)
    assert np.linalg.norm(tilde) == pytest.approx(np.linalg.norm(u0), rel=1e-14)
    # direction matches the smoothed truncation
    smoothed = level.multipliers * u0[level.indices]
    cross = np.abs(np.vdot(smoothed, tilde))
    assert cross == pytest.approx(
        np.linalg.norm(smoothed) * np.linalg.norm(tilde), rel=1e-13
    )


def test_renormalize_annihilated_data_gives_zero(torus_model):
    level = build_level(torus_model, 2)
    u0 = decaying_initial(torus_model)
    u0[level.indices] = 0.0  # support entirely above the level
    tilde = renormalize_initial(torus_model, level, u0)
    assert np.all(tilde == 0.0)
    assert np.linalg.norm(u0) > 0


# ---------------------------------------------------------------------------
# drift assembly
# ---------------------------------------------------------------------------

def test_drift_pure_diagonal(torus_model):
    problem = build_problem(torus_model, 5, decaying_initial(torus_model), 1.0)
    config = SolverConfig()
    u = problem.initial
    d = drift(problem, config, u)
    lam = torus_model.eigenvalues_A[problem.level.indices]
    assert np.allclose(d, -1j * lam * u, rtol=0, atol=1e-15)


def test_drift_antisymmetry_no_closure(torus_model, cos_symbol):
    # asymmetric atoms, cutoff 0: compensated mean term but empty closure,
    # so Re<u, drift(u)> vanishes identically
    measure = AtomicMeasure(marks=[[0.4], [-0.2]], weights=[1.0, 0.5], epsilon=0.0)
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(3.0), symbols=cos_symbol, measure=measure,
    )
    config = SolverConfig()
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = rng.normal(size=problem.level.dim) + 1j * rng.normal(size=problem.level.dim)
        d = drift(problem, config, u)
        pairing = np.vdot(u, d).real
        assert abs(pairing) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(d)


def test_drift_mean_term_matches_manual_formula(torus_model, cos_symbol):
    measure = AtomicMeasure(marks=[[0.4], [-0.2]], weights=[1.0, 0.5], epsilon=0.0)
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0,
        symbols=cos_symbol, measure=measure,
    )
    u = problem.initial
    d = drift(problem, SolverConfig(), u)
    lam = torus_model.eigenvalues_A[problem.level.indices]
    mean = 1.0 * 0.4 + 0.5 * (-0.2)
    manual = -1j * lam * u + 1j * mean * (problem.ops.matrices[0] @ u)
    assert np.linalg.norm(d - manual) <= 1e-13 * np.linalg.norm(manual)


def test_closures_agree_to_third_order(torus_model, cos_symbol):
    # single small atom: Taylor2 reproduces the exact per-atom closure up to
    # the cubic remainder of exp(-iB), |theta|^3/6 per eigenvalue
    u = None
    for radius in (1e-2, 1e-3):
        measure = AtomicMeasure(
            marks=[[radius], [0.9]], weights=[2.0, 1.0], epsilon=0.5
        )
        problem = build_problem(
            torus_model, 5, decaying_initial(torus_model), 1.0,
            symbols=cos_symbol, measure=measure,
        )
        u = problem.initial
        d_taylor = drift(problem, SolverConfig(closure=CLOSURE_TAYLOR2), u)
        d_atomic = drift(problem, SolverConfig(closure=CLOSURE_ATOMIC), u)
        gap = np.linalg.norm(d_atomic - d_taylor)
        bound = 2.0 * (radius * np.sqrt(problem.ops.bound_H)) ** 3 / 6.0
        assert gap <= bound * np.linalg.norm(u) * (1 + 1e-10)
        assert gap > 0


def test_atomic_closure_rejects_infinite_activity(torus_model, cos_symbol):
    measure = RadialStableMeasure(activity=1.0, stability=1.0, dimension=1,
                                  epsilon=0.1)
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0,
        symbols=cos_symbol, measure=measure,
    )
    with pytest.raises(ConfigurationError):
        drift(problem, SolverConfig(closure=CLOSURE_ATOMIC), problem.initial)


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", [MODE_MIDPOINT, MODE_SPLITSTEP])
def test_diagonal_flow_exact(torus_model, mode):
    problem = build_problem(torus_model, 6, decaying_initial(torus_model), 1.0)
    config = SolverConfig(mode=mode, dt=1e-2)
    lam = torus_model.eigenvalues_A[problem.level.indices]
    u = problem.initial.copy()
    steps = 100
    for _ in range(steps):
        u = step_between_jumps(problem, config, u, config.dt)
    exact = np.exp(-1j * lam * (steps * config.dt)) * problem.initial
    assert np.linalg.norm(u - exact) <= 1e-12 * np.linalg.norm(exact)
    assert abs(np.linalg.norm(u) - np.linalg.norm(problem.initial)) <= 1e-13


def test_midpoint_mass_conservation_nonlinear(torus_model):
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(3.0),
    )
    config = SolverConfig(mode=MODE_MIDPOINT, dt=1e-2)
    u = problem.initial.copy()
    mass0 = np.sum(np.abs(u) ** 2)
    for _ in range(100):
        u = step_between_jumps(problem, config, u, config.dt)
    assert abs(np.sum(np.abs(u) ** 2) - mass0) <= 1e-12 * mass0


def test_midpoint_time_reversibility(torus_model):
    # conjugation reverses time for the deterministic flow; a symmetric
    # stepper must return to the initial state through that involution
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(3.0),
    )
    config = SolverConfig(mode=MODE_MIDPOINT, fp_tol=1e-14)
    tau = 0.02
    u0 = problem.initial
    forward = step_between_jumps(problem, config, u0, tau)
    back = np.conj(step_between_jumps(problem, config, np.conj(forward), tau))
    assert np.linalg.norm(back - u0) <= 1e-10 * np.linalg.norm(u0)


@pytest.mark.parametrize("mode", [MODE_MIDPOINT, MODE_SPLITSTEP])
def test_second_order_convergence(torus_model, mode):
    # steep decay keeps the truncation well resolved, so the asymptotic
    # second-order regime is reached at these step sizes
    problem = build_problem(
        torus_model, 4, decaying_initial(torus_model, rate=1.2), 1.0,
        nonlinearity=defocusing(3.0),
    )
    horizon = 0.25

    def advance(dt):
        config = SolverConfig(mode=mode, dt=dt, fp_tol=1e-14)
        u = problem.initial.copy()
        for _ in range(int(round(horizon / dt))):
            u = step_between_jumps(problem, config, u, dt)
        return u

    reference = advance(horizon / 1024)
    errors = [np.linalg.norm(advance(horizon / n) - reference) for n in (32, 64)]
    ratio = errors[0] / errors[1]
    assert 3.2 <= ratio <= 4.8, f"order-2 ratio {ratio}, errors {errors}"


def test_split_and_midpoint_agree_at_small_steps(torus_model, cos_symbol):
    measure = AtomicMeasure(marks=[[0.5], [-0.5]], weights=[1.0, 1.0], epsilon=0.6)
    problem = build_problem(
        torus_model, 4, decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(3.0), symbols=cos_symbol, measure=measure,
    )
    u0 = problem.initial

    def one_step(mode, tau):
        return step_between_jumps(problem, SolverConfig(mode=mode), u0, tau)

    gaps = []
    for tau in (0.02, 0.01):
        gaps.append(
            np.linalg.norm(one_step(MODE_MIDPOINT, tau) - one_step(MODE_SPLITSTEP, tau))
        )
    # the Euler noise substep makes the split scheme first order in the
    # compensator terms, so one-step gaps shrink at O(tau^2)
    assert gaps[1] <= gaps[0] / 3.5
    assert gaps[0] > 0


def test_fixed_point_failure_raises(torus_model):
    problem = build_problem(
        torus_model, 6, 5.0 * decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(5.0),
    )
    bad = SolverConfig(mode=MODE_MIDPOINT, dt=0.5, max_fp_iters=2, max_halvings=0)
    with pytest.raises(NumericsError):
        step_between_jumps(problem, bad, problem.initial, bad.dt)
    # halving with a sane iteration budget rescues the same step
    rescued = SolverConfig(mode=MODE_MIDPOINT, dt=0.5, max_fp_iters=30,
                           max_halvings=12)
    out = step_between_jumps(problem, rescued, problem.initial, rescued.dt)
    mass0 = np.sum(np.abs(problem.initial) ** 2)
    assert abs(np.sum(np.abs(out) ** 2) - mass0) <= 1e-10 * mass0


def test_step_validation(torus_model):
    problem = build_problem(torus_model, 4, decaying_initial(torus_model), 1.0)
    config = SolverConfig()
    with pytest.raises(ConfigurationError):
        step_between_jumps(problem, config, problem.initial, 0.0)
    with pytest.raises(ShapeError):
        step_between_jumps(problem, config, problem.initial[:-1], 0.1)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def test_simulate_jump_adapted_grid_and_cadlag(torus_model, cos_symbol):
    # linear diagonal flow plus two prescribed jumps: everything has a
    # closed form, including the post-jump values recorded at event times
    level = build_level(torus_model, 5)
    problem = build_problem(
        torus_model, 5, decaying_initial(torus_model), 1.0, symbols=cos_symbol,
    )
    mark = np.array([0.7])
    events = [JumpEvent(time=0.35, mark=mark), JumpEvent(time=0.617, mark=-mark)]
    config = SolverConfig(dt=0.1)
    record = simulate(problem, config, events=events)

    assert record.times[0] == 0.0 and record.times[-1] == 1.0
    assert np.all(np.diff(record.times) > 0)
    for e in events:
        assert e.time in record.times

    lam = torus_model.eigenvalues_A[level.indices]
    u = problem.initial.copy()
    t_prev = 0.0
    expected = {}
    for e in events:
        u = np.exp(-1j * lam * (e.time - t_prev)) * u
        u = jump_map(problem.ops, e.mark, u)
        expected[e.time] = u.copy()
        t_prev = e.time
    final = np.exp(-1j * lam * (1.0 - t_prev)) * u

    for e in events:
        i = int(np.nonzero(record.times == e.time)[0][0])
        got = record.states[i]
        assert np.linalg.norm(got - expected[e.time]) <= 1e-12 * np.linalg.norm(got)
    assert np.linalg.norm(record.states[-1] - final) <= 1e-12 * np.linalg.norm(final)
    # unitary jumps: mass stays flat across the whole path
    assert np.max(np.abs(record.mass - record.mass[0])) <= 1e-12 * record.mass[0]
    assert record.events == events


def test_simulate_diagnostics_columns(torus_model, cos_symbol):
    measure = AtomicMeasure(marks=[[0.5], [-0.5]], weights=[2.0, 2.0])
    problem = build_problem(
        torus_model, 4, decaying_initial(torus_model), 0.5,
        nonlinearity=defocusing(3.0), symbols=cos_symbol, measure=measure,
    )
    record = simulate(problem, SolverConfig(dt=0.05), rng=trajectory_rng(42, 0))
    assert np.allclose(record.energy, record.kinetic + record.potential)
    sq = np.abs(record.states) ** 2
    assert np.allclose(record.mass, np.sum(sq, axis=1))
    assert np.allclose(record.ea_norm**2, np.sum(record.ea_weights * sq, axis=1))
    assert record.variance_budget == 0.0  # no atoms below the cutoff
    slim = simulate(problem, SolverConfig(dt=0.05), rng=trajectory_rng(42, 0),
                    record_states=False)
    assert slim.states is None
    assert np.array_equal(slim.mass, record.mass)


def test_simulate_reproducible_streams(torus_model, cos_symbol):
    measure = AtomicMeasure(marks=[[0.4], [-0.4]], weights=[3.0, 3.0])
    problem = build_problem(
        torus_model, 4, decaying_initial(torus_model), 1.0,
        nonlinearity=defocusing(3.0), symbols=cos_symbol, measure=measure,
    )
    config = SolverConfig(dt=0.02)
    rec1 = simulate(problem, config, rng=trajectory_rng(7, 3))
    rec2 = simulate(problem, config, rng=trajectory_rng(7, 3))
    rec_other = simulate(problem, config, rng=trajectory_rng(7, 4))
    assert np.array_equal(rec1.states, rec2.states)
    assert np.array_equal(rec1.times, rec2.times)
    if len(rec1.events) or len(rec_other.events):
        same = len(rec1.events) == len(rec_other.events) and all(
            e1.time == e2.time for e1, e2 in zip(rec1.events, rec_other.events)
        )
        assert not same


def test_simulate_event_validation(torus_model, cos_symbol):
    problem = build_problem(
        torus_model, 4, decaying_initial(torus_model), 1.0, symbols=cos_symbol,
    )
    mark = np.array([0.1])
    with pytest.raises(ConfigurationError):
        simulate(problem, SolverConfig(dt=0.1),
                 events=[JumpEvent(time=1.5, mark=mark)])
    with pytest.raises(ConfigurationError):
        simulate(problem, SolverConfig(dt=0.1),
                 events=[JumpEvent(time=0.9, mark=mark),
                         JumpEvent(time=0.2, mark=mark)])
    bare = build_problem(torus_model, 4, decaying_initial(torus_model), 1.0)
    with pytest.raises(ConfigurationError):
        simulate(bare, SolverConfig(dt=0.1), events=[JumpEvent(time=0.5, mark=mark)])
    # sampling without a generator is refused
    measure = AtomicMeasure(marks=[[0.4]], weights=[1.0])
    noisy = build_problem(torus_model, 4, decaying_initial(torus_model), 1.0,
                          symbols=cos_symbol, measure=measure)
    with pytest.raises(ConfigurationError):
        simulate(noisy, SolverConfig(dt=0.1))


def test_coupled_levels_identical_for_resolved_linear_flow(torus_model, cos_symbol):
    # initial data and dynamics confined to modes the coarse level resolves
    # without smoothing: both levels then follow the same path
    coarse = build_level(torus_model, 3)
    u0 = np.zeros(torus_model.num_modes, dtype=complex)
    resolved = coarse.indices[coarse.multipliers == 1.0]
    u0[resolved] = decaying_initial(torus_model)[resolved]
    measure = AtomicMeasure(marks=[[0.6], [-0.6]], weights=[2.0, 2.0])
    constant_symbol = np.ones(torus_model.num_grid)

    problems = [
        build_problem(torus_model, n, u0, 1.0, symbols=constant_symbol,
                      measure=measure)
        for n in (3, 6)
    ]
    result = simulate_coupled(problems[0], problems[1], SolverConfig(dt=0.05),
                              rng=trajectory_rng(5, 0))
    assert result.levels == (3, 6)
    assert np.array_equal(result.record_low.times, result.record_high.times)
    assert result.distance <= 1e-12
    assert len(result.distances) == len(result.record_low.times)


def test_coupled_levels_validation(torus_model, cos_symbol):
    u0 = decaying_initial(torus_model)
    p4 = build_problem(torus_model, 4, u0, 1.0)
    p6 = build_problem(torus_model, 6, u0, 1.0)
    with pytest.raises(ConfigurationError):
        simulate_coupled(p6, p4, SolverConfig(dt=0.1))
    with pytest.raises(ConfigurationError):
        simulate_coupled(p4, p4, SolverConfig(dt=0.1))
    p_short = build_problem(torus_model, 6, u0, 0.5)
    with pytest.raises(ConfigurationError):
        simulate_coupled(p4, p_short, SolverConfig(dt=0.1))


def test_coupled_nonlinear_distance_shrinks_with_level(torus_model):
    # same jump path, finer truncations successively closer to the finest
    u0 = decaying_initial(torus_model, rate=0.9)
    measure = AtomicMeasure(marks=[[0.5], [-0.5]], weights=[2.0, 2.0])
    symbol = np.cos(torus_model.grid_points[:, 0])
    config = SolverConfig(dt=0.02)

    def problem(n):
        return build_problem(torus_model, n, u0, 0.5,
                             nonlinearity=defocusing(3.0), symbols=symbol,
                             measure=measure)

    fine = problem(7)
    distances = []
    for n in (3, 5):
        result = simulate_coupled(problem(n), fine, config,
                                  rng=trajectory_rng(123, 0))
        distances.append(result.distance)
    assert distances[1] < distances[0]
