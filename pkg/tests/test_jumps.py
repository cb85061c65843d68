import numpy as np
import pytest

from jumpnls import jumps, spectral
from jumpnls.exceptions import ShapeError

from conftest import random_state


@pytest.fixture(scope="module")
def cos_ops(torus_model):
    level = spectral.build_level(torus_model, 5)
    symbol = np.cos(torus_model.grid_points[:, 0])
    return jumps.assemble_noise_operators(torus_model, level, [symbol])


@pytest.fixture(scope="module")
def two_channel_ops(torus_model):
    level = spectral.build_level(torus_model, 4)
    x = torus_model.grid_points[:, 0]
    return jumps.assemble_noise_operators(torus_model, level, [np.cos(x), np.sin(x)])


def tridiagonal_cos_oracle(model, level):
    """Analytic matrix of the smoothed cos(x) multiplier on the torus.

    cos(x) e^{ikx} = (e^{i(k+1)x} + e^{i(k-1)x}) / 2, so in the exponential
    basis the raw multiplication operator has 1/2 on wavenumber-adjacent
    pairs; smoothing scales entry (j, k) by the two cutoff values.
    """
    ks = model.wavenumbers[level.indices, 0]
    s = level.multipliers
    d = level.dim
    expected = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            if abs(ks[a] - ks[b]) == 1:
                expected[a, b] = 0.5 * s[a] * s[b]
    return expected


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_assembled_matrices_hermitian(cos_ops, two_channel_ops):
    for ops in (cos_ops, two_channel_ops):
        assert ops.hermiticity_defect <= 1e-12
        for M in ops.matrices:
            assert np.max(np.abs(M - M.conj().T)) == 0.0  # exactly symmetrized


def test_cos_matrix_matches_tridiagonal_oracle(torus_model, cos_ops):
    expected = tridiagonal_cos_oracle(torus_model, cos_ops.level)
    assert np.max(np.abs(cos_ops.matrices[0] - expected)) < 1e-13
    # level constant from the independent construction
    assert cos_ops.bound_H == pytest.approx(np.linalg.norm(expected, 2) ** 2, rel=1e-12)


def test_constant_symbol_is_diagonal(torus_model):
    level = spectral.build_level(torus_model, 4)
    c = 0.7
    ops = jumps.assemble_noise_operators(
        torus_model, level, [np.full(torus_model.num_grid, c)]
    )
    expected = np.diag(c * level.multipliers**2).astype(complex)
    assert np.max(np.abs(ops.matrices[0] - expected)) < 1e-13


def test_bound_ea_via_weighted_similarity(torus_model, cos_ops):
    level = cos_ops.level
    w = np.sqrt(1.0 + torus_model.eigenvalues_A[level.indices])
    sim = w[:, None] * cos_ops.matrices[0] / w[None, :]
    assert cos_ops.bound_EA == pytest.approx(np.linalg.norm(sim, 2) ** 2, rel=1e-12)
    assert cos_ops.bound_EA >= cos_ops.bound_H - 1e-12  # weights only stretch


def test_lp_bound_estimated_when_requested(torus_model):
    level = spectral.build_level(torus_model, 4)
    symbol = np.cos(torus_model.grid_points[:, 0])
    ops = jumps.assemble_noise_operators(
        torus_model, level, [symbol], lp_exponent=4.0, rng=np.random.default_rng(5)
    )
    assert ops.bound_Lp is not None and 0.0 < ops.bound_Lp < 10.0


def test_assembly_shape_error(torus_model):
    level = spectral.build_level(torus_model, 4)
    with pytest.raises(ShapeError):
        jumps.assemble_noise_operators(torus_model, level, np.ones((1, 5)))


# ---------------------------------------------------------------------------
# generator and jump map
# ---------------------------------------------------------------------------

def test_generator_linear_and_bounded(two_channel_ops):
    rng = np.random.default_rng(41)
    for _ in range(50):
        l1 = rng.uniform(-1, 1, size=2)
        l2 = rng.uniform(-1, 1, size=2)
        a, b = rng.uniform(-2, 2, size=2)
        combo = jumps.generator(two_channel_ops, a * l1 + b * l2)
        parts = a * jumps.generator(two_channel_ops, l1) + b * jumps.generator(
            two_channel_ops, l2
        )
        assert np.max(np.abs(combo - parts)) < 1e-13
        norm = np.linalg.norm(jumps.generator(two_channel_ops, l1), 2)
        assert norm <= np.linalg.norm(l1) * np.sqrt(two_channel_ops.bound_H) + 1e-12


def test_jump_map_unitary_and_inverse(two_channel_ops):
    rng = np.random.default_rng(42)
    for _ in range(200):
        mark = rng.uniform(-1, 1, size=2)
        mark *= min(1.0, 1.0 / np.linalg.norm(mark))
        x = random_state(rng, two_channel_ops.dim)
        y = jumps.jump_map(two_channel_ops, mark, x)
        assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x)
        back = jumps.jump_map(two_channel_ops, -mark, y)
        assert np.linalg.norm(back - x) <= 1e-10 * np.linalg.norm(x)


def test_flow_group_law_in_time(cos_ops):
    rng = np.random.default_rng(43)
    x = random_state(rng, cos_ops.dim)
    mark = np.array([0.6])
    once = jumps.jump_map(cos_ops, mark, x)
    twice = jumps.jump_map(cos_ops, mark, once)
    via_flow = jumps.marcus_flow(cos_ops, 2.0, mark, x, ode_tol=1e-12)
    assert np.linalg.norm(twice - via_flow) <= 1e-8 * np.linalg.norm(x)


def test_jump_map_matches_ode_flow(two_channel_ops):
    rng = np.random.default_rng(44)
    for _ in range(10):
        mark = rng.uniform(-1, 1, size=2)
        x = random_state(rng, two_channel_ops.dim)
        exact = jumps.jump_map(two_channel_ops, mark, x)
        ode = jumps.marcus_flow(two_channel_ops, 1.0, mark, x, ode_tol=1e-10)
        assert np.linalg.norm(exact - ode) <= 1e-8 * np.linalg.norm(x)


def test_constant_symbols_commute(torus_model):
    level = spectral.build_level(torus_model, 4)
    g = torus_model.num_grid
    ops = jumps.assemble_noise_operators(
        torus_model, level, [np.full(g, 0.5), np.full(g, -0.25)]
    )
    rng = np.random.default_rng(45)
    x = random_state(rng, ops.dim)
    l1, l2 = np.array([0.8, 0.0]), np.array([0.0, 0.9])
    ab = jumps.jump_map(ops, l1, jumps.jump_map(ops, l2, x))
    ba = jumps.jump_map(ops, l2, jumps.jump_map(ops, l1, x))
    assert np.linalg.norm(ab - ba) <= 1e-12 * np.linalg.norm(x)
    # diagonal generators: composition equals the summed mark exactly
    combined = jumps.jump_map(ops, l1 + l2, x)
    assert np.linalg.norm(ab - combined) <= 1e-12 * np.linalg.norm(x)


# ---------------------------------------------------------------------------
# jump differences
# ---------------------------------------------------------------------------

def test_differences_match_direct(two_channel_ops):
    rng = np.random.default_rng(46)
    for _ in range(20):
        mark = rng.uniform(-0.7, 0.7, size=2)
        x = random_state(rng, two_channel_ops.dim)
        jumped = jumps.jump_map(two_channel_ops, mark, x)
        d1 = jumps.jump_difference_1(two_channel_ops, mark, x)
        assert np.linalg.norm(d1 - (jumped - x)) <= 1e-12 * np.linalg.norm(x)
        bx = jumps.generator(two_channel_ops, mark) @ x
        d2 = jumps.jump_difference_2(two_channel_ops, mark, x)
        assert np.linalg.norm(d2 - (jumped - x + 1j * bx)) <= 1e-12 * np.linalg.norm(x)


def test_difference_bounds_hold(two_channel_ops):
    rng = np.random.default_rng(47)
    root_bh = np.sqrt(two_channel_ops.bound_H)
    for _ in range(200):
        mark = rng.uniform(-1, 1, size=2)
        mark *= rng.uniform(0, 1) / max(np.linalg.norm(mark), 1e-12)
        x = random_state(rng, two_channel_ops.dim)
        r = np.linalg.norm(mark)
        nx = np.linalg.norm(x)
        d1 = np.linalg.norm(jumps.jump_difference_1(two_channel_ops, mark, x))
        d2 = np.linalg.norm(jumps.jump_difference_2(two_channel_ops, mark, x))
        assert d1 <= root_bh * r * nx
        assert d2 <= 0.5 * two_channel_ops.bound_H * r**2 * nx


def test_second_difference_taylor_limit(cos_ops):
    # ||d2(l, x)|| / |l|^2 -> ||B(l/|l|)^2 x|| / 2 as |l| -> 0
    rng = np.random.default_rng(48)
    x = random_state(rng, cos_ops.dim)
    direction = np.array([1.0])
    B = jumps.generator(cos_ops, direction)
    target = 0.5 * np.linalg.norm(B @ (B @ x))
    r = 1e-4
    d2 = np.linalg.norm(jumps.jump_difference_2(cos_ops, r * direction, x)) / r**2
    assert d2 == pytest.approx(target, rel=1e-3)


def test_ea_growth_bound(torus_model, cos_ops):
    rng = np.random.default_rng(49)
    level = cos_ops.level
    w = 1.0 + torus_model.eigenvalues_A[level.indices]
    for _ in range(50):
        mark = rng.uniform(-1, 1, size=1)
        x = random_state(rng, cos_ops.dim)
        y = jumps.jump_map(cos_ops, mark, x)
        ea = lambda v: np.sqrt(np.sum(w * np.abs(v) ** 2))
        bound = np.exp(abs(mark[0]) * np.sqrt(cos_ops.bound_EA)) * ea(x)
        assert ea(y) <= bound * (1 + 1e-12)


# ---------------------------------------------------------------------------
# cache semantics
# ---------------------------------------------------------------------------

def test_cache_warm_and_readonly(torus_model):
    level = spectral.build_level(torus_model, 4)
    symbol = np.cos(torus_model.grid_points[:, 0])
    ops = jumps.assemble_noise_operators(torus_model, level, [symbol])
    rng = np.random.default_rng(50)
    x = random_state(rng, ops.dim)
    mark = np.array([0.3])
    cold = jumps.jump_map(ops, mark, x)
    assert len(ops._eig_cache) == 0  # uncached marks never insert
    ops.warm_cache([mark])
    assert len(ops._eig_cache) == 1
    warm = jumps.jump_map(ops, mark, x)
    assert np.array_equal(cold, warm)
