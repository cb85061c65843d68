"""Jump operators on a Galerkin level and the unitary maps they generate.

Each noise channel m has a real-valued symbol e_m(x); its action on the level
is the smoothed, truncated multiplication operator

    M_m = (cutoff) * <h_j, e_m h_k> * (cutoff)

assembled by grid quadrature, so every M_m is Hermitian.  A mark l in R^N
combines the channels into the Hermitian generator B(l) = sum_m l_m M_m, and a
jump acts through the time-1 unitary flow of ``du/dt = -i B(l) u`` —
evaluated exactly as ``exp(-i B(l))`` via eigendecomposition.  That
eigendecomposition is reused through a warmable per-mark cache (read-only
after warmup, so shared state across worker threads is safe).

The level constants ``bound_H / bound_EA / bound_Lp`` are the sums of squared
operator norms of the M_m in the respective spaces; they give the elementary
inequalities

    ||B(l)||        <= |l| sqrt(bound_H)
    ||e^{-iB(l)}x - x||           <= sqrt(bound_H) |l| ||x||
    ||e^{-iB(l)}x - x + iB(l)x||  <= bound_H |l|^2 ||x|| / 2
    ||e^{-itB(l)}||_{E_A}         <= exp(|t| |l| sqrt(bound_EA))

by Cauchy-Schwarz in l and spectral calculus.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import NumericsError, ShapeError
from .spectral import GalerkinLevel, SpectralModel, estimate_smoothing_lp_norm

#: assembled matrices farther than this from Hermitian are rejected
HERMITICITY_TOLERANCE = 1e-10


@dataclasses.dataclass
class NoiseOperators:
    """Assembled jump generators for one Galerkin level.

    ``matrices[m]`` is the Hermitian matrix of channel m on the level basis.
    ``hermiticity_defect`` records the largest entry deviation removed by
    symmetrization at assembly.
    """

    level: GalerkinLevel
    symbols: np.ndarray            # (N, num_grid) real symbol samples
    matrices: np.ndarray           # (N, dim, dim) complex Hermitian
    bound_H: float
    bound_EA: float
    bound_Lp: float | None
    hermiticity_defect: float
    _eig_cache: dict = dataclasses.field(default_factory=dict, repr=False)

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def warm_cache(self, marks) -> None:
        """Precompute eigendecompositions for the given marks (e.g. all atoms)."""
        for mark in np.atleast_2d(np.asarray(marks, dtype=float)):
            key = mark.tobytes()
            if key not in self._eig_cache:
                self._eig_cache[key] = _eigendecompose(generator(self, mark))

    def _eig_for(self, mark: np.ndarray):
        cached = self._eig_cache.get(mark.tobytes())
        if cached is not None:
            return cached
        return _eigendecompose(generator(self, mark))


def _eigendecompose(matrix: np.ndarray):
    theta, vectors = np.linalg.eigh(matrix)
    return theta, vectors


def assemble_noise_operators(
    model: SpectralModel,
    level: GalerkinLevel,
    symbols,
    lp_exponent: float | None = None,
    rng: np.random.Generator | None = None,
) -> NoiseOperators:
    """Quadrature assembly of the smoothed multiplication operators.

    ``symbols`` is an (N, num_grid) array (or list of grid samples) of
    real-valued multiplier functions.  ``lp_exponent``, when given, triggers
    the empirical L^p operator-norm estimate entering ``bound_Lp``.
    """
    symbols = np.atleast_2d(np.asarray(symbols, dtype=float))
    if symbols.ndim != 2 or symbols.shape[1] != model.num_grid:
        raise ShapeError(
            f"symbols must be (N, {model.num_grid}) grid samples, got {symbols.shape}"
        )
    basis = model.basis_grid[level.indices]           # (dim, grid)
    weighted = basis.conj() * model.grid_weights      # rows scaled by quadrature
    smoother = level.multipliers

    matrices = np.empty((symbols.shape[0], level.dim, level.dim), dtype=complex)
    defect = 0.0
    for m, symbol in enumerate(symbols):
        raw = (weighted * symbol) @ basis.T
        raw = smoother[:, None] * raw * smoother[None, :]
        defect = max(defect, float(np.max(np.abs(raw - raw.conj().T))))
        matrices[m] = 0.5 * (raw + raw.conj().T)
    if defect > HERMITICITY_TOLERANCE:
        raise NumericsError(
            f"assembled operator deviates from Hermitian by {defect:.3e} "
            f"(tolerance {HERMITICITY_TOLERANCE:.1e})"
        )

    norms_H = [np.linalg.norm(M, 2) for M in matrices]
    weights = np.sqrt(1.0 + model.eigenvalues_A[level.indices])
    norms_EA = [
        np.linalg.norm(weights[:, None] * M / weights[None, :], 2) for M in matrices
    ]
    bound_Lp = None
    if lp_exponent is not None:
        # ratio maximisation of the assembled operator in L^p via probes
        probe_rng = np.random.default_rng(0) if rng is None else rng
        bound_Lp = 0.0
        for M in matrices:
            est = _estimate_matrix_lp_norm(model, level, M, lp_exponent, probe_rng)
            bound_Lp += est**2

    return NoiseOperators(
        level=level,
        symbols=symbols,
        matrices=matrices,
        bound_H=float(sum(x**2 for x in norms_H)),
        bound_EA=float(sum(x**2 for x in norms_EA)),
        bound_Lp=bound_Lp,
        hermiticity_defect=defect,
    )


def _estimate_matrix_lp_norm(model, level, matrix, p, rng, num_probes=32):
    """Empirical L^p -> L^p norm of a level matrix (probe maximisation)."""
    from .spectral import sobolev_norm  # local import to avoid cycle at module load

    best = 0.0
    dim = level.dim
    probes = [rng.standard_normal(dim) + 1j * rng.standard_normal(dim) for _ in range(num_probes)]
    probes += [np.eye(dim, dtype=complex)[j] for j in range(dim)]
    probes.append(np.ones(dim, dtype=complex))
    for u in probes:
        denom = sobolev_norm(model, u, "Lp", indices=level.indices, p=p)
        if denom < 1e-13:
            continue
        num = sobolev_norm(model, matrix @ u, "Lp", indices=level.indices, p=p)
        best = max(best, num / denom)
    return best


def generator(ops: NoiseOperators, mark) -> np.ndarray:
    """Hermitian generator B(l) = sum_m l_m M_m for a mark l in R^N."""
    mark = np.asarray(mark, dtype=float).reshape(-1)
    if mark.shape != (ops.num_channels,):
        raise ShapeError(
            f"mark must have {ops.num_channels} components, got {mark.shape}"
        )
    return np.tensordot(mark, ops.matrices, axes=1)


def jump_map(ops: NoiseOperators, mark, state: np.ndarray) -> np.ndarray:
    """Unitary jump: exp(-i B(l)) applied through the eigendecomposition."""
    mark = np.asarray(mark, dtype=float).reshape(-1)
    state = np.asarray(state, dtype=complex)
    if state.shape != (ops.dim,):
        raise ShapeError(f"state must have length {ops.dim}, got {state.shape}")
    theta, vectors = ops._eig_for(mark)
    return vectors @ (np.exp(-1j * theta) * (vectors.conj().T @ state))


def marcus_flow(
    ops: NoiseOperators,
    duration: float,
    mark,
    state: np.ndarray,
    ode_tol: float = 1e-10,
) -> np.ndarray:
    """Integrate du/dt = -i B(l) u for the given duration with an ODE solver.

    Cross-validation oracle for :func:`jump_map` (which is the exact
    ``duration = 1`` flow); kept independent of the eigendecomposition path.
    """
    state = np.asarray(state, dtype=complex)
    matrix = generator(ops, mark)

    def rhs(_t, y):
        return -1j * (matrix @ y)

    sol = solve_ivp(
        rhs,
        (0.0, float(duration)),
        state,
        method="DOP853",
        rtol=ode_tol,
        atol=ode_tol,
    )
    if not sol.success:
        raise NumericsError(f"flow integration failed: {sol.message}")
    return sol.y[:, -1]


def _theta_minus_sin(theta: np.ndarray) -> np.ndarray:
    """theta - sin(theta), evaluated stably near zero (series below 1e-3)."""
    small = np.abs(theta) < 1e-3
    t2 = theta * theta
    series = theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    return np.where(small, series, theta - np.sin(theta))


def jump_difference_1(ops: NoiseOperators, mark, state: np.ndarray) -> np.ndarray:
    """First jump difference exp(-iB(l))x - x via eigenphase factors.

    The spectral factor e^{-i theta} - 1 is evaluated as
    -2 sin(theta/2) (sin(theta/2) + i cos(theta/2)); its modulus
    2 |sin(theta/2)| never exceeds |theta|, so the operator bound
    sqrt(bound_H) |l| ||x|| is respected without cancellation error.
    """
    mark = np.asarray(mark, dtype=float).reshape(-1)
    theta, vectors = ops._eig_for(mark)
    half = 0.5 * theta
    factor = -2.0 * np.sin(half) * (np.sin(half) + 1j * np.cos(half))
    return vectors @ (factor * (vectors.conj().T @ np.asarray(state, dtype=complex)))


def jump_difference_2(ops: NoiseOperators, mark, state: np.ndarray) -> np.ndarray:
    """Second jump difference exp(-iB(l))x - x + iB(l)x, stable near zero.

    Spectral factor (cos(theta) - 1) + i (theta - sin(theta)) with the real
    part as -2 sin^2(theta/2) and the imaginary part via a truncated series
    for small theta; its modulus stays below theta^2 / 2.
    """
    mark = np.asarray(mark, dtype=float).reshape(-1)
    theta, vectors = ops._eig_for(mark)
    real = -2.0 * np.sin(0.5 * theta) ** 2
    factor = real + 1j * _theta_minus_sin(theta)
    return vectors @ (factor * (vectors.conj().T @ np.asarray(state, dtype=complex)))
