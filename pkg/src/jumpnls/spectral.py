"""Spectral bases, dyadic Galerkin levels, and smoothed spectral truncation.

A model is built from an explicit eigenbasis of the Laplacian on a torus or an
interval.  Two diagonal operators act on coefficients:

* ``A`` — the (fractional) Laplacian power, eigenvalues ``lambda_A``; it drives
  the linear part of the dynamics and weighs the energy norm.
* ``S`` — a strictly positive companion operator used only to organise modes
  into dyadic blocks: ``S = A`` on Dirichlet intervals and ``S = Id + A``
  otherwise.  Level ``n`` keeps the modes with ``lambda_S < 2**(n+1)``.

Smoothed truncation multiplies coefficients by a C^2 cutoff of ``lambda_S``
that is 1 below ``2**n``, 0 at and above ``2**(n+1)``, and a quintic ramp in
between.  The ramp is chosen so that the scaled derivative suprema
``sup |lambda^k d^k/dlambda^k cutoff|`` are bounded uniformly in ``n``.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .exceptions import ConfigurationError, ShapeError

TORUS_1D = "Torus1D"
TORUS_2D = "Torus2D"
INTERVAL_DIRICHLET = "IntervalDirichlet"
INTERVAL_NEUMANN = "IntervalNeumann"

_DOMAIN_KINDS = (TORUS_1D, TORUS_2D, INTERVAL_DIRICHLET, INTERVAL_NEUMANN)

#: spaces accepted by :func:`sobolev_norm`
NORM_SPACES = ("H", "E_A", "E_A_dual", "Lp")


@dataclasses.dataclass(frozen=True)
class Domain:
    """Spatial domain: periodic box (1d/2d) or an interval with a boundary condition."""

    kind: str
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _DOMAIN_KINDS:
            raise ConfigurationError(f"unknown domain kind {self.kind!r}")
        expected = 2 if self.kind == TORUS_2D else 1
        if len(self.lengths) != expected:
            raise ConfigurationError(
                f"{self.kind} needs {expected} length(s), got {len(self.lengths)}"
            )
        if any(not (L > 0) or not math.isfinite(L) for L in self.lengths):
            raise ConfigurationError("domain lengths must be positive and finite")

    @property
    def dimension(self) -> int:
        return len(self.lengths)


def torus_1d(length: float) -> Domain:
    return Domain(TORUS_1D, (float(length),))


def torus_2d(length_x: float, length_y: float) -> Domain:
    return Domain(TORUS_2D, (float(length_x), float(length_y)))


def interval_dirichlet(length: float) -> Domain:
    return Domain(INTERVAL_DIRICHLET, (float(length),))


def interval_neumann(length: float) -> Domain:
    return Domain(INTERVAL_NEUMANN, (float(length),))


# ---------------------------------------------------------------------------
# cutoff profile
# ---------------------------------------------------------------------------

def transition_profile(t, order: int = 0):
    """C^2 quintic ramp: 1 for t <= 1, 0 for t >= 2, monotone in between.

    On [1, 2] with s = t - 1 the value is ``1 - 10 s^3 + 15 s^4 - 6 s^5``;
    first and second derivatives vanish at both ends, so the piecewise
    extension is C^2 on (0, inf).  ``order`` in {0, 1, 2} selects the
    derivative.  Scalar or array input.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1, or 2, got {order}")
    t = np.asarray(t, dtype=float)
    s = np.clip(t - 1.0, 0.0, 1.0)
    if order == 0:
        ramp = 1.0 + s**3 * (-10.0 + s * (15.0 - 6.0 * s))
        outside = np.where(t <= 1.0, 1.0, 0.0)
    elif order == 1:
        ramp = s**2 * (-30.0 + s * (60.0 - 30.0 * s))
        outside = np.zeros_like(t)
    else:
        ramp = s * (-60.0 + s * (180.0 - 120.0 * s))
        outside = np.zeros_like(t)
    result = np.where((t > 1.0) & (t < 2.0), ramp, outside)
    if np.ndim(t) == 0:
        return float(result)
    return result


def cutoff_multiplier(n: int, eigenvalue):
    """Dyadic smoothed-cutoff value(s) at level n.

    Equals 1 for ``eigenvalue < 2**n``, 0 for ``eigenvalue >= 2**(n+1)``, and
    ``transition_profile(eigenvalue / 2**n)`` on the dyadic band in between.
    Eigenvalues must be strictly positive.
    """
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    lam = np.asarray(eigenvalue, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("cutoff argument must be strictly positive")
    return transition_profile(lam * 2.0 ** (-n))


def mihlin_suprema(n: int, max_order: int = 2, samples: int = 4001) -> np.ndarray:
    """Sampled suprema of ``|lambda^k d^k cutoff / dlambda^k|`` for k <= max_order.

    The transition band contributes ``t^k * ramp^(k)(t)`` with ``t`` the
    eigenvalue rescaled by ``2**(-n)``; the identity branch contributes 1 for
    k = 0.  The returned values are independent of ``n`` by scale invariance
    (the same rescaled sample grid is used for every level).
    """
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    if max_order < 0 or max_order > 2:
        raise ValueError("max_order must be in {0, 1, 2}")
    t = np.linspace(1.0, 2.0, samples)
    sups = []
    for k in range(max_order + 1):
        band = np.abs(t**k * transition_profile(t, order=k))
        sup = float(np.max(band))
        if k == 0:
            sup = max(sup, 1.0)  # branch below the band where the cutoff is 1
        sups.append(sup)
    return np.array(sups)


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class SpectralModel:
    """Eigenbasis, quadrature grid, and diagonal operator data for one domain.

    Modes are sorted by increasing ``lambda_S`` (ties broken by wavenumber).
    ``basis_grid[m, j]`` holds basis function m at grid node j; the quadrature
    rule (``grid_weights``) integrates products of retained basis functions
    exactly, so analyze/synthesize round-trips are identities to rounding.
    """

    domain: Domain
    beta: float
    max_level: int
    dealias_factor: int
    wavenumbers: np.ndarray      # (num_modes, dim) ints
    eigenvalues_A: np.ndarray    # (num_modes,)
    eigenvalues_S: np.ndarray    # (num_modes,)
    grid_points: np.ndarray      # (num_grid, dim)
    grid_weights: np.ndarray     # (num_grid,)
    basis_grid: np.ndarray       # (num_modes, num_grid) complex

    @property
    def num_modes(self) -> int:
        return self.basis_grid.shape[0]

    @property
    def num_grid(self) -> int:
        return self.basis_grid.shape[1]

    def synthesize(self, coefficients: np.ndarray, indices=None) -> np.ndarray:
        """Coefficient vector -> samples on the quadrature grid."""
        basis = self.basis_grid if indices is None else self.basis_grid[indices]
        coefficients = np.asarray(coefficients)
        if coefficients.shape != (basis.shape[0],):
            raise ShapeError(
                f"expected {basis.shape[0]} coefficients, got shape {coefficients.shape}"
            )
        return coefficients @ basis

    def analyze(self, values: np.ndarray, indices=None) -> np.ndarray:
        """Grid samples -> coefficients of the retained (or selected) modes."""
        basis = self.basis_grid if indices is None else self.basis_grid[indices]
        values = np.asarray(values)
        if values.shape != (basis.shape[1],):
            raise ShapeError(
                f"expected {basis.shape[1]} grid values, got shape {values.shape}"
            )
        return (basis.conj() * self.grid_weights) @ values


def _mode_table(domain: Domain, beta: float, threshold: float):
    """Enumerate wavenumbers with lambda_S below threshold; return sorted table."""
    dirichlet = domain.kind == INTERVAL_DIRICHLET

    def lam_S(lam_A):
        return lam_A if dirichlet else 1.0 + lam_A

    if domain.kind in (TORUS_1D, TORUS_2D):
        factors = [2.0 * math.pi / L for L in domain.lengths]
    else:
        factors = [math.pi / L for L in domain.lengths]

    # conservative per-axis scan bound: lambda_A alone already below threshold
    lam_A_cap = threshold if dirichlet else threshold - 1.0
    mu_cap = lam_A_cap ** (1.0 / beta)
    kmax = [int(math.floor(math.sqrt(mu_cap) / f)) + 2 for f in factors]

    if domain.kind == TORUS_1D:
        candidates = [(k,) for k in range(-kmax[0], kmax[0] + 1)]
    elif domain.kind == TORUS_2D:
        candidates = [
            (k1, k2)
            for k1 in range(-kmax[0], kmax[0] + 1)
            for k2 in range(-kmax[1], kmax[1] + 1)
        ]
    elif domain.kind == INTERVAL_DIRICHLET:
        candidates = [(k,) for k in range(1, kmax[0] + 1)]
    else:  # Neumann
        candidates = [(k,) for k in range(0, kmax[0] + 1)]

    rows = []
    for wn in candidates:
        mu = sum((f * k) ** 2 for f, k in zip(factors, wn))
        lam_A = mu**beta
        lam_s = lam_S(lam_A)
        if lam_s < threshold:
            rows.append((lam_s, wn, lam_A))
    rows.sort(key=lambda r: (r[0], r[1]))
    if not rows:
        raise ConfigurationError("no modes retained; increase max_level")
    return rows


def build_spectral_model(
    domain: Domain,
    beta: float = 1.0,
    max_level: int = 6,
    dealias_factor: int = 2,
) -> SpectralModel:
    """Construct the eigenbasis and grid holding all levels up to ``max_level``.

    Parameters
    ----------
    domain : Domain
    beta : float
        Fractional power applied to the Laplacian eigenvalues: the linear
        operator acts by ``mu -> mu**beta``.  Must be positive.
    max_level : int
        Modes with ``lambda_S < 2**(max_level + 1)`` are retained.
    dealias_factor : int
        Grid nodes per dimension are at least ``dealias_factor * (kmax + 1)``
        where ``kmax`` is the largest retained wavenumber on that axis; 2 is
        the minimum guaranteeing exact quadrature of mode products, larger
        values reduce aliasing in nonlinear terms.
    """
    if not (beta > 0) or not math.isfinite(beta):
        raise ConfigurationError(f"beta must be positive, got {beta}")
    if not isinstance(max_level, int) or max_level < 0:
        raise ConfigurationError(f"max_level must be a nonnegative integer, got {max_level}")
    if not isinstance(dealias_factor, int) or dealias_factor < 2:
        raise ConfigurationError(f"dealias_factor must be an integer >= 2, got {dealias_factor}")

    threshold = 2.0 ** (max_level + 1)
    rows = _mode_table(domain, beta, threshold)
    lam_S = np.array([r[0] for r in rows])
    wavenumbers = np.array([r[1] for r in rows], dtype=int)
    lam_A = np.array([r[2] for r in rows])

    dim = domain.dimension
    axis_nodes, axis_weights = [], []
    for axis in range(dim):
        L = domain.lengths[axis]
        kmax = int(np.max(np.abs(wavenumbers[:, axis])))
        M = dealias_factor * (kmax + 1)
        if domain.kind in (TORUS_1D, TORUS_2D):
            x = L * np.arange(M) / M
        else:
            x = L * (np.arange(M) + 0.5) / M  # midpoint rule; no boundary nodes
        axis_nodes.append(x)
        axis_weights.append(np.full(M, L / M))

    if dim == 1:
        grid_points = axis_nodes[0][:, None]
        grid_weights = axis_weights[0]
    else:
        X, Y = np.meshgrid(axis_nodes[0], axis_nodes[1], indexing="ij")
        grid_points = np.column_stack([X.ravel(), Y.ravel()])
        W1, W2 = np.meshgrid(axis_weights[0], axis_weights[1], indexing="ij")
        grid_weights = (W1 * W2).ravel()

    basis = np.empty((len(rows), grid_points.shape[0]), dtype=complex)
    for m, wn in enumerate(wavenumbers):
        values = np.ones(grid_points.shape[0], dtype=complex)
        for axis in range(dim):
            L = domain.lengths[axis]
            x = grid_points[:, axis]
            k = wn[axis]
            if domain.kind in (TORUS_1D, TORUS_2D):
                values = values * np.exp(2j * math.pi * k * x / L) / math.sqrt(L)
            elif domain.kind == INTERVAL_DIRICHLET:
                values = values * math.sqrt(2.0 / L) * np.sin(k * math.pi * x / L)
            else:  # Neumann
                if k == 0:
                    values = values / math.sqrt(L)
                else:
                    values = values * math.sqrt(2.0 / L) * np.cos(k * math.pi * x / L)
        basis[m] = values

    return SpectralModel(
        domain=domain,
        beta=float(beta),
        max_level=max_level,
        dealias_factor=dealias_factor,
        wavenumbers=wavenumbers,
        eigenvalues_A=lam_A,
        eigenvalues_S=lam_S,
        grid_points=grid_points,
        grid_weights=grid_weights,
        basis_grid=basis,
    )


# ---------------------------------------------------------------------------
# Galerkin levels
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class GalerkinLevel:
    """Dyadic block of modes: indices with lambda_S < 2**(n+1), plus cutoff values."""

    n: int
    indices: np.ndarray       # indices into the model's mode table
    multipliers: np.ndarray   # cutoff values at the retained eigenvalues

    @property
    def dim(self) -> int:
        return len(self.indices)


def build_level(model: SpectralModel, n: int) -> GalerkinLevel:
    if not isinstance(n, int) or n < 0 or n > model.max_level:
        raise ConfigurationError(
            f"level must be an integer in [0, {model.max_level}], got {n}"
        )
    mask = model.eigenvalues_S < 2.0 ** (n + 1)
    indices = np.nonzero(mask)[0]
    multipliers = cutoff_multiplier(n, model.eigenvalues_S[indices])
    return GalerkinLevel(n=n, indices=indices, multipliers=np.asarray(multipliers))


def apply_projection(level: GalerkinLevel, coefficients_full: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the level: keep the level's coefficients."""
    coefficients_full = np.asarray(coefficients_full)
    if coefficients_full.ndim != 1 or len(coefficients_full) <= int(level.indices.max()):
        raise ShapeError("coefficient vector does not cover the level's modes")
    return coefficients_full[level.indices]


def apply_smoothing(level: GalerkinLevel, coefficients_full: np.ndarray) -> np.ndarray:
    """Smoothed truncation: project onto the level and scale by the cutoff."""
    return level.multipliers * apply_projection(level, coefficients_full)


def embed(level: GalerkinLevel, coefficients_level: np.ndarray, num_modes: int) -> np.ndarray:
    """Zero-pad a level coefficient vector back to the full mode table."""
    coefficients_level = np.asarray(coefficients_level)
    if coefficients_level.shape != (level.dim,):
        raise ShapeError(
            f"expected {level.dim} coefficients, got shape {coefficients_level.shape}"
        )
    out = np.zeros(num_modes, dtype=complex)
    out[level.indices] = coefficients_level
    return out


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def sobolev_norm(
    model: SpectralModel,
    coefficients: np.ndarray,
    space: str = "H",
    indices=None,
    p: float | None = None,
) -> float:
    """Norm of a coefficient vector in H, the energy space, its dual, or Lp.

    ``coefficients`` are aligned with ``indices`` (all modes when omitted).
    The Hilbert norms are weighted Euclidean norms with weights 1,
    ``1 + lambda_A``, and ``1 / (1 + lambda_A)``; Lp norms are evaluated by
    grid quadrature and require ``p``.
    """
    if space not in NORM_SPACES:
        raise ValueError(f"space must be one of {NORM_SPACES}, got {space!r}")
    coefficients = np.asarray(coefficients)
    idx = np.arange(model.num_modes) if indices is None else np.asarray(indices)
    if coefficients.shape != (len(idx),):
        raise ShapeError(
            f"expected {len(idx)} coefficients, got shape {coefficients.shape}"
        )
    if space == "Lp":
        if p is None or not (p >= 1):
            raise ValueError("Lp norm requires p >= 1")
        values = model.synthesize(coefficients, indices=idx)
        return float(np.sum(model.grid_weights * np.abs(values) ** p) ** (1.0 / p))
    sq = np.abs(coefficients) ** 2
    if space == "H":
        return float(math.sqrt(np.sum(sq)))
    weights = 1.0 + model.eigenvalues_A[idx]
    if space == "E_A":
        return float(math.sqrt(np.sum(weights * sq)))
    return float(math.sqrt(np.sum(sq / weights)))


def estimate_smoothing_lp_norm(
    model: SpectralModel,
    level: GalerkinLevel,
    p: float,
    num_probes: int = 64,
    rng: np.random.Generator | None = None,
) -> float:
    """Empirical lower bound for the Lp operator norm of the smoothed truncation.

    Maximises ``||S_n u||_p / ||u||_p`` over random Gaussian coefficient
    vectors, single modes, and all-ones packets (Dirichlet-kernel-like states,
    the usual near-extremisers).  A diagnostic estimate, not a certified bound.
    """
    if not (p >= 1):
        raise ValueError("p must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    d = model.num_modes
    probes = []
    for _ in range(num_probes):
        probes.append(rng.standard_normal(d) + 1j * rng.standard_normal(d))
    eye = np.eye(d)
    for m in range(d):
        probes.append(eye[m].astype(complex))
    cuts = sorted(set(np.linspace(1, d, num=min(d, 16), dtype=int)))
    for c in cuts:
        packet = np.zeros(d, dtype=complex)
        packet[:c] = 1.0
        probes.append(packet)

    best = 0.0
    for u in probes:
        denom = sobolev_norm(model, u, space="Lp", p=p)
        if denom < 1e-13:
            continue
        smoothed = embed(level, apply_smoothing(level, u), d)
        num = sobolev_norm(model, smoothed, space="Lp", p=p)
        best = max(best, num / denom)
    return best
