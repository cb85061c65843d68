"""Conserved-quantity reports, path-regularity diagnostics, ensemble statistics."""

from __future__ import annotations

import dataclasses

import numpy as np

from .exceptions import ShapeError
from .nonlinear import Nonlinearity, eval_F, eval_Fhat
from .spectral import SpectralModel


@dataclasses.dataclass(frozen=True)
class EnergyReport:
    """Mass, kinetic part (1/2)||A^(1/2)u||^2, potential part, and their sum."""

    mass: float
    kinetic: float
    potential: float
    total: float


def energy(
    model: SpectralModel,
    nl: Nonlinearity | None,
    state: np.ndarray,
    indices=None,
) -> EnergyReport:
    state = np.asarray(state, dtype=complex)
    idx = np.arange(model.num_modes) if indices is None else np.asarray(indices)
    if state.shape != (len(idx),):
        raise ShapeError(f"expected {len(idx)} coefficients, got {state.shape}")
    sq = np.abs(state) ** 2
    mass = float(np.sum(sq))
    kinetic = float(0.5 * np.sum(model.eigenvalues_A[idx] * sq))
    potential = 0.0 if nl is None else eval_Fhat(model, nl, state, indices=idx)
    return EnergyReport(mass=mass, kinetic=kinetic, potential=potential,
                        total=kinetic + potential)


def energy_derivative(
    model: SpectralModel,
    nl: Nonlinearity | None,
    state: np.ndarray,
    direction: np.ndarray,
    indices=None,
) -> float:
    """Directional derivative of the energy: Re <A u + F(u), h>."""
    state = np.asarray(state, dtype=complex)
    direction = np.asarray(direction, dtype=complex)
    idx = np.arange(model.num_modes) if indices is None else np.asarray(indices)
    grad = model.eigenvalues_A[idx] * state
    if nl is not None:
        grad = grad + eval_F(model, nl, state, indices=idx)
    return float(np.vdot(grad, direction).real)


# ---------------------------------------------------------------------------
# cadlag modulus
# ---------------------------------------------------------------------------

def cadlag_modulus(times: np.ndarray, values: np.ndarray, delta: float) -> float:
    """Coarse-partition oscillation modulus of a piecewise-constant path.

    The path takes value ``values[i]`` on ``[times[i], times[i+1])``; the last
    recorded time is the right endpoint T of the observation window.  The
    modulus is the smallest achievable worst-cell oscillation over partitions
    ``0 = t_0 < ... < t_N = T`` whose every cell is at least ``delta`` long,
    with cells read as half-open ``[t_{j-1}, t_j)``.  Oscillation of a cell is
    the largest distance between values attained in it.

    Partition boundaries are restricted to the recorded times; within that
    family the minimum is computed exactly (by dynamic programming).  The
    path only changes at recorded times, so moving a boundary off the grid
    never changes which values share a cell — it can only relax the cell
    length constraint — making this a tight upper bound for the free-boundary
    modulus at the same delta.

    ``values`` may be scalar per time (shape (m,)) or vectors (shape (m, d))
    compared in the Euclidean norm of whatever coordinates the caller supplies
    (e.g. coefficients pre-scaled to a weighted norm).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise ShapeError("need at least two recorded times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != len(times):
        raise ShapeError("one value per recorded time required")
    total = times[-1] - times[0]
    if not (0.0 < delta <= total):
        raise ValueError(f"delta must be in (0, {total}], got {delta}")

    m = len(times)
    diff = values[:, None, :] - values[None, :, :]
    dist = np.sqrt(np.sum(np.abs(diff) ** 2, axis=2))

    # osc[i][j]: largest pairwise distance among values active on [t_i, t_j),
    # i.e. values i .. j-1.  Built incrementally in j via suffix maxima.
    osc = np.zeros((m, m))
    for j in range(2, m):
        row = dist[j - 1, : j - 1]
        suffix = np.maximum.accumulate(row[::-1])[::-1]
        osc[: j - 1, j] = np.maximum(osc[: j - 1, j - 1], suffix)

    best = np.full(m, np.inf)
    best[0] = 0.0
    for j in range(1, m):
        feasible = np.nonzero(times[j] - times[:j] >= delta)[0]
        if len(feasible) == 0:
            continue
        candidates = np.maximum(best[feasible], osc[feasible, j])
        best[j] = np.min(candidates)
    return float(best[m - 1])


# ---------------------------------------------------------------------------
# ensemble statistics
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class EnsembleSummary:
    """Moments of per-trajectory suprema with bootstrap confidence bands."""

    count: int
    sup_ea_norm: np.ndarray     # (K,) per-trajectory sup_t energy-space norm
    sup_energy: np.ndarray      # (K,) per-trajectory sup_t (mass/2 + total energy)
    moments: dict               # r -> (mean, lower, upper)


def ensemble_moments(
    records,
    orders=(1.0, 2.0),
    bootstrap: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
) -> EnsembleSummary:
    """Empirical E[sup_t ||u||_{E_A}^r] with seeded bootstrap bands.

    Expects records carrying per-time diagnostics (``ea_norm``, ``mass``,
    ``energy``); at least two records are required.
    """
    records = list(records)
    if len(records) < 2:
        raise ValueError("need at least two trajectory records")
    sup_ea = np.array([float(np.max(r.ea_norm)) for r in records])
    sup_energy = np.array(
        [float(np.max(0.5 * r.mass + r.energy)) for r in records]
    )
    rng = np.random.default_rng(seed)
    lo_q, hi_q = (1 - confidence) / 2, 1 - (1 - confidence) / 2
    moments = {}
    k = len(sup_ea)
    resamples = rng.integers(0, k, size=(bootstrap, k))
    for r in orders:
        samples = sup_ea**r
        boot_means = np.mean(samples[resamples], axis=1)
        moments[float(r)] = (
            float(np.mean(samples)),
            float(np.quantile(boot_means, lo_q)),
            float(np.quantile(boot_means, hi_q)),
        )
    return EnsembleSummary(
        count=k, sup_ea_norm=sup_ea, sup_energy=sup_energy, moments=moments
    )


# ---------------------------------------------------------------------------
# tightness-style increment statistic
# ---------------------------------------------------------------------------

def _state_at(record, t: float) -> np.ndarray:
    """Right-continuous lookup of the recorded state at time t."""
    i = int(np.searchsorted(record.times, t, side="right")) - 1
    i = max(0, min(i, len(record.times) - 1))
    return record.states[i]


def aldous_statistic(
    records,
    thetas,
    eta: float,
    stopping: tuple = ("fixed", 0.0),
) -> np.ndarray:
    """Empirical P(dual-norm increment after a stopping time >= eta).

    For each record, a stopping time tau is chosen by ``stopping``:
    ``("fixed", t0)`` takes tau = t0; ``("first_jump_after", t0)`` takes the
    first recorded jump time after t0 (or the horizon when none).  The
    statistic is the fraction of records with
    ``||u(tau + theta) - u(tau)||_{E_A*} >= eta`` for each theta; small values
    uniformly in theta are the discrete signature of tightness.

    Records must carry full states and their ``ea_weights``.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one trajectory record")
    if eta <= 0:
        raise ValueError("eta must be positive")
    kind, t0 = stopping
    if kind not in ("fixed", "first_jump_after"):
        raise ValueError(f"unknown stopping rule {kind!r}")
    thetas = np.asarray(thetas, dtype=float)
    out = np.zeros(len(thetas))
    for record in records:
        if record.states is None:
            raise ValueError("records must retain states for this statistic")
        horizon = record.times[-1]
        if kind == "fixed":
            tau = min(float(t0), horizon)
        else:
            jump_times = [e.time for e in record.events if e.time > t0]
            tau = min(jump_times) if jump_times else horizon
        u_tau = _state_at(record, tau)
        inv_w = 1.0 / record.ea_weights
        for i, theta in enumerate(thetas):
            u_later = _state_at(record, min(tau + theta, horizon))
            dist = np.sqrt(np.sum(np.abs(u_later - u_tau) ** 2 * inv_w))
            if dist >= eta:
                out[i] += 1.0
    return out / len(records)
