"""INI run configuration: parsing, canonical serialization, object builders.

The canonical text form is deterministic (fixed section and key order,
``repr`` floats), so round-tripping a spec through text is the identity and
the sha256 of the canonical text is a stable fingerprint of the run.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io

import numpy as np

from .exceptions import ConfigurationError
from .noise import AtomicMeasure, RadialStableMeasure
from .nonlinear import Nonlinearity, defocusing, focusing
from .solver import (
    CLOSURE_ATOMIC,
    CLOSURE_TAYLOR2,
    MODE_MIDPOINT,
    MODE_SPLITSTEP,
    GalerkinProblem,
    SolverConfig,
    build_problem,
)
from .spectral import (
    SpectralModel,
    build_spectral_model,
    interval_dirichlet,
    interval_neumann,
    torus_1d,
    torus_2d,
)

DOMAIN_KINDS = ("torus_1d", "torus_2d", "interval_dirichlet", "interval_neumann")
NOISE_KINDS = ("atomic", "radial_stable")
SYMBOL_PRESETS = ("constant", "cos", "sin", "bump")
INITIAL_PRESETS = ("decaying", "single_mode", "plateau")


@dataclasses.dataclass(frozen=True)
class DomainSpec:
    kind: str
    lengths: tuple[float, ...]


@dataclasses.dataclass(frozen=True)
class GalerkinSpec:
    beta: float = 1.0
    max_level: int = 6
    level: int = 4
    dealias_factor: int = 2


@dataclasses.dataclass(frozen=True)
class NonlinearitySpec:
    kind: str       # "defocusing" | "focusing"
    alpha: float


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    kind: str                      # "atomic" | "radial_stable"
    symbols: tuple[str, ...]       # one preset name per channel
    epsilon: float
    # atomic parameters: ((mark components...), weight) per atom
    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()
    # radial_stable parameters
    activity: float = 0.0
    stability: float = 0.0


@dataclasses.dataclass(frozen=True)
class InitialSpec:
    preset: str = "decaying"
    rate: float = 0.5
    mode: int = 0
    scale: float = 1.0


@dataclasses.dataclass(frozen=True)
class OutputSpec:
    save_states: bool = False
    save_events: bool = True


@dataclasses.dataclass(frozen=True)
class RunSpec:
    domain: DomainSpec
    galerkin: GalerkinSpec
    solver: SolverConfig
    initial: InitialSpec
    horizon: float
    trajectories: int
    master_seed: int
    threads: int = 1
    nonlinearity: NonlinearitySpec | None = None
    noise: NoiseSpec | None = None
    output: OutputSpec = OutputSpec()


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _require(section, known_keys):
    unknown = set(section.keys()) - set(known_keys)
    if unknown:
        raise ConfigurationError(
            f"unknown keys in [{section.name}]: {sorted(unknown)}"
        )


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigurationError(f"[{section.name}] is missing key {key!r}")
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            f"[{section.name}] {key} = {raw!r}: {exc}"
        ) from exc


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_atoms(raw: str):
    """Atoms as 'm1 m2 ... : weight' entries separated by ';'."""
    atoms = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ValueError(f"atom entry {chunk!r} lacks a ': weight' part")
        mark_part, weight_part = chunk.rsplit(":", 1)
        mark = tuple(float(tok) for tok in mark_part.split())
        if not mark:
            raise ValueError(f"atom entry {chunk!r} has an empty mark")
        atoms.append((mark, float(weight_part)))
    if not atoms:
        raise ValueError("no atoms given")
    return tuple(atoms)


def parse_config(text: str) -> RunSpec:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc

    known_sections = {"domain", "galerkin", "nonlinearity", "noise", "solver",
                      "initial", "run", "output"}
    present = set(parser.sections())
    unknown = present - known_sections
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    for name in ("domain", "galerkin", "solver", "initial", "run"):
        if name not in present:
            raise ConfigurationError(f"missing required section [{name}]")

    dom = parser["domain"]
    _require(dom, {"kind", "length", "length_x", "length_y"})
    kind = _get(dom, "kind", str, required=True)
    if kind not in DOMAIN_KINDS:
        raise ConfigurationError(f"domain kind must be one of {DOMAIN_KINDS}")
    if kind == "torus_2d":
        lengths = (_get(dom, "length_x", float, required=True),
                   _get(dom, "length_y", float, required=True))
    else:
        lengths = (_get(dom, "length", float, required=True),)
    domain = DomainSpec(kind=kind, lengths=lengths)

    gal = parser["galerkin"]
    _require(gal, {"beta", "max_level", "level", "dealias_factor"})
    galerkin = GalerkinSpec(
        beta=_get(gal, "beta", float, default=1.0),
        max_level=_get(gal, "max_level", int, default=6),
        level=_get(gal, "level", int, required=True),
        dealias_factor=_get(gal, "dealias_factor", int, default=2),
    )
    if not (0 <= galerkin.level <= galerkin.max_level):
        raise ConfigurationError(
            f"level must lie in [0, max_level={galerkin.max_level}]"
        )

    nonlinearity = None
    if "nonlinearity" in present:
        non = parser["nonlinearity"]
        _require(non, {"kind", "alpha"})
        nl_kind = _get(non, "kind", str, required=True)
        if nl_kind not in ("defocusing", "focusing"):
            raise ConfigurationError("nonlinearity kind must be defocusing or focusing")
        nonlinearity = NonlinearitySpec(
            kind=nl_kind, alpha=_get(non, "alpha", float, required=True)
        )

    noise = None
    if "noise" in present:
        noi = parser["noise"]
        _require(noi, {"kind", "symbols", "epsilon", "atoms", "activity",
                       "stability"})
        noise_kind = _get(noi, "kind", str, required=True)
        if noise_kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise kind must be one of {NOISE_KINDS}")
        symbols = tuple(
            tok.strip() for tok in _get(noi, "symbols", str, required=True).split(",")
        )
        for name in symbols:
            if name not in SYMBOL_PRESETS:
                raise ConfigurationError(
                    f"unknown symbol preset {name!r}; choose from {SYMBOL_PRESETS}"
                )
        if noise_kind == "atomic":
            atoms = _get(noi, "atoms", _parse_atoms, required=True)
            widths = {len(mark) for mark, _ in atoms}
            if widths != {len(symbols)}:
                raise ConfigurationError(
                    "every atom mark needs one component per symbol channel"
                )
            noise = NoiseSpec(
                kind=noise_kind, symbols=symbols,
                epsilon=_get(noi, "epsilon", float, default=0.0), atoms=atoms,
            )
        else:
            noise = NoiseSpec(
                kind=noise_kind, symbols=symbols,
                epsilon=_get(noi, "epsilon", float, required=True),
                activity=_get(noi, "activity", float, required=True),
                stability=_get(noi, "stability", float, required=True),
            )

    sol = parser["solver"]
    _require(sol, {"mode", "dt", "closure", "fp_tol", "max_fp_iters",
                   "max_halvings"})
    mode = _get(sol, "mode", str, default=MODE_MIDPOINT)
    closure = _get(sol, "closure", str, default=CLOSURE_TAYLOR2)
    solver = SolverConfig(
        mode=mode,
        dt=_get(sol, "dt", float, required=True),
        closure=closure,
        fp_tol=_get(sol, "fp_tol", float, default=1e-12),
        max_fp_iters=_get(sol, "max_fp_iters", int, default=100),
        max_halvings=_get(sol, "max_halvings", int, default=20),
    )

    ini = parser["initial"]
    _require(ini, {"preset", "rate", "mode", "scale"})
    preset = _get(ini, "preset", str, default="decaying")
    if preset not in INITIAL_PRESETS:
        raise ConfigurationError(
            f"unknown initial preset {preset!r}; choose from {INITIAL_PRESETS}"
        )
    initial = InitialSpec(
        preset=preset,
        rate=_get(ini, "rate", float, default=0.5),
        mode=_get(ini, "mode", int, default=0),
        scale=_get(ini, "scale", float, default=1.0),
    )

    run = parser["run"]
    _require(run, {"horizon", "trajectories", "master_seed", "threads"})
    horizon = _get(run, "horizon", float, required=True)
    trajectories = _get(run, "trajectories", int, default=1)
    master_seed = _get(run, "master_seed", int, default=0)
    threads = _get(run, "threads", int, default=1)
    if trajectories < 1:
        raise ConfigurationError("trajectories must be at least 1")
    if threads < 1:
        raise ConfigurationError("threads must be at least 1")

    output = OutputSpec()
    if "output" in present:
        out = parser["output"]
        _require(out, {"save_states", "save_events"})
        output = OutputSpec(
            save_states=_get(out, "save_states", _bool, default=False),
            save_events=_get(out, "save_events", _bool, default=True),
        )

    return RunSpec(
        domain=domain, galerkin=galerkin, solver=solver, initial=initial,
        horizon=horizon, trajectories=trajectories, master_seed=master_seed,
        threads=threads, nonlinearity=nonlinearity, noise=noise, output=output,
    )


def load_config(path: str) -> RunSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


# ---------------------------------------------------------------------------
# canonical serialization and hashing
# ---------------------------------------------------------------------------

def _format_atoms(atoms) -> str:
    return "; ".join(
        " ".join(repr(component) for component in mark) + " : " + repr(weight)
        for mark, weight in atoms
    )


def canonical_text(spec: RunSpec) -> str:
    """Deterministic INI rendering: fixed order, repr floats, LF endings."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            out.write(f"{key} = {value}\n")
        out.write("\n")

    dom = [("kind", spec.domain.kind)]
    if spec.domain.kind == "torus_2d":
        dom += [("length_x", repr(spec.domain.lengths[0])),
                ("length_y", repr(spec.domain.lengths[1]))]
    else:
        dom += [("length", repr(spec.domain.lengths[0]))]
    section("domain", dom)

    section("galerkin", [
        ("beta", repr(spec.galerkin.beta)),
        ("max_level", spec.galerkin.max_level),
        ("level", spec.galerkin.level),
        ("dealias_factor", spec.galerkin.dealias_factor),
    ])

    if spec.nonlinearity is not None:
        section("nonlinearity", [
            ("kind", spec.nonlinearity.kind),
            ("alpha", repr(spec.nonlinearity.alpha)),
        ])

    if spec.noise is not None:
        pairs = [("kind", spec.noise.kind),
                 ("symbols", ", ".join(spec.noise.symbols)),
                 ("epsilon", repr(spec.noise.epsilon))]
        if spec.noise.kind == "atomic":
            pairs.append(("atoms", _format_atoms(spec.noise.atoms)))
        else:
            pairs += [("activity", repr(spec.noise.activity)),
                      ("stability", repr(spec.noise.stability))]
        section("noise", pairs)

    section("solver", [
        ("mode", spec.solver.mode),
        ("dt", repr(spec.solver.dt)),
        ("closure", spec.solver.closure),
        ("fp_tol", repr(spec.solver.fp_tol)),
        ("max_fp_iters", spec.solver.max_fp_iters),
        ("max_halvings", spec.solver.max_halvings),
    ])

    section("initial", [
        ("preset", spec.initial.preset),
        ("rate", repr(spec.initial.rate)),
        ("mode", spec.initial.mode),
        ("scale", repr(spec.initial.scale)),
    ])

    section("run", [
        ("horizon", repr(spec.horizon)),
        ("trajectories", spec.trajectories),
        ("master_seed", spec.master_seed),
        ("threads", spec.threads),
    ])

    section("output", [
        ("save_states", "true" if spec.output.save_states else "false"),
        ("save_events", "true" if spec.output.save_events else "false"),
    ])

    return out.getvalue()


def config_hash(spec: RunSpec) -> str:
    return hashlib.sha256(canonical_text(spec).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_model_from_spec(spec: RunSpec) -> SpectralModel:
    kind = spec.domain.kind
    if kind == "torus_1d":
        domain = torus_1d(spec.domain.lengths[0])
    elif kind == "torus_2d":
        domain = torus_2d(*spec.domain.lengths)
    elif kind == "interval_dirichlet":
        domain = interval_dirichlet(spec.domain.lengths[0])
    else:
        domain = interval_neumann(spec.domain.lengths[0])
    return build_spectral_model(
        domain,
        beta=spec.galerkin.beta,
        max_level=spec.galerkin.max_level,
        dealias_factor=spec.galerkin.dealias_factor,
    )


def build_nonlinearity_from_spec(spec: RunSpec) -> Nonlinearity | None:
    if spec.nonlinearity is None:
        return None
    make = defocusing if spec.nonlinearity.kind == "defocusing" else focusing
    return make(spec.nonlinearity.alpha)


def symbol_values(name: str, model: SpectralModel) -> np.ndarray:
    """Deterministic real symbol profiles on the quadrature grid."""
    x = model.grid_points[:, 0]
    length = model.domain.lengths[0]
    if name == "constant":
        return np.ones(model.num_grid)
    if name == "cos":
        period = length if model.domain.kind.startswith("Torus") else 2.0 * length
        return np.cos(2.0 * np.pi * x / period)
    if name == "sin":
        period = length if model.domain.kind.startswith("Torus") else 2.0 * length
        return np.sin(2.0 * np.pi * x / period)
    if name == "bump":
        width = length / 8.0
        return np.exp(-((x - 0.5 * length) ** 2) / (2.0 * width**2))
    raise ConfigurationError(f"unknown symbol preset {name!r}")


def build_symbols_from_spec(spec: RunSpec, model: SpectralModel) -> np.ndarray | None:
    if spec.noise is None:
        return None
    return np.stack([symbol_values(name, model) for name in spec.noise.symbols])


def build_measure_from_spec(spec: RunSpec):
    if spec.noise is None:
        return None
    if spec.noise.kind == "atomic":
        marks = np.array([mark for mark, _ in spec.noise.atoms], dtype=float)
        weights = np.array([w for _, w in spec.noise.atoms], dtype=float)
        return AtomicMeasure(marks=marks, weights=weights,
                             epsilon=spec.noise.epsilon)
    return RadialStableMeasure(
        activity=spec.noise.activity,
        stability=spec.noise.stability,
        dimension=len(spec.noise.symbols),
        epsilon=spec.noise.epsilon,
    )


def initial_values(spec: RunSpec, model: SpectralModel) -> np.ndarray:
    """Deterministic full-space initial coefficients for the chosen preset."""
    ini = spec.initial
    lam = model.eigenvalues_S
    k = np.arange(model.num_modes)
    if ini.preset == "decaying":
        # smooth profile with fixed incommensurate phases
        phases = np.exp(2j * np.pi * ((np.sqrt(5.0) - 1.0) / 2.0) * k)
        return ini.scale * np.exp(-ini.rate * np.sqrt(lam)) * phases
    if ini.preset == "single_mode":
        if not (0 <= ini.mode < model.num_modes):
            raise ConfigurationError(
                f"mode index {ini.mode} outside the table of "
                f"{model.num_modes} modes"
            )
        out = np.zeros(model.num_modes, dtype=complex)
        out[ini.mode] = ini.scale
        return out
    if ini.preset == "plateau":
        # equal weight on every mode below the level threshold, zero above
        out = np.where(lam < 2.0 ** (spec.galerkin.level + 1), 1.0, 0.0)
        total = np.linalg.norm(out)
        return ini.scale * out.astype(complex) / (total if total else 1.0)
    raise ConfigurationError(f"unknown initial preset {ini.preset!r}")


def build_problem_from_spec(
    spec: RunSpec, model: SpectralModel | None = None
) -> tuple[SpectralModel, GalerkinProblem]:
    """Materialize the run: spectral model plus a ready-to-integrate problem."""
    if model is None:
        model = build_model_from_spec(spec)
    if spec.noise is not None and spec.solver.closure == CLOSURE_ATOMIC:
        if spec.noise.kind != "atomic":
            raise ConfigurationError(
                "AtomicExact closure requires atomic noise"
            )
    problem = build_problem(
        model,
        spec.galerkin.level,
        initial_values(spec, model),
        spec.horizon,
        nonlinearity=build_nonlinearity_from_spec(spec),
        symbols=build_symbols_from_spec(spec, model),
        measure=build_measure_from_spec(spec),
    )
    return model, problem
