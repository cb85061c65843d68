"""Command line front end: simulate, converge, verify, moments.

Output files are byte-deterministic for a fixed effective configuration:
floats are rendered with ``repr`` (shortest round-trip form), JSON keys are
sorted, line endings are LF, and trajectory scheduling across threads cannot
reorder results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import verify as verify_mod
from .config import (
    build_model_from_spec,
    build_measure_from_spec,
    build_nonlinearity_from_spec,
    build_problem_from_spec,
    build_symbols_from_spec,
    canonical_text,
    config_hash,
    initial_values,
    load_config,
)
from .diagnostics import ensemble_moments
from .exceptions import ConfigurationError, NumericsError
from .noise import sample_prm, trajectory_rng, trajectory_seed
from .solver import build_problem, simulate, simulate_coupled

_CSV_HEADER = "t,mass,kinetic,potential,energy,ea_norm"


def _apply_overrides(spec, args):
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "trajectories", None) is not None:
        updates["trajectories"] = args.trajectories
    if getattr(args, "threads", None) is not None:
        updates["threads"] = args.threads
    return dataclasses.replace(spec, **updates) if updates else spec


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _trajectory_csv(record) -> str:
    lines = [_CSV_HEADER]
    for i, t in enumerate(record.times):
        lines.append(",".join(repr(float(v)) for v in (
            t, record.mass[i], record.kinetic[i], record.potential[i],
            record.energy[i], record.ea_norm[i],
        )))
    return "\n".join(lines) + "\n"


def _events_csv(record) -> str:
    width = len(record.events[0].mark) if record.events else 0
    header = "time" + "".join(f",mark_{m}" for m in range(width))
    lines = [header]
    for event in record.events:
        lines.append(",".join(
            [repr(float(event.time))] + [repr(float(c)) for c in event.mark]
        ))
    return "\n".join(lines) + "\n"


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _cmd_simulate(args) -> int:
    spec = _apply_overrides(load_config(args.config), args)
    digest = config_hash(spec)
    model, problem = build_problem_from_spec(spec)

    def run(index):
        return simulate(
            problem, spec.solver,
            rng=trajectory_rng(spec.master_seed, index),
            record_states=spec.output.save_states,
        )

    indices = range(spec.trajectories)
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            records = list(pool.map(run, indices))
    else:
        records = [run(k) for k in indices]

    os.makedirs(args.out, exist_ok=True)
    for k, record in enumerate(records):
        _write_text(os.path.join(args.out, f"traj_{k:04d}.csv"),
                    _trajectory_csv(record))
        if spec.output.save_events and problem.measure is not None:
            _write_text(os.path.join(args.out, f"events_{k:04d}.csv"),
                        _events_csv(record))
        if spec.output.save_states:
            np.save(os.path.join(args.out, f"states_{k:04d}.npy"),
                    record.states)

    summary = {
        "config_hash": digest,
        "mode": spec.solver.mode,
        "closure": spec.solver.closure,
        "dt": spec.solver.dt,
        "horizon": spec.horizon,
        "level": problem.level.n,
        "level_dimension": problem.level.dim,
        "num_modes": model.num_modes,
        "master_seed": spec.master_seed,
        "trajectories": spec.trajectories,
        "trajectory_seeds": [
            trajectory_seed(spec.master_seed, k) for k in indices
        ],
        "variance_budget": records[0].variance_budget,
        "event_counts": [len(r.events) for r in records],
        "final_mass": [float(r.mass[-1]) for r in records],
        "sup_ea_norm": [float(np.max(r.ea_norm)) for r in records],
    }
    if spec.trajectories >= 2:
        stats = ensemble_moments(records, orders=(1.0, 2.0), bootstrap=500,
                                 seed=spec.master_seed)
        summary["ensemble"] = {
            str(order): list(values) for order, values in stats.moments.items()
        }
    _write_text(os.path.join(args.out, "summary.json"), _json_text(summary))
    _write_text(os.path.join(args.out, "config.ini"), canonical_text(spec))
    print(f"wrote {spec.trajectories} trajectories to {args.out} "
          f"(config {digest[:12]})")
    return 0


def _cmd_converge(args) -> int:
    spec = _apply_overrides(load_config(args.config), args)
    try:
        coarse_levels = sorted(int(tok) for tok in args.levels.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad --levels value {args.levels!r}") from exc
    fine_n = spec.galerkin.level
    if any(n >= fine_n for n in coarse_levels):
        raise ConfigurationError(
            f"--levels must all be coarser than the configured level {fine_n}"
        )

    model = build_model_from_spec(spec)
    measure = build_measure_from_spec(spec)
    symbols = build_symbols_from_spec(spec, model)
    nl = build_nonlinearity_from_spec(spec)
    u0 = initial_values(spec, model)

    def make_problem(n):
        return build_problem(model, n, u0, spec.horizon, nonlinearity=nl,
                             symbols=symbols, measure=measure)

    fine = make_problem(fine_n)
    distances = {n: [] for n in coarse_levels}
    for k in range(spec.trajectories):
        events = []
        if measure is not None:
            events = sample_prm(measure, spec.horizon,
                                trajectory_rng(spec.master_seed, k))
        for n in coarse_levels:
            result = simulate_coupled(make_problem(n), fine, spec.solver,
                                      events=events, record_states=False)
            distances[n].append(result.distance)

    payload = {
        "config_hash": config_hash(spec),
        "fine_level": fine_n,
        "levels": coarse_levels,
        "trajectories": spec.trajectories,
        "mean_distance": {
            str(n): float(np.mean(distances[n])) for n in coarse_levels
        },
        "distances": {
            str(n): [float(d) for d in distances[n]] for n in coarse_levels
        },
    }
    text = _json_text(payload)
    if args.out:
        _write_text(args.out, text)
        print(f"wrote convergence table to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_verify(args) -> int:
    if args.list:
        for name in verify_mod.check_names():
            print(name)
        return 0
    names = None
    if args.only:
        names = [tok.strip() for tok in args.only.split(",") if tok.strip()]
    results = verify_mod.run_checks(names=names, tol_scale=args.tol_scale)
    failures = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failures += 0 if result.passed else 1
        print(f"{status} {result.name} — {result.detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def _cmd_moments(args) -> int:
    spec = load_config(args.config)
    measure = build_measure_from_spec(spec)
    if measure is None:
        print("error: config has no [noise] section", file=sys.stderr)
        return 2
    moments = measure.moments()
    payload = {
        "config_hash": config_hash(spec),
        "kind": spec.noise.kind,
        "epsilon": spec.noise.epsilon,
        "channels": measure.dimension,
        "simulated_intensity": float(measure.simulated_intensity()),
        "mean_simulated": [float(v) for v in moments.mean_simulated],
        "second_moment_small": [
            [float(v) for v in row] for row in moments.second_moment_small
        ],
        "variance_budget": float(moments.variance_budget),
    }
    sys.stdout.write(_json_text(payload))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpnls",
        description="Spectral simulation of nonlinear Schrodinger dynamics "
                    "driven by compensated jump noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate trajectories and write CSV/JSON")
    p_sim.add_argument("--config", required=True, help="INI run configuration")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, help="override master seed")
    p_sim.add_argument("--trajectories", type=int, help="override trajectory count")
    p_sim.add_argument("--threads", type=int, help="override worker threads")
    p_sim.set_defaults(func=_cmd_simulate)

    p_con = sub.add_parser("converge",
                           help="couple coarse levels to the configured one")
    p_con.add_argument("--config", required=True)
    p_con.add_argument("--levels", required=True,
                       help="comma-separated coarse levels, e.g. 3,4,5")
    p_con.add_argument("--out", help="write JSON here instead of stdout")
    p_con.add_argument("--seed", type=int, help="override master seed")
    p_con.add_argument("--trajectories", type=int, help="override trajectory count")
    p_con.set_defaults(func=_cmd_converge)

    p_ver = sub.add_parser("verify", help="run the named self-check battery")
    p_ver.add_argument("--tol-scale", type=float, default=1.0)
    p_ver.add_argument("--only", help="comma-separated subset of check names")
    p_ver.add_argument("--list", action="store_true", help="list check names")
    p_ver.set_defaults(func=_cmd_verify)

    p_mom = sub.add_parser("moments", help="print jump-measure moments as JSON")
    p_mom.add_argument("--config", required=True)
    p_mom.set_defaults(func=_cmd_moments)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, NumericsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
