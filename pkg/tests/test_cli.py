"""End-to-end command line tests: outputs, determinism, exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from jumpnls.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

FAST_CONFIG = """
[domain]
kind = torus_1d
length = 6.283185307179586

[galerkin]
beta = 1.0
max_level = 5
level = 3
dealias_factor = 2

[nonlinearity]
kind = defocusing
alpha = 3.0

[noise]
kind = atomic
symbols = cos
epsilon = 0.0
atoms = 0.5 : 3.0; -0.5 : 3.0

[solver]
mode = FaithfulMidpoint
dt = 0.05
closure = Taylor2
fp_tol = 1e-12
max_fp_iters = 100
max_halvings = 20

[initial]
preset = decaying
rate = 0.5
mode = 0
scale = 1.0

[run]
horizon = 0.4
trajectories = 3
master_seed = 5
threads = 1

[output]
save_states = true
save_events = true
"""


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(FAST_CONFIG, encoding="utf-8")
    return str(path)


def read(path: Path) -> bytes:
    return path.read_bytes()


def test_simulate_outputs(fast_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", fast_config, "--out", str(out)]) == 0
    assert "wrote 3 trajectories" in capsys.readouterr().out

    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["config_hash"]) == 64
    assert summary["trajectories"] == 3
    assert summary["level"] == 3
    assert len(summary["trajectory_seeds"]) == 3
    assert len(summary["final_mass"]) == 3
    assert "ensemble" in summary

    csv_lines = (out / "traj_0000.csv").read_text().splitlines()
    assert csv_lines[0] == "t,mass,kinetic,potential,energy,ea_norm"
    first = [float(tok) for tok in csv_lines[1].split(",")]
    assert first[0] == 0.0
    # every row parses to six finite floats
    for line in csv_lines[1:]:
        values = [float(tok) for tok in line.split(",")]
        assert len(values) == 6 and all(np.isfinite(values))

    states = np.load(out / "states_0000.npy")
    assert states.ndim == 2 and states.dtype == complex
    assert len(states) == len(csv_lines) - 1

    events = (out / "events_0000.csv").read_text().splitlines()
    assert events[0] == "time,mark_0"
    assert len(events) - 1 == summary["event_counts"][0]

    assert (out / "config.ini").exists()


def test_simulate_byte_identical_and_thread_invariant(fast_config, tmp_path):
    outs = []
    for name, extra in (("a", []), ("b", []), ("c", ["--threads", "3"])):
        out = tmp_path / name
        assert main(["simulate", "--config", fast_config, "--out", str(out),
                     *extra]) == 0
        outs.append(out)
    a, b, c = outs
    for k in range(3):
        fname = f"traj_{k:04d}.csv"
        assert read(a / fname) == read(b / fname)
        assert read(a / fname) == read(c / fname)
        ename = f"events_{k:04d}.csv"
        assert read(a / ename) == read(b / ename) == read(c / ename)
    assert read(a / "summary.json") == read(b / "summary.json")
    # thread count is recorded in the effective config, not the results
    assert json.loads((c / "summary.json").read_text())["final_mass"] == \
        json.loads((a / "summary.json").read_text())["final_mass"]


def test_simulate_seed_override_changes_path(fast_config, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["simulate", "--config", fast_config, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", fast_config, "--out", str(out2),
                 "--seed", "6"]) == 0
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    assert s1["config_hash"] != s2["config_hash"]
    assert s1["trajectory_seeds"] != s2["trajectory_seeds"]


def test_converge_json(fast_config, capsys):
    assert main(["converge", "--config", fast_config, "--levels", "1,2",
                 "--trajectories", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["fine_level"] == 3
    assert payload["levels"] == [1, 2]
    for key in ("1", "2"):
        assert len(payload["distances"][key]) == 2
        assert all(np.isfinite(payload["distances"][key]))
        assert payload["mean_distance"][key] >= 0.0


def test_converge_rejects_non_coarser_levels(fast_config, capsys):
    assert main(["converge", "--config", fast_config, "--levels", "3"]) == 2
    assert "coarser" in capsys.readouterr().err


def test_verify_subcommand(capsys):
    assert main(["verify", "--only", "seed_streams,cutoff_branches"]) == 0
    out = capsys.readouterr().out
    assert "PASS seed_streams" in out
    assert "2/2 checks passed" in out


def test_verify_list(capsys):
    assert main(["verify", "--list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "jump_unitarity" in lines
    assert len(lines) >= 25


def test_verify_bad_tol_scale(capsys):
    assert main(["verify", "--tol-scale", "0"]) == 2
    assert "tol_scale" in capsys.readouterr().err


def test_moments_atomic(capsys):
    config = str(CONFIG_DIR / "atomic_cubic.ini")
    assert main(["moments", "--config", config]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "atomic"
    assert payload["simulated_intensity"] == pytest.approx(4.0)
    assert payload["mean_simulated"] == [0.0]
    assert payload["variance_budget"] == 0.0


def test_moments_radial(capsys):
    config = str(CONFIG_DIR / "stable_linear.ini")
    assert main(["moments", "--config", config]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["kind"] == "radial_stable"
    assert payload["channels"] == 2
    assert payload["variance_budget"] > 0
    second = np.array(payload["second_moment_small"])
    assert second.shape == (2, 2)
    assert np.allclose(second, second.T)


def test_moments_requires_noise(tmp_path, capsys):
    config = str(CONFIG_DIR / "deterministic_cubic.ini")
    assert main(["moments", "--config", config]) == 2
    assert "no [noise] section" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.ini")
    assert main(["simulate", "--config", missing, "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_shipped_configs_simulate(tmp_path):
    # the shipped examples stay runnable end to end (trimmed for speed)
    config = str(CONFIG_DIR / "stable_linear.ini")
    out = tmp_path / "ship"
    assert main(["simulate", "--config", config, "--out", str(out),
                 "--trajectories", "1"]) == 0
    assert (out / "traj_0000.csv").exists()
