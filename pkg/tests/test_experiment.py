"""Ensemble runner, estimators, file output, and the command line."""

import json
import math

import numpy as np
import pytest

from mpemba.circuits import CircuitConfig
from mpemba.cli import main, parse_subsystem, parse_theta
from mpemba.core import partial_trace
from mpemba.experiment import (
    CSV_HEADER,
    DEFAULT_MEMORY_BOUND,
    ExperimentConfig,
    emit,
    estimate_memory_bytes,
    render,
    run_ensemble,
    run_latetime_sweep,
)
from mpemba.sectors import asymmetry, u1_sectors
from mpemba.states import InitialStateSpec, build


def small_config(**overrides):
    base = dict(
        circuit=CircuitConfig(num_qubits=6, depth=4, symmetry="u1", seed=3),
        initial=InitialStateSpec("ferro", theta=0.9),
        subsystem=(0, 1, 2),
        times=(0, 2, 4),
        shots=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(shots=0)
    with pytest.raises(ValueError):
        small_config(measure_symmetry="none")
    with pytest.raises(ValueError):
        small_config(measure_symmetry="su3")
    cfg = small_config(measure_symmetry="z2")
    assert cfg.observer().decomposition.symmetry == "z2"


def test_run_ensemble_deterministic():
    a = run_ensemble(small_config())
    b = run_ensemble(small_config())
    assert np.array_equal(a.mean_ds, b.mean_ds)
    assert np.array_equal(a.stderr_ds, b.stderr_ds)
    c = run_ensemble(small_config(
        circuit=CircuitConfig(num_qubits=6, depth=4, symmetry="u1", seed=4)))
    assert not np.array_equal(a.mean_ds, c.mean_ds)


def test_worker_count_does_not_change_statistics():
    serial = run_ensemble(small_config(workers=1))
    two = run_ensemble(small_config(workers=2))
    many = run_ensemble(small_config(workers=8))  # more workers than shots
    assert np.array_equal(serial.mean_ds, two.mean_ds)
    assert np.array_equal(serial.stderr_ds, two.stderr_ds)
    assert np.array_equal(serial.mean_ds, many.mean_ds)


def test_single_shot_has_zero_stderr():
    summary = run_ensemble(small_config(shots=1))
    assert np.array_equal(summary.stderr_ds, np.zeros(3))
    assert summary.shots == 1


def test_stderr_shrinks_like_sqrt_shots():
    few = run_ensemble(small_config(shots=50, times=(4,)))
    many = run_ensemble(small_config(shots=200, times=(4,)))
    ratio = few.stderr_ds[0] / many.stderr_ds[0]
    assert 1.6 < ratio < 2.4  # 2.0 up to variance-of-variance noise


def test_component_table_shapes():
    entropy = run_ensemble(small_config())
    assert entropy.component_mean.shape == (3, 1)
    pairs = run_ensemble(small_config(kind="purity_pair"))
    assert pairs.component_mean.shape == (3, 2)
    # purity of a pure product state at t = 0
    assert abs(pairs.component_mean[0, 0] - 1.0) < 1e-12
    # ratio estimator and shot-mean estimator agree exactly at t = 0
    # where the observable is deterministic
    assert abs(pairs.mean_ds[0] - pairs.shot_mean_ds[0]) < 1e-12


def test_memory_guard():
    assert estimate_memory_bytes(24) == 18 * (1 << 24) * 16
    assert estimate_memory_bytes(20, workers=4) == 4 * estimate_memory_bytes(20)
    cfg = small_config(
        circuit=CircuitConfig(num_qubits=24, depth=2, symmetry="u1"))
    with pytest.raises(MemoryError, match="GiB"):
        run_ensemble(cfg)
    # raising the bound admits the same register size
    assert estimate_memory_bytes(24) < 2 * DEFAULT_MEMORY_BOUND


def test_reduced_density_not_reducible():
    with pytest.raises(ValueError):
        run_ensemble(small_config(kind="reduced_density"))


# ----------------------------------------------------------- rendering


def test_render_summary_csv_schema():
    summary = run_ensemble(small_config(shots=2))
    text = render(summary)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + len(summary.times)
    first = dict(zip(CSV_HEADER, lines[1].split(",")))
    assert first["t"] == "0" and first["N"] == "6" and first["a"] == "3"
    assert first["symmetry"] == "u1" and first["init"] == "ferro"
    assert render(summary) == text  # rerun is byte-identical


def test_render_summary_json_round_trip():
    summary = run_ensemble(small_config(shots=2))
    back = json.loads(render(summary, fmt="json"))
    assert back == summary.rows()
    assert back[0]["mean_dS"] == float(summary.mean_ds[0])


def test_render_rows_and_edge_cases(tmp_path):
    rows = [{"x": 1.5, "flag": True, "hole": None}]
    text = render(rows)
    assert text == "x,flag,hole\n1.5,true,\n"
    assert render([], fieldnames=["a", "b"]) == "a,b\n"
    with pytest.raises(ValueError):
        render([])
    with pytest.raises(ValueError):
        render(rows, fmt="yaml")


def test_emit_writes_and_fails_loudly(tmp_path):
    summary = run_ensemble(small_config(shots=2))
    path = tmp_path / "out.csv"
    emit(summary, path)
    assert path.read_text() == render(summary)
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="out.csv"):
        emit(summary, bad)


# ----------------------------------------------------------- late-time


def test_sweep_attaches_u1_oracle_columns():
    cfg = small_config(
        circuit=CircuitConfig(num_qubits=4, depth=3, symmetry="u1", seed=5),
        initial=InitialStateSpec("ferro", theta=0.8),
        subsystem=(0, 1), times=(3,), shots=4, kind="purity_pair")
    rows = run_latetime_sweep(cfg, subsystem_sizes=[1, 2], thetas=[0.4, 0.8])
    assert len(rows) == 4
    for row in rows:
        assert row["oracle_dS2"] is not None
        assert row["oracle_purity_AQ"] <= row["oracle_purity_A"] + 1e-15
        assert row["dS2_ratio"] >= -1e-12
        assert "converged" not in row
    assert sorted({r["a"] for r in rows}) == [1, 2]


def test_sweep_oracle_columns_by_symmetry():
    none_cfg = small_config(
        circuit=CircuitConfig(num_qubits=4, depth=2, symmetry="none"),
        subsystem=(0, 1), times=(2,), shots=2, kind="purity_pair")
    row = run_latetime_sweep(none_cfg)[0]
    assert row["oracle_dS2"] is not None  # closed form for Haar circuits
    su2_cfg = small_config(
        circuit=CircuitConfig(num_qubits=4, depth=2, symmetry="su2"),
        subsystem=(0, 1), times=(2,), shots=2, kind="purity_pair")
    row = run_latetime_sweep(su2_cfg)[0]
    assert row["oracle_dS2"] is None  # no closed form carried for su2
    tilt_cfg = small_config(
        circuit=CircuitConfig(num_qubits=4, depth=2, symmetry="u1"),
        initial=InitialStateSpec("random_tilt_ferro", theta=0.5,
                                 tilt_width=0.2),
        subsystem=(0, 1), times=(2,), shots=2, kind="purity_pair")
    row = run_latetime_sweep(tilt_cfg)[0]
    assert row["oracle_dS2"] is None  # weights fluctuate per realization


def test_sweep_whole_register_reproduces_global_asymmetry():
    # |A| = N: both purities are invariants of the u1 circuit, so the
    # sweep must land exactly on the initial state's global value
    n, theta = 4, 0.6
    cfg = small_config(
        circuit=CircuitConfig(num_qubits=n, depth=2, symmetry="u1", seed=7),
        initial=InitialStateSpec("neel", theta=theta),
        subsystem=tuple(range(n)), times=(2,), shots=3, kind="purity_pair")
    row = run_latetime_sweep(cfg, subsystem_sizes=[n])[0]
    psi = build(InitialStateSpec("neel", theta=theta), n)
    rho = partial_trace(psi, tuple(range(n)))
    expect = asymmetry(rho, u1_sectors(n), kind="renyi2").value
    assert abs(row["dS2_ratio"] - expect) < 1e-10
    assert row["dS2_ratio_stderr"] < 1e-12


def test_sweep_convergence_column():
    cfg = small_config(
        circuit=CircuitConfig(num_qubits=4, depth=2, symmetry="u1", seed=2),
        subsystem=(0, 1), times=(2,), shots=5, kind="purity_pair")
    row = run_latetime_sweep(cfg, convergence_check=True)[0]
    assert isinstance(row["converged"], bool)


# ----------------------------------------------------------------- CLI


def test_parse_theta():
    assert parse_theta("0.2pi") == pytest.approx(0.2 * math.pi)
    assert parse_theta("pi") == math.pi
    assert parse_theta("-pi") == -math.pi
    assert parse_theta("0.25*pi") == pytest.approx(0.25 * math.pi)
    assert parse_theta("1.3") == 1.3
    assert parse_theta(0.7) == 0.7
    with pytest.raises(ValueError):
        parse_theta("quarter")


def test_parse_subsystem():
    assert parse_subsystem("0..4") == (0, 1, 2, 3)
    assert parse_subsystem("0,2,5") == (0, 2, 5)
    assert parse_subsystem([0, 1]) == (0, 1)
    with pytest.raises(Exception):
        parse_subsystem("3..3")


def run_cli(tmp_path, *argv, fmt="csv"):
    out = tmp_path / f"cli_out.{fmt}"
    code = main(list(argv) + ["--out", str(out), "--format", fmt])
    assert code == 0
    return out.read_text()


def test_cli_dynamics_schema(tmp_path):
    text = run_cli(tmp_path, "dynamics", "--n", "4", "--depth", "2",
                   "--subsystem", "0..2", "--shots", "3",
                   "--symmetry", "u1", "--init", "domain-wall",
                   "--theta", "0.3pi", "--mode", "ft")
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 3  # times default to every step 0..depth
    row = dict(zip(CSV_HEADER, lines[1].split(",")))
    assert row["init"] == "domain_wall"
    assert row["mode"] == "spatio_temporal"
    assert float(row["theta"]) == pytest.approx(0.3 * math.pi)
    assert row["n_shots"] == "3"


def test_cli_dynamics_times_subset(tmp_path):
    text = run_cli(tmp_path, "dynamics", "--n", "4", "--depth", "4",
                   "--subsystem", "0,1", "--shots", "2", "--times", "0,4")
    lines = text.strip().split("\n")
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "4"]


def test_cli_config_file_and_override(tmp_path):
    config = {"command": "dynamics", "n": 4, "depth": 2, "subsystem": "0..2",
              "shots": 2, "theta": "0.3pi", "symmetry": "u1"}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    text = run_cli(tmp_path, "--config", str(path))
    row = dict(zip(CSV_HEADER, text.strip().split("\n")[1].split(",")))
    assert row["n_shots"] == "2"
    assert float(row["theta"]) == pytest.approx(0.3 * math.pi)
    # explicit flags beat config values
    text = run_cli(tmp_path, "dynamics", "--config", str(path), "--shots", "5")
    row = dict(zip(CSV_HEADER, text.strip().split("\n")[1].split(",")))
    assert row["n_shots"] == "5"


def test_cli_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"command": "dynamics", "n": 4, "depths": 2}))
    with pytest.raises(SystemExit):
        main(["--config", str(path)])
    path.write_text(json.dumps({"command": "nonsense", "n": 4}))
    with pytest.raises(SystemExit):
        main(["--config", str(path)])
    path.write_text(json.dumps([1, 2]))
    with pytest.raises(SystemExit):
        main(["--config", str(path)])


def test_cli_missing_required_flags():
    with pytest.raises(SystemExit):
        main(["dynamics", "--depth", "2", "--subsystem", "0,1"])  # no --n
    with pytest.raises(SystemExit):
        main(["dynamics", "--n", "4"])  # no --subsystem/--depth
    with pytest.raises(SystemExit):
        main([])  # subcommand required


def test_cli_oracle_stdout(capsys):
    code = main(["oracle", "--n", "6", "--sizes", "2,3",
                 "--thetas", "0.3pi,0.5pi", "--format", "json"])
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 4
    assert {row["a"] for row in rows} == {2, 3}
    assert all("dS2_exact" in row for row in rows)


def test_cli_scan_theta(tmp_path):
    text = run_cli(tmp_path, "scan-theta", "--n", "8", "--a-fraction", "0.25")
    lines = text.strip().split("\n")
    assert lines[0].split(",") == ["N", "a", "a_fraction", "theta_max",
                                   "theta_c", "unimodal"]
    row = lines[1].split(",")
    assert row[1] == "2" and row[5] in ("true", "false")
    assert float(row[4]) == pytest.approx(2.0 * float(row[3]))


def test_cli_scan_theta_curve(capsys):
    assert main(["scan-theta", "--n", "6", "--curve", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 250  # default grid 0.002pi .. 0.5pi
    assert rows[0]["theta"] == pytest.approx(0.002 * math.pi)


def test_cli_latetime(tmp_path):
    text = run_cli(tmp_path, "latetime", "--n", "4", "--depth", "2",
                   "--sizes", "1,2", "--thetas", "0.4pi", "--shots", "2",
                   "--symmetry", "u1", "--no-check-convergence")
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    assert "converged" not in header
    assert len(lines) == 3
    text = run_cli(tmp_path, "latetime", "--n", "4", "--depth", "2",
                   "--sizes", "1", "--thetas", "0.4pi", "--shots", "2",
                   "--symmetry", "u1", fmt="json")
    rows = json.loads(text)
    assert rows[0]["converged"] in (True, False)  # on by default


def test_cli_memory_bound_flag():
    with pytest.raises(MemoryError):
        main(["dynamics", "--n", "12", "--depth", "1", "--subsystem", "0,1",
              "--shots", "1", "--memory-gib", "0.0001"])
