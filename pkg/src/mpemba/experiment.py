"""Ensemble orchestration, statistics and file output.

A realization k of an experiment is fully determined by (master_seed,
k): the circuit gates come from the trajectory stream child(k) and the
per-realization tilt draws (random_tilt initial states) from its
substream.  Realizations are therefore embarrassingly parallel and the
reassembled per-shot table is identical for any worker count, so means
and standard errors (computed once, with numpy's pairwise summation)
are bit-stable.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from .circuits import CircuitConfig, TrajectoryObserver, evolve, trajectory_source
from .gates import SYMMETRIES
from .oracle import (LateTimeQuery, nonsym_late_asymmetry, nonsym_late_purities,
                     u1_late_asymmetry_exact, u1_late_purities)
from .sectors import sectors_for
from .states import InitialStateSpec, build, charge_weights

GIB = 1 << 30
DEFAULT_MEMORY_BOUND = 4 * GIB

# transient copies alive per trajectory: working amplitudes, contraction
# output, contiguity copy, the transpose copy inside partial_trace, the
# reduced/pruned matrices and eigenworkspace, plus interpreter slack.
# Deliberately fat envelope; the guard exists to refuse hopeless sizes.
VECTOR_EQUIVALENTS = 18

CSV_HEADER = ("t", "mean_dS", "stderr", "n_shots", "N", "a", "theta",
              "symmetry", "mode", "init", "seed")


def estimate_memory_bytes(num_qubits, workers=1):
    return VECTOR_EQUIVALENTS * (1 << num_qubits) * 16 * max(1, int(workers))


@dataclass(frozen=True)
class ExperimentConfig:
    """One ensemble: circuit family, initial state, what and when to measure."""

    circuit: CircuitConfig
    initial: InitialStateSpec
    subsystem: tuple
    times: tuple
    shots: int
    kind: str = "von_neumann"
    measure_symmetry: str | None = None
    workers: int = 1
    memory_bound: int = DEFAULT_MEMORY_BOUND

    def __post_init__(self):
        object.__setattr__(self, "subsystem",
                           tuple(int(s) for s in self.subsystem))
        object.__setattr__(self, "times", tuple(int(t) for t in self.times))
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.measure_symmetry is not None and (
                self.measure_symmetry not in SYMMETRIES
                or self.measure_symmetry == "none"):
            raise ValueError(f"cannot measure sectors of {self.measure_symmetry!r}")

    def observer(self):
        decomposition = None
        if self.measure_symmetry is not None:
            decomposition = sectors_for(self.measure_symmetry, len(self.subsystem))
        return TrajectoryObserver(self.subsystem, self.times, kind=self.kind,
                                  decomposition=decomposition)


def _run_realizations(config, realizations):
    """Per-shot observation table for a list of realization indices."""
    observer = config.observer()
    decomposition = observer.resolved_decomposition(config.circuit)
    observer = TrajectoryObserver(observer.subsystem, observer.times,
                                  kind=observer.kind, decomposition=decomposition)
    out = []
    for k in realizations:
        tilt_stream = trajectory_source(config.circuit, k).child(1)
        initial = build(config.initial, config.circuit.num_qubits, rng=tilt_stream)
        records = evolve(initial, config.circuit, observer, realization=k)
        out.append(np.atleast_2d([np.atleast_1d(v) for _, v in records]))
    return np.array(out)  # (shots, n_times, width)


def _chunk_worker(args):
    return _run_realizations(*args)


@dataclass
class EnsembleSummary:
    """Per-time ensemble statistics.

    ``mean_ds``/``stderr_ds`` is the mean of per-shot asymmetries for
    entropy measurements.  For purity_pair measurements it is the
    ratio-of-averages estimator ln(mean P_A / mean P_AQ) with a
    delta-method standard error, matching what the analytic oracle
    computes; the per-shot-mean variant is still available via
    ``shot_mean_ds``.  ``component_mean`` keeps the raw observable
    means (one column for entropies, both purities for pairs).
    """

    config: ExperimentConfig
    times: tuple
    mean_ds: np.ndarray
    stderr_ds: np.ndarray
    shots: int
    component_mean: np.ndarray
    component_stderr: np.ndarray
    shot_mean_ds: np.ndarray
    shot_stderr_ds: np.ndarray

    def rows(self):
        cfg, circ, init = self.config, self.config.circuit, self.config.initial
        meta = {
            "n_shots": self.shots,
            "N": circ.num_qubits,
            "a": len(cfg.subsystem),
            "theta": init.theta,
            "symmetry": circ.symmetry,
            "mode": circ.mode,
            "init": init.kind,
            "seed": circ.seed,
        }
        return [{"t": t, "mean_dS": float(self.mean_ds[i]),
                 "stderr": float(self.stderr_ds[i]), **meta}
                for i, t in enumerate(self.times)]


def _mean_sem(values):
    """Column means and standard errors; sem = 0 for a single shot."""
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        return mean, np.zeros_like(mean)
    sem = values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    return mean, sem


def _ratio_estimate(pairs):
    """ln(mean_A / mean_AQ) and its delta-method standard error.

    pairs: (shots, 2) purity samples.  The covariance term matters:
    both purities come from the same realization and are strongly
    correlated.
    """
    n = pairs.shape[0]
    mean = pairs.mean(axis=0)
    value = float(np.log(mean[0] / mean[1]))
    if n < 2:
        return value, 0.0
    cov = np.cov(pairs, rowvar=False)
    var = (cov[0, 0] / mean[0] ** 2 + cov[1, 1] / mean[1] ** 2
           - 2.0 * cov[0, 1] / (mean[0] * mean[1])) / n
    return value, float(np.sqrt(max(var, 0.0)))


def run_ensemble(config):
    """Run all realizations and reduce to an EnsembleSummary."""
    estimate = estimate_memory_bytes(config.circuit.num_qubits, config.workers)
    if estimate > config.memory_bound:
        raise MemoryError(
            f"estimated transient footprint {estimate / GIB:.2f} GiB for "
            f"N={config.circuit.num_qubits} x {config.workers} worker(s) exceeds "
            f"the {config.memory_bound / GIB:.2f} GiB bound; raise memory_bound "
            f"or shrink the register")
    if config.kind == "reduced_density":
        raise ValueError("run_ensemble reduces scalar observations; "
                         "use evolve directly for matrix dumps")
    ks = list(range(config.shots))
    pool_size = min(config.workers, config.shots)
    if pool_size > 1:
        chunks = [(config, ks[i::pool_size]) for i in range(pool_size)]
        with multiprocessing.Pool(pool_size) as pool:
            parts = pool.map(_chunk_worker, chunks)
        values = np.empty((config.shots,) + parts[0].shape[1:])
        for (_, chunk_ks), part in zip(chunks, parts):
            values[list(chunk_ks)] = part
    else:
        values = _run_realizations(config, ks)

    shot_ds = values[:, :, 0]
    if config.kind == "purity_pair":
        shot_ds = np.log(values[:, :, 0] / values[:, :, 1])
    shot_mean, shot_sem = _mean_sem(shot_ds)
    comp_mean, comp_sem = _mean_sem(values)
    if config.kind == "purity_pair":
        ratio = [_ratio_estimate(values[:, i, :]) for i in range(values.shape[1])]
        mean_ds = np.array([r[0] for r in ratio])
        stderr_ds = np.array([r[1] for r in ratio])
    else:
        mean_ds, stderr_ds = shot_mean, shot_sem
    return EnsembleSummary(config, config.times, mean_ds, stderr_ds,
                           config.shots, comp_mean, comp_sem,
                           shot_mean, shot_sem)


def _oracle_columns(circuit, initial, a):
    """Late-time oracle values where a closed form exists (none/u1)."""
    empty = {"oracle_dS2": None, "oracle_purity_A": None, "oracle_purity_AQ": None}
    if circuit.symmetry == "none":
        pair = nonsym_late_purities(circuit.num_qubits, a)
        return {"oracle_dS2": nonsym_late_asymmetry(circuit.num_qubits, a),
                "oracle_purity_A": pair.purity_A,
                "oracle_purity_AQ": pair.purity_AQ}
    if circuit.symmetry != "u1":
        return empty
    if initial.kind == "ferro":
        query = LateTimeQuery(circuit.num_qubits, a, theta=initial.theta)
    elif initial.kind in ("random_tilt_ferro", "random_tilt_neel"):
        return empty  # weights fluctuate across realizations
    else:
        w = charge_weights(build(initial, circuit.num_qubits))
        query = LateTimeQuery(circuit.num_qubits, a, weights=tuple(w))
    pair = u1_late_purities(query)
    return {"oracle_dS2": u1_late_asymmetry_exact(query),
            "oracle_purity_A": pair.purity_A,
            "oracle_purity_AQ": pair.purity_AQ}


def run_latetime_sweep(config, subsystem_sizes=None, thetas=None,
                       convergence_check=False):
    """Late-time ensembles across |A| and/or theta, oracle values attached.

    Each combination runs a purity-pair ensemble observed at the final
    step only.  ``convergence_check`` reruns at twice the depth and
    adds a ``converged`` column (difference below one combined standard
    error); off by default since it triples the cost.
    """
    sizes = ([len(config.subsystem)] if subsystem_sizes is None
             else [int(a) for a in subsystem_sizes])
    angles = [config.initial.theta] if thetas is None else list(thetas)
    rows = []
    for a in sizes:
        for theta in angles:
            initial = replace(config.initial, theta=float(theta))
            circuit = config.circuit
            cfg = replace(config, initial=initial,
                          subsystem=tuple(range(a)), times=(circuit.depth,),
                          kind="purity_pair")
            summary = run_ensemble(cfg)
            row = {
                "N": circuit.num_qubits, "a": a, "theta": float(theta),
                "symmetry": circuit.symmetry, "mode": circuit.mode,
                "init": initial.kind, "seed": circuit.seed,
                "depth": circuit.depth, "n_shots": summary.shots,
                "purity_A": float(summary.component_mean[0, 0]),
                "purity_A_stderr": float(summary.component_stderr[0, 0]),
                "purity_AQ": float(summary.component_mean[0, 1]),
                "purity_AQ_stderr": float(summary.component_stderr[0, 1]),
                "dS2_ratio": float(summary.mean_ds[0]),
                "dS2_ratio_stderr": float(summary.stderr_ds[0]),
                "dS2_shot_mean": float(summary.shot_mean_ds[0]),
                "dS2_shot_stderr": float(summary.shot_stderr_ds[0]),
            }
            row.update(_oracle_columns(circuit, initial, a))
            if convergence_check:
                deeper = replace(cfg, circuit=replace(circuit,
                                                      depth=2 * circuit.depth),
                                 times=(2 * circuit.depth,))
                again = run_ensemble(deeper)
                gap = abs(float(again.mean_ds[0]) - row["dS2_ratio"])
                band = float(np.hypot(again.stderr_ds[0], row["dS2_ratio_stderr"]))
                row["converged"] = bool(gap < max(band, 1e-12))
            rows.append(row)
    return rows


def _format_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render(summary_or_rows, fmt="csv", fieldnames=None):
    """Format an EnsembleSummary or a list of row dicts as csv/json text.

    Float cells carry 17 significant digits so a rerun with the same
    configuration produces byte-identical text.
    """
    if isinstance(summary_or_rows, EnsembleSummary):
        rows = summary_or_rows.rows()
        fieldnames = list(CSV_HEADER)
    else:
        rows = list(summary_or_rows)
        if fieldnames is None:
            if not rows:
                raise ValueError("cannot infer a header from zero rows")
            fieldnames = list(rows[0].keys())
    if fmt == "csv":
        lines = [",".join(fieldnames)]
        lines += [",".join(_format_cell(row.get(name)) for name in fieldnames)
                  for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}, expected csv or json")


def emit(summary_or_rows, path, fmt="csv", fieldnames=None):
    """Write an EnsembleSummary or a list of row dicts to a file; see render."""
    text = render(summary_or_rows, fmt, fieldnames)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path
