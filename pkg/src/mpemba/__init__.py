"""Symmetry restoration and its Mpemba-like speedup in random circuits.

Submodules: core (states, entropies), gates (symmetric two-qubit
ensembles, seeded streams), states (tilted initial states), sectors
(charge/parity/spin decompositions and entanglement asymmetry),
circuits (brick-wall evolution), oracle (closed-form late-time
values), experiment (ensembles, statistics, file output), cli.
"""

from .circuits import CircuitConfig, TrajectoryObserver, evolve, evolve_states
from .core import PureState, basis_state, partial_trace, product_state
from .experiment import (EnsembleSummary, ExperimentConfig, emit, run_ensemble,
                         run_latetime_sweep)
from .gates import RandomSource, sample_gate, verify_symmetry
from .oracle import (LateTimeQuery, nonsym_late_asymmetry, theta_scan,
                     u1_late_asymmetry_exact, u1_late_asymmetry_gaussian,
                     u1_late_purities)
from .sectors import SectorDecomposition, asymmetry, prune, sectors_for
from .states import InitialStateSpec, build, charge_weights

__version__ = "0.1.0"

__all__ = [
    "CircuitConfig", "EnsembleSummary", "ExperimentConfig", "InitialStateSpec",
    "LateTimeQuery", "PureState", "RandomSource", "SectorDecomposition",
    "TrajectoryObserver", "asymmetry", "basis_state", "build", "charge_weights",
    "emit", "evolve", "evolve_states", "nonsym_late_asymmetry", "partial_trace",
    "product_state", "prune", "run_ensemble", "run_latetime_sweep",
    "sample_gate", "sectors_for", "theta_scan", "u1_late_asymmetry_exact",
    "u1_late_asymmetry_gaussian", "u1_late_purities", "verify_symmetry",
]
