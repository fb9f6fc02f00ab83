"""Brick-wall random circuits and trajectory-level observation.

One time step is two layers of two-qubit gates on an open chain: the
even layer couples (0,1), (2,3), ... and the odd layer couples (1,2),
(3,4), ....  Four translation modes control how much randomness the
circuit has:

* ``iid``             every gate fresh (no structure),
* ``spatial``         one fresh gate per layer, shared along the chain,
* ``floquet``         gates drawn once and repeated every step,
* ``spatio_temporal`` one gate per layer, shared in space and time.

Gate randomness is addressed, not consumed: the gate at (realization,
step, layer, slot) comes from its own counter-based stream, so any
trajectory is reproducible in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import apply_two_qubit_gate, partial_trace
from .gates import SYMMETRIES, RandomSource, sample_gate
from .sectors import asymmetry, purity_pair, sectors_for

MODES = ("iid", "spatial", "floquet", "spatio_temporal")
_MODE_ALIASES = {"t": "spatial", "f": "floquet", "ft": "spatio_temporal",
                 "spatio-temporal": "spatio_temporal"}

OBSERVER_KINDS = ("von_neumann", "renyi2", "purity_pair", "reduced_density")


def canonical_mode(mode):
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown translation mode {mode!r}, expected {MODES}")
    return mode


@dataclass(frozen=True)
class CircuitConfig:
    """Geometry, ensemble and seed of one circuit family.

    ``depth`` counts steps (two layers each).  Boundaries are open; the
    chain length must be even so the even layer tiles it completely.
    """

    num_qubits: int
    depth: int
    symmetry: str = "none"
    mode: str = "iid"
    seed: int = 0

    def __post_init__(self):
        if self.num_qubits < 2 or self.num_qubits % 2:
            raise ValueError(f"num_qubits must be even and >= 2, got {self.num_qubits}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.symmetry not in SYMMETRIES:
            raise ValueError(f"unknown symmetry {self.symmetry!r}")
        object.__setattr__(self, "mode", canonical_mode(self.mode))


def layer_pairs(num_qubits, layer):
    """Site pairs of the even (0) or odd (1) layer, open boundary."""
    start = layer % 2
    return [(i, i + 1) for i in range(start, num_qubits - 1, 2)]


def trajectory_source(config, realization):
    """Root stream of one realization: (master_seed, k)."""
    return RandomSource(config.seed).child(realization)


def build_step_gates(config, step, source):
    """All (gate, site pair) placements of one step, application order.

    ``source`` is the trajectory root from ``trajectory_source``.  The
    stream of an individual gate is child(0, step_key, layer[, slot]),
    where step_key collapses to 0 for the time-translated modes and the
    slot index is dropped for the space-translated ones.
    """
    if not 0 <= step < config.depth:
        raise ValueError(f"step {step} outside circuit depth {config.depth}")
    step_key = step if config.mode in ("iid", "spatial") else 0
    placements = []
    for layer in (0, 1):
        pairs = layer_pairs(config.num_qubits, layer)
        if config.mode in ("spatial", "spatio_temporal"):
            gate = sample_gate(config.symmetry, source.child(0, step_key, layer))
            placements.extend((gate, pair) for pair in pairs)
        else:
            for slot, pair in enumerate(pairs):
                gate = sample_gate(config.symmetry,
                                   source.child(0, step_key, layer, slot))
                placements.append((gate, pair))
    return placements


def evolve_states(initial, config, realization=0):
    """Yield (t, working state) for t = 0 .. depth.

    The same PureState object is yielded every time and mutated in
    between; copy it if you need snapshots.
    """
    if initial.num_qubits != config.num_qubits:
        raise ValueError(f"initial state has {initial.num_qubits} qubits, "
                         f"circuit wants {config.num_qubits}")
    source = trajectory_source(config, realization)
    state = initial.copy()
    yield 0, state
    repeated = None
    for step in range(config.depth):
        if config.mode in ("floquet", "spatio_temporal"):
            if repeated is None:
                repeated = build_step_gates(config, step, source)
            placements = repeated
        else:
            placements = build_step_gates(config, step, source)
        for gate, (i, j) in placements:
            apply_two_qubit_gate(state, gate, i, j)
        yield step + 1, state


@dataclass
class TrajectoryObserver:
    """What to measure along a trajectory and when.

    ``decomposition`` defaults to the circuit's own symmetry sectors on
    the subsystem; for non-symmetric circuits it falls back to u1 (the
    restoration of which is what those circuits are probed for).
    """

    subsystem: tuple
    times: tuple
    kind: str = "von_neumann"
    decomposition: object | None = None

    def __post_init__(self):
        self.subsystem = tuple(int(s) for s in self.subsystem)
        self.times = tuple(int(t) for t in self.times)
        if list(self.times) != sorted(set(self.times)):
            raise ValueError("observation times must be sorted and distinct")
        if self.kind not in OBSERVER_KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")

    def resolved_decomposition(self, config):
        if self.decomposition is not None or self.kind == "reduced_density":
            return self.decomposition
        sym = config.symmetry if config.symmetry != "none" else "u1"
        return sectors_for(sym, len(self.subsystem))


def measure(state, observer, decomposition):
    rho = partial_trace(state, observer.subsystem)
    if observer.kind == "reduced_density":
        return rho
    if observer.kind == "purity_pair":
        return purity_pair(rho, decomposition)
    return asymmetry(rho, decomposition, kind=observer.kind).value


def evolve(initial, config, observer, realization=0):
    """Run one trajectory, returning [(t, observation), ...] in time order."""
    if observer.times and observer.times[-1] > config.depth:
        raise ValueError(f"observation time {observer.times[-1]} beyond "
                         f"depth {config.depth}")
    wanted = set(observer.times)
    decomposition = observer.resolved_decomposition(config)
    records = []
    state = None
    for t, state in evolve_states(initial, config, realization):
        if t in wanted:
            records.append((t, measure(state, observer, decomposition)))
    nrm = np.linalg.norm(state.amplitudes)
    if abs(nrm - 1.0) > 1e-8:
        raise RuntimeError(f"trajectory lost normalization: |psi| = {nrm}")
    return records
