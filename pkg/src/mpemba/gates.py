"""Random two-qubit gate ensembles with and without internal symmetries.

Gates are 4x4 complex ndarrays in the ordered pair basis
|q_i q_j> = |00>, |01>, |10>, |11>.  Every ensemble is driven by a
counter-based stream (`RandomSource`) so that any gate in any
realization can be regenerated independently and bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRIES = ("none", "u1", "z2", "su2")

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# rows are the parity eigenvectors of X(x)X: first two have eigenvalue +1,
# last two eigenvalue -1.  Real, symmetric, and its own inverse.
Z2_BASIS = np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0, 0.0],
        [0.0, 1.0, -1.0, 0.0],
        [1.0, 0.0, 0.0, -1.0],
    ]
) / np.sqrt(2.0)

# two-qubit singlet (|01> - |10>)/sqrt(2); the rest of the space is the triplet
SINGLET = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)
SINGLET_PROJECTOR = np.outer(SINGLET, SINGLET.conj())


@dataclass(frozen=True)
class RandomSource:
    """Deterministic splittable random stream.

    A source is identified by a 64-bit master seed plus a tuple of stream
    indices.  ``child(k, ...)`` derives an independent substream, so the
    gate used at (realization, step, layer, slot) can be addressed
    directly without generating anything that came before it.
    """

    master_seed: int
    stream: tuple = ()

    def child(self, *indices):
        return RandomSource(self.master_seed,
                            self.stream + tuple(int(i) for i in indices))

    def generator(self):
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng):
    if isinstance(rng, RandomSource):
        return rng.generator()
    return rng


def sample_haar_unitary(dim, rng, size=None):
    """Haar-distributed unitary via complex Ginibre + QR.

    The R-diagonal phases are divided out so the distribution is exactly
    Haar, not merely unitary.  ``size`` gives a stacked (size, dim, dim)
    batch drawn from the same stream.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    rng = _as_generator(rng)
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., np.newaxis, :]


def random_phases(count, rng):
    rng = _as_generator(rng)
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=count))


def sample_nonsymmetric_gate(rng):
    """Haar-random gate on the full 4-dimensional pair space."""
    return sample_haar_unitary(4, _as_generator(rng))


def sample_u1_gate(rng):
    """Magnetization-conserving gate: Haar blocks per number of down spins.

    The charge-0 and charge-2 blocks are one dimensional (random phases),
    the charge-1 block spanned by |01>, |10> is a 2x2 Haar unitary.
    """
    rng = _as_generator(rng)
    gate = np.zeros((4, 4), dtype=complex)
    ph = random_phases(2, rng)
    gate[0, 0] = ph[0]
    gate[1:3, 1:3] = sample_haar_unitary(2, rng)
    gate[3, 3] = ph[1]
    return gate


def sample_z2_gate(rng):
    """Spin-flip symmetric gate: independent Haar blocks on the two
    eigenspaces of X(x)X, rotated back to the computational basis."""
    rng = _as_generator(rng)
    block = np.zeros((4, 4), dtype=complex)
    block[:2, :2] = sample_haar_unitary(2, rng)
    block[2:, 2:] = sample_haar_unitary(2, rng)
    return Z2_BASIS @ block @ Z2_BASIS


def sample_su2_gate(rng):
    """Spin-rotation symmetric gate.

    Both two-qubit irreps (singlet and triplet) occur once, so by Schur's
    lemma the gate is a phase on each: U = e^{i a} P_s + e^{i b} P_t.
    """
    rng = _as_generator(rng)
    ph = random_phases(2, rng)
    return ph[1] * np.eye(4, dtype=complex) + (ph[0] - ph[1]) * SINGLET_PROJECTOR


_SAMPLERS = {
    "none": sample_nonsymmetric_gate,
    "u1": sample_u1_gate,
    "z2": sample_z2_gate,
    "su2": sample_su2_gate,
}


def sample_gate(symmetry, rng):
    try:
        sampler = _SAMPLERS[symmetry]
    except KeyError:
        raise ValueError(f"unknown symmetry {symmetry!r}, expected one of {SYMMETRIES}")
    return sampler(rng)


def _pair_operator(single_site):
    eye = np.eye(2, dtype=complex)
    return np.kron(single_site, eye) + np.kron(eye, single_site)


# conserved generators on the pair space, per ensemble
_GENERATORS = {
    "none": [],
    "u1": [np.diag([0.0, 1.0, 1.0, 2.0]).astype(complex)],
    "z2": [np.kron(PAULI_X, PAULI_X)],
    "su2": [_pair_operator(PAULI_X) / 2, _pair_operator(PAULI_Y) / 2,
            _pair_operator(PAULI_Z) / 2],
}


SYMMETRY_TOL = 1e-10


def verify_symmetry(gate, symmetry):
    """Check unitarity plus the commutators of the declared symmetry.

    Returns (ok, residual): residual is the largest entry among
    |U U^dag - 1| and |[U, G]| over the conserved generators G (charge
    count for u1, X(x)X for z2, the three total-spin components for
    su2; none has no generators).  ok means residual < 1e-10.
    """
    if symmetry not in _GENERATORS:
        raise ValueError(f"unknown symmetry {symmetry!r}, expected one of {SYMMETRIES}")
    gate = np.asarray(gate, dtype=complex)
    residual = np.abs(gate @ gate.conj().T - np.eye(4)).max()
    for gen in _GENERATORS[symmetry]:
        residual = max(residual, np.abs(gate @ gen - gen @ gate).max())
    return bool(residual < SYMMETRY_TOL), float(residual)
