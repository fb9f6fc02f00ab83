"""Dense state-vector primitives for small qubit registers.

Conventions used throughout the package:

* qubit 0 is the most significant bit of the basis index, so the basis
  state ``|b_0 b_1 ... b_{N-1}>`` sits at index ``sum_k b_k 2^(N-1-k)``,
* entropies are in nats (natural logarithm),
* density matrices are plain complex ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# eigenvalues below the clamp are treated as exact zeros; anything below the
# negative tolerance means the matrix is corrupted, not just noisy
EIG_CLAMP = 1e-12
EIG_NEG_TOL = -1e-6
NORM_TOL = 1e-10


@dataclass
class PureState:
    """State vector of ``num_qubits`` qubits (length ``2**num_qubits``)."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        dim = 1 << self.num_qubits
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({dim},)")
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector norm {nrm!r} is not 1")
        self.amplitudes = amps

    def copy(self):
        return PureState(self.num_qubits, self.amplitudes.copy())


def basis_state(num_qubits, index=0):
    """|index> in the computational basis."""
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[index] = 1.0
    return PureState(num_qubits, amps)


def product_state(single_qubit_vectors):
    """Tensor product of per-site 2-vectors, site 0 first (most significant)."""
    amps = np.array([1.0 + 0.0j])
    for v in single_qubit_vectors:
        amps = np.kron(amps, np.asarray(v, dtype=complex))
    return PureState(len(single_qubit_vectors), amps)


def popcounts(num_bits):
    """Number of set bits for every basis index 0 .. 2^num_bits - 1."""
    idx = np.arange(1 << num_bits, dtype=np.int64)
    out = np.zeros_like(idx)
    for k in range(num_bits):
        out += (idx >> k) & 1
    return out


def subsystem(sites, num_qubits):
    """Normalize a collection of site indices to a sorted tuple, with checks."""
    sites = tuple(sorted(int(s) for s in sites))
    if len(set(sites)) != len(sites):
        raise ValueError(f"duplicate sites in subsystem {sites}")
    if sites and (sites[0] < 0 or sites[-1] >= num_qubits):
        raise ValueError(f"subsystem {sites} out of range for {num_qubits} qubits")
    return sites


def complement(sites, num_qubits):
    inside = set(sites)
    return tuple(s for s in range(num_qubits) if s not in inside)


def apply_two_qubit_gate(state, gate, i, j):
    """Apply a 4x4 unitary to qubits (i, j), in place.

    The gate is given in the ordered pair basis |q_i q_j> = |00>, |01>,
    |10>, |11>.  The update contracts the gate against the two strided
    qubit axes of the amplitude tensor; the 2^N x 2^N matrix is never
    formed.  Unitarity is the sampler's responsibility, not checked here.
    """
    n = state.num_qubits
    if i == j or not (0 <= i < n) or not (0 <= j < n):
        raise ValueError(f"gate sites ({i}, {j}) invalid on {n} qubits")
    g = np.asarray(gate, dtype=complex)
    if g.shape != (4, 4):
        raise ValueError(f"two-qubit gate has shape {g.shape}, expected (4, 4)")
    if j == i + 1:
        # adjacent pair: both qubit axes are one contiguous stride-4 axis,
        # so a single middle-axis contraction does it with one copy; this
        # is the only path brick-wall layers ever take
        psi = state.amplitudes.reshape(1 << i, 4, -1)
        state.amplitudes = np.matmul(g, psi).reshape(-1)
        return state
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.tensordot(g.reshape(2, 2, 2, 2), psi, axes=[(2, 3), (i, j)])
    psi = np.moveaxis(psi, (0, 1), (i, j))
    state.amplitudes = np.ascontiguousarray(psi).reshape(-1)
    return state


def partial_trace(state, keep):
    """Reduced density matrix of ``keep`` (site order preserved).

    Returns a dense 2^|keep| x 2^|keep| complex ndarray.
    """
    n = state.num_qubits
    keep = subsystem(keep, n)
    rest = complement(keep, n)
    d_a = 1 << len(keep)
    psi = state.amplitudes.reshape((2,) * n)
    m = np.transpose(psi, keep + rest).reshape(d_a, -1)
    return m @ m.conj().T


def density_spectrum(rho):
    """Eigenvalues of a density matrix, clamped and sanity checked.

    Values below ``EIG_CLAMP`` become exact zeros; values below
    ``EIG_NEG_TOL`` raise, since that indicates a corrupted matrix
    rather than rounding noise.
    """
    vals = np.linalg.eigvalsh(rho)
    if vals.min() < EIG_NEG_TOL:
        raise ValueError(f"density matrix has eigenvalue {vals.min()}, not PSD")
    vals = vals.copy()
    vals[vals < EIG_CLAMP] = 0.0
    return vals


def von_neumann_entropy(rho):
    """S(rho) = -tr rho ln rho, in nats."""
    p = density_spectrum(rho)
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())


def purity(rho):
    """tr rho^2 as the squared Frobenius norm (basis independent)."""
    val = float(np.vdot(rho, rho).real)
    if not 0.0 < val <= 1.0 + 1e-9:
        raise ValueError(f"purity {val} outside (0, 1]; matrix corrupted")
    return val


def renyi2_entropy(rho):
    """Second Renyi entropy -ln tr rho^2, in nats."""
    return float(-np.log(purity(rho)))


def assert_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-10):
    """Validate hermiticity, unit trace and positivity; raises on failure."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix has shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise ValueError("density matrix is not hermitian")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr} is not 1")
    density_spectrum(rho)  # raises if not PSD
    return rho
