"""Symmetry sector decompositions of a subsystem and the asymmetry measure.

A decomposition carries an orthonormal basis (columns of ``u0``, or the
computational basis when ``u0`` is None) together with a sector id per
basis column.  Pruning a density matrix means killing every coherence
between different sectors, i.e. the pinching map rho -> sum_q P_q rho P_q.
The entanglement asymmetry is the entropy gained by that pinching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import popcounts, purity, von_neumann_entropy
from .gates import Z2_BASIS  # noqa: F401  (re-exported convention anchor)


@dataclass
class SectorDecomposition:
    """Orthogonal sector structure on a 2^size dimensional subsystem.

    ``sector_of_column[k]`` is the sector index of basis column k, where
    the basis is the computational one if ``u0`` is None and the columns
    of ``u0`` otherwise.  ``labels[s]`` names sector s (charge q for u1,
    parity +-1 for z2, (J, Jz) for su2).
    """

    symmetry: str
    size: int
    labels: list
    sector_of_column: np.ndarray
    u0: np.ndarray | None = None
    multiplicities: dict = field(default_factory=dict)

    def sector_dims(self):
        return np.bincount(self.sector_of_column, minlength=len(self.labels))

    def projectors(self):
        """List of (label, projector matrix) in the computational basis."""
        dim = 1 << self.size
        out = []
        for s, label in enumerate(self.labels):
            cols = np.nonzero(self.sector_of_column == s)[0]
            if self.u0 is None:
                proj = np.zeros((dim, dim), dtype=complex)
                proj[cols, cols] = 1.0
            else:
                block = self.u0[:, cols]
                proj = block @ block.conj().T
            out.append((label, proj))
        return out


def u1_sectors(size):
    """Charge sectors: q = number of set bits, dimension C(size, q)."""
    if size < 1:
        raise ValueError("subsystem must contain at least one site")
    return SectorDecomposition(
        symmetry="u1",
        size=size,
        labels=list(range(size + 1)),
        sector_of_column=popcounts(size),
    )


def z2_sectors(size):
    """Parity sectors: the +-1 eigenspaces of prod_j X_j.

    The eigenbasis is the |+->-product basis (a Hadamard on every site),
    and the parity of a product string is (-1)^(number of minus signs),
    so both sectors have dimension 2^(size-1).
    """
    if size < 1:
        raise ValueError("subsystem must contain at least one site")
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    u0 = np.array([1.0])
    for _ in range(size):
        u0 = np.kron(u0, hadamard)
    return SectorDecomposition(
        symmetry="z2",
        size=size,
        labels=[1, -1],
        sector_of_column=(popcounts(size) % 2).astype(np.int64),
        u0=u0.astype(complex),
    )


def _couple_spin_half(two_j, columns):
    """Couple a spin-two_j/2 multiplet with one extra site.

    ``columns`` has 2J+1 columns |J, m> with m descending.  Returns the
    J+1/2 multiplet and (when J > 0) the J-1/2 multiplet in the enlarged
    space, new site appended as the least significant bit.  Standard
    Clebsch-Gordan coefficients with the Condon-Shortley sign.
    """
    dim = columns.shape[0]
    up = np.array([1.0, 0.0])
    down = np.array([0.0, 1.0])
    norm = 2.0 * (two_j + 1)

    def col(two_m):
        return columns[:, (two_j - two_m) // 2]

    out = []
    for two_j_new, sign in (((two_j + 1), 1.0), ((two_j - 1), -1.0)):
        if two_j_new < 0:
            continue
        block = np.zeros((2 * dim, two_j_new + 1))
        for k, two_m in enumerate(range(two_j_new, -two_j_new - 1, -2)):
            a = np.sqrt((two_j + two_m + 1) / norm)  # pairs with site up
            b = np.sqrt((two_j - two_m + 1) / norm)  # pairs with site down
            if sign < 0:
                a, b = -b, a
            vec = np.zeros(2 * dim)
            if abs(two_m - 1) <= two_j and abs(a) > 0:
                vec += a * np.kron(col(two_m - 1), up)
            if abs(two_m + 1) <= two_j and abs(b) > 0:
                vec += b * np.kron(col(two_m + 1), down)
            block[:, k] = vec
        out.append((two_j_new, block))
    return out


def su2_sectors(size):
    """Total-spin sectors from coupling the sites left to right.

    Sectors are labeled (J, Jz); all multiplicity copies of a given
    (J, Jz) live in one sector, so pruning keeps coherences inside the
    multiplicity space (the gates act trivially there, the environment
    does not).  Sector dimension equals the multiplicity of J.
    """
    if size < 1:
        raise ValueError("subsystem must contain at least one site")
    paths = [(1, np.eye(2))]  # one site: |1/2, +1/2> = |0>, |1/2, -1/2> = |1>
    for _ in range(size - 1):
        grown = []
        for two_j, columns in paths:
            grown.extend(_couple_spin_half(two_j, columns))
        paths = grown

    sector_labels = sorted(
        {(two_j, two_m) for two_j, _ in paths
         for two_m in range(two_j, -two_j - 1, -2)},
        key=lambda lab: (-lab[0], -lab[1]))
    index_of = {lab: s for s, lab in enumerate(sector_labels)}

    dim = 1 << size
    u0 = np.zeros((dim, dim))
    sector_of_column = np.zeros(dim, dtype=np.int64)
    per_sector_seen = np.zeros(len(sector_labels), dtype=np.int64)
    # column layout: sectors in label order, multiplicity copies in
    # construction order inside each sector
    starts = {}
    pos = 0
    mult = {}
    for two_j, _ in paths:
        mult[two_j] = mult.get(two_j, 0) + 1
    for lab in sector_labels:
        starts[lab] = pos
        pos += mult[lab[0]]
    for two_j, columns in paths:
        for k, two_m in enumerate(range(two_j, -two_j - 1, -2)):
            s = index_of[(two_j, two_m)]
            lab = (two_j, two_m)
            j = starts[lab] + per_sector_seen[s]
            u0[:, j] = columns[:, k]
            sector_of_column[j] = s
            per_sector_seen[s] += 1

    return SectorDecomposition(
        symmetry="su2",
        size=size,
        labels=[(two_j / 2.0, two_m / 2.0) for two_j, two_m in sector_labels],
        sector_of_column=sector_of_column,
        u0=u0.astype(complex),
        multiplicities={two_j / 2.0: m for two_j, m in sorted(mult.items(),
                                                              reverse=True)},
    )


_BUILDERS = {"u1": u1_sectors, "z2": z2_sectors, "su2": su2_sectors}


def sectors_for(symmetry, size):
    try:
        builder = _BUILDERS[symmetry]
    except KeyError:
        raise ValueError(f"no sector structure for symmetry {symmetry!r}")
    return builder(size)


def prune(rho, decomposition):
    """Pinching map: zero every coherence between different sectors."""
    rho = np.asarray(rho, dtype=complex)
    dim = 1 << decomposition.size
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match "
                         f"subsystem of {decomposition.size} sites")
    ids = decomposition.sector_of_column
    mask = ids[:, None] == ids[None, :]
    if decomposition.u0 is None:
        return np.where(mask, rho, 0.0)
    u0 = decomposition.u0
    rotated = u0.conj().T @ rho @ u0
    return u0 @ np.where(mask, rotated, 0.0) @ u0.conj().T


@dataclass
class AsymmetryResult:
    value: float           # Delta S = pruned - original, in nats
    base_entropy: float
    pruned_entropy: float
    purities: tuple | None = None   # (tr rho^2, tr rho_Q^2), renyi2 only


def asymmetry(rho, decomposition, kind="von_neumann"):
    """Entanglement asymmetry of rho with respect to the sector structure.

    kind 'von_neumann' uses S(rho); 'renyi2' uses -ln tr rho^2, in which
    case the result is ln(purity / pruned purity) and both purities ride
    along in the result.  Zero iff rho is already block diagonal.
    """
    pruned = prune(rho, decomposition)
    purities = None
    if kind == "von_neumann":
        base, after = von_neumann_entropy(rho), von_neumann_entropy(pruned)
    elif kind == "renyi2":
        purities = (purity(rho), purity(pruned))
        base, after = -np.log(purities[0]), -np.log(purities[1])
    else:
        raise ValueError(f"unknown asymmetry kind {kind!r}")
    value = float(after - base)
    if value < -1e-9:
        raise ValueError(f"asymmetry {value} < 0 beyond tolerance; inputs corrupted")
    return AsymmetryResult(value, float(base), float(after), purities)


def purity_pair(rho, decomposition):
    """(tr rho^2, tr rho_Q^2) with rho_Q the pruned matrix."""
    return purity(rho), purity(prune(rho, decomposition))


def save_matrix_dump(path, rho, symmetry="none", labels=()):
    """Write a density matrix as a one-line JSON header plus raw
    complex pairs (row-major float64 re, im interleaved)."""
    import json

    rho = np.asarray(rho, dtype=complex)
    header = {"dims": list(rho.shape), "symmetry": symmetry,
              "labels": [list(l) if isinstance(l, tuple) else l for l in labels]}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        pairs = np.empty(rho.shape + (2,))
        pairs[..., 0], pairs[..., 1] = rho.real, rho.imag
        fh.write(pairs.tobytes())


def load_matrix_dump(path):
    """Inverse of save_matrix_dump; returns (rho, header dict)."""
    import json

    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        dims = tuple(header["dims"])
        pairs = np.frombuffer(fh.read(), dtype=np.float64).reshape(dims + (2,))
    return pairs[..., 0] + 1j * pairs[..., 1], header
