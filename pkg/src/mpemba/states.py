"""Initial product (and GHZ) states with a global or per-site tilt.

The tilt rotates each site about y: a site prepared in |0> with angle t
becomes cos(t/2)|0> - sin(t/2)|1>, a site prepared in |1> becomes
sin(t/2)|0> + cos(t/2)|1>.  theta = 0 leaves the bit pattern intact,
theta = pi/2 points every spin along +x/-x.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .core import PureState, popcounts, product_state
from .gates import RandomSource

KINDS = (
    "ferro",
    "neel",
    "domain_wall",
    "random_tilt_ferro",
    "random_tilt_neel",
    "ghz",
    "staggered_ferro",
)

_RANDOM_KINDS = ("random_tilt_ferro", "random_tilt_neel")


@dataclass(frozen=True)
class InitialStateSpec:
    """What to prepare before the circuit runs.

    ``theta`` is the tilt in radians.  For the random_tilt kinds each
    site independently draws theta + uniform(-tilt_width, tilt_width);
    setting ``tilt_seed`` freezes the draw across realizations, otherwise
    the caller must pass a per-realization stream to ``build``.
    """

    kind: str
    theta: float = 0.0
    tilt_width: float = 0.0
    tilt_seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta {self.theta} outside [0, pi]")
        if self.tilt_width < 0.0:
            raise ValueError(f"tilt width {self.tilt_width} is negative")


def tilted_site(theta, bit):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if bit:
        return np.array([s, c], dtype=complex)
    return np.array([c, -s], dtype=complex)


def _bit_pattern(kind, num_qubits):
    if kind in ("ferro", "random_tilt_ferro", "staggered_ferro"):
        return [0] * num_qubits
    if kind in ("neel", "random_tilt_neel"):
        return [j % 2 for j in range(num_qubits)]
    if kind == "domain_wall":
        return [0 if j < num_qubits // 2 else 1 for j in range(num_qubits)]
    raise ValueError(kind)


def site_angles(spec, num_qubits, rng=None):
    """Per-site tilt angles, drawing the random kinds from ``rng``."""
    if spec.kind in _RANDOM_KINDS:
        if spec.tilt_seed is not None:  # frozen draw wins over any stream
            rng = RandomSource(spec.tilt_seed)
        elif rng is None:
            raise ValueError(
                f"{spec.kind} needs a random stream (or a tilt_seed to freeze it)")
        if isinstance(rng, RandomSource):
            rng = rng.generator()
        return spec.theta + rng.uniform(-spec.tilt_width, spec.tilt_width,
                                        size=num_qubits)
    if spec.kind == "staggered_ferro":
        return spec.theta * np.array([(-1.0) ** j for j in range(num_qubits)])
    return np.full(num_qubits, spec.theta)


def build(spec, num_qubits, rng=None):
    """Prepare the initial state on ``num_qubits`` sites."""
    angles = site_angles(spec, num_qubits, rng)
    if spec.kind == "ghz":
        # the tilt is a product rotation, so tilt both branches; they stay
        # orthogonal site by site and the 1/sqrt(2) normalization is exact
        lo = product_state([tilted_site(t, 0) for t in angles])
        hi = product_state([tilted_site(t, 1) for t in angles])
        amps = (lo.amplitudes + hi.amplitudes) / np.sqrt(2.0)
        return PureState(num_qubits, amps)
    bits = _bit_pattern(spec.kind, num_qubits)
    return product_state([tilted_site(t, b) for t, b in zip(angles, bits)])


def charge_weights(state):
    """Probability of each total charge sector q = popcount, from a state."""
    probs = np.abs(state.amplitudes) ** 2
    return np.bincount(popcounts(state.num_qubits), weights=probs,
                       minlength=state.num_qubits + 1)


def ferro_charge_weights(num_qubits, theta):
    """Closed-form charge distribution of the tilted ferromagnet.

    w_q = C(N, q) cos^(2(N-q))(theta/2) sin^(2q)(theta/2), a binomial
    distribution in the flip probability sin^2(theta/2).  Evaluated in
    log space so large N stays finite.
    """
    n = int(num_qubits)
    c2 = np.cos(theta / 2.0) ** 2
    s2 = np.sin(theta / 2.0) ** 2
    weights = np.zeros(n + 1)
    if s2 == 0.0:
        weights[0] = 1.0
        return weights
    if c2 == 0.0:
        weights[n] = 1.0
        return weights
    q = np.arange(n + 1)
    log_binoms = np.array([lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)
                           for k in q])
    return np.exp(log_binoms + (n - q) * np.log(c2) + q * np.log(s2))
