"""Late-time ensemble averages of subsystem purities and asymmetry.

After a deep symmetric circuit, the ensemble-averaged purity of a
subsystem and of its pinched (sector-diagonal) counterpart reduce to
double binomial sums over the charge distribution of the initial state.
This module evaluates those sums exactly, in log space so N up to 200
stays finite, with an arbitrary-precision rational mode for validation;
it also carries the closed forms for non-symmetric circuits, the
Gaussian approximation of the tilted-ferromagnet asymmetry, the
first-moment averaged reduced state, and grid scans for the angle where
the late-time asymmetry peaks.

The asymmetry reported here is the ratio-of-averages Renyi-2 value
ln(E[tr rho_A^2] / E[tr rho_AQ^2]); concentration of measure makes the
circuit-ensemble mean of per-realization asymmetries approach it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, lgamma, log, pi

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import popcounts
from .gates import sample_haar_unitary
from .states import ferro_charge_weights

LN2 = log(2.0)


def log_binomial_row(n):
    """log C(n, k) for k = 0..n."""
    k = np.arange(n + 1)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def f_coeff(q, p, a, b):
    """sum_{q'} C(b, q-q') C(b, p-q') C(a, q'), as a float.

    Symmetric in (q, p); zero when the q' range is empty.  Accumulated
    in log space, so it is safe for subsystems of a couple hundred
    sites.
    """
    lo = max(0, q - b, p - b)
    hi = min(q, p, a)
    if hi < lo:
        return 0.0
    terms = [
        lgamma(b + 1) - lgamma(q - qp + 1) - lgamma(b - q + qp + 1)
        + lgamma(b + 1) - lgamma(p - qp + 1) - lgamma(b - p + qp + 1)
        + lgamma(a + 1) - lgamma(qp + 1) - lgamma(a - qp + 1)
        for qp in range(lo, hi + 1)
    ]
    return float(np.exp(logsumexp(terms)))


def f_coeff_int(q, p, a, b):
    """Same sum with exact integer arithmetic."""
    lo = max(0, q - b, p - b)
    hi = min(q, p, a)
    return sum(comb(b, q - qp) * comb(b, p - qp) * comb(a, qp)
               for qp in range(lo, hi + 1))


def log_f_matrix(num_qubits, a):
    """(N+1, N+1) table of log f(q, p, a, N-a); -inf marks exact zeros.

    Vectorized over the whole (q, p, q') tensor; the logsumexp uses
    pairwise summation internally.
    """
    n, b = int(num_qubits), int(num_qubits) - int(a)
    if not 0 <= a <= n:
        raise ValueError(f"subsystem size {a} outside 0..{n}")
    lb = np.full(n + 2, -np.inf)
    lb[:b + 1] = log_binomial_row(b)
    la = log_binomial_row(a)
    q = np.arange(n + 1)
    qp = np.arange(a + 1)
    diff = q[:, None] - qp[None, :]
    valid = (diff >= 0) & (diff <= b)
    lb_qqp = np.where(valid, lb[np.clip(diff, 0, b)], -np.inf)  # (n+1, a+1)
    with np.errstate(invalid="ignore"):
        tensor = lb_qqp[:, None, :] + lb_qqp[None, :, :] + la[None, None, :]
    return logsumexp(tensor, axis=2)


@dataclass(frozen=True)
class LateTimeQuery:
    """One evaluation point of the late-time sums.

    Either ``theta`` (tilted ferromagnet, closed-form weights) or
    ``weights`` (any pure initial state via its charge distribution
    w_q = tr(rho_0 Pi_q)) must be given.
    """

    num_qubits: int
    a: int
    theta: float | None = None
    weights: tuple | None = None

    def __post_init__(self):
        if not 0 <= self.a <= self.num_qubits:
            raise ValueError(f"subsystem size {self.a} outside 0..{self.num_qubits}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.num_qubits + 1,) or w.min() < 0:
                raise ValueError("weights must be a nonnegative vector of length N+1")
            if abs(w.sum() - 1.0) > 1e-10:
                raise ValueError(f"weights sum to {w.sum()}, not 1")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        elif self.theta is None:
            raise ValueError("query needs either theta or an explicit weight vector")

    def weight_vector(self):
        if self.weights is not None:
            return np.asarray(self.weights)
        return ferro_charge_weights(self.num_qubits, self.theta)


@dataclass(frozen=True)
class PurityPair:
    """Ensemble-averaged (tr rho_A^2, tr rho_AQ^2)."""

    purity_A: float
    purity_AQ: float

    def __post_init__(self):
        if not (0.0 < self.purity_A <= 1.0 + 1e-12
                and 0.0 < self.purity_AQ <= 1.0 + 1e-12):
            raise ValueError(f"purities {self} outside (0, 1]")
        if self.purity_AQ > self.purity_A + 1e-12:
            raise ValueError(f"pinched purity exceeds purity: {self}")

    @property
    def renyi2_asymmetry(self):
        return float(np.log(self.purity_A / self.purity_AQ))


def _log_late_purities(n, a, log_w):
    """(log E[tr rho_A^2], log E[tr rho_AQ^2]) from log charge weights.

    Both are sums of the same nonnegative terms; the pinched purity
    just drops the swapped-role f(q, p, b, a) from the q != p part,
    which is what makes purity_AQ <= purity_A term by term.
    """
    log_r = log_binomial_row(n)
    f_a = log_f_matrix(n, a)          # f(q, p, a, b)
    f_b = log_f_matrix(n, n - a)      # f(q, p, b, a)
    with np.errstate(invalid="ignore"):
        both = np.logaddexp(f_a, f_b)
        cross = log_w[:, None] + log_w[None, :] - log_r[:, None] - log_r[None, :]
        diag = 2.0 * log_w - log_r - np.logaddexp(log_r, 0.0) + np.diag(both)
    off = ~np.eye(n + 1, dtype=bool)
    terms_full = np.concatenate([(cross + both)[off], diag])
    terms_pinch = np.concatenate([(cross + f_a)[off], diag])
    return float(logsumexp(terms_full)), float(logsumexp(terms_pinch))


def _log_weights(query):
    w = query.weight_vector()
    with np.errstate(divide="ignore"):
        return np.log(w)


def u1_late_purities(query):
    """Late-time average purities for U(1) circuits, exact double sums."""
    lp_a, lp_aq = _log_late_purities(query.num_qubits, query.a, _log_weights(query))
    return PurityPair(float(np.exp(lp_a)), float(np.exp(lp_aq)))


def u1_late_asymmetry_exact(query):
    """Ratio-of-averages Renyi-2 asymmetry ln(E[P_A]/E[P_AQ]), >= 0."""
    lp_a, lp_aq = _log_late_purities(query.num_qubits, query.a, _log_weights(query))
    return max(0.0, float(lp_a - lp_aq))


def u1_late_purities_exact_rational(query):
    """Arbitrary-precision rational evaluation of the same sums.

    Weights are taken as exact binary rationals of their double values,
    so this isolates the log-space accumulation error of the float
    path.  Returns (Fraction, Fraction).
    """
    n, a = query.num_qubits, query.a
    b = n - a
    w = [Fraction(x) for x in query.weight_vector()]
    r = [comb(n, q) for q in range(n + 1)]
    fa = [[f_coeff_int(q, p, a, b) for p in range(n + 1)] for q in range(n + 1)]
    fb = [[f_coeff_int(q, p, b, a) for p in range(n + 1)] for q in range(n + 1)]
    pur_full = Fraction(0)
    pur_pinch = Fraction(0)
    for q in range(n + 1):
        for p in range(n + 1):
            if q == p:
                term = w[q] * w[q] * (fa[q][q] + fb[q][q])
                term /= r[q] * (r[q] + 1)
                pur_full += term
                pur_pinch += term
            else:
                base = w[q] * w[p] / (r[q] * r[p])
                pur_full += base * (fa[q][p] + fb[q][p])
                pur_pinch += base * fa[q][p]
    return pur_full, pur_pinch


def _ratio_asymmetry(log_x, a):
    """-ln[(1 + x/sqrt(pi a)) / (1 + x)] evaluated from log x."""
    return float(np.logaddexp(0.0, log_x)
                 - np.logaddexp(0.0, log_x - 0.5 * log(pi * a)))


def nonsym_late_purities(num_qubits, a):
    """E[tr rho_A^2] = (2^b + 2^a)/(2^N + 1) and its pinched partner
    (2^b + C(2a, a)/2^a)/(2^N + 1), for Haar (no symmetry) circuits
    probed with charge sectors."""
    n, b = int(num_qubits), int(num_qubits) - int(a)
    if not 0 <= a <= n:
        raise ValueError(f"subsystem size {a} outside 0..{n}")
    denom = np.logaddexp(n * LN2, 0.0)
    log_pa = np.logaddexp(b * LN2, a * LN2) - denom
    log_c = lgamma(2 * a + 1) - 2 * lgamma(a + 1)
    log_paq = np.logaddexp(b * LN2, log_c - a * LN2) - denom
    return PurityPair(float(np.exp(log_pa)), float(np.exp(log_paq)))


def nonsym_late_asymmetry(num_qubits, a, form="exact"):
    """Late-time Renyi-2 asymmetry of non-symmetric circuits.

    form 'exact' uses the central binomial coefficient,
    -ln[(1 + C(2a,a)/2^N) / (1 + 2^(2a-N))]; form 'stirling' replaces
    C(2a,a) by 4^a/sqrt(pi a).  Both tend to 0 for a < N/2 and to
    ln sqrt(pi a) for a > N/2 as N grows.
    """
    n, a = int(num_qubits), int(a)
    if not 0 <= a <= n:
        raise ValueError(f"subsystem size {a} outside 0..{n}")
    if a == 0:
        return 0.0
    if form == "exact":
        log_x = lgamma(2 * a + 1) - 2 * lgamma(a + 1) - n * LN2
        return float(np.logaddexp(0.0, (2 * a - n) * LN2) - np.logaddexp(0.0, log_x))
    if form == "stirling":
        return _ratio_asymmetry((2 * a - n) * LN2, a)
    raise ValueError(f"unknown form {form!r}, expected 'exact' or 'stirling'")


def gaussian_g(theta):
    """g(theta) = 2 exp(-2 ln^2 |tan(theta/2)|), the effective base that
    replaces 2 away from theta = pi/2 in the Gaussian approximation."""
    return 2.0 * np.exp(-2.0 * np.log(np.abs(np.tan(theta / 2.0))) ** 2)


def u1_late_asymmetry_gaussian(num_qubits, a, theta):
    """Gaussian-approximation asymmetry and its validity flag.

    Returns (-ln[(1 + g^(2a-N)/sqrt(pi a)) / (1 + g^(2a-N))], valid)
    where valid means g(theta) >= 1, i.e. theta within about 0.17 pi of
    pi/2; outside that window the saddle point behind the formula is
    not controlled.  At theta = pi/2, g = 2 and the value coincides
    with the Stirling form of the non-symmetric result.
    """
    n, a = int(num_qubits), int(a)
    if not 0.0 < theta < pi:
        raise ValueError(f"theta {theta} outside (0, pi)")
    if not 0 <= a <= n:
        raise ValueError(f"subsystem size {a} outside 0..{n}")
    log_g = LN2 - 2.0 * log(abs(np.tan(theta / 2.0))) ** 2
    valid = bool(log_g >= 0.0)
    if a == 0:
        return 0.0, valid
    log_x = (2 * a - n) * log_g
    if log_x > 700.0:  # saturated regime, exp would overflow
        return 0.5 * log(pi * a), valid
    return _ratio_asymmetry(log_x, a), valid


def averaged_rho_A_first_order(num_qubits, a, theta):
    """First-moment averaged reduced state E[rho_A] for U(1) circuits.

    Diagonal in the computational basis with weight c^(a-k) s^k on a
    basis state of popcount k, where c = cos^2(theta/2), s = sin^2.
    N enters only through validation; the first moment of the global
    sector-Haar average depends on the subsystem alone.
    """
    n, a = int(num_qubits), int(a)
    if not 1 <= a <= n:
        raise ValueError(f"subsystem size {a} outside 1..{n}")
    if not 0.0 <= theta <= pi:
        raise ValueError(f"theta {theta} outside [0, pi]")
    weights = ferro_charge_weights(a, theta)
    return np.diag((weights / np.array([comb(a, k) for k in range(a + 1)]))
                   [popcounts(a)]).astype(complex)


@dataclass
class ThetaScanResult:
    theta_max: float
    theta_c: float          # 2 * theta_max
    thetas: np.ndarray
    values: np.ndarray
    unimodal: bool


def theta_scan(num_qubits, a_fraction, thetas=None):
    """Locate the tilt angle maximizing the late-time exact asymmetry.

    Scans |A| = round(a_fraction * N) over the grid (default
    0.002 pi .. 0.5 pi in 0.002 pi steps; a coarser grid is refused
    because the peak position is used for scaling fits).  Ties resolve
    to the smaller angle.  ``unimodal`` is False when the curve has
    more than one rise-fall sign change, which flags an untrustworthy
    theta_max rather than raising.
    """
    n = int(num_qubits)
    a = int(round(a_fraction * n))
    if thetas is None:
        thetas = np.arange(0.002, 0.5 + 1e-12, 0.002) * pi
    thetas = np.asarray(thetas, dtype=float)
    if len(thetas) < 2 or np.diff(thetas).max() > 0.002 * pi * (1 + 1e-9):
        raise ValueError("theta grid must be at least 0.002*pi fine")
    log_r = log_binomial_row(n)
    f_a = log_f_matrix(n, a)
    f_b = log_f_matrix(n, n - a)
    with np.errstate(invalid="ignore"):
        both = np.logaddexp(f_a, f_b)
    off = ~np.eye(n + 1, dtype=bool)
    values = np.empty(len(thetas))
    for k, theta in enumerate(thetas):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_w = np.log(ferro_charge_weights(n, theta))
            cross = (log_w[:, None] + log_w[None, :]
                     - log_r[:, None] - log_r[None, :])
            diag = 2.0 * log_w - log_r - np.logaddexp(log_r, 0.0) + np.diag(both)
        full = logsumexp(np.concatenate([(cross + both)[off], diag]))
        pinch = logsumexp(np.concatenate([(cross + f_a)[off], diag]))
        values[k] = max(0.0, full - pinch)
    peak = int(np.argmax(values))
    rising = np.sign(np.diff(values))
    rising = rising[rising != 0]
    unimodal = bool(np.all(np.diff(rising) <= 0))  # one + block then one - block
    return ThetaScanResult(float(thetas[peak]), float(2.0 * thetas[peak]),
                           thetas, values, unimodal)


def power_law_fit(ns, values):
    """Fit values = c * n^(-gamma); returns (c, gamma)."""
    slope, intercept = np.polyfit(np.log(ns), np.log(values), 1)
    return float(np.exp(intercept)), float(-slope)


def oracle_rows(num_qubits, subsystem_sizes, thetas):
    """Tabulate the U(1) oracle over a grid, one dict per row."""
    rows = []
    for a in subsystem_sizes:
        for theta in thetas:
            query = LateTimeQuery(num_qubits, int(a), float(theta))
            pair = u1_late_purities(query)
            gauss, valid = u1_late_asymmetry_gaussian(num_qubits, int(a), float(theta))
            rows.append({
                "N": int(num_qubits),
                "a": int(a),
                "theta": float(theta),
                "purity_A": pair.purity_A,
                "purity_AQ": pair.purity_AQ,
                "dS2_exact": u1_late_asymmetry_exact(query),
                "dS2_gaussian": gauss,
                "gaussian_valid": valid,
            })
    return rows


def mc_global_u1_purities(num_qubits, subsystem_sizes, initial, samples, rng,
                          batch=2000):
    """Brute-force check of the late-time sums, bypassing circuits.

    Draws global unitaries U = sum_q U_q Pi_q with independent Haar
    blocks on every total-charge sector, applies them to ``initial``
    and averages the subsystem purities directly.  Returns, per
    subsystem size, arrays (mean_A, sem_A, mean_AQ, sem_AQ).

    This is the independent route against which u1_late_purities is
    validated; keep it dumb.
    """
    from .gates import RandomSource

    if isinstance(rng, RandomSource):
        # convert once: repeated draws must advance a single generator,
        # not re-seed a fresh one per sector and batch
        rng = rng.generator()
    n = int(num_qubits)
    pops = popcounts(n)
    sector_indices = [np.nonzero(pops == q)[0] for q in range(n + 1)]
    psi0 = initial.amplitudes
    acc = {a: [] for a in subsystem_sizes}
    masks = {}
    for a in subsystem_sizes:
        pa = popcounts(a)
        masks[a] = pa[:, None] == pa[None, :]
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        out = np.empty((b, 1 << n), dtype=complex)
        for q, idx in enumerate(sector_indices):
            blocks = sample_haar_unitary(len(idx), rng, size=b)
            out[:, idx] = np.einsum("bij,j->bi", blocks, psi0[idx])
        for a in subsystem_sizes:
            m = out.reshape(b, 1 << a, 1 << (n - a))
            rho = np.einsum("bij,bkj->bik", m, m.conj())
            mag = np.abs(rho) ** 2
            pur_full = mag.sum(axis=(1, 2))
            pur_pinch = (mag * masks[a]).sum(axis=(1, 2))
            acc[a].append(np.column_stack([pur_full, pur_pinch]))
        done += b
    result = {}
    for a in subsystem_sizes:
        data = np.concatenate(acc[a])
        mean = data.mean(axis=0)
        sem = data.std(axis=0, ddof=1) / np.sqrt(len(data))
        result[a] = (mean[0], sem[0], mean[1], sem[1])
    return result
