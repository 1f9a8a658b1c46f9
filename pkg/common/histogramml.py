"""
Maximum-likelihood photon statistics from a phase-averaged quadrature histogram.

Samples (anti-squeezed by s if requested) are binned with weight 1/(g^2 M_k)
into bins of width dx centred on j*dx, plus one overflow bin on each side.
Phase averaging makes every POVM element diagonal in the Fock basis,
Pi_{j,n} = integral over bin j of |psi_n(x)|^2, and the photon-number
distribution follows from expectation maximization.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, roots_legendre

from common.estimation import EstimationError, _check_dataset, antisqueeze_sample

logger = logging.getLogger(__name__)

DEFAULT_BINNING = (0.1, -6.0, 6.0)
DEFAULT_NMAX = 20
POVM_TOL = 1e-10
P_FLOOR = 1e-300
MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class Binning:
    dx: float = 0.1
    x_min: float = -6.0
    x_max: float = 6.0

    def __post_init__(self):
        if not (math.isfinite(self.dx) and self.dx > 0):
            raise EstimationError(f"Bin width must be > 0, got {self.dx}")
        if not self.x_min < self.x_max:
            raise EstimationError(f"Empty bin range [{self.x_min}, {self.x_max}]")

    @classmethod
    def of(cls, value):
        if isinstance(value, Binning):
            return value
        return cls(*map(float, value))

    @property
    def j_min(self):
        return int(round(self.x_min / self.dx))

    @property
    def j_max(self):
        return int(round(self.x_max / self.dx))

    @property
    def n_regular(self):
        return self.j_max - self.j_min + 1

    @property
    def size(self):
        """Regular bins plus the two overflow bins."""
        return self.n_regular + 2

    def index(self, j):
        """Position of bin j in the counter vector; 0 and size-1 are the overflow bins."""
        j = np.asarray(j)
        return np.clip(j - self.j_min + 1, 0, self.size - 1)

    def edges(self):
        inner = (np.arange(self.j_min, self.j_max + 2, dtype=float) - 0.5) * self.dx
        return np.concatenate([[-np.inf], inner, [np.inf]])

    def centres(self):
        return np.arange(self.j_min, self.j_max + 1, dtype=float) * self.dx


@dataclass
class HistogramPOVM:
    binning: Binning
    counters: np.ndarray
    s: float = 0.0

    @property
    def total(self):
        return float(np.sum(self.counters))


@dataclass
class MLResult:
    pn: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    floored: bool = False
    monotone: bool = True
    s: float = 0.0

    @property
    def p0(self):
        return float(self.pn[0])

    @property
    def p1(self):
        return float(self.pn[1])

    def to_dict(self):
        return {
            "s": self.s,
            "pn": self.pn.tolist(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "floored": self.floored,
            "monotone": self.monotone,
        }


# ---------------------------------------------------------------------------
# Histogram
# ---------------------------------------------------------------------------

def build_histogram(dataset, s=0.0, binning=DEFAULT_BINNING):
    binning = Binning.of(binning)
    _check_dataset(dataset)
    counters = np.zeros(binning.size)
    for theta, xs in zip(dataset.thetas, dataset.samples):
        bin_ = antisqueeze_sample(xs, float(theta), s)
        j = np.rint(bin_.x_scaled / binning.dx).astype(np.int64)
        np.add.at(counters, binning.index(j), bin_.weight / len(xs))
    spill = counters[0] + counters[-1]
    if spill > 0:
        logger.debug(f"Histogram overflow weight {spill:.3g} of {counters.sum():.3g}")
    return HistogramPOVM(binning=binning, counters=counters, s=float(s))


# ---------------------------------------------------------------------------
# POVM elements
# ---------------------------------------------------------------------------

def hermite_functions(x, n_max):
    """psi_0..psi_n_max at x (vacuum variance 1/2), by the normalized three-term recursion."""
    x = np.asarray(x, dtype=float)
    psi = np.empty((n_max + 1,) + x.shape)
    psi[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def _gauss_legendre(lo, hi, n_max, order):
    nodes, weights = roots_legendre(order)
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * nodes
    psi = hermite_functions(x, n_max)
    return half * (psi * psi) @ weights


def _bin_mass(lo, hi, n_max, tol=POVM_TOL):
    order = 8
    mass = _gauss_legendre(lo, hi, n_max, order)
    while True:
        order *= 2
        refined = _gauss_legendre(lo, hi, n_max, order)
        if np.max(np.abs(refined - mass)) < tol or order >= 512:
            return refined
        mass = refined


def upper_tail_mass(c, n_max):
    """Integral of psi_n^2 over [c, inf) for n = 0..n_max, from erfc(c) and psi_n(c) psi_{n-1}(c)."""
    psi = hermite_functions(c, n_max)
    out = np.empty(n_max + 1)
    out[0] = 0.5 * erfc(c)
    for n in range(1, n_max + 1):
        out[n] = out[n - 1] + psi[n] * psi[n - 1] / math.sqrt(2.0 * n)
    return out


def _tail_mass(lo, hi, n_max):
    if math.isinf(lo) and math.isinf(hi):
        return np.ones(n_max + 1)
    if math.isinf(hi):
        return upper_tail_mass(lo, n_max)
    # psi_n^2 is even
    return upper_tail_mass(-hi, n_max)


def povm_from_edges(edges, n_max):
    """Pi_{j,n} for the intervals between consecutive edges; infinite edges are allowed."""
    edges = np.asarray(edges, dtype=float)
    if np.any(np.diff(edges) <= 0):
        raise EstimationError("Bin edges must be strictly increasing")
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if math.isinf(lo) or math.isinf(hi):
            rows.append(_tail_mass(lo, hi, n_max))
        else:
            rows.append(_bin_mass(lo, hi, n_max))
    return np.clip(np.array(rows), 0.0, None)


def povm_elements(binning=DEFAULT_BINNING, n_max=DEFAULT_NMAX):
    if n_max < 1:
        raise EstimationError(f"n_max must be >= 1, got {n_max}")
    binning = Binning.of(binning)
    povm = povm_from_edges(binning.edges(), n_max)
    completeness = np.max(np.abs(povm.sum(axis=0) - 1.0))
    if completeness > 1e-8:
        logger.warning(f"POVM completeness off by {completeness:.3g}")
    return povm


# ---------------------------------------------------------------------------
# Expectation maximization
# ---------------------------------------------------------------------------

def _log_likelihood(counters, P):
    mask = counters > 0
    return float(np.sum(counters[mask] * np.log(P[mask])))


def em_estimate(counters, povm, n_max=None, max_iter=5000, tol=1e-10, init=None):
    """
    EM iteration p_n <- p_n * sum_j (C_j/P_j) Pi_{j,n} / sum_j C_j.

    Stops when the log-likelihood gain drops below tol or after max_iter
    steps. A decrease larger than the rounding tolerance is logged and
    clears the monotone flag.
    """
    counters = np.asarray(counters, dtype=float)
    povm = np.asarray(povm, dtype=float)
    if n_max is not None:
        povm = povm[:, : n_max + 1]
    if counters.shape[0] != povm.shape[0]:
        raise EstimationError(f"{counters.shape[0]} counters but {povm.shape[0]} POVM rows")
    if np.any(counters < 0) or not np.any(counters > 0):
        raise EstimationError("Counters must be nonnegative and not all zero")

    size = povm.shape[1]
    p = np.full(size, 1.0 / size) if init is None else np.asarray(init, dtype=float).copy()
    if p.shape != (size,) or np.any(p < 0) or p.sum() <= 0:
        raise EstimationError("Initial distribution must be nonnegative with one entry per Fock state")
    p /= p.sum()

    total = counters.sum()
    floored = False

    def predicted(p):
        nonlocal floored
        P = povm @ p
        zero = (P <= 0) & (counters > 0)
        if np.any(zero):
            floored = True
            P = np.where(zero, P_FLOOR, P)
        return P

    P = predicted(p)
    loglik = _log_likelihood(counters, P)
    history = [loglik]
    monotone = True
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ratio = np.divide(counters, P, out=np.zeros_like(counters), where=counters > 0)
        p = p * (povm.T @ ratio) / total
        p /= p.sum()
        P = predicted(p)
        new = _log_likelihood(counters, P)
        history.append(new)
        if new < loglik - MONOTONE_TOL * max(1.0, abs(loglik)):
            monotone = False
            logger.warning(f"EM log-likelihood decreased at iteration {iterations}: {loglik:.15g} -> {new:.15g}")
        gain = new - loglik
        loglik = new
        if abs(gain) < tol:
            converged = True
            break

    if floored:
        logger.warning(f"EM floored predicted bin probabilities at {P_FLOOR:g}")
    if not converged:
        logger.warning(f"EM stopped after {max_iter} iterations without converging")
    return MLResult(pn=p, log_likelihood=loglik, iterations=iterations, converged=converged,
                    history=history, floored=floored, monotone=monotone)


def ml_estimate(dataset, s=0.0, binning=DEFAULT_BINNING, n_max=DEFAULT_NMAX,
                max_iter=5000, tol=1e-10, povm=None):
    hist = build_histogram(dataset, s, binning)
    if povm is None:
        povm = povm_elements(hist.binning, n_max)
    result = em_estimate(hist.counters, povm, n_max, max_iter, tol)
    result.s = float(s)
    logger.debug(f"ML s={s:+.3f}: p0={result.p0:.4f} p1={result.p1:.4f} after {result.iterations} iterations")
    return result


def ml_scan(dataset, s_grid, binning=DEFAULT_BINNING, n_max=DEFAULT_NMAX, max_iter=5000, tol=1e-10):
    """ML estimate for every s; the POVM does not depend on s and is built once."""
    binning = Binning.of(binning)
    povm = povm_elements(binning, n_max)
    return [ml_estimate(dataset, float(s), binning, n_max, max_iter, tol, povm=povm) for s in s_grid]
