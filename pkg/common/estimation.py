"""
Linear estimation of Fock probabilities and of the witness from homodyne data.

Pattern functions f0, f1 are averaged per phase bin and then over bins. The
variance of every estimate follows from the per-bin sample moments, so the
error bars (and the p0/p1 correlation) are exact for the finite data set.
Data anti-squeezing replaces f_n(x) by f_n(x/g)/g^2 with g = g(theta, s).
"""

import logging
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import dawsn

from common.witnesscore import (
    A_GRID_POINTS,
    A_RANGE,
    WitnessParams,
    make_report,
    optimal_relative_witness,
)

logger = logging.getLogger(__name__)


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class AntiSqueezedSample:
    """One phase bin after data anti-squeezing: x_scaled = x/g, each value weighted by 1/g^2."""
    vartheta: float
    g: float
    weight: float
    x_scaled: np.ndarray


@dataclass
class PhotonStats:
    p0: float
    p1: float
    var_p0: float
    var_p1: float
    cov01: float
    s: float
    N: int

    def value(self, n):
        return self.p0 if n == 0 else self.p1

    def variance(self, n):
        return self.var_p0 if n == 0 else self.var_p1

    def std(self, n):
        return math.sqrt(max(self.variance(n), 0.0))

    def cov(self):
        return np.array([[self.var_p0, self.cov01], [self.cov01, self.var_p1]])

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Pattern functions
# ---------------------------------------------------------------------------

def pattern_function(n, x):
    """f0 = 2 - 4xD(x), f1 = 2(2x^2 - 1) + 8x(1 - x^2)D(x), with D the Dawson function."""
    x = np.asarray(x, dtype=float)
    xd = x * dawsn(x)
    if n == 0:
        return 2.0 - 4.0 * xd
    if n == 1:
        return 2.0 * (2.0 * x * x - 1.0) + 8.0 * (1.0 - x * x) * xd
    raise EstimationError(f"Pattern functions exist here for n = 0, 1 only, got n={n}")


def pattern_table(x_grid):
    x_grid = np.asarray(x_grid, dtype=float)
    return list(zip(x_grid.tolist(), pattern_function(0, x_grid).tolist(), pattern_function(1, x_grid).tolist()))


# ---------------------------------------------------------------------------
# Data anti-squeezing
# ---------------------------------------------------------------------------

def antisqueeze_map(theta, s):
    """Effective phase and scaling for data anti-squeezed by s; vartheta stays on the branch of theta."""
    if not (0.0 < theta <= math.pi + 1e-12):
        raise EstimationError(f"Phase must lie in (0, pi], got {theta}")
    if s == 0:
        return theta, 1.0
    vartheta = math.atan2(math.exp(2.0 * s) * math.sin(theta), math.cos(theta))
    if vartheta <= 0.0:
        vartheta += math.pi
    g = math.sqrt(math.exp(-2.0 * s) * math.cos(theta) ** 2 + math.exp(2.0 * s) * math.sin(theta) ** 2)
    return vartheta, g


def antisqueeze_sample(x, theta, s):
    vartheta, g = antisqueeze_map(theta, s)
    x = np.asarray(x, dtype=float)
    return AntiSqueezedSample(vartheta=vartheta, g=g, weight=1.0 / (g * g), x_scaled=x / g)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _check_dataset(dataset):
    if dataset.K < 1:
        raise EstimationError("Dataset has no phase bins")
    counts = dataset.counts
    if np.any(counts == 0):
        empty = [k + 1 for k in np.flatnonzero(counts == 0)]
        raise EstimationError(f"Empty phase bins: {empty}")


def _estimate(dataset, s, coeffs):
    """
    Means and covariance of the linear functionals sum_i c_i f_i over the data.

    coeffs is a list of (c0, c1) pairs. Bins are reduced in index order so
    the result does not depend on evaluation order.
    """
    _check_dataset(dataset)
    coeffs = np.asarray(coeffs, dtype=float)
    nfun = len(coeffs)
    K = dataset.K
    mean = np.zeros(nfun)
    cov = np.zeros((nfun, nfun))
    for theta, xs in zip(dataset.thetas, dataset.samples):
        bin_ = antisqueeze_sample(xs, float(theta), s)
        y = bin_.x_scaled
        base = np.stack([pattern_function(0, y), pattern_function(1, y)]) * bin_.weight
        f = coeffs @ base
        M = f.shape[1]
        total = f.sum(axis=1)
        mean += total / M
        cov += (f @ f.T) / M**2 - np.outer(total, total) / M**3
    return mean / K, cov / K**2


def estimate_photon_stats(dataset, s=0.0):
    mean, cov = _estimate(dataset, s, [(1.0, 0.0), (0.0, 1.0)])
    return PhotonStats(
        p0=float(mean[0]),
        p1=float(mean[1]),
        var_p0=float(cov[0, 0]),
        var_p1=float(cov[1, 1]),
        cov01=float(cov[0, 1]),
        s=float(s),
        N=dataset.N,
    )


def estimate_pn(dataset, n=0):
    if n not in (0, 1):
        raise EstimationError(f"Only p0 and p1 are estimated, got n={n}")
    return estimate_photon_stats(dataset, 0.0)


def estimate_pn_antisqueezed(dataset, n, s):
    if n not in (0, 1):
        raise EstimationError(f"Only p0 and p1 are estimated, got n={n}")
    return estimate_photon_stats(dataset, s)


def estimate_witness(dataset, a, s=0.0):
    """Witness report from the single pattern function f_W = a*f0 + f1."""
    params = WitnessParams(a=a, s=s)
    mean, cov = _estimate(dataset, s, [(1.0, 0.0), (0.0, 1.0), (a, 1.0)])
    W = float(mean[2])
    deltaW = math.sqrt(max(float(cov[2, 2]), 0.0))
    return make_report(params, mean[0], mean[1], cov[:2, :2], W, deltaW)


def scan_witness(dataset, s_grid, a_range=A_RANGE, grid_points=A_GRID_POINTS):
    """For each s choose the a maximizing the relative witness and report it."""
    reports = []
    for s in s_grid:
        stats = estimate_photon_stats(dataset, float(s))
        a_opt, _ = optimal_relative_witness(stats.p0, stats.p1, stats.cov(), a_range, grid_points)
        report = estimate_witness(dataset, a_opt, float(s))
        report.search = {"a_range": list(a_range), "grid_points": grid_points}
        reports.append(report)
        logger.debug(f"s={s:+.3f} a_opt={a_opt:.4f} W-WG={report.W - report.WG:+.4f} WR={report.WR:.3f}")
    return reports


def best_report(reports):
    """The report with the largest relative witness (first one on ties)."""
    if not reports:
        raise EstimationError("No witness reports to choose from")
    best = reports[0]
    for report in reports[1:]:
        if report.WR > best.WR:
            best = report
    return best
