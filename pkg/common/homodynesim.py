"""
Seeded Monte Carlo homodyne data for the heralded state.

The quadrature marginal at phase theta is the difference of two zero-mean
normal densities, w(x) = [g_I(x) - P0' g_0(x)] / (1 - P0'). Samples are drawn
by rejection from the envelope g_I(x) / (1 - P0').
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from common.gaussianmodel import HeraldingError, marginal_variance

logger = logging.getLogger(__name__)

CSV_HEADER = ["bin", "theta", "x"]
ENVELOPE_TOL = 1e-12


class SamplingError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass
class QuadratureDataset:
    thetas: np.ndarray
    samples: list
    metadata: dict = field(default_factory=dict)

    @property
    def K(self):
        return len(self.thetas)

    @property
    def counts(self):
        return np.array([len(x) for x in self.samples], dtype=int)

    @property
    def N(self):
        return int(self.counts.sum())

    def validate(self):
        if self.K == 0:
            raise DatasetError("Dataset has no phase bins")
        if len(self.samples) != self.K:
            raise DatasetError(f"{self.K} phases but {len(self.samples)} sample lists")
        for k, theta in enumerate(self.thetas):
            if not (0.0 < theta <= math.pi + 1e-12):
                raise DatasetError(f"Phase of bin {k + 1} is {theta}, outside (0, pi]")
        return self

    def __eq__(self, other):
        if not isinstance(other, QuadratureDataset):
            return NotImplemented
        return (
            np.array_equal(self.thetas, other.thetas)
            and len(self.samples) == len(other.samples)
            and all(np.array_equal(a, b) for a, b in zip(self.samples, other.samples))
        )


def bin_phases(K):
    """theta_k = k*pi/K for k = 1..K."""
    return np.arange(1, K + 1, dtype=float) * math.pi / K


def _as_rng(rng_seed):
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def marginal_sigmas(state, theta):
    return (
        math.sqrt(marginal_variance(state.gammaI, theta)),
        math.sqrt(marginal_variance(state.gamma0, theta)),
    )


def marginal_pdf(state, theta, x):
    sI, s0 = marginal_sigmas(state, theta)
    P = state.P0prime
    return (norm.pdf(x, scale=sI) - P * norm.pdf(x, scale=s0)) / (1.0 - P)


def marginal_cdf(state, theta, x):
    sI, s0 = marginal_sigmas(state, theta)
    P = state.P0prime
    return (norm.cdf(x, scale=sI) - P * norm.cdf(x, scale=s0)) / (1.0 - P)


def _rejection_sample(state, theta, count, rng):
    P = state.P0prime
    if P >= 1.0:
        raise HeraldingError("P0' = 1: no heralded state to sample")
    sI, s0 = marginal_sigmas(state, theta)
    curvature = 0.5 * (1.0 / (s0 * s0) - 1.0 / (sI * sI))

    accepted = []
    have = 0
    while have < count:
        batch = int((count - have) / max(1.0 - P, 1e-3) * 1.2) + 16
        x = rng.normal(0.0, sI, size=batch)
        prob = 1.0 - P * (sI / s0) * np.exp(-curvature * x * x)
        if np.any(prob < -ENVELOPE_TOL) or np.any(prob > 1.0 + ENVELOPE_TOL):
            raise SamplingError(
                f"Acceptance probability left [0, 1] at theta={theta:.4f}: the state is unphysical"
            )
        keep = x[rng.random(batch) < prob][: count - have]
        accepted.append(keep)
        have += len(keep)
    return np.concatenate(accepted) if accepted else np.empty(0)


def sample_marginal(state, theta, count, rng_seed=None):
    """Draw count i.i.d. quadrature values at phase theta."""
    return _rejection_sample(state, theta, count, _as_rng(rng_seed))


def acceptance_rate(state, theta, count, rng_seed=None):
    """Empirical acceptance of the rejection sampler over count proposals."""
    rng = _as_rng(rng_seed)
    sI, s0 = marginal_sigmas(state, theta)
    x = rng.normal(0.0, sI, size=count)
    prob = 1.0 - state.P0prime * (sI / s0) * np.exp(-0.5 * (1.0 / s0**2 - 1.0 / sI**2) * x * x)
    return float(np.mean(rng.random(count) < prob))


def generate_dataset(state, K, M_per_bin, rng_seed=None):
    """K equidistant phases, M_per_bin samples each; bin k draws from its own substream of the seed."""
    if K < 1:
        raise DatasetError(f"Need at least one phase bin, got K={K}")
    if M_per_bin < 0:
        raise DatasetError(f"Samples per bin must be >= 0, got {M_per_bin}")
    thetas = bin_phases(K)
    if not isinstance(rng_seed, np.random.SeedSequence):
        rng_seed = np.random.SeedSequence(rng_seed)
    streams = rng_seed.spawn(K)
    samples = []
    for theta, stream in zip(thetas, streams):
        samples.append(sample_marginal(state, theta, M_per_bin, np.random.default_rng(stream)))
    logger.debug(f"Simulated {K} phase bins x {M_per_bin} samples (entropy={rng_seed.entropy})")
    return QuadratureDataset(
        thetas=thetas,
        samples=samples,
        metadata={"seed": rng_seed.entropy, "K": K, "M": M_per_bin, "P0prime": float(state.P0prime)},
    )


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def write_dataset(dataset, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for k, (theta, xs) in enumerate(zip(dataset.thetas, dataset.samples), start=1):
            t = f"{theta:.17g}"
            for x in xs:
                writer.writerow([k, t, f"{x:.17g}"])


def read_dataset(path):
    bins = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DatasetError(f"{path}: line 1: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise DatasetError(f"{path}: line {line}: expected 3 columns, got {len(row)}")
            try:
                k = int(row[0])
                theta = float(row[1])
                x = float(row[2])
            except ValueError:
                raise DatasetError(f"{path}: line {line}: cannot parse row {row!r}")
            if not (math.isfinite(theta) and math.isfinite(x)):
                raise DatasetError(f"{path}: line {line}: non-finite value")
            if not (0.0 < theta <= math.pi + 1e-12):
                raise DatasetError(f"{path}: line {line}: theta={theta} outside (0, pi]")
            entry = bins.setdefault(k, [theta, []])
            if entry[0] != theta:
                raise DatasetError(f"{path}: line {line}: bin {k} has conflicting phases {entry[0]} and {theta}")
            entry[1].append(x)

    if not bins:
        raise DatasetError(f"{path}: dataset is empty")
    order = sorted(bins)
    return QuadratureDataset(
        thetas=np.array([bins[k][0] for k in order]),
        samples=[np.array(bins[k][1]) for k in order],
        metadata={"source": str(path)},
    ).validate()
