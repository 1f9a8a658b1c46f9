"""
Truncated Fock-space engine used as an independent check on the Gaussian model.

S(r) = exp[r/2 (a^2 - a^dag^2)] squeezes the x quadrature for r > 0, so
S(r)|0> has amplitudes c_2k proportional to (-tanh r)^k. Matrix elements are
built column by column with the three-term recursion, never from factorials.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, xlog1py, xlogy
from scipy.stats import binom

from common.witnesscore import gaussian_p1_max

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF = 60
MAX_CUTOFF = 4096
TAIL_BOUND = 1e-10
THRESHOLD_TOL = 1e-4
S_SEARCH = (0.0, 2.0)


class FockTruncationError(ValueError):
    pass


class HeraldingError(ValueError):
    pass


class ThresholdNotFoundError(ValueError):
    pass


@dataclass
class FockState:
    probs: np.ndarray
    amplitudes: np.ndarray | None = None
    n_max: int = DEFAULT_CUTOFF
    tail: float = 0.0
    rho: np.ndarray | None = None
    click_probability: float | None = None

    @property
    def pure(self):
        return self.amplitudes is not None

    @property
    def p0(self):
        return float(self.probs[0])

    @property
    def p1(self):
        return float(self.probs[1])

    def density(self):
        if self.rho is not None:
            return self.rho
        if self.amplitudes is None:
            return np.diag(self.probs)
        return np.outer(self.amplitudes, self.amplitudes.conj())


# ---------------------------------------------------------------------------
# Squeezing
# ---------------------------------------------------------------------------

def squeeze_columns(r, n_max, ncols):
    """Columns 0..ncols-1 of the truncated matrix <m|S(r)|n>, rows 0..n_max."""
    rows = n_max + 1
    t = math.tanh(r)
    sech = 1.0 / math.cosh(r)
    sqrt_m = np.sqrt(np.arange(rows, dtype=float))

    col0 = np.zeros(rows)
    col0[0] = math.sqrt(sech)
    for m in range(2, rows, 2):
        col0[m] = -t * math.sqrt((m - 1) / m) * col0[m - 2]

    cols = [col0]
    for n in range(1, ncols):
        shifted = np.zeros(rows)
        shifted[1:] = cols[n - 1][:-1]
        col = sech * sqrt_m * shifted
        if n >= 2:
            col = col + t * math.sqrt(n - 1) * cols[n - 2]
        cols.append(col / math.sqrt(n))
    return np.stack(cols, axis=1)


def squeeze_matrix(r, n_max):
    return squeeze_columns(r, n_max, n_max + 1)


def squeezed_fock(r, n=1, n_max=DEFAULT_CUTOFF, tail_bound=TAIL_BOUND):
    """Amplitudes of S(r)|n>, doubling the cutoff until the missing mass is below tail_bound."""
    if n < 0:
        raise FockTruncationError(f"Fock index must be >= 0, got {n}")
    cutoff = max(n_max, n + 1)
    while True:
        amps = squeeze_columns(r, cutoff, n + 1)[:, n]
        tail = max(1.0 - float(np.sum(amps * amps)), 0.0)
        if tail < tail_bound:
            return FockState(probs=amps * amps, amplitudes=amps, n_max=cutoff, tail=tail)
        if cutoff * 2 > MAX_CUTOFF:
            raise FockTruncationError(f"Tail mass {tail:.3g} above {tail_bound:g} at cutoff {cutoff} (r={r})")
        cutoff *= 2
        logger.debug(f"squeezed_fock r={r}: raising cutoff to {cutoff}")


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"Transmittance must lie in [0, 1], got {eta}")


def apply_loss(state, eta):
    """Photon-number distribution after a loss channel with transmittance eta."""
    _check_eta(eta)
    n = np.arange(len(state.probs))
    kernel = binom.pmf(n[:, None], n[None, :], eta)
    return FockState(probs=kernel @ state.probs, n_max=state.n_max, tail=state.tail)


def _loss_weights(k, size, eta):
    m = np.arange(size - k, dtype=float)
    log_w = 0.5 * (gammaln(m + k + 1) - gammaln(m + 1) - gammaln(k + 1))
    log_w = log_w + 0.5 * xlogy(m, eta) + 0.5 * xlog1py(k, -eta)
    return np.exp(log_w)


def apply_loss_density(rho, eta):
    """Full density matrix through the loss channel (sum over lost photon number k)."""
    _check_eta(eta)
    rho = np.asarray(rho)
    size = rho.shape[0]
    out = np.zeros_like(rho)
    for k in range(size):
        w = _loss_weights(k, size, eta)
        if not np.any(w):
            continue
        out[: size - k, : size - k] += np.outer(w, w) * rho[k:, k:]
    return out


def antisqueezed_probs(rho, s, n_max=1):
    """p_n(s) = <n| S^dag(s) rho S(s) |n> for n = 0..n_max."""
    rho = np.asarray(rho)
    cols = squeeze_columns(s, rho.shape[0] - 1, n_max + 1)
    return np.real(np.einsum("mn,mk,kn->n", cols.conj(), rho, cols))


# ---------------------------------------------------------------------------
# Photon subtraction and trajectories
# ---------------------------------------------------------------------------

def subtract_photon(r, T, n_max=DEFAULT_CUTOFF):
    """
    Heralded state of mode A after tapping S(r)|0> on a beam splitter with
    transmittance T and projecting the tapped mode onto 1 - |0><0|.

    The beam splitter acts on mode A as a loss channel whose Kraus index k
    counts the photons sent to mode B, so the click projection removes the
    k = 0 branch.
    """
    if not 0.0 < T < 1.0:
        raise ValueError(f"Tap-off transmittance must lie in (0, 1), got {T}")
    vac = squeezed_fock(r, 0, n_max)
    rho = vac.density()
    size = rho.shape[0]
    w0 = _loss_weights(0, size, T)
    no_click = np.outer(w0, w0) * rho
    total = apply_loss_density(rho, T)
    p_click = 1.0 - float(np.real(np.trace(no_click)))
    if p_click < 1e-14:
        raise HeraldingError(f"Click probability {p_click:.3g} too small (r={r}, T={T})")
    cond = (total - no_click) / p_click
    probs = np.clip(np.real(np.diag(cond)), 0.0, None)
    return FockState(probs=probs, n_max=vac.n_max, tail=vac.tail, rho=cond, click_probability=p_click)


def loss_trajectory(r, eta_grid, n_max=DEFAULT_CUTOFF):
    photon = squeezed_fock(r, 1, n_max)
    rows = []
    for eta in eta_grid:
        lossy = apply_loss(photon, float(eta))
        rows.append((float(eta), lossy.p0, lossy.p1))
    return rows


def lossy_photon_density(r, eta, n_max=DEFAULT_CUTOFF):
    photon = squeezed_fock(r, 1, n_max)
    return apply_loss_density(photon.density(), eta)


def antisqueeze_trajectory(r, eta, s_grid, n_max=DEFAULT_CUTOFF):
    rho = lossy_photon_density(r, eta, n_max)
    rows = []
    for s in s_grid:
        p = antisqueezed_probs(rho, float(s))
        rows.append((float(s), float(p[0]), float(p[1])))
    return rows


# ---------------------------------------------------------------------------
# Threshold transmittance
# ---------------------------------------------------------------------------

def boundary_margin(p0, p1):
    """Height of (p0, p1) above the Gaussian boundary; positive means quantum non-Gaussian."""
    return p1 - gaussian_p1_max(min(max(p0, 0.0), 1.0))


def best_antisqueezing(rho, s_range=S_SEARCH, grid_points=41):
    """Maximize the boundary margin over s: grid scan, then bounded refinement."""
    def margin(s):
        p = antisqueezed_probs(rho, s)
        return boundary_margin(float(p[0]), float(p[1]))

    grid = np.linspace(s_range[0], s_range[1], grid_points)
    values = np.array([margin(s) for s in grid])
    best = int(np.argmax(values))
    s_best, m_best = float(grid[best]), float(values[best])
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, grid_points - 1)]
    res = minimize_scalar(lambda s: -margin(s), bounds=(float(left), float(right)),
                          method="bounded", options={"xatol": 1e-8})
    if -res.fun > m_best:
        s_best, m_best = float(res.x), float(-res.fun)
    return s_best, m_best


def detected(r, eta, with_antisqueezing, n_max=DEFAULT_CUTOFF):
    if with_antisqueezing:
        rho = lossy_photon_density(r, eta, n_max)
        return best_antisqueezing(rho)[1] > 0.0
    lossy = apply_loss(squeezed_fock(r, 1, n_max), eta)
    return boundary_margin(lossy.p0, lossy.p1) > 0.0


def threshold_transmittance(r, with_antisqueezing=False, tol=THRESHOLD_TOL, n_max=DEFAULT_CUTOFF):
    """Smallest transmittance at which the lossy squeezed single photon is still certified."""
    if not r > 0:
        raise ValueError(f"Squeezing constant must be > 0, got {r}")
    if not detected(r, 1.0, with_antisqueezing, n_max):
        raise ThresholdNotFoundError(f"No transmittance in (0, 1] certifies r={r}")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if detected(r, mid, with_antisqueezing, n_max):
            hi = mid
        else:
            lo = mid
    logger.debug(f"threshold r={r} antisqueezing={with_antisqueezing}: {hi:.5f}")
    return hi
