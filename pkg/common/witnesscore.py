"""
Boundaries and witnesses for quantum non-Gaussianity and non-classicality.

A state is certified quantum non-Gaussian when its vacuum and single-photon
probabilities (p0, p1) lie above the curve traced by pure squeezed states.
Every linear witness W(a) = a*p0 + p1 has a Gaussian bound W_G(a), the tangent
to that curve, and a classical bound e^(a-1) from mixtures of coherent states.
"""

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq, minimize_scalar

logger = logging.getLogger(__name__)

A_RANGE = (-5.0, 0.999)
A_GRID_POINTS = 2000


class WitnessDomainError(ValueError):
    pass


class DegenerateCovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryPoint:
    r: float
    p0: float
    p1: float


@dataclass(frozen=True)
class WitnessParams:
    a: float
    s: float = 0.0

    def __post_init__(self):
        if not a_is_valid(self.a):
            raise WitnessDomainError(f"Witness slope must satisfy a < 1, got {self.a}")


@dataclass
class WitnessReport:
    params: WitnessParams
    p0_est: float
    p1_est: float
    cov: list
    W: float
    deltaW: float
    WG: float
    Wcl: float
    WR: float
    negativity_flag: bool
    search: dict = field(default_factory=dict)

    def to_dict(self):
        data = asdict(self)
        data["p0_report"] = clamp_probability(self.p0_est)
        data["p1_report"] = clamp_probability(self.p1_est)
        return data


def a_is_valid(a):
    return math.isfinite(a) and a < 1.0


def _check_a(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a >= 1.0):
        raise WitnessDomainError(f"Witness slope must satisfy a < 1, got {a}")
    return a


def clamp_probability(p):
    """Clip to [0, 1]. Only used for reporting, never inside the witness arithmetic."""
    return float(min(max(p, 0.0), 1.0))


def check_probability(p, sigma=0.0, name="p"):
    """Accept p inside [-3 sigma, 1 + 3 sigma]; linear estimators can stray slightly outside [0, 1]."""
    if not math.isfinite(p):
        raise WitnessDomainError(f"{name} is not finite: {p}")
    slack = 3.0 * sigma + 1e-12
    if p < -slack or p > 1.0 + slack:
        raise WitnessDomainError(f"{name}={p} lies outside [0, 1] beyond 3 standard deviations")
    return p


# ---------------------------------------------------------------------------
# Boundaries
# ---------------------------------------------------------------------------

def _boundary_arrays(r):
    r = np.asarray(r, dtype=float)
    log_cosh = r + np.log1p(np.exp(-2.0 * r)) - math.log(2.0)
    log_p0 = -0.5 * np.expm1(2.0 * r) - log_cosh
    with np.errstate(divide="ignore"):
        log_p1 = np.log(np.expm1(4.0 * r)) - math.log(4.0) + log_p0 - 2.0 * log_cosh
    return np.exp(log_p0), np.exp(log_p1)


def gaussian_boundary(r):
    """Vacuum and maximal single-photon probability of the pure squeezed state with constant r."""
    if not math.isfinite(r) or r < 0:
        raise WitnessDomainError(f"Squeezing constant must be finite and >= 0, got {r}")
    p0, p1 = _boundary_arrays(r)
    return BoundaryPoint(r=float(r), p0=float(p0), p1=float(p1))


def gaussian_boundary_curve(r_grid):
    r_grid = np.asarray(r_grid, dtype=float)
    if not np.all(np.isfinite(r_grid)) or np.any(r_grid < 0):
        raise WitnessDomainError("Squeezing grid must be finite and >= 0")
    return _boundary_arrays(r_grid)


def coherent_boundary(nbar):
    if not math.isfinite(nbar) or nbar < 0:
        raise WitnessDomainError(f"Mean photon number must be finite and >= 0, got {nbar}")
    p0 = math.exp(-nbar)
    return BoundaryPoint(r=float(nbar), p0=p0, p1=nbar * p0)


def coherent_boundary_curve(nbar_grid):
    nbar_grid = np.asarray(nbar_grid, dtype=float)
    if not np.all(np.isfinite(nbar_grid)) or np.any(nbar_grid < 0):
        raise WitnessDomainError("Mean photon number grid must be finite and >= 0")
    p0 = np.exp(-nbar_grid)
    return p0, nbar_grid * p0


def physical_boundary(p0):
    check_probability(p0, name="p0")
    return 1.0 - p0


def gaussian_p1_max(p0):
    """Invert the squeezed-state boundary: largest p1 reachable by Gaussian mixtures at fixed p0."""
    check_probability(p0, name="p0")
    if p0 >= 1.0:
        return 0.0
    if p0 <= 0.0:
        return 0.0
    target = math.log(p0)

    def gap(r):
        return math.log(float(_boundary_arrays(r)[0])) - target

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 64:
            return 0.0
    r = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return float(_boundary_arrays(r)[1])


def classical_p1_max(p0):
    check_probability(p0, name="p0")
    if p0 <= 0.0 or p0 >= 1.0:
        return 0.0
    return -p0 * math.log(p0)


def is_quantum_non_gaussian(p0, p1):
    return p1 > gaussian_p1_max(p0)


def is_nonclassical(p0, p1):
    return p1 > classical_p1_max(p0)


# ---------------------------------------------------------------------------
# Bounds of the linear witness
# ---------------------------------------------------------------------------

def _gaussian_bound_arrays(a):
    r0 = 0.5 * np.log((3.0 - a + np.sqrt(a * a - 10.0 * a + 9.0)) / 2.0)
    p0, p1 = _boundary_arrays(r0)
    return a * p0 + p1, r0


def gaussian_bound(a):
    """Return (W_G, r0): the maximum of a*p0 + p1 over Gaussian states and the squeezing reaching it."""
    _check_a(a)
    wg, r0 = _gaussian_bound_arrays(float(a))
    return float(wg), float(r0)


def classical_bound(a):
    _check_a(a)
    return math.exp(a - 1.0)


def witness_value(p0, p1, a):
    check_probability(p0, name="p0")
    check_probability(p1, name="p1")
    return a * p0 + p1


def negativity_flag(p1_s):
    """True when p1(s) > 1/2, which forces a negative Wigner function at the origin."""
    check_probability(p1_s, name="p1")
    return bool(p1_s > 0.5)


# ---------------------------------------------------------------------------
# Optimal relative witness
# ---------------------------------------------------------------------------

def _relative_witness(a, p0, p1, cov):
    a = np.asarray(a, dtype=float)
    var = a * a * cov[0][0] + 2.0 * a * cov[0][1] + cov[1][1]
    wg, _ = _gaussian_bound_arrays(a)
    return (a * p0 + p1 - wg) / np.sqrt(var), var


def optimal_relative_witness(p0, p1, cov, a_range=A_RANGE, grid_points=A_GRID_POINTS):
    """
    Maximize W_R(a) = (a*p0 + p1 - W_G(a)) / dW(a) over a.

    A dense grid on a_range locates the best cell, then a bounded Brent search
    (golden-section steps with parabolic interpolation) refines inside the two
    neighbouring cells. Returns (a_opt, WR_max).
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2):
        raise DegenerateCovarianceError(f"Covariance must be 2x2, got shape {cov.shape}")
    if np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))) < -1e-12 * max(1.0, np.max(np.abs(cov))):
        raise DegenerateCovarianceError("Covariance matrix is not positive semidefinite")
    check_probability(p0, math.sqrt(max(cov[0, 0], 0.0)), "p0")
    check_probability(p1, math.sqrt(max(cov[1, 1], 0.0)), "p1")

    lo, hi = a_range
    _check_a(hi)
    grid = np.linspace(lo, hi, grid_points)
    wr, var = _relative_witness(grid, p0, p1, cov)
    if np.any(var <= 0.0):
        raise DegenerateCovarianceError("Witness variance vanishes on the a-grid")

    best = int(np.argmax(wr))
    a_best, wr_best = float(grid[best]), float(wr[best])
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, grid_points - 1)]
    if right > left:
        res = minimize_scalar(
            lambda a: -float(_relative_witness(a, p0, p1, cov)[0]),
            bounds=(float(left), float(right)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > wr_best:
            a_best, wr_best = float(res.x), float(-res.fun)
    logger.debug(f"optimal a={a_best:.6f} WR={wr_best:.4f}")
    return a_best, wr_best


def make_report(params, p0_est, p1_est, cov, W, deltaW, search=None):
    """Assemble a WitnessReport from estimates and the scalar witness estimator."""
    WG, _ = gaussian_bound(params.a)
    Wcl = classical_bound(params.a)
    WR = (W - WG) / deltaW if deltaW > 0 else float("nan")
    return WitnessReport(
        params=params,
        p0_est=float(p0_est),
        p1_est=float(p1_est),
        cov=np.asarray(cov, dtype=float).tolist(),
        W=float(W),
        deltaW=float(deltaW),
        WG=WG,
        Wcl=Wcl,
        WR=float(WR),
        negativity_flag=negativity_flag(min(max(float(p1_est), 0.0), 1.0)),
        search=search or {},
    )
