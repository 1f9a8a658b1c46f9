"""
Fit the free model parameters to estimated (p0(s), p1(s)) trajectories.

The loss is the sum over s of the Mahalanobis distance between model and
estimate under each point's 2x2 estimator covariance. Points outside the
bounds, or violating Vx*Vp >= 1/4, score +inf so the simplex stays inside.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from common.gaussianmodel import ModelError, ModelParams, model_trajectory

logger = logging.getLogger(__name__)

FREE_PARAMS = ("Vx", "Vp", "Q", "nth")
DEFAULT_BOUNDS = {
    "Vx": (0.05, 0.5),
    "Vp": (0.5, 5.0),
    "Q": (0.0, 1.0),
    "nth": (0.0, 0.5),
}
POLISH_ROUNDS = 3


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitPoint:
    s: float
    p0: float
    p1: float
    var_p0: float
    var_p1: float
    cov01: float

    @classmethod
    def from_stats(cls, stats):
        return cls(stats.s, stats.p0, stats.p1, stats.var_p0, stats.var_p1, stats.cov01)

    def precision(self):
        cov = np.array([[self.var_p0, self.cov01], [self.cov01, self.var_p1]])
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise FitError(f"Covariance at s={self.s} is not positive definite")
        return np.linalg.inv(cov)


@dataclass
class FitSpec:
    data: list
    fixed: ModelParams = field(default_factory=ModelParams)
    free: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    restarts: int = 20
    seed: int = 1
    max_iter: int = 4000

    def validate(self):
        unknown = set(self.free) - set(FREE_PARAMS)
        if unknown:
            raise FitError(f"Only {', '.join(FREE_PARAMS)} can be fitted, got {sorted(unknown)}")
        for name, (lo, hi) in self.free.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise FitError(f"Inconsistent bounds for {name}: [{lo}, {hi}]")
        if "Vx" in self.free and self.free["Vx"][0] <= 0:
            raise FitError("Vx must be bounded away from 0")
        if len(self.data) < max(4, len(self.free)):
            raise FitError(f"Need at least {max(4, len(self.free))} data points, got {len(self.data)}")
        if self.restarts < 1:
            raise FitError(f"Need at least one restart, got {self.restarts}")
        return self

    @property
    def names(self):
        return tuple(name for name in FREE_PARAMS if name in self.free)

    def params_at(self, x):
        return self.fixed.with_values(**dict(zip(self.names, map(float, x))))

    def inside(self, params):
        for name, (lo, hi) in self.free.items():
            if not lo <= getattr(params, name) <= hi:
                return False
        return params.Vx * params.Vp >= 0.25


@dataclass
class FitResult:
    params: ModelParams
    objective: float
    iterations: int
    converged: bool
    restart_objectives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "params": self.params.as_dict(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_objectives": self.restart_objectives,
        }


def objective(params, data, bounds=None):
    """Covariance-weighted squared distance; +inf outside bounds or for an unphysical model."""
    if bounds is not None:
        for name, (lo, hi) in bounds.items():
            if not lo <= getattr(params, name) <= hi:
                return math.inf
    if params.Vx * params.Vp < 0.25:
        return math.inf
    try:
        model = model_trajectory(params, [point.s for point in data])
    except ModelError:
        return math.inf
    total = 0.0
    for point, (_, p0, p1) in zip(data, model):
        d = np.array([p0 - point.p0, p1 - point.p1])
        total += float(d @ point.precision() @ d)
    return total


def _random_start(spec, rng):
    lo = np.array([spec.free[name][0] for name in spec.names])
    hi = np.array([spec.free[name][1] for name in spec.names])
    for _ in range(1000):
        x = rng.uniform(lo, hi)
        if spec.inside(spec.params_at(x)):
            return x
    raise FitError("Could not draw a physical starting point inside the bounds")


def _simplex(spec, x0):
    def loss(x):
        return objective(spec.params_at(x), spec.data, spec.free)

    res = minimize(loss, x0, method="Nelder-Mead",
                   options={"maxiter": spec.max_iter, "xatol": 1e-10, "fatol": 1e-14, "adaptive": True})
    iterations = res.nit
    # Nelder-Mead stalls on a collapsed simplex; restarting from the optimum re-expands it.
    for _ in range(POLISH_ROUNDS):
        again = minimize(loss, res.x, method="Nelder-Mead",
                         options={"maxiter": spec.max_iter, "xatol": 1e-10, "fatol": 1e-14, "adaptive": True})
        iterations += again.nit
        if not again.fun < res.fun:
            break
        res = again
    return res, iterations


def fit(spec):
    """Multi-start simplex search; the first start is the fixed parameter set when it lies inside the bounds."""
    spec.validate()
    for point in spec.data:
        point.precision()
    rng = np.random.default_rng(spec.seed)

    starts = []
    base = np.array([getattr(spec.fixed, name) for name in spec.names])
    if spec.inside(spec.fixed):
        starts.append(base)
    while len(starts) < spec.restarts:
        starts.append(_random_start(spec, rng))

    best = None
    objectives = []
    total_iterations = 0
    for index, x0 in enumerate(starts):
        res, iterations = _simplex(spec, x0)
        total_iterations += iterations
        objectives.append(float(res.fun))
        logger.debug(f"restart {index}: objective={res.fun:.6g} after {iterations} iterations")
        if best is None or res.fun < best[0].fun:
            best = (res, iterations)

    res, _ = best
    if not math.isfinite(res.fun):
        raise FitError("No restart reached a finite objective")
    if not res.success:
        logger.warning(f"Best restart hit the iteration cap ({res.message})")
    params = spec.params_at(res.x)
    logger.info(f"Fit objective {res.fun:.6g}: " + ", ".join(f"{n}={getattr(params, n):.5f}" for n in spec.names))
    return FitResult(
        params=params,
        objective=max(float(res.fun), 0.0),
        iterations=total_iterations,
        converged=bool(res.success),
        restart_objectives=objectives,
    )
