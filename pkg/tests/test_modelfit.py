import math

import numpy as np
import pytest

from common.estimation import estimate_photon_stats
from common.gaussianmodel import ModelParams, model_trajectory, prepare_state
from common.homodynesim import generate_dataset
from common.modelfit import DEFAULT_BOUNDS, FitError, FitPoint, FitSpec, fit, objective

S_GRID = np.round(np.arange(-8, 9) * 0.05, 12) + 0.0


def _exact_points(params, var=1e-4):
    return [FitPoint(s, p0, p1, var, var, 0.0) for s, p0, p1 in model_trajectory(params, S_GRID)]


def test_objective_vanishes_on_generating_params():
    params = ModelParams()
    assert objective(params, _exact_points(params)) == 0.0


def test_objective_grows_away_from_truth():
    params = ModelParams()
    data = _exact_points(params)
    assert objective(params.with_values(Vx=params.Vx + 0.01), data) > 0.0


def test_objective_ignores_point_order():
    params = ModelParams()
    data = _exact_points(params.with_values(Q=0.5))
    assert objective(params, data[::-1]) == pytest.approx(objective(params, data), rel=1e-12)


def test_objective_penalties():
    params = ModelParams()
    data = _exact_points(params)
    assert objective(params.with_values(nth=-0.01), data, DEFAULT_BOUNDS) == math.inf
    assert objective(params.with_values(Vx=0.3, Vp=0.6), data) == math.inf


def test_fit_setup_validation():
    points = _exact_points(ModelParams())
    with pytest.raises(FitError):
        FitSpec(data=points[:3]).validate()
    with pytest.raises(FitError):
        FitSpec(data=points, free={"Vx": (0.4, 0.1)}).validate()
    with pytest.raises(FitError):
        FitSpec(data=points, free={"eta": (0.0, 1.0)}).validate()
    bad = [FitPoint(0.0, 0.3, 0.4, 0.0, 1e-4, 0.0)] * 4
    with pytest.raises(FitError):
        fit(FitSpec(data=bad, restarts=1))


def test_fit_is_deterministic():
    truth = ModelParams()
    start = truth.with_values(Vx=0.3, Vp=1.0, Q=0.5, nth=0.1)
    spec = FitSpec(data=_exact_points(truth), fixed=start, restarts=2, seed=3, max_iter=200)
    first = fit(spec)
    second = fit(spec)
    assert first.params == second.params
    assert first.objective == second.objective
    assert first.restart_objectives == second.restart_objectives
    assert first.objective >= 0.0


@pytest.mark.slow
def test_noiseless_round_trip():
    truth = ModelParams()
    start = truth.with_values(Vx=0.3, Vp=1.0, Q=0.5, nth=0.1)
    result = fit(FitSpec(data=_exact_points(truth), fixed=start, restarts=4, seed=1))
    for name in ("Vx", "Vp", "Q", "nth"):
        assert getattr(result.params, name) == pytest.approx(getattr(truth, name), abs=1e-4)
    assert result.params.nth >= 0.0
    assert result.params.T == truth.T and result.params.eta == truth.eta


@pytest.mark.slow
def test_noisy_recovery_within_replication_spread():
    truth = ModelParams()
    state = prepare_state(truth)
    s_grid = np.round(np.arange(0, 9) * 0.05, 12) + 0.0
    fits = []
    for seed in np.random.SeedSequence(5).spawn(50):
        data = generate_dataset(state, 40, 200, seed)
        points = [FitPoint.from_stats(estimate_photon_stats(data, float(s))) for s in s_grid]
        fits.append(fit(FitSpec(data=points, fixed=truth, restarts=1, seed=1, max_iter=1000)).params)
    assert all(p.nth >= 0.0 for p in fits)
    for name in ("Vx", "Vp", "Q", "nth"):
        values = np.array([getattr(p, name) for p in fits])
        spread = values.std(ddof=1)
        assert abs(values[0] - getattr(truth, name)) <= 3 * spread + 1e-9, name
