import math

import numpy as np
import pytest
from scipy.integrate import quad

from common.estimation import EstimationError, antisqueeze_map, estimate_photon_stats
from common.gaussianmodel import ModelParams, prepare_state
from common.histogramml import (
    Binning,
    build_histogram,
    em_estimate,
    hermite_functions,
    ml_estimate,
    ml_scan,
    povm_elements,
    povm_from_edges,
    upper_tail_mass,
)
from common.homodynesim import QuadratureDataset, generate_dataset


@pytest.fixture(scope="module")
def povm():
    return povm_elements((0.1, -6.0, 6.0), 20)


def test_binning_layout():
    binning = Binning()
    assert binning.j_min == -60 and binning.j_max == 60
    assert binning.size == 123
    edges = binning.edges()
    assert edges[0] == -np.inf and edges[-1] == np.inf
    assert edges[1] == pytest.approx(-6.05)
    assert int(binning.index(0)) == 61
    assert int(binning.index(-1000)) == 0 and int(binning.index(1000)) == 122


def test_bad_binning():
    with pytest.raises(EstimationError):
        Binning(dx=0.0)
    with pytest.raises(EstimationError):
        Binning(x_min=1.0, x_max=-1.0)


def test_hermite_functions_are_orthonormal():
    x = np.linspace(-12, 12, 24001)
    psi = hermite_functions(x, 20)
    gram = psi @ psi.T * (x[1] - x[0])
    np.testing.assert_allclose(gram, np.eye(21), atol=1e-9)


def test_histogram_weights_sum_to_k(vacuum_state):
    data = generate_dataset(vacuum_state, 8, 300, rng_seed=1)
    hist = build_histogram(data, 0.0)
    assert hist.total == pytest.approx(8.0, abs=1e-12)


def test_single_sample_at_origin():
    data = QuadratureDataset(thetas=np.array([math.pi]), samples=[np.array([0.0])])
    hist = build_histogram(data, 0.0)
    assert hist.counters[hist.binning.index(0)] == 1.0
    assert hist.total == 1.0


def test_antisqueezed_histogram_weights(reference_state):
    data = generate_dataset(reference_state, 10, 100, rng_seed=2)
    s = 0.2
    hist = build_histogram(data, s)
    expected = sum(1.0 / antisqueeze_map(float(t), s)[1] ** 2 for t in data.thetas)
    assert hist.total == pytest.approx(expected, rel=1e-12)


def test_povm_completeness(povm):
    assert povm.shape == (123, 21)
    assert np.all(povm >= 0)
    np.testing.assert_allclose(povm.sum(axis=0), 1.0, atol=1e-8)


def test_povm_single_infinite_bin():
    np.testing.assert_allclose(povm_from_edges([-np.inf, np.inf], 6)[0], 1.0, atol=1e-8)


def test_povm_small_bin_suppresses_odd_states():
    wide = povm_from_edges([-5e-3, 5e-3], 1)[0]
    narrow = povm_from_edges([-5e-4, 5e-4], 1)[0]
    assert narrow[1] / narrow[0] < (wide[1] / wide[0]) / 50


def test_povm_needs_a_photon_column():
    with pytest.raises(EstimationError):
        povm_elements(n_max=0)


def test_em_recovers_vacuum(povm):
    counters = povm[:, 0] * 1000.0
    result = em_estimate(counters, povm, n_max=10, max_iter=50_000, tol=0.0)
    assert result.p0 > 1.0 - 1e-3
    assert result.pn.sum() == pytest.approx(1.0, abs=1e-10)
    assert result.monotone


def test_em_is_initialization_independent(povm):
    truth = np.array([0.5, 0.3, 0.2])
    counters = povm[:, :3] @ truth
    uniform = em_estimate(counters, povm, n_max=2, max_iter=20_000, tol=1e-15)
    vacuum = em_estimate(counters, povm, n_max=2, max_iter=20_000, tol=1e-15, init=[0.9, 0.05, 0.05])
    np.testing.assert_allclose(uniform.pn, truth, atol=1e-6)
    np.testing.assert_allclose(vacuum.pn, uniform.pn, atol=1e-6)


def test_em_floors_impossible_bins():
    povm = np.array([[1.0, 0.0], [0.0, 1.0]])
    result = em_estimate(np.array([1.0, 1.0]), povm, init=[1.0, 0.0], max_iter=5)
    assert result.floored


def test_em_rejects_bad_counters(povm):
    with pytest.raises(EstimationError):
        em_estimate(np.zeros(123), povm)
    with pytest.raises(EstimationError):
        em_estimate(-np.ones(123), povm)
    with pytest.raises(EstimationError):
        em_estimate(np.ones(10), povm)


def test_em_likelihood_never_decreases(reference_state, povm):
    data = generate_dataset(reference_state, 40, 200, rng_seed=7)
    result = ml_estimate(data, 0.0, povm=povm)
    history = np.array(result.history)
    assert result.monotone
    assert np.all(np.diff(history) >= -1e-12 * np.maximum(1.0, np.abs(history[:-1])))
    assert np.all(result.pn >= 0)
    assert result.pn.sum() == pytest.approx(1.0, abs=1e-10)


@pytest.mark.slow
def test_ml_agrees_with_pattern_functions():
    data = generate_dataset(prepare_state(ModelParams()), 40, 200, rng_seed=7)
    results = ml_scan(data, [0.0, 0.15])
    for result in results:
        stats = estimate_photon_stats(data, result.s)
        assert abs(result.p0 - stats.p0) < stats.std(0)
        assert abs(result.p1 - stats.p1) < stats.std(1)
        assert result.monotone


@pytest.mark.parametrize("c", [-1.0, 0.3, 2.5, 6.05])
def test_tail_mass_matches_quadrature(c):
    n_max = 12
    tails = upper_tail_mass(c, n_max)
    for n in range(n_max + 1):
        expected, _ = quad(lambda x: float(hermite_functions(x, n)[n] ** 2), c, np.inf, epsabs=1e-14, epsrel=1e-12)
        assert tails[n] == pytest.approx(expected, abs=1e-11)


def test_half_line_holds_half_of_every_state():
    np.testing.assert_allclose(upper_tail_mass(0.0, 20), 0.5, atol=1e-14)


def test_overflow_rows_are_mirror_images():
    povm = povm_from_edges([-np.inf, -2.0, 2.0, np.inf], 8)
    np.testing.assert_allclose(povm[0], povm[2], atol=1e-14)
    np.testing.assert_allclose(povm.sum(axis=0), 1.0, atol=1e-10)
