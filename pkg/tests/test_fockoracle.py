import math

import numpy as np
import pytest

from common.fockoracle import (
    FockState,
    HeraldingError,
    antisqueezed_probs,
    apply_loss,
    apply_loss_density,
    best_antisqueezing,
    detected,
    loss_trajectory,
    lossy_photon_density,
    squeeze_matrix,
    squeezed_fock,
    subtract_photon,
    threshold_transmittance,
)
from common.gaussianmodel import ModelParams, antisqueeze_state, heralding_probability, photon_probs, prepare_state


def test_unsqueezed_photon():
    state = squeezed_fock(0.0, 1)
    assert state.p1 == pytest.approx(1.0)
    assert state.p0 == 0.0


def test_squeezed_vacuum():
    state = squeezed_fock(0.5, 0)
    assert state.p0 == pytest.approx(1.0 / math.cosh(0.5), rel=1e-12)
    assert state.p0 == pytest.approx(0.8868, abs=1e-4)
    assert np.all(state.amplitudes[1::2] == 0.0)
    assert state.tail < 1e-10


def test_squeezed_photon_has_odd_support():
    state = squeezed_fock(1.0, 1)
    assert state.p0 == 0.0
    assert np.all(state.amplitudes[0::2] == 0.0)
    assert state.p1 == pytest.approx(1.0 / math.cosh(1.0) ** 3, rel=1e-12)


def test_squeeze_matrix_is_orthogonal_on_low_block():
    S = squeeze_matrix(0.3, 80)
    block = S[:, :20]
    np.testing.assert_allclose(block.T @ block, np.eye(20), atol=1e-10)


def test_cutoff_grows_for_strong_squeezing():
    state = squeezed_fock(1.5, 1, n_max=20)
    assert state.n_max > 20
    assert state.tail < 1e-10


def test_apply_loss():
    photon = FockState(probs=np.array([0.0, 1.0, 0.0]))
    out = apply_loss(photon, 0.6)
    assert out.p0 == pytest.approx(0.4)
    assert out.p1 == pytest.approx(0.6)
    np.testing.assert_allclose(apply_loss(photon, 1.0).probs, photon.probs)
    assert apply_loss(squeezed_fock(0.7, 1), 0.0).p0 == pytest.approx(1.0)


def test_loss_density_agrees_with_diagonal_loss():
    photon = squeezed_fock(0.5, 1)
    rho = apply_loss_density(photon.density(), 0.4)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(np.diag(rho), apply_loss(photon, 0.4).probs, atol=1e-12)
    np.testing.assert_allclose(rho, rho.T, atol=1e-14)


def test_loss_trajectory_endpoints():
    rows = loss_trajectory(1.0, [1.0, 0.0])
    assert rows[0][1] == pytest.approx(0.0, abs=1e-15)
    assert rows[1][1] == pytest.approx(1.0) and rows[1][2] == pytest.approx(0.0, abs=1e-15)


def test_loss_trajectory_is_stable_under_cutoff():
    coarse = loss_trajectory(1.0, [0.5], n_max=60)[0]
    fine = loss_trajectory(1.0, [0.5], n_max=80)[0]
    assert coarse[1] == pytest.approx(fine[1], abs=1e-9)
    assert coarse[2] == pytest.approx(fine[2], abs=1e-9)


def test_antisqueezing_undoes_squeezing():
    rho = squeezed_fock(0.5, 1).density()
    p = antisqueezed_probs(rho, 0.5)
    assert p[1] == pytest.approx(1.0, abs=1e-8)
    assert p[0] == pytest.approx(0.0, abs=1e-8)


def test_antisqueezing_at_zero_is_the_diagonal():
    rho = lossy_photon_density(0.5, 0.6)
    np.testing.assert_allclose(antisqueezed_probs(rho, 0.0), np.diag(rho)[:2], atol=1e-14)


def test_subtraction_needs_a_click():
    with pytest.raises(HeraldingError):
        subtract_photon(1e-8, 0.9)


@pytest.mark.parametrize("T, tol", [(0.99, 5e-3), (0.9999, 2e-4)])
def test_weak_tap_gives_squeezed_photon(T, tol):
    r = 0.5
    # the no-click branch also attenuates the squeezing: tanh r' = T tanh r
    r_eff = math.atanh(T * math.tanh(r))
    out = subtract_photon(r, T)
    target = squeezed_fock(r_eff, 1, n_max=out.n_max)
    size = min(len(out.probs), len(target.probs))
    np.testing.assert_allclose(out.probs[:size], target.probs[:size], atol=tol)


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("T", [0.5, 0.8, 0.923, 0.99])
def test_covariance_model_matches_fock_oracle(r, T):
    params = ModelParams(Vx=0.5 * math.exp(-2 * r), Vp=0.5 * math.exp(2 * r), T=T,
                         eta=1.0, etaH=1.0, nth=0.0, Q=1.0)
    p0, p1 = photon_probs(prepare_state(params))
    out = subtract_photon(r, T)
    assert p0 == pytest.approx(out.p0, abs=1e-6)
    assert p1 == pytest.approx(out.p1, abs=1e-6)
    assert heralding_probability(params) == pytest.approx(out.click_probability, abs=1e-6)


def test_lossy_photon_example():
    # r = 0.5 at eta = 0.4 is Gaussian-looking until it is anti-squeezed
    assert not detected(0.5, 0.4, with_antisqueezing=False)
    assert detected(0.5, 0.4, with_antisqueezing=True)
    s_best, margin = best_antisqueezing(lossy_photon_density(0.5, 0.4))
    assert s_best > 0 and margin > 0


def test_boundary_test_is_monotone_in_eta():
    flags = [detected(0.3, eta, with_antisqueezing=False) for eta in np.linspace(0.05, 1.0, 20)]
    first = flags.index(True)
    assert all(flags[first:])


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 1.5])
def test_antisqueezing_lowers_threshold(r):
    plain = threshold_transmittance(r)
    squeezed = threshold_transmittance(r, with_antisqueezing=True)
    assert 0.0 < squeezed <= plain + 1e-4
    if r == 0.5:
        assert squeezed < 0.4 < plain


@pytest.mark.parametrize("s", [-0.2, 0.0, 0.15, 0.2, 0.4])
def test_antisqueezing_agrees_with_covariance_model(s):
    r, T = 0.5, 0.923
    params = ModelParams(Vx=0.5 * math.exp(-2 * r), Vp=0.5 * math.exp(2 * r), T=T,
                         eta=1.0, etaH=1.0, nth=0.0, Q=1.0)
    expected = photon_probs(antisqueeze_state(prepare_state(params), s))
    out = subtract_photon(r, T)
    np.testing.assert_allclose(antisqueezed_probs(out.rho, s), expected, atol=1e-6)


def test_positive_antisqueezing_restores_the_photon():
    out = subtract_photon(0.5, 0.923)
    p0, p1 = antisqueezed_probs(out.rho, 0.2)
    assert p0 == pytest.approx(0.03676, abs=1e-4)
    assert p1 == pytest.approx(0.84781, abs=1e-4)
    assert p1 > antisqueezed_probs(out.rho, 0.0)[1]
