"""
Covariance-matrix model of heralded photon subtraction from squeezed vacuum.

Convention: hbar = 1, [x, p] = i, vacuum quadrature variance 1/2, so a
covariance matrix (CM) gamma is twice the quadrature covariance and the
vacuum is the identity. The heralded output is a weighted difference of two
zero-mean Gaussians (gammaI, gamma0) with effective no-click weight P0'.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

logger = logging.getLogger(__name__)

PHYSICALITY_TOL = 1e-10
HERALD_TOL = 1e-12


class ModelError(ValueError):
    pass


class UncertaintyError(ModelError):
    pass


class HeraldingError(ModelError):
    pass


@dataclass(frozen=True)
class ModelParams:
    Vx: float = 0.364
    Vp: float = 0.705
    T: float = 0.923
    eta: float = 0.08
    etaH: float = 0.80
    nth: float = 0.0
    Q: float = 0.625

    @property
    def R(self):
        return 1.0 - self.T

    @classmethod
    def from_reflectance(cls, R, **kwargs):
        return cls(T=1.0 - R, **kwargs)

    def with_values(self, **changes):
        return replace(self, **changes)

    def validate(self):
        for name in ("Vx", "Vp", "T", "eta", "etaH", "nth", "Q"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ModelError(f"Model parameter {name} is not finite: {value}")
        if self.Vx <= 0 or self.Vp <= 0:
            raise ModelError(f"Quadrature variances must be positive (Vx={self.Vx}, Vp={self.Vp})")
        if self.Vx * self.Vp < 0.25 - 1e-15:
            raise UncertaintyError(f"Vx*Vp = {self.Vx * self.Vp:.6g} violates the uncertainty relation Vx*Vp >= 1/4")
        if not 0.0 < self.T <= 1.0:
            raise ModelError(f"Tap-off transmittance T must lie in (0, 1], got {self.T}")
        for name in ("eta", "etaH", "Q"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {value}")
        if self.nth < 0:
            raise ModelError(f"Thermal photon number must be >= 0, got {self.nth}")
        return self

    def as_dict(self):
        return {
            "Vx": self.Vx, "Vp": self.Vp, "T": self.T, "R": self.R,
            "eta": self.eta, "etaH": self.etaH, "nth": self.nth, "Q": self.Q,
        }


@dataclass(frozen=True)
class ConditionalState:
    gammaI: np.ndarray
    gamma0: np.ndarray
    P0prime: float

    def check(self, tol=PHYSICALITY_TOL):
        """Raise if the conditioned constituent is noisier than the unconditioned one."""
        if np.min(np.linalg.eigvalsh(self.gammaI - self.gamma0)) < -tol:
            raise ModelError("gammaI - gamma0 is not positive semidefinite")
        if not 0.0 <= self.P0prime <= 1.0:
            raise ModelError(f"P0' must lie in [0, 1], got {self.P0prime}")
        return self

    def as_dict(self):
        return {
            "gammaI": np.asarray(self.gammaI).tolist(),
            "gamma0": np.asarray(self.gamma0).tolist(),
            "P0prime": float(self.P0prime),
        }


def symplectic_form(modes):
    omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(modes), omega)


def is_physical(gamma, tol=PHYSICALITY_TOL):
    """gamma + i*Omega >= 0 checked through the smallest eigenvalue."""
    gamma = np.asarray(gamma, dtype=float)
    if not np.allclose(gamma, gamma.T, atol=1e-12):
        return False
    modes = gamma.shape[0] // 2
    return bool(np.min(np.linalg.eigvalsh(gamma + 1j * symplectic_form(modes))) >= -tol)


def _inverse2(m):
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if not math.isfinite(det) or abs(det) < 1e-300:
        raise ModelError("Singular 2x2 block cannot be inverted")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det, det


def _det2(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------

def input_cm(params):
    params.validate()
    return np.diag([2.0 * params.Vx, 2.0 * params.Vp])


def beamsplitter_cm(gammaA, T):
    """Two-mode CM after the tap-off beam splitter with vacuum in the auxiliary port."""
    if not (math.isfinite(T) and 0.0 < T <= 1.0):
        raise ModelError(f"Tap-off transmittance T must lie in (0, 1], got {T}")
    gammaA = np.asarray(gammaA, dtype=float)
    R = 1.0 - T
    eye = np.eye(2)
    off = math.sqrt(R * T) * (gammaA - eye)
    return np.block([
        [T * gammaA + R * eye, off],
        [off, R * gammaA + T * eye],
    ])


def detection_noise_cm(gammaAB, etaH, nth, eta):
    """Loss and thermal noise on the homodyne arm A, loss on the herald arm B."""
    for name, value in (("etaH", etaH), ("eta", eta)):
        if not 0.0 <= value <= 1.0:
            raise ModelError(f"{name} must lie in [0, 1], got {value}")
    if nth < 0:
        raise ModelError(f"Thermal photon number must be >= 0, got {nth}")
    M = np.diag(np.sqrt([etaH, etaH, eta, eta]))
    G = np.diag([1.0 - etaH + 2.0 * nth] * 2 + [1.0 - eta] * 2)
    return M @ np.asarray(gammaAB, dtype=float) @ M.T + G


def condition_on_click(gammaAB_prime):
    """Split the CM into blocks and form the click-conditioned state (P0prime holds P0)."""
    g = np.asarray(gammaAB_prime, dtype=float)
    GA, GC, GB = g[:2, :2], g[:2, 2:], g[2:, 2:]
    inv, det = _inverse2(GB + np.eye(2))
    if det <= 0:
        raise ModelError("Gamma_B + I has non-positive determinant")
    gamma0 = GA - GC @ inv @ GC.T
    P0 = 2.0 / math.sqrt(det)
    # a click rarer than HERALD_TOL counts as no click at all
    if P0 >= 1.0 - HERALD_TOL:
        P0 = 1.0
    return ConditionalState(gammaI=GA.copy(), gamma0=0.5 * (gamma0 + gamma0.T), P0prime=P0)


def mode_overlap(P0, Q):
    """Dilute the no-click weight by false triggers: P0' = Q*P0 / (1 - P0*(1-Q))."""
    for name, value in (("P0", P0), ("Q", Q)):
        if not 0.0 <= value <= 1.0:
            raise ModelError(f"{name} must lie in [0, 1], got {value}")
    denom = 1.0 - P0 * (1.0 - Q)
    if denom <= 0.0:
        return 0.0
    return Q * P0 / denom


def antisqueeze_state(state, s):
    """s > 0 stretches the squeezed x quadrature by e^s and shrinks p by e^-s."""
    S = np.diag([math.exp(s), math.exp(-s)])
    return ConditionalState(
        gammaI=S @ state.gammaI @ S.T,
        gamma0=S @ state.gamma0 @ S.T,
        P0prime=state.P0prime,
    )


def gaussian_probs(gamma):
    """Fock p0, p1 of a zero-mean Gaussian state with CM gamma."""
    gamma = np.asarray(gamma, dtype=float)
    d = _det2(gamma + np.eye(2))
    p0 = 2.0 / math.sqrt(d)
    p1 = 2.0 * (_det2(gamma) - 1.0) / d ** 1.5
    return p0, p1


def photon_probs(state):
    P = state.P0prime
    if P >= 1.0:
        raise HeraldingError("P0' = 1: the herald never clicks, the conditional state is undefined")
    pI0, pI1 = gaussian_probs(state.gammaI)
    q0, q1 = gaussian_probs(state.gamma0)
    p0 = (pI0 - P * q0) / (1.0 - P)
    p1 = (pI1 - P * q1) / (1.0 - P)
    return p0, p1


def marginal_variance(gamma, theta):
    v = np.array([math.cos(theta), math.sin(theta)])
    return 0.5 * float(v @ np.asarray(gamma, dtype=float) @ v)


def wigner_origin(state):
    P = state.P0prime
    if P >= 1.0:
        raise HeraldingError("P0' = 1: the herald never clicks, the conditional state is undefined")
    return (1.0 / math.sqrt(_det2(state.gammaI)) - P / math.sqrt(_det2(state.gamma0))) / (math.pi * (1.0 - P))


def squeezing_db(V):
    """Quadrature noise relative to vacuum in dB (negative means squeezed)."""
    return 10.0 * math.log10(V / 0.5)


# ---------------------------------------------------------------------------
# Whole pipeline
# ---------------------------------------------------------------------------

def no_click_probability(params):
    g = input_cm(params)
    g = beamsplitter_cm(g, params.T)
    g = detection_noise_cm(g, params.etaH, params.nth, params.eta)
    return condition_on_click(g).P0prime


def heralding_probability(params):
    return 1.0 - no_click_probability(params)


def prepare_state(params):
    """Heralded state at s = 0 with the mode-overlap dilution applied."""
    g = input_cm(params)
    g = beamsplitter_cm(g, params.T)
    g = detection_noise_cm(g, params.etaH, params.nth, params.eta)
    state = condition_on_click(g)
    return replace(state, P0prime=mode_overlap(state.P0prime, params.Q))


def model_trajectory(params, s_grid):
    state = prepare_state(params)
    if state.P0prime >= 1.0:
        raise HeraldingError(f"Heralding probability is zero for {params}")
    rows = []
    for s in s_grid:
        p0, p1 = photon_probs(antisqueeze_state(state, float(s)))
        rows.append((float(s), p0, p1))
    return rows
