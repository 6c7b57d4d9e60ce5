"""Gaussian covariance engine for the feed-forward universal squeezer.

States are Gaussian over quadratures ordered (X1+, X1-, X2+, X2-, ...) with
vacuum covariance equal to the identity.  The beamsplitter convention is

    X_out_i = sqrt(T) X_i + sqrt(1-T) X_j
    X_out_j = -sqrt(1-T) X_i + sqrt(T) X_j

applied quadrature-wise.  With this convention, measuring a quadrature of
port j and feeding the photocurrent back onto the same quadrature of port i
with gain g = -sqrt((1-T)/T) cancels the ancilla's contribution to that
output quadrature exactly and leaves the input's contribution multiplied by
1/sqrt(T); that cancellation is the design point of the circuit.

The squeezer circuit measures the phase quadrature (X-) by default.  Because
the phase-squeezed ancilla then enters the output phase quadrature only
through the cancelled path, the output X- is entirely independent of the
ancilla state, while the ancilla's anti-squeezed amplitude quadrature still
feeds the output X+.  Measuring X+ instead (``measured_quadrature="+"``)
cancels the anti-squeezed path and yields an output that approaches a pure
squeezing transform of the input as the ancilla squeezing deepens; both
wirings are provided.

A note on the locking integration: when the co-propagating local oscillator
of the homodyne-locked source drives this circuit, the steady-state (DC)
photocurrent component is the cavity-locking error signal and the
fluctuating component is the feed-forward signal.  In this engine that split
is structural, not spectral: mean vectors carry the DC part and covariance
matrices the fluctuations, so no crossover frequency parameter exists or is
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HomolockError, ParameterError

CHECK_PHYSICALITY = False
PHYSICALITY_TOL = 1e-9


class SingularVariance(HomolockError):
    """Measured quadrature has non-positive variance."""


def default_gain(transmittivity: float) -> float:
    """Feed-forward gain -sqrt((1-T)/T) that cancels the ancilla path."""
    if not 0.0 < transmittivity < 1.0:
        raise ParameterError(f"transmittivity must lie in (0, 1), got {transmittivity!r}")
    return -math.sqrt((1.0 - transmittivity) / transmittivity)


@dataclass(frozen=True)
class FeedforwardConfig:
    """Transmittivity, gain and measured quadrature of the feed-forward arm."""

    transmittivity: float
    gain: float | None = None
    measured_quadrature: str = "-"

    def __post_init__(self):
        if not 0.0 < self.transmittivity < 1.0:
            raise ParameterError(
                f"transmittivity must lie in (0, 1), got {self.transmittivity!r}"
            )
        if self.measured_quadrature not in ("+", "-"):
            raise ParameterError("measured_quadrature must be '+' or '-'")
        if self.gain is None:
            object.__setattr__(self, "gain", default_gain(self.transmittivity))


def omega_matrix(n_modes: int) -> np.ndarray:
    """Symplectic form for n modes in (X+, X-) ordering."""
    block = np.array([[0.0, -1.0], [1.0, 0.0]])
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for i in range(n_modes):
        omega[2 * i:2 * i + 2, 2 * i:2 * i + 2] = block
    return omega


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix over (X+, X-) per mode; vacuum = identity."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).copy())
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float).copy())
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise ParameterError("mean must be length 2n and cov 2n x 2n")
        if self.mean.size % 2 != 0:
            raise ParameterError("state dimension must be even")
        if CHECK_PHYSICALITY:
            self.validate()

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def validate(self, tol: float = PHYSICALITY_TOL) -> "GaussianState":
        """Check symmetry and the uncertainty relation cov + i*Omega >= 0."""
        if not np.allclose(self.cov, self.cov.T, atol=tol):
            raise ParameterError("covariance matrix is not symmetric")
        herm = self.cov + 1j * omega_matrix(self.n_modes)
        min_eig = float(np.linalg.eigvalsh(herm).min())
        if min_eig < -tol:
            raise ParameterError(
                f"state violates the uncertainty relation (min eig {min_eig:.3e})"
            )
        return self

    def quad_index(self, mode: int, quadrature: str) -> int:
        if not 0 <= mode < self.n_modes:
            raise ParameterError(f"mode {mode} out of range for {self.n_modes} modes")
        if quadrature == "+":
            return 2 * mode
        if quadrature == "-":
            return 2 * mode + 1
        raise ParameterError("quadrature must be '+' or '-'")


def vacuum(n_modes: int) -> GaussianState:
    """n-mode vacuum: zero mean, identity covariance."""
    if n_modes < 1:
        raise ParameterError("need at least one mode")
    return GaussianState(mean=np.zeros(2 * n_modes), cov=np.eye(2 * n_modes))


def squeezed_vacuum(v_minus: float) -> GaussianState:
    """Pure phase-squeezed vacuum, covariance diag(1/v_minus, v_minus)."""
    if not 0.0 < v_minus <= 1.0:
        raise ParameterError(f"v_minus must lie in (0, 1], got {v_minus!r}")
    return GaussianState(mean=np.zeros(2), cov=np.diag([1.0 / v_minus, v_minus]))


def displaced(state: GaussianState, mode: int, dx_plus: float = 0.0,
              dx_minus: float = 0.0) -> GaussianState:
    """Shift the mean of one mode; covariance untouched."""
    mean = state.mean.copy()
    mean[state.quad_index(mode, "+")] += dx_plus
    mean[state.quad_index(mode, "-")] += dx_minus
    return GaussianState(mean=mean, cov=state.cov)


def tensor(*states: GaussianState) -> GaussianState:
    """Product state of independent Gaussian states."""
    mean = np.concatenate([s.mean for s in states])
    dim = mean.size
    cov = np.zeros((dim, dim))
    pos = 0
    for s in states:
        d = s.mean.size
        cov[pos:pos + d, pos:pos + d] = s.cov
        pos += d
    return GaussianState(mean=mean, cov=cov)


def beamsplitter_symplectic(n_modes: int, modes, transmittivity: float) -> np.ndarray:
    """Symplectic matrix of a beamsplitter between two modes."""
    i, j = modes
    if i == j:
        raise ParameterError("beamsplitter needs two distinct modes")
    t = math.sqrt(transmittivity)
    r = math.sqrt(1.0 - transmittivity)
    s = np.eye(2 * n_modes)
    for q in range(2):
        a = 2 * i + q
        b = 2 * j + q
        s[a, a] = t
        s[a, b] = r
        s[b, a] = -r
        s[b, b] = t
    return s


def beamsplitter(state: GaussianState, modes, transmittivity: float) -> GaussianState:
    """Apply a beamsplitter of power transmittivity T between two modes."""
    if not 0.0 <= transmittivity <= 1.0:
        raise ParameterError(f"transmittivity must lie in [0, 1], got {transmittivity!r}")
    s = beamsplitter_symplectic(state.n_modes, modes, transmittivity)
    out = GaussianState(mean=s @ state.mean, cov=s @ state.cov @ s.T)
    if CHECK_PHYSICALITY:
        out.validate()
    return out


@dataclass(frozen=True)
class HomodyneOutcome:
    """Gaussian outcome distribution of a homodyne measurement."""

    mean: float
    variance: float

    def sample(self, rng) -> float:
        return float(self.mean + math.sqrt(self.variance) * rng.standard_normal())


def homodyne_condition(state: GaussianState, mode: int, quadrature: str,
                       outcome: float | None = None):
    """Measure one quadrature of one mode; remove the mode.

    Returns (outcome distribution, conditioned state).  The covariance
    update is the Schur complement on the measured quadrature and does not
    depend on the outcome; the conditional mean is evaluated at ``outcome``
    (at the distribution mean when not given).
    """
    q = state.quad_index(mode, quadrature)
    var_m = float(state.cov[q, q])
    if var_m <= 0.0:
        raise SingularVariance(f"measured quadrature variance {var_m!r} is not positive")
    dist = HomodyneOutcome(mean=float(state.mean[q]), variance=var_m)

    keep = [k for k in range(state.mean.size) if k not in (2 * mode, 2 * mode + 1)]
    sigma_rm = state.cov[keep, q]
    cov_kept = state.cov[np.ix_(keep, keep)] - np.outer(sigma_rm, sigma_rm) / var_m
    m_value = dist.mean if outcome is None else float(outcome)
    mean_kept = state.mean[keep] + sigma_rm * (m_value - dist.mean) / var_m
    out = GaussianState(mean=mean_kept, cov=cov_kept)
    if CHECK_PHYSICALITY:
        out.validate()
    return dist, out


def feedforward_displace(state: GaussianState, mode: int, quadrature: str,
                         gain: float, outcome: float) -> GaussianState:
    """Trajectory-mode feed-forward: shift one quadrature mean by gain * outcome."""
    mean = state.mean.copy()
    mean[state.quad_index(mode, quadrature)] += gain * outcome
    return GaussianState(mean=mean, cov=state.cov)


def feedforward_ensemble(state: GaussianState, measured_mode: int,
                         measured_quadrature: str, target_mode: int,
                         target_quadrature: str, gain: float) -> GaussianState:
    """Ensemble-mode feed-forward: fold the outcome statistics into the state.

    Applies X_target <- X_target + gain * X_measured as a linear map on the
    joint Gaussian (which is exactly the trajectory map averaged over the
    outcome ensemble) and then discards the measured mode.
    """
    if measured_mode == target_mode:
        raise ParameterError("measured and target modes must differ")
    qm = state.quad_index(measured_mode, measured_quadrature)
    qt = state.quad_index(target_mode, target_quadrature)
    dim = state.mean.size
    lin = np.eye(dim)
    lin[qt, qm] += gain
    mean = lin @ state.mean
    cov = lin @ state.cov @ lin.T

    keep = [k for k in range(dim) if k not in (2 * measured_mode, 2 * measured_mode + 1)]
    out = GaussianState(mean=mean[keep], cov=cov[np.ix_(keep, keep)])
    if CHECK_PHYSICALITY:
        out.validate()
    return out


def output_coefficients(transmittivity: float, gain: float,
                        measured_quadrature: str = "-") -> dict:
    """Linear input-to-output coefficient rows of the feed-forward circuit.

    Treats the circuit (beamsplitter, measure mode 1, feed outcome onto mode
    0) as the exact linear map it is and returns, for each output quadrature
    of mode 0, its coefficients over the input vector
    (in+, in-, ancilla+, ancilla-).  Serves as the independent algebra oracle
    for the cancellation: with gain -sqrt((1-T)/T) the ancilla coefficient of
    the fed-forward quadrature is exactly zero and the input coefficient is
    1/sqrt(T).
    """
    s = beamsplitter_symplectic(2, (0, 1), transmittivity)
    qm = 2 + (0 if measured_quadrature == "+" else 1)
    qt = 0 if measured_quadrature == "+" else 1
    lin = np.eye(4)
    lin[qt, qm] += gain
    full = lin @ s
    return {"+": full[0].copy(), "-": full[1].copy()}


def universal_squeezer(input_state: GaussianState, ancilla_v_minus: float,
                       transmittivity: float, mode: str = "ensemble",
                       rng=None, measured_quadrature: str = "-") -> GaussianState:
    """Feed-forward squeezer: beamsplit with a squeezed ancilla, measure, displace.

    The single-mode ``input_state`` is combined with a phase-squeezed vacuum
    of phase variance ``ancilla_v_minus`` on a beamsplitter of transmittivity
    T; one output port is measured in ``measured_quadrature`` and the outcome,
    amplified by -sqrt((1-T)/T), displaces the same quadrature of the other
    port.  In "ensemble" mode the outcome statistics are folded in
    deterministically; in "trajectory" mode one outcome is drawn with ``rng``
    and the conditioned, displaced state is returned.
    """
    if input_state.n_modes != 1:
        raise ParameterError("input_state must be a single mode")
    if not 0.0 < transmittivity < 1.0:
        raise ParameterError(f"transmittivity must lie in (0, 1), got {transmittivity!r}")
    gain = default_gain(transmittivity)
    joint = tensor(input_state, squeezed_vacuum(ancilla_v_minus))
    mixed = beamsplitter(joint, (0, 1), transmittivity)
    if mode == "ensemble":
        return feedforward_ensemble(mixed, 1, measured_quadrature, 0,
                                    measured_quadrature, gain)
    if mode == "trajectory":
        if rng is None:
            raise ParameterError("trajectory mode needs a random generator")
        dist, _ = homodyne_condition(mixed, 1, measured_quadrature)
        outcome = dist.sample(rng)
        _, conditioned = homodyne_condition(mixed, 1, measured_quadrature, outcome=outcome)
        return feedforward_displace(conditioned, 0, measured_quadrature, gain, outcome)
    raise ParameterError(f"mode must be 'ensemble' or 'trajectory', got {mode!r}")
