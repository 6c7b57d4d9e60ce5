"""Time-domain integration of the linearized cavity equations.

This module is the brute-force cross-check for the closed-form steady state
and the analytic spectra: means are time-stepped to steady state, quadrature
fluctuations are integrated as a linear stochastic system driven by vacuum
noise on the seed and loss ports, and spectra are estimated from the output
samples with Welch averaging.

In the quadrature representation (see :mod:`homolock.core` for the sign
convention) the intracavity fluctuations obey

    d/dt [X+, X-] = A [X+, X-] + sqrt(2 kappa_s) xi_seed + sqrt(2 kappa_l) xi_loss
    A = [[-(kappa - chi), -detuning], [detuning, -(kappa + chi)]]

and the output samples are built from the input-output relation
X_out = sqrt(2 kappa_s) X_cavity - X_seed.  Output samples are binned over
one integrator step and normalized so the quantum noise limit has unit
variance per sample; Welch estimates of such series are directly comparable
to :func:`homolock.spectra.variance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.signal import lfilter, welch

from .core import HomolockError, OPOParams, ParameterError, QuadPair, validate
from .spectra import SpectrumTrace


class NotConverged(HomolockError):
    """Mean integration did not settle to steady state by t_end."""


class StepTooLarge(HomolockError, ValueError):
    """Integrator step violates dt * kappa <= 0.05."""


class TooFewSegments(HomolockError, ValueError):
    """Welch estimate would average fewer than 16 segments."""


MAX_DT_KAPPA = 0.05


def drift_matrix(params: OPOParams) -> np.ndarray:
    """Quadrature drift matrix of the intracavity fluctuations."""
    k = params.kappa
    chi = params.chi
    d = params.detuning
    return np.array([[-(k - chi), -d], [d, -(k + chi)]])


@dataclass(frozen=True)
class SimConfig:
    """Configuration of a stochastic fluctuation run.

    dt * kappa must not exceed 0.05; for spectral estimation plan for at
    least 2**14 kept samples.  ``record_decimation`` keeps every k-th output
    sample.
    """

    dt: float
    duration: float
    seed_value: int
    params: OPOParams
    record_decimation: int = 1

    def __post_init__(self):
        validate(self.params)
        if not self.dt > 0.0 or not self.duration > self.dt:
            raise ParameterError("need dt > 0 and duration > dt")
        if self.dt * self.params.kappa > MAX_DT_KAPPA:
            raise StepTooLarge(
                f"dt * kappa = {self.dt * self.params.kappa:.4g} exceeds {MAX_DT_KAPPA}"
            )
        if int(self.record_decimation) != self.record_decimation or self.record_decimation < 1:
            raise ParameterError("record_decimation must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class TimeSeries:
    """Sampled output quadrature fluctuations (QNL variance 1 per sample)."""

    t: np.ndarray
    x_plus_out: np.ndarray
    x_minus_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "x_plus_out", np.asarray(self.x_plus_out, dtype=float))
        object.__setattr__(self, "x_minus_out", np.asarray(self.x_minus_out, dtype=float))
        n = self.t.size
        if self.x_plus_out.size != n or self.x_minus_out.size != n:
            raise ParameterError("time series arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.t) > 0.0):
            raise ParameterError("sample times must be strictly increasing")

    @property
    def dt(self) -> float:
        if self.t.size < 2:
            raise ParameterError("need at least two samples to define a sample step")
        return float(self.t[1] - self.t[0])


def _rk4_one_step(a: np.ndarray, drive: np.ndarray, h: float):
    """Affine map of one classical RK4 step applied to x' = a x + drive."""
    ha = h * a
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    eye = np.eye(a.shape[0])
    r = eye + ha + ha2 / 2.0 + ha3 / 6.0 + (ha3 @ ha) / 24.0
    b = h * ((eye + ha / 2.0 + ha2 / 6.0 + ha3 / 24.0) @ drive)
    return r, b


def _compose_steps(r: np.ndarray, b: np.ndarray, n: int):
    """Affine map of n composed identical steps, by binary composition."""
    acc_r = np.eye(r.shape[0])
    acc_b = np.zeros_like(b)
    cur_r, cur_b = r, b
    while n:
        if n & 1:
            acc_b = cur_r @ acc_b + cur_b
            acc_r = cur_r @ acc_r
        n >>= 1
        if n:
            cur_b = cur_r @ cur_b + cur_b
            cur_r = cur_r @ cur_r
    return acc_r, acc_b


def integrate_mean(params: OPOParams, seed_in: QuadPair, t_end: float | None = None) -> QuadPair:
    """Time-step the mean quadratures to steady state; return the output pair.

    Fixed-step RK4 on the linear drift with the constant coherent drive
    sqrt(2 kappa_s) X_seed, starting from an empty cavity (the n composed
    steps are evaluated by binary composition of the one-step map, which is
    arithmetically the iterated integrator).  The default t_end is
    40 / (kappa - chi), comfortably past the slowest decay.

    Raises NotConverged when the state still moves by more than 1e-10
    (relative) over the final stretch of the integration, which happens for
    user-supplied t_end near the minimum useful value of ~10 / (kappa - chi).
    """
    validate(params)
    slow = params.kappa - params.chi
    if t_end is None:
        t_end = 40.0 / slow
    a = drift_matrix(params)
    drive = math.sqrt(2.0 * params.kappa_s) * np.array([seed_in.x_plus, seed_in.x_minus])

    # Explicit RK4 stability needs h * (fast rate) below ~2.8; 0.35 leaves a
    # wide margin including the detuning rotation.
    rho = params.kappa + params.chi + abs(params.detuning)
    h = 0.35 / rho
    n_steps = max(int(math.ceil(t_end / h)), 64)
    h = t_end / n_steps
    n_tail = max(int(math.ceil(0.05 * n_steps)), 1)

    r, b = _rk4_one_step(a, drive, h)
    _, x_tail = _compose_steps(r, b, n_steps - n_tail)
    tail_r, tail_b = _compose_steps(r, b, n_tail)
    x = tail_r @ x_tail + tail_b

    scale = max(float(np.max(np.abs(x))), float(np.max(np.abs(drive))) / params.kappa, 1e-300)
    change = float(np.max(np.abs(x - x_tail))) / scale
    if change > 1e-10:
        raise NotConverged(
            f"relative change {change:.3e} over the final stretch exceeds 1e-10; "
            f"increase t_end (currently {t_end:.3e} s)"
        )
    out = math.sqrt(2.0 * params.kappa_s) * x - np.array([seed_in.x_plus, seed_in.x_minus])
    return QuadPair(x_plus=float(out[0]), x_minus=float(out[1]))


def _exact_step_matrices(params: OPOParams, dt: float):
    """One-step transition and noise covariance of the augmented system.

    State z = (X+, X-, Y+, Y-) where Y integrates the output flux
    dY = sqrt(2 kappa_s) X dt - dW_seed.  Noise channels are the four
    independent unit white noises (seed +/-, loss +/-).  Returns
    (F, Q): z_{n+1} = F z_n + w, w ~ N(0, Q), computed exactly via the
    block matrix exponential.
    """
    ks = params.kappa_s
    kl = params.kappa_l
    a = drift_matrix(params)
    atil = np.zeros((4, 4))
    atil[:2, :2] = a
    atil[2:, :2] = math.sqrt(2.0 * ks) * np.eye(2)
    btil = np.zeros((4, 4))
    btil[:2, :2] = math.sqrt(2.0 * ks) * np.eye(2)
    btil[:2, 2:] = math.sqrt(2.0 * kl) * np.eye(2)
    btil[2:, :2] = -np.eye(2)
    qc = btil @ btil.T

    block = np.zeros((8, 8))
    block[:4, :4] = atil
    block[:4, 4:] = qc
    block[4:, 4:] = -atil.T
    phi = expm(block * dt)
    f = phi[:4, :4]
    q = phi[:4, 4:] @ f.T
    q = 0.5 * (q + q.T)
    return f, q


def _noise_decomposition(q: np.ndarray) -> np.ndarray:
    """Matrix L with L L^T = q, robust to the semidefinite directions."""
    vals, vecs = np.linalg.eigh(q)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


_NOISE_BLOCK = 1 << 22


def _step_model(params: OPOParams, dt: float, method: str):
    """Per-step state map F_xx, output map F_yx and noise mixing matrix."""
    if method == "exact":
        f, q = _exact_step_matrices(params, dt)
        return f[:2, :2], f[2:, :2], _noise_decomposition(q)
    if method == "euler":
        a = drift_matrix(params)
        f_xx = np.eye(2) + a * dt
        f_yx = math.sqrt(2.0 * params.kappa_s) * dt * np.eye(2)
        # Euler noise: state gets sqrt(2 ks) dW_s + sqrt(2 kl) dW_l, the
        # output bin keeps -dW_s; all increments have variance dt.
        sqdt = math.sqrt(dt)
        noise_map = np.zeros((4, 4))
        noise_map[0, 0] = noise_map[1, 1] = math.sqrt(2.0 * params.kappa_s) * sqdt
        noise_map[0, 2] = noise_map[1, 3] = math.sqrt(2.0 * params.kappa_l) * sqdt
        noise_map[2, 0] = noise_map[3, 1] = -sqdt
        return f_xx, f_yx, noise_map
    raise ParameterError(f"unknown integration method {method!r}")


def integrate_fluctuations(config: SimConfig, method: str = "exact") -> TimeSeries:
    """Integrate the driven quadrature fluctuations and emit output samples.

    method "exact" (the reference) uses the exact one-step discretization of
    the joint (cavity state, integrated output) linear system, so sampled
    statistics carry no step-size bias.  method "euler" is plain
    Euler-Maruyama for step-size studies.  Fixed ``seed_value`` gives
    bit-identical output.

    On resonance the two quadratures decouple and the recursion runs through
    vectorized IIR filters; off resonance a direct step loop is used.
    """
    params = config.params
    dt = config.dt
    n = config.n_steps
    rng = np.random.default_rng(config.seed_value)
    f_xx, f_yx, noise_map = _step_model(params, dt, method)
    sqdt = math.sqrt(dt)

    out = np.empty((n, 2))
    x = np.zeros(2)
    resonant = params.detuning == 0.0
    pos = 0
    while pos < n:
        nb = min(_NOISE_BLOCK, n - pos)
        w = rng.standard_normal((nb, 4)) @ noise_map.T
        if resonant:
            # Quadratures decouple: each is a scalar AR(1) recursion
            # x_{i+1} = f x_i + w_i, run as an IIR filter.
            for j in range(2):
                f = f_xx[j, j]
                shifted, _ = lfilter([1.0], [1.0, -f], w[:, j], zi=np.array([f * x[j]]))
                states = np.concatenate(([x[j]], shifted[:-1]))
                out[pos:pos + nb, j] = f_yx[j, j] * states + w[:, 2 + j]
                x[j] = shifted[-1]
        else:
            for i in range(nb):
                out[pos + i] = f_yx @ x + w[i, 2:]
                x = f_xx @ x + w[i, :2]
        pos += nb
    out /= sqdt

    keep = slice(None, None, config.record_decimation)
    t = (np.arange(n) * dt)[keep]
    return TimeSeries(t=t, x_plus_out=out[keep, 0], x_minus_out=out[keep, 1])


def estimate_psd(series: TimeSeries, segment_length: int, overlap: float = 0.5) -> SpectrumTrace:
    """Welch spectral estimate of both output quadratures, QNL-normalized.

    Hann-windowed averaged periodogram; the normalization is fixed so that a
    unit-variance white sample sequence gives a flat spectrum of 1.  Requires
    at least 16 averaged segments.
    """
    if not 0.0 <= overlap <= 0.9:
        raise ParameterError(f"overlap must lie in [0, 0.9], got {overlap!r}")
    n = series.t.size
    if segment_length > n:
        raise ParameterError("segment_length exceeds series length")
    noverlap = int(overlap * segment_length)
    n_segments = 1 + (n - segment_length) // (segment_length - noverlap)
    if n_segments < 16:
        raise TooFewSegments(
            f"only {n_segments} segments available; need at least 16"
        )
    dt = series.dt
    fs = 1.0 / dt
    spectra = []
    for samples in (series.x_plus_out, series.x_minus_out):
        freqs, psd = welch(
            samples,
            fs=fs,
            window="hann",
            nperseg=segment_length,
            noverlap=noverlap,
            detrend=False,
            return_onesided=False,
            scaling="density",
        )
        half = freqs >= 0.0
        spectra.append(psd[half] / dt)
    omega = 2.0 * math.pi * freqs[half]
    order = np.argsort(omega)
    return SpectrumTrace(
        frequencies=omega[order],
        variance_plus=spectra[0][order],
        variance_minus=spectra[1][order],
        efficiency=1.0,
    )
