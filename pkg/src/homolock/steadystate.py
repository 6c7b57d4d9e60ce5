"""Closed-form steady-state response of the sub-threshold OPO.

Implements the reflected quadrature map

    X_out(+/-) = 2*kappa_s / (kappa^2 - chi^2 + detuning^2)
                 * [ (kappa +/- chi) X_in(+/-) -/+ detuning X_in(-/+) ]
                 - X_in(+/-)

together with the homodyne-locking error signal (the phase quadrature of the
output, linear in the detuning near resonance), classical parametric gains,
numerical inversion of a measured gain pair, and the two-mode sweep model
that reproduces the dispersion-shaped error features of a scanned cavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HomolockError, OPOParams, ParameterError, QuadPair, TwoModeField, validate

GAIN_MODELS = ("input-referenced", "unpumped-referenced")


class NoFeasibleSolution(HomolockError):
    """No sub-threshold parameter pair reproduces the requested gains."""


def output_quadratures(params: OPOParams, seed_in: QuadPair) -> QuadPair:
    """Steady-state output quadratures for a coherent seed.

    Valid sub-threshold (chi < kappa); the determinant
    kappa^2 - chi^2 + detuning^2 is then automatically positive.
    """
    validate(params)
    k = params.kappa
    ks = params.kappa_s
    chi = params.chi
    d = params.detuning
    det = k * k - chi * chi + d * d
    pref = 2.0 * ks / det
    x_plus = pref * ((k + chi) * seed_in.x_plus - d * seed_in.x_minus) - seed_in.x_plus
    x_minus = pref * ((k - chi) * seed_in.x_minus + d * seed_in.x_plus) - seed_in.x_minus
    return QuadPair(x_plus=x_plus, x_minus=x_minus)


def intracavity_quadratures(params: OPOParams, seed_in: QuadPair) -> QuadPair:
    """Steady-state intracavity quadratures for a coherent seed."""
    validate(params)
    k = params.kappa
    ks = params.kappa_s
    chi = params.chi
    d = params.detuning
    det = k * k - chi * chi + d * d
    pref = math.sqrt(2.0 * ks) / det
    u_plus = pref * ((k + chi) * seed_in.x_plus - d * seed_in.x_minus)
    u_minus = pref * ((k - chi) * seed_in.x_minus + d * seed_in.x_plus)
    return QuadPair(x_plus=u_plus, x_minus=u_minus)


def output_amplitude(params: OPOParams, seed_amplitude) -> complex:
    """Complex steady-state output amplitude for a complex input amplitude."""
    out = output_quadratures(params, QuadPair.from_complex(seed_amplitude))
    return out.to_complex()


def error_signal(params: OPOParams, seed_amplitude: float) -> float:
    """Homodyne-locking error signal: phase quadrature of the output.

    Assumes a real input field (X_in- = 0, X_in+ = 2*seed_amplitude), for
    which the signal reduces to

        2 kappa_s * detuning * X_in+ / (kappa^2 - chi^2 + detuning^2),

    odd in the detuning and linear in it near resonance.
    """
    seed = QuadPair(x_plus=2.0 * seed_amplitude, x_minus=0.0)
    return output_quadratures(params, seed).x_minus


def error_slope(params: OPOParams, seed_amplitude: float) -> float:
    """Slope of the error signal at zero detuning, 2 kappa_s X_in+ / (kappa^2 - chi^2)."""
    validate(params)
    x_plus = 2.0 * seed_amplitude
    return 2.0 * params.kappa_s * x_plus / (params.kappa ** 2 - params.chi ** 2)


def _reflection_factor(params: OPOParams, quadrature: str) -> float:
    if quadrature == "+":
        return 2.0 * params.kappa_s / (params.kappa - params.chi) - 1.0
    if quadrature == "-":
        return 2.0 * params.kappa_s / (params.kappa + params.chi) - 1.0
    raise ParameterError(f"quadrature must be '+' or '-', got {quadrature!r}")


def classical_gain_db(params: OPOParams, quadrature: str,
                      gain_model: str = "unpumped-referenced") -> float:
    """Classical parametric power gain of a resonant seed, in dB.

    The amplitude reflection factor is g(+/-) = 2 kappa_s / (kappa -/+ chi) - 1;
    the '+' quadrature is amplified, the '-' quadrature de-amplified.

    gain_model selects the reference:
      * "input-referenced": 10 log10(g^2), gain relative to the input power.
      * "unpumped-referenced": 10 log10((g/g0)^2) with g0 = 2 kappa_s/kappa - 1,
        the pump-off reflection factor (pump-on versus pump-off measurement).
    """
    validate(params)
    if params.detuning != 0.0:
        raise ParameterError("classical gains are defined on resonance (detuning = 0)")
    g = _reflection_factor(params, quadrature)
    if gain_model == "input-referenced":
        ref = 1.0
    elif gain_model == "unpumped-referenced":
        ref = 2.0 * params.kappa_s / params.kappa - 1.0
        if ref == 0.0:
            raise ParameterError(
                "unpumped reference reflection vanishes at kappa_s = kappa/2; "
                "use the input-referenced model"
            )
    else:
        raise ParameterError(f"unknown gain_model {gain_model!r}")
    if g == 0.0:
        return -math.inf
    return 10.0 * math.log10((g / ref) ** 2)


@dataclass(frozen=True)
class GainFit:
    """Result of inverting a measured (amplification, de-amplification) pair."""

    chi_over_kappa: float
    kappa_s_over_kappa: float
    gain_model: str
    residual_db: float

    def params(self, kappa=1.0, tau=1e-9, detuning=0.0) -> OPOParams:
        """Materialize the fitted ratios at a given total decay rate."""
        return OPOParams(
            kappa_s=self.kappa_s_over_kappa * kappa,
            kappa_l=(1.0 - self.kappa_s_over_kappa) * kappa,
            chi=self.chi_over_kappa * kappa,
            tau=tau,
            detuning=detuning,
        )


def _gain_pair_db(c, r, gain_model):
    """Both model gains (amp_db, deamp_db as signed dB) for ratios c, r."""
    g_plus = 2.0 * r / (1.0 - c) - 1.0
    g_minus = 2.0 * r / (1.0 + c) - 1.0
    if gain_model == "unpumped-referenced":
        ref = 2.0 * r - 1.0
        if ref == 0.0:
            return (math.nan, math.nan)
        g_plus /= ref
        g_minus /= ref
    if g_plus == 0.0 or g_minus == 0.0:
        return (-math.inf, -math.inf)
    return (10.0 * math.log10(g_plus ** 2), 10.0 * math.log10(g_minus ** 2))


def _candidate_residual(c, r, amp_db, deamp_db, gain_model):
    got_amp, got_deamp = _gain_pair_db(c, r, gain_model)
    return max(abs(got_amp - amp_db), abs(got_deamp - (-deamp_db)))


def fit_gains(amp_db: float, deamp_db: float,
              gain_model: str = "unpumped-referenced") -> GainFit:
    """Invert a measured (amplification, de-amplification) pair in dB.

    Both inputs are positive magnitudes: the amplified quadrature sits
    ``amp_db`` above the model reference and the de-amplified quadrature
    ``deamp_db`` below it.  Returns ratios (chi/kappa, kappa_s/kappa) whose
    classical gains reproduce both inputs, searching every sign branch of
    the amplitude reflection factors.

    Raises NoFeasibleSolution when no sub-threshold pair with
    0 < kappa_s <= kappa reproduces the inputs under the chosen model.
    Note: the unpumped-referenced model admits no solution whenever the two
    magnitudes differ (pump-off reflection forces them symmetric), so an
    asymmetric measured pair is only representable input-referenced.
    """
    if gain_model not in GAIN_MODELS:
        raise ParameterError(f"unknown gain_model {gain_model!r}")
    if not (amp_db > 0.0 and deamp_db > 0.0):
        raise ParameterError("amp_db and deamp_db must both be positive")

    a = 10.0 ** (amp_db / 20.0)   # |g+| or |g+/g0|
    d = 10.0 ** (-deamp_db / 20.0)  # |g-| or |g-/g0|
    candidates = []

    if gain_model == "input-referenced":
        # g+ = sp*a, g- = sm*d; then 2r/(1-c) = 1+g+, 2r/(1+c) = 1+g-.
        for sp in (+1.0, -1.0):
            for sm in (+1.0, -1.0):
                p = 1.0 + sp * a
                m = 1.0 + sm * d
                if p <= 0.0 or m <= 0.0 or p < m:
                    continue
                c = (p - m) / (p + m)
                r = 0.5 * p * (1.0 - c)
                if 0.0 <= c < 1.0 and 0.0 < r <= 1.0:
                    candidates.append((c, r))
    else:
        # g+ = sp*a*g0, g- = sm*d*g0 with g0 = 2r - 1.  For each sign branch,
        # scan r for a root of the difference of the two implied chi values.
        from scipy.optimize import brentq

        def implied_c_amp(r, sp):
            denom = 1.0 + sp * a * (2.0 * r - 1.0)
            if denom <= 0.0:
                return math.nan
            return 1.0 - 2.0 * r / denom

        def implied_c_deamp(r, sm):
            denom = 1.0 + sm * d * (2.0 * r - 1.0)
            if denom <= 0.0:
                return math.nan
            return 2.0 * r / denom - 1.0

        for sp in (+1.0, -1.0):
            for sm in (+1.0, -1.0):
                def gap(r, sp=sp, sm=sm):
                    c1 = implied_c_amp(r, sp)
                    c2 = implied_c_deamp(r, sm)
                    if math.isnan(c1) or math.isnan(c2):
                        return math.nan
                    return c1 - c2

                grid = np.linspace(1e-6, 1.0, 4001)
                vals = np.array([gap(r) for r in grid])
                ok = np.isfinite(vals)
                for i in range(len(grid) - 1):
                    if not (ok[i] and ok[i + 1]):
                        continue
                    if vals[i] == 0.0:
                        root = grid[i]
                    elif vals[i] * vals[i + 1] < 0.0:
                        root = brentq(gap, grid[i], grid[i + 1], xtol=1e-15)
                    else:
                        continue
                    c = implied_c_amp(root, sp)
                    if 0.0 <= c < 1.0 and 0.0 < root <= 1.0:
                        candidates.append((c, root))

    # Among exact candidates prefer the most overcoupled cavity (largest
    # kappa_s/kappa): a symmetric measured pair then resolves to the lossless
    # branch rather than an equally exact lossy sign branch.
    best = None
    for c, r in candidates:
        res = _candidate_residual(c, r, amp_db, deamp_db, gain_model)
        if not math.isfinite(res):
            continue
        key = (res > 1e-9, res if res > 1e-9 else -r)
        if best is None or key < best[3]:
            best = (c, r, res, key)
    if best is None or best[2] > 1e-9:
        raise NoFeasibleSolution(
            f"no sub-threshold (chi/kappa, kappa_s/kappa) reproduces "
            f"amplification {amp_db} dB / de-amplification {deamp_db} dB "
            f"under the {gain_model} model"
        )
    return GainFit(chi_over_kappa=best[0], kappa_s_over_kappa=best[1],
                   gain_model=gain_model, residual_db=best[2])


@dataclass(frozen=True)
class SweepTrace:
    """Sampled detuning sweep: error signal and seed transmission."""

    detunings: np.ndarray
    error_signal: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "detunings", np.asarray(self.detunings, dtype=float))
        object.__setattr__(self, "error_signal", np.asarray(self.error_signal, dtype=float))
        object.__setattr__(self, "transmission", np.asarray(self.transmission, dtype=float))
        n = self.detunings.size
        if self.error_signal.size != n or self.transmission.size != n:
            raise ParameterError("sweep arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.detunings) > 0.0):
            raise ParameterError("detuning grid must be strictly increasing")


def sweep(params_seed: OPOParams, field: TwoModeField, detunings,
          lo_offset: float | None = None) -> SweepTrace:
    """Two-mode cavity sweep: homodyne DC error signal and seed transmission.

    For each detuning of the seed resonance, the seed mode responds with the
    full parametric cavity (chi of ``params_seed``) and the LO mode with the
    same cavity at chi = 0, its resonance shifted by ``lo_offset`` (defaults
    to ``field.lo_resonance_offset``) so the LO feature appears at
    detuning = +lo_offset.  The homodyne DC signal is Im(A_out_seed *
    conj(A_out_lo)); the transmission is the intracavity seed power,
    normalized to unit peak.  With ``power_split = 1`` there is no LO mode
    and the error signal is the bare phase-quadrature output.

    A single-point grid returns a one-sample trace.
    """
    validate(params_seed)
    if lo_offset is None:
        lo_offset = field.lo_resonance_offset
    detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
    seed_only = field.power_split == 1.0

    errors = np.empty_like(detunings)
    trans = np.empty_like(detunings)
    for i, delta in enumerate(detunings):
        px = params_seed.with_detuning(delta)
        a_intra = intracavity_quadratures(px, field.seed).to_complex()
        trans[i] = abs(a_intra) ** 2
        if seed_only:
            errors[i] = output_quadratures(px, field.seed).x_minus
        else:
            a_out_x = output_quadratures(px, field.seed).to_complex()
            py = OPOParams(kappa_s=params_seed.kappa_s, kappa_l=params_seed.kappa_l,
                           chi=0.0, tau=params_seed.tau, detuning=delta - lo_offset)
            a_out_y = output_quadratures(py, field.lo).to_complex()
            errors[i] = (a_out_x * np.conj(a_out_y)).imag
    peak = trans.max()
    if peak > 0.0:
        trans = trans / peak
    return SweepTrace(detunings=detunings, error_signal=errors, transmission=trans)


def dispersion_crossings(trace: SweepTrace):
    """Sign-changing zero crossings of the sweep error signal.

    Returns a list of (detuning_at_zero, slope_sign) with the zero located by
    linear interpolation and the slope sign taken across the crossing.
    """
    x = trace.detunings
    y = trace.error_signal
    out = []
    i = 0
    while i < len(y) - 1:
        if y[i] == 0.0:
            lo = i - 1
            hi = i + 1
            if lo >= 0 and hi < len(y) and y[lo] * y[hi] < 0.0:
                out.append((float(x[i]), 1.0 if y[hi] > y[lo] else -1.0))
            i += 1
        elif y[i] * y[i + 1] < 0.0:
            frac = y[i] / (y[i] - y[i + 1])
            out.append((float(x[i] + frac * (x[i + 1] - x[i])),
                        1.0 if y[i + 1] > y[i] else -1.0))
            i += 1
        else:
            i += 1
    return out


def transmission_peaks(trace: SweepTrace, min_height=0.5):
    """Detunings of local transmission maxima above ``min_height``."""
    y = trace.transmission
    x = trace.detunings
    peaks = []
    for i in range(1, len(y) - 1):
        if y[i] >= y[i - 1] and y[i] > y[i + 1] and y[i] >= min_height:
            peaks.append(float(x[i]))
    return peaks
