"""Shared domain types and unit conventions for the OPO squeezer toolkit.

Conventions used throughout the package
---------------------------------------

* All rates (kappa_s, kappa_l, chi, detuning, analysis frequencies) are
  angular frequencies in rad/s.  The CLI accepts Hz and multiplies by 2*pi
  at the boundary; nothing inside the library ever converts units.
* Quadratures of a field with complex amplitude A are

      X+ = A + conj(A)        (amplitude quadrature)
      X- = i*A - i*conj(A)    (phase quadrature)

  so A = (X+ - i*X-) / 2.  Vacuum has unit variance in both quadratures,
  which makes the quantum noise limit (QNL) exactly 1 and squeezing < 1.
* Intracavity field model (sign convention).  The cavity mode obeys

      da/dt = -(kappa + i*detuning) a + chi * conj(a)
              + sqrt(2 kappa_s) A_s + sqrt(2 kappa_l) dA_l
      A_out = sqrt(2 kappa_s) a - A_s

  The sign of the chi term is fixed so that the steady state reproduces
  the closed-form output quadratures used by :mod:`homolock.steadystate`
  (X+ is amplified, X- is de-amplified/squeezed for chi > 0).  This is the
  single place the convention is defined; every other module derives from
  it.
* Rate-normalized units: any module accepts parameters with kappa = 1.
  :meth:`OPOParams.normalized` builds such parameter sets for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class HomolockError(Exception):
    """Base class for all domain errors raised by this package."""


class ParameterError(HomolockError, ValueError):
    """Invalid physical parameters."""


class NonPositiveRate(ParameterError):
    """A decay rate or time constant is negative, zero where forbidden, or not finite."""


class ThresholdViolation(ParameterError):
    """Nonlinear coupling chi >= kappa: the sub-threshold model diverges."""


class NonPhysicalReflectivity(ParameterError):
    """Mirror reflectivity outside (0, 1]."""


def _require_finite(name, value):
    if not math.isfinite(value):
        raise NonPositiveRate(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OPOParams:
    """Cavity and nonlinearity rates of a sub-threshold OPO.

    Attributes:
        kappa_s: decay rate through the output coupler (rad/s).
        kappa_l: decay rate through all other (loss) channels (rad/s).
        chi: nonlinear coupling strength from the classical pump (rad/s).
        tau: cavity round-trip time (s).
        detuning: cavity resonance minus nominal laser frequency (rad/s).

    The total decay rate kappa = kappa_s + kappa_l is always derived, never
    stored.  The nominal laser frequency itself only defines the rotating
    frame and never enters any computation.
    """

    kappa_s: float
    kappa_l: float
    chi: float
    tau: float
    detuning: float = 0.0

    def __post_init__(self):
        validate(self)

    @property
    def kappa(self) -> float:
        """Total decay rate kappa_s + kappa_l (rad/s)."""
        return self.kappa_s + self.kappa_l

    @property
    def fsr(self) -> float:
        """Free spectral range 1/tau (Hz)."""
        return fsr_of(self)

    @property
    def reflectivity_s(self) -> float:
        """Output-coupler power reflectivity, R = 1 - 2*tau*kappa_s."""
        return 1.0 - 2.0 * self.tau * self.kappa_s

    @property
    def reflectivity_l(self) -> float:
        """Effective loss-port power reflectivity, R = 1 - 2*tau*kappa_l."""
        return 1.0 - 2.0 * self.tau * self.kappa_l

    @classmethod
    def from_reflectivities(cls, r_s, r_l, tau, chi=0.0, detuning=0.0) -> "OPOParams":
        """Build parameters from mirror power reflectivities.

        kappa_i = (1 - R_i) / (2 tau); R_i must lie in (0, 1].  R_i = 1 is a
        perfect mirror and gives kappa_i = 0.
        """
        for name, r in (("r_s", r_s), ("r_l", r_l)):
            _require_finite(name, r)
            if not 0.0 < r <= 1.0:
                raise NonPhysicalReflectivity(
                    f"{name} must lie in (0, 1], got {r!r}"
                )
        if not tau > 0.0:
            raise NonPositiveRate(f"tau must be positive, got {tau!r}")
        kappa_s = (1.0 - r_s) / (2.0 * tau)
        kappa_l = (1.0 - r_l) / (2.0 * tau)
        return cls(kappa_s=kappa_s, kappa_l=kappa_l, chi=chi, tau=tau, detuning=detuning)

    @classmethod
    def normalized(cls, chi, kappa_s=1.0, kappa_l=0.0, detuning=0.0) -> "OPOParams":
        """Rate-normalized parameter set (kappa of order 1) for tests and demos.

        The round-trip time is set to 1 ns so that the free-spectral-range
        validity guard in the spectra module never fires at analysis
        frequencies of order kappa.
        """
        return cls(kappa_s=kappa_s, kappa_l=kappa_l, chi=chi, tau=1e-9, detuning=detuning)

    def with_detuning(self, detuning) -> "OPOParams":
        return replace(self, detuning=detuning)

    def with_chi(self, chi) -> "OPOParams":
        return replace(self, chi=chi)


def validate(params: OPOParams) -> OPOParams:
    """Return ``params`` unchanged iff every invariant holds.

    Raises:
        NonPositiveRate: negative/zero-total decay, non-positive tau, or any
            non-finite field.
        ThresholdViolation: chi >= kappa (at threshold the steady state
            diverges) or chi < 0.
    """
    for name in ("kappa_s", "kappa_l", "chi", "tau", "detuning"):
        _require_finite(name, getattr(params, name))
    if params.kappa_s < 0.0 or params.kappa_l < 0.0:
        raise NonPositiveRate(
            f"decay rates must be >= 0, got kappa_s={params.kappa_s!r}, "
            f"kappa_l={params.kappa_l!r}"
        )
    kappa = params.kappa_s + params.kappa_l
    if not kappa > 0.0:
        raise NonPositiveRate(f"kappa = kappa_s + kappa_l must be > 0, got {kappa!r}")
    if not params.tau > 0.0:
        raise NonPositiveRate(f"tau must be positive, got {params.tau!r}")
    if params.chi < 0.0:
        raise ThresholdViolation(f"chi must be >= 0, got {params.chi!r}")
    if params.chi >= kappa:
        raise ThresholdViolation(
            f"sub-threshold condition violated: chi={params.chi!r} >= kappa={kappa!r}"
        )
    return params


def fsr_of(params: OPOParams) -> float:
    """Free spectral range 1/tau in Hz."""
    return 1.0 / params.tau


@dataclass(frozen=True)
class QuadPair:
    """An (X+, X-) quadrature pair for a single field.

    Dimensionless; vacuum variance is 1 in each quadrature.
    """

    x_plus: float
    x_minus: float

    def __post_init__(self):
        _require_finite("x_plus", self.x_plus)
        _require_finite("x_minus", self.x_minus)

    @classmethod
    def from_complex(cls, amplitude) -> "QuadPair":
        """Quadratures of a complex amplitude: X+ = 2 Re A, X- = -2 Im A."""
        a = complex(amplitude)
        return cls(x_plus=2.0 * a.real, x_minus=-2.0 * a.imag)

    def to_complex(self) -> complex:
        """Complex amplitude A = (X+ - i X-) / 2."""
        return 0.5 * (self.x_plus - 1j * self.x_minus)


@dataclass(frozen=True)
class TwoModeField:
    """Seed mode plus a co-propagating local-oscillator mode.

    The seed mode is resonant and experiences the nonlinear coupling chi; the
    LO mode sees the same cavity with chi = 0 and a resonance shifted by
    ``lo_resonance_offset`` (rad/s).  ``power_split`` is the fraction of the
    total input power carried by the seed; the default 0.01 puts 99% of the
    power in the LO.  ``power_split = 1`` means no co-propagating LO at all
    (the sweep then reports the bare phase-quadrature output against an ideal
    external phase reference).
    """

    seed: QuadPair
    lo: QuadPair
    lo_resonance_offset: float = 0.0
    power_split: float = 0.01

    def __post_init__(self):
        _require_finite("lo_resonance_offset", self.lo_resonance_offset)
        _require_finite("power_split", self.power_split)
        if not 0.0 < self.power_split <= 1.0:
            raise ParameterError(
                f"power_split must lie in (0, 1], got {self.power_split!r}"
            )

    @classmethod
    def real_input(cls, amplitude=1.0, power_split=0.01, lo_resonance_offset=0.0) -> "TwoModeField":
        """Split a real input field of given total amplitude between the modes."""
        if not 0.0 < power_split <= 1.0:
            raise ParameterError(f"power_split must lie in (0, 1], got {power_split!r}")
        seed_amp = amplitude * math.sqrt(power_split)
        lo_amp = amplitude * math.sqrt(1.0 - power_split)
        return cls(
            seed=QuadPair.from_complex(seed_amp),
            lo=QuadPair.from_complex(lo_amp),
            lo_resonance_offset=lo_resonance_offset,
            power_split=power_split,
        )
