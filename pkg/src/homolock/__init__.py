"""Simulation toolkit for a homodyne-locked sub-threshold OPO squeezer.

Modules:
    core        shared types, unit conventions, parameter validation
    steadystate closed-form cavity output, locking error signal, gains, sweeps
    spectra     analytic squeezing spectra and detection-efficiency model
    dynamics    time-domain integration used as the brute-force cross-check
    lockloop    closed-loop frequency lock with a sub-QNL discriminator
    ffsqueezer  Gaussian engine for the feed-forward universal squeezer
    cli         command-line front end (``homolock`` entry point)
"""

from .core import (
    HomolockError,
    NonPhysicalReflectivity,
    NonPositiveRate,
    OPOParams,
    ParameterError,
    QuadPair,
    ThresholdViolation,
    TwoModeField,
    fsr_of,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "HomolockError",
    "NonPhysicalReflectivity",
    "NonPositiveRate",
    "OPOParams",
    "ParameterError",
    "QuadPair",
    "ThresholdViolation",
    "TwoModeField",
    "fsr_of",
    "validate",
    "__version__",
]
