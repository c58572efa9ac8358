"""Simulation and analysis of photon statistics from a single, spectrally
diffusing solid-state emitter: pulsed and CW emission, a delayed
Mach-Zehnder for two-photon interference, detector models, exact time-tag
correlation, curve fitting, efficiency budgets and implant diffusion."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    FitError,
    FormatError,
    GcsimError,
    NormalizationError,
    ParameterError,
)
