"""Commuting toral maps: entropy, avoid-ball subshifts, orbit density and dimension bounds."""

__version__ = "0.1.0"

from .errors import ToralDynError  # noqa: E402
from .spectral import ToralMap, entropy_report, spectral_data  # noqa: E402

__all__ = ["ToralDynError", "ToralMap", "entropy_report", "spectral_data", "__version__"]
