"""Pseudo-spectral simulator and verification lab for magnetic relaxation."""

__version__ = "0.1.0"

from mrelab.dynamics import IntegratorConfig, MREState, ResolutionWarning  # noqa: E402
from mrelab.spectral import Grid  # noqa: E402

__all__ = ["Grid", "IntegratorConfig", "MREState", "ResolutionWarning", "__version__"]
