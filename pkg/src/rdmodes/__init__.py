"""Modal identification of 1-D reaction-diffusion dynamics.

The package recovers the leading decay rates and initial mode amplitudes
of a diffusion-reaction field from a single non-local measurement series,
and quantifies how strongly those recovered parameters react to
unresolved fast-decaying remainder modes.  Everything runs at a run-wide
selectable decimal precision (16 digits on hardware floats, more through
mpmath).
"""
from .precision import NumericContext, STANDARD_DIGITS

__all__ = ["NumericContext", "STANDARD_DIGITS"]

__version__ = "0.1.0"
