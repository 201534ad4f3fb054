"""Finite-strain fractional viscoelasticity with phase-field damage."""
from .material import InversionError, MaterialError, MaterialParams

__version__ = "0.1.0"

__all__ = ["MaterialParams", "MaterialError", "InversionError", "__version__"]
