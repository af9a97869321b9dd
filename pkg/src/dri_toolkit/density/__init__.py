"""Input densities: analytic catalog entries and tabulated data."""

from .catalog import DensityKind, DensitySpec

__all__ = ["DensityKind", "DensitySpec"]
