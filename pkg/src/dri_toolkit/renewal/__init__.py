"""Renewal density, limit theorem checks and the Monte Carlo walk simulator."""

from .renewal_series import (RenewalSeries, density_defect, heavy_tail_check, key_renewal_apply,
                             renewal_density)
from .simulator import RenewalSimulator, WindowEstimate, simulate_renewal_window

__all__ = [
    "RenewalSeries", "density_defect", "heavy_tail_check", "key_renewal_apply",
    "renewal_density", "RenewalSimulator", "WindowEstimate", "simulate_renewal_window",
]
