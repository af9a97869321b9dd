"""Convolution powers f_k and their Fourier-side diagnostics."""

from .convolution_power import ConvolutionPower, convolve, convolve_power, direct_convolve
from .fourier import boundedness_index, fourier_norms
from .local_clt import local_clt_error

__all__ = ["ConvolutionPower", "convolve", "convolve_power", "direct_convolve",
           "boundedness_index", "fourier_norms", "local_clt_error"]
