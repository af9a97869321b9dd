"""Local central limit check: sup_x |sqrt(n) f_n(sqrt(n) x) - phi(x)|."""

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..density.catalog import DensityKind, DensitySpec
from ..grid.discretize import grid_points, sample_density
from ..grid.grid_function import GridFunction
from ..utils.logger import setup_logger
from .convolution_power import convolve_power

logger = setup_logger(__name__)

DEFAULT_N_LIST = (2, 4, 8, 16)


def standardize(spec: DensitySpec, window: Tuple[float, float], spacing: float):
    """Mean 0, variance 1 version of f: a catalog spec when one exists, else a grid"""
    mu, var = spec.mean, spec.variance
    if not (math.isfinite(mu) and math.isfinite(var)) or var <= 0:
        raise ValueError(f"{spec.kind.value} has no finite variance to standardize")
    if spec.kind == DensityKind.GAUSSIAN:
        return DensitySpec.gaussian(0.0, 1.0)
    if spec.kind == DensityKind.UNIFORM:
        root3 = math.sqrt(3.0)
        return DensitySpec.uniform(-root3, root3)
    sigma = math.sqrt(var)
    y = grid_points(window, spacing)
    values = sigma * sample_density(spec, mu + sigma * y, spacing * sigma)
    return GridFunction(origin=float(y[0]), spacing=spacing, values=values,
                        label=f"{spec.kind.value}_standardized")


def local_clt_error(spec: DensitySpec, n_list: Sequence[int] = DEFAULT_N_LIST,
                    window: Optional[Tuple[float, float]] = None, spacing: float = 1e-3) -> Dict:
    """Sup-norm distance between rescaled f_n and the standard normal density.

    Errors are taken at the grid points of f_n, where sqrt(n) f_n(z) is compared
    with phi(z / sqrt(n)); no interpolation is involved.
    """
    if window is None:
        window = (-40.0, 40.0) if spec.kind == DensityKind.GAUSSIAN else (-12.0, 12.0)
    base = standardize(spec, window, spacing)
    if isinstance(base, DensitySpec) and base.kind == DensityKind.UNIFORM:
        lo, hi = base.support
        window = (lo - spacing, hi + spacing)

    errors: Dict[int, float] = {}
    for n in sorted(set(int(n) for n in n_list)):
        if isinstance(base, DensitySpec):
            power = convolve_power(base, n, window, spacing)
        else:
            power = convolve_power(base, n)
        z = power.grid.x
        root = math.sqrt(n)
        diff = np.abs(root * power.grid.values - stats.norm.pdf(z / root))
        errors[n] = float(np.max(diff))
        logger.debug(f"local CLT n={n}: sup error {errors[n]:.3g}")

    ordered = [errors[n] for n in sorted(errors)]
    decreasing = all(b < a for a, b in zip(ordered, ordered[1:]))
    return {'errors': errors, 'strictly_decreasing': decreasing, 'spacing': spacing}
