"""
Fourier-side diagnostics: |f^(theta)|, its L^p norms and decay rate, and the
boundedness index k_0 of the convolution powers.

Convention: f^(theta) = int exp(i theta x) f(x) dx, so Plancherel reads
int |f^|^2 = 2 pi int |f|^2.
"""

import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from ..density.catalog import DensityKind, DensitySpec
from ..grid.discretize import DEFAULT_MAX_POINTS, discretize
from ..grid.grid_function import GridFunction, lp_norm
from ..utils.errors import NotResolvedError
from ..utils.logger import setup_logger
from .convolution_power import convolve_power

logger = setup_logger(__name__)

# fraction of the Nyquist frequency kept, away from aliasing
FREQUENCY_FRACTION = 1.0 / 8
MIN_FIT_R2 = 0.9
REFINEMENT_TOL = 0.05


def fourier_transform(g: GridFunction, pad_factor: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """Non-negative frequencies and |f^(theta)| from a zero-padded FFT with trapezoid weights"""
    n_fft = 1 << int(math.ceil(math.log2(pad_factor * g.size)))
    values = np.array(g.values, dtype=float)
    if values.size > 1:
        values[[0, -1]] *= 0.5
    spectrum = g.spacing * np.fft.rfft(values, n_fft)
    theta = 2 * np.pi * np.fft.rfftfreq(n_fft, d=g.spacing)
    return theta, np.abs(spectrum)


def fit_decay_exponent(theta: np.ndarray, modulus: np.ndarray, bins: int = 40) -> Tuple[Optional[float], float]:
    """Log-log slope of the upper envelope of |f^| over the top decade of frequencies.

    Oscillating transforms have zeros, so the fit runs on the per-bin maxima
    of log-spaced bins.
    """
    theta_hi = theta[-1]
    mask = (theta >= theta_hi / 10) & (theta > 0)
    if np.count_nonzero(mask) < bins:
        return None, 0.0
    edges = np.geomspace(theta_hi / 10, theta_hi, bins + 1)
    which = np.clip(np.searchsorted(edges, theta[mask], side='right') - 1, 0, bins - 1)
    peaks = np.zeros(bins)
    where = np.zeros(bins)
    for b in range(bins):
        sel = which == b
        if np.any(sel):
            j = int(np.argmax(modulus[mask][sel]))
            peaks[b] = modulus[mask][sel][j]
            where[b] = theta[mask][sel][j]
    ok = peaks > 0
    if np.count_nonzero(ok) < 8:
        return None, 0.0
    fit = stats.linregress(np.log(where[ok]), np.log(peaks[ok]))
    r2 = fit.rvalue ** 2
    if r2 < MIN_FIT_R2:
        return None, r2
    return float(fit.slope), r2


def _band_integral(theta_win: np.ndarray, mod_win: np.ndarray, decay: Optional[float],
                   p: float) -> Optional[float]:
    """int |f^|^p over the whole line: trapezoid on the band plus the fitted power-law tail"""
    body = 2 * float(integrate.trapezoid(mod_win ** p, theta_win))
    if decay is None:
        return None
    q = p * decay
    if q >= -1:
        return math.inf
    theta_hi = theta_win[-1]
    amp = mod_win[-1] / theta_hi ** decay
    return body + 2 * amp ** p * theta_hi ** (q + 1) / (-q - 1)


def density_l2_squared(spec: DensitySpec) -> float:
    """int f^2 by adaptive quadrature on the density itself; math.inf when it diverges"""
    p = spec.params
    if spec.kind == DensityKind.SQRT_SINGULAR:
        return math.inf
    if spec.kind == DensityKind.GAMMA and p['shape'] <= 0.5:
        return math.inf
    if spec.kind == DensityKind.TABULATED:
        return float(integrate.trapezoid(spec.table.values ** 2, dx=spec.table.spacing))
    lo, hi = spec.support
    integrand = lambda x: float(spec.eval(x)) ** 2
    split = spec.mode if lo < spec.mode < hi else (lo if math.isfinite(lo) else 0.0)
    total = 0.0
    for a, b in ((lo, split), (split, hi)):
        if a < b:
            total += integrate.quad(integrand, a, b, epsabs=1e-12, limit=500)[0]
    return float(total)


def fourier_norms(g: GridFunction, p_list: Sequence[float] = (1, 2, math.inf),
                  spec: Optional[DensitySpec] = None) -> Dict:
    """Estimates of ||f^||_p with a power-law tail completion, plus the Plancherel check.

    The Plancherel check sets the spectral int |f^|^2 (band plus fitted tail)
    against 2 pi int f^2, taken by quadrature on ``spec`` when given and
    from the grid and its envelope otherwise.
    """
    theta, modulus = fourier_transform(g)
    theta_win = theta[theta <= FREQUENCY_FRACTION * np.pi / g.spacing]
    mod_win = modulus[:theta_win.size]
    decay, r2 = fit_decay_exponent(theta_win, mod_win)

    norms: Dict = {}
    for p in p_list:
        if math.isinf(p):
            norms['inf'] = float(np.max(modulus))
            continue
        integral = _band_integral(theta_win, mod_win, decay, p)
        norms[str(p)] = integral if integral is None else integral ** (1 / p)

    spectral = _band_integral(theta_win, mod_win, decay, 2.0)
    if spectral is None:
        # transform negligible at the band edge
        spectral = 2 * float(integrate.trapezoid(mod_win ** 2, theta_win))
    if spec is not None:
        direct, source = 2 * np.pi * density_l2_squared(spec), 'quadrature'
    else:
        direct, source = 2 * np.pi * lp_norm(g, 2.0) ** 2, 'grid'
    relative = None
    if math.isfinite(direct) and math.isfinite(spectral):
        relative = abs(spectral - direct) / max(direct, 1e-300)
    plancherel = {'spectral': spectral, 'direct': direct, 'direct_source': source,
                  'relative_error': relative, 'convention_factor': '2*pi'}
    return {'norms': norms, 'decay_exponent': decay, 'fit_r2': r2,
            'lp_membership_above': (1.0 / -decay) if decay and decay < 0 else None,
            'plancherel': plancherel}


def _stable_sup(spec: DensitySpec, k: int, window: Tuple[float, float], spacing: float,
                max_points: int) -> Tuple[bool, list]:
    sups = []
    for level in range(3):
        h = spacing / 2 ** level
        sups.append(convolve_power(spec, k, window, h, max_points).grid.sup)
    changes = [abs(b - a) / max(a, 1e-300) for a, b in zip(sups, sups[1:])]
    return all(c < REFINEMENT_TOL for c in changes), sups


def boundedness_index(spec: DensitySpec, window: Tuple[float, float], spacing: float,
                      k_max: int = 8, max_points: int = DEFAULT_MAX_POINTS) -> Dict:
    """Smallest k <= k_max whose f_k has a sup stable under two halvings of h"""
    if math.isfinite(spec.sup_norm):
        k0, method, history = 1, 'closed-form sup', {1: [spec.sup_norm]}
    else:
        k0, method, history = None, 'grid refinement', {}
        for k in range(1, k_max + 1):
            stable, sups = _stable_sup(spec, k, window, spacing, max_points)
            history[k] = sups
            if stable:
                k0 = k
                break
        if k0 is None:
            raise NotResolvedError(f"boundedness index not resolved within k_max={k_max}")

    base = discretize(spec, window, spacing, max_points)
    fourier = fourier_norms(base, p_list=(math.inf,), spec=spec)
    decay = fourier['decay_exponent']
    fourier_k = None
    if decay is not None and decay < 0:
        # f^ in L^p for p > 1/|decay|, and f^k in L^1 once k >= p
        fourier_k = int(math.floor(1.0 / -decay)) + 1
    consistent = fourier_k is None or k0 <= fourier_k
    logger.info(f"Boundedness index for {spec.kind.value}: k0={k0} ({method}), Fourier bound {fourier_k}")
    return {'k0': k0, 'method': method, 'sups': history, 'fourier_decay': decay,
            'fourier_k': fourier_k, 'consistent': consistent}


def fourier_reverse_check(spec: DensitySpec, k0: int, window: Tuple[float, float],
                          spacing: float) -> Dict:
    """Consistency report: bounded f_k0 should come with f^ in L^(2 k0)"""
    base = discretize(spec, window, spacing)
    report = fourier_norms(base, p_list=(2 * k0,), spec=spec)
    decay = report['decay_exponent']
    member = None if decay is None else bool(2 * k0 * -decay > 1)
    return {'k0': k0, 'p': 2 * k0, 'decay_exponent': decay, 'in_lp': member}


def young_exponent(p: float, doublings: int) -> float:
    """Young's inequality exponent r_j for f_(2^j) when f lies in L^1 and L^p"""
    inv = 1.0 - 2 ** doublings * (1.0 - 1.0 / p)
    return math.inf if inv <= 0 else 1.0 / inv


def lp_power_growth(spec: DensitySpec, p: float, levels: int, window: Tuple[float, float],
                    spacing: float) -> Dict:
    """Norms of f_(2^j) at the Young exponents; they should stay finite along j"""
    rows = {}
    for j in range(levels + 1):
        power = convolve_power(spec, 2 ** j, window, spacing)
        r = young_exponent(p, j)
        rows[j] = {'k': 2 ** j, 'exponent': r, 'norm': lp_norm(power.grid, r)}
    return {'p': p, 'levels': rows,
            'all_finite': all(math.isfinite(row['norm']) for row in rows.values())}
