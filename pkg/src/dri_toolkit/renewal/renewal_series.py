"""
Renewal density u = sum_n f_n on [0, x_max] and the limit checks built on it.

The series is accumulated by incremental convolution. Its remainder
sum_{n>N} f_n(x) is bounded by ||f_k0||_inf * sum_{n>N-k0} P(S_n <= x), and the
probabilities by the exponential Markov inequality

    P(S_n <= x) <= exp(s x) phi(s)^n,  phi(s) = 1 - s int_0^inf exp(-s y) P(X > y) dy,

optimized over s > 0.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import integrate, optimize, special, stats

from ..bounds.envelope_chain import build_envelope_chain, weighted_sum_check
from ..convolution.convolution_power import convolve
from ..convolution.fourier import REFINEMENT_TOL, boundedness_index
from ..density.catalog import DensityKind, DensitySpec
from ..grid.discretize import DEFAULT_MAX_POINTS, discretize
from ..grid.grid_function import GridFunction, fit_tail_exponent
from ..riemann.riemann_sums import Verdict, dri_verdict
from ..utils.errors import ConfigError, NotResolvedError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

REMAINDER_TOL = 1e-4
KEPT_POWERS = 8
GAMMA_ORACLE_RTOL = 1e-12
DEFECT_ROUNDOFF = 1e-9


@dataclass
class RenewalSeries:
    """u_N = f_1 + ... + f_N on [0, x_max] with a certified remainder bound"""
    spec: DensitySpec
    N: int
    grid: GridFunction
    remainder_bound: float
    mu: float
    powers: List[GridFunction] = field(default_factory=list, repr=False)
    sup_k0: float = math.nan
    k0: int = 1
    notes: List[str] = field(default_factory=list)

    @property
    def window(self) -> Tuple[float, float]:
        return self.grid.window

    @property
    def limit(self) -> float:
        """1/mu, zero for infinite mean"""
        return 0.0 if math.isinf(self.mu) else 1.0 / self.mu

    def window_mass(self, x: float, delta: float) -> Tuple[float, float]:
        """Certified band for U([x, x + delta)), the S_0 atom included"""
        lo = max(x, 0.0)
        hi = min(x + delta, self.window[1])
        mass = 0.0
        if hi > lo:
            pts = np.linspace(lo, hi, max(3, int(math.ceil((hi - lo) / self.grid.spacing)) + 1))
            mass = float(integrate.trapezoid(self.grid.evaluate(pts), pts))
        if x <= 0 < x + delta:
            mass += 1.0
        return mass, mass + delta * self.remainder_bound

    def to_dict(self) -> Dict:
        return {
            'density': self.spec.describe(),
            'N': self.N,
            'window': list(self.window),
            'spacing': self.grid.spacing,
            'remainder_bound': self.remainder_bound,
            'mu': self.mu,
            'k0': self.k0,
            'sup_f_k0': self.sup_k0,
            'notes': self.notes,
        }


def laplace_transform(spec: DensitySpec, s: float) -> float:
    """phi(s) = E exp(-s X) through the tail profile"""
    integrand = lambda y: math.exp(-s * y) * float(spec.tail(y))
    split = 50.0 / s
    body = integrate.quad(integrand, 0, split, limit=200)[0]
    rest = integrate.quad(integrand, split, np.inf, limit=200)[0]
    return max(0.0, 1.0 - s * (body + rest))


def hitting_probability_bound(spec: DensitySpec, x: float, first: int) -> float:
    """Bound on sum_{n >= first} P(S_n <= x)"""
    if first < 1:
        return math.inf

    def log_bound(u: float) -> float:
        s = math.exp(u)
        phi = laplace_transform(spec, s)
        if phi <= 0:
            return -math.inf
        if phi >= 1:
            return math.inf
        return s * x + first * math.log(phi) - math.log1p(-phi)

    res = optimize.minimize_scalar(log_bound, bounds=(-12.0, 6.0), method='bounded')
    value = min(res.fun, log_bound(res.x))
    return 0.0 if value == -math.inf else math.exp(min(value, 700.0))


def _sup_of_bounded_power(spec: DensitySpec, x_max: float, spacing: float,
                          k0: Optional[int]) -> Tuple[int, float]:
    if math.isfinite(spec.sup_norm) and k0 in (None, 1):
        return 1, spec.sup_norm
    lo, hi = spec.support
    window = (0.0, hi + 1.0) if math.isfinite(hi) else (0.0, x_max)
    report = boundedness_index(spec, window, spacing)
    k0 = report['k0']
    return k0, max(report['sups'][k0]) * (1 + REFINEMENT_TOL)


def renewal_density(spec: DensitySpec, N: int, window: Tuple[float, float], spacing: float,
                    tol: float = REMAINDER_TOL, k0: Optional[int] = None,
                    max_points: int = DEFAULT_MAX_POINTS) -> RenewalSeries:
    """u_N on [0, x_max]; the window shrinks (with a warning) until the remainder is certified"""
    if not spec.nonnegative_support:
        raise ConfigError(f"{spec.kind.value} is not supported on [0, inf); renewal needs positive steps")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    x_max = float(window[1])
    notes = []

    k0, sup_k0 = _sup_of_bounded_power(spec, x_max, spacing, k0)
    first = N - k0 + 1
    bound_at = lambda x: sup_k0 * hitting_probability_bound(spec, x, first)

    remainder = bound_at(x_max)
    if remainder > tol:
        if bound_at(spacing) > tol:
            raise NotResolvedError(f"remainder not certifiable for N={N} on any window")
        x_cert = optimize.brentq(lambda x: math.log(bound_at(x)) - math.log(tol), spacing, x_max,
                                 xtol=spacing)
        message = f"remainder bound {remainder:.3g} > {tol:g} at x={x_max:g}; window truncated to {x_cert:.6g}"
        logger.warning(message)
        notes.append(message)
        x_max = x_cert
        remainder = bound_at(x_max)

    base = discretize(spec, (0.0, x_max), spacing, max_points)
    base = base.with_values(base.values, envelope=None, label="f_1")
    size = base.size
    total = base.values.copy()
    powers = [base]
    current = base
    for n in range(2, N + 1):
        out = convolve(current, base, max_points)
        current = GridFunction(origin=0.0, spacing=spacing, values=out.values[:size], label=f"f_{n}")
        total += current.values
        if n <= KEPT_POWERS:
            powers.append(current)

    u = GridFunction(origin=0.0, spacing=spacing, values=total, label=f"u_{N}")
    mu = spec.mean
    logger.info(f"Renewal density for {spec.kind.value}: N={N}, window [0, {x_max:g}], "
                f"remainder <= {remainder:.3g}")
    return RenewalSeries(spec=spec, N=N, grid=u, remainder_bound=remainder, mu=mu, powers=powers,
                         sup_k0=sup_k0, k0=k0, notes=notes)


def density_defect(series: RenewalSeries, k: int, far_fraction: float = 2.0 / 3) -> Dict:
    """u - sum_{n<k} f_n and its sup deviation from 1/mu over the far window"""
    if not 1 <= k <= min(series.N, len(series.powers) + 1):
        raise ValueError(f"k must lie in [1, {min(series.N, len(series.powers) + 1)}], got {k}")
    values = series.grid.values.copy()
    for f_n in series.powers[:k - 1]:
        values -= f_n.values
    undershoot = max(0.0, -float(values.min()))
    if undershoot > DEFECT_ROUNDOFF * max(1.0, series.grid.sup):
        logger.warning(f"defect_{k} dips to {-undershoot:.3g} below zero")
    defect = series.grid.with_values(values, label=f"defect_{k}", nonnegative=False)
    lo, hi = series.window
    far = defect.x >= lo + far_fraction * (hi - lo)
    deviation = float(np.max(np.abs(defect.values[far] - series.limit)))
    return {'grid': defect, 'limit': series.limit, 'far_window': [float(defect.x[far][0]), hi],
            'sup_deviation': deviation, 'undershoot': undershoot,
            'relative_deviation': deviation / series.limit if series.limit > 0 else None}


@dataclass
class KeyRenewalResult:
    grid: GridFunction
    far_value: float
    limit: Optional[float]
    certified: bool


def key_renewal_apply(series: RenewalSeries, g: GridFunction, verify: bool = True) -> KeyRenewalResult:
    """(g * U)(x) = g(x) + (g * u_N)(x) on the series window"""
    certified = True
    if verify and g.sup > 0:
        report = dri_verdict(g)
        certified = report.verdict == Verdict.DRI_VERIFIED
        if not certified:
            logger.warning(f"key renewal input {g.label or 'g'} is not certified d.R.i.: {report.verdict.value}")
    x = series.grid.x
    conv = convolve(g.with_envelope(None), series.grid)
    values = np.asarray(g.evaluate(x)) + conv.evaluate(x)
    out = series.grid.with_values(values, label="key_renewal")
    limit = series.limit * g.mass if math.isfinite(series.mu) else None
    return KeyRenewalResult(grid=out, far_value=float(values[-1]), limit=limit, certified=certified)


def gamma_constant(alpha: float) -> Dict:
    """1 / (Gamma(alpha) Gamma(2 - alpha)) cross-checked against a 50-digit evaluation"""
    value = 1.0 / (special.gamma(alpha) * special.gamma(2 - alpha))
    with mpmath.workdps(50):
        oracle = 1 / (mpmath.gamma(mpmath.mpf(alpha)) * mpmath.gamma(2 - mpmath.mpf(alpha)))
    oracle = float(oracle)
    if abs(value - oracle) > GAMMA_ORACLE_RTOL * abs(oracle):
        raise ArithmeticError(f"gamma evaluation disagrees with oracle: {value!r} vs {oracle!r}")
    return {'target': value, 'oracle': oracle}


def heavy_tail_check(spec: DensitySpec, N: int, x_points: Sequence[float], spacing: float,
                     k_bar: Optional[int] = None, rtol: float = 0.15,
                     series: Optional[RenewalSeries] = None) -> Dict:
    """m(x) (u(x) - sum_{n<k_bar} f_n(x)) at the sample points against 1/(Gamma(a) Gamma(2-a))"""
    if spec.kind != DensityKind.PARETO:
        raise ConfigError("heavy_tail_check expects a pareto density")
    alpha = spec.params['alpha']
    if not 0 < alpha <= 1:
        raise ConfigError(f"heavy-tail regime needs alpha in (0, 1], got {alpha}")
    target = gamma_constant(alpha)
    points = sorted(float(x) for x in x_points)

    if k_bar is None:
        chain = build_envelope_chain(spec, n_max=4, window=(0.0, 4 * points[-1]), spacing=0.25)
        resolved = weighted_sum_check(chain)
        k_bar = resolved['k'] * chain.k0 if resolved.get('finite') else KEPT_POWERS
    k_bar = min(k_bar, KEPT_POWERS + 1)

    if series is None:
        series = renewal_density(spec, N, (0.0, points[-1] * 1.05), spacing)
    defect = density_defect(series, min(k_bar, series.N))['grid']

    rows = []
    for x in points:
        m = spec.truncated_mean(x)
        if x > series.window[1]:
            rows.append({'x': x, 'm': m, 'value': None, 'inconclusive': True})
            continue
        d = float(defect.evaluate(x))
        band = m * series.remainder_bound
        value = m * d
        rows.append({'x': x, 'm': m, 'defect': d, 'value': value, 'band': [value, value + band],
                     'ratio': value / target['target'],
                     'inconclusive': band > rtol * target['target']})

    claim = alpha > 0.5
    report = {'alpha': alpha, 'target': target['target'], 'gamma_oracle': target['oracle'],
              'k_bar': k_bar, 'N': series.N, 'remainder_bound': series.remainder_bound,
              'points': rows, 'convergence_claim': claim}
    if claim:
        last = rows[-1]
        report['within_tolerance'] = (last.get('value') is not None and not last['inconclusive']
                                      and abs(last['ratio'] - 1) <= rtol)
    else:
        report['notes'] = ["alpha <= 1/2: point values only, the limit may fail along rare x"]
    return report


def truncated_mean_slope(spec: DensitySpec, x_hi: float = 1e4, points: int = 50) -> Dict:
    """Log-log slope of m(x) over [x_hi/10, x_hi]; 1 - alpha for pareto tails"""
    x = np.geomspace(x_hi / 10, x_hi, points)
    m = np.array([spec.truncated_mean(v) for v in x])
    fit = stats.linregress(np.log(x), np.log(m))
    expected = 1 - spec.params['alpha'] if spec.kind == DensityKind.PARETO else None
    return {'slope': float(fit.slope), 'expected': expected,
            'passed': None if expected is None else bool(abs(fit.slope - expected) <= 0.05)}


def one_over_x_check(series: RenewalSeries, k: int) -> Dict:
    """Empirical f_k(x) = O(1/x) from the fitted tail exponent of f_k"""
    if k > len(series.powers):
        raise ValueError(f"f_{k} not kept; at most {len(series.powers)} powers are stored")
    f_k = series.powers[k - 1]
    lo, hi = f_k.window
    far = f_k.restrict(lo + 0.5 * (hi - lo), hi)
    exponent, r2 = fit_tail_exponent(far, outer_fraction=0.5)
    vanishes = far.sup <= 1e-12
    return {'k': k, 'exponent': exponent, 'r2': r2,
            'is_O_1_over_x': bool(vanishes or (exponent is not None and exponent <= -1 + 1e-2))}


def vanishing_propagation_check(series: RenewalSeries, x_far: float, tol: float = 1e-3) -> Dict:
    """sup of each kept f_n over [x_far, x_max] is below tol"""
    hi = series.window[1]
    sups = {}
    for n, f_n in enumerate(series.powers, start=1):
        sups[n] = f_n.restrict(x_far, hi).sup
    return {'x_far': x_far, 'sups': sups, 'passed': all(v <= tol for v in sups.values())}
