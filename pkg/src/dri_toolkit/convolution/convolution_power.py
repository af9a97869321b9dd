"""
k-fold convolution powers f_k on a uniform grid.

The kernel is a zero-padded real FFT (power-of-two length) with trapezoid
end corrections on each overlap; ``direct_convolve`` is the O(N^2) oracle
used to cross-check it.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from ..density.catalog import DensitySpec
from ..grid.discretize import (DEFAULT_MAX_POINTS, TRUNCATION_TOL, discretize, grown_window,
                               omitted_mass, pointwise_envelope)
from ..grid.grid_function import EnvelopeKind, GridFunction, TailEnvelope
from ..utils.errors import GridOverflowError, SpacingMismatchError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

SPACING_RTOL = 1e-12
MASS_DRIFT_TOL = 1e-6
DIRECT_ORACLE_MAX = 512


@dataclass
class ConvolutionPower:
    """f_k on a grid with the tail-mass envelope min{1, k^(1+eps) C / t^eps}"""
    k: int
    grid: GridFunction
    envelope: Optional[TailEnvelope]
    mass_drift: float
    spec: Optional[DensitySpec] = None
    eps: Optional[float] = None
    moment_constant: Optional[float] = None
    omitted_mass: Optional[float] = None
    checks: Dict = field(default_factory=dict)

    @property
    def pointwise(self) -> Optional[TailEnvelope]:
        """Closed-form bound on f_k beyond its window, None without one"""
        if self.spec is None:
            return None
        base = pointwise_envelope(self.spec)
        return base.convolution_power(self.k) if base is not None else None

    def weighted_grid(self, eps: float) -> GridFunction:
        """(1 + |x|^eps) f_k on the grid, carrying the weighted pointwise envelope"""
        g = self.grid
        env = self.pointwise
        return g.with_values((1 + np.abs(g.x) ** eps) * g.values,
                             envelope=env.weighted(eps) if env is not None else None,
                             label=f"weighted_f_{self.k}")

    def tail_mass_bound(self, t) -> np.ndarray:
        """Certified bound on g_k(t) = mass of |x| >= t"""
        t = np.asarray(t, dtype=float)
        bound = np.ones_like(t)
        if self.spec is not None:
            union = self.k * np.asarray(self.spec.tail(t / self.k))
            bound = np.minimum(bound, union)
        if self.envelope is not None:
            bound = np.minimum(bound, self.envelope.value(t))
        return np.where(t <= 0, 1.0, bound)

    def to_dict(self) -> Dict:
        return {
            'k': self.k,
            'window': list(self.grid.window),
            'spacing': self.grid.spacing,
            'sup': self.grid.sup,
            'mass': self.grid.mass,
            'mass_drift': self.mass_drift,
            'omitted_mass': self.omitted_mass,
            'eps': self.eps,
            'moment_constant': self.moment_constant,
            'envelope': self.envelope.to_dict() if self.envelope else None,
            'checks': self.checks,
        }


def _check_compatible(a: GridFunction, b: GridFunction) -> float:
    if abs(a.spacing - b.spacing) > SPACING_RTOL * max(a.spacing, b.spacing):
        raise SpacingMismatchError(f"Spacing mismatch: {a.spacing} vs {b.spacing}")
    return a.spacing


def _end_corrections(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Half of the two end terms of every overlap sum"""
    na, nb = a.size, b.size
    k = np.arange(na + nb - 1)
    i0 = np.clip(k - nb + 1, 0, None)
    i1 = np.minimum(na - 1, k)
    return 0.5 * (a[i0] * b[k - i0] + a[i1] * b[k - i1])


def convolve(a: GridFunction, b: GridFunction, max_points: int = DEFAULT_MAX_POINTS) -> GridFunction:
    """Linear convolution (a * b) by zero-padded FFT, trapezoid rule on each overlap"""
    h = _check_compatible(a, b)
    n_out = a.size + b.size - 1
    if n_out > max_points:
        raise GridOverflowError(f"Convolution of {a.size} and {b.size} points exceeds {max_points}")
    n_fft = 1 << int(math.ceil(math.log2(n_out)))
    spectrum = np.fft.rfft(a.values, n_fft) * np.fft.rfft(b.values, n_fft)
    raw = np.fft.irfft(spectrum, n_fft)[:n_out]
    values = h * (raw - _end_corrections(a.values, b.values))
    return GridFunction(origin=a.origin + b.origin, spacing=h, values=values,
                        nonnegative=a.nonnegative and b.nonnegative,
                        label=f"{a.label}*{b.label}")


def direct_convolve(a: GridFunction, b: GridFunction) -> GridFunction:
    """Quadrature oracle: same rule as ``convolve`` without the FFT"""
    h = _check_compatible(a, b)
    if max(a.size, b.size) > DIRECT_ORACLE_MAX * 8:
        logger.warning(f"Direct convolution on {a.size} x {b.size} points is slow")
    values = h * (np.convolve(a.values, b.values) - _end_corrections(a.values, b.values))
    return GridFunction(origin=a.origin + b.origin, spacing=h, values=values,
                        nonnegative=a.nonnegative and b.nonnegative,
                        label=f"{a.label}*{b.label}")


def _has_open_tail(g: GridFunction) -> bool:
    return g.envelope is not None and g.envelope.kind != EnvelopeKind.ZERO


def _trim(g: GridFunction, window: Tuple[float, float]) -> GridFunction:
    return g.restrict(*window)


def _power_envelope(k: int, eps: Optional[float], C: Optional[float]) -> Optional[TailEnvelope]:
    if eps is None or C is None or not math.isfinite(C):
        return None
    return TailEnvelope.power(cutoff=0.0, constant=k ** (1 + eps) * C, exponent=eps, scale=1.0)


def _value_envelope(result: GridFunction, k: int, spec: Optional[DensitySpec],
                    base: GridFunction) -> Optional[TailEnvelope]:
    """Bound on f_k beyond its window: zero past a compact support, else a
    monotone tail whose mass is at most k * g_1(t / k)"""
    if base.envelope is None:
        return None
    if base.envelope.kind == EnvelopeKind.ZERO:
        lo, hi = base.envelope.support
        return TailEnvelope.zero((k * lo, k * hi))
    if spec is None:
        return None
    lo, hi = result.window
    support = (k * spec.support[0], k * spec.support[1])
    open_left, open_right = lo > support[0], hi < support[1]
    edges = [v for v, is_open in ((result.values[0], open_left), (result.values[-1], open_right))
             if is_open]
    cutoffs = [abs(e) for e, is_open in ((lo, open_left), (hi, open_right)) if is_open]
    return TailEnvelope(cutoff=min(cutoffs) if cutoffs else 0.0, constant=1.0, exponent=0.0,
                        kind=EnvelopeKind.MONOTONE, scale=float(max(edges)) if edges else 0.0,
                        support=support,
                        mass_profile=lambda t: min(1.0, k * float(spec.tail(t / k))))


def convolve_power(source: Union[DensitySpec, GridFunction], k: int,
                   window: Optional[Tuple[float, float]] = None, spacing: Optional[float] = None,
                   max_points: int = DEFAULT_MAX_POINTS, eps: Optional[float] = None,
                   grow: bool = True) -> ConvolutionPower:
    """f_k by binary exponentiation over ``convolve``.

    Bases with an open tail keep f_k on the base window; compactly supported
    bases keep the full support. For a catalog density the window first grows
    until f_k leaves at most 1e-3 of its mass outside. Callers that carry the
    remainder through tail envelopes pass ``grow=False``; the certified
    outside mass is then reported in ``omitted_mass``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if isinstance(source, DensitySpec):
        spec = source
        if grow:
            window = grown_window(spec, k, window, spacing, max_points)
        base = discretize(spec, window, spacing, max_points)
    else:
        spec = None
        base = source

    eps = eps if eps is not None else (spec.epsilon if spec is not None else None)
    C = spec.moment_eps(eps) if spec is not None and eps else None
    trim = _has_open_tail(base)

    def mul(a: GridFunction, b: GridFunction) -> GridFunction:
        out = convolve(a, b, max_points)
        return _trim(out, base.window) if trim else out

    result: Optional[GridFunction] = None
    square = base
    n = k
    while n:
        if n & 1:
            result = square if result is None else mul(result, square)
        n >>= 1
        if n:
            square = mul(square, square)

    result = result.with_values(result.values,
                                envelope=_value_envelope(result, k, spec, base) if k > 1 else base.envelope,
                                label=f"f_{k}")
    drift = abs(result.mass - 1.0)
    if drift > MASS_DRIFT_TOL:
        logger.debug(f"f_{k}: mass drift {drift:.3g} (reported, not renormalized)")
    omitted = omitted_mass(spec, k, result.window) if spec is not None else None
    if omitted is not None and omitted > TRUNCATION_TOL:
        logger.warning(f"f_{k}: window {result.window} leaves up to {omitted:.3g} of the mass outside; "
                       f"carried by the tail envelope")

    power = ConvolutionPower(k=k, grid=result, envelope=_power_envelope(k, eps, C),
                             mass_drift=drift, spec=spec, eps=eps, moment_constant=C,
                             omitted_mass=omitted)
    if eps and C is not None and math.isfinite(C):
        power.checks['moment_growth'] = moment_growth_check(power)
    return power


def convolution_powers(spec: DensitySpec, k_max: int, window: Tuple[float, float],
                       spacing: float, max_points: int = DEFAULT_MAX_POINTS) -> List[ConvolutionPower]:
    """f_1 .. f_kmax by repeated convolution with f, on the window grown for f_kmax"""
    window = grown_window(spec, k_max, window, spacing, max_points)
    first = convolve_power(spec, 1, window, spacing, max_points, grow=False)
    powers = [first]
    trim = _has_open_tail(first.grid)
    for k in range(2, k_max + 1):
        prev = powers[-1].grid
        out = convolve(prev, first.grid, max_points)
        if trim:
            out = _trim(out, first.grid.window)
        eps = spec.epsilon
        C = first.moment_constant
        out = out.with_values(out.values, envelope=_value_envelope(out, k, spec, first.grid),
                              label=f"f_{k}")
        powers.append(ConvolutionPower(k=k, grid=out, envelope=_power_envelope(k, eps, C),
                                       mass_drift=abs(out.mass - 1.0), spec=spec, eps=eps,
                                       moment_constant=C,
                                       omitted_mass=omitted_mass(spec, k, out.window)))
    return powers


def grid_moment(g: GridFunction, eps: float) -> float:
    """Trapezoid estimate of the integral of |x|^eps |g| over the window"""
    return float(integrate.trapezoid(np.abs(g.x) ** eps * np.abs(g.values), dx=g.spacing))


def grid_tail(g: GridFunction, t: np.ndarray) -> np.ndarray:
    """Mass of |x| >= t on the grid plus the mass missing from the window"""
    x = g.x
    w = np.full(g.size, g.spacing)
    w[0] = w[-1] = g.spacing / 2
    cell = np.abs(g.values) * w
    order = np.argsort(np.abs(x))
    abs_sorted = np.abs(x)[order]
    suffix = np.cumsum(cell[order][::-1])[::-1]
    idx = np.searchsorted(abs_sorted, np.asarray(t, dtype=float), side='left')
    inside = np.where(idx < g.size, suffix[np.minimum(idx, g.size - 1)], 0.0)
    missing = max(0.0, 1.0 - g.mass)
    return np.where(np.asarray(t) <= 0, 1.0, np.minimum(1.0, inside + missing))


def moment_growth_check(power: ConvolutionPower, slack: float = 1e-8) -> Dict:
    """int |x|^eps f_k <= k^eps (k C)"""
    lhs = grid_moment(power.grid, power.eps)
    rhs = power.k ** power.eps * power.k * power.moment_constant
    return {'passed': bool(lhs <= rhs + slack), 'lhs': lhs, 'rhs': rhs}


def tail_bound_check(power: ConvolutionPower, t_grid: Sequence[float], slack: float = 1e-8) -> Dict:
    """g_k(t) <= min{1, k^(1+eps) C / t^eps} on the t-grid"""
    t = np.asarray(t_grid, dtype=float)
    lhs = grid_tail(power.grid, t)
    rhs = power.envelope.value(t) if power.envelope else np.ones_like(t)
    rhs = np.where(t <= 0, 1.0, rhs)
    violations = int(np.count_nonzero(lhs > rhs + slack))
    return {'passed': violations == 0, 'violations': violations,
            'max_ratio': float(np.max(lhs / np.maximum(rhs, 1e-300)))}


def semigroup_check(spec: DensitySpec, i: int, j: int, window: Tuple[float, float],
                    spacing: float, tol: float = 1e-8) -> Dict:
    """f_(i+j) against f_i * f_j on one window, grown for f_(i+j)"""
    window = grown_window(spec, i + j, window, spacing)
    fi = convolve_power(spec, i, window, spacing, grow=False)
    fj = convolve_power(spec, j, window, spacing, grow=False)
    fij = convolve_power(spec, i + j, window, spacing, grow=False)
    product = convolve(fi.grid, fj.grid)
    lo = max(fij.grid.window[0], product.window[0])
    hi = min(fij.grid.window[1], product.window[1])
    a = fij.grid.restrict(lo, hi).values
    b = product.restrict(lo, hi).values
    n = min(a.size, b.size)
    err = float(np.max(np.abs(a[:n] - b[:n])))
    return {'passed': err <= tol, 'sup_error': err}


def young_contraction_check(power: ConvolutionPower, next_power: ConvolutionPower,
                            base_mass: float = 1.0, slack: float = 1e-6) -> Dict:
    """sup f_(k+1) <= sup f_k * int f"""
    lhs = next_power.grid.sup
    rhs = power.grid.sup * base_mass
    return {'passed': bool(lhs <= rhs * (1 + slack) + slack), 'lhs': lhs, 'rhs': rhs}


def halved_sup_bound_check(powers: List[ConvolutionPower], slack: float = 1e-6) -> Dict:
    """f_(n+1)(x) <= sup_{y >= x/2} (f(y) + f_n(y)) on x >= 0, densities on [0, inf)"""
    f = powers[0].grid
    results = {}
    for n in range(1, len(powers)):
        fn = powers[n - 1].grid
        nxt = powers[n].grid
        # align f and f_n on the f_(n+1) grid
        x = nxt.x
        keep = x >= 0
        combined = f.evaluate(x) + fn.evaluate(x)
        suffix_max = np.maximum.accumulate(combined[::-1])[::-1]
        half_idx = np.floor((x / 2 - nxt.origin) / nxt.spacing).astype(int)
        half_idx = np.clip(half_idx, 0, x.size - 1)
        rhs = suffix_max[half_idx]
        lhs = nxt.values
        bad = keep & (lhs > rhs * (1 + slack) + slack)
        results[n] = {'passed': not bool(np.any(bad)), 'violations': int(np.count_nonzero(bad))}
    return {'passed': all(r['passed'] for r in results.values()), 'by_n': results}


def continuity_vanishing_check(power: ConvolutionPower, window: Tuple[float, float],
                               threshold: float = 1e-3, k0: Optional[int] = None) -> Dict:
    """Modulus of continuity shrinks with h and f_k is small at the window ends.

    Needs k >= k0 + 1 with k0 the boundedness index; k0 defaults to 1 for
    bounded densities and must be passed for unbounded ones.
    """
    if power.spec is None:
        raise ValueError("continuity_vanishing_check needs a catalog-backed power")
    if k0 is None:
        if not math.isfinite(power.spec.sup_norm):
            raise ValueError(f"{power.spec.kind.value} is unbounded; pass its boundedness index k0")
        k0 = 1
    if power.k < k0 + 1:
        raise ValueError(f"continuity needs k >= k0 + 1 = {k0 + 1}, got k={power.k}")
    h = power.grid.spacing
    fine = convolve_power(power.spec, power.k, window, h / 2)
    coarse_mod = float(np.max(np.abs(np.diff(power.grid.values))))
    fine_mod = float(np.max(np.abs(np.diff(fine.grid.values))))
    shrinks = fine_mod <= 0.9 * coarse_mod or fine_mod <= threshold * max(power.grid.sup, 1.0)
    ends = max(abs(power.grid.values[0]), abs(power.grid.values[-1]))
    vanishes = ends <= threshold * max(power.grid.sup, 1.0)
    return {'passed': bool(shrinks and vanishes), 'modulus_h': coarse_mod,
            'modulus_h_half': fine_mod, 'boundary_value': float(ends)}
