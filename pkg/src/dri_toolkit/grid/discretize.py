import math
from typing import Optional, Tuple

import numpy as np
from scipy import special

from ..density.catalog import DensityKind, DensitySpec
from ..utils.errors import GridOverflowError, UncertifiedTruncationError
from ..utils.logger import setup_logger
from .grid_function import EnvelopeKind, GridFunction, TailEnvelope, certify_window

logger = setup_logger(__name__)

DEFAULT_MAX_POINTS = 2 ** 22
TRUNCATION_TOL = 1e-3


def grid_points(window: Tuple[float, float], spacing: float,
                max_points: int = DEFAULT_MAX_POINTS) -> np.ndarray:
    """Uniform points a, a + h, ..., covering [a, b]"""
    a, b = window
    if b <= a or spacing <= 0:
        raise ValueError(f"Invalid window {window} or spacing {spacing}")
    n = int(round((b - a) / spacing)) + 1
    if n > max_points:
        raise GridOverflowError(f"Grid of {n} points exceeds max_points={max_points}")
    return a + spacing * np.arange(n)


def sample_density(spec: DensitySpec, x: np.ndarray, spacing: float) -> np.ndarray:
    """Grid values of f.

    Interior points take the mean of the one-sided limits, so a jump at a
    node carries half its height. The two end points take the limit from
    inside the window, matching the half weight the trapezoid rule gives
    them. Unbounded densities use cell averages, over the inner half cell
    at the ends.
    """
    x = np.asarray(x, dtype=float)
    ends = x.size > 1
    if math.isinf(spec.sup_norm):
        left = x - spacing / 2
        right = x + spacing / 2
        if ends:
            left[0] = x[0]
            right[-1] = x[-1]
        return (np.asarray(spec.cdf(right)) - np.asarray(spec.cdf(left))) / (right - left)
    eta = 1e-9 * np.maximum(1.0, np.abs(x))
    below = np.asarray(spec.eval(x - eta), dtype=float)
    above = np.asarray(spec.eval(x + eta), dtype=float)
    values = 0.5 * (below + above)
    if ends:
        values[0] = above[0]
        values[-1] = below[-1]
    return values


def truncated_mass(spec: DensitySpec, window: Tuple[float, float]) -> float:
    """Probability mass outside [a, b]"""
    a, b = window
    return float(spec.cdf(a) + (1.0 - spec.cdf(b)))


def omitted_mass(spec: DensitySpec, k: int, window: Tuple[float, float]) -> float:
    """Certified bound on the mass of f_k outside [a, b]: k g_1(b/k) on the right, k g_1(|a|/k) on the left"""
    a, b = window
    lo, hi = spec.support
    right = 0.0 if b >= k * hi else k * float(spec.tail(b / k))
    left = 0.0 if a <= k * lo else k * float(spec.tail(-a / k))
    return min(1.0, left + right)


def grown_window(spec: DensitySpec, k: int, window: Tuple[float, float], spacing: float,
                 max_points: int = DEFAULT_MAX_POINTS,
                 tol: float = TRUNCATION_TOL) -> Tuple[float, float]:
    """Extend the open ends of the window until f_k leaves at most tol of its mass outside.

    Each step adds the current window length to every open side, so the grid
    lattice is kept. Raises GridOverflowError once the grid would exceed
    max_points.
    """
    a, b = float(window[0]), float(window[1])
    lo, hi = spec.support
    if math.isfinite(lo) and math.isfinite(hi):
        return a, b
    start = (a, b)
    while omitted_mass(spec, k, (a, b)) > tol:
        step = max(1, int(round((b - a) / spacing))) * spacing
        if a > k * lo:
            a -= step
        if b < k * hi:
            b += step
        n = int(round((b - a) / spacing)) + 1
        if n > max_points:
            raise GridOverflowError(
                f"f_{k} of {spec.kind.value} needs a window beyond {(a, b)} to leave at most {tol:g} "
                f"of its mass outside; {n} points exceed max_points={max_points}")
    if (a, b) != start:
        logger.info(f"Window for f_{k} of {spec.kind.value} grown from {start} to {(a, b)}")
    return a, b


def pointwise_envelope(spec: DensitySpec) -> Optional[TailEnvelope]:
    """Closed-form non-increasing bound on f(x) for |x| >= cutoff, or None when the family has none"""
    lo, hi = spec.support
    p = spec.params

    if spec.kind == DensityKind.TABULATED:
        env = spec.table.envelope
        return env if env is not None and env.kind != EnvelopeKind.MONOTONE else None

    if math.isfinite(lo) and math.isfinite(hi):
        return TailEnvelope.zero((lo, hi))

    if spec.kind == DensityKind.EXPONENTIAL:
        rate = p['rate']
        return TailEnvelope(cutoff=0.0, constant=rate, exponent=rate,
                            kind=EnvelopeKind.EXPONENTIAL, scale=rate, support=(0.0, math.inf))

    if spec.kind == DensityKind.PARETO:
        alpha, s = p['alpha'], p['scale']
        return TailEnvelope.power(cutoff=s, constant=alpha * s ** alpha, exponent=alpha + 1,
                                  scale=alpha / s, support=(s, math.inf))

    if spec.kind == DensityKind.LOG_COUNTEREXAMPLE:
        # 1/(x log^2 x) <= 1/x on [e, inf)
        return TailEnvelope.power(cutoff=math.e, constant=1.0, exponent=1.0, scale=1.0 / math.e,
                                  support=(math.e, math.inf))

    if spec.kind == DensityKind.GAMMA:
        shape, rate = p['shape'], p['rate']
        if shape >= 1:
            # x^(shape-1) exp(-rate x / 2) peaks at x = 2 (shape - 1) / rate
            peak = (2 * (shape - 1) / (rate * math.e)) ** (shape - 1)
            return TailEnvelope(cutoff=0.0, constant=rate ** shape / special.gamma(shape) * peak,
                                exponent=rate / 2, kind=EnvelopeKind.EXPONENTIAL,
                                scale=spec.sup_norm, support=(0.0, math.inf))
        return TailEnvelope(cutoff=1.0, constant=rate ** shape / special.gamma(shape), exponent=rate,
                            kind=EnvelopeKind.EXPONENTIAL, support=(0.0, math.inf))

    if spec.kind == DensityKind.GAUSSIAN:
        # u^2 / 2 >= u - 1/2 with u = (|x| - |mean|) / sd
        mean, sd = p['mean'], p['sd']
        constant = math.exp(0.5 + abs(mean) / sd) / (sd * math.sqrt(2 * math.pi))
        return TailEnvelope(cutoff=0.0, constant=constant, exponent=1.0 / sd,
                            kind=EnvelopeKind.EXPONENTIAL, scale=spec.sup_norm)
    return None


def density_envelope(spec: DensitySpec, window: Tuple[float, float]) -> Optional[TailEnvelope]:
    """Certified bound on f beyond the window, or None when none applies"""
    a, b = window
    lo, hi = spec.support
    p = spec.params

    if math.isfinite(lo) and math.isfinite(hi) and spec.kind != DensityKind.TABULATED:
        if a <= lo and b >= hi:
            return TailEnvelope.zero((lo, hi))
        return None

    if spec.kind == DensityKind.EXPONENTIAL:
        rate = p['rate']
        return TailEnvelope(cutoff=0.0, constant=rate, exponent=rate,
                            kind=EnvelopeKind.EXPONENTIAL, scale=rate, support=(0.0, math.inf))

    if spec.kind == DensityKind.PARETO:
        alpha, s = p['alpha'], p['scale']
        return TailEnvelope.power(cutoff=s, constant=alpha * s ** alpha, exponent=alpha + 1,
                                  scale=alpha / s, support=(s, math.inf))

    if spec.kind == DensityKind.TABULATED:
        return spec.table.envelope

    # eventually monotone densities: exact tail mass beyond a window around the mode
    mode = spec.mode
    if (b < hi and b < mode) or (a > lo and a > mode):
        return None
    edges = [x for x, open_side in ((a, a > lo), (b, b < hi)) if open_side]
    scale = max(float(spec.eval(x)) for x in edges) if edges else 0.0
    cutoff = min(abs(x) for x in edges) if edges else 0.0
    C = spec.moment_eps(spec.epsilon) if spec.epsilon else math.inf
    return TailEnvelope(cutoff=cutoff,
                        constant=C if math.isfinite(C) else 1.0,
                        exponent=spec.epsilon if math.isfinite(C) else 0.0,
                        kind=EnvelopeKind.MONOTONE, scale=scale, support=(lo, hi),
                        mass_profile=lambda t: float(spec.tail(t)), mass_exact=True)


def discretize(spec: DensitySpec, window: Tuple[float, float], spacing: float,
               max_points: int = DEFAULT_MAX_POINTS) -> GridFunction:
    """Sample the density on a uniform grid and attach its tail envelope"""
    x = grid_points(window, spacing, max_points)
    window = (float(x[0]), float(x[-1]))
    values = sample_density(spec, x, spacing)

    envelope = density_envelope(spec, window)
    lost = truncated_mass(spec, window)
    if envelope is None and lost > TRUNCATION_TOL:
        raise UncertifiedTruncationError(
            f"uncertified truncation: window {window} drops mass {lost:.3g} without an envelope")

    g = GridFunction(origin=window[0], spacing=spacing, values=values, envelope=envelope,
                     label=spec.kind.value)
    if envelope is not None:
        certify_window(g)
    logger.debug(f"Discretized {spec.kind.value} on {window}: {g.size} points, "
                 f"truncated mass {lost:.3g}")
    return g
