"""
Uniform-grid functions with a certified tail envelope beyond the window.

Everything the toolkit computes (densities, convolution powers, the
envelope chain) is carried as a GridFunction: samples on a uniform grid
plus a TailEnvelope that bounds the function outside the sampled window.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, stats

from ..utils.errors import MeshTooFineError, UncertifiedTruncationError

MIN_SAMPLES_PER_BLOCK = 8


class EnvelopeKind(Enum):
    """Shape of the bound carried beyond the grid window"""
    ZERO = "zero"                # function vanishes beyond cutoff
    POWER = "power"              # |g(t)| <= min(scale, C / |t|^exponent)
    EXPONENTIAL = "exponential"  # |g(t)| <= min(scale, C * exp(-exponent |t|))
    MONOTONE = "monotone"        # |g| non-increasing beyond cutoff, tail mass known


@dataclass(frozen=True)
class TailEnvelope:
    """Non-increasing bound on |g| for |t| >= cutoff.

    ``support`` marks the interval outside of which g is known to vanish, so a
    one-sided density needs no envelope on its empty side. For MONOTONE
    envelopes ``mass_profile(t)`` bounds the integral of |g| over |x| >= t; when
    ``mass_exact`` is set the profile is the exact integral and may also be
    used as a lower bound.
    """
    cutoff: float
    constant: float
    exponent: float
    kind: EnvelopeKind = EnvelopeKind.POWER
    scale: float = math.inf
    support: Tuple[float, float] = (-math.inf, math.inf)
    mass_profile: Optional[Callable[[float], float]] = field(default=None, compare=False)
    mass_exact: bool = False

    @classmethod
    def zero(cls, support: Tuple[float, float]) -> "TailEnvelope":
        cutoff = max(abs(support[0]), abs(support[1]))
        return cls(cutoff=cutoff, constant=0.0, exponent=math.inf, kind=EnvelopeKind.ZERO,
                   scale=0.0, support=support)

    @classmethod
    def power(cls, cutoff: float, constant: float, exponent: float, scale: float = math.inf,
              support: Tuple[float, float] = (-math.inf, math.inf)) -> "TailEnvelope":
        return cls(cutoff=cutoff, constant=constant, exponent=exponent,
                   kind=EnvelopeKind.POWER, scale=scale, support=support)

    @property
    def integrable(self) -> bool:
        """Whether the envelope has a finite integral beyond the cutoff"""
        if self.kind == EnvelopeKind.POWER:
            return self.exponent > 1 or self.constant == 0
        return True

    def unbounded_sides(self) -> int:
        return int(self.support[0] == -math.inf) + int(self.support[1] == math.inf)

    def value(self, t) -> np.ndarray:
        """Envelope value at |t| (vectorized)"""
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == EnvelopeKind.ZERO:
            return np.zeros_like(t)
        with np.errstate(divide='ignore', over='ignore'):
            if self.kind == EnvelopeKind.POWER:
                raw = self.constant / np.power(t, self.exponent)
            elif self.kind == EnvelopeKind.EXPONENTIAL:
                raw = self.constant * np.exp(-self.exponent * t)
            else:
                raw = np.full_like(t, self.scale)
        return np.minimum(raw, self.scale)

    def mass_beyond(self, t: float) -> float:
        """Bound on the integral of the tail profile over |x| >= t"""
        if self.kind == EnvelopeKind.MONOTONE and self.mass_profile is not None:
            return float(self.mass_profile(t))
        if self.kind == EnvelopeKind.MONOTONE:
            if t <= 0:
                return 1.0
            return min(1.0, self.constant / t ** self.exponent)
        return self.unbounded_sides() * self.side_integral(t)

    def side_integral(self, t: float, p: float = 1.0) -> float:
        """Bound on the integral of |g|^p over one unbounded side beyond |x| = t"""
        t = max(abs(t), self.cutoff)
        if self.kind == EnvelopeKind.ZERO or self.constant == 0:
            return 0.0
        if self.kind == EnvelopeKind.POWER:
            q = p * self.exponent
            if q <= 1:
                return math.inf
            if t == 0:
                # the cap keeps the envelope bounded near the origin
                return math.inf if not math.isfinite(self.scale) else \
                    self.scale ** p + self.constant ** p / (q - 1)
            return self.constant ** p * t ** (1 - q) / (q - 1)
        if self.kind == EnvelopeKind.EXPONENTIAL:
            return self.constant ** p * math.exp(-p * self.exponent * t) / (p * self.exponent)
        # MONOTONE: |g|^p <= scale^(p-1) |g|
        return self.scale ** (p - 1) * self.mass_beyond(t)

    def convolution_power(self, k: int) -> Optional["TailEnvelope"]:
        """Pointwise bound on f_k from this pointwise bound on f.

        Some summand of S_k = x has |X_j| >= |x|/k, so
        f_k(x) <= k sup_{|y| >= |x|/k} f(y). MONOTONE envelopes carry no
        pointwise form and give None.
        """
        support = (k * self.support[0], k * self.support[1])
        if self.kind == EnvelopeKind.ZERO:
            return TailEnvelope.zero(support)
        if self.kind == EnvelopeKind.POWER:
            return TailEnvelope.power(cutoff=k * self.cutoff,
                                      constant=self.constant * k ** (self.exponent + 1),
                                      exponent=self.exponent, scale=k * self.scale, support=support)
        if self.kind == EnvelopeKind.EXPONENTIAL:
            return TailEnvelope(cutoff=k * self.cutoff, constant=k * self.constant,
                                exponent=self.exponent / k, kind=EnvelopeKind.EXPONENTIAL,
                                scale=k * self.scale, support=support)
        return None

    def weighted(self, eps: float) -> Optional["TailEnvelope"]:
        """Pointwise bound on (1 + |x|^eps) g(x) beyond the cutoff"""
        if self.kind == EnvelopeKind.ZERO:
            return self
        if self.kind == EnvelopeKind.POWER:
            # 1 + |x|^eps <= 2 |x|^eps for |x| >= 1
            return TailEnvelope.power(cutoff=max(1.0, self.cutoff), constant=2 * self.constant,
                                      exponent=self.exponent - eps, support=self.support)
        if self.kind == EnvelopeKind.EXPONENTIAL:
            # sup_x x^eps exp(-r x / 2) = (2 eps / (r e))^eps
            peak = (2 * eps / (self.exponent * math.e)) ** eps
            return TailEnvelope(cutoff=self.cutoff, constant=self.constant * (1 + peak),
                                exponent=self.exponent / 2, kind=EnvelopeKind.EXPONENTIAL,
                                support=self.support)
        return None

    def to_dict(self) -> Dict:
        return {
            'cutoff': self.cutoff,
            'constant': self.constant,
            'exponent': self.exponent,
            'kind': self.kind.value,
            'scale': self.scale,
            'support': list(self.support),
            'integrable': self.integrable,
        }


@dataclass(frozen=True)
class GridFunction:
    """Samples origin + i*spacing, i = 0..N-1, plus an optional tail envelope"""
    origin: float
    spacing: float
    values: np.ndarray
    envelope: Optional[TailEnvelope] = None
    nonnegative: bool = True
    label: str = ""
    mass: float = field(init=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.spacing <= 0:
            raise ValueError(f"Grid spacing must be positive, got {self.spacing}")
        if values.ndim != 1 or values.size == 0:
            raise ValueError("Grid values must be a non-empty 1-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("Grid values must be finite")
        if self.nonnegative and np.any(values < 0):
            # round-off from spectral kernels
            if values.min() < -1e-9 * max(1.0, np.abs(values).max()):
                raise ValueError("Non-negative grid function has negative samples")
            values = np.clip(values, 0.0, None)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mass', float(integrate.trapezoid(values, dx=self.spacing)))

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.size)

    @property
    def window(self) -> Tuple[float, float]:
        return self.origin, self.origin + self.spacing * (self.size - 1)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray, envelope: Optional[TailEnvelope] = None,
                    label: Optional[str] = None, nonnegative: Optional[bool] = None) -> "GridFunction":
        return GridFunction(origin=self.origin, spacing=self.spacing, values=values,
                            envelope=envelope,
                            nonnegative=self.nonnegative if nonnegative is None else nonnegative,
                            label=self.label if label is None else label)

    def with_envelope(self, envelope: Optional[TailEnvelope]) -> "GridFunction":
        return replace(self, envelope=envelope)

    def evaluate(self, x) -> np.ndarray:
        """Linear interpolation inside the window, envelope value outside"""
        x = np.asarray(x, dtype=float)
        lo, hi = self.window
        inside = np.interp(x, self.x, self.values)
        outside = np.zeros_like(x)
        if self.envelope is not None:
            env = self.envelope
            in_support = (x >= env.support[0]) & (x <= env.support[1])
            outside = np.where(in_support, env.value(x), 0.0)
        return np.where((x >= lo) & (x <= hi), inside, outside)

    def restrict(self, lo: float, hi: float) -> "GridFunction":
        """Sub-grid on [lo, hi], envelope dropped"""
        i0 = max(0, int(math.ceil((lo - self.origin) / self.spacing - 1e-9)))
        i1 = min(self.size - 1, int(math.floor((hi - self.origin) / self.spacing + 1e-9)))
        return GridFunction(origin=self.origin + i0 * self.spacing, spacing=self.spacing,
                            values=self.values[i0:i1 + 1], nonnegative=self.nonnegative,
                            label=self.label)

    def positive_part(self) -> "GridFunction":
        return GridFunction(self.origin, self.spacing, np.clip(self.values, 0, None),
                            envelope=self.envelope, nonnegative=True, label=f"{self.label}+")

    def negative_part(self) -> "GridFunction":
        return GridFunction(self.origin, self.spacing, np.clip(-self.values, 0, None),
                            envelope=self.envelope, nonnegative=True, label=f"{self.label}-")

    def check_envelope_domination(self) -> bool:
        """Every sample beyond the cutoff lies under the envelope"""
        if self.envelope is None:
            return True
        beyond = np.abs(self.x) >= self.envelope.cutoff
        if not np.any(beyond):
            return True
        bound = self.envelope.value(self.x[beyond])
        return bool(np.all(np.abs(self.values[beyond]) <= bound * (1 + 1e-12) + 1e-300))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'x': self.x, 'value': self.values})

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, header=False, float_format='%.17g')


def certify_window(g: GridFunction) -> None:
    """Raise when the window leaves part of the support without an envelope"""
    env = g.envelope
    if env is None:
        return
    lo, hi = g.window
    left_ok = lo <= env.support[0] or lo <= -env.cutoff
    right_ok = hi >= env.support[1] or hi >= env.cutoff
    if not (left_ok and right_ok):
        raise UncertifiedTruncationError(
            f"Window [{lo}, {hi}] does not reach envelope cutoff {env.cutoff}")


def lp_norm(g: GridFunction, p: float = 1.0) -> float:
    """L^p norm: trapezoid on the window plus the closed-form envelope tail.

    ``p = math.inf`` gives the sup norm. Returns ``math.inf`` when the
    envelope of |g|^p is not integrable.
    """
    if math.isinf(p):
        env_sup = 0.0
        if g.envelope is not None:
            lo, hi = g.window
            env_sup = float(np.max(g.envelope.value(np.array([lo, hi]))))
        return max(g.sup, env_sup)
    grid_part = float(integrate.trapezoid(np.abs(g.values) ** p, dx=g.spacing))
    tail = 0.0
    if g.envelope is not None:
        tail = envelope_tail_integral(g, p)
    if math.isinf(tail):
        return math.inf
    return (grid_part + tail) ** (1.0 / p)


def envelope_tail_integral(g: GridFunction, p: float = 1.0) -> float:
    """Integral of the envelope^p over the parts of the support outside the window"""
    env = g.envelope
    if env is None:
        return 0.0
    lo, hi = g.window
    total = 0.0
    if hi < env.support[1]:
        total += env.side_integral(hi, p)
    if lo > env.support[0]:
        total += env.side_integral(lo, p)
    return total


def block_sup(g: GridFunction, left: float, delta: float) -> float:
    """Max of g over samples in [left, left + delta), envelope value beyond the window"""
    samples, outside_edges = _block_samples(g, left, delta)
    best = float(np.max(samples)) if samples.size else 0.0
    env = g.envelope
    if env is not None:
        for edge in outside_edges:
            if left + delta > env.support[0] and left < env.support[1]:
                best = max(best, float(env.value(edge)))
    return best


def block_inf(g: GridFunction, left: float, delta: float) -> float:
    """Min of g over samples in [left, left + delta); 0 for blocks reaching beyond the window"""
    samples, outside_edges = _block_samples(g, left, delta)
    if samples.size == 0:
        return 0.0
    if outside_edges:
        return min(0.0, float(samples.min()))
    return float(samples.min())


def check_mesh(g: GridFunction, delta: float) -> None:
    if delta < MIN_SAMPLES_PER_BLOCK * g.spacing * (1 - 1e-12):
        raise MeshTooFineError(
            f"mesh too fine for grid: delta={delta} < {MIN_SAMPLES_PER_BLOCK} * h={g.spacing}")


def _block_samples(g: GridFunction, left: float, delta: float):
    """Samples inside the block and the window edges the block crosses"""
    check_mesh(g, delta)
    right = left + delta
    lo, hi = g.window
    x = g.x
    tol = 1e-12 * delta
    samples = g.values[(x >= left - tol) & (x < right - tol)]
    edges = []
    if left < lo:
        edges.append(min(right, lo))
    if right > hi:
        edges.append(max(left, hi))
    return samples, edges


def fit_tail_exponent(g: GridFunction, outer_fraction: float = 0.3,
                      min_r2: float = 0.9) -> Tuple[Optional[float], float]:
    """Least-squares log-log slope over the outer part of each side of the window.

    Returns (exponent, r2); the exponent is the least negative slope over the
    two sides, or None when no side yields a fit with r2 >= min_r2.
    """
    lo, hi = g.window
    x = g.x
    slopes = []
    best_r2 = 0.0
    for side in (1, -1):
        edge = hi if side == 1 else -lo
        if edge <= 0:
            continue
        start = (1 - outer_fraction) * edge
        mask = (side * x >= start) & (side * x > 0) & (g.values > 0)
        if np.count_nonzero(mask) < 8:
            continue
        fit = stats.linregress(np.log(side * x[mask]), np.log(g.values[mask]))
        r2 = fit.rvalue ** 2
        best_r2 = max(best_r2, r2)
        if r2 >= min_r2:
            slopes.append(float(fit.slope))
    if not slopes:
        return None, best_r2
    return max(slopes), best_r2
