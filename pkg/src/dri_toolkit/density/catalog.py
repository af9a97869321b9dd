"""
Catalog of input densities with closed-form tails, moments and samplers.

Each entry wraps a frozen scipy.stats distribution; the logarithmic
counterexample 1/(x log^2 x) on [e, inf) is added as a custom
rv_continuous. Tabulated densities come from a two-column CSV
(see ``tabulated.py``).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import integrate, special, stats

from ..grid.grid_function import GridFunction
from ..utils.errors import ConfigError
from ..utils.logger import setup_logger
from .tabulated import read_tabulated_csv

logger = setup_logger(__name__)

QUAD_ABS_TOL = 1e-10
TABULATED_MASS_TOL = 1e-3


class DensityKind(Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    GAMMA = "gamma"
    PARETO = "pareto"
    LOG_COUNTEREXAMPLE = "log_counterexample"
    SQRT_SINGULAR = "sqrt_singular"
    GAUSSIAN = "gaussian"
    TABULATED = "tabulated"


class _LogCounterexampleGen(stats.rv_continuous):
    """Density 1/(x log^2 x) on [e, inf); tail 1/log x, no finite moment of any order"""

    def _pdf(self, x):
        return 1.0 / (x * np.log(x) ** 2)

    def _cdf(self, x):
        return 1.0 - 1.0 / np.log(x)

    def _sf(self, x):
        return 1.0 / np.log(x)

    def _ppf(self, q):
        return np.exp(1.0 / (1.0 - q))

    def _isf(self, q):
        return np.exp(1.0 / q)


log_counterexample = _LogCounterexampleGen(a=math.e, name='log_counterexample')


@dataclass(frozen=True)
class DensitySpec:
    """Analytic descriptor of a probability density and its declared moment order"""
    kind: DensityKind
    params: Dict[str, float] = field(default_factory=dict)
    epsilon: Optional[float] = None
    table: Optional[GridFunction] = field(default=None, compare=False)

    def __post_init__(self):
        p = self.params
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE and self.epsilon is not None:
            raise ConfigError("log_counterexample has no finite moment; epsilon must be absent")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.kind == DensityKind.PARETO:
            if p['alpha'] <= 0 or p['scale'] <= 0:
                raise ConfigError("pareto needs positive alpha and scale")
            if self.epsilon is not None and self.epsilon >= p['alpha']:
                raise ConfigError(
                    f"pareto epsilon {self.epsilon} must be below alpha {p['alpha']}")
        if self.kind == DensityKind.UNIFORM and p['b'] <= p['a']:
            raise ConfigError("uniform needs b > a")
        if self.kind in (DensityKind.EXPONENTIAL, DensityKind.GAMMA) and p['rate'] <= 0:
            raise ConfigError("rate must be positive")
        if self.kind == DensityKind.GAMMA and p['shape'] <= 0:
            raise ConfigError("gamma shape must be positive")
        if self.kind == DensityKind.GAUSSIAN and p['sd'] <= 0:
            raise ConfigError("gaussian sd must be positive")
        if self.kind == DensityKind.TABULATED:
            if self.table is None:
                raise ConfigError("tabulated density needs a table")
            drift = abs(self.table.mass - 1.0)
            if drift > TABULATED_MASS_TOL:
                raise ConfigError(f"tabulated density mass deviates from 1 by {drift:.3g}")
            if drift > 0:
                logger.info(f"Tabulated density used as-is, mass deviation {drift:.3g}")

    # -- factories -------------------------------------------------------

    @classmethod
    def exponential(cls, rate: float = 1.0, epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.EXPONENTIAL, {'rate': rate}, epsilon)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.UNIFORM, {'a': a, 'b': b}, epsilon)

    @classmethod
    def gamma(cls, shape: float, rate: float = 1.0, epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.GAMMA, {'shape': shape, 'rate': rate}, epsilon)

    @classmethod
    def pareto(cls, alpha: float, scale: float = 1.0,
               epsilon: Optional[float] = None) -> "DensitySpec":
        if epsilon is None:
            epsilon = min(1.0, alpha / 2)
        return cls(DensityKind.PARETO, {'alpha': alpha, 'scale': scale}, epsilon)

    @classmethod
    def log_counterexample(cls) -> "DensitySpec":
        return cls(DensityKind.LOG_COUNTEREXAMPLE, {}, None)

    @classmethod
    def sqrt_singular(cls, epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.SQRT_SINGULAR, {}, epsilon)

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0,
                 epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.GAUSSIAN, {'mean': mean, 'sd': sd}, epsilon)

    @classmethod
    def tabulated(cls, table: GridFunction, epsilon: Optional[float] = 1.0) -> "DensitySpec":
        return cls(DensityKind.TABULATED, {}, epsilon, table)

    @classmethod
    def from_config(cls, descriptor: Dict[str, Any]) -> "DensitySpec":
        """Build from a config block {name, params, epsilon} or {csv, epsilon}"""
        epsilon = descriptor.get('epsilon', 'default')
        if descriptor.get('csv'):
            table = read_tabulated_csv(descriptor['csv'])
            return cls.tabulated(table, 1.0 if epsilon == 'default' else epsilon)
        name = str(descriptor.get('name', '')).lower()
        params = dict(descriptor.get('params') or {})
        factories = {
            'exponential': cls.exponential, 'uniform': cls.uniform, 'gamma': cls.gamma,
            'pareto': cls.pareto, 'sqrt_singular': cls.sqrt_singular,
            'gaussian': cls.gaussian,
        }
        if name == 'log_counterexample':
            return cls.log_counterexample()
        if name not in factories:
            raise ConfigError(f"Unknown density: {name!r}")
        try:
            if epsilon != 'default':
                params['epsilon'] = epsilon
            return factories[name](**params)
        except TypeError as e:
            raise ConfigError(f"Bad parameters for {name}: {e}")

    def describe(self) -> Dict[str, Any]:
        return {'name': self.kind.value, 'params': dict(self.params), 'epsilon': self.epsilon}

    # -- distribution backing --------------------------------------------

    @cached_property
    def dist(self):
        p = self.params
        if self.kind == DensityKind.EXPONENTIAL:
            return stats.expon(scale=1.0 / p['rate'])
        if self.kind == DensityKind.UNIFORM:
            return stats.uniform(loc=p['a'], scale=p['b'] - p['a'])
        if self.kind == DensityKind.GAMMA:
            return stats.gamma(p['shape'], scale=1.0 / p['rate'])
        if self.kind == DensityKind.PARETO:
            return stats.pareto(p['alpha'], scale=p['scale'])
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            return log_counterexample()
        if self.kind == DensityKind.SQRT_SINGULAR:
            return stats.beta(0.5, 1.0)
        if self.kind == DensityKind.GAUSSIAN:
            return stats.norm(loc=p['mean'], scale=p['sd'])
        return None

    @cached_property
    def _table_cdf(self) -> Tuple[np.ndarray, np.ndarray]:
        g = self.table
        cdf = integrate.cumulative_trapezoid(g.values, dx=g.spacing, initial=0.0)
        return g.x, cdf / cdf[-1]

    @property
    def support(self) -> Tuple[float, float]:
        if self.kind == DensityKind.TABULATED:
            return self.table.window
        lo, hi = self.dist.support()
        return float(lo), float(hi)

    @property
    def nonnegative_support(self) -> bool:
        return self.support[0] >= 0

    @property
    def mode(self) -> float:
        """Point beyond which the density is non-increasing in |x - mode|"""
        p = self.params
        if self.kind == DensityKind.GAMMA:
            return max(0.0, (p['shape'] - 1) / p['rate'])
        if self.kind == DensityKind.GAUSSIAN:
            return p['mean']
        if self.kind == DensityKind.TABULATED:
            return float(self.table.x[int(np.argmax(self.table.values))])
        return self.support[0] if math.isfinite(self.support[0]) else 0.0

    # -- the catalog operations --------------------------------------------

    def eval(self, x):
        """Density value(s); zero off-support"""
        x_arr = np.asarray(x, dtype=float)
        if self.kind == DensityKind.TABULATED:
            lo, hi = self.table.window
            out = np.where((x_arr >= lo) & (x_arr <= hi),
                           np.interp(x_arr, self.table.x, self.table.values), 0.0)
        elif self.kind == DensityKind.SQRT_SINGULAR:
            with np.errstate(divide='ignore'):
                out = np.where((x_arr > 0) & (x_arr <= 1), 0.5 / np.sqrt(np.abs(x_arr)), 0.0)
        else:
            out = self.dist.pdf(x_arr)
        return float(out) if np.ndim(out) == 0 else out

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        if self.kind == DensityKind.TABULATED:
            grid, cdf = self._table_cdf
            out = np.interp(x_arr, grid, cdf, left=0.0, right=1.0)
        else:
            out = self.dist.cdf(x_arr)
        return float(out) if np.ndim(out) == 0 else out

    def tail(self, t):
        """g_1(t) = mass of |x| >= t; equals 1 for t <= 0"""
        t_arr = np.asarray(t, dtype=float)
        pos = np.maximum(t_arr, 0.0)
        if self.kind == DensityKind.TABULATED:
            right = 1.0 - self.cdf(pos)
        else:
            right = self.dist.sf(pos)
        left = self.cdf(-pos) if self.support[0] < 0 else 0.0
        out = np.where(t_arr <= 0, 1.0, np.clip(right + left, 0.0, 1.0))
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sup_norm(self) -> float:
        """||f||_inf, infinite for unbounded densities"""
        p = self.params
        if self.kind == DensityKind.EXPONENTIAL:
            return p['rate']
        if self.kind == DensityKind.UNIFORM:
            return 1.0 / (p['b'] - p['a'])
        if self.kind == DensityKind.GAMMA:
            if p['shape'] < 1:
                return math.inf
            return float(self.dist.pdf(self.mode)) if p['shape'] > 1 else p['rate']
        if self.kind == DensityKind.PARETO:
            return p['alpha'] / p['scale']
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            return 1.0 / math.e
        if self.kind == DensityKind.SQRT_SINGULAR:
            return math.inf
        if self.kind == DensityKind.GAUSSIAN:
            return 1.0 / (p['sd'] * math.sqrt(2 * math.pi))
        return self.table.sup

    @property
    def mean(self) -> float:
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            return math.inf
        if self.kind == DensityKind.TABULATED:
            g = self.table
            return float(integrate.trapezoid(g.x * g.values, dx=g.spacing) / g.mass)
        return float(self.dist.mean())

    @property
    def variance(self) -> float:
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            return math.inf
        if self.kind == DensityKind.TABULATED:
            g = self.table
            m = self.mean
            return float(integrate.trapezoid((g.x - m) ** 2 * g.values, dx=g.spacing) / g.mass)
        return float(self.dist.var())

    def moment_eps(self, eps: float) -> float:
        """C = integral of |x|^eps f; math.inf when it diverges"""
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        p = self.params
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            return math.inf
        if self.kind == DensityKind.PARETO:
            if eps >= p['alpha']:
                return math.inf
            return p['alpha'] * p['scale'] ** eps / (p['alpha'] - eps)
        if self.kind == DensityKind.EXPONENTIAL:
            return special.gamma(1 + eps) / p['rate'] ** eps
        if self.kind == DensityKind.GAMMA:
            return special.gamma(p['shape'] + eps) / (special.gamma(p['shape']) * p['rate'] ** eps)
        if self.kind == DensityKind.UNIFORM:
            a, b = p['a'], p['b']
            prim = lambda x: math.copysign(abs(x) ** (eps + 1), x) / (eps + 1)
            return (prim(b) - prim(a)) / (b - a)
        if self.kind == DensityKind.SQRT_SINGULAR:
            return 1.0 / (2 * eps + 1)
        if self.kind == DensityKind.TABULATED:
            g = self.table
            return float(integrate.trapezoid(np.abs(g.x) ** eps * g.values, dx=g.spacing))
        return self.moment_eps_via_tail(eps)

    def moment_eps_via_tail(self, eps: float) -> float:
        """Moment through eps * int_0^inf P(|X| > t) t^(eps-1) dt, substituting u = t^eps"""
        integrand = lambda u: self.tail(u ** (1.0 / eps)) if u > 0 else 1.0
        value, _ = integrate.quad(integrand, 0, np.inf, epsabs=QUAD_ABS_TOL, limit=500)
        return float(value)

    def moment_eps_direct(self, eps: float) -> float:
        """Moment by adaptive quadrature of |x|^eps f over the support"""
        lo, hi = self.support
        integrand = lambda x: abs(x) ** eps * self.eval(x)
        points = [pt for pt in (0.0, self.mode) if lo < pt < hi] or None
        if math.isfinite(lo) and math.isfinite(hi):
            value, _ = integrate.quad(integrand, lo, hi, epsabs=QUAD_ABS_TOL, points=points, limit=500)
            return float(value)
        total = 0.0
        split = self.mode if lo < self.mode < hi else (lo if math.isfinite(lo) else 0.0)
        for a, b in ((lo, split), (split, hi)):
            if a < b:
                total += integrate.quad(integrand, a, b, epsabs=QUAD_ABS_TOL, limit=500)[0]
        return float(total)

    def truncated_mean(self, x: float) -> float:
        """m(x) = int_0^x P(X > y) dy for densities on [0, inf)"""
        if not self.nonnegative_support:
            raise ValueError("truncated_mean needs a density supported on [0, inf)")
        if x <= 0:
            return 0.0
        p = self.params
        if self.kind == DensityKind.EXPONENTIAL:
            return -math.expm1(-p['rate'] * x) / p['rate']
        if self.kind == DensityKind.UNIFORM:
            a, b = p['a'], p['b']
            if x <= a:
                return x
            if x >= b:
                return (a + b) / 2
            return a + ((b - a) ** 2 - (b - x) ** 2) / (2 * (b - a))
        if self.kind == DensityKind.PARETO:
            alpha, s = p['alpha'], p['scale']
            if x <= s:
                return x
            if alpha == 1:
                return s + s * math.log(x / s)
            return s + s ** alpha * (x ** (1 - alpha) - s ** (1 - alpha)) / (1 - alpha)
        if self.kind == DensityKind.LOG_COUNTEREXAMPLE:
            if x <= math.e:
                return x
            return math.e + float(special.expi(math.log(x)) - special.expi(1.0))
        value, _ = integrate.quad(lambda y: float(self.tail(y)), 0, x,
                                  epsabs=QUAD_ABS_TOL, limit=500)
        return float(value)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n draws by inverse-CDF transform of rng uniforms"""
        u = rng.random(n)
        if self.kind == DensityKind.TABULATED:
            grid, cdf = self._table_cdf
            keep = np.concatenate(([True], np.diff(cdf) > 0))
            return np.interp(u, cdf[keep], grid[keep])
        return np.asarray(self.dist.ppf(u), dtype=float)
