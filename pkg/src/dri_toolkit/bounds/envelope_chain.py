"""
Numerical run of the d.R.i. argument for convolution powers.

Feller's seed bound gives h_bar_1 = D g_1(|x|/2). The map

    (Phi_n h)(x) = 2 * int_{|z| > (|x| - 3)/2} f_n(z) h(x - z) dz

then produces h_bar_(j+1) = Phi_(2^j)(h_bar_j), which bounds the unit-block
suprema of f_(2^(j+1)). Once some h_bar_n has a finite eps-weighted integral,
the weighted upper Riemann sum of f_(2^n) is finite.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from ..convolution.convolution_power import (ConvolutionPower, convolve, convolve_power,
                                             grid_tail)
from ..convolution.fourier import boundedness_index
from ..density.catalog import DensityKind, DensitySpec
from ..grid.discretize import DEFAULT_MAX_POINTS, grid_points, grown_window
from ..grid.grid_function import (EnvelopeKind, GridFunction, TailEnvelope, block_sup,
                                  certify_window, fit_tail_exponent, lp_norm)
from ..riemann.riemann_sums import upper_sum
from ..utils.errors import ConfigError, DegenerateConstantError, UncertifiedTruncationError
from ..utils.helpers import chunk_list, worker_count
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

B_GRID_STEP = 0.01
B_DEFLATION = 0.99
B_TOLERANCE = 1e-12
DEFAULT_A_GRID = tuple(np.arange(-5.0, 5.0 + 1e-9, 0.25))
CHUNK_ELEMENTS = 4_000_000

HEval = Callable[[np.ndarray], np.ndarray]


@dataclass
class EnvelopeChain:
    """Constants and envelopes h_bar_1..h_bar_n of one chain run"""
    spec: DensitySpec
    eps: Optional[float]
    C: float
    D: float
    B: float
    k0: int
    sup_f: float
    h_bars: List[GridFunction]
    l1_norms: List[float]
    tail_exponents: List[Optional[float]]
    window: Tuple[float, float]
    spacing: float
    truncation: List[float] = field(default_factory=list)
    exploration: bool = False
    notes: List[str] = field(default_factory=list)
    h_evals: List[HEval] = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return len(self.h_bars)

    def h_bar(self, j: int) -> GridFunction:
        """h_bar_j, 1-indexed"""
        return self.h_bars[j - 1]

    def power(self, n: int, eps: Optional[float] = None) -> ConvolutionPower:
        """n-fold power of the chain base, i.e. f_(k0 n) of the input density"""
        return convolve_power(self.spec, self.k0 * n, self.window, self.spacing,
                              eps=self.eps if eps is None else eps, grow=False)

    @property
    def regularizing(self) -> bool:
        """Fitted tail exponents never get less negative along the chain"""
        known = [e for e in self.tail_exponents if e is not None]
        return all(b <= a + 1e-2 for a, b in zip(known, known[1:]))

    def first_integrable(self, eps: float = 0.0) -> Optional[int]:
        """Smallest j with int (1 + |w|^eps) h_bar_j finite"""
        for j in range(1, self.n + 1):
            if math.isfinite(weighted_integral(self.h_bar(j), eps)):
                return j
        return None

    def to_dict(self) -> Dict:
        return {
            'density': self.spec.describe(),
            'eps': self.eps,
            'C': self.C,
            'D': self.D,
            'B': self.B,
            'k0': self.k0,
            'sup_f': self.sup_f,
            'l1_norms': self.l1_norms,
            'tail_exponents': self.tail_exponents,
            'phi_truncation': self.truncation,
            'regularizing': self.regularizing,
            'exploration': self.exploration,
            'notes': self.notes,
        }


def weight_oscillation_constant(eps: float) -> float:
    """c_eps = sup_a max(1+|z|^eps) / min(1+|z|^eps) over z in [a-1, a+2]"""
    def ratio(a: float) -> float:
        z_far = max(abs(a - 1), abs(a + 2))
        z_near = 0.0 if a - 1 <= 0 <= a + 2 else min(abs(a - 1), abs(a + 2))
        return (1 + z_far ** eps) / (1 + z_near ** eps)

    scan = np.arange(-8.0, 8.0 + 1e-9, 0.25)
    best = scan[int(np.argmax([ratio(a) for a in scan]))]
    res = optimize.minimize_scalar(lambda a: -ratio(a), bounds=(best - 0.25, best + 0.25),
                                   method='bounded')
    return float(max(ratio(best), -res.fun))


def _weights(g: GridFunction) -> np.ndarray:
    w = np.full(g.size, g.spacing)
    w[0] = w[-1] = g.spacing / 2
    return w


def _restricted_sum(x: np.ndarray, h_eval: HEval, f_n: GridFunction, power: float = 1.0,
                    threads: Optional[int] = None) -> np.ndarray:
    """int_{|z| > (|x|-3)/2} f_n(z) h(x - z)^power dz by trapezoid weights on the f_n grid"""
    keep = f_n.values > 0
    z = f_n.x[keep]
    wf = (_weights(f_n) * f_n.values)[keep]
    out = np.zeros(x.size)
    if z.size == 0:
        return out
    rows = max(1, CHUNK_ELEMENTS // z.size)
    chunks = chunk_list(list(range(x.size)), rows)

    def work(idx: List[int]) -> None:
        xc = x[idx]
        mask = np.abs(z)[None, :] > (np.abs(xc)[:, None] - 3) / 2
        vals = np.asarray(h_eval(xc[:, None] - z[None, :]), dtype=float)
        if power != 1.0:
            vals = np.abs(vals) ** power
        out[idx] = np.sum(np.where(mask, vals * wf[None, :], 0.0), axis=1)

    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        list(pool.map(work, chunks))
    return out


def phi_apply(n: int, h: GridFunction, f_n, h_eval: Optional[HEval] = None,
              x: Optional[np.ndarray] = None, threads: Optional[int] = None) -> GridFunction:
    """(Phi_n h) on the grid of h (or on ``x`` when given, which must be uniform)"""
    grid = f_n.grid if isinstance(f_n, ConvolutionPower) else f_n
    h_eval = h_eval or h.evaluate
    if x is None:
        x = h.x
        origin, spacing = h.origin, h.spacing
    else:
        x = np.asarray(x, dtype=float)
        origin, spacing = float(x[0]), float(x[1] - x[0]) if x.size > 1 else h.spacing
    values = 2.0 * _restricted_sum(x, h_eval, grid, threads=threads)
    return GridFunction(origin=origin, spacing=spacing, values=values, label=f"phi_{n}")


def phi_upper_bound(n: int, h: GridFunction, f_n, phi: Optional[GridFunction] = None,
                    h_eval: Optional[HEval] = None, rtol: float = 1e-2, atol: float = 1e-6) -> Dict:
    """Phi_n h against the unrestricted 2 (f_n * h), computed spectrally"""
    grid = f_n.grid if isinstance(f_n, ConvolutionPower) else f_n
    h_eval = h_eval or h.evaluate
    phi = phi or phi_apply(n, h, grid, h_eval)
    lo, hi = h.window
    x = grid_points((lo, hi), grid.spacing)
    resampled = GridFunction(origin=float(x[0]), spacing=grid.spacing,
                             values=np.maximum(h_eval(x), 0.0), label="h")
    full = convolve(grid, resampled)
    bound = 2.0 * full.evaluate(phi.x)
    excess = phi.values - bound
    violations = int(np.count_nonzero(excess > rtol * bound + atol))
    return {'passed': violations == 0, 'violations': violations,
            'max_excess': float(np.max(excess))}


def _window_integrals(h_eval: HEval, a_grid: np.ndarray, step: float = 1e-2) -> np.ndarray:
    """int_{a-1}^{a+2} h for every a, by trapezoid on a fine grid"""
    w = np.arange(a_grid.min() - 1, a_grid.max() + 2 + step / 2, step)
    cum = integrate.cumulative_trapezoid(np.asarray(h_eval(w), dtype=float), w, initial=0.0)
    return np.interp(a_grid + 2, w, cum) - np.interp(a_grid - 1, w, cum)


def _block_sups(g: GridFunction, a_grid: np.ndarray) -> np.ndarray:
    return np.array([block_sup(g, a, 1.0) for a in a_grid])


def block_bound_check(l: int, h: GridFunction, f_l, f_2l, a_grid: Sequence[float] = DEFAULT_A_GRID,
                      h_eval: Optional[HEval] = None, phi: Optional[GridFunction] = None,
                      hypothesis_scale: float = 1.0, slack: float = 1e-6) -> Dict:
    """Block lemma on an a-grid: the hypothesis for f_l is checked before the conclusion for f_2l"""
    grid_l = f_l.grid if isinstance(f_l, ConvolutionPower) else f_l
    grid_2l = f_2l.grid if isinstance(f_2l, ConvolutionPower) else f_2l
    a = np.asarray(a_grid, dtype=float)
    h_eval = h_eval or h.evaluate

    hyp_lhs = _block_sups(grid_l, a)
    hyp_rhs = hypothesis_scale * _window_integrals(h_eval, a)
    hypothesis_ok = bool(np.all(hyp_lhs <= hyp_rhs + slack))
    report = {'l': l, 'hypothesis_passed': hypothesis_ok, 'conclusion_passed': None,
              'hypothesis_violation': not hypothesis_ok}
    if not hypothesis_ok:
        bad = a[hyp_lhs > hyp_rhs + slack]
        logger.warning(f"Block lemma hypothesis fails at {bad.size} values of a; conclusion not asserted")
        return report

    phi = phi or phi_apply(l, h, grid_l, h_eval)
    con_lhs = _block_sups(grid_2l, a)
    con_rhs = _window_integrals(phi.evaluate, a, step=min(1e-2, phi.spacing))
    report['conclusion_passed'] = bool(np.all(con_lhs <= con_rhs + slack))
    report['min_margin'] = float(np.min(con_rhs - con_lhs))
    return report


def _fitted_envelope(g: GridFunction) -> TailEnvelope:
    """Power-law bound beyond the window from the fitted outer decay"""
    lo, hi = g.window
    reach = max(abs(lo), abs(hi))
    outer = np.abs(g.x) >= 0.7 * reach
    vals = g.values[outer]
    if not np.any(vals > 0):
        return TailEnvelope.zero((lo, hi))
    exponent, _ = fit_tail_exponent(g)
    scale = float(vals.max())
    if exponent is None or exponent >= 0:
        return TailEnvelope.power(cutoff=min(abs(lo), abs(hi)), constant=scale, exponent=0.0,
                                  scale=scale)
    e = -exponent
    constant = float(np.max(vals * np.abs(g.x[outer]) ** e))
    return TailEnvelope.power(cutoff=min(abs(lo), abs(hi)), constant=constant, exponent=e,
                              scale=scale)


def weighted_integral(g: GridFunction, eps: float) -> float:
    """int (1 + |w|^eps) g(w) dw, window plus envelope tail"""
    grid = float(integrate.trapezoid((1 + np.abs(g.x) ** eps) * g.values, dx=g.spacing))
    env = g.envelope
    if env is None or env.constant == 0:
        return grid
    lo, hi = g.window
    tail = 0.0
    for edge in (lo, hi):
        t = abs(edge)
        if env.kind == EnvelopeKind.POWER:
            if env.exponent <= 1 + eps:
                return math.inf
            tail += 2 * env.constant * t ** (1 + eps - env.exponent) / (env.exponent - 1 - eps)
        else:
            tail += 2 * env.side_integral(t) * (1 + t ** eps)
    return grid + tail


def _base_tail_l1(spec: DensitySpec, k0: int) -> float:
    """int_0^inf g_1(t) dt = E|X| for the chain base, bounded through k0 g(t/k0) when k0 > 1"""
    if spec.kind == DensityKind.LOG_COUNTEREXAMPLE:
        return math.inf
    return k0 * k0 * spec.moment_eps(1.0)


def build_envelope_chain(spec: DensitySpec, n_max: int = 6,
                         window: Tuple[float, float] = (-64.0, 64.0), spacing: float = 0.01,
                         chain_window: Tuple[float, float] = (-512.0, 512.0),
                         chain_spacing: float = 0.5, eps: Optional[float] = None,
                         k0: Optional[int] = None, exploration: bool = False,
                         max_points: int = DEFAULT_MAX_POINTS,
                         threads: Optional[int] = None) -> EnvelopeChain:
    """Seed constants B and D, then h_bar_1..h_bar_n_max"""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    eps = eps if eps is not None else spec.epsilon
    notes = []
    if eps is None:
        if not exploration:
            raise ConfigError(f"{spec.kind.value} has no finite eps-moment; use exploration mode")
        C = math.inf
        notes.append("exploration mode: moment assumption fails, nothing asserted")
    else:
        C = spec.moment_eps(eps)

    if k0 is None:
        k0 = boundedness_index(spec, window, spacing, max_points=max_points)['k0']
    if k0 == 1:
        sup_f = spec.sup_norm
        g1: HEval = lambda t: np.asarray(spec.tail(t), dtype=float)
    else:
        base = convolve_power(spec, k0, window, spacing, max_points, eps=eps, grow=False)
        sup_f = base.grid.sup
        if eps is not None:
            C = k0 ** eps * k0 * C
        g1 = base.tail_mass_bound
        notes.append(f"unbounded density: chain runs on f_{k0}")

    # B: infimum over a in [-2, 1] of int_{a-1}^{a+2} 2 sup_f g_1(|w|/2) dw
    a = np.arange(-2.0, 1.0 + B_GRID_STEP / 2, B_GRID_STEP)
    seed_profile = lambda w: 2 * sup_f * g1(np.abs(w) / 2)
    B = B_DEFLATION * float(np.min(_window_integrals(seed_profile, a, step=1e-3)))
    if B <= B_TOLERANCE:
        raise DegenerateConstantError(f"seed constant B={B:.3g} is not positive")
    D = 2 * sup_f * max(1.0, sup_f / B)
    logger.info(f"Envelope chain for {spec.kind.value}: B={B:.6g}, D={D:.6g}, k0={k0}")

    x = grid_points(chain_window, chain_spacing, max_points)
    h1_eval: HEval = lambda t: D * g1(np.abs(t) / 2)
    h1 = GridFunction(origin=float(x[0]), spacing=chain_spacing, values=h1_eval(x), label="h_bar_1")
    h1 = h1.with_envelope(_fitted_envelope(h1))
    h_bars = [h1]
    h_evals = [h1_eval]
    l1 = [4 * D * _base_tail_l1(spec, k0)]
    truncation = [0.0]

    for j in range(1, n_max):
        n = 2 ** j
        f_n = convolve_power(spec, k0 * n, window, spacing, max_points, eps=eps, grow=False)
        nxt = phi_apply(n, h_bars[-1], f_n, h_evals[-1], threads=threads)
        nxt = GridFunction(origin=nxt.origin, spacing=nxt.spacing, values=nxt.values,
                           label=f"h_bar_{j + 1}")
        nxt = nxt.with_envelope(_fitted_envelope(nxt))
        h_bars.append(nxt)
        h_evals.append(nxt.evaluate)
        l1.append(lp_norm(nxt, 1.0))
        h_sup = lp_norm(h_bars[-2], math.inf)
        truncation.append(2 * h_sup * f_n.omitted_mass)
        logger.debug(f"h_bar_{j + 1}: L1 {l1[-1]:.6g}, omitted mass bound {truncation[-1]:.3g}")

    exponents = [fit_tail_exponent(h)[0] for h in h_bars]
    chain = EnvelopeChain(spec=spec, eps=eps, C=C, D=D, B=B, k0=k0, sup_f=sup_f, h_bars=h_bars,
                          l1_norms=l1, tail_exponents=exponents, window=window, spacing=spacing,
                          truncation=truncation, exploration=exploration, notes=notes,
                          h_evals=h_evals)
    if not chain.regularizing and not exploration:
        chain.notes.append("fitted tail exponents not monotone along the chain")
    return chain


def feller_bound_check(spec: DensitySpec, k: int, window: Tuple[float, float], spacing: float,
                       slack: float = 1e-6) -> Dict:
    """f_2k(x) <= 2 sup f_k g_k(|x|/2) on the grid of f_2k, up to O(h) quadrature slack"""
    window = grown_window(spec, 2 * k, window, spacing)
    fk = convolve_power(spec, k, window, spacing, grow=False)
    f2k = convolve_power(spec, 2 * k, window, spacing, grow=False)
    x = f2k.grid.x
    if k == 1:
        sup_k = spec.sup_norm if math.isfinite(spec.sup_norm) else fk.grid.sup
        g_k = np.asarray(spec.tail(np.abs(x) / 2), dtype=float)
    else:
        sup_k = fk.grid.sup
        g_k = grid_tail(fk.grid, np.abs(x) / 2)
    rhs = 2 * sup_k * g_k
    lhs = f2k.grid.values
    tol = slack + 2 * spacing * sup_k
    bad = lhs > rhs + tol
    return {'passed': not bool(np.any(bad)), 'violations': int(np.count_nonzero(bad)),
            'max_ratio': float(np.max(lhs / np.maximum(rhs, 1e-300))),
            'x': x, 'lhs': lhs, 'rhs': rhs}


def seed_validity_check(chain: EnvelopeChain, a_grid: Sequence[float] = DEFAULT_A_GRID,
                        slack: float = 1e-6) -> Dict:
    """sup_{[a,a+1)} f_2 <= D int_{a-1}^{a+2} g_1(|w|/2) dw for every a on the grid"""
    a = np.asarray(a_grid, dtype=float)
    f2 = chain.power(2).grid
    lhs = _block_sups(f2, a)
    rhs = _window_integrals(chain.h_evals[0], a, step=1e-3)
    return {'passed': bool(np.all(lhs <= rhs + slack)),
            'min_margin': float(np.min(rhs - lhs))}


def weighted_upper_sum(power: ConvolutionPower, eps: float, delta: float = 1.0) -> float:
    """S_delta(0) of (1 + |x|^eps) f_k over the whole line.

    The part beyond the grid window comes from the weighted pointwise
    envelope of f_k; math.inf when that envelope is not integrable.
    """
    weighted = power.weighted_grid(eps)
    if weighted.envelope is None:
        raise UncertifiedTruncationError(
            f"f_{power.k} has no pointwise tail envelope; the weighted sum beyond "
            f"{weighted.window} is not certified")
    certify_window(weighted)
    return upper_sum(weighted, delta)


def weighted_sum_check(chain: EnvelopeChain, k: Optional[int] = None,
                       eps: Optional[float] = None) -> Dict:
    """Direct weighted upper sum of f_k against 3 c_eps^2 int (1+|w|^eps) h_bar_n, k = 2^n"""
    eps = chain.eps if eps is None else eps
    if k is None:
        n = chain.first_integrable(eps)
        if n is None:
            return {'finite': False, 'k': None, 'eps': eps,
                    'diagnostic': f"no h_bar up to n={chain.n} has a finite weighted integral"}
        k = 2 ** n
    n = int(round(math.log2(k)))
    if 2 ** n != k or not 1 <= n <= chain.n:
        raise ValueError(f"k={k} must be 2^n with 1 <= n <= {chain.n}")

    try:
        direct = weighted_upper_sum(chain.power(k, eps=eps or None), eps)
    except UncertifiedTruncationError as e:
        return {'finite': False, 'k': k, 'n': n, 'eps': eps, 'passed': None, 'diagnostic': str(e)}
    if math.isinf(direct):
        return {'finite': False, 'k': k, 'n': n, 'eps': eps, 'passed': None, 'direct': direct,
                'diagnostic': f"weighted tail envelope of f_{k} is not integrable"}
    c_eps = weight_oscillation_constant(eps)
    integral = weighted_integral(chain.h_bar(n), eps)
    bound = 3 * c_eps ** 2 * integral

    alternative = None
    if n >= 2 and math.isfinite(chain.l1_norms[n - 2]) and math.isfinite(chain.C):
        half = 2 ** (n - 1)
        moment = half ** eps * half * chain.C if eps > 0 else 1.0
        alternative = 2 * chain.l1_norms[n - 2] * ((1 + 6 ** eps) + 4 ** eps * moment)

    report = {'k': k, 'n': n, 'eps': eps, 'direct': direct, 'bound': bound, 'c_eps': c_eps,
              'alternative_bound': alternative, 'finite': math.isfinite(bound)}
    if not math.isfinite(bound):
        report['diagnostic'] = f"weighted integral of h_bar_{n} diverges"
        report['passed'] = None
    else:
        report['passed'] = bool(direct <= bound * (1 + 1e-9))
    return report


def bootstrap_check(spec: DensitySpec, k: int, eps: float, window: Tuple[float, float],
                    spacing: float) -> Dict:
    """S^(g_(k+1))_1(0) <= 3 2^eps (1 + C) S^(g_k)_1(0) with g_k = (1 + |x|^eps) f_k"""
    C = 1.0 if eps == 0 else spec.moment_eps(eps)
    factor = 3 * 2 ** eps * (1 + C)
    sums = []
    for m in (k, k + 1):
        power = convolve_power(spec, m, window, spacing, eps=eps or None, grow=False)
        try:
            sums.append(weighted_upper_sum(power, eps))
        except UncertifiedTruncationError as e:
            return {'passed': None, 'factor': factor, 'diagnostic': str(e)}
    if not math.isfinite(sums[0]):
        return {'passed': None, 'factor': factor, 'lhs': sums[1], 'rhs': math.inf,
                'diagnostic': f"weighted sum of f_{k} is not finite"}
    return {'passed': bool(sums[1] <= factor * sums[0] * (1 + 1e-9)), 'factor': factor,
            'lhs': sums[1], 'rhs': factor * sums[0]}


def jensen_check(n: int, h: GridFunction, f_n, x_points: Sequence[float], p: float = 2.0,
                 h_eval: Optional[HEval] = None) -> Dict:
    """|Phi_n h(x)|^p <= 2^p int_{restricted} f_n(z) |h(x - z)|^p dz at the given points"""
    grid = f_n.grid if isinstance(f_n, ConvolutionPower) else f_n
    h_eval = h_eval or h.evaluate
    x = np.asarray(x_points, dtype=float)
    lhs = (2 * _restricted_sum(x, h_eval, grid)) ** p
    rhs = 2 ** p * _restricted_sum(x, h_eval, grid, power=p)
    mass = float(np.sum(_weights(grid) * grid.values))
    # the quadrature mass may exceed 1 by round-off
    rhs = rhs * max(1.0, mass) ** (p - 1)
    return {'passed': bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-300)),
            'max_ratio': float(np.max(lhs / np.maximum(rhs, 1e-300)))}


def integrability_gate(k: int, eps: float, C: float, p: float) -> float:
    """int g_k(|w|/3 - 1)^p dw under g_k(t) <= min{1, k^(1+eps) C / t^eps}; infinite iff p eps <= 1"""
    if p * eps <= 1:
        return math.inf
    K = k ** (1 + eps) * C
    t0 = K ** (1 / eps)
    return 6 + 6 * t0 * p * eps / (p * eps - 1)


def holder_bound(n: int, h: GridFunction, f_n: ConvolutionPower, p: float, eps: float, C: float,
                 h_eval: Optional[HEval] = None) -> Dict:
    """||Phi_n h||_p^p against the Holder split with gamma = eps / 2"""
    gamma = eps / 2
    phi = phi_apply(n, h, f_n, h_eval)
    lhs = lp_norm(phi, p) ** p
    h_part = lp_norm(h, p / (1 - gamma)) ** (p / (1 - gamma))
    gate = integrability_gate(f_n.k, eps, C, 1 / gamma)
    rhs = 2 ** p * h_part ** (1 - gamma) * gate ** gamma
    return {'passed': bool(lhs <= rhs), 'lhs': lhs, 'rhs': rhs, 'gamma': gamma}
