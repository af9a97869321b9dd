"""
d.R.i. renewal toolkit
Numerical diagnostics for direct Riemann integrability of convolution powers
and the renewal theorems that rest on it.
"""

__version__ = "1.0.0"

from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .bounds.envelope_chain import build_envelope_chain, weighted_sum_check
from .convolution.convolution_power import convolve_power, tail_bound_check
from .convolution.fourier import fourier_norms
from .convolution.local_clt import local_clt_error
from .density.catalog import DensityKind, DensitySpec
from .grid.discretize import discretize
from .grid.grid_function import GridFunction
from .monitor.run_monitor import RunMonitor
from .renewal.renewal_series import density_defect, heavy_tail_check, renewal_density
from .renewal.simulator import simulate_renewal_window
from .reporting.report_writer import ReportWriter
from .riemann.riemann_sums import Verdict, dri_verdict, dri_verdict_signed, gap_convergence_order
from .utils.logger import setup_logger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2
EXIT_DIVERGES = 3

VERDICT_EXIT = {
    Verdict.DRI_VERIFIED: EXIT_OK,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    Verdict.UPPER_SUM_DIVERGES: EXIT_DIVERGES,
}

COMMANDS = ('dri-check', 'conv-power', 'envelope-chain', 'renewal', 'heavy-tail', 'local-clt', 'simulate')

CommandOutput = Tuple[Dict, Dict[str, Union[pd.DataFrame, GridFunction]], int]


class ExperimentRunner:
    """Run one command against a resolved configuration and persist its reports"""

    def __init__(self, config: Dict, threads: Optional[int] = None, seed: Optional[int] = None):
        self.config = config
        self.threads = threads
        self.seed = seed
        self.monitor = RunMonitor(config)
        self.logger = setup_logger(__name__)
        self._handlers: Dict[str, Callable[[], CommandOutput]] = {
            'dri-check': self._dri_check,
            'conv-power': self._conv_power,
            'envelope-chain': self._envelope_chain,
            'renewal': self._renewal,
            'heavy-tail': self._heavy_tail,
            'local-clt': self._local_clt,
            'simulate': self._simulate,
        }

    def run(self, command: Optional[str] = None, out_dir: Optional[str] = None) -> Tuple[int, Dict]:
        """Execute ``command`` and write report.json, CSV tables and metadata.json"""
        command = command or self.config.get('command', 'dri-check')
        if command not in self._handlers:
            raise ValueError(f"Unknown command: {command}")
        output = self.config.get('output', {})
        writer = ReportWriter(out_dir or output.get('directory', 'output'),
                              output.get('formats', ('json', 'csv')))

        self.monitor.start()
        self.logger.info(f"Starting {command}")
        try:
            results, frames, exit_code = self._handlers[command]()
        except Exception as e:
            self.monitor.record_failure(command, str(e), self.monitor.elapsed())
            writer.write_metadata(self.monitor.metadata(command, __version__, self.seed, self.threads))
            raise

        writer.write_report(command, self.config, results, __version__)
        for name, table in frames.items():
            if isinstance(table, GridFunction):
                writer.write_grid(name, table)
            else:
                writer.write_frame(name, table)
        self.monitor.record_success(command, self.monitor.elapsed())
        writer.write_metadata(self.monitor.metadata(command, __version__, self.seed, self.threads))
        return exit_code, results

    # -- helpers ---------------------------------------------------------

    def _spec(self) -> DensitySpec:
        return DensitySpec.from_config(self.config['density'])

    def _grid(self) -> Tuple[Tuple[float, float], float, int]:
        grid = self.config['grid']
        return tuple(grid['window']), float(grid['spacing']), int(grid['max_points'])

    # -- commands --------------------------------------------------------

    def _dri_check(self) -> CommandOutput:
        spec = self._spec()
        window, spacing, max_points = self._grid()
        g = spec.table if spec.kind == DensityKind.TABULATED else discretize(spec, window, spacing, max_points)
        cfg = self.config['riemann']
        if cfg.get('signed'):
            signed = dri_verdict_signed(g, cfg['ladder'], cfg['tolerance'], self.threads)
            report = signed['positive']
            verdict = signed['verdict']
            results = {'verdict': verdict.value, 'positive': signed['positive'].to_dict(),
                       'negative': signed['negative'].to_dict()}
        else:
            report = dri_verdict(g, cfg['ladder'], cfg['tolerance'], self.threads)
            verdict = report.verdict
            results = report.to_dict()
        results['gap_order'] = gap_convergence_order(report)
        print(f"   Verdict: {verdict.value}")
        return results, {'ladder.csv': report.to_frame()}, VERDICT_EXIT[verdict]

    def _conv_power(self) -> CommandOutput:
        spec = self._spec()
        window, spacing, max_points = self._grid()
        cfg = self.config['convolution']
        power = convolve_power(spec, int(cfg['k']), window, spacing, max_points)
        results = power.to_dict()
        t = np.linspace(0.0, max(abs(window[0]), abs(window[1])), int(cfg['t_points']))
        results['tail_bound'] = tail_bound_check(power, t) if power.envelope else None
        if cfg.get('fourier'):
            results['fourier'] = fourier_norms(power.grid, spec=spec if power.k == 1 else None)
        return results, {f"f_{power.k}.csv": power.grid}, EXIT_OK

    def _envelope_chain(self) -> CommandOutput:
        spec = self._spec()
        window, spacing, max_points = self._grid()
        cfg = self.config['chain']
        chain = build_envelope_chain(spec, n_max=int(cfg['n_max']), window=window, spacing=spacing,
                                     chain_window=tuple(cfg['window']), chain_spacing=float(cfg['spacing']),
                                     eps=cfg.get('eps'), exploration=bool(cfg.get('exploration')),
                                     max_points=max_points, threads=self.threads)
        results = chain.to_dict()
        exit_code = EXIT_OK
        if not chain.exploration:
            weighted = weighted_sum_check(chain, k=cfg.get('weighted_k'))
            results['weighted_sum'] = weighted
            if not weighted.get('finite'):
                exit_code = EXIT_INCONCLUSIVE
        frames = {f"h_bar_{j}.csv": h for j, h in enumerate(chain.h_bars, start=1)}
        return results, frames, exit_code

    def _renewal(self) -> CommandOutput:
        spec = self._spec()
        _, spacing, max_points = self._grid()
        cfg = self.config['renewal']
        series = renewal_density(spec, int(cfg['N']), (0.0, float(cfg['x_max'])), spacing,
                                 tol=float(cfg['tolerance']), max_points=max_points)
        defect = density_defect(series, int(cfg['defect_k']), float(cfg['far_fraction']))
        results = series.to_dict()
        results['defect'] = {k: v for k, v in defect.items() if k != 'grid'}
        frame = pd.DataFrame({'x': series.grid.x, 'u': series.grid.values,
                              'defect': defect['grid'].values})
        return results, {'u.csv': frame}, EXIT_OK

    def _heavy_tail(self) -> CommandOutput:
        spec = self._spec()
        _, spacing, _ = self._grid()
        cfg = self.config['heavy_tail']
        report = heavy_tail_check(spec, int(cfg['N']), cfg['x_points'], spacing,
                                  k_bar=cfg.get('k_bar'), rtol=float(cfg['tolerance']))
        frame = pd.DataFrame([{key: row.get(key) for key in ('x', 'm', 'defect', 'value')}
                              for row in report['points']])
        inconclusive = any(row['inconclusive'] for row in report['points'])
        print(f"   Target 1/(Gamma(a)Gamma(2-a)) = {report['target']:.5f}")
        return report, {'heavy_tail.csv': frame}, EXIT_INCONCLUSIVE if inconclusive else EXIT_OK

    def _local_clt(self) -> CommandOutput:
        spec = self._spec()
        cfg = self.config['local_clt']
        window = tuple(cfg['window']) if cfg.get('window') else None
        report = local_clt_error(spec, cfg['n_list'], window=window, spacing=float(cfg['spacing']))
        frame = pd.DataFrame({'n': list(report['errors']), 'sup_error': list(report['errors'].values())})
        return report, {'local_clt.csv': frame}, EXIT_OK

    def _simulate(self) -> CommandOutput:
        spec = self._spec()
        cfg = self.config['simulation']
        seed = self.seed if self.seed is not None else int(cfg['seed'])
        estimate = simulate_renewal_window(spec, float(cfg['x']), float(cfg['delta']),
                                           int(cfg['paths']), seed, self.threads)
        results = {'estimate': estimate.to_dict()}
        if cfg.get('compare_series'):
            _, spacing, max_points = self._grid()
            rcfg = self.config['renewal']
            x_max = max(float(rcfg['x_max']), estimate.x + estimate.delta)
            series = renewal_density(spec, int(rcfg['N']), (0.0, x_max), spacing,
                                     tol=float(rcfg['tolerance']), max_points=max_points)
            lo, hi = series.window_mass(estimate.x, estimate.delta)
            a, b = estimate.interval
            results['series_band'] = [lo, hi]
            results['agrees'] = bool(lo <= b and hi >= a)
        frame = pd.DataFrame([{k: v for k, v in estimate.to_dict().items() if k != 'interval'}])
        return results, {'simulation.csv': frame}, EXIT_OK


__all__ = ["ExperimentRunner", "COMMANDS", "__version__"]
