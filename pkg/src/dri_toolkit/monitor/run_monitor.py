import platform
import time
from datetime import datetime
from typing import Dict, List, Optional

import psutil

from ..utils.logger import setup_logger


class RunMonitor:
    """Track command runs, timings and host resources for metadata.json"""

    def __init__(self, config: Optional[Dict] = None):
        self.config = config or {}
        self.logger = setup_logger(__name__)
        self.started_at: Optional[datetime] = None
        self._t0: Optional[float] = None
        self.metrics = {
            'run_count': 0,
            'success_count': 0,
            'failure_count': 0,
            'total_processing_time': 0.0,
            'last_run': None,
            'errors': []
        }

    def start(self) -> None:
        self.started_at = datetime.now()
        self._t0 = time.perf_counter()

    def elapsed(self) -> float:
        return 0.0 if self._t0 is None else time.perf_counter() - self._t0

    def record_success(self, command: str, processing_time: Optional[float] = None):
        """Record a completed command"""
        self.metrics['run_count'] += 1
        self.metrics['success_count'] += 1
        self.metrics['last_run'] = datetime.now()
        if processing_time:
            self.metrics['total_processing_time'] += processing_time
        self.logger.info(f"Command {command} completed in {processing_time or 0.0:.2f}s")

    def record_failure(self, command: str, error_message: str, processing_time: Optional[float] = None):
        """Record a failed command"""
        self.metrics['run_count'] += 1
        self.metrics['failure_count'] += 1
        self.metrics['last_run'] = datetime.now()
        if processing_time:
            self.metrics['total_processing_time'] += processing_time

        self.metrics['errors'].append({
            'timestamp': datetime.now(),
            'command': command,
            'message': error_message,
        })
        # Keep only last 100 errors
        if len(self.metrics['errors']) > 100:
            self.metrics['errors'] = self.metrics['errors'][-100:]

        self.logger.error(f"Command {command} failed: {error_message}")

    def system_snapshot(self) -> Dict:
        """Host resources at the time of the call"""
        try:
            memory = psutil.virtual_memory()
            process = psutil.Process()
            return {
                'cpu_count_logical': psutil.cpu_count(logical=True),
                'cpu_count_physical': psutil.cpu_count(logical=False),
                'memory_total_gb': round(memory.total / (1024 ** 3), 2),
                'memory_available_gb': round(memory.available / (1024 ** 3), 2),
                'process_rss_mb': round(process.memory_info().rss / (1024 ** 2), 2),
                'platform': platform.platform(),
                'python': platform.python_version(),
            }
        except Exception as e:
            self.logger.error(f"Error reading system resources: {e}")
            return {'error': str(e)}

    def metadata(self, command: str, version: str, seed: Optional[int] = None,
                 threads: Optional[int] = None) -> Dict:
        """Non-reproducible run details, kept out of the report files"""
        finished = datetime.now()
        return {
            'command': command,
            'version': version,
            'seed': seed,
            'threads': threads,
            'started_at': self.started_at.isoformat() if self.started_at else None,
            'finished_at': finished.isoformat(),
            'elapsed_seconds': round(self.elapsed(), 4),
            'system': self.system_snapshot(),
            'recent_errors': [
                {**e, 'timestamp': e['timestamp'].isoformat()} for e in self.metrics['errors'][-5:]
            ],
        }

    def summary(self) -> Dict:
        runs = self.metrics['run_count']
        return {
            'total_runs': runs,
            'successful_runs': self.metrics['success_count'],
            'failed_runs': self.metrics['failure_count'],
            'average_processing_time': round(self.metrics['total_processing_time'] / runs, 4) if runs else 0.0,
        }
