import json
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from ..grid.grid_function import GridFunction
from ..utils.helpers import to_jsonable
from ..utils.logger import setup_logger

CSV_FLOAT_FORMAT = '%.17g'


class ReportWriter:
    """Deterministic JSON reports and CSV tables under one output directory.

    Everything that varies between identical runs (timestamps, host details)
    goes to metadata.json, so report.json is byte-identical for a fixed seed.
    """

    def __init__(self, out_dir: str, formats=('json', 'csv')):
        self.out_dir = Path(out_dir)
        self.formats = set(formats)
        self.logger = setup_logger(__name__)
        self.written = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_json(self, name: str, payload: Dict[str, Any]) -> Optional[Path]:
        if 'json' not in self.formats and name != 'metadata.json':
            return None
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(to_jsonable(payload), f, sort_keys=True, indent=2, allow_nan=False)
            f.write('\n')
        self.written.append(str(path))
        self.logger.debug(f"Wrote {path}")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Optional[Path]:
        if 'csv' not in self.formats:
            return None
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
        self.written.append(str(path))
        self.logger.debug(f"Wrote {path} ({len(frame)} rows)")
        return path

    def write_grid(self, name: str, grid: GridFunction, column: str = 'value') -> Optional[Path]:
        frame = grid.to_frame().rename(columns={'value': column})
        return self.write_frame(name, frame)

    def write_report(self, command: str, config: Dict[str, Any], results: Dict[str, Any],
                     version: str) -> Optional[Path]:
        """report.json with the resolved config echoed next to the results"""
        return self.write_json('report.json', {
            'command': command,
            'version': version,
            'config': config,
            'results': results,
        })

    def write_metadata(self, metadata: Dict[str, Any]) -> Path:
        return self.write_json('metadata.json', metadata)
