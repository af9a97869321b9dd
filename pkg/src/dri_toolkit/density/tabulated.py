import json
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..grid.grid_function import GridFunction, TailEnvelope
from ..utils.errors import ConfigError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

SPACING_RTOL = 1e-9


def read_tabulated_csv(file_path: str, envelope: Optional[TailEnvelope] = None) -> GridFunction:
    """Read a two-column (x, f(x)) CSV on a uniform grid; header optional"""
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"Tabulated density not found: {file_path}")

    try:
        frame = pd.read_csv(path, header=None, comment='#')
        # drop a textual header row if present
        frame = frame.apply(pd.to_numeric, errors='coerce').dropna().reset_index(drop=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Error parsing tabulated CSV: {e}")

    if frame.shape[1] != 2 or len(frame) < 2:
        raise ConfigError(f"Tabulated CSV must have two numeric columns and >= 2 rows: {file_path}")

    x = frame.iloc[:, 0].to_numpy(dtype=float)
    values = frame.iloc[:, 1].to_numpy(dtype=float)
    steps = np.diff(x)
    spacing = float(steps.mean())
    if spacing <= 0 or np.max(np.abs(steps - spacing)) > SPACING_RTOL * abs(spacing) * max(1.0, len(x)):
        raise ConfigError(f"Tabulated grid is not uniform within {SPACING_RTOL} relative")
    if np.any(values < 0):
        raise ConfigError("Tabulated density has negative values")

    if envelope is None:
        sidecar = path.with_suffix('.envelope.json')
        if sidecar.exists():
            envelope = read_envelope_sidecar(str(sidecar))

    logger.info(f"Loaded tabulated density {path.name}: {len(x)} samples, h={spacing:.6g}")
    return GridFunction(origin=float(x[0]), spacing=spacing, values=values,
                        envelope=envelope, label=path.stem)


def read_envelope_sidecar(file_path: str) -> TailEnvelope:
    """Envelope parameters {cutoff, constant, exponent} stored next to a CSV"""
    try:
        with open(file_path, 'r') as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Error parsing envelope sidecar: {e}")
    return TailEnvelope.power(cutoff=float(data['cutoff']), constant=float(data['constant']),
                              exponent=float(data['exponent']),
                              scale=float(data.get('scale', float('inf'))))


def write_envelope_sidecar(envelope: TailEnvelope, file_path: str) -> None:
    data = {'cutoff': envelope.cutoff, 'constant': envelope.constant,
            'exponent': envelope.exponent}
    with open(file_path, 'w') as file:
        json.dump(data, file, indent=2, sort_keys=True)
