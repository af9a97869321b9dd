import logging
import os
import sys
from pathlib import Path
from typing import Optional

DEFAULT_LEVEL_ENV = "DRI_LOG_LEVEL"


def setup_logger(name: str, level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """Setup and configure logger"""
    logger = logging.getLogger(name)

    # Avoid adding handlers multiple times
    if logger.handlers:
        return logger

    level = level or os.environ.get(DEFAULT_LEVEL_ENV, "INFO")
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def set_log_level(level: str, prefix: str = "dri_toolkit") -> None:
    """Apply a level to every logger already created under ``prefix``; DRI_LOG_LEVEL wins"""
    level = os.environ.get(DEFAULT_LEVEL_ENV, level)
    value = getattr(logging, str(level).upper(), logging.INFO)
    for name in list(logging.root.manager.loggerDict):
        if name == prefix or name.startswith(prefix + "."):
            logging.getLogger(name).setLevel(value)
