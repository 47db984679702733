import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

# Load environment overrides (missing file is fine)
load_dotenv("config/rnls.env")

OUTPUT_DIR = os.getenv("RNLS_OUTPUT_DIR", "out")
LOG_LEVEL = os.getenv("RNLS_LOG_LEVEL", "INFO")
JOBS = int(os.getenv("RNLS_JOBS", "1"))

# Built-in defaults, lowest precedence
DEFAULTS: Dict[str, object] = {
    "d": 1,
    "k": 0,
    "p": 2.0,
    "beta": 1.0,
    "omega": 1.0,
    "dt": 1e-3,
    "T": 20.0,
    "seed": 0,
    "out": OUTPUT_DIR,
    "log_level": LOG_LEVEL,
    "jobs": JOBS,
}

DEFAULT_POINTS = {1: 2048, 2: 128, 3: 32}


def load_run_config(path: Optional[str]) -> Dict[str, str]:
    """Read a flat key=value config file; keys are normalized to flag names"""
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    values = dotenv_values(config_path)
    return {
        key.strip().lstrip("-").replace("-", "_"): value
        for key, value in values.items()
        if value is not None and value != ""
    }
