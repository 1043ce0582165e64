"""
Runtime configuration for zomd.
Defaults come from the environment (optionally a .env file) and can be
overridden by an experiment config file and by command-line flags.
"""
import os
from pathlib import Path
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

load_dotenv()

DEFAULT_SEED = int(os.getenv("ZOMD_SEED", "0"))
DEFAULT_REPS = int(os.getenv("ZOMD_REPS", "50"))
DEFAULT_THREADS = int(os.getenv("ZOMD_THREADS", str(os.cpu_count() or 1)))
MC_SAMPLES = int(os.getenv("ZOMD_MC_SAMPLES", "100000"))
LOG_LEVEL = os.getenv("ZOMD_LOG_LEVEL", "INFO")
DEFAULT_OUT = os.getenv("ZOMD_OUT", "results.csv")

# Radius of the neighborhood of the simplex on which every fixture keeps its constants
MU0 = float(os.getenv("ZOMD_MU0", "1.0"))

# Finite-difference step for the gradient of the smoothed function
FD_STEP = 1e-4

# Stream ids: problem construction is shared by all replications of an experiment
PROBLEM_STREAM = 0
RUN_STREAM = 1


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Read a key=value experiment file.

    Keys are normalized to argparse destinations (dashes become underscores).
    Returns an empty dict when no path is given.
    """
    if not path:
        return {}
    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {
        key.strip().lstrip("-").replace("-", "_"): value
        for key, value in values.items()
        if value is not None
    }
