"""Module to store all constants used in the project.
"""

from os import getenv
from pathlib import Path


ROOT_PATH = Path(__file__).parent.parent
COSTS_PATH = ROOT_PATH / "data/costs"

LOG_LEVEL: str = getenv("BS_SCL_LOG_LEVEL", "WARNING").upper()

# --------------------------------------------------------------------- #
#                          RESOURCE CEILINGS                            #
# --------------------------------------------------------------------- #
MAX_DV: int = 64
MAX_CUTS: int = int(getenv("BS_SCL_MAX_CUTS", "2000000"))
AUTO_BLOCK_CUTS: int = 4_000
MAX_WINDING_STATES: int = 60_000
MAX_PIECE_CANDIDATES: int = 500_000
# columns added to the piece LP per pricing round
MAX_NEW_COLUMNS: int = 32
MAX_PIVOTS: int = int(getenv("BS_SCL_MAX_PIVOTS", "200000"))

# consecutive degenerate pivots tolerated before falling back to Bland's rule
DEGENERATE_PIVOT_SWITCH: int = 50

# --------------------------------------------------------------------- #
#                              DEFAULTS                                 #
# --------------------------------------------------------------------- #
DEFAULT_SOLVER: str = "auto"
SOLVER_TAGS: tuple[str, ...] = ("auto", "block", "winding", "pieces")
DEFAULT_SETUP: int = 1
DEFAULT_MAX_TURNS: int = 4
MAX_TURNS_CAP: int = 16
DEFAULT_POWER_BOUND: int = 6
SOLVE_CACHE_SIZE: int = 256
SWEEP_WORKERS: int = 1
