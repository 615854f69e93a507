"""
Process-wide defaults for the dual-spin toolkit.

Tunable values can be overridden through DUALSPIN_* environment variables.
"""

import os

LOG_LEVEL = os.environ.get("DUALSPIN_LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Integration steps (s) for short (500 s) and ten-orbit runs
DEFAULT_DT_SHORT = float(os.environ.get("DUALSPIN_DT_SHORT", "0.01"))
DEFAULT_DT_LONG = float(os.environ.get("DUALSPIN_DT_LONG", "0.1"))

# Root-locus gain grid density
LOCUS_POINTS_PER_DECADE = int(os.environ.get("DUALSPIN_LOCUS_POINTS_PER_DECADE", "400"))

SWEEP_WORKERS = int(os.environ.get("DUALSPIN_SWEEP_WORKERS", "1"))

# Standard gravitational parameter of the Earth (m^3/s^2)
MU_EARTH = 3.986004418e14

# Pointing budget (deg), N-S and E-W
POINTING_BUDGET_DEG = 0.047
