"""
Two-body orbit propagation for the attitude forcing terms.

The epoch sits at perigee unless told otherwise.  The reference orbital rate
is the mean motion, n0 = -2*pi/T = -sqrt(mu/a^3), so the drift rate delta_n = n - n0 has zero
mean over one revolution and vanishes identically on circular orbits.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import settings
from .errors import ConvergenceError, InvalidParameterError, UnsupportedOrbitError

logger = logging.getLogger(__name__)

KEPLER_TOL = 1e-15
NEWTON_MAX_ITER = 50
BISECTION_MAX_ITER = 200

ArrayLike = Union[float, np.ndarray]


class OrbitElements(BaseModel):
    """Keplerian elements; angles in radians."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., gt=0, description="Semi-major axis (m)")
    e: float = Field(0.0, ge=0, lt=1, description="Eccentricity")
    i: float = Field(0.0, ge=0, le=math.pi, description="Inclination (rad)")
    argp: float = Field(0.0, description="Argument of perigee (rad)")
    mu: float = Field(settings.MU_EARTH, gt=0, description="Gravitational parameter (m^3/s^2)")
    t0_at_perigee: bool = Field(True, description="Epoch at perigee (else at apogee)")


class OrbitConfig(BaseModel):
    """Orbit block of a configuration file; angles in degrees."""

    a: float = Field(..., gt=0, description="Semi-major axis (m)")
    e: float = Field(0.0, ge=0, description="Eccentricity")
    i_deg: float = Field(0.0, ge=0, le=180, description="Inclination (deg)")
    argp_deg: float = Field(0.0, description="Argument of perigee (deg)")
    mu: float = Field(settings.MU_EARTH, gt=0, description="Gravitational parameter (m^3/s^2)")
    t0_at_perigee: bool = True

    @field_validator("e")
    @classmethod
    def validate_eccentricity(cls, v: float) -> float:
        if v >= 1:
            raise ValueError("Only closed orbits (e < 1) are supported")
        return v

    def to_elements(self) -> OrbitElements:
        return OrbitElements(
            a=self.a,
            e=self.e,
            i=math.radians(self.i_deg),
            argp=math.radians(self.argp_deg),
            mu=self.mu,
            t0_at_perigee=self.t0_at_perigee,
        )


@dataclass(frozen=True)
class OrbitState:
    t: float
    E: float
    nu: float
    R: float
    V_theta: float
    n: float
    delta_n: float
    R_Zp: float


@dataclass(frozen=True)
class OrbitSchedule:
    """Orbit quantities sampled on a time grid (arrays share one length)."""

    t: np.ndarray
    E: np.ndarray
    nu: np.ndarray
    R: np.ndarray
    V_theta: np.ndarray
    n: np.ndarray
    delta_n: np.ndarray
    R_Zp: np.ndarray

    def state(self, k: int) -> OrbitState:
        return OrbitState(
            t=float(self.t[k]),
            E=float(self.E[k]),
            nu=float(self.nu[k]),
            R=float(self.R[k]),
            V_theta=float(self.V_theta[k]),
            n=float(self.n[k]),
            delta_n=float(self.delta_n[k]),
            R_Zp=float(self.R_Zp[k]),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.t,
                "R": self.R,
                "V_theta": self.V_theta,
                "n": self.n,
                "delta_n": self.delta_n,
                "R_Zp": self.R_Zp,
            }
        )


def solve_kepler(M: ArrayLike, e: float) -> ArrayLike:
    """
    Solve E - e*sin(E) = M for the eccentric anomaly.

    Newton iteration seeded with E = M on the anomaly reduced to [0, 2*pi);
    entries still off after the iteration cap are bisected on [M - e, M + e].
    Accepts scalars or arrays and returns the same kind.
    """
    if not 0 <= e < 1:
        raise UnsupportedOrbitError(f"Eccentricity must satisfy 0 <= e < 1, got {e}")
    M_arr = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M_arr)):
        raise InvalidParameterError("Mean anomaly must be finite")

    turns = np.floor(M_arr / (2 * math.pi))
    M_red = M_arr - turns * 2 * math.pi

    E = M_red.copy()
    for iteration in range(NEWTON_MAX_ITER):
        step = (E - e * np.sin(E) - M_red) / (1.0 - e * np.cos(E))
        E = E - step
        if np.all(np.abs(step) <= KEPLER_TOL * np.maximum(1.0, np.abs(E))):
            logger.debug("Kepler Newton converged in %d iterations", iteration + 1)
            break

    residual = np.abs(E - e * np.sin(E) - M_red)
    stuck = residual > 1e-13
    if np.any(stuck):
        logger.warning("Kepler Newton stalled on %d samples, bisecting", int(stuck.sum()))
        E = np.where(stuck, _bisect_kepler(M_red, e), E)
        if np.any(np.abs(E - e * np.sin(E) - M_red) > 1e-12):
            raise ConvergenceError("Kepler equation did not converge")

    E = E + turns * 2 * math.pi
    if np.ndim(M) == 0:
        return float(E)
    return E


def _bisect_kepler(M: np.ndarray, e: float) -> np.ndarray:
    lo = M - e
    hi = M + e
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        above = mid - e * np.sin(mid) - M > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def orbital_period(elements: OrbitElements) -> float:
    return 2 * math.pi * math.sqrt(elements.a**3 / elements.mu)


def semi_major_axis_for_period(period: float, mu: float = settings.MU_EARTH) -> float:
    """Invert Kepler's third law."""
    if period <= 0:
        raise InvalidParameterError("Orbital period must be positive")
    return (mu * (period / (2 * math.pi)) ** 2) ** (1.0 / 3.0)


def propagate_many(elements: OrbitElements, times: np.ndarray) -> OrbitSchedule:
    """Vectorised form of propagate over a time array."""
    t = np.asarray(times, dtype=float)
    a, e, mu = elements.a, elements.e, elements.mu
    period = orbital_period(elements)

    M = 2 * math.pi * t / period
    if not elements.t0_at_perigee:
        M = M + math.pi
    E = np.asarray(solve_kepler(M, e), dtype=float)

    nu = 2.0 * np.arctan2(
        math.sqrt(1 + e) * np.sin(E / 2), math.sqrt(1 - e) * np.cos(E / 2)
    )
    ratio = 1 - e * np.cos(E)
    R = a * ratio
    # n = -h/R^2 written against the mean motion so e = 0 cancels exactly
    mean_motion = math.sqrt(mu / a**3)
    n = -mean_motion * math.sqrt(1 - e**2) / ratio**2
    V_theta = -n * R
    delta_n = n + mean_motion
    R_Zp = R * math.sin(elements.i) * np.sin(elements.argp + nu)

    return OrbitSchedule(
        t=t, E=E, nu=nu, R=R, V_theta=V_theta, n=n, delta_n=delta_n, R_Zp=R_Zp
    )


def propagate(elements: OrbitElements, t: float) -> OrbitState:
    """Orbit state at time t (s) after the epoch."""
    if not math.isfinite(t):
        raise InvalidParameterError("Propagation time must be finite")
    return propagate_many(elements, np.array([t])).state(0)


def gg_scale(state: Union[OrbitState, OrbitSchedule], R0: float) -> ArrayLike:
    """Return (R0/R)^3, the multiplier on the reference gravity-gradient elements."""
    if R0 <= 0:
        raise InvalidParameterError("Reference radius must be positive")
    return (R0 / state.R) ** 3


def orbit_schedule(elements: OrbitElements, t_end: float, dt: float) -> pd.DataFrame:
    """Tabulate t, R, V_theta, n, delta_n, R_Zp on [0, t_end] with step dt."""
    if dt <= 0 or t_end < 0:
        raise InvalidParameterError("Schedule needs dt > 0 and t_end >= 0")
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    return propagate_many(elements, times).to_frame()
