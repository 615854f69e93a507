"""Time-response figures of merit: settling, envelopes, periods, pointing budget."""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import settings
from .errors import InputError

logger = logging.getLogger(__name__)


class AnalysisConfig(BaseModel):
    """Analysis block of a configuration file."""

    column: str = Field("theta_s_deg", description="Result column to analyse")
    band: Optional[float] = Field(
        None, gt=0, description="Absolute settling band; default is band_fraction of the peak"
    )
    band_fraction: float = Field(0.05, gt=0, lt=1, description="Settling band as a fraction of peak |y|")
    window: Optional[Tuple[float, float]] = Field(
        None, description="Envelope window [t_a, t_b] (s); default is the whole trace"
    )
    budget_deg: float = Field(settings.POINTING_BUDGET_DEG, gt=0, description="Pointing budget (deg)")

    @field_validator("window")
    @classmethod
    def validate_window(cls, v: Optional[Tuple[float, float]]) -> Optional[Tuple[float, float]]:
        if v is not None and v[0] > v[1]:
            raise ValueError("Window start must not exceed its end")
        return v


class BudgetVerdict(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    limit_deg: float
    passed: bool = Field(..., alias="pass")
    margin_deg: float


class ResponseMetrics(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    column: str
    settling_time_s: Optional[float]
    peak_deg: float
    envelope_deg: Tuple[float, float]
    dominant_period_s: Optional[float]
    budget: BudgetVerdict

    def report(self) -> dict:
        return self.model_dump(by_alias=True)


def _as_series(t: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size == 0 or y.size == 0:
        raise InputError("Series is empty")
    if t.shape != y.shape:
        raise InputError(f"Time and value arrays differ in length ({t.size} vs {y.size})")
    return t, y


def settling_time(t: np.ndarray, y: np.ndarray, band: float) -> Optional[float]:
    """
    Earliest sample time after which |y| stays within band.

    Returns None when the last sample is still outside the band.
    """
    t, y = _as_series(t, y)
    if band <= 0:
        raise InputError("Settling band must be positive")
    outside = np.flatnonzero(np.abs(y) > band)
    if outside.size == 0:
        return float(t[0])
    last = outside[-1]
    if last == y.size - 1:
        logger.warning("Trace never settles within band %g", band)
        return None
    return float(t[last + 1])


def envelope(
    t: np.ndarray, y: np.ndarray, window: Optional[Tuple[float, float]] = None
) -> Tuple[float, float]:
    t, y = _as_series(t, y)
    if window is not None:
        inside = (t >= window[0]) & (t <= window[1])
        y = y[inside]
        if y.size == 0:
            raise InputError(f"No samples inside window [{window[0]:g}, {window[1]:g}]")
    return float(np.min(y)), float(np.max(y))


def dominant_period(t: np.ndarray, y: np.ndarray) -> Optional[float]:
    """Twice the mean spacing of zero crossings of the mean-removed signal."""
    t, y = _as_series(t, y)
    centred = y - np.mean(y)
    sign = np.signbit(centred)
    idx = np.flatnonzero(sign[:-1] != sign[1:])
    if idx.size < 4:
        return None
    # linear interpolation of each crossing instant
    y0, y1 = centred[idx], centred[idx + 1]
    frac = np.where(y1 != y0, y0 / (y0 - y1), 0.0)
    crossings = t[idx] + frac * (t[idx + 1] - t[idx])
    return float(2.0 * np.mean(np.diff(crossings)))


def pointing_check(y_deg: np.ndarray, budget_deg: float = settings.POINTING_BUDGET_DEG) -> BudgetVerdict:
    if budget_deg <= 0:
        raise InputError("Pointing budget must be positive")
    y = np.asarray(y_deg, dtype=float)
    worst = float(np.max(np.abs(y))) if y.size else 0.0
    margin = budget_deg - worst
    return BudgetVerdict(limit_deg=budget_deg, passed=margin >= 0, margin_deg=margin)


def analyze_series(
    t: np.ndarray, y: np.ndarray, config: Optional[AnalysisConfig] = None
) -> ResponseMetrics:
    config = config or AnalysisConfig()
    t, y = _as_series(t, y)
    peak = float(np.max(np.abs(y)))
    band = config.band if config.band is not None else config.band_fraction * peak
    settling = float(t[0]) if band == 0 else settling_time(t, y, band)
    return ResponseMetrics(
        column=config.column,
        settling_time_s=settling,
        peak_deg=peak,
        envelope_deg=envelope(t, y, config.window),
        dominant_period_s=dominant_period(t, y),
        budget=pointing_check(y, config.budget_deg),
    )
