"""
Stability-axes attitude model of a prolate dual-spin satellite.

State order is [p, q, r, phi_s, theta_s, psi_s] (rad/s for the rates, rad for
the angles) and input order is [delta_e, delta_n]: the de-spin motor armature
voltage and the orbital drift rate.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import (
    InvalidParameterError,
    ShapeError,
    SingularConfigurationError,
    StructureError,
)

logger = logging.getLogger(__name__)

STATE_NAMES = ("p", "q", "r", "phi_s", "theta_s", "psi_s")
INPUT_NAMES = ("delta_e", "delta_n")
N_STATES = 6
N_INPUTS = 2

# Row indices (0-based) of the kinematic equations
PHI_ROW, THETA_ROW, PSI_ROW = 3, 4, 5

# Entries of rows 1-3 that the model allows to be nonzero
DYNAMIC_SLOTS = {
    0: (2, 3),
    1: (0, 1, 2, 4),
    2: (0, 1, 2, 4),
}

# (row, column) of A_14, A_25, A_35
GRAVITY_SLOTS = ((0, 3), (1, 4), (2, 4))


# Parameter models
class InertiaParameters(BaseModel):
    """Platform and rotor mass properties."""

    model_config = ConfigDict(frozen=True)

    I_X: float = Field(..., gt=0, description="Platform moment of inertia about X (kg*m^2)")
    I_Y: float = Field(..., gt=0, description="Platform moment of inertia about Y (kg*m^2)")
    I_Z: float = Field(..., gt=0, description="Platform moment of inertia about Z (kg*m^2)")
    I_YZ: float = Field(0.0, description="Platform product of inertia (kg*m^2)")
    I_T: float = Field(..., gt=0, description="Rotor transverse inertia (kg*m^2)")
    I_S: float = Field(..., gt=0, description="Rotor spin-axis inertia (kg*m^2)")
    Omega_R0: float = Field(..., description="Nominal rotor spin rate (rad/s)")

    @field_validator("*")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Inertia parameters must be finite")
        return v

    @model_validator(mode="after")
    def validate_delta_i(self) -> "InertiaParameters":
        if compute_delta_I(self) <= 0:
            raise ValueError("Delta_I = I_Y*I_Z + I_Y*I_T - I_YZ^2 must be positive")
        return self


class MotorParameters(BaseModel):
    """De-spin motor electrical constants."""

    model_config = ConfigDict(frozen=True)

    N: float = Field(..., ge=0, description="Motor torque constant (N*m/A)")
    K_V: float = Field(..., ge=0, description="Back-EMF constant (V*s/rad)")
    R_dc: float = Field(..., gt=0, description="Armature resistance (ohm)")
    c: float = Field(0.0, ge=0, description="Viscous damping coefficient (N*m*s/rad)")

    @field_validator("*")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Motor parameters must be finite")
        return v


class GravityGradientCoefficients(BaseModel):
    """Gravity-gradient moment coefficients at the reference radius (N*m/rad)."""

    model_config = ConfigDict(frozen=True)

    G_X: float = Field(0.0, description="Roll gravity-gradient coefficient")
    G_Y: float = Field(0.0, description="Pitch gravity-gradient coefficient")
    G_Z: float = Field(0.0, description="Yaw gravity-gradient coefficient")

    @field_validator("*")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Gravity-gradient coefficients must be finite")
        return v


class PhysicalPlantConfig(BaseModel):
    inertia: InertiaParameters
    motor: MotorParameters
    gravity_gradient: GravityGradientCoefficients = Field(
        default_factory=GravityGradientCoefficients
    )
    gg_enabled: bool = Field(True, description="Keep A_14, A_25 and A_35")
    delta_n0: float = Field(0.0, description="Kinematic drift entered in rows 4 and 6 (rad/s)")


class LiteralPlantConfig(BaseModel):
    A: List[List[float]] = Field(..., description="6x6 state matrix, row major")
    B: List[List[float]] = Field(..., description="6x2 input matrix, row major")


class PlantConfig(BaseModel):
    """Plant block of a configuration file: exactly one of literal or physical."""

    literal: Optional[LiteralPlantConfig] = None
    physical: Optional[PhysicalPlantConfig] = None
    accept_literal_row6: bool = Field(
        False, description="Keep a literal sixth row that breaks the kinematic pattern"
    )

    @model_validator(mode="after")
    def validate_source(self) -> "PlantConfig":
        if (self.literal is None) == (self.physical is None):
            raise ValueError("Plant config needs exactly one of 'literal' or 'physical'")
        return self


# Plant containers
@dataclass(frozen=True)
class PlantMatrices:
    """Linear plant (A, B) in stability axes; arrays are read-only."""

    A: np.ndarray
    B: np.ndarray
    gg_enabled: bool = True
    delta_n0: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        a = np.array(self.A, dtype=float)
        b = np.array(self.B, dtype=float)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    @property
    def gravity_columns(self) -> np.ndarray:
        """A_14, A_25, A_35 in that order."""
        return np.array([self.A[i, j] for i, j in GRAVITY_SLOTS])


@dataclass(frozen=True)
class StructureDiagnostic:
    matrix: str
    row: int
    column: Optional[int]
    expected: str
    actual: str
    severity: str = "error"
    message: str = field(default="")

    def __str__(self) -> str:
        where = f"{self.matrix}[{self.row}]"
        if self.column is not None:
            where = f"{self.matrix}[{self.row}][{self.column}]"
        return f"{self.severity}: {where} expected {self.expected}, found {self.actual}"


@dataclass(frozen=True)
class GravityGradientEffect:
    """Spectral comparison of a plant with and without its gravity columns."""

    oscillatory_max_real_off: float
    oscillatory_max_real_on: float
    aperiodic_max_real_off: float
    aperiodic_max_real_on: float
    introduces_divergence: bool
    destabilizes_oscillation: bool


def compute_delta_I(inertia: InertiaParameters) -> float:
    """Return Delta_I = I_Y*I_Z + I_Y*I_T - I_YZ^2 (kg^2*m^4)."""
    values = (inertia.I_Y, inertia.I_Z, inertia.I_T, inertia.I_YZ)
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError("Inertia parameters must be finite")
    return inertia.I_Y * inertia.I_Z + inertia.I_Y * inertia.I_T - inertia.I_YZ**2


def build_plant(
    inertia: InertiaParameters,
    motor: MotorParameters,
    gg: GravityGradientCoefficients,
    gg_enabled: bool = True,
    delta_n0: float = 0.0,
) -> PlantMatrices:
    """
    Assemble A and B from physical parameters.

    With gg_enabled false the gravity-gradient elements A_14, A_25 and A_35
    are set to zero.
    """
    delta = compute_delta_I(inertia)
    transverse_x = inertia.I_X + inertia.I_T
    if delta <= 0:
        raise SingularConfigurationError(f"Delta_I must be positive, got {delta:g}")
    if transverse_x <= 0:
        raise SingularConfigurationError("I_X + I_T must be positive")

    h_rotor = inertia.I_S * inertia.Omega_R0
    damping = motor.N * motor.K_V / motor.R_dc + motor.c
    zt = inertia.I_Z + inertia.I_T
    i_y, i_yz, i_s = inertia.I_Y, inertia.I_YZ, inertia.I_S

    A = np.zeros((N_STATES, N_STATES))
    B = np.zeros((N_STATES, N_INPUTS))

    A[0, 2] = -h_rotor / transverse_x
    A[1, 0] = -i_yz / delta * h_rotor
    A[1, 1] = zt / delta * damping * (i_y / i_s + 1.0)
    A[1, 2] = zt / delta * damping * (i_yz / i_s)
    A[2, 0] = i_y / delta * h_rotor
    A[2, 1] = -i_yz / delta * damping * (i_y / i_s + 1.0)
    A[2, 2] = -(i_yz**2) / delta * damping / i_s

    if gg_enabled:
        A[0, 3] = -gg.G_X / transverse_x
        A[1, 4] = -zt / delta * gg.G_Y + i_yz / delta * gg.G_Z
        A[2, 4] = i_yz / delta * gg.G_Y + i_y / delta * gg.G_Z

    _set_kinematics(A, delta_n0)

    B[1, 0] = zt / delta * motor.N / motor.R_dc
    B[2, 0] = -i_yz / delta * motor.N / motor.R_dc
    B[THETA_ROW, 1] = 1.0

    logger.info("Built plant from physical parameters (gg_enabled=%s)", gg_enabled)
    return PlantMatrices(A=A, B=B, gg_enabled=gg_enabled, delta_n0=delta_n0, name="physical")


def _set_kinematics(A: np.ndarray, delta_n: float) -> None:
    A[PHI_ROW, 0] = 1.0
    A[PHI_ROW, PSI_ROW] = delta_n
    A[THETA_ROW, 1] = 1.0
    A[PSI_ROW, 2] = 1.0
    A[PSI_ROW, PHI_ROW] = -delta_n


def load_plant_literal(
    matrix_config: Union[LiteralPlantConfig, Mapping[str, Any]],
    accept_literal_row6: bool = False,
    name: str = "literal",
) -> PlantMatrices:
    """
    Take A and B verbatim from a configuration block.

    Structural errors raise StructureError unless they sit in row 6 and
    accept_literal_row6 is set; warnings are logged only.
    """
    if isinstance(matrix_config, LiteralPlantConfig):
        raw_a, raw_b = matrix_config.A, matrix_config.B
    else:
        try:
            raw_a, raw_b = matrix_config["A"], matrix_config["B"]
        except KeyError as e:
            raise ShapeError(f"Literal plant is missing matrix {e}") from e

    A = _as_matrix(raw_a, (N_STATES, N_STATES), "A")
    B = _as_matrix(raw_b, (N_STATES, N_INPUTS), "B")

    gg_enabled = bool(np.any([A[i, j] != 0.0 for i, j in GRAVITY_SLOTS]))
    plant = PlantMatrices(
        A=A, B=B, gg_enabled=gg_enabled, delta_n0=float(A[PHI_ROW, PSI_ROW]), name=name
    )

    errors = []
    for diagnostic in validate_structure(plant):
        overridden = (
            accept_literal_row6 and diagnostic.matrix == "A" and diagnostic.row == PSI_ROW + 1
        )
        if diagnostic.severity == "error" and not overridden:
            errors.append(diagnostic)
        else:
            logger.warning("Plant %s: %s", name, diagnostic)

    if errors:
        raise StructureError(
            "Literal plant violates the stability-axes pattern: "
            + "; ".join(str(d) for d in errors),
            diagnostics=errors,
        )

    logger.info("Loaded literal plant %s (gg_enabled=%s)", name, gg_enabled)
    return plant


def _as_matrix(raw: Any, shape: tuple, label: str) -> np.ndarray:
    rows = list(raw)
    if len(rows) != shape[0] or any(len(row) != shape[1] for row in rows):
        raise ShapeError(f"Matrix {label} must be {shape[0]}x{shape[1]}")
    matrix = np.array(rows, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise InvalidParameterError(f"Matrix {label} has non-finite entries")
    return matrix


def plant_from_config(config: PlantConfig, name: str = "config") -> PlantMatrices:
    if config.literal is not None:
        return load_plant_literal(config.literal, config.accept_literal_row6, name=name)
    physical = config.physical
    assert physical is not None
    return build_plant(
        physical.inertia,
        physical.motor,
        physical.gravity_gradient,
        gg_enabled=physical.gg_enabled,
        delta_n0=physical.delta_n0,
    )


def validate_structure(plant: PlantMatrices) -> List[StructureDiagnostic]:
    """
    Check A and B against the stability-axes sparsity pattern.

    Each dynamic-row entry outside the allowed slots gives one error.
    Each kinematic row or B row that departs from its pattern gives one
    diagnostic naming the offending columns: an error when an entry is
    forbidden or the drift entries of rows 4 and 6 are not antisymmetric,
    a warning when a prescribed entry is merely missing.
    """
    A, B = plant.A, plant.B
    diagnostics: List[StructureDiagnostic] = []

    for row, allowed in DYNAMIC_SLOTS.items():
        for col in range(N_STATES):
            if col not in allowed and A[row, col] != 0.0:
                diagnostics.append(
                    StructureDiagnostic(
                        matrix="A",
                        row=row + 1,
                        column=col + 1,
                        expected="0",
                        actual=f"{A[row, col]:.6g}",
                    )
                )

    drift = A[PHI_ROW, PSI_ROW]
    kinematic_rows = {
        PHI_ROW: {0: 1.0, PSI_ROW: drift},
        THETA_ROW: {1: 1.0},
        PSI_ROW: {2: 1.0, PHI_ROW: -drift},
    }
    labels = {
        PHI_ROW: "[1,0,0,0,0,dn]",
        THETA_ROW: "[0,1,0,0,0,0]",
        PSI_ROW: "[0,0,1,-dn,0,0]",
    }
    for row, pattern in kinematic_rows.items():
        severity = _row_severity(A[row], pattern, unit_columns=(0, 1, 2))
        if severity is not None:
            diagnostics.append(
                StructureDiagnostic(
                    matrix="A",
                    row=row + 1,
                    column=None,
                    expected=labels[row],
                    actual=_format_row(A[row]),
                    severity=severity,
                    message="kinematic row",
                )
            )

    for row in range(N_STATES):
        if row in (1, 2):
            pattern: Dict[int, float] = {0: B[row, 0]}
            label = "[B_x1,0]"
        elif row == THETA_ROW:
            pattern = {1: 1.0}
            label = "[0,1]"
        else:
            pattern = {}
            label = "[0,0]"
        severity = _row_severity(B[row], pattern, unit_columns=(1,))
        if severity is not None:
            diagnostics.append(
                StructureDiagnostic(
                    matrix="B",
                    row=row + 1,
                    column=None,
                    expected=label,
                    actual=_format_row(B[row]),
                    severity=severity,
                    message="delta_n input channel" if row == THETA_ROW else "input row",
                )
            )

    return diagnostics


def _row_severity(
    values: np.ndarray, pattern: Mapping[int, float], unit_columns: Sequence[int]
) -> Optional[str]:
    severity = None
    for col, value in enumerate(values):
        expected = pattern.get(col, 0.0)
        if value == expected:
            continue
        if value == 0.0 and col in pattern and col in unit_columns:
            # prescribed unit entry left out
            severity = severity or "warning"
        else:
            severity = "error"
    return severity


def _format_row(values: np.ndarray) -> str:
    return "[" + ",".join(f"{v:.6g}" for v in values) + "]"


def gravity_gradient_study(
    plant_off: PlantMatrices, plant_on: PlantMatrices, tol: float = 1e-9
) -> GravityGradientEffect:
    """Compare open-loop spectra of a plant without and with gravity columns."""
    osc_off, aper_off = _max_real_parts(plant_off.A)
    osc_on, aper_on = _max_real_parts(plant_on.A)
    return GravityGradientEffect(
        oscillatory_max_real_off=osc_off,
        oscillatory_max_real_on=osc_on,
        aperiodic_max_real_off=aper_off,
        aperiodic_max_real_on=aper_on,
        introduces_divergence=aper_on > tol and aper_off <= tol,
        destabilizes_oscillation=osc_on > tol and osc_off <= tol,
    )


def _max_real_parts(A: np.ndarray, imag_tol: float = 1e-6) -> tuple:
    eigenvalues = np.linalg.eigvals(A)
    oscillatory = eigenvalues[np.abs(eigenvalues.imag) > imag_tol]
    aperiodic = eigenvalues[np.abs(eigenvalues.imag) <= imag_tol]
    osc = float(oscillatory.real.max()) if oscillatory.size else float("-inf")
    aper = float(aperiodic.real.max()) if aperiodic.size else float("-inf")
    return osc, aper
