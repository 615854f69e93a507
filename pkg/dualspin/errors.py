"""Exception hierarchy shared by every dualspin module."""

from typing import Any, List, Optional

import numpy as np


class DualSpinError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2


class InvalidParameterError(DualSpinError, ValueError):
    """A physical or numeric parameter is outside its admissible range."""


class SingularConfigurationError(DualSpinError):
    """Parameters make a plant denominator vanish (Delta_I or I_X + I_T)."""


class ShapeError(DualSpinError):
    """A matrix does not have the expected dimensions."""


class StructureError(DualSpinError):
    """A literal plant violates the stability-axes sparsity pattern."""

    def __init__(self, message: str, diagnostics: Optional[list] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UnsupportedOrbitError(DualSpinError):
    """Orbit elements outside the closed elliptic regime."""


class SelectorError(DualSpinError):
    """A loop names a sensed output that is not part of the state vector."""


class InputError(DualSpinError):
    """Series or table handed to the analysis functions is unusable."""


class SchemaError(InputError):
    """A result table is missing a required column."""


class ConfigError(DualSpinError):
    """A configuration file cannot be parsed or validated."""


class NumericError(DualSpinError, ArithmeticError):
    """Numerical failure during a computation."""

    exit_code = 1


class ConvergenceError(NumericError):
    """An iterative solver did not reach its tolerance."""


class EigenSolverError(NumericError):
    """Eigenvalue computation failed; partial holds the locus slices done so far."""

    def __init__(self, message: str, gain: float, partial: Optional[Any] = None) -> None:
        super().__init__(message)
        self.gain = gain
        self.partial = partial


class DivergenceError(NumericError):
    """
    Integration produced NaN/Inf; the partial trace is kept for diagnosis.

    partial is the truncated SimulationResult up to the last finite state.
    completed holds the sweep members that finished when the error came
    out of a sweep.
    """

    def __init__(
        self,
        message: str,
        t: float,
        t_grid: Optional[np.ndarray] = None,
        states: Optional[np.ndarray] = None,
        inputs: Optional[np.ndarray] = None,
        partial: Optional[Any] = None,
    ) -> None:
        super().__init__(message)
        self.t = t
        self.t_grid = t_grid
        self.states = states
        self.inputs = inputs
        self.partial = partial
        self.completed: List[Any] = []
