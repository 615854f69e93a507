"""
Compensators, loop closure by state augmentation, and eigenvalue root loci.

All loops act on the single delta_e actuator with the convention

    delta_e = K * H(s) * (ref - y)

so the sign of a loop lives entirely in its gain K.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import signal
from scipy.optimize import linear_sum_assignment

from . import settings
from .dynamics import STATE_NAMES, PlantMatrices
from .errors import EigenSolverError, InvalidParameterError, SelectorError

logger = logging.getLogger(__name__)

SENSED_OUTPUTS = ("theta_s", "p", "r", "q", "phi_s", "psi_s")

# |Im| above which an eigenvalue counts as an oscillatory mode
OSCILLATORY_TOL = 1e-6


# Controller models
class RationalCompensator(BaseModel):
    """K * prod(s - z_i) / prod(s - p_j) with real zeros and poles (rad/s)."""

    model_config = ConfigDict(frozen=True)

    K: float = Field(1.0, description="Signed loop gain")
    zeros: Tuple[float, ...] = Field((), description="Zero locations (rad/s)")
    poles: Tuple[float, ...] = Field((), description="Pole locations (rad/s)")

    @field_validator("K")
    @classmethod
    def validate_gain(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Gain must be finite")
        return v

    @field_validator("zeros", "poles")
    @classmethod
    def validate_roots(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not all(math.isfinite(x) for x in v):
            raise ValueError("Zeros and poles must be finite")
        return v

    @model_validator(mode="after")
    def validate_proper(self) -> "RationalCompensator":
        if len(self.zeros) > len(self.poles):
            raise ValueError("Compensator must be proper (#zeros <= #poles)")
        return self

    @property
    def order(self) -> int:
        return len(self.poles)

    def with_gain(self, K: float) -> "RationalCompensator":
        return RationalCompensator(K=K, zeros=self.zeros, poles=self.poles)

    def evaluate(self, s: complex) -> complex:
        num = np.prod([s - z for z in self.zeros]) if self.zeros else 1.0
        den = np.prod([s - p for p in self.poles]) if self.poles else 1.0
        return complex(self.K * num / den)


class FeedbackLoop(BaseModel):
    """One sensed state fed back to delta_e through a compensator."""

    model_config = ConfigDict(frozen=True)

    sensed_output: str = Field(..., description="State fed back: theta_s, p or r")
    compensator: RationalCompensator
    actuated_input: str = Field("delta_e", description="Always channel 1 of B")
    reference_name: str = Field("delta_e_ref", description="Name of the reference input")

    @field_validator("actuated_input")
    @classmethod
    def validate_actuator(cls, v: str) -> str:
        if v != "delta_e":
            raise ValueError("Loops can only actuate delta_e")
        return v

    @property
    def sensed_index(self) -> int:
        if self.sensed_output not in SENSED_OUTPUTS:
            raise SelectorError(
                f"Unknown sensed output '{self.sensed_output}', "
                f"expected one of {', '.join(SENSED_OUTPUTS)}"
            )
        return STATE_NAMES.index(self.sensed_output)


class ControllerConfig(BaseModel):
    """Controller block of a configuration file."""

    loop: str = Field(..., description="Sensed output: theta_s, p or r")
    K: float = Field(..., description="Signed loop gain")
    zeros: List[float] = Field(default_factory=list)
    poles: List[float] = Field(default_factory=list)

    def to_loop(self) -> FeedbackLoop:
        return FeedbackLoop(
            sensed_output=self.loop,
            compensator=RationalCompensator(
                K=self.K, zeros=tuple(self.zeros), poles=tuple(self.poles)
            ),
        )


# State-space containers
@dataclass(frozen=True)
class StateSpaceBlock:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def transfer_value(self, s: complex) -> complex:
        """C (sI - A)^-1 B + D at one complex frequency."""
        if self.order == 0:
            return complex(self.D)
        resolvent = np.linalg.solve(s * np.eye(self.order) - self.A, self.B)
        return complex((self.C @ resolvent).item() + self.D)


@dataclass(frozen=True)
class ClosedLoopSystem:
    """
    Plant plus compensator states, x = [plant states, compensator states].

    Columns of B_cl are [delta_e_ref, delta_n].  The applied actuator
    voltage is de_state_gain @ x + de_ref_gain * ref.
    """

    A_cl: np.ndarray
    B_cl: np.ndarray
    plant: PlantMatrices
    loops: Tuple[FeedbackLoop, ...]
    compensator_orders: Tuple[int, ...]
    sensed_indices: Tuple[int, ...]
    de_state_gain: np.ndarray
    de_ref_gain: float

    @property
    def compensator_order(self) -> int:
        return sum(self.compensator_orders)

    @property
    def state_names(self) -> List[str]:
        return list(STATE_NAMES) + [f"xc_{k + 1}" for k in range(self.compensator_order)]


@dataclass(frozen=True)
class Mode:
    eigenvalue: complex
    damping: float
    natural_frequency: float

    @property
    def oscillatory(self) -> bool:
        return abs(self.eigenvalue.imag) > OSCILLATORY_TOL


@dataclass(frozen=True)
class CriticalGain:
    gain: float
    eigenvalue: complex


@dataclass(frozen=True)
class Coalescence:
    gain: float
    location: float


@dataclass
class LocusData:
    """
    Closed-loop eigenvalues over a gain grid for the family A0 + K*M.

    eigenvalues[k, j] is branch j at gains[k]; branches are paired across
    adjacent gains by minimum-distance assignment.
    """

    gains: np.ndarray
    eigenvalues: np.ndarray
    a0: np.ndarray
    m: np.ndarray
    critical_gains: List[CriticalGain] = field(default_factory=list)
    breakaway: List[Coalescence] = field(default_factory=list)

    def spectrum(self, gain: float) -> np.ndarray:
        return _eigvals_at(self.a0, self.m, gain)


@dataclass(frozen=True)
class ZeroPlacementResult:
    """Least-damped oscillatory damping per gain; gains are shared by every zero of a study."""

    zero: float
    best_damping: float
    best_gain: float
    gains: np.ndarray
    damping: np.ndarray

    def damping_at(self, gain: float) -> float:
        matches = np.flatnonzero(self.gains == gain)
        if matches.size == 0:
            raise InvalidParameterError(f"Gain {gain:g} is not on the study grid")
        return float(self.damping[matches[0]])


# Compensator realisation
def realize_compensator(c: RationalCompensator) -> StateSpaceBlock:
    """Controllable canonical form of K * prod(s - z) / prod(s - p)."""
    if c.order == 0:
        return StateSpaceBlock(
            A=np.zeros((0, 0)), B=np.zeros((0, 1)), C=np.zeros((1, 0)), D=float(c.K)
        )
    # unit-gain realisation, then scale the output map so the block is linear in K
    num = np.poly(c.zeros) if c.zeros else np.array([1.0])
    den = np.poly(c.poles)
    A, B, C, D = signal.tf2ss(np.real(num), np.real(den))
    return StateSpaceBlock(
        A=np.asarray(A, dtype=float),
        B=np.asarray(B, dtype=float).reshape(-1, 1),
        C=c.K * np.asarray(C, dtype=float).reshape(1, -1),
        D=c.K * float(np.asarray(D).item()),
    )


# Loop closure
def close_loop(plant: PlantMatrices, loop: FeedbackLoop) -> ClosedLoopSystem:
    return close_loops(plant, [loop])


def close_loops(plant: PlantMatrices, loops: Sequence[FeedbackLoop]) -> ClosedLoopSystem:
    """
    Close one or more loops sharing the delta_e actuator.

    The first loop receives the reference input, the others regulate their
    sensed output to zero.  Compensator states are stacked in loop order.
    An empty loop list gives the open-loop plant driven by the reference.
    """
    loops = tuple(loops)
    blocks = [realize_compensator(loop.compensator) for loop in loops]
    indices = tuple(loop.sensed_index for loop in loops)
    orders = tuple(block.order for block in blocks)
    n = plant.A.shape[0] + sum(orders)

    b1 = plant.B[:, 0]
    A_cl = np.zeros((n, n))
    B_cl = np.zeros((n, 2))
    A_cl[:6, :6] = plant.A
    B_cl[:6, 1] = plant.B[:, 1]

    de_state_gain = np.zeros(n)
    # with no loop the reference drives delta_e directly
    de_ref_gain = 0.0 if loops else 1.0
    offset = 6
    for k, (block, index) in enumerate(zip(blocks, indices)):
        m = block.order
        rows = slice(offset, offset + m)
        de_state_gain[index] -= block.D
        de_state_gain[rows] += block.C.ravel()
        A_cl[rows, rows] = block.A
        A_cl[rows, index] = -block.B.ravel()
        if k == 0:
            de_ref_gain = block.D
            B_cl[rows, 0] = block.B.ravel()
        offset += m

    A_cl[:6, :] += np.outer(b1, de_state_gain)
    B_cl[:6, 0] += b1 * de_ref_gain

    for loop in loops:
        logger.info(
            "Closed %s loop with K=%g (order %d)",
            loop.sensed_output,
            loop.compensator.K,
            loop.compensator.order,
        )
    return ClosedLoopSystem(
        A_cl=A_cl,
        B_cl=B_cl,
        plant=plant,
        loops=loops,
        compensator_orders=orders,
        sensed_indices=indices,
        de_state_gain=de_state_gain,
        de_ref_gain=de_ref_gain,
    )


def gain_family(
    plant: PlantMatrices,
    loop: FeedbackLoop,
    fixed_loops: Sequence[FeedbackLoop] = (),
) -> Tuple[np.ndarray, np.ndarray]:
    """Return (A0, M) with A_cl(K) = A0 + K*M for the loop's gain."""

    def closed_at(gain: float) -> np.ndarray:
        shaped = loop.model_copy(update={"compensator": loop.compensator.with_gain(gain)})
        return close_loops(plant, [shaped, *fixed_loops]).A_cl

    base = closed_at(0.0)
    return base, closed_at(1.0) - base


# Eigen analysis
def eigen_modes(A_any: np.ndarray, real_tol: float = 1e-9) -> List[Mode]:
    """
    Eigenvalues with damping ratio and natural frequency, sorted by frequency.

    Real eigenvalues carry damping +1 when stable (or zero) and -1 when
    divergent.
    """
    A_any = np.asarray(A_any, dtype=float)
    if A_any.ndim != 2 or A_any.shape[0] != A_any.shape[1]:
        raise InvalidParameterError("eigen_modes needs a square matrix")
    if A_any.size == 0:
        return []
    modes = []
    for lam in np.linalg.eigvals(A_any):
        wn = float(abs(lam))
        if abs(lam.imag) <= real_tol:
            zeta = -1.0 if lam.real > 0 else 1.0
        else:
            zeta = float(-lam.real / wn)
        modes.append(Mode(eigenvalue=complex(lam), damping=zeta, natural_frequency=wn))
    modes.sort(key=lambda mode: (mode.natural_frequency, mode.eigenvalue.imag))
    return modes


def _eigvals_at(a0: np.ndarray, m: np.ndarray, gain: float) -> np.ndarray:
    matrix = a0 + gain * m
    if not np.all(np.isfinite(matrix)):
        raise EigenSolverError(f"Non-finite closed-loop matrix at K={gain:g}", gain)
    try:
        return np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as e:
        raise EigenSolverError(f"Eigenvalue solver failed at K={gain:g}: {e}", gain) from e


# Root locus
def default_gain_grid(
    sign: float,
    k_min: float,
    k_max: float,
    points_per_decade: int = settings.LOCUS_POINTS_PER_DECADE,
) -> np.ndarray:
    """Logarithmic grid in |K| from k_min to k_max carrying the given sign."""
    if k_min <= 0 or k_max < k_min:
        raise InvalidParameterError("Gain grid needs 0 < k_min <= k_max")
    if points_per_decade < 1:
        raise InvalidParameterError("points_per_decade must be positive")
    decades = math.log10(k_max / k_min)
    count = max(int(math.ceil(decades * points_per_decade)) + 1, 2 if k_max > k_min else 1)
    return math.copysign(1.0, sign) * np.logspace(
        math.log10(k_min), math.log10(k_max), count
    )


def locus_from_family(a0: np.ndarray, m: np.ndarray, gains: Sequence[float]) -> LocusData:
    """Eigenvalue sweep of A0 + K*M with branch pairing across the grid."""
    gains = np.asarray(gains, dtype=float)
    if gains.ndim != 1 or gains.size == 0:
        raise InvalidParameterError("Gain grid must be a non-empty 1-D sequence")
    a0 = np.asarray(a0, dtype=float)
    m = np.asarray(m, dtype=float)

    stack = a0[None, :, :] + gains[:, None, None] * m[None, :, :]
    raw: Optional[np.ndarray] = None
    if np.all(np.isfinite(stack)):
        try:
            raw = np.linalg.eigvals(stack)
        except np.linalg.LinAlgError:
            raw = None

    if raw is None:
        # slice by slice to name the offending gain and keep what came before it
        rows: List[np.ndarray] = []
        for gain in gains:
            try:
                rows.append(_eigvals_at(a0, m, gain))
            except EigenSolverError as e:
                done = np.array(rows).reshape(len(rows), a0.shape[0])
                e.partial = LocusData(
                    gains=gains[: len(rows)], eigenvalues=_pair_branches(done), a0=a0, m=m
                )
                raise
        raw = np.array(rows)

    return LocusData(gains=gains, eigenvalues=_pair_branches(raw), a0=a0, m=m)


def _pair_branches(raw: np.ndarray) -> np.ndarray:
    paired = np.empty_like(raw)
    if raw.shape[0] == 0:
        return paired
    paired[0] = np.sort_complex(raw[0])
    for k in range(1, raw.shape[0]):
        cost = np.abs(paired[k - 1][:, None] - raw[k][None, :])
        _, columns = linear_sum_assignment(cost)
        paired[k] = raw[k][columns]
    return paired


def root_locus(
    plant: PlantMatrices,
    loop_shape: FeedbackLoop,
    gains: Sequence[float],
    fixed_loops: Sequence[FeedbackLoop] = (),
    annotate: bool = True,
) -> LocusData:
    """
    Closed-loop eigenvalues of plant + loop for every gain in the grid.

    The loop's own gain is ignored; fixed_loops stay closed at their gains.
    """
    a0, m = gain_family(plant, loop_shape, fixed_loops)
    locus = locus_from_family(a0, m, gains)
    if annotate and locus.gains.size >= 2:
        locus.critical_gains = find_critical_gains(locus)
        locus.breakaway = find_breakaway(locus)
    logger.info(
        "Root locus over %d gains: %d critical gains, %d coalescence points",
        locus.gains.size,
        len(locus.critical_gains),
        len(locus.breakaway),
    )
    return locus


def _unstable_count(eigenvalues: np.ndarray, eps: float) -> int:
    return int(np.sum(eigenvalues.real > eps))


def _real_count(eigenvalues: np.ndarray) -> int:
    tol = 1e-7 * np.maximum(1.0, np.abs(eigenvalues))
    return int(np.sum(np.abs(eigenvalues.imag) <= tol))


def _bisect_transition(
    locus: LocusData,
    lo: float,
    hi: float,
    count: Callable[[np.ndarray], int],
    max_iter: int = 200,
) -> Tuple[float, float]:
    """Shrink [lo, hi] around the gain where count(spectrum) changes."""
    count_lo = count(locus.spectrum(lo))
    steps = 0
    while steps < max_iter and abs(hi - lo) > 1e-12 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if count(locus.spectrum(mid)) == count_lo:
            lo = mid
        else:
            hi = mid
        steps += 1
    logger.debug("Gain bisection stopped after %d steps", steps)
    return lo, hi


def find_critical_gains(locus: LocusData, eps: float = 1e-9) -> List[CriticalGain]:
    """
    Gains where a branch crosses the imaginary axis.

    A crossing is a change in the number of eigenvalues with real part
    above eps between adjacent slices, refined by bisection on K.
    """
    results: List[CriticalGain] = []
    counts = [_unstable_count(row, eps) for row in locus.eigenvalues]
    for k in range(1, len(counts)):
        if counts[k] == counts[k - 1]:
            continue
        lo, hi = _bisect_transition(
            locus,
            float(locus.gains[k - 1]),
            float(locus.gains[k]),
            lambda spectrum: _unstable_count(spectrum, eps),
        )
        gain = 0.5 * (lo + hi)
        spectrum = locus.spectrum(gain)
        near_axis = spectrum[np.abs(spectrum.real) < 10 * eps]
        if near_axis.size == 0:
            near_axis = spectrum[[int(np.argmin(np.abs(spectrum.real)))]]
        crossing = near_axis[int(np.argmax(near_axis.imag))]
        results.append(CriticalGain(gain=gain, eigenvalue=complex(crossing)))
    return results


def find_breakaway(locus: LocusData) -> List[Coalescence]:
    """
    Real-axis coalescence points: two real branches meeting and leaving the
    axis as a complex pair, or a complex pair landing on it.
    """
    results: List[Coalescence] = []
    counts = [_real_count(row) for row in locus.eigenvalues]
    for k in range(1, len(counts)):
        if counts[k] == counts[k - 1]:
            continue
        lo, hi = _bisect_transition(
            locus, float(locus.gains[k - 1]), float(locus.gains[k]), _real_count
        )
        # the complex side of the bracket holds the pair just off the axis
        complex_side = lo if counts[k - 1] < counts[k] else hi
        spectrum = locus.spectrum(complex_side)
        tol = 1e-7 * np.maximum(1.0, np.abs(spectrum))
        off_axis = spectrum[np.abs(spectrum.imag) > tol]
        if off_axis.size == 0:
            off_axis = spectrum
        nearest = off_axis[int(np.argmin(np.abs(off_axis.imag)))]
        results.append(Coalescence(gain=0.5 * (lo + hi), location=float(nearest.real)))
    return results


# Design studies
def oscillatory_max_real(A: np.ndarray, tol: float = OSCILLATORY_TOL) -> float:
    """Largest real part among eigenvalues with |Im| > tol (-inf if none)."""
    eigenvalues = np.linalg.eigvals(A)
    oscillatory = eigenvalues[np.abs(eigenvalues.imag) > tol]
    return float(oscillatory.real.max()) if oscillatory.size else float("-inf")


def min_oscillatory_damping(eigenvalues: np.ndarray, tol: float = OSCILLATORY_TOL) -> float:
    oscillatory = eigenvalues[np.abs(eigenvalues.imag) > tol]
    if oscillatory.size == 0:
        return 1.0
    return float(np.min(-oscillatory.real / np.abs(oscillatory)))


def zero_placement_study(
    plant: PlantMatrices,
    loop: FeedbackLoop,
    zero_locations: Sequence[float],
    gains: Sequence[float],
) -> List[ZeroPlacementResult]:
    """
    Walk the compensator zero and report, per location, the damping of the
    least-damped oscillatory mode at every gain of the shared grid and its best
    value over the grid.
    """
    results = []
    for zero in zero_locations:
        shaped = loop.model_copy(
            update={
                "compensator": RationalCompensator(
                    K=1.0, zeros=(float(zero),), poles=loop.compensator.poles
                )
            }
        )
        locus = root_locus(plant, shaped, gains, annotate=False)
        damping = np.array([min_oscillatory_damping(row) for row in locus.eigenvalues])
        best = int(np.argmax(damping))
        results.append(
            ZeroPlacementResult(
                zero=float(zero),
                best_damping=float(damping[best]),
                best_gain=float(locus.gains[best]),
                gains=locus.gains.copy(),
                damping=damping,
            )
        )
        logger.info("Zero at %g: best damping %.4f at K=%g", zero, damping[best], locus.gains[best])
    return results

