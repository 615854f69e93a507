"""
Fixed-step simulation of the closed-loop attitude model under orbit forcing.

The orbit enters in three places, each behind a flag:

* kinematic_dn  A[3, 5] = +delta_n(t) and A[5, 3] = -delta_n(t)
* b_channel_dn  delta_n(t) drives input column 2
* gg_scaling    A[0, 3], A[1, 4], A[2, 4] scaled by (R0 / R(t))**3

Compensator blocks are time invariant.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from . import settings
from .controller import ClosedLoopSystem, ControllerConfig, FeedbackLoop, close_loops
from .dynamics import GRAVITY_SLOTS, PHI_ROW, PSI_ROW, PlantConfig, PlantMatrices, plant_from_config
from .errors import ConfigError, DivergenceError, InvalidParameterError
from .orbit import OrbitConfig, OrbitState, gg_scale, propagate, propagate_many, semi_major_axis_for_period
from .presets import LONG_HORIZON, ORBIT_PERIOD, SHORT_HORIZON, loop_preset, plant_preset

logger = logging.getLogger(__name__)

ANGLE_STATES = ("phi_s", "theta_s", "psi_s")

# Maps the orbit state and the instantaneous plant A to a modified plant A
ModulationHook = Callable[[OrbitState, np.ndarray], np.ndarray]
SystemProvider = Callable[[float], Tuple[np.ndarray, np.ndarray]]
InputFunction = Callable[[float], Union[float, np.ndarray]]


# Configuration models
class InputSignal(BaseModel):
    """Reference voltage applied at delta_e_ref."""

    kind: Literal["zero", "step", "impulse-approx", "doublet"] = "zero"
    amplitude: float = Field(0.0, description="Amplitude (V); impulse area is amplitude * dt")
    t_start: float = Field(0.0, ge=0, description="Onset time (s)")
    t_half: Optional[float] = Field(None, description="Doublet sign reversal (s)")
    t_end: Optional[float] = Field(None, description="Doublet end (s)")

    @field_validator("amplitude")
    @classmethod
    def validate_amplitude(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Input amplitude must be finite")
        return v

    @model_validator(mode="after")
    def validate_doublet(self) -> "InputSignal":
        if self.kind == "doublet":
            if self.t_half is None or self.t_end is None:
                raise ValueError("Doublet needs t_half and t_end")
            if not self.t_start < self.t_half < self.t_end:
                raise ValueError("Doublet needs t_start < t_half < t_end")
        return self


class TimeVaryingFlags(BaseModel):
    kinematic_dn: bool = True
    b_channel_dn: bool = True
    gg_scaling: bool = True


class Scenario(BaseModel):
    """One simulation run; plant and loops may name presets."""

    name: str = "scenario"
    plant: Union[str, PlantConfig] = Field("paper-longitudinal", description="Preset name or plant block")
    loops: List[Union[str, ControllerConfig]] = Field(
        default_factory=list, description="Loop presets or controller blocks; the first gets the reference"
    )
    orbit: OrbitConfig
    input: InputSignal = Field(default_factory=InputSignal)
    duration: float = Field(..., gt=0, description="Run length (s)")
    dt: float = Field(settings.DEFAULT_DT_SHORT, gt=0, description="Integration step (s)")
    time_varying: TimeVaryingFlags = Field(default_factory=TimeVaryingFlags)
    R0: Optional[float] = Field(None, gt=0, description="Reference radius for gravity scaling (default a)")
    initial_state_deg: Dict[str, float] = Field(
        default_factory=dict,
        description="Initial values by state name; angles in degrees, rates in rad/s",
    )

    @model_validator(mode="after")
    def validate_grid(self) -> "Scenario":
        if self.duration < self.dt:
            raise ValueError("Duration must be at least one step")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class SimulationResult:
    """
    Uniform-grid trajectory.  states[k] is the full closed-loop state at t[k];
    de_applied and dn_applied are the two plant inputs actually applied.
    """

    t: np.ndarray
    states: np.ndarray
    de_applied: np.ndarray
    dn_applied: np.ndarray
    state_names: List[str]
    scenario: Scenario

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.state_names.index(name)]

    def angle_deg(self, name: str) -> np.ndarray:
        if name not in ANGLE_STATES:
            raise InvalidParameterError(f"'{name}' is not an attitude angle")
        return np.degrees(self.column(name))


@dataclass(frozen=True)
class ScenarioSweep:
    name: str
    column: str
    scenarios: List[Scenario]


# Input signals
def make_input(source: InputSignal, dt: float = settings.DEFAULT_DT_SHORT) -> InputFunction:
    """Return u(t); accepts scalar or array times."""
    amp = source.amplitude

    def signal_at(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        tt = np.asarray(t, dtype=float)
        if source.kind == "zero":
            out = np.zeros_like(tt)
        elif source.kind == "step":
            out = np.where(tt >= source.t_start, amp, 0.0)
        elif source.kind == "impulse-approx":
            # one bin of height amplitude / dt, area amplitude
            out = np.where((tt >= source.t_start) & (tt < source.t_start + dt), amp / dt, 0.0)
        else:
            out = np.where(
                (tt >= source.t_start) & (tt < source.t_half),
                amp,
                np.where((tt >= source.t_half) & (tt < source.t_end), -amp, 0.0),
            )
        if out.ndim == 0:
            return float(out)
        return out

    return signal_at


# Scenario resolution
def resolve_plant(scenario: Scenario) -> PlantMatrices:
    if isinstance(scenario.plant, str):
        return plant_preset(scenario.plant)
    return plant_from_config(scenario.plant, name=scenario.name)


def resolve_loops(scenario: Scenario) -> List[FeedbackLoop]:
    return [
        loop_preset(item) if isinstance(item, str) else item.to_loop()
        for item in scenario.loops
    ]


def build_system(scenario: Scenario) -> ClosedLoopSystem:
    return close_loops(resolve_plant(scenario), resolve_loops(scenario))


def initial_state(scenario: Scenario, system: ClosedLoopSystem) -> np.ndarray:
    names = system.state_names
    x0 = np.zeros(len(names))
    for name, value in scenario.initial_state_deg.items():
        if name not in names:
            raise InvalidParameterError(
                f"Unknown state '{name}' in initial_state_deg, expected one of {', '.join(names)}"
            )
        x0[names.index(name)] = math.radians(value) if name in ANGLE_STATES else value
    return x0


def _plant_delta(
    plant_a: np.ndarray,
    flags: TimeVaryingFlags,
    delta_n: float,
    scale: float,
) -> np.ndarray:
    """Instantaneous plant A minus the reference plant A."""
    delta = np.zeros_like(plant_a)
    if flags.kinematic_dn:
        delta[PHI_ROW, PSI_ROW] = delta_n - plant_a[PHI_ROW, PSI_ROW]
        delta[PSI_ROW, PHI_ROW] = -delta_n - plant_a[PSI_ROW, PHI_ROW]
    if flags.gg_scaling:
        for i, j in GRAVITY_SLOTS:
            delta[i, j] = plant_a[i, j] * (scale - 1.0)
    return delta


def _instantaneous_a(
    system: ClosedLoopSystem,
    flags: TimeVaryingFlags,
    state: OrbitState,
    R0: float,
    modulation: Optional[ModulationHook] = None,
) -> np.ndarray:
    plant_a = system.plant.A
    delta = _plant_delta(plant_a, flags, state.delta_n, float(gg_scale(state, R0)))
    if modulation is not None:
        delta = np.asarray(modulation(state, plant_a + delta), dtype=float) - plant_a
    A = system.A_cl.copy()
    A[:6, :6] += delta
    return A


def system_at(
    scenario: Scenario,
    t: float,
    system: Optional[ClosedLoopSystem] = None,
    modulation: Optional[ModulationHook] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-loop (A(t), B(t)) for the scenario; B is time invariant."""
    system = system or build_system(scenario)
    elements = scenario.orbit.to_elements()
    R0 = scenario.R0 or elements.a
    state = propagate(elements, t)
    A = _instantaneous_a(system, scenario.time_varying, state, R0, modulation)
    return A, system.B_cl.copy()


# Integration
def _rk4_combine(
    rate_start: Callable[[np.ndarray], np.ndarray],
    rate_mid: Callable[[np.ndarray], np.ndarray],
    rate_end: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    dt: float,
) -> np.ndarray:
    k1 = rate_start(x)
    k2 = rate_mid(x + 0.5 * dt * k1)
    k3 = rate_mid(x + 0.5 * dt * k2)
    k4 = rate_end(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(
    system: SystemProvider,
    x: np.ndarray,
    t: float,
    dt: float,
    u: Callable[[float], Union[float, np.ndarray]],
) -> np.ndarray:
    """
    One classical Runge-Kutta step of x' = A(t) x + B(t) u(t).

    system(t) returns (A, B); A, B and u are evaluated at t, t + dt/2 and
    t + dt.
    """
    if dt <= 0:
        raise InvalidParameterError("Step size must be positive")

    def rate_at(tau: float) -> Callable[[np.ndarray], np.ndarray]:
        A, B = system(tau)
        forcing = np.asarray(B) @ np.atleast_1d(np.asarray(u(tau), dtype=float))
        return lambda state: A @ state + forcing

    x_next = _rk4_combine(rate_at(t), rate_at(t + 0.5 * dt), rate_at(t + dt), x, dt)
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(f"State became non-finite at t={t + dt:g} s", t=t + dt)
    return x_next


def simulate(scenario: Scenario, modulation: Optional[ModulationHook] = None) -> SimulationResult:
    """
    Integrate the scenario over [0, duration] with fixed step dt.

    Orbit forcing is tabulated on the half-step grid before the loop, so the
    three RK4 stage times t, t + dt/2 and t + dt are table lookups.
    """
    system = build_system(scenario)
    flags = scenario.time_varying
    elements = scenario.orbit.to_elements()
    R0 = scenario.R0 or elements.a
    dt = scenario.dt
    steps = scenario.steps
    n = system.A_cl.shape[0]

    half_times = np.arange(2 * steps + 1) * (0.5 * dt)
    orbit = propagate_many(elements, half_times)
    delta_n = orbit.delta_n
    scale = gg_scale(orbit, R0)
    ref = np.asarray(make_input(scenario.input, dt)(half_times), dtype=float)
    dn_in = delta_n if flags.b_channel_dn else np.zeros_like(delta_n)

    plant_a = system.plant.A
    gravity_on = any(plant_a[i, j] != 0.0 for i, j in GRAVITY_SLOTS)
    varying = modulation is not None
    if flags.kinematic_dn:
        varying = varying or bool(
            np.any(delta_n != plant_a[PHI_ROW, PSI_ROW])
            or np.any(-delta_n != plant_a[PSI_ROW, PHI_ROW])
        )
    if flags.gg_scaling and gravity_on:
        varying = varying or bool(np.any(scale != 1.0))

    def a_at(j: int) -> np.ndarray:
        if not varying:
            return system.A_cl
        if modulation is not None:
            return _instantaneous_a(system, flags, orbit.state(j), R0, modulation)
        A = system.A_cl.copy()
        A[:6, :6] += _plant_delta(plant_a, flags, float(delta_n[j]), float(scale[j]))
        return A

    b_ref = system.B_cl[:, 0].copy()
    b_dn = system.B_cl[:, 1].copy()

    def forcing(j: int) -> np.ndarray:
        return b_ref * ref[j] + b_dn * dn_in[j]

    t_grid = half_times[::2]
    states = np.empty((steps + 1, n))
    x = initial_state(scenario, system)
    states[0] = x

    logger.info(
        "Simulating %s: %d steps of %g s (%s)",
        scenario.name,
        steps,
        dt,
        "time varying" if varying else "time invariant",
    )
    a_start, f_start = a_at(0), forcing(0)
    for k in range(steps):
        j = 2 * k
        a_mid, f_mid = a_at(j + 1), forcing(j + 1)
        a_end, f_end = a_at(j + 2), forcing(j + 2)
        x = _rk4_combine(
            lambda s, A=a_start, f=f_start: A @ s + f,
            lambda s, A=a_mid, f=f_mid: A @ s + f,
            lambda s, A=a_end, f=f_end: A @ s + f,
            x,
            dt,
        )
        if not np.all(np.isfinite(x)):
            t_fail = float(t_grid[k + 1])
            logger.error("Scenario %s diverged at t=%g s", scenario.name, t_fail)
            partial = SimulationResult(
                t=t_grid[: k + 1].copy(),
                states=states[: k + 1].copy(),
                de_applied=_applied_de(system, states[: k + 1], ref[: 2 * k + 1 : 2]),
                dn_applied=dn_in[: 2 * k + 1 : 2].copy(),
                state_names=system.state_names,
                scenario=scenario,
            )
            raise DivergenceError(
                f"Scenario '{scenario.name}' diverged at t={t_fail:g} s",
                t=t_fail,
                t_grid=partial.t,
                states=partial.states,
                inputs=partial.de_applied,
                partial=partial,
            )
        states[k + 1] = x
        a_start, f_start = a_end, f_end

    logger.info("Finished %s", scenario.name)
    return SimulationResult(
        t=t_grid,
        states=states,
        de_applied=_applied_de(system, states, ref[::2]),
        dn_applied=dn_in[::2].copy(),
        state_names=system.state_names,
        scenario=scenario,
    )


def _applied_de(system: ClosedLoopSystem, states: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return states @ system.de_state_gain + system.de_ref_gain * ref


def run_sweep(
    scenarios: Sequence[Scenario],
    workers: int = settings.SWEEP_WORKERS,
    modulation: Optional[ModulationHook] = None,
) -> List[SimulationResult]:
    """
    Simulate independent scenarios; results keep the input order.

    A diverging member does not stop the others.  The first divergence is
    re-raised after the sweep with the finished results on its completed list.
    """

    def run_one(scenario: Scenario) -> Tuple[Optional[SimulationResult], Optional[DivergenceError]]:
        try:
            return simulate(scenario, modulation), None
        except DivergenceError as exc:
            return None, exc

    if workers <= 1 or len(scenarios) <= 1:
        outcomes = [run_one(s) for s in scenarios]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, scenarios))

    results = [r for r, _ in outcomes if r is not None]
    failures = [exc for _, exc in outcomes if exc is not None]
    if failures:
        logger.error("%d of %d scenarios diverged", len(failures), len(outcomes))
        failures[0].completed = results
        raise failures[0]
    return results


# Presets
REFERENCE_DOUBLET = InputSignal(kind="doublet", amplitude=1e-3, t_start=1.0, t_half=3.0, t_end=5.0)

# Lateral and directional amplitudes give peak responses near 1e-3 deg in phi_s and 1.7e-3 deg in psi_s.
_MODE_DOUBLET: Dict[str, InputSignal] = {
    "longitudinal": REFERENCE_DOUBLET,
    "lateral": REFERENCE_DOUBLET.model_copy(update={"amplitude": 3.3e-5}),
    "directional": REFERENCE_DOUBLET.model_copy(update={"amplitude": 1e-4}),
}

_MODE_SETUP: Dict[str, Tuple[str, List[str]]] = {
    "longitudinal": ("paper-longitudinal", ["paper-longitudinal"]),
    "lateral": ("paper-lateral", ["paper-lateral", "paper-directional"]),
    "directional": ("paper-directional", ["paper-directional", "paper-lateral"]),
}

_MODE_COLUMN = {
    "longitudinal": "theta_s_deg",
    "lateral": "phi_s_deg",
    "directional": "psi_s_deg",
}

_HORIZONS = {
    "short": (SHORT_HORIZON, settings.DEFAULT_DT_SHORT),
    "long": (LONG_HORIZON, settings.DEFAULT_DT_LONG),
}


def _reference_orbit(e: float, i_deg: float) -> OrbitConfig:
    return OrbitConfig(a=semi_major_axis_for_period(ORBIT_PERIOD), e=e, i_deg=i_deg)


def preset_scenarios() -> Dict[str, ScenarioSweep]:
    """
    Scenario sweeps keyed by '<mode>/<sweep>/<fixed element>/<horizon>'.

    e-sweeps run e in {0, 0.1, 0.2} at i = 30 deg; i-sweeps run i in
    {0, 30} deg at e = 0.2.  Short runs last 500 s, long runs ten orbits.
    """
    sweeps: Dict[str, ScenarioSweep] = {}
    for mode, (plant, loops) in _MODE_SETUP.items():
        for horizon, (duration, dt) in _HORIZONS.items():
            e_name = f"{mode}/e-sweep/i30/{horizon}"
            sweeps[e_name] = ScenarioSweep(
                name=e_name,
                column=_MODE_COLUMN[mode],
                scenarios=[
                    Scenario(
                        name=f"{e_name}/e{e:g}",
                        plant=plant,
                        loops=list(loops),
                        orbit=_reference_orbit(e, 30.0),
                        input=_MODE_DOUBLET[mode],
                        duration=duration,
                        dt=dt,
                    )
                    for e in (0.0, 0.1, 0.2)
                ],
            )
            i_name = f"{mode}/i-sweep/e0.2/{horizon}"
            sweeps[i_name] = ScenarioSweep(
                name=i_name,
                column=_MODE_COLUMN[mode],
                scenarios=[
                    Scenario(
                        name=f"{i_name}/i{i:g}",
                        plant=plant,
                        loops=list(loops),
                        orbit=_reference_orbit(0.2, i),
                        input=_MODE_DOUBLET[mode],
                        duration=duration,
                        dt=dt,
                    )
                    for i in (0.0, 30.0)
                ],
            )

    theta_name = "longitudinal/initial-theta/i30/short"
    sweeps[theta_name] = ScenarioSweep(
        name=theta_name,
        column="theta_s_deg",
        scenarios=[
            Scenario(
                name=f"{theta_name}/e{e:g}",
                plant="paper-longitudinal",
                loops=["paper-longitudinal"],
                orbit=_reference_orbit(e, 30.0),
                duration=SHORT_HORIZON,
                dt=settings.DEFAULT_DT_SHORT,
                initial_state_deg={"theta_s": -1.5},
            )
            for e in (0.0, 0.1, 0.2)
        ],
    )

    open_name = "lateral/open-loop/e0.2/long"
    sweeps[open_name] = ScenarioSweep(
        name=open_name,
        column="phi_s_deg",
        scenarios=[
            Scenario(
                name=open_name,
                plant="paper-lateral",
                loops=[],
                orbit=_reference_orbit(0.2, 30.0),
                duration=LONG_HORIZON,
                dt=settings.DEFAULT_DT_LONG,
            )
        ],
    )
    return sweeps


def preset_sweep(name: str) -> ScenarioSweep:
    sweeps = preset_scenarios()
    if name not in sweeps:
        raise ConfigError(f"Unknown scenario preset '{name}', expected one of {', '.join(sweeps)}")
    return sweeps[name]
