"""
Named plants, loops and figure aliases for the Palapa B2R class spacecraft.

Plant data are literal matrices (the physical parameters behind them are
not published).  The longitudinal plant keeps the gravity-gradient columns
at zero; the lateral and directional plants carry them.
"""

from typing import Dict, List, NamedTuple

from .controller import FeedbackLoop, RationalCompensator
from .dynamics import LiteralPlantConfig, PlantMatrices, load_plant_literal
from .errors import ConfigError

ORBIT_PERIOD = 7225.67
LONG_HORIZON = 10 * ORBIT_PERIOD
SHORT_HORIZON = 500.0

B_REFERENCE = [
    [0.0, 0.0],
    [-5.1218e-4, 0.0],
    [1.7735e-5, 0.0],
    [0.0, 0.0],
    [0.0, 1.0],
    [0.0, 0.0],
]

# Gravity-gradient terms zeroed, circular equatorial orbit
A_LONGITUDINAL = [
    [0.0, 0.0, 3.7113, 0.0, 0.0, 0.0],
    [0.49773, -9.7138e-4, -3.4402e-5, 0.0, 0.0, 0.0],
    [-4.0326, 3.3636e-5, -1.1912e-6, 0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
]

# Same data with the sixth row as printed in the source table
A_LONGITUDINAL_PRINTED = [row[:] for row in A_LONGITUDINAL[:5]] + [
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0]
]

A_LATERAL = [
    [0.0, 0.0, 3.7113, -6.1872e-7, 0.0, 0.0],
    [0.49773, -9.7138e-4, -3.4402e-5, 0.0, 7.2937e-7, 0.0],
    [-4.0326, 3.3636e-5, -1.1912e-6, 0.0, -1.3422e-7, 0.0],
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
]

PLANT_LITERALS: Dict[str, LiteralPlantConfig] = {
    "paper-longitudinal": LiteralPlantConfig(A=A_LONGITUDINAL, B=B_REFERENCE),
    "paper-longitudinal-printed": LiteralPlantConfig(A=A_LONGITUDINAL_PRINTED, B=B_REFERENCE),
    "paper-lateral": LiteralPlantConfig(A=A_LATERAL, B=B_REFERENCE),
    "paper-directional": LiteralPlantConfig(A=A_LATERAL, B=B_REFERENCE),
}

THETA_LOOP = FeedbackLoop(
    sensed_output="theta_s",
    compensator=RationalCompensator(K=-29800.0, zeros=(-0.498,), poles=(-1.0,)),
)
P_LOOP = FeedbackLoop(
    sensed_output="p",
    compensator=RationalCompensator(K=1.5e6, zeros=(-4.1,), poles=(-25.9, -2.63)),
)
R_LOOP = FeedbackLoop(
    sensed_output="r",
    compensator=RationalCompensator(K=300000.0),
)

LOOP_PRESETS: Dict[str, FeedbackLoop] = {
    "paper-longitudinal": THETA_LOOP,
    "paper-lateral": P_LOOP,
    "paper-directional": R_LOOP,
}

# Zero locations walked while shaping the pitch compensator (pole fixed at -1)
THETA_ZERO_STUDY = (-0.2, -0.46, -0.4819, -0.498, -0.5210)


class FigureAlias(NamedTuple):
    sweep: str
    column: str


FIGURE_PRESETS: Dict[int, FigureAlias] = {
    29: FigureAlias("longitudinal/e-sweep/i30/short", "theta_s_deg"),
    30: FigureAlias("longitudinal/e-sweep/i30/long", "theta_s_deg"),
    31: FigureAlias("longitudinal/i-sweep/e0.2/short", "theta_s_deg"),
    32: FigureAlias("longitudinal/i-sweep/e0.2/long", "theta_s_deg"),
    34: FigureAlias("lateral/e-sweep/i30/short", "phi_s_deg"),
    35: FigureAlias("lateral/e-sweep/i30/long", "phi_s_deg"),
    36: FigureAlias("lateral/i-sweep/e0.2/short", "phi_s_deg"),
    37: FigureAlias("lateral/i-sweep/e0.2/long", "phi_s_deg"),
    39: FigureAlias("directional/e-sweep/i30/short", "psi_s_deg"),
    40: FigureAlias("directional/e-sweep/i30/long", "psi_s_deg"),
    41: FigureAlias("directional/i-sweep/e0.2/short", "psi_s_deg"),
    42: FigureAlias("directional/i-sweep/e0.2/long", "psi_s_deg"),
}


def plant_preset(name: str) -> PlantMatrices:
    try:
        literal = PLANT_LITERALS[name]
    except KeyError:
        raise ConfigError(
            f"Unknown plant preset '{name}', expected one of {', '.join(PLANT_LITERALS)}"
        ) from None
    return load_plant_literal(
        literal, accept_literal_row6=name.endswith("-printed"), name=name
    )


def loop_preset(name: str) -> FeedbackLoop:
    try:
        return LOOP_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"Unknown loop preset '{name}', expected one of {', '.join(LOOP_PRESETS)}"
        ) from None


def figure_alias(number: int) -> FigureAlias:
    try:
        return FIGURE_PRESETS[number]
    except KeyError:
        known = ", ".join(str(n) for n in sorted(FIGURE_PRESETS))
        raise ConfigError(f"No preset reproduces figure {number}; known: {known}") from None


def list_presets() -> Dict[str, List[str]]:
    return {
        "plants": sorted(PLANT_LITERALS),
        "loops": sorted(LOOP_PRESETS),
        "figures": [f"{n}: {alias.sweep} ({alias.column})" for n, alias in sorted(FIGURE_PRESETS.items())],
    }
