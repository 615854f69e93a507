"""
Result tables and reports on disk.

CSV numbers use the shortest round-trip representation (pandas default), so
identical runs write byte-identical files.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from . import __version__
from .controller import LocusData
from .errors import InputError, SchemaError
from .simulator import ANGLE_STATES, SimulationResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RESULT_COLUMNS = ["t", "p", "q", "r", "phi_s_deg", "theta_s_deg", "psi_s_deg"]
INPUT_COLUMNS = ["de_applied", "dn_applied"]


class RunManifest(BaseModel):
    command: str
    inputs: List[str] = Field(default_factory=list)
    output_dir: str
    version: str = __version__
    config_hash: str = Field(..., description="SHA-256 of the canonical config JSON")


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def result_to_frame(result: SimulationResult) -> pd.DataFrame:
    """t, rates, angles in degrees, compensator states, applied inputs."""
    data: Dict[str, np.ndarray] = {"t": result.t}
    for name in result.state_names:
        values = result.column(name)
        if name in ANGLE_STATES:
            data[f"{name}_deg"] = np.degrees(values)
        else:
            data[name] = values
    data["de_applied"] = result.de_applied
    data["dn_applied"] = result.dn_applied
    frame = pd.DataFrame(data)
    compensator = [c for c in frame.columns if c.startswith("xc_")]
    return frame[RESULT_COLUMNS + compensator + INPUT_COLUMNS]


def locus_to_frame(locus: LocusData) -> pd.DataFrame:
    data: Dict[str, np.ndarray] = {"gain": locus.gains}
    for j in range(locus.eigenvalues.shape[1]):
        data[f"re_{j + 1}"] = locus.eigenvalues[:, j].real
        data[f"im_{j + 1}"] = locus.eigenvalues[:, j].imag
    return pd.DataFrame(data)


def locus_annotations(locus: LocusData) -> Dict[str, Any]:
    return {
        "critical_gains": [
            {"gain": c.gain, "re": c.eigenvalue.real, "im": c.eigenvalue.imag}
            for c in locus.critical_gains
        ],
        "breakaway": [{"gain": b.gain, "location": b.location} for b in locus.breakaway],
    }


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def write_json(payload: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_manifest(manifest: RunManifest, out_dir: PathLike) -> Path:
    return write_json(manifest.model_dump(), Path(out_dir) / "manifest.json")


def read_result_csv(path: PathLike, required: Optional[List[str]] = None) -> pd.DataFrame:
    """Load a result table and check its columns."""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise InputError(f"Result file not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise InputError(f"Cannot parse {path}: {exc}") from exc
    for column in required or ["t"]:
        if column not in frame.columns:
            raise SchemaError(f"{path} has no column '{column}'")
    return frame
