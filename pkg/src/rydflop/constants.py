"""Physical constants and the versioned species constants file.

The species file is JSON. Schema (version 1)::

    {
      "schema_version": 1,
      "species": "87Rb",
      "rydberg_constant_inf_hz": float,     # R_inf * c
      "mass_u": float,                      # atomic mass, unified units
      "electron_mass_u": float,
      "mu_b_over_h_hz_per_t": float,
      "ground_g_f": {"f1": float, "f2": float},
      "quantum_defects": {"<l><2j>/2": [delta0, delta2], ...},   # e.g. "d5/2"
      "dipoles": {"d_5s12_5p32_ea0": float,            # <5p3/2||er||5s1/2>, Edmonds
                  "rydberg_leg_calibration": float},   # multiplies the 5p-nd estimate
      "c6_43d52_ghz_um6": float
    }

``RYDFLOP_CONSTANTS`` in the environment overrides the packaged file.
"""

from __future__ import annotations

import json
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

from scipy import constants as sc

ENV_VAR = "RYDFLOP_CONSTANTS"
SCHEMA_VERSION = 1

HBAR = sc.hbar
H = sc.h
KB = sc.k
C = sc.c
EPS0 = sc.epsilon_0
E_CHARGE = sc.e
A0 = sc.physical_constants["Bohr radius"][0]
AMU = sc.atomic_mass
G = sc.g
TWO_PI = 2.0 * 3.141592653589793

REQUIRED_KEYS = {
    "schema_version": int,
    "rydberg_constant_inf_hz": float,
    "mass_u": float,
    "electron_mass_u": float,
    "mu_b_over_h_hz_per_t": float,
    "ground_g_f": dict,
    "quantum_defects": dict,
    "dipoles": dict,
    "c6_43d52_ghz_um6": float,
}


class ConstantsError(ValueError):
    """The constants file is missing or does not follow the schema."""


def _schema_text() -> str:
    return __doc__.split("::", 1)[1].split("``RYDFLOP")[0].rstrip()


def validate(data: dict) -> dict:
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ConstantsError(
            f"constants file lacks keys {missing}; expected schema:{_schema_text()}"
        )
    for key, typ in REQUIRED_KEYS.items():
        val = data[key]
        if typ is float and isinstance(val, (int, float)):
            continue
        if not isinstance(val, typ):
            raise ConstantsError(f"constants key {key!r} should be {typ.__name__}")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConstantsError(
            f"unsupported constants schema_version {data['schema_version']}"
        )
    for label, pair in data["quantum_defects"].items():
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConstantsError(f"quantum defect series {label!r} must be [delta0, delta2]")
    return data


def default_path() -> Path:
    return Path(str(resources.files("rydflop") / "data" / "constants.json"))


def constants_path(path: str | os.PathLike | None = None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else default_path()


@lru_cache(maxsize=8)
def _load(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConstantsError(
            f"constants file {p} not found; expected a JSON file with schema:{_schema_text()}"
        )
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConstantsError(f"constants file {p} is not valid JSON: {exc}") from exc
    return validate(data)


def load_constants(path: str | os.PathLike | None = None) -> dict:
    """Load (and cache) the species constants; returns a fresh copy."""
    return json.loads(json.dumps(_load(str(constants_path(path).resolve()))))


def rb87_mass_kg(consts: dict | None = None) -> float:
    consts = consts or load_constants()
    return consts["mass_u"] * AMU


def reduced_rydberg_hz(consts: dict | None = None) -> float:
    """Mass-corrected Rydberg constant, in Hz."""
    consts = consts or load_constants()
    return consts["rydberg_constant_inf_hz"] / (1.0 + consts["electron_mass_u"] / consts["mass_u"])
