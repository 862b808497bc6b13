"""Physical constants and unit parsing at the configuration boundary.

Internally everything is in natural units (hbar = c = 1) with energies in eV.
"""
from __future__ import annotations

import math
import re

ALPHA = 1.0 / 137.035999084
E_CHARGE = math.sqrt(4.0 * math.pi * ALPHA)  # elementary charge, e^2 = 4 pi alpha
HBARC_EV_NM = 197.3269804  # eV * nm

ELECTRON_MASS_EV = 510998.95
PROTON_MASS_EV = 938272088.16
NEUTRON_MASS_EV = 939565420.52
ELECTRON_ANOMALY = 0.00115965218128
PROTON_ANOMALY = 1.79284734463
NEUTRON_MOMENT_NUCLEAR = -1.91304273  # in nuclear magnetons

BOHR_MAGNETON = E_CHARGE / (2.0 * ELECTRON_MASS_EV)  # 1/eV
NUCLEAR_MAGNETON = E_CHARGE / (2.0 * PROTON_MASS_EV)  # 1/eV

_ENERGY = {"eV": 1.0, "keV": 1e3, "MeV": 1e6, "GeV": 1e9}
_LENGTH_NM = {"fm": 1e-6, "pm": 1e-3, "nm": 1.0, "um": 1e3, "mm": 1e6}
_ANGLE = {"rad": 1.0, "deg": math.pi / 180.0}
_INV_ENERGY = {"/eV": 1.0, "/keV": 1e-3, "/MeV": 1e-6, "/GeV": 1e-9,
               "mu_B": BOHR_MAGNETON, "mu_N": NUCLEAR_MAGNETON}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


class UnitError(ValueError):
    pass


def _split(text: str) -> tuple[float, str]:
    if not isinstance(text, str):
        raise UnitError(f"expected a quantity string with a unit suffix, got {text!r}")
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}; expected e.g. '1.5 keV'")
    return float(m.group(1)), m.group(2)


def parse_energy(text: str) -> float:
    """Energy or momentum (eV/c) in eV."""
    value, unit = _split(text)
    if unit not in _ENERGY:
        raise UnitError(f"unit {unit!r} is not an energy unit ({', '.join(_ENERGY)})")
    return value * _ENERGY[unit]


def parse_length(text: str) -> float:
    """Length converted to natural units, 1/eV."""
    value, unit = _split(text)
    if unit not in _LENGTH_NM:
        raise UnitError(f"unit {unit!r} is not a length unit ({', '.join(_LENGTH_NM)})")
    return value * _LENGTH_NM[unit] / HBARC_EV_NM


def parse_momentum_spread(text: str) -> float:
    """Momentum spread in eV; a length L is converted to hbar*c/L."""
    value, unit = _split(text)
    if unit in _ENERGY:
        return value * _ENERGY[unit]
    if unit in _LENGTH_NM:
        if value <= 0:
            raise UnitError("a length used as a momentum spread must be positive")
        return HBARC_EV_NM / (value * _LENGTH_NM[unit])
    raise UnitError(f"unit {unit!r} is neither an energy nor a length unit")


def parse_angle(text: str) -> float:
    value, unit = _split(text)
    if unit not in _ANGLE:
        raise UnitError(f"unit {unit!r} is not an angle unit (rad, deg)")
    return value * _ANGLE[unit]


def parse_inverse_energy(text: str) -> float:
    """Magnetic moment in 1/eV (accepts /eV, /keV, /MeV, mu_B, mu_N)."""
    value, unit = _split(text)
    if unit not in _INV_ENERGY:
        raise UnitError(f"unit {unit!r} is not a magnetic-moment unit ({', '.join(_INV_ENERGY)})")
    return value * _INV_ENERGY[unit]


def length_to_momentum_spread(length_nm: float) -> float:
    """sigma = hbar c / L in eV for a length in nm."""
    return HBARC_EV_NM / length_nm
