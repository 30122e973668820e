"""Physical constants, unit conversions and the shared domain types.

Everything inside the package works in SI units. Electron-volts, micrometres
and motional quanta only appear at the edges (config files, CSV/JSON output,
and the handful of helpers below).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants as _codata


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = _codata.hbar
    planck: float = _codata.h
    electron_volt: float = _codata.electron_volt
    elementary_charge: float = _codata.e
    atomic_mass: float = _codata.atomic_mass


CODATA = PhysicalConstants()

HBAR = CODATA.hbar
PLANCK = CODATA.planck
EV = CODATA.electron_volt
E_CHARGE = CODATA.elementary_charge
AMU = CODATA.atomic_mass

UM = 1e-6
TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Argument outside the domain of a physical quantity."""


@dataclass(frozen=True)
class IonSpecies:
    """Mass (kg) and charge (C) of the transported ion."""

    mass: float
    charge: float
    label: str = "ion"

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"ion mass must be positive, got {self.mass!r}")
        if self.charge == 0 or not math.isfinite(self.charge):
            raise DomainError(f"ion charge must be finite and non-zero, got {self.charge!r}")

    @classmethod
    def from_amu(cls, mass_amu: float, charge_e: float = 1.0, label: str = "ion") -> IonSpecies:
        return cls(mass_amu * AMU, charge_e * E_CHARGE, label)


BE9 = IonSpecies.from_amu(9.0121831, 1.0, "9Be+")
MG24 = IonSpecies.from_amu(23.9850417, 1.0, "24Mg+")

SPECIES = {"be9": BE9, "mg24": MG24}


@dataclass(frozen=True)
class RFDrive:
    """RF trap drive: peak voltage V0 (V) and angular frequency (rad/s)."""

    peak_voltage: float = 200.0
    angular_freq: float = TWO_PI * 83e6

    def __post_init__(self):
        if not self.peak_voltage > 0:
            raise DomainError(f"RF peak voltage must be positive, got {self.peak_voltage!r}")
        if not self.angular_freq > 0:
            raise DomainError(f"RF drive frequency must be positive, got {self.angular_freq!r}")

    @property
    def freq_hz(self) -> float:
        return self.angular_freq / TWO_PI


DEFAULT_DRIVE = RFDrive()


def quanta_to_energy(nbar, axial_freq, include_zero_point=False):
    """Energy in eV of ``nbar`` motional quanta in a well at ``axial_freq`` (Hz).

    With ``include_zero_point`` the ground-state energy h*f/2 is added, which is
    the convention under which 5 quanta at 3.6 MHz correspond to 82 neV.
    """
    if not nbar >= 0:
        raise DomainError(f"nbar must be non-negative, got {nbar!r}")
    if not axial_freq > 0:
        raise DomainError(f"axial frequency must be positive, got {axial_freq!r}")
    n = nbar + 0.5 if include_zero_point else nbar
    return n * PLANCK * axial_freq / EV


def energy_to_quanta(energy, axial_freq):
    """Inverse of :func:`quanta_to_energy` without the zero-point term."""
    if not energy >= 0:
        raise DomainError(f"energy must be non-negative, got {energy!r}")
    if not axial_freq > 0:
        raise DomainError(f"axial frequency must be positive, got {axial_freq!r}")
    return energy * EV / (PLANCK * axial_freq)


def dbc_to_fractional_psd(level):
    """One-sided noise PSD relative to the carrier, S_V/V0^2 in 1/Hz.

    ``-inf`` maps to an exact zero, which is how a noiseless run is requested.
    """
    if math.isnan(level) or level == math.inf:
        raise DomainError(f"noise level must be finite or -inf, got {level!r}")
    if level == -math.inf:
        return 0.0
    return 10.0 ** (level / 10.0)
