"""Ion species data and the handful of physical constants used everywhere.

All quantities are SI; angular frequencies are rad/s (FWHM conventions for
linewidths). Electron-volts and MHz appear only at I/O boundaries.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc

E_CHARGE = _sc.e                    # C
EPS0 = _sc.epsilon_0                # F/m
KB = _sc.k                          # J/K
HBAR = _sc.hbar                     # J s
C_LIGHT = _sc.c                     # m/s
AMU = _sc.atomic_mass               # kg

COULOMB = E_CHARGE**2 / (4.0 * np.pi * EPS0)   # J m, for a pair of unit charges


@dataclass(frozen=True)
class Transition:
    """Optical cycling transition of an ion.

    gamma       natural linewidth, angular FWHM (rad/s)
    wavelength  resonant wavelength (m)
    i_sat       saturation intensity (W/m^2)
    """

    gamma: float
    wavelength: float
    i_sat: float

    def __post_init__(self):
        if self.gamma <= 0 or self.wavelength <= 0 or self.i_sat <= 0:
            raise ValueError("transition constants must be positive")

    @property
    def k0(self):
        """Resonant wavenumber 2*pi/lambda (1/m)."""
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True)
class IonSpecies:
    """Mass, charge and transition constants of one ion species."""

    name: str
    mass: float          # kg
    charge: float        # C
    transition: Transition

    def __post_init__(self):
        if self.mass <= 0 or self.charge <= 0:
            raise ValueError("mass and charge must be positive")


# 2S1/2 - 2P1/2 cycling transition; linewidth 2pi x 19.9 MHz,
# I_sat = 51.5 mW/cm^2. The wavelength is kept to 0.1 nm (369.5 nm) so that
# lambda/2 reproduces the 185 nm intracavity lattice period.
YB174 = IonSpecies(
    name="174Yb+",
    mass=173.9388664 * AMU,
    charge=E_CHARGE,
    transition=Transition(
        gamma=2.0 * np.pi * 19.9e6,
        wavelength=369.5e-9,
        i_sat=515.0,
    ),
)

# Common dark impurity isotope: off-resonant with the 174 cooling light but
# mechanically identical for chain equilibria (positions do not depend on mass).
YB172 = IonSpecies(
    name="172Yb+",
    mass=171.9363859 * AMU,
    charge=E_CHARGE,
    transition=Transition(
        gamma=2.0 * np.pi * 19.9e6,
        wavelength=369.5e-9,
        i_sat=515.0,
    ),
)

SPECIES = {s.name: s for s in (YB174, YB172)}


def get_species(name):
    try:
        return SPECIES[name]
    except KeyError:
        raise KeyError(
            f"unknown species {name!r}; available: {sorted(SPECIES)}"
        ) from None
