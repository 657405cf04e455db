"""Axial potential model shared by the electrode solver and the chain solver.

The model is the potential *energy* of one ion along the trap axis:

    U(z) = sum_k c_k z^k  +  A * cos(2*pi*z/d + phase)

with c_k in J/m^k (k <= 4) and A in J. Convenience constructors accept eV
coefficients or a harmonic frequency. Wells of the cosine term (A > 0) sit
where the cosine is -1.
"""

from dataclasses import dataclass, replace

import numpy as np

from .constants import E_CHARGE

MAX_POLY_ORDER = 4


@dataclass(frozen=True)
class AxialPotentialModel:
    coeffs: tuple          # c0..c4, J/m^k (shorter tuples allowed)
    amplitude: float = 0.0  # cosine amplitude, J
    period: float = 160e-6  # m
    phase: float = 0.0      # rad

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if len(self.coeffs) > MAX_POLY_ORDER + 1:
            raise ValueError("polynomial limited to quartic order")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    # -- constructors -------------------------------------------------------

    @classmethod
    def harmonic(cls, omega, species, center=0.0):
        """Pure harmonic well 0.5*m*omega^2*(z - center)^2."""
        k2 = 0.5 * species.mass * omega**2
        return cls(coeffs=(k2 * center**2, -2.0 * k2 * center, k2))

    @classmethod
    def from_ev(cls, coeffs_ev, amplitude_ev=0.0, period=160e-6, phase=0.0):
        return cls(
            coeffs=tuple(c * E_CHARGE for c in coeffs_ev),
            amplitude=amplitude_ev * E_CHARGE,
            period=period,
            phase=phase,
        )

    # -- evaluation ---------------------------------------------------------

    def energy(self, z):
        z = np.asarray(z, dtype=float)
        u = np.zeros_like(z)
        for k in range(len(self.coeffs) - 1, -1, -1):
            u = u * z + self.coeffs[k]
        if self.amplitude != 0.0:
            u = u + self.amplitude * np.cos(2.0 * np.pi * z / self.period + self.phase)
        return u

    def denergy(self, z):
        z = np.asarray(z, dtype=float)
        du = np.zeros_like(z)
        for k in range(len(self.coeffs) - 1, 0, -1):
            du = du * z + k * self.coeffs[k]
        if self.amplitude != 0.0:
            w = 2.0 * np.pi / self.period
            du = du - self.amplitude * w * np.sin(w * z + self.phase)
        return du

    def d2energy(self, z):
        z = np.asarray(z, dtype=float)
        d2 = np.zeros_like(z)
        for k in range(len(self.coeffs) - 1, 1, -1):
            d2 = d2 * z + k * (k - 1) * self.coeffs[k]
        if self.amplitude != 0.0:
            w = 2.0 * np.pi / self.period
            d2 = d2 - self.amplitude * w**2 * np.cos(w * z + self.phase)
        return d2

    # -- helpers ------------------------------------------------------------

    @property
    def amplitude_ev(self):
        return self.amplitude / E_CHARGE

    def with_amplitude(self, amplitude):
        """Same potential with a different cosine amplitude (J)."""
        return replace(self, amplitude=float(amplitude))

    def shifted(self, delta):
        """Potential translated by delta: U'(z) = U(z - delta)."""
        c = np.zeros(len(self.coeffs))
        # binomial re-expansion of sum c_k (z - delta)^k
        from math import comb

        for k, ck in enumerate(self.coeffs):
            for j in range(k + 1):
                c[j] += ck * comb(k, j) * (-delta) ** (k - j)
        w = 2.0 * np.pi / self.period
        return replace(
            self,
            coeffs=tuple(c),
            phase=self.phase - w * delta,
        )

    def well_positions(self, z_lo, z_hi):
        """Positions of the cosine wells (energy minima of the A-term) in range."""
        if self.amplitude == 0.0:
            return np.array([])
        # cos(w z + phase) = -1  (A > 0) or +1 (A < 0)
        target = np.pi if self.amplitude > 0 else 0.0
        w = 2.0 * np.pi / self.period
        n_lo = int(np.ceil((w * z_lo + self.phase - target) / (2.0 * np.pi)))
        n_hi = int(np.floor((w * z_hi + self.phase - target) / (2.0 * np.pi)))
        n = np.arange(n_lo, n_hi + 1)
        return (target - self.phase + 2.0 * np.pi * n) / w

    def nearest_well_index(self, z):
        """Integer lattice-well index of the well nearest to each z."""
        if self.amplitude == 0.0:
            raise ValueError("no lattice wells: cosine amplitude is zero")
        target = np.pi if self.amplitude > 0 else 0.0
        w = 2.0 * np.pi / self.period
        return np.rint((w * np.asarray(z, dtype=float) + self.phase - target)
                       / (2.0 * np.pi)).astype(int)
