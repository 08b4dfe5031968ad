"""Unit conventions and conversions.

Scene geometry is in meters; particle radii, wavelengths and cross
sections are in micrometers (um, um^2).  Every um <-> m conversion in the
package goes through this module so the 1e12 factors live in one place.
"""

import numpy as np

UM_PER_M = 1.0e6
M_PER_UM = 1.0e-6
UM2_PER_M2 = 1.0e12
M2_PER_UM2 = 1.0e-12


def um_to_m(x):
    return np.asarray(x, dtype=float) * M_PER_UM


def m_to_um(x):
    return np.asarray(x, dtype=float) * UM_PER_M


def um2_to_m2(x):
    """Cross section in um^2 to scene (m^2) units."""
    return np.asarray(x, dtype=float) * M2_PER_UM2


def wavenumber_um(wavelength_um, eta_medium=1.0):
    """Wave number k = 2*pi*eta_m/lambda in um^-1 (lambda is the vacuum
    wavelength; for an absorbing host only |k| enters any public formula)."""
    return 2.0 * np.pi * eta_medium / wavelength_um


def size_parameter(radius_um, wavelength_um, eta_medium=1.0):
    """Dimensionless size parameter alpha = 2*pi*eta_m*r/lambda."""
    return wavenumber_um(wavelength_um, eta_medium) * radius_um
