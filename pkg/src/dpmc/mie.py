"""Lorenz-Mie scattering amplitudes and cross sections for a homogeneous sphere.

Series form: S1 = sum (2n+1)/(n(n+1)) [a_n pi_n + b_n tau_n], S2 with the
a/b roles swapped, truncated at n_max = ceil(|alpha| + 4.3|alpha|^(1/3) + 1).
The a_n/b_n coefficients use the standard stabilized scheme: logarithmic
derivative D_n by downward recurrence, Riccati-Bessel psi_n/xi_n upward.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .specfun import riccati_log_derivative
from .types import AmplitudePair

ALPHA_MAX = 2.1e4


@dataclass(frozen=True)
class MieInput:
    """Sphere + illumination description. Radii and wavelengths in um."""
    radius_um: float
    wavelength_um: float
    eta_particle: complex
    eta_medium: complex = complex(1.0)

    def __post_init__(self):
        if self.radius_um <= 0 or self.wavelength_um <= 0:
            raise ValueError("radius and wavelength must be positive")
        if self.eta_medium == 0:
            raise ValueError("eta_medium must be nonzero")
        if self.eta.real <= 0:
            raise ValueError("relative index must have positive real part")
        a = abs(self.alpha)
        if not 0 < a <= ALPHA_MAX:
            raise ValueError(
                f"size parameter |alpha| = {a:.3g} outside supported range (0, {ALPHA_MAX:g}]")

    @property
    def eta(self):
        """Relative refractive index eta_p/eta_m."""
        return complex(self.eta_particle) / complex(self.eta_medium)

    @property
    def alpha(self):
        """Size parameter 2*pi*eta_m*r/lambda (complex for absorbing host)."""
        return 2.0 * math.pi * complex(self.eta_medium) * self.radius_um / self.wavelength_um


def series_terms(alpha):
    """Number of series terms n_max = ceil(|alpha| + 4.3|alpha|^(1/3) + 1)."""
    a = abs(alpha)
    return int(math.ceil(a + 4.3 * a ** (1.0 / 3.0) + 1.0))


@dataclass(frozen=True)
class MieCoefficients:
    a: np.ndarray
    b: np.ndarray
    n_max: int = field(default=0)

    def __post_init__(self):
        n = len(self.a)
        if len(self.b) != n:
            raise ValueError("a and b must have equal length")
        if self.n_max == 0:
            object.__setattr__(self, "n_max", n)
        elif self.n_max != n:
            raise ValueError("n_max inconsistent with coefficient length")


def mie_coefficients(inp: MieInput) -> MieCoefficients:
    """Lorenz-Mie coefficients a_n, b_n for n = 1..n_max."""
    x = complex(inp.alpha)
    m = inp.eta
    if x.imag == 0:
        x = x.real  # keep the Riccati-Bessel recurrences in real arithmetic
    n_max = series_terms(x)

    d = riccati_log_derivative(m * complex(x), n_max)

    a = np.empty(n_max, dtype=complex)
    b = np.empty(n_max, dtype=complex)
    # psi_{-1} = cos x, psi_0 = sin x; chi_{-1} = -sin x, chi_0 = cos x
    psi_prev, psi = np.cos(x), np.sin(x)
    chi_prev, chi = -np.sin(x), np.cos(x)
    for n in range(1, n_max + 1):
        psi_n = (2 * n - 1) / x * psi - psi_prev
        chi_n = (2 * n - 1) / x * chi - chi_prev
        xi_n = psi_n - 1j * chi_n
        xi = psi - 1j * chi
        da = d[n - 1] / m + n / x
        db = d[n - 1] * m + n / x
        a[n - 1] = (da * psi_n - psi) / (da * xi_n - xi)
        b[n - 1] = (db * psi_n - psi) / (db * xi_n - xi)
        psi_prev, psi = psi, psi_n
        chi_prev, chi = chi, chi_n
    return MieCoefficients(a=a, b=b, n_max=n_max)


def _amplitudes_from_coeffs(coeffs: MieCoefficients, mu):
    """S1, S2 at cos(theta) values mu (vectorized over angles)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    s1 = np.zeros(mu.shape, dtype=complex)
    s2 = np.zeros(mu.shape, dtype=complex)
    pi_prev = np.zeros_like(mu)
    pi_cur = np.ones_like(mu)
    a, b = coeffs.a, coeffs.b
    for n in range(1, coeffs.n_max + 1):
        tau = n * mu * pi_cur - (n + 1) * pi_prev
        fn = (2 * n + 1) / (n * (n + 1))
        s1 += fn * (a[n - 1] * pi_cur + b[n - 1] * tau)
        s2 += fn * (b[n - 1] * pi_cur + a[n - 1] * tau)
        pi_next = ((2 * n + 1) * mu * pi_cur - (n + 1) * pi_prev) / n
        pi_prev, pi_cur = pi_cur, pi_next
    return s1, s2


def mie_amplitudes(inp: MieInput, theta: float, coeffs: MieCoefficients | None = None) -> AmplitudePair:
    """Scattering amplitudes S1(theta), S2(theta)."""
    if not 0.0 <= theta <= math.pi:
        raise ValueError("theta must lie in [0, pi]")
    if coeffs is None:
        coeffs = mie_coefficients(inp)
    s1, s2 = _amplitudes_from_coeffs(coeffs, math.cos(theta))
    return AmplitudePair(complex(s1[0]), complex(s2[0]))


def mie_amplitudes_grid(inp: MieInput, thetas, coeffs: MieCoefficients | None = None):
    """S1, S2 arrays over an angle grid (one pass of the recurrences)."""
    if coeffs is None:
        coeffs = mie_coefficients(inp)
    thetas = np.asarray(thetas, dtype=float)
    return _amplitudes_from_coeffs(coeffs, np.cos(thetas))


def mie_extinction_cross_section(coeffs: MieCoefficients, inp: MieInput) -> float:
    """Extinction cross section (um^2): (lambda^2/2pi) sum (2n+1) Re{(a_n+b_n)/eta_m^2}."""
    n = np.arange(1, coeffs.n_max + 1)
    s = np.sum((2 * n + 1) * ((coeffs.a + coeffs.b) / complex(inp.eta_medium) ** 2).real)
    return inp.wavelength_um ** 2 / (2.0 * math.pi) * s


def mie_scattering_cross_section(coeffs: MieCoefficients, inp: MieInput) -> float:
    """Scattering cross section (um^2), including the host-absorption factor.

    For Im{eta_m} = 0 the gamma/beta correction reduces to 1 and the classic
    (lambda^2/2pi|eta_m|^2) sum (2n+1)(|a_n|^2+|b_n|^2) remains.
    """
    em = complex(inp.eta_medium)
    if em.imag < 0:
        raise ValueError("host medium gain (Im eta_m < 0) unsupported")
    beta = 4.0 * math.pi * inp.radius_um * em.imag / inp.wavelength_um
    if beta > 1e-6:
        gamma = 2.0 * (1.0 + (beta - 1.0) * math.exp(beta)) / beta ** 2
    else:
        # series limit, avoids 0/0 at beta = 0
        gamma = 1.0 + 2.0 * beta / 3.0 + beta ** 2 / 4.0
    n = np.arange(1, coeffs.n_max + 1)
    s = np.sum((2 * n + 1) * (np.abs(coeffs.a) ** 2 + np.abs(coeffs.b) ** 2))
    pref = inp.wavelength_um ** 2 * math.exp(-beta) / (2.0 * math.pi * gamma * abs(em) ** 2)
    return pref * s


def mie_phase_function(inp: MieInput, theta, coeffs: MieCoefficients | None = None):
    """Phase function (sr^-1): (|S1|^2+|S2|^2) / (4pi sum (2n+1)(|a_n|^2+|b_n|^2)).

    Integrates to 1 over the sphere.  Accepts a scalar angle or a grid.
    """
    if coeffs is None:
        coeffs = mie_coefficients(inp)
    n = np.arange(1, coeffs.n_max + 1)
    norm = 4.0 * math.pi * np.sum((2 * n + 1) * (np.abs(coeffs.a) ** 2 + np.abs(coeffs.b) ** 2))
    scalar = np.isscalar(theta)
    s1, s2 = _amplitudes_from_coeffs(coeffs, np.cos(np.atleast_1d(theta)))
    f = (np.abs(s1) ** 2 + np.abs(s2) ** 2) / norm
    return float(f[0]) if scalar else f
