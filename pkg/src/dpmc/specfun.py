"""Special functions shared by the Mie and geometrical-optics paths."""

import numpy as np
from scipy import special


def bessel_j1(x):
    """First-order Bessel function of the first kind J1(x).

    Accepts scalars or arrays; arguments up to ~2e4 occur for the largest
    supported particles (alpha*sin(theta) with r <= 2000 um).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("bessel_j1 requires finite arguments")
    out = special.j1(x)
    return float(out) if out.ndim == 0 else out


def mie_angular_functions(cos_theta, n_max):
    """Angular functions pi_n, tau_n of the Mie series for n = 1..n_max.

    Upward recurrences (Bohren & Huffman style):
        pi_1 = 1, pi_2 = 3*cos(theta)
        pi_n = ((2n-1)*cos(theta)*pi_{n-1} - n*pi_{n-2}) / (n-1)
        tau_n = n*cos(theta)*pi_n - (n+1)*pi_{n-1}
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    mu = float(cos_theta)
    if not -1.0 <= mu <= 1.0:
        raise ValueError("cos_theta must lie in [-1, 1]")
    pi_seq = np.empty(n_max)
    tau_seq = np.empty(n_max)
    pi_prev = 0.0   # pi_0
    pi_cur = 1.0    # pi_1
    for n in range(1, n_max + 1):
        pi_seq[n - 1] = pi_cur
        tau_seq[n - 1] = n * mu * pi_cur - (n + 1) * pi_prev
        pi_next = ((2 * n + 1) * mu * pi_cur - (n + 1) * pi_prev) / n
        pi_prev, pi_cur = pi_cur, pi_next
    return pi_seq, tau_seq


def riccati_log_derivative(z, n_max, guard_orders=15):
    """Logarithmic derivative D_n(z) = psi_n'(z)/psi_n(z), n = 1..n_max.

    Downward recurrence D_{n-1} = n/z - 1/(D_n + n/z), started guard_orders
    above n_max from D = 0.  Stable for the large complex arguments the Mie
    coefficients need (upward recurrence diverges for absorbing spheres).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    z = complex(z)
    if z == 0:
        raise ValueError("riccati_log_derivative undefined at z = 0")
    n_start = n_max + guard_orders
    d = np.zeros(n_start + 1, dtype=complex)
    for n in range(n_start, 0, -1):
        ratio = n / z
        d[n - 1] = ratio - 1.0 / (d[n] + ratio)
    return d[1:n_max + 1]
