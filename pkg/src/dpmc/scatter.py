"""Hybrid single-particle facade: geometric optics for large spheres,
Lorenz-Mie below the crossover radius, plus precomputed tables.

All public entry points take the relative particle index eta (= eta_p/eta_m)
and the real host index eta_m separately, mirroring how clouds are specified.
"""

from dataclasses import dataclass, field
import hashlib
import json
import math
import warnings

import numpy as np

from . import goa, mie
from .types import AmplitudePair
from .units import wavenumber_um


@dataclass(frozen=True)
class HybridPolicy:
    """Method routing: geometric optics at and above r_switch_um, Mie below."""
    r_switch_um: float = 2.0
    p_max_amplitude: int = 3
    p_set_extinction: tuple = (1,)

    def __post_init__(self):
        if self.r_switch_um <= 0:
            raise ValueError("r_switch_um must be positive")

    def uses_goa(self, radius_um) -> bool:
        return radius_um >= self.r_switch_um

    def key(self) -> str:
        return f"switch={self.r_switch_um}:pmax={self.p_max_amplitude}:pset={self.p_set_extinction}"


DEFAULT_POLICY = HybridPolicy()


def _goa_input(r, lam, eta, eta_m, policy):
    return goa.GoaInput(radius_um=r, wavelength_um=lam, eta=complex(eta),
                        eta_medium_real=float(eta_m),
                        p_max_amplitude=policy.p_max_amplitude,
                        p_set_extinction=policy.p_set_extinction)


def _mie_input(r, lam, eta, eta_m):
    return mie.MieInput(radius_um=r, wavelength_um=lam,
                        eta_particle=complex(eta) * complex(eta_m),
                        eta_medium=complex(eta_m))


def amplitudes(r, lam, eta, eta_m, theta, policy=DEFAULT_POLICY) -> AmplitudePair:
    """S1, S2 at one angle via the routed method."""
    if policy.uses_goa(r):
        return goa.goa_amplitudes(_goa_input(r, lam, eta, eta_m, policy), theta)
    return mie.mie_amplitudes(_mie_input(r, lam, eta, eta_m), theta)


def amplitudes_grid(r, lam, eta, eta_m, thetas, policy=DEFAULT_POLICY):
    """S1, S2 arrays over an angle grid via the routed method."""
    if policy.uses_goa(r):
        s1, s2, _ = goa.goa_amplitudes_grid(_goa_input(r, lam, eta, eta_m, policy), thetas)
        return s1, s2
    return mie.mie_amplitudes_grid(_mie_input(r, lam, eta, eta_m), thetas)


def cross_sections(r, lam, eta, eta_m, policy=DEFAULT_POLICY):
    """(C_t, C_s, C_a) in um^2 via the routed method.

    The geometric branch takes C_s as C_t - C_a (quadrature of the clamped
    ray sum would carry caustic bias); the Mie branch takes C_a as C_t - C_s.
    """
    eta = complex(eta)
    if policy.uses_goa(r):
        gi = _goa_input(r, lam, eta, eta_m, policy)
        ct = goa.goa_extinction_cross_section(gi)
        if eta.imag > 0:
            ca = goa.goa_absorption_cross_section(gi)
        else:
            ca = 0.0
        cs = ct - ca
        if cs < 0:
            warnings.warn(f"clamped negative C_s = {cs:.3g} um^2 at r = {r} um")
            cs = 0.0
        return ct, cs, ca
    mi = _mie_input(r, lam, eta, eta_m)
    coeffs = mie.mie_coefficients(mi)
    ct = mie.mie_extinction_cross_section(coeffs, mi)
    cs = mie.mie_scattering_cross_section(coeffs, mi)
    ca = ct - cs
    if ca < 0:
        ca = 0.0
        cs = ct
    return ct, cs, ca


def single_particle_phase(r, lam, eta, eta_m, theta, policy=DEFAULT_POLICY):
    """Phase function value (sr^-1): (|S1|^2 + |S2|^2) / (2 |k|^2 C_s)."""
    _, cs, _ = cross_sections(r, lam, eta, eta_m, policy)
    if cs <= 0:
        raise ValueError("undefined phase function: C_s = 0 (no scattering)")
    k = wavenumber_um(lam, abs(complex(eta_m)))
    pair = amplitudes(r, lam, eta, eta_m, theta, policy)
    return pair.intensity / (2.0 * k * k * cs)


@dataclass
class PhaseTable:
    """Tabulated phase function at one (radius, wavelength) with its CDF.

    values integrate to ~1 over the sphere under the trapezoid rule of the
    theta grid; cdf is the normalized cumulative distribution in theta used
    for inverse-CDF direction sampling (uniform azimuth).
    """
    theta: np.ndarray
    values: np.ndarray
    cdf: np.ndarray
    c_t: float
    c_s: float
    c_a: float
    raw_norm: float

    def pdf_theta(self, theta):
        """Interpolated phase value (sr^-1)."""
        return np.interp(theta, self.theta, self.values)

    def sample_theta(self, u):
        """Inverse-CDF sample of the scattering angle."""
        return np.interp(u, self.cdf, self.theta)


def _make_cdf(theta, values):
    """Cumulative distribution of pdf(theta) = 2 pi f(theta) sin(theta)."""
    integrand = 2.0 * math.pi * values * np.sin(theta)
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(theta)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    total = cdf[-1]
    if total <= 0:
        raise ValueError("phase table has zero mass")
    cdf = cdf / total
    # guard monotonicity for searchsorted/interp
    return np.maximum.accumulate(cdf), total


@dataclass
class ParticleOptics:
    """Per-radius optical data across wavelength samples."""
    radius_um: float
    entries: dict = field(default_factory=dict)  # wavelength_um -> PhaseTable

    def at(self, wavelength_um) -> PhaseTable:
        return self.entries[wavelength_um]


def build_phase_table(r, lam, eta, eta_m, n_theta=1801, policy=DEFAULT_POLICY) -> ParticleOptics:
    """Uniformly theta-sampled phase table plus CDF for inverse sampling."""
    if n_theta < 256:
        raise ValueError("n_theta must be >= 256")
    theta = np.linspace(0.0, math.pi, n_theta)
    ct, cs, ca = cross_sections(r, lam, eta, eta_m, policy)
    if cs <= 0:
        raise ValueError("undefined phase table: C_s = 0")
    s1, s2 = amplitudes_grid(r, lam, eta, eta_m, theta, policy)
    k = wavenumber_um(lam, abs(complex(eta_m)))
    values = (np.abs(s1) ** 2 + np.abs(s2) ** 2) / (2.0 * k * k * cs)
    cdf, raw = _make_cdf(theta, values)
    entry = PhaseTable(theta=theta, values=values / raw, cdf=cdf,
                       c_t=ct, c_s=cs, c_a=ca, raw_norm=raw)
    return ParticleOptics(radius_um=r, entries={lam: entry})


def dump_phase_csv(table: PhaseTable, path, header_extra=""):
    """CSV dump (theta_deg, f_p) of one phase table."""
    with open(path, "w") as fh:
        fh.write(f"# dpmc phase table{(' ' + header_extra) if header_extra else ''}\n")
        fh.write("theta_deg,f_p\n")
        for t, v in zip(table.theta, table.values):
            fh.write(f"{math.degrees(t):.6f},{v:.10e}\n")


def load_phase_csv(path):
    """Read back a (theta_deg, f_p) CSV into (theta_rad, values)."""
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    return np.radians(data[:, 0]), data[:, 1]


class OpticsTables:
    """Radius-binned per-wavelength optics used by the medium and renderer.

    Radii are mapped to log-spaced bins (nearest center); per (band, bin)
    the tables hold C_t/C_s/C_a (um^2) and the unpolarized intensity
    |S1|^2 + |S2|^2 on a theta grid.  Built once, then immutable.
    """

    CACHE_VERSION = 2

    def __init__(self, wavelengths_um, eta_of_lambda, eta_m=1.0, r_min_um=0.01,
                 r_max_um=2000.0, n_bins=64, n_theta=1801, policy=DEFAULT_POLICY):
        self.wavelengths_um = np.asarray(wavelengths_um, dtype=float)
        self.eta = [complex(eta_of_lambda(l)) if callable(eta_of_lambda)
                    else complex(eta_of_lambda) for l in self.wavelengths_um]
        self.eta_m = float(eta_m)
        self.policy = policy
        self.r_min_um = float(r_min_um)
        self.r_max_um = float(r_max_um)
        self.n_bins = int(n_bins)
        if self.r_max_um < self.r_min_um:
            raise ValueError("r_max_um < r_min_um")
        if self.r_max_um == self.r_min_um or self.n_bins == 1:
            self.n_bins = 1
            self.r_centers = np.array([self.r_min_um])
        else:
            self.r_centers = np.geomspace(self.r_min_um, self.r_max_um, self.n_bins)
        self.theta = np.linspace(0.0, math.pi, int(n_theta))
        self.k_um = wavenumber_um(self.wavelengths_um, self.eta_m)

        nb, nk, nt = len(self.wavelengths_um), self.n_bins, len(self.theta)
        self.ct_um2 = np.zeros((nb, nk))
        self.cs_um2 = np.zeros((nb, nk))
        self.ca_um2 = np.zeros((nb, nk))
        self.intensity = np.zeros((nb, nk, nt))
        self._built = False

    def build(self, cache_path=None):
        if self._built:
            return self
        if cache_path is not None and self._load_cache(cache_path):
            return self
        for b, lam in enumerate(self.wavelengths_um):
            eta = self.eta[b]
            for k, r in enumerate(self.r_centers):
                ct, cs, ca = cross_sections(r, lam, eta, self.eta_m, self.policy)
                s1, s2 = amplitudes_grid(r, lam, eta, self.eta_m, self.theta, self.policy)
                self.ct_um2[b, k] = ct
                self.cs_um2[b, k] = cs
                self.ca_um2[b, k] = ca
                self.intensity[b, k] = np.abs(s1) ** 2 + np.abs(s2) ** 2
        self._built = True
        if cache_path is not None:
            self._save_cache(cache_path)
        return self

    def cache_key(self) -> str:
        spec = dict(version=self.CACHE_VERSION,
                    wavelengths=[float(l) for l in self.wavelengths_um],
                    eta=[[e.real, e.imag] for e in self.eta],
                    eta_m=self.eta_m, r_min=self.r_min_um, r_max=self.r_max_um,
                    n_bins=self.n_bins, n_theta=len(self.theta),
                    policy=self.policy.key())
        return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:16]

    def _save_cache(self, path):
        np.savez_compressed(path, key=self.cache_key(), version=self.CACHE_VERSION,
                            ct=self.ct_um2, cs=self.cs_um2, ca=self.ca_um2,
                            intensity=self.intensity, theta=self.theta,
                            r_centers=self.r_centers)

    def _load_cache(self, path) -> bool:
        try:
            with np.load(path) as z:
                if str(z["key"]) != self.cache_key():
                    return False
                self.ct_um2 = z["ct"]
                self.cs_um2 = z["cs"]
                self.ca_um2 = z["ca"]
                self.intensity = z["intensity"]
        except (OSError, KeyError):
            return False
        self._built = True
        return True

    def bin_index(self, radius_um):
        """Nearest log-spaced bin per radius."""
        r = np.clip(np.asarray(radius_um, dtype=float), self.r_min_um, self.r_max_um)
        if self.n_bins == 1:
            idx = np.zeros(r.shape, dtype=np.int64)
        else:
            step = math.log(self.r_centers[1] / self.r_centers[0])
            idx = np.rint(np.log(r / self.r_centers[0]) / step).astype(np.int64)
            idx = np.clip(idx, 0, self.n_bins - 1)
        return idx

    def ct_lookup(self, band):
        """Callable radius_um -> C_t (um^2) for one wavelength band."""
        table = self.ct_um2[band]
        return lambda r_um: table[self.bin_index(r_um)]

    def dcs_lookup(self, band):
        """Callable (radius_um, theta) -> differential scattering cross
        section (|S1|^2+|S2|^2)/(2|k|^2), um^2/sr, for one band.
        Scalar theta, scalar or array radii."""
        inten = self.intensity[band]
        k2 = self.k_um[band] ** 2
        nt = len(self.theta)

        def f(r_um, theta):
            bins = self.bin_index(r_um)
            pos = float(theta) / math.pi * (nt - 1)
            c0 = min(int(pos), nt - 2)
            w = pos - c0
            vals = inten[bins, c0] * (1.0 - w) + inten[bins, c0 + 1] * w
            return vals / (2.0 * k2)
        return f
