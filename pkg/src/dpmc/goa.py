"""Geometrical optics approximation of sphere scattering.

The scattered field is a superposition of Fraunhofer diffraction and
geometric ray orders p (p = 0 external reflection, p >= 1 transmission
after p-1 internal reflections).  Each order contributes

    S_j^(p) = alpha * eps_j(theta_i) * xi_p
              * sqrt(sin(2 theta_i) / (2 sin(theta) |d theta_p/d theta_i|))
              * exp(i (phi_p + phi_f))

where the deflection angle is theta_p = 2 p theta_t - 2 theta_i - (p-1) pi
and the scattering angle folds it into [0, pi] via theta = q(theta_p - 2 pi l).

Absorbing particles use a real effective index/refraction angle for the
geometry and complex Fresnel coefficients for amplitude and phase; the
chord attenuation factor is xi_p = exp(-2 chi p alpha cos^2(theta_t')/eta_m).
For a real index the same code path reduces to the classic non-absorbing
form (xi_p = 1, real Fresnel).
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .specfun import bessel_j1
from .types import AmplitudePair

N_SCAN = 4096          # incident-angle brackets for the theta -> theta_i inversion
BISECT_ITERS = 45      # bracket width (pi/2)/4096 / 2^45 << 1e-12 rad
DERIV_CLAMP = 1e-9     # caustic clamp on |d theta_p / d theta_i|
THETA_CLAMP = 1e-4     # forward/backward clamp (rad) for the geometric terms


class TotalInternalReflection(ValueError):
    """Transmitted ray order does not exist at this incidence (eta_eff < 1)."""


@dataclass(frozen=True)
class GoaInput:
    """Sphere + illumination description for the geometric-optics path.

    eta is the relative refractive index (particle over host); the host
    index must be real here.  p_max_amplitude truncates the ray-order sum
    for amplitudes, p_set_extinction selects the odd orders kept in the
    analytic extinction formula.
    """
    radius_um: float
    wavelength_um: float
    eta: complex
    eta_medium_real: float = 1.0
    p_max_amplitude: int = 3
    p_set_extinction: tuple = (1,)

    def __post_init__(self):
        if self.radius_um <= 0 or self.wavelength_um <= 0:
            raise ValueError("radius and wavelength must be positive")
        if self.eta_medium_real <= 0:
            raise ValueError("host index must be positive")
        eta = complex(self.eta)
        if eta.real <= 0 or eta.imag < 0:
            raise ValueError("relative index needs Re > 0 and Im >= 0")
        if not 0 <= self.p_max_amplitude <= 16:
            raise ValueError("p_max_amplitude must be in [0, 16]")
        pset = tuple(self.p_set_extinction)
        if any(p < 1 or p % 2 == 0 for p in pset):
            raise ValueError("p_set_extinction must contain odd positive orders")
        object.__setattr__(self, "p_set_extinction", pset)

    @property
    def alpha(self) -> float:
        return 2.0 * math.pi * self.eta_medium_real * self.radius_um / self.wavelength_um

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi * self.eta_medium_real / self.wavelength_um


@dataclass
class RayOrderContribution:
    """One solved ray order: incidence geometry and (optionally) amplitudes."""
    p: int
    theta_i: float
    theta_t: float
    q: int
    l: int
    s: int
    amplitude_s1: complex | None = None
    amplitude_s2: complex | None = None
    caustic_clamped: bool = False


def effective_index(eta, eta_medium_real, theta_i):
    """Effective real refraction index eta', absorption coefficient chi and
    refraction angle theta_t' at incidence theta_i.

    eta is the relative particle index; eta' and chi are on the absolute
    scale, with Snell's law eta_m sin(theta_i) = eta' sin(theta_t').  For
    Im(eta) = 0 this reduces exactly to eta' = Re(eta)*eta_m, chi = 0.
    """
    eta = complex(eta)
    em = float(eta_medium_real)
    er = eta.real * em
    ei = eta.imag * em
    theta_i = np.asarray(theta_i, dtype=float)
    u = (em * np.sin(theta_i)) ** 2
    s2 = er * er - ei * ei
    root = np.hypot(2.0 * er * ei, s2 - u)
    eta_prime = np.sqrt(np.maximum(0.5 * (s2 + u + root), 0.0))
    chi = np.sqrt(np.maximum(0.5 * (-s2 + u + root), 0.0))
    sin_tt = np.where(eta_prime > 0, em * np.sin(theta_i) / np.where(eta_prime > 0, eta_prime, 1.0), np.inf)
    theta_t = np.arcsin(np.clip(sin_tt, -1.0, 1.0))
    if np.ndim(theta_i) == 0:
        return float(eta_prime), float(chi), float(theta_t)
    return eta_prime, chi, theta_t


def deflection_angle(p, theta_i, eta_effective):
    """Deflection theta_p = 2 p theta_t - 2 theta_i - (p-1) pi, with
    sin(theta_i) = eta_eff sin(theta_t)."""
    if p < 0:
        raise ValueError("ray order p must be >= 0")
    if not 0.0 <= theta_i <= math.pi / 2:
        raise ValueError("theta_i must lie in [0, pi/2]")
    if p == 0:
        return math.pi - 2.0 * theta_i
    sin_tt = math.sin(theta_i) / eta_effective
    if sin_tt > 1.0:
        raise TotalInternalReflection(
            f"sin(theta_i)/eta_eff = {sin_tt:.6g} > 1 at theta_i = {theta_i:.6g}")
    theta_t = math.asin(sin_tt)
    return 2.0 * p * theta_t - 2.0 * theta_i - (p - 1) * math.pi


def fraunhofer_amplitude(alpha, theta):
    """Diffraction amplitude S_D = alpha^2 J1(alpha sin theta)/(alpha sin theta).

    The theta -> 0 limit alpha^2/2 is taken analytically.  Only meaningful
    for theta in [0, pi/2); the total-amplitude assembly enforces the split.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = alpha * np.sin(np.asarray(theta, dtype=float))
    small = np.abs(x) < 1e-8
    ratio = np.where(small, 0.5, bessel_j1(np.where(small, 1.0, x)) / np.where(small, 1.0, x))
    out = alpha ** 2 * ratio
    return complex(out) if out.ndim == 0 else out.astype(complex)


def _fold(theta_p):
    """Scattering angle in [0, pi] for a deflection angle: q(theta_p - 2 pi l)."""
    return np.arccos(np.cos(theta_p))


def _recover_q_l(theta_p, theta):
    """q in {1,-1} and integer l with q(theta_p - 2 pi l) = theta."""
    m = np.mod(theta_p, 2.0 * math.pi)
    q = np.where(m <= math.pi, 1, -1)
    l = np.where(q == 1,
                 np.rint((theta_p - theta) / (2.0 * math.pi)),
                 np.rint((theta_p + theta) / (2.0 * math.pi)))
    return q.astype(np.int64), l.astype(np.int64)


def _geometry(inp: GoaInput, p, theta_i):
    """Vectorized ray geometry: theta_t, deflection, derivative, chi.

    Returns (theta_t, theta_p, dtheta_p, eta_eff, chi, valid).  TIR entries
    are marked invalid.
    """
    theta_i = np.asarray(theta_i, dtype=float)
    em = inp.eta_medium_real
    eta_prime, chi, _ = effective_index(inp.eta, em, theta_i)
    eta_prime = np.asarray(eta_prime, dtype=float)
    chi = np.asarray(chi, dtype=float)
    si, ci = np.sin(theta_i), np.cos(theta_i)
    if p == 0:
        theta_t = np.zeros_like(theta_i)
        theta_p = math.pi - 2.0 * theta_i
        dtheta_p = np.full_like(theta_i, -2.0)
        return theta_t, theta_p, dtheta_p, eta_prime / em, chi, np.ones(theta_i.shape, dtype=bool)
    sin_tt = em * si / eta_prime
    valid = sin_tt <= 1.0
    sin_tt = np.clip(sin_tt, 0.0, 1.0)
    theta_t = np.arcsin(sin_tt)
    cos_tt = np.sqrt(np.maximum(1.0 - sin_tt ** 2, 0.0))
    theta_p = 2.0 * p * theta_t - 2.0 * theta_i - (p - 1) * math.pi

    # d eta'/d theta_i via u = (eta_m sin theta_i)^2; exactly 0 for real eta
    eta = complex(inp.eta)
    er, ei = eta.real * em, eta.imag * em
    u = (em * si) ** 2
    s2 = er * er - ei * ei
    root = np.hypot(2.0 * er * ei, s2 - u)
    root = np.where(root == 0.0, 1.0, root)
    d_eta2_du = 0.5 * (1.0 + (u - s2) / root)
    du = 2.0 * em * em * si * ci
    d_eta_prime = d_eta2_du * du / (2.0 * eta_prime)

    with np.errstate(divide="ignore", invalid="ignore"):
        d_sin_tt = em * ci / eta_prime - em * si * d_eta_prime / eta_prime ** 2
        dtheta_t = d_sin_tt / np.where(cos_tt > 0, cos_tt, np.inf)
    dtheta_p = 2.0 * p * dtheta_t - 2.0
    valid &= np.isfinite(theta_p)
    return theta_t, theta_p, dtheta_p, eta_prime / em, chi, valid


def _fresnel(eta: complex, theta_i):
    """Complex Fresnel amplitude reflection coefficients (R_perp, R_par)."""
    theta_i = np.asarray(theta_i, dtype=float)
    ci = np.cos(theta_i).astype(complex)
    st = np.sin(theta_i) / eta
    ct = np.sqrt(1.0 - st * st)
    r1 = (ci - eta * ct) / (ci + eta * ct)
    r2 = (eta * ci - ct) / (eta * ci + ct)
    return r1, r2


def _epsilon(eta: complex, theta_i, p):
    """Reflection/refraction amplitude fraction eps_j of Eq-order p."""
    r1, r2 = _fresnel(eta, theta_i)
    if p == 0:
        return r1, r2
    e1 = (1.0 - r1 * r1) * (-r1) ** (p - 1)
    e2 = (1.0 - r2 * r2) * (-r2) ** (p - 1)
    return e1, e2


def _emergent_arrays(inp: GoaInput, p, theta_i, theta):
    """Amplitudes of solved roots (vectorized).  Returns s1, s2, meta."""
    theta_i = np.asarray(theta_i, dtype=float)
    theta = np.asarray(theta, dtype=float)
    alpha = inp.alpha
    theta_t, theta_p, dtheta_p, eta_eff, chi, _ = _geometry(inp, p, theta_i)
    q, l = _recover_q_l(theta_p, theta)
    s = np.where(dtheta_p >= 0.0, 1, -1)

    clamped = np.abs(dtheta_p) < DERIV_CLAMP
    denom = np.maximum(np.abs(dtheta_p), DERIV_CLAMP)
    theta_eff = np.clip(theta, THETA_CLAMP, math.pi - THETA_CLAMP)
    geo = np.sqrt(np.sin(2.0 * theta_i) / (2.0 * np.sin(theta_eff) * denom))

    e1, e2 = _epsilon(complex(inp.eta), theta_i, p)
    cos_tt = np.cos(theta_t)
    phi_p = 2.0 * alpha * (np.cos(theta_i) - p * eta_eff * cos_tt)
    phi_f = 0.5 * math.pi * (1.0 + p - 2.0 * l - 0.5 * s - 0.5 * q)
    xi = np.exp(-2.0 * chi * p * alpha * cos_tt ** 2 / inp.eta_medium_real)
    phase = np.exp(1j * (phi_p + phi_f)) * xi
    s1 = alpha * e1 * geo * phase
    s2 = alpha * e2 * geo * phase
    return s1, s2, (theta_t, q, l, s, clamped)


def emergent_amplitude(contribution: RayOrderContribution, inp: GoaInput) -> AmplitudePair:
    """Amplitude pair of one solved ray order at its scattering angle."""
    c = contribution
    theta = _fold(deflection_angle_safe(inp, c.p, c.theta_i))
    s1, s2, (_, _, _, _, clamped) = _emergent_arrays(
        inp, c.p, np.array([c.theta_i]), np.array([theta]))
    c.amplitude_s1 = complex(s1[0])
    c.amplitude_s2 = complex(s2[0])
    c.caustic_clamped = bool(clamped[0])
    return AmplitudePair(c.amplitude_s1, c.amplitude_s2)


def deflection_angle_safe(inp: GoaInput, p, theta_i):
    """Deflection angle through the effective-index geometry (absorbing-safe)."""
    _, theta_p, _, _, _, valid = _geometry(inp, p, np.asarray(theta_i, dtype=float))
    if not np.all(valid):
        raise TotalInternalReflection(f"order p={p} at theta_i={theta_i}")
    return float(theta_p) if np.ndim(theta_i) == 0 else theta_p


def solve_incident_angles(p, theta, eta_effective):
    """All incidence angles mapping ray order p onto scattering angle theta.

    Scans N_SCAN uniform brackets over theta_i in [0, pi/2] and bisects each
    sign change of the folded deflection angle.  The empty set is a valid
    result (e.g. below the rainbow angle of order p = 2).
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError("theta must lie in [0, pi]")
    inp = GoaInput(radius_um=1.0, wavelength_um=1.0, eta=complex(eta_effective),
                   p_max_amplitude=0)
    roots = _solve_roots(inp, p, np.array([theta]))
    out = []
    for theta_i in roots[0]:
        theta_t, theta_p, dtheta_p, _, _, _ = _geometry(inp, p, np.array([theta_i]))
        q, l = _recover_q_l(theta_p, np.array([theta]))
        s = 1 if dtheta_p[0] >= 0 else -1
        out.append(RayOrderContribution(
            p=p, theta_i=float(theta_i), theta_t=float(theta_t[0]),
            q=int(q[0]), l=int(l[0]), s=s))
    return out


def _solve_roots(inp: GoaInput, p, targets):
    """Root sets theta_i for each target scattering angle (list of arrays)."""
    grid = np.linspace(0.0, 0.5 * math.pi, N_SCAN + 1)
    _, theta_p, _, _, _, valid = _geometry(inp, p, grid)
    g = np.where(valid, _fold(theta_p), np.nan)

    order = np.argsort(targets, kind="stable")
    ts = targets[order]
    lo = np.minimum(g[:-1], g[1:])
    hi = np.maximum(g[:-1], g[1:])
    ok = np.isfinite(lo) & np.isfinite(hi)
    iv = np.nonzero(ok)[0]
    li = np.searchsorted(ts, lo[iv], side="right")
    ri = np.searchsorted(ts, hi[iv], side="left")
    counts = np.maximum(ri - li, 0)
    total = int(counts.sum())

    roots = [[] for _ in range(len(targets))]
    if total:
        iv_rep = np.repeat(iv, counts)
        starts = np.cumsum(counts) - counts
        offs = np.arange(total) - np.repeat(starts, counts)
        tpos = np.repeat(li, counts) + offs
        tgt = ts[tpos]

        ta = grid[iv_rep]
        tb = grid[iv_rep + 1]
        ga = g[iv_rep]
        for _ in range(BISECT_ITERS):
            tm = 0.5 * (ta + tb)
            _, tp_m, _, _, _, vm = _geometry(inp, p, tm)
            gm = np.where(vm, _fold(tp_m), np.nan)
            left = (ga - tgt) * (gm - tgt) > 0
            ta = np.where(left, tm, ta)
            ga = np.where(left, gm, ga)
            tb = np.where(left, tb, tm)
        tm = 0.5 * (ta + tb)
        for k in range(total):
            roots[order[tpos[k]]].append(tm[k])

    # roots exactly at scan nodes (the strict bracket test misses them)
    node_ok = np.isfinite(g)
    pos = np.searchsorted(ts, np.where(node_ok, g, -1.0), side="left")
    for j in np.nonzero(node_ok & (pos < len(ts)))[0]:
        tp = pos[j]
        while tp < len(ts) and ts[tp] == g[j]:
            if not any(abs(r - grid[j]) < 1e-9 for r in roots[order[tp]]):
                roots[order[tp]].append(grid[j])
            tp += 1
    return [np.asarray(r) for r in roots]


def goa_amplitudes_grid(inp: GoaInput, thetas):
    """Total GOA amplitudes over an angle grid.

    Returns (s1, s2, caustic_count) arrays; the geometric ray sum runs over
    p = 0..p_max_amplitude with all roots per order, and the Fraunhofer term
    is added for theta < pi/2.
    """
    thetas = np.asarray(thetas, dtype=float)
    s1 = np.zeros(thetas.shape, dtype=complex)
    s2 = np.zeros(thetas.shape, dtype=complex)
    caustic = np.zeros(thetas.shape, dtype=np.int64)

    theta_geo = np.clip(thetas, THETA_CLAMP, math.pi - THETA_CLAMP)
    for p in range(inp.p_max_amplitude + 1):
        roots = _solve_roots(inp, p, theta_geo)
        lens = np.array([len(r) for r in roots])
        if lens.sum() == 0:
            continue
        tgt_idx = np.repeat(np.arange(len(thetas)), lens)
        ti = np.concatenate([r for r in roots if len(r)])
        c1, c2, (_, _, _, _, clamped) = _emergent_arrays(inp, p, ti, theta_geo[tgt_idx])
        np.add.at(s1, tgt_idx, c1)
        np.add.at(s2, tgt_idx, c2)
        np.add.at(caustic, tgt_idx, clamped.astype(np.int64))

    forward = thetas < 0.5 * math.pi
    if np.any(forward):
        sd = fraunhofer_amplitude(inp.alpha, thetas[forward])
        s1[forward] += sd
        s2[forward] += sd
    return s1, s2, caustic


def goa_amplitudes(inp: GoaInput, theta: float) -> AmplitudePair:
    """Total GOA amplitude pair at one scattering angle."""
    s1, s2, _ = goa_amplitudes_grid(inp, np.array([float(theta)]))
    return AmplitudePair(complex(s1[0]), complex(s2[0]))


def goa_extinction_cross_section(inp: GoaInput) -> float:
    """Analytic extinction cross section (um^2).

    Forward-limit interference sum over the odd orders in p_set_extinction:
    C_t = 2 pi r^2 + (2 pi r/|k|) sum_p Re{eps_1(0) xi_p e^(i(phi_p+phi_f))}
    / |p/eta_eff - 1|.
    """
    eta = complex(inp.eta)
    if eta == 1.0:
        warnings.warn("index-matched sphere: extinction undefined in GOA, returning 0")
        return 0.0
    r = inp.radius_um
    alpha = inp.alpha
    k = inp.wavenumber
    eta_eff0 = eta.real  # effective relative index at normal incidence
    chi0 = eta.imag * inp.eta_medium_real

    r1, _ = _fresnel(eta, 0.0)
    ct = 2.0 * math.pi * r * r
    for p in inp.p_set_extinction:
        denom = abs(p / eta_eff0 - 1.0)
        if denom < 1e-12:
            warnings.warn(f"degenerate forward order p={p} (p = eta), term skipped")
            continue
        eps = (1.0 - r1 * r1) * (-r1) ** (p - 1)
        phi_p = 2.0 * alpha * (1.0 - p * eta_eff0)
        s = 1.0 if p / eta_eff0 - 1.0 > 0 else -1.0
        l = -(p - 1) // 2
        phi_f = 0.5 * math.pi * (1.0 + p - 2.0 * l - 0.5 * s + 0.5)  # q = -1
        xi = math.exp(-2.0 * chi0 * p * alpha / inp.eta_medium_real)
        term = (eps * xi * np.exp(1j * (phi_p + phi_f))).real / denom
        ct += (2.0 * math.pi * r / k) * term
    return float(ct)


def goa_extinction_p1_closed_form(inp: GoaInput) -> float:
    """Closed-form p = 1 extinction for a real index:
    2 pi r^2 + (4 r lambda eta^2 / (eta_m (eta+1)^2 |eta-1|)) sin(4 pi eta_m r (1-eta)/lambda)."""
    eta = complex(inp.eta)
    if eta.imag != 0:
        raise ValueError("closed form requires a real relative index")
    e = eta.real
    if e == 1.0:
        warnings.warn("index-matched sphere: extinction undefined in GOA, returning 0")
        return 0.0
    r, lam, em = inp.radius_um, inp.wavelength_um, inp.eta_medium_real
    amp = 4.0 * r * lam * e * e / (em * (e + 1.0) ** 2 * abs(e - 1.0))
    return 2.0 * math.pi * r * r + amp * math.sin(4.0 * math.pi * em * r * (1.0 - e) / lam)


def goa_absorption_cross_section(inp: GoaInput) -> float:
    """Absorption cross section (um^2):
    C_a = (16 pi^2 r^3 eta_i / (3 lambda eta_r)) [eta_r^3 - (eta_r^2-1)^(3/2)]."""
    eta = complex(inp.eta)
    er, ei = eta.real, eta.imag
    if er <= 1.0:
        raise ValueError("absorption formula requires Re(eta) > 1")
    bracket = er ** 3 - (er * er - 1.0) ** 1.5
    return 16.0 * math.pi ** 2 * inp.radius_um ** 3 * ei * bracket / (3.0 * inp.wavelength_um * er)


def rainbow_angles(inp: GoaInput, p_max: int | None = None):
    """Rainbow scattering angles: folds of theta_p where d theta_p/d theta_i = 0.

    Returns a list of (p, theta_rad) for 2 <= p <= p_max (orders 0 and 1
    have monotone deflection for eta > 1).
    """
    if p_max is None:
        p_max = inp.p_max_amplitude
    grid = np.linspace(0.0, 0.5 * math.pi, N_SCAN + 1)
    out = []
    for p in range(2, p_max + 1):
        _, theta_p, d, _, _, valid = _geometry(inp, p, grid)
        d = np.where(valid, d, np.nan)
        sign_change = np.nonzero(d[:-1] * d[1:] < 0)[0]
        for j in sign_change:
            ta, tb = grid[j], grid[j + 1]
            for _ in range(BISECT_ITERS):
                tmid = 0.5 * (ta + tb)
                _, _, dm, _, _, _ = _geometry(inp, p, np.array([tmid]))
                if d[j] * dm[0] > 0:
                    ta = tmid
                else:
                    tb = tmid
            tstar = 0.5 * (ta + tb)
            _, tp, _, _, _, _ = _geometry(inp, p, np.array([tstar]))
            out.append((p, float(_fold(tp)[0])))
    return out


def caustic_angles(inp: GoaInput, p_max: int | None = None):
    """All caustic scattering angles of the truncated ray sum.

    Rainbow folds (d theta_p/d theta_i = 0) plus axial focal lines: angles
    0 or pi reached by a ray order at interior incidence (sin 2 theta_i > 0),
    where the 1/sin(theta) focusing factor of Eq-order amplitudes diverges
    (glory-type caustics the classical approximation cannot represent).
    Returns a sorted list of unique angles in radians.
    """
    if p_max is None:
        p_max = inp.p_max_amplitude
    angles = [t for _, t in rainbow_angles(inp, p_max)]
    grid = np.linspace(0.0, 0.5 * math.pi, N_SCAN + 1)
    for p in range(2, p_max + 1):
        _, theta_p, _, _, _, valid = _geometry(inp, p, grid)
        tp = np.where(valid, theta_p, np.nan)
        fin = tp[np.isfinite(tp)]
        if fin.size == 0:
            continue
        # the unfolded deflection crossing k*pi at interior incidence is an
        # axial focal line (fold touches 0 for even k, pi for odd k)
        for k in range(int(math.floor(fin.min() / math.pi)),
                       int(math.ceil(fin.max() / math.pi)) + 1):
            d = tp - k * math.pi
            for j in np.nonzero(d[:-1] * d[1:] < 0)[0]:
                if math.sin(2.0 * grid[j]) > 1e-3:
                    angles.append(math.pi if k % 2 else 0.0)
    uniq = []
    for a in sorted(angles):
        if not uniq or a - uniq[-1] > 1e-9:
            uniq.append(a)
    return uniq
