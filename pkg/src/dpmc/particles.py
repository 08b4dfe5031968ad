"""Particle size distributions, cloud generation and bulk properties.

Clouds are reproducible: generation draws from a Philox4x64 counter-based
stream keyed by the seed (the "cloud stream"; rendering uses separate
streams), and the particle file header records the generator name so a port
can reproduce files bit-exactly.

Positions are i.i.d. uniform in the bounds (independent scattering; overlap
between particles is allowed and is a documented modeling simplification).
"""

from dataclasses import dataclass, field
import io
import json
import math
import struct
import warnings

import numpy as np

from .units import M2_PER_UM2

RNG_ALGORITHM = "philox4x64"
FILE_MAGIC = b"DPMC"
FILE_VERSION = 1
R_CLIP_DEFAULT = (0.01, 2000.0)


def cloud_rng(seed):
    """The cloud generation stream."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


@dataclass(frozen=True)
class SizeDistribution:
    """Tagged particle size distribution with total count and radius clip.

    kinds: log_normal(r_g_um, sigma_g), bimodal(modes=((r_g, sigma_g, n), ...)),
    uniform(r_min_um, r_max_um), monodisperse(radius_um).  sigma_g = 1 is an
    exact monodisperse mode (ln sigma_g = 0).
    """
    kind: str
    n_total: int
    r_clip: tuple = R_CLIP_DEFAULT
    r_g_um: float | None = None
    sigma_g: float | None = None
    modes: tuple | None = None
    r_min_um: float | None = None
    r_max_um: float | None = None
    radius_um: float | None = None

    def __post_init__(self):
        if self.n_total < 0:
            raise ValueError("n_total must be >= 0")
        lo, hi = self.r_clip
        if not (0 <= lo <= hi):
            raise ValueError("r_clip bounds must be ordered and non-negative")
        if self.kind == "log_normal":
            if self.r_g_um is None or self.sigma_g is None or self.sigma_g < 1.0:
                raise ValueError("log_normal needs r_g_um and sigma_g >= 1")
        elif self.kind == "bimodal":
            if not self.modes or any(len(m) != 3 for m in self.modes):
                raise ValueError("bimodal needs modes of (r_g_um, sigma_g, count)")
            if sum(int(m[2]) for m in self.modes) != self.n_total:
                raise ValueError("bimodal mode counts must sum to n_total")
            if any(m[1] < 1.0 for m in self.modes):
                raise ValueError("sigma_g >= 1 required")
        elif self.kind == "uniform":
            if self.r_min_um is None or self.r_max_um is None or self.r_min_um > self.r_max_um:
                raise ValueError("uniform needs ordered r_min_um, r_max_um")
        elif self.kind == "monodisperse":
            if self.radius_um is None or self.radius_um <= 0:
                raise ValueError("monodisperse needs radius_um > 0")
        else:
            raise ValueError(f"unknown PSD kind {self.kind!r}")

    @classmethod
    def log_normal(cls, r_g_um, sigma_g, n_total, r_clip=R_CLIP_DEFAULT):
        return cls(kind="log_normal", n_total=n_total, r_clip=r_clip,
                   r_g_um=float(r_g_um), sigma_g=float(sigma_g))

    @classmethod
    def bimodal(cls, modes, r_clip=R_CLIP_DEFAULT):
        modes = tuple((float(r), float(s), int(n)) for r, s, n in modes)
        return cls(kind="bimodal", n_total=sum(m[2] for m in modes),
                   r_clip=r_clip, modes=modes)

    @classmethod
    def uniform(cls, r_min_um, r_max_um, n_total, r_clip=R_CLIP_DEFAULT):
        return cls(kind="uniform", n_total=n_total, r_clip=r_clip,
                   r_min_um=float(r_min_um), r_max_um=float(r_max_um))

    @classmethod
    def monodisperse(cls, radius_um, n_total, r_clip=R_CLIP_DEFAULT):
        return cls(kind="monodisperse", n_total=n_total, r_clip=r_clip,
                   radius_um=float(radius_um))

    def radius_range(self):
        """Smallest interval certain to contain all sampled radii."""
        lo, hi = self.r_clip
        if self.kind == "monodisperse":
            return self.radius_um, self.radius_um
        if self.kind == "uniform":
            return max(lo, self.r_min_um), min(hi, self.r_max_um)
        return lo, hi

    def to_json(self) -> dict:
        d = {"kind": self.kind, "n_total": self.n_total, "r_clip": list(self.r_clip)}
        for k in ("r_g_um", "sigma_g", "r_min_um", "r_max_um", "radius_um"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.modes is not None:
            d["modes"] = [list(m) for m in self.modes]
        return d

    @classmethod
    def from_json(cls, d: dict):
        kw = dict(d)
        kw["r_clip"] = tuple(kw.get("r_clip", R_CLIP_DEFAULT))
        if "modes" in kw and kw["modes"] is not None:
            kw["modes"] = tuple(tuple(m) for m in kw["modes"])
        return cls(**kw)


def _sample_mode(rng, r_g, sigma_g, n, r_clip):
    """n log-normal radii, rejection-clipped to r_clip."""
    if sigma_g == 1.0:
        return np.full(n, r_g)
    mu, s = math.log(r_g), math.log(sigma_g)
    out = np.exp(rng.normal(mu, s, size=n))
    lo, hi = r_clip
    for _ in range(1000):
        bad = (out < lo) | (out > hi)
        nbad = int(bad.sum())
        if nbad == 0:
            return out
        out[bad] = np.exp(rng.normal(mu, s, size=nbad))
    raise RuntimeError("radius clipping rejected too much mass; check r_clip vs PSD")


def sample_radius(psd: SizeDistribution, rng) -> float:
    """One radius draw (um)."""
    return float(sample_radii(psd, 1, rng)[0])


def sample_radii(psd: SizeDistribution, n, rng):
    """n radius draws (um) in generation order."""
    lo, hi = psd.r_clip
    if psd.kind == "monodisperse":
        return np.full(n, psd.radius_um)
    if psd.kind == "uniform":
        return rng.uniform(max(lo, psd.r_min_um), min(hi, psd.r_max_um), size=n)
    if psd.kind == "log_normal":
        return _sample_mode(rng, psd.r_g_um, psd.sigma_g, n, psd.r_clip)
    # bimodal: all modes in declared order (records keep generation order)
    parts, left = [], n
    for r_g, s_g, cnt in psd.modes:
        take = min(cnt, left) if left < psd.n_total else cnt
        parts.append(_sample_mode(rng, r_g, s_g, take, psd.r_clip))
        left -= take
    return np.concatenate(parts)[:n]


@dataclass(frozen=True)
class ParticleRecord:
    """One spherical scatterer: position in meters, radius in um."""
    position: np.ndarray
    radius_um: float


@dataclass
class ParticleCloud:
    """Generated particle set with its provenance.

    positions: (n, 3) float64 meters; radii_um: (n,) float64;
    bounds: (2, 3) axis-aligned box.
    """
    positions: np.ndarray
    radii_um: np.ndarray
    bounds: np.ndarray
    seed: int
    psd: SizeDistribution

    def __len__(self):
        return len(self.radii_um)

    def __getitem__(self, i) -> ParticleRecord:
        return ParticleRecord(self.positions[i], float(self.radii_um[i]))

    @property
    def volume(self) -> float:
        ext = self.bounds[1] - self.bounds[0]
        return float(np.prod(ext))

    def radius_range(self):
        if len(self) == 0:
            return self.psd.radius_range()
        return float(self.radii_um.min()), float(self.radii_um.max())


def generate_cloud(psd: SizeDistribution, bounds, seed) -> ParticleCloud:
    """n_total particles with uniform positions and PSD-sampled radii.

    Deterministic per seed; positions are drawn before radii so both
    sequences come from fixed offsets of the cloud stream.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(2, 3)
    if np.any(bounds[1] <= bounds[0]):
        raise ValueError("bounds must be a non-degenerate box")
    rng = cloud_rng(seed)
    n = psd.n_total
    positions = rng.uniform(bounds[0], bounds[1], size=(n, 3))
    radii = sample_radii(psd, n, rng)
    return ParticleCloud(positions=positions, radii_um=np.asarray(radii, dtype=float),
                         bounds=bounds, seed=int(seed), psd=psd)


def save_particle_file(cloud: ParticleCloud, path):
    """Versioned binary particle file.

    Layout: magic "DPMC", u32 version, u32 header length, JSON header
    (seed, psd, bounds, count, rng algorithm), then little-endian records
    of f64 x, y, z and f32 radius_um.
    """
    header = json.dumps({
        "seed": cloud.seed,
        "psd": cloud.psd.to_json(),
        "bounds": cloud.bounds.tolist(),
        "count": len(cloud),
        "rng": RNG_ALGORITHM,
    }, sort_keys=True).encode()
    rec = np.empty(len(cloud), dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("r", "<f4")])
    rec["x"], rec["y"], rec["z"] = cloud.positions.T
    rec["r"] = cloud.radii_um.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(FILE_MAGIC)
        fh.write(struct.pack("<II", FILE_VERSION, len(header)))
        fh.write(header)
        fh.write(rec.tobytes())


def load_particle_file(path) -> ParticleCloud:
    with open(path, "rb") as fh:
        if fh.read(4) != FILE_MAGIC:
            raise ValueError(f"{path}: not a DPMC particle file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FILE_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(hlen))
        if header.get("rng") != RNG_ALGORITHM:
            warnings.warn(f"{path}: unknown rng {header.get('rng')!r}")
        rec = np.frombuffer(fh.read(), dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("r", "<f4")])
    if len(rec) != header["count"]:
        raise ValueError(f"{path}: truncated ({len(rec)} of {header['count']} records)")
    positions = np.stack([rec["x"], rec["y"], rec["z"]], axis=1)
    return ParticleCloud(positions=positions,
                         radii_um=rec["r"].astype(np.float64),
                         bounds=np.asarray(header["bounds"], dtype=float),
                         seed=int(header["seed"]),
                         psd=SizeDistribution.from_json(header["psd"]))


def save_particle_csv(cloud: ParticleCloud, path):
    """Interop mirror of the binary format: x,y,z in meters, radius in um."""
    with open(path, "w") as fh:
        fh.write("# dpmc particles seed=%d count=%d rng=%s\n" % (cloud.seed, len(cloud), RNG_ALGORITHM))
        fh.write("# psd=%s bounds=%s\n" % (json.dumps(cloud.psd.to_json(), sort_keys=True),
                                           json.dumps(cloud.bounds.tolist())))
        fh.write("x_m,y_m,z_m,radius_um\n")
        for p, r in zip(cloud.positions, cloud.radii_um):
            fh.write(f"{p[0]!r},{p[1]!r},{p[2]!r},{np.float32(r)!r}\n")


def estimate_local_psd(cloud: ParticleCloud, region, n_bins):
    """Log-spaced radius histogram of records whose centers lie in region.

    region: (2, 3) box in meters.  Returns (bin_edges_um, counts); an empty
    region yields all zeros.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    lo, hi = cloud.psd.radius_range()
    if hi <= lo:
        hi = lo * (1.0 + 1e-9) + 1e-12
    edges = np.geomspace(lo, hi, n_bins + 1)
    region = np.asarray(region, dtype=float).reshape(2, 3)
    inside = np.all((cloud.positions >= region[0]) & (cloud.positions <= region[1]), axis=1)
    radii = np.clip(cloud.radii_um[inside], lo, hi)
    counts, _ = np.histogram(radii, bins=edges)
    return edges, counts


@dataclass
class BulkProperties:
    """Whole-volume coefficients (per meter) and ensemble phase per band."""
    wavelengths_um: np.ndarray
    sigma_t: np.ndarray
    sigma_s: np.ndarray
    sigma_a: np.ndarray
    theta: np.ndarray | None
    phase: np.ndarray | None   # (n_bands, n_theta) sr^-1, or None for empty cloud
    phase_cdf: np.ndarray | None

    @property
    def is_vacuum(self) -> bool:
        return self.phase is None


def global_bulk_properties(cloud: ParticleCloud, optics, renormalize_phase=True) -> BulkProperties:
    """Bulk coefficients and ensemble phase of the whole bounding box.

    sigma_t = sum_i C_t(r_i) / V; the ensemble phase is the C_s-weighted
    mixture of per-particle phase functions, normalized by sigma_s.  An
    empty cloud yields zero coefficients and no phase (delta pass-through).
    """
    lams = optics.wavelengths_um
    nb = len(lams)
    if len(cloud) == 0:
        return BulkProperties(wavelengths_um=lams, sigma_t=np.zeros(nb),
                              sigma_s=np.zeros(nb), sigma_a=np.zeros(nb),
                              theta=None, phase=None, phase_cdf=None)
    v = cloud.volume
    bins = optics.bin_index(cloud.radii_um)
    counts = np.bincount(bins, minlength=optics.n_bins).astype(float)
    sigma_t = (optics.ct_um2 @ counts) * M2_PER_UM2 / v
    sigma_s = (optics.cs_um2 @ counts) * M2_PER_UM2 / v
    sigma_a = (optics.ca_um2 @ counts) * M2_PER_UM2 / v

    theta = optics.theta
    phase = np.empty((nb, len(theta)))
    cdf = np.empty((nb, len(theta)))
    for b in range(nb):
        total_cs = float(optics.cs_um2[b] @ counts)
        mix = np.tensordot(counts, optics.intensity[b], axes=(0, 0))
        phase_b = mix / (2.0 * optics.k_um[b] ** 2 * total_cs)
        integrand = 2.0 * math.pi * phase_b * np.sin(theta)
        seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(theta)
        c = np.concatenate([[0.0], np.cumsum(seg)])
        raw = c[-1]
        if renormalize_phase:
            phase_b = phase_b / raw
        phase[b] = phase_b
        cdf[b] = np.maximum.accumulate(c / raw)
    return BulkProperties(wavelengths_um=lams, sigma_t=sigma_t, sigma_s=sigma_s,
                          sigma_a=sigma_a, theta=theta, phase=phase, phase_cdf=cdf)
