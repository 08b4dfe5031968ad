"""Scene description: camera, lights, diffuse surfaces and the medium.

Scenes live in YAML files (a key tree) referencing a particle file by
path; `load_scene`/`save_scene` round-trip them.  Geometry is in meters,
spectral quantities are per-band samples over the visible range.
"""

from dataclasses import dataclass, field
import math
import os

import numpy as np
import yaml

SPECTRUM_LO_NM = 380.0
SPECTRUM_HI_NM = 720.0


def band_centers_nm(n_lambda: int):
    """Equally spaced band centers covering the visible range."""
    width = (SPECTRUM_HI_NM - SPECTRUM_LO_NM) / n_lambda
    return SPECTRUM_LO_NM + width * (np.arange(n_lambda) + 0.5)


def band_centers_um(n_lambda: int):
    return band_centers_nm(n_lambda) / 1000.0


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    fov_y_deg: float = 45.0
    resolution: tuple = (256, 256)
    z_near: float = 0.1

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.look_at = np.asarray(self.look_at, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if self.z_near <= 0:
            raise ValueError("z_near must be positive")
        fwd = self.look_at - self.position
        n = np.linalg.norm(fwd)
        if n == 0:
            raise ValueError("camera position and look_at coincide")
        self._forward = fwd / n
        right = np.cross(self._forward, self.up)
        rn = np.linalg.norm(right)
        if rn == 0:
            raise ValueError("up vector parallel to viewing direction")
        self._right = right / rn
        self._up = np.cross(self._right, self._forward)

    @property
    def forward(self):
        return self._forward

    @property
    def basis(self):
        return self._right, self._up, self._forward

    def pixel_area_near(self) -> float:
        """Area of one pixel on the near plane (m^2)."""
        w, h = self.resolution
        half_h = self.z_near * math.tan(math.radians(self.fov_y_deg) / 2.0)
        half_w = half_h * (w / h)
        return (2.0 * half_w / w) * (2.0 * half_h / h)


@dataclass
class Quad:
    """One-sided rectangle: corner + u*edge_u + v*edge_v, u,v in [0,1]."""
    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    albedo: np.ndarray | float = 0.0
    emission: np.ndarray | float = 0.0

    def __post_init__(self):
        self.corner = np.asarray(self.corner, dtype=float)
        self.edge_u = np.asarray(self.edge_u, dtype=float)
        self.edge_v = np.asarray(self.edge_v, dtype=float)

    @property
    def normal(self):
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)

    @property
    def area(self):
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))


@dataclass
class PointLight:
    position: np.ndarray
    intensity: np.ndarray | float   # W/sr per band

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


def box_quads(bmin, bmax, albedo=0.0, emission=0.0, inward=False):
    """Six quads of an axis-aligned box; inward=True flips normals for walls."""
    bmin = np.asarray(bmin, dtype=float)
    bmax = np.asarray(bmax, dtype=float)
    d = bmax - bmin
    ex, ey, ez = np.diag(d)
    faces = [
        (bmin, ey, ex),                     # z = min, normal -z
        (bmin + ez, ex, ey),                # z = max, normal +z
        (bmin, ez, ey),                     # x = min, normal -x
        (bmin + ex, ey, ez),                # x = max, normal +x
        (bmin, ex, ez),                     # y = min, normal -y
        (bmin + ey, ez, ex),                # y = max, normal +y
    ]
    out = []
    for corner, eu, ev in faces:
        if inward:
            eu, ev = ev, eu
        out.append(Quad(corner=corner, edge_u=eu, edge_v=ev,
                        albedo=albedo, emission=emission))
    return out


@dataclass
class DiscreteMedium:
    particle_path: str | None
    cloud: object = None            # ParticleCloud, loaded lazily
    eta_particle: object = 1.31     # complex or [(lambda_um, n, k), ...]
    eta_medium: float = 1.0


@dataclass
class ContinuousMedium:
    bounds: np.ndarray
    sigma_t: float | np.ndarray
    albedo: float | np.ndarray = 1.0
    phase_radius_um: float | None = None   # phase from this particle size
    eta_particle: object = 1.31
    eta_medium: float = 1.0

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(2, 3)


@dataclass
class Integrator:
    spp: int = 64
    max_bounces: int = 8
    k_factor: float = 1.0
    seed: int = 1
    n_lambda: int = 8
    rr_start: int = 5

    def __post_init__(self):
        if self.spp < 1 or self.max_bounces < 1 or self.n_lambda < 1:
            raise ValueError("spp, max_bounces and n_lambda must be >= 1")


@dataclass
class Scene:
    camera: Camera
    medium: object = None           # DiscreteMedium | ContinuousMedium | None
    quads: list = field(default_factory=list)
    point_lights: list = field(default_factory=list)
    integrator: Integrator = field(default_factory=Integrator)
    background: float | np.ndarray = 0.0

    def spectral_bands_um(self):
        return band_centers_um(self.integrator.n_lambda)

    def eta_at_bands(self):
        """Relative particle index per band from the medium's description."""
        med = self.medium
        spec = getattr(med, "eta_particle", 1.0)
        lams = self.spectral_bands_um()
        if isinstance(spec, (int, float, complex)):
            return np.full(len(lams), complex(spec))
        table = np.asarray(spec, dtype=float)   # rows (lambda_um, n, k)
        n = np.interp(lams, table[:, 0], table[:, 1])
        k = np.interp(lams, table[:, 0], table[:, 2])
        return n + 1j * k


def _vec(x):
    return [float(v) for v in np.asarray(x).ravel()]


def _spectral(x):
    if isinstance(x, (int, float)):
        return float(x)
    return [float(v) for v in np.asarray(x).ravel()]


def save_scene(scene: Scene, path):
    d = {
        "camera": {
            "position": _vec(scene.camera.position),
            "look_at": _vec(scene.camera.look_at),
            "up": _vec(scene.camera.up),
            "fov_y_deg": scene.camera.fov_y_deg,
            "resolution": list(scene.camera.resolution),
            "z_near": scene.camera.z_near,
        },
        "integrator": {
            "spp": scene.integrator.spp,
            "max_bounces": scene.integrator.max_bounces,
            "k_factor": scene.integrator.k_factor,
            "seed": scene.integrator.seed,
            "n_lambda": scene.integrator.n_lambda,
            "rr_start": scene.integrator.rr_start,
        },
        "background": _spectral(scene.background),
        "surfaces": [],
        "lights": [],
    }
    for q in scene.quads:
        entry = {"type": "quad", "corner": _vec(q.corner), "edge_u": _vec(q.edge_u),
                 "edge_v": _vec(q.edge_v)}
        if np.any(np.asarray(q.emission) != 0):
            entry["emission"] = _spectral(q.emission)
            d["lights"].append(entry)
        else:
            entry["albedo"] = _spectral(q.albedo)
            d["surfaces"].append(entry)
    for pl in scene.point_lights:
        d["lights"].append({"type": "point", "position": _vec(pl.position),
                            "intensity": _spectral(pl.intensity)})
    med = scene.medium
    if isinstance(med, DiscreteMedium):
        d["medium"] = {"type": "discrete", "particles": med.particle_path,
                       "eta_particle": _eta_json(med.eta_particle),
                       "eta_medium": med.eta_medium}
    elif isinstance(med, ContinuousMedium):
        d["medium"] = {"type": "continuous", "bounds": med.bounds.tolist(),
                       "sigma_t": _spectral(med.sigma_t), "albedo": _spectral(med.albedo),
                       "phase_radius_um": med.phase_radius_um,
                       "eta_particle": _eta_json(med.eta_particle),
                       "eta_medium": med.eta_medium}
    with open(path, "w") as fh:
        yaml.safe_dump(d, fh, sort_keys=False)


def _eta_json(spec):
    if isinstance(spec, (int, float)):
        return [float(spec), 0.0]
    if isinstance(spec, complex):
        return [spec.real, spec.imag]
    return [list(row) for row in spec]


def _eta_parse(raw):
    if isinstance(raw, (int, float)):
        return complex(raw)
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1 and arr.shape == (2,):
        return complex(arr[0], arr[1])
    return arr   # (m, 3) table of (lambda_um, n, k)


def load_scene(path) -> Scene:
    with open(path) as fh:
        d = yaml.safe_load(fh)
    base = os.path.dirname(os.path.abspath(path))
    cam = d["camera"]
    camera = Camera(position=np.asarray(cam["position"], dtype=float),
                    look_at=np.asarray(cam["look_at"], dtype=float),
                    up=np.asarray(cam.get("up", [0.0, 1.0, 0.0]), dtype=float),
                    fov_y_deg=float(cam.get("fov_y_deg", 45.0)),
                    resolution=tuple(cam.get("resolution", [256, 256])),
                    z_near=float(cam.get("z_near", 0.1)))
    integ = Integrator(**d.get("integrator", {}))
    scene = Scene(camera=camera, integrator=integ,
                  background=_load_spectral(d.get("background", 0.0)))

    for s in d.get("surfaces", []):
        if s["type"] == "quad":
            scene.quads.append(Quad(corner=s["corner"], edge_u=s["edge_u"],
                                    edge_v=s["edge_v"],
                                    albedo=_load_spectral(s.get("albedo", 0.5))))
        elif s["type"] == "box":
            scene.quads.extend(box_quads(s["min"], s["max"],
                                         albedo=_load_spectral(s.get("albedo", 0.5)),
                                         inward=bool(s.get("inward", False))))
        else:
            raise ValueError(f"unknown surface type {s['type']!r}")
    for l in d.get("lights", []):
        if l["type"] == "quad" or l["type"] == "area":
            scene.quads.append(Quad(corner=l["corner"], edge_u=l["edge_u"],
                                    edge_v=l["edge_v"],
                                    emission=_load_spectral(l.get("emission", 1.0))))
        elif l["type"] == "point":
            scene.point_lights.append(PointLight(position=l["position"],
                                                 intensity=_load_spectral(l.get("intensity", 1.0))))
        else:
            raise ValueError(f"unknown light type {l['type']!r}")

    med = d.get("medium")
    if med is not None and med.get("type", "none") != "none":
        if med["type"] == "discrete":
            ppath = med["particles"]
            if ppath is not None and not os.path.isabs(ppath):
                ppath = os.path.join(base, ppath)
            scene.medium = DiscreteMedium(particle_path=ppath,
                                          eta_particle=_eta_parse(med.get("eta_particle", 1.31)),
                                          eta_medium=float(med.get("eta_medium", 1.0)))
        elif med["type"] == "continuous":
            scene.medium = ContinuousMedium(bounds=np.asarray(med["bounds"], dtype=float),
                                            sigma_t=_load_spectral(med["sigma_t"]),
                                            albedo=_load_spectral(med.get("albedo", 1.0)),
                                            phase_radius_um=med.get("phase_radius_um"),
                                            eta_particle=_eta_parse(med.get("eta_particle", 1.31)),
                                            eta_medium=float(med.get("eta_medium", 1.0)))
        else:
            raise ValueError(f"unknown medium type {med['type']!r}")
    return scene


def _load_spectral(raw):
    if isinstance(raw, (int, float)):
        return float(raw)
    return np.asarray(raw, dtype=float)
