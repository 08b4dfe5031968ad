"""Spatial index over a particle cloud and the local queries of the
multi-scale transport model: voxel traversal, query-cylinder gather,
segment transmittance and the local angular scattering density Q(theta).

Geometry is in meters.  A record is indexed into every voxel overlapped by
its sphere inflated by the grid pad; gathers with query radius r_c <= pad
are then exactly equivalent to brute force over all records.

Transmittance and Q normalize each gathered record by its own capture
measure (pi (r_p + r_c)^2 for the cylinder, 4/3 pi (r_p + r_c)^3 for the
sphere) so that their expectations over uniform particle positions equal
the bulk coefficients exactly; a global mu(A) = pi r_c^2 with the
r_p + r_c membership test would be biased high by ((r_p + r_c)/r_c)^2.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .units import M2_PER_UM2, M_PER_UM


@dataclass(frozen=True)
class QueryCylinder:
    """Thin cylinder around a ray segment (origin/endpoint in meters)."""
    p0: np.ndarray
    p1: np.ndarray
    r_c: float

    def __post_init__(self):
        if self.r_c <= 0:
            raise ValueError("r_c must be positive")

    @property
    def cross_section_area(self) -> float:
        """mu(A) = pi r_c^2."""
        return math.pi * self.r_c ** 2

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.asarray(self.p1) - np.asarray(self.p0)))


class UniformGrid:
    """Axis-aligned voxel index over a particle cloud (immutable once built)."""

    def __init__(self, cloud, resolution, pad_m):
        self.cloud = cloud
        self.bounds = np.asarray(cloud.bounds, dtype=float)
        self.res = np.asarray(resolution, dtype=np.int64)
        if np.any(self.res < 1):
            raise ValueError("resolution must be >= 1 per axis")
        self.voxel = (self.bounds[1] - self.bounds[0]) / self.res
        self.pad_m = float(pad_m)
        self.radii_m = cloud.radii_um * M_PER_UM
        self._build_cells()

    def _build_cells(self):
        n = len(self.cloud)
        nx, ny, nz = (int(v) for v in self.res)
        ncells = nx * ny * nz
        if n == 0:
            self.cell_start = np.zeros(ncells + 1, dtype=np.int64)
            self.cell_items = np.zeros(0, dtype=np.int64)
            return
        pos = self.cloud.positions
        r_eff = (self.radii_m + self.pad_m)[:, None]
        lo = self._cell_of(pos - r_eff)
        hi = self._cell_of(pos + r_eff)
        spans = hi - lo + 1
        nspan = spans.prod(axis=1)
        total = int(nspan.sum())
        cells = np.empty(total, dtype=np.int64)
        items = np.empty(total, dtype=np.int64)
        single = nspan == 1
        k = int(single.sum())
        cells[:k] = self._flat(lo[single])
        items[:k] = np.nonzero(single)[0]
        if k < total:
            w = k
            for i in np.nonzero(~single)[0]:
                for ix in range(lo[i, 0], hi[i, 0] + 1):
                    for iy in range(lo[i, 1], hi[i, 1] + 1):
                        for iz in range(lo[i, 2], hi[i, 2] + 1):
                            cells[w] = ix + nx * (iy + ny * iz)
                            items[w] = i
                            w += 1
        order = np.argsort(cells, kind="stable")
        cells, items = cells[order], items[order]
        counts = np.bincount(cells, minlength=ncells)
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.cell_items = items

    def _cell_of(self, points):
        idx = np.floor((points - self.bounds[0]) / self.voxel).astype(np.int64)
        return np.clip(idx, 0, self.res - 1)

    def _flat(self, ijk):
        nx, ny = int(self.res[0]), int(self.res[1])
        return ijk[..., 0] + nx * (ijk[..., 1] + ny * ijk[..., 2])

    def cell_records(self, flat_index):
        s, e = self.cell_start[flat_index], self.cell_start[flat_index + 1]
        return self.cell_items[s:e]

    def occupancy_histogram(self):
        counts = np.diff(self.cell_start)
        return np.bincount(counts)

    def dump_stats_csv(self, path):
        """Occupancy histogram (records per voxel) for resolution tuning."""
        hist = self.occupancy_histogram()
        with open(path, "w") as fh:
            fh.write(f"# dpmc grid stats res={tuple(int(v) for v in self.res)} "
                     f"particles={len(self.cloud)} pad_m={self.pad_m!r}\n")
            fh.write("records_per_voxel,voxel_count\n")
            for k, c in enumerate(hist):
                fh.write(f"{k},{int(c)}\n")


def default_resolution(cloud):
    """About one particle per voxel, axes scaled to the bounds aspect."""
    n = max(len(cloud), 1)
    ext = cloud.bounds[1] - cloud.bounds[0]
    gmean = float(np.prod(ext)) ** (1.0 / 3.0)
    res = np.ceil(n ** (1.0 / 3.0) * ext / gmean).astype(np.int64)
    return np.maximum(res, 1)


def build_grid(cloud, resolution=None, pad_m=None) -> UniformGrid:
    """Index every record into all voxels its pad-inflated sphere overlaps.

    pad_m bounds the query radius for which gathers are exact; it defaults
    to 1% of the smallest voxel side (the thin-cylinder regime).
    """
    res = default_resolution(cloud) if resolution is None else np.asarray(resolution, dtype=np.int64)
    if pad_m is None:
        voxel = (cloud.bounds[1] - cloud.bounds[0]) / np.maximum(res, 1)
        pad_m = float(voxel.min()) / 100.0
    return UniformGrid(cloud, res, pad_m)


def traverse(grid: UniformGrid, p0, p1):
    """Voxels pierced by the segment, in order (Amanatides-Woo walk).

    Boundary ties are inclusive: when the segment leaves a voxel exactly
    through an edge or corner, the axes step one at a time and every
    intermediate voxel is emitted.  Returns an (m, 3) int array; empty if
    the segment misses the bounds.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    seg_len = float(np.linalg.norm(d))
    if seg_len == 0.0:
        inside = np.all(p0 >= grid.bounds[0]) and np.all(p0 <= grid.bounds[1])
        return grid._cell_of(p0[None, :]) if inside else np.zeros((0, 3), dtype=np.int64)

    # clip to bounds (slab method) in segment parameter t of [0, 1]
    t_lo, t_hi = 0.0, 1.0
    for a in range(3):
        if d[a] == 0.0:
            if p0[a] < grid.bounds[0][a] or p0[a] > grid.bounds[1][a]:
                return np.zeros((0, 3), dtype=np.int64)
        else:
            ta = (grid.bounds[0][a] - p0[a]) / d[a]
            tb = (grid.bounds[1][a] - p0[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t_lo, t_hi = max(t_lo, ta), min(t_hi, tb)
    if t_lo > t_hi:
        return np.zeros((0, 3), dtype=np.int64)

    start = p0 + t_lo * d
    ijk = grid._cell_of(start[None, :])[0].astype(np.int64)
    res = grid.res
    step = np.sign(d).astype(np.int64)
    t_max = np.full(3, np.inf)
    t_delta = np.full(3, np.inf)
    for a in range(3):
        if d[a] != 0.0:
            nxt = grid.bounds[0][a] + (ijk[a] + (1 if step[a] > 0 else 0)) * grid.voxel[a]
            t_max[a] = (nxt - p0[a]) / d[a]
            t_delta[a] = grid.voxel[a] / abs(d[a])

    out = [ijk.copy()]
    eps = 1e-12
    guard = int(res.sum()) * 4 + 16
    for _ in range(guard):
        m = float(t_max.min())
        if m > t_hi + eps:
            break
        tied = [a for a in range(3) if t_max[a] <= m + eps]
        done = False
        for a in tied:
            ijk[a] += step[a]
            t_max[a] += t_delta[a]
            if ijk[a] < 0 or ijk[a] >= res[a]:
                done = True
                break
            out.append(ijk.copy())
        if done:
            break
    return np.asarray(out, dtype=np.int64)


def _segment_distance(points, p0, p1):
    """Distance from each point to the finite segment p0-p1 (with end caps)."""
    d = p1 - p0
    len2 = float(d @ d)
    if len2 == 0.0:
        return np.linalg.norm(points - p0, axis=1)
    t = np.clip((points - p0) @ d / len2, 0.0, 1.0)
    proj = p0 + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def gather(grid: UniformGrid, cylinder: QueryCylinder):
    """Indices of records inside the query cylinder.

    Membership: center-to-segment distance strictly below r_p + r_c, tested
    against candidates from the voxels pierced by the central ray.  Exact
    (equal to brute force) whenever r_c <= grid pad.
    """
    if cylinder.r_c > grid.pad_m:
        warnings.warn(f"query radius {cylinder.r_c:.3g} m exceeds grid pad "
                      f"{grid.pad_m:.3g} m; gather may miss boundary records")
    if min(grid.voxel) < 100.0 * cylinder.r_c:
        warnings.warn("query cylinder is not two orders of magnitude thinner "
                      "than the voxel side; central-ray traversal may be biased")
    cells = traverse(grid, cylinder.p0, cylinder.p1)
    if len(cells) == 0 or len(grid.cloud) == 0:
        return np.zeros(0, dtype=np.int64)
    flat = grid._flat(cells)
    cand = np.unique(np.concatenate([grid.cell_records(c) for c in flat]))
    if len(cand) == 0:
        return cand
    p0 = np.asarray(cylinder.p0, dtype=float)
    p1 = np.asarray(cylinder.p1, dtype=float)
    dist = _segment_distance(grid.cloud.positions[cand], p0, p1)
    keep = dist < grid.radii_m[cand] + cylinder.r_c
    return cand[keep]


def gather_bruteforce(cloud, cylinder: QueryCylinder):
    """Reference gather over all records (no grid)."""
    p0 = np.asarray(cylinder.p0, dtype=float)
    p1 = np.asarray(cylinder.p1, dtype=float)
    dist = _segment_distance(cloud.positions, p0, p1)
    keep = dist < cloud.radii_um * M_PER_UM + cylinder.r_c
    return np.nonzero(keep)[0]


def transmittance(grid: UniformGrid, cylinder: QueryCylinder, ct_of_r_um) -> float:
    """Beam transmittance through the gathered records, in (0, 1].

    T = exp(-sum_i C_t(r_i) / (pi (r_p,i + r_c)^2)); cross sections in um^2
    are converted to m^2 at this boundary.  Empty gather gives T = 1.
    """
    idx = gather(grid, cylinder)
    if len(idx) == 0:
        return 1.0
    ct_m2 = np.asarray(ct_of_r_um(grid.cloud.radii_um[idx]), dtype=float) * M2_PER_UM2
    cap_area = math.pi * (grid.radii_m[idx] + cylinder.r_c) ** 2
    tau = float(np.sum(ct_m2 / cap_area))
    return math.exp(-tau)


def sphere_gather(grid: UniformGrid, center, r_c):
    """Indices of records within r_p + r_c of a point."""
    center = np.asarray(center, dtype=float)
    if len(grid.cloud) == 0:
        return np.zeros(0, dtype=np.int64)
    lo = grid._cell_of((center - r_c)[None, :])[0]
    hi = grid._cell_of((center + r_c)[None, :])[0]
    flats = []
    nx, ny = int(grid.res[0]), int(grid.res[1])
    for iz in range(lo[2], hi[2] + 1):
        for iy in range(lo[1], hi[1] + 1):
            s = lo[0] + nx * (iy + ny * iz)
            flats.extend(range(s, s + hi[0] - lo[0] + 1))
    cand = np.unique(np.concatenate([grid.cell_records(c) for c in flats]))
    if len(cand) == 0:
        return cand
    dist = np.linalg.norm(grid.cloud.positions[cand] - center, axis=1)
    return cand[dist < grid.radii_m[cand] + r_c]


def local_q(grid: UniformGrid, position, r_c, theta, dcs_of_r_um):
    """Angular scattering density Q(theta) at a point, or None.

    Q = sum_i dCs/dOmega(theta, r_i) / (4/3 pi (r_p,i + r_c)^3) over records
    within r_p + r_c of the position, in 1/(m sr).  None marks the
    pass-through branch (no particles near the point: the delta case).
    """
    if r_c <= 0:
        raise ValueError("r_c must be positive")
    idx = sphere_gather(grid, position, r_c)
    if len(idx) == 0:
        return None
    dcs_m2 = np.asarray(dcs_of_r_um(grid.cloud.radii_um[idx], theta), dtype=float) * M2_PER_UM2
    cap_vol = (4.0 / 3.0) * math.pi * (grid.radii_m[idx] + r_c) ** 3
    return float(np.sum(dcs_m2 / cap_vol))


def footprint_cross_section(camera, medium_bounds, k_factor):
    """Query-beam cross section S_A = k S_pix z_med / z_near and its radius.

    S_pix is the pixel area on the near plane; z_med the smallest depth of
    the medium bounds inside the viewing direction (clamped to z_near).
    Returns (area_m2, r_c_m, z_med).  The renderer keeps r_c fixed along
    each path.
    """
    bounds = np.asarray(medium_bounds, dtype=float).reshape(2, 3)
    corners = np.array([[bounds[i][0], bounds[j][1], bounds[k][2]]
                        for i in (0, 1) for j in (0, 1) for k in (0, 1)])
    depths = (corners - camera.position) @ camera.forward
    if np.max(depths) <= 0:
        raise ValueError("medium lies entirely behind the camera")
    z_med = max(float(np.min(depths)), camera.z_near)
    area = k_factor * camera.pixel_area_near() * z_med / camera.z_near
    return area, math.sqrt(area / math.pi), z_med
