"""Overlapping patch covers and Shepard partition-of-unity weights.

Patches are discs/spheres centered on an underlying Cartesian box grid that
tiles the domain bounding box.  Boxes with less than a minimum fraction of
their volume inside the domain are dropped, and dropped patches are restored
greedily if that is needed to keep the domain covered.  Weights are Shepard
ratios of compactly supported Wendland C2 generators, with analytic gradient
and Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import backend
from .geometry import Domain


class CoverageError(RuntimeError):
    """A point that must be covered lies in no patch."""


@dataclass
class PatchCover:
    """Disc/sphere patches on a Cartesian box grid.

    radius = (1 + overlap) * sqrt(d) * box_size / 2 for every patch.
    """

    centers: np.ndarray
    radius: float
    box_size: float
    overlap: float
    max_overlap: int = 0
    warnings: list = field(default_factory=list)

    @property
    def patch_count(self):
        return len(self.centers)

    @property
    def dim(self):
        return self.centers.shape[1]

    def summary(self):
        return f"P={self.patch_count} rho={self.radius:.6g}"


def patch_radius(box_size, overlap, dim):
    return (1.0 + overlap) * math.sqrt(dim) * box_size / 2.0


def build_cover(domain: Domain, box_size, overlap=0.2,
                min_coverage=0.1) -> PatchCover:
    """Tile the bounding box with boxes of side `box_size` (grid anchored at
    the lower corner), keep boxes with at least `min_coverage` of their volume
    inside the domain, and restore dropped boxes greedily wherever coverage of
    the domain would otherwise be lost."""
    if box_size <= 0:
        raise ValueError("box size must be positive")
    if overlap < 0:
        raise ValueError("overlap must be nonnegative")
    d = domain.dim
    lo, hi = domain.bounding_box()
    counts = np.maximum(1, np.ceil((hi - lo) / box_size - 1e-12).astype(int))
    rho = patch_radius(box_size, overlap, d)

    # volume fraction of each box inside the domain, one vectorized pass
    m = 20 if d == 2 else 8
    offs_1d = (np.arange(m) + 0.5) / m * box_size
    offs = np.stack(np.meshgrid(*([offs_1d] * d), indexing="ij"),
                    axis=-1).reshape(-1, d)
    grids = np.stack(np.meshgrid(*[np.arange(c) for c in counts],
                                 indexing="ij"), axis=-1).reshape(-1, d)
    corners = lo + grids * box_size
    samples = (corners[:, None, :] + offs[None, :, :]).reshape(-1, d)
    frac = domain.contains(samples).reshape(len(corners), -1).mean(axis=1)

    # boxes crossed by the boundary count as touched even if no sample hit
    bnd = domain.boundary_sample(box_size / 8).points
    idx = np.floor((bnd - lo) / box_size).astype(int)
    idx = np.clip(idx, 0, counts - 1)
    flat = np.ravel_multi_index(idx.T, counts)
    touched = np.zeros(len(corners), dtype=bool)
    touched[np.unique(flat)] = True
    nonempty = (frac > 0) | touched
    if not nonempty.any():
        raise ValueError("no grid box intersects the domain")

    corners = corners[nonempty]
    frac = np.where(frac[nonempty] > 0, frac[nonempty], 1e-12)
    centers = corners + box_size / 2.0
    keep = frac >= min_coverage
    warnings = []

    # coverage probes: interior grid + boundary points
    probe_h = box_size / (16 if d == 2 else 8)
    axes = [np.arange(lo[k], hi[k] + probe_h / 2, probe_h) for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    probes = np.column_stack([a.ravel() for a in mesh])
    probes = probes[domain.contains(probes)]
    probes = np.vstack([probes, bnd])

    while True:
        if not keep.any():
            keep[np.argmax(frac)] = True
        dist, _ = cKDTree(centers[keep]).query(probes)
        unc = dist >= rho - 1e-12
        if not unc.any():
            break
        cand = np.flatnonzero(~keep)
        if len(cand) == 0:
            raise ValueError("cover cannot be completed; grid too coarse")
        gain = np.zeros(len(cand), dtype=int)
        for i, j in enumerate(cand):
            gain[i] = (np.linalg.norm(probes[unc] - centers[j], axis=1)
                       < rho).sum()
        if gain.max() == 0:
            raise ValueError("cover cannot be completed; grid too coarse")
        j = cand[np.argmax(gain)]
        keep[j] = True
        warnings.append(f"restored low-coverage patch at {centers[j]}")

    kept_centers = centers[keep]
    # empirical overlap bound on a probe subsample
    sub = probes[:: max(1, len(probes) // 4000)]
    tree = cKDTree(kept_centers)
    k_max = max(len(tree.query_ball_point(p, rho)) for p in sub)
    return PatchCover(kept_centers, rho, float(box_size), float(overlap),
                      max_overlap=int(k_max), warnings=warnings)


def wendland(r):
    """Wendland C2 function (1-r)_+^4 (4r+1): value, first and second
    derivative. Compactly supported on [0, 1]; C2 at both ends."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("radius must be nonnegative")
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    psi, g1, d2 = backend.wendland_parts(flat)
    dpsi = g1 * flat
    if scalar:
        return float(psi[0]), float(dpsi[0]), float(d2[0])
    shape = np.atleast_1d(arr).shape
    return psi.reshape(shape), dpsi.reshape(shape), d2.reshape(shape)


@dataclass
class WeightEval:
    """Sparse per-patch Shepard weight data at a fixed point set.

    For patch j, points[indices[j]] are the covered points and values/grads/
    laps hold w_j, grad w_j, lap w_j there.  Weights of non-covering patches
    are exactly zero and are not stored.
    """

    n_points: int
    dim: int
    indices: list
    values: list
    grads: list
    laps: list

    def sums(self):
        """(sum_j w_j, sum_j grad w_j, sum_j lap w_j) as dense arrays."""
        w = np.zeros(self.n_points)
        g = np.zeros((self.n_points, self.dim))
        lp = np.zeros(self.n_points)
        for idx, v, gr, la in zip(self.indices, self.values, self.grads,
                                  self.laps):
            w[idx] += v
            g[idx] += gr
            lp[idx] += la
        return w, g, lp


def shepard_weights(cover: PatchCover, pts) -> WeightEval:
    """Shepard weights w_j = phi_j / sum_i phi_i with analytic gradient and
    Laplacian (quotient + chain rule) at the given points.

    Raises CoverageError if some point lies in no patch.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, d = pts.shape
    rho = cover.radius
    tree = cKDTree(pts)

    idx_j, phi_j, grad_j, lap_j = [], [], [], []
    S = np.zeros(n)
    G = np.zeros((n, d))
    LP = np.zeros(n)
    for c in cover.centers:
        idx = np.array(sorted(tree.query_ball_point(c, rho)), dtype=int)
        if len(idx):
            dx = pts[idx] - c
            r = np.linalg.norm(dx, axis=1)
            inside = r < rho * (1.0 - 1e-15)
            idx, dx, r = idx[inside], dx[inside], r[inside]
        if len(idx) == 0:
            idx_j.append(np.empty(0, dtype=int))
            phi_j.append(np.empty(0))
            grad_j.append(np.empty((0, d)))
            lap_j.append(np.empty(0))
            continue
        s = r / rho
        psi, g1, d2 = backend.wendland_parts(s)
        grad = (g1 / rho**2)[:, None] * dx
        lap = (d2 + (d - 1) * g1) / rho**2
        idx_j.append(idx)
        phi_j.append(psi)
        grad_j.append(grad)
        lap_j.append(lap)
        S[idx] += psi
        G[idx] += grad
        LP[idx] += lap

    uncovered = np.flatnonzero(S == 0.0)
    if len(uncovered):
        p = pts[uncovered[0]]
        raise CoverageError(
            f"{len(uncovered)} point(s) covered by no patch, first at "
            f"{np.array2string(p, precision=6)}")

    values, grads, laps = [], [], []
    for idx, phi, gphi, lphi in zip(idx_j, phi_j, grad_j, lap_j):
        if len(idx) == 0:
            values.append(np.empty(0))
            grads.append(np.empty((0, d)))
            laps.append(np.empty(0))
            continue
        s = S[idx]
        w = phi / s
        gw = (gphi - w[:, None] * G[idx]) / s[:, None]
        dot = (gphi * G[idx]).sum(axis=1)
        g2 = (G[idx] * G[idx]).sum(axis=1)
        lw = (lphi - 2.0 * dot / s - w * LP[idx] + 2.0 * w * g2 / s) / s
        values.append(w)
        grads.append(gw)
        laps.append(lw)
    return WeightEval(n, d, idx_j, values, grads, laps)
