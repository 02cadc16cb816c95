"""Node and evaluation-point generation.

Provides the per-patch reference layouts (Vogel spiral in the disc, greedily
packed nodes in the ball), Halton probe sequences, Cartesian collocation node
sets, least-squares evaluation layouts with oversampling control, and a fill
distance estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GOLDEN_ANGLE, Domain

ROLES = ("rbf-centers", "interior-eval", "boundary-eval", "probe")


@dataclass
class NodeSet:
    """A set of distinct points with a fixed role.

    For combined collocation sets the trailing ``n_boundary`` points lie on
    the domain boundary and the rest are interior.
    """

    points: np.ndarray
    role: str = "rbf-centers"
    fill: float | None = None
    n_boundary: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def interior(self):
        return self.points[:len(self.points) - self.n_boundary]

    @property
    def boundary(self):
        return self.points[len(self.points) - self.n_boundary:]


@dataclass
class OversamplingPlan:
    """Outcome of tuning the evaluation spacing toward a target M/N ratio."""

    beta_target: float
    beta_achieved: float
    interior_spacing: float
    boundary_spacing: float
    n_nodes: int
    n_eval: int
    warning: bool = False


def vogel_nodes(n) -> NodeSet:
    """Vogel spiral: x_i = sqrt(i/n) (cos(i t), sin(i t)), t the golden angle."""
    if n < 1:
        raise ValueError("need at least one node")
    i = np.arange(1, n + 1)
    r = np.sqrt(i / n)
    ang = i * GOLDEN_ANGLE
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return NodeSet(pts, role="rbf-centers")


@lru_cache(maxsize=32)
def _packed_ball_cached(n):
    # Greedy packing on a fixed candidate lattice (spacing 1/8 of the unit
    # separation constraint), all in integer lattice units for exact
    # feasibility tests and tie-breaks.
    sep2 = 64  # (unit separation / lattice spacing)^2
    radius = (0.169 * n) ** (1.0 / 3.0) + 0.6
    K = int(math.ceil(radius * 8))
    while True:
        g = np.arange(-K, K + 1)
        I, J, L = np.meshgrid(g, g, g, indexing="ij")
        cand = np.column_stack([I.ravel(), J.ravel(), L.ravel()])
        norm2 = (cand * cand).sum(axis=1)
        keep = norm2 <= (K * K)
        cand, norm2 = cand[keep], norm2[keep]
        order = np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0], norm2))
        cand, norm2 = cand[order], norm2[order]
        feas = np.ones(len(cand), dtype=bool)
        chosen = []
        ok = True
        for _ in range(n):
            idx = np.flatnonzero(feas)
            if len(idx) == 0:
                ok = False
                break
            pick = idx[0]  # sorted by (norm2, x, y, z): nearest, lexicographic
            chosen.append(cand[pick])
            diff = cand - cand[pick]
            feas &= (diff * diff).sum(axis=1) >= sep2
        if ok:
            break
        K += 8
    pts = np.array(chosen, dtype=float) / 8.0
    if n > 1:
        pts = pts / np.linalg.norm(pts, axis=1).max()
    return pts


def packed_ball_nodes(n) -> NodeSet:
    """Greedy minimum-radius packing with unit nearest-neighbor separation,
    scaled to the unit ball. Deterministic (fixed lattice, lexicographic
    tie-break)."""
    if n < 1:
        raise ValueError("need at least one node")
    return NodeSet(_packed_ball_cached(int(n)).copy(), role="rbf-centers")


_HALTON_BASES = {2: (2, 3), 3: (2, 3, 5)}


def _radical_inverse(indices, base):
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=float)
    f = 1.0 / base
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


def halton(n, d, start=1):
    """Standard Halton points in (0,1)^d, bases (2,3)/(2,3,5), from index 1."""
    if d not in _HALTON_BASES:
        raise ValueError("halton supports d in {2, 3}")
    idx = np.arange(start, start + n)
    return np.column_stack([_radical_inverse(idx, b)
                            for b in _HALTON_BASES[d]])


def halton_nodes(n, d) -> NodeSet:
    return NodeSet(halton(n, d), role="probe")


def halton_in_domain(domain: Domain, count, start=1):
    """First `count` Halton points (mapped to the bounding box) inside the
    domain; deterministic."""
    lo, hi = domain.bounding_box()
    ext = hi - lo
    got = []
    total = 0
    idx = start
    while total < count:
        batch = max(2 * (count - total), 128)
        u = halton(batch, domain.dim, start=idx)
        idx += batch
        pts = lo + u * ext
        pts = pts[domain.contains(pts)]
        got.append(pts)
        total += len(pts)
        if idx > start + 10_000_000:
            raise RuntimeError("domain appears to have negligible volume")
    return np.vstack(got)[:count]


def _grid_points(lo, hi, h):
    axes = [np.arange(lo[k], hi[k] + h * 0.5, h) for k in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def cartesian_nodes(domain: Domain, h) -> NodeSet:
    """Collocation node set: grid of spacing h clipped to the domain, points
    closer than h/2 to the boundary removed, plus boundary nodes at arc-length
    spacing h. Fill distance recorded as h."""
    if h <= 0:
        raise ValueError("spacing must be positive")
    lo, hi = domain.bounding_box()
    pts = _grid_points(lo, hi, h)
    pts = pts[domain.contains(pts)]
    if len(pts):
        pts = pts[domain.boundary_distance(pts) >= h / 2 - 1e-12]
    if len(pts) == 0:
        raise ValueError(f"spacing h={h} leaves no interior grid points")
    bnd = domain.boundary_sample(h).points
    all_pts = np.vstack([pts, bnd])
    return NodeSet(all_pts, role="rbf-centers", fill=h, n_boundary=len(bnd))


def ls_eval_points(domain: Domain, spacing):
    """Least-squares evaluation layout: interior Cartesian grid points plus
    boundary points uniform in arc length, both at the given spacing."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    lo, hi = domain.bounding_box()
    pts = _grid_points(lo, hi, spacing)
    interior = pts[domain.contains(pts)]
    boundary = domain.boundary_sample(spacing).points
    return interior, boundary


def plan_oversampling(domain: Domain, n_nodes, beta_target,
                      max_iter=60) -> OversamplingPlan:
    """Bisect a single spacing scale until the evaluation count M satisfies
    |M/N - beta| <= 0.02 beta (or the iteration budget runs out)."""
    if beta_target <= 1:
        raise ValueError("beta_target must exceed 1")
    lo_box, hi_box = domain.bounding_box()
    extent = float(np.max(hi_box - lo_box))

    def count(s):
        yi, yb = ls_eval_points(domain, s)
        return len(yi) + len(yb)

    target = beta_target * n_nodes
    # initial bracket: volume heuristic, expanded until it straddles the target
    s_mid = extent / max(2.0, target ** (1.0 / domain.dim))
    s_lo, s_hi = s_mid / 4, s_mid * 4
    for _ in range(40):
        if count(s_lo) >= target:
            break
        s_lo /= 2
    for _ in range(40):
        if count(s_hi) <= target:
            break
        s_hi = min(s_hi * 2, extent * 2)
        if s_hi >= extent * 2:
            break
    best = None
    for _ in range(max_iter):
        s = math.sqrt(s_lo * s_hi)
        m = count(s)
        beta = m / n_nodes
        cand = (abs(beta - beta_target), s, m)
        if best is None or cand[0] < best[0]:
            best = cand
        if abs(beta - beta_target) <= 0.02 * beta_target and m > n_nodes:
            break
        if beta > beta_target:
            s_lo = s
        else:
            s_hi = s
    mismatch, s, m = best
    warning = mismatch > 0.02 * beta_target or m <= n_nodes
    return OversamplingPlan(beta_target, m / n_nodes, s, s, n_nodes, m,
                            warning)


def fill_distance(nodes, domain: Domain, n_probes=10_000):
    """Largest nearest-node distance over Halton probes inside the domain
    (a lower bound of the true fill distance)."""
    pts = nodes.points if isinstance(nodes, NodeSet) else np.atleast_2d(nodes)
    if len(pts) == 0:
        raise ValueError("node set is empty")
    probes = halton_in_domain(domain, n_probes)
    d, _ = cKDTree(pts).query(probes)
    return float(d.max())


def save_nodes(path, nodes: NodeSet):
    with open(path, "w") as fh:
        fh.write(f"# dim={nodes.dim} role={nodes.role}\n")
        for p in nodes.points:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")


def load_nodes(path) -> NodeSet:
    role = "rbf-centers"
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("role="):
                        role = tok[5:]
                continue
            if line:
                rows.append([float(v) for v in line.split()])
    return NodeSet(np.array(rows), role=role)
