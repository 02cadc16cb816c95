"""Computational domains: inside tests, boundary sampling, bounding boxes.

Five domain kinds are supported: axis-aligned boxes, star-shaped 2D regions
given by a polar radius function, simple polygons, balls, and star-shaped 3D
regions given by a radial surface function.  All domains are open; points
within 1e-12 of the boundary are treated as outside, so boundary samples never
pass :meth:`Domain.contains`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import cKDTree

BOUNDARY_TOL = 1e-12
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass
class BoundarySample:
    """Points on the domain boundary at a target arc-length separation."""

    points: np.ndarray
    spacing: float
    warning: bool = False


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got points of "
                         f"dimension {pts.shape[1]}")
    return pts, single


class Domain(ABC):
    """An open, bounded region with a deterministic inside test."""

    dim: int
    kind: str

    def contains(self, x):
        """True for points strictly inside (1e-12 boundary band excluded)."""
        pts, single = _as_points(x, self.dim)
        mask = self._inside(pts)
        return bool(mask[0]) if single else mask

    @abstractmethod
    def _inside(self, pts):
        ...

    @abstractmethod
    def boundary_sample(self, spacing) -> BoundarySample:
        ...

    @abstractmethod
    def bounding_box(self):
        """(lo, hi) of the smallest axis-aligned box containing the domain."""
        ...

    @abstractmethod
    def boundary_distance(self, pts):
        """Distance from each point to the boundary (exact for flat
        boundaries, dense-sample approximation for curved ones)."""
        ...


class Box(Domain):
    """Axis-aligned open box, e.g. the square |x_i| < 2."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("lo and hi must be 1-d arrays of equal length")
        if not np.all(self.hi > self.lo):
            raise ValueError("box must have positive extent")
        self.dim = len(self.lo)

    def _inside(self, pts):
        return np.all((pts > self.lo + BOUNDARY_TOL)
                      & (pts < self.hi - BOUNDARY_TOL), axis=1)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def boundary_distance(self, pts):
        pts, _ = _as_points(pts, self.dim)
        inner = np.minimum(pts - self.lo, self.hi - pts).min(axis=1)
        # outside points: distance to the box surface
        out = np.linalg.norm(np.maximum(self.lo - pts, 0)
                             + np.maximum(pts - self.hi, 0), axis=1)
        return np.where(inner >= 0, inner, out)

    def _corners2d(self):
        (x0, y0), (x1, y1) = self.lo, self.hi
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def boundary_sample(self, spacing):
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.dim == 2:
            return _sample_polygon_loop(self._corners2d(), spacing)
        if self.dim == 3:
            # quasi-uniform points on the 6 faces of the box
            lo, hi = self.lo, self.hi
            ext = hi - lo
            pts = []
            for axis in range(3):
                u, v = [a for a in range(3) if a != axis]
                nu = max(2, round(ext[u] / spacing) + 1)
                nv = max(2, round(ext[v] / spacing) + 1)
                uu = np.linspace(lo[u], hi[u], nu)
                vv = np.linspace(lo[v], hi[v], nv)
                U, V = np.meshgrid(uu, vv)
                for val in (lo[axis], hi[axis]):
                    face = np.empty((U.size, 3))
                    face[:, axis] = val
                    face[:, u] = U.ravel()
                    face[:, v] = V.ravel()
                    pts.append(face)
            pts = np.unique(np.vstack(pts), axis=0)
            return BoundarySample(pts, spacing)
        raise ValueError("box boundary sampling supports 2D and 3D")


def _sample_polygon_loop(vertices, spacing):
    """Equal spacing along each edge, vertices included once."""
    V = np.asarray(vertices, dtype=float)
    edges = np.roll(V, -1, axis=0) - V
    lengths = np.linalg.norm(edges, axis=1)
    perimeter = lengths.sum()
    warning = spacing > perimeter
    divs = np.maximum(1, np.round(lengths / spacing).astype(int))
    while divs.sum() < 4:  # tiny polygons / very coarse spacing
        divs[np.argmax(lengths / divs)] += 1
        warning = True
    pts = []
    for v, e, k in zip(V, edges, divs):
        t = np.arange(k) / k
        pts.append(v + t[:, None] * e)
    return BoundarySample(np.vstack(pts), spacing, warning)


def _segment_distance(pts, seg_a, seg_b):
    """Min distance from each point to a set of segments (vectorized)."""
    d = seg_b - seg_a                                  # (E, 2)
    den = (d * d).sum(axis=1)
    den[den == 0] = 1.0
    best = np.full(len(pts), np.inf)
    chunk = max(1, int(2e6 / max(len(seg_a), 1)))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        w = p[:, None, :] - seg_a[None, :, :]          # (c, E, 2)
        t = np.clip((w * d[None, :, :]).sum(-1) / den, 0.0, 1.0)
        proj = seg_a[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - proj, axis=-1).min(axis=1)
        best[s:s + chunk] = dist
    return best


class PolarStar2D(Domain):
    """Star-shaped region r < rho(theta) with rho a smooth positive function.

    The default coefficients give rho(theta) = scale*(base + sum a_k sin(k
    theta)); an arbitrary callable can be supplied instead.
    """

    kind = "polar-star-2d"
    dim = 2

    def __init__(self, scale=1.0, base=1.0, sin_coeffs=None, radius_fn=None):
        if radius_fn is not None:
            self.radius = radius_fn
        else:
            coeffs = dict(sin_coeffs or {})

            def radius(theta):
                theta = np.asarray(theta, dtype=float)
                r = np.full_like(theta, base, dtype=float)
                for k, a in coeffs.items():
                    r = r + a * np.sin(k * theta)
                return scale * r

            self.radius = radius
        self._table = None
        self._bbox = None

    def _inside(self, pts):
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return r < self.radius(theta) - BOUNDARY_TOL

    def _curve(self, theta):
        r = self.radius(np.asarray(theta, dtype=float))
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def _arc_table(self):
        """(theta, cumulative length) refined to 1e-10 relative total length."""
        if self._table is not None:
            return self._table
        m = 2048
        prev = None
        while True:
            theta = np.linspace(0.0, 2.0 * np.pi, m + 1)
            p = self._curve(theta)
            seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
            total = seg.sum()
            if prev is not None and abs(total - prev) <= 1e-10 * total:
                break
            if m >= 1 << 22:
                break
            prev = total
            m *= 2
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._table = (theta, cum, p)
        return self._table

    def boundary_sample(self, spacing):
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        theta, cum, _ = self._arc_table()
        total = cum[-1]
        k = max(4, round(total / spacing))
        targets = np.arange(k) * total / k
        th = np.interp(targets, cum, theta)
        return BoundarySample(self._curve(th), spacing, spacing > total)

    def bounding_box(self):
        if self._bbox is not None:
            return self._bbox
        theta, _, p = self._arc_table()

        def polish(fun, t0):
            res = minimize_scalar(fun, bracket=(t0 - 1e-3, t0, t0 + 1e-3),
                                  options={"xtol": 1e-12})
            return -res.fun

        funs = [lambda t: -self.radius(t) * np.cos(t),   # max x
                lambda t: self.radius(t) * np.cos(t),    # -min x
                lambda t: -self.radius(t) * np.sin(t),   # max y
                lambda t: self.radius(t) * np.sin(t)]    # -min y
        raw = [p[:, 0].argmax(), p[:, 0].argmin(), p[:, 1].argmax(),
               p[:, 1].argmin()]
        vals = [polish(f, theta[i]) for f, i in zip(funs, raw)]
        lo = np.array([-vals[1], -vals[3]])
        hi = np.array([vals[0], vals[2]])
        self._bbox = (lo, hi)
        return lo.copy(), hi.copy()

    def boundary_distance(self, pts):
        pts, _ = _as_points(pts, 2)
        _, _, p = self._arc_table()
        step = max(1, len(p) // 65536)
        dense = p[::step]
        d, _ = cKDTree(dense).query(pts)
        return d


class Polygon2D(Domain):
    """Simple (non-self-intersecting) polygon; even-odd inside rule with the
    1e-12 boundary band treated as outside."""

    kind = "polygon-2d"
    dim = 2

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise ValueError("need at least 3 two-dimensional vertices")
        if np.allclose(V[0], V[-1]):
            V = V[:-1]
        self.vertices = V
        self._check_simple()

    def _check_simple(self):
        V = self.vertices
        E = len(V)
        A = V
        B = np.roll(V, -1, axis=0)
        for i in range(E):
            for j in range(i + 1, E):
                if j == i or (j + 1) % E == i or (i + 1) % E == j:
                    continue
                if _segments_cross(A[i], B[i], A[j], B[j]):
                    raise ValueError(
                        f"polygon is self-intersecting (edges {i} and {j})")

    def _inside(self, pts):
        near = self.boundary_distance(pts) <= BOUNDARY_TOL
        V = self.vertices
        x, y = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        x0, y0 = V[:, 0], V[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        for a0, b0, a1, b1 in zip(x0, y0, x1, y1):
            crossing = ((b0 > y) != (b1 > y))
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = a0 + (y - b0) * (a1 - a0) / (b1 - b0)
            inside ^= crossing & (x < xi)
        return inside & ~near

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def boundary_distance(self, pts):
        pts, _ = _as_points(pts, 2)
        return _segment_distance(pts, self.vertices,
                                 np.roll(self.vertices, -1, axis=0))

    def boundary_sample(self, spacing):
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        return _sample_polygon_loop(self.vertices, spacing)


def fibonacci_sphere(n):
    """n quasi-uniform unit directions (spherical Fibonacci lattice)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ang = i * GOLDEN_ANGLE
    return np.column_stack([rho * np.cos(ang), rho * np.sin(ang), z])


class Ball3D(Domain):
    """Open ball of given radius centered at the origin."""

    kind = "ball-3d"
    dim = 3

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def _inside(self, pts):
        return np.linalg.norm(pts, axis=1) < self.radius - BOUNDARY_TOL

    def bounding_box(self):
        r = self.radius
        return np.full(3, -r), np.full(3, r)

    def boundary_distance(self, pts):
        pts, _ = _as_points(pts, 3)
        return np.abs(self.radius - np.linalg.norm(pts, axis=1))

    def boundary_sample(self, spacing):
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        area = 4.0 * np.pi * self.radius**2
        k = max(4, round(area / spacing**2))
        return BoundarySample(self.radius * fibonacci_sphere(k), spacing,
                              spacing**2 > area)


class RadialStar3D(Domain):
    """Star-shaped 3D region r < rho(theta, phi), with theta the azimuth in
    [0, 2pi) and phi the polar angle in [0, pi]."""

    kind = "radial-star-3d"
    dim = 3

    def __init__(self, radius_fn):
        self.radius = radius_fn
        self._bbox = None
        self._area = None
        self._dense = None

    def _angles(self, pts):
        r = np.linalg.norm(pts, axis=1)
        safe = np.where(r > 0, r, 1.0)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        phi = np.arccos(np.clip(pts[:, 2] / safe, -1.0, 1.0))
        return r, theta, phi

    def _inside(self, pts):
        r, theta, phi = self._angles(pts)
        return r < self.radius(theta, phi) - BOUNDARY_TOL

    def _surface(self, dirs):
        r = np.linalg.norm(dirs, axis=1)
        theta = np.arctan2(dirs[:, 1], dirs[:, 0])
        phi = np.arccos(np.clip(dirs[:, 2] / r, -1.0, 1.0))
        return dirs * (self.radius(theta, phi) / r)[:, None]

    def surface_area(self):
        """Surface area by quadrature of r sqrt(r_th^2+sin^2(phi)(r_ph^2+r^2))."""
        if self._area is not None:
            return self._area
        nphi, nth = 512, 1024
        phi = np.linspace(0.0, np.pi, nphi)
        th = np.linspace(0.0, 2.0 * np.pi, nth, endpoint=False)
        TH, PH = np.meshgrid(th, phi)
        h = 1e-6
        r = self.radius(TH, PH)
        rth = (self.radius(TH + h, PH) - self.radius(TH - h, PH)) / (2 * h)
        rph = (self.radius(TH, PH + h) - self.radius(TH, PH - h)) / (2 * h)
        integrand = r * np.sqrt(rth**2 + np.sin(PH)**2 * (rph**2 + r**2))
        dth = 2.0 * np.pi / nth
        self._area = float(np.trapezoid(integrand, phi, axis=0).sum() * dth)
        return self._area

    def boundary_sample(self, spacing):
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        area = self.surface_area()
        k = max(4, round(area / spacing**2))
        return BoundarySample(self._surface(fibonacci_sphere(k)), spacing,
                              spacing**2 > area)

    def _dense_surface(self):
        if self._dense is None:
            self._dense = self._surface(fibonacci_sphere(131072))
        return self._dense

    def bounding_box(self):
        if self._bbox is not None:
            return self._bbox
        pts = self._dense_surface()
        lo, hi = pts.min(axis=0), pts.max(axis=0)

        def coord(angles, axis, sign):
            theta, phi = angles
            r = self.radius(theta, phi)
            v = (r * math.sin(phi) * math.cos(theta),
                 r * math.sin(phi) * math.sin(theta),
                 r * math.cos(phi))[axis]
            return -sign * v

        for axis in range(3):
            for sign, idx in ((1.0, pts[:, axis].argmax()),
                              (-1.0, pts[:, axis].argmin())):
                _, th0, ph0 = self._angles(pts[idx][None, :])
                res = minimize(coord, [th0[0], ph0[0]], args=(axis, sign),
                               method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-13})
                if sign > 0:
                    hi[axis] = max(hi[axis], -res.fun)
                else:
                    lo[axis] = min(lo[axis], res.fun)
        self._bbox = (lo, hi)
        return lo.copy(), hi.copy()

    def boundary_distance(self, pts):
        pts, _ = _as_points(pts, 3)
        d, _ = cKDTree(self._dense_surface()).query(pts)
        return d


def _segments_cross(a0, a1, b0, b1):
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(b0, b1, a0)
    d2 = orient(b0, b1, a1)
    d3 = orient(a0, a1, b0)
    d4 = orient(a0, a1, b1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def load_polygon(path):
    """Read a polygon from a text file: one `x y` pair per line, implicit
    closing edge, lines starting with '#' are comments."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"bad polygon line: {line!r}")
            rows.append([float(parts[0]), float(parts[1])])
    return Polygon2D(np.array(rows))


def save_polygon(path, polygon, comment=None):
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for x, y in polygon.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def _q_radius(theta, phi):
    s = np.sin(phi)
    t1 = np.sin(2.0 * s * np.cos(theta))
    t2 = np.sin(2.0 * s * np.sin(theta))
    t3 = np.sin(2.0 * np.cos(phi))
    return np.sqrt(1.0 + (t1 * t2 * t3) ** 2)


def standard_domain(name):
    """Domains used throughout the experiments, by CLI identifier."""
    if name == "box":
        return Box([-2.0, -2.0], [2.0, 2.0])
    if name == "star":
        return PolarStar2D(scale=2.0, base=0.7, sin_coeffs={6: 0.12, 3: 0.12})
    if name == "ball":
        return Ball3D(1.0)
    if name == "star3d":
        return RadialStar3D(_q_radius)
    if name.startswith("polygon:"):
        return load_polygon(name.split(":", 1)[1])
    raise ValueError(f"unknown domain {name!r} (use box, star, ball, star3d, "
                     "or polygon:<file>)")
