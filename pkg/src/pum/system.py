"""Global operator assembly and solution.

Rows of the global system enforce -lap(u) = f at interior evaluation points
and u = g at boundary evaluation points; columns are nodal values.  Per patch
the interior block is

    -( diag(lap w_j) I_phi + 2 sum_k diag(d_k w_j) d_k phi
       + diag(w_j) lap phi ) phi(X_j, X_j)^{-1}

and the boundary block diag(w_j) I_phi phi(X_j, X_j)^{-1}, both computed in
patch-local coordinates so congruent patches produce identical blocks.

Collocation (square system) is solved by sparse LU; least squares by dense QR
below 5000 unknowns and by sparse normal equations with iterative refinement
above (scipy has no sparse QR; refinement restores the orthogonality of the
residual to the QR level and is verified by the runtime check).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import qr, solve_triangular
from scipy.spatial import cKDTree

from . import backend
from .cover import CoverageError, PatchCover, shepard_weights
from .geometry import Domain
from .kernels import Kernel, factorize_local
from .problems import ManufacturedProblem
from .sampling import (NodeSet, cartesian_nodes, halton, halton_in_domain,
                       ls_eval_points, packed_ball_nodes, plan_oversampling,
                       vogel_nodes)

DENSE_QR_LIMIT = 5000


class SolverError(RuntimeError):
    """The assembled system could not be solved."""


@dataclass
class LocalOperator:
    """Per-patch blocks and their index maps into the global system."""

    interior: np.ndarray        # (m_i, n_j), units 1/length^2
    boundary: np.ndarray        # (m_b, n_j), dimensionless
    rows_interior: np.ndarray   # global row indices of the interior rows
    rows_boundary: np.ndarray
    cols: np.ndarray            # global column indices (J_j)


@dataclass
class Layout:
    """Node/evaluation geometry of one discretization."""

    method: str                          # 'collocation' | 'least-squares'
    nodes: np.ndarray                    # (N, d) global nodes
    patch_cols: list                     # J_j per patch
    patch_nodes_local: list              # X_j - c_j per patch
    facts: list                          # LocalFactorization per patch
    eval_points: np.ndarray              # (M, d), greedy patch order
    eval_is_boundary: np.ndarray         # (M,) bool
    shared_fact: bool = False
    beta: float | None = None
    n_per_patch: int | None = None
    warnings: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_eval(self):
        return len(self.eval_points)


@dataclass
class GlobalSystem:
    method: str
    L: sp.csr_matrix
    F: np.ndarray
    layout: Layout
    cover: PatchCover
    kernel: Kernel
    domain: Domain
    problem: ManufacturedProblem | None = None

    @property
    def shape(self):
        return self.L.shape


@dataclass
class SolveReport:
    """Solution vector plus diagnostics of one solve."""

    U: np.ndarray
    residual: np.ndarray | None = None
    orthogonality: float | None = None
    probe_error: float | None = None
    stability_norm: float | None = None
    timings: dict = field(default_factory=dict)
    factors: object = None
    flags: list = field(default_factory=list)


def greedy_patch_order(points, cover: PatchCover):
    """Permutation ordering points by patch: all unclaimed points of patch 1,
    then of patch 2, and so on.  Raises CoverageError for unclaimed points."""
    pts = np.atleast_2d(points)
    tree = cKDTree(pts)
    claimed = np.zeros(len(pts), dtype=bool)
    order = []
    for c in cover.centers:
        idx = np.array(sorted(tree.query_ball_point(c, cover.radius)),
                       dtype=int)
        if len(idx):
            idx = idx[np.linalg.norm(pts[idx] - c, axis=1)
                      < cover.radius * (1 - 1e-15)]
        fresh = idx[~claimed[idx]]
        order.extend(fresh.tolist())
        claimed[fresh] = True
    if not claimed.all():
        p = pts[np.flatnonzero(~claimed)[0]]
        raise CoverageError(
            f"{int((~claimed).sum())} point(s) lie in no patch, first at "
            f"{np.array2string(p, precision=6)}")
    return np.array(order, dtype=int)


def _points_in_patch(tree, pts, center, radius):
    idx = np.array(sorted(tree.query_ball_point(center, radius)), dtype=int)
    if len(idx):
        idx = idx[np.linalg.norm(pts[idx] - center, axis=1)
                  < radius * (1 - 1e-15)]
    return idx


def collocation_layout(domain: Domain, cover: PatchCover, kernel: Kernel,
                       h, node_set: NodeSet | None = None) -> Layout:
    """Collocation: global Cartesian node set, Y = X, per-patch
    factorizations."""
    ns = node_set if node_set is not None else cartesian_nodes(domain, h)
    pts = ns.points
    is_b = np.zeros(len(pts), dtype=bool)
    if ns.n_boundary:
        is_b[len(pts) - ns.n_boundary:] = True
    perm = greedy_patch_order(pts, cover)
    pts, is_b = pts[perm], is_b[perm]

    tree = cKDTree(pts)
    patch_cols, patch_local, facts = [], [], []
    for c in cover.centers:
        idx = _points_in_patch(tree, pts, c, cover.radius)
        if len(idx) == 0:
            raise SolverError(
                f"patch at {np.array2string(c, precision=4)} contains no "
                "nodes; decrease h or increase the box size")
        local = pts[idx] - c
        patch_cols.append(idx)
        patch_local.append(local)
        facts.append(factorize_local(kernel, local))
    return Layout("collocation", pts, patch_cols, patch_local, facts,
                  eval_points=pts, eval_is_boundary=is_b)


def ls_layout(domain: Domain, cover: PatchCover, kernel: Kernel, n, beta,
              min_sep=1e-3) -> Layout:
    """Least squares: identical per-patch node layouts (Vogel in 2D, packed
    ball nodes in 3D), decoupled evaluation points at oversampling rate beta,
    rank remediation by supplementary interior points."""
    d = domain.dim
    ref = (vogel_nodes(n) if d == 2 else packed_ball_nodes(n)).points
    local_nodes = cover.radius * ref            # shared, exact for all patches
    fact = factorize_local(kernel, local_nodes)

    warnings = []
    centers = cover.centers
    plan = plan_oversampling(domain, n * len(centers), beta)
    if plan.warning:
        warnings.append(
            f"oversampling target {beta} not met within 2% "
            f"(achieved {plan.beta_achieved:.3f})")
    yi, yb = ls_eval_points(domain, plan.interior_spacing)

    # rank remediation: every patch needs at least n evaluation points
    eval_all = [yi]
    tree_yi = cKDTree(np.vstack([yi, yb]))
    all_eval = np.vstack([yi, yb])
    keep = np.ones(len(centers), dtype=bool)
    for j, c in enumerate(centers):
        m_j = len(_points_in_patch(tree_yi, all_eval, c, cover.radius))
        if m_j >= n:
            continue
        extra = _supplementary_points(domain, c, cover.radius,
                                      n + 2 - m_j, all_eval, min_sep)
        if extra is None:
            keep[j] = False
            warnings.append(
                f"pruned sliver patch at {np.array2string(c, precision=4)}: "
                "cannot host enough evaluation points")
            continue
        eval_all.append(extra)
        all_eval = np.vstack([all_eval, extra])
        tree_yi = cKDTree(all_eval)
    if not keep.all():
        centers = centers[keep]
        cover.centers = centers
    yi = np.vstack(eval_all)

    pts = np.vstack([yi, yb])
    is_b = np.zeros(len(pts), dtype=bool)
    is_b[len(yi):] = True
    perm = greedy_patch_order(pts, cover)
    pts, is_b = pts[perm], is_b[perm]

    nodes = (centers[:, None, :] + local_nodes[None, :, :]).reshape(-1, d)
    patch_cols = [np.arange(j * n, (j + 1) * n) for j in range(len(centers))]
    patch_local = [local_nodes] * len(centers)
    facts = [fact] * len(centers)
    return Layout("least-squares", nodes, patch_cols, patch_local, facts,
                  eval_points=pts, eval_is_boundary=is_b, shared_fact=True,
                  beta=len(pts) / len(nodes), n_per_patch=n,
                  warnings=warnings)


def _supplementary_points(domain, center, radius, needed, existing, min_sep):
    """Halton points inside patch AND domain, separated from existing
    evaluation points; None if the patch cannot host them."""
    d = domain.dim
    lo = center - radius
    picked = []
    tree = cKDTree(existing)
    start = 1
    for _ in range(60):
        u = halton(512, d, start=start)
        start += 512
        cand = lo + u * (2 * radius)
        r = np.linalg.norm(cand - center, axis=1)
        cand = cand[r < radius * (1 - 1e-12)]
        cand = cand[domain.contains(cand)]
        for p in cand:
            if tree.query(p)[0] < min_sep:
                continue
            if picked and np.linalg.norm(np.array(picked) - p,
                                         axis=1).min() < min_sep:
                continue
            picked.append(p)
            if len(picked) == needed:
                return np.array(picked)
    return None


def _patch_rows(kernel, fact, local_eval, local_nodes, w, gw, lw, ndim):
    """Interior-block rows: -(diag(lap w) I + 2 diag(grad w).grad
    + diag(w) lap) phi * phi(X,X)^{-1}, in patch-local coordinates."""
    KI, KG, KL = backend.kernel_bundle(kernel.code, kernel.eps, local_eval,
                                       local_nodes, ndim)
    B = lw[:, None] * KI + w[:, None] * KL
    for k in range(ndim):
        B += 2.0 * gw[:, k][:, None] * KG[k]
    return -fact.solve(B.T).T


def local_blocks(j, cover: PatchCover, kernel: Kernel, layout: Layout,
                 weights) -> LocalOperator:
    """Blocks of patch j against the layout's evaluation points."""
    idx = weights.indices[j]
    is_b = layout.eval_is_boundary[idx]
    c = cover.centers[j]
    local_nodes = layout.patch_nodes_local[j]
    fact = layout.facts[j]
    d = cover.dim

    idx_i, idx_b = idx[~is_b], idx[is_b]
    w, gw, lw = weights.values[j], weights.grads[j], weights.laps[j]
    Li = _patch_rows(kernel, fact, layout.eval_points[idx_i] - c, local_nodes,
                     w[~is_b], gw[~is_b], lw[~is_b], d)
    KIb = backend.kernel_values(kernel.code, kernel.eps,
                                layout.eval_points[idx_b] - c, local_nodes)
    Lb = fact.solve((w[is_b][:, None] * KIb).T).T
    return LocalOperator(Li, Lb, idx_i, idx_b, layout.patch_cols[j])


def assemble(problem: ManufacturedProblem | None, cover: PatchCover,
             kernel: Kernel, layout: Layout, domain: Domain) -> GlobalSystem:
    """Sum per-patch blocks into the sparse global operator and build the
    right-hand side (f at interior rows, g at boundary rows)."""
    weights = shepard_weights(cover, layout.eval_points)
    rows, cols, vals = [], [], []
    for j in range(cover.patch_count):
        if len(weights.indices[j]) == 0:
            continue
        op = local_blocks(j, cover, kernel, layout, weights)
        for block, ridx in ((op.interior, op.rows_interior),
                            (op.boundary, op.rows_boundary)):
            if len(ridx) == 0:
                continue
            rows.append(np.repeat(ridx, len(op.cols)))
            cols.append(np.tile(op.cols, len(ridx)))
            vals.append(block.ravel())
    M, N = len(layout.eval_points), len(layout.nodes)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(M, N)).tocsr()

    F = np.empty(M)
    if problem is not None:
        isb = layout.eval_is_boundary
        F[~isb] = problem.forcing(layout.eval_points[~isb])
        F[isb] = problem.dirichlet(layout.eval_points[isb])
    else:
        F[:] = 0.0
    return GlobalSystem(layout.method, L, F, layout, cover, kernel, domain,
                        problem)


def orthogonality(L, residual):
    """Normalized least-squares optimality measure
    ||L^T r||_inf / (||L||_inf ||r||_inf + tiny)."""
    num = float(np.abs(L.T @ residual).max()) if len(residual) else 0.0
    den = spla.norm(L, np.inf) * float(np.abs(residual).max()) + 1e-300
    return num / den


def _column_scaling(L):
    """Unit 2-norm column equilibration; cuts the effective condition of the
    least-squares operator before factorizing."""
    cn = np.sqrt(np.asarray(L.multiply(L).sum(axis=0)).ravel())
    cn[cn == 0] = 1.0
    return 1.0 / cn


def _residual_extended(L, U, F):
    """F - L U with the products accumulated in extended precision, so
    refinement is not limited by cancellation in the residual."""
    csr = L.tocsr()
    prod = csr.data.astype(np.longdouble) \
        * np.asarray(U, dtype=np.longdouble)[csr.indices]
    Lu = np.add.reduceat(prod, csr.indptr[:-1]) \
        if csr.nnz else np.zeros(L.shape[0], dtype=np.longdouble)
    counts = np.diff(csr.indptr)
    Lu[counts == 0] = 0.0  # reduceat misbehaves on empty rows
    return (np.asarray(F, dtype=np.longdouble) - Lu).astype(np.float64)


class _NormalEqFactors:
    """Pseudo-inverse application through column-equilibrated normal
    equations: L^+ = D (D L^T L D)^{-1} D L^T with D the column scaling."""

    def __init__(self, L, splu_AtA, d):
        self.L = L
        self.splu = splu_AtA
        self.d = d

    def lsq_solve(self, F, refine=8, target=1e-12):
        U = self.d * self.splu.solve(self.d * (self.L.T @ F))
        best = None
        for _ in range(refine):
            r = -_residual_extended(self.L, U, F)
            ortho = orthogonality(self.L, r)
            if best is None or ortho < best[0]:
                best = (ortho, U.copy())
            if ortho <= target:
                break
            U = U - self.d * self.splu.solve(self.d * (self.L.T @ r))
        if best[0] > target:
            # refinement stalled (kappa^2 ~ 1/eps); LSMR drives the residual
            # gradient down directly from the warm start
            polished = spla.lsmr(self.L, F, x0=best[1], atol=1e-13,
                                 btol=1e-13, maxiter=400)[0]
            ortho = orthogonality(self.L, self.L @ polished - F)
            if ortho < best[0]:
                best = (ortho, polished)
        return best[1]

    def apply_pinv_rows(self, rows):
        """rows @ L^+ for a sparse (k, N) row block."""
        Z = self.splu.solve(self.d[:, None] * rows.T.toarray())
        return (self.L @ (self.d[:, None] * Z)).T


class _QRFactors:
    """QR of the column-equilibrated operator: L D = Q R."""

    def __init__(self, L, Q, R, d):
        self.L = L
        self.Q = Q
        self.R = R
        self.d = d

    def lsq_solve(self, F, refine=2, target=1e-13):
        U = self.d * solve_triangular(self.R, self.Q.T @ F, lower=False)
        best = None
        for _ in range(refine + 1):
            r = self.L @ U - F
            ortho = orthogonality(self.L, r)
            if best is None or ortho < best[0]:
                best = (ortho, U.copy())
            if ortho <= target:
                break
            U = U - self.d * solve_triangular(self.R, self.Q.T @ r,
                                              lower=False)
        return best[1]

    def apply_pinv_rows(self, rows):
        """rows @ L^+ = (rows D) R^{-1} Q^T."""
        W = solve_triangular(self.R, self.d[:, None] * rows.T.toarray(),
                             trans="T", lower=False)
        return (self.Q @ W).T


class _LUFactors:
    def __init__(self, splu_L):
        self.splu = splu_L

    def apply_pinv_rows(self, rows):
        """rows @ L^{-1} = (L^{-T} rows^T)^T."""
        Z = self.splu.solve(np.asarray(rows.T.toarray()), trans="T")
        return Z.T


def solve(system: GlobalSystem) -> SolveReport:
    """Direct solve: sparse LU for collocation, QR (dense below 5000
    unknowns, normal equations with refinement above) for least squares."""
    M, N = system.shape
    timings = {}
    t0 = time.perf_counter()
    if system.method == "collocation":
        if M != N:
            raise SolverError("collocation system must be square")
        try:
            lu = spla.splu(system.L.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from exc
        timings["factorize"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        U = lu.solve(system.F)
        timings["solve"] = time.perf_counter() - t1
        if not np.all(np.isfinite(U)):
            raise SolverError("collocation solve produced non-finite values")
        return SolveReport(U=U, timings=timings, factors=_LUFactors(lu))

    if M <= N:
        raise SolverError("least-squares system must be overdetermined")
    d = _column_scaling(system.L)
    if N < DENSE_QR_LIMIT:
        Q, R = qr(system.L.toarray() * d[None, :], mode="economic")
        timings["factorize"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        diag = np.abs(np.diag(R))
        if diag.min() <= N * np.finfo(float).eps * diag.max():
            col = int(np.argmin(diag))
            raise SolverError(
                f"rank-deficient least-squares operator (column {col}, "
                f"patch {col // max(1, system.layout.n_per_patch or 1)})")
        factors = _QRFactors(system.L, Q, R, d)
    else:
        Ls = system.L @ sp.diags(d)
        AtA = (Ls.T @ Ls).tocsc()
        try:
            # AtA is SPD: no-pivot symmetric-mode LU (Cholesky-like fill)
            lu = spla.splu(AtA, permc_spec="MMD_AT_PLUS_A",
                           diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(f"normal-equation factorization failed: {exc}"
                              ) from exc
        factors = _NormalEqFactors(system.L, lu, d)
        timings["factorize"] = time.perf_counter() - t0
        t1 = time.perf_counter()
    U = factors.lsq_solve(system.F)
    timings["solve"] = time.perf_counter() - t1
    if not np.all(np.isfinite(U)):
        raise SolverError("least-squares solve produced non-finite values")
    residual = system.L @ U - system.F
    return SolveReport(U=U, residual=residual,
                       orthogonality=orthogonality(system.L, residual),
                       timings=timings, factors=factors)


def evaluate_solution(system: GlobalSystem, report: SolveReport, x):
    """Blended PUM value sum_j w_j(x) phi(x, X_j) phi(X_j,X_j)^{-1} U_j."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.asarray(x).ndim == 1
    layout, cover, kernel = system.layout, system.cover, system.kernel
    weights = shepard_weights(cover, pts)
    out = np.zeros(len(pts))
    for j in range(cover.patch_count):
        idx = weights.indices[j]
        if len(idx) == 0:
            continue
        lam = layout.facts[j].solve(report.U[layout.patch_cols[j]])
        K = backend.kernel_values(kernel.code, kernel.eps,
                                  pts[idx] - cover.centers[j],
                                  layout.patch_nodes_local[j])
        out[idx] += weights.values[j] * (K @ lam)
    return float(out[0]) if single else out


def operator_rows(system: GlobalSystem, pts, is_boundary=None):
    """PUM operator rows at arbitrary points: -laplacian rows at interior
    points, identity (boundary-condition) rows where is_boundary is set."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if is_boundary is None:
        is_boundary = np.zeros(len(pts), dtype=bool)
    layout, cover, kernel = system.layout, system.cover, system.kernel
    weights = shepard_weights(cover, pts)
    rows, cols, vals = [], [], []
    for j in range(cover.patch_count):
        idx = weights.indices[j]
        if len(idx) == 0:
            continue
        isb = is_boundary[idx]
        c = cover.centers[j]
        w, gw, lw = (weights.values[j], weights.grads[j], weights.laps[j])
        blocks = []
        if (~isb).any():
            Li = _patch_rows(kernel, layout.facts[j], pts[idx[~isb]] - c,
                             layout.patch_nodes_local[j], w[~isb], gw[~isb],
                             lw[~isb], cover.dim)
            blocks.append((Li, idx[~isb]))
        if isb.any():
            KI = backend.kernel_values(kernel.code, kernel.eps,
                                       pts[idx[isb]] - c,
                                       layout.patch_nodes_local[j])
            Lb = layout.facts[j].solve((w[isb][:, None] * KI).T).T
            blocks.append((Lb, idx[isb]))
        for block, ridx in blocks:
            rows.append(np.repeat(ridx, len(layout.patch_cols[j])))
            cols.append(np.tile(layout.patch_cols[j], len(ridx)))
            vals.append(block.ravel())
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(pts), len(layout.nodes))).tocsr()


def stability_norm(system: GlobalSystem, report: SolveReport,
                   n_probes=1000):
    """max-abs-row-sum of L(probes, X) L^+, the discrete-to-continuous
    stability measure, over interior Halton probes."""
    probes = halton_in_domain(system.domain, n_probes)
    rows = operator_rows(system, probes)
    prod = report.factors.apply_pinv_rows(rows)
    return float(np.abs(prod).sum(axis=1).max())


def export_matrix(path, system: GlobalSystem):
    """Coordinate-format text export: header `# M N nnz`, zero-based
    `row col value` lines."""
    coo = system.L.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
