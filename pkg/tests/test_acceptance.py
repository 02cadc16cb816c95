"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
summary lines.  Least-squares solves performed here register their residual
orthogonality in ORTHO_LOG; the orthogonality criterion (defined last so it
runs after the others) checks the whole log.
"""

import math
import time

import numpy as np
import pytest

from pum.cli import _floor_included, fit_loglog_slope, run_single
from pum.cover import build_cover, patch_radius, shepard_weights
from pum.geometry import Box, standard_domain
from pum.kernels import (ConditioningError, Kernel, diff_matrix,
                         factorize_local, kernel_matrix)
from pum.problems import PROBLEM_IDS, fd_laplacian, manufactured
from pum.sampling import halton_in_domain, vogel_nodes
from pum.system import (assemble, collocation_layout, evaluate_solution,
                        ls_layout, solve)
from pum import backend

ORTHO_LOG = []


def _report(num, ok, detail, elapsed=None, budget=None):
    status = "PASS" if ok else "FAIL"
    timing = f" [{elapsed:.1f}s / {budget:.0f}s]" if elapsed is not None \
        else ""
    print(f"criterion {num:02d} {status}: {detail}{timing}")
    assert ok, f"criterion {num}: {detail}"
    if elapsed is not None and budget is not None:
        assert elapsed < budget, \
            f"criterion {num} exceeded runtime budget ({elapsed:.1f}s)"


def _run(label, *args, **kwargs):
    r = run_single(*args, **kwargs)
    if r.orthogonality is not None:
        ORTHO_LOG.append((label, r.orthogonality))
    return r


def test_criterion_01_partition_of_unity_identities():
    t0 = time.perf_counter()
    H = 0.4
    worst = {}
    for name in ("box", "star"):
        dom = standard_domain(name)
        cov = build_cover(dom, H, 0.2)
        probes = halton_in_domain(dom, 1000)
        w, g, lp = shepard_weights(cov, probes).sums()
        worst[name] = (np.abs(w - 1).max(), np.abs(g).max(),
                       np.abs(lp).max())
    ok = all(v[0] <= 1e-12 and v[1] <= 1e-9 / H and v[2] <= 1e-9 / H**2
             for v in worst.values())
    detail = "; ".join(
        f"{k}: |sum w-1|={v[0]:.1e}, |sum grad|={v[1]:.1e}, "
        f"|sum lap|={v[2]:.1e}" for k, v in worst.items())
    _report(1, ok, detail, time.perf_counter() - t0, 1.0)


def test_criterion_02_cover_cardinalities():
    t0 = time.perf_counter()
    box = standard_domain("box")
    star = standard_domain("star")
    p1 = build_cover(box, 0.4, 0.2).patch_count
    p2 = build_cover(box, 4 / 11, 0.2).patch_count
    p3 = build_cover(star, 0.6, 0.2).patch_count
    ok = p1 == 100 and p2 == 121 and p3 in (23, 24, 25)
    _report(2, ok, f"box H=0.4: P={p1} (want 100); box H=4/11: P={p2} "
                   f"(want 121); star H=0.6: P={p3} (want 23..25)",
            time.perf_counter() - t0, 1.0)


def test_criterion_03_kernel_layer_exactness():
    t0 = time.perf_counter()
    k = Kernel("gaussian", 1.0)
    X = 0.5 * vogel_nodes(28).points
    fact = factorize_local(k, X)
    ident = diff_matrix("identity", X, X, fact)
    id_err = np.abs(ident.values - np.eye(28)).max()

    rng = np.random.default_rng(42)
    u = rng.random((80, 2)) * 2 - 1
    Y = 0.48 * u[np.linalg.norm(u, axis=1) < 1][:50]
    D = diff_matrix("laplacian", Y, X, fact)
    exact = backend.kernel_laplacian(k.code, k.eps, Y, X, 2)
    rep_err = np.abs(D.values @ kernel_matrix(k, X, X) - exact).max() \
        / np.abs(exact).max()
    ok = id_err <= 1e-8 and rep_err <= 1e-7
    _report(3, ok, f"identity err={id_err:.2e} (<=1e-8); laplacian "
                   f"reproduction rel err={rep_err:.2e} (<=1e-7)",
            time.perf_counter() - t0, 1.0)


def _conditioning_permits(n, eps, H_values, delta=0.2):
    k = Kernel("gaussian", eps)
    for H in H_values:
        try:
            factorize_local(k, patch_radius(H, delta, 2)
                            * vogel_nodes(n).points)
        except ConditioningError:
            return False
    return True


def test_criterion_05_algebraic_convergence():
    t0 = time.perf_counter()
    details = []
    ok = True
    for n, Hs, window in ((28, (0.5, 0.4, 1 / 3, 0.25, 0.2), (2.6, 5.6)),
                          (55, (0.5, 0.4, 1 / 3), (5.0, math.inf))):
        eps, flag = (1.0, "") if _conditioning_permits(n, 1.0, Hs) \
            else (2.0, "eps2")
        results = [_run(f"c5 n={n} H={H:.3g}", "box", "ls", "u2", H, n,
                        eps=eps) for H in Hs]
        included = _floor_included(results)
        slope, _ = fit_loglog_slope([r.param for r in results],
                                    [r.error_inf for r in results], included)
        ok_n = window[0] <= slope <= window[1]
        ok = ok and ok_n
        excl = [f"{r.param:.3g}" for r, inc in zip(results, included)
                if not inc]
        details.append(f"n={n}{' (' + flag + ')' if flag else ''}: "
                       f"slope={slope:.2f} in [{window[0]}, {window[1]}]"
                       f"{', excluded H=' + ','.join(excl) if excl else ''}")
    _report(5, ok, "; ".join(details), time.perf_counter() - t0, 120.0)


def test_criterion_06_stability_norm_behavior():
    t0 = time.perf_counter()
    # eps unpinned by the criterion; both methods must survive H=0.1 and the
    # least-squares solves must keep residual orthogonality below the
    # criterion-4 gate, which needs eps >= 6 here
    eps = 6.0
    Hs = (0.4, 0.2, 0.1)
    norms = {}
    for method in ("ls", "c"):
        norms[method] = [
            _run(f"c6 {method} H={H}", "box", method, "u2", H, 28,
                 eps=eps).stab_norm for H in Hs]
    ls = norms["ls"]
    co = norms["c"]
    ratio = max(ls) / min(ls)
    increasing = co[0] < co[1] < co[2]
    ok = ratio <= 1.5 and increasing
    _report(6, ok, f"LS norms={['%.0f' % v for v in ls]} max/min="
                   f"{ratio:.2f} (<=1.5); collocation norms="
                   f"{['%.0f' % v for v in co]} strictly increasing="
                   f"{increasing}", time.perf_counter() - t0, 120.0)


def test_criterion_07_oversampling_effect():
    t0 = time.perf_counter()
    # solution/eps/delta are unpinned: u1 at eps=1 with overlap 0.3 keeps the
    # beta=1.1 endpoint out of the rank-marginal regime (see ledger)
    betas = (1.1, 1.2, 1.5, 2.0, 3.0)
    rs = [_run(f"c7 beta={b}", "box", "ls", "u1", 0.4, 28, delta=0.3,
               eps=1.0, beta=b) for b in betas]
    norms = [r.stab_norm for r in rs]
    errs = [r.error_inf for r in rs]
    ratio = max(errs) / min(errs)
    ok = norms[-1] <= norms[0] and ratio < 2.0
    _report(7, ok, f"norm(beta=3)={norms[-1]:.3g} <= norm(beta=1.1)="
                   f"{norms[0]:.3g}; error spread {ratio:.2f}x (<2x)",
            time.perf_counter() - t0, 120.0)


def test_criterion_08_small_instance_oracle():
    t0 = time.perf_counter()
    dom = Box([-1.0, -0.5], [1.0, 0.5])
    cov = build_cover(dom, 1.0, 0.2)
    k = Kernel("gaussian", 2.0)
    lay = ls_layout(dom, cov, k, 28, 1.5)
    gs = assemble(manufactured("u1"), cov, k, lay, dom)
    rep = solve(gs)
    ORTHO_LOG.append(("c8 2-patch", rep.orthogonality))
    A = gs.L.toarray()
    U_ne = np.linalg.solve(A.T @ A, A.T @ gs.F)
    rel = np.abs(rep.U - U_ne).max() / np.abs(U_ne).max()
    ok = gs.shape[1] <= 60 and rel <= 1e-8
    _report(8, ok, f"2-patch N={gs.shape[1]} (<=60), QR vs normal equations "
                   f"rel diff={rel:.2e} (<=1e-8)",
            time.perf_counter() - t0, 1.0)


def test_criterion_09_trial_space_exactness():
    t0 = time.perf_counter()
    # u3 IS the inverse-quadratic kernel with eps=5 centered at the origin,
    # and the origin is a grid node: single-patch collocation is exact
    dom = Box([-1, -1], [1, 1])
    cov = build_cover(dom, 2.0, 0.2)
    k = Kernel("inverse-quadratic", 5.0)
    lay = collocation_layout(dom, cov, k, 0.25)
    assert any(np.array_equal(p, [0.0, 0.0]) for p in lay.nodes)
    gs = assemble(manufactured("u3"), cov, k, lay, dom)
    rep = solve(gs)
    resid = np.abs(gs.L @ rep.U - gs.F).max()
    probes = halton_in_domain(dom, 1000)
    err = np.abs(evaluate_solution(gs, rep, probes)
                 - manufactured("u3").exact(probes)).max()
    ok = resid <= 1e-10 and err <= 1e-8
    _report(9, ok, f"residual={resid:.2e} (<=1e-10), probe error={err:.2e} "
                   f"(<=1e-8)", time.perf_counter() - t0, 1.0)


def test_criterion_10_3d_sanity():
    t0 = time.perf_counter()
    Hs = (2.02 / 5, 2.02 / 7)
    rs = [_run(f"c10 H={H:.3g}", "ball", "ls", "u5", H, 35, eps=1.0,
               with_norm=False) for H in Hs]
    errs = [r.error_inf for r in rs]
    slope, _ = fit_loglog_slope(Hs, errs, [True, True])
    ok = errs[1] < errs[0] and slope >= 1.0
    _report(10, ok, f"errors {errs[0]:.3e} -> {errs[1]:.3e} (decreasing), "
                    f"slope={slope:.2f} (>=1)",
            time.perf_counter() - t0, 300.0)


def test_criterion_11_forcing_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)
    worst = 0.0
    for pid in PROBLEM_IDS:
        prob = manufactured(pid)
        half = 1.0 if prob.dim == 3 else 2.0
        pts = (rng.random((200, prob.dim)) - 0.5) * 2 * half
        lap = prob.laplacian(pts)
        fd = fd_laplacian(prob.exact, pts, step=1e-3)
        scaled = np.abs(lap - fd) / (1.0 + np.abs(lap))
        worst = max(worst, float(scaled.max()))
    ok = worst <= 1e-7
    _report(11, ok, f"max |analytic - FD| / (1+|lap u|) = {worst:.2e} "
                    f"(<=1e-7) over u1..u5, 200 probes each",
            time.perf_counter() - t0, 5.0)


def _cheapest_achieving(method, target=1e-4):
    """Scan the standard configuration grid (cheapest first) and return
    (time, config) of the first run reaching the target error on u1."""
    eps_ladder = (1.0, 2.0) if method == "ls" else (1.0, 2.0, 3.0)
    configs = [(n, H) for n in (28, 55, 91) for H in
               (1.0, 0.8, 2 / 3, 0.5, 0.4, 1 / 3)]
    if method == "c":
        configs += [(153, H) for H in (1.0, 0.8, 2 / 3)]
    configs.sort(key=lambda c: c[0] * math.ceil(4 / c[1]) ** 2)
    for n, H in configs:
        for eps in eps_ladder:
            r = _run(f"c12 {method} n={n} H={H:.3g} eps={eps}", "box",
                     method, "u1", H, n, eps=eps, with_norm=False)
            if r.flag == "failed":
                continue
            if r.error_inf <= target:
                return r.t_total, (n, eps, H)
            break  # ran fine but too inaccurate: try the next config
    return math.inf, None


def test_criterion_12_timing_direction():
    t0 = time.perf_counter()
    t_ls, cfg_ls = _cheapest_achieving("ls")
    t_c, cfg_c = _cheapest_achieving("c")
    ok = t_ls <= t_c and math.isfinite(t_ls)
    detail = (f"LS reaches 1e-4 at {cfg_ls} in {t_ls:.2f}s; collocation "
              + (f"at {cfg_c} in {t_c:.2f}s"
                 if cfg_c else "never reaches 1e-4 within its conditioning "
                              "envelope (time = inf)"))
    _report(12, ok, detail, time.perf_counter() - t0, 120.0)


def test_criterion_04_ls_orthogonality():
    # defined last: checks every least-squares system solved above
    t0 = time.perf_counter()
    if not ORTHO_LOG:  # selective run: solve one system so the check bites
        _run("c4 standalone", "box", "ls", "u1", 0.5, 28, eps=2.0,
             with_norm=False)
    worst_label, worst = max(ORTHO_LOG, key=lambda kv: kv[1])
    ok = worst <= 1e-10
    _report(4, ok, f"{len(ORTHO_LOG)} LS systems; worst normalized "
                   f"||L^T r||_inf = {worst:.2e} ({worst_label}) (<=1e-10)",
            time.perf_counter() - t0, 30.0)
