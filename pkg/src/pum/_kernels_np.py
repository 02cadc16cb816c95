"""Pure-numpy implementations of the hot evaluation kernels.

This module mirrors the compiled extension ``pum._ckernels``.  Both expose the
same four functions over C-contiguous float64 arrays; the active one is chosen
in ``pum.backend``.

Kernel families are identified by integer codes (see ``pum.kernels``):
0 = gaussian exp(-eps^2 r^2), 1 = multiquadric sqrt(1 + eps^2 r^2),
2 = inverse quadratic 1/(1 + eps^2 r^2).

Derivatives are taken of x -> phi(||x - c||) and are expressed through
t = r^2, for which every family is smooth (no special case at r = 0).
"""

import numpy as np
from scipy.spatial.distance import cdist

GAUSSIAN = 0
MULTIQUADRIC = 1
INVERSE_QUADRATIC = 2


def kernel_values(family, eps, A, B):
    """phi(||a_i - b_k||) as an (m, n) array."""
    t = cdist(A, B, "sqeuclidean")
    e2 = eps * eps
    if family == GAUSSIAN:
        return np.exp(-e2 * t)
    if family == MULTIQUADRIC:
        return np.sqrt(1.0 + e2 * t)
    if family == INVERSE_QUADRATIC:
        return 1.0 / (1.0 + e2 * t)
    raise ValueError(f"unknown kernel family code {family}")


def kernel_gradient(family, eps, A, B):
    """Gradient w.r.t. the first argument, shape (d, m, n).

    With t = r^2 and phi = G(t) the k-th component is 2 G'(t) (a_k - b_k).
    """
    t = cdist(A, B, "sqeuclidean")
    e2 = eps * eps
    if family == GAUSSIAN:
        two_gp = -2.0 * e2 * np.exp(-e2 * t)
    elif family == MULTIQUADRIC:
        two_gp = e2 / np.sqrt(1.0 + e2 * t)
    elif family == INVERSE_QUADRATIC:
        q = 1.0 + e2 * t
        two_gp = -2.0 * e2 / (q * q)
    else:
        raise ValueError(f"unknown kernel family code {family}")
    d = A.shape[1]
    out = np.empty((d, A.shape[0], B.shape[0]))
    for k in range(d):
        out[k] = two_gp * (A[:, k][:, None] - B[:, k][None, :])
    return out


def kernel_laplacian(family, eps, A, B, ndim):
    """Laplacian w.r.t. the first argument: 2 d G'(t) + 4 t G''(t), (m, n)."""
    t = cdist(A, B, "sqeuclidean")
    e2 = eps * eps
    if family == GAUSSIAN:
        E = np.exp(-e2 * t)
        return (4.0 * e2 * e2 * t - 2.0 * ndim * e2) * E
    if family == MULTIQUADRIC:
        s = np.sqrt(1.0 + e2 * t)
        return ndim * e2 / s - e2 * e2 * t / (s * s * s)
    if family == INVERSE_QUADRATIC:
        q = 1.0 + e2 * t
        return -2.0 * ndim * e2 / (q * q) + 8.0 * e2 * e2 * t / (q * q * q)
    raise ValueError(f"unknown kernel family code {family}")


def kernel_bundle(family, eps, A, B, ndim):
    """Values, gradient, and Laplacian in one pass (shared distance matrix
    and, for the gaussian, a single exponential evaluation).

    Returns (K (m,n), G (d,m,n), L (m,n)); this is the assembly hot path.
    """
    t = cdist(A, B, "sqeuclidean")
    e2 = eps * eps
    if family == GAUSSIAN:
        K = np.exp(-e2 * t)
        two_gp = -2.0 * e2 * K
        L = (4.0 * e2 * e2 * t - 2.0 * ndim * e2) * K
    elif family == MULTIQUADRIC:
        K = np.sqrt(1.0 + e2 * t)
        two_gp = e2 / K
        L = ndim * e2 / K - e2 * e2 * t / (K * K * K)
    elif family == INVERSE_QUADRATIC:
        q = 1.0 + e2 * t
        K = 1.0 / q
        two_gp = -2.0 * e2 * (K * K)
        L = (-2.0 * ndim * e2 + 8.0 * e2 * e2 * t * K) * (K * K)
    else:
        raise ValueError(f"unknown kernel family code {family}")
    d = A.shape[1]
    G = np.empty((d, A.shape[0], B.shape[0]))
    for k in range(d):
        G[k] = two_gp * (A[:, k][:, None] - B[:, k][None, :])
    return K, G, L


def wendland_parts(r):
    """Wendland C2 pieces for Shepard weights, at scaled radii r >= 0.

    Returns (psi, g1, d2) where psi(r) = (1-r)_+^4 (4r+1),
    g1(r) = psi'(r)/r = -20 (1-r)_+^3 (smooth through r = 0) and
    d2(r) = psi''(r) = 20 (1-r)_+^2 (4r-1).
    """
    u = 1.0 - r
    np.maximum(u, 0.0, out=u)
    u2 = u * u
    u3 = u2 * u
    psi = u3 * u * (4.0 * r + 1.0)
    g1 = -20.0 * u3
    d2 = 20.0 * u2 * (4.0 * r - 1.0)
    return psi, g1, d2
