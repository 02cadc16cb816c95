import numpy as np
import pytest

from pum.kernels import (ConditioningError, Kernel, diff_matrix,
                         factorize_local, kernel_derivative, kernel_matrix)
from pum.sampling import vogel_nodes

GAUSS1 = Kernel("gaussian", 1.0)


def vogel_patch(n=28, rho=0.5):
    return rho * vogel_nodes(n).points


class TestKernel:
    def test_invalid_family(self):
        with pytest.raises(ValueError):
            Kernel("cubic", 1.0)

    def test_invalid_eps(self):
        with pytest.raises(ValueError):
            Kernel("gaussian", 0.0)


class TestKernelMatrix:
    def test_gaussian_unit_distance(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0]])
        K = kernel_matrix(GAUSS1, A, A)
        assert abs(K[0, 1] - np.exp(-1.0)) < 1e-15
        assert abs(K[0, 1] - 0.3678794411714423) < 1e-12

    def test_single_point(self):
        for fam, at0 in (("gaussian", 1.0), ("multiquadric", 1.0),
                         ("inverse-quadratic", 1.0)):
            K = kernel_matrix(Kernel(fam, 2.0), [[0.3, 0.4]], [[0.3, 0.4]])
            assert K.shape == (1, 1) and K[0, 0] == at0

    def test_symmetry_exact(self):
        X = vogel_patch()
        for fam in ("gaussian", "multiquadric", "inverse-quadratic"):
            K = kernel_matrix(Kernel(fam, 1.3), X, X)
            np.testing.assert_array_equal(K, K.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_matrix(GAUSS1, np.zeros((2, 2)), np.zeros((2, 3)))


class TestKernelDerivative:
    def test_gaussian_laplacian_at_zero_2d(self):
        v = kernel_derivative(GAUSS1, "laplacian", [0.0, 0.0], [0.0, 0.0])
        assert abs(v - (-4.0)) < 1e-14

    def test_gaussian_laplacian_at_zero_3d_eps2(self):
        v = kernel_derivative(Kernel("gaussian", 2.0), "laplacian",
                              [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        assert abs(v - (-24.0)) < 1e-12  # -2 d eps^2

    def test_gradient_at_center_is_zero(self):
        for fam in ("gaussian", "multiquadric", "inverse-quadratic"):
            g = kernel_derivative(Kernel(fam, 1.5), "gradient", [0.7, -0.2],
                                  [0.7, -0.2])
            np.testing.assert_array_equal(g, [0.0, 0.0])

    @pytest.mark.parametrize("fam", ["gaussian", "multiquadric",
                                     "inverse-quadratic"])
    def test_matches_finite_differences(self, fam):
        k = Kernel(fam, 1.7)
        x = np.array([0.31, -0.42])
        c = np.array([-0.11, 0.23])
        h = 1e-6

        def phi(p):
            return kernel_derivative(k, "identity", p, c)

        g = kernel_derivative(k, "gradient", x, c)
        lap = kernel_derivative(k, "laplacian", x, c)
        g_fd = np.array([(phi(x + h * e) - phi(x - h * e)) / (2 * h)
                         for e in np.eye(2)])
        np.testing.assert_allclose(g, g_fd, atol=1e-9)
        h = 1e-4  # larger step for second differences
        lap_fd = sum((phi(x + h * e) - 2 * phi(x) + phi(x - h * e)) / h**2
                     for e in np.eye(2))
        assert abs(lap - lap_fd) < 1e-6


class TestFactorize:
    def test_single_node(self):
        f = factorize_local(GAUSS1, [[0.0, 0.0]])
        assert f.matrix.shape == (1, 1) and f.matrix[0, 0] == 1.0

    def test_vogel_patch_no_ridge(self):
        f = factorize_local(GAUSS1, vogel_patch())
        assert f.ridge == 0.0
        rebuilt = f.reconstruct()
        rel = np.abs(rebuilt - f.matrix).max() / np.abs(f.matrix).max()
        assert rel <= 1e-10

    def test_multiquadric_lu_reconstruct(self):
        f = factorize_local(Kernel("multiquadric", 1.0), vogel_patch(12, 0.4))
        assert f.method == "lu"
        rel = np.abs(f.reconstruct() - f.matrix).max()
        assert rel <= 1e-12 * np.abs(f.matrix).max() + 1e-14

    def test_duplicate_node_rejected(self):
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            factorize_local(GAUSS1, X)

    def test_conditioning_abort(self):
        # 55 gaussian nodes at eps=1 in a flat patch: condition > 1e15
        with pytest.raises(ConditioningError):
            factorize_local(GAUSS1, 0.3 * vogel_nodes(55).points)

    def test_solve_accuracy(self):
        f = factorize_local(GAUSS1, vogel_patch())
        rng = np.random.default_rng(1)
        x = rng.standard_normal(28)
        b = f.matrix @ x
        assert np.abs(f.solve(b) - x).max() < 1e-6


class TestDiffMatrix:
    def setup_method(self):
        self.X = vogel_patch(28, 0.5)
        self.fact = factorize_local(GAUSS1, self.X)
        rng = np.random.default_rng(7)
        self.Y = (rng.random((60, 2)) - 0.5) * 0.9

    def test_identity_cardinal_property(self):
        D = diff_matrix("identity", self.X, self.X, self.fact)
        assert np.abs(D.values - np.eye(28)).max() <= 1e-8

    def test_laplacian_kernel_reproduction(self):
        from pum import backend
        D = diff_matrix("laplacian", self.Y, self.X, self.fact)
        # D^lap(Y,X) phi(X, x_k) = lap phi(Y, x_k) for every center x_k
        phiX = kernel_matrix(GAUSS1, self.X, self.X)
        exact = backend.kernel_laplacian(GAUSS1.code, GAUSS1.eps, self.Y,
                                         self.X, 2)
        got = D.values @ phiX
        rel = np.abs(got - exact).max() / np.abs(exact).max()
        assert rel <= 1e-7

    def test_laplacian_exact_on_kernel_span(self):
        from pum import backend
        rng = np.random.default_rng(5)
        lam = rng.standard_normal(28)
        uX = kernel_matrix(GAUSS1, self.X, self.X) @ lam
        lapY = backend.kernel_laplacian(GAUSS1.code, GAUSS1.eps, self.Y,
                                        self.X, 2) @ lam
        D = diff_matrix("laplacian", self.Y, self.X, self.fact)
        rel = np.abs(D.values @ uX - lapY).max() / np.abs(lapY).max()
        assert rel <= 1e-6

    def test_gradient_consistency_with_interpolant(self):
        # compare D^grad u(X) against central differences of the
        # reconstructed interpolant for a smooth test function
        def u(p):
            return np.sin(p[:, 0]) * np.cos(0.5 * p[:, 1])

        uX = u(self.X)
        G = diff_matrix("gradient", self.Y, self.X, self.fact)
        got = np.stack([G.values[k] @ uX for k in range(2)], axis=1)
        h = 1e-5

        def interp(pts):
            K = kernel_matrix(GAUSS1, pts, self.X)
            return K @ self.fact.solve(uX)

        fd = np.stack(
            [(interp(self.Y + h * e) - interp(self.Y - h * e)) / (2 * h)
             for e in np.eye(2)], axis=1)
        assert np.abs(got - fd).max() <= 1e-5

    def test_translation_invariance(self):
        # well-conditioned configuration: coordinate rounding of the shifted
        # points is not amplified by the solve
        k = Kernel("gaussian", 3.0)
        X = vogel_patch(12, 0.4)
        rng = np.random.default_rng(2)
        Y = (rng.random((40, 2)) - 0.5) * 0.7
        shift = np.array([3.7, -1.9])
        f1 = factorize_local(k, X)
        f2 = factorize_local(k, X + shift)
        for op in ("identity", "laplacian", "gradient"):
            D1 = diff_matrix(op, Y, X, f1)
            D2 = diff_matrix(op, Y + shift, X + shift, f2)
            assert np.abs(D1.values - D2.values).max() <= 1e-13 \
                * max(1.0, np.abs(D1.values).max())

    def test_wrong_factorization_rejected(self):
        other = factorize_local(GAUSS1, vogel_patch(12, 0.4))
        with pytest.raises(ValueError):
            diff_matrix("identity", self.Y, self.X, other)


def test_inverse_quadratic_matches_runge_solution():
    # u3(x) = 1/(25 r^2 + 1) equals the inverse quadratic kernel with eps=5
    from pum.problems import manufactured
    k = Kernel("inverse-quadratic", 5.0)
    rng = np.random.default_rng(11)
    pts = (rng.random((50, 2)) - 0.5) * 4
    u3 = manufactured("u3")
    vals = np.array([kernel_derivative(k, "identity", p, [0.0, 0.0])
                     for p in pts])
    np.testing.assert_allclose(vals, u3.exact(pts), atol=1e-14)
    laps = np.array([kernel_derivative(k, "laplacian", p, [0.0, 0.0])
                     for p in pts])
    np.testing.assert_allclose(laps, u3.laplacian(pts), atol=1e-11)
