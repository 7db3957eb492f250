import math

import numpy as np
import pytest

from solitonlab.equilibria import (
    catalog,
    centre_manifold_coeffs,
    e_minus,
    e_plus,
    planar_reduced_field,
    soliton_seed,
    sphere_fixed_linearization,
)
from solitonlab.model import grad_Q, jacobian, quantities, validate_config, vector_field

GRID = [
    ((2,), 1.0),
    ((3,), 2.0),
    ((7,), 0.5),
    ((2, 3), 1.0),
    ((4, 2), 2.0),
    ((3, 2, 7), 0.5),
    ((2, 3, 4), 1.0),
]


def _sorted(vals):
    return np.sort(np.asarray(vals))


class TestSolitonSeed:
    @pytest.mark.parametrize(
        "dims, expected",
        [
            ((2,), [1.0, 0.5, -0.5]),
            ((2, 3), [1.0, 0.5, 0.5, -0.5, -0.5]),
            ((4, 3), [0.5, 0.25, 0.25, -0.75, -0.75]),
        ],
    )
    def test_eigenvalue_multiset(self, dims, expected):
        cfg = validate_config(dims, 1.0)
        _, lin = soliton_seed(cfg)
        assert np.allclose(_sorted(lin.eigenvalues), _sorted(expected), atol=1e-15)

    def test_point_and_cone_vector(self, cfg_r2):
        eq, lin = soliton_seed(cfg_r2)
        b, bh = cfg_r2.beta, cfg_r2.beta_hat
        assert np.allclose(eq.point, [0.0, b, 0.0, bh, 0.0], atol=1e-15)
        assert np.allclose(lin.special_vector, [0.0, 2 * b, 0.0, bh, 0.0], atol=1e-15)
        # cone vector is the eigenvector of the double-rate eigenvalue
        J = jacobian(eq.point, cfg_r2)
        q = lin.special_vector
        assert np.max(np.abs(J @ q - 2 * b**2 * q)) <= 1e-14

    def test_unstable_basis_order(self, cfg_r2):
        _, lin = soliton_seed(cfg_r2)
        basis = lin.unstable_basis
        assert basis.shape == (cfg_r2.r + 1, cfg_r2.phase_dim)
        assert basis[0][0] == 1.0  # W direction first
        assert basis[1][1 + cfg_r2.r + 1] == 1.0  # then Y_2
        assert basis[-1] @ lin.special_vector == pytest.approx(
            np.linalg.norm(lin.special_vector), abs=1e-12
        )

    def test_q_direction_decreases_Q(self, cfg_r2):
        eq, lin = soliton_seed(cfg_r2)
        q_hat = lin.unstable_basis[-1]
        assert grad_Q(eq.point, cfg_r2) @ (-q_hat) < 0
        for t in (1e-4, 1e-3):
            q = quantities(eq.point - t * q_hat, 0.0, cfg_r2)
            assert q.Q < 0


class TestConePoints:
    def test_positive_eigenvalue_n8(self):
        cfg = validate_config([4, 4], 1.0)
        _, lin = e_plus(cfg)
        expected = 0.5 * (-1.0 + math.sqrt(2.0))
        assert np.max(lin.eigenvalues) == pytest.approx(expected, abs=1e-15)

    def test_coordinates(self):
        cfg = validate_config([2, 3], 2.0)
        eq, _ = e_plus(cfg)
        assert eq.point[0] == pytest.approx(math.sqrt(0.2), abs=1e-15)
        assert np.allclose(eq.point[1:3], cfg.sqrt_d / 5.0, atol=1e-15)
        q = quantities(eq.point, 0.0, cfg)
        assert q.H == pytest.approx(1.0, abs=1e-14)
        assert abs(q.Q) <= 1e-14

    @pytest.mark.parametrize("dims, eps", GRID)
    def test_eigenvalue_multiset(self, dims, eps):
        cfg = validate_config(dims, eps)
        _, lin = e_plus(cfg)
        n, r = cfg.n, cfg.r
        root = math.sqrt(1.0 + 8.0 / n)
        expected = [0.5 * (-1 + root), 0.5 * (-1 - root)] + [-1.0 / n] * r + [-1.0] * (r - 1)
        assert np.allclose(_sorted(lin.eigenvalues), _sorted(expected), atol=1e-14)

    def test_mirror_point(self, cfg_r2):
        eq_p, lin_p = e_plus(cfg_r2)
        eq_m, lin_m = e_minus(cfg_r2)
        assert eq_m.point[0] == -eq_p.point[0]
        assert np.max(np.abs(vector_field(eq_m.point, cfg_r2))) <= 1e-14
        assert np.allclose(_sorted(lin_m.eigenvalues), _sorted(lin_p.eigenvalues), atol=1e-15)


class TestEigenstructureCrossChecks:
    @pytest.mark.parametrize("dims, eps", GRID)
    def test_field_vanishes_and_residuals(self, dims, eps):
        cfg = validate_config(dims, eps)
        for eq, lin in catalog(cfg):
            assert np.max(np.abs(vector_field(eq.point, cfg))) <= 1e-14, eq.kind
            J = jacobian(eq.point, cfg)
            for mu, v in zip(lin.eigenvalues, lin.eigenvectors):
                assert np.max(np.abs(J @ v - mu * v)) <= 1e-10, eq.kind

    @pytest.mark.parametrize("dims, eps", GRID)
    def test_numeric_spectrum_matches(self, dims, eps):
        # Oracle: eigenvalues of the finite-difference Jacobian.
        cfg = validate_config(dims, eps)
        step = 1e-6
        for eq, lin in catalog(cfg):
            dim = cfg.phase_dim
            J = np.empty((dim, dim))
            for k in range(dim):
                zp, zm = eq.point.copy(), eq.point.copy()
                zp[k] += step
                zm[k] -= step
                J[:, k] = (vector_field(zp, cfg) - vector_field(zm, cfg)) / (2 * step)
            numeric = np.sort(np.linalg.eigvals(J).real)
            assert np.max(np.abs(numeric - _sorted(lin.eigenvalues))) <= 1e-6, eq.kind


class TestSphereFixed:
    def test_single_factor(self, cfg_r1):
        lin = sphere_fixed_linearization([1.0], cfg_r1)
        expected = [2.0, 1.0, 1.0 - 1.0 / math.sqrt(2)]
        assert np.allclose(_sorted(lin.eigenvalues), _sorted(expected), atol=1e-15)

    def test_two_factor_pole(self, cfg_r2):
        lin = sphere_fixed_linearization([1.0, 0.0], cfg_r2)
        vals = _sorted(lin.eigenvalues)
        assert np.isclose(vals, 1.0 - 1.0 / math.sqrt(2), atol=1e-14).any()
        assert np.isclose(vals, 1.0, atol=1e-14).sum() >= 2  # W and Y_2 directions
        assert np.isclose(vals, 0.0, atol=1e-14).sum() == cfg_r2.r - 1

    def test_eigen_residuals(self, cfg_r2):
        p = np.array([0.6, 0.8])
        lin = sphere_fixed_linearization(p, cfg_r2)
        for mu, v in zip(lin.eigenvalues, lin.eigenvectors):
            assert np.max(np.abs(lin.matrix @ v - mu * v)) <= 1e-10

    def test_rejects_non_unit(self, cfg_r2):
        with pytest.raises(ValueError):
            sphere_fixed_linearization([0.5, 0.5], cfg_r2)


class TestPlanarReducedField:
    def test_cone_point_is_critical(self):
        cfg = validate_config([2, 3], 2.0)
        x1 = math.sqrt(cfg.dims[0]) / cfg.n
        w = math.sqrt(2.0 / (cfg.n * cfg.epsilon))
        dx1, dw = planar_reduced_field(x1, w, cfg)
        assert abs(dx1) <= 1e-14 and abs(dw) <= 1e-14

    def test_nullcline(self, cfg_r2):
        slope = math.sqrt(cfg_r2.epsilon * cfg_r2.dims[0] / (2 * cfg_r2.n))
        for w in (0.1, 0.2, 0.3):
            dx1, dw = planar_reduced_field(slope * w, w, cfg_r2)
            assert abs(dw) <= 1e-15
            assert dx1 < 0  # below the cone point the flow moves left

    def test_x1_axis_pushes_right(self, cfg_r2):
        dx1, _ = planar_reduced_field(0.0, 0.5, cfg_r2)
        assert dx1 > 0

    @pytest.mark.parametrize("dims, eps", GRID)
    def test_planar_spectrum(self, dims, eps):
        # Finite differences of the planar field against the closed form.
        cfg = validate_config(dims, eps)
        x1 = math.sqrt(cfg.dims[0]) / cfg.n
        w = math.sqrt(2.0 / (cfg.n * cfg.epsilon))
        step = 1e-7
        J = np.empty((2, 2))
        for col, (dx, dw_) in enumerate(((step, 0.0), (0.0, step))):
            fp = np.array(planar_reduced_field(x1 + dx, w + dw_, cfg))
            fm = np.array(planar_reduced_field(x1 - dx, w - dw_, cfg))
            J[:, col] = (fp - fm) / (2 * step)
        root = math.sqrt(1.0 + 8.0 / cfg.n)
        expected = _sorted([0.5 * (-1 + root), 0.5 * (-1 - root)])
        assert np.max(np.abs(np.sort(np.linalg.eigvals(J).real) - expected)) <= 1e-6


class TestCentreManifold:
    def test_values(self):
        cfg = validate_config([4, 4], 2.0)
        a, c = centre_manifold_coeffs(cfg)
        assert a[0] == pytest.approx(0.5, abs=1e-15)
        assert c[0] == pytest.approx(2.0, abs=1e-15)
        cfg2 = validate_config([2, 1], 1.0)
        a2, c2 = centre_manifold_coeffs(cfg2)
        assert a2[1] == pytest.approx(1.0, abs=1e-15)
        assert c2[1] == pytest.approx(0.5, abs=1e-15)

    def test_no_cross_terms(self, cfg_r2):
        # The quadratic model X_i = a_i Y_i^2 + c_i W^2 must reproduce X_i'
        # to cubic order; a Y_j W cross term would break this at order 2.
        a, c = centre_manifold_coeffs(cfg_r2)
        rng = np.random.default_rng(7)
        for _ in range(10):
            y = 1e-3 * rng.random(cfg_r2.r)
            w = 1e-3 * rng.random()
            X = a * y**2 + c * w**2
            z = np.concatenate(([w], X, y))
            f = vector_field(z, cfg_r2)
            # dX_i/ds from the manifold model vs the field, both O(eps^4)
            fy = f[cfg_r2.r + 1 :]
            fw = f[0]
            model = 2 * a * y * fy + 2 * c * w * fw
            assert np.max(np.abs(f[1 : cfg_r2.r + 1] - model)) <= 1e-10
