"""Carleman weight family and convex-body geometry helpers."""
import numpy as np
import pytest

from schrocip import (
    CarlemanParams,
    ConvexBody,
    build_grid,
    classify_gamma_star,
    default_alpha,
    grad_psi_nd,
    minkowski_mu,
    normal_derivative_psi,
    psi_1d,
    theta,
    theta_table,
    varphi,
    weight_e2sphi,
    weight_table,
)


def make_params(s=2.0, lam=1.0, a=0.5, ell=1.0):
    return CarlemanParams(s=s, lam=lam, alpha=default_alpha(lam, a, ell), a=a)


class TestWeightFamily:
    def test_psi_is_shifted_square(self):
        assert psi_1d(0.0, 0.5) == 0.25
        np.testing.assert_allclose(psi_1d(np.array([0.0, 1.0]), 0.5), [0.25, 2.25])

    def test_theta_formula_and_window(self):
        val = theta(0.3, 0.5, lam=1.0, a=0.5, T=2.0)
        expect = np.exp(0.8 ** 2) / (2.5 * 1.5)
        assert val == pytest.approx(expect)
        with pytest.raises(ValueError, match="open window"):
            theta(0.3, 2.0, lam=1.0, a=0.5, T=2.0)

    def test_varphi_formula_and_sign(self):
        lam, a, ell = 1.0, 0.5, 1.0
        alpha = default_alpha(lam, a, ell)
        # alpha clears e^(lam*psi) on [0, ell], so the exponent is positive
        x = np.linspace(0.0, ell, 21)
        vals = varphi(x, 0.7, lam, alpha, a, 2.0)
        assert np.all(vals > 0)
        one = varphi(0.2, -0.4, lam, alpha, a, 2.0)
        expect = (alpha - np.exp(lam * 0.7 ** 2)) / (1.6 * 2.4)
        assert one == pytest.approx(expect)

    def test_varphi_blows_up_toward_window_ends(self):
        lam, a = 1.0, 0.5
        alpha = default_alpha(lam, a, 1.0)
        near = varphi(0.5, 1.999, lam, alpha, a, 2.0)
        mid = varphi(0.5, 0.0, lam, alpha, a, 2.0)
        assert near > 100 * mid

    def test_default_alpha_strictly_dominates(self):
        lam, a, ell = 1.3, 0.4, 1.0
        alpha = default_alpha(lam, a, ell)
        x = np.linspace(0.0, ell, 101)
        assert alpha > np.max(np.exp(lam * psi_1d(x, a)))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            CarlemanParams(s=0.0, lam=1.0, alpha=20.0, a=0.5)
        with pytest.raises(ValueError):
            CarlemanParams(s=1.0, lam=-1.0, alpha=20.0, a=0.5)

    def test_weight_vanishes_exactly_at_window_ends(self):
        params = make_params()
        assert weight_e2sphi(0.5, 2.0, params, 2.0) == 0.0
        assert weight_e2sphi(0.5, -2.0, params, 2.0) == 0.0

    def test_weight_matches_exponent_inside_window(self):
        params = make_params(s=1.5)
        val = weight_e2sphi(0.3, 0.9, params, 2.0)
        expo = varphi(0.3, 0.9, params.lam, params.alpha, params.a, 2.0)
        assert val == pytest.approx(np.exp(-2.0 * 1.5 * expo))

    def test_weight_decays_in_s(self):
        p1, p2 = make_params(s=1.0), make_params(s=4.0)
        w1 = weight_e2sphi(0.4, 0.0, p1, 2.0)
        w2 = weight_e2sphi(0.4, 0.0, p2, 2.0)
        assert 0 < w2 < w1 < 1

    def test_huge_exponents_do_not_overflow(self):
        params = CarlemanParams(s=50.0, lam=8.0,
                                alpha=default_alpha(8.0, 0.5, 1.0), a=0.5)
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            w = weight_e2sphi(np.linspace(0, 1, 11), 0.5, params, 2.0)
        assert np.all(np.isfinite(w))

    def test_tables_match_pointwise_evaluation(self):
        grid = build_grid(12, 1.0, 10, 2.0)
        params = make_params()
        tab = weight_table(params, grid)
        assert tab.shape == (21, 13)
        np.testing.assert_array_equal(tab[0], 0.0)
        np.testing.assert_array_equal(tab[-1], 0.0)
        ref = weight_e2sphi(grid.x[3], grid.t[5], params, grid.T)
        assert tab[5, 3] == pytest.approx(ref, rel=1e-14)
        th = theta_table(params, grid)
        assert th[0, 0] == 0.0
        ref = theta(grid.x[2], grid.t[7], params.lam, params.a, grid.T)
        assert th[7, 2] == pytest.approx(ref, rel=1e-14)


class TestConvexBody:
    def test_validation(self):
        with pytest.raises(ValueError, match="shape"):
            ConvexBody(shape="box", radii=(1.0, 1.0))
        with pytest.raises(ValueError, match="dimension"):
            ConvexBody(shape="ball", radii=(1.0,))
        with pytest.raises(ValueError, match="equal"):
            ConvexBody(shape="ball", radii=(1.0, 2.0))
        assert ConvexBody(shape="ellipse", radii=(2.0, 1.0)).dim == 2

    def test_gauge_is_one_on_boundary(self):
        body = ConvexBody(shape="ellipse", radii=(2.0, 1.0))
        th = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        pts = np.stack([2.0 * np.cos(th), np.sin(th)], axis=1)
        np.testing.assert_allclose(minkowski_mu(pts, body), 1.0, rtol=1e-12)

    def test_gauge_is_positively_homogeneous(self):
        body = ConvexBody(shape="ball", radii=(1.5, 1.5, 1.5))
        p = np.array([0.3, -0.2, 0.9])
        assert minkowski_mu(3.0 * p, body) == pytest.approx(3.0 * minkowski_mu(p, body))

    def test_gradient_matches_finite_differences(self):
        body = ConvexBody(shape="ellipse", radii=(2.0, 0.7))
        p = np.array([0.4, 0.3])
        grad = grad_psi_nd(p, body)
        eps = 1e-6
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = eps
            fd = (minkowski_mu(p + dp, body) ** 2
                  - minkowski_mu(p - dp, body) ** 2) / (2 * eps)
            assert grad[k] == pytest.approx(fd, rel=1e-6)

    def test_observation_region_covers_outward_half(self):
        # a centered ball sees grad psi parallel to the outward normal,
        # so every boundary point qualifies
        body = ConvexBody(shape="ball", radii=(1.0, 1.0))
        th = np.linspace(0, 2 * np.pi, 24, endpoint=False)
        pts = np.stack([np.cos(th), np.sin(th)], axis=1)
        flags = classify_gamma_star(pts, pts, body)
        assert flags.all()
        # flipping the normals excludes everything
        vals = normal_derivative_psi(pts, -pts, body)
        assert np.all(vals < 0)

    def test_shape_mismatch_rejected(self):
        body = ConvexBody(shape="ball", radii=(1.0, 1.0))
        with pytest.raises(ValueError, match="matching"):
            normal_derivative_psi(np.zeros((3, 2)), np.zeros((4, 2)), body)
