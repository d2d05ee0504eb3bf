"""Weighted quadratic functional: operators, gradient, and minimizer."""
import numpy as np
import pytest

from schrocip import (
    CGOptions,
    CarlemanParams,
    JData,
    Potentials,
    SourceData,
    apply_N,
    apply_N_gamma,
    assemble_normal_system,
    build_grid,
    default_alpha,
    eval_J,
    extend_conjugate_even,
    j_gradient,
    minimize_J,
    observation_series,
    solve_forward,
    weight_table,
)

ELL, T, D = 1.0, 2.0, 1.0


def make_params(s=2.0, lam=1.0, a=0.5):
    return CarlemanParams(s=s, lam=lam, alpha=default_alpha(lam, a, ELL), a=a)


def random_free_field(grid, seed):
    """Random full-window field with the Dirichlet column zeroed."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(grid.n_times, grid.nx + 1)) * 1.0 \
        + 1j * rng.normal(size=(grid.n_times, grid.nx + 1))
    u[:, -1] = 0.0
    return u


def consistent_jdata(grid, u_star, potentials, params, eps=0.0):
    """Targets manufactured so the functional vanishes at u_star."""
    return JData(zeta=apply_N(u_star, potentials, D, grid),
                 zeta_gamma=apply_N_gamma(u_star, potentials.p_gamma, D, grid),
                 h=observation_series(u_star, grid),
                 params=params, potentials=potentials, d=D, eps=eps)


class TestOperators:
    def setup_method(self):
        self.grid = build_grid(16, ELL, 12, T)
        self.pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * self.grid.x),
                              p_gamma=0.4, p1=np.zeros(17))

    def test_apply_N_masks_untestable_nodes(self):
        u = random_free_field(self.grid, 1)
        out = apply_N(u, self.pot, D, self.grid)
        np.testing.assert_array_equal(out[0], 0.0)
        np.testing.assert_array_equal(out[-1], 0.0)
        np.testing.assert_array_equal(out[:, 0], 0.0)
        np.testing.assert_array_equal(out[:, -1], 0.0)

    def test_apply_N_matches_analytic_operator(self):
        # smooth test field u = exp(i t) sin(pi x): compare against the
        # analytic image at interior nodes on a refined pair of grids
        errs = []
        for nx in (24, 48):
            grid = build_grid(nx, ELL, nx, T)
            x, t = grid.x, grid.t
            pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * x), p_gamma=0.4,
                             p1=0.1 * x * (1 - x))
            u = np.outer(np.exp(1j * t), np.sin(np.pi * x))
            u[:, -1] = 0.0
            img = apply_N(u, pot, D, grid)
            exact = np.outer(np.exp(1j * t),
                             (-1.0 - D * np.pi ** 2 + pot.p) * np.sin(np.pi * x)
                             - pot.p1 * np.pi * np.cos(np.pi * x))
            err = np.max(np.abs(img[1:-1, 1:-1] - exact[1:-1, 1:-1]))
            errs.append(float(err))
        assert errs[0] / errs[1] > 3.2

    def test_apply_N_vanishes_on_forward_trajectory(self):
        # trajectory of the separable eigenmode: the discrete residual is
        # pure truncation error and shrinks at second order
        k = 0.8603335890193798
        norms = []
        for nx in (20, 40):
            grid = build_grid(nx, ELL, nx, T)
            pot = Potentials(p=np.full(nx + 1, 0.3), p_gamma=0.3,
                             p1=np.zeros(nx + 1))
            y0 = np.sin(k * (ELL - grid.x)).astype(complex)
            traj = solve_forward(grid, D, pot, SourceData.zeros(grid), y0, y0[0])
            full = extend_conjugate_even(traj.y, tol=1e-8)
            w2 = weight_table(make_params(s=1.0), grid)
            r = apply_N(full, pot, D, grid)
            rg = apply_N_gamma(full, pot.p_gamma, D, grid)
            norms.append((
                float(np.sqrt(np.sum(w2 * np.abs(r) ** 2) * grid.dx * grid.dt)),
                float(np.sqrt(np.sum(w2[:, 0] * np.abs(rg) ** 2) * grid.dt))))
        assert norms[0][0] / norms[1][0] > 3.0
        assert norms[0][1] / norms[1][1] > 3.0

    def test_observation_series_is_right_end_flux(self):
        u = random_free_field(self.grid, 2)
        obs = observation_series(u, self.grid)
        ref = (3 * u[:, -1] - 4 * u[:, -2] + u[:, -3]) / (2 * self.grid.dx)
        np.testing.assert_array_equal(obs, ref)

    def test_field_shape_validated(self):
        with pytest.raises(ValueError, match="shape"):
            apply_N(np.zeros((3, 3)), self.pot, D, self.grid)


class TestGradient:
    def test_matches_finite_differences(self):
        grid = build_grid(12, ELL, 10, T)
        pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * grid.x), p_gamma=0.4,
                         p1=np.zeros(13))
        params = make_params(s=1.5)
        rng = np.random.default_rng(7)
        zeta = rng.normal(size=(grid.n_times, 13)) + 0j
        data = JData(zeta=zeta, zeta_gamma=np.exp(1j * grid.t),
                     h=0.3 * np.exp(-1j * grid.t), params=params,
                     potentials=pot, d=D, eps=1e-3)
        u = random_free_field(grid, 8)
        grad = j_gradient(data, u, grid)
        step = 1e-6
        for trial in range(5):
            v = random_free_field(grid, 100 + trial)
            v /= np.max(np.abs(v))
            fd = (eval_J(data, u + step * v, grid)
                  - eval_J(data, u - step * v, grid)) / (2 * step)
            directional = float(np.sum(grad.real * v.real + grad.imag * v.imag))
            assert fd == pytest.approx(directional, rel=2e-6, abs=1e-12)


class TestNormalSystem:
    def setup_method(self):
        self.grid = build_grid(10, ELL, 8, T)
        pot = Potentials(p=np.full(11, 0.3), p_gamma=0.2, p1=np.zeros(11))
        self.data = JData.zeros(self.grid, make_params(), pot, D)

    def test_matrix_is_hermitian_psd(self):
        A, b, c = assemble_normal_system(self.data, self.grid)
        dense = A.toarray()
        np.testing.assert_allclose(dense, dense.conj().T, atol=1e-14)
        rng = np.random.default_rng(3)
        for _ in range(5):
            v = rng.normal(size=dense.shape[0]) + 1j * rng.normal(size=dense.shape[0])
            quad = np.real(np.vdot(v, dense @ v))
            assert quad >= -1e-12

    def test_eval_matches_quadratic_form(self):
        grid = self.grid
        pot = self.data.potentials
        u_star = random_free_field(grid, 11)
        data = consistent_jdata(grid, u_star, pot, make_params())
        A, b, c = assemble_normal_system(data, grid)
        u = random_free_field(grid, 12)
        x = u[:, :grid.nx].ravel()
        form = float(0.5 * np.real(np.vdot(x, A @ x)) - np.real(np.vdot(b, x)) + c)
        assert eval_J(data, u, grid) == pytest.approx(form, rel=1e-10)


class TestMinimizer:
    def test_zero_data_returns_zero(self):
        grid = build_grid(12, ELL, 10, T)
        pot = Potentials.zeros(12)
        data = JData.zeros(grid, make_params(), pot, D)
        res = minimize_J(data, grid)
        assert res.converged
        assert res.n_iter == 0
        np.testing.assert_array_equal(res.u, 0.0)
        assert res.j_value == 0.0

    def test_consistent_data_recovers_zero_cost(self):
        grid = build_grid(16, ELL, 16, T)
        pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * grid.x), p_gamma=0.4,
                         p1=np.zeros(17))
        u_star = random_free_field(grid, 21)
        data = consistent_jdata(grid, u_star, pot, make_params(s=1.0))
        res = minimize_J(data, grid, CGOptions(tol=1e-10, max_iter=60000))
        assert res.converged
        j0 = eval_J(data, np.zeros_like(u_star), grid)
        assert res.j_value <= 1e-10 * j0
        assert res.el_residual <= 1e-8

    def test_iteration_budget_and_history(self):
        grid = build_grid(12, ELL, 10, T)
        pot = Potentials(p=np.full(13, 0.3), p_gamma=0.2, p1=np.zeros(13))
        u_star = random_free_field(grid, 31)
        data = consistent_jdata(grid, u_star, pot, make_params())
        res = minimize_J(data, grid, CGOptions(tol=1e-12, max_iter=3, track_j=True))
        assert not res.converged
        assert res.n_iter == 3
        assert res.j_history is not None and res.j_history.size == 4
        # J decreases monotonically along CG iterates
        assert np.all(np.diff(res.j_history) <= 1e-12)

    def test_warm_start_shortens_the_solve(self):
        grid = build_grid(12, ELL, 10, T)
        pot = Potentials(p=np.full(13, 0.3), p_gamma=0.2, p1=np.zeros(13))
        u_star = random_free_field(grid, 41)
        data = consistent_jdata(grid, u_star, pot, make_params())
        cold = minimize_J(data, grid, CGOptions(tol=1e-8))
        warm = minimize_J(data, grid,
                          CGOptions(tol=1e-8, x0=cold.u[:, :grid.nx].ravel()))
        assert warm.converged
        assert warm.n_iter <= max(2, cold.n_iter // 10)

    def test_regularization_term_enters_cost_and_system(self):
        grid = build_grid(12, ELL, 10, T)
        pot = Potentials(p=np.full(13, 0.3), p_gamma=0.2, p1=np.zeros(13))
        u_star = random_free_field(grid, 51)
        plain = consistent_jdata(grid, u_star, pot, make_params())
        damped = consistent_jdata(grid, u_star, pot, make_params(), eps=0.5)
        u = random_free_field(grid, 52)
        gap = eval_J(damped, u, grid) - eval_J(plain, u, grid)
        assert gap > 0
        # the gap scales linearly in eps and vanishes only with the field
        damped2 = consistent_jdata(grid, u_star, pot, make_params(), eps=1.0)
        gap2 = eval_J(damped2, u, grid) - eval_J(plain, u, grid)
        assert gap2 == pytest.approx(2.0 * gap, rel=1e-12)
        # at the system level the damping is a positive diagonal shift
        A0, _, _ = assemble_normal_system(plain, grid)
        A1, _, _ = assemble_normal_system(damped, grid)
        diff = (A1 - A0).toarray()
        np.testing.assert_allclose(diff, np.diag(np.diag(diff)), atol=1e-15)
        assert np.all(np.diag(diff).real >= 0)
        assert np.max(np.diag(diff).real) > 0
