"""Forward marcher: accuracy, conservation, flux, and measurement synthesis."""
import numpy as np
import pytest

from schrocip import (
    Measurement,
    Potentials,
    SourceData,
    build_grid,
    drift_sign_report,
    flux_at_right,
    mass_series,
    solve_forward,
    synthesize_measurement,
)

ELL, T, D = 1.0, 2.0, 1.0


def manufactured_setup(nx, nt_half):
    """Exact state exp(-i t) cos(pi x / 2) with matching sources."""
    grid = build_grid(nx, ELL, nt_half, T)
    x, t = grid.x, grid.t_half
    pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * x), p_gamma=0.4,
                     p1=0.2 * x * (1.0 - x))
    cosx = np.cos(np.pi * x / 2)
    sinx = np.sin(np.pi * x / 2)
    phase = np.exp(-1j * t)[:, None]
    y_exact = phase * cosx
    g = phase * ((1.0 - D * (np.pi / 2) ** 2 + pot.p) * cosx
                 + pot.p1 * (np.pi / 2) * sinx)
    g_gamma = np.exp(-1j * t) * (1.0 + pot.p_gamma)
    sources = SourceData(g=g, g_gamma=g_gamma)
    return grid, pot, sources, y_exact


def manufactured_error(nx):
    grid, pot, sources, y_exact = manufactured_setup(nx, nx)
    traj = solve_forward(grid, D, pot, sources, y_exact[0], y_exact[0, 0])
    return float(np.max(np.abs(traj.y - y_exact)))


class TestAccuracy:
    def test_reproduces_manufactured_state(self):
        err = manufactured_error(80)
        assert err < 2e-4

    def test_second_order_in_space_and_time(self):
        coarse, fine = manufactured_error(40), manufactured_error(80)
        assert 3.2 < coarse / fine < 4.8

    def test_superposition(self):
        grid = build_grid(40, ELL, 40, T)
        pot = Potentials(p=np.full(41, 0.3), p_gamma=0.2, p1=np.zeros(41))
        zeros = SourceData.zeros(grid)
        ya = np.cos(np.pi * grid.x / 2).astype(complex)
        yb = np.sin(np.pi * grid.x).astype(complex)
        ta = solve_forward(grid, D, pot, zeros, ya, ya[0])
        tb = solve_forward(grid, D, pot, zeros, yb, yb[0])
        tab = solve_forward(grid, D, pot, zeros, ya + yb, ya[0] + yb[0])
        np.testing.assert_allclose(tab.y, ta.y + tb.y, atol=1e-12)

    def test_trajectory_contract(self):
        grid, pot, sources, y_exact = manufactured_setup(20, 20)
        traj = solve_forward(grid, D, pot, sources, y_exact[0], y_exact[0, 0])
        assert traj.window == "half"
        assert traj.y.shape == (21, 21)
        np.testing.assert_array_equal(traj.y[:, -1], 0.0)
        np.testing.assert_array_equal(traj.y[:, 0], traj.y_gamma)
        np.testing.assert_allclose(traj.y[0], y_exact[0], atol=1e-14)


class TestConservation:
    def test_mass_drift_small_without_sources(self):
        # real potentials, no drift, no sources: the scheme preserves
        # int |y|^2 + |y_gamma|^2 up to discretization error
        grid = build_grid(100, ELL, 100, T)
        x = grid.x
        k = 0.8603335890193798   # k * tan(k) = 1, Dirichlet-compatible mode
        pot = Potentials(p=0.3 + 0.2 * np.sin(np.pi * x), p_gamma=0.3,
                         p1=np.zeros(101))
        y0 = np.sin(k * (ELL - x)).astype(complex)
        traj = solve_forward(grid, D, pot, SourceData.zeros(grid), y0, y0[0])
        m = mass_series(traj)
        drift = float(np.max(np.abs(m - m[0])) / m[0])
        assert drift < 2e-5

    def test_mass_is_real_and_positive(self):
        grid = build_grid(30, ELL, 30, T)
        pot = Potentials.zeros(30)
        y0 = np.cos(np.pi * grid.x / 2).astype(complex)
        traj = solve_forward(grid, D, pot, SourceData.zeros(grid), y0, y0[0])
        m = mass_series(traj)
        assert m.dtype == float
        assert np.all(m > 0)


class TestFlux:
    def test_exact_on_quadratics(self):
        from schrocip import Trajectory
        grid = build_grid(20, ELL, 10, T)
        y = np.tile((ELL - grid.x) ** 2 + 0j, (11, 1))
        traj = Trajectory(y=y, y_gamma=y[:, 0], grid=grid, window="half")
        np.testing.assert_allclose(flux_at_right(traj), 0.0, atol=1e-13)
        y = np.tile((ELL - grid.x) + 0j, (11, 1))
        traj = Trajectory(y=y, y_gamma=y[:, 0], grid=grid, window="half")
        np.testing.assert_allclose(flux_at_right(traj), -1.0, atol=1e-13)

    def test_converges_to_exact_flux(self):
        errs = []
        for nx in (40, 80):
            grid, pot, sources, y_exact = manufactured_setup(nx, nx)
            traj = solve_forward(grid, D, pot, sources, y_exact[0], y_exact[0, 0])
            exact = -(np.pi / 2) * np.exp(-1j * grid.t_half)
            errs.append(float(np.max(np.abs(flux_at_right(traj) - exact))))
        assert errs[0] / errs[1] > 3.0


class TestMeasurement:
    def _clean(self, nx=30):
        grid, pot, sources, y_exact = manufactured_setup(nx, nx)
        return grid, pot, sources, y_exact

    def test_noiseless_equals_flux(self):
        grid, pot, sources, y_exact = self._clean()
        meas = synthesize_measurement(grid, D, pot, sources, y_exact[0],
                                      y_exact[0, 0], sigma=0.0, seed=5)
        traj = solve_forward(grid, D, pot, sources, y_exact[0], y_exact[0, 0])
        np.testing.assert_array_equal(meas.flux, flux_at_right(traj))

    def test_noise_is_seeded_and_scaled(self):
        grid, pot, sources, y_exact = self._clean()
        args = (grid, D, pot, sources, y_exact[0], y_exact[0, 0])
        m1 = synthesize_measurement(*args, sigma=0.05, seed=3)
        m2 = synthesize_measurement(*args, sigma=0.05, seed=3)
        m3 = synthesize_measurement(*args, sigma=0.05, seed=4)
        np.testing.assert_array_equal(m1.flux, m2.flux)
        assert np.max(np.abs(m1.flux - m3.flux)) > 0
        clean = synthesize_measurement(*args, sigma=0.0).flux
        rms = np.sqrt(np.mean(np.abs(clean) ** 2))
        noise_rms = np.sqrt(np.mean(np.abs(m1.flux - clean) ** 2))
        assert 0.02 * rms < noise_rms < 0.10 * rms

    def test_measurement_validation(self):
        with pytest.raises(ValueError):
            Measurement(flux=np.array([1.0, np.nan]), sigma=0.0)
        with pytest.raises(ValueError):
            Measurement(flux=np.ones(5), sigma=-0.1)


class TestSourceData:
    def test_zeros_shapes(self):
        grid = build_grid(12, ELL, 9, T)
        src = SourceData.zeros(grid)
        assert src.g.shape == (10, 13)
        assert src.g_gamma.shape == (10,)

    def test_rejects_non_finite(self):
        g = np.zeros((10, 13), dtype=complex)
        g[3, 4] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            SourceData(g=g, g_gamma=np.zeros(10, dtype=complex))


class TestDriftSignReport:
    def test_clean_drift_silent(self):
        x = np.linspace(0, 1, 11)
        pot = Potentials(p=np.zeros(11), p_gamma=0.0, p1=0.3 * x * (1 - x))
        assert drift_sign_report(pot) == []

    def test_outward_drift_reported(self):
        pot = Potentials(p=np.zeros(3), p_gamma=0.0, p1=np.array([-1.0, 0.0, 2.0]))
        notes = drift_sign_report(pot)
        assert len(notes) == 2
        assert "x = 0" in notes[0]
        assert "x = ell" in notes[1]
