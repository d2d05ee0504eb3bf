"""Flux-vs-potential sensitivity ratios over perturbation ensembles."""
import numpy as np
import pytest

from schrocip import (
    EnsembleSpec,
    Potentials,
    RunConfig,
    h1_norm,
    lipschitz_experiment,
    pair_ratio,
    perturbation_ensemble,
)


def small_config(**over):
    base = dict(nx=40, nt_half=40, y0="cos(pi*x/2)", y_gamma0=1.0,
                p="0.5*sin(pi*x) + 0.3", p_gamma=0.4)
    base.update(over)
    return RunConfig(**base)


class TestH1Norm:
    def test_constant_series(self):
        t = np.linspace(0, 2, 101)
        val = h1_norm(np.ones_like(t), t[1] - t[0])
        assert val == pytest.approx(np.sqrt(2.0), rel=1e-12)

    def test_oscillation_adds_derivative_energy(self):
        t = np.linspace(0, 2, 2001)
        dt = t[1] - t[0]
        # |f| = 1 and |f'| = 3: integral 2 + 18 over [0, 2]
        val = h1_norm(np.exp(3j * t), dt)
        assert val == pytest.approx(np.sqrt(20.0), rel=1e-5)

    def test_rejects_short_series(self):
        with pytest.raises(ValueError, match="length"):
            h1_norm(np.array([1.0, 2.0]), 0.1)


class TestEnsemble:
    def test_amplitude_scales_but_directions_fixed(self):
        x = np.linspace(0, 1, 41)
        base = Potentials(p=np.full(41, 0.3), p_gamma=0.2, p1=np.zeros(41))
        big = perturbation_ensemble(base, EnsembleSpec(n_members=6, amplitude=0.1,
                                                       seed=4), x)
        small = perturbation_ensemble(base, EnsembleSpec(n_members=6, amplitude=0.01,
                                                         seed=4), x)
        for (qb, gb), (qs, gs) in zip(big, small):
            np.testing.assert_allclose(qb - base.p, 10.0 * (qs - base.p),
                                       atol=1e-14)
            assert gb - base.p_gamma == pytest.approx(10.0 * (gs - base.p_gamma))

    def test_members_nonzero_and_pinned_at_ends(self):
        x = np.linspace(0, 1, 41)
        base = Potentials(p=np.full(41, 0.3), p_gamma=0.2, p1=np.zeros(41))
        members = perturbation_ensemble(base, EnsembleSpec(n_members=8,
                                                           amplitude=0.05,
                                                           seed=1), x)
        assert len(members) == 8
        for q, g in members:
            dev = np.abs(q - base.p)
            # sine-series directions vanish at both domain ends
            assert dev[0] == 0.0 and dev[-1] == 0.0
            assert np.max(dev) > 0.0
            # unit directions are O(1), so deviation is O(amplitude)
            assert np.max(dev) <= 0.05 * 10.0
            assert abs(g - base.p_gamma) <= 0.05 * 10.0


class TestRatios:
    def test_pair_ratio_zero_denominator_flagged(self):
        cfg = small_config()
        base = Potentials(p=np.full(41, 0.3), p_gamma=0.2, p1=np.zeros(41))
        row = pair_ratio(base, base, cfg)
        assert row.ratio is None
        assert "zero denominator" in row.flag

    def test_pair_ratio_positive_for_distinct_potentials(self):
        cfg = small_config()
        a = Potentials(p=np.full(41, 0.3), p_gamma=0.2, p1=np.zeros(41))
        b = Potentials(p=np.full(41, 0.4), p_gamma=0.2, p1=np.zeros(41))
        row = pair_ratio(a, b, cfg)
        assert row.ratio is not None and row.ratio > 0
        assert row.numerator > 0 and row.denominator > 0

    def test_experiment_table_and_ratio_spread(self):
        cfg = small_config()
        base = Potentials(p=0.5 * np.sin(np.pi * np.linspace(0, 1, 41)) + 0.3,
                          p_gamma=0.4, p1=np.zeros(41))
        spec = EnsembleSpec(n_members=8, amplitude=0.05, seed=2)
        table = lipschitz_experiment(base, spec, cfg)
        assert len(table.rows) == 8
        ratios = table.ratios
        assert ratios.size == 8
        assert np.all(ratios > 0)
        # two-sided stability keeps the spread moderate
        assert ratios.max() / ratios.min() < 10.0

    def test_threads_do_not_change_the_table(self):
        cfg = small_config(nx=30, nt_half=30)
        base = Potentials(p=np.full(31, 0.3), p_gamma=0.2, p1=np.zeros(31))
        spec = EnsembleSpec(n_members=6, amplitude=0.05, seed=7)
        serial = lipschitz_experiment(base, spec, cfg, threads=1)
        parallel = lipschitz_experiment(base, spec, cfg, threads=3)
        np.testing.assert_array_equal(serial.ratios, parallel.ratios)
