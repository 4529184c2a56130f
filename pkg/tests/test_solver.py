import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslab import solver as S
from nslab.fields import (BeltramiSpec, BumpSpec, extend_2d_to_3d, make_abc_flow, make_bump,
                          random_smooth_field, taylor_green_2d)
from nslab.grid import GridSpec, PhysicalField, spectral_divergence_residual, to_spectral, vector


def _zeros(g):
    return PhysicalField(g, np.zeros((g.dims,) + g.shape))


@pytest.fixture(scope="module")
def beltrami16():
    g = GridSpec(3, 16)
    w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g)
    return w0, S.solve_nse(w0, S.SolverConfig(dt=1e-3, t_end=0.1, stride=10))


class TestConfig:
    def test_validation(self):
        for kw in ({"dt": 0}, {"t_end": -1}, {"stride": 0}, {"integrator": "euler"}):
            with pytest.raises(ValueError):
                S.SolverConfig(**kw)

    def test_steps(self):
        assert S.SolverConfig(dt=1e-3, t_end=0.5).steps == 500
        with pytest.raises(ValueError):
            S.SolverConfig(dt=0.3, t_end=0.5).steps

    def test_digest_stable(self):
        assert S.SolverConfig().digest() == S.SolverConfig().digest()
        assert S.SolverConfig(dt=2e-3).digest() != S.SolverConfig().digest()


class TestSteps:
    def test_zero_fixed_point(self, g16):
        assert S.step_nse(_zeros(g16), 1e-3).max_abs() == 0.0
        w = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        assert S.step_perturbed(_zeros(g16), w, 1e-3).max_abs() == 0.0
        assert S.step_mollified(_zeros(g16), w, 0.2, 1e-3).max_abs() == 0.0

    def test_perturbed_with_zero_reference(self, g16):
        u = random_smooth_field(g16, 0)
        a = S.step_nse(u, 1e-3)
        b = S.step_perturbed(u, _zeros(g16), 1e-3)
        assert np.max(np.abs(a.values - b.values)) < 1e-14

    def test_mollified_zero_scale(self, g16):
        u = random_smooth_field(g16, 1)
        w = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        a = S.step_perturbed(u, w, 1e-3)
        b = S.step_mollified(u, w, 0.0, 1e-3)
        assert np.max(np.abs(a.values - b.values)) < 1e-14

    def test_beltrami_steps(self, g16):
        w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        u = w0
        for _ in range(20):
            u = S.step_nse(u, 1e-3)
        exact = w0 * math.exp(-20e-3)
        assert (u - exact).l2() / exact.l2() < 1e-8

    def test_extension_stays_2d(self, g16):
        u = extend_2d_to_3d(taylor_green_2d(GridSpec(2, 16)), g16)
        u = u + vector(g16, [0.1 * np.sin(g16.coords[1]) + 0 * g16.coords[0] + 0 * g16.coords[2],
                             0 * g16.coords[0] + 0 * g16.coords[1] + 0 * g16.coords[2],
                             0 * g16.coords[0] + 0 * g16.coords[1] + 0 * g16.coords[2]])
        for _ in range(10):
            u = S.step_nse(u, 1e-2)
        assert np.sqrt(np.sum(u.values[2] ** 2)) < 1e-10
        assert np.max(np.abs(to_spectral(u).full()[:, :, :, 1:])) < 1e-10

    def test_non_finite_input(self, g16):
        u = random_smooth_field(g16, 2)
        u.values[0, 0, 0, 0] = np.nan
        with pytest.raises(S.NumericalError):
            S.step_nse(u, 1e-3)

    def test_requires_vector(self, g16):
        with pytest.raises(ValueError):
            S.step_nse(PhysicalField(g16, np.zeros((1,) + g16.shape)), 1e-3)

    def test_mollifier_profile(self):
        s = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 2.0])
        rho = S.mollifier_hat(s)
        assert rho[0] == 1 and rho[1] == 1 and rho[2] == 1
        assert 0 < rho[3] < 1 and rho[4] == 0 and rho[5] == 0


class TestRuns:
    def test_beltrami_trajectory(self, beltrami16):
        w0, tr = beltrami16
        assert np.all(np.diff(tr.times) > 0)
        assert len(tr) == 11
        for t, u in zip(tr.times, tr.snapshots):
            exact = w0 * math.exp(-t)
            assert (u - exact).l2() / exact.l2() < 1e-8
            assert spectral_divergence_residual(u) < 1e-10
        assert tr.meta["config_hash"] == S.SolverConfig(dt=1e-3, t_end=0.1, stride=10).digest()

    def test_series_lengths(self, beltrami16):
        _, tr = beltrami16
        assert len(tr.series["t"]) == 101
        assert tr.series["energy"][-1] < tr.series["energy"][0]

    def test_zero_run(self, g16):
        tr = S.solve_nse(_zeros(g16), S.SolverConfig(dt=1e-3, t_end=0.01, stride=5))
        rep = S.energy_audit(tr)
        assert rep.max_abs == 0.0

    def test_blowup_guard(self, g16):
        u = random_smooth_field(g16, 3) * 50.0
        with pytest.raises(S.NumericalError):
            S.solve_nse(u, S.SolverConfig(dt=0.05, t_end=2.0, stride=1, blowup_factor=10.0))

    def test_taylor_green_2d(self):
        g = GridSpec(2, 16)
        W0 = taylor_green_2d(g)
        tr = S.solve_2d_nse(W0, S.SolverConfig(dt=1e-3, t_end=0.1, stride=50))
        exact = W0 * math.exp(-0.2)
        assert (tr.snapshots[-1] - exact).l2() / exact.l2() < 1e-8
        assert S.energy_audit(tr).relative < 1e-6
        with pytest.raises(ValueError):
            S.solve_2d_nse(make_abc_flow(BeltramiSpec(1, 1, 1), GridSpec(3, 16)), S.SolverConfig())

    def test_perturbed_reconstruction(self, g16):
        w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        v0 = make_bump(BumpSpec(1.2, shift=0.5), g16)
        cfg = S.SolverConfig(dt=1e-3, t_end=0.02, stride=10)
        pert = S.solve_perturbed(v0, S.beltrami_callable(w0, 1.0), cfg)
        direct = S.solve_nse(w0 + v0, cfg)
        u = S.combined(pert)
        d = (u.snapshots[-1] - direct.snapshots[-1]).l2() / direct.snapshots[-1].l2()
        assert d < 1e-10
        # co-evolving the reference matches the closed form
        co = S.solve_perturbed(v0, w0, cfg)
        assert (co.snapshots[-1] - pert.snapshots[-1]).l2() < 1e-9 * pert.snapshots[-1].l2()

    def test_beltrami_error_is_roundoff_at_every_dt(self, g16):
        # the integrating factor carries the Beltrami decay exactly
        w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        exact = w0 * math.exp(-0.05)
        for dt in (5e-3, 2.5e-3):
            u = S.solve_nse(w0, S.SolverConfig(dt=dt, t_end=0.05, stride=1)).snapshots[-1]
            assert (u - exact).l2() / exact.l2() < 1e-13

    def test_dt_halving_order(self, g16):
        u0 = random_smooth_field(g16, 5) * 4.0
        ends = [S.solve_nse(u0, S.SolverConfig(dt=dt, t_end=0.1, stride=1)).snapshots[-1]
                for dt in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
        diffs = [(a - b).l2() for a, b in zip(ends, ends[1:])]
        assert diffs[0] / diffs[1] >= 3.6
        assert diffs[1] / diffs[2] >= 3.6

    def test_random_data_smoke(self, g32):
        tr = S.solve_nse(random_smooth_field(g32, 0), S.SolverConfig(dt=1e-3, t_end=0.5, stride=100))
        assert tr.times[-1] == pytest.approx(0.5)
        assert all(np.all(np.isfinite(u.values)) for u in tr.snapshots)

    def test_index_of(self, beltrami16):
        _, tr = beltrami16
        assert tr.index_of(0.05) == 5
        with pytest.raises(ValueError):
            tr.index_of(0.055)


class TestPressure:
    def test_zero(self, g16):
        assert S.pressure_from_velocity(_zeros(g16)).max_abs() == 0.0

    def test_beltrami_pressure(self, g32):
        w = make_abc_flow(BeltramiSpec(1, 1, 1), g32)
        p = S.pressure_from_velocity(w).values[0]
        ref = -0.5 * np.sum(w.values**2, axis=0)
        assert np.max(np.abs((p - p.mean()) - (ref - ref.mean()))) < 1e-10

    @settings(max_examples=10, deadline=None)
    @given(a=st.floats(-2, 2), b=st.floats(-2, 2))
    def test_two_mode_oracle(self, a, b):
        # u = (a cos x2, b cos x1, 0): P = R1R2(2 u1 u2) = a b sin x1 sin x2 by hand
        g = GridSpec(3, 16)
        x1, x2, x3 = g.coords
        z = 0 * x1 + 0 * x2 + 0 * x3
        u = vector(g, [a * np.cos(x2) + z, b * np.cos(x1) + z, z])
        p = S.pressure_from_velocity(u).values[0]
        assert np.max(np.abs(p - a * b * np.sin(x1) * np.sin(x2) - z)) < 1e-12

    def test_perturbation_pressure_splits(self, g16):
        v = random_smooth_field(g16, 4)
        w = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        full = S.pressure_from_velocity(v + w).values[0]
        parts = S.perturbation_pressure(v, w).values[0] + S.pressure_from_velocity(w).values[0]
        assert np.max(np.abs(full - parts)) < 1e-12


class TestAudits:
    def test_beltrami_global(self, beltrami16):
        _, tr = beltrami16
        assert S.energy_audit(tr).relative < 1e-6
        rep = S.energy_audit(tr, source="snapshots")
        assert rep.relative < 1e-5
        with pytest.raises(ValueError):
            S.energy_audit(tr, source="magic")

    def test_constant_test_function_reduces_to_global(self, beltrami16):
        _, tr = beltrami16
        loc = S.local_energy_audit(tr, S.ConstantTestFunction())
        glob = S.energy_audit(tr, source="snapshots")
        assert abs(loc.residual - glob.violation[-1]) < 1e-10

    def test_zero_trajectory(self, g16):
        z = _zeros(g16)
        tr = S.Trajectory(g16, [0.0, 0.1], [z, z])
        assert S.local_energy_audit(tr).residual == 0.0

    def test_gaussian_bump(self, beltrami16):
        _, tr = beltrami16
        e0 = tr.energy(0)
        for psi in (S.TimeFactor(), S.TimeFactor(k=1.0)):
            assert abs(S.local_energy_audit(tr, S.GaussianTestFunction(), psi=psi).residual) < 1e-4 * e0

    def test_negative_test_function(self, beltrami16):
        _, tr = beltrami16
        with pytest.raises(ValueError):
            S.local_energy_audit(tr, S.SampledTestFunction(-np.ones(tr.grid.shape)))

    def test_perturbed_local_form(self, g16):
        w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g16)
        v0 = make_bump(BumpSpec(1.2, shift=0.5), g16)
        tr = S.solve_perturbed(v0, S.beltrami_callable(w0, 1.0), S.SolverConfig(dt=1e-3, t_end=0.05, stride=1))
        res = S.local_energy_audit(tr, S.GaussianTestFunction(width=0.8))
        assert abs(res.residual) < 1e-3 * tr.energy(0)
        assert res.terms["w_advect"] != 0.0

    def test_exp_weights_small_argument(self):
        a, b = S._exp_weights(np.array([1e-6, 1e-3]))
        assert a[0] == pytest.approx(0.5, rel=1e-5) and b[0] == pytest.approx(0.5, rel=1e-5)
        a2, b2 = S._exp_weights(np.array([2e-4]))
        a3, b3 = S._exp_weights(np.array([0.99e-4]))
        assert a2[0] == pytest.approx(a3[0], rel=1e-3)
