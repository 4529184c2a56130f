import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslab import regularity as R
from nslab.fields import BeltramiSpec, make_abc_flow
from nslab.grid import GridSpec, PhysicalField
from nslab.norms import b_mu, sigma
from nslab.solver import Trajectory


def _const_traj(u, times):
    return Trajectory(u.grid, times, [u] * len(times))


def _unit_gradient(g):
    x1, x2, x3 = g.coords
    z = 0 * x1 + 0 * x2
    return PhysicalField(g, np.stack([np.sin(x3) + z, np.cos(x3) + z, 0 * x3 + z]))


def _zero_traj(g, T=1.0, n=11):
    z = PhysicalField(g, np.zeros((3,) + g.shape))
    return _const_traj(z, np.linspace(0, T, n))


@pytest.fixture(scope="module")
def beltrami32():
    g = GridSpec(3, 32)
    w0 = make_abc_flow(BeltramiSpec(1, 1, 1), g)
    ts = np.linspace(0, 1, 21)
    return w0, Trajectory(g, ts, [w0 * math.exp(-t) for t in ts])


class TestGeometry:
    def test_windows(self):
        assert R.ParabolicCylinder(1.0, (0, 0, 0), 0.4).window == pytest.approx((1 - 0.14, 1 + 0.02))
        assert R.ParabolicCylinder(1.0, (0, 0, 0), 0.4, "Q").window == pytest.approx((1 - 0.16, 1.0))
        with pytest.raises(ValueError):
            R.ParabolicCylinder(1.0, (0, 0, 0), 0.0)

    @settings(max_examples=20)
    @given(alpha=st.floats(1e-6, 1e6))
    def test_vertex_time_one_inside(self, alpha):
        assert R.Paraboloid(alpha, (0.3, 0.1, 0.0)).contains(1.0, (0.3, 0.1, 0.0))

    def test_aperture_ladder(self):
        assert R.aperture_ladder(3) == [1.0, 0.5, 0.25, 0.125]


class TestCKNQuantity:
    def test_zero_and_constant(self, g16):
        assert R.ckn_quantity(_zero_traj(g16, T=2.0), 1.5, (0, 0, 0), 3 * g16.h) == 0.0
        c = PhysicalField(g16, np.ones((3,) + g16.shape))
        assert R.ckn_quantity(_const_traj(c, np.linspace(0, 2, 5)), 1.5, (0, 0, 0), 3 * g16.h) == pytest.approx(0, abs=1e-20)

    @pytest.mark.parametrize("cells", [4, 5, 6])
    def test_unit_gradient_volume(self, g32, cells):
        tr = _const_traj(_unit_gradient(g32), np.linspace(0, 4, 41))
        r = cells * g32.h
        q = R.ckn_quantity(tr, 2.0, (0.1, 0.05, 0.03), r)
        assert q == pytest.approx(4 * math.pi / 3 * r**4, rel=0.02)

    def test_guards(self, g16):
        tr = _zero_traj(g16)
        with pytest.raises(ValueError):
            R.ckn_quantity(tr, 0.5, (0, 0, 0), g16.h)
        with pytest.raises(ValueError):
            R.ckn_quantity(tr, 0.01, (0, 0, 0), 3 * g16.h)

    def test_beltrami_small_r_trend(self, beltrami32):
        w0, tr = beltrami32
        g = tr.grid
        i = (17, 15, 16)
        x = tuple(g.x1d[j] for j in i)
        t = 0.6
        gs = tr.grad_sq(0)[i]
        for cells in (2, 3, 4):
            r = cells * g.h
            a, b = t - 7 * r * r / 8, t + r * r / 8
            decay = (math.exp(-2 * a) - math.exp(-2 * b)) / (2 * r * r)
            q = R.ckn_quantity(tr, t, x, r)
            assert q == pytest.approx(4 * math.pi / 3 * r**4 * gs * decay, rel=0.25)

    def test_scan(self, beltrami32):
        _, tr = beltrami32
        h = tr.grid.h
        res = R.ckn_scan(tr, 0.6, (0, 0, 0), [4 * h, 3 * h, 2 * h])
        assert res.scores[0] > res.scores[1] > res.scores[2]
        with pytest.raises(ValueError):
            R.ckn_scan(tr, 0.6, (0, 0, 0), [2 * h, 3 * h])


class TestRegularMap:
    def test_zero_field_passes_everywhere(self, g16):
        tr = _zero_traj(g16, T=2.0)
        radii = [3 * g16.h, 2 * g16.h]
        m = R.map_regular_set(tr, (0, 0, 0), R.default_lattice(tr, (0, 0, 0), radii), radii)
        assert m.verdicts.all()
        assert m.alpha_hat == max(m.apertures)
        assert np.all(m.scores == 0)

    def test_monotone_in_eps(self, beltrami32):
        _, tr = beltrami32
        h = tr.grid.h
        radii = [3 * h, 2 * h]
        m = R.map_regular_set(tr, (0, 0, 0), R.default_lattice(tr, (0, 0, 0), radii, n_times=3), radii)
        prev = np.zeros(len(m.points), dtype=bool)
        alphas = []
        for eps in (1e-3, 1e-2, 0.05, 0.1, 1.0, 10.0):
            v = m.verdicts_at(eps)
            assert np.all(v >= prev)
            prev = v
            alphas.append(m.fit_alpha(eps))
        assert alphas == sorted(alphas)

    def test_csv(self, g16):
        tr = _zero_traj(g16, T=2.0)
        radii = [2 * g16.h]
        m = R.map_regular_set(tr, (0, 0, 0), R.default_lattice(tr, (0, 0, 0), radii, n_times=2), radii)
        text = m.to_csv("config_hash=abc")
        lines = text.splitlines()
        assert lines[0] == "# config_hash=abc"
        assert lines[1] == "t,x1,x2,x3,r,score,pass"
        assert lines[-1].startswith("# alpha_hat=1")
        assert len(lines) == 3 + 2 * 3

    def test_lattice_too_short(self, g16):
        tr = _zero_traj(g16, T=0.1)
        with pytest.raises(ValueError):
            R.default_lattice(tr, (0, 0, 0), [1.0])


class TestSegment:
    def test_static_center_is_b_mu(self, beltrami32):
        _, tr = beltrami32
        res = R.segment_diagnostic(tr, (0, 0, 0), 0.8, [1.0, 0.1])
        assert res.values[0] == pytest.approx(b_mu(tr, sigma(mu=1.0), 0, 0.8), rel=1e-13)

    def test_zero(self, g16):
        res = R.segment_diagnostic(_zero_traj(g16), (1, 0, 0), 0.5, [1.0, 0.1])
        assert res.values == [0.0, 0.0] and res.singular_value == 0.0

    def test_monotone_and_extrapolation(self, beltrami32):
        _, tr = beltrami32
        res = R.segment_diagnostic(tr, (1.0, 0.5, 0), 1.0, [1.0, 0.1, 0.01, 0.001])
        assert res.monotone
        assert max(res.values) <= res.extrapolated <= res.singular_value * (1 + 1e-12)

    def test_guards(self, beltrami32):
        _, tr = beltrami32
        with pytest.raises(ValueError):
            R.segment_diagnostic(tr, (4.0, 0, 0), 1.0, [1.0])
        with pytest.raises(ValueError):
            R.segment_diagnostic(tr, (0, 0, 0), 1.0, [0.0])

    def test_cylinder_bound(self, beltrami32):
        _, tr = beltrami32
        h = tr.grid.h
        for s, r in ((0.5, 3 * h), (0.7, 4 * h)):
            lhs, rhs = R.cylinder_segment_bound(tr, (1.0, 0.0, 0.0), s, r)
            assert lhs <= 1.05 * rhs
        with pytest.raises(ValueError):
            R.cylinder_segment_bound(tr, (10.0, 0, 0), 0.5, 3 * h)


class TestTStar:
    def test_zero_perturbation(self, beltrami32):
        w0, wtr = beltrami32
        res = R.t_star(_zero_traj(w0.grid, 1.0, 21), wtr, (0, 0, 0), 0.01, (2, math.inf))
        assert res.t_star == 1.0 and res.bracket_ok

    def test_zero_reference(self, beltrami32):
        w0, vtr = beltrami32
        res = R.t_star(vtr, _zero_traj(w0.grid, 1.0, 21), (0, 0, 0), 0.01, (2, math.inf))
        assert res.t_star == 0.0 and res.bracket_ok

    def test_crossing(self, beltrami32):
        w0, wtr = beltrami32
        vtr = Trajectory(w0.grid, wtr.times, [w0 * (0.25 * math.exp(2 * t)) for t in wtr.times])
        res = R.t_star(vtr, wtr, (0, 0, 0), 0.01, (4, 6))
        assert 0 < res.t_star < 1.0
        assert res.bracket_ok
        i = res.index
        assert res.dissipation[i] <= res.reference[i]
        assert res.dissipation[i + 1] > res.reference[i + 1]

    def test_inadmissible(self, beltrami32):
        _, tr = beltrami32
        with pytest.raises(ValueError):
            R.t_star(tr, tr, (0, 0, 0), 0.01, (3, 3))

    def test_gamma_variant(self, beltrami32):
        _, tr = beltrami32
        big = R.t_star_gamma(tr, (0, 0, 0), 0.01, 1e6, 1.0)
        assert big.t_star == 1.0
        small = R.t_star_gamma(Trajectory(tr.grid, tr.times, [s * 100 for s in tr.snapshots]),
                               (0, 0, 0), 0.01, 2.0, 1.0)
        assert 0 < small.t_star < 1.0
        with pytest.raises(ValueError):
            R.t_star_gamma(tr, (0, 0, 0), 0.01, 0.5, 1.0)
