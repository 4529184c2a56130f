from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslab import inequalities as I
from nslab.fields import GaussianEnsembleSpec
from nslab.grid import GridSpec, PhysicalField, scalar


class TestValidator:
    def test_interpolation_family(self):
        for q in (Fraction(7, 2), 6, 12):
            assert I.ckn_params_valid(I.CKNParams.interpolation_family(q)).valid

    def test_cubic_set(self):
        p = I.CKNParams.cubic()
        assert -p.gamma + 3 / p.r == Fraction(1, 3)
        assert I.ckn_params_valid(p).valid

    def test_boundaries(self):
        theta_zero = I.CKNParams.of(3, 0, Fraction(2, 3), Fraction(1, 2), Fraction(1, 2))
        assert 1 in I.ckn_params_valid(theta_zero).failed
        gamma_edge = I.CKNParams.of(3, Fraction(2, 3), 1, Fraction(1, 2), Fraction(1, 2))
        assert 1 in I.ckn_params_valid(gamma_edge).failed

    def test_balance_condition(self):
        bad = I.CKNParams.of(3, Fraction(2, 3), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2))
        assert 2 in I.ckn_params_valid(bad).failed

    @settings(max_examples=30)
    @given(q=st.fractions(min_value=Fraction(301, 100), max_value=100))
    def test_family_always_valid(self, q):
        assert I.ckn_params_valid(I.CKNParams.interpolation_family(q)).valid


class TestCKNRatio:
    def test_zero_skipped(self, g8):
        z = PhysicalField(g8, np.zeros((3,) + g8.shape))
        t = I.verify_ckn_inequality(I.CKNParams.cubic(), [(0, z)], [1.0])
        assert t.skipped == 1 and not t.rows

    def test_invalid_parameters_raise(self, g8):
        bad = I.CKNParams.of(3, 0, 1, 1, 1)
        with pytest.raises(ValueError):
            I.verify_ckn_inequality(bad, [], [1.0])

    def test_reproducible_and_csv(self, g16):
        fl = I.ensemble(g16, range(3))
        a = I.verify_ckn_inequality(I.CKNParams.cubic(), fl, [1e-2, 1.0], "cubic")
        b = I.verify_ckn_inequality(I.CKNParams.cubic(), I.ensemble(g16, range(3)), [1e-2, 1.0], "cubic")
        assert a.to_csv("h") == b.to_csv("h")
        lines = a.to_csv("config_hash=x").splitlines()
        assert lines[:2] == ["# config_hash=x", "param_set,mu,seed,ratio"]
        assert len(lines) == 2 + 6
        assert set(a.argmax_seed()) == {1e-2, 1.0}

    def test_scale_invariance_at_mu_zero(self):
        g = GridSpec(3, 32)
        spec = GaussianEnsembleSpec(spread=0.2, width=(0.5, 0.7), band=g.n / 3)
        for seed in range(3):
            f1 = I.random_smooth_field(g, seed, spec)
            f2 = I.random_smooth_field(g, seed, spec, scale=2.0)
            r1 = I.ckn_ratio(I.CKNParams.cubic(), f1, 0.0)
            r2 = I.ckn_ratio(I.CKNParams.cubic(), f2, 0.0)
            assert r2 == pytest.approx(r1, rel=0.05)


class TestStein:
    def test_range(self):
        assert I.stein_range(2.0) == (-1.5, 1.5)

    def test_single_mode_unweighted(self, g16):
        x1, x2, x3 = g16.coords
        f = scalar(g16, np.cos(x1 + 2 * x2) + 0 * x3)
        for i in range(3):
            for j in range(3):
                r = I.stein_ratio(f, i, j, 2.0, 0.0, 1.0)
                k = (1, 2, 0)
                assert r == pytest.approx(k[i] * k[j] / 5.0, abs=1e-12)
                assert r <= 1 + 1e-12

    def test_boundary_exponent(self, g8):
        f = [(0, scalar(g8, np.ones(g8.shape)))]
        with pytest.raises(ValueError):
            I.verify_stein_inequality(2.0, 1.5, f, [1.0])
        with pytest.raises(ValueError):
            I.verify_stein_inequality(1.0, 0.0, f, [1.0])

    def test_tables(self, g16):
        fl = [(s, scalar(g16, f.values[0])) for s, f in I.ensemble(g16, range(2))]
        tabs = I.verify_stein_inequality(2.0, -0.5, fl, [1e-2, 1.0])
        assert sorted(tabs) == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        assert all(np.isfinite(t.max_ratio) for t in tabs.values())
