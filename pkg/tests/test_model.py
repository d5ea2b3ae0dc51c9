"""Pressure law, growth laws, validators, initial-data family."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmlimit import grid, model, potential
from pmlimit.errors import NegativeDensity


def spec2d(N=16, L=2.0):
    return grid.GridSpec(n=2, L=L, N=N)


class TestPressure:
    def test_unit_density_fixed_point(self):
        f = grid.ScalarField(spec2d(), np.ones((16, 16)))
        for m in (2.0, 7.0, 64.0):
            assert np.all(model.pressure(f, m).values == 1.0)

    def test_half_density_squared(self):
        f = grid.ScalarField(spec2d(), np.full((16, 16), 0.5))
        assert np.allclose(model.pressure(f, 2.0).values, 0.25)

    def test_zero_density_all_powers_zero(self):
        f = grid.zeros(spec2d())
        powers = model.pressure_powers(f, 8.0)
        for fld in (powers.p, powers.p_frac1, powers.p_frac2, powers.p_half):
            assert np.all(fld.values == 0.0)

    def test_tiny_negatives_clamped(self):
        vals = np.full((16, 16), 0.5)
        vals[0, 0] = -1e-13
        p = model.pressure(grid.ScalarField(spec2d(), vals), 2.0)
        assert p.values[0, 0] == 0.0

    def test_negative_density_raises(self):
        vals = np.full((16, 16), 0.5)
        vals[0, 0] = -1e-6
        with pytest.raises(NegativeDensity):
            model.pressure(grid.ScalarField(spec2d(), vals), 2.0)

    @given(
        m=st.sampled_from([2.0, 3.0, 8.0, 32.0]),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_density(self, m, seed):
        rng = np.random.default_rng(seed)
        lo = rng.random((16, 16))
        hi = lo + rng.random((16, 16))
        p_lo = model.pressure(grid.ScalarField(spec2d(), lo), m).values
        p_hi = model.pressure(grid.ScalarField(spec2d(), hi), m).values
        assert np.all(p_lo <= p_hi + 1e-15)

    @pytest.mark.parametrize("m", [2.0, 8.0, 33.0])
    def test_min_pressure_homeostatic_inequality(self, m):
        # min(p, pH) <= pH^((m-1)/m) * rho pointwise
        rng = np.random.default_rng(42)
        rho = rng.random((16, 16)) * 2.0
        p = model.int_pow(rho, m)
        for pH in (0.5, 1.0, 2.0):
            lhs = np.minimum(p, pH)
            rhs = pH ** ((m - 1.0) / m) * rho
            assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-15)

    def test_fractional_powers_consistent(self):
        rng = np.random.default_rng(1)
        rho = grid.ScalarField(spec2d(), rng.random((16, 16)))
        m = 8.0
        powers = model.pressure_powers(rho, m)
        p = powers.p.values
        mask = p > 0
        assert np.allclose(
            powers.p_frac1.values[mask], p[mask] ** ((m + 1) / m), rtol=1e-12
        )
        assert np.allclose(
            powers.p_frac2.values[mask], p[mask] ** ((m + 2) / m), rtol=1e-12
        )
        assert np.allclose(
            powers.p_half.values[mask], p[mask] ** ((m + 1) / (2 * m)), rtol=1e-12
        )


class TestIntPow:
    @pytest.mark.parametrize("e", [1, 2, 5, 8, 33, 64])
    def test_matches_power(self, e):
        rng = np.random.default_rng(e)
        a = rng.random(100) * 1.5
        assert np.allclose(model.int_pow(a, float(e)), a**e, rtol=1e-13)

    def test_fractional_falls_back(self):
        a = np.array([0.3, 1.7])
        assert np.allclose(model.int_pow(a, 2.5), a**2.5)


class TestGrowthLaw:
    def test_homeostatic_zero(self):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0)
        assert law(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_value_at_zero_pressure(self):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0)
        assert law.at_zero() == pytest.approx(4.0 * np.tanh(1.0), rel=1e-14)
        # ~0.7616 * max_rate
        assert law.at_zero() / 4.0 == pytest.approx(0.7616, abs=1e-4)

    def test_off_is_zero(self):
        law = model.GrowthLaw(kind="off")
        p = np.linspace(0, 5, 11)
        assert np.all(law(p) == 0.0)

    @given(p=st.floats(0, 100), rate=st.floats(0.1, 10), ph=st.floats(0.1, 5))
    @settings(max_examples=100, deadline=None)
    def test_bounded_and_signed(self, p, rate, ph):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=rate, p_homeo=ph)
        val = float(law(p))
        assert abs(val) <= rate + 1e-12
        if p >= ph:
            assert val <= 1e-12

    def test_nonincreasing(self):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0)
        p = np.linspace(0, 10, 500)
        g = law(p)
        assert np.all(np.diff(g) <= 0)

    def test_growth_eval_field(self):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=2.0, p_homeo=1.0)
        f = grid.ScalarField(spec2d(), np.full((16, 16), 1.0))
        out = model.growth_eval(f, law)
        assert np.allclose(out.values, 0.0, atol=1e-15)


class TestValidateGrowthLaw:
    def test_default_passes(self):
        # max_rate 4, homeostatic 1, ceiling 2: 2 - 4 tanh(1) = -1.046 <= 0
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0)
        report = model.validate_growth_law(law, 2.0)
        assert report.passed
        assert 2.0 + float(law(2.0)) == pytest.approx(2.0 - 4.0 * np.tanh(1.0))

    def test_weak_rate_fails(self):
        # 2 + G(2) = 2 - tanh(1) ~ 1.24 > 0
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=1.0, p_homeo=1.0)
        report = model.validate_growth_law(law, 2.0)
        assert not report.passed
        assert not report.ceiling_holds
        assert 2.0 + float(law(2.0)) == pytest.approx(2.0 - np.tanh(1.0), rel=1e-12)

    def test_off_fails(self):
        report = model.validate_growth_law(model.GrowthLaw(kind="off"), 2.0)
        assert not report.passed

    def test_ceiling_not_above_one(self):
        law = model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0)
        assert not model.validate_growth_law(law, 1.0).passed


class TestModelParams:
    def _mk(self, **kw):
        defaults = dict(
            m=8.0,
            growth=model.GrowthLaw(kind="smooth_tanh", max_rate=4.0, p_homeo=1.0),
            kernel=potential.DriftKernel(kind="newtonian"),
            grid=spec2d(),
            p_ceiling=2.0,
        )
        defaults.update(kw)
        return model.ModelParams(**defaults)

    def test_valid(self):
        params = self._mk()
        assert params.m == 8.0

    def test_m_below_two_rejected(self):
        with pytest.raises(ValueError):
            self._mk(m=1.5)

    def test_ceiling_requires_valid_law(self):
        with pytest.raises(ValueError):
            self._mk(growth=model.GrowthLaw(kind="off"), p_ceiling=2.0)

    def test_ceiling_optional(self):
        params = self._mk(growth=model.GrowthLaw(kind="off"), p_ceiling=None)
        assert params.p_ceiling is None

    def test_newtonian_needs_2d(self):
        with pytest.raises(Exception):
            self._mk(grid=grid.GridSpec(n=1, L=2.0, N=16))


class TestInitialData:
    def test_bump_amplitude_and_support(self):
        spec = grid.GridSpec(n=2, L=4.0, N=64)
        f = model.bump(spec, centers=[[0.0, 0.0]], radius=1.5, amplitude=0.9)
        assert f.values.max() == pytest.approx(0.9, rel=1e-12)
        X, Y = spec.meshgrid()
        outside = np.hypot(X, Y) > 1.5
        assert np.all(f.values[outside] == 0.0)

    def test_bump_amplitude_validated(self):
        spec = spec2d()
        with pytest.raises(ValueError):
            model.bump(spec, centers=[[0.0, 0.0]], amplitude=1.2)

    def test_overlapping_bumps_saturate(self):
        spec = grid.GridSpec(n=2, L=4.0, N=64)
        f = model.bump(
            spec, centers=[[0.2, 0.0], [-0.2, 0.0]], radius=1.0, amplitude=0.9
        )
        assert f.values.max() <= 0.9 + 1e-12

    def test_initial_pressure_integral_bounded_in_m(self):
        # int p0 (1 + rho0^4) stays bounded for the amplitude<=1 family
        spec = grid.GridSpec(n=2, L=4.0, N=64)
        f = model.bump(spec, centers=[[0.0, 0.0]], radius=1.6, amplitude=0.9)
        vals = []
        for m in (8.0, 16.0, 32.0, 64.0):
            p0 = model.int_pow(f.values, m)
            vals.append(((p0 * (1 + f.values**4)).sum()) * spec.cell_volume)
        assert all(v <= 2.0 * grid.integrate(f) for v in vals)
        assert vals == sorted(vals, reverse=True)


class TestBarenblatt:
    @pytest.mark.parametrize("n", [1, 2])
    def test_formula_solves_pde(self, n):
        # independent PDE check via high-resolution finite differences
        exponent, C, tau = 3.0, 0.25, 1.0
        spec = grid.GridSpec(n=n, L=1.0, N=11)
        eps, hh = 1e-5, 1e-4

        def u(tau_, shift=None):
            if shift is None:
                return model.barenblatt(spec, tau_, exponent, C).values
            center = tuple(-s for s in shift)
            return model.barenblatt(spec, tau_, exponent, C, center=center).values

        du_dt = (u(tau + eps) - u(tau - eps)) / (2 * eps)
        lap_um = np.zeros(spec.shape)
        base = u(tau) ** exponent
        for axis in range(n):
            shift = [0.0] * n
            shift[axis] = hh
            up = u(tau, shift) ** exponent
            shift[axis] = -hh
            dn = u(tau, shift) ** exponent
            lap_um += (up - 2 * base + dn) / hh**2
        interior = u(tau) > 0.05
        assert np.abs(du_dt - lap_um)[interior].max() < 1e-6

    def test_mass_independent_of_tau(self):
        spec = grid.GridSpec(n=2, L=4.0, N=256)
        m1 = grid.integrate(model.barenblatt(spec, 1.0, 3.0, 0.2))
        m2 = grid.integrate(model.barenblatt(spec, 1.4, 3.0, 0.2))
        assert m1 == pytest.approx(m2, rel=1e-4)
