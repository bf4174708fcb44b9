import math

import numpy as np
import pytest

from wavedamp.errors import ResolutionError
from wavedamp.spectral import (
    DampingPair,
    ModeIndex,
    SampledFunction1D,
    boundary_mode,
    compat_integral,
    damping_compat_check,
    eigenpair,
    holder_seminorm,
    integrate,
    mode_shape,
    multiplier_bound_check,
    project_onto_modes,
    sobolev_norms,
    synthesize_from_modes,
)


def sampled(fn, n=257):
    return SampledFunction1D.from_callable(fn, n)


class TestEigenpairs:
    def test_lowest_mode(self):
        pair = eigenpair(ModeIndex(0, 0))
        assert pair.eigenvalue == pytest.approx(math.pi ** 2 / 2)
        assert pair.omega == pytest.approx(math.sqrt(math.pi ** 2 / 2))

    def test_mixed_modes(self):
        assert eigenpair(ModeIndex(1, 0)).eigenvalue == pytest.approx(2.5 * math.pi ** 2)
        assert eigenpair(ModeIndex(2, 3)).eigenvalue == pytest.approx(18.5 * math.pi ** 2)

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            ModeIndex(-1, 0)


class TestModeShapes:
    def test_center_value(self):
        assert mode_shape(ModeIndex(0, 0), 0.0, 0.0) == pytest.approx(2.0)

    def test_dirichlet_side_vanishes(self):
        y = np.linspace(0, 1, 11)
        for mode in (ModeIndex(0, 0), ModeIndex(2, 1)):
            assert np.abs(mode_shape(mode, 1.0, y)).max() < 1e-12

    def test_unit_l2_norm_by_quadrature(self):
        n = 513
        s = np.linspace(0, 1, n)
        x, y = np.meshgrid(s, s, indexing="ij")
        vals = mode_shape(ModeIndex(0, 0), x, y) ** 2
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        quad = (vals * w[:, None] * w[None, :]).sum() / (n - 1) ** 2
        assert quad == pytest.approx(1.0, abs=1e-5)

    def test_boundary_mode_values(self):
        assert boundary_mode(0, 0.0) == pytest.approx(math.sqrt(2.0))
        assert abs(boundary_mode(0, 1.0)) < 1e-12

    def test_boundary_mode_orthogonality(self):
        n = 1025
        s = np.linspace(0, 1, n)
        prod = boundary_mode(0, s) * boundary_mode(1, s)
        assert abs(integrate(prod, 1.0 / (n - 1))) < 1e-6

    def test_orthonormality_matrix(self):
        n = 1025
        s = np.linspace(0, 1, n)
        dx = 1.0 / (n - 1)
        for k in range(9):
            for kp in range(k, 9):
                val = integrate(boundary_mode(k, s) * boundary_mode(kp, s), dx)
                assert val == pytest.approx(1.0 if k == kp else 0.0, abs=2e-5)

    def test_discrete_eigen_relation(self):
        # interior 5-point Laplacian reproduces -lambda * shape at O(h^2)
        errs = {}
        for n in (33, 65):
            h = 1.0 / (n - 1)
            s = np.linspace(0, 1, n)
            x, y = np.meshgrid(s, s, indexing="ij")
            for k in range(3):
                for l in range(3):
                    mode = ModeIndex(k, l)
                    u = mode_shape(mode, x, y)
                    lam = eigenpair(mode).eigenvalue
                    lap = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:]
                           + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / h ** 2
                    err = np.abs(lap + lam * u[1:-1, 1:-1]).max()
                    tk, tl = (k + 0.5) * math.pi, (l + 0.5) * math.pi
                    assert err <= h ** 2 / 12 * (tk ** 4 + tl ** 4) * 2 * 1.1
                    errs[(n, k, l)] = err
        for k in range(3):
            for l in range(3):
                ratio = errs[(33, k, l)] / errs[(65, k, l)]
                assert 3.4 <= ratio <= 4.6


class TestFourier:
    def test_project_constant(self):
        coeffs = project_onto_modes(sampled(lambda s: np.ones_like(s)), 0)
        assert coeffs.coeffs[0] == pytest.approx(2 * math.sqrt(2) / math.pi, abs=1e-5)

    def test_project_mode_is_delta(self):
        coeffs = project_onto_modes(sampled(lambda s: boundary_mode(0, s), 513), 4)
        expect = np.zeros(5)
        expect[0] = 1.0
        np.testing.assert_allclose(coeffs.coeffs, expect, atol=2e-5)

    def test_project_linear(self):
        coeffs = project_onto_modes(sampled(lambda s: s, 513), 0)
        exact = math.sqrt(2) * (2 / math.pi - 4 / math.pi ** 2)
        assert coeffs.coeffs[0] == pytest.approx(exact, abs=1e-5)

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            project_onto_modes(SampledFunction1D(np.zeros(10)), 4)

    def test_synthesize_single_mode(self):
        from wavedamp.spectral import FourierCoeffs, Side

        f = synthesize_from_modes(FourierCoeffs(Side.BOTTOM, np.array([1.0, 0.0])), 129)
        np.testing.assert_allclose(f.values, boundary_mode(0, f.nodes), atol=1e-12)

    def test_synthesize_zero(self):
        from wavedamp.spectral import FourierCoeffs, Side

        f = synthesize_from_modes(FourierCoeffs(Side.LEFT, np.zeros(3)), 65)
        assert np.all(f.values == 0.0)

    def test_round_trip_on_coefficients(self):
        rng = np.random.default_rng(3)
        coeffs = rng.normal(size=5)
        from wavedamp.spectral import FourierCoeffs, Side

        f = synthesize_from_modes(FourierCoeffs(Side.BOTTOM, coeffs), 1025)
        back = project_onto_modes(f, 4)
        np.testing.assert_allclose(back.coeffs, coeffs, atol=1e-5)

    def test_truncation_error_decreases(self):
        f = sampled(lambda s: np.ones_like(s), 1025)
        errs = []
        for order in (2, 4, 8, 16):
            rec = synthesize_from_modes(project_onto_modes(f, order), f.n)
            err = math.sqrt(integrate((rec.values - f.values) ** 2, f.dx))
            errs.append(err)
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_parseval_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            vals = rng.normal(size=1025)
            # smooth out so the quadrature is trustworthy
            kernel = np.ones(9) / 9
            vals = np.convolve(vals, kernel, mode="same")
            f = SampledFunction1D(vals)
            coeffs = project_onto_modes(f, 8)
            l2_sq = integrate(f.values ** 2, f.dx)
            assert (coeffs.coeffs ** 2).sum() <= l2_sq + 1e-6


class TestSobolevNorms:
    def test_constant(self):
        norms = sobolev_norms(sampled(lambda s: np.ones_like(s)))
        assert norms.l2 == pytest.approx(1.0)
        assert norms.h1 == pytest.approx(1.0)
        assert norms.h_half == pytest.approx(1.0)

    def test_zero(self):
        norms = sobolev_norms(sampled(lambda s: np.zeros_like(s)))
        assert norms.l2 == norms.h1 == norms.h_half == 0.0

    def test_linear(self):
        norms = sobolev_norms(sampled(lambda s: s, 513))
        assert norms.l2 == pytest.approx(1 / math.sqrt(3), abs=1e-5)
        assert norms.h1 == pytest.approx(math.sqrt(4 / 3), abs=1e-5)
        assert math.isfinite(norms.h_half)

    def test_linear_half_norm_regression(self):
        # frozen from the double-sum quadrature oracle at n = 257
        norms = sobolev_norms(sampled(lambda s: s, 257))
        assert norms.h_half == pytest.approx(1.1530089446595129, rel=1e-9)


class TestHolder:
    def test_constant_is_zero(self):
        assert holder_seminorm(sampled(lambda s: 0.7 * np.ones_like(s)), 0.8) == 0.0

    def test_identity_lipschitz(self):
        assert holder_seminorm(sampled(lambda s: s), 1.0) == pytest.approx(1.0)

    def test_identity_alpha_06(self):
        # sup of |x - y|^(1 - 0.6) sits at the full-interval pair
        assert holder_seminorm(sampled(lambda s: s), 0.6) == pytest.approx(1.0)

    def test_alpha_one_matches_max_slope(self):
        rng = np.random.default_rng(5)
        vals = np.cumsum(rng.normal(size=129))
        f = SampledFunction1D(vals)
        expected = np.abs(np.diff(vals)).max() * (f.n - 1)
        assert holder_seminorm(f, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_alpha_range_enforced(self):
        with pytest.raises(ValueError):
            holder_seminorm(sampled(lambda s: s), 0.5)


class TestMultiplierBound:
    def test_unit_multiplier_is_tight(self):
        f = sampled(lambda s: np.cos(2 * s) + s)
        chk = multiplier_bound_check(sampled(lambda s: np.ones_like(s)), f, 1.0)
        assert chk.holds
        assert chk.lhs == pytest.approx(chk.rhs, rel=1e-9)

    def test_zero_multiplier(self):
        f = sampled(lambda s: np.sin(3 * s))
        chk = multiplier_bound_check(sampled(lambda s: np.zeros_like(s)), f, 0.75)
        assert chk.lhs == 0.0
        assert chk.holds

    def test_affine_multiplier(self):
        chk = multiplier_bound_check(
            sampled(lambda s: 1 + s / 2), sampled(lambda s: boundary_mode(0, s)), 0.75)
        assert chk.holds

    def test_randomized_family(self):
        rng = np.random.default_rng(2024)
        s = np.linspace(0, 1, 257)
        for _ in range(50):
            a_vals = rng.uniform(0, 1) + sum(
                rng.normal() / (k + 1) ** 2 * np.cos((k + 0.5) * math.pi * s) for k in range(6))
            f_vals = sum(rng.normal() / (k + 1) ** 1.5 * np.cos((k + 0.5) * math.pi * s)
                         for k in range(8))
            alpha = rng.uniform(0.55, 1.0)
            chk = multiplier_bound_check(SampledFunction1D(a_vals), SampledFunction1D(f_vals), alpha)
            assert chk.holds


class TestCompat:
    def test_equal_pair(self):
        g = sampled(lambda s: np.sin(s))
        res = compat_integral(g, g)
        assert res.value == 0.0
        assert not res.divergent

    def test_linear_mismatch(self):
        res = compat_integral(sampled(lambda s: s, 513), sampled(lambda s: np.zeros_like(s), 513))
        assert res.value == pytest.approx(0.5, abs=1e-3)
        assert not res.divergent

    def test_constant_mismatch_diverges(self):
        res = compat_integral(sampled(lambda s: np.ones_like(s), 513),
                              sampled(lambda s: np.zeros_like(s), 513))
        assert res.divergent

    def test_damping_preserves_compat(self):
        a = DampingPair.from_callables(lambda s: 1 + s, lambda s: 1 + s ** 2)
        g = sampled(lambda s: s, 513)
        assert damping_compat_check(a, g, g)

    def test_matching_corner_with_unequal_profiles(self):
        a = DampingPair.constant(1.0)
        g1 = sampled(lambda s: s, 513)
        g2 = sampled(lambda s: np.sin(s), 513)
        # sin(t) - t vanishes at the corner fast enough
        assert damping_compat_check(a, g1, g2)


class TestDampingPair:
    def test_corner_mismatch_rejected(self):
        with pytest.raises(ValueError, match="corner"):
            DampingPair.from_callables(lambda s: np.ones_like(s), lambda s: 2 * np.ones_like(s))

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            DampingPair.from_callables(lambda s: s - 0.5, lambda s: s - 0.5)

    def test_admissibility(self):
        a = DampingPair.constant(0.5, m_lower=0.4, M_upper=1.0)
        assert a.is_admissible()
        tight = DampingPair.constant(0.5, m_lower=0.6, M_upper=1.0)
        assert not tight.is_admissible()

    def test_pair_norm(self):
        a = DampingPair.constant(0.3)
        assert a.l2_norm() == pytest.approx(0.3 * math.sqrt(2), rel=1e-6)

    def test_scaling(self):
        a = DampingPair.from_callables(lambda s: 0.1 * (1 + s / 2), lambda s: 0.1 * np.ones_like(s))
        half = a.scaled(0.5)
        np.testing.assert_allclose(half.a1.values, 0.5 * a.a1.values)
