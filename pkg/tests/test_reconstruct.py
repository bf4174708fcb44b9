import math

import numpy as np
import pytest

from wavedamp.errors import RegimeError, ResolutionError
from wavedamp.forward import BoundaryTrace
from wavedamp.grid import Grid2D
from wavedamp.reconstruct import (
    ModalMeasurement,
    coefficient_bound_constant,
    damping_l2_error,
    estimate_gap,
    fit_damping_least_squares,
    graph_norm,
    linearized_recover,
    probe_mode,
    reference_solution,
    select_truncation,
    stability_bound_rhs,
    stability_sweep,
    time_project,
)
from wavedamp.spectral import (
    DampingPair,
    ModeIndex,
    SampledFunction1D,
    boundary_mode,
    eigenpair,
    mode_shape,
)
from wavedamp.forward import h1_norm, stiffness_energy


def synthetic_measurement(grid, mode, tau, profile_bottom, profile_left, steps=500):
    """Trace built directly from sin(omega t) times spatial profiles."""
    omega = eigenpair(mode).omega
    dt = tau / steps
    times = dt * np.arange(steps + 1)
    sin_t = np.sin(omega * times)
    bottom = sin_t[:, None] * profile_bottom[None, :]
    left = sin_t[:, None] * profile_left[None, :]
    trace = BoundaryTrace(times=times, normal_bottom=bottom, normal_left=left,
                          vel_bottom=np.zeros_like(bottom), vel_left=np.zeros_like(left),
                          dt=dt, tau=tau)
    return ModalMeasurement(mode=mode, trace=trace, trace_norm=trace.l2_norm(),
                            noise_floor=0.0)


class TestProbe:
    def test_zero_damping_probe_is_null(self):
        grid = Grid2D(33)
        meas = probe_mode(DampingPair.zero(), ModeIndex(0, 0), 1.0, grid)
        assert meas.trace_norm == 0.0
        assert meas.trace_norm <= 10 * meas.noise_floor

    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            probe_mode(DampingPair.constant(0.1), ModeIndex(4, 4), 1.0, Grid2D(17))

    def test_leading_frequency_matches_mode(self):
        grid = Grid2D(65)
        mode = ModeIndex(0, 0)
        meas = probe_mode(DampingPair.constant(0.1), mode, 4.0, grid)
        sig = meas.trace.normal_bottom[:, 0]
        padded = np.zeros(8 * sig.shape[0])
        padded[: sig.shape[0]] = sig * np.hanning(sig.shape[0])
        freqs = np.fft.rfftfreq(padded.shape[0], meas.trace.dt)
        peak = freqs[np.argmax(np.abs(np.fft.rfft(padded)))]
        omega = eigenpair(mode).omega
        assert abs(2 * math.pi * peak - omega) / omega < 0.15

    def test_response_scales_linearly_in_damping(self):
        grid = Grid2D(65)
        mode = ModeIndex(0, 0)
        ref = reference_solution(mode, 4.0, grid)
        devs = {}
        for small in (0.025, 0.05):
            m1 = probe_mode(DampingPair.constant(small), mode, 4.0, grid, reference=ref)
            m2 = probe_mode(DampingPair.constant(2 * small), mode, 4.0, grid, reference=ref)
            scale = np.abs(m2.trace.normal_bottom).max()
            devs[small] = np.abs(m2.trace.normal_bottom
                                 - 2 * m1.trace.normal_bottom).max() / scale
        assert devs[0.05] < 0.35
        # deviation is first order in the damping amplitude
        assert 1.4 <= devs[0.05] / devs[0.025] <= 2.9


class TestTimeProject:
    def test_synthetic_sin_trace_recovers_profile(self):
        grid = Grid2D(33)
        mode = ModeIndex(0, 0)
        g1 = np.cos(grid.nodes)
        g2 = 0.5 * np.ones(grid.n)
        meas = synthetic_measurement(grid, mode, 4.0, g1, g2)
        y1, y2 = time_project(meas)
        np.testing.assert_allclose(y1.values, g1, atol=1e-6)
        np.testing.assert_allclose(y2.values, g2, atol=1e-6)

    def test_plain_envelope_variant(self):
        grid = Grid2D(33)
        mode = ModeIndex(0, 0)
        g1 = np.ones(grid.n)
        meas = synthetic_measurement(grid, mode, 4.0, g1, g1)
        y1, _ = time_project(meas, envelope="none")
        np.testing.assert_allclose(y1.values, g1, atol=1e-9)

    def test_zero_trace_projects_to_zero(self):
        grid = Grid2D(33)
        meas = synthetic_measurement(grid, ModeIndex(0, 0), 4.0,
                                     np.zeros(grid.n), np.zeros(grid.n))
        y1, y2 = time_project(meas)
        assert np.all(y1.values == 0.0)
        assert np.all(y2.values == 0.0)

    def test_first_order_model(self):
        # Y approximates a * omega * sqrt(2) * phi on the solver output
        grid = Grid2D(65)
        mode = ModeIndex(0, 0)
        a_val = 0.1
        meas = probe_mode(DampingPair.constant(a_val), mode, 4.0, grid)
        y1, _ = time_project(meas)
        omega = eigenpair(mode).omega
        model = a_val * omega * math.sqrt(2.0) * boundary_mode(0, grid.nodes)
        keep = grid.nodes <= 0.8
        rel = np.abs(y1.values[keep] - model[keep]) / np.abs(model[keep])
        assert rel.max() < 0.10


class TestLinearizedRecover:
    def test_exact_synthetic_inversion(self):
        grid = Grid2D(33)
        mode = ModeIndex(0, 0)
        omega = eigenpair(mode).omega
        a_true = 0.3
        profile = a_true * omega * math.sqrt(2.0) * boundary_mode(0, grid.nodes)
        meas = synthetic_measurement(grid, mode, 4.0, profile, profile)
        y1, y2 = time_project(meas)
        est = linearized_recover(y1, y2, mode, guard=0.2)
        keep = est.a1.nodes <= 0.8
        np.testing.assert_allclose(est.a1.values[keep], a_true, atol=1e-6)

    def test_zero_input(self):
        grid = Grid2D(33)
        zero = SampledFunction1D(np.zeros(grid.n))
        est = linearized_recover(zero, zero, ModeIndex(0, 0))
        assert np.all(est.a1.values == 0.0)
        assert np.all(est.a2.values == 0.0)

    def test_higher_mode_unusable(self):
        grid = Grid2D(65)
        ones = SampledFunction1D(np.ones(grid.n))
        with pytest.raises(ResolutionError):
            linearized_recover(ones, ones, ModeIndex(1, 1), guard=0.2)

    def test_end_to_end_recovery(self):
        grid = Grid2D(65)
        truth = DampingPair.from_callables(lambda s: 0.1 * (1 + s / 2),
                                           lambda s: 0.1 * np.ones_like(s))
        meas = probe_mode(truth, ModeIndex(0, 0), 4.0, grid)
        y1, y2 = time_project(meas)
        est = linearized_recover(y1, y2, ModeIndex(0, 0), guard=0.2)
        assert damping_l2_error(est, truth, guard=0.2) < 0.15

    def test_axis_swap_symmetry(self):
        grid = Grid2D(65)
        a = DampingPair.from_callables(lambda s: 0.1 * (1 + s / 2),
                                       lambda s: 0.1 * np.ones_like(s))
        swapped = DampingPair(a.a2, a.a1)
        m1 = probe_mode(a, ModeIndex(0, 0), 2.0, grid)
        m2 = probe_mode(swapped, ModeIndex(0, 0), 2.0, grid)
        e1 = linearized_recover(*time_project(m1), ModeIndex(0, 0))
        e2 = linearized_recover(*time_project(m2), ModeIndex(0, 0))
        np.testing.assert_allclose(e1.a1.values, e2.a2.values, atol=1e-12)
        np.testing.assert_allclose(e1.a2.values, e2.a1.values, atol=1e-12)


class TestGap:
    def test_zero_damping_gap(self):
        grid = Grid2D(33)
        gap = estimate_gap(DampingPair.zero(), 1, 1.0, grid)
        assert gap.value == 0.0

    def test_monotone_in_budget(self):
        grid = Grid2D(33)
        a = DampingPair.constant(0.2)
        refs = {}
        vals = []
        for budget in (0, 1, 2):
            vals.append(estimate_gap(a, budget, 1.0, grid).value)
        assert vals[0] <= vals[1] <= vals[2]

    def test_two_resolution_stability(self):
        a = DampingPair.constant(0.1)
        v65 = estimate_gap(a, 2, 4.0, Grid2D(65)).value
        v129 = estimate_gap(a, 2, 4.0, Grid2D(129)).value
        assert abs(v65 - v129) / v129 < 0.05

    def test_graph_norm_value(self):
        lam = eigenpair(ModeIndex(0, 0)).eigenvalue
        assert graph_norm(ModeIndex(0, 0)) == pytest.approx(math.sqrt(lam + lam * lam))


class TestTruncationRule:
    def test_worked_example(self):
        assert select_truncation(1.0, 1.0, 2.0, math.exp(-18)) == 2

    def test_boundary_case(self):
        assert select_truncation(1.0, 1.0, 2.0, math.exp(-2.0)) == 1

    def test_monotone_in_delta(self):
        deltas = [math.exp(-e) for e in (3, 6, 12, 24, 48)]
        orders = [select_truncation(1.0, 1.0, 2.0, d) for d in deltas]
        assert all(a <= b for a, b in zip(orders, orders[1:]))

    def test_regime_violation(self):
        with pytest.raises(RegimeError):
            select_truncation(1.0, 1.0, 2.0, 1.0)

    def test_bracketing(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            m = rng.uniform(0.1, 5.0)
            rate = rng.uniform(0.5, 3.0)
            c = rng.uniform(0.1, 5.0)
            delta = m / c * math.exp(-rate) * rng.uniform(0.001, 1.0)
            n0 = select_truncation(c, m, rate, delta)
            ln = math.log(c / m * delta)
            assert ln + rate * n0 ** 2 <= -2 * math.log(n0)
            assert ln + rate * (n0 + 1) ** 2 > -2 * math.log(n0 + 1)


class TestStabilityBound:
    def test_small_gap_value(self):
        val = stability_bound_rhs(math.exp(-4.0), 1.0, 1.0, 1.0)
        assert val == pytest.approx(0.5 + math.exp(-4.0))

    def test_tiny_gap_value(self):
        val = stability_bound_rhs(math.exp(-100.0), 1.0, 1.0, 1.0)
        assert val == pytest.approx(0.1, abs=1e-12)

    def test_zero_gap_is_vacuous(self):
        assert stability_bound_rhs(0.0, 1.0, 1.0, 1.0) == math.inf

    def test_singularity_rejected(self):
        with pytest.raises(ValueError):
            stability_bound_rhs(0.5, 0.5, 1.0, 1.0)

    def test_monotone_decreasing_in_log_gap(self):
        vals = [stability_bound_rhs(math.exp(-e), 1.0, 1.0, 1.0) for e in (2, 4, 8, 16)]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestCoefficientBound:
    def test_zero_coefficient(self):
        assert coefficient_bound_constant(0.0, 3, 0.1, 1.0, 0.01, 4.0) == 0.0

    def test_log_space_underflow_is_zero(self):
        # k = 3 at tau = 4 puts the exponent beyond 1400; the ratio underflows
        assert coefficient_bound_constant(0.5, 3, 0.1, 1.0, 0.01, 4.0) == 0.0

    def test_k0_matches_direct_formula(self):
        val = coefficient_bound_constant(0.3, 0, 0.5, 2.0, 0.01, 4.0)
        assert val == pytest.approx(0.3 ** 2 / (2.0 ** 2 / 0.5 * 0.01))

    def test_full_exponent_variant(self):
        lam = eigenpair(ModeIndex(1, 1)).eigenvalue
        val = coefficient_bound_constant(0.3, 1, 0.5, 2.0, 0.5, 1.0, exponent_full=lam * 1.0)
        assert val == pytest.approx(0.3 ** 2 / (2.0 ** 2 / 0.5 * 0.5) * math.exp(-lam))


@pytest.fixture(scope="module")
def small_sweep():
    grid = Grid2D(33)
    base = DampingPair.from_callables(lambda s: 0.1 * (1 + s / 2),
                                      lambda s: 0.1 * np.ones_like(s))
    eps = [0.4, 0.2, 0.1]
    family = [base.scaled(e) for e in eps]
    return stability_sweep(family, eps, 2.0, grid, probe_budget=1)


class TestSweep:
    def test_gap_monotone_in_scale(self, small_sweep):
        records, _ = small_sweep
        deltas = [r.delta for r in records]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    def test_bound_holds_below_calibration(self, small_sweep):
        records, context = small_sweep
        for r in records:
            if r.damping_id != context.calib_id:
                assert r.a_l2 <= r.bound_rhs

    def test_truncation_bracketing_per_record(self, small_sweep):
        records, context = small_sweep
        for r in records:
            ln = math.log(context.c_trunc / context.m * r.delta)
            assert ln + context.trunc_rate * r.n0 ** 2 <= -2 * math.log(r.n0)
            assert ln + context.trunc_rate * (r.n0 + 1) ** 2 > -2 * math.log(r.n0 + 1)

    def test_coefficient_constant_calibration_dominates(self, small_sweep):
        records, context = small_sweep
        assert context.c_emp_cal == pytest.approx(max(r.c_emp for r in records))

    def test_family_size_enforced(self):
        grid = Grid2D(33)
        base = DampingPair.constant(0.1)
        with pytest.raises(ValueError):
            stability_sweep([base], [1.0], 1.0, grid)


class TestTensorStiffnessChain:
    def test_single_constant_across_modes(self):
        # product (a1 x a2) * mode stays in the Dirichlet-free space with
        # gradient norm at most C0 sqrt(lambda) times the tensor H1 norm
        grid = Grid2D(65)
        x, y = grid.meshgrid()
        rng = np.random.default_rng(11)
        ratios = []
        for _ in range(5):
            c1 = rng.normal(0.5, 0.2, 4)
            c2 = rng.normal(0.5, 0.2, 4)
            a1 = 0.3 + abs(c1[0]) + sum(abs(c) / (k + 2) ** 2 * np.cos((k + 0.5) * math.pi * grid.nodes)
                                        for k, c in enumerate(c1))
            a2 = 0.3 + abs(c1[0]) + sum(abs(c) / (k + 2) ** 2 * np.cos((k + 0.5) * math.pi * grid.nodes)
                                        for k, c in enumerate(c2))
            a2[0] = a1[0]
            tensor = a1[:, None] * a2[None, :]
            tensor_h1 = h1_norm(tensor, grid)
            for k in range(3):
                for l in range(3):
                    mode = ModeIndex(k, l)
                    lam = eigenpair(mode).eigenvalue
                    prod = tensor * mode_shape(mode, x, y)
                    ratios.append(math.sqrt(stiffness_energy(prod, grid))
                                  / (math.sqrt(lam) * tensor_h1))
        # frozen envelope from the quadrature oracle run
        assert max(ratios) <= 1.25


class TestGaussNewton:
    def test_fixed_point_on_exact_data(self):
        grid = Grid2D(33)
        truth = DampingPair.constant(0.1, n=33)
        meas = probe_mode(truth, ModeIndex(0, 0), 1.0, grid)
        refined, info = fit_damping_least_squares([meas], truth, grid, 1.0,
                                                  iters=2, fit_order=1)
        # data generated by the initial guess: residual starts near zero
        assert info.residuals[0] < 1e-10
        assert damping_l2_error(refined, truth, guard=0.2) < 1e-6

    def test_zero_data_zero_init(self):
        grid = Grid2D(33)
        zero = DampingPair.zero(n=33)
        meas = probe_mode(zero, ModeIndex(0, 0), 1.0, grid)
        refined, info = fit_damping_least_squares([meas], zero, grid, 1.0,
                                                  iters=2, fit_order=1)
        assert info.residuals[0] == 0.0
        assert np.all(refined.a1.values == 0.0)

    def test_needs_measurements(self):
        with pytest.raises(ValueError):
            fit_damping_least_squares([], DampingPair.zero(), Grid2D(33), 1.0)
