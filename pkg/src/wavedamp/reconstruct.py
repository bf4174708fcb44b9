"""Recovery of the boundary damping pair from modal boundary measurements.

Pipeline: probe the initial-to-boundary map with mode-shaped initial
data, project the measured normal-derivative trace onto the modal time
profile, invert the linearized boundary relation pointwise, truncate in
the boundary Fourier basis, and compare the coefficient norm against the
logarithmic stability bound driven by the measurement-operator gap.  A
Gauss-Newton refinement over the truncated Fourier parameters is
available on top of the linearized estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import RegimeError, ResolutionError
from .forward import BoundaryTrace, SolveResult, solve
from .grid import Grid2D
from .spectral import (
    DampingPair,
    ModeIndex,
    SampledFunction1D,
    boundary_mode,
    eigenpair,
    mode_shape,
    project_onto_modes,
    trapezoid_weights,
)

__all__ = [
    "ModalMeasurement",
    "GapEstimate",
    "SweepRecord",
    "SweepContext",
    "GaussNewtonInfo",
    "reference_solution",
    "probe_mode",
    "time_project",
    "linearized_recover",
    "estimate_gap",
    "graph_norm",
    "select_truncation",
    "stability_bound_rhs",
    "coefficient_bound_constant",
    "stability_sweep",
    "damping_l2_error",
    "fit_damping_least_squares",
]


# ---------------------------------------------------------------------------
# probing

@dataclass
class ModalMeasurement:
    """Difference trace between a damped and the undamped run of one probe.

    noise_floor records the norm of the undamped reference trace, which is
    analytically zero and therefore measures the discretization floor of
    the probe.
    """

    mode: ModeIndex
    trace: BoundaryTrace
    trace_norm: float
    noise_floor: float


def _check_probe_resolution(grid: Grid2D, mode: ModeIndex):
    # at least 8 nodes per half-period of the fastest direction
    need = 8 * (max(mode.k, mode.l) + 0.5) + 1
    if grid.n < need:
        raise ResolutionError(
            f"grid n = {grid.n} cannot resolve probe mode ({mode.k},{mode.l}); need n >= {math.ceil(need)}"
        )


def reference_solution(mode: ModeIndex, tau: float, grid: Grid2D,
                       dt_factor: float = 0.5) -> SolveResult:
    """Undamped forward run for one probe mode (the measurement reference)."""
    u0 = grid.sample(lambda x, y: mode_shape(mode, x, y))
    return solve(u0, np.zeros_like(u0), DampingPair.zero(), grid, tau, dt_factor=dt_factor)


def probe_mode(a: DampingPair, mode: ModeIndex, tau: float, grid: Grid2D,
               dt_factor: float = 0.5,
               reference: Optional[SolveResult] = None) -> ModalMeasurement:
    """Boundary measurement generated by initial data (mode shape, 0)."""
    _check_probe_resolution(grid, mode)
    if reference is None:
        reference = reference_solution(mode, tau, grid, dt_factor)
    u0 = grid.sample(lambda x, y: mode_shape(mode, x, y))
    damped = solve(u0, np.zeros_like(u0), a, grid, tau, dt_factor=dt_factor)
    diff = damped.trace.difference(reference.trace)
    return ModalMeasurement(mode=mode, trace=diff, trace_norm=diff.l2_norm(),
                            noise_floor=reference.trace.l2_norm())


# ---------------------------------------------------------------------------
# linearized recovery

def _fit_envelope_rate(trace: BoundaryTrace, omega: float) -> float:
    """Decay rate of the measurement envelope from half-period RMS bins."""
    t = trace.times
    power = (trace.normal_bottom ** 2).sum(axis=1) + (trace.normal_left ** 2).sum(axis=1)
    t_bin = math.pi / omega
    nbin = int(t[-1] / t_bin)
    centers, levels = [], []
    for b in range(nbin):
        sel = (t >= b * t_bin) & (t < (b + 1) * t_bin)
        if sel.sum() > 2:
            mean_power = float(np.mean(power[sel]))
            if mean_power > 0.0:
                centers.append(float(np.mean(t[sel])))
                levels.append(0.5 * math.log(mean_power))
    if len(centers) < 2:
        return 0.0
    slope = np.polyfit(np.asarray(centers), np.asarray(levels), 1)[0]
    return float(-slope)


def time_project(meas: ModalMeasurement, envelope: str = "fitted"):
    """Per-side spatial profiles of the measurement's modal time content.

    Projects the trace onto env(t) * sin(omega t), where env is an
    exponential envelope fitted from the measurement itself
    (envelope="fitted") or identically one (envelope="none").  To first
    order in the damping the trace is a(s) * omega * sin(omega t) times
    the decaying mode amplitude, so dividing the fitted-envelope
    projection by omega and the boundary mode shape recovers a.
    """
    pair = eigenpair(meas.mode)
    t = meas.trace.times
    if envelope == "fitted":
        rate = _fit_envelope_rate(meas.trace, pair.omega)
        env = np.exp(-rate * t)
    elif envelope == "none":
        env = np.ones_like(t)
    else:
        raise ValueError("envelope must be 'fitted' or 'none'")
    sin_t = np.sin(pair.omega * t)
    wt = trapezoid_weights(t.shape[0]) * meas.trace.dt
    denom = float((wt * env * env * sin_t * sin_t).sum())
    if denom <= 1e-14 * t[-1]:
        raise ValueError("degenerate projection window")
    weight = wt * env * sin_t
    y1 = (weight @ meas.trace.normal_bottom) / denom
    y2 = (weight @ meas.trace.normal_left) / denom
    return SampledFunction1D(y1), SampledFunction1D(y2)


def linearized_recover(y1: SampledFunction1D, y2: SampledFunction1D, mode: ModeIndex,
                       guard: float = 0.2, phi_floor: float = 0.15) -> DampingPair:
    """Pointwise inversion of the linearized boundary relation.

    a_hat(s) = Y(s) / (sqrt(2) * omega * boundary mode(s)) away from the
    guard band at s = 1 where the mode shape vanishes; the guard band is
    filled with the last recovered value.  Raises when the mode shape has
    near-zeros inside the unguarded region (higher modes are unusable for
    pointwise inversion).
    """
    if not 0.0 <= guard <= 0.5:
        raise ValueError("guard must lie in [0, 1/2]")
    omega = eigenpair(mode).omega
    estimates = []
    for y, k in ((y1, mode.k), (y2, mode.l)):
        s = y.nodes
        phi = boundary_mode(k, s)
        usable = s <= 1.0 - guard
        if np.min(np.abs(phi[usable])) < phi_floor:
            raise ResolutionError(
                f"boundary mode {k} nearly vanishes inside the unguarded region; "
                "pointwise inversion unusable"
            )
        a_hat = np.empty_like(y.values)
        a_hat[usable] = y.values[usable] / (math.sqrt(2.0) * omega * phi[usable])
        last = a_hat[usable][-1]
        a_hat[~usable] = last
        estimates.append(a_hat)
    a1, a2 = estimates
    corner = 0.5 * (a1[0] + a2[0])
    a1[0] = a2[0] = corner
    np.clip(a1, 0.0, None, out=a1)
    np.clip(a2, 0.0, None, out=a2)
    return DampingPair(SampledFunction1D(a1), SampledFunction1D(a2), corner_tol=1e-9)


def damping_l2_error(estimate: DampingPair, truth: DampingPair, guard: float = 0.2) -> float:
    """Relative L2 error of the pair on the unguarded region [0, 1 - guard]."""
    s = np.linspace(0.0, 1.0 - guard, 257)
    num = 0.0
    den = 0.0
    for est, ref in ((estimate.a1, truth.a1), (estimate.a2, truth.a2)):
        d = est.at(s) - ref.at(s)
        r = ref.at(s)
        w = trapezoid_weights(s.shape[0]) * (s[1] - s[0])
        num += float((w * d * d).sum())
        den += float((w * r * r).sum())
    if den == 0.0:
        return math.sqrt(num)
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# operator gap and stability bound

def graph_norm(mode: ModeIndex) -> float:
    """Norm of a mode shape in the probing space: (lambda + lambda^2)^(1/2)."""
    lam = eigenpair(mode).eigenvalue
    return math.sqrt(lam + lam * lam)


@dataclass
class GapEstimate:
    """Finite-probe lower bound used as the working operator-gap estimate."""

    value: float
    probe_budget: int
    per_probe: tuple


def estimate_gap(a: DampingPair, probe_budget: int, tau: float, grid: Grid2D,
                 dt_factor: float = 0.5,
                 references: Optional[Dict[ModeIndex, SolveResult]] = None) -> GapEstimate:
    """Max over probe modes of trace norm over graph norm of the probe."""
    if probe_budget < 0:
        raise ValueError("probe budget must be nonnegative")
    per_probe = []
    for k in range(probe_budget + 1):
        for l in range(probe_budget + 1):
            mode = ModeIndex(k, l)
            ref = references.get(mode) if references else None
            meas = probe_mode(a, mode, tau, grid, dt_factor, reference=ref)
            per_probe.append((mode, meas.trace_norm / graph_norm(mode)))
    value = max(r for _, r in per_probe)
    return GapEstimate(value=value, probe_budget=probe_budget, per_probe=tuple(per_probe))


def select_truncation(c_cal: float, m: float, trunc_rate: float, delta: float) -> int:
    """Greatest N >= 1 with (c_cal/m) exp(trunc_rate N^2) delta <= 1/N^2.

    The scan works in log space; when even N = 1 fails the gap is too
    large for the truncation rule and a RegimeError asks the caller for
    the large-gap branch of the stability estimate.
    """
    if c_cal <= 0 or m <= 0 or trunc_rate <= 0:
        raise ValueError("c_cal, m and trunc_rate must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    base = math.log(c_cal) - math.log(m) + math.log(delta)

    def passes(n: int) -> bool:
        return base + trunc_rate * n * n <= -2.0 * math.log(n)

    if not passes(1):
        raise RegimeError(
            f"gap {delta:.3e} too large for truncation selection "
            f"(needs delta <= {m / c_cal * math.exp(-trunc_rate):.3e})"
        )
    n = 1
    while passes(n + 1):
        n += 1
    return n


def stability_bound_rhs(delta: float, m: float, M: float, c_cal: float) -> float:
    """Right side c_cal * M * (|ln(delta/m)|^(-1/2) + delta/m) of the estimate.

    delta = 0 returns +inf (the bound is vacuous); delta = m is the
    logarithmic singularity and is rejected rather than regularized.
    """
    if delta < 0 or m <= 0 or M <= 0 or c_cal <= 0:
        raise ValueError("need delta >= 0 and positive m, M, c_cal")
    if delta == 0.0:
        return math.inf
    if delta == m:
        raise ValueError("delta equal to m sits on the logarithmic singularity")
    ratio = delta / m
    return c_cal * M * (abs(math.log(ratio)) ** -0.5 + ratio)


def coefficient_bound_constant(coeff: float, k: int, m: float, M: float, delta: float,
                               tau: float, exponent_full: Optional[float] = None) -> float:
    """Empirical constant (a_j^k)^2 / [(M^2/m) e^{k^2 (tau^2 pi^2 + 1)} delta].

    Evaluated in log space; the alternative exponent lambda * tau^2 may be
    supplied through exponent_full instead of the k^2 form.  Underflows to
    zero for large k, which is the honest value at double precision.
    """
    if coeff == 0.0:
        return 0.0
    if delta <= 0 or m <= 0 or M <= 0:
        raise ValueError("need positive delta, m, M")
    exponent = exponent_full if exponent_full is not None else k * k * (tau * tau * math.pi ** 2 + 1.0)
    log_gap = 2.0 * math.log(abs(coeff)) - math.log(M * M / m) - math.log(delta) - exponent
    if log_gap < -745.0:
        return 0.0
    return math.exp(log_gap)


# ---------------------------------------------------------------------------
# the sweep

@dataclass
class SweepRecord:
    damping_id: str
    epsilon: float
    delta: float
    a_l2: float
    bound_rhs: float
    n0: int
    recon_error_l2: float
    c_emp: float


@dataclass
class SweepContext:
    """Family-level constants frozen during a sweep."""

    m: float
    M: float
    c_cal: float
    c_trunc: float
    c_emp_cal: float
    trunc_rate: float
    calib_id: str


def stability_sweep(family: Sequence[DampingPair], epsilons: Sequence[float], tau: float,
                    grid: Grid2D, probe_budget: int = 2, recovery_mode: ModeIndex = ModeIndex(0, 0),
                    guard: float = 0.2, trunc_rate: float = 2.0, trunc_order: int = 4,
                    calib_index: Optional[int] = None, dt_factor: float = 0.5,
                    ) -> Tuple[List[SweepRecord], SweepContext]:
    """Run the full gap-vs-coefficient-size study over a damping family.

    Per member: operator-gap estimate, coefficient pair norm, linearized
    reconstruction error, truncation order and the stability bound.  The
    constants of the bound and of the truncation rule are calibrated on
    one designated member (largest pair norm by default) and frozen for
    the rest of the sweep.
    """
    if len(family) != len(epsilons):
        raise ValueError("family and epsilons must align")
    if len(family) < 2:
        raise ValueError("a sweep needs at least two members")

    modes = [ModeIndex(k, l) for k in range(probe_budget + 1) for l in range(probe_budget + 1)]
    if recovery_mode not in modes:
        modes.append(recovery_mode)
    references = {mode: reference_solution(mode, tau, grid, dt_factor) for mode in modes}

    m = min(member.minimum() for member in family)
    M = max(member.h1_sq_max() for member in family)
    if m <= 0:
        raise ValueError("sweep family must be strictly positive for the stability bound")

    raw = []
    for eps, member in zip(epsilons, family):
        gap = estimate_gap(member, probe_budget, tau, grid, dt_factor, references=references)
        meas = probe_mode(member, recovery_mode, tau, grid, dt_factor,
                          reference=references[recovery_mode])
        y1, y2 = time_project(meas)
        estimate = linearized_recover(y1, y2, recovery_mode, guard)
        recon_err = damping_l2_error(estimate, member, guard)
        c_emp = 0.0
        for component in (member.a1, member.a2):
            coeffs = project_onto_modes(component, trunc_order)
            for k, coeff in enumerate(coeffs.coeffs):
                c_emp = max(c_emp, coefficient_bound_constant(coeff, k, m, M, gap.value, tau))
        raw.append({"eps": eps, "member": member, "delta": gap.value,
                    "a_l2": member.l2_norm(), "recon": recon_err, "c_emp": c_emp})

    if calib_index is None:
        calib_index = max(range(len(raw)), key=lambda i: raw[i]["a_l2"])
    calib = raw[calib_index]
    denom = abs(math.log(calib["delta"] / m)) ** -0.5 + calib["delta"] / m
    c_cal = calib["a_l2"] / (M * denom)
    # truncation constant chosen so the calibration member passes N = 1 with margin 2
    c_trunc = m * math.exp(-trunc_rate) / (2.0 * calib["delta"])

    records = []
    for r in raw:
        records.append(SweepRecord(
            damping_id=f"eps-{r['eps']:g}",
            epsilon=r["eps"],
            delta=r["delta"],
            a_l2=r["a_l2"],
            bound_rhs=stability_bound_rhs(r["delta"], m, M, c_cal),
            n0=select_truncation(c_trunc, m, trunc_rate, r["delta"]),
            recon_error_l2=r["recon"],
            c_emp=r["c_emp"],
        ))
    context = SweepContext(m=m, M=M, c_cal=c_cal, c_trunc=c_trunc,
                           c_emp_cal=calib["c_emp"], trunc_rate=trunc_rate,
                           calib_id=records[calib_index].damping_id)
    return records, context


# ---------------------------------------------------------------------------
# nonlinear refinement

@dataclass
class GaussNewtonInfo:
    residuals: List[float]
    converged: bool
    stalled: bool


def _apply_correction(init: DampingPair, params: np.ndarray, order: int) -> DampingPair:
    """Add a truncated cosine-mode correction to the base pair and project.

    The zero correction reproduces the base pair exactly, so a fit whose
    data came from its own initial guess is a fixed point.
    """
    half = order + 1
    n = init.a1.n
    s = np.linspace(0.0, 1.0, n)
    a1 = init.a1.values.copy()
    a2 = init.a2.values.copy()
    for k in range(half):
        phi = boundary_mode(k, s)
        a1 += params[k] * phi
        a2 += params[half + k] * phi
    corner = 0.5 * (a1[0] + a2[0])
    a1[0] = a2[0] = corner
    np.clip(a1, 0.0, None, out=a1)
    np.clip(a2, 0.0, None, out=a2)
    return DampingPair(SampledFunction1D(a1), SampledFunction1D(a2), corner_tol=1e-9)


def fit_damping_least_squares(measurements: Sequence[ModalMeasurement], init: DampingPair,
                              grid: Grid2D, tau: float, iters: int = 6, fit_order: int = 4,
                              dt_factor: float = 0.5, fd_step: float = 1e-3,
                              ) -> Tuple[DampingPair, GaussNewtonInfo]:
    """Gauss-Newton refinement of a damping estimate against trace data.

    The unknowns are boundary Fourier coefficients of a correction to the
    initial pair, up to fit_order per side; every candidate is projected
    back onto the constraint set (nonnegative, matching corner values)
    before simulation.  Stops after `iters` rounds or three consecutive
    non-improving steps and returns the best iterate seen.
    """
    if not measurements:
        raise ValueError("need at least one measurement")
    if iters < 0:
        raise ValueError("iters must be nonnegative")

    references = {}
    for meas in measurements:
        if meas.mode not in references:
            references[meas.mode] = reference_solution(meas.mode, tau, grid, dt_factor)

    def residual(pair: DampingPair) -> np.ndarray:
        parts = []
        for meas in measurements:
            sim = probe_mode(pair, meas.mode, tau, grid, dt_factor,
                             reference=references[meas.mode])
            parts.append((sim.trace.normal_bottom - meas.trace.normal_bottom).ravel())
            parts.append((sim.trace.normal_left - meas.trace.normal_left).ravel())
        return np.concatenate(parts)

    params = np.zeros(2 * (fit_order + 1))
    best_params = params.copy()
    r = residual(_apply_correction(init, params, fit_order))
    best_norm = float(np.linalg.norm(r))
    history = [best_norm]
    stalls = 0
    converged = False

    for _ in range(iters):
        if best_norm == 0.0:
            converged = True
            break
        jac = np.empty((r.shape[0], params.shape[0]))
        for p in range(params.shape[0]):
            h = fd_step * max(1.0, abs(params[p]))
            bumped = params.copy()
            bumped[p] += h
            jac[:, p] = (residual(_apply_correction(init, bumped, fit_order)) - r) / h
        step_vec, *_ = np.linalg.lstsq(jac, -r, rcond=None)

        improved = False
        scale = 1.0
        for _ in range(4):
            trial = params + scale * step_vec
            r_trial = residual(_apply_correction(init, trial, fit_order))
            norm_trial = float(np.linalg.norm(r_trial))
            if norm_trial < best_norm:
                params = trial
                best_params = trial.copy()
                r = r_trial
                best_norm = norm_trial
                improved = True
                break
            scale *= 0.5
        history.append(best_norm)
        if improved:
            stalls = 0
        else:
            stalls += 1
            if stalls >= 3:
                break
    else:
        converged = True

    info = GaussNewtonInfo(residuals=history, converged=converged, stalled=stalls >= 3)
    return _apply_correction(init, best_params, fit_order), info
