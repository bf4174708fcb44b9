"""Named invariant checks behind the `verify` command.

Every check reports a measured value and a tolerance; the check passes
when value <= tolerance.  Tolerances scale with the config's
verify_tol_scale, so a zero scale forces the residual-type checks to
fail, which is itself tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .config import ExperimentConfig
from .errors import RegimeError
from .forward import dissipation_residual, rellich_residual, solve
from .grid import Grid2D
from .inverse_source import (
    Modulation,
    TimeSignal,
    convolve_anticausal,
    convolve_causal,
    gronwall_bound_check,
)
from .reconstruct import select_truncation
from .spectral import (
    DampingPair,
    ModeIndex,
    SampledFunction1D,
    eigenpair,
    mode_shape,
    multiplier_bound_check,
)

__all__ = ["CheckResult", "run_checks"]


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


def _result(name, value, tol, detail="") -> CheckResult:
    return CheckResult(name=name, value=float(value), tolerance=float(tol),
                       passed=bool(value <= tol), detail=detail)


def _random_trig(rng, n=257, terms=6, decay=2.0, offset=0.0):
    s = np.linspace(0.0, 1.0, n)
    vals = np.full(n, offset)
    for k in range(terms):
        vals += rng.normal() / (k + 1) ** decay * np.cos((k + 0.5) * math.pi * s)
        vals += rng.normal() / (k + 1) ** decay * np.sin((k + 1) * math.pi * s)
    return SampledFunction1D(vals)


def _adjoint_checks(rng, scale) -> List[CheckResult]:
    tau, steps = 3.0, 2048
    lam = Modulation.from_callable(lambda t: np.cos(2.0 * t), tau, steps)
    worst = 0.0
    for _ in range(100):
        h = TimeSignal(rng.standard_normal(steps + 1), tau)
        g = TimeSignal(rng.standard_normal(steps + 1), tau)
        defect = abs(convolve_causal(lam, h).inner(g) - h.inner(convolve_anticausal(lam, g)))
        worst = max(worst, defect / (h.l2_norm() * g.l2_norm()))

    cut = steps // 2
    h0 = rng.standard_normal(steps + 1)
    h1 = h0.copy()
    h1[cut + 1:] += 1.0
    s0 = convolve_causal(lam, TimeSignal(h0, tau)).values
    s1 = convolve_causal(lam, TimeSignal(h1, tau)).values
    mismatches = int(np.count_nonzero(s0[: cut + 1] != s1[: cut + 1]))
    h2 = h0.copy()
    h2[:cut] += 1.0
    k0 = convolve_anticausal(lam, TimeSignal(h0, tau)).values
    k2 = convolve_anticausal(lam, TimeSignal(h2, tau)).values
    mismatches += int(np.count_nonzero(k0[cut:] != k2[cut:]))

    return [
        _result("adjoint.identity", worst, 1e-8 * scale, "max relative defect, 100 pairs"),
        _result("adjoint.causality", mismatches, 0.5 * scale, "bit-exact prefix/suffix count"),
    ]


def _gronwall_check(rng, scale) -> CheckResult:
    tau, steps = 3.0, 512
    lam = Modulation.from_callable(lambda t: np.cos(2.0 * t), tau, steps)
    violations = 0
    for _ in range(50):
        sig = TimeSignal(rng.standard_normal(steps + 1), tau)
        if not gronwall_bound_check(lam, sig).holds:
            violations += 1
    return _result("gronwall.violations", violations, 0.5 * scale, "50 seeded signals")


def _dissipation_checks(scale) -> List[CheckResult]:
    residuals = {}
    for n in (65, 129):
        grid = Grid2D(n)
        a = DampingPair.constant(1.0)
        u0 = grid.sample(lambda x, y: mode_shape(ModeIndex(0, 0), x, y))
        res = solve(u0, np.zeros_like(u0), a, grid, 2.0)
        residuals[n] = dissipation_residual(res, a)
    return [
        _result("dissipation.residual", residuals[65], 1e-2 * scale, "a=1, n=65"),
        _result("dissipation.refinement", residuals[129] / residuals[65], 0.30 * scale,
                "residual ratio n=129 over n=65"),
    ]


def _rellich_checks(scale) -> List[CheckResult]:
    x0 = (1.25, 1.25)
    grid = Grid2D(65)
    r_const = rellich_residual(lambda x, y: np.ones_like(x), x0, grid)
    r_lin = rellich_residual(lambda x, y: x, x0, grid)
    mode = ModeIndex(0, 0)
    lam = eigenpair(mode).eigenvalue
    res = {}
    for n in (33, 65, 129):
        res[n] = rellich_residual(lambda x, y: mode_shape(mode, x, y), x0, Grid2D(n),
                                  laplacian=lambda x, y: -lam * mode_shape(mode, x, y))
    worst_ratio = max(res[65] / res[33], res[129] / res[65])
    return [
        _result("rellich.constant", r_const, 1e-8 * scale),
        _result("rellich.linear", r_lin, 1e-8 * scale),
        _result("rellich.monotone", worst_ratio, 0.95 * scale,
                "worst refinement ratio over 33/65/129"),
    ]


def _multiplier_check(rng, scale) -> CheckResult:
    violations = 0
    worst_excess = -math.inf
    for _ in range(50):
        a = _random_trig(rng, offset=float(rng.uniform(0.0, 1.0)))
        f = _random_trig(rng)
        alpha = float(rng.uniform(0.55, 1.0))
        chk = multiplier_bound_check(a, f, alpha)
        worst_excess = max(worst_excess, chk.lhs - chk.rhs)
        if not chk.holds:
            violations += 1
    return _result("multiplier.violations", violations, 0.5 * scale,
                   f"50 seeded triples, worst lhs-rhs = {worst_excess:.3e}")


def _truncation_check(rng, scale) -> CheckResult:
    violations = 0
    for _ in range(50):
        m = float(rng.uniform(0.1, 10.0))
        rate = float(rng.uniform(0.5, 4.0))
        c_cal = float(rng.uniform(0.1, 10.0))
        delta = m / c_cal * math.exp(-rate) * float(rng.uniform(0.01, 1.0))
        try:
            n0 = select_truncation(c_cal, m, rate, delta)
        except RegimeError:
            violations += 1
            continue
        ok_n0 = math.log(c_cal / m * delta) + rate * n0 ** 2 <= -2.0 * math.log(n0)
        bad_n1 = math.log(c_cal / m * delta) + rate * (n0 + 1) ** 2 > -2.0 * math.log(n0 + 1)
        if not (ok_n0 and bad_n1):
            violations += 1
    return _result("n0.bracketing", violations, 0.5 * scale, "50 seeded valid configs")


def _conservation_check(scale) -> CheckResult:
    grid = Grid2D(65)
    u0 = grid.sample(lambda x, y: mode_shape(ModeIndex(0, 0), x, y))
    res = solve(u0, np.zeros_like(u0), DampingPair.zero(), grid, 4.0)
    drift = float(np.abs(res.energies - res.energies[0]).max() / res.energies[0])
    return _result("energy.conservation", drift, 1e-3 * scale, "a=0, n=65, tau=4")


def run_checks(config: Optional[ExperimentConfig] = None,
               name_prefix: Optional[str] = None) -> List[CheckResult]:
    """Run the invariant suite, optionally filtered by name prefix.

    Each group draws from its own seeded stream, so a filtered run sees
    the same random vectors as a full one.
    """
    config = config or ExperimentConfig()
    scale = config.verify_tol_scale
    groups = [
        ("adjoint", lambda i: _adjoint_checks(np.random.default_rng([config.seed, i]), scale)),
        ("gronwall", lambda i: [_gronwall_check(np.random.default_rng([config.seed, i]), scale)]),
        ("dissipation", lambda i: _dissipation_checks(scale)),
        ("rellich", lambda i: _rellich_checks(scale)),
        ("multiplier", lambda i: [_multiplier_check(np.random.default_rng([config.seed, i]), scale)]),
        ("n0", lambda i: [_truncation_check(np.random.default_rng([config.seed, i]), scale)]),
        ("energy", lambda i: [_conservation_check(scale)]),
    ]
    wanted = name_prefix.split(".")[0] if name_prefix else None
    checks: List[CheckResult] = []
    for index, (key, runner) in enumerate(groups):
        if wanted is not None and not key.startswith(wanted):
            continue
        checks.extend(runner(index))
    if name_prefix:
        checks = [c for c in checks if c.name.startswith(name_prefix)]
    return checks
