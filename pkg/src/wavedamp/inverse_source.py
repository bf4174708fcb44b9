"""Convolution machinery for the inverse source problem.

The forward map sends a time-independent source with known modulation
profile to the observed boundary signal; its time structure is the causal
convolution S with the modulation.  This module provides S, its
anticausal adjoint, the Gronwall-type stability factor that controls the
inversion, and the end-to-end bound check pairing the dual norm of a
source against the boundary trace it generates.

All quadrature is composite trapezoid on a uniform step grid, so the
discrete adjoint identity <S h, g> = <h, S* g> holds to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ObservabilityFailure
from .forward import SolveResult, SourceSpec, solve
from .grid import Grid2D
from .riesz import riesz_solve
from .spectral import DampingPair, trapezoid_weights

__all__ = [
    "Modulation",
    "TimeSignal",
    "convolve_causal",
    "convolve_anticausal",
    "stability_factor",
    "GronwallCheck",
    "gronwall_bound_check",
    "SourceBoundCheck",
    "source_bound_check",
]


@dataclass(frozen=True)
class Modulation:
    """Known time modulation of the source, sampled on [0, tau].

    All stability statements require a nonzero initial value.
    """

    values: np.ndarray
    tau: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 3:
            raise ValueError("modulation needs at least 3 samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("modulation samples must be finite")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, fn, tau: float, steps: int) -> "Modulation":
        t = np.linspace(0.0, tau, steps + 1)
        return cls(np.asarray(fn(t), dtype=float), tau)

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dt(self) -> float:
        return self.tau / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def initial_value(self) -> float:
        return float(self.values[0])

    def derivative_l2(self) -> float:
        """L2(0, tau) norm of the time derivative, finite differences."""
        d = np.gradient(self.values, self.dt, edge_order=2)
        w = trapezoid_weights(d.shape[0])
        return math.sqrt(float(self.dt * (w * d * d).sum()))


@dataclass(frozen=True)
class TimeSignal:
    """Vector-valued signal on the uniform time grid of [0, tau].

    values has shape (steps + 1,) or (steps + 1, dim); each row is one
    instant of the discrete observation space.
    """

    values: np.ndarray
    tau: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 3:
            raise ValueError("signal needs at least 3 time samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal samples must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return self.tau / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def l2_norm(self) -> float:
        """Norm in L2((0, tau); Y), trapezoid in time."""
        w = trapezoid_weights(self.steps + 1)
        return math.sqrt(float(self.dt * (w * (self.values ** 2).sum(axis=1)).sum()))

    def inner(self, other: "TimeSignal") -> float:
        if self.values.shape != other.values.shape:
            raise ValueError("signals must share shape")
        w = trapezoid_weights(self.steps + 1)
        return float(self.dt * (w * (self.values * other.values).sum(axis=1)).sum())


def _check_aligned(lam: Modulation, sig: TimeSignal):
    if lam.steps != sig.steps or not math.isclose(lam.tau, sig.tau, rel_tol=1e-12):
        raise ValueError("modulation and signal must share the time grid")


def _causal_matrix(lam: Modulation) -> np.ndarray:
    cached = getattr(lam, "_causal_matrix_cache", None)
    if cached is not None:
        return cached
    m = lam.steps
    dt = lam.dt
    idx = np.arange(m + 1)
    kernel = lam.values[np.clip(idx[:, None] - idx[None, :], 0, m)]
    weights = np.zeros((m + 1, m + 1))
    lower = idx[None, :] <= idx[:, None]
    weights[lower] = dt
    weights[idx, idx] = 0.5 * dt
    weights[1:, 0] = 0.5 * dt
    weights[0, 0] = 0.0
    mat = np.where(lower, kernel * weights, 0.0)
    object.__setattr__(lam, "_causal_matrix_cache", mat)
    return mat


def convolve_causal(lam: Modulation, sig: TimeSignal) -> TimeSignal:
    """(S h)(t) = int_0^t lam(t - s) h(s) ds; output vanishes at t = 0.

    Row t of the output only touches samples of h up to t, so causality
    holds bit-exactly.
    """
    _check_aligned(lam, sig)
    return TimeSignal(_causal_matrix(lam) @ sig.values, sig.tau)


def convolve_anticausal(lam: Modulation, sig: TimeSignal) -> TimeSignal:
    """(S* h)(t) = int_t^tau lam(s - t) h(s) ds.

    Built as the exact discrete adjoint of convolve_causal under the
    trapezoid inner product of L2((0, tau); Y), so the adjoint identity
    holds to roundoff and row t only touches samples at s >= t
    (anticausality is bit-exact).  Every interior sample matches the
    trapezoid quadrature of the defining integral; the two end samples
    carry O(dt) quadrature defects (the value at tau keeps its trapezoid
    end-weight instead of being an exact zero, and the value at 0 misses
    the h(0) end-weight that the causal operator's pinned first row never
    sees).
    """
    _check_aligned(lam, sig)
    m = sig.steps
    w = trapezoid_weights(m + 1)
    # adjoint of (K o W) under diag(w) pairing: rows scale by 1/w, columns by w
    mat = _causal_matrix(lam).T * (w[None, :] / w[:, None])
    return TimeSignal(mat @ sig.values, sig.tau)


def stability_factor(lam: Modulation) -> float:
    """Gronwall constant sqrt(2)/|lam(0)| * exp(||lam'||^2 tau / lam(0)^2)."""
    lam0 = abs(lam.initial_value)
    if lam0 == 0.0:
        raise ValueError("modulation must have a nonzero initial value")
    dl2 = lam.derivative_l2()
    return math.sqrt(2.0) / lam0 * math.exp(dl2 * dl2 * lam.tau / lam0 ** 2)


@dataclass(frozen=True)
class GronwallCheck:
    lhs: float
    rhs: float
    holds: bool


def gronwall_bound_check(lam: Modulation, sig: TimeSignal) -> GronwallCheck:
    """Check ||h|| <= stability_factor * ||(S* h)'|| in L2((0, tau); Y)."""
    k = convolve_anticausal(lam, sig)
    kp = np.gradient(k.values, k.dt, axis=0, edge_order=2)
    w = trapezoid_weights(k.steps + 1)
    kp_norm = math.sqrt(float(k.dt * (w * (kp ** 2).sum(axis=1)).sum()))
    lhs = sig.l2_norm()
    rhs = stability_factor(lam) * kp_norm
    return GronwallCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs * (1.0 + 1e-9))


@dataclass(frozen=True)
class SourceBoundCheck:
    """Dual-norm-versus-trace bound for one source configuration.

    ratio = wnorm / trace_norm; c_emp strips the Gronwall factor off the
    ratio, leaving the empirical constant of the bound.
    """

    wnorm: float
    trace_norm: float
    ratio: float
    c_emp: float
    result: SolveResult


def source_bound_check(a: DampingPair, source: SourceSpec, tau: float, grid: Grid2D,
                       dt_factor: float = 0.5, floor: float = 1e-12,
                       modulation: Optional[Modulation] = None) -> SourceBoundCheck:
    """Drive the zero-data problem with the source and compare norms.

    Runs the forward solver from rest, measures the boundary trace norm,
    computes the dual norm of the source load by the discrete Riesz solve,
    and reports the ratio together with the Gronwall-normalized constant.
    """
    if a.minimum() <= 0:
        raise ValueError("source bound check needs a strictly positive damping")
    zeros = np.zeros((grid.n, grid.n))
    result = solve(zeros, zeros, a, grid, tau, source=source, dt_factor=dt_factor)
    wnorm = riesz_solve(source.load, grid).vprime_norm
    trace_norm = result.trace.l2_norm()
    if wnorm <= floor and trace_norm <= floor:
        return SourceBoundCheck(wnorm=wnorm, trace_norm=trace_norm, ratio=0.0,
                                c_emp=0.0, result=result)
    if trace_norm <= floor:
        raise ObservabilityFailure("nonzero source produced a vanishing boundary trace")
    if modulation is None:
        steps = result.times.shape[0] - 1
        modulation = Modulation.from_callable(np.vectorize(source.profile), tau, steps)
    ratio = wnorm / trace_norm
    return SourceBoundCheck(wnorm=wnorm, trace_norm=trace_norm, ratio=ratio,
                            c_emp=ratio / stability_factor(modulation), result=result)
