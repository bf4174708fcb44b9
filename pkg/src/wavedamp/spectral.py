"""Spectral objects of the mixed-boundary Laplacian on the unit square.

The square carries homogeneous Dirichlet conditions on the far sides
(x = 1 and y = 1) and reflecting conditions on the near sides (y = 0 and
x = 0).  Separation of variables gives eigenvalues
((k + 1/2)^2 + (l + 1/2)^2) * pi^2 with product-cosine eigenfunctions;
the restriction to a damped side induces the orthonormal interval modes
sqrt(2) * cos((k + 1/2) pi s).

This module also owns the 1-D sampled-function machinery used everywhere
else: trapezoid quadrature, cosine-mode analysis/synthesis, discrete
Sobolev and Hoelder norms, the multiplier bound for Hoelder coefficients
on the half-order Sobolev space, and the corner compatibility integral.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError

__all__ = [
    "ModeIndex",
    "Eigenpair",
    "SampledFunction1D",
    "DampingPair",
    "Side",
    "FourierCoeffs",
    "SobolevNorms",
    "MultiplierBound",
    "CompatIntegral",
    "trapezoid_weights",
    "integrate",
    "eigenpair",
    "mode_shape",
    "boundary_mode",
    "project_onto_modes",
    "synthesize_from_modes",
    "sobolev_norms",
    "holder_seminorm",
    "multiplier_bound_check",
    "compat_integral",
    "damping_compat_check",
]


# ---------------------------------------------------------------------------
# quadrature helpers

def trapezoid_weights(n: int) -> np.ndarray:
    """Composite trapezoid weights on n uniform nodes (spacing excluded)."""
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def integrate(values: np.ndarray, dx: float) -> float:
    """Composite trapezoid rule on uniformly spaced samples."""
    values = np.asarray(values)
    return float(dx * (trapezoid_weights(values.shape[0]) * values).sum())


# ---------------------------------------------------------------------------
# modes

@dataclass(frozen=True)
class ModeIndex:
    """Nonnegative separation indices (k, l) of a square eigenfunction.

    Negative indices are redundant: cos((-k - 1/2) pi s) = cos((k + 1/2) pi s),
    so restricting to k, l >= 0 enumerates the spectrum without double
    counting.
    """

    k: int
    l: int

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise ValueError(f"mode indices must be nonnegative, got {(self.k, self.l)}")


@dataclass(frozen=True)
class Eigenpair:
    mode: ModeIndex
    eigenvalue: float
    omega: float


def eigenpair(mode: ModeIndex) -> Eigenpair:
    """Eigenvalue ((k+1/2)^2 + (l+1/2)^2) pi^2 and its temporal frequency."""
    lam = ((mode.k + 0.5) ** 2 + (mode.l + 0.5) ** 2) * math.pi ** 2
    return Eigenpair(mode=mode, eigenvalue=lam, omega=math.sqrt(lam))


def mode_shape(mode: ModeIndex, x, y):
    """Eigenfunction 2 cos((k+1/2) pi x) cos((l+1/2) pi y), unit L2 norm.

    Vanishes on x = 1 and y = 1; its normal derivative vanishes on x = 0
    and y = 0.
    """
    tx = (mode.k + 0.5) * math.pi
    ty = (mode.l + 0.5) * math.pi
    return 2.0 * np.cos(tx * np.asarray(x)) * np.cos(ty * np.asarray(y))


def boundary_mode(k: int, s):
    """Orthonormal interval mode sqrt(2) cos((k+1/2) pi s) on (0, 1)."""
    if k < 0:
        raise ValueError("mode index must be nonnegative")
    return math.sqrt(2.0) * np.cos((k + 0.5) * math.pi * np.asarray(s))


# ---------------------------------------------------------------------------
# sampled functions on the unit interval

@dataclass(frozen=True)
class SampledFunction1D:
    """Real samples on the uniform nodes s_i = i/(n-1) of [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 3:
            raise ValueError("need at least 3 samples on a 1-D uniform grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, fn, n: int) -> "SampledFunction1D":
        return cls(np.asarray(fn(np.linspace(0.0, 1.0, n)), dtype=float))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def dx(self) -> float:
        return 1.0 / (self.n - 1)

    def at(self, s) -> np.ndarray:
        """Piecewise-linear interpolation at arbitrary points of [0, 1]."""
        return np.interp(np.asarray(s, dtype=float), self.nodes, self.values)


class Side(enum.Enum):
    """The two damped sides of the square."""

    BOTTOM = "bottom"  # y = 0, parametrized by x
    LEFT = "left"      # x = 0, parametrized by y


@dataclass(frozen=True)
class FourierCoeffs:
    """Cosine-mode coefficients of a damped-side profile, orders 0..N."""

    side: Side
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.shape[0] < 1:
            raise ValueError("need at least one coefficient")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1


def _check_mode_resolution(n: int, order: int):
    # require >= 8 samples per period of the highest retained mode
    if n - 1 < 4 * order + 2:
        raise ResolutionError(
            f"{n} samples cannot resolve mode order {order}; need n >= {4 * order + 3}"
        )


def project_onto_modes(f: SampledFunction1D, order: int, side: Side = Side.BOTTOM) -> FourierCoeffs:
    """Trapezoid quadrature of f against the interval modes 0..order."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    _check_mode_resolution(f.n, order)
    s = f.nodes
    w = trapezoid_weights(f.n) * f.dx
    coeffs = np.array([float((w * f.values * boundary_mode(k, s)).sum()) for k in range(order + 1)])
    return FourierCoeffs(side=side, coeffs=coeffs)


def synthesize_from_modes(coeffs: FourierCoeffs, n: int) -> SampledFunction1D:
    """Finite cosine sum sum_k c_k sqrt(2) cos((k+1/2) pi s) on n nodes."""
    s = np.linspace(0.0, 1.0, n)
    out = np.zeros(n)
    for k, c in enumerate(coeffs.coeffs):
        out += c * boundary_mode(k, s)
    return SampledFunction1D(out)


# ---------------------------------------------------------------------------
# norms

@dataclass(frozen=True)
class SobolevNorms:
    l2: float
    h1: float
    h_half: float


def sobolev_norms(f: SampledFunction1D) -> SobolevNorms:
    """Discrete L2, H1 and H^{1/2} norms of an interval sample.

    The half-order norm uses the double-integral form
    (||f||_{L2}^2 + iint |f(x)-f(y)|^2 / |x-y|^2 dx dy)^{1/2},
    discretized on the cell-midpoint grid so the diagonal is excluded.
    """
    v = f.values
    dx = f.dx
    l2sq = integrate(v * v, dx)
    dv = np.gradient(v, dx, edge_order=2)
    h1sq = l2sq + integrate(dv * dv, dx)

    mid = 0.5 * (v[1:] + v[:-1])
    xm = 0.5 * (f.nodes[1:] + f.nodes[:-1])
    diff = mid[:, None] - mid[None, :]
    dist = xm[:, None] - xm[None, :]
    mask = ~np.eye(mid.shape[0], dtype=bool)
    semi_sq = float((dx * dx * (diff[mask] ** 2 / dist[mask] ** 2)).sum())
    return SobolevNorms(
        l2=math.sqrt(l2sq),
        h1=math.sqrt(h1sq),
        h_half=math.sqrt(l2sq + semi_sq),
    )


def holder_seminorm(f: SampledFunction1D, alpha: float) -> float:
    """sup over sample pairs of |f(x) - f(y)| / |x - y|^alpha."""
    if not 0.5 < alpha <= 1.0:
        raise ValueError("alpha must lie in (1/2, 1]")
    v = f.values
    s = f.nodes
    diff = np.abs(v[:, None] - v[None, :])
    dist = np.abs(s[:, None] - s[None, :])
    mask = ~np.eye(f.n, dtype=bool)
    return float(np.max(diff[mask] / dist[mask] ** alpha)) if f.n > 1 else 0.0


@dataclass(frozen=True)
class MultiplierBound:
    lhs: float
    rhs: float
    holds: bool


def multiplier_bound_check(a: SampledFunction1D, f: SampledFunction1D, alpha: float) -> MultiplierBound:
    """Check that multiplication by a Hoelder function is bounded on H^{1/2}.

    Compares ||a f||_{H^{1/2}} against
    (2 alpha - 1)^{-1} (||a||_inf + [a]_alpha) ||f||_{H^{1/2}}.
    """
    if a.n != f.n:
        raise ValueError("a and f must share the sample grid")
    lhs = sobolev_norms(SampledFunction1D(a.values * f.values)).h_half
    c_alpha = float(np.max(np.abs(a.values))) + holder_seminorm(a, alpha)
    rhs = c_alpha * sobolev_norms(f).h_half / (2.0 * alpha - 1.0)
    holds = lhs <= rhs * (1.0 + 1e-9) + 1e-12
    return MultiplierBound(lhs=lhs, rhs=rhs, holds=holds)


# ---------------------------------------------------------------------------
# corner compatibility

@dataclass(frozen=True)
class CompatIntegral:
    value: float
    divergent: bool


def compat_integral(g1: SampledFunction1D, g2: SampledFunction1D, window_tol: float = 1e-3) -> CompatIntegral:
    """First-order corner compatibility integral int |g1 - g2|^2 dt / t.

    The quadrature runs on (t_1, 1) with t_1 the first positive node.
    Divergence is flagged when the three finest dyadic windows
    (2^{-j-1}, 2^{-j}] each contribute more than `window_tol`: for an
    integrable mismatch the window sums decay geometrically, while a
    corner mismatch contributes about |g1(0)-g2(0)|^2 ln 2 per window.
    """
    if g1.n != g2.n:
        raise ValueError("g1 and g2 must share the sample grid")
    t = g1.nodes[1:]
    q = (g1.values[1:] - g2.values[1:]) ** 2 / t
    dx = g1.dx
    w = trapezoid_weights(g1.n)[1:]
    value = float(dx * (w * q).sum())

    contributions = []
    j = 1
    while 2.0 ** (-j - 1) >= dx / 2:
        lo, hi = 2.0 ** (-j - 1), 2.0 ** (-j)
        in_window = (t > lo) & (t <= hi)
        if in_window.sum() < 2:
            break
        contributions.append(float(dx * q[in_window].sum()))
        j += 1
    divergent = len(contributions) >= 3 and all(c > window_tol for c in contributions[-3:])
    return CompatIntegral(value=value, divergent=divergent)


# ---------------------------------------------------------------------------
# damping pairs

@dataclass(frozen=True)
class DampingPair:
    """Damping coefficient on the two damped sides, as a sample pair.

    a1 lives on the bottom side (y = 0, parametrized by x) and a2 on the
    left side (x = 0, parametrized by y); the two parametrizations meet at
    the corner (0, 0), so a1(0) = a2(0) is required.  m_lower and M_upper
    are the class parameters of the admissible family: a pointwise lower
    bound and a bound on the squared H1 norm of each component.
    """

    a1: SampledFunction1D
    a2: SampledFunction1D
    m_lower: float = 0.0
    M_upper: float = math.inf
    holder_exponent: float = 1.0
    corner_tol: float = 1e-12

    def __post_init__(self):
        if self.m_lower < 0:
            raise ValueError("m_lower must be nonnegative")
        if self.M_upper <= 0:
            raise ValueError("M_upper must be positive")
        if not 0.5 < self.holder_exponent <= 1.0:
            raise ValueError("holder_exponent must lie in (1/2, 1]")
        gap = abs(self.a1.values[0] - self.a2.values[0])
        if gap > self.corner_tol:
            raise ValueError(f"corner mismatch |a1(0) - a2(0)| = {gap:.3e} exceeds tolerance")
        for name, a in (("a1", self.a1), ("a2", self.a2)):
            if a.values.min() < -1e-12:
                raise ValueError(f"{name} must be nonnegative (min {a.values.min():.3e})")

    @classmethod
    def from_callables(cls, f1, f2, n: int = 257, **kwargs) -> "DampingPair":
        return cls(
            SampledFunction1D.from_callable(f1, n),
            SampledFunction1D.from_callable(f2, n),
            **kwargs,
        )

    @classmethod
    def constant(cls, value: float, n: int = 257, **kwargs) -> "DampingPair":
        return cls.from_callables(lambda s: np.full_like(s, value), lambda s: np.full_like(s, value), n, **kwargs)

    @classmethod
    def zero(cls, n: int = 257, **kwargs) -> "DampingPair":
        return cls.constant(0.0, n, **kwargs)

    def scaled(self, factor: float) -> "DampingPair":
        if factor < 0:
            raise ValueError("scaling must be nonnegative")
        return DampingPair(
            SampledFunction1D(factor * self.a1.values),
            SampledFunction1D(factor * self.a2.values),
            m_lower=factor * self.m_lower,
            M_upper=self.M_upper,
            holder_exponent=self.holder_exponent,
            corner_tol=self.corner_tol,
        )

    def minimum(self) -> float:
        return float(min(self.a1.values.min(), self.a2.values.min()))

    def h1_sq_max(self) -> float:
        """Largest squared H1 norm among the two components."""
        return max(sobolev_norms(self.a1).h1 ** 2, sobolev_norms(self.a2).h1 ** 2)

    def l2_norm(self) -> float:
        """Norm of the pair in L2((0,1))^2."""
        n1 = sobolev_norms(self.a1).l2
        n2 = sobolev_norms(self.a2).l2
        return math.sqrt(n1 * n1 + n2 * n2)

    def is_admissible(self) -> bool:
        """Membership in the class cut out by (m_lower, M_upper)."""
        return self.minimum() >= self.m_lower and self.h1_sq_max() <= self.M_upper


def damping_compat_check(a: DampingPair, g1: SampledFunction1D, g2: SampledFunction1D,
                         window_tol: float = 1e-3) -> bool:
    """Whether (a1 g1, a2 g2) still satisfies the corner compatibility.

    For a compatible pair (g1, g2) and a damping pair with matching corner
    values the products inherit the finite corner integral; this check
    quantifies that implication on samples.
    """
    if g1.n != g2.n:
        raise ValueError("g1 and g2 must share the sample grid")
    p1 = SampledFunction1D(a.a1.at(g1.nodes) * g1.values)
    p2 = SampledFunction1D(a.a2.at(g2.nodes) * g2.values)
    return not compat_integral(p1, p2, window_tol=window_tol).divergent
