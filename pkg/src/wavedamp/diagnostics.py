"""Empirical semigroup diagnostics: decay rates and observability constants.

Post-processing over forward trajectories only; nothing here touches the
solver state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ObservabilityFailure
from .forward import solve
from .grid import Grid2D
from .spectral import DampingPair, ModeIndex, mode_shape

__all__ = [
    "DecayFit",
    "ObservabilityReport",
    "fit_decay",
    "estimate_observability",
]


@dataclass(frozen=True)
class DecayFit:
    """Exponential envelope fit amplitude(t) ~ M_fit * exp(-omega_fit t).

    residual is the root-mean-square misfit of log sqrt(2 E(t)) against
    the fitted line over the window; relative_misfit normalizes it by the
    fitted total log drop |omega_fit| * window length.
    """

    M_fit: float
    omega_fit: float
    residual: float
    window: tuple

    @property
    def relative_misfit(self) -> float:
        length = self.window[1] - self.window[0]
        drop = abs(self.omega_fit) * length
        return self.residual / drop if drop > 0 else math.inf


def fit_decay(times: np.ndarray, energies: np.ndarray,
              window: Optional[tuple] = None, skip_fraction: float = 0.1) -> DecayFit:
    """Least-squares line through log sqrt(2 E(t)).

    The default window drops the leading `skip_fraction` of the horizon,
    where the prefactor transient lives.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if np.any(energies <= 0.0):
        raise ValueError("decay fit needs strictly positive energies")
    if window is None:
        window = (skip_fraction * times[-1], times[-1])
    keep = (times >= window[0]) & (times <= window[1])
    if keep.sum() < 8:
        raise ValueError("window too short for a decay fit")
    t = times[keep]
    log_amp = 0.5 * np.log(2.0 * energies[keep])
    design = np.vstack([t, np.ones_like(t)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, log_amp, rcond=None)
    residual = float(np.sqrt(np.mean((log_amp - design @ np.array([slope, intercept])) ** 2)))
    amp0 = math.sqrt(2.0 * energies[0])
    m_fit = math.exp(intercept) / amp0 if amp0 > 0 else math.inf
    return DecayFit(M_fit=float(m_fit), omega_fit=float(-slope), residual=residual,
                    window=(float(window[0]), float(window[1])))


@dataclass(frozen=True)
class ObservabilityReport:
    """Per-probe energy-to-measurement ratios and their maximum."""

    kappa_est: float
    ratios: tuple
    tau: float
    grid_n: int


def estimate_observability(a: DampingPair, tau: float, probes: Iterable[ModeIndex],
                           grid: Grid2D, dt_factor: float = 0.5,
                           floor_frac: float = 0.02) -> ObservabilityReport:
    """Estimate the observability constant from modal probes.

    For each probe mode, solve with initial data (mode shape, 0) and form
    ||(u0, u1)|| / ||trace||; the estimate is the worst ratio.  A probe
    whose trace norm falls below floor_frac times its initial norm signals
    an observability failure (this is what happens for vanishing damping,
    where the modal traces sit at the discretization floor).
    """
    probes = list(probes)
    if not probes:
        raise ValueError("need at least one probe mode")
    ratios = []
    for mode in probes:
        u0 = grid.sample(lambda x, y: mode_shape(mode, x, y))
        result = solve(u0, np.zeros_like(u0), a, grid, tau, dt_factor=dt_factor)
        init_norm = math.sqrt(2.0 * result.energies[0])
        trace_norm = result.trace.l2_norm()
        if trace_norm < floor_frac * init_norm:
            raise ObservabilityFailure(
                f"probe ({mode.k},{mode.l}) trace norm {trace_norm:.3e} below "
                f"{floor_frac:.2f} of its initial norm {init_norm:.3e}"
            )
        ratios.append((mode, init_norm / trace_norm))
    kappa = max(r for _, r in ratios)
    return ObservabilityReport(kappa_est=float(kappa), ratios=tuple(ratios),
                               tau=tau, grid_n=grid.n)


def decay_bound_vs_floor(fits: Sequence[tuple]) -> list:
    """Worst M_fit/omega_fit time-scale over members at or above each floor.

    `fits` holds (min_damping, DecayFit) pairs.  The returned list gives,
    for each distinct floor value in increasing order, the supremum of
    M_fit / omega_fit over the members whose damping stays at or above
    that floor; by set inclusion the supremum cannot increase with the
    floor.
    """
    items = sorted(fits, key=lambda p: p[0])
    floors = sorted({m for m, _ in items})
    out = []
    for floor in floors:
        vals = [f.M_fit / f.omega_fit for m, f in items if m >= floor and f.omega_fit > 0]
        out.append((floor, max(vals) if vals else math.inf))
    return out
