"""Experiment configuration: flat key-value files with typed validation.

The format is one `key = value` pair per line, '#' comments, unknown keys
rejected.  Reproducibility beats convenience: a config file plus a seed
pins a run byte for byte.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import ConfigError
from .spectral import DampingPair, SampledFunction1D

__all__ = ["ExperimentConfig", "parse_config", "load_config"]

DAMPING_KINDS = ("zero", "constant", "affine", "csv")


@dataclass
class ExperimentConfig:
    n: int = 65
    tau: float = 4.0
    dt_factor: float = 0.5
    seed: int = 20260809
    out_dir: str = "out"
    damping_kind: str = "affine"
    damping_base: float = 0.1
    damping_slope1: float = 0.05
    damping_slope2: float = 0.0
    damping_csv1: str = ""
    damping_csv2: str = ""
    damping_samples: int = 257
    probe_k: int = 0
    probe_l: int = 0
    probe_budget: int = 2
    trunc_order: int = 4
    guard: float = 0.2
    gn_iters: int = 6
    sweep_epsilons: Tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    calib_member: int = -1
    trunc_rate: float = 2.0
    verify_tol_scale: float = 1.0

    def validate(self) -> "ExperimentConfig":
        if self.n < 17:
            raise ConfigError("n", f"must be at least 17, got {self.n}")
        if not self.tau > 0:
            raise ConfigError("tau", f"must be positive, got {self.tau}")
        if not 0.0 < self.dt_factor <= 0.5:
            raise ConfigError("dt_factor", f"must lie in (0, 0.5], got {self.dt_factor}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must fit in an unsigned 64-bit integer")
        if self.damping_kind not in DAMPING_KINDS:
            raise ConfigError("damping_kind", f"must be one of {DAMPING_KINDS}")
        if self.damping_kind == "csv" and not (self.damping_csv1 and self.damping_csv2):
            raise ConfigError("damping_csv1", "csv damping needs both file paths")
        if self.damping_samples < 19:
            raise ConfigError("damping_samples", "need at least 19 samples")
        if self.probe_k < 0:
            raise ConfigError("probe_k", "must be nonnegative")
        if self.probe_l < 0:
            raise ConfigError("probe_l", "must be nonnegative")
        if self.probe_budget < 0:
            raise ConfigError("probe_budget", "must be nonnegative")
        if self.trunc_order < 0:
            raise ConfigError("trunc_order", "must be nonnegative")
        if not 0.0 <= self.guard <= 0.5:
            raise ConfigError("guard", f"must lie in [0, 0.5], got {self.guard}")
        if self.gn_iters < 0:
            raise ConfigError("gn_iters", "must be nonnegative")
        if not self.sweep_epsilons or any(e <= 0 for e in self.sweep_epsilons):
            raise ConfigError("sweep_epsilons", "need positive scale factors")
        if self.calib_member >= len(self.sweep_epsilons):
            raise ConfigError("calib_member", "index beyond the sweep family")
        if not self.trunc_rate > 0:
            raise ConfigError("trunc_rate", f"must be positive, got {self.trunc_rate}")
        if not math.isfinite(self.verify_tol_scale) or self.verify_tol_scale < 0:
            raise ConfigError("verify_tol_scale", "must be a nonnegative number")
        return self

    def build_damping(self) -> DampingPair:
        n = self.damping_samples
        s = np.linspace(0.0, 1.0, n)
        kind = self.damping_kind
        if kind == "zero":
            return DampingPair.zero(n)
        if kind == "constant":
            if self.damping_base < 0:
                raise ConfigError("damping_base", "must be nonnegative")
            return DampingPair.constant(self.damping_base, n)
        if kind == "affine":
            a1 = self.damping_base + self.damping_slope1 * s
            a2 = self.damping_base + self.damping_slope2 * s
            if a1.min() < 0 or a2.min() < 0:
                raise ConfigError("damping_slope1", "affine profile must stay nonnegative")
            return DampingPair(SampledFunction1D(a1), SampledFunction1D(a2))
        from .io import load_damping_csv

        a1 = load_damping_csv(self.damping_csv1)
        a2 = load_damping_csv(self.damping_csv2)
        try:
            return DampingPair(a1, a2)
        except ValueError as exc:
            raise ConfigError("damping_csv1", str(exc)) from exc

    def canonical_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(float(e)) for e in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(field, raw: str):
    if field.type in ("int", int):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(field.name, f"expected an integer, got {raw!r}") from exc
    if field.type in ("float", float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(field.name, f"expected a number, got {raw!r}") from exc
    if field.name == "sweep_epsilons":
        try:
            return tuple(float(p) for p in raw.split(",") if p.strip())
        except ValueError as exc:
            raise ConfigError(field.name, f"expected comma-separated numbers, got {raw!r}") from exc
    return raw


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = _parse_value(_FIELDS[key], raw)
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return parse_config(text)
