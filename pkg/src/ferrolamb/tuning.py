"""Phenomenological DC-bias model, sweep simulation and sweep analysis.

Below the turning voltage, domain alignment raises coupling as
``k2_max * tanh^2(v / v_c)``. The acoustic (parallel) frequency stays fixed,
so only fs moves. Above the turning voltage, coupling decays exponentially
and fp rises linearly. Neither regime claims a microscopic mechanism.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .circuit import K2_FACTOR, FrequencyResponse, ModalBranch, ResonatorModel, parallel_resonance, synthesize
from .errors import ConfigurationError, ExtractionError, InsufficientDataError
from .materials import fixtures_dir


def tanh2_alignment(v: float, v_c: float) -> float:
    return math.tanh(v / v_c) ** 2


def erf2_alignment(v: float, v_c: float) -> float:
    return math.erf(v / v_c) ** 2


ALIGNMENT_LAWS: dict[str, Callable[[float, float], float]] = {
    "tanh2": tanh2_alignment,
    "erf2": erf2_alignment,
}


@dataclass(frozen=True)
class TuningModel:
    """Bias-law parameters. ``k2_max`` and ``beta_turn`` (Hz/V) are per mode."""

    v_c: float
    k2_max: tuple[float, ...]
    q0: float
    q_sat: float
    eps_r0: float
    alpha_eps: float
    v_turn: float
    beta_turn: tuple[float, ...]
    gamma_decay: float
    alignment: str = "tanh2"

    def __post_init__(self):
        object.__setattr__(self, "k2_max", tuple(float(k) for k in self.k2_max))
        object.__setattr__(self, "beta_turn", tuple(float(b) for b in self.beta_turn))
        if not self.v_c > 0 or not self.v_turn > 0:
            raise ConfigurationError("v_c and v_turn must be > 0")
        if not self.k2_max or any(not 0 < k < 1 for k in self.k2_max):
            raise ConfigurationError("every k2_max must lie in (0, 1)")
        if len(self.beta_turn) != len(self.k2_max):
            raise ConfigurationError("beta_turn needs one entry per mode")
        if not self.q_sat >= self.q0 > 0:
            raise ConfigurationError("need q_sat >= q0 > 0")
        if not self.eps_r0 > 0 or self.alpha_eps < 0 or self.gamma_decay < 0:
            raise ConfigurationError("eps_r0 must be > 0; alpha_eps, gamma_decay >= 0")
        if self.alignment not in ALIGNMENT_LAWS:
            raise ConfigurationError(f"unknown alignment law {self.alignment!r}")

    @property
    def n_modes(self) -> int:
        return len(self.k2_max)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["k2_max"] = list(self.k2_max)
        rec["beta_turn"] = list(self.beta_turn)
        return {"schema_version": 1, **rec}

    @classmethod
    def from_record(cls, rec: dict) -> "TuningModel":
        fields_ = {f for f in cls.__dataclass_fields__}
        kw = {k: v for k, v in rec.items() if k in fields_}
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigurationError(f"bad tuning model record: {exc}") from None


def calibrate(k2_at_turn: Sequence[float], q_at_turn: float, *, v_c: float = 20.0,
              v_turn: float = 20.0, q0: float = 50.0, eps_r0: float = 1000.0,
              alpha_eps: float = 1e-3, beta_turn: Sequence[float] | None = None,
              gamma_decay: float = 0.15, alignment: str = "tanh2") -> TuningModel:
    """Solve the alignment law for k2_max and q_sat so the model hits the targets at v_turn."""
    law = ALIGNMENT_LAWS[alignment]
    s = law(v_turn, v_c)
    k2_max = tuple(k / s for k in k2_at_turn)
    q_sat = q0 + (q_at_turn - q0) / math.tanh(v_turn / v_c)
    if beta_turn is None:
        beta_turn = (0.0,) * len(k2_max)
    return TuningModel(v_c, k2_max, q0, q_sat, eps_r0, alpha_eps, v_turn, tuple(beta_turn),
                       gamma_decay, alignment)


def load_tuning(path: str | os.PathLike | None = None) -> TuningModel:
    path = Path(path) if path is not None else fixtures_dir() / "tuning.json"
    with open(path) as fh:
        return TuningModel.from_record(json.load(fh))


def k2_of_bias(m: TuningModel, mode: int, v: float) -> float:
    if v < 0:
        raise ValueError("negative bias is not modelled")
    law = ALIGNMENT_LAWS[m.alignment]
    if v <= m.v_turn:
        return m.k2_max[mode] * law(v, m.v_c)
    k2_turn = m.k2_max[mode] * law(m.v_turn, m.v_c)
    return k2_turn * math.exp(-m.gamma_decay * (v - m.v_turn))


def fs_fp_of_bias(m: TuningModel, mode: int, v: float, fp0: float) -> tuple[float, float]:
    if not fp0 > 0:
        raise ValueError("fp0 must be > 0")
    k2 = k2_of_bias(m, mode, v)
    fp = fp0 if v <= m.v_turn else fp0 + m.beta_turn[mode] * (v - m.v_turn)
    return fp / math.sqrt(1.0 + K2_FACTOR * k2), fp


def q_of_bias(m: TuningModel, v: float) -> float:
    if v < 0:
        raise ValueError("negative bias is not modelled")
    if v <= m.v_turn:
        return m.q0 + (m.q_sat - m.q0) * math.tanh(v / m.v_c)
    q_turn = m.q0 + (m.q_sat - m.q0) * math.tanh(m.v_turn / m.v_c)
    return max(m.q0, q_turn * (1.0 - m.gamma_decay * (v - m.v_turn)))


def c0_of_bias(m: TuningModel, c0_per_eps: float, v: float) -> float:
    """Static capacitance from a geometric scale (F per unit relative permittivity)."""
    if v < 0:
        raise ValueError("negative bias is not modelled")
    return c0_per_eps * m.eps_r0 / (1.0 + m.alpha_eps * v * v)


@dataclass(frozen=True)
class SweepRow:
    v_dc: float
    mode_index: int
    fs: float
    fp: float
    k2: float
    q: float
    c0: float


@dataclass
class BiasSweepResult:
    rows: list[SweepRow]
    traces: list[FrequencyResponse] | None = field(default=None, repr=False)

    def __post_init__(self):
        v = self.voltages
        if v.size > 1 and not np.all(np.diff(v) > 0):
            raise ValueError("sweep voltages must be strictly increasing")
        for r in self.rows:
            if not (r.fs > 0 and r.fp > 0 and r.q > 0 and r.c0 > 0 and r.k2 >= 0):
                raise ValueError(f"non-physical sweep row {r}")

    @property
    def voltages(self) -> np.ndarray:
        return np.array(sorted({r.v_dc for r in self.rows}))

    @property
    def modes(self) -> list[int]:
        return sorted({r.mode_index for r in self.rows})

    def mode_rows(self, mode: int) -> list[SweepRow]:
        return sorted((r for r in self.rows if r.mode_index == mode), key=lambda r: r.v_dc)

    def metric(self, name: str, mode: int = 0) -> tuple[np.ndarray, np.ndarray]:
        rows = self.mode_rows(mode)
        return (np.array([r.v_dc for r in rows]), np.array([getattr(r, name) for r in rows]))


def simulate_sweep(m: TuningModel, base: ResonatorModel, voltages: Sequence[float],
                   freqs: Sequence[float] | None = None) -> BiasSweepResult:
    """Evaluate the bias laws per mode.

    ``base`` supplies each mode's acoustic frequency through its parallel
    resonance, and its ``c0`` is taken as the zero-bias static capacitance.
    When ``freqs`` is given, an admittance trace is synthesized per voltage.
    """
    voltages = [float(v) for v in voltages]
    if any(v < 0 for v in voltages) or any(b <= a for a, b in zip(voltages, voltages[1:])):
        raise ValueError("voltages must be >= 0 and strictly increasing")
    if len(base.branches) > m.n_modes:
        raise ConfigurationError("tuning model has fewer modes than the base resonator")
    fp0 = [parallel_resonance(b) for b in base.branches]
    c0_per_eps = base.c0 / m.eps_r0
    rows, traces = [], [] if freqs is not None else None
    for v in voltages:
        c0 = c0_of_bias(m, c0_per_eps, v)
        q = q_of_bias(m, v)
        branches = []
        for i, f0 in enumerate(fp0):
            k2 = k2_of_bias(m, i, v)
            fs, fp = fs_fp_of_bias(m, i, v, f0)
            rows.append(SweepRow(v, i, fs, fp, k2, q, c0))
            branches.append(ModalBranch(fs, k2, q))
        if traces is not None:
            traces.append(synthesize(ResonatorModel(c0, base.rs_shunt, tuple(branches)), freqs))
    return BiasSweepResult(rows, traces)


def perturb(sweep: BiasSweepResult, rel_sigma: float, rng: np.random.Generator,
            names: Sequence[str] = ("fs", "fp", "k2", "q", "c0")) -> BiasSweepResult:
    """Copy of ``sweep`` with multiplicative Gaussian noise on the named fields."""
    rows = []
    for r in sweep.rows:
        noisy = {n: getattr(r, n) * (1.0 + rel_sigma * rng.standard_normal()) for n in names}
        rows.append(replace(r, **noisy))
    return BiasSweepResult(rows)


@dataclass(frozen=True)
class BreakpointFit:
    breakpoint: float
    sse_two: float
    sse_one: float

    @property
    def improvement(self) -> float:
        if self.sse_one == 0:
            return 0.0
        return (self.sse_one - self.sse_two) / self.sse_one


def fit_breakpoint(v: Sequence[float], y: Sequence[float], min_points: int = 3) -> BreakpointFit:
    """Continuous two-segment linear least squares, breakpoint searched over interior samples."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    n = v.size
    if n < 2 * min_points:
        raise InsufficientDataError(f"need at least {2 * min_points} samples, got {n}")
    one = np.column_stack([np.ones(n), v])
    coef, *_ = np.linalg.lstsq(one, y, rcond=None)
    sse_one = float(np.sum((one @ coef - y) ** 2))
    best = None
    for i in range(min_points - 1, n - min_points + 1):
        b = v[i]
        design = np.column_stack([np.ones(n), v, np.maximum(v - b, 0.0)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        sse = float(np.sum((design @ coef - y) ** 2))
        if best is None or sse < best[0]:
            best = (sse, float(b))
    return BreakpointFit(best[1], best[0], sse_one)


def detect_turning_voltage(sweep: BiasSweepResult, metric: str | Callable = "fs", mode: int = 0,
                           min_improvement: float = 0.01) -> float | None:
    """Breakpoint voltage of ``metric`` for ``mode``, or None when a single line fits
    nearly as well (SSE improvement below ``min_improvement``)."""
    if callable(metric):
        v, y = metric(sweep)
    else:
        v, y = sweep.metric(metric, mode)
    if len(v) < 6:
        raise InsufficientDataError(f"turning-voltage detection needs >= 6 sweep rows, got {len(v)}")
    fit = fit_breakpoint(v, y)
    scale = float(np.sum((np.asarray(y) - np.mean(y)) ** 2))
    if fit.sse_one <= 1e-24 * max(scale, 1e-300) or fit.improvement < min_improvement:
        return None
    return fit.breakpoint


def tunability(sweep: BiasSweepResult, mode: int, v_max: float | None = None,
               reference: str = "first_coupled") -> float:
    """Percentage swing of fs, 100 * (max fs - min fs) / fs_ref.

    ``reference="first_coupled"`` takes fs at the first row with nonzero
    coupling; ``"unbiased"`` takes the first row (fs = fp there). Rows above
    ``v_max`` are ignored.
    """
    rows = [r for r in sweep.mode_rows(mode) if v_max is None or r.v_dc <= v_max]
    if len(rows) < 2:
        raise InsufficientDataError("tunability needs at least two sweep rows")
    coupled = [r for r in rows if r.k2 > 0]
    if not coupled:
        raise ExtractionError("tunability undefined: every row has zero coupling")
    if reference == "first_coupled":
        ref = coupled[0].fs
    elif reference == "unbiased":
        ref = rows[0].fs
    else:
        raise ValueError(f"unknown reference {reference!r}")
    fs = [r.fs for r in rows]
    return 100.0 * (max(fs) - min(fs)) / ref


def write_sweep_csv(sweep: BiasSweepResult, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["v_dc", "mode_index", "fs_hz", "fp_hz", "k2", "q", "c0_f"])
    for r in sorted(sweep.rows, key=lambda r: (r.v_dc, r.mode_index)):
        w.writerow([repr(r.v_dc), r.mode_index, repr(r.fs), repr(r.fp), repr(r.k2), repr(r.q), repr(r.c0)])
