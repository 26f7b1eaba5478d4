"""Forward mBVD synthesis from (fs, k2, Q) branch metrics.

Coupling follows ``k2 = (pi^2/8) (fp^2/fs^2 - 1)``. For a single lossless
branch the antiresonance obeys ``fp^2/fs^2 = 1 + C/c0`` exactly, so the
motional capacitance is ``C = c0 * (8/pi^2) * k2`` and the two conventions
agree without any small-coupling approximation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .errors import ConfigurationError, ParseError

K2_FACTOR = 8.0 / math.pi**2  # C/c0 per unit k2


@dataclass(frozen=True)
class ModalBranch:
    fs: float
    k2: float
    q: float

    def __post_init__(self):
        if not self.fs > 0:
            raise ConfigurationError(f"fs must be > 0, got {self.fs}")
        if not 0 <= self.k2 < 1:
            raise ConfigurationError(f"k2 must satisfy 0 <= k2 < 1, got {self.k2}")
        if not self.q > 0:
            raise ConfigurationError(f"q must be > 0, got {self.q}")

    @property
    def inert(self) -> bool:
        return self.k2 == 0

    def to_record(self) -> dict:
        return {"fs": self.fs, "k2": self.k2, "q": self.q}


@dataclass(frozen=True)
class ResonatorModel:
    c0: float
    rs_shunt: float = 0.0
    branches: tuple[ModalBranch, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.c0 > 0:
            raise ConfigurationError(f"c0 must be > 0, got {self.c0}")
        if self.rs_shunt < 0:
            raise ConfigurationError("rs_shunt must be >= 0")
        fs = [b.fs for b in self.branches]
        if len(set(fs)) != len(fs):
            raise ConfigurationError("branch series frequencies must be distinct")

    def to_record(self) -> dict:
        return {
            "c0": self.c0,
            "rs_shunt": self.rs_shunt,
            "branches": [b.to_record() for b in self.branches],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ResonatorModel":
        try:
            branches = tuple(
                ModalBranch(float(b["fs"]), float(b["k2"]), float(b["q"]))
                for b in rec.get("branches", [])
            )
            return cls(float(rec["c0"]), float(rec.get("rs_shunt", 0.0)), branches)
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"bad resonator model record: {exc}") from None


@dataclass(frozen=True)
class FrequencyResponse:
    freqs: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        y = np.asarray(self.y, dtype=complex)
        if f.ndim != 1 or f.shape != y.shape:
            raise ValueError("freqs and y must be 1-D arrays of equal length")
        if np.any(f <= 0):
            raise ValueError("frequencies must be positive")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "y", y)

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.freqs

    @property
    def z(self) -> np.ndarray:
        return 1.0 / self.y


def branch_rlc(branch: ModalBranch, c0: float) -> tuple[float, float, float]:
    """Motional (R, L, C). An inert branch (k2 = 0) is an open circuit: (inf, inf, 0)."""
    if branch.inert:
        return math.inf, math.inf, 0.0
    c = c0 * K2_FACTOR * branch.k2
    ws = 2 * math.pi * branch.fs
    l = 1.0 / (ws * ws * c)
    r = ws * l / branch.q
    return r, l, c


def parallel_resonance(branch: ModalBranch, c0: float | None = None) -> float:
    """Antiresonance implied by the coupling definition; independent of c0."""
    return branch.fs * math.sqrt(1.0 + K2_FACTOR * branch.k2)


def branch_admittance(branch: ModalBranch, c0: float, freqs) -> np.ndarray:
    w = 2 * np.pi * np.asarray(freqs, dtype=float)
    if branch.inert:
        return np.zeros(w.shape, dtype=complex)
    # 1/(R + jwL + 1/(jwC)) rewritten with LC = 1/ws^2 and RC = 1/(ws q),
    # which stays finite for arbitrarily small k2
    c = c0 * K2_FACTOR * branch.k2
    u = w / (2 * math.pi * branch.fs)
    return 1j * w * c / (1.0 - u * u + 1j * u / branch.q)


def synthesize(model: ResonatorModel, freqs: Iterable[float]) -> FrequencyResponse:
    f = np.asarray(freqs, dtype=float)
    y = 1j * (2 * np.pi * f) * model.c0
    for b in model.branches:
        if not b.inert:
            y = y + branch_admittance(b, model.c0, f)
    if model.rs_shunt > 0:
        y = 1.0 / (model.rs_shunt + 1.0 / y)
    return FrequencyResponse(f, y)


def write_response_csv(fr: FrequencyResponse, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["freq_hz", "re_y_s", "im_y_s"])
    for f, y in zip(fr.freqs.tolist(), fr.y.tolist()):
        w.writerow([repr(f), repr(y.real), repr(y.imag)])


def read_response_csv(fh: TextIO) -> FrequencyResponse:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty response CSV")
    header = [h.strip() for h in header]
    try:
        i_f, i_re, i_im = (header.index(c) for c in ("freq_hz", "re_y_s", "im_y_s"))
    except ValueError:
        raise ParseError("response CSV needs columns freq_hz, re_y_s, im_y_s", 1) from None
    freqs, ys = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            freqs.append(float(row[i_f]))
            ys.append(complex(float(row[i_re]), float(row[i_im])))
        except (ValueError, IndexError):
            raise ParseError(f"malformed row {row!r}", lineno) from None
    if not freqs:
        raise ParseError("response CSV has no data rows")
    try:
        return FrequencyResponse(np.array(freqs), np.array(ys))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
