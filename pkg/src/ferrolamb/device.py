"""1D lateral model of the released two-electrode overtone resonator.

The membrane of width W is treated as a free-free bar. Overtone n has
stress-free shape cos(n*pi*x/W) and frequency n*v/(2W). A uniform lateral
field fills the gap between the two electrodes, and each overtone couples in
proportion to the squared overlap of that field with the mode strain.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import epsilon_0
from scipy.integrate import quad

from .circuit import ModalBranch, ResonatorModel
from .errors import ConfigurationError
from .materials import fixtures_dir


@dataclass(frozen=True)
class DeviceGeometry:
    """Lengths in metres. ``gap`` is the inter-electrode spacing; None splits
    the space left by the electrodes into three equal parts."""

    lateral_width: float = 7.75e-6
    electrode_width: float = 1.25e-6
    n_electrodes: int = 2
    aperture: float = 50e-6
    bto_thickness: float = 125e-9
    electrode_thickness: float = 75e-9
    undercut: float = 10e-6
    gap: float | None = None

    def __post_init__(self):
        for name in ("lateral_width", "electrode_width", "aperture", "bto_thickness",
                     "electrode_thickness", "undercut"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.n_electrodes < 1:
            raise ConfigurationError("n_electrodes must be >= 1")
        if not self.n_electrodes * self.electrode_width < self.lateral_width:
            raise ConfigurationError("electrodes do not fit inside the lateral width")
        if self.gap is not None:
            if not self.gap > 0:
                raise ConfigurationError("gap must be > 0")
            if self.edge_gap < 0:
                raise ConfigurationError("electrodes plus gap exceed the lateral width")

    @property
    def inter_electrode_gap(self) -> float:
        if self.gap is not None:
            return self.gap
        return (self.lateral_width - 2 * self.electrode_width) / 3.0

    @property
    def edge_gap(self) -> float:
        """Spacing between each electrode and its etch-window edge."""
        return (self.lateral_width - 2 * self.electrode_width - self.inter_electrode_gap) / 2.0

    def with_gap(self, gap: float) -> "DeviceGeometry":
        return DeviceGeometry(**{**asdict(self), "gap": gap})

    @classmethod
    def from_record(cls, rec: dict) -> "DeviceGeometry":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(rec) - known - {"schema_version", "provenance", "name"}
        if unknown:
            raise ConfigurationError(f"unknown geometry fields: {sorted(unknown)}")
        kwargs = {k: v for k, v in rec.items() if k in known}
        return cls(**kwargs)

    def to_record(self) -> dict:
        return asdict(self)


def load_geometry(path: str | os.PathLike | None = None) -> DeviceGeometry:
    path = Path(path) if path is not None else fixtures_dir() / "geometry_design.json"
    with open(path) as fh:
        return DeviceGeometry.from_record(json.load(fh))


@dataclass(frozen=True)
class FieldProfile:
    """Piecewise-constant lateral field on [0, width]: (x0, x1, value) segments."""

    width: float
    segments: tuple[tuple[float, float, float], ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for x0, x1, val in self.segments:
            out = np.where((x >= x0) & (x < x1), val, out)
        return out

    @property
    def support(self) -> float:
        return sum(x1 - x0 for x0, x1, val in self.segments if val != 0)


@dataclass(frozen=True)
class OvertoneMode:
    index: int
    frequency: float
    weight: float


@dataclass(frozen=True)
class OvertoneSet:
    modes: tuple[OvertoneMode, ...] = field(default=())

    def __post_init__(self):
        f = [m.frequency for m in self.modes]
        if any(b <= a for a, b in zip(f, f[1:])):
            raise ValueError("overtone frequencies must increase with index")

    def coupled(self, min_weight: float = 0.05) -> list[OvertoneMode]:
        return [m for m in self.modes if m.weight >= min_weight]


def overtone_frequencies(geom: DeviceGeometry, v_s0: float, n_max: int) -> np.ndarray:
    if not v_s0 > 0 or n_max < 1:
        raise ValueError("need v_s0 > 0 and n_max >= 1")
    n = np.arange(1, n_max + 1)
    return n * v_s0 / (2.0 * geom.lateral_width)


def calibrate_velocity(geom: DeviceGeometry, f_target: float, index: int = 1) -> float:
    """Velocity that places overtone ``index`` at ``f_target``."""
    return 2.0 * geom.lateral_width * f_target / index


def lateral_field_profile(geom: DeviceGeometry) -> FieldProfile:
    if geom.n_electrodes != 2:
        raise ConfigurationError("the lateral field model supports exactly two electrodes")
    a = geom.edge_gap + geom.electrode_width
    b = a + geom.inter_electrode_gap
    return FieldProfile(geom.lateral_width, ((a, b, 1.0),))


def profile_overlaps(profile: FieldProfile, n_max: int, method: str = "closed") -> np.ndarray:
    """Raw overlaps of ``profile`` with the strain of modes 1..n_max.

    ``method="closed"`` uses the antiderivative (the mode shape itself);
    ``method="quad"`` integrates field times strain numerically per segment.
    """
    if method not in ("closed", "quad"):
        raise ValueError(f"unknown method {method!r}")
    w = profile.width
    out = np.zeros(n_max)
    for i, n in enumerate(range(1, n_max + 1)):
        kn = n * math.pi / w
        total = 0.0
        for x0, x1, val in profile.segments:
            if method == "closed":
                total += val * (math.cos(kn * x1) - math.cos(kn * x0))
            else:
                # integrate in u = x / W so the integrand is O(n)
                res, _ = quad(lambda u: -n * math.pi * math.sin(n * math.pi * u), x0 / w, x1 / w,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
                total += val * res
        out[i] = total
    return out


def overlap_integrals(geom: DeviceGeometry, n_max: int, method: str = "closed") -> np.ndarray:
    return profile_overlaps(lateral_field_profile(geom), n_max, method)


def coupling_weights(geom: DeviceGeometry, n_max: int, method: str = "closed") -> np.ndarray:
    """Squared overlaps normalized so the strongest of modes 1..n_max is 1."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    raw = overlap_integrals(geom, n_max, method) ** 2
    peak = raw.max()
    if peak == 0:
        return raw
    return raw / peak


def overtone_set(geom: DeviceGeometry, v_s0: float, n_max: int) -> OvertoneSet:
    freqs = overtone_frequencies(geom, v_s0, n_max)
    weights = coupling_weights(geom, n_max)
    return OvertoneSet(tuple(OvertoneMode(n, float(f), float(w))
                             for n, f, w in zip(range(1, n_max + 1), freqs, weights)))


def static_capacitance(geom: DeviceGeometry, eps_eff_r: float) -> float:
    """Parallel-strip estimate eps0 * eps_r * aperture * thickness / gap."""
    return epsilon_0 * eps_eff_r * geom.aperture * geom.bto_thickness / geom.inter_electrode_gap


def resonator_model(geom: DeviceGeometry, v_s0: float, eps_eff_r: float, k2_peak: float,
                    q: float, n_max: int = 9, min_weight: float = 0.05,
                    f_max: float | None = None) -> ResonatorModel:
    """mBVD model with one branch per coupled overtone; k2 scales with weight."""
    branches = []
    for mode in overtone_set(geom, v_s0, n_max).modes:
        if mode.weight < min_weight or (f_max is not None and mode.frequency > f_max):
            continue
        branches.append(ModalBranch(mode.frequency, k2_peak * mode.weight, q))
    return ResonatorModel(static_capacitance(geom, eps_eff_r), 0.0, tuple(branches))
