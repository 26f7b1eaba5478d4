"""S0 Lamb-mode phase velocity of the homogenized plate.

Two routes are provided: the low-frequency thin-plate limit
``sqrt(c_eff / rho_eff)`` and a root of the symmetric Rayleigh-Lamb
characteristic equation for an isotropic-equivalent plate.

The isotropic equivalent keeps the shear modulus ``g_eff`` and picks the
longitudinal modulus M so that the plate's own plane-stress modulus
4G(M - G)/M equals ``c_eff``. With that choice the Rayleigh-Lamb S0 branch
tends exactly to the thin-plate velocity as f*d -> 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .materials import EffectivePlate

WINDOW = (0.3, 3.0)
SCAN_POINTS = 600
ROOT_RTOL = 1e-13


@dataclass(frozen=True)
class DispersionCurve:
    fd: np.ndarray
    velocity: np.ndarray
    branch: str = "S0"
    unresolved: tuple[float, ...] = field(default=())

    def __post_init__(self):
        fd = np.asarray(self.fd, dtype=float)
        v = np.asarray(self.velocity, dtype=float)
        if fd.shape != v.shape:
            raise ValueError("fd and velocity must have equal length")
        if fd.size > 1 and not np.all(np.diff(fd) > 0):
            raise ValueError("frequency-thickness products must be strictly increasing")
        if np.any(v <= 0):
            raise ValueError("phase velocities must be positive")
        object.__setattr__(self, "fd", fd)
        object.__setattr__(self, "velocity", v)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fd.tolist(), self.velocity.tolist()))


def s0_thin_plate_velocity(plate: EffectivePlate) -> float:
    return math.sqrt(plate.c_eff / plate.rho_eff)


def isotropic_velocities(plate: EffectivePlate) -> tuple[float, float]:
    """Longitudinal and shear bulk velocities of the isotropic-equivalent plate."""
    g = plate.g_eff
    if not 4 * g > plate.c_eff:
        raise ConfigurationError(
            f"no isotropic equivalent: need 4*c44 > c_eff (c44={g:.4g}, c_eff={plate.c_eff:.4g})"
        )
    m = 4 * g * g / (4 * g - plate.c_eff)
    return math.sqrt(m / plate.rho_eff), math.sqrt(g / plate.rho_eff)


def _sinc_root(x2: float) -> float:
    # sin(sqrt(x2)) / sqrt(x2), continued to x2 < 0
    if x2 > 0:
        r = math.sqrt(x2)
        return math.sin(r) / r
    if x2 < 0:
        r = math.sqrt(-x2)
        return math.sinh(r) / r
    return 1.0


def _root_sin(x2: float) -> float:
    # sqrt(x2) * sin(sqrt(x2))
    if x2 >= 0:
        r = math.sqrt(x2)
        return r * math.sin(r)
    r = math.sqrt(-x2)
    return -r * math.sinh(r)


def _cos_root(x2: float) -> float:
    if x2 >= 0:
        return math.cos(math.sqrt(x2))
    return math.cosh(math.sqrt(-x2))


def _terms(c: float, fd: float, c_l: float, c_t: float) -> tuple[float, float]:
    wh = math.pi * fd  # omega * half-thickness
    k2 = (wh / c) ** 2
    p2 = wh * wh * (1.0 / c_l**2 - 1.0 / c**2)
    q2 = wh * wh * (1.0 / c_t**2 - 1.0 / c**2)
    t1 = (q2 - k2) ** 2 * _sinc_root(q2) * _cos_root(p2)
    t2 = 4.0 * k2 * _root_sin(p2) * _cos_root(q2)
    return t1, t2


def symmetric_characteristic(c: float, fd: float, c_l: float, c_t: float) -> float:
    """Symmetric Rayleigh-Lamb determinant, real-valued for every phase velocity.

    This is ``(q^2-k^2)^2 sin(qh) cos(ph) / q + 4 k^2 p sin(ph) cos(qh)`` in
    units of the half thickness h, i.e. the usual tan-ratio form multiplied
    through by cosines and divided by q.
    """
    t1, t2 = _terms(c, fd, c_l, c_t)
    return t1 + t2


def characteristic_scale(c: float, fd: float, c_l: float, c_t: float) -> float:
    t1, t2 = _terms(c, fd, c_l, c_t)
    return abs(t1) + abs(t2)


def _roots_in_window(fd: float, c_l: float, c_t: float, lo: float, hi: float, n: int) -> list[float]:
    cs = np.linspace(lo, hi, n)
    vals = np.array([symmetric_characteristic(c, fd, c_l, c_t) for c in cs])
    roots = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(cs[i]))
        elif a * b < 0:
            roots.append(
                brentq(symmetric_characteristic, cs[i], cs[i + 1], args=(fd, c_l, c_t),
                       xtol=1e-300, rtol=ROOT_RTOL)
            )
    return roots


def rayleigh_lamb_s0(plate: EffectivePlate, fd_grid: Sequence[float],
                     scan_points: int = SCAN_POINTS) -> DispersionCurve:
    """Trace the S0 branch over ``fd_grid`` (Hz*m, full plate thickness).

    At each point the velocity window ``[0.3, 3] * v_thin`` is scanned for
    sign changes and each bracket is polished with Brent's method. The root
    nearest the previous point (the thin-plate value at the start) is kept, so
    the branch is followed continuously. Points without a bracketed root go to
    ``unresolved``.
    """
    fd_grid = np.asarray(fd_grid, dtype=float)
    if fd_grid.size == 0 or np.any(fd_grid <= 0) or np.any(np.diff(fd_grid) <= 0):
        raise ValueError("fd_grid must be strictly increasing and positive")
    c_l, c_t = isotropic_velocities(plate)
    v_thin = s0_thin_plate_velocity(plate)
    lo, hi = WINDOW[0] * v_thin, WINDOW[1] * v_thin

    prev = v_thin
    fds, vs, missing = [], [], []
    for fd in fd_grid:
        roots = _roots_in_window(float(fd), c_l, c_t, lo, hi, scan_points)
        if not roots:
            missing.append(float(fd))
            continue
        best = min(roots, key=lambda r: abs(r - prev))
        fds.append(float(fd))
        vs.append(best)
        prev = best
    return DispersionCurve(np.array(fds), np.array(vs), "S0", tuple(missing))


def write_csv(curve: DispersionCurve, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["fd_hz_m", "phase_velocity_m_s"])
    for fd, v in curve.points:
        w.writerow([repr(fd), repr(v)])
