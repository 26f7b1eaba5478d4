"""Touchstone v1 (.s1p / .s2p) reading and writing, S <-> Y conversion.

The writer is canonical: comments, then ``# Hz S RI R <z0>``, then one line
per frequency with every number in shortest round-trip form. Parsing
canonical text and writing it again is therefore byte-identical, and
parse(write(n)) == n holds exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .circuit import FrequencyResponse
from .errors import ConversionError, ParseError, UnsupportedFormatError

FREQ_MULTIPLIERS = {"HZ": 1, "KHZ": 10**3, "MHZ": 10**6, "GHZ": 10**9}
FORMATS = ("RI", "MA", "DB")
PARAMETERS = ("S", "Y", "Z", "H", "G")
RECIPROCITY_TOLERANCE = 0.01


class ReciprocityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class NetworkData:
    """``s`` has shape (n_freqs, n_ports, n_ports). ``source_format`` and
    ``freq_unit_declared`` record provenance and do not take part in equality."""

    freqs: np.ndarray
    s: np.ndarray
    z0: float = 50.0
    comments: tuple[str, ...] = field(default=())
    source_format: str = "RI"
    freq_unit_declared: str = "Hz"

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[0] != f.size:
            raise ValueError("s must have shape (n_freqs, n_ports, n_ports)")
        if not self.z0 > 0:
            raise ValueError("z0 must be > 0")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "comments", tuple(self.comments))

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    def __eq__(self, other):
        if not isinstance(other, NetworkData):
            return NotImplemented
        return (self.z0 == other.z0 and self.comments == other.comments
                and np.array_equal(self.freqs, other.freqs) and np.array_equal(self.s, other.s))


def _cis_deg(deg: float) -> complex:
    """exp(j*deg) in degrees, exact on the axes."""
    r = math.fmod(deg, 360.0)
    if r < 0:
        r += 360.0
    exact = {0.0: 1 + 0j, 90.0: 1j, 180.0: -1 + 0j, 270.0: -1j}
    if r in exact:
        return exact[r]
    a = math.radians(deg)
    return complex(math.cos(a), math.sin(a))


def _to_complex(fmt: str, a: float, b: float) -> complex:
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    c = _cis_deg(b)
    return complex(mag * c.real, mag * c.imag)


def _parse_option_line(body: str, lineno: int) -> tuple[str, str, float]:
    unit, fmt, z0 = "GHZ", "MA", 50.0
    tokens = body.upper().split()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in FREQ_MULTIPLIERS:
            unit = tok
        elif tok in FORMATS:
            fmt = tok
        elif tok in PARAMETERS:
            if tok != "S":
                raise UnsupportedFormatError(f"parameter type {tok} not supported (S only)", lineno)
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise ParseError("reference impedance missing after R", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise ParseError(f"bad reference impedance {tokens[i + 1]!r}", lineno) from None
            if not z0 > 0:
                raise ParseError("reference impedance must be > 0", lineno)
            i += 1
        else:
            raise ParseError(f"unrecognized option token {tok!r}", lineno)
        i += 1
    return unit, fmt, z0


def parse(text: str, n_ports: int | None = None) -> NetworkData:
    """Parse Touchstone v1 text. ``n_ports`` is inferred from the row width when omitted."""
    comments: list[str] = []
    option = None
    freqs: list[float] = []
    rows: list[list[float]] = []
    width = None if n_ports is None else 1 + 2 * n_ports * n_ports
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("!"):
            comments.append(line[1:])
            continue
        if line.startswith("["):
            raise UnsupportedFormatError("Touchstone v2 keyword found; only v1 is supported", lineno)
        if "!" in line:
            line, tail = line.split("!", 1)
            comments.append(tail)
            line = line.strip()
        if line.startswith("#"):
            if option is not None:
                raise ParseError("duplicate option line", lineno)
            option = _parse_option_line(line[1:], lineno)
            continue
        if option is None:
            raise ParseError("data before option line (missing '#' line)", lineno)
        tokens = line.split()
        if width is None:
            if len(tokens) not in (3, 9):
                raise UnsupportedFormatError(
                    f"{len(tokens)} values per row; only 1-port (3) and 2-port (9) supported", lineno)
            width = len(tokens)
        if len(tokens) != width:
            raise ParseError(f"expected {width} values, found {len(tokens)}", lineno)
        unit = option[0]
        try:
            f = float(Decimal(tokens[0]) * FREQ_MULTIPLIERS[unit])
            vals = [float(t) for t in tokens[1:]]
        except (InvalidOperation, ValueError):
            raise ParseError(f"malformed numeric field in {line!r}", lineno) from None
        if not math.isfinite(f) or not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite numeric field", lineno)
        if freqs and not f > freqs[-1]:
            raise ParseError("frequencies must be strictly increasing", lineno)
        freqs.append(f)
        rows.append(vals)
    if option is None:
        raise ParseError("missing option line")
    if not freqs:
        raise ParseError("no data lines")
    unit, fmt, z0 = option
    ports = 1 if width == 3 else 2
    s = np.empty((len(freqs), ports, ports), dtype=complex)
    # 2-port row order is S11 S21 S12 S22
    order = [(0, 0)] if ports == 1 else [(0, 0), (1, 0), (0, 1), (1, 1)]
    for k, vals in enumerate(rows):
        for idx, (i, j) in enumerate(order):
            s[k, i, j] = _to_complex(fmt, vals[2 * idx], vals[2 * idx + 1])
    unit_name = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}[unit]
    return NetworkData(np.array(freqs), s, z0, tuple(comments), fmt, unit_name)


def write(n: NetworkData) -> str:
    if n.n_ports not in (1, 2):
        raise ValueError("only 1- and 2-port networks can be written")
    lines = [f"!{c}" for c in n.comments]
    lines.append(f"# Hz S RI R {float(n.z0)!r}")
    order = [(0, 0)] if n.n_ports == 1 else [(0, 0), (1, 0), (0, 1), (1, 1)]
    for f, mat in zip(n.freqs.tolist(), n.s):
        parts = [repr(f)]
        for i, j in order:
            v = complex(mat[i, j])
            parts += [repr(v.real), repr(v.imag)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def read(path: str | Path) -> NetworkData:
    path = Path(path)
    if path.suffix.lower() == ".ts":
        raise UnsupportedFormatError("Touchstone v2 (.ts) files are not supported")
    n_ports = {".s1p": 1, ".s2p": 2}.get(path.suffix.lower())
    return parse(path.read_text(), n_ports)


def s_to_y(n: NetworkData) -> np.ndarray:
    """Y = (1/z0) (I + S)^-1 (I - S) at every frequency."""
    eye = np.eye(n.n_ports)
    out = np.empty_like(n.s)
    for k, s in enumerate(n.s):
        a = eye + s
        if not np.isfinite(np.linalg.cond(a)) or np.linalg.cond(a) > 1e12:
            raise ConversionError(f"I + S is singular at {n.freqs[k]:.9g} Hz", float(n.freqs[k]))
        out[k] = np.linalg.solve(a, eye - s) / n.z0
    return out


def y_to_s(y: np.ndarray, z0: float) -> np.ndarray:
    """S = (I + z0 Y)^-1 (I - z0 Y) at every frequency."""
    y = np.asarray(y, dtype=complex)
    eye = np.eye(y.shape[1])
    out = np.empty_like(y)
    for k, yk in enumerate(y):
        a = eye + z0 * yk
        if not np.isfinite(np.linalg.cond(a)) or np.linalg.cond(a) > 1e12:
            raise ConversionError(f"I + z0*Y is singular at point {k}")
        out[k] = np.linalg.solve(a, eye - z0 * yk)
    return out


def reciprocity_asymmetry(y: np.ndarray) -> np.ndarray:
    y21, y12 = y[:, 1, 0], y[:, 0, 1]
    scale = np.maximum(np.abs(y21), np.finfo(float).tiny)
    return np.abs(y21 - y12) / scale


def series_through_admittance(y: np.ndarray) -> np.ndarray:
    """Admittance of a two-terminal device connected in series between ports 1 and 2: -Y21."""
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[1:] != (2, 2):
        raise ValueError("series-through extraction needs 2-port Y data")
    bad = int(np.sum(reciprocity_asymmetry(y) > RECIPROCITY_TOLERANCE))
    if bad:
        warnings.warn(f"{bad} points with |Y21 - Y12| above {RECIPROCITY_TOLERANCE:.0%} of |Y21|",
                      ReciprocityWarning, stacklevel=2)
    return -y[:, 1, 0]


def series_element_network(yd: np.ndarray, freqs: np.ndarray, z0: float = 50.0,
                           comments: tuple[str, ...] = ()) -> NetworkData:
    """2-port S-parameters of admittance ``yd`` in series between the ports."""
    yd = np.asarray(yd, dtype=complex)
    d = 1.0 + 2.0 * z0 * yd
    s11 = 1.0 / d
    s21 = 2.0 * z0 * yd / d
    s = np.empty((yd.size, 2, 2), dtype=complex)
    s[:, 0, 0] = s11
    s[:, 1, 1] = s11
    s[:, 1, 0] = s21
    s[:, 0, 1] = s21
    return NetworkData(np.asarray(freqs, dtype=float), s, z0, comments)


def one_port_network(y: np.ndarray, freqs: np.ndarray, z0: float = 50.0,
                     comments: tuple[str, ...] = ()) -> NetworkData:
    y = np.asarray(y, dtype=complex)
    s = (1.0 - z0 * y) / (1.0 + z0 * y)
    return NetworkData(np.asarray(freqs, dtype=float), s.reshape(-1, 1, 1), z0, comments)


def device_admittance(n: NetworkData) -> FrequencyResponse:
    """Device admittance: Y11 for one-port data, -Y21 for two-port data."""
    y = s_to_y(n)
    if n.n_ports == 1:
        return FrequencyResponse(n.freqs, y[:, 0, 0])
    return FrequencyResponse(n.freqs, series_through_admittance(y))
