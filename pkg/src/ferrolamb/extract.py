"""Inverse path: resonance location, coupling, 3-dB quality factor, mBVD fitting.

Series-resonance quantities are read from the conductance Re(Y). A motional
branch's conductance peaks exactly at fs. Its half-power band is also the
3-dB band of the motional admittance magnitude, because G = R |Y_m|^2. Raw
|Y| carries the static-capacitance background, which pulls the peak below
fs and skews the 3-dB band, so the raw-magnitude variant is only an option.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import K2_FACTOR, FrequencyResponse, ModalBranch, ResonatorModel
from .errors import ExtractionError

log = logging.getLogger(__name__)

MIN_RESONANCE_SAMPLES = 10


@dataclass(frozen=True)
class ResonancePair:
    fs: float
    fp: float
    peak_mag: float
    dip_mag: float

    def __post_init__(self):
        if not self.fp > self.fs > 0:
            raise ValueError(f"need fp > fs > 0, got fs={self.fs}, fp={self.fp}")

    @property
    def k2(self) -> float:
        return k2_from_pair(self.fs, self.fp)


@dataclass
class FitReport:
    model: ResonatorModel
    residual_rms: float
    iterations: int
    converged: bool
    inert_branches: list[int] = field(default_factory=list)
    cost_trace: list[float] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    max_iterations: int = 500

    def to_record(self) -> dict:
        return {
            "schema_version": 1,
            "model": self.model.to_record(),
            "residual_rms": self.residual_rms,
            "iterations": self.iterations,
            "converged": self.converged,
            "max_iterations": self.max_iterations,
            "inert_branches": list(self.inert_branches),
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)


def k2_from_pair(fs: float, fp: float) -> float:
    """Coupling from a series/parallel pair: (pi^2/8) (fp^2/fs^2 - 1)."""
    if not fs > 0:
        raise ValueError(f"fs must be > 0, got {fs}")
    if fp < fs:
        raise ValueError(f"fp ({fp}) is below fs ({fs}); arguments out of order?")
    # factored form avoids cancelling against 1 for small splits
    return (math.pi**2 / 8.0) * ((fp - fs) * (fp + fs)) / (fs * fs)


def capacitive_baseline(fr: FrequencyResponse) -> float:
    """Robust static-capacitance estimate: median of Im(Y)/omega."""
    return float(np.median(fr.y.imag / fr.omega))


def _vertex(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Abscissa of the parabola through samples i-1, i, i+1."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a == 0:
        return float(x1)
    xv = -b / (2 * a)
    # stay inside the bracketing samples
    return float(min(max(xv, x0), x2))


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges of consecutive True values."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def find_resonances(fr: FrequencyResponse, min_prominence: float = 3.0,
                    diagnostics: list[str] | None = None) -> list[ResonancePair]:
    """Locate (fs, fp) pairs in ascending order.

    Candidate peaks are runs of at least ``MIN_RESONANCE_SAMPLES`` samples
    where |Y| sits more than ``min_prominence`` dB above the capacitive
    baseline omega*c0. In each run the conductance maximum is refined by a
    parabola through 1/G, which is exactly quadratic in the motional
    reactance. The following antiresonance is the |Y| minimum before the next
    run, refined by a parabola through |Y|^2.
    """
    diag = diagnostics if diagnostics is not None else []
    f, y, w = fr.freqs, fr.y, fr.omega
    c0 = capacitive_baseline(fr)
    if not c0 > 0:
        diag.append("non-positive capacitive baseline; no resonances reported")
        return []
    mag = np.abs(y)
    ratio_db = 20 * np.log10(np.maximum(mag, 1e-300) / (w * c0))
    runs = [r for r in _runs(ratio_db > min_prominence) if r[1] - r[0] >= MIN_RESONANCE_SAMPLES]

    pairs = []
    for k, (start, stop) in enumerate(runs):
        g = y.real[start:stop]
        j = start + int(np.argmax(g))
        if j == 0 or j == len(f) - 1:
            diag.append(f"peak at grid edge ({f[j]:.6g} Hz) dropped")
            continue
        if y.real[j] > 0 and y.real[j - 1] > 0 and y.real[j + 1] > 0:
            fs = _vertex(f, 1.0 / y.real, j)
        else:
            fs = float(f[j])
        seg_end = runs[k + 1][0] if k + 1 < len(runs) else len(f)
        if seg_end - stop < 3:
            diag.append(f"no antiresonance between {f[j]:.6g} Hz and the next peak; pair dropped")
            continue
        m = stop + int(np.argmin(mag[stop:seg_end]))
        if ratio_db[m] >= 0 or m == len(f) - 1:
            diag.append(f"no antiresonance dip after {fs:.6g} Hz; pair dropped")
            continue
        fp = _vertex(f, mag**2, m)
        if not fp > fs:
            diag.append(f"antiresonance not above series resonance at {fs:.6g} Hz; pair dropped")
            continue
        pairs.append(ResonancePair(fs, fp, float(mag[j]), float(mag[m])))
    for msg in diag:
        log.info(msg)
    return pairs


def _crossing(x0, x1, y0, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def q_3db(fr: FrequencyResponse, f0: float, mode: str = "series") -> float:
    """Quality factor f0 / (3-dB bandwidth) around the peak nearest ``f0``.

    ``mode`` selects the curve: ``"series"`` uses conductance Re(Y) at half
    power (default), ``"magnitude"`` uses raw |Y| at 1/sqrt(2) of the peak,
    and ``"parallel"`` uses resistance Re(Z) at half power around fp.
    Crossings are linearly interpolated between samples.
    """
    if mode == "series":
        curve, frac = fr.y.real, 0.5
    elif mode == "magnitude":
        curve, frac = np.abs(fr.y), 1 / math.sqrt(2)
    elif mode == "parallel":
        curve, frac = fr.z.real, 0.5
    else:
        raise ValueError(f"unknown mode {mode!r}")
    f = fr.freqs
    if not f[0] <= f0 <= f[-1]:
        raise ExtractionError(f"{f0:.6g} Hz is outside the grid")
    i = int(np.argmin(np.abs(f - f0)))
    # climb to the local maximum
    while 0 < i < len(f) - 1:
        if curve[i + 1] > curve[i]:
            i += 1
        elif curve[i - 1] > curve[i]:
            i -= 1
        else:
            break
    peak = curve[i]
    level = frac * peak
    lo = i
    while lo > 0 and curve[lo] >= level:
        lo -= 1
    hi = i
    while hi < len(f) - 1 and curve[hi] >= level:
        hi += 1
    if curve[lo] >= level or curve[hi] >= level:
        raise ExtractionError(f"unresolved Q: 3-dB points at {f0:.6g} Hz not bracketed by the grid")
    if hi - lo - 1 < 3:
        raise ExtractionError(f"unresolved Q: peak at {f0:.6g} Hz spans fewer than 3 samples")
    f_lo = _crossing(f[lo], f[lo + 1], curve[lo], curve[lo + 1], level)
    f_hi = _crossing(f[hi - 1], f[hi], curve[hi - 1], curve[hi], level)
    return f0 / (f_hi - f_lo)


def conductance_peaks(fr: FrequencyResponse, min_ratio: float = 10.0) -> list[tuple[float, float]]:
    """(frequency, peak conductance) of Re(Y) maxima standing ``min_ratio`` above
    the median |Re(Y)|. Catches modes too weak to lift |Y| off the capacitive line."""
    g = fr.y.real
    floor = float(np.median(np.abs(g)))
    out = []
    for i in range(1, g.size - 1):
        if g[i] > g[i - 1] and g[i] >= g[i + 1] and g[i] > min_ratio * floor:
            out.append((float(fr.freqs[i]), float(g[i])))
    return out


def measure_modes(fr: FrequencyResponse, min_prominence: float = 3.0) -> list[dict]:
    """Direct per-mode metrics: fs, fp, k2 by the pair formula, Q at 3 dB."""
    out = []
    for p in find_resonances(fr, min_prominence):
        try:
            q = q_3db(fr, p.fs)
        except ExtractionError:
            q = None
        out.append({"fs_hz": p.fs, "fp_hz": p.fp, "k2": p.k2, "q": q})
    return out


# --- mBVD least squares -----------------------------------------------------

def _model_and_jacobian(theta: np.ndarray, w: np.ndarray, n_active: int, fit_rs: bool,
                        rs_fixed: float, want_jac: bool = True):
    c0 = math.exp(theta[0])
    rs = math.exp(theta[1]) if fit_rs else rs_fixed
    br = np.exp(theta[2:].reshape(n_active, 3)) if n_active else np.zeros((0, 3))
    base = 1j * w * c0
    yp = base.copy()
    cols = []
    dyp_dc0 = base.copy()
    for fs, k2, q in br:
        wn = 2 * math.pi * fs
        cn = c0 * K2_FACTOR * k2
        g = 1.0 / (wn * q) + 1j * (w / wn**2 - 1.0 / w)
        yn = cn / g
        yp += yn
        dyp_dc0 += yn
        if want_jac:
            cols.append(yn / g * (1.0 / (wn * q) + 2j * w / wn**2))  # d/dlog fs
            cols.append(yn)  # d/dlog k2
            cols.append(yn / (g * wn * q))  # d/dlog q
    denom = 1.0 + rs * yp
    y = yp / denom
    if not want_jac:
        return y, None
    chain = 1.0 / denom**2
    jac = np.empty((w.size, 2 + 3 * n_active), dtype=complex)
    jac[:, 0] = chain * dyp_dc0
    jac[:, 1] = -rs * yp**2 * chain if fit_rs else 0.0
    for i, col in enumerate(cols):
        jac[:, 2 + i] = chain * col
    return y, jac


def _initial_guess(fr: FrequencyResponse, n_branches: int, diag: list[str]) -> tuple[ResonatorModel, list[int]]:
    c0 = capacitive_baseline(fr)
    if not c0 > 0:
        c0 = float(np.max(np.abs(fr.y) / fr.omega))
        diag.append("capacitive baseline not positive; c0 initialized from |Y|/omega")
    pairs = find_resonances(fr, diagnostics=diag)
    if len(pairs) > n_branches:
        pairs = sorted(sorted(pairs, key=lambda p: -p.peak_mag)[:n_branches], key=lambda p: p.fs)
    branches = []
    for p in pairs:
        try:
            q = q_3db(fr, p.fs)
        except ExtractionError as exc:
            diag.append(f"{exc}; Q initialized to 100")
            q = 100.0
        branches.append(ModalBranch(p.fs, min(max(p.k2, 1e-6), 0.5), q))
    if len(branches) < n_branches:
        # weak modes: seed from conductance peaks, k2 from 1/R = omega_s * C * q
        taken = [b.fs for b in branches]
        extra = []
        for f0, g_pk in conductance_peaks(fr):
            if any(abs(f0 - t) < 0.01 * t for t in taken):
                continue
            try:
                q = q_3db(fr, f0)
            except ExtractionError:
                continue
            k2 = g_pk / (2 * math.pi * f0 * q) / (K2_FACTOR * c0)
            extra.append((g_pk, ModalBranch(f0, min(max(k2, 1e-6), 0.5), q)))
        extra.sort(key=lambda e: -e[0])
        for _, b in extra[: n_branches - len(branches)]:
            diag.append(f"weak mode near {b.fs:.6g} Hz seeded from conductance")
            branches.append(b)
        branches.sort(key=lambda b: b.fs)
    inert = []
    f_top = float(fr.freqs[-1])
    for i in range(n_branches - len(branches)):
        branches.append(ModalBranch(f_top * (1.0 + 1e-3 * (i + 1)), 0.0, 100.0))
        inert.append(len(branches) - 1)
    if inert:
        diag.append(f"{len(inert)} surplus branch(es) have no detected resonance; kept inert")
    z_re = np.median((1.0 / fr.y).real)
    rs = float(z_re) if z_re > 0 else 0.0
    return ResonatorModel(c0, rs, tuple(branches)), inert


def fit_mbvd(fr: FrequencyResponse, n_branches: int, init: ResonatorModel | None = None,
             max_iterations: int = 500, fit_rs: bool | None = None,
             ftol: float = 1e-10, xtol: float = 1e-12, gtol: float = 1e-10) -> FitReport:
    """Least-squares fit of a multi-branch mBVD model to complex admittance.

    Minimizes the summed squared complex residual over log-transformed
    parameters (c0, rs, and fs, k2, q per branch) with a Levenberg-Marquardt
    schedule. Branches with k2 = 0 in the initial model stay inert and are
    excluded from the parameter vector. ``fit_rs=None`` fits the series
    resistance unless the initial model has exactly zero.
    """
    if n_branches < 1:
        raise ValueError("n_branches must be >= 1")
    diag: list[str] = []
    if init is None:
        init, inert = _initial_guess(fr, n_branches, diag)
    else:
        if len(init.branches) != n_branches:
            raise ValueError("init model branch count does not match n_branches")
        inert = [i for i, b in enumerate(init.branches) if b.inert]
    active = [i for i in range(n_branches) if i not in inert]
    if fit_rs is None:
        fit_rs = init.rs_shunt > 0
    rs_fixed = init.rs_shunt
    rs0 = init.rs_shunt if init.rs_shunt > 0 else 1e-9

    theta = [math.log(init.c0), math.log(rs0)]
    for i in active:
        b = init.branches[i]
        theta += [math.log(b.fs), math.log(b.k2), math.log(min(b.q, 1e12))]
    theta = np.array(theta)
    w = fr.omega
    data = fr.y
    n_act = len(active)

    def residual(th, jac=True):
        y, j = _model_and_jacobian(th, w, n_act, fit_rs, rs_fixed, jac)
        r = np.concatenate([(y - data).real, (y - data).imag])
        if j is None:
            return r, None
        return r, np.vstack([j.real, j.imag])

    r, J = residual(theta)
    cost = float(r @ r)
    trace = [cost]
    lam = 1e-3
    nu = 2.0
    converged = False
    iterations = 0
    last_rel = math.inf
    # below this the residual is floating-point rounding of the model itself
    floor = (1e4 * np.finfo(float).eps) ** 2 * float(np.sum(np.abs(data) ** 2))
    while iterations < max_iterations:
        if cost <= floor:
            converged = True
            break
        iterations += 1
        norms = np.sqrt(np.sum(J * J, axis=0))
        norms[norms == 0] = 1.0
        js = J / norms
        g = js.T @ r
        if np.max(np.abs(g)) <= gtol * math.sqrt(cost):
            # residual orthogonal to every column: stationary point
            converged = True
            break
        a = js.T @ js
        try:
            step_s = np.linalg.solve(a + lam * np.eye(a.shape[0]), -g)
        except np.linalg.LinAlgError:
            lam *= nu
            nu *= 2
            continue
        step = step_s / norms
        if not fit_rs:
            step[1] = 0.0
        predicted = -(2 * g @ step_s + step_s @ a @ step_s)
        trial = theta + step
        with np.errstate(over="ignore", invalid="ignore"):
            r_new, _ = residual(trial, jac=False)
        cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(theta) + xtol)
        if cost_new < cost:
            rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
            rel_actual = (cost - cost_new) / cost
            rel_pred = predicted / cost
            last_rel = rel_actual
            theta = trial
            r, J = residual(theta)
            cost = cost_new
            trace.append(cost)
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if small_step or (rel_actual < ftol and rel_pred < ftol and lam < 1.0):
                converged = True
                break
        else:
            if small_step:
                converged = True
                break
            lam *= nu
            nu *= 2.0
            if lam > 1e20:
                # no descent direction left; fine if progress had already stalled
                converged = last_rel < ftol
                if not converged:
                    diag.append("damping diverged before convergence")
                break
    if not converged:
        diag.append(f"no convergence after {iterations} iterations")

    c0 = math.exp(theta[0])
    rs = math.exp(theta[1]) if fit_rs else rs_fixed
    branches = list(init.branches)
    for slot, i in enumerate(active):
        fs, k2, q = np.exp(theta[2 + 3 * slot: 5 + 3 * slot])
        if k2 >= 1:
            diag.append(f"branch {i}: fitted k2 {k2:.4g} clipped below 1")
            k2 = 0.999
            converged = False
        branches[i] = ModalBranch(float(fs), float(k2), float(q))
    model = ResonatorModel(c0, rs, tuple(branches))
    rms = math.sqrt(cost / data.size)
    for msg in diag:
        log.info(msg)
    return FitReport(model, rms, iterations, converged, inert, trace, diag, max_iterations)


def branch_error(fitted: Sequence[ModalBranch], truth: Sequence[ModalBranch]) -> list[dict]:
    """Relative parameter errors of fitted branches matched to truth by fs."""
    out = []
    for t in truth:
        b = min(fitted, key=lambda x: abs(x.fs - t.fs))
        out.append({
            "fs": abs(b.fs - t.fs) / t.fs,
            "k2": abs(b.k2 - t.k2) / t.k2 if t.k2 else abs(b.k2),
            "q": abs(b.q - t.q) / t.q,
        })
    return out
