import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ferrolamb.circuit import (
    FrequencyResponse, ModalBranch, ResonatorModel, branch_admittance, branch_rlc,
    parallel_resonance, read_response_csv, synthesize, write_response_csv,
)
from ferrolamb.errors import ConfigurationError, ParseError
from ferrolamb.extract import k2_from_pair


def test_rlc_300mhz_mode():
    r, l, c = branch_rlc(ModalBranch(300e6, 0.08, 150.0), 1e-12)
    c_ref = 1e-12 * 0.08 * 8 / math.pi**2
    w = 2 * math.pi * 300e6
    assert c == pytest.approx(c_ref, rel=1e-14, abs=0)
    assert l == pytest.approx(1 / (w * w * c_ref), rel=1e-14, abs=0)
    assert r == pytest.approx(w * l / 150, rel=1e-14, abs=0)
    assert c == pytest.approx(64.846e-15, rel=1e-4, abs=0)
    assert l == pytest.approx(4.3403e-6, rel=1e-4, abs=0)
    assert r == pytest.approx(54.54, rel=1e-3, abs=0)


def test_inert_and_lossless_branches():
    r, l, c = branch_rlc(ModalBranch(300e6, 0.0, 150.0), 1e-12)
    assert (r, l, c) == (math.inf, math.inf, 0.0)
    assert np.all(branch_admittance(ModalBranch(300e6, 0.0, 150.0), 1e-12, [1e8, 3e8]) == 0)
    r_hi = branch_rlc(ModalBranch(300e6, 0.08, 1e300), 1e-12)[0]
    assert r_hi < 1e-290


@pytest.mark.parametrize("fs,k2,fp_ref", [(300e6, 0.08, 309.574e6), (700e6, 0.03, 708.46e6)])
def test_parallel_resonance_values(fs, k2, fp_ref):
    fp = parallel_resonance(ModalBranch(fs, k2, 150.0), 1e-12)
    assert fp == pytest.approx(fp_ref, rel=2e-6, abs=0)
    assert k2_from_pair(fs, fp) == pytest.approx(k2, rel=1e-12, abs=0)


def test_parallel_resonance_degenerate():
    assert parallel_resonance(ModalBranch(300e6, 0.0, 10.0)) == 300e6


@pytest.mark.parametrize("kwargs", [
    {"fs": 0.0}, {"k2": -0.1}, {"k2": 1.0}, {"q": 0.0},
])
def test_branch_invariants(kwargs):
    args = {"fs": 1e8, "k2": 0.05, "q": 100.0, **kwargs}
    with pytest.raises(ConfigurationError):
        ModalBranch(**args)


def test_model_invariants():
    b = ModalBranch(1e8, 0.05, 100.0)
    with pytest.raises(ConfigurationError):
        ResonatorModel(0.0)
    with pytest.raises(ConfigurationError):
        ResonatorModel(1e-12, -1.0)
    with pytest.raises(ConfigurationError):
        ResonatorModel(1e-12, 0.0, (b, b))
    m = ResonatorModel(1e-12, 2.0, (b,))
    assert ResonatorModel.from_record(m.to_record()) == m


def test_response_invariants():
    with pytest.raises(ValueError):
        FrequencyResponse(np.array([1.0, 2.0]), np.array([1j]))
    with pytest.raises(ValueError):
        FrequencyResponse(np.array([0.0, 1.0]), np.array([1j, 1j]))
    with pytest.raises(ValueError):
        FrequencyResponse(np.array([2.0, 1.0]), np.array([1j, 1j]))


def test_empty_model_is_capacitor():
    f = np.linspace(1e8, 1e9, 101)
    fr = synthesize(ResonatorModel(1e-12), f)
    assert np.array_equal(np.abs(fr.y), 2 * np.pi * f * 1e-12)


def test_single_branch_extrema_dense_scan():
    b = ModalBranch(300e6, 0.08, 150.0)
    f = np.linspace(280e6, 330e6, 200_001)
    mag = np.abs(synthesize(ResonatorModel(1e-12, 0.0, (b,)), f).y)
    i_max = int(np.argmax(mag))
    i_min = i_max + int(np.argmin(mag[i_max:]))
    assert 0 < i_max < i_min < f.size - 1
    assert abs(f[i_max] - b.fs) / b.fs < 1e-3
    assert abs(f[i_min] - parallel_resonance(b)) / b.fs < 1e-3


def test_two_branch_pairs_do_not_overlap(two_mode_model, wide_grid):
    mag = np.abs(synthesize(two_mode_model, wide_grid).y)
    inner = mag[1:-1]
    peaks = wide_grid[1:-1][(inner > mag[:-2]) & (inner > mag[2:])]
    dips = wide_grid[1:-1][(inner < mag[:-2]) & (inner < mag[2:])]
    assert len(peaks) == 2 and len(dips) == 2
    assert peaks[0] < dips[0] < peaks[1] < dips[1]


def test_lossless_sign_structure():
    b = ModalBranch(300e6, 0.08, 1e12)
    m = ResonatorModel(1e-12, 0.0, (b,))
    fp = parallel_resonance(b)
    lo, hi = synthesize(m, [fp * (1 - 5e-7), fp * (1 + 5e-7)]).y.imag
    assert lo < 0 < hi
    y_lo, y_hi = synthesize(m, [b.fs * (1 - 5e-7), b.fs * (1 + 5e-7)]).y.imag
    assert y_lo > 0 > y_hi
    assert min(abs(y_lo), abs(y_hi)) > 1e3 * 2 * math.pi * b.fs * 1e-12


def test_superposition(two_mode_model, wide_grid):
    both = synthesize(two_mode_model, wide_grid).y
    parts = [synthesize(ResonatorModel(1e-12, 0.0, (b,)), wide_grid).y for b in two_mode_model.branches]
    cap = 1j * 2 * np.pi * wide_grid * 1e-12
    recon = parts[0] + parts[1] - cap
    assert np.max(np.abs(recon - both) / np.abs(both)) < 1e-12


def test_rs_shunt_folding(two_mode_model, wide_grid):
    m = ResonatorModel(two_mode_model.c0, 5.0, two_mode_model.branches)
    y0 = synthesize(two_mode_model, wide_grid).y
    y = synthesize(m, wide_grid).y
    assert np.allclose(1 / y, 5.0 + 1 / y0, rtol=1e-13)


@settings(max_examples=80)
@given(st.floats(1e8, 1e9), st.floats(0.0, 0.2), st.floats(5.0, 1000.0),
       st.floats(1e-13, 1e-11), st.floats(0.0, 20.0))
def test_passivity(fs, k2, q, c0, rs):
    m = ResonatorModel(c0, rs, (ModalBranch(fs, k2, q), ModalBranch(1.7 * fs, k2 / 2, q)))
    y = synthesize(m, np.linspace(0.3 * fs, 3 * fs, 2001)).y
    assert np.all(y.real >= 0)


def test_bitwise_deterministic(two_mode_model, wide_grid):
    a = synthesize(two_mode_model, wide_grid).y
    b = synthesize(two_mode_model, wide_grid.copy()).y
    assert a.tobytes() == b.tobytes()


def test_csv_round_trip(two_mode_model):
    fr = synthesize(two_mode_model, np.linspace(1e8, 1e9, 301))
    buf = io.StringIO()
    write_response_csv(fr, buf)
    assert buf.getvalue().splitlines()[0] == "freq_hz,re_y_s,im_y_s"
    back = read_response_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.freqs, fr.freqs)
    assert np.array_equal(back.y, fr.y)


@pytest.mark.parametrize("text", ["", "freq_hz,re_y_s,im_y_s\n", "a,b,c\n1,2,3\n",
                                  "freq_hz,re_y_s,im_y_s\n1e8,x,0\n",
                                  "freq_hz,re_y_s,im_y_s\n2e8,0,1\n1e8,0,1\n"])
def test_csv_errors(text):
    with pytest.raises(ParseError):
        read_response_csv(io.StringIO(text))
