"""Command-line front end.

Every command writes machine-readable CSV/JSON into ``--out`` and prints a
short human summary to stdout. Exit codes: 0 success, 1 usage or
configuration error, 2 parse error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import circuit, dispersion, extract, materials, touchstone, tuning
from .device import DeviceGeometry, calibrate_velocity, load_geometry, resonator_model
from .errors import ConfigurationError, ConversionError, FerroLambError, InsufficientDataError, ParseError

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_NONCONVERGED = 0, 1, 2, 3
SCHEMA_VERSION = 1
DEFAULT_GRID = (100e6, 1e9, 20001)
REFERENCE_LABEL = "BTO lateral overtone"  # reference-table row for this device class


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}, sort_keys=True) + "\n")
    return code


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(f"config schema_version must be {SCHEMA_VERSION}")
    return cfg


def _fixture(name: str) -> Path:
    path = materials.fixtures_dir() / name
    if not path.exists():
        raise ConfigurationError(f"fixture {name} not found in {path.parent}")
    return path


def _grid(args, cfg: dict) -> np.ndarray:
    if args.grid:
        try:
            start, stop, n = args.grid.split(",")
            start, stop, n = float(start), float(stop), int(n)
        except ValueError:
            raise UsageError("--grid expects start,stop,n") from None
    elif "grid" in cfg:
        g = cfg["grid"]
        start, stop, n = float(g["f_start"]), float(g["f_stop"]), int(g["n_points"])
    else:
        start, stop, n = DEFAULT_GRID
    if not (stop > start > 0 and n >= 2):
        raise ConfigurationError("grid needs f_stop > f_start > 0 and n_points >= 2")
    return np.linspace(start, stop, n)


def _record_or_fixture(cfg: dict, key: str, fixture: str) -> dict:
    val = cfg.get(key)
    if val is None:
        with open(_fixture(fixture)) as fh:
            return json.load(fh)
    if isinstance(val, str):
        with open(val) as fh:
            return json.load(fh)
    return val


def _device_model(dev: dict) -> circuit.ResonatorModel:
    geom_spec = dev.get("geometry", "design")
    if isinstance(geom_spec, str):
        geom = load_geometry(_fixture(f"geometry_{geom_spec}.json"))
    else:
        geom = DeviceGeometry.from_record(geom_spec)
    if "gap" in dev:
        geom = geom.with_gap(float(dev["gap"]))
    mats = materials.load_materials(dev.get("materials") or _fixture("materials.json"))
    stack = materials.build_stack(dev["stack"], mats) if "stack" in dev else \
        materials.bto_au_stack(geom.bto_thickness, geom.electrode_thickness, mats)
    plate = materials.homogenize(stack)
    cal = dev.get("calibration")
    if cal:
        v = calibrate_velocity(geom, float(cal["f_target"]), int(cal.get("index", 1)))
    else:
        v = dispersion.s0_thin_plate_velocity(plate)
    eps = float(dev.get("eps_r", plate.eps_eff_r))
    return resonator_model(geom, v, eps, float(dev.get("k2_peak", 0.08)), float(dev.get("q", 150.0)),
                           int(dev.get("n_max", 9)), float(dev.get("min_weight", 0.05)),
                           dev.get("f_max"))


def _write_response(fr: circuit.FrequencyResponse, out: Path, stem: str, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        _dump(path, {"freq_hz": fr.freqs.tolist(), "re_y_s": fr.y.real.tolist(), "im_y_s": fr.y.imag.tolist()})
    else:
        path = out / f"{stem}.csv"
        with open(path, "w", newline="") as fh:
            circuit.write_response_csv(fr, fh)
    return path


def _read_response(path: Path) -> circuit.FrequencyResponse:
    suffix = path.suffix.lower()
    if suffix in (".s1p", ".s2p", ".ts"):
        return touchstone.device_admittance(touchstone.read(path))
    if suffix == ".json":
        doc = json.loads(path.read_text())
        return circuit.FrequencyResponse(np.array(doc["freq_hz"]),
                                         np.array(doc["re_y_s"]) + 1j * np.array(doc["im_y_s"]))
    with open(path, newline="") as fh:
        return circuit.read_response_csv(fh)


# --- commands ----------------------------------------------------------------

def cmd_simulate(args, cfg: dict, out: Path) -> int:
    if "device" in cfg:
        model = _device_model(cfg["device"])
    else:
        model = circuit.ResonatorModel.from_record(_record_or_fixture(cfg, "model", "model_two_mode.json"))
    freqs = _grid(args, cfg)
    fr = circuit.synthesize(model, freqs)
    noise = float(cfg.get("noise", 0.0))
    if noise > 0:
        rng = np.random.default_rng(args.seed)
        sigma = noise * float(np.max(np.abs(fr.y)))
        fr = circuit.FrequencyResponse(freqs, fr.y + sigma * (rng.standard_normal(freqs.size)
                                                              + 1j * rng.standard_normal(freqs.size)))
    _write_response(fr, out, "response", args.format)
    if cfg.get("touchstone"):
        net = touchstone.series_element_network(fr.y, freqs, comments=(" ferrolamb simulate",))
        (out / "response.s2p").write_text(touchstone.write(net))
    modes = extract.measure_modes(fr)
    report = {
        "schema_version": SCHEMA_VERSION,
        "model": model.to_record(),
        "configured_modes": [
            {"fs_hz": b.fs, "fp_hz": circuit.parallel_resonance(b), "k2": b.k2, "q": b.q}
            for b in model.branches
        ],
        "measured_modes": modes,
        "seed": args.seed,
    }
    if modes and cfg.get("fit", True):
        # direct pair metrics carry neighbour-branch loading; the fit removes it
        rep = extract.fit_mbvd(fr, len(modes))
        report["fitted_modes"] = [
            {"fs_hz": b.fs, "fp_hz": circuit.parallel_resonance(b), "k2": b.k2, "q": b.q}
            for b in rep.model.branches
        ]
        report["fit_converged"] = rep.converged
    _dump(out / "metrics.json", report)
    print(f"simulate: {len(freqs)} points, {len(modes)} resonance(s) found")
    for m in modes:
        q = f"{m['q']:.1f}" if m["q"] is not None else "n/a"
        print(f"  fs={m['fs_hz'] / 1e6:.3f} MHz  fp={m['fp_hz'] / 1e6:.3f} MHz  k2={100 * m['k2']:.2f}%  Q={q}")
    return EXIT_OK


def _voltages(cfg: dict) -> list[float]:
    spec = cfg.get("voltages", {"start": 0.0, "stop": 30.0, "step": 1.0})
    if isinstance(spec, list):
        return [float(v) for v in spec]
    start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    n = int(round((stop - start) / step)) + 1
    return [start + i * step for i in range(n)]


def _reference_row() -> dict | None:
    try:
        path = _fixture("reference_devices.csv")
    except ConfigurationError:
        return None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["label"] == REFERENCE_LABEL:
                return row
    return None


def cmd_sweep(args, cfg: dict, out: Path) -> int:
    model = tuning.TuningModel.from_record(_record_or_fixture(cfg, "tuning", "tuning.json"))
    base = circuit.ResonatorModel.from_record(_record_or_fixture(cfg, "base_model", "model_two_mode.json"))
    volts = _voltages(cfg)
    freqs = _grid(args, cfg) if cfg.get("traces") else None
    sweep = tuning.simulate_sweep(model, base, volts, freqs)
    with open(out / "sweep.csv", "w", newline="") as fh:
        tuning.write_sweep_csv(sweep, fh)
    if sweep.traces is not None:
        for v, fr in zip(volts, sweep.traces):
            _write_response(fr, out, f"trace_{v:g}V", args.format)

    metric = cfg.get("metric", "fs")
    detect_mode = int(cfg.get("detect_mode", 0))
    summary: dict = {"schema_version": SCHEMA_VERSION, "metric": metric, "detect_mode": detect_mode,
                     "v_turn_model": model.v_turn, "voltages": volts, "flags": []}
    try:
        v_turn = tuning.detect_turning_voltage(sweep, metric, detect_mode)
        summary["v_turn_detected"] = v_turn
        if v_turn is None:
            summary["flags"].append("no_turning_point")
    except InsufficientDataError as exc:
        summary["v_turn_detected"] = None
        summary["flags"].append("insufficient_data_for_v_turn")
        summary["v_turn_note"] = str(exc)
        v_turn = None
    v_max = v_turn if v_turn is not None else model.v_turn
    ref_row = _reference_row()
    modes = []
    for i in sweep.modes:
        entry = {"mode_index": i, "v_max": v_max}
        try:
            entry["tunability_pct"] = tuning.tunability(sweep, i, v_max=v_max)
        except FerroLambError as exc:
            entry["tunability_pct"] = None
            entry["note"] = str(exc)
            if "insufficient_data_for_tunability" not in summary["flags"]:
                summary["flags"].append("insufficient_data_for_tunability")
        rows = [r for r in sweep.mode_rows(i) if r.v_dc <= v_max]
        top = max(rows, key=lambda r: r.k2) if rows else None
        if top is not None:
            entry["best"] = {"v_dc": top.v_dc, "fs_hz": top.fs, "fp_hz": top.fp, "k2": top.k2, "q": top.q}
        modes.append(entry)
    if ref_row is not None:
        f_ref = float(ref_row["f_ghz"]) * 1e9
        nearest = min(modes, key=lambda e: abs(e.get("best", {}).get("fs_hz", math.inf) - f_ref))
        nearest["reference_tuning_pct"] = float(ref_row["tuning_pct"])
    summary["modes"] = modes
    _dump(out / "summary.json", summary)
    print(f"sweep: {len(volts)} voltages, v_turn detected = {summary['v_turn_detected']}")
    for e in modes:
        ref = f" (reference {e['reference_tuning_pct']}%)" if "reference_tuning_pct" in e else ""
        t = e["tunability_pct"]
        print(f"  mode {e['mode_index']}: tunability = {'n/a' if t is None else f'{t:.3f}%'}{ref}")
    return EXIT_OK


def cmd_fit(args, cfg: dict, out: Path) -> int:
    inputs = args.inputs or ([cfg["input"]] if "input" in cfg else [])
    if len(inputs) != 1:
        raise UsageError("fit needs exactly one input file")
    path = Path(inputs[0])
    if not path.exists():
        raise ConfigurationError(f"input {path} not found")
    fr = _read_response(path)
    n_branches = args.branches or int(cfg.get("n_branches", 2))
    init = circuit.ResonatorModel.from_record(cfg["init"]) if "init" in cfg else None
    report = extract.fit_mbvd(fr, n_branches, init, int(cfg.get("max_iterations", 500)))
    _dump(out / "fit_report.json", report.to_record())
    fitted = circuit.synthesize(report.model, fr.freqs)
    with open(out / "overlay.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "re_y_data_s", "im_y_data_s", "re_y_model_s", "im_y_model_s"])
        for f, yd, ym in zip(fr.freqs.tolist(), fr.y.tolist(), fitted.y.tolist()):
            w.writerow([repr(f), repr(yd.real), repr(yd.imag), repr(ym.real), repr(ym.imag)])
    print(f"fit: {n_branches} branch(es), converged={report.converged}, "
          f"iterations={report.iterations}, rms={report.residual_rms:.3e} S")
    for i, b in enumerate(report.model.branches):
        tag = " (inert)" if i in report.inert_branches else ""
        print(f"  branch {i}: fs={b.fs / 1e6:.4f} MHz  k2={100 * b.k2:.3f}%  Q={b.q:.1f}{tag}")
    if not report.converged:
        return _fail("NonConvergence", "; ".join(report.diagnostics) or "fit did not converge",
                     EXIT_NONCONVERGED)
    return EXIT_OK


def cmd_ingest(args, cfg: dict, out: Path) -> int:
    patterns = args.inputs or cfg.get("inputs", [])
    paths = sorted({p for pat in patterns for p in (glob.glob(pat) or [pat])})
    if not paths:
        raise UsageError("ingest needs at least one input file or glob")
    failures = 0
    results = []
    for p in paths:
        path = Path(p)
        side = {"source": str(path), "status": "ok"}
        try:
            net = touchstone.read(path)
            side.update(n_ports=net.n_ports, n_points=int(net.freqs.size), z0=net.z0,
                        source_format=net.source_format, freq_unit_declared=net.freq_unit_declared,
                        comments=list(net.comments))
            y = touchstone.s_to_y(net)
            if net.n_ports == 2:
                asym = touchstone.reciprocity_asymmetry(y)
                side["reciprocity_max_asymmetry"] = float(np.max(asym))
                side["reciprocity_flagged"] = bool(np.max(asym) > touchstone.RECIPROCITY_TOLERANCE)
                fr = circuit.FrequencyResponse(net.freqs, -y[:, 1, 0])
            else:
                fr = circuit.FrequencyResponse(net.freqs, y[:, 0, 0])
            side["output"] = _write_response(fr, out, f"{path.stem}_admittance", args.format).name
        except (OSError, ParseError, ConversionError) as exc:
            failures += 1
            side.update(status="error", error=type(exc).__name__, message=str(exc))
        _dump(out / f"{path.stem}.json", side)
        results.append(side)
        print(f"ingest: {path} -> {side['status']}")
    _dump(out / "ingest_summary.json", {"schema_version": SCHEMA_VERSION, "files": results})
    if failures:
        return _fail("ParseError", f"{failures} of {len(paths)} file(s) failed to parse", EXIT_PARSE)
    return EXIT_OK


def cmd_dispersion(args, cfg: dict, out: Path) -> int:
    mats = materials.load_materials(cfg.get("materials") or _fixture("materials.json"))
    stack = materials.build_stack(cfg["stack"], mats) if "stack" in cfg else materials.bto_au_stack(materials=mats)
    plate = materials.homogenize(stack)
    spec = cfg.get("fd", {"start": 1.0, "stop": 1000.0, "n": 200})
    fd = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["n"]))
    curve = dispersion.rayleigh_lamb_s0(plate, fd)
    with open(out / "dispersion.csv", "w", newline="") as fh:
        dispersion.write_csv(curve, fh)
    v_thin = dispersion.s0_thin_plate_velocity(plate)
    c_l, c_t = dispersion.isotropic_velocities(plate)
    _dump(out / "dispersion.json", {
        "schema_version": SCHEMA_VERSION,
        "thin_plate_velocity_m_s": v_thin,
        "longitudinal_velocity_m_s": c_l,
        "shear_velocity_m_s": c_t,
        "unresolved_fd": list(curve.unresolved),
        "n_points": int(curve.fd.size),
    })
    print(f"dispersion: v_thin = {v_thin:.1f} m/s, {curve.fd.size} points, {len(curve.unresolved)} unresolved")
    return EXIT_OK


TABLE_COLUMNS = ["label", "material", "excitation", "f_ghz", "q", "k2_pct", "tuning_pct", "multi_f"]


def _report_rows(doc: dict) -> list[dict]:
    rows = []
    if "model" in doc:  # fit report
        inert = set(doc.get("inert_branches", []))
        for i, b in enumerate(doc["model"].get("branches", [])):
            if i in inert or b["k2"] == 0:
                continue
            rows.append({"label": f"This run mode {i}", "material": doc.get("material", "BTO"),
                         "excitation": "Lateral", "f_ghz": b["fs"] / 1e9, "q": b["q"],
                         "k2_pct": 100 * b["k2"], "tuning_pct": doc.get("tuning_pct", ""), "multi_f": "Y"})
    elif "modes" in doc:  # sweep summary
        for e in doc["modes"]:
            best = e.get("best")
            if not best or best["k2"] == 0:
                continue
            t = e.get("tunability_pct")
            rows.append({"label": f"This run mode {e['mode_index']}", "material": doc.get("material", "BTO"),
                         "excitation": "Lateral", "f_ghz": best["fs_hz"] / 1e9, "q": best["q"],
                         "k2_pct": 100 * best["k2"], "tuning_pct": "" if t is None else t, "multi_f": "Y"})
    return rows


def _fom(row: dict) -> float:
    try:
        return float(row["q"]) * float(row["k2_pct"]) / 100.0
    except (TypeError, ValueError):
        return -math.inf


def cmd_compare(args, cfg: dict, out: Path) -> int:
    table_path = Path(cfg["reference_table"]) if "reference_table" in cfg else _fixture("reference_devices.csv")
    if not table_path.exists():
        raise ConfigurationError(f"reference table {table_path} not found")
    table_text = table_path.read_text()
    reference = list(csv.DictReader(io.StringIO(table_text)))
    new_rows = []
    for p in args.inputs or cfg.get("inputs", []):
        try:
            new_rows += _report_rows(json.loads(Path(p).read_text()))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{p}: not valid JSON ({exc})") from None
    target = out / "comparison.csv"
    if not new_rows:
        target.write_text(table_text)
        print("compare: no report rows; reference table echoed")
        return EXIT_OK
    merged = [dict(r, source="reference") for r in reference] + [dict(r, source="report") for r in new_rows]
    ranked = sorted(merged, key=lambda r: -_fom(r))  # stable: ties keep reference rows first
    with open(target, "w", newline="") as fh:
        w = csv.DictWriter(fh, ["rank", *TABLE_COLUMNS, "fom_q_k2", "source"], lineterminator="\n")
        w.writeheader()
        for rank, r in enumerate(ranked, start=1):
            row = {k: r.get(k, "") for k in TABLE_COLUMNS}
            for k in ("f_ghz", "q", "k2_pct", "tuning_pct"):
                if isinstance(row[k], float):
                    row[k] = f"{row[k]:.6g}"
            fom = _fom(r)
            w.writerow({"rank": rank, **row, "fom_q_k2": "" if fom == -math.inf else f"{fom:.6g}",
                        "source": r["source"]})
    print(f"compare: {len(new_rows)} report row(s) ranked against {len(reference)} reference rows")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "ingest": cmd_ingest,
    "dispersion": cmd_dispersion,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ferrolamb", description="Ferroelectric Lamb-mode resonator toolkit")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("inputs", nargs="*", help="input files or globs (fit, ingest, compare)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", help="frequency grid start,stop,n (Hz)")
    p.add_argument("--branches", type=int, help="number of mBVD branches to fit")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_CONFIG)
    try:
        cfg = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_CONFIG)
    except ParseError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_PARSE)
    except ConversionError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_PARSE)
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
