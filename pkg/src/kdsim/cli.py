"""Command-line front end.

Configuration files are TOML with unit-suffixed keys, one table per stage::

    [beam]
    energy_ev = 2500

    [source]
    slit1_width_m = 6.7e-6

    [plate]
    height_m = 2e-6        # omit (or set to inf) for no plate

    [laser]
    intensity_w_m2 = 1e14

Every key is optional and defaults to :class:`ExperimentConfig`; unknown
tables or keys are errors.  Outputs are written to a fresh directory (named
after the config hash unless ``--out`` is given) only once the whole command
has succeeded.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy
import tomli

from . import __version__
from .coherence_analysis import CalibrationError, calibrate_source_width
from .oracles import grid_from_env, verify_suite
from .params import ExperimentConfig, NumericalGrid, PlaneGrid
from .pattern_analysis import DEFAULT_PROMINENCE, PeakSet, find_peaks, peak_shift
from .simulation import RunResult, run_experiment
from .wave_optics import SamplingError
from .zurek_model import DEFAULT_DELTA_X_REF, InvalidRunError

PATTERN_COLUMNS = ("position_m", "density_per_m")
METRIC_COLUMNS = ("run_id", "h_p_m", "intensity_w_m2", "w1_m", "delta_e_ev", "r_dec",
                  "contrast", "peak13_shift_rel")

_CONFIG_KEYS = {
    "beam": {"energy_ev": "beam_energy"},
    "source": {"slit1_width_m": "slit1_width", "dist_source_slit2_m": "dist_source_slit2"},
    "slit": {"slit2_width_m": "slit2_width"},
    "plate": {
        "height_m": "plate_height", "length_m": "plate_length",
        "dist_slit2_plate_m": "dist_slit2_plate", "resistivity_ohm_m": "resistivity",
        "temperature_k": "temperature",
    },
    "laser": {
        "wavelength_m": "laser_wavelength", "waist_m": "laser_waist",
        "intensity_w_m2": "laser_intensity", "offset_m": "laser_offset",
        "crossing_time_s": "laser_crossing_time", "dist_plate_laser_m": "dist_plate_laser",
        "dist_laser_screen_m": "dist_laser_screen",
    },
    "detector": {"sigma_m": "detection_slit"},
}
_GRID_PLANES = ("source", "slit", "plate", "laser", "screen")
_GRID_KEYS = {"method": str, "source_points": int, "source_extent": float}
_GRID_KEYS.update({f"{p}_window_m": float for p in _GRID_PLANES})
_GRID_KEYS.update({f"{p}_samples": int for p in _GRID_PLANES})
_ANALYSIS_KEYS = {
    "delta_x_ref_m": float, "baseline_slit1_width_m": float, "contrast_order": int,
    "shift_order": int, "prominence": float,
}

SWEEP_AXES = {"h_p": "plate_height", "intensity": "laser_intensity",
              "resistivity": "resistivity", "w1": "slit1_width"}


class CliError(Exception):
    """Error reported to the user with a nonzero exit status."""

    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class AnalysisSettings:
    delta_x_ref: float = DEFAULT_DELTA_X_REF
    baseline_slit1_width: float = ExperimentConfig.slit1_width
    contrast_order: int = 2
    shift_order: int = 13
    prominence: float = DEFAULT_PROMINENCE


@dataclass(frozen=True)
class LoadedConfig:
    experiment: ExperimentConfig
    analysis: AnalysisSettings
    digest: str


# ---------------------------------------------------------------- config

def _number(where: str, value: Any, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CliError(f"{where}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise CliError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def config_digest(tree: dict) -> str:
    """SHA-256 of the parsed config, independent of key order and layout."""
    canon = json.dumps(tree, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_config(tree: dict) -> LoadedConfig:
    fields: dict[str, Any] = {}
    grid_kw: dict[str, Any] = {}
    analysis_kw: dict[str, Any] = {}
    for section, body in tree.items():
        if not isinstance(body, dict):
            raise CliError(f"{section}: top-level keys must be tables, got a value")
        if section in _CONFIG_KEYS:
            keys = _CONFIG_KEYS[section]
            for key, value in body.items():
                if key not in keys:
                    raise CliError(f"unknown key {section}.{key}")
                v = _number(f"{section}.{key}", value)
                if keys[key] in ("plate_height", "laser_crossing_time") and math.isinf(v):
                    v = None
                fields[keys[key]] = v
        elif section == "grid":
            for key, value in body.items():
                if key not in _GRID_KEYS:
                    raise CliError(f"unknown key grid.{key}")
                kind = _GRID_KEYS[key]
                if kind is str:
                    if not isinstance(value, str):
                        raise CliError(f"grid.{key}: expected a string, got {value!r}")
                    grid_kw[key] = value
                else:
                    grid_kw[key] = _number(f"grid.{key}", value, kind)
        elif section == "analysis":
            for key, value in body.items():
                if key not in _ANALYSIS_KEYS:
                    raise CliError(f"unknown key analysis.{key}")
                analysis_kw[key] = _number(f"analysis.{key}", value, _ANALYSIS_KEYS[key])
        else:
            raise CliError(f"unknown table [{section}]")

    try:
        grid = _build_grid(grid_kw)
        cfg = ExperimentConfig(grid=grid, **fields)
        analysis = AnalysisSettings(
            delta_x_ref=analysis_kw.get("delta_x_ref_m", DEFAULT_DELTA_X_REF),
            baseline_slit1_width=analysis_kw.get("baseline_slit1_width_m", ExperimentConfig.slit1_width),
            contrast_order=analysis_kw.get("contrast_order", 2),
            shift_order=analysis_kw.get("shift_order", 13),
            prominence=analysis_kw.get("prominence", DEFAULT_PROMINENCE),
        )
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from exc
    return LoadedConfig(cfg, analysis, config_digest(tree))


def _build_grid(kw: dict) -> NumericalGrid:
    g = NumericalGrid()
    changes: dict[str, Any] = {}
    for plane in _GRID_PLANES:
        cur: PlaneGrid = getattr(g, plane)
        window = kw.get(f"{plane}_window_m", cur.window)
        samples = kw.get(f"{plane}_samples", cur.samples)
        if (window, samples) != (cur.window, cur.samples):
            changes[plane] = PlaneGrid(window, samples)
    for key in ("method", "source_points", "source_extent"):
        if key in kw:
            changes[key] = kw[key]
    return replace(g, **changes)


def load_config(path) -> LoadedConfig:
    try:
        with open(path, "rb") as fh:
            tree = tomli.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise CliError(f"malformed config {path}: {exc}") from exc
    return parse_config(tree)


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if v is None:
        return "inf"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


class OutputDir:
    """Stage files in a hidden sibling directory and publish them atomically,
    so a failed command leaves nothing behind."""

    def __init__(self, target: Path):
        self.target = Path(target)
        if self.target.exists() and (not self.target.is_dir() or any(self.target.iterdir())):
            raise CliError(f"output directory {self.target} already exists and is not empty")
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".kdsim-", dir=self.target.parent))
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.stage / name

    def commit(self) -> Path:
        if self.target.exists():
            self.target.rmdir()
        os.replace(self.stage, self.target)
        return self.target

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def versions() -> dict:
    return {"kdsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out: OutputDir, digest: str, command: str, timings: dict, extra: Optional[dict] = None) -> None:
    name = "manifest.json"
    outputs = sorted(set(out.files) | {name})
    manifest = {
        "config_hash": digest,
        "command": command,
        "versions": versions(),
        "outputs": outputs,
        "timings": timings,
    }
    manifest.update(extra or {})
    with open(out.path(name), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def plot_pattern(path: Path, series: list[tuple[str, np.ndarray, np.ndarray]], log: bool = False) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, x, y in series:
        ax.plot(x * 1e6, y, lw=0.8, label=label)
    ax.set_xlabel("screen position (um)")
    ax.set_ylabel("probability density (1/m)")
    if log:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------- runs

def baseline_config(cfg: ExperimentConfig, analysis: AnalysisSettings) -> ExperimentConfig:
    """Same setup without plate and with the baseline first slit."""
    return cfg.with_(plate_height=None, slit1_width=analysis.baseline_slit1_width)


def _run(cfg: ExperimentConfig, analysis: AnalysisSettings, threads: Optional[int]) -> RunResult:
    return run_experiment(cfg, analysis.delta_x_ref, threads,
                          contrast_orders=(0, analysis.contrast_order),
                          prominence=analysis.prominence)


def relative_shift(base: PeakSet, peaks: PeakSet, order: int) -> float:
    try:
        return peak_shift(base, peaks, order)
    except KeyError:
        return math.nan


def metrics_row(run_id: str, res: RunResult, shift: float) -> list:
    m = res.metrics()
    return [run_id, m["h_p_m"], m["intensity_w_m2"], m["w1_m"], m["delta_e_ev"], m["r_dec"],
            m["contrast"], shift]


def _pattern_rows(res: RunResult):
    return zip(res.pattern.positions, res.pattern.density)


def _guarded(fn):
    """Translate library errors into CliError with a distinct exit code."""
    try:
        return fn()
    except SamplingError as exc:
        raise CliError(f"sampling criterion violated: {exc}", code=3) from exc
    except InvalidRunError as exc:
        raise CliError(f"invalid run: {exc}", code=4) from exc
    except CalibrationError as exc:
        raise CliError(str(exc), code=5) from exc
    except ValueError as exc:
        raise CliError(str(exc), code=2) from exc


def _default_out(digest: str, prefix: str) -> Path:
    return Path(f"{prefix}-{digest[:12]}")


def cmd_simulate(args) -> int:
    loaded = load_config(args.config)
    cfg, analysis = loaded.experiment, loaded.analysis
    out = OutputDir(args.out or _default_out(loaded.digest, "kdsim"))
    try:
        t0 = time.perf_counter()
        res = _guarded(lambda: _run(cfg, analysis, args.threads))
        base_cfg = baseline_config(cfg, analysis)
        base = res if base_cfg == cfg else _guarded(lambda: _run(base_cfg, analysis, args.threads))
        shift = relative_shift(base.peaks, res.peaks, analysis.shift_order)
        timings = dict(res.timings, total_s=time.perf_counter() - t0)

        write_csv(out.path("pattern.csv"), PATTERN_COLUMNS, _pattern_rows(res))
        write_csv(out.path("metrics.csv"), METRIC_COLUMNS, [metrics_row("run", res, shift)])
        write_csv(out.path("peaks.csv"), ("order", "position_m", "height_per_m"),
                  zip(res.peaks.orders, res.peaks.positions, res.peaks.heights))
        rec = res.report.to_record()
        write_csv(out.path("decoherence_report.csv"), list(rec), [list(rec.values())])
        if args.plot:
            plot_pattern(out.path("pattern.svg"),
                         [("run", res.pattern.positions, res.pattern.density)], args.log)
        write_manifest(out, loaded.digest, "simulate", timings)
        target = out.commit()
    except BaseException:
        out.discard()
        raise
    print(f"contrast {res.contrast:.4g}, R_dec {res.report.R_dec:.4g}, "
          f"dE {res.report.delta_E_ev:.4g} eV, order-{analysis.shift_order} shift {shift:.4g}")
    print(f"wrote {target}")
    return 0


def parse_values(axis: str, raw: list[str]) -> list[Optional[float]]:
    values: list[Optional[float]] = []
    for item in raw:
        for tok in item.split(","):
            tok = tok.strip()
            if not tok:
                continue
            if tok.lower() in ("inf", "none"):
                if axis != "h_p":
                    raise CliError(f"value {tok!r} only allowed for the h_p axis")
                values.append(None)
                continue
            try:
                values.append(float(tok))
            except ValueError as exc:
                raise CliError(f"cannot parse sweep value {tok!r}") from exc
    if not values:
        raise CliError("sweep needs at least one value")
    return sorted(values, key=lambda v: math.inf if v is None else v)


def cmd_sweep(args) -> int:
    loaded = load_config(args.config)
    cfg0, analysis = loaded.experiment, loaded.analysis
    values = parse_values(args.axis, args.values)
    field = SWEEP_AXES[args.axis]
    out = OutputDir(args.out or _default_out(loaded.digest, f"kdsim-sweep-{args.axis}"))
    try:
        t0 = time.perf_counter()
        baselines: dict[ExperimentConfig, RunResult] = {}
        rows, series = [], []
        for i, value in enumerate(values):
            label = f"{args.axis}={_fmt(value)}"
            try:
                cfg = _guarded(lambda: cfg0.with_(**{field: value}))
                res = _guarded(lambda: _run(cfg, analysis, args.threads))
                bcfg = baseline_config(cfg, analysis)
                if bcfg not in baselines:
                    baselines[bcfg] = res if bcfg == cfg else _guarded(lambda: _run(bcfg, analysis, args.threads))
            except CliError as exc:
                raise CliError(f"run {label} failed: {exc}", exc.code) from exc
            shift = relative_shift(baselines[bcfg].peaks, res.peaks, analysis.shift_order)
            rows.append(metrics_row(label, res, shift))
            write_csv(out.path(f"pattern_{i:03d}.csv"), PATTERN_COLUMNS, _pattern_rows(res))
            series.append((label, res.pattern.positions, res.pattern.density))
            print(f"{label}: contrast {res.contrast:.4g}, R_dec {res.report.R_dec:.4g}, "
                  f"dE {res.report.delta_E_ev:.4g} eV, shift {shift:.4g}")
        write_csv(out.path("metrics.csv"), METRIC_COLUMNS, rows)
        if args.plot:
            plot_pattern(out.path("patterns.svg"), series, args.log)
        write_manifest(out, loaded.digest, f"sweep {args.axis}",
                       {"total_s": time.perf_counter() - t0},
                       {"axis": args.axis, "values": [_fmt(v) for v in values]})
        target = out.commit()
    except BaseException:
        out.discard()
        raise
    print(f"wrote {target}")
    return 0


def cmd_calibrate(args) -> int:
    if args.target_r < 0:
        raise CliError("--target-r must be >= 0")
    loaded = load_config(args.config)
    cfg, analysis = loaded.experiment, loaded.analysis
    out = OutputDir(args.out or _default_out(loaded.digest, "kdsim-calibrate"))
    try:
        t0 = time.perf_counter()
        w1, ratio = _guarded(lambda: calibrate_source_width(
            cfg, args.target_r, analysis.delta_x_ref, threads=args.threads))
        write_csv(out.path("calibration.csv"),
                  ("target_r", "separation_m", "w1_m", "coherence_ratio", "achieved_r"),
                  [[float(args.target_r), analysis.delta_x_ref, w1, ratio, -math.log(ratio)]])
        write_manifest(out, loaded.digest, "calibrate", {"total_s": time.perf_counter() - t0})
        target = out.commit()
    except BaseException:
        out.discard()
        raise
    print(f"w1 = {w1:.6g} m, coherence ratio {ratio:.6g} (R = {-math.log(ratio):.6g})")
    print(f"wrote {target}")
    return 0


def cmd_verify(args) -> int:
    grid = _guarded(lambda: grid_from_env(os.environ))
    cfg = ExperimentConfig() if grid is None else ExperimentConfig(grid=grid)
    failed = 0
    for check in verify_suite(cfg, fast=args.fast):
        t0 = time.perf_counter()
        try:
            res = check()
            line, ok = res.line(), res.passed
        except (SamplingError, ValueError) as exc:
            line, ok = f"[FAIL] {exc}", False
        print(f"{line} ({time.perf_counter() - t0:.1f} s)", flush=True)
        failed += not ok
    print("all checks passed" if not failed else f"{failed} check(s) failed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kdsim", description="Kapitza-Dirac diffraction with wall-induced decoherence")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="TOML configuration file")
        sp.add_argument("--out", type=Path, help="output directory (default: named by config hash)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")

    sp = sub.add_parser("simulate", help="single run")
    common(sp)
    sp.add_argument("--plot", action="store_true", help="also write an SVG plot")
    sp.add_argument("--log", action="store_true", help="log-scale plot")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("sweep", help="one run per value of an axis")
    common(sp)
    sp.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sp.add_argument("--values", required=True, nargs="+",
                    help="values in SI units, comma or space separated; inf = no plate")
    sp.add_argument("--plot", action="store_true")
    sp.add_argument("--log", action="store_true")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("calibrate", help="first-slit width for a decoherence amount")
    common(sp)
    sp.add_argument("--target-r", type=float, required=True)
    sp.set_defaults(fn=cmd_calibrate)

    sp = sub.add_parser("verify", help="built-in oracle checks (KDSIM_VERIFY_SAMPLES overrides slit/laser samples)")
    sp.add_argument("--fast", action="store_true", help="skip the slow exact-kernel comparison")
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
