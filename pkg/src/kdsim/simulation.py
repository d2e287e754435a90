"""Run orchestration: source quadrature, per-source-point chains and the
resulting pattern, density matrix and metrics of one configuration."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .params import BeamState, ExperimentConfig
from .pattern_analysis import (
    DiffractionPattern, PeakSet, contrast, detection_convolve, find_peaks, incoherent_sum,
)
from .wave_optics import (
    WaveField, check_config_sampling, field_at_plate, field_before_laser, make_grating, point_source,
    run_chain_field, snap_to_grid,
)
from .zurek_model import DEFAULT_DELTA_X_REF, DecoherenceReport, build_report


def default_threads() -> int:
    return os.cpu_count() or 1


def ordered_map(fn: Callable, items: Sequence, threads: Optional[int] = None) -> list:
    """Map preserving input order, so downstream sums are bit-reproducible."""
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def source_quadrature(cfg: ExperimentConfig, sigma: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform trapezoid nodes over +-extent standard deviations of the Gaussian
    source, snapped to the source grid; weights sum to one."""
    sigma = cfg.source_sigma if sigma is None else sigma
    g = cfg.grid
    if sigma == 0 or g.source_points == 1:
        return np.array([0.0]), np.array([1.0])
    reach = g.source_extent * sigma
    if reach >= g.source.half_extent:
        raise ValueError(
            f"source nodes reach +-{reach:.4g} m, beyond the source window "
            f"+-{g.source.half_extent:.4g} m"
        )
    chis = np.array([snap_to_grid(c, g.source) for c in np.linspace(-reach, reach, g.source_points)])
    w = np.exp(-(chis**2) / (2 * sigma**2))
    w[[0, -1]] *= 0.5
    return chis, w / w.sum()


def plane_fields(cfg: ExperimentConfig, beam: BeamState, plane: str = "before_laser",
                 sigma: Optional[float] = None, threads: Optional[int] = None,
                 method: Optional[str] = None) -> tuple[list[WaveField], np.ndarray]:
    """Per-source-node fields at ``plane`` ("plate" or "before_laser") with
    their quadrature weights."""
    chain = {"plate": field_at_plate, "before_laser": field_before_laser}.get(plane)
    if chain is None:
        raise ValueError(f"no density-matrix support for plane {plane!r}")
    chis, weights = source_quadrature(cfg, sigma)

    def one(chi):
        return chain(cfg, point_source(chi, cfg.grid.source, beam.lambda_dB), method)

    return ordered_map(one, list(chis), threads), weights


def order_spacing(cfg: ExperimentConfig, beam: BeamState) -> float:
    """Screen distance between neighbouring orders of the light grating."""
    period = cfg.laser_wavelength / 2
    return cfg.dist_laser_screen * math.tan(math.asin(beam.lambda_dB / period))


def screen_pattern(cfg: ExperimentConfig, beam: BeamState, threads: Optional[int] = None,
                   method: Optional[str] = None, meta: Optional[dict] = None,
                   detect: bool = True, sigma: Optional[float] = None) -> DiffractionPattern:
    """Incoherent sum over the source and detection-slit convolution.

    ``sigma`` overrides the source standard deviation implied by the first slit.
    """
    check_config_sampling(cfg, beam, method)
    grating = make_grating(cfg, beam)
    chis, weights = source_quadrature(cfg, sigma)

    def one(chi):
        src = point_source(chi, cfg.grid.source, beam.lambda_dB)
        return run_chain_field(cfg, src, grating, method)

    fields = ordered_map(one, list(chis), threads)
    info = {
        "order_spacing": order_spacing(cfg, beam),
        "lambda_dB": beam.lambda_dB,
        "phase_amplitude": grating.phase_amplitude,
        "t_ell": grating.t_ell,
    }
    info.update(meta or {})
    p = incoherent_sum(fields, weights, info)
    return detection_convolve(p, cfg.detection_slit) if detect else p


@dataclass
class RunResult:
    config: ExperimentConfig
    report: DecoherenceReport
    beam: BeamState
    pattern: DiffractionPattern
    peaks: PeakSet
    contrast: float
    timings: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        return {
            "h_p_m": self.config.plate_height if self.config.plate_height is not None else math.inf,
            "intensity_w_m2": self.config.laser_intensity,
            "w1_m": self.config.slit1_width,
            "delta_e_ev": self.report.delta_E_ev,
            "r_dec": self.report.R_dec,
            "contrast": self.contrast,
        }


def run_experiment(cfg: ExperimentConfig, delta_x_ref: float = DEFAULT_DELTA_X_REF,
                   threads: Optional[int] = None, contrast_orders: tuple[int, int] = (0, 2),
                   prominence: float = 0.02) -> RunResult:
    """Wall model, energy-reduced beam, detected pattern and its observables."""
    timings = {}
    t0 = time.perf_counter()
    report = build_report(cfg, delta_x_ref)
    beam = report.beam_after_loss()
    timings["wall_model_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    meta = {
        "intensity": cfg.laser_intensity,
        "h_p": cfg.plate_height,
        "w1": cfg.slit1_width,
        "delta_E_ev": report.delta_E_ev,
    }
    pattern = screen_pattern(cfg, beam, threads, meta=meta)
    timings["propagation_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    peaks = find_peaks(pattern, prominence)
    c = contrast(pattern, contrast_orders)
    timings["analysis_s"] = time.perf_counter() - t0
    return RunResult(cfg, report, beam, pattern, peaks, c, timings)
