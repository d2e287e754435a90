"""Independent reference checks shared by ``kdsim verify`` and the test suite.

Each check returns a :class:`CheckResult`; none of them raises on a numerical
mismatch, so a caller can report every check before deciding on an exit code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import jv

from .params import ExperimentConfig, NumericalGrid, PlaneGrid, derive_beam
from .pattern_analysis import DiffractionPattern, order_populations, raman_nath_oracle
from .simulation import order_spacing
from .wave_optics import (
    SamplingError, WaveField, check_config_sampling, make_grating, point_source, propagate,
    run_chain_field,
)
from .zurek_model import build_report

# Plane-wave-limit setup for the thin-grating check: a single source point and
# a wide second slit keep every diffraction order narrow on the screen.
PLANE_WAVE_SLIT = 3e-6
RAMAN_NATH_T = 4.2e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail or self.value}"


def _result(name: str, value: float, tol: float, detail: str) -> CheckResult:
    return CheckResult(name, bool(value <= tol), float(value), tol, detail)


def scaling_laws(cfg: Optional[ExperimentConfig] = None) -> CheckResult:
    """Energy loss ratio 8 (z^-3) and decoherence ratio 32 (z^-5) between 1 and 2 um."""
    cfg = cfg or ExperimentConfig()
    r1 = build_report(cfg.with_(plate_height=1e-6))
    r2 = build_report(cfg.with_(plate_height=2e-6))
    err = max(abs(r1.delta_E / r2.delta_E / 8 - 1), abs(r1.R_dec / r2.R_dec / 32 - 1))
    return _result("scaling laws", err, 1e-9,
                   f"dE ratio {r1.delta_E / r2.delta_E:.12g}, R ratio {r1.R_dec / r2.R_dec:.12g}")


def sampling(cfg: Optional[ExperimentConfig] = None) -> CheckResult:
    cfg = cfg or ExperimentConfig()
    try:
        check_config_sampling(cfg, derive_beam(cfg.beam_energy))
    except SamplingError as exc:
        return CheckResult("sampling criterion", False, math.inf, 0.0, str(exc))
    return CheckResult("sampling criterion", True, 0.0, 0.0, "all legs within the limit")


def plane_wave_config(cfg: Optional[ExperimentConfig] = None, intensity: float = 1e14,
                      t_ell: float = RAMAN_NATH_T) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    return cfg.with_(plate_height=None, slit1_width=0.0, slit2_width=PLANE_WAVE_SLIT,
                     laser_intensity=intensity, laser_crossing_time=t_ell)


def raman_nath_populations(cfg: ExperimentConfig, max_order: int = 3):
    """Simulated and J_n^2 order populations of the plane-wave-limit pattern.

    Returns ``(simulated, oracle, phase_amplitude)``.
    """
    beam = derive_beam(cfg.beam_energy)
    grating = make_grating(cfg, beam)
    src = point_source(0.0, cfg.grid.source, beam.lambda_dB)
    f = run_chain_field(cfg, src, grating)
    p = DiffractionPattern(f.x, f.intensity() / (np.sum(f.intensity()) * f.spacing),
                           {"order_spacing": order_spacing(cfg, beam)})
    sim = order_populations(p, max_order)
    return sim, raman_nath_oracle(grating.phase_amplitude, max_order), grating.phase_amplitude


def raman_nath(cfg: Optional[ExperimentConfig] = None, max_order: int = 3, tol: float = 0.01) -> CheckResult:
    sim, ref, phi = raman_nath_populations(plane_wave_config(cfg), max_order)
    err = max(abs(sim[n] - ref[n]) for n in ref)
    return _result("Raman-Nath orders", err, tol,
                   f"phi={phi:.4f}, max |P_n - J_n^2| = {err:.3e} for |n|<={max_order}")


def bessel_sum_rule(phi: float = 0.842, tol: float = 1e-10) -> CheckResult:
    n_max = int(phi + 40)
    n = np.arange(-n_max, n_max + 1)
    err = abs(float(np.sum(jv(n, phi) ** 2)) - 1.0)
    return _result("Bessel sum rule", err, tol, f"|sum J_n^2 - 1| = {err:.2e}")


def gaussian_beam_width(w0: float, distance: float, lambda_dB: float) -> float:
    """Intensity standard deviation of a Gaussian amplitude exp(-x^2/(2 w0^2))
    after free propagation, in closed form."""
    k = 2 * math.pi / lambda_dB
    zr = k * w0**2
    return w0 / math.sqrt(2) * math.sqrt(1 + (distance / zr) ** 2)


def gaussian_waist(method: str = "fresnel", tol: float = 0.005) -> CheckResult:
    beam = derive_beam(2500.0)
    w0, L = 0.5e-6, 0.2
    grid_in, grid_out = PlaneGrid(16.384e-6, 16384), PlaneGrid(32.768e-6, 16384)
    x = grid_in.origin + grid_in.spacing * np.arange(grid_in.samples)
    f = WaveField(np.exp(-(x**2) / (2 * w0**2)).astype(complex), grid_in.spacing,
                  grid_in.origin, "slit2", beam.lambda_dB)
    g = propagate(f, L, grid_out, method, "before_laser")
    inten = g.intensity()
    sd = math.sqrt(float(np.sum(g.x**2 * inten) / np.sum(inten)))
    ref = gaussian_beam_width(w0, L, beam.lambda_dB)
    err = abs(sd / ref - 1)
    return _result(f"Gaussian width ({method})", err, tol,
                   f"rms {sd:.6e} m vs analytic {ref:.6e} m, rel err {err:.2e}")


def method_equivalence(cfg: Optional[ExperimentConfig] = None, tol: float = 1e-3) -> CheckResult:
    """Relative L2 distance between exact-kernel and Fresnel screen fields of
    the on-axis source point."""
    cfg = cfg or ExperimentConfig()
    beam = derive_beam(cfg.beam_energy)
    grating = make_grating(cfg, beam)
    src = point_source(0.0, cfg.grid.source, beam.lambda_dB)
    a = run_chain_field(cfg, src, grating, "fresnel").amplitudes
    b = run_chain_field(cfg, src, grating, "exact").amplitudes
    # a global phase is unobservable; align it before differencing
    phase = np.vdot(a, b)
    b = b * np.conj(phase) / abs(phase)
    err = float(np.linalg.norm(a - b) / np.linalg.norm(a))
    return _result("exact vs Fresnel", err, tol, f"relative L2 difference {err:.3e}")


def grid_from_env(env: dict) -> Optional[NumericalGrid]:
    """Grid with the slit and laser sample counts overridden by
    ``KDSIM_VERIFY_SAMPLES`` (windows unchanged), or None when unset."""
    raw = env.get("KDSIM_VERIFY_SAMPLES")
    if not raw:
        return None
    n = int(raw)
    g = NumericalGrid()
    return replace(g, slit=PlaneGrid(g.slit.window, n), laser=PlaneGrid(g.laser.window, n))


def verify_suite(cfg: Optional[ExperimentConfig] = None, fast: bool = False) -> list[Callable[[], CheckResult]]:
    cfg = cfg or ExperimentConfig()
    checks = [
        lambda: sampling(cfg),
        lambda: scaling_laws(cfg),
        bessel_sum_rule,
        lambda: raman_nath(cfg),
        gaussian_waist,
    ]
    if not fast:
        checks.append(lambda: method_equivalence(cfg))
    return checks
