"""Single-source-point wave propagation through slit, light grating and screen.

Two propagators share one interface:

* ``exact``: direct quadrature of the spherical-wave kernel
  ``exp(i k sqrt(u^2 + L^2))`` over the nonzero input nodes.
* ``fresnel``: paraxial kernel ``exp(i k u^2 / 2L)`` expanded as
  chirp * chirp-z transform * chirp, where the chirp-z sum is done as a fast
  (Bluestein) convolution.  Input and output grids may differ in spacing and
  extent.

The common phase ``k L`` is dropped from both kernels and the Fresnel prefactor
``1/sqrt(i lambda L)`` is kept, so unnormalized output approximately conserves
the L2 norm.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .params import CONST, BeamState, ExperimentConfig, PlaneGrid, laser_crossing_time

# Output rows evaluated per block by the exact propagator.
_EXACT_BLOCK = 1 << 22


class SamplingError(ValueError):
    """A propagation leg is undersampled for its distance and wavelength."""


@dataclass(frozen=True, eq=False)
class WaveField:
    amplitudes: np.ndarray
    spacing: float
    origin: float
    plane: str
    lambda_dB: float

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("field spacing must be positive")

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.amplitudes.size)

    @property
    def samples(self) -> int:
        return self.amplitudes.size

    @property
    def half_extent(self) -> float:
        return max(abs(self.origin), abs(self.origin + self.spacing * (self.samples - 1)))

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.spacing)

    def normalized(self) -> "WaveField":
        n = self.norm()
        if n == 0 or not math.isfinite(n):
            raise ValueError(f"cannot normalize field at plane {self.plane!r} (norm {n})")
        return replace(self, amplitudes=self.amplitudes / n)

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def same_grid(self, other: "WaveField") -> bool:
        return (
            self.samples == other.samples
            and math.isclose(self.spacing, other.spacing, rel_tol=1e-12)
            and math.isclose(self.origin, other.origin, rel_tol=1e-12, abs_tol=1e-18)
        )


@dataclass(frozen=True)
class LaserGrating:
    V0: float
    k_laser: float
    t_ell: float
    offset: float = 0.0

    def __post_init__(self):
        if self.V0 < 0 or self.t_ell < 0:
            raise ValueError("grating depth and crossing time must be >= 0")

    @property
    def phase_amplitude(self) -> float:
        """Half the peak-to-peak imprinted phase, V0 t / (2 hbar)."""
        return self.V0 * self.t_ell / (2.0 * CONST.hbar)


def point_source(chi: float, grid: PlaneGrid, lambda_dB: float) -> WaveField:
    """Discrete delta at the grid node nearest to ``chi``."""
    if not abs(chi) < grid.window / 2:
        raise ValueError(f"source point {chi} m lies outside the +-{grid.window / 2} m window")
    idx = int(round((chi - grid.origin) / grid.spacing))
    if not 0 <= idx < grid.samples:
        raise ValueError(f"source point {chi} m lies outside the grid")
    amps = np.zeros(grid.samples, dtype=complex)
    amps[idx] = 1.0
    return WaveField(amps, grid.spacing, grid.origin, "source", lambda_dB)


def snap_to_grid(chi: float, grid: PlaneGrid) -> float:
    return grid.origin + grid.spacing * round((chi - grid.origin) / grid.spacing)


def max_spacing(lambda_dB: float, distance: float, span: float, method: str = "fresnel") -> float:
    """Largest input spacing that keeps the kernel phase Nyquist-sampled.

    ``span`` is the largest transverse separation between an input and an
    output node.
    """
    if span <= 0:
        return math.inf
    if method == "exact":
        return lambda_dB * math.hypot(span, distance) / (2.0 * span)
    return lambda_dB * distance / (2.0 * span)


def check_sampling(spacing: float, samples: int, in_half: float, out_half: float,
                   lambda_dB: float, distance: float, method: str, leg: str = "") -> None:
    span = in_half + out_half
    limit = max_spacing(lambda_dB, distance, span, method)
    if spacing > limit * (1 + 1e-12):
        need = 1 << math.ceil(math.log2(samples * spacing / limit))
        raise SamplingError(
            f"{leg or 'propagation'}: spacing {spacing:.4g} m exceeds the {method} sampling "
            f"limit {limit:.4g} m for distance {distance} m; need at least {need} samples "
            f"over the {samples * spacing:.4g} m window"
        )


@lru_cache(maxsize=32)
def _fresnel_plan(a0: float, dx: float, n_in: int, b0: float, dy: float, n_out: int,
                  wavelength: float, distance: float):
    k = 2.0 * math.pi / wavelength
    alpha = k * dx * dy / distance
    i = np.arange(n_in, dtype=float)
    j = np.arange(n_out, dtype=float)
    xa = a0 + dx * i
    xb = b0 + dy * j
    pre = np.exp(1j * (k * xa**2 / (2 * distance) - k * dx * i * b0 / distance - 0.5 * alpha * i**2))
    nfft = sfft.next_fast_len(n_in + n_out - 1)
    m = np.arange(-(n_in - 1), n_out, dtype=float)
    h = np.zeros(nfft, dtype=complex)
    # h[m] stored so that linear convolution lands at index j + n_in - 1
    h[: m.size] = np.exp(0.5j * alpha * m**2)
    H = sfft.fft(h)
    post = (
        dx / np.sqrt(1j * wavelength * distance)
        * np.exp(1j * (k * xb**2 / (2 * distance) - k * a0 * xb / distance - 0.5 * alpha * j**2))
    )
    for arr in (pre, H, post):
        arr.flags.writeable = False
    return pre, H, post, nfft


def _fresnel(field: WaveField, distance: float, out: PlaneGrid) -> np.ndarray:
    pre, H, post, nfft = _fresnel_plan(
        field.origin, field.spacing, field.samples, out.origin, out.spacing, out.samples,
        field.lambda_dB, distance,
    )
    g = np.zeros(nfft, dtype=complex)
    g[: field.samples] = field.amplitudes * pre
    conv = sfft.ifft(sfft.fft(g) * H)
    n_in = field.samples
    return post * conv[n_in - 1: n_in - 1 + out.samples]


def exact_phase(u: np.ndarray, distance: float, wavelength: float) -> np.ndarray:
    """k (sqrt(u^2 + L^2) - L), evaluated without cancellation."""
    k = 2.0 * math.pi / wavelength
    return k * u**2 / (np.sqrt(u**2 + distance**2) + distance)


def _exact(field: WaveField, distance: float, out: PlaneGrid,
           out_index: Optional[np.ndarray] = None) -> np.ndarray:
    nz = np.flatnonzero(field.amplitudes)
    xa = field.x[nz]
    amps = field.amplitudes[nz] * field.spacing / np.sqrt(1j * field.lambda_dB * distance)
    xb_all = out.origin + out.spacing * np.arange(out.samples)
    xb = xb_all if out_index is None else xb_all[out_index]
    result = np.zeros(xb.size, dtype=complex)
    if nz.size == 0:
        return result
    rows = max(1, _EXACT_BLOCK // nz.size)
    for start in range(0, xb.size, rows):
        blk = xb[start: start + rows]
        phase = exact_phase(blk[:, None] - xa[None, :], distance, field.lambda_dB)
        result[start: start + rows] = np.exp(1j * phase) @ amps
    return result


def propagate(field: WaveField, distance: float, out: PlaneGrid, method: str = "fresnel",
              plane: str = "", normalize: bool = True,
              out_index: Optional[np.ndarray] = None) -> WaveField:
    """Propagate ``field`` over ``distance`` onto the grid ``out``.

    Parameters
    ----------
    method : {"fresnel", "exact"}
    normalize : bool
        Rescale the output to unit L2 norm.
    out_index : array of int, optional
        Exact method only: evaluate just these output nodes.  The returned field
        then holds those samples on a non-uniform subset, so it is meant for
        comparisons, not further propagation.
    """
    if not distance > 0:
        raise ValueError(f"propagation distance must be positive, got {distance}")
    check_sampling(field.spacing, field.samples, field.half_extent, out.half_extent,
                   field.lambda_dB, distance, method, leg=f"{field.plane}->{plane or 'next'}")
    if method == "fresnel":
        if out_index is not None:
            raise ValueError("out_index is only supported by the exact method")
        amps = _fresnel(field, distance, out)
    elif method == "exact":
        amps = _exact(field, distance, out, out_index)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    res = WaveField(amps, out.spacing, out.origin, plane or field.plane, field.lambda_dB)
    return res.normalized() if normalize else res


def apply_gaussian_slit(field: WaveField, width: float, center: float = 0.0) -> WaveField:
    """Amplitude transmission exp(-(x - center)^2 / (2 width^2))."""
    if not width > 0:
        raise ValueError(f"slit width must be positive, got {width}")
    t = np.exp(-((field.x - center) ** 2) / (2.0 * width**2))
    return replace(field, amplitudes=field.amplitudes * t)


def ponderomotive_depth(I: float, lambda_laser: float) -> float:
    """Depth V0 = e^2 I / (2 m eps0 c omega^2) of the standing-wave potential."""
    if I < 0:
        raise ValueError("laser intensity must be >= 0")
    omega = 2.0 * math.pi * CONST.c / lambda_laser
    return CONST.e**2 * I / (2.0 * CONST.m_e * CONST.eps0 * CONST.c * omega**2)


def make_grating(cfg: ExperimentConfig, beam_after_loss: BeamState) -> LaserGrating:
    t_ell = cfg.laser_crossing_time
    if t_ell is None:
        t_ell = laser_crossing_time(cfg.laser_waist, beam_after_loss)
    return LaserGrating(
        V0=ponderomotive_depth(cfg.laser_intensity, cfg.laser_wavelength),
        k_laser=2.0 * math.pi / cfg.laser_wavelength,
        t_ell=t_ell,
        offset=cfg.laser_offset,
    )


def laser_phase(x: np.ndarray, g: LaserGrating) -> np.ndarray:
    return -g.V0 * np.cos(g.k_laser * (x - g.offset)) ** 2 * g.t_ell / CONST.hbar


def apply_laser_phase(field: WaveField, g: LaserGrating) -> WaveField:
    """Thin phase grating imprint; leaves |amplitude| untouched."""
    return replace(field, amplitudes=field.amplitudes * np.exp(1j * laser_phase(field.x, g)),
                   plane="after_laser")


def field_before_laser(cfg: ExperimentConfig, source: WaveField, method: Optional[str] = None,
                       normalize: bool = True) -> WaveField:
    """Source field -> second slit -> Gaussian slit -> plane just before the laser."""
    method = method or cfg.grid.method
    try:
        f = propagate(source, cfg.dist_source_slit2, cfg.grid.slit, method, "slit2", normalize)
        f = apply_gaussian_slit(f, cfg.slit2_width)
        return propagate(f, cfg.dist_slit2_laser, cfg.grid.laser, method, "before_laser", normalize)
    except SamplingError:
        raise
    except ValueError as exc:
        raise ValueError(f"chain stage before laser failed: {exc}") from exc


def field_at_plate(cfg: ExperimentConfig, source: WaveField, method: Optional[str] = None,
                   normalize: bool = True) -> WaveField:
    """Source field -> Gaussian second slit -> middle of the plate."""
    method = method or cfg.grid.method
    f = propagate(source, cfg.dist_source_slit2, cfg.grid.slit, method, "slit2", normalize)
    f = apply_gaussian_slit(f, cfg.slit2_width)
    return propagate(f, cfg.dist_slit2_plate_mid, cfg.grid.plate, method, "plate", normalize)


def run_chain_field(cfg: ExperimentConfig, source: WaveField, grating: LaserGrating,
                    method: Optional[str] = None, normalize: bool = True,
                    screen_index: Optional[np.ndarray] = None) -> WaveField:
    """Full chain from an arbitrary source-plane field to the screen."""
    method = method or cfg.grid.method
    f = field_before_laser(cfg, source, method, normalize)
    f = apply_laser_phase(f, grating)
    try:
        return propagate(f, cfg.dist_laser_screen, cfg.grid.screen, method, "screen", normalize,
                         out_index=screen_index)
    except SamplingError:
        raise
    except ValueError as exc:
        raise ValueError(f"chain stage laser->screen failed: {exc}") from exc


def run_chain(cfg: ExperimentConfig, chi: float, beam_after_loss: BeamState,
              method: Optional[str] = None, normalize: bool = True) -> WaveField:
    """Screen field of the point source at ``chi`` for the (energy-reduced) beam."""
    src = point_source(chi, cfg.grid.source, beam_after_loss.lambda_dB)
    return run_chain_field(cfg, src, make_grating(cfg, beam_after_loss), method, normalize)


def check_config_sampling(cfg: ExperimentConfig, beam: BeamState, method: Optional[str] = None) -> None:
    """Reject configurations whose legs violate the sampling criterion."""
    method = method or cfg.grid.method
    g = cfg.grid
    legs = (
        ("source->slit2", g.source, g.slit, cfg.dist_source_slit2),
        ("slit2->plate", g.slit, g.plate, cfg.dist_slit2_plate_mid),
        ("slit2->before_laser", g.slit, g.laser, cfg.dist_slit2_laser),
        ("after_laser->screen", g.laser, g.screen, cfg.dist_laser_screen),
    )
    for name, gin, gout, dist in legs:
        check_sampling(gin.spacing, gin.samples, gin.half_extent, gout.half_extent,
                       beam.lambda_dB, dist, method, leg=name)


def dump_field_csv(field: WaveField, path) -> None:
    """Debug dump of (x, Re, Im) triples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_m", "re", "im"])
        for x, a in zip(field.x, field.amplitudes):
            w.writerow([repr(float(x)), repr(float(a.real)), repr(float(a.imag))])
