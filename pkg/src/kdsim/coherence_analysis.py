"""Partially coherent density matrices built from the source-point ensemble.

The anti-diagonal ``rho(x + s/2, x - s/2)`` against the separation ``s``
measures transverse coherence.  Coherence ratios between two source widths are
read off Gaussians matched to the half-maximum width of the degree of
coherence, which stays meaningful for decoherence amounts whose direct value
sits far below double precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .params import ExperimentConfig, SOURCE_SIGMA_PER_WIDTH
from .simulation import plane_fields
from .wave_optics import WaveField

# Coherence magnitude (relative to the diagonal) treated as numerically zero.
NUMERICAL_FLOOR = 1e-12
# Largest side of the stored density matrix.
MAX_MATRIX = 2048


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrixSlice:
    """Trace-normalized density matrix on a (possibly decimated) plane grid.

    ``separations``/``antidiagonal`` hold |rho(c + s/2, c - s/2)| at full grid
    resolution about the intensity-weighted centre ``center``; ``coherence`` is
    the same profile divided by sqrt(rho(c+s/2, c+s/2) rho(c-s/2, c-s/2)).
    """

    values: np.ndarray
    spacing: float
    origin: float
    plane: str
    center: float
    separations: np.ndarray
    antidiagonal: np.ndarray
    coherence: np.ndarray
    fwhm: float

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.values.shape[0])


def _check_fields(fields: Sequence[WaveField], weights: Sequence[float]) -> None:
    if len(fields) == 0:
        raise ValueError("density matrix needs at least one field")
    if len(fields) != len(weights):
        raise ValueError("one weight per field required")
    for f in fields[1:]:
        if not f.same_grid(fields[0]):
            raise ValueError("fields are on mismatched grids")


def antidiagonal_profile(fields: Sequence[WaveField], weights: Sequence[float],
                         center_index: Optional[int] = None):
    """Full-resolution anti-diagonal about ``center_index`` (default: the
    intensity-weighted centre).  Returns (center_index, separations, |rho|,
    degree of coherence, trace)."""
    _check_fields(fields, weights)
    n = fields[0].samples
    diag = np.zeros(n)
    for f, w in zip(fields, weights):
        diag += w * f.intensity()
    trace = float(diag.sum())
    if center_index is None:
        center_index = int(round(float(np.sum(np.arange(n) * diag) / trace)))
    c = center_index
    m = np.arange(0, min(c, n - 1 - c) + 1)
    anti = np.zeros(m.size, dtype=complex)
    for f, w in zip(fields, weights):
        a = f.amplitudes
        anti += w * a[c + m] * np.conj(a[c - m])
    anti = np.abs(anti) / trace
    norm = np.sqrt(diag[c + m] * diag[c - m]) / trace
    with np.errstate(divide="ignore", invalid="ignore"):
        coh = np.where(norm > 0, anti / norm, 0.0)
    seps = 2 * m * fields[0].spacing
    return c, seps, anti, np.minimum(coh, 1.0), trace


def _fwhm_from_profile(seps: np.ndarray, prof: np.ndarray) -> float:
    half = 0.5 * prof[0]
    below = np.flatnonzero(prof < half)
    if below.size == 0:
        warnings.warn("anti-diagonal never falls to half maximum inside the window; "
                      "FWHM is window-limited", RuntimeWarning, stacklevel=3)
        return 2 * float(seps[-1])
    k = below[0]
    s0, s1, p0, p1 = seps[k - 1], seps[k], prof[k - 1], prof[k]
    return 2 * float(s0 + (p0 - half) * (s1 - s0) / (p0 - p1))


def density_matrix(fields: Sequence[WaveField], weights: Sequence[float],
                   max_size: int = MAX_MATRIX, half_window: Optional[float] = None) -> DensityMatrixSlice:
    """Weighted sum of outer products, trace-normalized to one.

    The stored matrix covers ``+-half_window`` around the intensity centre (the
    whole plane by default) with the grid decimated to at most ``max_size``
    nodes per side; entries are exact samples of the full-resolution matrix.
    """
    c, seps, anti, coh, trace = antidiagonal_profile(fields, weights)
    f0 = fields[0]
    n = f0.samples
    if half_window is None:
        lo, hi = 0, n
    else:
        r = int(round(half_window / f0.spacing))
        lo, hi = max(0, c - r), min(n, c + r + 1)
    stride = max(1, math.ceil((hi - lo) / max_size))
    idx = np.arange(lo, hi, stride)
    A = np.stack([np.sqrt(w) * f.amplitudes[idx] for f, w in zip(fields, weights)])
    rho = A.T @ A.conj()
    rho = rho / np.real(np.trace(rho))
    return DensityMatrixSlice(
        values=rho,
        spacing=f0.spacing * stride,
        origin=f0.origin + f0.spacing * idx[0],
        plane=f0.plane,
        center=f0.origin + f0.spacing * c,
        separations=seps,
        antidiagonal=anti,
        coherence=coh,
        fwhm=_fwhm_from_profile(seps, anti),
    )


def antidiagonal_fwhm(rho: DensityMatrixSlice) -> float:
    """FWHM of |rho(x + s/2, x - s/2)| against s, linearly interpolated."""
    return _fwhm_from_profile(rho.separations, rho.antidiagonal)


def gaussian_coherence_rate(rho: DensityMatrixSlice) -> float:
    """``a`` of the Gaussian ``exp(-a s^2)`` with the same half-maximum
    separation as the degree of coherence."""
    s, g = rho.separations, rho.coherence
    below = np.flatnonzero(g < 0.5)
    if below.size == 0:
        raise ValueError("degree of coherence never falls to one half inside the window")
    k = below[0]
    if k < 2:
        raise ValueError("coherence decays within one grid step; refine the plane grid")
    s_half = s[k - 1] + (g[k - 1] - 0.5) * (s[k] - s[k - 1]) / (g[k - 1] - g[k])
    return math.log(2.0) / float(s_half) ** 2


def coherence_ratio(rho_dec: DensityMatrixSlice, rho_in: DensityMatrixSlice, separation: float) -> float:
    """Ratio of the degrees of coherence of two density matrices at ``separation``,
    taken from their Gaussian fits."""
    if separation < 0:
        raise ValueError("separation must be >= 0")
    if separation > rho_in.separations[-1]:
        raise ValueError("separation exceeds the plane window")
    if separation == 0:
        return 1.0
    a_in = gaussian_coherence_rate(rho_in)
    if math.exp(-a_in * separation**2) < NUMERICAL_FLOOR:
        raise ValueError("reference coherence is below the numerical floor at this separation")
    return math.exp(-(gaussian_coherence_rate(rho_dec) - a_in) * separation**2)


def plane_density(cfg: ExperimentConfig, beam, plane: str = "before_laser",
                  slit1_width: Optional[float] = None, threads: Optional[int] = None,
                  **kw) -> DensityMatrixSlice:
    """Density matrix at ``plane`` ("plate" or "before_laser") for a first slit
    of width ``slit1_width`` (default: the configured one)."""
    w1 = cfg.slit1_width if slit1_width is None else slit1_width
    fields, weights = plane_fields(cfg, beam, plane, SOURCE_SIGMA_PER_WIDTH * w1, threads)
    return density_matrix(fields, weights, **kw)


def before_laser_density(cfg: ExperimentConfig, beam, slit1_width: Optional[float] = None,
                         threads: Optional[int] = None, **kw) -> DensityMatrixSlice:
    return plane_density(cfg, beam, "before_laser", slit1_width, threads, **kw)


def max_source_width(cfg: ExperimentConfig) -> float:
    """Widest first slit whose quadrature nodes stay inside the source window."""
    return 0.999 * cfg.grid.source.half_extent / (cfg.grid.source_extent * SOURCE_SIGMA_PER_WIDTH)


def calibrate_source_width(cfg: ExperimentConfig, target_R: float, separation_ref: float,
                           beam=None, threads: Optional[int] = None, rel_tol: float = 0.01,
                           plane: str = "plate"):
    """First-slit width whose coherence at ``separation_ref`` is exp(-target_R)
    times the baseline one, both evaluated at ``plane``.

    The plate plane is the default: after the second slit the beam regains
    coherence on free propagation, which caps the reachable decoherence further
    downstream.  Bisection on [baseline, widest width that fits the source
    window] until the bracket is narrower than ``rel_tol``.  Returns
    ``(w1, ratio)``.
    """
    from .zurek_model import build_report

    if target_R < 0:
        raise ValueError("target decoherence amount must be >= 0")
    if beam is None:
        beam = build_report(cfg).beam_after_loss()
    base = cfg.slit1_width
    if target_R == 0:
        return base, 1.0
    small = dict(max_size=64)
    rho_in = plane_density(cfg, beam, plane, base, threads, **small)

    def ratio(w1):
        rho = plane_density(cfg, beam, plane, w1, threads, **small)
        return coherence_ratio(rho, rho_in, separation_ref)

    target = math.exp(-target_R)
    lo, hi = base, max_source_width(cfg)
    r_hi = ratio(hi)
    if r_hi > target:
        raise CalibrationError(
            f"target R={target_R} unreachable at the {plane} plane: widths {lo:.4g}..{hi:.4g} m "
            f"give decoherence 0..{-math.log(r_hi):.4g}"
        )
    while (hi - lo) > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if ratio(mid) > target:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    return w, ratio(w)
