"""Detected diffraction patterns and the observables read off them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d
from scipy.special import jv

from .wave_optics import WaveField

DEFAULT_PROMINENCE = 0.02


@dataclass(frozen=True, eq=False)
class DiffractionPattern:
    """Probability density on the screen, normalized to unit area.

    ``meta`` carries provenance (intensity, plate height, slit width, energy
    loss) and ``order_spacing``, the expected distance between neighbouring
    diffraction orders.
    """

    positions: np.ndarray
    density: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    def area(self) -> float:
        return float(np.sum(self.density) * self.spacing)

    def centroid(self) -> float:
        return float(np.sum(self.positions * self.density) / np.sum(self.density))

    @property
    def order_spacing(self) -> Optional[float]:
        return self.meta.get("order_spacing")


@dataclass(frozen=True, eq=False)
class PeakSet:
    orders: np.ndarray
    positions: np.ndarray
    heights: np.ndarray

    def __len__(self) -> int:
        return self.orders.size

    def position(self, order: int) -> Optional[float]:
        hit = np.flatnonzero(self.orders == order)
        return float(self.positions[hit[0]]) if hit.size else None


def _normalized(positions: np.ndarray, density: np.ndarray, meta: dict) -> DiffractionPattern:
    dx = positions[1] - positions[0]
    area = float(np.sum(density) * dx)
    if not area > 0:
        raise ValueError("pattern has no probability to normalize")
    return DiffractionPattern(positions, density / area, dict(meta))


def incoherent_sum(per_chi: Sequence[WaveField], weights: Sequence[float],
                   meta: Optional[dict] = None) -> DiffractionPattern:
    """Weighted sum of single-source-point screen intensities."""
    if len(per_chi) == 0 or len(per_chi) != len(weights):
        raise ValueError("need one weight per screen field and at least one field")
    ref = per_chi[0]
    total = np.zeros(ref.samples)
    for f, w in zip(per_chi, weights):
        if not f.same_grid(ref):
            raise ValueError("screen fields are on different grids")
        total += w * f.intensity()
    return _normalized(ref.x, total, meta or {})


def gaussian_kernel(sigma: float, dx: float) -> np.ndarray:
    half = int(math.ceil(6 * sigma / dx))
    u = dx * np.arange(-half, half + 1)
    k = np.exp(-(u**2) / (2 * sigma**2))
    return k / k.sum()


def detection_convolve(p: DiffractionPattern, sigma_d: float) -> DiffractionPattern:
    """Blur by a Gaussian detection slit of standard deviation ``sigma_d``."""
    if sigma_d < 0:
        raise ValueError("sigma_d must be >= 0")
    if sigma_d == 0:
        return p
    k = gaussian_kernel(sigma_d, p.spacing)
    if k.size > 2 * p.density.size:
        raise ValueError("detection slit wider than the screen window")
    out = signal.fftconvolve(p.density, k, mode="same")
    out = np.clip(out, 0.0, None)
    meta = dict(p.meta, sigma_d=sigma_d)
    return _normalized(p.positions, out, meta)


def find_peaks(p: DiffractionPattern, min_prominence: float = DEFAULT_PROMINENCE,
               order_spacing: Optional[float] = None) -> PeakSet:
    """Local maxima with prominence above ``min_prominence`` of the global maximum.

    Positions are refined by a parabola through the three nearest samples.  With
    a known ``order_spacing`` peaks are labelled by their distance from the
    intensity centroid in units of the spacing, so an empty order leaves a gap
    instead of relabelling everything beyond it.  Otherwise the peak nearest
    the centroid is order 0 and the rest are counted outward.
    """
    d = p.density
    idx, _ = signal.find_peaks(d, prominence=min_prominence * d.max())
    if idx.size == 0:
        empty = np.array([], dtype=float)
        return PeakSet(np.array([], dtype=int), empty, empty)
    pos = p.positions[idx].astype(float)
    heights = d[idx].astype(float)
    inner = (idx > 0) & (idx < d.size - 1)
    i = idx[inner]
    y0, y1, y2 = d[i - 1], d[i], d[i + 1]
    denom = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(denom != 0, 0.5 * (y0 - y2) / denom, 0.0)
    pos[inner] += shift * p.spacing
    heights[inner] = y1 - 0.25 * (y0 - y2) * shift

    c = p.centroid()
    spacing = order_spacing if order_spacing is not None else p.order_spacing
    if spacing:
        orders = np.rint((pos - c) / spacing).astype(int)
        # keep the tallest peak per order
        keep = []
        for n in np.unique(orders):
            sel = np.flatnonzero(orders == n)
            keep.append(sel[np.argmax(heights[sel])])
        keep = np.array(sorted(keep))
        return PeakSet(orders[keep], pos[keep], heights[keep])
    zero = int(np.argmin(np.abs(pos - c)))
    orders = np.arange(pos.size) - zero
    return PeakSet(orders, pos, heights)


def _region(p: DiffractionPattern, region: tuple[int, int], center: Optional[float]) -> np.ndarray:
    spacing = p.order_spacing
    if not spacing:
        raise ValueError("contrast needs the pattern's order spacing")
    lo, hi = region
    c = p.centroid() if center is None else center
    reach = max(abs(lo), abs(hi)) * spacing
    mask = np.abs(p.positions - c) <= reach + 0.5 * p.spacing
    if not mask.any() or reach == 0:
        raise ValueError(f"empty contrast region for orders {region}")
    if reach + spacing > min(c - p.positions[0], p.positions[-1] - c):
        raise ValueError("contrast region leaves the screen window")
    return mask


def fringe_envelope(p: DiffractionPattern) -> np.ndarray:
    """Running mean of the density over one order spacing."""
    size = max(1, int(round(p.order_spacing / p.spacing)))
    return uniform_filter1d(p.density, size=size, mode="nearest")


def contrast(p: DiffractionPattern, region: tuple[int, int] = (0, 2),
             center: Optional[float] = None) -> float:
    """Fringe contrast (max - min) / (max + min) over orders ``-n..n`` about the
    centroid, ``n`` being the outermost order of ``region``.

    The density is first divided by its running mean over one order spacing, so
    only the modulation at the order spacing counts and a smooth, featureless
    envelope scores zero.
    """
    mask = _region(p, region, center)
    env = fringe_envelope(p)
    r = p.density[mask] / np.maximum(env[mask], np.finfo(float).tiny)
    hi, lo = float(r.max()), float(r.min())
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)


def peak_shift(reference: PeakSet, shifted: PeakSet, order: int) -> float:
    """Relative outward shift of order ``+-order`` of ``reference``.

    A reference peak is paired with the peak of ``shifted`` carrying the same
    label.  When that order was not resolved (orders merged into envelope
    lobes) the nearest peak of ``shifted`` on the same side of the axis stands
    in for it.  Sides missing from either set are skipped; the result averages
    the remaining ones.
    """
    if order == 0:
        raise ValueError("the shift of order 0 is not relative to anything")
    rels = []
    for n in (order, -order):
        a = reference.position(n)
        if a is None:
            continue
        b = shifted.position(n)
        if b is None or np.sign(b) != np.sign(a):
            side = np.flatnonzero(np.sign(shifted.positions) == np.sign(a))
            if side.size == 0:
                continue
            b = shifted.positions[side[np.argmin(np.abs(shifted.positions[side] - a))]]
        rels.append((abs(b) - abs(a)) / abs(a))
    if not rels:
        missing = "reference" if reference.position(order) is None and reference.position(-order) is None else "shifted"
        raise KeyError(f"order {order} has no counterpart in the {missing} peak set")
    return float(np.mean(rels))


def raman_nath_oracle(phase_amplitude: float, max_order: int) -> dict[int, float]:
    """Thin-grating order populations J_n(phi)^2 for |n| <= max_order."""
    if phase_amplitude < 0:
        raise ValueError("phase amplitude must be >= 0")
    n = np.arange(-max_order, max_order + 1)
    pops = jv(n, phase_amplitude) ** 2
    return {int(k): float(v) for k, v in zip(n, pops)}


def order_populations(p: DiffractionPattern, max_order: int, spacing: Optional[float] = None,
                      center: float = 0.0) -> dict[int, float]:
    """Probability in bins of one order spacing centred on each order."""
    spacing = spacing or p.order_spacing
    if not spacing:
        raise ValueError("order spacing unknown")
    out = {}
    rel = (p.positions - center) / spacing
    for n in range(-max_order, max_order + 1):
        sel = (rel >= n - 0.5) & (rel < n + 0.5)
        out[n] = float(np.sum(p.density[sel]) * p.spacing)
    return out


def with_meta(p: DiffractionPattern, **meta) -> DiffractionPattern:
    return replace(p, meta=dict(p.meta, **meta))
