"""Experiment configuration, physical constants and beam kinematics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants in SI units."""

    h: float = _sc.h
    hbar: float = _sc.hbar
    e: float = _sc.e
    m_e: float = _sc.m_e
    k_B: float = _sc.k
    eps0: float = _sc.epsilon_0
    c: float = _sc.c


CONST = PhysicalConstants()

# Gaussian source standard deviation per unit of first-slit width.
SOURCE_SIGMA_PER_WIDTH = 0.5

PLANES = ("source", "slit2", "plate", "before_laser", "after_laser", "screen")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PlaneGrid:
    """Uniform transverse grid of one plane, centred so that x = 0 is a node.

    Node ``i`` sits at ``(i - samples // 2) * spacing``.
    """

    window: float
    samples: int

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError(f"grid window must be positive, got {self.window}")
        if not _is_pow2(self.samples):
            raise ValueError(f"grid samples must be a power of two, got {self.samples}")

    @property
    def spacing(self) -> float:
        return self.window / self.samples

    @property
    def origin(self) -> float:
        return -(self.samples // 2) * self.spacing

    @property
    def half_extent(self) -> float:
        return (self.samples // 2) * self.spacing


@dataclass(frozen=True)
class NumericalGrid:
    """Per-plane sampling and source quadrature settings.

    ``source_points`` uniform nodes span ``+-source_extent`` standard deviations
    of the Gaussian source and are summed with trapezoid weights.
    """

    source: PlaneGrid = PlaneGrid(524.288e-6, 65536)
    slit: PlaneGrid = PlaneGrid(16.384e-6, 16384)
    plate: PlaneGrid = PlaneGrid(8.192e-6, 8192)
    laser: PlaneGrid = PlaneGrid(32.768e-6, 16384)
    screen: PlaneGrid = PlaneGrid(2.048e-3, 8192)
    source_points: int = 129
    source_extent: float = 4.5
    method: str = "fresnel"

    def __post_init__(self):
        if self.source_points < 1:
            raise ValueError("source_points must be >= 1")
        if not self.source_extent > 0:
            raise ValueError("source_extent must be positive")
        if self.method not in ("fresnel", "exact"):
            raise ValueError(f"unknown propagation method {self.method!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every physical and numerical parameter of one simulated run (SI units,
    except ``beam_energy`` in eV).

    ``plate_height=None`` means no plate: no energy loss and no decoherence.
    ``laser_crossing_time=None`` derives the crossing time from the waist and the
    energy-reduced beam velocity.
    """

    beam_energy: float = 2500.0
    slit1_width: float = 6.7e-6
    slit2_width: float = 1e-6
    dist_source_slit2: float = 0.24
    dist_slit2_plate: float = 1e-3
    plate_length: float = 40e-6
    plate_height: Optional[float] = None
    resistivity: float = 144.0
    temperature: float = 300.0
    laser_wavelength: float = 532e-9
    laser_waist: float = 125e-6
    laser_intensity: float = 1e14
    laser_offset: float = 0.0
    laser_crossing_time: Optional[float] = None
    dist_plate_laser: float = 1e-2
    dist_laser_screen: float = 0.24
    detection_slit: float = 5e-6
    grid: NumericalGrid = field(default_factory=NumericalGrid)

    def __post_init__(self):
        if not self.beam_energy > 0:
            raise ValueError(f"beam_energy must be positive, got {self.beam_energy}")
        nonneg = (
            "slit1_width", "slit2_width", "dist_source_slit2", "dist_slit2_plate",
            "plate_length", "resistivity", "temperature", "laser_wavelength",
            "laser_waist", "laser_intensity", "dist_plate_laser",
            "dist_laser_screen", "detection_slit",
        )
        for name in nonneg:
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if self.plate_height is not None and not self.plate_height > 0:
            raise ValueError(f"plate_height must be positive or None, got {self.plate_height}")
        if self.laser_crossing_time is not None and not self.laser_crossing_time >= 0:
            raise ValueError("laser_crossing_time must be >= 0")

    @property
    def source_sigma(self) -> float:
        """Standard deviation of the Gaussian incoherent source."""
        return SOURCE_SIGMA_PER_WIDTH * self.slit1_width

    @property
    def dist_slit2_plate_mid(self) -> float:
        return self.dist_slit2_plate + 0.5 * self.plate_length

    @property
    def dist_slit2_laser(self) -> float:
        return self.dist_slit2_plate + self.plate_length + self.dist_plate_laser

    @property
    def z(self) -> float:
        """Electron height above the plate, ``inf`` without plate."""
        return math.inf if self.plate_height is None else self.plate_height

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class BeamState:
    energy: float  # J
    velocity: float
    momentum: float
    lambda_dB: float

    @property
    def energy_ev(self) -> float:
        return energy_to_ev(self.energy)


def ev_to_joule(energy_ev: float) -> float:
    return energy_ev * CONST.e


def energy_to_ev(energy_j: float) -> float:
    return energy_j / CONST.e


def derive_beam(energy_ev: float) -> BeamState:
    """Non-relativistic electron kinematics for a kinetic energy in eV."""
    if not energy_ev > 0:
        raise ValueError(f"beam energy must be positive, got {energy_ev} eV")
    energy = ev_to_joule(energy_ev)
    v = math.sqrt(2.0 * energy / CONST.m_e)
    p = CONST.m_e * v
    return BeamState(energy=energy, velocity=v, momentum=p, lambda_dB=CONST.h / p)


def flight_time(plate_length: float, beam: BeamState) -> float:
    """Time spent over the plate."""
    if plate_length < 0:
        raise ValueError("plate_length must be >= 0")
    return plate_length / beam.velocity


def laser_crossing_time(waist: float, beam_after_loss: BeamState) -> float:
    if not waist > 0:
        raise ValueError("laser waist must be positive")
    return waist / beam_after_loss.velocity
