"""Decoherence and dissipation of an electron flying over a resistive wall.

Closed forms for the Anglin-Zurek decoherence time, the image-charge overlap
correction, the accumulated decoherence amount, the resistive drag power and the
resulting energy loss, plus the coherence length at which the decoherence
amount reaches ln 2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, asdict

from .params import CONST, BeamState, ExperimentConfig, derive_beam, energy_to_ev, flight_time

# Path separation at which decoherence amounts are quoted.  Makes the
# 2 um / 1 um heights reproduce R_dec of about 2.2 / 70 at rho = 144 Ohm m.
DEFAULT_DELTA_X_REF = 2.08e-7

# Energy loss above this fraction of the kinetic energy strains P * t_f.
SMALL_LOSS_FRACTION = 0.25


class InvalidRunError(ValueError):
    """The energy loss reaches or exceeds the beam kinetic energy."""


class SmallLossWarning(UserWarning):
    pass


@dataclass(frozen=True)
class WallInteraction:
    """Electron at height ``z`` over a wall of resistivity ``rho`` at
    temperature ``T`` for a time ``t_f``.  ``z = inf`` means no wall."""

    z: float
    rho: float
    T: float
    t_f: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"height z must be positive, got {self.z}")
        if not self.rho > 0:
            raise ValueError(f"resistivity must be positive, got {self.rho}")
        if not self.T > 0:
            raise ValueError(f"temperature must be positive, got {self.T}")
        if not self.t_f >= 0:
            raise ValueError(f"flight time must be >= 0, got {self.t_f}")


def _rate_prefactor(w: WallInteraction) -> float:
    # pi e^2 k_B T rho / (4 h^2)
    return math.pi * CONST.e**2 * CONST.k_B * w.T * w.rho / (4.0 * CONST.h**2)


def decoherence_time(w: WallInteraction, delta_x: float) -> float:
    """Zurek decoherence time 4 h^2 z^3 / (pi e^2 k_B T rho dx^2)."""
    if not delta_x > 0:
        raise ValueError(f"delta_x must be positive, got {delta_x}")
    return w.z**3 / (_rate_prefactor(w) * delta_x**2)


def overlap_correction(z: float, delta_x: float) -> float:
    """Which-way suppression factor (z / dx)^2 from overlapping image charges."""
    if not (z > 0 and delta_x > 0):
        raise ValueError("z and delta_x must be positive")
    return (z / delta_x) ** 2


def decoherence_amount(w: WallInteraction, delta_x: float) -> float:
    """t_f / (C tau_dec) for a constant height."""
    if not delta_x > 0:
        raise ValueError(f"delta_x must be positive, got {delta_x}")
    if math.isinf(w.z):
        return 0.0
    return w.t_f * _rate_prefactor(w) * delta_x**4 / w.z**5


def power_loss(w: WallInteraction, v: float) -> float:
    """Resistive drag power e^2 rho v^2 / (16 pi z^3)."""
    if not v > 0:
        raise ValueError(f"velocity must be positive, got {v}")
    return CONST.e**2 * w.rho * v**2 / (16.0 * math.pi * w.z**3)


def energy_loss(P: float, t_f: float, E_kin: float) -> float:
    """P * t_f, valid while small against the kinetic energy ``E_kin``."""
    if P < 0 or t_f < 0 or E_kin < 0:
        raise ValueError("power, time and kinetic energy must be >= 0")
    dE = P * t_f
    if dE >= E_kin:
        raise InvalidRunError(
            f"energy loss {energy_to_ev(dE):.4g} eV exceeds the kinetic energy "
            f"{energy_to_ev(E_kin):.4g} eV"
        )
    if dE > SMALL_LOSS_FRACTION * E_kin:
        warnings.warn(
            f"energy loss is {dE / E_kin:.1%} of the kinetic energy; P*t_f is a "
            "small-loss approximation",
            SmallLossWarning,
            stacklevel=2,
        )
    return dE


def thermal_wavelength(T: float) -> float:
    """hbar / sqrt(2 m_e k_B T)."""
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    return CONST.hbar / math.sqrt(2.0 * CONST.m_e * CONST.k_B * T)


def rdec_from_energy(delta_x: float, lambda_th: float, delta_E: float, v: float) -> float:
    """Decoherence amount implied by an energy loss, (dx / lambda_th)^2 dE / (m v^2)."""
    return (delta_x / lambda_th) ** 2 * delta_E / (CONST.m_e * v**2)


def coherence_length(w: WallInteraction) -> float:
    """Separation whose coherence has decayed to 1/2 after the flight.

    Returns ``inf`` when there is no decoherence (zero time or no wall).
    """
    if w.t_f == 0 or math.isinf(w.z):
        return math.inf
    return (math.log(2.0) * w.z**5 / (w.t_f * _rate_prefactor(w))) ** 0.25


@dataclass(frozen=True)
class DecoherenceReport:
    tau_dec: float
    C: float
    R_dec: float
    P: float
    delta_E: float
    x_coh: float
    lambda_th: float
    t_f: float
    delta_x_ref: float
    beam_energy_ev: float

    @property
    def delta_E_ev(self) -> float:
        return energy_to_ev(self.delta_E)

    @property
    def energy_after_loss_ev(self) -> float:
        return self.beam_energy_ev - self.delta_E_ev

    def beam_after_loss(self) -> BeamState:
        return derive_beam(self.energy_after_loss_ev)

    def to_record(self) -> dict:
        rec = {f"{k}": v for k, v in asdict(self).items()}
        rec["delta_E_ev"] = self.delta_E_ev
        rec["energy_after_loss_ev"] = self.energy_after_loss_ev
        return rec


def build_report(cfg: ExperimentConfig, delta_x_ref: float = DEFAULT_DELTA_X_REF) -> DecoherenceReport:
    """Evaluate the wall model for a configuration.

    Without a plate every loss is zero and ``x_coh`` is infinite.
    """
    beam = derive_beam(cfg.beam_energy)
    t_f = flight_time(cfg.plate_length, beam)
    lam_th = thermal_wavelength(cfg.temperature)
    if cfg.plate_height is None or cfg.resistivity == 0:
        return DecoherenceReport(
            tau_dec=math.inf, C=math.inf, R_dec=0.0, P=0.0, delta_E=0.0,
            x_coh=math.inf, lambda_th=lam_th, t_f=t_f, delta_x_ref=delta_x_ref,
            beam_energy_ev=cfg.beam_energy,
        )
    w = WallInteraction(z=cfg.plate_height, rho=cfg.resistivity, T=cfg.temperature, t_f=t_f)
    P = power_loss(w, beam.velocity)
    return DecoherenceReport(
        tau_dec=decoherence_time(w, delta_x_ref),
        C=overlap_correction(w.z, delta_x_ref),
        R_dec=decoherence_amount(w, delta_x_ref),
        P=P,
        delta_E=energy_loss(P, t_f, beam.energy),
        x_coh=coherence_length(w),
        lambda_th=lam_th,
        t_f=t_f,
        delta_x_ref=delta_x_ref,
        beam_energy_ev=cfg.beam_energy,
    )
