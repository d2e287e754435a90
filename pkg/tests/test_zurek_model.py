import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from kdsim.params import ExperimentConfig, derive_beam, flight_time
from kdsim.zurek_model import (
    DEFAULT_DELTA_X_REF, InvalidRunError, SmallLossWarning, WallInteraction, build_report,
    coherence_length, decoherence_amount, decoherence_time, energy_loss, overlap_correction,
    power_loss, rdec_from_energy, thermal_wavelength,
)

H, E, KB, M_E = 6.62607015e-34, 1.602176634e-19, 1.380649e-23, 9.1093837015e-31
HBAR = H / (2 * math.pi)

heights = st.floats(0.3e-6, 20e-6)
separations = st.floats(1e-8, 1e-6)


def wall(z=2e-6, rho=144.0, T=300.0):
    return WallInteraction(z=z, rho=rho, T=T, t_f=flight_time(40e-6, derive_beam(2500.0)))


def test_decoherence_time_closed_form():
    w, dx = wall(), 2.08e-7
    tau = 4 * H**2 * w.z**3 / (math.pi * E**2 * KB * w.T * w.rho * dx**2)
    assert decoherence_time(w, dx) == pytest.approx(tau, rel=1e-8)
    assert overlap_correction(w.z, dx) == pytest.approx((w.z / dx) ** 2)
    assert decoherence_amount(w, dx) == pytest.approx(w.t_f / (overlap_correction(w.z, dx) * tau), rel=1e-8)


def test_power_and_energy_loss_closed_form():
    b = derive_beam(2500.0)
    w = wall()
    P = E**2 * w.rho * b.velocity**2 / (16 * math.pi * w.z**3)
    assert power_loss(w, b.velocity) == pytest.approx(P, rel=1e-8)
    dE = energy_loss(P, w.t_f, b.energy)
    assert dE / E == pytest.approx(68.06, rel=1e-3)


def test_thermal_wavelength_room_temperature():
    assert thermal_wavelength(300.0) == pytest.approx(HBAR / math.sqrt(2 * M_E * KB * 300.0), rel=1e-8)
    assert thermal_wavelength(300.0) == pytest.approx(1.214e-9, rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(heights, separations, st.floats(1.1, 5.0))
def test_decoherence_scales_as_dx4(z, dx, k):
    w = wall(z)
    assert decoherence_amount(w, k * dx) / decoherence_amount(w, dx) == pytest.approx(k**4, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(heights, separations, st.floats(1.1, 5.0))
def test_decoherence_and_loss_height_laws(z, dx, k):
    v = derive_beam(2500.0).velocity
    a, b = wall(z), wall(k * z)
    assert decoherence_amount(a, dx) / decoherence_amount(b, dx) == pytest.approx(k**5, rel=1e-10)
    assert power_loss(a, v) / power_loss(b, v) == pytest.approx(k**3, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(separations, st.floats(1.0, 1e6), st.floats(4.0, 1000.0))
def test_decoherence_linear_in_rho_and_T(dx, rho, T):
    base = decoherence_amount(wall(rho=1.0, T=1.0), dx)
    assert decoherence_amount(wall(rho=rho, T=T), dx) == pytest.approx(base * rho * T, rel=1e-10)


@pytest.mark.parametrize("dx", [1e-8, 5e-8, DEFAULT_DELTA_X_REF, 1e-6])
def test_height_ratio_independent_of_separation(dx):
    ratio = decoherence_amount(wall(1e-6), dx) / decoherence_amount(wall(2e-6), dx)
    assert ratio == pytest.approx(32.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(heights)
def test_energy_route_is_twice_the_corrected_amount(z):
    b = derive_beam(2500.0)
    w = wall(z)
    dE = power_loss(w, b.velocity) * w.t_f
    r = rdec_from_energy(DEFAULT_DELTA_X_REF, thermal_wavelength(w.T), dE, b.velocity)
    corrected = overlap_correction(z, DEFAULT_DELTA_X_REF) * decoherence_amount(w, DEFAULT_DELTA_X_REF)
    assert r / corrected == pytest.approx(2.0, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(heights)
def test_coherence_length_solves_ln2(z):
    w = wall(z)
    root = brentq(lambda dx: decoherence_amount(w, dx) - math.log(2), 1e-12, 1e-3, xtol=1e-20, rtol=1e-14)
    assert coherence_length(w) == pytest.approx(root, rel=1e-9)


def test_coherence_length_without_decoherence():
    assert math.isinf(coherence_length(WallInteraction(z=math.inf, rho=1.0, T=1.0, t_f=1e-12)))
    assert math.isinf(coherence_length(WallInteraction(z=1e-6, rho=1.0, T=1.0, t_f=0.0)))


def test_energy_loss_limits():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        energy_loss(1.0, 0.2, 1.0)
    with pytest.warns(SmallLossWarning):
        energy_loss(1.0, 0.3, 1.0)
    with pytest.raises(InvalidRunError):
        energy_loss(1.0, 1.0, 1.0)


def test_invalid_run_from_config():
    with pytest.raises(InvalidRunError):
        build_report(ExperimentConfig(plate_height=1e-6, resistivity=1e4))


@pytest.mark.parametrize("kw", [dict(z=0.0), dict(rho=0.0), dict(T=-1.0)])
def test_wall_validation(kw):
    with pytest.raises(ValueError):
        wall(**kw)


def test_report_without_plate():
    r = build_report(ExperimentConfig())
    assert r.R_dec == 0 and r.delta_E == 0 and math.isinf(r.x_coh)
    assert r.energy_after_loss_ev == 2500.0


def test_report_record_and_beam():
    r = build_report(ExperimentConfig(plate_height=2e-6))
    rec = r.to_record()
    for key in ("tau_dec", "C", "R_dec", "P", "delta_E", "x_coh", "delta_E_ev", "energy_after_loss_ev"):
        assert key in rec
    assert r.beam_after_loss().energy_ev == pytest.approx(2500.0 - r.delta_E_ev)
    assert r.R_dec == pytest.approx(2.161, rel=1e-3)
