import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kdsim.oracles import gaussian_beam_width
from kdsim.params import ExperimentConfig, PlaneGrid, derive_beam
from kdsim.wave_optics import (
    LaserGrating, SamplingError, WaveField, apply_gaussian_slit, apply_laser_phase,
    check_config_sampling, exact_phase, laser_phase, make_grating, max_spacing, point_source,
    ponderomotive_depth, propagate,
)

LAM = derive_beam(2500.0).lambda_dB
G_IN = PlaneGrid(8.192e-6, 4096)
G_OUT = PlaneGrid(16.384e-6, 8192)


def gaussian(w0=0.5e-6, center=0.0, grid=G_IN, tilt=0.0):
    x = grid.origin + grid.spacing * np.arange(grid.samples)
    amps = np.exp(-((x - center) ** 2) / (2 * w0**2) + 1j * tilt * x)
    return WaveField(amps, grid.spacing, grid.origin, "slit2", LAM)


def rms_width(f):
    inten = f.intensity()
    m = np.sum(f.x * inten) / np.sum(inten)
    return math.sqrt(float(np.sum((f.x - m) ** 2 * inten) / np.sum(inten)))


@pytest.mark.parametrize("method", ["fresnel", "exact"])
@pytest.mark.parametrize("L", [5e-3, 1e-2, 5e-2])
def test_gaussian_beam_width(method, L):
    g = propagate(gaussian(), L, G_OUT, method)
    assert rms_width(g) == pytest.approx(gaussian_beam_width(0.5e-6, L, LAM), rel=5e-3)


def test_exact_matches_fresnel_near_axis():
    a = propagate(gaussian(), 1e-2, G_OUT, "fresnel").amplitudes
    b = propagate(gaussian(), 1e-2, G_OUT, "exact").amplitudes
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-3


def test_exact_phase_is_stable_for_small_offsets():
    u = np.array([1e-12, 1e-6, 1e-3])
    L = 0.24
    k = 2 * math.pi / LAM
    direct = k * (np.sqrt(u**2 + L**2) - L)
    assert np.allclose(exact_phase(u, L, LAM), direct, rtol=1e-6, atol=1e-9)
    assert exact_phase(u[:1], L, LAM)[0] > 0


def test_point_source_fresnel_magnitude():
    """A discrete delta spreads into a flat magnitude dx / sqrt(lambda L)."""
    src = point_source(0.0, G_IN, LAM)
    L = 1e-2
    out = propagate(src, L, G_OUT, "fresnel", normalize=False)
    assert np.allclose(np.abs(out.amplitudes), G_IN.spacing / math.sqrt(LAM * L), rtol=1e-9)


@pytest.mark.parametrize("method", ["fresnel", "exact"])
def test_unitarity(method):
    f = gaussian()
    g = propagate(f, 1e-2, G_OUT, method, normalize=False)
    assert g.norm() == pytest.approx(f.norm(), rel=1e-4)


def test_tilted_beam_moves_along_its_angle():
    k = 2 * math.pi / LAM
    theta = 2e-4
    g = propagate(gaussian(tilt=k * theta), 2e-2, G_OUT, "fresnel")
    inten = g.intensity()
    centroid = float(np.sum(g.x * inten) / np.sum(inten))
    assert centroid == pytest.approx(theta * 2e-2, rel=1e-3)


coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=20, deadline=None)
@given(coef, coef, st.floats(-2e-6, 2e-6))
def test_linearity(a, b, shift):
    f, g = gaussian(), gaussian(0.3e-6, center=shift)
    combo = WaveField(a * f.amplitudes + b * g.amplitudes, f.spacing, f.origin, f.plane, LAM)
    lhs = propagate(combo, 1e-2, G_OUT, normalize=False).amplitudes
    rhs = (a * propagate(f, 1e-2, G_OUT, normalize=False).amplitudes
           + b * propagate(g, 1e-2, G_OUT, normalize=False).amplitudes)
    scale = max(np.abs(rhs).max(), 1e-300)
    assert np.abs(lhs - rhs).max() <= 1e-10 * scale + 1e-300


@pytest.mark.parametrize("method", ["fresnel", "exact"])
def test_mirror_symmetry(method):
    out = propagate(gaussian(), 1e-2, G_OUT, method).amplitudes
    assert np.allclose(out[1:], out[1:][::-1], rtol=0, atol=1e-9 * np.abs(out).max())


def test_normalize_flag():
    f = gaussian()
    assert propagate(f, 1e-2, G_OUT).norm() == pytest.approx(1.0)
    assert propagate(f, 1e-2, G_OUT, normalize=False).norm() == pytest.approx(f.norm(), rel=1e-4)


def test_sampling_violation_reports_grid_size():
    coarse = PlaneGrid(8.192e-6, 256)
    f = gaussian(grid=coarse)
    with pytest.raises(SamplingError, match="need at least"):
        propagate(f, 1e-4, G_OUT)
    assert max_spacing(LAM, 1.0, 0.0) == math.inf
    assert max_spacing(LAM, 1.0, 1e-3, "exact") > max_spacing(LAM, 1.0, 1e-3, "fresnel")


def test_default_chain_satisfies_sampling():
    check_config_sampling(ExperimentConfig(), derive_beam(2500.0))


def test_bad_distance_and_method():
    with pytest.raises(ValueError):
        propagate(gaussian(), 0.0, G_OUT)
    with pytest.raises(ValueError):
        propagate(gaussian(), 1e-2, G_OUT, "angular")


def test_point_source_outside_window():
    with pytest.raises(ValueError):
        point_source(1.0, G_IN, LAM)


def test_gaussian_slit_identities():
    f = gaussian(2e-6)
    twice = apply_gaussian_slit(apply_gaussian_slit(f, 1e-6), 1e-6)
    once = apply_gaussian_slit(f, 1e-6 / math.sqrt(2))
    assert np.allclose(twice.amplitudes, once.amplitudes, rtol=1e-12, atol=1e-300)
    wide = apply_gaussian_slit(f, 1.0)
    assert np.allclose(wide.amplitudes, f.amplitudes, rtol=1e-9)
    with pytest.raises(ValueError):
        apply_gaussian_slit(f, 0.0)


def test_ponderomotive_depth_closed_form():
    e, m, eps0, c = 1.602176634e-19, 9.1093837015e-31, 8.8541878128e-12, 299792458.0
    omega = 2 * math.pi * c / 532e-9
    v0 = e**2 * 1e14 / (2 * m * eps0 * c * omega**2)
    assert ponderomotive_depth(1e14, 532e-9) == pytest.approx(v0, rel=1e-8)
    assert v0 == pytest.approx(4.23e-23, rel=2e-3)


def test_phase_amplitude_at_reference_crossing_time():
    v0 = ponderomotive_depth(1e14, 532e-9)
    g = LaserGrating(V0=v0, k_laser=2 * math.pi / 532e-9, t_ell=4.2e-12, offset=0.0)
    assert g.phase_amplitude == pytest.approx(v0 * 4.2e-12 / (2 * 1.054571817e-34), rel=1e-8)
    assert g.phase_amplitude == pytest.approx(0.842, abs=2e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1e15), st.floats(-1e-6, 1e-6))
def test_laser_phase_is_unitary_and_half_period(intensity, offset):
    cfg = ExperimentConfig(laser_intensity=intensity, laser_offset=offset)
    g = make_grating(cfg, derive_beam(2500.0))
    f = gaussian(2e-6)
    after = apply_laser_phase(f, g)
    assert np.allclose(np.abs(after.amplitudes), np.abs(f.amplitudes), rtol=1e-12)
    shifted = LaserGrating(g.V0, g.k_laser, g.t_ell, offset + 532e-9 / 2)
    p0, p1 = laser_phase(f.x, g), laser_phase(f.x, shifted)
    assert np.allclose(p0, p1, rtol=1e-9, atol=1e-9 * (1 + 2 * g.phase_amplitude))


def test_grating_uses_energy_reduced_velocity():
    slow = derive_beam(2000.0)
    g = make_grating(ExperimentConfig(), slow)
    assert g.t_ell == pytest.approx(125e-6 / slow.velocity)
    g = make_grating(ExperimentConfig(laser_crossing_time=4.2e-12), slow)
    assert g.t_ell == 4.2e-12
