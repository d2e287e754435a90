"""Acceptance criteria, one test per criterion.

Each test records a single pass/fail line, printed immediately and repeated in
the terminal summary.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from kdsim.coherence_analysis import calibrate_source_width, plane_density
from kdsim.oracles import bessel_sum_rule, gaussian_waist, method_equivalence, raman_nath
from kdsim.params import ExperimentConfig, derive_beam
from kdsim.pattern_analysis import contrast, peak_shift
from kdsim.simulation import plane_fields, run_experiment, screen_pattern
from kdsim.wave_optics import apply_laser_phase, make_grating
from kdsim.zurek_model import build_report

DX_REF = 2.08e-7
R_TARGETS = {2e-6: 2.185, 1e-6: 69.9}
DE_TARGETS = {2e-6: 68.0, 1e-6: 545.0}


def record(number, passed, detail, elapsed):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail} ({elapsed:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


@pytest.fixture(scope="module")
def calibrated_widths():
    """First-slit width for each plate height, from its decoherence amount."""
    cfg = ExperimentConfig()
    return {h: calibrate_source_width(cfg, r, DX_REF)[0] for h, r in R_TARGETS.items()}


def test_criterion_1_energy_loss():
    t0 = time.perf_counter()
    cfg = ExperimentConfig()
    de = {h: build_report(cfg.with_(plate_height=h)).delta_E_ev for h in DE_TARGETS}
    errs = [abs(de[h] / DE_TARGETS[h] - 1) for h in DE_TARGETS]
    ratio = de[1e-6] / de[2e-6]
    ok = max(errs) <= 0.10 and abs(ratio / 8 - 1) <= 0.01
    record(1, ok, f"dE(2um)={de[2e-6]:.2f} eV, dE(1um)={de[1e-6]:.1f} eV, ratio {ratio:.6f}",
           time.perf_counter() - t0)
    assert ok


def test_criterion_2_decoherence_amount():
    t0 = time.perf_counter()
    cfg = ExperimentConfig()
    r = {h: build_report(cfg.with_(plate_height=h), DX_REF).R_dec for h in R_TARGETS}
    errs = [abs(r[h] / R_TARGETS[h] - 1) for h in R_TARGETS]
    ratio_errs = []
    for dx in (5e-8, DX_REF, 1e-6, 3e-5):
        a = build_report(cfg.with_(plate_height=1e-6), dx).R_dec
        b = build_report(cfg.with_(plate_height=2e-6), dx).R_dec
        ratio_errs.append(abs(a / b / 32 - 1))
    ok = max(errs) <= 0.10 and max(ratio_errs) <= 1e-6
    record(2, ok, f"R(2um)={r[2e-6]:.4g}, R(1um)={r[1e-6]:.4g} at dx={DX_REF:g} m, "
           f"max ratio-32 error {max(ratio_errs):.1e}", time.perf_counter() - t0)
    assert ok


def test_criterion_3_raman_nath():
    t0 = time.perf_counter()
    pops, rule = raman_nath(max_order=3, tol=0.01), bessel_sum_rule(tol=1e-10)
    ok = pops.passed and rule.passed
    record(3, ok, f"{pops.detail}; {rule.detail}", time.perf_counter() - t0)
    assert ok


def test_criterion_4_propagation_oracles():
    t0 = time.perf_counter()
    checks = [method_equivalence(tol=1e-3), gaussian_waist("fresnel"), gaussian_waist("exact")]
    ok = all(c.passed for c in checks)
    record(4, ok, "; ".join(f"{c.name}: {c.value:.2e}" for c in checks), time.perf_counter() - t0)
    assert ok


def figure_configs(widths, intensity):
    cfg = ExperimentConfig(laser_intensity=intensity)
    return {
        "no plate": cfg,
        "h_p=2um": cfg.with_(plate_height=2e-6, slit1_width=widths[2e-6]),
        "h_p=1um": cfg.with_(plate_height=1e-6, slit1_width=widths[1e-6]),
    }


def test_criterion_5_contrast_ordering(calibrated_widths):
    t0 = time.perf_counter()
    c = {k: run_experiment(v).contrast for k, v in figure_configs(calibrated_widths, 1e14).items()}
    ok = c["no plate"] > c["h_p=2um"] > c["h_p=1um"] and c["h_p=1um"] < 0.1
    record(5, ok, ", ".join(f"{k}: {v:.4g}" for k, v in c.items()), time.perf_counter() - t0)
    assert ok


def test_criterion_6_peak_shift(calibrated_widths):
    t0 = time.perf_counter()
    runs = {k: run_experiment(v) for k, v in figure_configs(calibrated_widths, 18e14).items()}
    base = runs["no plate"].peaks
    s2 = peak_shift(base, runs["h_p=2um"].peaks, 13)
    s1 = peak_shift(base, runs["h_p=1um"].peaks, 13)
    ok2, ok1 = s2 < 0.02, abs(s1 - 0.35) <= 0.10
    record(6, ok2 and ok1,
           f"order-13 shift {100 * s2:.2f}% at dE=68 eV ({'ok' if ok2 else 'needs < 2%'}), "
           f"{100 * s1:.2f}% at dE=545 eV ({'ok' if ok1 else 'needs 35 +- 10%'})",
           time.perf_counter() - t0)
    assert ok2 and ok1


def property_checks(small_grid, calibrated_widths):
    cfg = ExperimentConfig(grid=small_grid)
    beam = derive_beam(cfg.beam_energy)
    out = {}

    rho = plane_density(cfg, beam, "before_laser", 15e-6, max_size=128).values
    out["density matrix Hermitian, unit trace, PSD"] = (
        np.allclose(rho, rho.conj().T, atol=1e-14)
        and abs(np.trace(rho).real - 1) < 1e-12
        and np.linalg.eigvalsh(rho).min() > -1e-12)

    f = plane_fields(cfg, beam, "before_laser", sigma=0.0)[0][0]
    g = apply_laser_phase(f, make_grating(cfg.with_(laser_intensity=18e14), beam))
    out["laser phase unitary"] = np.allclose(np.abs(g.amplitudes), np.abs(f.amplitudes), rtol=1e-12)

    p = screen_pattern(cfg, beam)
    d = p.density
    out["pattern normalized and mirror symmetric"] = (
        abs(p.area() - 1) < 1e-9 and np.allclose(d[1:], d[1:][::-1], atol=1e-8 * d.max()))

    by_w1 = [run_experiment(cfg.with_(slit1_width=w)).contrast for w in (3e-6, 6.7e-6, 15e-6)]
    by_sd = [contrast(screen_pattern(cfg.with_(detection_slit=s), beam)) for s in (2e-6, 5e-6, 8e-6)]
    by_se = [contrast(screen_pattern(cfg, beam, sigma=s)) for s in (1e-6, 3.35e-6, 8e-6)]
    mono = lambda v: all(b < a for a, b in zip(v, v[1:]))  # noqa: E731
    out["contrast decreasing in w1, sigma_e, sigma_d"] = mono(by_w1) and mono(by_sd) and mono(by_se)

    out["calibration monotone"] = cfg.slit1_width < calibrated_widths[2e-6] < calibrated_widths[1e-6]

    a = run_experiment(cfg.with_(plate_height=2e-6), threads=1).pattern.density
    b = run_experiment(cfg.with_(plate_height=2e-6), threads=4).pattern.density
    out["deterministic across thread counts"] = np.array_equal(a, b)
    return out


def test_criterion_7_property_suite(small_grid, calibrated_widths):
    t0 = time.perf_counter()
    out = property_checks(small_grid, calibrated_widths)
    failed = [k for k, v in out.items() if not v]
    ok = not failed
    record(7, ok, f"{len(out) - len(failed)}/{len(out)} properties hold"
           + (f", failing: {', '.join(failed)}" if failed else ""), time.perf_counter() - t0)
    assert ok
