"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line (see the "acceptance criteria" section of
the pytest summary) and then asserts, so a failing criterion is a red test.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from hybrid_cqed import (
    PRESET_NAMES,
    c_minus_closed_form,
    derive_detunings,
    g2_of_tau,
    load_preset,
    response_linear_solve,
    solve_steady_state,
    sweep_response,
    temperature_trend,
    validate_suite,
)
from hybrid_cqed.coherence import QUAD_RTOL, y14_dense_trapezoid, y_integrals
from hybrid_cqed.fluctuations import SpectralKernels
from hybrid_cqed.model import TWO_PI
from hybrid_cqed.probe import lambda_values

from conftest import bare_cavity, random_draw, record_criterion

ARTIFACTS = Path(__file__).parent / "artifacts"


def _check(number, ok, elapsed, budget, detail):
    passed = bool(ok) and elapsed < budget
    record_criterion(number, passed, f"{detail}; {elapsed:.2f} s (budget {budget:g} s)")
    assert ok, detail
    assert elapsed < budget, f"runtime {elapsed:.2f} s exceeds {budget} s"


def _tau_grid(p, n=201):
    return np.linspace(0.0, 100.0 / p.gamma_cavity, n)


def _fig2_sweep(variant):
    preset = load_preset("fig2")
    p, d = preset.resolve(variant)
    return p, sweep_response(p, d, preset.grid)


def test_criterion_01_bare_cavity():
    t0 = time.perf_counter()
    p, d = bare_cavity()
    det = derive_detunings(p, d)
    gc, d1 = p.gamma_cavity, det.delta1
    at = sweep_response(p, d, np.array([d1]))
    grid = d1 + np.linspace(-5, 5, 101) * gc
    sw = sweep_response(p, d, grid)
    elapsed = time.perf_counter() - t0
    want = 2 * gc / (gc + 1j * (d1 - grid))
    mu_err, nu_err = abs(at.mu_p[0] - 2.0), abs(at.nu_p[0])
    rel = float(np.max(np.abs(sw.eps_out - want) / np.abs(want)))
    ok = mu_err <= 1e-12 and nu_err <= 1e-12 and rel <= 1e-12
    _check(1, ok, elapsed, 1.0, f"|mu-2|={mu_err:.1e}, |nu|={nu_err:.1e}, Lorentzian rel={rel:.1e}")


def test_criterion_02_omit_dip():
    t0 = time.perf_counter()
    p, sw = _fig2_sweep("i")
    elapsed = time.perf_counter() - t0
    wm = p.omega_mech
    assert sw.detuning_grid.size == 2001
    k = int(np.argmin(sw.mu_p))
    interior = 0 < k < sw.mu_p.size - 1
    offset = abs(sw.detuning_grid[k] - wm) / wm
    window = np.abs(sw.detuning_grid - wm) <= 0.01 * wm
    mu_min = float(np.min(sw.mu_p[window]))
    ok = interior and offset <= 1e-3 and mu_min < 0
    _check(2, ok, elapsed, 5.0, f"dip at (Delta-wm)/wm={offset:.1e}, min mu_p={mu_min:.4g}")


def test_criterion_03_no_coupling_null():
    t0 = time.perf_counter()
    _, sw_ii = _fig2_sweep("ii")
    elapsed = time.perf_counter() - t0
    _, sw_i = _fig2_sweep("i")
    depth = float(np.max(sw_i.mu_p) - np.min(sw_i.mu_p))
    tv = float(np.sum(np.abs(np.diff(sw_ii.mu_p))))
    ok = tv <= 0.01 * depth
    _check(3, ok, elapsed, 5.0, f"TV(mu_p, ii)={tv:.4g} vs 1% of dip depth {depth:.4g}")


def _max_gain(preset, variant):
    p, d = preset.resolve(variant)
    return float(np.max(-sweep_response(p, d, preset.grid).mu_p))


def test_criterion_04_gain_monotonicity():
    t0 = time.perf_counter()
    out = {}
    for name in ("fig4a", "fig4b"):
        preset = load_preset(name)
        out[name] = [_max_gain(preset, v) for v in preset.variant_labels]
    elapsed = time.perf_counter() - t0
    g_hz = [load_preset("fig4a").resolve(v)[0].g_qubit / TWO_PI for v in load_preset("fig4a").variant_labels]
    assert np.allclose(g_hz, [21.7e6, 31.7e6, 41.7e6])
    ok = all(np.all(np.diff(gains) > 0) for gains in out.values())
    detail = ", ".join(f"{n}: " + " < ".join(f"{x:.4g}" for x in g) for n, g in out.items())
    _check(4, ok, elapsed, 30.0, detail)


def test_criterion_05_closed_form_vs_solve():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240605)
    base = load_preset("fig2").resolve("iii")
    dev = {"plus": 0.0, "minus": 0.0}
    for _ in range(100):
        p, d = random_draw(rng, base)
        ss = solve_steady_state(p, d)
        det = derive_detunings(p, d)
        delta = np.sort(p.omega_mech * rng.uniform(0.9, 1.1, 5))
        dd = det.with_delta(delta)
        ref = response_linear_solve(ss, p, dd, d.epsilon).c_minus
        for form in dev:
            lam = lambda_values(ss, p, det.delta2, delta, a_form=form)
            cm = c_minus_closed_form(lam, ss.delta3, d.epsilon)
            dev[form] = max(dev[form], float(np.max(np.abs(cm - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - t0
    validated = min(dev, key=dev.get)
    ARTIFACTS.mkdir(exist_ok=True)
    (ARTIFACTS / "sign_resolution.json").write_text(
        json.dumps(
            {
                "validated_a_form": validated,
                "max_relative_deviation": dev,
                "draws": 100,
                "spread": 0.5,
                "note": "A = (L1 - L3)(L1+ + L3); the minus form is kept as a switchable alternative",
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    ok = validated == "plus" and dev["plus"] <= 1e-9
    _check(5, ok, elapsed, 10.0, f"max rel dev plus={dev['plus']:.1e}, minus={dev['minus']:.1e}")


@pytest.mark.slow
def test_criterion_06_time_domain():
    t0 = time.perf_counter()
    rows = validate_suite(PRESET_NAMES, npoints=5, all_variants=True)
    elapsed = time.perf_counter() - t0
    bad = [(r.preset, r.variant, r.quantity, r.deviation, r.message) for r in rows if not r.passed]
    worst = max(r.deviation for r in rows)
    n_int = sum(r.quantity == "steady_intensity" for r in rows)
    n_cm = sum(r.quantity == "c_minus" for r in rows)
    ok = not bad and n_cm == 5 * n_int and worst <= 1e-3
    _check(6, ok, elapsed, 300.0, f"{n_int} variants, {n_cm} C- points, worst rel dev={worst:.1e}, failures={bad}")


_COUPLED = [(n, v) for n in PRESET_NAMES for v in load_preset(n).variant_labels]


def test_criterion_07_coherent_limit():
    p, d = bare_cavity()
    t0 = time.perf_counter()
    s = g2_of_tau(p, d, _tau_grid(p))
    slowest = time.perf_counter() - t0
    dev0 = float(np.max(np.abs(s.g2_values - 1.0)))
    lines = []
    for name, v in _COUPLED:
        t1 = time.perf_counter()
        p, d = load_preset(name).resolve(v)
        tmax = 100.0 / p.gamma_cavity
        s = g2_of_tau(p, d, [tmax])
        slowest = max(slowest, time.perf_counter() - t1)
        dev, tol = abs(s.g2_values[0] - 1.0), 10 * s.quadrature_error[0]
        if not dev <= tol:
            lines.append(f"{name}/{v}: |g2-1|={dev:.1e} > {tol:.1e}")
    ok = dev0 <= 1e-10 and not lines
    good = "all coupled presets within 10x quadrature error"
    detail = f"uncoupled max|g2-1|={dev0:.1e}; " + (good if not lines else "; ".join(lines))
    _check(7, ok, slowest, 60.0, detail + "; runtime is the slowest preset")


def test_criterion_08_drive_trend():
    t0 = time.perf_counter()
    p5, d5 = load_preset("fig5").resolve("iii")
    p6, d6 = load_preset("fig6").resolve("iii")
    assert d5.big_omega == pytest.approx(TWO_PI * 3.1e6) and d6.big_omega == pytest.approx(TWO_PI * 0.22e6)
    strong = g2_of_tau(p5, d5, _tau_grid(p5)).nonclassicality
    weak = g2_of_tau(p6, d6, _tau_grid(p6)).nonclassicality
    elapsed = time.perf_counter() - t0
    _check(8, weak > strong, elapsed, 120.0, f"max|g2-1| at 0.22 MHz={weak:.4g}, at 3.1 MHz={strong:.4g}")


def test_criterion_09_temperature_trend():
    t0 = time.perf_counter()
    p, d = load_preset("fig5").resolve("i")
    tr = temperature_trend(p, d, [0.0, 0.01, 0.1, 1.0], _tau_grid(p))
    elapsed = time.perf_counter() - t0
    detail = "measures " + ", ".join(f"T={t:g} K: {m:.4g}" for t, m in zip(tr.temperatures, tr.measures))
    _check(9, tr.non_increasing, elapsed, 300.0, detail)


def test_criterion_10_quadrature_robustness():
    t0 = time.perf_counter()
    p, d = load_preset("fig5").resolve("iii")
    k = SpectralKernels.build(solve_steady_state(p, d), p, d)
    adaptive = y_integrals(k, [0.0], rtol=QUAD_RTOL).y14
    brute = y14_dense_trapezoid(k, 1_000_000)
    elapsed = time.perf_counter() - t0
    rel = abs(adaptive - brute) / abs(brute)
    _check(10, rel <= 1e-4, elapsed, 120.0, f"y14 adaptive={adaptive:.10g}, trapezoid={brute:.10g}, rel={rel:.1e}")
