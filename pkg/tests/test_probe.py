import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_cqed import (
    DegenerateParameterError,
    GridSpec,
    SingularSystemError,
    c_minus_closed_form,
    derive_detunings,
    epsilon_out,
    lambda_coeffs,
    load_preset,
    response_linear_solve,
    solve_steady_state,
    sweep_response,
)
from hybrid_cqed.model import HBAR, TWO_PI
from hybrid_cqed.probe import lambda_values, response_closed_form

from conftest import bare_cavity, random_draw


def _setup(p, d, delta=None):
    s = solve_steady_state(p, d)
    det = derive_detunings(p, d)
    if delta is not None:
        det = det.with_delta(delta)
    return s, det


def test_lambda_mpmath_oracle(fig2_iii):
    p, d = fig2_iii
    s, det = _setup(p, d, p.omega_mech)
    lam = lambda_coeffs(s, p, det)
    mp.mp.dps = 40
    j = mp.mpc(0, 1)
    f = mp.mpf
    c0sq = f(s.c0.real) ** 2 + f(s.c0.imag) ** 2
    gc, ga, gm = f(p.gamma_cavity), f(p.gamma_qubit), f(p.gamma_mech)
    wm, m, hb, chi, g = f(p.omega_mech), f(p.mass), f(HBAR), f(p.chi), f(p.g_qubit)
    d3, d2, sz = f(s.delta3), f(det.delta2), f(p.sigma_z_ss)

    def raw(x):
        mm = m * hb * (wm**2 - j * gm * x - x**2)
        l3 = j * chi**2 * c0sq / mm
        return gc - j * d3 - j * x + l3, g**2 * sz / (ga - j * d2 - j * x), l3, mm

    x = f(det.delta)
    l1, l2, l3, mm = raw(x)
    l1m, l2m, _, _ = raw(-x)
    l1p, l2p = mp.conj(l1m), mp.conj(l2m)
    a = (l1 - l3) * (l1p + l3)
    for got, want in (
        (lam.lambda1, l1),
        (lam.lambda2, l2),
        (lam.lambda3, l3),
        (lam.lambda1_plus, l1p),
        (lam.lambda2_plus, l2p),
        (lam.a_factor, a),
        (lam.m_of_delta, mm),
    ):
        assert abs(complex(got) - complex(want)) <= 1e-13 * abs(complex(want))
    mp.mp.dps = 15


def test_lambda_chi_zero(fig2):
    p, d = fig2.resolve("ii")
    s, det = _setup(p, d, 1.1 * p.omega_mech)
    lam = lambda_coeffs(s, p, det)
    assert lam.lambda3 == 0
    assert lam.lambda1 == p.gamma_cavity - 1j * s.delta3 - 1j * det.delta


def test_lambda_g_zero(fig2):
    p, d = fig2.resolve("i")
    s, det = _setup(p, d, p.omega_mech)
    lam = lambda_coeffs(s, p, det)
    assert lam.lambda2 == 0 and lam.lambda2_plus == 0


def test_lambda_degenerate(fig2_iii):
    p, d = fig2_iii
    p = p.replace(gamma_mech=0.0)
    s, det = _setup(p, d, p.omega_mech)
    with pytest.raises(DegenerateParameterError):
        lambda_coeffs(s, p, det)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lambda_dagger_symmetry(seed):
    rng = np.random.default_rng(seed)
    p, d = random_draw(rng, load_preset("fig2").resolve("iii"))
    s = solve_steady_state(p, d)
    x = rng.uniform(-3, 3, 64) * p.omega_mech
    det = derive_detunings(p, d)
    a = lambda_values(s, p, det.delta2, x)
    b = lambda_values(s, p, det.delta2, -x)
    assert np.allclose(a.lambda1_plus, np.conj(b.lambda1), rtol=1e-15, atol=0)
    assert np.allclose(a.lambda2_plus, np.conj(b.lambda2), rtol=1e-15, atol=0)
    assert np.array_equal(a.lambda3, 1j * p.chi**2 * abs(s.c0) ** 2 / a.m_of_delta)


def test_bare_cavity_closed_and_solve(bare):
    p, d = bare
    s, det = _setup(p, d)
    delta = det.delta1 + np.linspace(-3, 3, 41) * p.gamma_cavity
    dd = det.with_delta(delta)
    want = d.epsilon / (p.gamma_cavity + 1j * det.delta1 - 1j * delta)
    closed = c_minus_closed_form(lambda_coeffs(s, p, dd), s.delta3, d.epsilon)
    solved = response_linear_solve(s, p, dd, d.epsilon)
    assert np.allclose(closed, want, rtol=1e-13, atol=0)
    assert np.allclose(solved.c_minus, want, rtol=1e-13, atol=0)
    assert np.all(solved.c_plus == 0)


def test_epsilon_out_examples():
    eps, gc = 2.5, 7.0
    e, mu, nu = epsilon_out(eps / gc, gc, eps)
    assert e == pytest.approx(2.0, abs=1e-15) and mu == pytest.approx(2.0, abs=1e-15) and nu == 0.0
    _, mu, nu = epsilon_out(3j, gc, eps)
    assert mu == 0.0 and nu == pytest.approx(2 * gc * 3 / eps)
    with pytest.raises(ValueError):
        epsilon_out(1.0, gc, 0.0)


def test_single_point_sweep(bare):
    p, d = bare
    det = derive_detunings(p, d)
    sw = sweep_response(p, d, np.array([det.delta1]))
    assert sw.mu_p[0] == pytest.approx(2.0, abs=1e-12)
    assert abs(sw.nu_p[0]) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_c_plus_zero_without_mechanics(seed):
    p, d = random_draw(np.random.default_rng(seed), load_preset("fig3").resolve("i"))
    s, det = _setup(p, d)
    r = response_linear_solve(s, p, det.with_delta(np.linspace(0.5, 1.5, 7) * p.omega_mech), d.epsilon)
    assert np.all(r.c_plus == 0)


def test_epsilon_linearity(fig2_iii):
    p, d = fig2_iii
    s, det = _setup(p, d)
    dd = det.with_delta(p.omega_mech * np.linspace(0.99, 1.01, 11))
    ref_c = response_closed_form(s, p, dd, d.epsilon).eps_out
    ref_s = response_linear_solve(s, p, dd, d.epsilon).eps_out
    for eps in np.logspace(-3, 3, 7) * d.epsilon:
        assert np.allclose(response_closed_form(s, p, dd, eps).eps_out, ref_c, rtol=1e-12, atol=0)
        assert np.allclose(response_linear_solve(s, p, dd, eps).eps_out, ref_s, rtol=1e-12, atol=0)
    r2 = response_linear_solve(s, p, dd, 2 * d.epsilon)
    assert np.allclose(r2.c_minus, 2 * response_linear_solve(s, p, dd, d.epsilon).c_minus, rtol=1e-14)


def test_quadratures_real(fig2_iii):
    p, d = fig2_iii
    sw = sweep_response(p, d, load_preset("fig2").grid, method="both")
    assert sw.mu_p.dtype == float and sw.nu_p.dtype == float
    assert np.allclose(sw.mu_p + 1j * sw.nu_p, sw.eps_out, rtol=0, atol=1e-12)
    assert sw.max_deviation <= 1e-9


def _reduced_solve(p, s, det, delta, eps, keep):
    """Sideband solve with only the cavity and the ``keep`` subsystem."""
    n = delta.size
    out = np.empty(n, complex)
    for i, dl in enumerate(delta):
        a = np.zeros((4, 4), complex)
        a[0, 0] = p.gamma_cavity + 1j * s.delta3 - 1j * dl
        a[1, 1] = p.gamma_cavity - 1j * s.delta3 - 1j * dl
        if keep == "qubit":
            g, sz = p.g_qubit, p.sigma_z_ss
            a[0, 2], a[1, 3] = 1j * g, -1j * g
            a[2, 2] = p.gamma_qubit + 1j * det.delta2 - 1j * dl
            a[3, 3] = p.gamma_qubit - 1j * det.delta2 - 1j * dl
            a[2, 0], a[3, 1] = -1j * g * sz, 1j * g * sz
        else:
            # Q_- and Q_+* in metres, driven by the beat chi(C0* C_- + C0 C_+*)
            m = p.mass * (p.omega_mech**2 - 1j * p.gamma_mech * dl - dl**2)
            a[0, 2] = -1j * p.chi * s.c0 / HBAR
            a[1, 3] = 1j * p.chi * np.conj(s.c0) / HBAR
            for r in (2, 3):
                a[r, r] = m
                a[r, 0] = -p.chi * np.conj(s.c0)
                a[r, 1] = -p.chi * s.c0
        rhs = np.array([eps, 0, 0, 0], complex)
        out[i] = np.linalg.solve(a, rhs)[0]
    return out


def _limit_deviation(base, drop, factor, npoints=201):
    p, d = base
    name = "chi" if drop == "chi" else "g_qubit"
    p = p.replace(**{name: factor * getattr(p, name)})
    s, det = _setup(p, d)
    delta = p.omega_mech * np.linspace(0.99, 1.01, npoints)
    full = response_closed_form(s, p, det.with_delta(delta), d.epsilon).c_minus
    red = _reduced_solve(p, s, det, delta, d.epsilon, "qubit" if drop == "chi" else "mech")
    return float(np.max(np.abs(full - red) / np.abs(red)))


def test_limit_reduction_g(fig2_iii):
    assert _limit_deviation(fig2_iii, "g", 1e-4) <= 1e-6


@pytest.mark.xfail(
    strict=True,
    reason="at Delta = omega_m the mechanical Q (~3e5) amplifies the residual chi^2 term to ~1.8e-4; "
    "the 1e-6 bound is first met at 1e-5x coupling",
)
def test_limit_reduction_chi(fig2_iii):
    assert _limit_deviation(fig2_iii, "chi", 1e-4) <= 1e-6


def test_limit_reduction_chi_convergence(fig2_iii):
    devs = [_limit_deviation(fig2_iii, "chi", f) for f in (1e-4, 1e-5, 1e-6)]
    # deviation is second order in chi
    assert devs[0] / devs[1] == pytest.approx(100, rel=0.01)
    assert devs[1] / devs[2] == pytest.approx(100, rel=0.01)
    assert devs[1] <= 1e-5 and devs[2] <= 1e-6


def test_sweep_shares_steady_state(fig2_iii):
    p, d = fig2_iii
    s = solve_steady_state(p, d)
    sw = sweep_response(p, d, GridSpec(p.omega_mech, 0.02 * p.omega_mech, 11))
    assert sw.steady == s
    assert len(sw.responses) == 11
    assert np.all(np.isnan(sw.c_plus)) and np.all(np.isnan(sw.method_deviation))


def test_sweep_rejects_bad_grids(fig2_iii):
    with pytest.raises(ValueError):
        sweep_response(*fig2_iii, np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        sweep_response(*fig2_iii, np.array([]))
    with pytest.raises(ValueError):
        sweep_response(*fig2_iii, np.array([1.0]), method="exact")


def test_sweep_flags_degenerate_point(fig2_iii):
    p, d = fig2_iii
    p = p.replace(gamma_mech=0.0)
    grid = p.omega_mech * np.array([0.99, 1.0, 1.01])
    sw = sweep_response(p, d, grid, method="closed")
    assert np.isnan(sw.mu_p[1]) and sw.flags[1].startswith("DegenerateParameterError")
    assert np.isfinite(sw.mu_p[[0, 2]]).all() and sw.flags[0] == sw.flags[2] == ""


def test_closed_form_exact_pole():
    from hybrid_cqed.probe import LambdaSet

    lam = LambdaSet(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    with pytest.raises(SingularSystemError):
        c_minus_closed_form(lam, 0.0, 1.0)


def test_fig3_grid_three_variants():
    pr = load_preset("fig3")
    curves = {v: sweep_response(*pr.resolve(v), pr.grid, method="both") for v in pr.variant_labels}
    for v, sw in curves.items():
        assert sw.detuning_grid[0] == pytest.approx(TWO_PI * 20e6)
        assert sw.detuning_grid[-1] == pytest.approx(TWO_PI * 50e6)
        assert sw.max_deviation <= 1e-9, v
    assert not np.allclose(curves["i"].mu_p, curves["iii"].mu_p)
