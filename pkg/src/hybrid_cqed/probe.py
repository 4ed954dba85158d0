"""First-order (weak-probe) response of the driven hybrid system.

The probe field at omega_p puts sidebands C_-, C_+ on the cavity mean field,
<c> = C0 + C_+ e^{i Delta t} + C_- e^{-i Delta t}.  Two independent routes to
C_- are provided: the closed form in terms of the lambda coefficients and a
direct 6x6 solve of the coefficient-matching equations (the reference).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DegenerateParameterError, SingularSystemError
from .model import HBAR, Detunings, DriveConfig, GridSpec, SystemParams, derive_detunings
from .steady import SteadyState, solve_steady_state

# Sign in front of lambda3 in the second factor of A = (l1 - l3)(l1+ +/- l3).
# "plus" is the printed form of A and is what the linear solve confirms.
A_FORMS = ("plus", "minus")
METHODS = ("closed", "solve", "both")


@dataclass(frozen=True)
class LambdaSet:
    """lambda coefficients at one or many probe detunings (arrays broadcast)."""

    lambda1: Any
    lambda2: Any
    lambda3: Any
    lambda1_plus: Any
    lambda2_plus: Any
    a_factor: Any
    m_of_delta: Any


def mechanical_denominator(params: SystemParams, x) -> np.ndarray:
    """M(x) = m hbar (omega_m^2 - i gamma_m x - x^2)."""
    x = np.asarray(x, dtype=float)
    return params.mass * HBAR * (params.omega_mech**2 - 1j * params.gamma_mech * x - x * x)


def _lambda_core(steady: SteadyState, params: SystemParams, delta2: float, x):
    """(lambda1, lambda2, lambda3, M, lambda1 - lambda3) at frequency argument x (Delta or omega)."""
    m = mechanical_denominator(params, x)
    if np.any(m == 0):
        raise DegenerateParameterError("M vanishes: gamma_m = 0 with the argument at +/- omega_m")
    l3 = 1j * params.chi**2 * abs(steady.c0) ** 2 / m
    bare = params.gamma_cavity - 1j * steady.delta3 - 1j * x
    l2 = params.g_qubit**2 * params.sigma_z_ss / (params.gamma_qubit - 1j * delta2 - 1j * x)
    return bare + l3, l2, l3, m, bare


def lambda_values(steady: SteadyState, params: SystemParams, delta2: float, x, a_form: str = "plus") -> LambdaSet:
    """LambdaSet at an arbitrary real argument ``x`` (probe detuning or noise frequency)."""
    if a_form not in A_FORMS:
        raise ValueError(f"a_form must be one of {A_FORMS}")
    x = np.asarray(x, dtype=float)
    l1, l2, l3, m, bare = _lambda_core(steady, params, delta2, x)
    l1m, l2m, l3m, _, bare_m = _lambda_core(steady, params, delta2, -x)
    l1p, l2p = np.conj(l1m), np.conj(l2m)
    s = 1.0 if a_form == "plus" else -1.0
    # grouped so the (large) mechanical parts of l1 - l3 and l1+ + s l3 combine
    # before the small cavity parts are added
    a = bare * (np.conj(bare_m) + (np.conj(l3m) + s * l3))
    return LambdaSet(l1, l2, l3, l1p, l2p, a, m)


def lambda_coeffs(steady: SteadyState, params: SystemParams, detunings: Detunings) -> LambdaSet:
    """lambda1, lambda2, lambda3, their '+' partners, A and M at ``detunings.delta``."""
    return lambda_values(steady, params, detunings.delta2, detunings.delta)


def closed_form_denominator(lam: LambdaSet, delta3: float):
    """A + 2i Delta3 lambda3 + l2+ l2 - l2+ l1 - l1+ l2."""
    return (
        lam.a_factor
        + 2j * delta3 * lam.lambda3
        + lam.lambda2_plus * lam.lambda2
        - lam.lambda2_plus * lam.lambda1
        - lam.lambda1_plus * lam.lambda2
    )


def c_minus_closed_form(lam: LambdaSet, delta3: float, epsilon: float):
    """C_- = eps (l1 - l2) / (A + 2i Delta3 l3 + l2+ l2 - l2+ l1 - l1+ l2).

    The A inside ``lam`` decides the variant; build ``lam`` with
    ``a_form="minus"`` to evaluate the alternative sign.

    Raises
    ------
    SingularSystemError
        If the denominator vanishes exactly at any point.
    """
    den = closed_form_denominator(lam, delta3)
    if np.any(den == 0):
        raise SingularSystemError("closed-form denominator vanishes (exact pole)", condition=np.inf)
    return epsilon * (lam.lambda1 - lam.lambda2) / den


def probe_matrix(steady: SteadyState, params: SystemParams, detunings: Detunings) -> np.ndarray:
    """Coefficient matrix of the sideband equations, shape (..., 6, 6).

    Unknowns: [C_-, C_+*, Q_-/x_s, Q_+*/x_s, L_-, L_+*] with x_s the mechanical
    zero-point length; Q_+* and Q_- are kept as separate unknowns and q's
    reality enters through the shared mechanical source chi(C0* C_- + C0 C_+*).
    Mechanical rows are divided by m omega_m^2 x_s to balance the scales.
    """
    p = params
    delta = np.asarray(detunings.delta, dtype=float)
    xs = p.x_scale
    c0 = steady.c0
    sz = p.sigma_z_ss
    g = p.g_qubit
    k_opt = p.chi * xs / HBAR
    k_mech = p.chi / (p.mass * p.omega_mech**2 * xs)
    shift = p.chi * steady.q0 / HBAR
    mech = 1.0 - 1j * p.gamma_mech * delta / p.omega_mech**2 - (delta / p.omega_mech) ** 2

    a = np.zeros(delta.shape + (6, 6), dtype=complex)
    a[..., 0, 0] = p.gamma_cavity + 1j * detunings.delta1 - 1j * shift - 1j * delta
    a[..., 0, 2] = -1j * k_opt * c0
    a[..., 0, 4] = 1j * g
    a[..., 1, 1] = p.gamma_cavity - 1j * detunings.delta1 + 1j * shift - 1j * delta
    a[..., 1, 3] = 1j * k_opt * np.conj(c0)
    a[..., 1, 5] = -1j * g
    for row, col in ((2, 2), (3, 3)):
        a[..., row, col] = mech
        a[..., row, 0] = -k_mech * np.conj(c0)
        a[..., row, 1] = -k_mech * c0
    a[..., 4, 4] = p.gamma_qubit + 1j * detunings.delta2 - 1j * delta
    a[..., 4, 0] = -1j * g * sz
    a[..., 5, 5] = p.gamma_qubit - 1j * detunings.delta2 - 1j * delta
    a[..., 5, 1] = 1j * g * sz
    return a


def _solve_probe(steady, params, detunings, epsilon):
    a = probe_matrix(steady, params, detunings)
    rhs = np.zeros(a.shape[:-1], dtype=complex)
    rhs[..., 0] = epsilon
    try:
        sol = np.linalg.solve(a, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        cond = float(np.max(np.linalg.cond(a)))
        raise SingularSystemError("sideband linear system is singular", condition=cond) from None
    if not np.all(np.isfinite(sol)):
        cond = float(np.max(np.linalg.cond(a)))
        raise SingularSystemError("sideband linear system is singular", condition=cond)
    return sol


@dataclass(frozen=True)
class ProbeResponse:
    c_minus: Any
    c_plus: Any
    eps_out: Any
    mu_p: Any
    nu_p: Any
    method: str


def epsilon_out(c_minus, gamma_cavity: float, epsilon: float):
    """Rescaled output 2 gamma_c C_-/eps and its quadratures (mu_p, nu_p)."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive to normalise the probe response")
    c = np.asarray(c_minus, dtype=complex)
    eps_out = 2.0 * gamma_cavity * c / epsilon
    mu = gamma_cavity * (c + np.conj(c)) / epsilon
    nu = gamma_cavity * (c - np.conj(c)) / (1j * epsilon)
    return eps_out, mu.real, nu.real


def response_linear_solve(
    steady: SteadyState, params: SystemParams, detunings: Detunings, epsilon: float
) -> ProbeResponse:
    """Solve the sideband equations directly; returns C_- and C_+ (not C_+*)."""
    sol = _solve_probe(steady, params, detunings, epsilon)
    c_minus = sol[..., 0]
    c_plus = np.conj(sol[..., 1])
    eps_out, mu, nu = epsilon_out(c_minus, params.gamma_cavity, epsilon)
    return ProbeResponse(c_minus, c_plus, eps_out, mu, nu, "linear_solve")


def response_closed_form(
    steady: SteadyState, params: SystemParams, detunings: Detunings, epsilon: float, a_form: str = "plus"
) -> ProbeResponse:
    lam = lambda_values(steady, params, detunings.delta2, detunings.delta, a_form)
    c_minus = c_minus_closed_form(lam, steady.delta3, epsilon)
    eps_out, mu, nu = epsilon_out(c_minus, params.gamma_cavity, epsilon)
    nan = np.full(np.shape(c_minus), np.nan + 0j)
    return ProbeResponse(c_minus, nan, eps_out, mu, nu, "closed_form")


@dataclass(frozen=True)
class ResponseSweep:
    """Probe response over a strictly increasing detuning grid.

    ``c_plus`` is NaN for the closed-form method (no closed form exists).
    ``method_deviation`` is |C_-(closed) - C_-(solve)| / |C_-(solve)| when both
    methods ran, NaN otherwise.  ``flags`` is '' for good points.
    """

    detuning_grid: np.ndarray
    omega_mech: float
    steady: SteadyState
    c_minus: np.ndarray
    c_plus: np.ndarray
    eps_out: np.ndarray
    mu_p: np.ndarray
    nu_p: np.ndarray
    method: str
    method_deviation: np.ndarray
    flags: tuple[str, ...]

    @property
    def delta_norm(self) -> np.ndarray:
        return (self.detuning_grid - self.omega_mech) / self.omega_mech

    @property
    def max_deviation(self) -> float:
        d = self.method_deviation[np.isfinite(self.method_deviation)]
        return float(d.max()) if d.size else float("nan")

    @property
    def responses(self) -> list[ProbeResponse]:
        m = "closed_form" if self.method == "closed" else "linear_solve"
        return [
            ProbeResponse(self.c_minus[i], self.c_plus[i], self.eps_out[i], self.mu_p[i], self.nu_p[i], m)
            for i in range(self.detuning_grid.size)
        ]


def _pointwise(fn, delta: np.ndarray):
    """Evaluate a vectorised response; on failure fall back point by point."""
    try:
        return fn(delta), [""] * delta.size
    except (SingularSystemError, DegenerateParameterError):
        pass
    out_cm = np.full(delta.size, np.nan + 0j)
    out_cp = np.full(delta.size, np.nan + 0j)
    flags = [""] * delta.size
    for i, d in enumerate(delta):
        try:
            cm, cp = fn(np.array([d]))
            out_cm[i], out_cp[i] = cm[0], cp[0]
        except (SingularSystemError, DegenerateParameterError) as exc:
            flags[i] = type(exc).__name__ + ": " + str(exc)
    return (out_cm, out_cp), flags


def sweep_response(
    params: SystemParams,
    drive: DriveConfig,
    grid_spec: GridSpec | np.ndarray,
    method: str = "closed",
    *,
    steady: SteadyState | None = None,
    a_form: str = "plus",
) -> ResponseSweep:
    """Probe response over a detuning grid with one shared steady state.

    Parameters
    ----------
    grid_spec : GridSpec or array
        Probe detunings Delta (rad/s), strictly increasing.
    method : {"closed", "solve", "both"}
        With "both" the closed form is reported and the relative deviation
        from the linear solve is recorded per point.

    Per-point singularities become NaN rows with a flag instead of raising.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    delta = grid_spec.grid() if isinstance(grid_spec, GridSpec) else np.asarray(grid_spec, dtype=float).ravel()
    if delta.size == 0:
        raise ValueError("empty detuning grid")
    if delta.size > 1 and not np.all(np.diff(delta) > 0):
        raise ValueError("detuning grid must be strictly increasing")
    if steady is None:
        steady = solve_steady_state(params, drive)
    det = derive_detunings(params, drive)
    eps = drive.epsilon

    def closed(d):
        r = response_closed_form(steady, params, det.with_delta(d), eps, a_form)
        return r.c_minus, r.c_plus

    def solve(d):
        r = response_linear_solve(steady, params, det.with_delta(d), eps)
        return r.c_minus, r.c_plus

    deviation = np.full(delta.size, np.nan)
    if method == "solve":
        (cm, cp), flags = _pointwise(solve, delta)
    else:
        (cm, cp), flags = _pointwise(closed, delta)
        if method == "both":
            (cm_s, cp), flags_s = _pointwise(solve, delta)
            deviation = np.abs(cm - cm_s) / np.abs(cm_s)
            flags = [a or b for a, b in zip(flags, flags_s)]
    eps_out, mu, nu = epsilon_out(cm, params.gamma_cavity, eps)
    return ResponseSweep(
        detuning_grid=delta,
        omega_mech=params.omega_mech,
        steady=steady,
        c_minus=cm,
        c_plus=cp,
        eps_out=eps_out,
        mu_p=mu,
        nu_p=nu,
        method=method,
        method_deviation=deviation,
        flags=tuple(flags),
    )
