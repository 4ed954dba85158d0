"""Time-domain mean-field integration: an independent check of the steady state
and of the probe sidebands.

Equations in the drive frame, with <sigma_z> frozen:

    dq/dt = p/m
    dp/dt = -m w_m^2 q - gamma_m p + chi |c|^2
    dc/dt = -(gamma_c + i D1) c + i chi q c / hbar - i g s + Omega + eps e^{-i D t}
    ds/dt = -(gamma_a + i D2) s + i g sz c

The linear part (including the GHz qubit detuning) is diagonalised and treated
exactly by fourth-order exponential time differencing (Cox-Matthews ETDRK4 with
contour-integral coefficients); only the weak radiation-pressure terms and the
probe are stepped explicitly.  Mechanical variables are scaled by
x_s = sqrt(hbar/(m w_m)) as in the fluctuation module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dynamics import drift_matrix
from .errors import HybridError, IntegrationError
from .model import (
    HBAR,
    Detunings,
    DriveConfig,
    Preset,
    SystemParams,
    derive_detunings,
    has_errors,
    load_preset,
    validate_params,
)
from .probe import response_linear_solve
from .steady import solve_steady_state

STEADY_TOL = 1e-6
SETTLE_PERIODS = 10
DIVERGENCE_FACTOR = 1e6
STEPS_PER_RADIAN = 10.0
VALIDATION_RTOL = 1e-3
RESIDUAL_POWER_LIMIT = 1e-4


def _linear_part(params: SystemParams, det: Detunings) -> np.ndarray:
    p = params
    wm = p.omega_mech
    lin = np.zeros((4, 4), dtype=complex)
    lin[0, 1] = wm
    lin[1, 0] = -wm
    lin[1, 1] = -p.gamma_mech
    lin[2, 2] = -(p.gamma_cavity + 1j * det.delta1)
    lin[2, 3] = -1j * p.g_qubit
    lin[3, 2] = 1j * p.g_qubit * p.sigma_z_ss
    lin[3, 3] = -(p.gamma_qubit + 1j * det.delta2)
    return lin


def _phi_functions(z: np.ndarray, h: float, m: int = 64):
    """ETDRK4 weights for diagonal entries z = lambda h via contour averages."""
    r = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    big = np.abs(z) > 1.0
    zr = z[:, None] + r[None, :]
    ez = np.exp(zr)
    q = h * np.mean((np.exp(zr / 2) - 1) / zr, axis=1)
    f1 = h * np.mean((-4 - zr + ez * (4 - 3 * zr + zr**2)) / zr**3, axis=1)
    f2 = h * np.mean((2 + zr + ez * (zr - 2)) / zr**3, axis=1)
    f3 = h * np.mean((-4 - 3 * zr - zr**2 + ez * (4 - zr)) / zr**3, axis=1)
    # far from the origin the direct formulas are accurate and avoid contour overflow
    with np.errstate(all="ignore"):
        e = np.exp(z)
        qd = h * (np.exp(z / 2) - 1) / z
        f1d = h * (-4 - z + e * (4 - 3 * z + z**2)) / z**3
        f2d = h * (2 + z + e * (z - 2)) / z**3
        f3d = h * (-4 - 3 * z - z**2 + e * (4 - z)) / z**3
    pick = lambda d, c: np.where(big & np.isfinite(d), d, c)  # noqa: E731
    return pick(qd, q), pick(f1d, f1), pick(f2d, f2), pick(f3d, f3)


@njit(cache=True)
def _nonlinear(w, t, v, vinv, ustar, k_mech, k_opt, eps, delta, out):
    u = ustar + v @ w
    q = u[0].real
    c = u[2]
    n = np.zeros(4, dtype=np.complex128)
    n[1] = k_mech * (c.real * c.real + c.imag * c.imag)
    n[2] = 1j * k_opt * q * c + eps * np.exp(-1j * delta * t)
    out[:] = vinv @ n


@njit(cache=True)
def _advance(w, t0, nsteps, h, e, e2, qf, f1, f2, f3, v, vinv, ustar, k_mech, k_opt, eps, delta, rec, stride):
    """Take ``nsteps`` steps from (w, t0); every ``stride`` steps write u into ``rec``."""
    nu = np.empty(4, dtype=np.complex128)
    na = np.empty(4, dtype=np.complex128)
    nb = np.empty(4, dtype=np.complex128)
    nc = np.empty(4, dtype=np.complex128)
    k = 0
    if rec.shape[0] > 0:
        rec[0, :] = ustar + v @ w
        k = 1
    for i in range(nsteps):
        t = t0 + i * h
        _nonlinear(w, t, v, vinv, ustar, k_mech, k_opt, eps, delta, nu)
        a = e2 * w + qf * nu
        _nonlinear(a, t + 0.5 * h, v, vinv, ustar, k_mech, k_opt, eps, delta, na)
        b = e2 * w + qf * na
        _nonlinear(b, t + 0.5 * h, v, vinv, ustar, k_mech, k_opt, eps, delta, nb)
        c = e2 * a + qf * (2.0 * nb - nu)
        _nonlinear(c, t + h, v, vinv, ustar, k_mech, k_opt, eps, delta, nc)
        w = e * w + f1 * nu + 2.0 * f2 * (na + nb) + f3 * nc
        if rec.shape[0] > 0 and (i + 1) % stride == 0 and k < rec.shape[0]:
            rec[k, :] = ustar + v @ w
            k += 1
    return w


@dataclass(frozen=True)
class TrajectoryResult:
    """Mean-field trajectory.

    ``time_grid`` and the ``*_t`` series are a decimated history; the last
    settling chunk (an integer number of beat periods) is kept at full
    resolution in ``window_time``/``window_c`` for demodulation.  ``q_t`` is in
    metres and ``p_t`` in kg m/s.
    """

    time_grid: np.ndarray
    q_t: np.ndarray
    p_t: np.ndarray
    c_t: np.ndarray
    sigma_t: np.ndarray
    converged: bool
    settle_time: float
    window_time: np.ndarray = field(repr=False)
    window_c: np.ndarray = field(repr=False)
    final_state: tuple[float, float, complex, complex] = (0.0, 0.0, 0j, 0j)
    steps: int = 0


def _slowest_rate(params: SystemParams, drive: DriveConfig) -> float:
    try:
        ss = solve_steady_state(params, drive)
        det = derive_detunings(params, drive)
        rates = -np.linalg.eigvals(drift_matrix(params, det, ss.c0, ss.delta3)).real
        rates = rates[rates > 0]
        if rates.size:
            return float(rates.min())
    except HybridError:
        pass
    return min(params.gamma_cavity, params.gamma_mech / 2)


def settle_time_estimate(params: SystemParams, drive: DriveConfig) -> float:
    """max(20/gamma_c, 16/slowest linearised decay rate)."""
    return max(20.0 / params.gamma_cavity, 16.0 / _slowest_rate(params, drive))


def integrate_mean_field(
    params: SystemParams,
    drive: DriveConfig,
    t_final: float | None = None,
    dt_hint: float | None = None,
    *,
    initial_state: tuple[float, float, complex, complex] | None = None,
    tol: float = STEADY_TOL,
    max_history: int = 20_000,
    early_exit: bool = True,
) -> TrajectoryResult:
    """Integrate the mean-field equations, stopping early once settled.

    Settling is tested on consecutive chunks.  Without a probe a chunk is
    ``SETTLE_PERIODS`` mechanical periods and the test is the peak-to-peak
    variation of |c| relative to its mean; with a probe a chunk is an integer
    number of beat periods 2 pi/Delta spanning at least as long, and the test is
    that successive demodulated (C0, C_-) agree to ``tol``.

    Parameters
    ----------
    t_final : float, optional
        Hard stop [s]; defaults to :func:`settle_time_estimate` times 3.
    dt_hint : float, optional
        Upper bound on the step [s]; defaults to 0.1 / max(w_m, |Delta|, |Delta1|).
    initial_state : (q, p, c, sigma), optional
        Physical-unit start; zeros (adiabatic turn-on) by default.
    early_exit : bool
        Stop at the first settled chunk; otherwise run to ``t_final`` and
        report convergence of the last chunk.

    Raises
    ------
    IntegrationError
        On divergence (|c| > 1e6 Omega/gamma_c), a singular linear part, or a
        non-finite state.
    """
    p = params
    det = derive_detunings(p, drive)
    eps = float(drive.epsilon)
    delta = float(det.delta) if eps > 0 else 0.0
    if not (p.gamma_cavity > 0 and p.mass > 0 and p.omega_mech > 0):
        raise IntegrationError("gamma_cavity, mass and omega_mech must be positive")
    lin = _linear_part(p, det)
    forcing = np.array([0, 0, drive.big_omega, 0], dtype=complex)
    try:
        ustar = -np.linalg.solve(lin, forcing)
        lam, v = np.linalg.eig(lin)
        vinv = np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise IntegrationError(f"linear part is singular: {exc}") from None
    if np.linalg.cond(v) > 1e10:
        raise IntegrationError("linear part is (nearly) defective; cannot diagonalise")

    # chunk = integer number of base periods; step = period / integer
    base = abs(delta) if eps > 0 and delta != 0 else p.omega_mech
    period = 2 * math.pi / base
    fastest = max(p.omega_mech, abs(delta), abs(det.delta1), p.gamma_cavity)
    h_max = dt_hint if dt_hint is not None else 1.0 / (STEPS_PER_RADIAN * fastest)
    n_sub = max(8, int(math.ceil(period / h_max)))
    h = period / n_sub
    mech_period = 2 * math.pi / p.omega_mech
    n_periods = max(SETTLE_PERIODS, int(math.ceil(SETTLE_PERIODS * mech_period / period)), 2)
    chunk = n_sub * n_periods
    if t_final is None:
        t_final = 3.0 * settle_time_estimate(p, drive)
    n_chunks = max(2, int(math.ceil(t_final / (chunk * h))))

    e = np.exp(lam * h)
    e2 = np.exp(lam * h / 2)
    qf, f1, f2, f3 = _phi_functions(lam * h, h)
    xs = p.x_scale
    k_mech = p.chi / (p.mass * p.omega_mech * xs)
    k_opt = p.chi * xs / HBAR

    if initial_state is None:
        u0 = np.zeros(4, dtype=complex)
    else:
        q, mom, c, s = initial_state
        u0 = np.array([q / xs, mom / (p.mass * p.omega_mech * xs), c, s], dtype=complex)
    w = vinv @ (u0 - ustar)
    limit = DIVERGENCE_FACTOR * max(drive.big_omega / p.gamma_cavity, 1.0)

    # history keeps every hist_stride-th step; the stride doubles whenever
    # the buffer outgrows max_history
    hist_stride = 1
    hist_t, hist_u = np.array([0.0]), u0[None, :].copy()
    rec = np.empty((chunk + 1, 4), dtype=complex)
    empty = np.empty((0, 4), dtype=complex)
    t = 0.0
    steps = 0
    converged = False
    prev = None
    window_t = np.zeros(0)
    window_u = np.zeros((0, 4), dtype=complex)
    for _ in range(n_chunks):
        w = _advance(w, t, chunk, h, e, e2, qf, f1, f2, f3, v, vinv, ustar, k_mech, k_opt, eps, delta, rec, 1)
        tt = t + h * np.arange(chunk + 1)
        t = t + chunk * h
        steps += chunk
        window_t, window_u = tt, rec.copy()
        cabs = np.abs(rec[:, 2])
        if not np.all(np.isfinite(rec)):
            raise IntegrationError(f"non-finite state at t = {t:.3e} s")
        if cabs.max() > limit:
            raise IntegrationError(f"divergence: |c| = {cabs.max():.3e} exceeds {limit:.3e} at t = {t:.3e} s")
        k0 = (-(steps - chunk)) % hist_stride
        idx = np.arange(k0, chunk + 1, hist_stride)
        idx = idx[idx > 0]
        hist_t = np.concatenate([hist_t, tt[idx]])
        hist_u = np.concatenate([hist_u, rec[idx]])
        while hist_t.size > max_history:
            hist_t, hist_u = hist_t[::2], hist_u[::2]
            hist_stride *= 2
        converged = False
        if eps > 0:
            est = _fit(tt, rec[:, 2], delta)[0]
            if prev is not None:
                # C0 against itself; both sidebands against |C_-| (C_+ may vanish)
                scale = np.abs(est)
                scale[1] = scale[2] = max(scale[2], scale[1])
                scale[scale == 0] = 1.0
                if np.all(np.abs(est - prev) <= tol * scale):
                    converged = True
            prev = est
        else:
            mean = cabs.mean()
            spread = cabs.max() - cabs.min()
            if spread <= tol * mean or mean == 0:
                converged = True
        if converged and early_exit:
            break
    settle = t if converged else float("nan")

    hu = hist_u
    final = window_u[-1]
    return TrajectoryResult(
        time_grid=hist_t,
        q_t=hu[:, 0].real * xs,
        p_t=hu[:, 1].real * p.mass * p.omega_mech * xs,
        c_t=hu[:, 2],
        sigma_t=hu[:, 3],
        converged=converged,
        settle_time=settle,
        window_time=window_t,
        window_c=window_u[:, 2],
        final_state=(
            float(final[0].real * xs),
            float(final[1].real * p.mass * p.omega_mech * xs),
            complex(final[2]),
            complex(final[3]),
        ),
        steps=steps,
    )


@dataclass(frozen=True)
class DemodulationResult:
    c0_est: complex
    c_minus_est: complex
    c_plus_est: complex
    residual_power: float
    ansatz_valid: bool


def _fit(t: np.ndarray, c: np.ndarray, delta: float):
    basis = np.stack([np.ones_like(t), np.exp(1j * delta * t), np.exp(-1j * delta * t)], axis=1)
    coef, *_ = np.linalg.lstsq(basis.astype(complex), c, rcond=None)
    resid = c - basis @ coef
    return coef, resid


def demodulate(trajectory: TrajectoryResult, detunings: Detunings) -> DemodulationResult:
    """Least-squares fit of the final window to C0 + C+ e^{i D t} + C- e^{-i D t}.

    The window is trimmed to an integer number of beat periods 2 pi/Delta.

    Raises
    ------
    ValueError
        If Delta * window < 4 pi: too few beats to separate the sidebands.
    """
    t = np.asarray(trajectory.window_time, dtype=float)
    c = np.asarray(trajectory.window_c, dtype=complex)
    delta = float(detunings.delta)
    span = t[-1] - t[0] if t.size > 1 else 0.0
    if abs(delta) * span < 4 * math.pi * (1 - 1e-9):
        raise ValueError(f"demodulation ill-conditioned: Delta*window = {abs(delta) * span:.3g} < 4 pi")
    n_per = math.floor(abs(delta) * span / (2 * math.pi) + 1e-9)
    t_end = t[0] + n_per * 2 * math.pi / abs(delta)
    keep = t <= t_end * (1 + 1e-12) + 1e-300
    coef, resid = _fit(t[keep], c[keep], delta)
    total = float(np.sum(np.abs(c[keep]) ** 2))
    rp = float(np.sum(np.abs(resid) ** 2) / total) if total > 0 else 0.0
    return DemodulationResult(
        c0_est=complex(coef[0]),
        c_minus_est=complex(coef[2]),
        c_plus_est=complex(coef[1]),
        residual_power=rp,
        ansatz_valid=rp <= RESIDUAL_POWER_LIMIT,
    )


@dataclass(frozen=True)
class ValidationRow:
    preset: str
    variant: str
    quantity: str
    detuning: float
    frequency_domain: complex
    time_domain: complex
    deviation: float
    passed: bool
    message: str = ""


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def _probe_points(preset: Preset, params: SystemParams, npoints: int) -> np.ndarray:
    grid = preset.grid
    return np.linspace(grid.center - grid.span / 2, grid.center + grid.span / 2, npoints)


def _validate_one(label: str, variant: str, params, drive, deltas, rtol) -> list[ValidationRow]:
    rows: list[ValidationRow] = []

    def bad(quantity, msg, d=float("nan")):
        rows.append(ValidationRow(label, variant, quantity, d, complex("nan"), complex("nan"), float("nan"), False, msg))

    diags = [x for x in validate_params(params, drive) if x.level == "error"]
    if has_errors(diags):
        bad("steady_intensity", "validation error: " + "; ".join(str(x) for x in diags))
        return rows
    try:
        ss = solve_steady_state(params, drive)
        traj = integrate_mean_field(params, drive.replace(epsilon=0.0))
    except (HybridError, np.linalg.LinAlgError, ValueError) as exc:
        bad("steady_intensity", f"{type(exc).__name__}: {exc}")
        return rows
    td = float(np.mean(np.abs(traj.window_c) ** 2))
    dev = _rel(td, ss.intensity)
    ok = traj.converged and dev <= rtol
    rows.append(
        ValidationRow(label, variant, "steady_intensity", float("nan"), ss.intensity, td, dev, ok,
                      "" if traj.converged else "trajectory did not settle")
    )
    det = derive_detunings(params, drive)
    for d in deltas:
        dr = drive.replace(omega_probe=drive.omega_drive + float(d))
        try:
            ref = complex(response_linear_solve(ss, params, det.with_delta(float(d)), dr.epsilon).c_minus)
            tr = integrate_mean_field(params, dr, initial_state=traj.final_state)
            dm = demodulate(tr, det.with_delta(float(d)))
        except (HybridError, np.linalg.LinAlgError, ValueError) as exc:
            bad("c_minus", f"{type(exc).__name__}: {exc}", float(d))
            continue
        dev = _rel(dm.c_minus_est, ref)
        ok = tr.converged and dev <= rtol
        msg = "" if tr.converged else "trajectory did not settle"
        if not dm.ansatz_valid:
            msg = (msg + "; " if msg else "") + f"residual power {dm.residual_power:.2e}"
        rows.append(ValidationRow(label, variant, "c_minus", float(d), ref, dm.c_minus_est, dev, ok, msg))
    return rows


def validate_suite(
    preset_names,
    *,
    npoints: int = 5,
    all_variants: bool = False,
    chi_reading: str = "literal",
    rtol: float = VALIDATION_RTOL,
) -> list[ValidationRow]:
    """Cross-check steady state and C_- against the time-domain integration.

    ``preset_names`` may contain preset names, Preset objects or
    ``(label, params, drive)`` tuples (the latter probe ``npoints`` detunings
    around omega_m).  Failures of any kind become rows with ``passed=False``.
    """
    rows: list[ValidationRow] = []
    for item in preset_names:
        if isinstance(item, tuple):
            label, params, drive = item
            wm = params.omega_mech
            deltas = np.linspace(0.99 * wm, 1.01 * wm, npoints)
            rows += _validate_one(label, "-", params, drive, deltas, rtol)
            continue
        try:
            preset = item if isinstance(item, Preset) else load_preset(item, chi_reading)
        except HybridError as exc:
            rows.append(ValidationRow(str(item), "-", "preset", float("nan"), complex("nan"), complex("nan"),
                                      float("nan"), False, str(exc)))
            continue
        variants = preset.variant_labels if all_variants else (preset.default_variant,)
        for v in variants:
            params, drive = preset.resolve(v)
            rows += _validate_one(preset.name, v, params, drive, _probe_points(preset, params, npoints), rtol)
    return rows


__all__ = [
    "DemodulationResult",
    "TrajectoryResult",
    "ValidationRow",
    "demodulate",
    "integrate_mean_field",
    "settle_time_estimate",
    "validate_suite",
]
