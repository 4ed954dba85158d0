"""Zeroth-order (probe-off) steady state.

With x = |C0|^2 the self-consistency condition

    C0 = Omega / (gamma_c + i*Delta3(x) - g^2 <sz> / (gamma_a + i*Delta2)),
    Delta3(x) = Delta1 - kappa * x,       kappa = chi^2 / (m hbar omega_m^2)

becomes the real cubic

    kappa^2 x^3 - 2 b kappa x^2 + (a^2 + b^2) x - Omega^2 = 0

with a = gamma_c - Re z, b = Delta1 - Im z and z = g^2 <sz> / (gamma_a + i Delta2).
All real nonnegative roots are returned as branches; the lowest stable one is
selected by default.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .dynamics import drift_matrix
from .model import HBAR, Detunings, DriveConfig, SystemParams, derive_detunings

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class BistabilityBranches:
    intensities: tuple[float, ...]
    stability_flags: tuple[bool, ...]
    selected_index: int
    omega_drive: float | None = None

    @property
    def count(self) -> int:
        return len(self.intensities)


@dataclass(frozen=True)
class SteadyState:
    """Self-consistent steady state on the selected branch.

    ``q0`` is in metres, ``delta3`` in rad/s; ``residual`` is the relative
    mismatch of the steady-state equation re-evaluated from ``c0`` itself.
    """

    c0: complex
    q0: float
    p0: float
    l0: complex
    delta3: float
    residual: float
    branches: BistabilityBranches = field(compare=False)
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    @property
    def intensity(self) -> float:
        return abs(self.c0) ** 2


def _qubit_shift(params: SystemParams, delta2: float) -> complex:
    return params.g_qubit**2 * params.sigma_z_ss / (params.gamma_qubit + 1j * delta2)


def steady_state_cubic(params: SystemParams, detunings: Detunings, big_omega: float) -> np.ndarray:
    """Coefficients (highest power first) of the cubic in x = |C0|^2."""
    z = _qubit_shift(params, detunings.delta2)
    a = params.gamma_cavity - z.real
    b = detunings.delta1 - z.imag
    k = params.kerr_shift
    return np.array([k * k, -2.0 * b * k, a * a + b * b, -(big_omega**2)])


def _relative_residual(coeffs: np.ndarray, x: float) -> float:
    terms = coeffs * x ** np.arange(len(coeffs) - 1, -1, -1)
    scale = np.sum(np.abs(terms))
    return 0.0 if scale == 0 else abs(np.sum(terms)) / scale


def _polish(coeffs: np.ndarray, x: float, iters: int = 6) -> float:
    dcoeffs = np.polyder(coeffs)
    best, best_res = x, _relative_residual(coeffs, x)
    for _ in range(iters):
        d = np.polyval(dcoeffs, x)
        if d == 0:
            break
        x = x - np.polyval(coeffs, x) / d
        res = _relative_residual(coeffs, x)
        if res < best_res:
            best, best_res = x, res
        else:
            break
    return best


def cubic_real_roots(coeffs: np.ndarray) -> np.ndarray:
    """Real nonnegative roots of the steady-state cubic, ascending and polished."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if coeffs.size <= 1:
        return np.zeros(0) if coeffs.size == 0 or coeffs[0] != 0 else np.zeros(1)
    if coeffs[-1] == 0:
        # undriven: x = 0 is a root; the remaining quadratic has no real positive root
        # for a != 0, but keep the general path for completeness
        rest = cubic_real_roots(coeffs[:-1])
        return np.unique(np.concatenate([[0.0], rest[rest > 0]]))
    raw = np.roots(coeffs)
    scale = np.max(np.abs(raw))
    roots = []
    for r in raw:
        if abs(r.imag) <= 1e-7 * scale:
            x = _polish(coeffs, float(r.real))
            if x >= -1e-12 * scale:
                roots.append(max(x, 0.0))
    roots = np.sort(np.array(roots))
    if roots.size > 1:
        keep = np.concatenate([[True], np.diff(roots) > 1e-12 * scale])
        roots = roots[keep]
    return roots


def _state_from_intensity(
    params: SystemParams, detunings: Detunings, big_omega: float, x: float
) -> tuple[complex, float]:
    delta3 = detunings.delta1 - params.kerr_shift * x
    den = params.gamma_cavity + 1j * delta3 - _qubit_shift(params, detunings.delta2)
    return complex(big_omega / den), float(delta3)


def _is_stable(params: SystemParams, detunings: Detunings, c0: complex, delta3: float) -> bool:
    eig = np.linalg.eigvals(drift_matrix(params, detunings, c0, delta3))
    return bool(np.all(eig.real < 0))


def _branches(
    params: SystemParams, detunings: Detunings, big_omega: float
) -> tuple[np.ndarray, list[tuple[complex, float]], list[bool]]:
    coeffs = steady_state_cubic(params, detunings, big_omega)
    xs = cubic_real_roots(coeffs)
    if xs.size == 0:
        raise ConvergenceError("steady-state cubic has no real nonnegative root")
    states = [_state_from_intensity(params, detunings, big_omega, x) for x in xs]
    stable = [_is_stable(params, detunings, c0, d3) for c0, d3 in states]
    return xs, states, stable


def _select(stable: list[bool]) -> int:
    for i, s in enumerate(stable):
        if s:
            return i
    return 0


def solve_steady_state(params: SystemParams, drive: DriveConfig, branch: int | None = None) -> SteadyState:
    """Solve for C0, Q0, L0 and Delta3 with the probe switched off.

    Parameters
    ----------
    params, drive : SystemParams, DriveConfig
        ``drive.epsilon`` is ignored.
    branch : int, optional
        Index into the ascending list of real roots.  Defaults to the
        lowest-intensity stable branch.

    Raises
    ------
    ConvergenceError
        If the polished root fails the 1e-10 residual check.
    """
    det = derive_detunings(params, drive)
    omega = drive.big_omega
    xs, states, stable = _branches(params, det, omega)
    idx = _select(stable) if branch is None else branch
    if not 0 <= idx < len(xs):
        raise IndexError(f"branch {idx} out of range; {len(xs)} real root(s)")

    diags = []
    if len(xs) > 1:
        diags.append(f"ambiguous branch: {len(xs)} real roots, selected index {idx}")
    if not any(stable):
        diags.append("no stable branch: every root has a growing fluctuation mode")

    c0, delta3 = states[idx]
    x = abs(c0) ** 2
    q0 = params.chi * x / (params.mass * params.omega_mech**2)
    delta3 = det.delta1 - params.chi**2 * x / (params.mass * HBAR * params.omega_mech**2)
    z = _qubit_shift(params, det.delta2)
    if omega > 0:
        residual = abs((params.gamma_cavity + 1j * delta3 - z) * c0 - omega) / omega
    else:
        residual = 0.0
    if not residual <= RESIDUAL_TOL:
        raise ConvergenceError(
            f"steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:g}; parameters ill-conditioned"
        )
    l0 = 1j * params.g_qubit * params.sigma_z_ss * c0 / (params.gamma_qubit + 1j * det.delta2)
    branches = BistabilityBranches(
        intensities=tuple(float(v) for v in xs),
        stability_flags=tuple(stable),
        selected_index=idx,
        omega_drive=drive.omega_drive,
    )
    return SteadyState(
        c0=c0,
        q0=float(q0),
        p0=0.0,
        l0=complex(l0),
        delta3=float(delta3),
        residual=float(residual),
        branches=branches,
        diagnostics=tuple(diags),
    )


def bistability_scan(params: SystemParams, drive: DriveConfig, omega_drive_range) -> list[BistabilityBranches]:
    """All real |C0|^2 roots and their stability at each drive frequency."""
    freqs = np.atleast_1d(np.asarray(omega_drive_range, dtype=float))
    if freqs.size == 0:
        raise ValueError("omega_drive_range must be nonempty")
    out = []
    for wd in freqs:
        d = drive.replace(omega_drive=float(wd))
        det = derive_detunings(params, d)
        xs, _, stable = _branches(params, det, d.big_omega)
        out.append(
            BistabilityBranches(
                intensities=tuple(float(v) for v in xs),
                stability_flags=tuple(stable),
                selected_index=_select(stable),
                omega_drive=float(wd),
            )
        )
    return out


def cubic_discriminant(coeffs: np.ndarray) -> float:
    """Discriminant of a cubic a x^3 + b x^2 + c x + d; positive means three real roots."""
    a, b, c, d = coeffs
    return 18 * a * b * c * d - 4 * b**3 * d + b**2 * c**2 - 4 * a * c**3 - 27 * a**2 * d**2
