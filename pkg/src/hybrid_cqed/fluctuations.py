"""Quantum-fluctuation transfer functions and the spectral kernels behind g2(tau).

In the frequency domain the intracavity fluctuation is

    C(w) = C1 c_in(w) + C2 c_in^dag(w) + C3 d_in(w) + C4 d_in^dag(w) + C5 xi(w)

with C1..C5 built from E, F, R, S, T and the Lambda coefficients (the probe
lambdas with Delta replaced by w).  The output field follows from input-output
relations, B1 = sqrt(2 gamma_c) C1 - 1 and Bk = sqrt(2 gamma_c) Ck otherwise.

Sign note: the structurally parallel determinant E(w) carries
(Lambda1 - Lambda3)(Lambda1+ + Lambda3); writing the second factor with a minus
sign breaks agreement with the direct solve of the linear system.  The minus
variant is kept behind ``as_printed=True`` for comparison.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dynamics import drift_matrix, input_matrix
from .errors import SingularSystemError
from .model import HBAR, K_B, Detunings, DriveConfig, SystemParams, derive_detunings
from .probe import lambda_values, mechanical_denominator
from .steady import SteadyState

NEAR_SINGULAR_RATIO = 1e-6


@dataclass(frozen=True)
class NoiseModel:
    """Mechanical bath: N(w) = hbar gamma_m m w [1 + coth(hbar w / 2 k_B T)]."""

    temperature: float
    gamma_mech: float
    mass: float

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def from_params(cls, params: SystemParams, temperature: float) -> "NoiseModel":
        return cls(float(temperature), params.gamma_mech, params.mass)


def thermal_spectrum(noise: NoiseModel, omega) -> np.ndarray:
    """N(omega), including the w -> 0 limit 2 gamma_m m k_B T and the T = 0 step."""
    w = np.asarray(omega, dtype=float)
    pref = 2.0 * HBAR * noise.gamma_mech * noise.mass
    kt = K_B * noise.temperature
    if kt == 0:
        return np.where(w > 0, pref * w, 0.0)
    x = HBAR * w / kt
    # 1 + coth(x/2) = 2 / (1 - e^{-x}); the kT-scaled form is used for small |x|
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        den = -np.expm1(-x)
        quantum = pref * w / den
        classical = 2.0 * noise.gamma_mech * noise.mass * kt * np.where(x == 0, 1.0, x / den)
    return np.maximum(np.where(np.abs(x) > 1, quantum, classical), 0.0)


@dataclass(frozen=True)
class EfrstCoeffs:
    omega: Any
    e_of_omega: Any
    f_of_omega: Any
    r_of_omega: Any
    s_of_omega: Any
    t_of_omega: Any
    lambda_upper_1: Any
    lambda_upper_2: Any
    lambda_upper_3: Any
    lambda_upper_1_plus: Any
    lambda_upper_2_plus: Any


def efrst_coeffs(
    steady: SteadyState, params: SystemParams, detunings: Detunings, omega, *, as_printed: bool = False
) -> EfrstCoeffs:
    w = np.asarray(omega, dtype=float)
    lam = lambda_values(steady, params, detunings.delta2, w)
    l1, l2, l3, l1p, l2p = lam.lambda1, lam.lambda2, lam.lambda3, lam.lambda1_plus, lam.lambda2_plus
    s = -1.0 if as_printed else 1.0
    e = (l1 - l3) * (l1p + s * l3) + 2j * steady.delta3 * l3 + l2p * l2 - l2p * l1 - l1p * l2
    return EfrstCoeffs(
        omega=w,
        e_of_omega=e,
        f_of_omega=l1 - l2,
        r_of_omega=1.0 / mechanical_denominator(params, w),
        s_of_omega=1.0 / (params.gamma_qubit - 1j * detunings.delta2 - 1j * w),
        t_of_omega=1.0 / (params.gamma_qubit + 1j * detunings.delta2 - 1j * w),
        lambda_upper_1=l1,
        lambda_upper_2=l2,
        lambda_upper_3=l3,
        lambda_upper_1_plus=l1p,
        lambda_upper_2_plus=l2p,
    )


@dataclass(frozen=True)
class TransferCoeffs:
    """C1..C5: response of C(w) to c_in, c_in^dag, d_in, d_in^dag and xi."""

    omega: Any
    c1: Any
    c2: Any
    c3: Any
    c4: Any
    c5: Any

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.c1, self.c2, self.c3, self.c4, self.c5), axis=-1)


def transfer_coeffs(
    steady: SteadyState, params: SystemParams, detunings: Detunings, omega, *, as_printed: bool = False
) -> TransferCoeffs:
    """Closed-form C1..C5 at the frequencies ``omega``.

    Warns when |E| drops below 1e-6 of its median over the supplied grid.
    """
    co = efrst_coeffs(steady, params, detunings, omega, as_printed=as_printed)
    e, f, r, s, t = co.e_of_omega, co.f_of_omega, co.r_of_omega, co.s_of_omega, co.t_of_omega
    abs_e = np.abs(e)
    if abs_e.size > 1 and np.any(abs_e < NEAR_SINGULAR_RATIO * np.median(abs_e)):
        warnings.warn("E(omega) nearly singular on part of the grid", RuntimeWarning, stacklevel=2)
    chi, g, c0 = params.chi, params.g_qubit, steady.c0
    sc = np.sqrt(2.0 * params.gamma_cavity)
    sa = np.sqrt(2.0 * params.gamma_qubit)
    c1 = sc * f / e
    c2 = 1j * chi**2 * c0**2 * sc * r / e
    c3 = -1j * g * sa * f * t / e
    c4 = -(chi**2) * c0**2 * g * sa * r * s / e
    c5 = (chi**3 * abs(c0) ** 2 * c0 * r**2 + 1j * chi * c0 * f * r) / e
    return TransferCoeffs(co.omega, c1, c2, c3, c4, c5)


def transfer_linear_solve(
    steady: SteadyState, params: SystemParams, detunings: Detunings, omega
) -> TransferCoeffs:
    """C1..C5 from a direct solve of (-i w - J) u = B_in n at each frequency."""
    w = np.asarray(omega, dtype=float)
    jac = drift_matrix(params, detunings, steady.c0, steady.delta3)
    b_in = input_matrix(params)
    lhs = -1j * w[..., None, None] * np.eye(6) - jac
    try:
        sol = np.linalg.solve(lhs, np.broadcast_to(b_in, w.shape + b_in.shape))
    except np.linalg.LinAlgError:
        cond = float(np.max(np.linalg.cond(lhs)))
        raise SingularSystemError("fluctuation system is singular", condition=cond) from None
    row = sol[..., 2, :]
    return TransferCoeffs(w, row[..., 0], row[..., 1], row[..., 2], row[..., 3], row[..., 4])


def poles(steady: SteadyState, params: SystemParams, detunings: Detunings) -> np.ndarray:
    """Complex frequencies w_k where the transfer functions diverge (Im w_k < 0 when stable)."""
    return 1j * np.linalg.eigvals(drift_matrix(params, detunings, steady.c0, steady.delta3))


@dataclass(frozen=True)
class OutputCoeffs:
    omega: Any
    b0: complex
    b1: Any
    b2: Any
    b3: Any
    b4: Any
    b5: Any


def coherent_output(steady: SteadyState, params: SystemParams, big_omega: float) -> complex:
    """B0 = sqrt(2 gamma_c) C0 - Omega / sqrt(2 gamma_c)."""
    sc = np.sqrt(2.0 * params.gamma_cavity)
    return complex(sc * steady.c0 - big_omega / sc)


def output_coeffs(
    steady: SteadyState, params: SystemParams, drive: DriveConfig, omega, *, as_printed: bool = False
) -> OutputCoeffs:
    det = derive_detunings(params, drive)
    tc = transfer_coeffs(steady, params, det, omega, as_printed=as_printed)
    sc = np.sqrt(2.0 * params.gamma_cavity)
    return OutputCoeffs(
        omega=tc.omega,
        b0=coherent_output(steady, params, drive.big_omega),
        b1=sc * tc.c1 - 1.0,
        b2=sc * tc.c2,
        b3=sc * tc.c3,
        b4=sc * tc.c4,
        b5=sc * tc.c5,
    )


@dataclass(frozen=True)
class SpectralKernels:
    """Y12, Y13 and Y14 as functions of real frequency.

    Y12(w) = N(w) B5(-w) B5(w) + B2(-w) B1(w) + B4(-w) B3(w)
    Y13(w) = Y14(w) = N(-w) |B5(w)|^2 + |B2(w)|^2 + |B4(w)|^2
    """

    steady: SteadyState
    params: SystemParams
    drive: DriveConfig
    noise: NoiseModel
    as_printed: bool = False
    detunings: Detunings = field(init=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "detunings", derive_detunings(self.params, self.drive))

    @classmethod
    def build(
        cls, steady: SteadyState, params: SystemParams, drive: DriveConfig, *, as_printed: bool = False
    ) -> "SpectralKernels":
        return cls(steady, params, drive, NoiseModel.from_params(params, drive.temperature), as_printed)

    @property
    def b0(self) -> complex:
        return coherent_output(self.steady, self.params, self.drive.big_omega)

    def _bs(self, w):
        oc = output_coeffs(self.steady, self.params, self.drive, w, as_printed=self.as_printed)
        return oc.b1, oc.b2, oc.b3, oc.b4, oc.b5

    def evaluate(self, omega) -> tuple[np.ndarray, np.ndarray]:
        """(Y12(w), Y14(w)); Y13 is identical to Y14."""
        w = np.asarray(omega, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            b1, b2, b3, b4, b5 = self._bs(w)
            _, m2, _, m4, m5 = self._bs(-w)
        n_pos = thermal_spectrum(self.noise, w)
        n_neg = thermal_spectrum(self.noise, -w)
        y12 = n_pos * m5 * b5 + m2 * b1 + m4 * b3
        y14 = n_neg * np.abs(b5) ** 2 + np.abs(b2) ** 2 + np.abs(b4) ** 2
        return y12, y14

    def y12_kernel(self, omega):
        return self.evaluate(omega)[0]

    def y13_kernel(self, omega):
        return self.evaluate(omega)[1]

    def y14_kernel(self, omega):
        return self.evaluate(omega)[1]

    def poles(self) -> np.ndarray:
        return poles(self.steady, self.params, self.detunings)

    @property
    def frequency_scale(self) -> float:
        """max(omega_m, |Delta2|, g, gamma_c): sets the integration cutoff."""
        p = self.params
        return max(p.omega_mech, abs(self.detunings.delta2), p.g_qubit, p.gamma_cavity)
