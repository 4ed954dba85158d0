"""Second-order coherence g2(tau) of the output field.

    g2(tau) = [|B0|^4 + 2|B0|^2 y14 + 2 Re(B0*^2 y12) + 2|B0|^2 Re y13
               + y14^2 + |y13|^2 + |y12|^2] / (|B0|^2 + y14)^2

with y14 = (1/2pi) int Y14, y13(tau) = (1/2pi) int Y13 e^{i w tau} and
y12(tau) = (1/2pi) int Y12 e^{-i w tau}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .fluctuations import SpectralKernels
from .model import TWO_PI, DriveConfig, SystemParams
from .quadrature import PanelExpansion, adaptive_expansion, dense_trapezoid, panel_breakpoints
from .steady import SteadyState, solve_steady_state

CUTOFF_FACTOR = 1e3
QUAD_RTOL = 1e-10
FAIL_RTOL = 1e-4


@dataclass(frozen=True)
class YIntegrals:
    """y-integrals on a tau grid; errors are absolute estimates."""

    tau: np.ndarray
    y12: np.ndarray
    y13: np.ndarray
    y14: float
    y12_error: np.ndarray
    y13_error: np.ndarray
    y14_error: float
    n_panels: int


def kernel_expansion(kernels: SpectralKernels, *, rtol: float = QUAD_RTOL, max_panels: int = 200_000) -> PanelExpansion:
    """Adaptive expansion of [Y12, Y14] on the pole-anchored panels."""
    cutoff = CUTOFF_FACTOR * kernels.frequency_scale
    edges = panel_breakpoints(kernels.poles(), cutoff)

    def f(w):
        y12, y14 = kernels.evaluate(w)
        return np.stack([y12, y14.astype(complex)], axis=-1)

    return adaptive_expansion(f, edges, rtol=rtol, max_panels=max_panels)


def y_integrals(kernels: SpectralKernels, tau, *, rtol: float = QUAD_RTOL, max_panels: int = 200_000) -> YIntegrals:
    """Evaluate y12(tau), y13(tau) and y14 with error estimates.

    Raises
    ------
    ConvergenceError
        If any error estimate exceeds 1e-4 relative to y14 (which bounds
        |y13| and sets the natural scale of |y12|) once the panel budget is spent.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    exp = kernel_expansion(kernels, rtol=rtol, max_panels=max_panels)
    total, total_err = exp.integral()
    y14 = float(total[1].real) / TWO_PI
    y14_err = float(total_err[1]) / TWO_PI
    y13, e13 = exp.fourier(tau, +1.0, component=1)
    y12, e12 = exp.fourier(tau, -1.0, component=0)
    y13, e13, y12, e12 = y13 / TWO_PI, e13 / TWO_PI, y12 / TWO_PI, e12 / TWO_PI
    # tau = 0 is the same integral as y14 by construction; pin it exactly
    y13 = np.where(tau == 0, y14, y13)
    scale = max(abs(y14), np.max(np.abs(y12), initial=0.0))
    worst = max(y14_err, np.max(e13, initial=0.0), np.max(e12, initial=0.0))
    if scale > 0 and worst > FAIL_RTOL * scale:
        raise ConvergenceError(
            f"y-integral error {worst:.3e} exceeds {FAIL_RTOL:g} of scale {scale:.3e} "
            f"after {exp.n_panels} panels"
        )
    return YIntegrals(tau, y12, y13, y14, e12, e13, y14_err, exp.n_panels)


def y14_dense_trapezoid(kernels: SpectralKernels, npoints: int = 1_000_000) -> float:
    """Pole-agnostic cross-check of y14 on a log-dense trapezoid grid."""
    cutoff = CUTOFF_FACTOR * kernels.frequency_scale
    return float(dense_trapezoid(kernels.y14_kernel, cutoff, npoints).real) / TWO_PI


def g2_from_y(b0: complex, y12, y13, y14):
    """Evaluate the g2 expression; returns (g2, imaginary residue of the complex form)."""
    b = abs(b0) ** 2
    y12 = np.asarray(y12, dtype=complex)
    y13 = np.asarray(y13, dtype=complex)
    cross = np.conj(b0) ** 2 * y12 + b0**2 * np.conj(y12) + b * (y13 + np.conj(y13))
    num = b * b + 2 * b * y14 + cross + y14 * y14 + np.abs(y13) ** 2 + np.abs(y12) ** 2
    den = (b + y14) ** 2
    if den == 0:
        return np.ones(y12.shape), np.zeros(y12.shape)
    return num.real / den, num.imag / den


def g2_error(b0: complex, g2, y12, y13, y14, e12, e13, e14):
    """First-order propagation of the y-integral errors into g2."""
    b = abs(b0) ** 2
    d = b + y14
    if d == 0:
        return np.zeros(np.shape(g2))
    d12 = (2 * b + 2 * np.abs(y12)) / d**2
    d13 = (2 * b + 2 * np.abs(y13)) / d**2
    d14 = np.abs(2.0 / d * (1.0 - g2))
    return d12 * e12 + d13 * e13 + d14 * e14


@dataclass(frozen=True)
class CoherenceSeries:
    tau_grid: np.ndarray
    g2_values: np.ndarray
    y14: float
    y13_of_tau: np.ndarray
    y12_of_tau: np.ndarray
    quadrature_error: np.ndarray
    b0: complex
    imag_residue: np.ndarray
    n_panels: int = 0

    @property
    def nonclassicality(self) -> float:
        """max over the grid of |g2(tau) - 1|."""
        return float(np.max(np.abs(self.g2_values - 1.0)))


def g2_of_tau(
    params: SystemParams,
    drive: DriveConfig,
    tau_grid,
    *,
    steady: SteadyState | None = None,
    as_printed: bool = False,
    rtol: float = QUAD_RTOL,
) -> CoherenceSeries:
    """g2 on ``tau_grid`` for the probe-off system at ``drive.temperature``.

    ``drive.epsilon`` is ignored: the statistics are computed with the probe off.
    """
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    drive = drive.replace(epsilon=0.0)
    if steady is None:
        steady = solve_steady_state(params, drive)
    kernels = SpectralKernels.build(steady, params, drive, as_printed=as_printed)
    yi = y_integrals(kernels, tau, rtol=rtol)
    b0 = kernels.b0
    g2, imag = g2_from_y(b0, yi.y12, yi.y13, yi.y14)
    err = g2_error(b0, g2, yi.y12, yi.y13, yi.y14, yi.y12_error, yi.y13_error, yi.y14_error)
    return CoherenceSeries(
        tau_grid=tau,
        g2_values=g2,
        y14=yi.y14,
        y13_of_tau=yi.y13,
        y12_of_tau=yi.y12,
        quadrature_error=err,
        b0=b0,
        imag_residue=imag,
        n_panels=yi.n_panels,
    )


@dataclass(frozen=True)
class TemperatureTrend:
    temperatures: tuple[float, ...]
    measures: tuple[float, ...]
    errors: tuple[float, ...]
    non_increasing: bool


def temperature_trend(params: SystemParams, drive: DriveConfig, temperatures, tau_grid) -> TemperatureTrend:
    """max_tau |g2 - 1| at each temperature and whether it never increases."""
    temps = [float(t) for t in temperatures]
    if len(temps) < 2:
        raise ValueError("need at least two temperatures")
    if any(b < a for a, b in zip(temps, temps[1:])):
        raise ValueError("temperatures must be ascending")
    steady = solve_steady_state(params, drive)
    measures, errors = [], []
    for t in temps:
        s = g2_of_tau(params, drive.replace(temperature=t), tau_grid, steady=steady)
        i = int(np.argmax(np.abs(s.g2_values - 1.0)))
        measures.append(s.nonclassicality)
        errors.append(float(s.quadrature_error[i]))
    ok = all(b <= a for a, b in zip(measures, measures[1:]))
    return TemperatureTrend(tuple(temps), tuple(measures), tuple(errors), ok)
