"""Linearised fluctuation dynamics around the steady state, du/dt = J u + B_in n.

State ordering is u = [Q/x_s, P/(m omega_m x_s), C, C^dag, sigma, sigma^dag] with
x_s = sqrt(hbar/(m omega_m)); inputs are n = [c_in, c_in^dag, d_in, d_in^dag, xi].
Scaling the mechanical variables keeps the matrix entries within a few decades
of each other, which matters for eigenvalues and for the direct solves.
"""
from __future__ import annotations

import numpy as np

from .model import HBAR, Detunings, SystemParams

STATE_LABELS = ("q", "p", "c", "c_dag", "sigma", "sigma_dag")
INPUT_LABELS = ("c_in", "c_in_dag", "d_in", "d_in_dag", "xi")


def drift_matrix(params: SystemParams, detunings: Detunings, c0: complex, delta3: float) -> np.ndarray:
    """6x6 drift matrix J of the scaled fluctuation equations."""
    p = params
    xs = p.x_scale
    wm = p.omega_mech
    k_opt = p.chi * xs / HBAR
    k_mech = p.chi / (p.mass * wm * xs)
    g, sz = p.g_qubit, p.sigma_z_ss
    d2 = detunings.delta2
    c0c = np.conj(c0)
    j = np.zeros((6, 6), dtype=complex)
    j[0, 1] = wm
    j[1, 0] = -wm
    j[1, 1] = -p.gamma_mech
    j[1, 2] = k_mech * c0c
    j[1, 3] = k_mech * c0
    j[2, 2] = -(p.gamma_cavity + 1j * delta3)
    j[2, 0] = 1j * k_opt * c0
    j[2, 4] = -1j * g
    j[3, 3] = -(p.gamma_cavity - 1j * delta3)
    j[3, 0] = -1j * k_opt * c0c
    j[3, 5] = 1j * g
    j[4, 4] = -(p.gamma_qubit + 1j * d2)
    j[4, 2] = 1j * g * sz
    j[5, 5] = -(p.gamma_qubit - 1j * d2)
    j[5, 3] = -1j * g * sz
    return j


def input_matrix(params: SystemParams) -> np.ndarray:
    """6x5 map from the noise inputs to the scaled state derivatives."""
    p = params
    b = np.zeros((6, 5), dtype=complex)
    b[2, 0] = b[3, 1] = np.sqrt(2.0 * p.gamma_cavity)
    b[4, 2] = b[5, 3] = np.sqrt(2.0 * p.gamma_qubit)
    b[1, 4] = 1.0 / (p.mass * p.omega_mech * p.x_scale)
    return b


def is_stable(jac: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(jac).real < 0))
