"""Pole-aware adaptive quadrature over the real line, with exact Fourier moments.

The integrands here are Lorentzian-like: sharp resonances (mechanical linewidths
of tens of Hz) sitting on backgrounds that extend over GHz.  The strategy:

* seed panel edges at the real-axis projections of the complex poles, graded
  geometrically in units of each pole's half-width, plus decade breakpoints;
* on every panel expand the integrand in Legendre polynomials from a
  Gauss-Legendre rule and bisect panels whose trailing coefficients exceed the
  error budget (budget shared globally, relative to the L1 norm);
* integrate f(w) e^{+-i w tau} by applying the exact moments
  int_{-1}^{1} P_n(x) e^{ikx} dx = 2 i^n j_n(k) to each panel's expansion, so a
  mesh built once for the non-oscillatory kernel serves every tau;
* map |w| > W through w = +-W/u on a fixed graded rule.

The tau-independent panel error bounds the oscillatory integral's error as well,
since |e^{i w tau}| = 1.  It includes a rounding floor for narrow lines far from
w = 0, where the node frequencies themselves are only known to eps |w|.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import legendre
from scipy.special import spherical_jn

NODES = 16
_X, _W = legendre.leggauss(NODES)
_ORDERS = np.arange(NODES)
# coefficient projector: a_n = (2n+1)/2 sum_j w_j P_n(x_j) f(x_j)
_PROJ = (legendre.legvander(_X, NODES - 1) * _W[:, None] * (2 * _ORDERS + 1) / 2.0).T
# P_n'(x_j), for the rounding estimate
_DVAND = np.stack([legendre.legval(_X, legendre.legder(np.eye(NODES)[n])) for n in range(NODES)], axis=1)

_TAIL_EDGES = np.array([0.0, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0])


def panel_breakpoints(poles: np.ndarray, cutoff: float, *, grading: float = 5.0, floor: float = 1e-12) -> np.ndarray:
    """Sorted panel edges on [-cutoff, cutoff] anchored at +-Re(pole).

    Around each projection c with half-width h = |Im pole| edges are placed at
    c +- h * {0, 1, grading, grading^2, ...} until they leave the domain;
    decade breakpoints +-10^k and 0 cover the rest.
    """
    pts = [np.array([-cutoff, 0.0, cutoff])]
    top = int(np.ceil(np.log10(cutoff)))
    dec = 10.0 ** np.arange(top - 14, top + 1)
    dec = dec[dec < cutoff]
    pts += [dec, -dec]
    for p in np.atleast_1d(poles):
        hw = max(abs(p.imag), floor * max(abs(p.real), 1.0))
        n = int(np.ceil(np.log(2 * cutoff / hw) / np.log(grading))) + 1
        offs = hw * grading ** np.arange(n)
        offs = np.concatenate([[0.0], offs, -offs])
        for c in (p.real, -p.real):
            pts.append(c + offs)
    edges = np.concatenate(pts)
    edges = np.unique(edges[(edges >= -cutoff) & (edges <= cutoff)])
    keep = np.concatenate([[True], np.diff(edges) > 1e-13 * np.maximum(np.abs(edges[1:]), 1.0)])
    edges = edges[keep]
    edges[0], edges[-1] = -cutoff, cutoff
    return edges


@dataclass(frozen=True)
class PanelExpansion:
    """Adaptive Legendre expansion of a vector-valued integrand.

    Attributes
    ----------
    center, half : (P,) panel midpoints and half-widths
    coeffs : (P, NODES, K) Legendre coefficients per panel and component
    error : (K,) summed panel error bound (independent of any e^{iwt} factor),
        including the floor set by rounding of the node frequencies
    l1 : (K,) integral of |f| over the panels
    tail_nodes, tail_weights, tail_values : fixed rule for |w| > cutoff
    tail_error, tail_l1 : (K,) error estimate and L1 norm of the tails
    l1_freq : (K,) int |w| |f| over the panels; sets the rounding floor of the
        phase e^{iw tau}, eps |tau| l1_freq
    converged : whether the refinement met its target before the panel budget
    """

    center: np.ndarray
    half: np.ndarray
    coeffs: np.ndarray
    error: np.ndarray
    l1: np.ndarray
    tail_nodes: np.ndarray
    tail_weights: np.ndarray
    tail_values: np.ndarray
    tail_error: np.ndarray
    tail_l1: np.ndarray
    converged: bool
    cutoff: float
    l1_freq: np.ndarray | None = None

    @property
    def n_panels(self) -> int:
        return self.center.size

    def integral(self) -> tuple[np.ndarray, np.ndarray]:
        """Plain integral of each component and its error estimate."""
        core = np.sum(2.0 * self.half[:, None] * self.coeffs[:, 0, :], axis=0)
        tail = np.sum(self.tail_weights[:, None] * self.tail_values, axis=0)
        return core + tail, self.error + self.tail_error

    def fourier(self, tau, sign: float = 1.0, component: int = 0, chunk: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """int f_k(w) e^{i sign w tau} dw for every tau, with error estimates.

        At tau = 0 the result coincides with :meth:`integral` to rounding
        (j_0(0) = 1 and j_n(0) = 0 otherwise).
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        a = self.coeffs[:, :, component]
        c, h = self.center, self.half
        out = np.empty(tau.size, dtype=complex)
        ipow = (1j) ** _ORDERS
        parity = (-1.0) ** _ORDERS
        for s in range(0, tau.size, chunk):
            t = sign * tau[s : s + chunk]
            k = h[:, None] * t[None, :]
            ak = np.abs(k)[..., None]
            # spherical_jn returns nan for subnormal arguments; j_n(k) = delta_n0 there
            jn = np.where(ak < 1e-100, _ORDERS == 0, spherical_jn(_ORDERS[None, None, :], np.maximum(ak, 1e-100)))
            jn = np.where(k[..., None] < 0, parity * jn, jn)
            mom = 2.0 * ipow * jn
            phase = np.exp(1j * c[:, None] * t[None, :])
            core = np.einsum("pt,ptn,pn->t", h[:, None] * phase, mom, a)
            tail = np.exp(1j * self.tail_nodes[None, :] * t[:, None]) @ (
                self.tail_weights * self.tail_values[:, component]
            )
            out[s : s + chunk] = core + tail
        err = np.where(
            tau == 0,
            self.error[component] + self.tail_error[component],
            self.error[component] + self.tail_error[component] + self.tail_l1[component],
        )
        if self.l1_freq is not None:
            err = err + np.finfo(float).eps * np.abs(tau) * self.l1_freq[component]
        return out, err


def _expand(f: Callable, center: np.ndarray, half: np.ndarray):
    w = center[:, None] + half[:, None] * _X[None, :]
    vals = np.asarray(f(w))
    if vals.ndim == 2:
        vals = vals[..., None]
    coeffs = np.einsum("nj,pjk->pnk", _PROJ, vals)
    err = 2.0 * half[:, None] * (np.abs(coeffs[:, -1, :]) + np.abs(coeffs[:, -2, :]))
    l1 = half[:, None] * np.einsum("j,pjk->pk", _W, np.abs(vals))
    return coeffs, err, l1


def _rounding(center: np.ndarray, half: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """First-order effect of rounding the node frequencies, sum_p int |f'| eps |w| dw.

    Nodes are formed in absolute frequency, so a line of width h at |w| carries
    a relative jitter ~ eps |w| / h that no amount of refinement removes.
    """
    dfx = np.abs(np.einsum("jn,pnk->pjk", _DVAND, coeffs))
    scale = np.finfo(float).eps * (np.abs(center) + half)
    return np.einsum("j,pjk,p->k", _W, dfx, scale)


def _graded_rule(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = _TAIL_EDGES[:-1], _TAIL_EDGES[1:]
    u = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * x[None, :]
    wu = (0.5 * (hi - lo))[:, None] * w[None, :]
    return u.ravel(), wu.ravel()


def _tail_rule(f: Callable, cutoff: float):
    """Graded Gauss rule for w = +-cutoff/u, u in (0, 1], checked against a coarser rule."""
    rules = []
    for x, w in ((_X, _W), legendre.leggauss(NODES // 2)):
        u, wu = _graded_rule(x, w)
        jac = cutoff / u**2
        nodes = np.concatenate([cutoff / u, -cutoff / u])
        weights = np.concatenate([wu * jac, wu * jac])
        vals = np.asarray(f(nodes))
        if vals.ndim == 1:
            vals = vals[:, None]
        rules.append((nodes, weights, vals))
    (nodes, weights, vals), (_, w2, v2) = rules
    err = np.abs(weights @ vals - w2 @ v2)
    l1 = weights @ np.abs(vals)
    return nodes, weights, vals, err, l1


def adaptive_expansion(
    f: Callable,
    edges: np.ndarray,
    *,
    rtol: float = 1e-10,
    atol: float = 0.0,
    max_panels: int = 200_000,
) -> PanelExpansion:
    """Refine panels until the summed coefficient-tail error meets the target.

    Parameters
    ----------
    f : callable
        Maps an array of frequencies of shape (P, NODES) to (P, NODES, K);
        returning (P, NODES) is read as K = 1.
    edges : array
        Initial panel edges (ascending); ``edges[0]`` and ``edges[-1]`` are the
        cutoffs beyond which the rational tail map takes over.
    rtol, atol : float
        Per-component target max(atol, rtol * ||f||_1).
    """
    edges = np.asarray(edges, dtype=float)
    cutoff = max(abs(edges[0]), abs(edges[-1]))
    center = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    coeffs, err, l1 = _expand(f, center, half)
    tn, tw, tv, terr, tl1 = _tail_rule(f, cutoff)
    converged = False
    while True:
        total_l1 = l1.sum(axis=0) + tl1
        target = np.maximum(atol, rtol * total_l1)
        budget = target - terr
        e = err.sum(axis=0)
        failing = np.nonzero(e > np.maximum(budget, 0.5 * target))[0]
        if failing.size == 0:
            converged = True
            break
        splittable = half > 64 * np.finfo(float).eps * np.maximum(np.abs(center), 1.0)
        pick = np.zeros(center.size, dtype=bool)
        for k in failing:
            ek = np.where(splittable, err[:, k], 0.0)
            order = np.argsort(ek)[::-1]
            need = e[k] - 0.5 * max(budget[k], 0.5 * target[k])
            cum = np.cumsum(ek[order])
            n = int(np.searchsorted(cum, need)) + 1
            pick[order[:n]] = True
        pick &= splittable
        if not pick.any() or center.size + pick.sum() > max_panels:
            break
        pc, ph = center[pick], 0.5 * half[pick]
        nc = np.concatenate([pc - ph, pc + ph])
        nh = np.concatenate([ph, ph])
        c2, e2, l2 = _expand(f, nc, nh)
        keep = ~pick
        center = np.concatenate([center[keep], nc])
        half = np.concatenate([half[keep], nh])
        coeffs = np.concatenate([coeffs[keep], c2])
        err = np.concatenate([err[keep], e2])
        l1 = np.concatenate([l1[keep], l2])
    order = np.argsort(center)
    return PanelExpansion(
        center=center[order],
        half=half[order],
        coeffs=coeffs[order],
        error=err.sum(axis=0) + _rounding(center, half, coeffs),
        l1=l1.sum(axis=0),
        tail_nodes=tn,
        tail_weights=tw,
        tail_values=tv,
        tail_error=terr,
        tail_l1=tl1,
        converged=converged,
        cutoff=cutoff,
        l1_freq=np.einsum("p,pk->k", np.abs(center) + half, l1),
    )


def log_dense_grid(cutoff: float, npoints: int = 1_000_000, w_min: float = 1e-2) -> np.ndarray:
    """Symmetric grid, logarithmically spaced in |w| from w_min to cutoff, with 0."""
    half = np.geomspace(w_min, cutoff, (npoints - 1) // 2)
    return np.concatenate([-half[::-1], [0.0], half])


def dense_trapezoid(f: Callable, cutoff: float, npoints: int = 1_000_000, w_min: float = 1e-2) -> np.ndarray:
    """Brute-force trapezoid rule on :func:`log_dense_grid`; knows nothing about poles."""
    w = log_dense_grid(cutoff, npoints, w_min)
    vals = np.asarray(f(w))
    return np.trapezoid(vals, w, axis=0)
