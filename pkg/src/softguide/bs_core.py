"""Nyström discretization of the free Birman-Schwinger operator on a trap measure.

Matrices act on node values ``sigma``: ``(K sigma)_i ~ int G_z(x_i, y) sigma(y) dmu(y)``
with ``G_z = (2 pi)^-1 K0(k_z |x - y|)``. Most algorithms work with the
symmetrized form ``Khat = C^{1/2} K C^{-1/2}`` (``C`` = diag of weights), for
which the ``L2(mu)`` inner product becomes the Euclidean one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import k0 as _k0_real, k1 as _k1_real

from .errors import (AccuracyError, CancellationError, ConfigError, GeometryError, MultiplicityError,
                     SolverError)
from .measure import Disk, KatoMeasure, Rectangle
from .specfun import k0_log_split, k0k1_complex, sqrt_upper

COMPLEX_STEP = 1e-20
DEFLATION_FLOOR = 1e-9


def decay_constant(z):
    """``k_z = -i sqrt(z)`` (first sheet), so that ``Re k_z > 0`` off ``[0, inf)``."""
    return -1j * sqrt_upper(complex(z))


def _k0k1(w):
    w = np.asarray(w)
    if not np.iscomplexobj(w) or not np.any(w.imag):
        wr = np.real(w)
        return _k0_real(wr), _k1_real(wr)
    return k0k1_complex(w)


def _k0(w):
    return _k0k1(w)[0]


def _kappa_arg(z):
    """``k_z`` as a real float when ``z`` is a real negative number."""
    kz = decay_constant(z)
    if np.imag(z) == 0 and np.real(z) < 0:
        return float(np.real(kz))
    if np.real(kz) <= 0:
        raise ConfigError("free kernel needs z off [0, inf)")
    return kz


@dataclass(frozen=True, eq=False)
class BSOperator:
    """Discretized ``chi R(z) chi`` on a measure.

    ``matrix`` acts on node values; ``hat`` is its weight-symmetrized form.
    """

    z: complex
    matrix: np.ndarray = field(repr=False)
    hat: np.ndarray = field(repr=False)
    measure: KatoMeasure = field(repr=False)
    regularization: str

    def eigenvalues(self):
        if np.imag(self.z) == 0:
            return np.linalg.eigvalsh(self.hat.real)
        return np.linalg.eigvals(self.hat)


# ---------------------------------------------------------------- area diagonal

def _self_integral(measure, kz, n_angle=1024):
    """``int_Omega (2 pi)^-1 K0(k |x_i - y|) dy`` for every node ``x_i``."""
    geo = measure.descriptor
    pts = measure.nodes
    if isinstance(geo, Disk):
        th = 2 * np.pi * np.arange(n_angle) / n_angle
        q = pts - np.asarray(geo.center)
        b = q[:, :1] * np.cos(th) + q[:, 1:] * np.sin(th)
        R = -b + np.sqrt(b * b + geo.radius ** 2 - np.sum(q * q, axis=1, keepdims=True))
        dth = np.full(th.shape, 2 * np.pi / n_angle)
        return _radial_sum(kz, R, dth)
    if isinstance(geo, Rectangle):
        xg, wg = np.polynomial.legendre.leggauss(48)
        out = np.empty(len(pts), dtype=complex if np.iscomplexobj(kz) else float)
        for i, (px, py) in enumerate(pts):
            dx = (geo.xmin - px, geo.xmax - px)
            dy = (geo.ymin - py, geo.ymax - py)
            cuts = sorted({math.atan2(v, u) % (2 * np.pi) for u in dx for v in dy}
                          | {0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi})
            cuts.append(cuts[0] + 2 * np.pi)
            ths, ws = [], []
            for a, b in zip(cuts, cuts[1:]):
                if b - a > 1e-15:
                    ths.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
                    ws.append(0.5 * (b - a) * wg)
            th = np.concatenate(ths)
            c, s = np.cos(th), np.sin(th)
            with np.errstate(divide="ignore"):
                rx = np.where(c > 0, dx[1] / np.where(c > 0, c, 1), np.where(c < 0, dx[0] / np.where(c < 0, c, 1), np.inf))
                ry = np.where(s > 0, dy[1] / np.where(s > 0, s, 1), np.where(s < 0, dy[0] / np.where(s < 0, s, 1), np.inf))
            out[i] = _radial_sum(kz, np.minimum(rx, ry)[None, :], np.concatenate(ws))[0]
        return out
    raise GeometryError("area self-integral needs a disk or rectangle")


def _radial_sum(kz, R, dth):
    # int_0^R K0(k r) r dr = (1 - k R K1(k R)) / k^2
    _, k1 = _k0k1(kz * R)
    return ((1.0 - kz * R * k1) @ dth) / (2 * np.pi * kz * kz)


# ---------------------------------------------------------------- curve corrections

def _log_moment(a, k):
    """``int_{-1}^{1} -log|a - u| P_k(u) du``.

    For ``|a| <= 1.2`` this is exact: written as ``F(1) - F(-1)`` with ``F(b) = int_a^b``; substituting
    ``u = a + s t`` turns each piece into ``int_0^L -log(t) q(t) dt`` for a
    polynomial ``q``, integrated term by term.
    """
    if abs(a) > 1.2:
        # smooth integrand; the monomial expansion would cancel badly here
        x, w = np.polynomial.legendre.leggauss(64)
        return float(np.sum(-np.log(np.abs(a - x)) * np.polynomial.legendre.legval(x, [0] * k + [1]) * w))
    P = np.polynomial.Legendre.basis(k).convert(kind=np.polynomial.Polynomial)
    total = 0.0
    for b, sign in ((1.0, 1.0), (-1.0, -1.0)):
        L = abs(b - a)
        if L == 0:
            continue
        s = 1.0 if b > a else -1.0
        q = P(np.polynomial.Polynomial([a, s])).coef
        m = np.arange(1, len(q) + 1)
        total += sign * s * np.sum(q * L ** m * (1.0 / m ** 2 - math.log(L) / m))
    return total


@lru_cache(maxsize=None)
def _log_weights(n, offset):
    """Product weights ``W[i, j] = int_{-1}^{1} -log|a_i - u| L_j(u) du``,
    ``a_i = x_i + offset`` for Gauss nodes ``x_i`` and Lagrange basis ``L_j``."""
    xg, _ = np.polynomial.legendre.leggauss(n)
    Vinv = np.linalg.inv(np.polynomial.legendre.legvander(xg, n - 1))
    mom = np.array([[_log_moment(a, k) for k in range(n)] for a in xg + offset])
    return mom @ Vinv


def _curve_blocks(measure, kz, K):
    lay = measure.panels
    n = lay.nodes_per_panel
    _, wg = np.polynomial.legendre.leggauss(n)
    pts = measure.nodes
    for p in range(len(lay.halfwidth)):
        ti = np.arange(p * n, (p + 1) * n)
        for q, off in ((p, 0.0),) + lay.neighbors[p]:
            sj = np.arange(q * n, (q + 1) * n)
            h = lay.halfwidth[q]
            W = _log_weights(n, float(off))
            diff = pts[ti][:, None, :] - pts[sj][None, :, :]
            r = np.hypot(diff[..., 0], diff[..., 1])
            du = np.abs(lay.local[ti][:, None] + off - lay.local[sj][None, :])
            same = du == 0
            i0, H = k0_log_split(kz, np.where(same, 0.0, r))
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(same, lay.speed[ti][:, None], r / (h * np.where(same, 1.0, du)))
            smooth = H - np.log(ratio) * i0
            block = h * (-math.log(h) * wg[None, :] + W) * i0 + h * wg[None, :] * smooth
            if not np.iscomplexobj(K):
                block = block.real
            K[np.ix_(ti, sj)] = block * lay.speed[sj][None, :] / (2 * np.pi)


# ---------------------------------------------------------------- assembly

def free_bs_matrix(measure, z):
    """Nyström matrix of ``chi_Omega R(z) chi_Omega`` for the free Laplacian.

    Area measures use singularity subtraction (each row integrates the
    constant exactly); curve measures use log-weighted product quadrature on
    the self and adjacent panels followed by symmetrization.
    """
    kz = _kappa_arg(z)
    pts = measure.nodes
    c = measure.weights
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(r, 1.0)
    if np.any(r == 0):
        raise GeometryError("coincident quadrature nodes")
    G = _k0(kz * r) / (2 * np.pi)
    np.fill_diagonal(G, 0.0)
    K = G * c[None, :]
    sq = np.sqrt(c)
    if measure.kind == "area":
        S = _self_integral(measure, kz)
        np.fill_diagonal(K, S - K.sum(axis=1))
        hat = K * sq[:, None] / sq[None, :]
        reg = "singularity-subtraction"
    else:
        _curve_blocks(measure, kz, K)
        hat = K * sq[:, None] / sq[None, :]
        hat = 0.5 * (hat + hat.T)
        K = hat / sq[:, None] * sq[None, :]
        reg = "log-product"
    if np.imag(z) == 0 and np.real(z) < 0:
        hat = np.real(hat)
        K = np.real(K)
    return BSOperator(complex(z), K, hat, measure, reg)


def bs_hat_derivative(measure, E):
    """``d Khat / dE`` at real ``E < 0`` by complex-step differentiation."""
    return np.imag(free_bs_matrix(measure, complex(E, COMPLEX_STEP)).hat) / COMPLEX_STEP


# ---------------------------------------------------------------- bound states

@dataclass(frozen=True, eq=False)
class TrapState:
    """Bound state of the free trap operator.

    ``vector`` is the symmetrized Birman-Schwinger eigenvector ``w_hat``,
    scaled so that the generated eigenfunction has unit norm
    (``w_hat . Khat'(E) w_hat = 1``). Node values of ``w`` are
    ``vector / sqrt(weights)``.
    """

    index: int
    energy: float
    vector: np.ndarray = field(repr=False)
    beta: float
    residual: float
    measure: KatoMeasure = field(repr=False)
    norm_w: float = 0.0

    @property
    def node_values(self):
        return self.vector / np.sqrt(self.measure.weights)

    def on(self, measure):
        """Same state carried to a translated copy of its measure."""
        return TrapState(self.index, self.energy, self.vector, self.beta, self.residual,
                         measure, self.norm_w)


def _top_eigs(hat, m):
    n = hat.shape[0]
    m = min(m, n)
    return scipy.linalg.eigh(hat, eigvals_only=True, subset_by_index=[n - m, n - 1])[::-1]


def trap_eigenvalues(measure, beta, tol=1e-12, e_top=-1e-10):
    """All bound states of ``-Laplacian - beta mu`` with energies below ``e_top``.

    For each eigenvalue branch ``mu_m(E)`` of the (monotone) Birman-Schwinger
    family the crossing ``beta mu_m(E) = 1`` is bracketed and solved with
    Brent's method. Returns states in ascending energy.
    """
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if not tol > 0:
        raise ConfigError("tol must be positive")

    def mus(E, m):
        return _top_eigs(free_bs_matrix(measure, E).hat, m)

    top = np.linalg.eigvalsh(free_bs_matrix(measure, e_top).hat)[::-1]
    count = int(np.sum(beta * top > 1.0))
    if count == 0:
        return []
    # area wells cannot bind below -beta; a straight line binds at -beta^2/4
    e_lo = -1.05 * beta if measure.kind == "area" else -max(1.0, 0.3 * beta * beta)
    prev = beta * top[0]
    while (cur := beta * mus(e_lo, 1)[0]) >= 1.0:
        if not cur < prev:
            raise AccuracyError("Birman-Schwinger norm grows with decreasing energy: "
                                "quadrature too coarse for this coupling")
        prev = cur
        e_lo *= 2
    states = []
    for m in range(count):
        f = lambda E: beta * mus(E, m + 1)[m] - 1.0
        E = brentq(f, e_lo, e_top, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=300)
        op = free_bs_matrix(measure, E)
        lam, vec = np.linalg.eigh(op.hat)
        order = np.argsort(lam)[::-1]
        lam, vec = lam[order], vec[:, order]
        gaps = np.abs(beta * lam - beta * lam[m])
        gaps[m] = np.inf
        if np.min(gaps) < max(1e3 * tol, 1e-9):
            raise MultiplicityError(f"trap eigenvalue {m + 1} is (nearly) degenerate")
        v = vec[:, m]
        dK = bs_hat_derivative(measure, E)
        scale = float(v @ dK @ v)
        if not scale > 0:
            raise SolverError("non-monotone Birman-Schwinger branch")
        v = v / math.sqrt(scale)
        if v.sum() < 0:
            v = -v
        res = float(np.linalg.norm(beta * op.hat @ v - v) / np.linalg.norm(v))
        if res > max(tol, 1e-9):
            raise SolverError(f"Birman-Schwinger residual {res:.2e} above tolerance")
        states.append(TrapState(m + 1, float(E), v, float(beta), res, measure,
                                float(np.linalg.norm(v))))
    states.sort(key=lambda s: s.energy)
    return states


def trap_eigenfunction(state, measure, x):
    """``omega(x) = sum_j G_E(x, x_j) w_j c_j`` at points ``x`` (shape (..., 2)).

    Exactly at a node the Birman-Schwinger identity ``omega = w / beta`` is used.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    kz = math.sqrt(-state.energy)
    diff = flat[:, None, :] - measure.nodes[None, :, :]
    r = np.hypot(diff[..., 0], diff[..., 1])
    hit = r == 0
    G = _k0(kz * np.where(hit, 1.0, r)) / (2 * np.pi)
    G[hit] = 0.0
    wv = state.node_values
    out = G @ (wv * measure.weights)
    rows, cols = np.nonzero(hit)
    out[rows] = wv[cols] / state.beta
    return out.reshape(x.shape[:-1])


def eigenfunction_on_nodes(state):
    return state.node_values / state.beta


# ---------------------------------------------------------------- deflation

def deflated_inverse(measure, beta, state, z, bs=None):
    """Regular part ``A_n(z)`` of ``(I - beta Khat(z))^{-1}`` near ``E_n``.

    Returned in the symmetrized basis.
    """
    dz = state.energy - z
    if abs(dz) < DEFLATION_FLOOR:
        raise CancellationError("z too close to the trap eigenvalue for deflation")
    if bs is None:
        bs = free_bs_matrix(measure, z)
    n = bs.hat.shape[0]
    full = np.linalg.inv(np.eye(n) - beta * bs.hat)
    w = state.vector
    return full - np.outer(w, w) / (beta * dz)


def default_neighborhood_radius(states, n, thresholds):
    """``min(gap to other trap energies, gap to thresholds) / 4``."""
    E = states[n - 1].energy if isinstance(states, (list, tuple)) else states.energy
    others = [s.energy for s in states if s.energy != E] if isinstance(states, (list, tuple)) else []
    gaps = [abs(E - e) for e in list(others) + list(thresholds)]
    if not gaps:
        return 0.25 * abs(E)
    return 0.25 * min(gaps)


class BSExpansion:
    """Taylor expansion of ``z -> Khat(z)`` about a real centre.

    Coefficients come from an FFT of ``Khat`` on a circle of radius ``radius``;
    evaluation inside ``radius / 3`` is accurate to rounding. Farther points
    fall back to direct assembly.
    """

    def __init__(self, measure, center, radius, points=24):
        self.measure = measure
        self.center = float(center)
        self.radius = float(radius)
        th = 2 * np.pi * np.arange(points) / points
        zs = self.center + self.radius * np.exp(1j * th)
        mats = np.stack([free_bs_matrix(measure, z).hat for z in zs])
        coef = np.fft.fft(mats, axis=0) / points
        self.coef = coef / (self.radius ** np.arange(points))[:, None, None]

    def hat(self, z):
        dz = complex(z) - self.center
        if abs(dz) > self.radius / 3:
            return free_bs_matrix(self.measure, z).hat
        acc = np.zeros_like(self.coef[0])
        for c in self.coef[::-1]:
            acc = acc * dz + c
        return acc
