"""Kernels of the unperturbed strip resolvent and the trap-restricted operator G.

The strip resolvent splits into a finite sum over transverse modes (``rd``)
plus a continuum integral (``rc``). The matrix ``G = beta [R_strip - R_free]``
on the trap nodes is assembled from the mode sum, continued to the requested
sheet, and a smooth remainder ``Q`` obtained from the Fourier representation
after subtracting the mode poles (see :func:`g_matrix`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import exp1

from .errors import AccuracyError, ConfigError, ThresholdError
from .measure import strip_side
from .specfun import Sheet, SheetFlag, free_kernel, sqrt_upper, tau_mode
from .transverse import continuum_basis, eval_mode, reflection_coefficient, transverse_green


@dataclass(frozen=True)
class SheetConfig:
    """Second sheet for modes ``1..j``, first sheet for the rest."""

    n_modes: int
    j: int = 0

    def __post_init__(self):
        if not 0 <= self.j <= self.n_modes:
            raise ConfigError("continuation segment index must lie in [0, number of modes]")

    @property
    def flags(self):
        return tuple(SheetFlag(n, Sheet.SECOND if n <= self.j else Sheet.FIRST)
                     for n in range(1, self.n_modes + 1))

    @classmethod
    def for_energy(cls, modes, E):
        """Continuation through the segment ``(E_j, E_{j+1})`` containing ``E``."""
        return cls(len(modes), sum(1 for m in modes if m.energy < E))


def _pts(x):
    return np.asarray(x, dtype=float)


def _taus(modes, z, sheet):
    flags = sheet.flags if sheet is not None else [SheetFlag(m.index) for m in modes]
    taus = np.array([complex(tau_mode(z, m.energy, f)) for m, f in zip(modes, flags)])
    if np.any(taus == 0):
        raise ThresholdError("z sits on a channel threshold")
    return taus


def rd_kernel(modes, z, sheet, x, y):
    """Mode-sum part ``(i/2) sum_n e^{i tau_n |x1 - y1|} / tau_n phi_n(x2) phi_n(y2)``.

    ``x`` and ``y`` are points (or broadcastable arrays of points, last axis 2).
    """
    x, y = _pts(x), _pts(y)
    taus = _taus(modes, z, sheet)
    dx = np.abs(x[..., 0] - y[..., 0])
    out = 0j
    for m, tau in zip(modes, taus):
        out = out + 0.5j * np.exp(1j * tau * dx) / tau * eval_mode(m, x[..., 1]) * eval_mode(m, y[..., 1])
    return out


def rd_matrix(modes, z, sheet, pts):
    taus = _taus(modes, z, sheet)
    dx = np.abs(pts[:, None, 0] - pts[None, :, 0])
    out = np.zeros(dx.shape, dtype=complex)
    for m, tau in zip(modes, taus):
        phi = eval_mode(m, pts[:, 1])
        out += 0.5j * np.exp(1j * tau * dx) / tau * np.outer(phi, phi)
    return out


def _real_imag_quad(f, a, b, **kw):
    re, er = quad(lambda t: f(t).real, a, b, **kw)
    im, ei = quad(lambda t: f(t).imag, a, b, **kw)
    return re + 1j * im, abs(er) + abs(ei)


def rc_kernel(profile, z, x, y, tol=1e-10, p_cap=2000.0):
    """Continuum part of the strip resolvent kernel by quadrature over ``p2``.

    The integral is truncated where ``exp(-Re sqrt(p2^2 - z)|x1 - y1|)/p2``
    drops below ``tol``; coincident ``x1`` makes the decay algebraic and
    normally ends in :class:`AccuracyError`.
    """
    x, y = _pts(x), _pts(y)
    dx = abs(x[0] - y[0])

    def integrand(p):
        tau = sqrt_upper(z - p * p)
        psi = continuum_basis(profile, p, np.array([x[1], y[1]]))
        return 0.5j * np.exp(1j * tau * dx) / tau * (psi[0, 0] * psi[0, 1] + psi[1, 0] * psi[1, 1])

    if dx > 0:
        pmax = 1.0
        while True:
            env = math.exp(-math.sqrt(pmax * pmax + max(-np.real(z), 0.0)) * dx) / pmax
            if env < tol * 1e-2:
                break
            pmax *= 1.5
            if pmax > p_cap:
                raise AccuracyError(f"rc_kernel: tail above tol at cap p={p_cap} (|dx|={dx})")
    else:
        raise AccuracyError("rc_kernel: integrand decays only algebraically for x1 = y1")
    val, err = _real_imag_quad(integrand, 1e-12, pmax, limit=400, epsabs=tol * 1e-2, epsrel=1e-12,
                               points=_osc_points(pmax, max(abs(x[1]), abs(y[1]), profile.d)))
    if err > 10 * tol:
        raise AccuracyError(f"rc_kernel: quadrature error estimate {err:.1e} above tol")
    return val


def _osc_points(pmax, length):
    n = int(min(50, max(1, pmax * length / math.pi)))
    return list(np.linspace(0, pmax, n + 2)[1:-1])


def fourier_route_kernel(profile, z, x, y, tol=1e-10):
    """``(2 pi)^-1 int e^{i p (x1 - y1)} g(z - p^2; x2, y2) dp`` (first sheet)."""
    x, y = _pts(x), _pts(y)
    dx = abs(x[0] - y[0])
    dy = abs(x[1] - y[1])
    g = lambda p: transverse_green(profile, z - p * p, x[1], y[1])
    if dy > 0 and dx < dy:
        # transverse separation gives exponential decay; integrate on a finite range
        pmax = (math.log(1.0 / tol) + 5.0) / dy
        val, err = _real_imag_quad(lambda p: math.cos(p * dx) * g(p), 0, pmax, limit=400,
                                   epsabs=tol * 1e-2, epsrel=1e-12,
                                   points=_osc_points(pmax, dx + dy))
    elif dx > 0:
        re, er = quad(lambda p: g(p).real, 0, np.inf, weight="cos", wvar=dx, epsabs=tol * 1e-2, limlst=200)
        im, ei = quad(lambda p: g(p).imag, 0, np.inf, weight="cos", wvar=dx, epsabs=tol * 1e-2, limlst=200)
        err = er + ei
        val = re + 1j * im
    else:
        raise AccuracyError("fourier_route_kernel: kernel is log-singular at x = y")
    if err > 10 * tol:
        raise AccuracyError(f"fourier_route_kernel: quadrature error estimate {err:.1e}")
    return val / math.pi


# ---------------------------------------------------------------- G on trap nodes

def cos_tail(delta, c, P):
    """``int_P^inf cos(p delta) / (p^2 + c) dp`` for ``P > |sqrt(c)|`` (vectorized in delta)."""
    delta = np.abs(np.asarray(delta, dtype=float))
    s = np.sqrt(complex(c))
    out = np.empty(delta.shape, dtype=complex)
    zero = delta == 0
    out[zero] = np.log((P + 1j * s) / (P - 1j * s)) / (2j * s)
    dz = delta[~zero]
    acc = 0
    for sign, a in ((1, 1j * s), (-1, -1j * s)):
        term = 0.5 * (np.exp(1j * dz * a) * exp1(-1j * dz * (P - a))
                      + np.exp(-1j * dz * a) * exp1(1j * dz * (P - a)))
        acc = acc + sign * term
    out[~zero] = acc / (2j * s)
    return out


def cos_tail_table(delta, c, P, degree=96):
    """:func:`cos_tail` on many separations via Chebyshev interpolation in ``|delta|``."""
    delta = np.abs(np.asarray(delta, dtype=float))
    top = float(delta.max()) if delta.size else 0.0
    if top == 0 or delta.size <= 4 * degree:
        return cos_tail(delta, c, P)
    cheb = np.polynomial.chebyshev
    t = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    vals = cos_tail(0.5 * top * (t + 1), c, P)
    coef = cheb.chebfit(t, vals, degree)
    return cheb.chebval(2 * delta / top - 1, coef)


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    p: np.ndarray
    w: np.ndarray
    P: float


def momentum_grid(modes, z, rho, nodes=16, max_width=0.5):
    """Composite Gauss grid on ``[0, P]``; panels are symmetric about open-channel momenta."""
    zr = float(np.real(z))
    opens = sorted(math.sqrt(zr - m.energy) for m in modes if m.energy < zr)
    P = max(20.0 / rho, 2.0 * (opens[-1] if opens else 0.0) + 1.0, 2.0)
    cuts = [0.0, P]
    for i, p0 in enumerate(opens):
        room = [p0, P - p0] + [abs(p0 - q) for j, q in enumerate(opens) if j != i]
        h = 0.4 * min(room + [max_width])
        cuts += [p0 - h, p0 + h]
    cuts = sorted(cuts)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    ps, ws = [], []
    for a, b in zip(cuts, cuts[1:]):
        k = max(1, int(math.ceil((b - a) / max_width)))
        edges = np.linspace(a, b, k + 1)
        for lo, hi in zip(edges, edges[1:]):
            ps.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * xg)
            ws.append(0.5 * (hi - lo) * wg)
    return MomentumGrid(np.concatenate(ps), np.concatenate(ws), P)


def reflected_kernel_matrix(profile, modes, z, pts, side, grid):
    """Smooth remainder ``Q = (R_strip - R_free) - R_d`` (first-sheet modes subtracted)
    on a set of points all lying on one side of the strip."""
    x1, x2 = pts[:, 0], pts[:, 1]
    xi = x2 - profile.d if side == "above" else -x2
    if np.any(xi <= 0):
        raise ConfigError("points must lie strictly outside the strip on the given side")
    p, w = grid.p, grid.w
    zeta = z - p * p
    k, R = reflection_coefficient(profile, zeta, side)
    amp = 0.5j / k * R * w / np.pi
    ex = np.exp(1j * np.outer(xi, k))
    C = np.cos(np.outer(x1, p))
    S = np.sin(np.outer(x1, p))
    U, V = C * ex, S * ex
    Q = (U * amp) @ U.T + (V * amp) @ V.T
    dx = x1[:, None] - x1[None, :]
    for m in modes:
        cm = m.energy - z
        d_p = w / (p * p + cm) / np.pi
        phi = eval_mode(m, x2)
        pole = (C * d_p) @ C.T + (S * d_p) @ S.T + cos_tail_table(dx, cm, grid.P) / np.pi
        Q -= np.outer(phi, phi) * pole
    return Q


@dataclass(frozen=True, eq=False)
class GOperator:
    """``G = beta [chi R_strip chi - chi R_free chi]`` on trap nodes.

    ``matrix`` acts on node values, ``hat`` is the weight-symmetrized form.
    """

    z: complex
    matrix: np.ndarray = field(repr=False)
    hat: np.ndarray = field(repr=False)
    sheet: SheetConfig
    beta: float

    @property
    def real_part(self):
        """``G^R`` (meaningful at real z)."""
        return self.hat.real

    @property
    def imag_part(self):
        """``G^I`` (meaningful at real z)."""
        return self.hat.imag


def strip_minus_free(measure, profile, modes, z, sheet, grid=None, rho=None):
    """Kernel matrix of ``R_strip(z) - R_free(z)`` at the trap nodes (no weights)."""
    zc = complex(z)
    if zc.real >= 0:
        raise ConfigError("the remainder route needs Re z < 0")
    side = strip_side(measure, profile.d)
    if grid is None:
        from .measure import distance_to_strip
        grid = momentum_grid(modes, zc, rho or distance_to_strip(measure, profile.d))
    pts = measure.nodes
    return rd_matrix(modes, zc, sheet, pts) + reflected_kernel_matrix(profile, modes, zc, pts, side, grid)


def g_matrix(measure, profile, modes, beta, z, sheet, tol=1e-12, grid=None):
    """Assemble :class:`GOperator` at ``z`` with the requested sheet configuration."""
    if sheet.n_modes != len(modes):
        raise ConfigError("sheet configuration does not match the number of modes")
    if np.imag(z) > 0 and sheet.j > 0 and np.real(z) <= modes[sheet.j - 1].energy:
        raise ConfigError("second-sheet evaluation above the real axis below threshold")
    D = strip_minus_free(measure, profile, modes, z, sheet, grid)
    c = measure.weights
    sq = np.sqrt(c)
    mat = beta * D * c[None, :]
    hat = beta * D * sq[:, None] * sq[None, :]
    return GOperator(complex(z), mat, hat, sheet, float(beta))


def cosine_kernel(modes, E, j, x, y):
    """``sum_{k<=j} cos(sqrt(E - E_k)|x1 - y1|) phi_k(x2) phi_k(y2) / (2 sqrt(E - E_k))``."""
    x, y = _pts(x), _pts(y)
    dx = np.abs(x[..., 0] - y[..., 0])
    out = 0.0
    for m in modes[:j]:
        p = math.sqrt(E - m.energy)
        out = out + np.cos(p * dx) / (2 * p) * eval_mode(m, x[..., 1]) * eval_mode(m, y[..., 1])
    return out


# ---------------------------------------------------------------- Hilbert-Schmidt norm

def hs_norm_squared(measure, d, z=-1.0, tol=1e-12):
    """``||chi_Omega R_free(z) chi_Sigma||_HS^2`` with a certified truncation bound.

    Fourier transforming along ``x1`` turns the strip integral into
    ``(2 pi)^-1 int dp int_0^d |e^{-s |x2 - y2|} / (2 s)|^2 dy2`` with
    ``s = sqrt(p^2 - z)``; the ``y2`` integral is elementary. The ``p`` integral
    is cut at ``P`` and the discarded part bounded using ``Re s >= |p|``.
    Returns ``(value, tail_bound)``.
    """
    z = complex(z)
    if not z.real < 0:
        raise ConfigError("needs Re z < 0")
    side = strip_side(measure, d)
    x2 = measure.nodes[:, 1]
    near = x2 - d if side == "above" else -x2
    far = near + d
    h0 = float(near.min())

    def f(p):
        s = np.sqrt(p * p - z)
        sig = s.real
        strip = (np.exp(-2 * sig * near) - np.exp(-2 * sig * far)) / (2 * sig)
        return strip / (4 * abs(s) ** 2) / math.pi  # even in p: factor 2 / (2 pi)

    # tail: int_P^inf e^{-2 p h0} / (8 pi p^3) dp <= e^{-2 P h0} / (16 pi h0 P^3)
    P = 1.0
    while math.exp(-2 * P * h0) / (16 * math.pi * h0 * P ** 3) > tol:
        P *= 1.5
    vals, _ = quad_vec(f, 0.0, P, epsabs=tol, epsrel=1e-12, limit=400)
    tail = math.exp(-2 * P * h0) / (16 * math.pi * h0 * P ** 3) * measure.total_mass
    return float(vals @ measure.weights), tail
