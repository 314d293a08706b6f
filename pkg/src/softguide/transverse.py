"""One-dimensional transverse Hamiltonian ``h = -d^2/dx^2 - alpha(x) chi_[0,d]``.

Profiles are piecewise constant, so every solution is propagated exactly with
2x2 transfer matrices. Provides bound modes (shooting + Sturm counting),
real standing-wave continuum states and the resolvent kernel.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, MultiplicityError, PoleError, ThresholdError
from .specfun import sqrt_upper


@dataclass(frozen=True)
class TransverseProfile:
    """Strip of width ``d`` with depth ``alpha_i`` on consecutive sub-intervals.

    ``segments`` is a tuple of ``((a, b), alpha)`` covering ``[0, d]`` in order.
    """

    d: float
    segments: tuple

    def __post_init__(self):
        if not self.d > 0:
            raise ConfigError("strip width d must be positive")
        segs = tuple(((float(a), float(b)), float(al)) for (a, b), al in self.segments)
        if not segs:
            raise ConfigError("profile needs at least one segment")
        x = 0.0
        for (a, b), _ in segs:
            if abs(a - x) > 1e-12 * max(1.0, self.d) or not b > a:
                raise ConfigError("segments must partition [0, d] in increasing order")
            x = b
        if abs(x - self.d) > 1e-12 * max(1.0, self.d):
            raise ConfigError("segments must end at d")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, d, alpha):
        return cls(d, (((0.0, d), alpha),))

    @classmethod
    def steps(cls, d, alphas):
        edges = np.linspace(0.0, d, len(alphas) + 1)
        return cls(d, tuple(((edges[i], edges[i + 1]), a) for i, a in enumerate(alphas)))

    @property
    def breakpoints(self):
        return np.array([0.0] + [b for (_, b), _ in self.segments])

    @property
    def depths(self):
        return np.array([al for _, al in self.segments])

    def depth_at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for (a, b), al in self.segments:
            out = np.where((x >= a) & (x < b), al, out)
        return np.where(x == self.d, self.segments[-1][1], out)

    @property
    def integral(self):
        return sum((b - a) * al for (a, b), al in self.segments)

    def is_symmetric(self, tol=1e-12):
        x = self.breakpoints
        return np.allclose(x, self.d - x[::-1], atol=tol) and np.allclose(
            self.depths, self.depths[::-1], atol=tol
        )

    def mirrored(self):
        """Profile reflected about ``x = d/2``."""
        return TransverseProfile(
            self.d, tuple(((self.d - b, self.d - a), al) for (a, b), al in reversed(self.segments))
        )


# ---------------------------------------------------------------- propagation

def _transfer(q2, L):
    """Transfer matrix entries for ``u'' = -q2 u`` over length ``L`` (any sign)."""
    q2 = np.asarray(q2)
    q = np.sqrt(q2.astype(complex)) if np.iscomplexobj(q2) or np.any(q2 < 0) else np.sqrt(q2)
    qL = q * L
    c = np.cos(qL)
    with np.errstate(invalid="ignore", divide="ignore"):
        s_q = np.where(q == 0, L, np.sin(qL) / np.where(q == 0, 1, q))
    q_s = -q * np.sin(qL)
    if not np.iscomplexobj(q2):
        c, s_q, q_s = np.real(c), np.real(s_q), np.real(q_s)
    return c, s_q, q_s


def _transfer_scaled(q2, L):
    """Transfer entries divided by ``exp(lf)``; ``lf = |Im q L|`` when it is large."""
    q = np.sqrt(np.asarray(q2, dtype=complex))
    lf = np.abs(np.imag(q * L))
    big = lf > 30
    c, s_q, q_s = (np.asarray(v, dtype=complex) for v in _transfer(np.where(big, 0, q2).astype(complex), L))
    if np.any(big):
        qb = np.broadcast_to(q, c.shape)[big]
        lb = np.broadcast_to(lf, c.shape)[big]
        ep = np.exp(1j * qb * L - lb)
        em = np.exp(-1j * qb * L - lb)
        c = c.copy(); s_q = s_q.copy(); q_s = q_s.copy()
        c[big] = 0.5 * (ep + em)
        s_q[big] = (ep - em) / (2j * qb)
        q_s[big] = -qb * (ep - em) / 2j
    return c, s_q, q_s, np.where(big, lf, 0.0)


def _pieces(profile):
    """Interior pieces ``(a, b, alpha)``."""
    return [(a, b, al) for (a, b), al in profile.segments]


def propagate(profile, zeta, x_from, u, du, x_to, scaled=False):
    """Carry ``(u, u')`` of a solution at energy ``zeta`` from ``x_from`` to ``x_to``.

    Vectorized over ``zeta``/``u``/``du``; outside ``[0, d]`` the potential is zero.
    With ``scaled=True`` returns ``(u, du, log_scale)`` where the true values are
    ``(u, du) * exp(log_scale)``; this avoids overflow for large ``|zeta|``.
    """
    zeta = np.asarray(zeta)
    u = np.asarray(u) + 0 * zeta
    du = np.asarray(du) + 0 * zeta
    log_scale = np.zeros(np.shape(u))
    pts = profile.breakpoints
    step = 1 if x_to > x_from else -1
    x = x_from
    while x != x_to:
        if step > 0:
            nxt = [p for p in pts if p > x]
            xe = min(nxt[0], x_to) if nxt else x_to
        else:
            prv = [p for p in pts if p < x]
            xe = max(prv[-1], x_to) if prv else x_to
        mid = 0.5 * (x + xe)
        al = float(profile.depth_at(mid)) if 0.0 <= mid <= profile.d else 0.0
        if scaled:
            c, s_q, q_s, lf = _transfer_scaled(zeta + al, xe - x)
            log_scale = log_scale + lf
        else:
            c, s_q, q_s = _transfer(zeta + al, xe - x)
        u, du = c * u + s_q * du, q_s * u + c * du
        if scaled:
            mag = np.maximum(np.abs(u), np.abs(du) / np.maximum(1.0, np.sqrt(np.abs(zeta + al))))
            mag = np.where(mag > 0, mag, 1.0)
            u, du = u / mag, du / mag
            log_scale = log_scale + np.log(mag)
        x = xe
    if scaled:
        return u, du, log_scale
    return u, du


def transfer_determinant(profile, zeta):
    """Determinant of the full ``[0, d]`` transfer matrix (identically 1)."""
    u1, du1 = propagate(profile, zeta, 0.0, 1.0, 0.0, profile.d)
    u2, du2 = propagate(profile, zeta, 0.0, 0.0, 1.0, profile.d)
    return u1 * du2 - u2 * du1


# ---------------------------------------------------------------- bound modes

def _shoot(profile, E):
    """Left-decaying solution at real ``E <= 0``; returns (u(d), u'(d), zeros in [0, d])."""
    kap = math.sqrt(-E) if E < 0 else 0.0
    u, du = 1.0, kap
    zeros = 0
    for a, b, al in _pieces(profile):
        L = b - a
        q2 = E + al
        if q2 > 0:
            q = math.sqrt(q2)
            psi0 = math.atan2(-du / q, u)
            zeros += math.floor((psi0 + q * L - math.pi / 2) / math.pi) - math.floor(
                (psi0 - math.pi / 2) / math.pi
            )
        c, s_q, q_s = (float(v) for v in _transfer(np.float64(q2), L))
        un, dun = c * u + s_q * du, q_s * u + c * du
        if q2 <= 0 and u * un < 0:
            zeros += 1
        u, du = un, dun
    return u, du, zeros


def count_below(profile, E):
    """Number of bound states strictly below ``E <= 0`` (Sturm oscillation count)."""
    u, du, zeros = _shoot(profile, E)
    if E < 0:
        kap = math.sqrt(-E)
        A = 0.5 * (u + du / kap)
        B = 0.5 * (u - du / kap)
        if A * B < 0 and abs(B) > abs(A):
            zeros += 1
    elif u * du < 0:
        zeros += 1
    return zeros


def zero_energy_count(profile):
    """Nodes of the zero-energy left solution; equals the number of negative eigenvalues."""
    return count_below(profile, 0.0)


def _mismatch(profile, E):
    u, du, _ = _shoot(profile, E)
    kap = math.sqrt(-E) if E < 0 else 0.0
    return du + kap * u


@dataclass(frozen=True)
class TransverseMode:
    """Normalized bound state of the transverse Hamiltonian.

    ``table`` holds ``(x_start, x_end, alpha, phi(x_start), phi'(x_start))``
    for each interior segment. ``M`` is the left exterior amplitude
    (``phi = M e^{kappa x2}`` for ``x2 < 0``), ``M_right`` the right one.
    """

    index: int
    energy: float
    kappa: float
    M: float
    M_right: float
    table: tuple = field(repr=False)
    d: float = field(repr=False, default=0.0)

    def exterior_amplitude(self, side):
        return self.M_right if side == "above" else self.M


def _segment_norm(u0, du0, q2, L):
    if q2 > 0:
        q = math.sqrt(q2)
        a, b = u0, du0 / q
        return (a * a * (L / 2 + math.sin(2 * q * L) / (4 * q))
                + b * b * (L / 2 - math.sin(2 * q * L) / (4 * q))
                + a * b * math.sin(q * L) ** 2 / q)
    if q2 < 0:
        s = math.sqrt(-q2)
        a, b = u0, du0 / s
        return (a * a * (L / 2 + math.sinh(2 * s * L) / (4 * s))
                + b * b * (-L / 2 + math.sinh(2 * s * L) / (4 * s))
                + a * b * math.sinh(s * L) ** 2 / s)
    return u0 * u0 * L + u0 * du0 * L * L + du0 * du0 * L ** 3 / 3


def _build_mode(profile, n, E):
    kap = math.sqrt(-E)
    u, du = 1.0, kap
    rows = []
    norm = 1.0 / (2 * kap)
    for a, b, al in _pieces(profile):
        rows.append([a, b, al, u, du])
        norm += _segment_norm(u, du, E + al, b - a)
        c, s_q, q_s = (float(v) for v in _transfer(np.float64(E + al), b - a))
        u, du = c * u + s_q * du, q_s * u + c * du
    norm += u * u / (2 * kap)
    scale = 1.0 / math.sqrt(norm)
    table = tuple((r[0], r[1], r[2], r[3] * scale, r[4] * scale) for r in rows)
    return TransverseMode(n, E, kap, scale, u * scale, table, profile.d)


def solve_modes(profile, tol=1e-12):
    """All negative eigenvalues of the transverse Hamiltonian, ascending.

    Eigenvalues are isolated by bisection on the Sturm count and polished on
    the matching function ``u'(d) + kappa u(d)`` to absolute accuracy ``tol``.
    Returns an empty list (with a warning) when there is no bound state.
    """
    if not tol > 0:
        raise ConfigError("tol must be positive")
    N = zero_energy_count(profile)
    if N == 0:
        warnings.warn("transverse profile has no bound state", RuntimeWarning, stacklevel=2)
        return []
    E_floor = -max(0.0, float(np.max(profile.depths))) - 1e-12
    modes = []
    for n in range(1, N + 1):
        lo, hi = E_floor, 0.0
        clo, chi = count_below(profile, lo), N
        while not (clo == n - 1 and chi == n):
            mid = 0.5 * (lo + hi)
            cm = count_below(profile, mid)
            if cm <= n - 1:
                lo, clo = mid, cm
            else:
                hi, chi = mid, cm
            if hi - lo < 1e-15 * max(1.0, abs(lo)):
                raise MultiplicityError(f"could not isolate transverse eigenvalue {n}")
        flo, fhi = _mismatch(profile, lo), _mismatch(profile, hi)
        if flo == 0:
            E = lo
        elif fhi == 0:
            E = hi
        else:
            E = brentq(lambda e: _mismatch(profile, e), lo, hi, xtol=min(tol, 1e-14), rtol=1e-15, maxiter=500)
        modes.append(_build_mode(profile, n, E))
    for m1, m2 in zip(modes, modes[1:]):
        if m2.energy - m1.energy < 1e-9:
            raise MultiplicityError("near-degenerate transverse eigenvalues")
    return modes


def eval_mode(mode, x2):
    """Evaluate the normalized mode at ``x2`` (vectorized)."""
    x2 = np.asarray(x2, dtype=float)
    out = np.empty_like(x2)
    left = x2 < 0
    out[left] = mode.M * np.exp(mode.kappa * x2[left])
    right = x2 > mode.d
    out[right] = mode.M_right * np.exp(-mode.kappa * (x2[right] - mode.d))
    for i, (a, b, al, u0, du0) in enumerate(mode.table):
        last = i == len(mode.table) - 1
        sel = (x2 >= a) & ((x2 <= b) if last else (x2 < b))
        if sel.any():
            c, s_q, _ = _transfer(np.float64(mode.energy + al), x2[sel] - a)
            out[sel] = c * u0 + s_q * du0
    return out if out.ndim else float(out)


def eval_mode_derivative(mode, x2):
    x2 = np.asarray(x2, dtype=float)
    out = np.empty_like(x2)
    left = x2 < 0
    out[left] = mode.kappa * mode.M * np.exp(mode.kappa * x2[left])
    right = x2 > mode.d
    out[right] = -mode.kappa * mode.M_right * np.exp(-mode.kappa * (x2[right] - mode.d))
    for i, (a, b, al, u0, du0) in enumerate(mode.table):
        last = i == len(mode.table) - 1
        sel = (x2 >= a) & ((x2 <= b) if last else (x2 < b))
        if sel.any():
            c, _, q_s = _transfer(np.float64(mode.energy + al), x2[sel] - a)
            out[sel] = q_s * u0 + c * du0
    return out


# ---------------------------------------------------------------- continuum

CHANNELS = (0, 1)


def _continuum_coefficients(profile, p):
    """Löwdin coefficients mapping the fundamental pair (cos-like, sin-like at x=0)
    onto delta-normalized real standing waves. Shape ``(..., 2, 2)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ThresholdError("continuum momentum must be positive")
    zeta = p * p
    u1, du1 = propagate(profile, zeta, 0.0, 1.0, 0.0, profile.d)
    u2, du2 = propagate(profile, zeta, 0.0, 0.0, p, profile.d)
    # asymptotic amplitudes: left (a cos + b sin), right (c cos + e sin)
    amp = np.stack([
        np.stack([np.ones_like(p), np.zeros_like(p), u1, du1 / p], axis=-1),
        np.stack([np.zeros_like(p), np.ones_like(p), u2, du2 / p], axis=-1),
    ], axis=-2)
    gram = 0.5 * np.pi * np.einsum("...ak,...bk->...ab", amp, amp)
    lam, vec = np.linalg.eigh(gram)
    return np.einsum("...ak,...k,...bk->...ab", vec, lam ** -0.5, vec)


def solution_values(profile, zeta, u0, du0, x):
    """Value at ``x`` of the solution with data ``(u0, du0)`` at ``x = 0``.

    All arguments broadcast together; evaluation is exact piece by piece.
    """
    zeta, u0, du0, x = np.broadcast_arrays(*(np.asarray(v) for v in (zeta, u0, du0, x)))
    dtype = np.result_type(zeta, u0, du0, float)
    out = np.zeros(x.shape, dtype=dtype)
    u, du = u0.astype(dtype), du0.astype(dtype)
    left = x < 0
    if left.any():
        c, s_q, _ = _transfer(zeta[left], x[left])
        out[left] = c * u[left] + s_q * du[left]
    pieces = _pieces(profile)
    for i, (a, b, al) in enumerate(pieces):
        last = i == len(pieces) - 1
        sel = (x >= a) & ((x <= b) if last else (x < b))
        if sel.any():
            c, s_q, _ = _transfer(zeta[sel] + al, x[sel] - a)
            out[sel] = c * u[sel] + s_q * du[sel]
        c, s_q, q_s = _transfer(zeta + al, b - a)
        u, du = c * u + s_q * du, q_s * u + c * du
    right = x > profile.d
    if right.any():
        c, s_q, _ = _transfer(zeta[right], x[right] - profile.d)
        out[right] = c * u[right] + s_q * du[right]
    return out


def continuum_basis(profile, p, x2):
    """Both standing-wave channels at momenta ``p`` and points ``x2``.

    Returns an array of shape ``(2,) + broadcast(p, x2).shape``.
    """
    p_b, x_b = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(x2, dtype=float))
    coef = _continuum_coefficients(profile, p_b)
    f1 = solution_values(profile, p_b * p_b, 1.0, 0.0, x_b)
    f2 = solution_values(profile, p_b * p_b, 0.0, p_b, x_b)
    return np.stack([f1 * coef[..., 0, m] + f2 * coef[..., 1, m] for m in CHANNELS])


def generalized_eigenfunction(profile, p2, channel, x2):
    """Real standing-wave continuum state ``psi(x2, p2)`` for channel 0 or 1.

    Normalized so that ``sum_n phi_n(x) phi_n(y) + sum_ch int_0^inf psi psi dp2``
    is the identity; for ``alpha = 0`` the channels are ``cos(p x)/sqrt(pi)``
    and ``sin(p x)/sqrt(pi)``.
    """
    if channel not in CHANNELS:
        raise ConfigError("channel must be 0 or 1")
    if np.any(np.asarray(p2) <= 0):
        raise ThresholdError("p2 = 0 is the continuum threshold")
    return continuum_basis(profile, p2, x2)[channel]


# ---------------------------------------------------------------- resolvent

def jost_coefficients(profile, zeta):
    """Exterior decompositions used by the resolvent.

    Returns ``(k, c, e, a, b)`` where ``u_-`` (``= e^{-ikx}`` on the left)
    equals ``c e^{ik(x-d)} + e e^{-ik(x-d)}`` on the right and ``u_+``
    (``= e^{ik(x-d)}`` on the right) equals ``a e^{-ikx} + b e^{ikx}`` on the left.
    """
    zeta = np.asarray(zeta, dtype=complex)
    k = sqrt_upper(zeta)
    um, dum = propagate(profile, zeta, 0.0, 1.0, -1j * k, profile.d)
    up, dup = propagate(profile, zeta, profile.d, 1.0, 1j * k, 0.0)
    r_m = dum / (1j * k)
    r_p = dup / (1j * k)
    return k, 0.5 * (um + r_m), 0.5 * (um - r_m), 0.5 * (up - r_p), 0.5 * (up + r_p)


def reflection_coefficient(profile, zeta, side):
    """Exterior reflection amplitude seen from ``side`` ('above' or 'below').

    Only the ratio is formed, so the common growth factor is dropped and
    large ``|zeta|`` does not overflow.
    """
    zeta = np.asarray(zeta, dtype=complex)
    k = sqrt_upper(zeta)
    if side == "above":
        u, du, _ = propagate(profile, zeta, 0.0, 1.0, -1j * k, profile.d, scaled=True)
        r = du / (1j * k)
        return k, (u + r) / (u - r)
    u, du, _ = propagate(profile, zeta, profile.d, 1.0, 1j * k, 0.0, scaled=True)
    r = du / (1j * k)
    return k, (u - r) / (u + r)


def transverse_green(profile, zeta, x2, y2):
    """Kernel of ``(h - zeta)^{-1}`` for ``zeta`` off the spectrum (first sheet)."""
    zeta = complex(zeta)
    k = sqrt_upper(zeta)
    if k == 0:
        raise ThresholdError("zeta = 0 is the continuum threshold")
    lo, hi = float(min(x2, y2)), float(max(x2, y2))
    # each Jost solution is propagated only in its direction of growth
    if lo <= 0:
        arg = -1j * k * lo
        um, lm = np.exp(1j * arg.imag), arg.real
    else:
        um, _, lm = propagate(profile, zeta, 0.0, 1.0, -1j * k, lo, scaled=True)
    if hi >= profile.d:
        arg = 1j * k * (hi - profile.d)
        up, lp = np.exp(1j * arg.imag), arg.real
    else:
        up, _, lp = propagate(profile, zeta, profile.d, 1.0, 1j * k, hi, scaled=True)
    # Wronskian W(u+, u-) evaluated at x = d
    umd, dumd, lw = propagate(profile, zeta, 0.0, 1.0, -1j * k, profile.d, scaled=True)
    W = dumd - 1j * k * umd
    if abs(W) < 1e-13 * (abs(dumd) + abs(k * umd)):
        raise PoleError(f"zeta = {zeta} is an eigenvalue of the transverse Hamiltonian")
    return complex(um * up / W * np.exp(lm + lp - lw))
