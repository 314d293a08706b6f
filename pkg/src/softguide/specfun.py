"""Macdonald functions K0/K1 of complex argument and square-root branch algebra.

K0 and K1 are evaluated together:

* ``|w| <= 2``    ascending power series,
* ``2 < |w| <= 25``  Steed's continued fraction (CF2) for the ratio K1/K0,
* ``|w| > 25``    Hankel asymptotic series.

Only the principal branch with ``Re w > 0`` is supported.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BranchCutError, BranchPointWarning, SheetError, SingularityError

EULER_GAMMA = 0.57721566490153286061

SERIES_RADIUS = 2.0
ASYMPTOTIC_RADIUS = 25.0

_NSERIES = 24
_k = np.arange(_NSERIES)
_fact = np.cumprod(np.r_[1.0, np.arange(1, _NSERIES + 1, dtype=float)])
_harm = np.r_[0.0, np.cumsum(1.0 / np.arange(1, _NSERIES + 1))]
# coefficient tables, indexed by k
_C_I0 = 1.0 / _fact[:_NSERIES] ** 2
_C_I1 = 1.0 / (_fact[:_NSERIES] * _fact[1 : _NSERIES + 1])
_C_K0 = _harm[:_NSERIES] * _C_I0
_C_K1 = (_harm[:_NSERIES] + _harm[1 : _NSERIES + 1]) * _C_I1


def _check_domain(w):
    if np.any(w == 0):
        raise SingularityError("K0/K1 are singular at w = 0")
    bad = w.real <= 0
    if np.any(bad):
        raise BranchCutError(
            f"argument outside Re w > 0 (e.g. w = {w[bad].ravel()[0]!r})"
        )


def _horner(coef, t):
    acc = np.full_like(t, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * t + c
    return acc


def _series(w):
    h = 0.5 * w
    t = h * h
    i0 = _horner(_C_I0, t)
    i1 = h * _horner(_C_I1, t)
    lg = np.log(h) + EULER_GAMMA
    k0 = -lg * i0 + t * _horner(_C_K0[1:], t)
    k1 = 1.0 / w + lg * i1 - 0.5 * h * _horner(_C_K1, t)
    return k0, k1


def _steed(w):
    # Numerical-Recipes style CF2 for nu = 0; valid for complex w with Re w > 0.
    # Converged entries are dropped from the working set as the loop proceeds.
    out_s = np.empty_like(w)
    out_h = np.empty_like(w)
    idx = np.arange(w.size)
    x = w.ravel().copy()
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 2000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        done = np.abs(dels) <= 1e-17 * np.abs(s)
        if done.any():
            out_s.flat[idx[done]] = s[done]
            out_h.flat[idx[done]] = h[done]
            keep = ~done
            if not keep.any():
                break
            idx, x, b, d, h, delh, q1, q2, q, c, s = (
                v[keep] for v in (idx, x, b, d, h, delh, q1, q2, q, c, s)
            )
    else:  # pragma: no cover - never observed for Re w > 0, |w| > 2
        raise ArithmeticError("CF2 failed to converge")
    h = a1 * out_h
    k0 = np.sqrt(np.pi / (2.0 * w)) * np.exp(-w) / out_s
    k1 = k0 * (w + 0.5 - h) / w
    return k0, k1


def _asymptotic(w):
    pref = np.sqrt(np.pi / (2.0 * w)) * np.exp(-w)
    z8 = 8.0 * w
    s0 = np.ones_like(w)
    s1 = np.ones_like(w)
    t0 = np.ones_like(w)
    t1 = np.ones_like(w)
    for k in range(1, 40):
        odd2 = (2 * k - 1) ** 2
        t0 = t0 * (0.0 - odd2) / (k * z8)
        t1 = t1 * (4.0 - odd2) / (k * z8)
        s0 = s0 + t0
        s1 = s1 + t1
        if np.all(np.abs(t0) < 1e-17 * np.abs(s0)) and np.all(np.abs(t1) < 1e-17 * np.abs(s1)):
            break
    return pref * s0, pref * s1


def k0k1_complex(w):
    """Return ``(K0(w), K1(w))`` elementwise for complex ``w`` with ``Re w > 0``."""
    w = np.asarray(w, dtype=complex)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    _check_domain(w)
    k0 = np.empty_like(w)
    k1 = np.empty_like(w)
    aw = np.abs(w)
    for mask, fn in (
        (aw <= SERIES_RADIUS, _series),
        ((aw > SERIES_RADIUS) & (aw <= ASYMPTOTIC_RADIUS), _steed),
        (aw > ASYMPTOTIC_RADIUS, _asymptotic),
    ):
        if mask.any():
            k0[mask], k1[mask] = fn(w[mask])
    if scalar:
        return k0[0], k1[0]
    return k0, k1


def k0_complex(w):
    """Macdonald function K0 on the principal branch.

    Raises :class:`SingularityError` at ``w = 0`` and :class:`BranchCutError`
    for ``Re w <= 0``.
    """
    return k0k1_complex(w)[0]


def k1_complex(w):
    return k0k1_complex(w)[1]


def k0_log_split(kappa, r):
    """Split ``K0(kappa r) = -log(r) I0(kappa r) + H(kappa, r)``.

    Returns ``(I0(kappa r), H)``; ``H`` is smooth in ``r`` and finite at
    ``r = 0`` where it equals ``-(log(kappa/2) + gamma)``.
    """
    kappa = np.asarray(kappa, dtype=complex)
    r = np.asarray(r, dtype=float)
    w = kappa * r
    h = 0.5 * w
    t = h * h
    small = np.abs(w) <= SERIES_RADIUS
    # I0 by its ascending series (no cancellation for |arg w| < pi/2).
    nterm = int(max(_NSERIES, 8 + 2 * np.max(np.abs(w), initial=0.0)))
    term = np.ones_like(t)
    i0 = np.ones_like(t)
    for k in range(1, nterm):
        term = term * t / (k * k)
        i0 = i0 + term
    lk = np.log(0.5 * kappa) + EULER_GAMMA
    with np.errstate(divide="ignore", invalid="ignore"):
        hreg = np.where(small, -lk * i0 + t * _horner(_C_K0[1:], t), 0.0)
    if (~small).any():
        big = ~small
        hreg = np.asarray(hreg, dtype=complex)
        rb = np.broadcast_to(r, w.shape)[big]
        hreg[big] = k0_complex(w[big]) + np.log(rb) * i0[big]
    return i0, hreg


def sqrt_upper(z):
    """Square root on the branch ``Im sqrt >= 0`` (positive reals map to positive reals)."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(s.imag < 0, -s, s) if np.ndim(s) else (-s if s.imag < 0 else s)


class Sheet(enum.Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class SheetFlag:
    mode_index: int
    sheet: Sheet = Sheet.FIRST


def _second_sheet_root(w):
    # continuation of sqrt_upper through the positive real axis into Im w < 0
    s = np.sqrt(np.asarray(w, dtype=complex))
    neg_real = (np.imag(w) == 0) & (np.real(w) < 0)
    return np.where(neg_real, -np.abs(s) * 1j, s) if np.ndim(s) else (
        -abs(s) * 1j if neg_real else s
    )


def tau_mode(z, E_n, sheet=Sheet.FIRST, derivative=False):
    """Channel momentum ``sqrt(z - E_n)`` on the requested sheet.

    ``sheet`` may be a :class:`Sheet` or a :class:`SheetFlag`. The second sheet
    is the continuation through ``[E_n, inf)`` into the lower half-plane; it is
    rejected for ``Im z > 0`` with ``Re z <= E_n`` where it is ambiguous.
    With ``derivative=True`` returns ``(tau, dtau/dz)``.
    """
    if isinstance(sheet, SheetFlag):
        sheet = sheet.sheet
    w = np.asarray(z, dtype=complex) - E_n
    if sheet is Sheet.FIRST:
        tau = sqrt_upper(w)
    else:
        if np.any((np.imag(w) > 0) & (np.real(w) <= 0)):
            raise SheetError("second-sheet momentum requested in the upper half-plane below threshold")
        tau = _second_sheet_root(w)
    if not derivative:
        return tau
    if np.any(tau == 0):
        warnings.warn("derivative requested at a branch point", BranchPointWarning, stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return tau, 0.5 / tau


def free_kernel(z, r):
    """Kernel of the free 2D resolvent ``(2 pi)^-1 K0(k_z r)``, ``k_z = -i sqrt(z)``."""
    kz = -1j * sqrt_upper(z)
    return k0_complex(kz * np.asarray(r, dtype=float)) / (2 * np.pi)
