"""Resonance poles of the waveguide-plus-trap system and golden-rule widths.

The pole near a trap energy ``E`` solves the scalar equation

    eta(z) = z - E + beta^-1 w . G(z) (I - A(z) G(z))^-1 w = 0,

with ``G`` the strip-minus-free operator continued to the second sheet of the
open channels and ``A`` the regular part of the free Birman-Schwinger inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.stats import linregress

from .bs_core import BSExpansion, TrapState, default_neighborhood_radius, eigenfunction_on_nodes
from .errors import (CancellationError, ConfigError, DomainError, RegimeError, SolverError,
                     ThresholdError, UniquenessError)
from .measure import distance_to_strip, place_at_distance, strip_side
from .strip_resolvent import SheetConfig, g_matrix, momentum_grid
from .transverse import eval_mode

THRESHOLD_GUARD = 1e-6
REGIME_LIMIT = 0.5
NEUMANN_SWITCH = 0.1


def open_channels(modes, E):
    """Number ``j`` of transverse thresholds below ``E``."""
    return sum(1 for m in modes if m.energy < E)


def _check_thresholds(modes, E):
    for m in modes:
        if abs(E - m.energy) < THRESHOLD_GUARD:
            raise ThresholdError(f"trap energy {E} within {THRESHOLD_GUARD} of threshold {m.energy}")


# ---------------------------------------------------------------- scalar equation

def eta_tilde(state, z, g, a_n, method="auto"):
    """Scalar spectral function at ``z``.

    ``g`` is a :class:`GOperator` (or its ``hat`` matrix) and ``a_n`` the
    deflated inverse in the symmetrized basis. ``method`` is 'neumann',
    'direct' or 'auto' (Neumann when ``||A G|| <= 0.1``).
    """
    G = g.hat if hasattr(g, "hat") else np.asarray(g)
    AG = a_n @ G
    norm = np.linalg.norm(AG, 2)
    if norm >= 1.0:
        raise RegimeError(f"||A G|| = {norm:.3g} >= 1; trap too close to the strip")
    w = state.vector
    if method == "auto":
        method = "neumann" if norm <= NEUMANN_SWITCH else "direct"
    if method == "neumann":
        v = w.astype(complex)
        acc = v.copy()
        term = v
        for _ in range(500):
            term = AG @ term
            acc = acc + term
            if np.linalg.norm(term) < 1e-14 * np.linalg.norm(acc):
                break
        else:
            raise SolverError("Neumann series did not converge")
        y = acc
    elif method == "direct":
        y = np.linalg.solve(np.eye(len(w)) - AG, w.astype(complex))
    else:
        raise ConfigError("method must be 'auto', 'neumann' or 'direct'")
    return complex(z - state.energy + (w @ (G @ y)) / state.beta)


# ---------------------------------------------------------------- model

@dataclass(eq=False)
class ResonanceModel:
    """Waveguide, trap template and trap state needed for pole searches.

    The trap measure is a template; :meth:`placed` translates it to distance
    ``rho``. Quantities that are translation invariant (trap states, the free
    Birman-Schwinger expansion) are computed once.
    """

    profile: object
    modes: list
    trap: object
    beta: float
    states: list
    side: str = "above"
    x1: float = 0.0
    s_radius: float | None = None
    expansion_points: int = 24
    _expansions: dict = field(default_factory=dict, repr=False)

    def state(self, n):
        if not 1 <= n <= len(self.states):
            raise ConfigError(f"trap state {n} does not exist ({len(self.states)} found)")
        return self.states[n - 1]

    def radius(self, n):
        if self.s_radius is not None:
            return self.s_radius
        return default_neighborhood_radius(self.states, n, [m.energy for m in self.modes])

    def placed(self, rho):
        return place_at_distance(self.trap, rho, self.profile.d, self.side, self.x1)

    def expansion(self, n):
        if n not in self._expansions:
            st = self.state(n)
            self._expansions[n] = BSExpansion(self.trap, st.energy, self.radius(n),
                                              self.expansion_points)
        return self._expansions[n]

    def deflated(self, n, z):
        st = self.state(n)
        dz = st.energy - z
        if abs(dz) < 1e-9:
            raise CancellationError("z too close to the trap eigenvalue for deflation")
        K = self.expansion(n).hat(z)
        full = np.linalg.inv(np.eye(len(st.vector)) - self.beta * K)
        return full - np.outer(st.vector, st.vector) / (self.beta * dz)

    def sheet(self, n):
        return SheetConfig(len(self.modes), open_channels(self.modes, self.state(n).energy))


class PoleFunction:
    """``z -> eta(z)`` at fixed ``rho`` with a frozen momentum grid."""

    def __init__(self, model, n, rho):
        self.model = model
        self.n = n
        self.rho = rho
        self.state = model.state(n)
        self.measure = model.placed(rho)
        self.sheet = model.sheet(n)
        self.grid = momentum_grid(model.modes, self.state.energy, rho)

    def g(self, z):
        return g_matrix(self.measure, self.model.profile, self.model.modes, self.model.beta,
                        z, self.sheet, grid=self.grid)

    def __call__(self, z, method="auto"):
        return eta_tilde(self.state, z, self.g(z), self.model.deflated(self.n, z), method)

    def derivative(self, z, h):
        f = self
        return (f(z + h) - f(z - h) - 1j * f(z + 1j * h) + 1j * f(z - 1j * h)) / (4 * h)

    def regime_norm(self):
        E = self.state.energy
        zq = E - 1e-4 * self.model.radius(self.n) * 1j
        return float(np.linalg.norm(self.model.deflated(self.n, zq) @ self.g(E).hat, 2))

    def leading(self):
        E = self.state.energy
        w = self.state.vector
        return complex(E - (w @ self.g(E).hat @ w) / self.model.beta)


@dataclass(frozen=True)
class ResonancePole:
    n: int
    j: int
    rho: float
    z: complex
    gamma_leading: float
    gamma: float
    newton_residual: float
    iterations: int
    z_leading: complex = 0j
    regime_norm: float = 0.0
    multistart_spread: float = 0.0

    @property
    def shift(self):
        return self.z.real


def _newton(f, z0, tol, max_iter, h, center, radius):
    z = complex(z0)
    val = f(z)
    for it in range(1, max_iter + 1):
        if abs(val) <= tol:
            return z, abs(val), it - 1
        d = f.derivative(z, h)
        if d == 0:
            raise SolverError("vanishing derivative in Newton iteration")
        step = -val / d
        lam = 1.0
        while True:
            zn = z + lam * step
            if abs(zn - center) < radius:
                vn = f(zn)
                if abs(vn) < abs(val) or lam < 1e-3:
                    break
            lam *= 0.5
            if lam < 1e-3:
                raise RegimeError("Newton iterate left the neighbourhood S_n")
        z, val = zn, vn
    if abs(val) <= tol:
        return z, abs(val), max_iter
    raise SolverError(f"Newton did not converge in {max_iter} iterations (|eta| = {abs(val):.2e})")


def find_pole(model, n, rho, tol=1e-12, max_iter=50, multistart=5, spread_tol=1e-8):
    """Locate the resonance pole near trap energy ``n`` for distance ``rho``."""
    f = PoleFunction(model, n, rho)
    st = f.state
    _check_thresholds(model.modes, st.energy)
    j = f.sheet.j
    if j == 0:
        raise ConfigError("no open channel: the trap energy lies below the lowest threshold")
    radius = model.radius(n)
    reg = f.regime_norm()
    if reg >= REGIME_LIMIT:
        raise RegimeError(f"||A G|| = {reg:.3g} >= {REGIME_LIMIT} at rho = {rho}")
    z0 = f.leading()
    if abs(z0 - st.energy) >= radius:
        raise RegimeError("leading-order pole estimate outside S_n")
    h = max(1e-7, 1e-3 * abs(z0 - st.energy))
    h = min(h, 1e-4 * radius)
    z, res, its = _newton(f, z0, tol, max_iter, h, st.energy, radius)
    spread = 0.0
    if multistart:
        scale = max(10 * abs(z - st.energy), 1e-6)
        scale = min(scale, 0.25 * radius)
        angles = 2 * np.pi * np.arange(multistart) / multistart + 0.3
        for a in angles:
            zs = z + scale * np.exp(1j * a)
            zz, _, _ = _newton(f, zs, tol, max_iter, h, st.energy, radius)
            spread = max(spread, abs(zz - z))
        if spread > spread_tol:
            raise UniquenessError(f"multistart converged to distinct roots (spread {spread:.2e})")
    if z.imag > 0:
        raise SolverError("converged pole lies in the upper half-plane")
    gl = golden_rule_width(st, model.modes, f.measure, model.beta)
    return ResonancePole(n, j, float(rho), z, gl, 2 * abs(z.imag), res, its, z0, reg, spread)


# ---------------------------------------------------------------- golden rule

def _channel_momenta(state, modes):
    _check_thresholds(modes, state.energy)
    return [(m, math.sqrt(state.energy - m.energy)) for m in modes if m.energy < state.energy]


def golden_rule_channels(state, modes, measure, beta):
    """Per-channel contributions to the overlap form of the golden-rule width."""
    omega = eigenfunction_on_nodes(state)
    x = measure.nodes
    c = measure.weights
    out = []
    for m, p in _channel_momenta(state, modes):
        phi = eval_mode(m, x[:, 1])
        amps = [np.sum(np.conj(omega) * np.exp(1j * s * p * x[:, 0]) * phi * c) / math.sqrt(2 * math.pi)
                for s in (1, -1)]
        out.append(-beta ** 2 * math.pi / (2 * p) * sum(abs(a) ** 2 for a in amps))
    return out


def golden_rule_width(state, modes, measure, beta):
    """Leading imaginary part of the pole from squared transition amplitudes."""
    return float(sum(golden_rule_channels(state, modes, measure, beta)))


def golden_rule_cos_form(state, modes, measure, beta):
    """Same width written through the cosine kernel on the trap support."""
    omega = eigenfunction_on_nodes(state)
    x = measure.nodes
    c = measure.weights
    v = omega * c
    total = 0.0
    for m, p in _channel_momenta(state, modes):
        phi = eval_mode(m, x[:, 1])
        kern = np.cos(p * np.abs(x[:, None, 0] - x[None, :, 0])) * np.outer(phi, phi)
        total += -beta ** 2 / (2 * p) * float(np.real(np.conj(v) @ kern @ v))
    return total


def golden_rule_g_route(state, modes, profile, measure, beta):
    """``-beta^-1 Im (w, G(E) w)`` from the strip operator at the real trap energy."""
    E = state.energy
    _check_thresholds(modes, E)
    sheet = SheetConfig.for_energy(modes, E)
    g = g_matrix(measure, profile, modes, beta, E, sheet)
    w = state.vector
    return float(-np.imag(w @ g.hat @ w) / beta)


# ---------------------------------------------------------------- Sokhotski-Plemelj

@dataclass(frozen=True)
class SokhotskiResult:
    b: float
    delta: float
    eps: tuple
    values: tuple
    limit: complex
    errors: tuple
    extrapolated: complex


def _lorentz_integral(c, delta, L=200.0):
    """``int_R e^{i p delta} / (p^2 - c) dp`` by adaptive quadrature plus an exact-tail term."""
    root = math.sqrt(abs(c.real))
    pts = {0.0, root}
    if c.real > 0 and c.imag:
        # resolve the Lorentzian peak of half-width ~ eps / (2 root) on both sides
        w = abs(c.imag) / (2 * root)
        pts |= {root + s * w * f for s in (-1, 1) for f in (1, 10, 100, 1000) if 0 < root + s * w * f < L}
    pts = sorted(pts)
    f = lambda p: 2 * math.cos(p * delta) / (p * p - c)
    val = 0j
    edges = pts + [L]
    for a, b in zip(edges, edges[1:]):
        for part in (np.real, np.imag):
            val += (1j if part is np.imag else 1) * quad(lambda p: part(f(p)), a, b, limit=2000,
                                                           epsabs=1e-14, epsrel=1e-13)[0]
    if delta == 0:
        s = np.sqrt(-c + 0j)
        val += 2 * np.log((L + 1j * s) / (L - 1j * s)) / (2j * s)
    else:
        for part in (np.real, np.imag):
            val += (1j if part is np.imag else 1) * quad(
                lambda p: part(2 / (p * p - c)), L, np.inf, weight="cos", wvar=delta)[0]
    return val


def sokhotski_limit(b, delta):
    """``lim_{eps -> 0+} int_R e^{i p delta} / (p^2 - b - i eps) dp``."""
    if b > 0:
        r = math.sqrt(b)
        return complex(-math.pi * math.sin(r * abs(delta)) / r, math.pi * math.cos(r * abs(delta)) / r)
    if b < 0:
        r = math.sqrt(-b)
        return complex(math.pi * math.exp(-r * abs(delta)) / r, 0.0)
    raise ThresholdError("b = 0 is the threshold")


def sokhotski_check(b, delta, eps=(1e-2, 1e-3, 1e-4)):
    """Compare finite-``eps`` integrals with the boundary-value closed form."""
    vals = tuple(_lorentz_integral(complex(b, e), delta) for e in eps)
    lim = sokhotski_limit(b, delta)
    errs = tuple(abs(v - lim) for v in vals)
    # polynomial extrapolation to eps = 0 through all samples
    w = [np.prod([-e2 / (e1 - e2) for e2 in eps if e2 != e1]) for e1 in eps]
    extrap = sum(wi * v for wi, v in zip(w, vals))
    return SokhotskiResult(float(b), float(delta), tuple(eps), vals, lim, errs, complex(extrap))


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r2))


def fit_decay(samples):
    """Least-squares line through ``(rho, log value)``."""
    samples = list(samples)
    if len(samples) < 4:
        raise ConfigError("need at least 4 samples")
    rho = np.array([s[0] for s in samples], dtype=float)
    val = np.array([s[1] for s in samples], dtype=float)
    if np.any(~(val > 0)):
        raise DomainError("decay fit needs positive values")
    r = linregress(rho, np.log(val))
    return DecayFit(float(r.slope), float(r.intercept), float(r.rvalue ** 2))
