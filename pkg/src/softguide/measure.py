"""Quadrature representations of trap measures: area wells and arclength measures on curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, GeometryError

# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")

    def box(self):
        cx, cy = self.center
        a = self.radius
        return (cx - a, cx + a, cy - a, cy + a)

    def shifted(self, dx, dy):
        return Disk((self.center[0] + dx, self.center[1] + dy), self.radius)

    def boundary_distance(self, p, theta):
        """Distance from interior point ``p`` to the circle along direction ``theta``."""
        q = np.asarray(p, float) - np.asarray(self.center, float)
        ux, uy = np.cos(theta), np.sin(theta)
        b = q[0] * ux + q[1] * uy
        return -b + np.sqrt(b * b + self.radius ** 2 - q @ q)


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise GeometryError("rectangle must have positive side lengths")

    def box(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    def shifted(self, dx, dy):
        return Rectangle(self.xmin + dx, self.xmax + dx, self.ymin + dy, self.ymax + dy)


@dataclass(frozen=True)
class Segment:
    start: tuple
    end: tuple

    @property
    def closed(self):
        return False

    def pieces(self):
        p0, p1 = np.asarray(self.start, float), np.asarray(self.end, float)
        L = float(np.hypot(*(p1 - p0)))
        if L == 0:
            raise GeometryError("degenerate segment")
        return [(lambda t, p0=p0, p1=p1: p0[:, None] + np.outer(p1 - p0, t),
                 lambda t, p0=p0, p1=p1: np.outer(p1 - p0, np.ones_like(t)), 0.0, 1.0)]

    def shifted(self, dx, dy):
        return Segment((self.start[0] + dx, self.start[1] + dy), (self.end[0] + dx, self.end[1] + dy))

    def box(self):
        xs = (self.start[0], self.end[0])
        ys = (self.start[1], self.end[1])
        return (min(xs), max(xs), min(ys), max(ys))


@dataclass(frozen=True)
class Polyline:
    points: tuple

    @property
    def closed(self):
        return False

    def pieces(self):
        pts = [tuple(p) for p in self.points]
        if len(pts) < 2:
            raise GeometryError("polyline needs two points")
        return [pc for a, b in zip(pts, pts[1:]) for pc in Segment(a, b).pieces()]

    def shifted(self, dx, dy):
        return Polyline(tuple((x + dx, y + dy) for x, y in self.points))

    def box(self):
        xs, ys = zip(*self.points)
        return (min(xs), max(xs), min(ys), max(ys))


@dataclass(frozen=True)
class Circle:
    """Closed circular loop (the curve, not the disk)."""

    center: tuple
    radius: float

    @property
    def closed(self):
        return True

    def pieces(self):
        c, a = np.asarray(self.center, float), self.radius
        if not a > 0:
            raise GeometryError("circle radius must be positive")
        return [(lambda t: c[:, None] + a * np.vstack([np.cos(t), np.sin(t)]),
                 lambda t: a * np.vstack([-np.sin(t), np.cos(t)]), 0.0, 2 * math.pi)]

    def shifted(self, dx, dy):
        return Circle((self.center[0] + dx, self.center[1] + dy), self.radius)

    def box(self):
        cx, cy = self.center
        a = self.radius
        return (cx - a, cx + a, cy - a, cy + a)


@dataclass(frozen=True)
class ParametricCurve:
    """C^1 curve ``t -> gamma(t)`` on ``[t0, t1]`` with derivative ``dgamma``.

    Both callables map a 1D array of parameters to an array of shape (2, n).
    Self-intersection is not checked.
    """

    gamma: Callable
    dgamma: Callable
    t0: float
    t1: float
    closed: bool = False
    offset: tuple = (0.0, 0.0)

    def pieces(self):
        off = np.asarray(self.offset, float)[:, None]
        return [(lambda t: np.asarray(self.gamma(t), float) + off,
                 lambda t: np.asarray(self.dgamma(t), float), self.t0, self.t1)]

    def shifted(self, dx, dy):
        return replace(self, offset=(self.offset[0] + dx, self.offset[1] + dy))

    def box(self):
        t = np.linspace(self.t0, self.t1, 4097)
        g = self.pieces()[0][0](t)
        return (g[0].min(), g[0].max(), g[1].min(), g[1].max())


AREA_GEOMETRIES = (Disk, Rectangle)
CURVE_GEOMETRIES = (Segment, Polyline, Circle, ParametricCurve)


# ---------------------------------------------------------------- measure


@dataclass(frozen=True)
class PanelLayout:
    """Panel bookkeeping for curve measures (used by log-corrected quadrature).

    ``panel`` gives each node's panel, ``local`` its Gauss abscissa in [-1, 1],
    ``halfwidth`` the parameter half-length per panel, ``speed`` is |gamma'|,
    ``neighbors[p]`` lists panels that share an endpoint with panel ``p``
    (with the relative offset +-2 in local units).
    """

    nodes_per_panel: int
    panel: np.ndarray
    local: np.ndarray
    halfwidth: np.ndarray
    speed: np.ndarray
    neighbors: tuple


@dataclass(frozen=True, eq=False)
class KatoMeasure:
    kind: str
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    total_mass: float
    support_box: tuple
    descriptor: object
    order: int = 0
    panels: PanelLayout | None = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.weights)

    def integrate(self, f):
        """``int f dmu`` for ``f`` mapping an (n, 2) array of points to values."""
        return np.sum(np.asarray(f(self.nodes)) * self.weights, axis=-1)

    def translated(self, dx, dy):
        return replace(
            self,
            nodes=self.nodes + np.array([dx, dy]),
            support_box=(self.support_box[0] + dx, self.support_box[1] + dx,
                         self.support_box[2] + dy, self.support_box[3] + dy),
            descriptor=self.descriptor.shifted(dx, dy),
        )


def area_measure(region, order):
    """Area (Lebesgue) measure of a disk or axis-aligned rectangle.

    Disks use Gauss-Legendre in ``r`` (weight ``r``) times a ``2*order`` point
    trapezoid rule in angle; rectangles use an ``order x order`` Gauss grid.
    """
    if order < 1:
        raise ConfigError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    if isinstance(region, Disk):
        a = region.radius
        r = 0.5 * a * (x + 1)
        wr = 0.5 * a * w * r
        nth = 2 * order
        th = 2 * np.pi * (np.arange(nth) + 0.5) / nth
        R, T = np.meshgrid(r, th, indexing="ij")
        W = np.repeat(wr[:, None], nth, axis=1) * (2 * np.pi / nth)
        nodes = np.column_stack([region.center[0] + (R * np.cos(T)).ravel(),
                                 region.center[1] + (R * np.sin(T)).ravel()])
        mass = math.pi * a * a
        weights = W.ravel()
    elif isinstance(region, Rectangle):
        hx, hy = 0.5 * (region.xmax - region.xmin), 0.5 * (region.ymax - region.ymin)
        X = region.xmin + hx * (x + 1)
        Y = region.ymin + hy * (x + 1)
        XX, YY = np.meshgrid(X, Y, indexing="ij")
        nodes = np.column_stack([XX.ravel(), YY.ravel()])
        weights = np.outer(hx * w, hy * w).ravel()
        mass = 4 * hx * hy
    else:
        raise GeometryError(f"unsupported area region {type(region).__name__}")
    return KatoMeasure("area", nodes, weights, float(mass), region.box(), region, order)


def curve_measure(curve, order, nodes_per_panel=8):
    """Arclength measure on a curve, ``order`` equal-parameter panels per smooth piece."""
    if order < 1 or nodes_per_panel < 2:
        raise ConfigError("need order >= 1 and at least 2 nodes per panel")
    xg, wg = np.polynomial.legendre.leggauss(nodes_per_panel)
    pts, wts, pan, loc, hw, spd = [], [], [], [], [], []
    neighbors = []
    pieces = curve.pieces()
    n_pan = 0
    for gamma, dgamma, t0, t1 in pieces:
        h = 0.5 * (t1 - t0) / order
        first = n_pan
        for p in range(order):
            c = t0 + (2 * p + 1) * h
            t = c + h * xg
            g = gamma(t)
            s = np.hypot(*dgamma(t))
            if np.any(s <= 0):
                raise GeometryError("curve parameterization has vanishing speed")
            pts.append(g.T)
            wts.append(h * wg * s)
            pan.append(np.full(nodes_per_panel, n_pan))
            loc.append(xg)
            hw.append(h)
            spd.append(s)
            nb = []
            if p > 0:
                nb.append((n_pan - 1, 2.0))
            if p < order - 1:
                nb.append((n_pan + 1, -2.0))
            neighbors.append(nb)
            n_pan += 1
        if curve.closed and order > 2:
            neighbors[first].append((n_pan - 1, 2.0))
            neighbors[n_pan - 1].append((first, -2.0))
    nodes = np.vstack(pts)
    weights = np.concatenate(wts)
    layout = PanelLayout(nodes_per_panel, np.concatenate(pan), np.concatenate(loc),
                         np.array(hw), np.concatenate(spd),
                         tuple(tuple(nb) for nb in neighbors))
    box = curve.box()
    return KatoMeasure("curve", nodes, weights, float(weights.sum()), box, curve, order, layout)


def strip_side(measure, d):
    """'above' or 'below' the strip ``R x [0, d]``; raises if the support meets it."""
    _, _, ymin, ymax = measure.support_box
    if ymin > d:
        return "above"
    if ymax < 0:
        return "below"
    raise GeometryError("trap support intersects the strip (or straddles it)")


def distance_to_strip(measure, d):
    """Vertical distance ``rho`` from the support to the strip."""
    _, _, ymin, ymax = measure.support_box
    side = strip_side(measure, d)
    return float(ymin - d if side == "above" else -ymax)


def place_at_distance(measure, rho, d, side="above", x1=0.0):
    """Translate ``measure`` so its support sits at distance ``rho`` from the strip.

    The support box is centred horizontally at ``x1``.
    """
    if not rho > 0:
        raise GeometryError("rho must be positive")
    xmin, xmax, ymin, ymax = measure.support_box
    dx = x1 - 0.5 * (xmin + xmax)
    dy = (d + rho - ymin) if side == "above" else (-rho - ymax)
    return measure.translated(dx, dy)
