"""Assemble the numerical objects described by a :class:`RunConfig`."""
from __future__ import annotations

from .bs_core import trap_eigenvalues
from .errors import ConfigError
from .measure import Circle, Disk, Polyline, Rectangle, Segment, area_measure, curve_measure
from .resonance import ResonanceModel
from .transverse import TransverseProfile, solve_modes


def build_profile(strip):
    if strip.segments is not None:
        try:
            segs = tuple(((a, b), al) for a, b, al in strip.segments)
        except (TypeError, ValueError) as exc:
            raise ConfigError("strip.segments entries must be [a, b, alpha]") from exc
        return TransverseProfile(strip.d, segs)
    return TransverseProfile.constant(strip.d, strip.alpha)


def build_trap(trap):
    """Trap measure centred near the origin; placement translates it later."""
    if trap.kind == "disk":
        return area_measure(Disk((0.0, 0.0), trap.radius), trap.order)
    if trap.kind == "rectangle":
        w, h = trap.width / 2, trap.height / 2
        return area_measure(Rectangle(-w, w, -h, h), trap.order)
    if trap.curve == "circle":
        geom = Circle((0.0, 0.0), trap.radius)
    else:
        pts = trap.points
        if pts is None or len(pts) < 2:
            raise ConfigError("segment and polyline traps need trap.points")
        pts = tuple((float(x), float(y)) for x, y in pts)
        geom = Segment(pts[0], pts[-1]) if trap.curve == "segment" else Polyline(pts)
    return curve_measure(geom, trap.order, trap.nodes_per_panel)


def build_model(config):
    """Profile, modes, trap template, trap states and the pole-search model."""
    profile = build_profile(config.strip)
    modes = solve_modes(profile, config.numerics.mode_tol)
    trap = build_trap(config.trap)
    states = trap_eigenvalues(trap, config.trap.beta, config.numerics.trap_tol)
    return ResonanceModel(profile, modes, trap, config.trap.beta, states,
                          side=config.placement.side, x1=config.placement.x1,
                          s_radius=config.numerics.s_radius,
                          expansion_points=config.numerics.expansion_points)
