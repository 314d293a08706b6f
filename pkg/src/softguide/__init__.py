"""Resonances of a soft quantum waveguide perturbed by a distant attractive trap."""
from .bs_core import TrapState, free_bs_matrix, trap_eigenfunction, trap_eigenvalues
from .config import RunConfig, load_config
from .errors import SoftguideError
from .measure import (Circle, Disk, ParametricCurve, Polyline, Rectangle, Segment, area_measure,
                      curve_measure, place_at_distance)
from .resonance import (ResonanceModel, ResonancePole, find_pole, fit_decay, golden_rule_cos_form,
                        golden_rule_g_route, golden_rule_width)
from .strip_resolvent import SheetConfig, g_matrix
from .system import build_model
from .transverse import TransverseProfile, solve_modes

__version__ = "0.1.0"
