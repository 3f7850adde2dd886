"""Constrained equilibrium measures for the Ginibre ensemble.

Computes the minimizer of the logarithmic-energy functional with
quadratic confinement subject to a prescribed mass lying in a region of
the plane, by solving the equivalent two-constant obstacle problem on a
truncated grid, and extracts the regular (area density 1/pi) and
singular (boundary line) parts of the minimizing measure.
"""

__version__ = "0.1.0"

from .fields import Grid2D, ScalarField
from .geometry import (BoundarySample, Disk, HalfPlane, Point, Polygon,
                       Region, boundary_samples, circular_law_mass, contains,
                       signed_distance)
from .potential import (CELL_SELF_CONSTANT, SEGMENT_SELF_CONSTANT,
                        SEMICIRCLE_EQUILIBRIUM_CONSTANT, DiscreteMeasure,
                        circular_law_potential, energy, energy_via_dirichlet,
                        semicircle_density, semicircle_potential,
                        stieltjes_semicircle)
from .obstacle import (CalibrationResult, ObstacleSpec, VISolveResult,
                       build_obstacle, calibrate_constants,
                       far_field_dirichlet, measure_masses, quadratic_obstacle,
                       solve_vi)
from .extraction import (ExtractedMeasure, PropertyReport,
                         check_contract_expand, check_gap,
                         circular_law_deficit, extract_measure,
                         extract_regular, extract_singular)
from .halfspace import (condition_lhs, condition_slope, is_fully_singular,
                        line_constant, optimality_margin)
from .oracle import (SimplexMeasure, direct_minimize, kkt_check,
                     lattice_nodes, line_nodes, rasterize_extracted)

__all__ = [
    "Grid2D", "ScalarField", "Point", "BoundarySample", "HalfPlane", "Disk",
    "Polygon", "Region", "contains", "signed_distance", "boundary_samples",
    "circular_law_mass", "circular_law_potential", "semicircle_density",
    "semicircle_potential", "stieltjes_semicircle", "DiscreteMeasure",
    "energy", "energy_via_dirichlet", "CELL_SELF_CONSTANT",
    "SEGMENT_SELF_CONSTANT", "SEMICIRCLE_EQUILIBRIUM_CONSTANT",
    "ObstacleSpec", "VISolveResult", "CalibrationResult", "build_obstacle",
    "quadratic_obstacle", "far_field_dirichlet", "solve_vi", "measure_masses",
    "calibrate_constants", "ExtractedMeasure", "PropertyReport",
    "extract_regular", "extract_singular", "extract_measure", "check_gap",
    "check_contract_expand", "circular_law_deficit", "line_constant",
    "condition_lhs", "condition_slope", "optimality_margin",
    "is_fully_singular", "SimplexMeasure", "lattice_nodes", "line_nodes",
    "direct_minimize", "kkt_check", "rasterize_extracted",
]
