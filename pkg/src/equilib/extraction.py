"""Recover the minimizing measure from a converged potential.

The measure splits into a regular part with density 1/pi on an open set
V (read off the discrete Laplacian away from the region boundary) and a
singular part carried by the region boundary, with line density given by
the jump of the normal derivative across it.  The structural checks
verify the qualitative picture: a gap outside the boundary, support
contraction in the complement, expansion inside, and the pinning of the
deficit field between 0 and (c1 - c2)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fields import Grid2D, ScalarField
from .geometry import (BoundarySample, Region, boundary_samples,
                       sd_gradient, signed_distance_grid)
from .potential import circular_law_potential

BAND_HALF_WIDTH = 1.5   # in units of h, on each side of the boundary
FILL_DISTANCE = 2.6     # where the band density is resampled from


@dataclass
class ExtractedMeasure:
    regular_density: ScalarField
    V_mask: np.ndarray = field(repr=False)
    band_mask: np.ndarray = field(repr=False)
    samples: list
    g: np.ndarray = field(repr=False)
    mass_regular: float = 0.0
    mass_singular: float = 0.0
    g_min_raw: float = 0.0

    @property
    def singular(self):
        return list(zip(self.samples, self.g * np.array(
            [s.arc_weight for s in self.samples])))


@dataclass
class PropertyReport:
    gap_ok: bool
    gap_margin: float
    contract_ok: bool
    contract_margin: float
    expand_ok: bool
    expand_margin: float
    sing_support_ok: bool
    sing_margin: float
    w_range: tuple
    w_zero_set_ok: bool
    w_bounds_ok: bool
    w_positive_ok: bool
    mass_closure: float
    mass_in_region: float

    def all_ok(self) -> bool:
        return (self.gap_ok and self.contract_ok and self.expand_ok
                and self.sing_support_ok and self.w_zero_set_ok
                and self.w_bounds_ok)

    def to_dict(self) -> dict:
        return {
            "gap_ok": self.gap_ok, "gap_margin": self.gap_margin,
            "contract_ok": self.contract_ok,
            "contract_margin": self.contract_margin,
            "expand_ok": self.expand_ok, "expand_margin": self.expand_margin,
            "sing_support_ok": self.sing_support_ok,
            "sing_margin": self.sing_margin,
            "w_range": list(self.w_range),
            "w_zero_set_ok": self.w_zero_set_ok,
            "w_bounds_ok": self.w_bounds_ok,
            "w_positive_ok": self.w_positive_ok,
            "mass_closure": self.mass_closure,
            "mass_in_region": self.mass_in_region,
        }


def _band(grid: Grid2D, region: Region) -> tuple:
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(region, X, Y)
    band = np.abs(sd) < BAND_HALF_WIDTH * grid.h
    return sd, band


def extract_regular(H: ScalarField, region: Region):
    """Density field max(-lap H, 0)/(2 pi) and the support mask V.

    Nodes within 1.5 h of the region boundary carry the smeared line
    measure and are not read directly; their density is refilled by
    sampling the same side of the boundary at distance 2.6 h, so the
    returned field represents only the regular part.  Returns
    ``(density, V_mask, band_mask)``.
    """
    grid = H.grid
    h = grid.h
    raw = np.zeros((grid.n, grid.n))
    raw[1:-1, 1:-1] = np.maximum(H.neg_laplacian(), 0.0) / (2.0 * math.pi)
    sd, band = _band(grid, region)
    band[0, :] = band[-1, :] = band[:, 0] = band[:, -1] = False

    density = raw.copy()
    raw_field = ScalarField(grid, raw)
    X, Y = grid.meshgrid()
    bidx = np.argwhere(band)
    for i, j in bidx:
        s = sd[i, j]
        side = 1.0 if s > 0 else -1.0
        gx, gy = sd_gradient(region, (X[i, j], Y[i, j]))
        step = side * FILL_DISTANCE * h - s
        qx, qy = X[i, j] + step * gx, Y[i, j] + step * gy
        r = grid.box_radius - h
        density[i, j] = raw_field.sample(min(max(qx, -r), r),
                                         min(max(qy, -r), r))

    v_mask = density > 1.0 / (2.0 * math.pi)
    v_mask[0, :] = v_mask[-1, :] = v_mask[:, 0] = v_mask[:, -1] = False
    return ScalarField(grid, density), v_mask, band


def extract_singular(H: ScalarField, region: Region, samples: list,
                     clamp: bool = True):
    """Boundary line density from one-sided normal derivatives.

    For each sample the potential is read bilinearly at distances
    {h, 2h, 3h} along the inward and outward normals; a quadratic fit of
    each triple gives the one-sided derivatives at the boundary, and the
    line density is their jump divided by 2 pi.  Tiny negative values are
    stencil noise and are clamped to zero (query ``clamp=False`` for the
    raw values).
    """
    grid = H.grid
    h = grid.h
    pos = np.array([[s.position.x, s.position.y] for s in samples])
    nrm = np.array([s.outward_normal for s in samples])
    reach = np.abs(pos + 3.0 * h * nrm).max() if len(pos) else 0.0
    reach = max(reach, np.abs(pos - 3.0 * h * nrm).max() if len(pos) else 0.0)
    if reach >= grid.box_radius - grid.h:
        raise ValueError("boundary sample too close to the box edge")

    def read(k: float) -> np.ndarray:
        q = pos + k * h * nrm
        return H.sample(q[:, 0], q[:, 1])

    d_out = (-2.5 * read(1) + 4.0 * read(2) - 1.5 * read(3)) / h
    d_in = (2.5 * read(-1) - 4.0 * read(-2) + 1.5 * read(-3)) / h
    g = (d_in - d_out) / (2.0 * math.pi)
    if clamp:
        g = np.maximum(g, 0.0)
    return g


def default_boundary_samples(region: Region, grid: Grid2D) -> list:
    """Boundary discretization at the grid scale (spacing h, half-plane
    lines truncated a few cells inside the box)."""
    return boundary_samples(region, grid.h,
                            extent=grid.box_radius - 5.0 * grid.h)


def extract_measure(H: ScalarField, region: Region,
                    samples: Optional[list] = None) -> ExtractedMeasure:
    """Full decomposition of the recovered measure."""
    grid = H.grid
    if samples is None:
        samples = default_boundary_samples(region, grid)
    density, v_mask, band = extract_regular(H, region)
    g_raw = extract_singular(H, region, samples, clamp=False)
    g = np.maximum(g_raw, 0.0)
    arc = np.array([s.arc_weight for s in samples])
    mass_reg = float(density.values[1:-1, 1:-1].sum()) * grid.h ** 2
    mass_sing = float((g * arc).sum())
    return ExtractedMeasure(regular_density=density, V_mask=v_mask,
                            band_mask=band, samples=samples, g=g,
                            mass_regular=mass_reg, mass_singular=mass_sing,
                            g_min_raw=float(g_raw.min()) if len(g_raw) else 0.0)


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

def check_gap(v_mask: np.ndarray, region: Region, grid: Grid2D):
    """Distance from the support outside the closed region to the region
    boundary; the structural gap requires at least 2h.  Vacuously true
    when the support does not leave the region."""
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(region, X, Y)
    outside = v_mask & (sd > 0)
    if not outside.any():
        return True, math.inf
    margin = float(sd[outside].min())
    return margin >= 2.0 * grid.h, margin


def check_contract_expand(v_mask: np.ndarray, samples: list, g: np.ndarray,
                          region: Region, grid: Grid2D):
    """Support contraction outside the region and expansion inside.

    Contraction: every support node outside the closed region lies in the
    unit disk (tolerance one cell).  Expansion: every node of the region
    intersected with the unit disk and at least 2h away from the region
    boundary belongs to the support, and every boundary sample inside the
    disk (inset by one cell) carries positive line density.

    Returns ``(contract_ok, contract_margin, expand_ok, expand_margin,
    sing_ok, sing_margin)`` where margins are the worst measured values.
    """
    h = grid.h
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(region, X, Y)
    rad = np.hypot(X, Y)

    outside = v_mask & (sd > 0)
    if outside.any():
        worst = float(rad[outside].max())
        contract_ok = worst <= 1.0 + h
        contract_margin = 1.0 + h - worst
    else:
        contract_ok, contract_margin = True, math.inf

    must = (sd <= -2.0 * h) & (rad <= 1.0)
    must[0, :] = must[-1, :] = must[:, 0] = must[:, -1] = False
    missing = must & ~v_mask
    expand_ok = not missing.any()
    expand_margin = -float(np.count_nonzero(missing))

    pos = np.array([[s.position.x, s.position.y] for s in samples])
    in_disk = np.hypot(pos[:, 0], pos[:, 1]) <= 1.0 - h
    if in_disk.any():
        sing_margin = float(g[in_disk].min())
        sing_ok = sing_margin > 1e-6
    else:
        sing_ok, sing_margin = True, math.inf
    return (contract_ok, contract_margin, expand_ok, expand_margin,
            sing_ok, sing_margin)


def circular_law_deficit(H: ScalarField, c1: float, c2: float,
                         region: Region):
    """Deficit field w = H_disk - H - (1 - c1)/2 and its pinning checks.

    For a converged constrained solve w must stay within
    [0, (c1 - c2)/2], vanish exactly on the intersection of the closed
    unit disk with the closed region, and be strictly positive on
    support nodes away from that set.  The positivity test keeps an 8h
    distance margin because w grows only quadratically off its zero set.
    Tolerances scale like 10 h^2 (1 + c1 - c2).

    Returns ``(w_field, checks_dict)``.
    """
    grid = H.grid
    h = grid.h
    X, Y = grid.meshgrid()
    z = X + 1j * Y
    w = circular_law_potential(z) - H.values - 0.5 * (1.0 - c1)
    sd = signed_distance_grid(region, X, Y)
    rad = np.hypot(X, Y)

    span = (c1 - c2) if math.isfinite(c2) else 1.0 + abs(c1)
    eps = 10.0 * h * h * (1.0 + span)

    interior = np.zeros_like(w, dtype=bool)
    interior[1:-1, 1:-1] = True
    w_min = float(w[interior].min())
    w_max = float(w[interior].max())

    zero_set = interior & (rad <= 1.0) & (sd <= 0.0)
    zero_ok = bool(np.abs(w[zero_set]).max() <= eps) if zero_set.any() else True

    bounds_ok = w_min >= -eps
    if math.isfinite(c2):
        bounds_ok = bounds_ok and (w_max <= 0.5 * (c1 - c2) + eps)

    checks = {
        "eps": eps, "w_min": w_min, "w_max": w_max,
        "zero_ok": zero_ok, "bounds_ok": bounds_ok,
    }
    return ScalarField(grid, w), checks


def deficit_positivity(w: ScalarField, v_mask: np.ndarray, region: Region,
                       eps: float):
    """Positivity of the deficit on support nodes at least 8h away from
    the zero set."""
    grid = w.grid
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(region, X, Y)
    rad = np.hypot(X, Y)
    dist_proxy = np.maximum(rad - 1.0, sd)
    test = v_mask & (dist_proxy >= 8.0 * grid.h)
    if not test.any():
        return True, math.inf
    m = float(w.values[test].min())
    return m > eps, m


def run_property_checks(H: ScalarField, extracted: ExtractedMeasure,
                        region: Region, c1: float, c2: float,
                        p: float, mass_in_region: float) -> PropertyReport:
    grid = H.grid
    gap_ok, gap_margin = check_gap(extracted.V_mask, region, grid)
    (contract_ok, contract_margin, expand_ok, expand_margin,
     sing_ok, sing_margin) = check_contract_expand(
        extracted.V_mask, extracted.samples, extracted.g, region, grid)
    w, checks = circular_law_deficit(H, c1, c2, region)
    pos_ok, pos_min = deficit_positivity(w, extracted.V_mask, region,
                                         checks["eps"])
    closure = extracted.mass_regular + extracted.mass_singular
    return PropertyReport(
        gap_ok=gap_ok, gap_margin=gap_margin,
        contract_ok=contract_ok, contract_margin=contract_margin,
        expand_ok=expand_ok, expand_margin=expand_margin,
        sing_support_ok=sing_ok, sing_margin=sing_margin,
        w_range=(checks["w_min"], checks["w_max"]),
        w_zero_set_ok=checks["zero_ok"],
        w_bounds_ok=checks["bounds_ok"],
        w_positive_ok=pos_ok,
        mass_closure=closure,
        mass_in_region=mass_in_region,
    )
