"""Closed-form reference potentials and the discrete logarithmic energy.

Reference objects: the circular law (uniform unit-disk measure) with its
potential, the semicircle law on [-sqrt(2), sqrt(2)] with its potential and
Stieltjes transform, and the energy functional

    E[mu] = -iint log|x - y| dmu(x) dmu(y) + int |x|^2 dmu(x)

evaluated on discrete measures (grid cells plus optional boundary-line
atoms) with exact cell-averaged self-interaction terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, signal

from .fields import Grid2D, ScalarField
from .geometry import BoundarySample

SQRT2 = math.sqrt(2.0)

# Mean of -log|x - y| over a square cell of side h against itself equals
# -log h + CELL_SELF_CONSTANT.  Frozen from the polar quadrature in
# cell_self_constant_quadrature(); regression-tested against it to 1e-6.
CELL_SELF_CONSTANT = 0.8050867219500863

# Mean of -log|s - t| over a segment of length L against itself equals
# -log L + SEGMENT_SELF_CONSTANT (exact: iint_0^1 -log|s-t| ds dt = 3/2).
SEGMENT_SELF_CONSTANT = 1.5

# Value of 2*H(x) + x^2 on the support of the semicircle law, where H is
# its logarithmic potential.  Verified against quadrature of the defining
# integral; see semicircle_potential tests.
SEMICIRCLE_EQUILIBRIUM_CONSTANT = 1.0 + math.log(2.0)


def cell_self_constant_quadrature() -> float:
    """Recompute the cell self-interaction constant by brute force.

    The difference of two independent uniform points of the unit square
    has density (1-|u|)(1-|v|) on [-1,1]^2, so the constant is
    -iint log|w| (1-|u|)(1-|v|) du dv, evaluated here in polar
    coordinates over one quadrant (times four) to keep the logarithmic
    singularity at the origin integrable for the quadrature routine.
    """

    def inner(th: float) -> float:
        c, s = math.cos(th), math.sin(th)
        rmax = min(1.0 / c if c > 1e-12 else math.inf,
                   1.0 / s if s > 1e-12 else math.inf)
        f = lambda r: -math.log(r) * (1 - r * c) * (1 - r * s) * r
        v, _ = integrate.quad(f, 0.0, rmax, limit=200)
        return v

    val, _ = integrate.quad(inner, 0.0, math.pi / 2.0, limit=200)
    return 4.0 * val


# ---------------------------------------------------------------------------
# reference laws
# ---------------------------------------------------------------------------

def circular_law_potential(z):
    """Logarithmic potential of the uniform unit-disk probability measure.

    Equals (1 - |z|^2)/2 inside the closed unit disk and -log|z| outside;
    the two branches match to first order on the circle.  Accepts complex
    scalars or arrays.
    """
    z = np.asarray(z, dtype=complex)
    r2 = z.real ** 2 + z.imag ** 2
    inside = 0.5 * (1.0 - r2)
    outside = -0.5 * np.log(np.maximum(r2, 1e-300))
    out = np.where(r2 <= 1.0, inside, outside)
    return out if out.ndim else float(out)


def semicircle_density(y):
    """Density sqrt(2 - y^2)/pi on |y| < sqrt(2), zero outside."""
    y = np.asarray(y, dtype=float)
    out = np.where(np.abs(y) < SQRT2,
                   np.sqrt(np.maximum(2.0 - y * y, 0.0)) / math.pi, 0.0)
    return out if out.ndim else float(out)


def semicircle_cdf(y):
    """Cumulative mass of the semicircle law up to y (closed antiderivative)."""
    y = np.clip(np.asarray(y, dtype=float), -SQRT2, SQRT2)
    out = 0.5 + (y * np.sqrt(np.maximum(2.0 - y * y, 0.0)) / 2.0
                 + np.arcsin(y / SQRT2)) / math.pi
    return out if out.ndim else float(out)


def semicircle_potential(z, quad_tol: float = 1e-10) -> float:
    """Logarithmic potential of the semicircle law on the real axis,
    H(z) = -int log|z - t| sigma(t) dt, by adaptive quadrature.

    Absolute quadrature error <= 1e-8.  On the support the value reduces
    to the closed form (1 + log 2 - x^2)/2.
    """
    z = complex(z)
    x, y = z.real, z.imag

    def f(t):
        return -0.5 * math.log((x - t) ** 2 + y * y) * (
            math.sqrt(max(2.0 - t * t, 0.0)) / math.pi)

    pts = [x] if (abs(y) < 1e-14 and abs(x) < SQRT2) else None
    val, err = integrate.quad(f, -SQRT2, SQRT2, points=pts,
                              epsabs=quad_tol, limit=400)
    return val


def semicircle_potential_exact(z):
    """Closed form of the semicircle potential, vectorized.

    Obtained by integrating the Stieltjes transform; continuous across
    the support and asymptotic to -log|z| at infinity.  Agrees with
    :func:`semicircle_potential` to quadrature accuracy everywhere.
    """
    z = np.asarray(z, dtype=complex)
    w = _branch_sqrt(z)
    val = -np.real(0.5 * z * z - 0.5 * z * w + np.log(z + w)) \
        + 0.5 + math.log(2.0)
    return val if val.ndim else float(val)


def _branch_sqrt(z):
    """sqrt(z^2 - 2) with branch cut on [-sqrt2, sqrt2], ~ z at infinity.

    Product of principal square roots of (z - sqrt2) and (z + sqrt2).
    """
    return np.sqrt(z - SQRT2) * np.sqrt(z + SQRT2)


def stieltjes_semicircle(z) -> complex:
    """Stieltjes transform of the semicircle law, -(z - sqrt(z^2 - 2)),
    on the open upper half-plane."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("stieltjes transform defined for Im z > 0 only")
    return -(z - complex(_branch_sqrt(z)))


# ---------------------------------------------------------------------------
# discrete measures and the energy functional
# ---------------------------------------------------------------------------

@dataclass
class DiscreteMeasure:
    """Nonnegative masses on grid cells plus optional boundary atoms.

    ``cell_masses[i, j]`` is the mass attached to the cell centered at
    grid node (i, j); ``boundary_masses`` pairs a BoundarySample with the
    mass carried by its boundary element.
    """

    grid: Grid2D
    cell_masses: np.ndarray = field(repr=False)
    boundary_masses: Optional[list] = None

    def __post_init__(self):
        self.cell_masses = np.asarray(self.cell_masses, dtype=float)
        if self.cell_masses.shape != (self.grid.n, self.grid.n):
            raise ValueError("cell mass array does not match grid")
        if np.any(self.cell_masses < -1e-15):
            raise ValueError("cell masses must be nonnegative")
        if self.boundary_masses:
            for _, m in self.boundary_masses:
                if m < -1e-15:
                    raise ValueError("boundary masses must be nonnegative")

    @property
    def total_mass(self) -> float:
        t = float(self.cell_masses.sum())
        if self.boundary_masses:
            t += sum(m for _, m in self.boundary_masses)
        return t

    def normalized(self) -> "DiscreteMeasure":
        t = self.total_mass
        if t <= 0:
            raise ValueError("cannot normalize a zero measure")
        bm = None
        if self.boundary_masses:
            bm = [(s, m / t) for s, m in self.boundary_masses]
        return DiscreteMeasure(self.grid, self.cell_masses / t, bm)

    def quadratic_moment(self) -> float:
        r2 = self.grid.radius_sq()
        t = float((self.cell_masses * r2).sum())
        if self.boundary_masses:
            t += sum(m * (s.position.x ** 2 + s.position.y ** 2)
                     for s, m in self.boundary_masses)
        return t

    @classmethod
    def circular_law(cls, grid: Grid2D) -> "DiscreteMeasure":
        """Circular law rasterized on cell centers and normalized."""
        r2 = grid.radius_sq()
        m = np.where(r2 <= 1.0, grid.h ** 2 / math.pi, 0.0)
        return cls(grid, m).normalized()

    @classmethod
    def uniform_disk(cls, grid: Grid2D, radius: float,
                     center=(0.0, 0.0)) -> "DiscreteMeasure":
        X, Y = grid.meshgrid()
        r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        m = np.where(r2 <= radius * radius, 1.0, 0.0)
        return cls(grid, m).normalized()


def _boundary_positions(boundary_masses):
    pos = np.array([[s.position.x, s.position.y] for s, _ in boundary_masses])
    w = np.array([s.arc_weight for s, _ in boundary_masses])
    m = np.array([mm for _, mm in boundary_masses])
    return pos, w, m


def log_interaction_matrix_grid(grid: Grid2D) -> np.ndarray:
    """Translation-invariant kernel -log(distance) between cell centers,
    with the exact cell-averaged diagonal, as a (2n-1)^2 stamp."""
    n, h = grid.n, grid.h
    d = np.arange(-(n - 1), n)
    DI, DJ = np.meshgrid(d, d, indexing="ij")
    dist = np.hypot(DI, DJ)
    with np.errstate(divide="ignore"):
        K = -np.log(np.maximum(dist, 1e-300) * h)
    K[n - 1, n - 1] = -math.log(h) + CELL_SELF_CONSTANT
    return K


def logarithmic_energy(mu: DiscreteMeasure, nu: Optional[DiscreteMeasure] = None) -> float:
    """-iint log|x - y| dmu(x) dnu(y) for measures on the same grid.

    The cell/cell block is an exact discrete convolution (evaluated with
    an FFT); boundary atoms interact through -log(center distance) with
    the segment-averaged diagonal term.
    """
    sym = nu is None
    if sym:
        nu = mu
    if nu.grid is not mu.grid and (nu.grid.n != mu.grid.n
                                   or nu.grid.box_radius != mu.grid.box_radius):
        raise ValueError("measures must share a grid")
    K = log_interaction_matrix_grid(mu.grid)
    conv = signal.fftconvolve(nu.cell_masses, K, mode="same")
    total = float((mu.cell_masses * conv).sum())

    X, Y = mu.grid.meshgrid()
    for a, b in ((mu, nu), (nu, mu)):
        if a.boundary_masses:
            pos, _, m = _boundary_positions(a.boundary_masses)
            nz = np.argwhere(b.cell_masses > 0)
            if nz.size:
                cx = X[nz[:, 0], nz[:, 1]]
                cy = Y[nz[:, 0], nz[:, 1]]
                cm = b.cell_masses[nz[:, 0], nz[:, 1]]
                for (px, py), pm in zip(pos, m):
                    d = np.hypot(cx - px, cy - py)
                    total += pm * float((cm * -np.log(np.maximum(d, 1e-300))).sum())
    if mu.boundary_masses and nu.boundary_masses:
        pa, wa, ma = _boundary_positions(mu.boundary_masses)
        pb, wb, mb = _boundary_positions(nu.boundary_masses)
        D = np.hypot(pa[:, None, 0] - pb[None, :, 0],
                     pa[:, None, 1] - pb[None, :, 1])
        with np.errstate(divide="ignore"):
            Kb = -np.log(np.maximum(D, 1e-300))
        if sym:
            same = D < 1e-12
            Kb[same] = (-np.log(wa) + SEGMENT_SELF_CONSTANT)[np.nonzero(same)[0]]
        total += float(ma @ Kb @ mb)
    return total


def energy(mu: DiscreteMeasure) -> float:
    """Energy functional: logarithmic self-interaction plus the quadratic
    confinement moment."""
    return logarithmic_energy(mu) + mu.quadratic_moment()


def energy_via_dirichlet(rho_plus: DiscreteMeasure, rho_minus: DiscreteMeasure,
                         H_field: ScalarField) -> float:
    """Logarithmic energy of the signed measure rho = rho_plus - rho_minus
    computed from the Dirichlet integral (1/2pi) int |grad H|^2.

    ``H_field`` must hold the numerically computed potential of rho on a
    box containing both supports.  The two parts must carry equal mass.
    """
    if abs(rho_plus.total_mass - rho_minus.total_mass) > 1e-6:
        raise ValueError("identity requires neutral rho")
    gx, gy = H_field.gradient_interior()
    h = H_field.grid.h
    return float((gx * gx + gy * gy).sum()) * h * h / (2.0 * math.pi)
