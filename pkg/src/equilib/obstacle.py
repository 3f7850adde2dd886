"""Two-constant obstacle problem on a truncated grid.

The potential H of the constrained minimizer solves the complementarity
problem  min(-lap H, H - psi) = 0  with the piecewise-quadratic obstacle

    psi(x) = (c1 - |x|^2)/2  on the closed constraint region,
             (c2 - |x|^2)/2  outside (c2 = -inf when the outside branch
                              is absent, i.e. full-mass constraints),

Dirichlet far-field data on the box edge, and constants (c1, c2)
calibrated so the recovered measure has total mass 1 and the prescribed
mass on the closed constraint region.

The solver is projected successive over-relaxation (PSOR) on the
standard five-point Laplacian, swept in red-black order so sweeps
vectorize; the fixed point is the same as for lexicographic sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields import Grid2D, ScalarField
from .geometry import (Region, circular_law_mass, region_diameter_proxy,
                       signed_distance_grid)


@dataclass(frozen=True)
class ObstacleSpec:
    """Constraint region with obstacle constants.

    ``c2 = -inf`` encodes the absent outside branch and is only valid on
    the full-mass path (p = 1).
    """

    region: Region
    c1: float
    c2: float
    p: float

    def __post_init__(self):
        if not self.c1 > self.c2:
            raise ValueError("obstacle constants must satisfy c1 > c2")
        if math.isinf(self.c2) != (self.p == 1.0):
            raise ValueError("c2 = -inf exactly on the p = 1 path")
        mass_u = circular_law_mass(self.region)
        if not (mass_u < self.p <= 1.0):
            raise ValueError(
                f"constraint mass p={self.p} must exceed the circular-law "
                f"mass of the region ({mass_u:.6f}) and be at most 1")


@dataclass
class VISolveResult:
    H: ScalarField
    iterations: int
    complementarity_residual: float
    contact_mask: np.ndarray = field(repr=False)
    converged: bool = True
    omega: float = 0.0


def build_obstacle(spec: ObstacleSpec, grid: Grid2D) -> ScalarField:
    """Obstacle field: upper branch on the closed region (signed distance
    <= 0), lower branch (or -inf sentinel) outside."""
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(spec.region, X, Y)
    return ScalarField(grid, _obstacle_values(sd, grid.radius_sq(),
                                              spec.c1, spec.c2))


def _obstacle_values(sd, r2, c1: float, c2: float):
    inside = sd <= 1e-12
    if math.isinf(c2):
        return np.where(inside, 0.5 * (c1 - r2), -np.inf)
    return np.where(inside, 0.5 * (c1 - r2), 0.5 * (c2 - r2))


def quadratic_obstacle(grid: Grid2D, c: float) -> ScalarField:
    """Single-constant obstacle (c - |x|^2)/2 on the whole box."""
    return ScalarField(grid, 0.5 * (c - grid.radius_sq()))


def far_field_dirichlet(grid: Grid2D, center=(0.0, 0.0)) -> ScalarField:
    """Far-field data -log|x - center| for a unit-mass measure near
    ``center``; the interior values extend the same formula and double as
    a convenient initial iterate."""
    X, Y = grid.meshgrid()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    return ScalarField(grid, -0.5 * np.log(np.maximum(r2, 1e-300)))


def optimal_omega(n: int) -> float:
    """Asymptotically optimal SOR relaxation for the five-point Laplacian."""
    return 2.0 / (1.0 + math.sin(math.pi / (n - 1)))


def _edge_slices():
    return (np.s_[0, :], np.s_[-1, :], np.s_[:, 0], np.s_[:, -1])


def solve_vi(psi: ScalarField, dirichlet: ScalarField,
             omega: Optional[float] = None, tol: float = 1e-8,
             max_iter: Optional[int] = None,
             H0: Optional[ScalarField] = None,
             tol_contact: Optional[float] = None,
             check_every: int = 25) -> VISolveResult:
    """Projected SOR for the obstacle problem.

    Each sweep relaxes the five-point Laplacian in red-black order and
    clamps to the obstacle, so the iterate satisfies H >= psi exactly at
    all times.  Convergence is declared when the complementarity residual

        max over interior nodes of | min(H - nbhd mean, H - psi) |

    drops below ``tol``; the first argument is (h^2/4) times the negative
    discrete Laplacian, so subharmonic overshoots are penalized through
    the absolute value.

    Parameters
    ----------
    psi : obstacle field; -inf entries mean "no constraint".
    dirichlet : field whose edge values are the boundary data.
    omega : relaxation factor in [1, 2); ``None`` selects the grid-size
        dependent optimum.  The classical fixed choice 1.8 converges but
        needs an order of magnitude more sweeps on fine grids.
    H0 : optional warm start; defaults to the obstacle-clamped dirichlet
        extension.
    tol_contact : slack for the reported contact mask (clamped nodes sit
        exactly on the obstacle, so this only widens the mask).
    """
    grid = psi.grid
    n = grid.n
    if omega is None:
        omega = optimal_omega(n)
    if not 1.0 <= omega < 2.0:
        raise ValueError("relaxation factor must lie in [1, 2)")
    if max_iter is None:
        max_iter = 200 * n
    if tol_contact is None:
        tol_contact = 1e-6
    pv = psi.values
    H = np.maximum(dirichlet.values, pv) if H0 is None else H0.values.copy()
    H = np.asarray(H, dtype=float)
    np.maximum(H, pv, out=H)
    for sl in _edge_slices():
        H[sl] = dirichlet.values[sl]

    idx = np.arange(1, n - 1)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    colors = (((ii + jj) % 2 == 0), ((ii + jj) % 2 == 1))
    pin = pv[1:-1, 1:-1]

    def residual() -> float:
        avg = 0.25 * (H[2:, 1:-1] + H[:-2, 1:-1] + H[1:-1, 2:] + H[1:-1, :-2])
        a = H[1:-1, 1:-1] - avg
        b = H[1:-1, 1:-1] - pin
        return float(np.max(np.abs(np.minimum(a, b))))

    it = 0
    res = residual()
    while res >= tol and it < max_iter:
        for mask in colors:
            avg = 0.25 * (H[2:, 1:-1] + H[:-2, 1:-1]
                          + H[1:-1, 2:] + H[1:-1, :-2])
            upd = np.maximum((1.0 - omega) * H[1:-1, 1:-1] + omega * avg, pin)
            inner = H[1:-1, 1:-1]
            inner[mask] = upd[mask]
        it += 1
        if it % check_every == 0 or it >= max_iter:
            res = residual()

    contact = np.zeros((n, n), dtype=bool)
    contact[1:-1, 1:-1] = (H[1:-1, 1:-1] - pin) <= tol_contact
    return VISolveResult(H=ScalarField(grid, H), iterations=it,
                         complementarity_residual=res, contact_mask=contact,
                         converged=res < tol, omega=omega)


def measure_masses(H: ScalarField, region: Region) -> tuple:
    """Total recovered mass and the part attributed to the closed
    constraint region (dilated by half a cell, since the discrete
    Laplacian smears boundary-line mass across one cell)."""
    grid = H.grid
    h = grid.h
    m = np.maximum(H.neg_laplacian(), 0.0) * h * h / (2.0 * math.pi)
    X, Y = grid.meshgrid()
    sd = signed_distance_grid(region, X, Y)[1:-1, 1:-1]
    total = float(m.sum())
    in_u = float(m[sd <= h / 2.0].sum())
    return total, in_u


def measure_centroid(H: ScalarField) -> tuple:
    m = np.maximum(H.neg_laplacian(), 0.0)
    t = m.sum()
    if t <= 0:
        return (0.0, 0.0)
    X, Y = H.grid.meshgrid()
    return (float((m * X[1:-1, 1:-1]).sum() / t),
            float((m * Y[1:-1, 1:-1]).sum() / t))


def measure_boundary_data(H_source: ScalarField, grid: Grid2D) -> ScalarField:
    """Dirichlet data on the edge of ``grid`` computed by direct summation
    of the potential of the measure recovered from ``H_source``.

    Refines the one-point far field once a solve is available: the exact
    multipole content of the recovered measure replaces the centered
    monopole, removing the truncation bias of the initial data.  The
    interior is filled with the one-point formula at the measure centroid
    so the field remains a usable initial iterate.
    """
    src = H_source.grid
    m = np.maximum(H_source.neg_laplacian(), 0.0) * src.h ** 2 / (2.0 * math.pi)
    Xs, Ys = src.meshgrid()
    nz = np.argwhere(m > 1e-14)
    mx = Xs[1:-1, 1:-1][nz[:, 0], nz[:, 1]]
    my = Ys[1:-1, 1:-1][nz[:, 0], nz[:, 1]]
    mm = m[nz[:, 0], nz[:, 1]]
    total = max(float(mm.sum()), 1e-12)
    cx = float((mm * mx).sum() / total)
    cy = float((mm * my).sum() / total)

    out = far_field_dirichlet(grid, (cx, cy))
    X, Y = grid.meshgrid()
    for sl in _edge_slices():
        ex, ey = X[sl], Y[sl]
        d2 = (ex[:, None] - mx) ** 2 + (ey[:, None] - my) ** 2
        # unit far-field strength even if the recovered mass is off 1
        out.values[sl] = (-0.5 * np.log(np.maximum(d2, 1e-300)) @ mm) / total
    return out


@dataclass
class CalibrationResult:
    c1: float
    c2: float
    result: VISolveResult
    center: tuple
    total_mass: float
    mass_in_region: float
    solve_count: int


class CalibrationError(RuntimeError):
    pass


def _bisect_constant(evaluate: Callable, lo: float, hi: float, target: float,
                     tol_mass: float, max_doublings: int = 60,
                     hi_cap: Optional[float] = None,
                     acceptable: Optional[Callable] = None):
    """Monotone bisection of an obstacle constant against a mass target.

    ``evaluate`` maps the constant to ``(mass, state)``; raising an
    obstacle branch raises the mass it controls, so the map is increasing
    and geometric bracket expansion is safe.  ``hi_cap`` bounds the
    upward expansion (the lower branch constant must stay below the upper
    one); when the target is unreachable under the cap the closest
    evaluation is returned instead of an error, which keeps the outer
    loop's monotone signal intact.

    ``acceptable(state)`` guards the returned candidate: evaluations that
    fail it still steer the bracket but are never returned (the nested
    loop uses this to refuse outer iterates whose inner calibration
    missed its own target).  Returns the best acceptable triple
    ``(constant, mass, state)``.
    """
    if acceptable is None:
        acceptable = lambda state: True
    best = [None]

    def consider(c, m, st) -> bool:
        if acceptable(st) and (best[0] is None
                               or abs(m - target) < abs(best[0][1] - target)):
            best[0] = (c, m, st)
            return True
        return False

    if hi_cap is not None:
        hi = min(hi, hi_cap)
    m_lo, st_lo = evaluate(lo)
    consider(lo, m_lo, st_lo)
    k = 0
    while m_lo > target:
        if k >= max_doublings:
            raise CalibrationError("calibration bracket failed")
        hi, m_hi = lo, m_lo
        lo -= 2.0 ** k
        prev = m_lo
        m_lo, st_lo = evaluate(lo)
        consider(lo, m_lo, st_lo)
        k += 1
        if abs(m_lo - prev) < 1e-13 * (1.0 + abs(prev)):
            # branch constant left the solution range: mass saturated,
            # the target is unreachable on this side
            return best[0] if best[0] is not None else (lo, m_lo, st_lo)
    m_hi, st_hi = evaluate(hi)
    consider(hi, m_hi, st_hi)
    k = 0
    while m_hi < target:
        if hi_cap is not None and hi >= hi_cap - 1e-12:
            # saturated at the cap: the target is unreachable below it
            return best[0] if best[0] is not None else (hi, m_hi, st_hi)
        if k >= max_doublings:
            raise CalibrationError("calibration bracket failed")
        lo, m_lo = hi, m_hi
        hi += 2.0 ** k
        if hi_cap is not None:
            hi = min(hi, hi_cap)
        m_hi, st_hi = evaluate(hi)
        consider(hi, m_hi, st_hi)
        k += 1
    stall = 0
    for _ in range(60):
        if best[0] is not None and abs(best[0][1] - target) <= tol_mass:
            break
        if hi - lo < 1e-12 or stall >= 12:
            break
        mid = 0.5 * (lo + hi)
        m_mid, st_mid = evaluate(mid)
        stall = 0 if consider(mid, m_mid, st_mid) else stall + 1
        if m_mid < target:
            lo = mid
        else:
            hi = mid
    if best[0] is None:
        raise CalibrationError("calibration could not meet the mass target")
    return best[0]


def calibrate_constants(region: Region, p: float, grid: Grid2D,
                        tol_mass: float = 0.005,
                        omega: Optional[float] = None, tol: float = 1e-8,
                        max_iter: Optional[int] = None,
                        center=(0.0, 0.0),
                        refine_far_field: bool = True,
                        presolve: bool = True) -> CalibrationResult:
    """Find (c1, c2) such that the recovered measure has total mass 1 and
    mass p on the closed constraint region.

    Nested monotone bisection: the outer loop moves c1 against the mass
    on the region, the inner loop moves c2 against the total mass.  On
    the p = 1 path the outside branch is absent (c2 = -inf) and a single
    bisection on c1 targets the total mass; the region mass then
    coincides with the total because the obstacle only lives there.

    Performance helpers, none of which change the fixed point: potentials
    warm-start from the previous bisection iterate; on grids with
    n >= 201 a coarse-grid presolve supplies tight brackets and
    measure-accurate box-edge data; with ``refine_far_field`` the box
    data is recomputed from the recovered measure and the calibration
    repeated once, which removes the dipole/quadrupole truncation bias
    of the one-point far field.
    """
    mass_u = circular_law_mass(region)
    if not (mass_u < p <= 1.0):
        raise ValueError("p must lie in (circular-law mass of region, 1]")
    if mass_u >= 1.0 - 1e-12:
        raise ValueError("constraint region must leave part of the disk free")

    if presolve and grid.n >= 201:
        coarse_n = max(101, (grid.n - 1) // 4 + 1)
        coarse_n += 1 - coarse_n % 2
        coarse = calibrate_constants(
            region, p, Grid2D(grid.box_radius, coarse_n),
            tol_mass=max(tol_mass, 2e-3), omega=omega, tol=max(tol, 1e-7),
            center=center, refine_far_field=refine_far_field, presolve=False)
        session = _CalibrationSession(
            region, p, grid, tol_mass, omega, tol, max_iter,
            dirichlet=measure_boundary_data(coarse.result.H, grid))
        c1, c2, res = session.calibrate(coarse.c1 - 0.15, coarse.c1 + 0.15,
                                        c2_hint=coarse.c2, c2_window=0.15)
        return session.finish(c1, c2, res, coarse.center,
                              extra_solves=coarse.solve_count)

    session = _CalibrationSession(region, p, grid, tol_mass, omega, tol,
                                  max_iter,
                                  dirichlet=far_field_dirichlet(grid, center))
    diam = region_diameter_proxy(region, grid.box_radius)
    c1, c2, res = session.calibrate(1.0, 1.0 + 2.0 * diam * diam,
                                    c2_hint=None,
                                    c2_window=4.0 * diam * diam)
    used_center = center
    if refine_far_field:
        used_center = measure_centroid(res.H)
        session.dirichlet = measure_boundary_data(res.H, grid)
        c1, c2, res = session.calibrate(c1 - 0.1, c1 + 0.1,
                                        c2_hint=c2, c2_window=0.1)
    return session.finish(c1, c2, res, used_center)


class _CalibrationSession:
    """Holds solver state shared across the bisection passes."""

    def __init__(self, region, p, grid, tol_mass, omega, tol, max_iter,
                 dirichlet):
        self.region = region
        self.p = p
        self.grid = grid
        self.tol_mass = tol_mass
        self.omega = omega
        self.tol = tol
        self.max_iter = max_iter
        self.dirichlet = dirichlet
        self.warm = None
        self.solves = 0
        X, Y = grid.meshgrid()
        self.sd = signed_distance_grid(region, X, Y)
        self.r2 = grid.radius_sq()

    def run(self, c1: float, c2: float) -> VISolveResult:
        psi = ScalarField(self.grid, _obstacle_values(self.sd, self.r2, c1, c2))
        res = solve_vi(psi, self.dirichlet, omega=self.omega, tol=self.tol,
                       max_iter=self.max_iter, H0=self.warm,
                       tol_contact=1e-6 * (1.0 + c1 - c2) if math.isfinite(c2)
                       else 1e-6 * (1.0 + abs(c1)))
        if not res.converged:
            raise CalibrationError(
                f"inner solve did not converge (residual "
                f"{res.complementarity_residual:.3e})")
        self.warm = res.H
        self.solves += 1
        return res

    def calibrate(self, c1_lo: float, c1_hi: float,
                  c2_hint: Optional[float], c2_window: float):
        if self.p == 1.0:
            def eval_c1(c1):
                res = self.run(c1, -math.inf)
                total, _ = measure_masses(res.H, self.region)
                return total, res

            c1, _, res = _bisect_constant(eval_c1, c1_lo, c1_hi, 1.0,
                                          self.tol_mass)
            return c1, -math.inf, res

        last_c2 = [c2_hint]

        def eval_c1(c1):
            if last_c2[0] is not None and math.isfinite(last_c2[0]):
                lo2 = last_c2[0] - c2_window
                hi2 = min(last_c2[0] + c2_window, c1 - 1e-9)
                lo2 = min(lo2, hi2 - 1e-9)
            else:
                lo2, hi2 = c1 - c2_window, c1 - 1e-9

            def eval_c2(c2):
                res = self.run(c1, min(c2, c1 - 1e-9))
                total, _ = measure_masses(res.H, self.region)
                return total, res

            c2, total, res = _bisect_constant(eval_c2, lo2, hi2, 1.0,
                                              self.tol_mass,
                                              hi_cap=c1 - 1e-9)
            last_c2[0] = c2
            _, in_u = measure_masses(res.H, self.region)
            # when the inner loop saturated away from unit total mass the
            # iterate is infeasible; signal +-inf so the outer bracket
            # always steers toward the feasible range of c1
            if total < 1.0 - self.tol_mass:
                signal = -math.inf
            elif total > 1.0 + self.tol_mass:
                signal = math.inf
            else:
                signal = in_u
            return signal, (c2, res, total)

        # an outer iterate only counts when its inner calibration reached
        # the unit total mass; off-target iterates still steer the bracket
        c1, _, (c2, res, _) = _bisect_constant(
            eval_c1, c1_lo, c1_hi, self.p, self.tol_mass,
            acceptable=lambda st: abs(st[2] - 1.0) <= self.tol_mass)
        return c1, c2, res

    def finish(self, c1, c2, res, center, extra_solves: int = 0):
        total, in_u = measure_masses(res.H, self.region)
        return CalibrationResult(c1=c1, c2=c2, result=res, center=center,
                                 total_mass=total, mass_in_region=in_u,
                                 solve_count=self.solves + extra_solves)
