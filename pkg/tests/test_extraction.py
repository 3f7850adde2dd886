import math

import numpy as np
import pytest

from equilib.extraction import (check_contract_expand, check_gap,
                                circular_law_deficit, deficit_positivity,
                                default_boundary_samples, extract_measure,
                                extract_regular, extract_singular)
from equilib.fields import Grid2D, ScalarField
from equilib.geometry import (Disk, HalfPlane, boundary_samples,
                              circular_law_mass, signed_distance_grid)
from equilib.obstacle import (calibrate_constants, far_field_dirichlet,
                              quadratic_obstacle, solve_vi)
from equilib.potential import semicircle_density

DISK_CASE = Disk((0.8, 0.0), 0.6)


@pytest.fixture(scope="module")
def circular_241():
    grid = Grid2D(3.0, 241)
    return solve_vi(quadratic_obstacle(grid, 1.0), far_field_dirichlet(grid),
                    tol=1e-9)


@pytest.fixture(scope="module")
def halfspace_full(request):
    return calibrate_constants(HalfPlane(2.0), 1.0, Grid2D(4.0, 161),
                               tol_mass=0.005)


@pytest.fixture(scope="module")
def halfspace_half():
    # intersects the disk and keeps a finite second constant
    p = 0.7
    return calibrate_constants(HalfPlane(0.5), p, Grid2D(4.0, 161),
                               tol_mass=0.005), p


@pytest.fixture(scope="module")
def disk_case_161():
    p = 2 * circular_law_mass(DISK_CASE)
    return calibrate_constants(DISK_CASE, p, Grid2D(4.0, 161),
                               tol_mass=0.005), p


class TestExtractRegular:
    def test_circular_law_density(self, circular_241):
        grid = circular_241.H.grid
        density, v_mask, band = extract_regular(circular_241.H,
                                                Disk((0, 0), 1.0))
        X, Y = grid.meshgrid()
        r = np.hypot(X, Y)
        inside = r < 1 - 3 * grid.h
        vals = density.values[inside]
        frac = np.mean(np.abs(vals - 1 / math.pi) <= 0.02)
        assert frac >= 0.95
        outside = (r > 1 + 3 * grid.h) & (r < 3 - grid.h)
        assert np.abs(density.values[outside]).max() <= 0.02
        assert v_mask[inside].mean() > 0.98
        assert not v_mask[outside].any()

    def test_harmonic_field_empty_support(self):
        grid = Grid2D(3.0, 65)
        psi = ScalarField(grid, np.full((65, 65), -np.inf))
        res = solve_vi(psi, far_field_dirichlet(grid), tol=1e-11)
        density, v_mask, _ = extract_regular(res.H, Disk((0, 0), 1.0))
        assert not v_mask.any()
        assert np.abs(density.values).max() < 1e-4

    def test_fully_singular_case_has_no_regular_mass(self, halfspace_full):
        ext = extract_measure(halfspace_full.result.H, HalfPlane(2.0))
        assert ext.mass_regular <= 0.01


class TestExtractSingular:
    def test_halfspace_matches_semicircle(self, halfspace_full):
        ext = extract_measure(halfspace_full.result.H, HalfPlane(2.0))
        ys = np.array([s.position.y for s in ext.samples])
        arc = np.array([s.arc_weight for s in ext.samples])
        l1 = float(np.abs(ext.g - semicircle_density(ys)) @ arc)
        assert l1 <= 0.05
        assert ext.mass_singular == pytest.approx(1.0, abs=0.02)

    def test_no_jump_gives_zero_density(self, circular_241):
        # region boundary crossing a region where the potential is smooth
        g = extract_singular(circular_241.H, DISK_CASE,
                             default_boundary_samples(
                                 DISK_CASE, circular_241.H.grid))
        assert np.abs(g).max() <= 0.01

    def test_constrained_disk_positive_inside(self, disk_case_161):
        cal, p = disk_case_161
        ext = extract_measure(cal.result.H, DISK_CASE)
        pos = np.array([[s.position.x, s.position.y] for s in ext.samples])
        in_disk = np.hypot(pos[:, 0], pos[:, 1]) <= 1 - cal.result.H.grid.h
        assert (ext.g[in_disk] > 1e-6).all()

    def test_stencil_requires_margin(self, circular_241):
        grid = circular_241.H.grid
        samples = boundary_samples(HalfPlane(-(grid.box_radius - grid.h)),
                                   0.05, extent=1.0)
        with pytest.raises(ValueError, match="box edge"):
            extract_singular(circular_241.H, HalfPlane(0.0), samples)

    def test_negative_noise_clamped(self, circular_241):
        ext = extract_measure(circular_241.H, DISK_CASE)
        assert (ext.g >= 0).all()
        assert ext.g_min_raw <= 0.0


class TestMassAccounting:
    def test_closure_disk_case(self, disk_case_161):
        cal, p = disk_case_161
        ext = extract_measure(cal.result.H, DISK_CASE)
        assert ext.mass_regular + ext.mass_singular == pytest.approx(
            1.0, abs=0.03)

    def test_constraint_mass_active(self, disk_case_161):
        cal, p = disk_case_161
        assert cal.mass_in_region == pytest.approx(p, abs=0.005)

    def test_square_norm_stable_under_refinement(self):
        # sum g^2 arc is the square of the boundary density's L2 norm;
        # it must move less than 10% when the grid is refined
        norms = []
        for n in (161, 321):
            cal = calibrate_constants(HalfPlane(2.0), 1.0, Grid2D(4.0, n),
                                      tol_mass=0.005)
            ext = extract_measure(cal.result.H, HalfPlane(2.0))
            arc = np.array([s.arc_weight for s in ext.samples])
            norms.append(float((ext.g ** 2) @ arc))
        assert abs(norms[1] - norms[0]) <= 0.1 * norms[0]


class TestSymmetry:
    def test_mirror_symmetric_case(self, disk_case_161):
        cal, p = disk_case_161
        ext = extract_measure(cal.result.H, DISK_CASE)
        dv = ext.regular_density.values
        assert np.abs(dv - dv[:, ::-1]).max() <= 1e-6 * (1 + dv.max())
        # disk samples come in mirror pairs
        ys = np.array([s.position.y for s in ext.samples])
        order = np.lexsort((np.sign(ys), np.abs(ys)))
        g_sorted = ext.g[order]
        assert np.abs(g_sorted[0::2] - g_sorted[1::2]).max() <= 1e-6 * (
            1 + ext.g.max())


class TestGap:
    def test_constrained_disk_has_gap(self, disk_case_161):
        cal, p = disk_case_161
        grid = cal.result.H.grid
        ext = extract_measure(cal.result.H, DISK_CASE)
        ok, margin = check_gap(ext.V_mask, DISK_CASE, grid)
        assert ok
        assert margin >= 2 * grid.h

    def test_fully_singular_vacuous(self, halfspace_full):
        grid = halfspace_full.result.H.grid
        ext = extract_measure(halfspace_full.result.H, HalfPlane(2.0))
        ok, margin = check_gap(ext.V_mask, HalfPlane(2.0), grid)
        assert ok

    def test_negative_control(self):
        grid = Grid2D(4.0, 65)
        X, Y = grid.meshgrid()
        sd = signed_distance_grid(DISK_CASE, X, Y)
        fabricated = (sd > 0) & (sd < 4 * grid.h)  # hugs the boundary
        ok, margin = check_gap(fabricated, DISK_CASE, grid)
        assert not ok
        assert margin < 2 * grid.h


class TestContractExpand:
    def test_constrained_disk(self, disk_case_161):
        cal, p = disk_case_161
        grid = cal.result.H.grid
        ext = extract_measure(cal.result.H, DISK_CASE)
        (c_ok, c_margin, e_ok, e_margin, s_ok, s_margin) = \
            check_contract_expand(ext.V_mask, ext.samples, ext.g,
                                  DISK_CASE, grid)
        assert c_ok and e_ok and s_ok
        assert s_margin > 1e-6

    def test_negative_control_unmoved_support(self, disk_case_161):
        # the circular law support with zero boundary density must fail
        # the expansion checks for an active constraint
        cal, p = disk_case_161
        grid = cal.result.H.grid
        X, Y = grid.meshgrid()
        v_unmoved = np.hypot(X, Y) < 1.0
        samples = default_boundary_samples(DISK_CASE, grid)
        g0 = np.zeros(len(samples))
        (_, _, _, _, s_ok, _) = check_contract_expand(
            v_unmoved, samples, g0, DISK_CASE, grid)
        assert not s_ok


class TestDeficitField:
    def test_constrained_disk_pinning(self, disk_case_161):
        cal, p = disk_case_161
        w, checks = circular_law_deficit(cal.result.H, cal.c1, cal.c2,
                                         DISK_CASE)
        assert checks["zero_ok"]
        assert checks["bounds_ok"]
        assert checks["w_min"] >= -checks["eps"]
        assert checks["w_max"] <= 0.5 * (cal.c1 - cal.c2) + checks["eps"]
        ext = extract_measure(cal.result.H, DISK_CASE)
        pos_ok, _ = deficit_positivity(w, ext.V_mask, DISK_CASE,
                                       checks["eps"])
        assert pos_ok

    def test_marginal_constraint_deficit_vanishes(self):
        p = circular_law_mass(DISK_CASE) + 1e-6
        cal = calibrate_constants(DISK_CASE, p, Grid2D(4.0, 161),
                                  tol_mass=0.005)
        w, checks = circular_law_deficit(cal.result.H, cal.c1, cal.c2,
                                         DISK_CASE)
        grid = cal.result.H.grid
        X, Y = grid.meshgrid()
        on_disk = np.hypot(X, Y) <= 1.0
        assert np.abs(w.values[on_disk]).max() <= 0.05

    def test_max_attained_on_outside_support(self, halfspace_half):
        # with the region leaving the disk, the deficit maximum is pinned
        # on the disk part of the support outside the region
        cal, p = halfspace_half
        grid = cal.result.H.grid
        w, checks = circular_law_deficit(cal.result.H, cal.c1, cal.c2,
                                         HalfPlane(0.5))
        ext = extract_measure(cal.result.H, HalfPlane(0.5))
        X, Y = grid.meshgrid()
        sd = signed_distance_grid(HalfPlane(0.5), X, Y)
        near_max = w.values >= 0.5 * (cal.c1 - cal.c2) - checks["eps"]
        near_max[0, :] = near_max[-1, :] = False
        near_max[:, 0] = near_max[:, -1] = False
        assert near_max.any()
        # every near-max node sits in the closed disk and outside the
        # open region, adjacent to the outside support
        r = np.hypot(X, Y)
        assert (r[near_max] <= 1.0 + 2 * grid.h).all()
        assert (sd[near_max] >= -2 * grid.h).all()
