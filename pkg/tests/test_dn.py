"""Dirichlet-Neumann operator: exactness on balls, structural identities."""

import math

import numpy as np
import pytest

from dropwaves.spherical import QuadGrid, SphCoeffs, num_coeffs, synthesize
from dropwaves.geometry import metric_factor_J, torus_action
from dropwaves.dn import (
    DNOperator,
    SolidHarmonicBasis,
    boundary_points,
    dirichlet_neumann,
    outward_normal,
    _laplacian_table,
    _solid_harmonic_tables,
)
from conftest import band_field

L = 8
DN = DNOperator(L)


def const_eta(c, l_max=L):
    e = SphCoeffs.zeros(l_max)
    e[0, 0] = c * math.sqrt(4 * math.pi)
    return e


# ---------------------------------------------------------------------------
# solid harmonic basis
# ---------------------------------------------------------------------------

def test_tables_are_harmonic_exactly():
    # symbolic check on the rational monomial tables
    for tab in _solid_harmonic_tables(6).values():
        assert _laplacian_table(tab) == {}


def test_basis_matches_recurrence_on_sphere(rng):
    basis = SolidHarmonicBasis.build(10)
    from dropwaves.spherical import eval_harmonics_all
    pts = rng.standard_normal((40, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    V1 = basis.evaluate(pts)
    V2 = eval_harmonics_all(10, pts)
    assert np.max(np.abs(V1 - V2)) < 1e-12


def test_basis_degree_homogeneity(rng):
    basis = SolidHarmonicBasis.build(5)
    x = rng.standard_normal(3)
    for s in (0.5, 2.0):
        v1 = basis.evaluate((s * x)[None, :])[0]
        v0 = basis.evaluate(x[None, :])[0]
        for ell in range(6):
            for m in range(-ell, ell + 1):
                from dropwaves.spherical import coeff_index
                k = coeff_index(ell, m)
                assert v1[k] == pytest.approx(s**ell * v0[k], rel=1e-12, abs=1e-14)


def test_gradient_tables_match_fd(rng):
    basis = SolidHarmonicBasis.build(4)
    x = rng.standard_normal(3)
    vals, grads = basis.evaluate_with_gradient(x[None, :])
    eps = 1e-6
    for k in range(3):
        e = np.zeros(3); e[k] = eps
        fd = (basis.evaluate((x + e)[None, :])[0]
              - basis.evaluate((x - e)[None, :])[0]) / (2 * eps)
        assert np.max(np.abs(grads[0, k] - fd)) < 1e-7


# ---------------------------------------------------------------------------
# boundary geometry
# ---------------------------------------------------------------------------

def test_boundary_points_sphere():
    pts = boundary_points(SphCoeffs.zeros(L), DN.grid)
    assert np.max(np.abs(pts - DN.grid.nodes)) == 0.0


def test_boundary_points_scaled():
    pts = boundary_points(const_eta(0.2), DN.grid)
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.2)) < 1e-12


def test_boundary_point_perturbed_pole():
    eta = SphCoeffs.delta(L, 1, 0, 0.1)
    grid = QuadGrid.build(L + 2, 2 * L + 2)
    # evaluate at the node nearest the pole and compare against the formula
    q = int(np.argmax(grid.nodes[:, 2]))
    pts = boundary_points(eta, grid)
    from dropwaves.spherical import eval_harmonics_all, coeff_index
    phi10 = eval_harmonics_all(1, grid.nodes[q][None, :])[0, coeff_index(1, 0)]
    want = (1 + 0.1 * phi10) * grid.nodes[q]
    assert np.max(np.abs(pts[q] - want)) < 1e-14


def test_normal_is_radial_for_balls():
    for eta in (SphCoeffs.zeros(L), const_eta(0.15)):
        nu = outward_normal(eta, DN.grid)
        assert np.max(np.abs(nu - DN.grid.nodes)) < 1e-13


def test_normal_unit_and_tangent_orthogonal(rng):
    eta = SphCoeffs.delta(L, 2, 2, 0.05)
    nu = outward_normal(eta, DN.grid)
    assert np.max(np.abs(np.linalg.norm(nu, axis=1) - 1.0)) < 1e-12
    # FD surface tangents: curves s -> (1+eta(c(s))) c(s) through each node
    grid = DN.grid
    eps = 1e-6
    from dropwaves.spherical import synthesize_at
    for q in rng.choice(grid.size, 8, replace=False):
        x = grid.nodes[q]
        # two tangent directions of S2 at x
        t1 = np.cross(x, [0.0, 0.0, 1.0])
        if np.linalg.norm(t1) < 1e-8:
            t1 = np.cross(x, [1.0, 0.0, 0.0])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(x, t1)
        for t in (t1, t2):
            xp = (x + eps * t) / np.linalg.norm(x + eps * t)
            xm = (x - eps * t) / np.linalg.norm(x - eps * t)
            gp = (1 + synthesize_at(eta, xp[None, :])[0]) * xp
            gm = (1 + synthesize_at(eta, xm[None, :])[0]) * xm
            surface_tangent = (gp - gm) / (2 * eps)
            surface_tangent /= np.linalg.norm(surface_tangent)
            assert abs(surface_tangent @ nu[q]) < 1e-6


# ---------------------------------------------------------------------------
# the operator itself
# ---------------------------------------------------------------------------

def test_sphere_eigenvalues():
    worst = 0.0
    for ell in range(0, 9):
        for m in range(-ell, ell + 1):
            g, rep = DN.apply(SphCoeffs.zeros(L), SphCoeffs.delta(L, ell, m))
            want = SphCoeffs.delta(L, ell, m, float(ell))
            worst = max(worst, float(np.max(np.abs(g.coeffs - want.coeffs))))
    assert worst < 1e-8


def test_scaled_ball_eigenvalues():
    # exact extension (r/R)^l phi on the ball of radius R = 1 + c
    g, rep = DN.apply(const_eta(0.1), SphCoeffs.delta(L, 3, 2))
    want = SphCoeffs.delta(L, 3, 2, 3.0 / 1.1)
    assert 3.0 / 1.1 == pytest.approx(2.7272727, abs=1e-7)
    assert np.max(np.abs(g.coeffs - want.coeffs)) < 1e-10
    assert rep.residual < 1e-12


def test_constant_in_kernel(rng):
    h = band_field(L, 2e-3, rng, decay=4.0)
    one = SphCoeffs.delta(L, 0, 0, math.sqrt(4 * math.pi))
    g, rep = DN.apply(h, one)
    assert g.norm() <= 1e-9


def test_weighted_symmetry(rng):
    h = band_field(L, 1e-3, rng, decay=4.0)
    p1 = band_field(L, 1.0, rng, decay=3.5)
    p2 = band_field(L, 1.0, rng, decay=3.5)
    gv1, _ = DN.apply_values(h, p1)
    gv2, _ = DN.apply_values(h, p2)
    J = metric_factor_J(h, DN.grid).values
    oneh = 1.0 + synthesize(h, DN.grid).values
    w = DN.grid.weights
    s1 = float(w @ (synthesize(p1, DN.grid).values * gv2 * oneh * J))
    s2 = float(w @ (synthesize(p2, DN.grid).values * gv1 * oneh * J))
    assert abs(s1 - s2) < 1e-7


def test_dirichlet_form_nonnegative(rng):
    h = band_field(L, 1e-3, rng, decay=4.0)
    for _ in range(3):
        p = band_field(L, 1.0, rng, decay=3.0)
        gv, _ = DN.apply_values(h, p)
        J = metric_factor_J(h, DN.grid).values
        oneh = 1.0 + synthesize(h, DN.grid).values
        form = float(DN.grid.weights @ (synthesize(p, DN.grid).values * gv * oneh * J))
        assert form >= -1e-9


def test_rotation_equivariance(rng):
    h = band_field(L, 1e-3, rng, decay=4.0)
    p = band_field(L, 1.0, rng, decay=3.5)
    th = 0.83
    g_rot, _ = DN.apply(torus_action(th, h), torus_action(th, p))
    g_plain, _ = DN.apply(h, p)
    assert np.max(np.abs(g_rot.coeffs
                         - torus_action(th, g_plain).coeffs)) < 1e-7


def test_misfit_guard_trips():
    eta = SphCoeffs.delta(L, 3, 2, 0.2)   # too deformed for L_ext = L + 4
    psi = SphCoeffs.delta(L, 8, 5)
    with pytest.raises(ValueError, match="misfit"):
        DN.apply(eta, psi)


def test_report_carries_diagnostics(rng):
    h = band_field(L, 1e-3, rng, decay=4.0)
    p = band_field(L, 1.0, rng, decay=3.5)
    g, rep = DN.apply(h, p)
    assert rep.residual >= 0.0
    assert rep.condition_estimate >= 1.0
    assert rep.coefficients.shape == (num_coeffs(DN.l_ext),)
    d = rep.to_json_dict()
    assert set(d) == {"residual", "condition_estimate", "coefficients"}


def test_grid_must_cover_basis():
    with pytest.raises(ValueError, match="fewer than"):
        DNOperator(4, grid=QuadGrid.build(5, 9), l_ext=8)


def test_one_call_wrapper(rng):
    h = band_field(6, 1e-3, rng, decay=4.0)
    p = band_field(6, 1.0, rng, decay=3.5)
    g, rep = dirichlet_neumann(h, p)
    assert g.l_max == 6
