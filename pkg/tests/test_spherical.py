"""Spectral basis, transforms, and tangential operators on the sphere."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dropwaves.spherical import (
    GridField,
    HarmonicIndex,
    QuadGrid,
    SphCoeffs,
    analyze,
    coeff_index,
    eval_harmonic,
    eval_harmonics_all,
    curvature_multiplier,
    hessian_quadratic_form,
    laplace_beltrami,
    num_coeffs,
    rotation_generator,
    startup_selftest,
    synthesize,
    synthesize_at,
    tangential_gradient,
)
from conftest import band_field

L = 8
GRID = QuadGrid.for_degree(L)


def random_unit(rng, n=1):
    x = rng.standard_normal((n, 3))
    return x / np.linalg.norm(x, axis=1)[:, None]


# ---------------------------------------------------------------------------
# eval_harmonic
# ---------------------------------------------------------------------------

def test_harmonic_00_is_constant(rng):
    # 1/sqrt(4 pi): the unique constant with unit L2 norm on area 4 pi
    for x in random_unit(rng, 5):
        assert eval_harmonic(HarmonicIndex(0, 0), x) == pytest.approx(
            0.2820947917738781, abs=1e-13)


def test_harmonic_10_at_pole():
    # phi_{1,0} = c*x3; unit norm forces c = sqrt(3/(4 pi)) since the
    # quadrature oracle gives int x3^2 dsigma = 4 pi / 3
    w = GRID.weights
    x3sq = float(w @ GRID.nodes[:, 2] ** 2)
    assert x3sq == pytest.approx(4 * math.pi / 3, abs=1e-12)
    c = 1.0 / math.sqrt(x3sq)
    assert c == pytest.approx(0.4886025119029199, abs=1e-12)
    val = eval_harmonic(HarmonicIndex(1, 0), np.array([0.0, 0.0, 1.0]))
    assert val == pytest.approx(c, abs=1e-13)


def test_harmonic_21_vanishes_at_pole():
    assert eval_harmonic(HarmonicIndex(2, 1), np.array([0.0, 0.0, 1.0])) == 0.0


def test_eval_rejects_off_sphere():
    with pytest.raises(ValueError):
        eval_harmonic(HarmonicIndex(2, 0), np.array([0.0, 0.0, 1.1]))


def test_invalid_index_rejected():
    with pytest.raises(ValueError):
        HarmonicIndex(2, 3)
    with pytest.raises(ValueError):
        coeff_index(1, -2)


def test_orthonormality_gram():
    Y = GRID.basis(L)
    gram = Y.T @ (GRID.weights[:, None] * Y)
    assert np.max(np.abs(gram - np.eye(num_coeffs(L)))) < 1e-10


def test_startup_selftest_passes():
    startup_selftest(4)


# ---------------------------------------------------------------------------
# analyze / synthesize
# ---------------------------------------------------------------------------

def test_round_trip_delta():
    c = SphCoeffs.delta(L, 2, 1)
    back = analyze(synthesize(c, GRID), L)
    assert np.max(np.abs(back.coeffs - c.coeffs)) < 1e-12


def test_round_trip_random(rng):
    c = SphCoeffs(L, rng.standard_normal(num_coeffs(L)))
    back = analyze(synthesize(c, GRID), L)
    assert np.max(np.abs(back.coeffs - c.coeffs)) < 1e-10


def test_analyze_constant_field():
    f = GridField(GRID, np.ones(GRID.size))
    c = analyze(f, L)
    # <1, phi_00> = sqrt(4 pi); everything else zero
    assert c[0, 0] == pytest.approx(math.sqrt(4 * math.pi), abs=1e-12)
    rest = c.coeffs.copy()
    rest[0] = 0.0
    assert np.max(np.abs(rest)) < 1e-12


def test_analyze_x3_field():
    f = GridField(GRID, GRID.nodes[:, 2].copy())
    c = analyze(f, L)
    # quadrature oracle: <x3, phi_10> = sqrt(3/4pi) * 4pi/3 = sqrt(4pi/3)
    want = float(GRID.weights @ (GRID.nodes[:, 2]
                                 * eval_harmonics_all(1, GRID.nodes)[:, coeff_index(1, 0)]))
    assert want == pytest.approx(math.sqrt(4 * math.pi / 3), abs=1e-12)
    assert c[1, 0] == pytest.approx(want, abs=1e-12)
    rest = c.coeffs.copy()
    rest[coeff_index(1, 0)] = 0.0
    assert np.max(np.abs(rest)) < 1e-12


def test_under_resolved_grid_rejected():
    small = QuadGrid.build(3, 5)
    c = SphCoeffs.zeros(L)
    with pytest.raises(ValueError, match="under-resolves"):
        synthesize(c, small)


def test_synthesize_at_matches_grid(rng):
    c = band_field(L, 1.0, rng)
    on_grid = synthesize(c, GRID).values
    off_grid = synthesize_at(c, GRID.nodes)
    assert np.max(np.abs(on_grid - off_grid)) < 1e-12


# ---------------------------------------------------------------------------
# diagonal operators
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("ell,m,factor", [(0, 0, 0), (2, 1, -6), (4, 3, -20)])
def test_laplace_beltrami_eigenvalues(ell, m, factor):
    out = laplace_beltrami(SphCoeffs.delta(L, ell, m))
    want = SphCoeffs.delta(L, ell, m, float(factor))
    assert np.max(np.abs(out.coeffs - want.coeffs)) == 0.0


@pytest.mark.parametrize("ell,m,factor", [(1, 0, 0), (2, 1, 4), (0, 0, -2)])
def test_curvature_multiplier(ell, m, factor):
    out = curvature_multiplier(SphCoeffs.delta(L, ell, m))
    want = SphCoeffs.delta(L, ell, m, float(factor))
    assert np.max(np.abs(out.coeffs - want.coeffs)) == 0.0


def test_rotation_generator_spectral_rule():
    out = rotation_generator(SphCoeffs.delta(L, 3, 0))
    assert np.max(np.abs(out.coeffs)) == 0.0
    out = rotation_generator(SphCoeffs.delta(L, 2, 1))
    want = SphCoeffs.delta(L, 2, -1, -1.0)
    assert np.max(np.abs(out.coeffs - want.coeffs)) == 0.0
    out = rotation_generator(SphCoeffs.delta(L, 4, -3))
    want = SphCoeffs.delta(L, 4, 3, 3.0)
    assert np.max(np.abs(out.coeffs - want.coeffs)) == 0.0


def test_laplacian_matches_gradient_energy(rng):
    # Green identity oracle: int |grad phi_21|^2 = l(l+1) = 6
    c = SphCoeffs.delta(L, 2, 1)
    gv = tangential_gradient(c, GRID).values
    energy = float(GRID.weights @ np.einsum("qc,qc->q", gv, gv))
    assert energy == pytest.approx(6.0, abs=1e-10)


@given(st.integers(0, 6), st.integers(-6, 6))
@settings(max_examples=30, deadline=None)
def test_rotation_generator_antisymmetric_on_deltas(ell, m):
    if abs(m) > ell:
        return
    f = SphCoeffs.delta(6, ell, m)
    g = SphCoeffs.delta(6, min(ell + 1, 6), 0)
    lhs = f.coeffs @ rotation_generator(g).coeffs
    rhs = rotation_generator(f).coeffs @ g.coeffs
    assert abs(lhs + rhs) < 1e-12


def test_rotation_generator_antisymmetric_random(rng):
    f = band_field(L, 1.0, rng)
    g = band_field(L, 1.0, rng)
    val = f.coeffs @ rotation_generator(g).coeffs \
        + rotation_generator(f).coeffs @ g.coeffs
    assert abs(val) < 1e-10


# ---------------------------------------------------------------------------
# tangential gradient
# ---------------------------------------------------------------------------

def test_gradient_of_constant_vanishes():
    c = SphCoeffs.delta(L, 0, 0, 2.5)
    gv = tangential_gradient(c, GRID).values
    assert np.max(np.abs(gv)) < 1e-13


def test_gradient_of_x3():
    # grad_S2 x3 = e3 - <e3,x> x = (-x1 x3, -x2 x3, 1 - x3^2)
    c = SphCoeffs.zeros(L)
    c[1, 0] = math.sqrt(4 * math.pi / 3)
    gv = tangential_gradient(c, GRID).values
    x = GRID.nodes
    want = np.column_stack((-x[:, 0] * x[:, 2], -x[:, 1] * x[:, 2],
                            1 - x[:, 2] ** 2))
    assert np.max(np.abs(gv - want)) < 1e-12


def test_gradient_is_tangent(rng):
    c = band_field(L, 1.0, rng)
    gv = tangential_gradient(c, GRID).values
    radial = np.einsum("qc,qc->q", gv, GRID.nodes)
    assert np.max(np.abs(radial)) < 1e-10


def test_commutator_identity(rng):
    # M(grad f) - grad(M f) = J grad f at the nodes
    grid = QuadGrid.for_degree(L + 1)
    f = band_field(L, 1.0, rng)
    gf = tangential_gradient(f, grid).values
    grad_mf = tangential_gradient(rotation_generator(f), grid).values
    Jx = np.column_stack((-grid.nodes[:, 1], grid.nodes[:, 0],
                          np.zeros(grid.size)))
    m_grad = np.zeros_like(gf)
    for i in range(3):
        gi = analyze(GridField(grid, gf[:, i]), L + 1)
        dgi = tangential_gradient(gi, grid).values
        m_grad[:, i] = np.einsum("qc,qc->q", Jx, dgi)
    Jmat = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.max(np.abs(m_grad - grad_mf - gf @ Jmat.T)) < 1e-8


def test_divergence_theorem(rng):
    grid = QuadGrid.for_degree(L + 1)
    comps = [band_field(L, 1.0, rng) for _ in range(3)]
    div = sum(tangential_gradient(c, grid).values[:, i]
              for i, c in enumerate(comps))
    F = np.column_stack([synthesize(c, grid).values for c in comps])
    lhs = float(grid.weights @ div)
    rhs = 2.0 * float(grid.weights @ np.einsum("qc,qc->q", F, grid.nodes))
    assert abs(lhs - rhs) < 1e-8


def test_first_moment_identity(rng):
    # int 2 x g = int grad_S2 g, componentwise
    grid = QuadGrid.for_degree(L + 1)
    g = band_field(L, 1.0, rng)
    gv = synthesize(g, grid).values
    lhs = 2.0 * (grid.weights[:, None] * grid.nodes * gv[:, None]).sum(axis=0)
    rhs = (grid.weights[:, None] * tangential_gradient(g, grid).values).sum(axis=0)
    assert np.max(np.abs(lhs - rhs)) < 1e-8


# ---------------------------------------------------------------------------
# Hessian quadratic form, against an ambient finite-difference oracle
# ---------------------------------------------------------------------------

def _fd_hessian_form(h, x, step=1e-4):
    def E0(y):
        r = np.linalg.norm(y)
        return synthesize_at(h, (np.asarray(y) / r)[None, :])[0]

    g = np.zeros(3)
    H = np.zeros((3, 3))
    for i in range(3):
        ei = np.zeros(3); ei[i] = step
        g[i] = (E0(x + ei) - E0(x - ei)) / (2 * step)
        H[i, i] = (E0(x + ei) - 2 * E0(x) + E0(x - ei)) / step**2
        for j in range(i):
            ej = np.zeros(3); ej[j] = step
            H[i, j] = H[j, i] = (E0(x + ei + ej) - E0(x + ei - ej)
                                 - E0(x - ei + ej) + E0(x - ei - ej)) / (4 * step**2)
    return g @ H @ g


def test_hessian_form_constant_is_zero():
    h = SphCoeffs.delta(L, 0, 0, 0.7)
    grid = QuadGrid.for_degree(L + 1, dealias=2)
    out = hessian_quadratic_form(h, grid)
    assert np.max(np.abs(out.values)) < 1e-13


@pytest.mark.parametrize("ell,m,eps", [(1, 0, 0.3), (2, 2, 0.2)])
def test_hessian_form_matches_fd(ell, m, eps, rng):
    h = SphCoeffs.delta(5, ell, m, eps)
    grid = QuadGrid.for_degree(5, dealias=2)
    out = hessian_quadratic_form(h, grid)
    for q in rng.choice(grid.size, 10, replace=False):
        ref = _fd_hessian_form(h, grid.nodes[q])
        assert out.values[q] == pytest.approx(ref, rel=1e-6, abs=1e-12)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_coeffs_json_round_trip(rng):
    c = band_field(L, 1.0, rng)
    back = SphCoeffs.from_json(c.to_json())
    assert back.l_max == c.l_max
    assert np.array_equal(back.coeffs, c.coeffs)


def test_json_ordering_is_l_major():
    c = SphCoeffs.delta(2, 1, -1, 3.0)
    entries = c.to_json_dict()["coeffs"]
    assert [e[:2] for e in entries[:4]] == [[0, 0], [1, -1], [1, 0], [1, 1]]
    assert entries[1][2] == 3.0
