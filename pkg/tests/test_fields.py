"""Vector fields, energies, Poisson brackets, and RK4 evolution."""

import math

import numpy as np
import pytest

from dropwaves.spherical import SphCoeffs, num_coeffs, synthesize
from dropwaves.geometry import (
    State,
    angular_momentum,
    barycenter_momentum,
    reflect,
    torus_action_state,
    volume,
)
from dropwaves.fields import EvolutionLog, FieldOperators, PhysicalParams, evolve
from conftest import band_field, band_state

L = 6
OPS = FieldOperators(L)


def const_eta(c, l_max=L):
    e = SphCoeffs.zeros(l_max)
    e[0, 0] = c * math.sqrt(4 * math.pi)
    return e


def test_physical_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(sigma0=-1.0)


# ---------------------------------------------------------------------------
# X1 and X2
# ---------------------------------------------------------------------------

def test_x1_linearization():
    # at h = 0, J/(1+h) = 1 and G(0) phi = l phi
    u = State(SphCoeffs.zeros(L), SphCoeffs.delta(L, 4, -2))
    out = OPS.field_X1(u)
    want = SphCoeffs.delta(L, 4, -2, 4.0)
    assert np.max(np.abs(out.coeffs - want.coeffs)) < 1e-12


def test_x1_zero_state():
    out = OPS.field_X1(State.zeros(L))
    assert out.norm() == 0.0


def test_x1_on_scaled_ball():
    u = State(const_eta(0.1), SphCoeffs.delta(L, 2, 1))
    out = OPS.field_X1(u)
    want = SphCoeffs.delta(L, 2, 1, 2.0 / 1.1)
    assert np.max(np.abs(out.coeffs - want.coeffs)) < 1e-7


def test_x2_equilibrium_constant():
    # X2(0,0) = -sigma0 H(0) = -2 sigma0, i.e. X2 + 2 sigma0 = 0
    out = OPS.field_X2(State.zeros(L))
    want = SphCoeffs.delta(L, 0, 0, -2.0 * math.sqrt(4 * math.pi))
    assert np.max(np.abs(out.coeffs - want.coeffs)) < 1e-13


def test_x2_quadratic_in_psi():
    # with h = 0, beta = eps phi_10: X2 + 2 sigma0 = O(eps^2)
    norms = []
    for eps in (1e-2, 5e-3):
        u = State(SphCoeffs.zeros(L), SphCoeffs.delta(L, 1, 0, eps))
        out = OPS.field_X2(u)
        out[0, 0] += 2.0 * math.sqrt(4 * math.pi)
        norms.append(out.norm())
    assert norms[0] <= 10.0 * (1e-2) ** 2
    # halving eps shrinks the residual ~4x
    assert norms[0] / norms[1] > 3.0


def test_x2_on_scaled_ball():
    c = 0.1
    u = State(const_eta(c), SphCoeffs.zeros(L))
    out = OPS.field_X2(u)
    out[0, 0] += 2.0 * math.sqrt(4 * math.pi)
    # X2 + 2 sigma0 = sigma0 (2 - 2/(1+c)) = 2 sigma0 c/(1+c), a constant
    want = 2 * c / (1 + c)
    assert want == pytest.approx(0.18181818, abs=1e-7)
    assert out[0, 0] / math.sqrt(4 * math.pi) == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def test_hamiltonian_of_sphere():
    assert OPS.hamiltonian(State.zeros(L)) == pytest.approx(4 * math.pi, abs=1e-12)
    assert OPS.hamiltonian_sigma0(State.zeros(L)) == pytest.approx(
        4 * math.pi / 3, abs=1e-12)


def test_hamiltonian_torus_invariant(rng):
    u = band_state(L, 2e-3, rng)
    assert OPS.hamiltonian(torus_action_state(0.9, u)) == pytest.approx(
        OPS.hamiltonian(u), abs=1e-8)


def test_hamiltonian_potential_shift_invariant(rng):
    u = band_state(L, 2e-3, rng)
    shifted = State(u.eta.copy(), u.beta.copy())
    shifted.beta[0, 0] += 0.7
    assert OPS.hamiltonian(shifted) == pytest.approx(OPS.hamiltonian(u), abs=1e-9)


def test_kinetic_energy_nonnegative(rng):
    from dropwaves.geometry import metric_factor_J
    u = band_state(L, 2e-3, rng)
    area = OPS.params.sigma0 * float(
        OPS.grid.weights @ ((1 + synthesize(u.eta, OPS.grid).values)
                            * metric_factor_J(u.eta, OPS.grid).values))
    kinetic = OPS.hamiltonian(u) - area
    assert kinetic >= -1e-9


# ---------------------------------------------------------------------------
# the wave operator F
# ---------------------------------------------------------------------------

def test_F_vanishes_at_origin():
    for omega in (0.0, 1.3, 2.8):
        assert OPS.grad_F(omega, State.zeros(L)).norm() <= 1e-9


def test_F_is_gradient_of_Hs0_minus_omega_I(rng):
    # FD of Hs0 - omega I in a random direction equals <F, d>
    u = band_state(L, 2e-3, rng)
    d = band_state(L, 1.0, rng, decay=3.5)
    omega = 1.7
    eps = 1e-5
    up = State.from_vector(L, u.to_vector() + eps * d.to_vector())
    um = State.from_vector(L, u.to_vector() - eps * d.to_vector())

    def functional(v):
        return OPS.hamiltonian_sigma0(v) - omega * angular_momentum(v, OPS.grid)

    fd = (functional(up) - functional(um)) / (2 * eps)
    ana = OPS.grad_F(omega, u).dot(d)
    assert fd == pytest.approx(ana, rel=1e-5, abs=1e-10)


def test_F_linearization_matches_blocks(rng):
    # FD Jacobian of F at u = 0 equals the block operator
    from dropwaves.resonance import linearized_matrix
    omega = 2.2
    Lmat = linearized_matrix(omega, 1.0, L)
    n2 = 2 * num_coeffs(L)
    eps = 1e-6
    cols = rng.choice(n2, 12, replace=False)
    for j in cols:
        d = np.zeros(n2)
        d[j] = eps
        Fp = OPS.grad_F(omega, State.from_vector(L, d)).to_vector()
        Fm = OPS.grad_F(omega, State.from_vector(L, -d)).to_vector()
        fd = (Fp - Fm) / (2 * eps)
        assert np.max(np.abs(fd - Lmat[:, j])) < 1e-6


def test_F_equivariances(rng):
    u = band_state(L, 2e-3, rng)
    omega = 1.9
    th = 0.77
    a = OPS.grad_F(omega, torus_action_state(th, u)).to_vector()
    b = torus_action_state(th, OPS.grad_F(omega, u)).to_vector()
    assert np.max(np.abs(a - b)) < 1e-7
    for axis in (2, 3):
        a = OPS.grad_F(omega, reflect(u, axis)).to_vector()
        b = reflect(OPS.grad_F(omega, u), axis).to_vector()
        assert np.max(np.abs(a - b)) < 1e-7


def test_quasi_hamiltonian_identities(rng):
    # (1+h)^-2 d_psi H = X1 and -(1+h)^-2 d_h H = X2, via FD of H
    u = band_state(L, 2e-3, rng)
    d = band_state(L, 1.0, rng, decay=3.5)
    eps = 1e-5
    up = State.from_vector(L, u.to_vector() + eps * d.to_vector())
    um = State.from_vector(L, u.to_vector() - eps * d.to_vector())
    fd = (OPS.hamiltonian(up) - OPS.hamiltonian(um)) / (2 * eps)
    parts = OPS._pointwise(u)
    one_eta = parts[0]
    x1 = OPS.x1_values(u, parts)
    x2 = OPS.x2_values(u, parts)
    dh = synthesize(d.eta, OPS.grid).values
    dp = synthesize(d.beta, OPS.grid).values
    ana = float(OPS.grid.weights @ (one_eta**2 * (-x2 * dh + x1 * dp)))
    assert fd == pytest.approx(ana, rel=1e-5, abs=1e-10)


def test_orthogonality_residuals(rng):
    assert OPS.check_orthogonality(1.0, State.zeros(L)) == (0.0, 0.0)
    for _ in range(3):
        u = band_state(L, 2e-3, rng)
        omega = float(rng.uniform(0.5, 3.0))
        r1, r2 = OPS.check_orthogonality(omega, u)
        bound = 1e-6 * (1.0 + OPS.grad_F(omega, u).norm())
        assert abs(r1) <= bound and abs(r2) <= bound


# ---------------------------------------------------------------------------
# Poisson brackets
# ---------------------------------------------------------------------------

def test_poisson_brackets(rng):
    for _ in range(5):
        u = band_state(L, 2e-3, rng)
        assert abs(OPS.poisson_bracket("I", "B3", u)) < 1e-7
        assert OPS.poisson_bracket("I", "B1", u) == pytest.approx(
            -barycenter_momentum(u, OPS.grid)[1], abs=1e-7)
        assert OPS.poisson_bracket("I", "B2", u) == pytest.approx(
            barycenter_momentum(u, OPS.grid)[0], abs=1e-7)
        assert abs(OPS.poisson_bracket("V", "H", u)) < 1e-7
        assert abs(OPS.poisson_bracket("B3", "H", u)) < 1e-7
        assert abs(OPS.poisson_bracket("I", "H", u)) < 1e-7


def test_poisson_bracket_callable_handles(rng):
    u = band_state(L, 2e-3, rng)
    by_name = OPS.poisson_bracket("I", "B3", u)
    handle = lambda v: OPS.functional_gradients("B3", v)
    by_callable = OPS.poisson_bracket("I", handle, u)
    assert by_name == pytest.approx(by_callable, abs=1e-14)


def test_unknown_functional_rejected(rng):
    with pytest.raises(ValueError, match="unknown functional"):
        OPS.functional_gradients("Q", State.zeros(L))


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def test_equilibrium_is_stationary():
    log = evolve(State.zeros(L), OPS, dt=1e-2, t_end=0.1)
    d = log.drift()
    assert max(d.values()) < 1e-12


def test_mode_frequency():
    # linearized l=2 zonal mode: h'' = -sigma0 l(l+2)(l-1) h, omega = sqrt(8)
    u0 = State(SphCoeffs.delta(L, 2, 0, 1e-3), SphCoeffs.zeros(L))
    T = 2 * math.pi / math.sqrt(8.0)
    log = evolve(u0, OPS, dt=2e-3, t_end=T, snapshot_every=5, log_every=200)
    ts = np.array([t for t, _ in log.snapshots])
    series = np.array([u.eta[2, 0] for _, u in log.snapshots])
    # first zero crossing of the cosine is at a quarter period
    k = int(np.argmax(series < 0.0))
    t0, t1 = ts[k - 1], ts[k]
    s0, s1 = series[k - 1], series[k]
    t_cross = t0 - s0 * (t1 - t0) / (s1 - s0)
    omega_hat = (math.pi / 2) / t_cross
    assert omega_hat == pytest.approx(math.sqrt(8.0), rel=0.01)


def test_rk4_order_on_oscillation():
    # measurable-truncation regime: drift scales like dt^4, so halving dt
    # gains at least 12x (16x in the limit)
    u0 = State(SphCoeffs.delta(L, 2, 0, 0.05), SphCoeffs.zeros(L))
    T = 2 * math.pi / math.sqrt(8.0)
    d1 = max(evolve(u0, OPS, dt=0.02, t_end=T, log_every=5).drift().values())
    d2 = max(evolve(u0, OPS, dt=0.01, t_end=T, log_every=10).drift().values())
    assert d1 / d2 >= 12.0


def test_abort_on_graph_failure():
    # blow the drop far outside the graph regime; the integrator must stop
    # and return the partial log
    u0 = State(const_eta(-0.5), SphCoeffs.delta(L, 1, 0, 5.0))
    log = evolve(u0, OPS, dt=0.5, t_end=5.0)
    assert log.aborted is not None


def test_log_csv_and_snapshots(tmp_path, rng):
    u0 = State(SphCoeffs.delta(L, 2, 0, 1e-3), SphCoeffs.zeros(L))
    log = evolve(u0, OPS, dt=1e-2, t_end=0.05, snapshot_every=2)
    csv_path = tmp_path / "evolution.csv"
    log.write_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "t,dH,dV,dI,dB3"
    assert len(lines) == len(log.times) + 1
    snap_path = tmp_path / "snapshots.jsonl"
    log.write_snapshots(snap_path)
    import json
    rows = [json.loads(s) for s in snap_path.read_text().splitlines()]
    assert rows[0]["t"] == 0.0
    back = State.from_json_dict(rows[0]["state"])
    assert np.array_equal(back.to_vector(), u0.to_vector())
