"""Nonlinear vector fields, energy functionals, and time evolution.

The evolution system for the drop is

    d/dt h   = X1(h, psi),
    d/dt psi = X2(h, psi) + 2*sigma0,

with

    X1 = (J / (1+h)) G(h) psi,
    X2 = (1/2) (G(h)psi + <grad psi, grad h> / ((1+h) J))^2
         - |grad psi|^2 / (2 (1+h)^2) - sigma0 H(h),

J the metric factor and H the mean curvature; the constant 2*sigma0 makes
the sphere (0, 0) an equilibrium (H(0) = 2).  The same assembly gives the
rotating-wave operator

    F1 = -(1+eta)^2 (X2 + 2 sigma0 - omega M beta),
    F2 =  (1+eta)^2 (X1 - omega M eta),

which is the L2 gradient of Hsigma0 - omega*I, so rotating traveling waves
are the zeros of F at fixed angular velocity omega.

All pointwise products are evaluated on the doubled working grid and the
results truncated back to the degree cap.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .spherical import (
    GridField,
    QuadGrid,
    SphCoeffs,
    analyze,
    coeff_index,
    hessian_quadratic_form,
    laplace_beltrami,
    synthesize,
    tangential_gradient,
)
from .geometry import (
    State,
    check_graph_condition,
    rotation_derivative_values,
    work_grid,
)
from .dn import DNOperator, dn_operator


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the drop problem."""

    sigma0: float = 1.0

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("capillarity coefficient sigma0 must be positive")


class FieldOperators:
    """Evaluator bundle for one (L_max, sigma0) discretization.

    Holds the working grid for nonlinear products and the Dirichlet-Neumann
    operator; every method is a pure function of its State argument.
    """

    def __init__(self, l_max: int, params: PhysicalParams = PhysicalParams(),
                 dn: DNOperator | None = None, grid: QuadGrid | None = None):
        self.l_max = l_max
        self.params = params
        self.sigma0 = params.sigma0
        self.grid = grid or work_grid(l_max)
        self.dn = dn or dn_operator(l_max)

    # -- pointwise kitchen ---------------------------------------------------

    def _pointwise(self, u: State):
        """Common node values: (1+eta), grad eta, grad psi, J, G values."""
        grid = self.grid
        one_eta = check_graph_condition(u.eta, grid)
        ge = tangential_gradient(u.eta, grid).values
        gb = tangential_gradient(u.beta, grid).values
        J = np.sqrt(one_eta**2 + np.einsum("qc,qc->q", ge, ge))
        g_coeffs, report = self.dn.apply(u.eta, u.beta)
        g_vals = synthesize(g_coeffs, grid).values
        return one_eta, ge, gb, J, g_vals, report

    def x1_values(self, u: State, parts=None) -> np.ndarray:
        one_eta, ge, gb, J, g_vals, _ = parts or self._pointwise(u)
        return (J / one_eta) * g_vals

    def x2_values(self, u: State, parts=None) -> np.ndarray:
        one_eta, ge, gb, J, g_vals, _ = parts or self._pointwise(u)
        dot = np.einsum("qc,qc->q", gb, ge)
        sq = g_vals + dot / (one_eta * J)
        grad_b2 = np.einsum("qc,qc->q", gb, gb)
        Hvals = self._mean_curvature_values(u.eta, one_eta, ge, J)
        return 0.5 * sq**2 - grad_b2 / (2.0 * one_eta**2) - self.sigma0 * Hvals

    def _mean_curvature_values(self, eta: SphCoeffs, one_eta, ge, J) -> np.ndarray:
        grad2 = np.einsum("qc,qc->q", ge, ge)
        lap = synthesize(laplace_beltrami(eta), self.grid).values
        hess = hessian_quadratic_form(eta, self.grid).values
        return (-lap / (one_eta * J) + 2.0 / J
                + hess / (one_eta * J**3) + grad2 / J**3)

    def field_X1(self, u: State) -> SphCoeffs:
        return analyze(GridField(self.grid, self.x1_values(u)), self.l_max)

    def field_X2(self, u: State) -> SphCoeffs:
        return analyze(GridField(self.grid, self.x2_values(u)), self.l_max)

    # -- energies --------------------------------------------------------

    def hamiltonian(self, u: State) -> float:
        """Kinetic plus capillary energy:
        (1/2) int psi G(h)psi (1+h) J + sigma0 int (1+h) J."""
        one_eta, ge, gb, J, g_vals, _ = self._pointwise(u)
        w = self.grid.weights
        psi_vals = synthesize(u.beta, self.grid).values
        kinetic = 0.5 * float(w @ (psi_vals * g_vals * one_eta * J))
        area = float(w @ (one_eta * J))
        return kinetic + self.sigma0 * area

    def volume(self, u: State) -> float:
        one_eta = check_graph_condition(u.eta, self.grid)
        return float(self.grid.weights @ one_eta**3) / 3.0

    def hamiltonian_sigma0(self, u: State) -> float:
        return self.hamiltonian(u) - 2.0 * self.sigma0 * self.volume(u)

    # -- the rotating-wave operator ---------------------------------------

    def grad_F_values(self, omega: float, u: State, parts=None):
        parts = parts or self._pointwise(u)
        one_eta, ge, gb, J, g_vals, _ = parts
        x1 = self.x1_values(u, parts)
        x2 = self.x2_values(u, parts)
        m_eta = rotation_derivative_values(u.eta, self.grid)
        m_beta = rotation_derivative_values(u.beta, self.grid)
        f1 = -one_eta**2 * (x2 + 2.0 * self.sigma0 - omega * m_beta)
        f2 = one_eta**2 * (x1 - omega * m_eta)
        return f1, f2

    def grad_F(self, omega: float, u: State) -> State:
        """F(omega, u) = grad(Hsigma0 - omega*I), as a coefficient pair."""
        f1, f2 = self.grad_F_values(omega, u)
        return State(
            analyze(GridField(self.grid, f1), self.l_max),
            analyze(GridField(self.grid, f2), self.l_max),
        )

    def field_F0(self, omega: float, u: State) -> State:
        """The system-convention operator (omega M eta - X1, omega M beta - X2)."""
        parts = self._pointwise(u)
        x1 = self.x1_values(u, parts)
        x2 = self.x2_values(u, parts)
        m_eta = rotation_derivative_values(u.eta, self.grid)
        m_beta = rotation_derivative_values(u.beta, self.grid)
        return State(
            analyze(GridField(self.grid, omega * m_eta - x1), self.l_max),
            analyze(GridField(self.grid, omega * m_beta - x2), self.l_max),
        )

    def check_orthogonality(self, omega: float, u: State) -> tuple[float, float]:
        """Residuals of the structural orthogonality of F against (0, 1) and
        against (x3, 0) - (1+eta)^{-1} ((grad eta)_3, (grad beta)_3);
        both vanish for the continuum operator at every (omega, u)."""
        parts = self._pointwise(u)
        one_eta, ge, gb, J, g_vals, _ = parts
        f1, f2 = self.grad_F_values(omega, u, parts)
        w = self.grid.weights
        r1 = float(w @ f2)
        x3 = self.grid.nodes[:, 2]
        r2 = float(w @ (f1 * (x3 - ge[:, 2] / one_eta)) - w @ (f2 * gb[:, 2] / one_eta))
        return r1, r2

    # -- L2 gradients of the prime integrals ------------------------------

    def functional_gradients(self, name: str, u: State):
        """Pointwise (d_h A, d_psi A) of a named functional.

        H uses the quasi-Hamiltonian identities d_psi H = (1+h)^2 X1 and
        d_h H = -(1+h)^2 X2; V, I, B have closed forms.
        """
        grid = self.grid
        one_eta = check_graph_condition(u.eta, grid)
        if name == "V":
            return one_eta**2, np.zeros(grid.size)
        if name == "I":
            m_eta = rotation_derivative_values(u.eta, grid)
            m_beta = rotation_derivative_values(u.beta, grid)
            return -(one_eta**2) * m_beta, one_eta**2 * m_eta
        if name in ("B1", "B2", "B3"):
            k = {"B1": 0, "B2": 1, "B3": 2}[name]
            ge = tangential_gradient(u.eta, grid).values
            gb = tangential_gradient(u.beta, grid).values
            dh = one_eta * gb[:, k]
            dpsi = grid.nodes[:, k] * one_eta**2 - one_eta * ge[:, k]
            return dh, dpsi
        if name in ("H", "Hs0"):
            parts = self._pointwise(u)
            x1 = self.x1_values(u, parts)
            x2 = self.x2_values(u, parts)
            dh = -(one_eta**2) * x2
            dpsi = one_eta**2 * x1
            if name == "Hs0":
                dh = dh - 2.0 * self.sigma0 * one_eta**2
            return dh, dpsi
        raise ValueError(f"unknown functional {name!r}")

    def poisson_bracket(self, a, b, u: State) -> float:
        """{A, B}(u) = <d_h A, (1+h)^-2 d_psi B> - <d_psi A, (1+h)^-2 d_h B>.

        ``a`` and ``b`` are functional names ("H", "Hs0", "V", "I", "B1",
        "B2", "B3") or callables u -> (d_h values, d_psi values).
        """
        grid = self.grid
        one_eta = check_graph_condition(u.eta, grid)
        ah, apsi = a(u) if callable(a) else self.functional_gradients(a, u)
        bh, bpsi = b(u) if callable(b) else self.functional_gradients(b, u)
        w = grid.weights / one_eta**2
        return float(w @ (ah * bpsi) - w @ (apsi * bh))

    # -- time evolution ----------------------------------------------------

    def rhs(self, u: State) -> np.ndarray:
        """Right-hand side of the evolution system, stacked coefficients."""
        parts = self._pointwise(u)
        x1 = analyze(GridField(self.grid, self.x1_values(u, parts)), self.l_max)
        x2 = analyze(GridField(self.grid, self.x2_values(u, parts)), self.l_max)
        x2.coeffs[coeff_index(0, 0)] += 2.0 * self.sigma0 * math.sqrt(4.0 * math.pi)
        return np.concatenate([x1.coeffs, x2.coeffs])


@dataclass
class EvolutionLog:
    """Trajectory record: times, conserved-quantity drifts, snapshots."""

    dt: float
    times: list[float] = field(default_factory=list)
    hs0: list[float] = field(default_factory=list)
    vol: list[float] = field(default_factory=list)
    ang: list[float] = field(default_factory=list)
    bar3: list[float] = field(default_factory=list)
    snapshots: list[tuple[float, State]] = field(default_factory=list)
    aborted: str | None = None

    def drift(self) -> dict[str, float]:
        """Largest relative drift of each quantity over the whole run,
        measured against 1 + |initial value|."""
        out = {}
        for name, series in (("Hs0", self.hs0), ("V", self.vol),
                             ("I", self.ang), ("B3", self.bar3)):
            ref = series[0]
            dev = max(abs(v - ref) for v in series)
            out[name] = dev / (1.0 + abs(ref))
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "dH", "dV", "dI", "dB3"])
            for i, t in enumerate(self.times):
                wr.writerow([
                    f"{t:.12g}",
                    f"{self.hs0[i] - self.hs0[0]:.17g}",
                    f"{self.vol[i] - self.vol[0]:.17g}",
                    f"{self.ang[i] - self.ang[0]:.17g}",
                    f"{self.bar3[i] - self.bar3[0]:.17g}",
                ])

    def write_snapshots(self, path) -> None:
        with open(path, "w") as fh:
            for t, u in self.snapshots:
                fh.write(json.dumps({"t": t, "state": u.to_json_dict()}) + "\n")


def evolve(u0: State, ops: FieldOperators, dt: float, t_end: float,
           snapshot_every: int = 0, log_every: int = 1) -> EvolutionLog:
    """Classical fixed-step RK4 on the evolution system.

    Conserved quantities are recorded every ``log_every`` accepted steps
    (and at the endpoints); coefficient snapshots every ``snapshot_every``
    steps when positive.  If the graph condition or the Dirichlet solve
    fails mid-run the partial log is returned with ``aborted`` set.
    """
    from .geometry import angular_momentum, barycenter_momentum

    l_max = u0.l_max
    n_steps = int(round(t_end / dt))
    log = EvolutionLog(dt=dt)

    def record(t: float, u: State):
        log.times.append(t)
        log.hs0.append(ops.hamiltonian_sigma0(u))
        log.vol.append(ops.volume(u))
        log.ang.append(angular_momentum(u, ops.grid))
        log.bar3.append(float(barycenter_momentum(u, ops.grid)[2]))

    y = u0.to_vector().copy()
    record(0.0, u0)
    if snapshot_every > 0:
        log.snapshots.append((0.0, u0.copy()))
    for k in range(n_steps):
        t = k * dt
        try:
            k1 = ops.rhs(State.from_vector(l_max, y))
            k2 = ops.rhs(State.from_vector(l_max, y + 0.5 * dt * k1))
            k3 = ops.rhs(State.from_vector(l_max, y + 0.5 * dt * k2))
            k4 = ops.rhs(State.from_vector(l_max, y + dt * k3))
        except ValueError as exc:
            log.aborted = f"step {k} (t={t:.6g}): {exc}"
            break
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u = State.from_vector(l_max, y)
        t_next = (k + 1) * dt
        if (k + 1) % log_every == 0 or k == n_steps - 1:
            record(t_next, u)
        if snapshot_every > 0 and (k + 1) % snapshot_every == 0:
            log.snapshots.append((t_next, u.copy()))
    return log
