"""Rotating traveling-wave computation.

Production path: a constrained Gauss-Newton solve over the unknowns
(eta, beta, omega).  Residual rows are the spectral coefficients of
F(omega, u), the angular-momentum constraint I(u) - a, a phase condition
fixing the representative along the rotation orbit, and two pinning rows
(beta_{0,0} = 0, eta_{1,0} = 0) that remove the mass/vertical-barycenter
degeneracies without excluding solutions: the orthogonality identities
satisfied by F make exactly those two combinations of residual rows
redundant, and the overdetermined least-squares step absorbs them.

Verification path mirroring the bifurcation analysis: solve the range
equation for w in W at fixed (omega, v in V), reduce to the scalar
function F(omega, v) = <Pi_{Z_N} F(omega, v + w), grad I(v + w)>, choose
omega(v) as its root, and recover the wave from the kernel predictor.
The two paths must agree at small amplitude.

Multiplicity is probed, not certified: multi-start scans group converged
points into rotation orbits and report a lower bound on the orbit count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .spherical import SphCoeffs, coeff_index, num_coeffs, rotation_generator
from .geometry import State, angular_momentum, torus_action_state
from .fields import FieldOperators, PhysicalParams
from .dn import DNOperator
from .resonance import ResonanceData, linearized_matrix


@dataclass(frozen=True)
class SolveConfig:
    """Everything a wave solve needs; defaults follow the desk scale."""

    sigma0: float = 1.0
    l0: int = 3
    m0: int = 2
    l_max: int = 8
    amplitudes: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    tol_F: float = 1e-9
    tol_constraint: float = 1e-11
    max_iter: int = 30
    symmetry: str = "none"           # none | Y2 | Y3 | Y23
    start_direction: tuple[float, ...] | None = None   # unit vector in V_N
    fd_step: float = 1e-6
    dn_l_ext_offset: int = 4
    dn_misfit_tol: float = 1e-6
    m_fold: int = 1                  # k-fold symmetry mask (1 = none)
    seed: int = 0

    def __post_init__(self):
        if self.symmetry not in ("none", "Y2", "Y3", "Y23"):
            raise ValueError(f"unknown symmetry restriction {self.symmetry!r}")
        if any(a <= 0 for a in self.amplitudes):
            raise ValueError("amplitudes must be positive")
        if self.tol_F <= 0 or self.tol_constraint <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class BranchPoint:
    """One converged point on a bifurcation branch."""

    a: float
    omega: float
    u: State
    residual: float
    constraint_residual: float
    angular_momentum: float
    volume: float
    barycenter3: float
    hamiltonian_sigma0: float
    iterations: int
    orthogonality: tuple[float, float]
    dn_misfit: float = 0.0
    max_forbidden: float = 0.0
    orthogonality_history: list = field(default_factory=list)

    def sobolev_norms(self, s: float = 2.0) -> tuple[float, float]:
        """(||eta||_{H^{s+3/2}}, ||beta||_{H^{s+1}})."""
        ells = np.array([ell for ell in range(self.u.l_max + 1)
                         for _ in range(2 * ell + 1)], dtype=float)
        ells = np.maximum(ells, 1.0)
        ne = float(np.linalg.norm(ells ** (s + 1.5) * self.u.eta.coeffs))
        nb = float(np.linalg.norm(ells ** (s + 1.0) * self.u.beta.coeffs))
        return ne, nb

    def to_json_dict(self) -> dict:
        ne, nb = self.sobolev_norms()
        return {
            "a": self.a, "omega": self.omega,
            "residual": self.residual,
            "constraint_residual": self.constraint_residual,
            "I": self.angular_momentum, "V": self.volume,
            "B3": self.barycenter3, "Hs0": self.hamiltonian_sigma0,
            "eta_norm": ne, "beta_norm": nb,
            "iterations": self.iterations,
            "orthogonality": list(self.orthogonality),
            "dn_misfit": self.dn_misfit,
            "state": self.u.to_json_dict(),
        }


class SolverError(RuntimeError):
    pass


def symmetry_masks(l_max: int, symmetry: str, m_fold: int = 1):
    """Boolean coefficient masks (eta_allowed, beta_allowed).

    Y3 keeps l - m even on both components; Y2 keeps eta even in x2
    (m >= 0) and beta odd in x2 (m < 0); k-fold keeps m multiples of k.
    """
    n = num_coeffs(l_max)
    eta = np.ones(n, dtype=bool)
    beta = np.ones(n, dtype=bool)
    for ell in range(l_max + 1):
        for m in range(-ell, ell + 1):
            k = coeff_index(ell, m)
            if symmetry in ("Y3", "Y23") and (ell - m) % 2 != 0:
                eta[k] = beta[k] = False
            if symmetry in ("Y2", "Y23"):
                if m < 0:
                    eta[k] = False
                if m >= 0:
                    beta[k] = False
            if m_fold > 1 and m % m_fold != 0:
                eta[k] = beta[k] = False
    return eta, beta


class WaveProblem:
    """Binds the discretization, the resonance data, and the solver config."""

    def __init__(self, cfg: SolveConfig):
        self.cfg = cfg
        self.data = ResonanceData.build(cfg.l0, cfg.m0, cfg.sigma0, cfg.l_max)
        l_ext = cfg.l_max + cfg.dn_l_ext_offset
        dn = DNOperator(cfg.l_max, l_ext=l_ext, misfit_tol=cfg.dn_misfit_tol,
                        cache_size=6)
        self.ops = FieldOperators(cfg.l_max, PhysicalParams(cfg.sigma0), dn=dn)
        self.mask_eta, self.mask_beta = symmetry_masks(
            cfg.l_max, cfg.symmetry, cfg.m_fold)
        self.n = num_coeffs(cfg.l_max)
        self._w_solver_cache: dict[float, tuple] = {}

    # -- packing -----------------------------------------------------------

    def pack(self, u: State, omega: float) -> np.ndarray:
        return np.concatenate([
            u.eta.coeffs[self.mask_eta], u.beta.coeffs[self.mask_beta], [omega]
        ])

    def unpack(self, z: np.ndarray) -> tuple[State, float]:
        ne = int(self.mask_eta.sum())
        nb = int(self.mask_beta.sum())
        eta = np.zeros(self.n)
        beta = np.zeros(self.n)
        eta[self.mask_eta] = z[:ne]
        beta[self.mask_beta] = z[ne:ne + nb]
        return State(SphCoeffs(self.cfg.l_max, eta),
                     SphCoeffs(self.cfg.l_max, beta)), float(z[-1])

    # -- residual ------------------------------------------------------------

    def _phase_tangent(self, u_ref: State) -> np.ndarray:
        tau = State(rotation_generator(u_ref.eta), rotation_generator(u_ref.beta))
        vec = tau.to_vector()
        masked = np.concatenate([vec[:self.n][self.mask_eta],
                                 vec[self.n:][self.mask_beta]])
        return masked

    def residual(self, z: np.ndarray, a: float, phase_ref) -> np.ndarray:
        u, omega = self.unpack(z)
        F = self.ops.grad_F(omega, u)
        rows = [F.eta.coeffs[self.mask_eta], F.beta.coeffs[self.mask_beta]]
        rows.append([angular_momentum(u, self.ops.grid) - a])
        z_ref, tau = phase_ref
        if tau is not None:
            rows.append([float((z[:-1] - z_ref) @ tau)])
        if self.mask_beta[coeff_index(0, 0)]:
            rows.append([u.beta[0, 0]])
        if self.mask_eta[coeff_index(1, 0)]:
            rows.append([u.eta[1, 0]])
        return np.concatenate(rows)

    def split_norms(self, r: np.ndarray) -> tuple[float, float]:
        """(||F part||, |constraint part|) of a residual vector."""
        nf = int(self.mask_eta.sum() + self.mask_beta.sum())
        return float(np.linalg.norm(r[:nf])), float(abs(r[nf]))

    def jacobian(self, z: np.ndarray, a: float, phase_ref, r0) -> np.ndarray:
        """Forward finite differences, beta/omega columns first so they reuse
        the cached Dirichlet factorization of the unperturbed shape."""
        m = len(z)
        J = np.empty((len(r0), m))
        ne = int(self.mask_eta.sum())
        order = list(range(ne, m)) + list(range(ne))
        for j in order:
            dz = self.cfg.fd_step * (1.0 + abs(z[j]))
            zp = z.copy()
            zp[j] += dz
            J[:, j] = (self.residual(zp, a, phase_ref) - r0) / dz
        return J

    # -- the production solve ------------------------------------------------

    def constrained_newton(self, a: float, start: tuple[State, float],
                           phase_anchor: State | None = None) -> BranchPoint:
        """Gauss-Newton least squares on the bordered system.

        ``start`` is the predictor (u, omega); the phase condition is
        anchored at ``phase_anchor`` (default: the predictor itself).
        """
        cfg = self.cfg
        u_start, omega_start = start
        anchor = phase_anchor if phase_anchor is not None else u_start
        tau = self._phase_tangent(anchor)
        if np.linalg.norm(tau) < 1e-14:
            tau_ref = None
        else:
            tau_ref = tau / np.linalg.norm(tau)
        z = self.pack(u_start, omega_start)
        phase_ref = (self.pack(anchor, 0.0)[:-1], tau_ref)
        r = self.residual(z, a, phase_ref)
        orth_hist = []

        def note_orthogonality(zz):
            uu, om = self.unpack(zz)
            orth_hist.append(self.ops.check_orthogonality(om, uu))

        note_orthogonality(z)
        # Near the bifurcation point every resonant pair beyond the followed
        # one leaves the Jacobian with O(a)-small singular values, and a full
        # least-squares step can overshoot along those directions; a bounded
        # number of nonmonotone accepts lets the iteration cross the ridge
        # instead of creeping along it.
        nonmonotone_budget = 3
        for it in range(cfg.max_iter):
            f_norm, c_norm = self.split_norms(r)
            if f_norm <= cfg.tol_F and c_norm <= cfg.tol_constraint:
                return self._make_point(z, a, it, f_norm, c_norm, orth_hist)
            J = self.jacobian(z, a, phase_ref, r)
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            r_norm = float(np.linalg.norm(r))
            accepted = False
            best = None
            t = 1.0
            for trial in range(6):
                z_try = z + t * step
                try:
                    r_try = self.residual(z_try, a, phase_ref)
                except ValueError:
                    t *= 0.5
                    continue
                nrm = float(np.linalg.norm(r_try))
                if best is None or nrm < best[0]:
                    best = (nrm, z_try, r_try)
                if nrm < r_norm:
                    z, r = z_try, r_try
                    accepted = True
                    break
                # crossing the ridge beats creeping along it: after two
                # failed trials take the better one and move on
                if (trial >= 1 and nonmonotone_budget > 0
                        and best[0] < 4.0 * r_norm):
                    nonmonotone_budget -= 1
                    _, z, r = best
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                raise SolverError(
                    f"line search stalled at a={a:g} "
                    f"(|F|={f_norm:.2e}, |I-a|={c_norm:.2e})")
            note_orthogonality(z)
        f_norm, c_norm = self.split_norms(r)
        if f_norm <= cfg.tol_F and c_norm <= cfg.tol_constraint:
            return self._make_point(z, a, cfg.max_iter, f_norm, c_norm, orth_hist)
        raise SolverError(
            f"no convergence at a={a:g} after {cfg.max_iter} iterations "
            f"(|F|={f_norm:.2e}, |I-a|={c_norm:.2e})")

    def _make_point(self, z: np.ndarray, a: float, iterations: int,
                    f_norm: float, c_norm: float,
                    orth_hist: list | None = None) -> BranchPoint:
        u, omega = self.unpack(z)
        ops = self.ops
        F_full = ops.grad_F(omega, u)
        forbidden = 0.0
        if not (self.mask_eta.all() and self.mask_beta.all()):
            forbidden = max(
                float(np.max(np.abs(F_full.eta.coeffs[~self.mask_eta]), initial=0.0)),
                float(np.max(np.abs(F_full.beta.coeffs[~self.mask_beta]), initial=0.0)),
            )
        _, report = ops.dn.apply(u.eta, u.beta)
        from .geometry import barycenter_momentum
        return BranchPoint(
            a=a, omega=omega, u=u,
            residual=f_norm, constraint_residual=c_norm,
            angular_momentum=angular_momentum(u, ops.grid),
            volume=ops.volume(u),
            barycenter3=float(barycenter_momentum(u, ops.grid)[2]),
            hamiltonian_sigma0=ops.hamiltonian_sigma0(u),
            iterations=iterations,
            orthogonality=ops.check_orthogonality(omega, u),
            dn_misfit=report.residual,
            max_forbidden=forbidden,
            orthogonality_history=orth_hist or [],
        )

    # -- predictors ----------------------------------------------------------

    def default_direction(self) -> np.ndarray:
        """Unit vector in V_N coordinates along the seed pair (l0, m0)."""
        idx = self.data.kernel_n_indices
        y = np.zeros(len(idx))
        y[idx.index((self.data.l0, self.data.m0))] = 1.0
        return y

    def predictor(self, a: float, direction: np.ndarray | None = None
                  ) -> tuple[State, float]:
        """Kernel predictor u = sqrt(a) Lambda y_hat, omega = omega0: the
        rescaling makes the quadratic momentum of the predictor equal a."""
        y = direction if direction is not None else self.default_direction()
        y = np.asarray(y, float)
        y = y / np.linalg.norm(y)
        v = self.data.from_kernel_coordinates(math.sqrt(a) * y, "N")
        return self.data.lambda_map(v), self.data.omega0

    # -- continuation ----------------------------------------------------------

    def branch_continue(self, direction: np.ndarray | None = None,
                        bisection_levels: int = 5) -> list[BranchPoint]:
        """Continue the branch over cfg.amplitudes with a secant predictor.

        A failed step triggers amplitude bisection (up to ``bisection_levels``);
        if the bisected step still fails, the partial branch is returned with
        the failure recorded on the exception.
        """
        cfg = self.cfg
        if direction is None and cfg.start_direction is not None:
            direction = np.asarray(cfg.start_direction, dtype=float)
        targets = sorted(cfg.amplitudes)
        points: list[BranchPoint] = []
        a_reached = 0.0
        queue = list(targets)
        level = 0
        while queue:
            a_next = queue[0]
            if len(points) >= 2:
                p1, p0 = points[-1], points[-2]
                s = (a_next - p1.a) / (p1.a - p0.a)
                u_pred = State.from_vector(
                    cfg.l_max,
                    p1.u.to_vector() + s * (p1.u.to_vector() - p0.u.to_vector()))
                om_pred = p1.omega + s * (p1.omega - p0.omega)
                anchor = p1.u
            elif len(points) == 1:
                scale = math.sqrt(a_next / points[-1].a)
                u_pred = State.from_vector(cfg.l_max,
                                           scale * points[-1].u.to_vector())
                om_pred = points[-1].omega
                anchor = points[-1].u
            else:
                u_pred, om_pred = self.predictor(a_next, direction)
                anchor = None
            try:
                pt = self.constrained_newton(a_next, (u_pred, om_pred),
                                             phase_anchor=anchor)
            except (SolverError, ValueError) as exc:
                if level >= bisection_levels:
                    err = SolverError(
                        f"branch stalled at a={a_next:g} after "
                        f"{bisection_levels} bisections: {exc}")
                    err.partial = points
                    raise err from exc
                level += 1
                a_mid = 0.5 * (a_reached + a_next) if a_reached > 0 else a_next / 2
                queue.insert(0, a_mid)
                continue
            level = 0
            points.append(pt)
            a_reached = pt.a
            queue.pop(0)   # bisection midpoints are inserted at the front
        return points

    # -- Lyapunov-Schmidt verification path -----------------------------------

    def _w_solver(self, omega: float):
        """Least-squares inverse of L_omega restricted to the truncated W."""
        key = round(omega, 14)
        hit = self._w_solver_cache.get(key)
        if hit is not None:
            return hit
        n2 = 2 * self.n
        L = linearized_matrix(omega, self.cfg.sigma0, self.cfg.l_max)
        B = np.stack([b.to_vector() for b in self.data.kernel_basis("all")])
        proj = np.eye(n2) - B.T @ B
        ew, evec = np.linalg.eigh(proj)
        Wbasis = evec[:, ew > 0.5]
        A = proj @ (L @ Wbasis)
        pinv = np.linalg.pinv(A, rcond=1e-12)
        entry = (Wbasis, pinv)
        self._w_solver_cache[key] = entry
        return entry

    def range_solve(self, omega: float, v: State, w0: State | None = None,
                    max_iter: int = 60) -> State:
        """Solve Pi_W F(omega, v + w) = 0 for w in W by chord Newton with
        the linearized operator at u = 0 (the contraction of the analysis)."""
        Wbasis, pinv = self._w_solver(omega)
        w_vec = (w0.to_vector() if w0 is not None
                 else np.zeros(2 * self.n))
        tol = self.cfg.tol_F
        for _ in range(max_iter):
            u = State.from_vector(self.cfg.l_max, v.to_vector() + w_vec)
            F = self.ops.grad_F(omega, u)
            Fw = self.data.project(F, "W").to_vector()
            if np.linalg.norm(Fw) <= tol:
                return State.from_vector(self.cfg.l_max, w_vec)
            w_vec = w_vec - Wbasis @ (pinv @ Fw)
        raise SolverError(
            f"range equation did not converge (|Pi_W F| = "
            f"{np.linalg.norm(Fw):.2e}); outside the contraction basin?")

    def scalar_reduction_F(self, omega: float, v: State,
                           w0: State | None = None) -> tuple[float, State]:
        """F(omega, v) = <Pi_{Z_N} F(omega, v+w), grad I(v+w)> and the w used."""
        w = self.range_solve(omega, v, w0=w0)
        u = State.from_vector(self.cfg.l_max, v.to_vector() + w.to_vector())
        F = self.ops.grad_F(omega, u)
        fzn = self.data.project(F, "Z_N")
        grad_i = self._grad_I(u)
        return float(fzn.to_vector() @ grad_i.to_vector()), w

    def _grad_I(self, u: State) -> State:
        """L2 gradient of the angular momentum at u, as coefficients."""
        from .spherical import GridField, analyze
        grid = self.ops.grid
        dh, dpsi = self.ops.functional_gradients("I", u)
        return State(analyze(GridField(grid, dh), self.cfg.l_max),
                     analyze(GridField(grid, dpsi), self.cfg.l_max))

    def omega_of_v(self, v: State, tol: float = 1e-11,
                   max_iter: int = 40) -> tuple[float, State]:
        """Root of F(., v) near omega0 by a secant iteration."""
        om0 = self.data.omega0
        dom = 1e-4 * max(v.norm(), 1e-6)
        om1 = om0 + dom
        f0, w = self.scalar_reduction_F(om0, v)
        f1, w = self.scalar_reduction_F(om1, v, w0=w)
        for _ in range(max_iter):
            if f1 == f0:
                break
            om2 = om1 - f1 * (om1 - om0) / (f1 - f0)
            if not (abs(om2 - self.data.omega0) < 1.0):
                raise SolverError("omega(v) iteration left the basin")
            if abs(om2 - om1) <= tol:
                om1 = om2
                break
            om0, f0 = om1, f1
            f1, w = self.scalar_reduction_F(om2, v, w0=w)
            om1 = om2
        w = self.range_solve(om1, v, w0=w)
        return om1, w

    def ls_wave(self, a: float, direction: np.ndarray | None = None
                ) -> tuple[float, State]:
        """Wave by the reduction path: v = (1+mu) Lambda (sqrt(a) y_hat) with
        mu chosen so that I(v + w(omega(v), v)) = a, omega = omega(v)."""
        y = direction if direction is not None else self.default_direction()
        y = np.asarray(y, float)
        y = y / np.linalg.norm(y)
        base = self.data.lambda_map(
            self.data.from_kernel_coordinates(math.sqrt(a) * y, "N"))

        def momentum_error(mu: float):
            v = State.from_vector(self.cfg.l_max, (1.0 + mu) * base.to_vector())
            omega, w = self.omega_of_v(v)
            u = State.from_vector(self.cfg.l_max, v.to_vector() + w.to_vector())
            return angular_momentum(u, self.ops.grid) - a, (omega, u)

        mu0, mu1 = 0.0, 0.05
        g0, out = momentum_error(mu0)
        g1, out = momentum_error(mu1)
        for _ in range(30):
            if abs(g1) <= self.cfg.tol_constraint:
                break
            mu2 = mu1 - g1 * (mu1 - mu0) / (g1 - g0)
            mu0, g0 = mu1, g1
            mu1 = mu2
            g1, out = momentum_error(mu1)
        else:
            raise SolverError("reduction-path momentum fit did not converge")
        return out

    # -- multi-start orbit scan ------------------------------------------------

    def orbit_scan(self, a: float, n_starts: int,
                   workers: int = 1) -> list[list[BranchPoint]]:
        """Multi-start solves at fixed amplitude, grouped into rotation orbits.

        Start directions are drawn up front from the config seed and the
        classification runs in start order, so the result is deterministic
        regardless of the worker count.  Returns the orbit classes (each a
        list of converged points); the class count is a lower bound on the
        number of distinct orbits.
        """
        rng = np.random.default_rng(self.cfg.seed)
        dim = len(self.data.kernel_n_indices)
        dirs = rng.standard_normal((n_starts, dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]

        def attempt(problem: "WaveProblem", y: np.ndarray):
            try:
                return problem.constrained_newton(a, problem.predictor(a, y))
            except (SolverError, ValueError):
                return None

        if workers <= 1:
            results = [attempt(self, y) for y in dirs]
        else:
            import threading
            from concurrent.futures import ThreadPoolExecutor
            local = threading.local()

            def work(y):
                # independent WaveProblem per worker thread: the Dirichlet
                # factorization cache is not shared safely
                if not hasattr(local, "prob"):
                    local.prob = WaveProblem(self.cfg)
                return attempt(local.prob, y)

            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(work, dirs))

        classes: list[list[BranchPoint]] = []
        for pt in results:
            if pt is None:
                continue
            for cls in classes:
                if self._same_orbit(cls[0], pt):
                    cls.append(pt)
                    break
            else:
                classes.append([pt])
        return classes

    def _orbit_invariants(self, pt: BranchPoint) -> np.ndarray:
        """Rotation-invariant fingerprint: Hsigma0 plus the (l, |m|) moduli
        profile of both components."""
        prof = [pt.hamiltonian_sigma0]
        for comp in (pt.u.eta.coeffs, pt.u.beta.coeffs):
            for ell in range(self.cfg.l_max + 1):
                for m in range(ell + 1):
                    cp = comp[coeff_index(ell, m)]
                    cn = comp[coeff_index(ell, -m)] if m > 0 else 0.0
                    prof.append(math.hypot(cp, cn))
        return np.asarray(prof)

    def _same_orbit(self, p1: BranchPoint, p2: BranchPoint,
                    tol: float = 1e-8) -> bool:
        i1, i2 = self._orbit_invariants(p1), self._orbit_invariants(p2)
        if np.max(np.abs(i1 - i2)) > tol * (1.0 + np.max(np.abs(i1))):
            return False
        theta = self.fit_rotation(p1.u, p2.u)
        d = torus_action_state(theta, p1.u) - p2.u
        return d.norm() <= 1e-7 * (1.0 + p1.u.norm())

    def fit_rotation(self, u1: State, u2: State, samples: int = 720) -> float:
        """Angle minimizing ||T_theta u1 - u2|| (coarse scan + refinement)."""
        thetas = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
        def dist(th):
            return (torus_action_state(th, u1) - u2).norm()
        vals = [dist(th) for th in thetas]
        k = int(np.argmin(vals))
        lo = thetas[k] - 2.0 * math.pi / samples
        hi = thetas[k] + 2.0 * math.pi / samples
        golden = (math.sqrt(5.0) - 1.0) / 2.0
        c = hi - golden * (hi - lo)
        d = lo + golden * (hi - lo)
        for _ in range(60):
            if dist(c) < dist(d):
                hi = d
            else:
                lo = c
            c = hi - golden * (hi - lo)
            d = lo + golden * (hi - lo)
        return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Branch output
# ---------------------------------------------------------------------------

def write_branch_jsonl(points: list[BranchPoint], path) -> None:
    with open(path, "w") as fh:
        for pt in points:
            fh.write(json.dumps(pt.to_json_dict()) + "\n")


def write_branch_csv(points: list[BranchPoint], path) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["a", "omega", "eta_norm", "beta_norm", "Hs0", "residual"])
        for pt in points:
            ne, nb = pt.sobolev_norms()
            wr.writerow([f"{pt.a:.12g}", f"{pt.omega:.12g}", f"{ne:.12g}",
                         f"{nb:.12g}", f"{pt.hamiltonian_sigma0:.12g}",
                         f"{pt.residual:.3e}"])


def read_branch_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
