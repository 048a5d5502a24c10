"""Geometric functionals and group actions on drop states.

A drop state is a pair u = (eta, beta): the boundary of the drop is the
radial graph {(1 + eta(x)) x : x in S2} (graph condition 1 + eta > 0), and
beta is the trace of the velocity potential pulled back to S2.

Nonlinear pointwise quantities (metric factor, curvature, the conserved
functionals) are evaluated on a working grid sized for twice the coefficient
degree, so that cubic/quartic products of band-limited fields are integrated
exactly; results that return coefficients are truncated back to the state's
degree cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .spherical import (
    GridField,
    QuadGrid,
    SphCoeffs,
    analyze,
    coeff_index,
    eval_harmonics_all,
    laplace_beltrami,
    hessian_quadratic_form,
    num_coeffs,
    synthesize,
    synthesize_at,
    tangential_gradient,
)


class GraphConditionError(ValueError):
    """The surface is not a radial graph: 1 + eta <= 0 somewhere."""


@dataclass
class State:
    """Elevation/potential pair (eta, beta) sharing one degree cap."""

    eta: SphCoeffs
    beta: SphCoeffs

    def __post_init__(self):
        if self.eta.l_max != self.beta.l_max:
            raise ValueError("eta and beta must share L_max")

    @property
    def l_max(self) -> int:
        return self.eta.l_max

    @classmethod
    def zeros(cls, l_max: int) -> "State":
        return cls(SphCoeffs.zeros(l_max), SphCoeffs.zeros(l_max))

    @classmethod
    def from_vector(cls, l_max: int, vec: np.ndarray) -> "State":
        n = num_coeffs(l_max)
        return cls(SphCoeffs(l_max, vec[:n].copy()), SphCoeffs(l_max, vec[n:].copy()))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.eta.coeffs, self.beta.coeffs])

    def copy(self) -> "State":
        return State(self.eta.copy(), self.beta.copy())

    def norm(self) -> float:
        """L2 x L2 norm (= Euclidean norm of the stacked coefficients)."""
        return float(np.linalg.norm(self.to_vector()))

    def dot(self, other: "State") -> float:
        return float(self.to_vector() @ other.to_vector())

    def __add__(self, other: "State") -> "State":
        return State.from_vector(self.l_max, self.to_vector() + other.to_vector())

    def __sub__(self, other: "State") -> "State":
        return State.from_vector(self.l_max, self.to_vector() - other.to_vector())

    def __mul__(self, s: float) -> "State":
        return State.from_vector(self.l_max, s * self.to_vector())

    __rmul__ = __mul__

    def to_json_dict(self) -> dict:
        return {"eta": self.eta.to_json_dict(), "beta": self.beta.to_json_dict()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "State":
        return cls(SphCoeffs.from_json_dict(d["eta"]), SphCoeffs.from_json_dict(d["beta"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "State":
        return cls.from_json_dict(json.loads(s))


@dataclass(frozen=True)
class Translation:
    """Translation vector for the drop, |alpha| < 1/4."""

    alpha: tuple[float, float, float]

    def __post_init__(self):
        if len(self.alpha) != 3:
            raise ValueError("alpha must be a 3-vector")
        if np.linalg.norm(self.alpha) >= 0.25:
            raise ValueError("|alpha| must be < 1/4")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)


# ---------------------------------------------------------------------------
# Working grids (memoized per degree; immutable once built)
# ---------------------------------------------------------------------------

_GRIDS: dict[tuple[int, int], QuadGrid] = {}


def work_grid(l_max: int, dealias: int = 2) -> QuadGrid:
    """Shared quadrature grid resolving degree dealias*l_max products."""
    key = (l_max, dealias)
    if key not in _GRIDS:
        _GRIDS[key] = QuadGrid.for_degree(l_max, dealias=dealias)
    return _GRIDS[key]


def check_graph_condition(eta: SphCoeffs, grid: QuadGrid | None = None) -> np.ndarray:
    """Return 1 + eta at the nodes; raise if it is not positive."""
    grid = grid or work_grid(eta.l_max)
    one_eta = 1.0 + synthesize(eta, grid).values
    if np.min(one_eta) <= 0.0:
        raise GraphConditionError(
            f"graph condition violated: min(1 + eta) = {np.min(one_eta):.3e}"
        )
    return one_eta


# ---------------------------------------------------------------------------
# Pointwise geometric quantities
# ---------------------------------------------------------------------------

def metric_factor_J(eta: SphCoeffs, grid: QuadGrid | None = None) -> GridField:
    """J = sqrt((1+eta)^2 + |grad_S2 eta|^2) at the nodes."""
    grid = grid or work_grid(eta.l_max)
    one_eta = check_graph_condition(eta, grid)
    gr = tangential_gradient(eta, grid).values
    J = np.sqrt(one_eta**2 + np.einsum("qc,qc->q", gr, gr))
    return GridField(grid, J)


def mean_curvature(eta: SphCoeffs, grid: QuadGrid | None = None,
                   j_floor: float = 1e-6) -> GridField:
    """Mean curvature H of the graph surface, assembled pointwise:

        H = -lap_S2 eta / ((1+eta) J) + 2/J
            + <(D2_S2 eta) grad eta, grad eta> / ((1+eta) J^3)
            + |grad eta|^2 / J^3.

    H(0) = 2, the mean curvature of the unit sphere.
    """
    grid = grid or work_grid(eta.l_max)
    one_eta = check_graph_condition(eta, grid)
    gr = tangential_gradient(eta, grid).values
    grad2 = np.einsum("qc,qc->q", gr, gr)
    J = np.sqrt(one_eta**2 + grad2)
    if np.min(J) < j_floor:
        raise GraphConditionError(f"degenerate surface: min J = {np.min(J):.3e}")
    lap = synthesize(laplace_beltrami(eta), grid).values
    hess = hessian_quadratic_form(eta, grid).values
    H = (-lap / (one_eta * J) + 2.0 / J
         + hess / (one_eta * J**3) + grad2 / J**3)
    return GridField(grid, H)


# ---------------------------------------------------------------------------
# Conserved functionals
# ---------------------------------------------------------------------------

def volume(eta: SphCoeffs, grid: QuadGrid | None = None) -> float:
    """Fluid volume (1/3) int (1+eta)^3 dsigma."""
    grid = grid or work_grid(eta.l_max)
    one_eta = check_graph_condition(eta, grid)
    return float(grid.weights @ one_eta**3) / 3.0


def rotation_derivative_values(c: SphCoeffs, grid: QuadGrid) -> np.ndarray:
    """M c = <J x, grad_S2 c> at the nodes (J the rotation generator matrix)."""
    gr = tangential_gradient(c, grid).values
    x = grid.nodes
    return x[:, 0] * gr[:, 1] - x[:, 1] * gr[:, 0]


def angular_momentum(u: State, grid: QuadGrid | None = None,
                     cross_check_tol: float = 1e-9) -> float:
    """Angular momentum about x3: int (1+eta)^2 (M eta) beta dsigma.

    Also evaluated through the equivalent form -(1/3) int (1+eta)^3 M beta;
    the two quadratures must agree (antisymmetry of M), which guards the
    gradient tables on every call.
    """
    grid = grid or work_grid(u.l_max)
    one_eta = check_graph_condition(u.eta, grid)
    meta = rotation_derivative_values(u.eta, grid)
    beta_vals = synthesize(u.beta, grid).values
    primary = float(grid.weights @ (one_eta**2 * meta * beta_vals))
    mbeta = rotation_derivative_values(u.beta, grid)
    alternate = -float(grid.weights @ (one_eta**3 * mbeta)) / 3.0
    scale = 1.0 + abs(primary)
    if abs(primary - alternate) > cross_check_tol * scale:
        raise AssertionError(
            f"angular momentum forms disagree: {primary} vs {alternate}"
        )
    return primary


def barycenter_momentum(u: State, grid: QuadGrid | None = None,
                        cross_check_tol: float = 1e-9) -> np.ndarray:
    """(1/2) int (1+eta)^2 grad_S2 beta dsigma, the barycenter velocity
    times the volume.  Cross-checked against the divergence-theorem form
    int x (1+eta)^2 beta - int (1+eta) beta grad_S2 eta.
    """
    grid = grid or work_grid(u.l_max)
    one_eta = check_graph_condition(u.eta, grid)
    gb = tangential_gradient(u.beta, grid).values
    primary = 0.5 * (grid.weights[:, None] * gb * one_eta[:, None] ** 2).sum(axis=0)
    beta_vals = synthesize(u.beta, grid).values
    ge = tangential_gradient(u.eta, grid).values
    alt = (grid.weights[:, None] * grid.nodes * (one_eta**2 * beta_vals)[:, None]).sum(axis=0)
    alt -= (grid.weights[:, None] * ge * (one_eta * beta_vals)[:, None]).sum(axis=0)
    scale = 1.0 + np.linalg.norm(primary)
    if np.linalg.norm(primary - alt) > cross_check_tol * scale:
        raise AssertionError(f"barycenter forms disagree: {primary} vs {alt}")
    return primary


# ---------------------------------------------------------------------------
# Group actions
# ---------------------------------------------------------------------------

def torus_action(theta: float, c: SphCoeffs) -> SphCoeffs:
    """Composition with the rotation R(theta) about x3, in coefficients.

    Acts as a 2x2 rotation with angle m*theta on each (l, m)/(l, -m) pair;
    the coefficient norm is preserved.
    """
    out = c.copy()
    for m in range(1, c.l_max + 1):
        cm, sm = math.cos(m * theta), math.sin(m * theta)
        for ell in range(m, c.l_max + 1):
            kp, kn = coeff_index(ell, m), coeff_index(ell, -m)
            a, b = c.coeffs[kp], c.coeffs[kn]
            out.coeffs[kp] = cm * a + sm * b
            out.coeffs[kn] = -sm * a + cm * b
    return out


def torus_action_state(theta: float, u: State) -> State:
    return State(torus_action(theta, u.eta), torus_action(theta, u.beta))


def reflect(u: State, axis: int) -> State:
    """Reflection actions Y2 (x2 -> -x2, beta sign flipped) and
    Y3 (x3 -> -x3), realized spectrally through the harmonics' parity:
    phi_{l,m}(x1,x2,-x3) = (-1)^(l-m) phi_{l,m} and
    phi_{l,m}(x1,-x2,x3) = sign(m) phi_{l,m} (with sign(m>=0) = +1).
    Both are involutions.
    """
    if axis not in (2, 3):
        raise ValueError("axis must be 2 or 3")
    eta, beta = u.eta.copy(), u.beta.copy()
    for ell in range(u.l_max + 1):
        for m in range(-ell, ell + 1):
            k = coeff_index(ell, m)
            if axis == 3:
                s = -1.0 if (ell - m) % 2 else 1.0
                eta.coeffs[k] *= s
                beta.coeffs[k] *= s
            else:
                s = 1.0 if m >= 0 else -1.0
                eta.coeffs[k] *= s
                beta.coeffs[k] *= -s
    return State(eta, beta)


# ---------------------------------------------------------------------------
# Translation reparametrization
# ---------------------------------------------------------------------------

def check_w1inf_bound(h: SphCoeffs, bound: float = 1.0 / 6.0,
                      grid: QuadGrid | None = None) -> float:
    """Grid surrogate for ||h||_{W^{1,inf}} = sup(|h| + |grad h|)."""
    grid = grid or work_grid(h.l_max)
    hv = synthesize(h, grid).values
    gv = tangential_gradient(h, grid).values
    val = float(np.max(np.abs(hv) + np.linalg.norm(gv, axis=1)))
    if val >= bound:
        raise ValueError(
            f"W^(1,inf) norm surrogate {val:.4f} exceeds the bound {bound:.4f} "
            "required for the translation fixed point"
        )
    return val


def _translation_fixed_points(h, alpha: np.ndarray, xi: np.ndarray,
                              tol: float = 1e-13, max_iter: int = 60):
    """Solve, for every target direction xi, the fixed point x = phi(x) with

        phi(x) = (r(x) xi - alpha) / (1 + h(x)),
        r(x)   = <xi, alpha> + sqrt(<xi, alpha>^2 - |alpha|^2 + (1 + h(x))^2),

    so that (1 + h(x)) x + alpha = r(x) xi.  Returns (x, lam) with
    lam = r(x); the preconditions make phi a contraction with factor <= 1/2.

    ``h`` is either a SphCoeffs table or a callable mapping an (n, 3) array
    of unit vectors to elevation values (used to nest translations exactly).
    """
    h_eval = h if callable(h) else (lambda pts: synthesize_at(h, pts))
    a2 = float(alpha @ alpha)
    x = xi.copy()
    dot_xa = xi @ alpha
    lam = np.zeros(len(xi))
    active = np.ones(len(xi), dtype=bool)
    for _ in range(max_iter):
        hx = h_eval(x[active])
        disc = dot_xa[active] ** 2 - a2 + (1.0 + hx) ** 2
        if np.any(disc <= 0.0):
            raise ValueError("translation fixed point: negative discriminant "
                             "(input outside the contraction regime)")
        r = dot_xa[active] + np.sqrt(disc)
        x_new = (r[:, None] * xi[active] - alpha[None, :]) / (1.0 + hx)[:, None]
        step = np.max(np.abs(x_new - x[active]), axis=1)
        lam[active] = r
        x[active] = x_new
        still = step > tol
        if not np.any(still):
            active = np.zeros(len(xi), dtype=bool)
            break
        idx = np.where(active)[0]
        active = np.zeros(len(xi), dtype=bool)
        active[idx[still]] = True
    if np.any(active):
        raise ValueError("translation fixed point did not converge "
                         f"for {int(active.sum())} nodes (invalid input?)")
    return x, lam


def translation_elevation_values(h, alpha: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Exact nodewise values h_alpha(xi) = lambda(xi) - 1.

    Unlike :func:`translate_reparametrize` this never re-analyzes, so nested
    translations (pass the returned closure of a previous call as ``h``)
    satisfy the group law h_{alpha+beta} = (h_alpha)_beta to solver accuracy.
    """
    _, lam = _translation_fixed_points(h, np.asarray(alpha, float), np.asarray(xi, float))
    return lam - 1.0


def translation_evaluator(h, alpha: np.ndarray):
    """Closure xi -> h_alpha(xi) suitable for nesting translations."""
    a = np.asarray(alpha, dtype=float)
    return lambda pts: translation_elevation_values(h, a, np.atleast_2d(pts))


def translate_reparametrize(h: SphCoeffs, t: Translation,
                            residual_tol: float = 1e-10) -> SphCoeffs:
    """Elevation h_alpha of the translated drop boundary.

    The translated surface {(1+h(x))x + alpha} is again a radial graph
    {(1+h_alpha(xi)) xi}; h_alpha is found nodewise by the contraction fixed
    point above and re-analyzed with one extra degree of de-aliasing.
    """
    check_w1inf_bound(h)
    alpha = t.as_array()
    grid = work_grid(h.l_max + 1)
    x, lam = _translation_fixed_points(h, alpha, grid.nodes.copy())
    # residual of the defining identity (1 + h(x)) x + alpha = lam * xi
    hx = synthesize_at(h, x)
    res = (1.0 + hx)[:, None] * x + alpha[None, :] - lam[:, None] * grid.nodes
    worst = float(np.max(np.abs(res)))
    if worst > residual_tol:
        raise ValueError(f"translation residual {worst:.2e} above {residual_tol:.1e}")
    return analyze(GridField(grid, lam - 1.0), h.l_max)


def translate_state(u: State, t: Translation) -> State:
    """Full translation action A_alpha(h, psi) = (h_alpha, psi o g_alpha)."""
    check_w1inf_bound(u.eta)
    alpha = t.as_array()
    grid = work_grid(u.l_max + 1)
    x, lam = _translation_fixed_points(u.eta, alpha, grid.nodes.copy())
    h_alpha = analyze(GridField(grid, lam - 1.0), u.l_max)
    psi_g = eval_harmonics_all(u.beta.l_max, x) @ u.beta.coeffs
    beta_alpha = analyze(GridField(grid, psi_g), u.l_max)
    return State(h_alpha, beta_alpha)
