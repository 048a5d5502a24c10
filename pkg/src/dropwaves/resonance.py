"""Resonance analysis of the linearized rotating-wave operator.

At u = 0 the operator of the rotating-wave equation is block diagonal over
harmonic index pairs,

    L_omega (eta, beta) = ( sigma0 (l+2)(l-1) eta + omega M beta,
                            -omega M eta + l beta ),

and the (l, m) block is singular exactly when

    sigma0 (l+2)(l-1) l = omega^2 m^2.

For a seed index (l0, m0), m0 != 0, the bifurcation angular velocity is
omega0 = sqrt(sigma0 (l0+2)(l0-1) l0) / m0 and the resonance set S collects
every (l, m) hitting the same ratio; it always contains the degenerate
pairs (0,0) and (1,0) (mass and vertical-barycenter directions).  The
kernel of L_omega0 is spanned by the orthonormal states

    v_{l,m} = (l phi_{l,m}, -omega0 m phi_{l,-m}) / sqrt(l^2 + omega0^2 m^2)

(and v_{0,0} = (0, phi_{0,0})), one per element of S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spherical import coeff_index, num_coeffs
from .geometry import State


def _degree_product(ell: int) -> int:
    return (ell + 2) * (ell - 1) * ell


def bifurcation_frequency(l0: int, m0: int, sigma0: float = 1.0) -> float:
    """omega0 = sqrt(sigma0) * sqrt((l0+2)(l0-1) l0) / m0."""
    if l0 < 2:
        raise ValueError("seed degree l0 must be >= 2")
    if m0 == 0 or abs(m0) > l0:
        raise ValueError("seed order m0 must satisfy 1 <= |m0| <= l0")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    return math.sqrt(sigma0) * math.sqrt(_degree_product(l0)) / m0


def resonance_set(l0: int, m0: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """The set S = {(l, m): (l+2)(l-1) l m0^2 = (l0+2)(l0-1) l0 m^2} in exact
    integer arithmetic, split into (S_D, S_N).

    The search is finite: |m| <= l forces (l+2)(l-1) m0^2 <= K l with
    K = (l0+2)(l0-1) l0, which bounds l.
    """
    if l0 < 2:
        raise ValueError("seed degree l0 must be >= 2")
    if m0 == 0 or abs(m0) > l0:
        raise ValueError("seed order m0 must satisfy 1 <= |m0| <= l0")
    m0 = abs(m0)
    K = _degree_product(l0)
    s_d = [(0, 0), (1, 0)]
    s_n: list[tuple[int, int]] = []
    ell = 2
    while (ell + 2) * (ell - 1) * m0 * m0 <= K * ell:
        num = _degree_product(ell) * m0 * m0
        if num % K == 0:
            msq = num // K
            m = math.isqrt(msq)
            if m * m == msq and 1 <= m <= ell:
                s_n.extend([(ell, m), (ell, -m)])
        ell += 1
    return s_d, s_n


@dataclass
class ResonanceData:
    """Everything downstream solvers need about one bifurcation point."""

    l0: int
    m0: int
    sigma0: float
    omega0: float
    c0: float                      # (l0+2)(l0-1) l0 / m0^2
    s_d: list[tuple[int, int]]
    s_n: list[tuple[int, int]]
    l_max: int
    kernel_indices: list[tuple[int, int]] = field(default_factory=list)
    truncated: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def build(cls, l0: int, m0: int, sigma0: float, l_max: int) -> "ResonanceData":
        omega0 = bifurcation_frequency(l0, m0, sigma0)
        s_d, s_n = resonance_set(l0, m0)
        kernel = [p for p in s_d + s_n if p[0] <= l_max]
        truncated = [p for p in s_d + s_n if p[0] > l_max]
        data = cls(
            l0=l0, m0=abs(m0), sigma0=sigma0, omega0=omega0,
            c0=_degree_product(l0) / m0**2,
            s_d=s_d, s_n=s_n, l_max=l_max,
            kernel_indices=kernel, truncated=truncated,
        )
        return data

    @property
    def s(self) -> list[tuple[int, int]]:
        return self.s_d + self.s_n

    @property
    def n_pairs(self) -> int:
        """n with |S| = 2n + 2."""
        return sum(1 for (_, m) in self.s_n if m > 0)

    @property
    def kernel_n_indices(self) -> list[tuple[int, int]]:
        """Nondegenerate kernel indices inside the truncation (coordinate
        order of every V_N coefficient vector)."""
        return [p for p in self.kernel_indices if p in self.s_n]

    def kernel_vector(self, ell: int, m: int) -> State:
        """Orthonormal kernel state for (l, m) in S (within the truncation)."""
        if (ell, m) not in self.s:
            raise ValueError(f"({ell}, {m}) is not in the resonance set")
        if ell > self.l_max:
            raise ValueError(f"kernel index ({ell}, {m}) exceeds L_max={self.l_max}")
        u = State.zeros(self.l_max)
        if ell == 0:
            u.beta[0, 0] = 1.0
            return u
        norm = math.sqrt(ell**2 + self.omega0**2 * m**2)
        u.eta[ell, m] = ell / norm
        u.beta[ell, -m] = -self.omega0 * m / norm
        return u

    def kernel_basis(self, subset: str = "all") -> list[State]:
        idx = {"all": self.kernel_indices,
               "N": [p for p in self.kernel_indices if p in self.s_n],
               "D": [p for p in self.kernel_indices if p in self.s_d]}[subset]
        return [self.kernel_vector(*p) for p in idx]

    # -- projections -------------------------------------------------------

    def _kernel_matrix(self, subset: str) -> np.ndarray:
        basis = self.kernel_basis(subset)
        if not basis:
            return np.zeros((0, 2 * num_coeffs(self.l_max)))
        return np.stack([b.to_vector() for b in basis])

    def project(self, u: State, space: str) -> State:
        """Orthogonal projection onto V, W, Z_N, or Z_D.

        Z = V and R = W for this operator, so the same masks serve both
        pictures.  Projections are assembled from the kernel basis vectors
        (rank-one updates on the resonant planes), never dense matrices.
        """
        if space not in ("V", "W", "Z_N", "Z_D"):
            raise ValueError(f"unknown space {space!r}")
        vec = u.to_vector()
        if space == "W":
            B = self._kernel_matrix("all")
            out = vec - B.T @ (B @ vec) if B.size else vec
            return State.from_vector(self.l_max, out)
        subset = {"V": "all", "Z_N": "N", "Z_D": "D"}[space]
        B = self._kernel_matrix(subset)
        out = B.T @ (B @ vec) if B.size else np.zeros_like(vec)
        return State.from_vector(self.l_max, out)

    def kernel_coordinates(self, u: State, subset: str = "N") -> np.ndarray:
        """Coefficients of u against the (orthonormal) kernel basis."""
        B = self._kernel_matrix(subset)
        return B @ u.to_vector()

    def from_kernel_coordinates(self, coeffs: np.ndarray, subset: str = "N") -> State:
        B = self._kernel_matrix(subset)
        return State.from_vector(self.l_max, B.T @ np.asarray(coeffs, float))

    # -- the diagonal map Lambda and the quadratic momentum ----------------

    def lambda_coefficient(self, ell: int, m: int) -> float:
        """lambda_{l,m} = sqrt(l^2 + omega0^2 m^2) / sqrt(omega0 m^2 l)."""
        if (ell, m) not in self.s_n:
            raise ValueError(f"({ell}, {m}) is not in the nondegenerate set")
        return math.sqrt(ell**2 + self.omega0**2 * m**2) / math.sqrt(
            self.omega0 * m**2 * ell
        )

    def lambda_map(self, v: State) -> State:
        """Diagonal map on V_N rescaling each kernel direction so that the
        quadratic momentum becomes the round sphere: I0(Lambda v) = |v|^2."""
        self._require_vn(v)
        out = State.zeros(self.l_max)
        for (ell, m) in self.s_n:
            if ell > self.l_max:
                continue
            basis = self.kernel_vector(ell, m).to_vector()
            coeff = float(basis @ v.to_vector())
            out = State.from_vector(
                self.l_max,
                out.to_vector() + self.lambda_coefficient(ell, m) * coeff * basis,
            )
        return out

    def i0_quadratic(self, v: State) -> float:
        """Leading quadratic part of the angular momentum on the kernel:
        I0(v) = sum_{S_N} omega0 m^2 l / (l^2 + omega0^2 m^2) vhat^2."""
        self._require_vn(v)
        total = 0.0
        for (ell, m) in self.s_n:
            if ell > self.l_max:
                continue
            basis = self.kernel_vector(ell, m).to_vector()
            coeff = float(basis @ v.to_vector())
            total += (self.omega0 * m**2 * ell
                      / (ell**2 + self.omega0**2 * m**2)) * coeff**2
        return total

    def _require_vn(self, v: State) -> None:
        vn = self.project(v, "Z_N")
        if np.linalg.norm(vn.to_vector() - v.to_vector()) > 1e-10 * (1 + v.norm()):
            raise ValueError("state is not supported on the nondegenerate kernel")

    def to_json_dict(self) -> dict:
        return {
            "l0": self.l0, "m0": self.m0, "sigma0": self.sigma0,
            "omega0": self.omega0, "n": self.n_pairs,
            "S_D": self.s_d, "S_N": self.s_n,
            "kernel_dim": len(self.kernel_indices),
            "truncated_indices": self.truncated,
        }


# ---------------------------------------------------------------------------
# The linearized operator at u = 0
# ---------------------------------------------------------------------------

def linearized_matrix(omega: float, sigma0: float, l_max: int) -> np.ndarray:
    """Dense matrix of L_omega on stacked (eta, beta) coefficients.

    Block structure: the (l, 0) entries give 2x2 diagonal blocks
    diag(sigma0 (l+2)(l-1), l); each (l, m)/(l, -m) pair couples through
    the rotation generator, omega*M placing -m eta_{l,m} into beta_{l,-m}
    rows and so on.  Kept dense for diagnostics; it is small.
    """
    n = num_coeffs(l_max)
    L = np.zeros((2 * n, 2 * n))
    for ell in range(l_max + 1):
        curv = sigma0 * (ell + 2) * (ell - 1)
        for m in range(-ell, ell + 1):
            k = coeff_index(ell, m)
            L[k, k] = curv           # eta row: -sigma0 (2+Delta) eta
            L[n + k, n + k] = ell    # beta row: G(0) beta
        for m in range(1, ell + 1):
            kp, kn = coeff_index(ell, m), coeff_index(ell, -m)
            # omega M beta contributes to eta rows; M maps (l,m) -> -m (l,-m)
            L[kn, n + kp] += -omega * m
            L[kp, n + kn] += omega * m
            # -omega M eta contributes to beta rows
            L[n + kn, kp] += omega * m
            L[n + kp, kn] += -omega * m
    return L


def block_determinant(omega: float, sigma0: float, ell: int, m: int) -> float:
    """det of the (l, m) coupling block: (sigma0 (l+2)(l-1) l - omega^2 m^2)
    squared for m != 0, and sigma0 (l+2)(l-1) * l for m = 0."""
    a = sigma0 * (ell + 2) * (ell - 1)
    if m == 0:
        return a * ell
    return (a * ell - omega**2 * m**2) ** 2


def restricted_inverse_report(data: ResonanceData, s: float = 2.0) -> dict:
    """Least singular value of L_omega0 restricted to W (truncated), in the
    Sobolev-weighted norms (eta weighted l^(s+3/2), beta weighted l^(s+1)).

    The restriction is assembled in an orthonormal basis of W; the weights
    enter as diag(row) * L * diag(col)^-1 so the value bounds
    ||L w||_{R^s} / ||w||_{W^s} from below.
    """
    l_max = data.l_max
    n = num_coeffs(l_max)
    L = linearized_matrix(data.omega0, data.sigma0, l_max)
    B = data._kernel_matrix("all")            # kernel basis, rows orthonormal
    # orthonormal basis of W = orthogonal complement of the kernel
    full = np.eye(2 * n)
    proj = full - B.T @ B
    ew, evec = np.linalg.eigh(proj)
    Wbasis = evec[:, ew > 0.5]                # eigenvalue 1 eigenvectors
    ells = np.array([ell for ell in range(l_max + 1) for _ in range(2 * ell + 1)],
                    dtype=float)
    ells = np.maximum(ells, 1.0)
    d_dom = np.concatenate([ells ** (s + 1.5), ells ** (s + 1.0)])   # W^s
    d_ran = np.concatenate([ells ** (s - 0.5), ells ** s])           # R^s
    # sigma_min of  w |-> ||L w||_{R^s} / ||w||_{W^s}  over w in W:
    # substitute y = diag(d_dom) w and orthonormalize the image of W.
    Y, _ = np.linalg.qr(d_dom[:, None] * Wbasis)
    R = (L * (1.0 / d_dom)[None, :] * d_ran[:, None]) @ Y
    svals = np.linalg.svd(R, compute_uv=False)
    return {
        "sigma_min": float(svals.min()),
        "sigma_max": float(svals.max()),
        "dim_W": int(Wbasis.shape[1]),
        "s": s,
    }
