"""Real spherical harmonics on S2, quadrature, transforms, tangential calculus.

The basis used throughout is the real, fully L2(S2)-normalized family

    phi_{l,0}(x)  = Ptilde_{l,0}(x3) / sqrt(2*pi),
    phi_{l,m}(x)  = Ptilde_{l,m}(x3) * cos(m*phi) / sqrt(pi),   m = 1..l,
    phi_{l,-m}(x) = Ptilde_{l,m}(x3) * sin(m*phi) / sqrt(pi),   m = 1..l,

where Ptilde_{l,m} is the associated Legendre function normalized so that
its square integrates to 1 on [-1, 1] (no Condon-Shortley sign), and
(x1, x2) = sin(theta) (cos(phi), sin(phi)), x3 = cos(theta).  Equivalently,
phi_{l,m} = c_l^(m) * (d^m P_l/dt^m)(x3) * Re[(x1 + i x2)^m] with c_l^(m) > 0,
which makes the generator of rotations about x3 act as

    M phi_{l,m} = -m phi_{l,-m}          (M = x1 d/dx2 - x2 d/dx1).

All fields are truncated at a degree cap ``L_max``.  Coefficient tables are
flat arrays in l-major order with m running from -l to l:
index(l, m) = l*l + l + m.

Legendre values are produced by stable three-term recurrences seeded at the
sectoral term, so no factorials are ever formed; degrees up to the hard cap
32 stay at machine accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

L_MAX_HARD_CAP = 32


def coeff_index(ell: int, m: int) -> int:
    """Flat position of the (l, m) entry, l-major with m from -l to l."""
    if not (-ell <= m <= ell):
        raise ValueError(f"invalid harmonic index (l={ell}, m={m})")
    return ell * ell + ell + m


def num_coeffs(l_max: int) -> int:
    return (l_max + 1) ** 2


def index_pairs(l_max: int) -> Iterator[tuple[int, int]]:
    """All (l, m) with l <= l_max, in flat-array order."""
    for ell in range(l_max + 1):
        for m in range(-ell, ell + 1):
            yield ell, m


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree/order pair (l, m) with |m| <= l."""

    ell: int
    m: int

    def __post_init__(self):
        if self.ell < 0 or abs(self.m) > self.ell:
            raise ValueError(f"invalid harmonic index (l={self.ell}, m={self.m})")


@dataclass
class SphCoeffs:
    """Real coefficient table over harmonic indices (l, m), l <= L_max.

    The basis is orthonormal, so the L2(S2) norm of the represented field
    equals the Euclidean norm of ``coeffs``.
    """

    l_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (num_coeffs(self.l_max),):
            raise ValueError(
                f"coefficient array has shape {self.coeffs.shape}, "
                f"expected ({num_coeffs(self.l_max)},) for L_max={self.l_max}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficient")

    @classmethod
    def zeros(cls, l_max: int) -> "SphCoeffs":
        return cls(l_max, np.zeros(num_coeffs(l_max)))

    @classmethod
    def delta(cls, l_max: int, ell: int, m: int, value: float = 1.0) -> "SphCoeffs":
        c = cls.zeros(l_max)
        c[ell, m] = value
        return c

    def __getitem__(self, lm: tuple[int, int]) -> float:
        ell, m = lm
        return float(self.coeffs[coeff_index(ell, m)])

    def __setitem__(self, lm: tuple[int, int], value: float) -> None:
        ell, m = lm
        self.coeffs[coeff_index(ell, m)] = value

    def copy(self) -> "SphCoeffs":
        return SphCoeffs(self.l_max, self.coeffs.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def truncated(self, l_max: int) -> "SphCoeffs":
        """Copy truncated (or zero-padded) to a new degree cap."""
        out = SphCoeffs.zeros(l_max)
        n = min(self.coeffs.size, out.coeffs.size)
        out.coeffs[:n] = self.coeffs[:n]
        return out

    def to_json_dict(self) -> dict:
        entries = [
            [ell, m, float(self.coeffs[coeff_index(ell, m)])]
            for ell, m in index_pairs(self.l_max)
        ]
        return {"L_max": self.l_max, "coeffs": entries}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SphCoeffs":
        c = cls.zeros(int(d["L_max"]))
        for ell, m, value in d["coeffs"]:
            c[int(ell), int(m)] = float(value)
        return c

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "SphCoeffs":
        return cls.from_json_dict(json.loads(s))


# ---------------------------------------------------------------------------
# Normalized associated Legendre recurrences
# ---------------------------------------------------------------------------

def _legendre_table(l_max: int, t: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Ptilde_{l,m}(t) for all l <= l_max, m = 0..l, at points with
    t = x3 and rho = sqrt(1 - t^2) supplied separately (pole safe).

    Returns array of shape (l_max+1, l_max+1, npts); entries with m > l are 0.
    """
    npts = t.shape[0]
    P = np.zeros((l_max + 1, l_max + 1, npts))
    P[0, 0] = 1.0 / math.sqrt(2.0)
    for m in range(1, l_max + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * rho * P[m - 1, m - 1]
    for m in range(l_max):
        P[m + 1, m] = math.sqrt(2 * m + 3.0) * t * P[m, m]
    for m in range(l_max + 1):
        for ell in range(m + 2, l_max + 1):
            a = math.sqrt((2 * ell + 1) * (2 * ell - 1) / ((ell - m) * (ell + m)))
            b = math.sqrt(
                (2 * ell + 1) * (ell - 1 + m) * (ell - 1 - m)
                / ((2 * ell - 3) * (ell - m) * (ell + m))
            )
            P[ell, m] = a * t * P[ell - 1, m] - b * P[ell - 2, m]
    return P


def _legendre_dtable(l_max: int, t: np.ndarray, P: np.ndarray) -> np.ndarray:
    """(1 - t^2) * d/dt Ptilde_{l,m}(t) from the value table P.

    Uses (1-t^2) Ptilde' = -l t Ptilde + sqrt((2l+1)(l^2-m^2)/(2l-1)) Ptilde_{l-1,m},
    which stays finite at the poles.
    """
    dP = np.zeros_like(P)
    for m in range(l_max + 1):
        for ell in range(m, l_max + 1):
            dP[ell, m] = -ell * t * P[ell, m]
            if ell - 1 >= m:
                dP[ell, m] += math.sqrt(
                    (2 * ell + 1) * (ell * ell - m * m) / (2 * ell - 1.0)
                ) * P[ell - 1, m]
    return dP


def eval_harmonics_all(l_max: int, points: np.ndarray) -> np.ndarray:
    """Values of every phi_{l,m}, l <= l_max, at unit vectors ``points``.

    points: (npts, 3).  Returns (npts, (l_max+1)^2).  Pole safe: the
    azimuthal factors are built from Re/Im[(x1 + i x2)^m] divided through by
    rho^m inside the Legendre recurrence, so nothing blows up at rho = 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(r - 1.0) > 1e-12):
        raise ValueError("evaluation points must lie on the unit sphere")
    t = pts[:, 2]
    # C_{l,m} = Ptilde_{l,m}(t) / rho^m obeys the same recurrences with the
    # rho factor of the sectoral seed removed.
    C = _legendre_table(l_max, t, np.ones_like(t))
    w = pts[:, 0] + 1j * pts[:, 1]
    zpow = np.empty((l_max + 1, pts.shape[0]), dtype=complex)
    zpow[0] = 1.0
    for m in range(1, l_max + 1):
        zpow[m] = zpow[m - 1] * w
    out = np.empty((pts.shape[0], num_coeffs(l_max)))
    inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
    inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)
    for ell in range(l_max + 1):
        out[:, coeff_index(ell, 0)] = C[ell, 0] * inv_sqrt_2pi
        for m in range(1, ell + 1):
            out[:, coeff_index(ell, m)] = C[ell, m] * zpow[m].real * inv_sqrt_pi
            out[:, coeff_index(ell, -m)] = C[ell, m] * zpow[m].imag * inv_sqrt_pi
    return out


def eval_harmonic(idx: HarmonicIndex, x: np.ndarray) -> float:
    """phi_{l,m}(x) at a single unit vector x."""
    return float(eval_harmonics_all(idx.ell, np.asarray(x, dtype=float)[None, :])
                 [0, coeff_index(idx.ell, idx.m)])


# ---------------------------------------------------------------------------
# Quadrature grid
# ---------------------------------------------------------------------------

@dataclass
class QuadGrid:
    """Gauss-Legendre x uniform-longitude product grid on S2.

    Nodes exclude the poles.  Weights sum to 4*pi and integrate exactly every
    product phi_{l,m} phi_{l',m'} with l + l' <= 2*L when n_lat >= L + 1 and
    n_lon >= 2*L + 1.
    """

    n_lat: int
    n_lon: int
    nodes: np.ndarray = field(repr=False)     # (Q, 3) unit vectors
    weights: np.ndarray = field(repr=False)   # (Q,)
    x3: np.ndarray = field(repr=False)        # (Q,) cos(theta) per node
    rho: np.ndarray = field(repr=False)       # (Q,) sin(theta) per node
    phi: np.ndarray = field(repr=False)       # (Q,) longitude per node
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def build(cls, n_lat: int, n_lon: int) -> "QuadGrid":
        if n_lat < 1 or n_lon < 1:
            raise ValueError("grid sizes must be positive")
        t, wt = np.polynomial.legendre.leggauss(n_lat)
        lon = 2.0 * math.pi * np.arange(n_lon) / n_lon
        T, PHI = np.meshgrid(t, lon, indexing="ij")
        W = np.repeat(wt, n_lon) * (2.0 * math.pi / n_lon)
        t_flat = T.ravel()
        phi_flat = PHI.ravel()
        rho = np.sqrt(np.clip(1.0 - t_flat**2, 0.0, None))
        nodes = np.column_stack(
            (rho * np.cos(phi_flat), rho * np.sin(phi_flat), t_flat)
        )
        return cls(n_lat, n_lon, nodes, W, t_flat, rho, phi_flat)

    @classmethod
    def for_degree(cls, l_max: int, dealias: int = 1) -> "QuadGrid":
        """Default grid for fields of degree <= l_max: one extra node of
        margin beyond the exactness bound, scaled by ``dealias``.
        """
        L = dealias * l_max
        return cls.build(L + 2, 2 * L + 2)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def max_exact_degree(self) -> int:
        """Largest L for which analyze/synthesize at degree L is alias-free."""
        return min(self.n_lat - 1, (self.n_lon - 1) // 2)

    def check_resolution(self, l_max: int) -> None:
        if l_max > self.max_exact_degree():
            raise ValueError(
                f"grid {self.n_lat}x{self.n_lon} under-resolves L_max={l_max}: "
                f"need n_lat >= {l_max + 1} and n_lon >= {2 * l_max + 1} "
                "for alias-free harmonic products"
            )

    # -- cached basis tables ------------------------------------------------

    def basis(self, l_max: int) -> np.ndarray:
        """Matrix Y with Y[q, k] = phi_k(node_q), k flat over (l, m)."""
        key = ("Y", l_max)
        if key not in self._tables:
            P = _legendre_table(l_max, self.x3, self.rho)
            out = np.empty((self.size, num_coeffs(l_max)))
            inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
            inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)
            cosm = [np.cos(m * self.phi) for m in range(l_max + 1)]
            sinm = [np.sin(m * self.phi) for m in range(l_max + 1)]
            for ell in range(l_max + 1):
                out[:, coeff_index(ell, 0)] = P[ell, 0] * inv_sqrt_2pi
                for m in range(1, ell + 1):
                    out[:, coeff_index(ell, m)] = P[ell, m] * cosm[m] * inv_sqrt_pi
                    out[:, coeff_index(ell, -m)] = P[ell, m] * sinm[m] * inv_sqrt_pi
            self._tables[key] = out
        return self._tables[key]

    def gradient_basis(self, l_max: int) -> np.ndarray:
        """Tangential gradients of the basis at the nodes, shape (Q, 3, N).

        grad_S2 phi = e_theta * d_theta phi + e_phi * (1/sin theta) d_phi phi.
        Gauss-Legendre nodes keep sin(theta) > 0, so the division is safe.
        """
        key = ("dY", l_max)
        if key not in self._tables:
            P = _legendre_table(l_max, self.x3, self.rho)
            dP = _legendre_dtable(l_max, self.x3, P)  # (1-t^2) dPtilde/dt
            inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
            inv_sqrt_2pi = 1.0 / math.sqrt(2.0 * math.pi)
            rho = self.rho
            inv_rho = 1.0 / rho
            # unit vectors e_theta, e_phi at each node
            cph, sph = np.cos(self.phi), np.sin(self.phi)
            e_th = np.column_stack((self.x3 * cph, self.x3 * sph, -rho))
            e_ph = np.column_stack((-sph, cph, np.zeros_like(rho)))
            out = np.zeros((self.size, 3, num_coeffs(l_max)))
            cosm = [np.cos(m * self.phi) for m in range(l_max + 1)]
            sinm = [np.sin(m * self.phi) for m in range(l_max + 1)]
            for ell in range(l_max + 1):
                for m in range(0, ell + 1):
                    # d_theta Ptilde(cos theta) = -sin(theta) Ptilde'(t)
                    #                           = -dP / sin(theta)
                    dth = -dP[ell, m] * inv_rho
                    if m == 0:
                        az = inv_sqrt_2pi
                        k = coeff_index(ell, 0)
                        out[:, :, k] = e_th * (dth * az)[:, None]
                    else:
                        az_c = cosm[m] * inv_sqrt_pi
                        az_s = sinm[m] * inv_sqrt_pi
                        val = P[ell, m] * inv_rho
                        kc = coeff_index(ell, m)
                        ks = coeff_index(ell, -m)
                        out[:, :, kc] = (
                            e_th * (dth * az_c)[:, None]
                            + e_ph * (-m * val * sinm[m] * inv_sqrt_pi)[:, None]
                        )
                        out[:, :, ks] = (
                            e_th * (dth * az_s)[:, None]
                            + e_ph * (m * val * cosm[m] * inv_sqrt_pi)[:, None]
                        )
            self._tables[key] = out
        return self._tables[key]


@dataclass
class GridField:
    """Scalar samples over the nodes of a QuadGrid."""

    grid: QuadGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError("value array length does not match node count")

    def integral(self) -> float:
        return float(self.grid.weights @ self.values)


@dataclass
class GridVectorField:
    """3-component Cartesian samples over the nodes of a QuadGrid."""

    grid: QuadGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size, 3):
            raise ValueError("value array shape does not match node count")


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def synthesize(c: SphCoeffs, grid: QuadGrid) -> GridField:
    """Evaluate the coefficient table on the grid nodes."""
    grid.check_resolution(c.l_max)
    return GridField(grid, grid.basis(c.l_max) @ c.coeffs)


def analyze(f: GridField, l_max: int) -> SphCoeffs:
    """Project grid samples onto the harmonics of degree <= l_max.

    Coefficients are the L2 inner products <f, phi_{l,m}> evaluated by
    quadrature; exact for band-limited f when the grid resolves l_max.
    """
    f.grid.check_resolution(l_max)
    Y = f.grid.basis(l_max)
    return SphCoeffs(l_max, Y.T @ (f.grid.weights * f.values))


def synthesize_at(c: SphCoeffs, points: np.ndarray) -> np.ndarray:
    """Evaluate the field at arbitrary unit vectors (off-grid synthesis)."""
    return eval_harmonics_all(c.l_max, points) @ c.coeffs


# ---------------------------------------------------------------------------
# Diagonal spectral operators
# ---------------------------------------------------------------------------

def _degree_multiplier(c: SphCoeffs, mult) -> SphCoeffs:
    out = c.copy()
    for ell in range(c.l_max + 1):
        sl = slice(coeff_index(ell, -ell), coeff_index(ell, ell) + 1)
        out.coeffs[sl] *= mult(ell)
    return out


def laplace_beltrami(c: SphCoeffs) -> SphCoeffs:
    """Delta_S2: multiplies each degree-l entry by -l(l+1)."""
    return _degree_multiplier(c, lambda ell: -ell * (ell + 1))


def curvature_multiplier(c: SphCoeffs) -> SphCoeffs:
    """-(2 + Delta_S2): multiplies each degree-l entry by (l+2)(l-1)."""
    return _degree_multiplier(c, lambda ell: (ell + 2) * (ell - 1))


def rotation_generator(c: SphCoeffs) -> SphCoeffs:
    """Spectral form of M = x1 d/dx2 - x2 d/dx1: entry (l, m) feeds
    -m times itself into position (l, -m)."""
    out = SphCoeffs.zeros(c.l_max)
    for ell in range(c.l_max + 1):
        for m in range(1, ell + 1):
            cm = c.coeffs[coeff_index(ell, m)]
            cmm = c.coeffs[coeff_index(ell, -m)]
            out.coeffs[coeff_index(ell, -m)] += -m * cm
            out.coeffs[coeff_index(ell, m)] += m * cmm
    return out


def tangential_gradient(c: SphCoeffs, grid: QuadGrid) -> GridVectorField:
    """grad_S2 of the field at the grid nodes, as Cartesian tangent vectors."""
    grid.check_resolution(c.l_max)
    key = ("dYflat", c.l_max)
    if key not in grid._tables:
        dY = grid.gradient_basis(c.l_max)
        grid._tables[key] = np.ascontiguousarray(
            dY.reshape(dY.shape[0] * 3, dY.shape[2]))
    flat = grid._tables[key]
    out = flat @ c.coeffs
    return GridVectorField(grid, out.reshape(-1, 3))


def hessian_quadratic_form(h: SphCoeffs, grid: QuadGrid) -> GridField:
    """<(D2_S2 h) grad_S2 h, grad_S2 h> at the grid nodes.

    Uses the reduction through the (-1)-homogeneous extension: with
    g_i = (grad_S2 h)_i as scalar fields, D(E_{-1} g_i)|_S2 = grad_S2 g_i - x g_i,
    and the x g_i term dies against the tangent vector grad_S2 h, leaving

        sum_i (grad_S2 h)_i <grad_S2 g_i, grad_S2 h>.

    Each g_i is band-limited to degree l_max + 1, so the contraction is
    spectrally exact on a grid resolving 2*(l_max + 1).
    """
    l1 = h.l_max + 1
    grid.check_resolution(l1)
    v = tangential_gradient(h, grid).values        # (Q, 3)
    out = np.zeros(grid.size)
    for i in range(3):
        gi = analyze(GridField(grid, v[:, i]), l1)
        grad_gi = tangential_gradient(gi, grid).values
        out += v[:, i] * np.einsum("qc,qc->q", grad_gi, v)
    return GridField(grid, out)


def startup_selftest(l_max: int = 4) -> None:
    """Verify the sign convention M phi_{l,m} = -m phi_{l,-m} numerically.

    The normalization fixes |c_l^(m)| only; this pins the sine branch sign.
    Raises if the implementation ever drifts from the convention.
    """
    grid = QuadGrid.for_degree(l_max)
    dY = grid.gradient_basis(l_max)
    Jx = np.column_stack((-grid.nodes[:, 1], grid.nodes[:, 0], np.zeros(grid.size)))
    for ell in range(l_max + 1):
        for m in range(-ell, ell + 1):
            k = coeff_index(ell, m)
            mphi = np.einsum("qc,qc->q", Jx, dY[:, :, k])
            want = SphCoeffs.zeros(l_max)
            if m != 0:
                want[ell, -m] = -m
            got = analyze(GridField(grid, mphi), l_max)
            if np.max(np.abs(got.coeffs - want.coeffs)) > 1e-10:
                raise AssertionError(
                    f"rotation-generator sign convention broken at (l={ell}, m={m})"
                )
