"""Dirichlet-Neumann operator G(h) on nearly spherical domains.

G(h) psi is the normal derivative, on the deformed boundary
gamma(x) = (1 + h(x)) x, of the harmonic extension of the boundary data
psi.  The extension is represented in the interior solid-harmonic basis

    p_{l,m}(x) = r^l phi_{l,m}(x / r),      l <= L_ext,

fitted to the Dirichlet data by least squares at the collocation points
gamma(x_q) over the full quadrature grid (more rows than columns).  Each
p_{l,m} is a genuine harmonic polynomial; its trivariate monomial table is
built in exact rational arithmetic and the identity Delta p = 0 is checked
symbolically on the table at construction time.  Gradients come from exact
termwise differentiation of the same tables, so no finite differencing
enters the operator.

Exact for spherical domains, spectrally accurate for small h.  Monomial
evaluation of Legendre-type polynomials loses roughly a digit per four
degrees to cancellation, which is immaterial at the desk scales used here
(L_ext <= ~16) but rules the method out for large degree caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from .spherical import GridField, QuadGrid, SphCoeffs, analyze, coeff_index, num_coeffs, synthesize, tangential_gradient
from .geometry import check_graph_condition

Monomial = tuple[int, int, int]


def _legendre_coeff_rows(l_ext: int) -> list[list[Fraction]]:
    """Exact coefficients of the Legendre polynomials P_0 .. P_{l_ext}."""
    rows = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    for ell in range(2, l_ext + 1):
        prev, prev2 = rows[ell - 1], rows[ell - 2]
        row = [Fraction(0)] * (ell + 1)
        for k, c in enumerate(prev):
            row[k + 1] += Fraction(2 * ell - 1, ell) * c
        for k, c in enumerate(prev2):
            row[k] -= Fraction(ell - 1, ell) * c
        rows.append(row)
    return rows


def _complex_power_tables(m_max: int) -> tuple[list[dict], list[dict]]:
    """Monomial tables of Re[(x1 + i x2)^m] and Im[(x1 + i x2)^m]."""
    re: list[dict] = [{(0, 0): Fraction(1)}]
    im: list[dict] = [{}]
    for m in range(1, m_max + 1):
        new_re: dict = {}
        new_im: dict = {}
        for (a, b), c in re[m - 1].items():  # (re + i im)(x1 + i x2)
            new_re[(a + 1, b)] = new_re.get((a + 1, b), Fraction(0)) + c
            new_im[(a, b + 1)] = new_im.get((a, b + 1), Fraction(0)) + c
        for (a, b), c in im[m - 1].items():
            new_im[(a + 1, b)] = new_im.get((a + 1, b), Fraction(0)) + c
            new_re[(a, b + 1)] = new_re.get((a, b + 1), Fraction(0)) - c
        re.append(new_re)
        im.append(new_im)
    return re, im


def _laplacian_table(poly: dict[Monomial, Fraction]) -> dict[Monomial, Fraction]:
    out: dict[Monomial, Fraction] = {}
    for (a, b, c), coef in poly.items():
        for k, e in enumerate((a, b, c)):
            if e >= 2:
                key = tuple(v - 2 if i == k else v for i, v in enumerate((a, b, c)))
                out[key] = out.get(key, Fraction(0)) + coef * e * (e - 1)
    return {k: v for k, v in out.items() if v != 0}


def _solid_harmonic_tables(l_ext: int) -> dict[tuple[int, int], dict[Monomial, Fraction]]:
    """Rational monomial tables of p_{l,m} up to the normalization constant.

    The returned polynomial is r^{l-m} (d^m P_l)(x3/r) * Re/Im[(x1+ix2)^m];
    multiplying by c_l^(m) > 0 (handled in float later) gives r^l phi_{l,m}.
    """
    legendre = _legendre_coeff_rows(l_ext)
    re_tab, im_tab = _complex_power_tables(l_ext)
    tables: dict[tuple[int, int], dict[Monomial, Fraction]] = {}
    for ell in range(l_ext + 1):
        for m in range(0, ell + 1):
            # d^m P_l expressed over x3^j * (x1^2+x2^2+x3^2)^((l-m-j)/2)
            poly: dict[Monomial, Fraction] = {}
            for k in range(m, ell + 1):
                a_k = legendre[ell][k]
                if a_k == 0:
                    continue
                fall = Fraction(math.prod(range(k - m + 1, k + 1)))
                b_j = a_k * fall
                j = k - m
                half = (ell - m - j) // 2
                # expand (x1^2 + x2^2 + x3^2)^half * x3^j
                for i1 in range(half + 1):
                    for i2 in range(half - i1 + 1):
                        i3 = half - i1 - i2
                        mult = Fraction(
                            math.comb(half, i1) * math.comb(half - i1, i2)
                        )
                        key = (2 * i1, 2 * i2, 2 * i3 + j)
                        poly[key] = poly.get(key, Fraction(0)) + b_j * mult
            for mm, azim in ((m, re_tab[m]),) if m == 0 else ((m, re_tab[m]), (-m, im_tab[m])):
                full: dict[Monomial, Fraction] = {}
                for (a, b, c3), pc in poly.items():
                    for (za, zb), zc in azim.items():
                        key = (a + za, b + zb, c3)
                        full[key] = full.get(key, Fraction(0)) + pc * zc
                tables[(ell, mm)] = {k: v for k, v in full.items() if v != 0}
    return tables


def _normalization(ell: int, m: int) -> float:
    """c_l^(m) > 0 making r^l phi_{l,m} unit-L2 on S2 (m is |m| here)."""
    ratio = Fraction(1)
    for k in range(ell - m + 1, ell + m + 1):
        ratio /= k
    n2 = Fraction(2 * ell + 1, 2) * ratio
    if m == 0:
        return math.sqrt(float(n2)) / math.sqrt(2.0 * math.pi)
    return math.sqrt(float(n2)) / math.sqrt(math.pi)


@dataclass
class SolidHarmonicBasis:
    """Monomial tables of the harmonic polynomials r^l phi_{l,m}, l <= l_ext,
    together with their exact gradient tables, packed for vectorized
    evaluation: value(pts) = powers(pts) @ C.T over a shared monomial list.
    """

    l_ext: int
    monomials: list[Monomial]
    coeff: np.ndarray        # (n_basis, n_mono) values
    coeff_grad: np.ndarray   # (3, n_basis, n_mono) gradients

    @classmethod
    def build(cls, l_ext: int) -> "SolidHarmonicBasis":
        tables = _solid_harmonic_tables(l_ext)
        # symbolic harmonicity check on the exact rational tables
        for (ell, m), tab in tables.items():
            if _laplacian_table(tab):
                raise AssertionError(
                    f"solid harmonic table (l={ell}, m={m}) is not harmonic"
                )
        mono_set: set[Monomial] = set()
        for tab in tables.values():
            mono_set.update(tab.keys())
            for (a, b, c3) in list(tab.keys()):  # gradient monomials
                if a >= 1:
                    mono_set.add((a - 1, b, c3))
                if b >= 1:
                    mono_set.add((a, b - 1, c3))
                if c3 >= 1:
                    mono_set.add((a, b, c3 - 1))
        monomials = sorted(mono_set)
        mono_pos = {mk: i for i, mk in enumerate(monomials)}
        n_basis = num_coeffs(l_ext)
        C = np.zeros((n_basis, len(monomials)))
        Cg = np.zeros((3, n_basis, len(monomials)))
        for (ell, m), tab in tables.items():
            j = coeff_index(ell, m)
            scale = _normalization(ell, abs(m))
            for (a, b, c3), frac in tab.items():
                v = scale * float(frac)
                C[j, mono_pos[(a, b, c3)]] += v
                if a >= 1:
                    Cg[0, j, mono_pos[(a - 1, b, c3)]] += v * a
                if b >= 1:
                    Cg[1, j, mono_pos[(a, b - 1, c3)]] += v * b
                if c3 >= 1:
                    Cg[2, j, mono_pos[(a, b, c3 - 1)]] += v * c3
        return cls(l_ext, monomials, C, Cg)

    def _power_matrix(self, pts: np.ndarray) -> np.ndarray:
        deg = self.l_ext
        pows = np.empty((deg + 1, 3, pts.shape[0]))
        pows[0] = 1.0
        for d in range(1, deg + 1):
            pows[d] = pows[d - 1] * pts.T
        exps = np.asarray(self.monomials)  # (n_mono, 3)
        M = pows[exps[:, 0], 0, :] * pows[exps[:, 1], 1, :] * pows[exps[:, 2], 2, :]
        return np.ascontiguousarray(M.T)

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        """Values p_{l,m}(pts), shape (npts, n_basis)."""
        return self._power_matrix(pts) @ self.coeff.T

    def evaluate_with_gradient(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values and Cartesian gradients, shapes (npts, n) and (npts, 3, n)."""
        M = self._power_matrix(pts)
        vals = M @ self.coeff.T
        grads = np.stack([M @ self.coeff_grad[k].T for k in range(3)], axis=1)
        return vals, grads

    def gradient_dot(self, pts: np.ndarray, c: np.ndarray, vecs: np.ndarray,
                     power_matrix: np.ndarray | None = None) -> np.ndarray:
        """<grad Phi(pts), vecs> for Phi = sum c_j p_j, without forming the
        full gradient matrix (c is contracted into the tables first)."""
        M = power_matrix if power_matrix is not None else self._power_matrix(pts)
        out = np.zeros(pts.shape[0])
        for k in range(3):
            out += (M @ (self.coeff_grad[k].T @ c)) * vecs[:, k]
        return out


@dataclass
class DNSolveReport:
    """Diagnostics of one Dirichlet solve."""

    residual: float            # max boundary misfit |Phi(gamma) - psi|
    condition_estimate: float  # of the equilibrated collocation matrix
    coefficients: np.ndarray   # extension coefficients over the solid basis

    def to_json_dict(self) -> dict:
        return {
            "residual": self.residual,
            "condition_estimate": self.condition_estimate,
            "coefficients": [float(v) for v in self.coefficients],
        }


def boundary_points(eta: SphCoeffs, grid: QuadGrid) -> np.ndarray:
    """gamma(x) = (1 + eta(x)) x at the grid nodes."""
    one_eta = check_graph_condition(eta, grid)
    return one_eta[:, None] * grid.nodes


def outward_normal(eta: SphCoeffs, grid: QuadGrid) -> np.ndarray:
    """Unit outer normal of the graph surface at the nodes:
    nu = ((1+eta) x - grad_S2 eta) / J.  Unit length is automatic because
    grad_S2 eta is tangent to the sphere.
    """
    one_eta = check_graph_condition(eta, grid)
    gr = tangential_gradient(eta, grid).values
    v = one_eta[:, None] * grid.nodes - gr
    J = np.sqrt(one_eta**2 + np.einsum("qc,qc->q", gr, gr))
    return v / J[:, None]


def collocation_grid(l_max: int, l_ext: int) -> QuadGrid:
    """Quadrature grid for DN collocation: the standard grid sized for the
    extension degree, so the basis columns are quadrature-orthonormal on the
    sphere (uniform longitudes alias m with m +- n_lon otherwise) and the
    system is comfortably overdetermined.
    """
    return QuadGrid.build(l_ext + 2, 2 * l_ext + 2)


class DNOperator:
    """G(h) on a fixed collocation grid with a fixed extension cap L_ext.

    The QR factorization of the collocation matrix depends on eta only, so
    it is cached (keyed by the coefficient bytes); repeated solves at the
    same shape, e.g. the beta columns of a finite-difference Jacobian, skip
    the assembly entirely.  The factorization is kept in raw LAPACK form
    (geqrf reflectors); Q is never formed explicitly.
    """

    def __init__(self, l_max: int, grid: QuadGrid | None = None,
                 l_ext: int | None = None, misfit_tol: float = 1e-7,
                 cond_limit: float = 1e10, cache_size: int = 4):
        self.l_max = l_max
        self.l_ext = l_ext if l_ext is not None else l_max + 4
        if self.l_ext < l_max:
            raise ValueError("L_ext must be at least L_max")
        self.grid = grid or collocation_grid(l_max, self.l_ext)
        if self.grid.size < num_coeffs(self.l_ext):
            raise ValueError(
                f"collocation grid has {self.grid.size} nodes, fewer than the "
                f"{num_coeffs(self.l_ext)} basis columns; enlarge the grid"
            )
        self.basis = SolidHarmonicBasis.build(self.l_ext)
        self.misfit_tol = misfit_tol
        self.cond_limit = cond_limit
        self._cache: dict[bytes, tuple] = {}
        self._cache_size = cache_size
        self._geqrf, self._ormqr = scipy.linalg.get_lapack_funcs(
            ("geqrf", "ormqr"), (np.empty((2, 2)),)
        )
        self._lwork_qr: int | None = None
        self._lwork_mq: int | None = None

    def _factorization(self, eta: SphCoeffs):
        key = eta.coeffs.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            # LRU refresh: the base shape of an FD Jacobian must outlive the
            # transient single-column perturbations.
            self._cache.pop(key)
            self._cache[key] = hit
            return hit
        gamma = boundary_points(eta, self.grid)
        M = self.basis._power_matrix(gamma)
        A = M @ self.basis.coeff.T
        col_norms = np.linalg.norm(A, axis=0)
        col_norms[col_norms == 0.0] = 1.0
        Aeq = np.asfortranarray(A / col_norms)
        if self._lwork_qr is None:
            _, _, work, _ = self._geqrf(Aeq, lwork=-1, overwrite_a=False)
            self._lwork_qr = int(work[0])
        qr, tau, work, info = self._geqrf(Aeq, lwork=self._lwork_qr, overwrite_a=True)
        if info != 0:
            raise ValueError(f"QR factorization failed (info={info})")
        rdiag = np.abs(np.diag(qr))
        cond = float(rdiag.max() / rdiag.min()) if rdiag.min() > 0 else np.inf
        if cond > self.cond_limit:
            raise ValueError(
                f"collocation matrix too ill-conditioned ({cond:.2e}); "
                "the domain is too deformed for this L_ext"
            )
        nu = outward_normal(eta, self.grid)
        entry = (gamma, A, M, qr, tau, col_norms, cond, nu)
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = entry
        return entry

    def apply_values(self, eta: SphCoeffs, psi: SphCoeffs) -> tuple[np.ndarray, DNSolveReport]:
        """G(h)psi sampled at the grid nodes, plus the solve report."""
        gamma, A, M, qr, tau, col_norms, cond, nu = self._factorization(eta)
        b = synthesize(psi, self.grid).values
        n = qr.shape[1]
        bmat = np.asfortranarray(b[:, None])
        if self._lwork_mq is None:
            _, work, _ = self._ormqr("L", "T", qr, tau, bmat, lwork=-1)
            self._lwork_mq = int(work[0])
        y, work, info = self._ormqr("L", "T", qr, tau, bmat, lwork=self._lwork_mq)
        c = scipy.linalg.solve_triangular(qr[:n, :], y[:n, 0],
                                          check_finite=False) / col_norms
        misfit = float(np.max(np.abs(A @ c - b)))
        scale = 1.0 + float(np.max(np.abs(b)))
        if misfit > self.misfit_tol * scale:
            raise ValueError(
                f"Dirichlet boundary misfit {misfit:.2e} exceeds tolerance; "
                "raise L_ext or reduce the deformation"
            )
        g_vals = self.basis.gradient_dot(gamma, c, nu, power_matrix=M)
        return g_vals, DNSolveReport(misfit, cond, c)

    def apply(self, eta: SphCoeffs, psi: SphCoeffs) -> tuple[SphCoeffs, DNSolveReport]:
        """G(h)psi analyzed back to coefficients of degree <= l_max."""
        g_vals, report = self.apply_values(eta, psi)
        return analyze(GridField(self.grid, g_vals), self.l_max), report


_DN_CACHE: dict[tuple[int, int], DNOperator] = {}


def dn_operator(l_max: int, l_ext: int | None = None) -> DNOperator:
    """Shared DN operator on the standard collocation grid for this degree."""
    le = l_ext if l_ext is not None else l_max + 4
    key = (l_max, le)
    if key not in _DN_CACHE:
        _DN_CACHE[key] = DNOperator(l_max, l_ext=le)
    return _DN_CACHE[key]


def dirichlet_neumann(eta: SphCoeffs, psi: SphCoeffs) -> tuple[SphCoeffs, DNSolveReport]:
    """One-call form of G(h)psi -> coefficients on the shared operator."""
    if eta.l_max != psi.l_max:
        raise ValueError("eta and psi must share L_max")
    return dn_operator(eta.l_max).apply(eta, psi)
