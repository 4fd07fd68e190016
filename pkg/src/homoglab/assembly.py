"""Galerkin matrices of the fiber operators on the truncated Fourier basis.

Basis functions are e_n(x) = exp(2 pi i <n, x>), ||n||_inf <= M.  Entries follow
A[q, p] = a(xi)[e_p, e_q], i.e. the form is v^H A u.  Substituting y = x + z and
integrating x over the cell selects m + l = q - p, and the z-integrals reduce to
int (1 - exp(i<k, z>)) |z|^{-d-alpha} dz = c0 |k|^alpha, giving

    A[q, p] = c0/2 sum_l amp[q-p-l, l] ( |2 pi l + kp|^a + |2 pi l - kq|^a
                                         - |2 pi l|^a - |2 pi (l + p - q)|^a )

with kn = 2 pi n + xi.  The xi-dependent part is evaluated through stable power
increments so that small-|xi| differences keep full relative accuracy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .coefficients import CoefficientTable, ProblemSpec, mu_effective
from .errors import ConfigError, NumericalError
from .symbol import LevySymbol, power_increment

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class LatticeBasis:
    d: int
    M: int

    @cached_property
    def indices(self) -> np.ndarray:
        rng = range(-self.M, self.M + 1)
        return np.array(list(itertools.product(rng, repeat=self.d)), dtype=int)

    @property
    def size(self) -> int:
        return (2 * self.M + 1) ** self.d

    @cached_property
    def zero(self) -> int:
        return self.position(np.zeros(self.d, dtype=int))

    def position(self, n) -> int | np.ndarray:
        """Row of multi-index n (lexicographic order); -1 outside the box."""
        n = np.asarray(n, dtype=int)
        side = 2 * self.M + 1
        inside = np.all(np.abs(n) <= self.M, axis=-1)
        pos = np.zeros(n.shape[:-1], dtype=int)
        for j in range(self.d):
            pos = pos * side + (n[..., j] + self.M)
        pos = np.where(inside, pos, -1)
        return int(pos) if pos.ndim == 0 else pos

    def kappa(self, xi) -> np.ndarray:
        return TWO_PI * self.indices + np.asarray(xi, dtype=float)


@dataclass
class FiberMatrix:
    basis: LatticeBasis
    xi: np.ndarray
    entries: np.ndarray
    hermitian_defect: float

    @property
    def size(self) -> int:
        return self.basis.size


def as_xi(xi, d: int) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (d,):
        raise ConfigError(f"quasimomentum must have {d} components, got shape {xi.shape}")
    return xi


def _check_quasimomentum(xi):
    if np.any(xi < -np.pi - 1e-12) or np.any(xi > np.pi + 1e-12):
        raise ConfigError(f"quasimomentum {xi} outside the dual cell [-pi, pi)^d")


def _mode_pairs(basis: LatticeBasis, shift: np.ndarray):
    """Basis rows p and q with q - p = shift, both inside the box."""
    p = basis.indices
    q = p + shift
    qi = basis.position(q)
    keep = qi >= 0
    return np.nonzero(keep)[0], qi[keep]


def _hermitian_defect(A: np.ndarray) -> float:
    return float(np.max(np.abs(A - A.conj().T), initial=0.0))


def check_fiber(A: np.ndarray, what: str = "fiber matrix", psd: bool = True) -> float:
    defect = _hermitian_defect(A)
    scale = float(np.max(np.abs(A), initial=0.0))
    if defect > 1e-10 * max(scale, 1e-300):
        raise NumericalError(f"{what} is not Hermitian (defect {defect:.3e}, scale {scale:.3e})")
    if psd and scale > 0:
        ev = np.linalg.eigvalsh(A)
        if ev[0] < -1e-10 * ev[-1]:
            raise NumericalError(f"{what} is not positive semidefinite (lambda_min = {ev[0]:.3e})")
    return defect


def assemble_fiber(ct: CoefficientTable, spec: ProblemSpec, xi, check: bool = True) -> FiberMatrix:
    """Hermitian PSD Galerkin matrix of the fiber operator A(xi)."""
    if ct.d != spec.d:
        raise ConfigError("coefficient table and problem spec disagree on d")
    xi = as_xi(xi, spec.d)
    _check_quasimomentum(xi)
    basis = LatticeBasis(spec.d, spec.M)
    sym = LevySymbol(spec.d, spec.alpha)
    alpha = spec.alpha
    A = np.zeros((basis.size, basis.size), dtype=complex)
    n = basis.indices
    for m, l, a in zip(ct.m, ct.l, ct.amp):
        p_rows, q_rows = _mode_pairs(basis, m + l)
        if p_rows.size == 0:
            continue
        p, q = n[p_rows], n[q_rows]
        u = TWO_PI * (l + p)
        w = TWO_PI * (l - q)
        base = (np.linalg.norm(u, axis=-1) ** alpha + np.linalg.norm(w, axis=-1) ** alpha
                - np.linalg.norm(TWO_PI * l) ** alpha - np.linalg.norm(TWO_PI * m) ** alpha)
        inc = power_increment(u, xi, alpha) + power_increment(w, -xi, alpha)
        A[q_rows, p_rows] += 0.5 * sym.c0 * a * (base + inc)
    defect = check_fiber(A, "assembled fiber", psd=check) if check else _hermitian_defect(A)
    return FiberMatrix(basis, xi, A, defect)


def assemble_effective_fiber(mu0: float, spec: ProblemSpec, xi) -> FiberMatrix:
    if mu0 <= 0:
        raise ConfigError(f"effective coefficient must be positive, got {mu0}")
    xi = as_xi(xi, spec.d)
    basis = LatticeBasis(spec.d, spec.M)
    sym = LevySymbol(spec.d, spec.alpha)
    A = np.diag(mu0 * sym(basis.kappa(xi))).astype(complex)
    return FiberMatrix(basis, xi, A, 0.0)


def effective_diagonal(mu0: float, spec: ProblemSpec, xi) -> np.ndarray:
    basis = LatticeBasis(spec.d, spec.M)
    return mu0 * LevySymbol(spec.d, spec.alpha)(basis.kappa(as_xi(xi, spec.d)))


def assemble_first_order(ct: CoefficientTable, spec: ProblemSpec, j: int) -> np.ndarray:
    """Linear coefficient A^(j) of A(xi) along axis j (0-based), at xi = 0.

    Terms whose argument vanishes are dropped: their |xi|^alpha behaviour belongs
    to the remainder, not to the linear part.
    """
    if not 0 <= j < spec.d:
        raise ConfigError(f"axis index {j} out of range for d={spec.d}")
    basis = LatticeBasis(spec.d, spec.M)
    sym = LevySymbol(spec.d, spec.alpha)
    A = np.zeros((basis.size, basis.size), dtype=complex)
    n = basis.indices
    for m, l, a in zip(ct.m, ct.l, ct.amp):
        p_rows, q_rows = _mode_pairs(basis, m + l)
        if p_rows.size == 0:
            continue
        p, q = n[p_rows], n[q_rows]
        gu = sym.grad(TWO_PI * (l + p))[:, j]
        gw = sym.grad(TWO_PI * (l - q))[:, j]
        A[q_rows, p_rows] += 0.5 * a * (gu - gw)
    check_fiber(A, f"first-order matrix A^({j})", psd=False)
    return A


def reference_fiber(spec: ProblemSpec, xi) -> np.ndarray:
    """Diagonal of the unit-coefficient fiber c0 |2 pi n + xi|^alpha."""
    return effective_diagonal(1.0, spec, xi)


def constant_vector(spec: ProblemSpec) -> np.ndarray:
    basis = LatticeBasis(spec.d, spec.M)
    e0 = np.zeros(basis.size, dtype=complex)
    e0[basis.zero] = 1.0
    return e0


def write_matrix_dump(fm: FiberMatrix, alpha: float, path) -> None:
    """Debug dump: header with d, alpha, M, xi, then 'q p re im' per nonzero entry."""
    A = fm.entries
    with open(path, "w") as fh:
        fh.write(f"# d={fm.basis.d} alpha={alpha!r} M={fm.basis.M} xi={' '.join(repr(float(v)) for v in fm.xi)}\n")
        for qi, pi in zip(*np.nonzero(A)):
            v = A[qi, pi]
            fh.write(f"{qi} {pi} {v.real:.17g} {v.imag:.17g}\n")


# ---------------------------------------------------------------------------
# brute-force quadrature of the fiber form (d = 1 only)

def _gauss_panels(edges: np.ndarray, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * t + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def _z_rule(alpha: float, h0: float, R: float, order: int, panel: float):
    """Nodes/weights for int_{|z| < R} F(z) |z|^{-1-alpha} dz with F ~ z^2 at 0.

    Near part uses z = h0 s^{1/(2-alpha)}, which turns |z|^{1-alpha} dz into a
    constant multiple of ds; the returned weights already include |z|^{-1-alpha}.
    """
    beta = 1.0 / (2.0 - alpha)
    s_edges = np.concatenate([[0.0], 2.0 ** -np.arange(10, -1, -1)])
    s, ws = _gauss_panels(s_edges, order)
    z_near = h0 * s**beta
    w_near = ws * h0 ** (2 - alpha) / (2 - alpha) / z_near**2
    n_far = int(np.ceil((R - h0) / panel))
    z_far, w_far = _gauss_panels(np.linspace(h0, R, n_far + 1), order)
    w_far = w_far * z_far ** (-1 - alpha)
    z = np.concatenate([z_near, z_far])
    w = np.concatenate([w_near, w_far])
    return np.concatenate([-z[::-1], z]), np.concatenate([w[::-1], w])


def _oracle_block(ct, alpha, xi, idx, z, wz, nx):
    x = np.arange(nx) / nx
    kap = TWO_PI * idx + xi
    # mu(x, x + z) = sum amp exp(2 pi i ((m + l) x + l z))
    ex = np.exp(2j * np.pi * np.outer(x, (ct.m + ct.l)[:, 0]))
    ez = np.exp(2j * np.pi * np.outer(ct.l[:, 0], z))
    mu_xz = (ex * ct.amp) @ ez
    half = 0.5 * np.outer(z, kap)
    G = -2j * np.sin(half) * np.exp(1j * half)          # 1 - exp(i kap z)
    B = np.einsum("xz,zp,zq->xpq", mu_xz * wz, G, G.conj())
    # A[q, p] = 1/2 mean_x exp(2 pi i (p - q) x) B[x, p, q]
    dn = idx[None, :, 0] - idx[:, 0][:, None]
    phase = np.exp(2j * np.pi * x[:, None, None] * dn[None])
    return 0.5 * np.einsum("xqp,xpq->qp", phase, B) / nx


def oracle_matrix(ct: CoefficientTable, spec: ProblemSpec, xi, indices=None, tol: float = 1e-4,
                  h0: float = 0.25, R: float = 32.0) -> tuple[np.ndarray, float]:
    """All form entries a(xi)[e_p, e_q] for basis indices by direct quadrature (d = 1).

    Returns (matrix, estimated absolute error).  The y-integral over R is cut at
    |x - y| = R and completed by Richardson extrapolation in R (tail ~ R^-alpha
    for the periodic part of the integrand); the error estimate combines a
    panel-refinement difference with the spread of two extrapolations.
    """
    if spec.d != 1 or ct.d != 1:
        raise ConfigError("the quadrature oracle is implemented for d = 1 only")
    xi = float(as_xi(xi, 1)[0])
    alpha = spec.alpha
    if indices is None:
        indices = LatticeBasis(1, spec.M).indices
    idx = np.asarray(indices, dtype=int).reshape(-1, 1)
    deg = int(np.max(np.abs(ct.m + ct.l), initial=0)) + 2 * int(np.max(np.abs(idx)))
    nx = 2 * deg + 8
    # the cos(kappa z) tail is not removed by the R^-alpha extrapolation; push it out for small kappa
    kap = np.abs(TWO_PI * idx[:, 0] + xi)
    if np.any(kap > 0):
        R = max(R, 64.0 / float(np.min(kap[kap > 0])))

    def cut(Rc, order, panel):
        z, w = _z_rule(alpha, h0, Rc, order, panel)
        return _oracle_block(ct, alpha, xi, idx, z, w, nx)

    r_fac = 2.0**alpha
    I_half, I_R, I_2R = cut(R / 2, 12, 0.25), cut(R, 12, 0.25), cut(2 * R, 12, 0.25)
    extrap = (r_fac * I_2R - I_R) / (r_fac - 1)
    extrap_low = (r_fac * I_R - I_half) / (r_fac - 1)
    fine = cut(2 * R, 20, 0.125)
    fine_extrap = extrap + (fine - I_2R)
    err = float(np.max(np.abs(fine_extrap - extrap_low), initial=0.0))
    if err > tol * max(1.0, float(np.max(np.abs(fine_extrap)))):
        raise NumericalError(f"oracle quadrature error estimate {err:.3e} exceeds tol={tol}")
    return fine_extrap, err


def form_oracle_quadrature(ct: CoefficientTable, spec: ProblemSpec, xi, p: int, q: int,
                           tol: float = 1e-4) -> complex:
    """Single entry a(xi)[e_p, e_q] computed by brute-force quadrature (d = 1)."""
    mat, _ = oracle_matrix(ct, spec, xi, indices=[p, q] if p != q else [p], tol=tol)
    if p == q:
        return complex(mat[0, 0])
    return complex(mat[1, 0])


def oracle_discrepancy(ct: CoefficientTable, spec: ProblemSpec, xi, tol: float = 1e-4) -> dict:
    """Largest relative gap between closed-form entries and the quadrature oracle.

    Relative to max(|entry|, mu0 c0): entries that vanish identically are
    compared against the natural unit of the operator.
    """
    closed = assemble_fiber(ct, spec, xi).entries
    oracle, err = oracle_matrix(ct, spec, xi, tol=tol)
    unit = mu_effective(ct) * LevySymbol(spec.d, spec.alpha).c0
    rel = np.abs(oracle - closed) / np.maximum(np.abs(closed), unit)
    qi, pi = np.unravel_index(np.argmax(rel), rel.shape)
    return {"xi": float(as_xi(xi, 1)[0]), "max_rel": float(rel.max()), "worst_q": int(qi), "worst_p": int(pi),
            "quadrature_error": err, "closed": closed, "oracle": oracle}
