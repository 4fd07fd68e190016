"""Cell problem, effective matrix g0 = (corrector part) + (lattice sum g_*)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import TWO_PI, LatticeBasis, _z_rule, assemble_fiber, assemble_first_order
from .coefficients import CoefficientTable, ProblemSpec, evaluate_mu_star, mu_effective, mu_star_modes
from .errors import ConfigError, NumericalError
from .symbol import LevySymbol


@dataclass
class EffectiveModel:
    mu0: float
    g_corrector: np.ndarray
    g_star: np.ndarray
    g0: np.ndarray
    v: np.ndarray                       # (d, basis size) Fourier coefficients of v_k
    spec: ProblemSpec
    g_star_closed: np.ndarray | None = None
    g_star_tail: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def closed_form_discrepancy(self) -> float:
        if self.g_star_closed is None:
            return float("nan")
        return float(np.max(np.abs(self.g_star - self.g_star_closed), initial=0.0))

    def quadratic(self, xi) -> np.ndarray:
        """<g0 xi, xi> for xi of shape (..., d)."""
        xi = np.asarray(xi, dtype=float)
        return np.einsum("...j,jk,...k->...", xi, self.g0, xi)

    def with_g0(self, g0) -> "EffectiveModel":
        g0 = np.atleast_2d(np.asarray(g0, dtype=float))
        return EffectiveModel(self.mu0, self.g_corrector, self.g_star, g0, self.v, self.spec,
                              self.g_star_closed, self.g_star_tail, dict(self.info, g0_override=True))

    def as_dict(self) -> dict:
        return {
            "mu0": self.mu0,
            "g0": self.g0.tolist(),
            "g_corrector": self.g_corrector.tolist(),
            "g_star": self.g_star.tolist(),
            "g_star_closed_form": None if self.g_star_closed is None else self.g_star_closed.tolist(),
            "g_star_closed_form_discrepancy": self.closed_form_discrepancy,
            "g_star_tail_estimate": self.g_star_tail,
            **self.info,
        }


def solve_cell_problem(ct: CoefficientTable, spec: ProblemSpec) -> np.ndarray:
    """Fourier coefficients of the centered correctors v_k, shape (d, basis size).

    On the zero-mean subspace solves A(0) v_k = r_k, r_k[q] = i A^(k)[q, 0].
    """
    basis = LatticeBasis(spec.d, spec.M)
    A0 = assemble_fiber(ct, spec, np.zeros(spec.d)).entries
    keep = np.arange(basis.size) != basis.zero
    sub = A0[np.ix_(keep, keep)]
    ev = np.linalg.eigvalsh(sub)
    if ev[0] <= 1e-12 * ev[-1]:
        raise NumericalError(f"cell matrix is numerically singular (condition ~ {ev[-1] / max(ev[0], 1e-300):.3e})")
    v = np.zeros((spec.d, basis.size), dtype=complex)
    neg = basis.position(-basis.indices)
    for k in range(spec.d):
        r = 1j * assemble_first_order(ct, spec, k)[:, basis.zero]
        rhs = r[keep]
        sol = scipy.linalg.solve(sub, rhs, assume_a="her")
        res = np.linalg.norm(sub @ sol - rhs)
        if res > 1e-10 * max(np.linalg.norm(rhs), 1e-300):
            raise NumericalError(f"cell solve residual {res:.3e} too large for k={k}")
        v[k, keep] = sol
        conj_defect = np.max(np.abs(v[k, neg] - v[k].conj()))
        if conj_defect > 1e-10 * max(1.0, np.max(np.abs(v[k]))):
            raise NumericalError(f"corrector v_{k} is not real-valued (defect {conj_defect:.3e})")
    return v


def corrector_matrix_part(ct: CoefficientTable, spec: ProblemSpec, v: np.ndarray) -> np.ndarray:
    """Symmetrized g_jk = i sum_p A^(j)[0, p] v_k(p)."""
    basis = LatticeBasis(spec.d, spec.M)
    g = np.zeros((spec.d, spec.d), dtype=complex)
    for j in range(spec.d):
        row = assemble_first_order(ct, spec, j)[basis.zero]
        for k in range(spec.d):
            g[j, k] = 1j * row @ v[k]
    g = 0.5 * (g + g.T)
    if np.max(np.abs(g.imag)) > 1e-10 * max(1.0, np.max(np.abs(g.real))):
        raise NumericalError(f"corrector part of g0 has imaginary residue {np.max(np.abs(g.imag)):.3e}")
    return g.real


def corrector_pairing_quadrature(ct: CoefficientTable, spec: ProblemSpec, v: np.ndarray,
                                 h0: float = 0.25, R: float = 32.0) -> float:
    """d = 1: 1/2 int_R dy int_Omega dx mu(x,y) (x - y) |x-y|^{-1-alpha} (v(x) - v(y)) by quadrature.

    Independent of the first-order matrices; v enters only through its Fourier
    series evaluated pointwise.
    """
    if spec.d != 1:
        raise ConfigError("pairing quadrature is implemented for d = 1 only")
    alpha = spec.alpha
    n = LatticeBasis(1, spec.M).indices[:, 0]
    vk = v[0]
    deg = int(np.max(np.abs(ct.m + ct.l), initial=0)) + 2 * spec.M
    nx = 2 * deg + 8
    x = np.arange(nx) / nx

    def cut(Rc, order, panel):
        z, wz = _z_rule(alpha, h0, Rc, order, panel)
        mu_xz = (np.exp(2j * np.pi * np.outer(x, (ct.m + ct.l)[:, 0])) * ct.amp) @ np.exp(2j * np.pi * np.outer(ct.l[:, 0], z))
        vx = np.exp(2j * np.pi * np.outer(x, n)) * vk               # (x, n)
        half = np.pi * np.outer(z, n)
        dz = -2j * np.sin(half) * np.exp(1j * half)                  # 1 - exp(2 pi i n z)
        diff = vx @ dz.T                                             # v(x) - v(x + z)
        val = 0.5 * np.sum(mu_xz * diff * (-z) * wz) / nx
        return val

    r_fac = 2.0**alpha
    I_R, I_2R = cut(R, 16, 0.125), cut(2 * R, 16, 0.125)
    val = (r_fac * I_2R - I_R) / (r_fac - 1)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise NumericalError(f"pairing quadrature has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# lattice sum g_*

def _box_rule(lo: np.ndarray, hi: np.ndarray, order: int):
    """Tensor Gauss-Legendre nodes/weights on a batch of boxes lo, hi of shape (B, d)."""
    t, w = np.polynomial.legendre.leggauss(order)
    d = lo.shape[1]
    grids = np.meshgrid(*([t] * d), indexing="ij")
    ref = np.stack([g.ravel() for g in grids], axis=-1)            # (Q, d)
    wref = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    half = 0.5 * (hi - lo)
    nodes = lo[:, None, :] + half[:, None, :] * (ref[None] + 1)
    weights = np.prod(half, axis=1)[:, None] * wref[None]
    return nodes, weights


def _tensor_integrand(z: np.ndarray, alpha: float) -> np.ndarray:
    """z_j z_k / (2 |z|^{d+alpha}) -> (..., d, d)."""
    d = z.shape[-1]
    r = np.linalg.norm(z, axis=-1)
    return z[..., :, None] * z[..., None, :] / (2 * r[..., None, None] ** (d + alpha))


def _dyadic_shell_boxes(d: int, h: float):
    """Boxes covering [0, 2h]^d minus [0, h]^d."""
    boxes = []
    for corner in np.ndindex(*([2] * d)):
        if any(corner):
            c = np.array(corner, dtype=float)
            boxes.append((c * h, (c + 1) * h))
    lo, hi = map(np.array, zip(*boxes))
    return lo, hi


def g_star_cell_sum(ct: CoefficientTable, spec: ProblemSpec, R_cells: int = 64, quad_order: int = 16,
                    levels: int = 16, extrapolate: bool = True) -> tuple[np.ndarray, float]:
    """Cell-by-cell sum of int_{Omega+n} mu_*(z) z_j z_k / (2|z|^{d+alpha}) dz, ||n||_inf <= R_cells.

    Returns (matrix, tail estimate); with extrapolate=False the raw truncated
    sum is returned instead of the tail-corrected one.  Cells with a corner at the origin are
    refined dyadically; the innermost box uses mu_*(0) times the exact
    homogeneous integral (a geometric series over self-similar shells).
    """
    if R_cells < 8 or quad_order < 8:
        raise ConfigError("g_star_cell_sum needs R_cells >= 8 and quad_order >= 8")
    d, alpha = spec.d, spec.alpha
    if not mu_star_modes(ct):
        return np.zeros((d, d)), 0.0

    cells = np.array(list(np.ndindex(*([2 * R_cells + 1] * d)))) - R_cells
    origin_cell = np.all((cells == 0) | (cells == -1), axis=1)
    regular = cells[~origin_cell]
    ring = np.max(np.abs(regular), axis=1)                          # ||n||_inf, for the R/2 partial sum
    per_cell = np.zeros((len(regular), d, d))
    chunk = max(1, 200_000 // quad_order**d)
    for s in range(0, len(regular), chunk):
        lo = regular[s:s + chunk].astype(float)
        nodes, w = _box_rule(lo, lo + 1, quad_order)
        f = evaluate_mu_star(ct, nodes)[..., None, None] * _tensor_integrand(nodes, alpha)
        per_cell[s:s + chunk] = np.einsum("bq,bqjk->bjk", w, f)

    # corner cells: dyadic shells plus an analytically handled core
    shell_lo, shell_hi = _dyadic_shell_boxes(d, 0.5)
    nodes1, w1 = _box_rule(shell_lo, shell_hi, quad_order)
    homog_shell = np.einsum("bq,bqjk->jk", w1, _tensor_integrand(nodes1, alpha))
    shrink = 2.0 ** -(2 - alpha)
    core_unit = homog_shell / (1 - shrink)                          # int over [0,1]^d of z z^T/(2|z|^{d+a})
    mu_star0 = float(evaluate_mu_star(ct, np.zeros(d)))
    corner = np.zeros((d, d))
    for sign in np.ndindex(*([2] * d)):
        sgn = np.where(np.array(sign) == 1, -1.0, 1.0)
        flip = np.outer(sgn, sgn)
        for k in range(levels):
            h = 2.0 ** -(k + 1)
            lo, hi = _dyadic_shell_boxes(d, h)
            nodes, w = _box_rule(lo, hi, quad_order)
            nodes = nodes * sgn
            f = evaluate_mu_star(ct, nodes)[..., None, None] * _tensor_integrand(nodes, alpha)
            corner += np.einsum("bq,bqjk->jk", w, f)
        corner += mu_star0 * (2.0**-levels) ** (2 - alpha) * core_unit * flip

    # the truncation error of the cell sum behaves like a R^-alpha + b R^-(alpha+1)
    # (far cells contribute ~ |n|^{-d-alpha} once the zero mean of mu_* cancels the
    # leading term), so two Richardson stages on the boxes R/4, R/2, R remove it
    sums = [corner + per_cell[ring <= R_cells // k].sum(axis=0) for k in (4, 2, 1)]
    total = sums[-1]
    for p in (alpha, alpha + 1):
        f = 2.0**p
        sums = [(f * hi - lo) / (f - 1) for lo, hi in zip(sums[:-1], sums[1:])]
    extrap = sums[-1]
    tail = float(np.max(np.abs(extrap - total)))
    if not extrapolate:
        return 0.5 * (total + total.T), tail
    return 0.5 * (extrap + extrap.T), tail


def g_star_closed_form(ct: CoefficientTable, spec: ProblemSpec) -> np.ndarray:
    """g_* = 1/2 sum_{m != 0} amp[m, -m] Hess(c0 |k|^alpha)(2 pi m)."""
    sym = LevySymbol(spec.d, spec.alpha)
    g = np.zeros((spec.d, spec.d))
    for m, a in mu_star_modes(ct).items():
        g += 0.5 * a * sym.hess(TWO_PI * np.array(m, dtype=float))
    return g


def effective_model(ct: CoefficientTable, spec: ProblemSpec, R_cells: int = 64, quad_order: int = 16) -> EffectiveModel:
    mu0 = mu_effective(ct)
    v = solve_cell_problem(ct, spec)
    g_corr = corrector_matrix_part(ct, spec, v)
    g_star, tail = g_star_cell_sum(ct, spec, R_cells, quad_order)
    g_closed = g_star_closed_form(ct, spec)
    g0 = g_corr + g_star
    if np.max(np.abs(g0 - g0.T)) > 1e-10:
        raise NumericalError("effective matrix g0 is not symmetric")
    return EffectiveModel(mu0, g_corr, g_star, g0, v, spec, g_closed, tail,
                          {"R_cells": R_cells, "quad_order": quad_order})
