"""Eigenanalysis of fiber matrices near the bottom of the spectrum."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .assembly import (LatticeBasis, as_xi, assemble_fiber, constant_vector, reference_fiber,
                       TWO_PI)
from .cell import EffectiveModel
from .coefficients import CoefficientTable, ProblemSpec, mu_effective
from .errors import ConfigError, NumericalError
from .rates import parallel_map
from .symbol import LevySymbol, power_increment

GAP_MARGIN = 1e-6


@dataclass
class SpectralReport:
    xi: np.ndarray
    eigenvalues: np.ndarray
    gap_ok: bool
    projector_residual: float
    af_residual: float
    rho_value: float
    d0: float
    delta0: float

    def row(self) -> dict:
        return {
            "xi_norm": float(np.linalg.norm(self.xi)),
            "lambda1": float(self.eigenvalues[0]),
            "lambda2": float(self.eigenvalues[1]),
            "proj_residual": self.projector_residual,
            "af_residual": self.af_residual,
            "rho": self.rho_value,
        }


def thresholds(ct: CoefficientTable, spec: ProblemSpec) -> tuple[float, float]:
    """(d0, delta0) = (mu_- c0 pi^alpha, pi (mu_- / (3 mu_+))^(1/alpha))."""
    mu_minus, mu_plus = ct.bounds()
    c0 = LevySymbol(spec.d, spec.alpha).c0
    return mu_minus * c0 * np.pi**spec.alpha, np.pi * (mu_minus / (3 * mu_plus)) ** (1 / spec.alpha)


def operator_norm(H: np.ndarray) -> float:
    """Norm of a Hermitian matrix as its largest absolute eigenvalue."""
    ev = np.linalg.eigvalsh(H)
    return float(max(abs(ev[0]), abs(ev[-1])))


def eigensystem(fm) -> tuple[np.ndarray, np.ndarray]:
    A = fm.entries if hasattr(fm, "entries") else fm
    try:
        lam, vec = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hermitian eigensolve failed: {exc}") from exc
    scale = max(abs(lam[0]), abs(lam[-1]), 1e-300)
    res = np.max(np.linalg.norm(A @ vec - vec * lam, axis=0))
    if res > 1e-9 * scale:
        raise NumericalError(f"eigenpair residual {res:.3e} exceeds 1e-9 * ||A|| = {1e-9 * scale:.3e}")
    return lam, vec


def spectral_projector(fm, d0: float, eig=None) -> np.ndarray:
    """Rank-one projector onto the lowest eigenvector; requires the gap lambda_2 > d0/3."""
    lam, vec = eig if eig is not None else eigensystem(fm)
    if lam[1] <= d0 / 3 * (1 + GAP_MARGIN):
        raise NumericalError(f"spectral gap violated: lambda_2 = {lam[1]:.6g} <= d0/3 = {d0 / 3:.6g}")
    v = vec[:, 0]
    return np.outer(v, v.conj())


def rho_fiber(ct: CoefficientTable, spec: ProblemSpec, xi) -> float:
    """rho(xi) = a(xi)[1, 1], evaluated exactly as the (0, 0) entry of the assembled fiber."""
    xi = as_xi(xi, spec.d)
    c0 = LevySymbol(spec.d, spec.alpha).c0
    alpha = spec.alpha
    total = 0j
    for m, l, a in zip(ct.m, ct.l, ct.amp):
        if np.any(m + l):
            continue
        u = TWO_PI * l
        base = (np.linalg.norm(u) ** alpha + np.linalg.norm(u) ** alpha
                - np.linalg.norm(TWO_PI * l) ** alpha - np.linalg.norm(TWO_PI * m) ** alpha)
        inc = power_increment(u, xi, alpha) + power_increment(u, -xi, alpha)
        total += 0.5 * c0 * a * (base + inc)
    return float(total.real)


def _xi_vectors(xi_list, d):
    return [as_xi(x, d) for x in xi_list]


def _require_small(xi, delta0):
    if np.linalg.norm(xi) > delta0 * (1 + 1e-12):
        raise ConfigError(f"|xi| = {np.linalg.norm(xi):.4g} exceeds delta0 = {delta0:.4g}")


def spectral_report(ct: CoefficientTable, spec: ProblemSpec, em: EffectiveModel | None, xi) -> SpectralReport:
    xi = as_xi(xi, spec.d)
    d0, delta0 = thresholds(ct, spec)
    fm = assemble_fiber(ct, spec, xi, check=False)
    lam, vec = eigensystem(fm)
    e0 = constant_vector(spec)
    P = np.outer(e0, e0)
    inside = np.linalg.norm(xi) <= delta0
    gap_ok = bool(lam[1] > d0 / 3 * (1 + GAP_MARGIN)) if inside else bool(lam[1] >= d0 * (1 - 1e-9))
    proj = af = float("nan")
    if inside and gap_ok:
        F = spectral_projector(fm, d0, (lam, vec))
        proj = operator_norm(F - P)
        if em is not None:
            c = em.mu0 * LevySymbol(spec.d, spec.alpha)(xi) + em.quadratic(xi)
            af = operator_norm(lam[0] * F - c * P)
    return SpectralReport(xi, lam, gap_ok, proj, af, rho_fiber(ct, spec, xi), d0, delta0)


def threshold_projector_residual(ct: CoefficientTable, spec: ProblemSpec, xi_list, threads: int = 1) -> np.ndarray:
    """Rows (|xi|, ||F(xi) - P||) for |xi| <= delta0."""
    d0, delta0 = thresholds(ct, spec)
    e0 = constant_vector(spec)
    P = np.outer(e0, e0)

    def one(xi):
        _require_small(xi, delta0)
        F = spectral_projector(assemble_fiber(ct, spec, xi, check=False), d0)
        return np.linalg.norm(xi), operator_norm(F - P)

    return np.array(parallel_map(one, _xi_vectors(xi_list, spec.d), threads))


def threshold_af_residual(ct: CoefficientTable, spec: ProblemSpec, em: EffectiveModel, xi_list,
                          threads: int = 1) -> np.ndarray:
    """Rows (|xi|, ||A(xi) F(xi) - (mu0 c0 |xi|^alpha + <g0 xi, xi>) P||)."""
    d0, delta0 = thresholds(ct, spec)
    sym = LevySymbol(spec.d, spec.alpha)
    e0 = constant_vector(spec)
    P = np.outer(e0, e0)

    def one(xi):
        _require_small(xi, delta0)
        main = em.mu0 * sym(xi)
        quad = em.quadratic(xi)
        if abs(quad) > 0.5 * main:
            raise ConfigError(f"|xi| = {np.linalg.norm(xi):.3g} is outside the region where the quadratic term is subordinate")
        fm = assemble_fiber(ct, spec, xi, check=False)
        lam, vec = eigensystem(fm)
        F = spectral_projector(fm, d0, (lam, vec))
        return np.linalg.norm(xi), operator_norm(lam[0] * F - (main + quad) * P)

    return np.array(parallel_map(one, _xi_vectors(xi_list, spec.d), threads))


def eigenvalue_bound_check(ct: CoefficientTable, spec: ProblemSpec, xi_grid, threads: int = 1,
                           slack: float = 1e-9) -> dict:
    """Check mu_- lam0_j <= lam_j <= mu_+ lam0_j, the lambda_1 bounds, and lambda_2 >= d0."""
    mu_minus, mu_plus = ct.bounds()
    d0, _ = thresholds(ct, spec)
    sym = LevySymbol(spec.d, spec.alpha)

    def one(xi):
        lam = eigensystem(assemble_fiber(ct, spec, xi, check=False))[0]
        lam0 = np.sort(reference_fiber(spec, xi))
        # relative slack plus the eigensolver's absolute accuracy ~ eps ||A||
        floor = 1e3 * np.finfo(float).eps * lam[-1]
        s = float(sym(xi))
        problems = []
        if (np.any(lam < mu_minus * lam0 * (1 - slack) - floor)
                or np.any(lam > mu_plus * lam0 * (1 + slack) + floor)):
            problems.append("sandwich")
        if lam[0] < mu_minus * s * (1 - slack) - floor or lam[0] > mu_plus * s * (1 + slack) + floor:
            problems.append("lambda1")
        if lam[1] < d0 * (1 - slack):
            problems.append("lambda2")
        return {"xi": xi.tolist(), "lambda1": float(lam[0]), "lambda2": float(lam[1]), "problems": problems}

    rows = parallel_map(one, _xi_vectors(xi_grid, spec.d), threads)
    failures = [r for r in rows if r["problems"]]
    return {"ok": not failures, "n_points": len(rows), "failures": failures, "rows": rows}


def uniform_xi_grid(d: int, n: int = 65) -> list[np.ndarray]:
    """n points per axis on [-pi, pi], endpoints included (so xi = 0 is a node for odd n)."""
    t = np.linspace(-np.pi, np.pi, n)
    if d == 1:
        return [np.array([v]) for v in t]
    return [np.array([a, b]) for a in t for b in t]
