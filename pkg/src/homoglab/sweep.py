"""Resolvent approximation errors over (xi, eps) and convergence-rate fits.

Everything is computed fiberwise: the full-space error of the scaled problem is
eps^alpha times the supremum over quasimomenta of the fiber error, by the exact
scaling (dilation) identity for the resolvents.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import LatticeBasis, as_xi, assemble_fiber, effective_diagonal
from .cell import EffectiveModel
from .coefficients import CoefficientTable, ProblemSpec
from .errors import ConfigError, NumericalError
from .rates import FLOOR, fit_rate, parallel_map
from .spectral import eigensystem, operator_norm

DEFAULT_EPSILONS = tuple(2.0**-k for k in range(2, 10))


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    N_max: int = 1
    n_uniform: int = 65
    n_log: int = 48
    xi_min_factor: float = 0.1
    slope_tol: float = 0.15
    guaranteed_tol: float = 0.10
    r2_min: float = 0.99

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", tuple(sorted(eps, reverse=True)))
        if not eps or any(not (0 < e < 1) for e in eps):
            raise ConfigError("all epsilons must lie in (0, 1)")
        if self.N_max < 0:
            raise ConfigError("N_max must be non-negative")
        if self.n_uniform < 2 or self.n_log < 2:
            raise ConfigError("xi grid needs at least 2 uniform and 2 logarithmic points")


def xi_directions(d: int) -> list[np.ndarray]:
    if d == 1:
        return [np.array([1.0]), np.array([-1.0])]
    s = 1 / np.sqrt(2)
    dirs = [(1, 0), (0, 1), (s, s), (s, -s)]
    return [sgn * np.array(v, dtype=float) for v in dirs for sgn in (1, -1)]


def build_xi_grid(d: int, config: SweepConfig) -> list[np.ndarray]:
    """Uniform grid on [-pi, pi]^d plus log-spaced magnitudes along coordinate/diagonal directions."""
    t = np.linspace(-np.pi, np.pi, config.n_uniform)
    pts = [np.array(p, dtype=float) for p in np.array(np.meshgrid(*([t] * d), indexing="ij")).reshape(d, -1).T]
    mags = np.geomspace(min(config.epsilons) * config.xi_min_factor, np.pi, config.n_log)
    for u in xi_directions(d):
        pts.extend(r * u for r in mags)
    seen, out = set(), []
    for p in pts:
        key = tuple(np.round(p, 15))
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


def corrector_fiber(em: EffectiveModel, spec: ProblemSpec, xi, eps: float, m: int) -> np.ndarray:
    """Diagonal of K_m(xi, eps): (-1)^m <g0 k, k>^m (mu0 c0 |k|^alpha + eps^alpha)^-(m+1), k = 2 pi n + xi."""
    if m < 1:
        raise ConfigError("corrector index m must be >= 1")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    xi = as_xi(xi, spec.d)
    kap = LatticeBasis(spec.d, spec.M).kappa(xi)
    q = np.einsum("nj,jk,nk->n", kap, em.g0, kap)
    s0 = effective_diagonal(em.mu0, spec, xi)
    return (-q) ** m / (s0 + eps**spec.alpha) ** (m + 1)


def _fiber_errors(ct, spec, em, xi, epsilons, N_max) -> np.ndarray:
    """errors[i_eps, N] for one quasimomentum, from a single eigendecomposition."""
    fm = assemble_fiber(ct, spec, xi, check=False)
    lam, V = eigensystem(fm)
    if lam[0] < -1e-10 * lam[-1]:
        raise NumericalError(f"fiber matrix at xi={xi} is not PSD (lambda_min={lam[0]:.3e})")
    lam = np.maximum(lam, 0.0)
    s0 = effective_diagonal(em.mu0, spec, xi)
    kap = fm.basis.kappa(xi)
    q = np.einsum("nj,jk,nk->n", kap, em.g0, kap)
    out = np.zeros((len(epsilons), N_max + 1))
    idx = np.arange(len(s0))
    for i, eps in enumerate(epsilons):
        e = eps**spec.alpha
        H = (V / (lam + e)) @ V.conj().T
        H = 0.5 * (H + H.conj().T)
        base = 1.0 / (s0 + e)
        H[idx, idx] -= base
        out[i, 0] = operator_norm(H)
        for m in range(1, N_max + 1):
            km = (-q) ** m * base ** (m + 1)
            H[idx, idx] -= km
            out[i, m] = operator_norm(H)
    return out


def fiber_resolvent_error(ct: CoefficientTable, spec: ProblemSpec, em: EffectiveModel, xi, eps: float, N: int) -> float:
    """|| (A(xi) + eps^a)^-1 - (A0(xi) + eps^a)^-1 - sum_{m<=N} K_m(xi, eps) ||."""
    if N < 0:
        raise ConfigError("N must be non-negative")
    return float(_fiber_errors(ct, spec, em, as_xi(xi, spec.d), [eps], N)[0, N])


def sup_error_over_grid(ct, spec, em, grid, eps: float, N: int, threads: int = 1) -> tuple[float, np.ndarray]:
    """(max over the grid of the fiber error, arg-max xi)."""
    errs = parallel_map(lambda xi: fiber_resolvent_error(ct, spec, em, xi, eps, N), grid, threads)
    k = int(np.argmax(errs))
    return float(errs[k]), np.asarray(grid[k])


def full_space_error(E_fiber: float, eps: float, alpha: float) -> float:
    if E_fiber < 0:
        raise ConfigError("fiber error must be non-negative")
    return eps**alpha * E_fiber


def predicted_exponent(alpha: float, N: int) -> float:
    """Guaranteed rate of the N-corrector approximation: 2 - alpha for N = 0, else min(1, (N+1)(2 - alpha)).

    Past alpha = 2 - 1/(N+1) the bound saturates at 1; extra correctors beyond the
    minimal number are themselves O(eps) and cannot lower it.
    """
    if N < 0:
        raise ConfigError("N must be non-negative")
    if N == 0:
        return 2 - alpha
    return min(1.0, (N + 1) * (2 - alpha))


@dataclass
class RateReport:
    alpha: float
    epsilons: list[float]
    rows: list[dict]
    fits: dict[int, dict]
    grid_size: int
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(f["pass"] and f["guaranteed"] for f in self.fits.values())

    def table(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["N"] == N]
        return np.array([r["eps"] for r in rows]), np.array([r["E_full"] for r in rows])

    def summary(self) -> dict:
        return {"alpha": self.alpha, "grid_size": self.grid_size, "passed": self.passed,
                "fits": {str(k): v for k, v in self.fits.items()}, **self.info}


def _fit_one(eps, E_full, predicted, config: SweepConfig) -> dict:
    out = {"predicted": predicted, "excluded_eps": [], "exact": False}
    if np.all(E_full <= FLOOR):
        out.update(exact=True, slope=None, intercept=None, r2=None, n_used=0, monotone=True)
        out["pass"] = out["guaranteed"] = True
        return out
    fit = fit_rate(eps, E_full)
    if fit.r2 < config.r2_min and len(eps) > 4:
        out["excluded_eps"] = [float(eps[0])]
        fit = fit_rate(eps[1:], E_full[1:])
    out.update(fit.as_dict())
    out["pass"] = bool(abs(fit.slope - predicted) <= config.slope_tol)
    out["guaranteed"] = bool(fit.slope >= predicted - config.guaranteed_tol)
    used = E_full if not out["excluded_eps"] else E_full[1:]
    out["monotone"] = bool(np.all(used[1:] <= used[:-1] * 1.05))
    return out


def rate_experiment(ct: CoefficientTable, spec: ProblemSpec, em: EffectiveModel,
                    config: SweepConfig = SweepConfig(), threads: int = 1, grid=None) -> RateReport:
    """Sweep (xi, eps, N), take the grid sup, scale to full space and fit slopes per N."""
    eps = np.array(config.epsilons)
    grid = build_xi_grid(spec.d, config) if grid is None else [as_xi(x, spec.d) for x in grid]
    per_xi = parallel_map(lambda xi: _fiber_errors(ct, spec, em, xi, eps, config.N_max), grid, threads)
    errs = np.stack(per_xi)                                  # (xi, eps, N)
    arg = np.argmax(errs, axis=0)
    E_fiber = np.max(errs, axis=0)
    E_full = eps[:, None] ** spec.alpha * E_fiber
    rows, fits = [], {}
    for N in range(config.N_max + 1):
        for i, e in enumerate(eps):
            xi_max = grid[arg[i, N]]
            rows.append({"N": N, "eps": float(e), "E_fiber": float(E_fiber[i, N]), "E_full": float(E_full[i, N]),
                         "argmax_xi": float(xi_max[0]) if spec.d == 1 else float(np.linalg.norm(xi_max))})
        fits[N] = _fit_one(eps, E_full[:, N], predicted_exponent(spec.alpha, N), config)
    return RateReport(spec.alpha, [float(e) for e in eps], rows, fits, len(grid),
                      {"M": spec.M, "d": spec.d, "N_max": config.N_max})
