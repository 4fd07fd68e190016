"""Levy symbol c0(d, alpha) |k|^alpha, its derivatives, and an independent quadrature for c0."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import ConfigError, NumericalError


def _check(d: int, alpha: float):
    if d not in (1, 2):
        raise ConfigError(f"dimension d={d} unsupported (use 1 or 2)")
    if not (1.0 < alpha < 2.0):
        raise ConfigError(f"alpha must lie strictly in (1,2), got {alpha}")


@lru_cache(maxsize=64)
def levy_constant(d: int, alpha: float) -> float:
    """c0(d, alpha) = pi^{d/2} |Gamma(-alpha/2)| / (2^alpha Gamma((d + alpha)/2))."""
    _check(d, alpha)
    return float(np.pi ** (d / 2) * abs(gamma(-alpha / 2)) / (2**alpha * gamma((d + alpha) / 2)))


def _line_integral(alpha: float, tol: float) -> tuple[float, float]:
    """int_R (1 - cos z) / |z|^{1+alpha} dz, with an error estimate."""
    # near part: (1 - cos z)/z^2 is smooth, the z^{1-alpha} factor goes into the QAWS weight
    def smooth(z):
        if z == 0.0:
            return 0.5
        s = np.sin(z / 2)
        return 2 * s * s / (z * z)

    near, e1 = integrate.quad(smooth, 0.0, 1.0, weight="alg", wvar=(1 - alpha, 0.0),
                              epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=200)
    # far part: the non-oscillating z^{-1-alpha} piece is exact; the cosine piece via QAWF
    osc, e2 = integrate.quad(lambda z: z ** (-1 - alpha), 1.0, np.inf, weight="cos", wvar=1.0,
                             epsabs=tol * 1e-2, limlst=200)
    far = 1.0 / alpha - osc
    return 2 * (near + far), 2 * (e1 + e2)


def levy_constant_quadrature(d: int, alpha: float, tol: float = 1e-8) -> float:
    """c0 from its integral representation int (1 - cos z_1) / |z|^{d+alpha} dz.

    In d = 2 the z_2 integral is done first: for fixed z_1 it equals
    |z_1|^{-1-alpha} * int (1 + t^2)^{-(2+alpha)/2} dt, which leaves the d = 1 line integral.
    Both factors are computed numerically; the Gamma closed form is never used.
    """
    _check(d, alpha)
    if tol < 1e-8:
        raise ConfigError("tol must be at least 1e-8")
    value, err = _line_integral(alpha, tol)
    if d == 2:
        transverse, e_t = integrate.quad(lambda t: (1 + t * t) ** (-(2 + alpha) / 2), -np.inf, np.inf,
                                         epsabs=0.0, epsrel=tol * 1e-2)
        err = err * transverse + value * e_t
        value *= transverse
    if err > tol * abs(value):
        raise NumericalError(f"c0 quadrature failed to reach tol={tol} (estimated error {err:.3e})")
    return value


@dataclass(frozen=True)
class LevySymbol:
    """k -> c0 |k|^alpha with gradient and Hessian; k has shape (..., d)."""

    d: int
    alpha: float
    c0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c0", levy_constant(self.d, self.alpha))

    def _k(self, k):
        k = np.asarray(k, dtype=float)
        if self.d == 1 and (k.ndim == 0 or k.shape[-1] != 1):
            k = k[..., None]
        return k

    def __call__(self, k):
        k = self._k(k)
        return self.c0 * np.linalg.norm(k, axis=-1) ** self.alpha

    def grad(self, k):
        k = self._k(k)
        r = np.linalg.norm(k, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.c0 * self.alpha * r ** (self.alpha - 2) * k
        return np.where(r > 0, g, 0.0)

    def hess(self, k):
        k = self._k(k)
        r = np.linalg.norm(k, axis=-1)
        if np.any(r == 0):
            raise ConfigError("the Hessian of |k|^alpha is singular at k = 0")
        khat = k / r[..., None]
        eye = np.eye(self.d)
        outer = khat[..., :, None] * khat[..., None, :]
        scale = self.c0 * self.alpha * r ** (self.alpha - 2)
        return scale[..., None, None] * (eye + (self.alpha - 2) * outer)


def power_increment(u: np.ndarray, h: np.ndarray, alpha: float) -> np.ndarray:
    """|u + h|^alpha - |u|^alpha without cancellation when |h| << |u|.

    u, h broadcast over leading axes; the last axis is the spatial dimension.
    """
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    u2 = np.sum(u * u, axis=-1)
    t = 2 * np.sum(u * h, axis=-1) + np.sum(h * h, axis=-1)
    hn = np.sum(h * h, axis=-1) ** (alpha / 2)
    safe = np.where(u2 > 0, u2, 1.0)
    inc = safe ** (alpha / 2) * np.expm1(0.5 * alpha * np.log1p(t / safe))
    return np.where(u2 > 0, inc, hn)
