"""Periodic jump coefficient mu(x, y) stored as a finite trigonometric polynomial.

A table maps index pairs (m, l) in Z^d x Z^d to complex amplitudes so that

    mu(x, y) = sum_{m,l} amp[m, l] * exp(2 pi i (<m, x> + <l, y>)).

Realness and the swap symmetry mu(x, y) = mu(y, x) are constraints on the
amplitudes; they are checked, never silently enforced (except that the config
loader may add missing conjugate partners).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ConfigError

SYMMETRY_TOL = 1e-12
IMAG_TOL = 1e-10

Index = tuple[int, ...]
ModeKey = tuple[Index, Index]


@dataclass(frozen=True)
class ProblemSpec:
    d: int
    alpha: float
    M: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError(f"dimension d={self.d} unsupported (use 1 or 2)")
        if not (1.0 < self.alpha < 2.0):
            raise ConfigError(f"alpha must lie strictly in (1,2), got {self.alpha}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"truncation M must be a positive integer, got {self.M}")

    @property
    def gamma(self) -> float:
        return self.alpha / 2

    @property
    def basis_size(self) -> int:
        return (2 * self.M + 1) ** self.d

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class CoefficientTable:
    """Fourier amplitudes of mu plus (once validated) sampled bounds mu_-, mu_+."""

    d: int
    modes: Mapping[ModeKey, complex]
    mu_minus: float | None = None
    mu_plus: float | None = None
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for (m, l), a in self.modes.items():
            m, l = tuple(int(v) for v in m), tuple(int(v) for v in l)
            if len(m) != self.d or len(l) != self.d:
                raise ConfigError(f"mode ({m}, {l}) does not have dimension {self.d}")
            clean[(m, l)] = complex(a)
        object.__setattr__(self, "modes", clean)
        keys = sorted(clean)
        m_arr = np.array([k[0] for k in keys], dtype=int).reshape(len(keys), self.d)
        l_arr = np.array([k[1] for k in keys], dtype=int).reshape(len(keys), self.d)
        amp = np.array([clean[k] for k in keys], dtype=complex)
        object.__setattr__(self, "_arrays", (m_arr, l_arr, amp))

    @property
    def m(self) -> np.ndarray:
        return self._arrays[0]

    @property
    def l(self) -> np.ndarray:
        return self._arrays[1]

    @property
    def amp(self) -> np.ndarray:
        return self._arrays[2]

    def __len__(self):
        return len(self.modes)

    def bounds(self) -> tuple[float, float]:
        if self.mu_minus is None or self.mu_plus is None:
            raise ConfigError("coefficient table has not been validated (no mu bounds)")
        return self.mu_minus, self.mu_plus


@dataclass
class ValidationReport:
    swap_symmetric: bool
    conjugate_symmetric: bool
    positive: bool
    mu_minus: float
    mu_plus: float
    max_swap_defect: float
    max_conjugate_defect: float
    messages: list[str]

    @property
    def valid(self) -> bool:
        return self.swap_symmetric and self.conjugate_symmetric and self.positive

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "swap_symmetric": self.swap_symmetric,
            "conjugate_symmetric": self.conjugate_symmetric,
            "positive": self.positive,
            "mu_minus": self.mu_minus,
            "mu_plus": self.mu_plus,
            "max_swap_defect": self.max_swap_defect,
            "max_conjugate_defect": self.max_conjugate_defect,
            "messages": list(self.messages),
        }


def default_grid_points(d: int) -> int:
    # the sampling grid lives on Omega x Omega, i.e. 2d axes
    return 256 if d == 1 else 32


def _neg(idx: Index) -> Index:
    return tuple(-v for v in idx)


def sample_mu_grid(ct: CoefficientTable, n: int) -> np.ndarray:
    """Real part of mu on the uniform tensor grid of Omega x Omega (n points per axis)."""
    t = np.arange(n) / n
    m, l, amp = ct.m, ct.l, ct.amp
    ex = [np.exp(2j * np.pi * np.outer(m[:, j], t)) for j in range(ct.d)]
    ey = [np.exp(2j * np.pi * np.outer(l[:, j], t)) for j in range(ct.d)]
    if ct.d == 1:
        vals = np.einsum("k,ka,kb->ab", amp, ex[0], ey[0])
    else:
        vals = np.einsum("k,ka,kb,kc,ke->abce", amp, ex[0], ex[1], ey[0], ey[1])
    return vals


def validate_coefficient(ct: CoefficientTable, grid_points_per_axis: int | None = None) -> ValidationReport:
    if not ct.modes:
        raise ConfigError("coefficient table has no modes")
    n = grid_points_per_axis or default_grid_points(ct.d)
    if n < 8:
        raise ConfigError("grid_points_per_axis must be at least 8")
    messages = []

    swap_defect = 0.0
    conj_defect = 0.0
    for (m, l), a in ct.modes.items():
        partner = ct.modes.get((l, m), 0.0)
        swap_defect = max(swap_defect, abs(a - partner))
        conj = ct.modes.get((_neg(m), _neg(l)), 0.0)
        conj_defect = max(conj_defect, abs(a - np.conj(conj)))
    swap_ok = swap_defect <= SYMMETRY_TOL
    conj_ok = conj_defect <= SYMMETRY_TOL
    if not swap_ok:
        messages.append(f"swap symmetry violated (max defect {swap_defect:.3e})")
    if not conj_ok:
        messages.append(f"conjugate symmetry violated (max defect {conj_defect:.3e})")

    vals = sample_mu_grid(ct, n)
    lo, hi = float(vals.real.min()), float(vals.real.max())
    positive = lo > 0
    if not positive:
        messages.append(f"sampled minimum of mu is {lo:.6g} <= 0")
    return ValidationReport(swap_ok, conj_ok, positive, lo, hi, swap_defect, conj_defect, messages)


def checked_table(d: int, modes: Mapping[ModeKey, complex], grid_points_per_axis: int | None = None) -> CoefficientTable:
    """Build a table, validate it and attach the sampled bounds. Raises ConfigError if invalid."""
    ct = CoefficientTable(d, modes)
    report = validate_coefficient(ct, grid_points_per_axis)
    if not report.valid:
        raise ConfigError("invalid coefficient table: " + "; ".join(report.messages))
    return replace(ct, mu_minus=report.mu_minus, mu_plus=report.mu_plus)


def complete_conjugates(modes: Mapping[ModeKey, complex]) -> dict[ModeKey, complex]:
    """Add missing conjugate partners amp[-m,-l] = conj(amp[m,l]); error on conflicts."""
    out = {k: complex(v) for k, v in modes.items()}
    for (m, l), a in list(out.items()):
        key = (_neg(m), _neg(l))
        if key in out:
            if abs(out[key] - np.conj(a)) > SYMMETRY_TOL:
                raise ConfigError(f"conflicting amplitudes for modes ({m}, {l}) and {key}")
        else:
            out[key] = np.conj(a)
    return out


def evaluate_mu(ct: CoefficientTable, x, y) -> np.ndarray | float:
    """mu(x, y) for points of shape (..., d) (or scalars when d = 1)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if ct.d == 1:
        x = x[..., None]
        y = y[..., None]
    x, y = np.broadcast_arrays(x, y)
    phase = x @ ct.m.T + y @ ct.l.T
    val = np.exp(2j * np.pi * phase) @ ct.amp
    if np.max(np.abs(val.imag), initial=0.0) > IMAG_TOL:
        raise ConfigError("mu has a non-negligible imaginary part; the table is corrupted")
    val = val.real
    return float(val) if val.ndim == 0 else val


def mu_effective(ct: CoefficientTable) -> float:
    zero = (0,) * ct.d
    if (zero, zero) not in ct.modes:
        raise ConfigError("mean amplitude mu_{0,0} is missing")
    a = ct.modes[(zero, zero)]
    if abs(a.imag) > 1e-14:
        raise ConfigError(f"mean amplitude mu_{{0,0}} = {a} is not real")
    return a.real


def mu_star_modes(ct: CoefficientTable) -> dict[Index, float]:
    """Anti-diagonal amplitudes m -> amp[m, -m], m != 0 (the cosine series of mu_*)."""
    out = {}
    for (m, l), a in ct.modes.items():
        if any(m) and l == _neg(m):
            if abs(a.imag) > SYMMETRY_TOL:
                raise ConfigError(f"anti-diagonal amplitude at m={m} is not real: {a}")
            out[m] = a.real
    return dict(sorted(out.items()))


def evaluate_mu_star(ct: CoefficientTable, z) -> np.ndarray:
    """mu_*(z) = sum_{m != 0} amp[m, -m] cos(2 pi <m, z>), z of shape (..., d)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] != ct.d:
        raise ConfigError(f"points must have trailing dimension {ct.d}")
    out = np.zeros(z.shape[:-1])
    for m, a in mu_star_modes(ct).items():
        out += a * np.cos(2 * np.pi * (z @ np.array(m, dtype=float)))
    return out


# fixtures used throughout tests, configs and scripts

def constant_table(value: float = 1.0, d: int = 1) -> CoefficientTable:
    zero = (0,) * d
    return checked_table(d, {(zero, zero): value})


def fixture_a() -> CoefficientTable:
    """mu(x, y) = 1 + cos(2 pi (x - y)) / 2 in d = 1 (a difference kernel)."""
    return checked_table(1, {((0,), (0,)): 1.0, ((1,), (-1,)): 0.25, ((-1,), (1,)): 0.25})


def fixture_b(d: int = 1) -> CoefficientTable:
    """mu(x, y) = 1 + 0.3 (cos 2 pi x_1 + cos 2 pi y_1)."""
    zero = (0,) * d
    e1 = (1,) + (0,) * (d - 1)
    me1 = _neg(e1)
    modes = {(zero, zero): 1.0}
    for v in (e1, me1):
        modes[(v, zero)] = 0.15
        modes[(zero, v)] = 0.15
    return checked_table(d, modes)
