"""Config loading, subcommand dispatch and deterministic CSV/JSON artifacts.

    homoglab <command> --config <path> [--out <dir>] [--threads k]

Exit codes: 0 all checks passed, 1 acceptance failure, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import LatticeBasis, oracle_discrepancy
from .cell import EffectiveModel, effective_model
from .coefficients import (CoefficientTable, ProblemSpec, complete_conjugates, mu_effective,
                           validate_coefficient)
from .errors import ConfigError, HomogLabError, NumericalError
from .rates import FLOOR, fit_rate
from .spectral import (eigenvalue_bound_check, rho_fiber, spectral_report, thresholds, uniform_xi_grid)
from .sweep import SweepConfig, rate_experiment
from .symbol import LevySymbol, levy_constant_quadrature

COMMANDS = ("validate", "constants", "effective", "rho-scan", "threshold", "rate-sweep", "oracle-check")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "oracle_rel": 1e-3,         # closed form vs quadrature, relative
    "oracle_quad": 1e-4,        # requested quadrature accuracy
    "g_star_rel": 1e-2,         # lattice sum vs closed form
    "slope_slack": 0.1,         # slack on rho / af remainder slopes
    "proj_slope_min": 0.9,
    "exact_floor": 1e-12,       # residuals below this count as exactly zero
}
DEFAULT_SCAN = {"xi_min": 1e-3, "xi_max": 1e-1, "n": 25, "af_xi_min": 1e-2, "n_grid": 65}
DEFAULT_ORACLE_XI = (0.0, 0.3, 1.0)

_TOP_KEYS = {"d", "alpha", "M", "modes", "sweep", "cell_sum", "output_dir", "tolerances", "fixture_id", "seed",
             "scan", "oracle_xi"}


@dataclass
class RunConfig:
    spec: ProblemSpec
    table: CoefficientTable
    sweep: SweepConfig = field(default_factory=SweepConfig)
    R_cells: int = 64
    quad_order: int = 16
    output_dir: str = "results"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    scan: dict = field(default_factory=lambda: dict(DEFAULT_SCAN))
    oracle_xi: tuple = DEFAULT_ORACLE_XI
    fixture_id: str = "custom"
    seed: int | None = None
    fingerprint: str = ""

    def canonical(self) -> dict:
        """Everything that determines the numbers (the output directory does not)."""
        modes = [{"m": list(m), "l": list(l), "re": a.real, "im": a.imag}
                 for (m, l), a in sorted(self.table.modes.items())]
        sweep = {f.name: getattr(self.sweep, f.name) for f in fields(SweepConfig)}
        sweep["epsilons"] = list(sweep["epsilons"])
        return {"d": self.spec.d, "alpha": self.spec.alpha, "M": self.spec.M, "modes": modes, "sweep": sweep,
                "cell_sum": {"R_cells": self.R_cells, "quad_order": self.quad_order},
                "tolerances": dict(sorted(self.tolerances.items())), "scan": dict(sorted(self.scan.items())),
                "oracle_xi": list(self.oracle_xi), "fixture_id": self.fixture_id, "seed": self.seed}


def config_fingerprint(canonical: dict) -> str:
    text = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _int_list(value, d, where, errors):
    if not isinstance(value, list) or len(value) != d or not all(isinstance(v, int) and not isinstance(v, bool)
                                                                  for v in value):
        errors.append(f"{where}: expected a list of {d} integers, got {value!r}")
        return None
    return tuple(value)


def _number(value, where, errors, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not isinstance(value, int)):
        errors.append(f"{where}: expected {'an integer' if kind is int else 'a number'}, got {value!r}")
        return None
    return kind(value)


def _parse_modes(raw, d, errors) -> dict:
    if not isinstance(raw, list) or not raw:
        errors.append("modes: expected a non-empty list of {m, l, re, im} objects")
        return {}
    modes = {}
    for i, item in enumerate(raw):
        where = f"modes[{i}]"
        if not isinstance(item, dict):
            errors.append(f"{where}: expected an object")
            continue
        extra = set(item) - {"m", "l", "re", "im"}
        if extra:
            errors.append(f"{where}: unknown fields {sorted(extra)}")
        m = _int_list(item.get("m"), d, f"{where}.m", errors)
        l = _int_list(item.get("l"), d, f"{where}.l", errors)
        re = _number(item.get("re", 0.0), f"{where}.re", errors)
        im = _number(item.get("im", 0.0), f"{where}.im", errors)
        if None in (m, l, re, im):
            continue
        if (m, l) in modes:
            errors.append(f"{where}: duplicate mode (m={list(m)}, l={list(l)})")
            continue
        modes[(m, l)] = complex(re, im)
    return modes


def _overrides(raw, defaults: dict, name: str, errors) -> dict:
    out = dict(defaults)
    if raw is None:
        return out
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected an object")
        return out
    for key, value in raw.items():
        if key not in defaults:
            errors.append(f"{name}.{key}: unknown key (known: {sorted(defaults)})")
            continue
        kind = int if isinstance(defaults[key], int) else float
        v = _number(value, f"{name}.{key}", errors, kind)
        if v is not None and v <= 0:
            errors.append(f"{name}.{key}: must be positive, got {v}")
        elif v is not None:
            out[key] = v
    return out


def parse_config(raw: dict, source: str = "<config>") -> RunConfig:
    """Validate a decoded config; every violated invariant is reported at once."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    errors = []
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level keys {sorted(unknown)}")
    for key in ("d", "alpha", "M", "modes"):
        if key not in raw:
            errors.append(f"missing required field '{key}'")
    d = _number(raw.get("d", 1), "d", errors, int)
    alpha = _number(raw.get("alpha", 1.5), "alpha", errors)
    M = _number(raw.get("M", 1), "M", errors, int)
    spec = None
    # probe each field against a known-good spec so that all violations are reported together
    for name, value in (("d", d), ("alpha", alpha), ("M", M)):
        if value is not None:
            try:
                ProblemSpec(**{"d": 1, "alpha": 1.5, "M": 1, name: value})
            except ConfigError as exc:
                errors.append(str(exc))
    if None not in (d, alpha, M) and not errors:
        spec = ProblemSpec(d, alpha, M)
    modes = _parse_modes(raw.get("modes"), d if d in (1, 2) else 1, errors) if "modes" in raw else {}

    table = None
    if modes and d in (1, 2):
        try:
            modes = complete_conjugates(modes)
            ct = CoefficientTable(d, modes)
            report = validate_coefficient(ct)
            errors.extend(report.messages)
            if report.valid:
                table = CoefficientTable(d, modes, report.mu_minus, report.mu_plus)
                mu_effective(table)
        except ConfigError as exc:
            errors.append(str(exc))
            table = None

    sweep = SweepConfig()
    if raw.get("sweep") is not None:
        s = raw["sweep"]
        if not isinstance(s, dict):
            errors.append("sweep: expected an object")
        else:
            known = {f.name for f in fields(SweepConfig)}
            bad = set(s) - known
            if bad:
                errors.append(f"sweep: unknown keys {sorted(bad)} (known: {sorted(known)})")
            try:
                sweep = SweepConfig(**{k: (tuple(v) if k == "epsilons" else v) for k, v in s.items() if k in known})
            except (ConfigError, TypeError) as exc:
                errors.append(f"sweep: {exc}")

    cell = _overrides(raw.get("cell_sum"), {"R_cells": 64, "quad_order": 16}, "cell_sum", errors)
    tol = _overrides(raw.get("tolerances"), DEFAULT_TOLERANCES, "tolerances", errors)
    scan = _overrides(raw.get("scan"), DEFAULT_SCAN, "scan", errors)
    if scan["xi_min"] >= scan["xi_max"]:
        errors.append("scan: xi_min must be below xi_max")
    oracle_xi = raw.get("oracle_xi", list(DEFAULT_ORACLE_XI))
    if not isinstance(oracle_xi, list) or not oracle_xi or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) or abs(x) > math.pi for x in oracle_xi):
        errors.append("oracle_xi: expected a non-empty list of numbers in [-pi, pi]")
        oracle_xi = list(DEFAULT_ORACLE_XI)
    fixture_id = raw.get("fixture_id", "custom")
    if not isinstance(fixture_id, str) or not fixture_id:
        errors.append("fixture_id: expected a non-empty string")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        errors.append("seed: expected an integer")
    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir: expected a non-empty string")

    if errors or spec is None or table is None:
        if not errors:
            errors.append("coefficient table could not be built")
        raise ConfigError(f"{source}: invalid configuration:\n  - " + "\n  - ".join(errors))
    cfg = RunConfig(spec, table, sweep, cell["R_cells"], cell["quad_order"], output_dir, tol, scan,
                    tuple(float(x) for x in oracle_xi), fixture_id, seed)
    cfg.fingerprint = config_fingerprint(cfg.canonical())
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw, str(path))


# artifact writers

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.17g}"
    if value is None:
        return ""
    return str(value)


def _header_lines(meta: dict) -> list[str]:
    meta = {"artifact_version": __version__, **meta}
    return ["# " + " ".join(f"{k}={meta[k]}" for k in meta)]


def write_csv(rows, header, path, meta: dict | None = None) -> Path:
    """Comment line with metadata (fingerprint, version), column line, then rows at 17 significant digits."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            for line in _header_lines(meta or {}):
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(row[h] if isinstance(row, dict) else row[i]) for i, h in enumerate(header)])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(f"{float(obj):.17g}")
    if isinstance(obj, complex):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    return obj


def write_report(summary: dict, path, meta: dict | None = None) -> Path:
    path = Path(path)
    doc = {"artifact_version": __version__, **(meta or {}), "summary": _jsonable(summary)}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# commands

@dataclass
class CommandResult:
    passed: bool
    summary: dict
    tables: dict = field(default_factory=dict)       # name -> (header, rows)
    failures: list = field(default_factory=list)


def _slope_or_exact(x, y, floor):
    y = np.asarray(y, dtype=float)
    if np.all(y <= floor):
        return {"exact": True, "slope": None, "r2": None}
    fit = fit_rate(x, y, floor=max(floor, FLOOR))
    return {"exact": False, "slope": fit.slope, "r2": fit.r2, "n_used": fit.n_used}


def _scan_points(cfg: RunConfig, lo=None):
    s = cfg.scan
    mags = np.geomspace(lo if lo is not None else s["xi_min"], s["xi_max"], int(s["n"]))
    e1 = np.zeros(cfg.spec.d)
    e1[0] = 1.0
    return mags, [r * e1 for r in mags]


def _model(cfg: RunConfig) -> EffectiveModel:
    return effective_model(cfg.table, cfg.spec, R_cells=cfg.R_cells, quad_order=cfg.quad_order)


def cmd_validate(cfg: RunConfig, threads: int) -> CommandResult:
    report = validate_coefficient(cfg.table)
    return CommandResult(report.valid, {**report.as_dict(), "n_modes": len(cfg.table)})


def cmd_constants(cfg: RunConfig, threads: int) -> CommandResult:
    c0 = LevySymbol(cfg.spec.d, cfg.spec.alpha).c0
    c0_quad = levy_constant_quadrature(cfg.spec.d, cfg.spec.alpha)
    d0, delta0 = thresholds(cfg.table, cfg.spec)
    mu_minus, mu_plus = cfg.table.bounds()
    rel = abs(c0 - c0_quad) / c0
    return CommandResult(rel <= 1e-6, {"c0": c0, "c0_quadrature": c0_quad, "c0_rel_discrepancy": rel, "d0": d0,
                                       "delta0": delta0, "mu0": mu_effective(cfg.table), "mu_minus": mu_minus,
                                       "mu_plus": mu_plus})


def cmd_effective(cfg: RunConfig, threads: int) -> CommandResult:
    em = _model(cfg)
    closed = em.g_star_closed
    scale = float(np.max(np.abs(closed), initial=0.0)) if closed is not None else 0.0
    disc = em.closed_form_discrepancy
    ok = closed is None or disc <= cfg.tolerances["g_star_rel"] * scale + cfg.tolerances["exact_floor"]
    return CommandResult(bool(ok), {**em.as_dict(), "g_star_rel_tolerance": cfg.tolerances["g_star_rel"]})


def cmd_rho_scan(cfg: RunConfig, threads: int) -> CommandResult:
    em = _model(cfg)
    sym = LevySymbol(cfg.spec.d, cfg.spec.alpha)
    mags, pts = _scan_points(cfg)
    rows = []
    for r, xi in zip(mags, pts):
        rho = rho_fiber(cfg.table, cfg.spec, xi)
        lead = em.mu0 * float(sym(xi))
        quad = float(np.einsum("j,jk,k->", xi, em.g_star, xi))
        rows.append({"xi_norm": r, "rho": rho, "leading": lead, "quadratic": quad,
                     "remainder": abs(rho - lead - quad)})
    fit = _slope_or_exact(mags, [r["remainder"] for r in rows], cfg.tolerances["exact_floor"])
    target = 1 + cfg.spec.alpha - cfg.tolerances["slope_slack"]
    ok = fit["exact"] or fit["slope"] >= target
    header = ["xi_norm", "rho", "leading", "quadratic", "remainder"]
    return CommandResult(bool(ok), {"remainder_fit": fit, "slope_target": target, "g_star": em.g_star},
                         {"rho_scan": (header, rows)},
                         [] if ok else [f"rho remainder slope {fit['slope']:.3f} < {target:.3f}"])


def cmd_threshold(cfg: RunConfig, threads: int) -> CommandResult:
    em = _model(cfg)
    tol = cfg.tolerances
    mags, pts = _scan_points(cfg)
    reports = [spectral_report(cfg.table, cfg.spec, em, xi) for xi in pts]
    rows = [r.row() for r in reports]
    failures = [f"gap violated at |xi|={r.row()['xi_norm']:.3g}" for r in reports if not r.gap_ok]
    proj = _slope_or_exact(mags, [r["proj_residual"] for r in rows], tol["exact_floor"])
    sel = mags >= cfg.scan["af_xi_min"] * (1 - 1e-12)
    af = _slope_or_exact(mags[sel], np.array([r["af_residual"] for r in rows])[sel], tol["exact_floor"])
    ablation_rows = [spectral_report(cfg.table, cfg.spec, em.with_g0(np.zeros_like(em.g0)), xi).af_residual
                     for xi in np.array(pts)[sel]]
    ablation = _slope_or_exact(mags[sel], ablation_rows, tol["exact_floor"])
    af_target = 1 + cfg.spec.alpha - tol["slope_slack"]
    if not (proj["exact"] or proj["slope"] >= tol["proj_slope_min"]):
        failures.append(f"projector slope {proj['slope']:.3f} < {tol['proj_slope_min']}")
    if not (af["exact"] or af["slope"] >= af_target):
        failures.append(f"af slope {af['slope']:.3f} < {af_target:.3f}")
    bounds = eigenvalue_bound_check(cfg.table, cfg.spec, uniform_xi_grid(cfg.spec.d, int(cfg.scan["n_grid"])),
                                    threads)
    if not bounds["ok"]:
        failures.append(f"eigenvalue bounds fail at {len(bounds['failures'])} grid points")
    d0, delta0 = thresholds(cfg.table, cfg.spec)
    summary = {"d0": d0, "delta0": delta0, "g0": em.g0, "projector_fit": proj, "af_fit": af,
               "af_slope_target": af_target, "ablation_fit": ablation,
               "eigenvalue_bounds": {"ok": bounds["ok"], "n_points": bounds["n_points"],
                                     "failures": bounds["failures"]}}
    header = ["xi_norm", "lambda1", "lambda2", "proj_residual", "af_residual", "rho"]
    return CommandResult(not failures, summary, {"threshold": (header, rows)}, failures)


def cmd_rate_sweep(cfg: RunConfig, threads: int) -> CommandResult:
    em = _model(cfg)
    rep = rate_experiment(cfg.table, cfg.spec, em, cfg.sweep, threads=threads)
    header = ["N", "eps", "E_fiber", "E_full", "argmax_xi"]
    failures = [f"N={n}: slope {f['slope']} vs predicted {f['predicted']}" for n, f in rep.fits.items()
                if f["pass"] is False or f["guaranteed"] is False]
    return CommandResult(rep.passed, rep.summary(), {"rates": (header, rep.rows)}, failures)


def cmd_oracle_check(cfg: RunConfig, threads: int) -> CommandResult:
    if cfg.spec.d != 1:
        raise ConfigError("oracle-check supports d = 1 only")
    tol = cfg.tolerances
    rows, worst = [], {}
    idx = LatticeBasis(1, cfg.spec.M).indices[:, 0]
    for xi in cfg.oracle_xi:
        res = oracle_discrepancy(cfg.table, cfg.spec, xi, tol=tol["oracle_quad"])
        closed, oracle = res["closed"], res["oracle"]
        unit = mu_effective(cfg.table) * LevySymbol(1, cfg.spec.alpha).c0
        for a in range(len(idx)):
            for b in range(len(idx)):
                c, o = closed[a, b], oracle[a, b]
                rows.append({"xi": xi, "q": idx[a], "p": idx[b], "closed_re": c.real, "closed_im": c.imag,
                             "oracle_re": o.real, "oracle_im": o.imag,
                             "rel_discrepancy": abs(o - c) / max(abs(c), unit)})
        worst[str(xi)] = {"max_rel": res["max_rel"], "quadrature_error": res["quadrature_error"]}
    max_rel = max(w["max_rel"] for w in worst.values())
    ok = max_rel <= tol["oracle_rel"]
    header = ["xi", "q", "p", "closed_re", "closed_im", "oracle_re", "oracle_im", "rel_discrepancy"]
    return CommandResult(ok, {"max_rel": max_rel, "tolerance": tol["oracle_rel"], "per_xi": worst},
                         {"oracle": (header, rows)}, [] if ok else [f"max relative discrepancy {max_rel:.3e}"])


_DISPATCH = {"validate": cmd_validate, "constants": cmd_constants, "effective": cmd_effective,
             "rho-scan": cmd_rho_scan, "threshold": cmd_threshold, "rate-sweep": cmd_rate_sweep,
             "oracle-check": cmd_oracle_check}


def run_command(cmd: str, cfg: RunConfig, out_dir=None, threads: int = 1) -> tuple[int, CommandResult | None]:
    """Run one subcommand, write its artifacts, and return (exit code, result)."""
    if cmd not in _DISPATCH:
        raise ConfigError(f"unknown command '{cmd}' (choose from {', '.join(COMMANDS)})")
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    meta = {"fingerprint": cfg.fingerprint, "command": cmd, "fixture": cfg.fixture_id, "d": cfg.spec.d,
            "alpha": _fmt(cfg.spec.alpha), "M": cfg.spec.M}
    marker = out / f"{cmd}.FAILED"
    try:
        result = _DISPATCH[cmd](cfg, threads)
    except NumericalError as exc:
        _write_marker(marker, f"numerical failure: {exc}")
        return EXIT_NUMERICAL, None
    for name, (header, rows) in result.tables.items():
        write_csv(rows, header, out / f"{name}.csv", meta)
    write_report({"passed": result.passed, "failures": result.failures, **result.summary},
                 out / f"{cmd}.json", meta)
    if result.passed:
        marker.unlink(missing_ok=True)
        return EXIT_OK, result
    _write_marker(marker, "\n".join(result.failures) or "acceptance check failed")
    return EXIT_FAIL, result


def _write_marker(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"FAILED\n{text}\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="homoglab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size for per-xi maps")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        code, result = run_command(args.command, cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HomogLabError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if result is None:
        print(f"{args.command}: numerical failure (see FAILED marker)", file=sys.stderr)
    else:
        status = "PASS" if result.passed else "FAIL"
        print(f"{args.command} [{cfg.fixture_id}, fingerprint {cfg.fingerprint}]: {status}")
        for f in result.failures:
            print(f"  - {f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
