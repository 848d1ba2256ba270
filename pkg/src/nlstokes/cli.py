"""Command-line front end.

    nlstokes solve         --out DIR [--config run.json] [flags]
    nlstokes sweep-delta   ...
    nlstokes sweep-n       ...
    nlstokes ac-diagram    ...
    nlstokes check-symbols ...

Settings come from defaults, then the --config JSON document, then flags.
Outputs go under --out with fixed names (solution.json, samples.csv,
report.csv, summary.json, manifest.json).  Exit codes: 0 success,
1 a checked rate or bound failed, 2 invalid configuration, 3 bad data,
4 internal numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NLStokesError
from .fields import SpectralField, samples_csv
from .kernels import build_kernel_set, preset
from .lab import (DEFAULT_DELTAS, SLOPE_WINDOW, ac_diagram, band_sweep, delta_sweep, make_case)
from .quadrature import BACKEND
from .solver import StokesProblem, Variant, solve
from .symbols import certify_bounds

DEFAULTS = {
    "d": 2,
    "delta": 0.1,
    "deltas": list(DEFAULT_DELTAS),
    "N": 16,
    "Ns": [4, 8, 16, 32],
    "N_fixed": 16,
    "delta_fixed": 0.1,
    "case": "single-mode-shear",
    "seed": 42,
    "decay": 4.0,
    "master_band": None,
    "kernel_preset": "constant",
    "alpha": 0.5,
    "kernels": None,
    "variant": "nonlocal",
    "samples": None,
    "xi_max": 16,
    "slope_window": list(SLOPE_WINDOW),
    "min_rate": 2.0,
    "f": None,
    "g": None,
}

# flag name -> (config key, type)
_FLAGS = {
    "d": ("d", int),
    "delta": ("delta", float),
    "N": ("N", int),
    "case": ("case", str),
    "seed": ("seed", int),
    "decay": ("decay", float),
    "master_band": ("master_band", int),
    "kernel_preset": ("kernel_preset", str),
    "alpha": ("alpha", float),
    "variant": ("variant", str),
    "samples": ("samples", int),
    "xi_max": ("xi_max", int),
    "N_fixed": ("N_fixed", int),
    "delta_fixed": ("delta_fixed", float),
    "min_rate": ("min_rate", float),
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlstokes", description="Spectral solver for the relaxed nonlocal Stokes system.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "solve one problem and sample the solution"),
                        ("sweep-delta", "convergence as the horizon shrinks"),
                        ("sweep-n", "convergence in the band limit"),
                        ("ac-diagram", "corners of the discretization/localization diagram"),
                        ("check-symbols", "certify symbol bounds on lattice shells")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, help="worker threads (default: NLSTOKES_THREADS or all cores)")
        p.add_argument("--dim", "-d", dest="d", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--deltas", type=float, nargs="+")
        p.add_argument("-N", "--band", dest="N", type=int)
        p.add_argument("--Ns", type=int, nargs="+")
        p.add_argument("--case")
        p.add_argument("--seed", type=int)
        p.add_argument("--decay", type=float)
        p.add_argument("--master-band", dest="master_band", type=int)
        p.add_argument("--kernels", dest="kernel_preset", help="kernel preset: constant, polynomial_bump, fractional")
        p.add_argument("--alpha", type=float)
        p.add_argument("--variant", choices=[v.value for v in Variant])
        p.add_argument("--samples", type=int, help="grid points per dimension for samples.csv")
        p.add_argument("--xi-max", dest="xi_max", type=int)
        p.add_argument("--N-fixed", dest="N_fixed", type=int)
        p.add_argument("--delta-fixed", dest="delta_fixed", type=float)
        p.add_argument("--min-rate", dest="min_rate", type=float)
    return ap


def load_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(doc)
    for flag, (key, _) in _FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    if args.deltas is not None:
        cfg["deltas"] = list(args.deltas)
    if args.Ns is not None:
        cfg["Ns"] = list(args.Ns)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    def num(key, kind=float):
        try:
            return kind(cfg[key])
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from None

    if num("d", int) not in (2, 3) or cfg["d"] != int(cfg["d"]):
        raise ConfigError(f"d must be 2 or 3, got {cfg['d']}")
    for key in ("delta", "delta_fixed"):
        if not 0.0 < num(key) < 1.0:
            raise ConfigError(f"{key} must lie in (0,1), got {cfg[key]}")
    deltas = cfg["deltas"]
    if not isinstance(deltas, list) or not deltas:
        raise ConfigError("deltas must be a non-empty list")
    for x in deltas:
        if not isinstance(x, (int, float)) or not 0.0 < x < 1.0:
            raise ConfigError(f"every delta must lie in (0,1), got {x}")
    for key in ("N", "N_fixed"):
        if num(key, int) < 1:
            raise ConfigError(f"{key} must be >= 1, got {cfg[key]}")
    if not isinstance(cfg["Ns"], list) or any(not isinstance(n, int) or n < 1 for n in cfg["Ns"]):
        raise ConfigError("Ns must be a list of positive integers")
    if num("xi_max", int) < 0:
        raise ConfigError("xi_max must be >= 0")
    try:
        Variant(cfg["variant"])
    except ValueError:
        raise ConfigError(f"unknown variant {cfg['variant']!r}") from None
    if cfg["samples"] is not None and num("samples", int) < 2:
        raise ConfigError("samples must be >= 2")
    if not (0.0 < num("alpha") < 1.0):
        raise ConfigError("alpha must lie in (0,1)")


def kernel_set(cfg: dict, delta: float, strict: bool = True):
    d = int(cfg["d"])
    if cfg["kernels"] is not None:
        specs = cfg["kernels"]
        if not isinstance(specs, dict):
            raise ConfigError("kernels must be an object keyed by omega, omega_hat, omega_tilde, omega_bar")
        bad = sorted(set(specs) - {"omega", "omega_hat", "omega_tilde", "omega_bar", "m", "M"})
        if bad:
            raise ConfigError(f"unknown kernel roles: {', '.join(bad)}")
        specs = dict(specs)
        m, M = specs.pop("m", None), specs.pop("M", None)
        return build_kernel_set(d, delta, strict=strict, m=m, M=M, **specs)
    return preset(cfg["kernel_preset"], d, delta, alpha=float(cfg["alpha"]))


def _case(cfg: dict, master_default: int | None = None):
    band = cfg["master_band"] or master_default or 64
    return make_case(cfg["case"], int(cfg["d"]), seed=int(cfg["seed"]), decay=float(cfg["decay"]), master_band=int(band))


def _field(spec, d: int, components: int) -> SpectralField:
    doc = spec
    if isinstance(spec, str):
        try:
            with open(spec) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read field {spec}: {exc}") from None
    fld = SpectralField.from_dict(doc)
    if fld.d != d or fld.components != components:
        raise ConfigError(f"field has (d, components) = ({fld.d}, {fld.components}), expected ({d}, {components})")
    return fld


def _dump(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, BaseException):
        return f"{type(obj).__name__}: {obj}"
    if hasattr(obj, "item") and callable(obj.item):
        return obj.item()
    return obj


def _manifest(out: Path, command: str, cfg: dict, outputs: list[str], **extra) -> None:
    _dump(out / "manifest.json", {"command": command, "config": cfg, "outputs": sorted(outputs),
                                  "version": __version__, "quadrature_backend": BACKEND, **extra})


def cmd_solve(cfg: dict, out: Path, threads) -> int:
    d = int(cfg["d"])
    variant = Variant(cfg["variant"])
    kernels = None if variant is Variant.LOCAL else kernel_set(cfg, float(cfg["delta"]))
    if cfg["f"] is not None or cfg["g"] is not None:
        f = _field(cfg["f"], d, d) if cfg["f"] is not None else SpectralField.zero(d, d, int(cfg["N"]))
        g = _field(cfg["g"], d, 1) if cfg["g"] is not None else SpectralField.zero(d, 1, int(cfg["N"]))
        problem = StokesProblem(f, g, kernels, variant)
    else:
        problem = _case(cfg).problem(kernels, variant)
    N = int(cfg["N"])
    sol = solve(problem, N)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "solution.json", sol.to_dict())
    M = int(cfg["samples"] or 2 * N + 2)
    u = sol.u.sample_on_grid(M).reshape(M ** d, d)
    p = sol.p.sample_on_grid(M).reshape(M ** d, 1)
    vals = np.concatenate([u, p], axis=1).reshape((M,) * d + (d + 1,))
    text = samples_csv(vals, d, [f"u{k + 1}" for k in range(d)] + ["p"])
    (out / "samples.csv").write_text(text)
    _manifest(out, "solve", cfg, ["solution.json", "samples.csv", "manifest.json"],
              residual_norm=sol.residual_norm)
    print(f"solved {variant.value} d={d} N={N} delta={sol.delta:g}: residual {sol.residual_norm:.3e}")
    return 0


def _write_report(out: Path, command: str, cfg: dict, csv_text: str, summary: dict) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(csv_text)
    _dump(out / "summary.json", summary)
    _manifest(out, command, cfg, ["report.csv", "summary.json", "manifest.json"])
    for w in summary.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    for name, chk in summary.get("checks", {}).items():
        status = "PASS" if chk.get("pass") else "FAIL"
        rate = chk.get("rate")
        print(f"{status} {name}" + ("" if rate is None else f" rate={rate:.4f} r2={chk.get('r2', math.nan):.4f}"))
    if summary.get("incomplete"):
        err = summary.get("meta", {}).get("error")
        if isinstance(err, NLStokesError):
            raise err
    return 0 if summary.get("passed", True) else 1


def cmd_sweep_delta(cfg: dict, out: Path, threads) -> int:
    variant = Variant(cfg["variant"])
    template = kernel_set(cfg, float(cfg["deltas"][0]))
    case = _case(cfg)
    rep = delta_sweep(case, template, cfg["deltas"], int(cfg["N"]), variant, threads)
    summary = rep.summary(window=tuple(cfg["slope_window"]), checked=rep.fit_names)
    summary["meta"]["error"] = rep.meta.get("error")
    return _write_report(out, "sweep-delta", cfg, rep.to_csv(), summary)


def cmd_sweep_n(cfg: dict, out: Path, threads) -> int:
    Ns = cfg["Ns"]
    cfg = dict(cfg)
    if cfg["case"] == DEFAULTS["case"] and cfg["master_band"] is None:
        cfg["case"] = "random-decaying"
    variant = Variant(cfg["variant"])
    kernels = None if variant is Variant.LOCAL else kernel_set(cfg, float(cfg["delta"]))
    case = _case(cfg, master_default=4 * max(Ns))
    rep = band_sweep(case, kernels, None, Ns, variant, threads)
    summary = rep.summary(min_rate=float(cfg["min_rate"]), checked=["u_L2"])
    return _write_report(out, "sweep-n", cfg, rep.to_csv(), summary)


def cmd_ac_diagram(cfg: dict, out: Path, threads) -> int:
    cfg = dict(cfg)
    if cfg["case"] == DEFAULTS["case"] and cfg["master_band"] is None:
        cfg["case"] = "random-decaying"
    template = kernel_set(cfg, float(cfg["delta_fixed"]))
    case = _case(cfg, master_default=4 * max(cfg["Ns"]))
    ac = ac_diagram(case, template, cfg["deltas"], cfg["Ns"], int(cfg["N_fixed"]), float(cfg["delta_fixed"]), threads)
    return _write_report(out, "ac-diagram", cfg, ac.to_csv(), ac.summary())


def cmd_check_symbols(cfg: dict, out: Path, threads) -> int:
    deltas = cfg["deltas"] if cfg["deltas"] != DEFAULTS["deltas"] else [float(cfg["delta"])]
    ks = kernel_set(cfg, float(deltas[0]), strict=False)
    rep = certify_bounds(ks, int(cfg["xi_max"]), deltas)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / "report.csv")
    fails = rep.failures()
    summary = {
        "n_rows": len(rep.rows),
        "checks": {name: {"pass": all(r["pass"] for r in rep.rows if r["check_name"] == name),
                          "worst_margin": m} for name, m in sorted(rep.worst_margins().items())},
        "failures": [{"delta": r["delta"], "xi_sq": r["xi_sq"], "check_name": r["check_name"],
                      "margin": r["margin"]} for r in fails[:100]],
        "n_failures": len(fails),
        "passed": rep.passed,
    }
    _dump(out / "summary.json", summary)
    _manifest(out, "check-symbols", cfg, ["report.csv", "summary.json", "manifest.json"])
    for r in fails[:20]:
        print(f"FAIL {r['check_name']} delta={r['delta']:g} |xi|^2={r['xi_sq']} margin={r['margin']:.3e}")
    print(f"{len(rep.rows)} checks, {len(fails)} failures")
    return 0 if rep.passed else 1


COMMANDS = {
    "solve": cmd_solve,
    "sweep-delta": cmd_sweep_delta,
    "sweep-n": cmd_sweep_n,
    "ac-diagram": cmd_ac_diagram,
    "check-symbols": cmd_check_symbols,
}


def _fail(out: Path | None, exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _dump(out / "error.json", doc)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, out, args.threads)
    except NLStokesError as exc:
        return _fail(out, exc, exc.exit_code)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(out, ConfigError(str(exc)), 2)
    except Exception as exc:  # pragma: no cover - last-resort triage
        return _fail(out, exc, 4)


if __name__ == "__main__":
    sys.exit(main())
