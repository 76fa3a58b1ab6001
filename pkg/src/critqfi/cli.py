"""Command-line front end.

Configuration is a flat JSON object. Values come from, in increasing
precedence: built-in defaults, the ``--config`` file, command-line flags
(``--out``, ``--seed``, ``--threads``). Grids accept a scalar, a list, or
``{"start": a, "stop": b, "num": n}`` (inclusive linspace). A temperature of
0 selects the ground state.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import densops, estimate, qfi, scaling, sld
from .errors import ClassificationError, CritQfiError, ParameterError, SizeError
from .model import ModelParams

THREADS_ENV = "CRITQFI_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


# ---- config -------------------------------------------------------------


def _grid(value, cast, name):
    if isinstance(value, dict):
        if set(value) != {"start", "stop", "num"}:
            raise ConfigError(f"{name}: range needs exactly start, stop, num")
        n = int(value["num"])
        vals = np.linspace(float(value["start"]), float(value["stop"]), n).tolist() if n > 0 else []
    elif isinstance(value, list):
        vals = value
    else:
        vals = [value]
    try:
        out = [cast(v) for v in vals]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    if not out:
        raise ConfigError(f"{name}: empty grid")
    return out


def _scalar(value, cast, name):
    if isinstance(value, (list, dict)):
        raise ConfigError(f"{name}: expected a single value")
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _int(v):
    if isinstance(v, bool) or float(v) != int(float(v)):
        raise ValueError(f"not an integer: {v!r}")
    return int(float(v))


def _opt_float(v):
    return None if v is None else float(v)


SCHEMAS = {
    "qfi-sweep": {
        "J": (1.0, _scalar, float),
        "gamma": (1.0, _scalar, float),
        "L": ([64], _grid, _int),
        "h": ([1.0], _grid, float),
        "T": ([0.0], _grid, float),
        "method": ("auto", _scalar, str),
    },
    "sld-profile": {
        "J": (1.0, _scalar, float),
        "gamma": (1.0, _scalar, float),
        "h": (1.0, _scalar, float),
        "L": (512, _scalar, _int),
        "T": (0.0, _scalar, float),
        "window_min": (4, _scalar, _int),
        "window_max": (None, _scalar, lambda v: None if v is None else _int(v)),
    },
    "scaling": {
        "J": (1.0, _scalar, float),
        "gamma": (2.0, _scalar, float),
        "L": ([128, 256, 512, 1024, 2048], _grid, _int),
        "z": ({"start": -2.0, "stop": 2.0, "num": 9}, _grid, float),
        "bracket": (0.25, _scalar, float),
    },
    "estimate": {
        "J": (1.0, _scalar, float),
        "gamma": (1.0, _scalar, float),
        "h": (1.05, _scalar, float),
        "L": (64, _scalar, _int),
        "T": (0.0, _scalar, float),
        "M": (10000, _scalar, _int),
        "replicas": (100, _scalar, _int),
        "scheme": ("optimal", _scalar, str),
        "reference_J0": (None, _scalar, _opt_float),
        "initial_guess": (None, _scalar, _opt_float),
        "split": (None, _scalar, _opt_float),
    },
    "verify": {
        "L": ([4, 6], _grid, _int),
        "draws": (3, _scalar, _int),
        "beta": ([0.5, 2.0, 10.0], _grid, float),
        "tol_zero_t": (1e-8, _scalar, float),
        "tol_thermal": (1e-5, _scalar, float),
        "tol_lyapunov": (1e-8, _scalar, float),
        "tol_sld_qfi": (1e-8, _scalar, float),
    },
}
COMMON_KEYS = ("seed", "out")


def load_config(command: str, path, overrides: dict) -> dict:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    schema = SCHEMAS[command]
    unknown = set(raw) - set(schema) - set(COMMON_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = {}
    for key, (default, kind, cast) in schema.items():
        cfg[key] = kind(raw.get(key, default), cast, key)
    cfg["seed"] = raw.get("seed")
    cfg["out"] = raw.get("out")
    cfg["seed_source"] = "config" if cfg["seed"] is not None else "default"
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    if overrides.get("seed") is not None:
        cfg["seed_source"] = "flag"
    if cfg["seed"] is None:
        cfg["seed"] = 0
    cfg["seed"] = _scalar(cfg["seed"], _int, "seed")
    if not cfg.get("out"):
        raise ConfigError("no output path (--out or config key 'out')")
    return cfg


def _params(J, gamma, h, L, T) -> ModelParams:
    if T < 0:
        raise ParameterError(f"T must be >= 0, got {T}")
    return ModelParams(J, gamma, h, L, math.inf if T == 0 else 1.0 / T)


# ---- output -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x) + 0.0)
    return str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return None if obj is None else bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else repr(float(obj))
    return obj


def _json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _write_all(files: dict) -> None:
    """Write every (path -> text) via temp file plus rename; nothing is left behind on failure."""
    done = []
    try:
        for path, text in files.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            done.append(path)
    except OSError as exc:
        for p in done:
            p.unlink(missing_ok=True)
        raise ConfigError(f"cannot write output: {exc}") from None


def _companion(out: str, ext: str) -> str:
    return str(Path(out).with_suffix(ext))


def _map(fn, items, threads: int):
    """Apply fn to items on a thread pool; results come back in input order."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---- commands -----------------------------------------------------------

SWEEP_HEADER = ("L", "J", "gamma", "h", "beta", "z", "qfi", "qfi_per_site", "method", "unpaired", "err_est")


def cmd_qfi_sweep(cfg: dict, threads: int) -> dict:
    if cfg["method"] not in ("auto",) + qfi.METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}")
    points = [(L, h, T) for L in cfg["L"] for h in cfg["h"] for T in cfg["T"]]
    plist = [_params(cfg["J"], cfg["gamma"], h, L, T) for L, h, T in points]

    def row(p):
        rep = qfi.qfi(p, method=cfg["method"])
        return (p.L, p.J, p.gamma, p.h, p.beta, p.L * (p.h - p.J), rep.value, rep.value / p.L,
                rep.method, rep.unpaired_contribution, rep.error_estimate)

    rows = _map(row, plist, threads)
    return {cfg["out"]: _csv_text(SWEEP_HEADER, rows)}


def _decay_record(op, p, component, window):
    try:
        fit = sld.decay_classify(op, p, component, window=window)
    except ClassificationError as exc:
        print(f"warning: b_{component}: {exc}", file=sys.stderr)
        return {"class": "null kernel", "error": str(exc), "exponent_or_xi": None, "fit_window": list(window), "residual": None}
    return {
        "class": fit.kind,
        "exponent_or_xi": fit.value,
        "fit_window": list(fit.window),
        "residual": fit.residual,
        "residual_exponential": fit.residual_exponential,
        "residual_algebraic": fit.residual_algebraic,
    }


def cmd_sld_profile(cfg: dict, threads: int) -> dict:
    p = _params(cfg["J"], cfg["gamma"], cfg["h"], cfg["L"], cfg["T"])
    window = (cfg["window_min"], cfg["window_max"] if cfg["window_max"] is not None else p.L // 4)
    if not 0 <= window[0] < window[1] < p.L:
        raise ConfigError(f"invalid fit window {window}")
    op = sld.sld(p)
    rows = [(d, op.by_d[d], op.bz_d[d]) for d in range(p.L)]
    report = {"component": "b_y", **_decay_record(op, p, "y", window)}
    report["b_z"] = _decay_record(op, p, "z", window)
    report["scalar_term"] = op.scalar_term
    report["params"] = {"J": p.J, "gamma": p.gamma, "h": p.h, "L": p.L, "T": cfg["T"]}
    return {cfg["out"]: _csv_text(("d", "b_y", "b_z"), rows), _companion(cfg["out"], ".json"): _json_text(report)}


def cmd_scaling(cfg: dict, threads: int) -> dict:
    if len(set(cfg["L"])) < 5:
        raise ConfigError(f"scaling needs >= 5 distinct sizes, got {len(set(cfg['L']))}")
    if len(cfg["z"]) < 5:
        raise ConfigError("scaling needs >= 5 z values")
    base = ModelParams(cfg["J"], cfg["gamma"], cfg["J"], min(cfg["L"]))
    fit = scaling.scaling_collapse(base, cfg["L"], cfg["z"], with_shift=False)
    fit.pseudo_points = _map(lambda L: (L, scaling.pseudo_critical_point(base, L, bracket=cfg["bracket"])), sorted(set(cfg["L"])), threads)
    warnings = list(fit.warnings)
    shift = None
    try:
        shift = scaling.shift_exponent(fit.pseudo_points, cfg["J"])
    except CritQfiError as exc:
        warnings.append(f"shift exponent not fitted: {exc}")
    out = {
        "z_values": fit.z_values,
        "Ls": fit.Ls,
        "phi0": fit.phi0,
        "phi2": fit.phi2,
        "d_slope": fit.d_slope,
        "c_zero": fit.c_zero,
        "delta_g": fit.delta_g,
        "nu": fit.nu,
        "phi_z": fit.phi_z,
        "pseudo_points": fit.pseudo_points,
        "shift_exponent": None if shift is None else shift.exponent,
        "shift_exponent_stderr": None if shift is None else shift.exponent_stderr,
        "shift_coefficient": None if shift is None else shift.coefficient,
        "shift_L2_coefficient": scaling.shift_amplitude(fit.pseudo_points, cfg["J"]),
        "warnings": warnings,
    }
    rows = [(L, h, h - cfg["J"], (h - cfg["J"]) * L * L) for L, h in fit.pseudo_points]
    return {cfg["out"]: _json_text(out), _companion(cfg["out"], ".csv"): _csv_text(("L", "h_star", "shift", "shift_L2"), rows)}


def cmd_estimate(cfg: dict, threads: int) -> dict:
    p = _params(cfg["J"], cfg["gamma"], cfg["h"], cfg["L"], cfg["T"])
    if cfg["scheme"] not in ("optimal", "two_stage"):
        raise ConfigError(f"unknown scheme {cfg['scheme']!r}")
    if cfg["M"] < 1 or cfg["replicas"] < 1:
        raise ConfigError("M and replicas must be >= 1")
    seed = cfg["seed"]
    if cfg["scheme"] == "two_stage":
        guess = cfg["initial_guess"] if cfg["initial_guess"] is not None else p.J
        if cfg["split"] is not None and not 0.0 < cfg["split"] < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {cfg['split']}")

        def run(r):
            return estimate.two_stage_run(p, guess, cfg["M"], split=cfg["split"], seed=seed, replica=r)
    else:
        ref = cfg["reference_J0"] if cfg["reference_J0"] is not None else p.J

        def run(r):
            return estimate.optimal_run(p, ref, cfg["M"], seed, replica=r)

    runs = _map(run, range(cfg["replicas"]), threads)
    summary = {
        "config": {k: cfg[k] for k in SCHEMAS["estimate"]},
        "metadata": {"seed": seed, "seed_source": cfg["seed_source"]},
        "fisher_ratio_mean": float(np.mean([r.fisher_ratio for r in runs])),
    }
    if len(runs) >= 100:
        summary["crb_report"] = estimate.crb_report(runs).as_dict()
    else:
        summary["crb_report"] = None
        summary["metadata"]["note"] = "crb report needs >= 100 replicas"
    rows = [(r.replica, r.estimate, r.loglik, seed) for r in runs]
    return {cfg["out"]: _json_text(summary), _companion(cfg["out"], ".csv"): _csv_text(("replica", "estimate", "loglik", "seed"), rows)}


def _verify_checks(cfg: dict):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg["seed"])))
    checks = []

    def add(name, p, value, reference, tol):
        resid = abs(value - reference) / max(abs(reference), 1e-300) if reference != 0 else abs(value)
        checks.append({"name": name, "L": p.L, "J": p.J, "gamma": p.gamma, "h": p.h, "beta": p.beta,
                       "value": value, "reference": reference, "residual": resid, "tol": tol, "passed": bool(resid <= tol)})

    for L in cfg["L"]:
        for _ in range(cfg["draws"]):
            J, g, h = (float(x) for x in rng.uniform(0.3, 1.7, 3))
            p = ModelParams(J, g, h, L)
            add("qfi_zero_t_vs_ed", p, qfi.qfi_zero_t(p).value,
                densops.pure_qfi_sum(densops.ed_hamiltonian(p), densops.ed_dhamiltonian(p)), cfg["tol_zero_t"])
            for beta in [math.inf] + cfg["beta"]:
                pb = p.replace(beta=beta)
                op = sld.sld(pb)
                dense = sld.sld_dense(op, pb)
                fam = densops.ed_family(pb, step=1e-3, scheme="richardson")
                rho = densops.ed_oracle(pb)
                drho = fam.derivative(J)
                lyap = densops.lyapunov_residual(rho.matrix(), drho, dense)
                checks.append({"name": "sld_lyapunov", "L": L, "J": J, "gamma": g, "h": h, "beta": beta, "value": lyap,
                               "reference": 0.0, "residual": lyap, "tol": cfg["tol_lyapunov"],
                               "passed": bool(lyap <= cfg["tol_lyapunov"])})
                exact = qfi.qfi(pb).value
                add("sld_qfi_trace", pb, densops.qfi_from_sld(rho, dense), exact, cfg["tol_sld_qfi"])
                if math.isfinite(beta):
                    add("qfi_thermal_vs_ed_bures", pb, exact, 4.0 * densops.bures_metric_spectral(rho, drho), cfg["tol_thermal"])
    return checks


def cmd_verify(cfg: dict, threads: int) -> dict:
    big = [L for L in cfg["L"] if L > densops.MAX_ED_SITES]
    if big:
        raise ConfigError(f"oracle size limit is L <= {densops.MAX_ED_SITES}, got {big}")
    checks = _verify_checks(cfg)
    report = {"checks": checks, "all_passed": all(c["passed"] for c in checks), "n_checks": len(checks),
              "n_failed": sum(not c["passed"] for c in checks), "seed": cfg["seed"]}
    return {cfg["out"]: _json_text(report)}


COMMANDS = {
    "qfi-sweep": cmd_qfi_sweep,
    "sld-profile": cmd_sld_profile,
    "scaling": cmd_scaling,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="critqfi", description="Fisher information and optimal measurement of the BCS/Ising chain.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat JSON config file")
        sp.add_argument("--out", help="output path (companion files share the stem)")
        sp.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
        sp.add_argument("--seed", type=int, help="random seed (default 0)")
    return ap


def _threads(flag) -> int:
    if flag is not None:
        n = flag
    else:
        env = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"threads must be >= 1, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, {"out": args.out, "seed": args.seed})
        threads = _threads(args.threads)
        files = COMMANDS[args.command](cfg, threads)
        if args.config is not None and any(Path(f).resolve() == Path(args.config).resolve() for f in files):
            raise ConfigError(f"output would overwrite the config file {args.config}")
        _write_all(files)
    except (ConfigError, ParameterError, SizeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CritQfiError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command == "verify":
        report = json.loads(files[cfg["out"]])
        if not report["all_passed"]:
            print(f"verify: {report['n_failed']} of {report['n_checks']} checks failed", file=sys.stderr)
            return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
