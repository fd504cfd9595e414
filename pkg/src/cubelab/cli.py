"""Command-line interface: ``cubelab {rp,cubes,semigroup,scan,validate}``.

An experiment is a config mapping (TOML or JSON on disk)::

    schema_version = 1
    command = "rp"
    seed = 0
    [system]
    kind = "skew_product"
    [params]
    d = 1
    x = [0.2, 0.1]
    y = [0.2, 0.7]
    [output]
    report = "rp.json"

Command-line flags override the file. Reports are JSON with sorted keys and
no timestamps; run metadata goes to a separate ``<report>.meta.json``.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .cube_index import MAX_DIM
from .orbit_closure import (
    DEFAULT_Q_BUDGETS,
    ScanBudget,
    generic_equality_scan,
    hausdorff,
    minimality_probe,
    parallelepiped_residual,
    sample_Q,
    sample_Y,
    to_binary,
    to_csv,
)
from .rp_search import (
    DELTA_LADDER,
    SearchBudget,
    characterization_probe,
    factor_image_check,
    proximal_probe,
    rp_ladder,
    transitivity_probe,
)
from .semigroup import (
    DEFAULT_CAP,
    ClosureCapExceeded,
    check_absorption,
    check_tilde_u,
    check_uv_identity,
    closure,
    idempotents,
    kernel,
    load_generators,
    minimal_idempotents,
    minimal_left_ideals,
    parse_generators,
)
from .systems import KINDS, SCHEMA_VERSION, load_config_file, system_from_config

COMMANDS = ("rp", "cubes", "semigroup", "scan")
SAMPLING = ("rp", "cubes", "scan")
RP_MODES = ("witness", "strengthened", "lemma25", "prop_eq_Q", "prop_eq_F", "transitivity", "factor", "proximal")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


# validation

def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _point(v):
    if isinstance(v, str):
        v = [float(s) for s in v.split(",") if s.strip()]
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


def _build_system(cfg):
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    return system_from_config(cfg)


def validate(config) -> list[str]:
    """Diagnostics for a config mapping; empty when the config can run."""
    out = []
    if not isinstance(config, dict):
        return ["config must be a mapping"]
    version = config.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        out.append(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    cmd = config.get("command")
    if cmd not in COMMANDS:
        out.append(f"command must be one of {', '.join(COMMANDS)}; got {cmd!r}")
        return out
    seed = config.get("seed")
    if cmd in SAMPLING:
        if seed is None:
            out.append(f"seed is required for the sampling command {cmd!r}")
        elif not _is_int(seed) or seed < 0:
            out.append("seed must be a non-negative integer")
    params = config.get("params", {})
    if not isinstance(params, dict):
        return out + ["params must be a mapping"]
    if "d" in params:
        d = params["d"]
        if not _is_int(d):
            out.append("d must be an integer")
        elif d < 1:
            out.append("d must be ≥ 1")
        elif d > MAX_DIM:
            out.append(f"d must be ≤ {MAX_DIM}")
    for key in ("budget_R", "budget_M", "budget", "base_samples", "cap"):
        if key in params and (not _is_int(params[key]) or params[key] < 1):
            out.append(f"{key} must be a positive integer")
    sys = None
    if cmd in SAMPLING:
        if "system" not in config:
            out.append("system is required")
        else:
            try:
                sys = _build_system(config["system"])
            except (ValueError, TypeError) as exc:
                out.append(f"invalid system: {exc}")
    if cmd == "rp":
        out += _validate_rp(params, sys)
    elif cmd == "cubes":
        out += _validate_cubes(params, sys)
    elif cmd == "scan":
        grid = params.get("grid", 50)
        if _is_int(grid):
            if grid < 1:
                out.append("grid must be a positive integer or a non-empty list of points")
        elif not isinstance(grid, list) or not grid:
            out.append("grid must be a positive integer or a non-empty list of points")
        sigma = params.get("sigma", ScanBudget.sigma)
        if not _is_num(sigma) or sigma <= 0:
            out.append("sigma must be positive")
    elif cmd == "semigroup":
        out += _validate_semigroup(params)
    return out


def _check_point(name, v, sys, out):
    try:
        p = _point(v)
    except (TypeError, ValueError):
        out.append(f"{name} is not a point")
        return
    if sys is not None and p.shape != (sys.point_dim,):
        out.append(f"{name} needs {sys.point_dim} components for {sys.kind}, got {p.size}")


def _validate_rp(params, sys):
    out = []
    mode = params.get("mode", "witness")
    if mode not in RP_MODES:
        out.append(f"mode must be one of {', '.join(RP_MODES)}")
    for name in ("x", "y") + (("z",) if mode == "transitivity" else ()):
        if name not in params:
            out.append(f"{name} is required")
        else:
            _check_point(name, params[name], sys, out)
    if "delta" in params and (not _is_num(params["delta"]) or params["delta"] <= 0):
        out.append("delta must be positive")
    ladder = params.get("delta_ladder")
    if ladder is not None:
        if not isinstance(ladder, list) or not ladder or not all(_is_num(v) and v > 0 for v in ladder):
            out.append("delta_ladder must be a non-empty list of positive numbers")
    if "eta" in params and (not _is_num(params["eta"]) or params["eta"] <= 0):
        out.append("eta must be positive")
    if mode == "proximal" and (not _is_int(params.get("horizon", 1000)) or params.get("horizon", 1000) < 0):
        out.append("horizon must be a non-negative integer")
    if mode == "factor" and sys is not None and sys.factor is None:
        out.append(f"{sys.kind} systems declare no factor")
    return out


def _validate_cubes(params, sys):
    out = []
    kind = params.get("set", "Q")
    if kind not in ("Y", "Q"):
        out.append("set must be 'Y' or 'Q'")
    if kind == "Y":
        if "x" not in params:
            out.append("x is required for set 'Y'")
        else:
            _check_point("x", params["x"], sys, out)
    if params.get("recipe", "total") not in ("total", "face"):
        out.append("recipe must be 'total' or 'face'")
    eps = params.get("epsilon", 0.05)
    if not _is_num(eps) or eps <= 0:
        out.append("epsilon must be positive")
    return out


def _validate_semigroup(params):
    out = []
    gens = params.get("generators")
    if gens is None:
        return ["generators are required (a JSON file or an inline {n, maps} mapping)"]
    try:
        if isinstance(gens, dict):
            parse_generators(gens)
        else:
            load_generators(gens)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        out.append(f"invalid generators: {exc}")
    if "tilde_d" in params and (not _is_int(params["tilde_d"]) or not 1 <= params["tilde_d"] <= 3):
        out.append("tilde_d must be 1, 2 or 3")
    return out


# execution

def _budget(params, seed) -> SearchBudget:
    return SearchBudget(
        R=int(params.get("budget_R", SearchBudget.R)),
        M=int(params.get("budget_M", SearchBudget.M)),
        seed=int(seed),
        eta=float(params.get("eta", SearchBudget.eta)),
    )


def _run_rp(config, sys):
    p = config["params"]
    d = int(p.get("d", 1))
    mode = p.get("mode", "witness")
    budget = _budget(p, config["seed"])
    x, y = _point(p["x"]), _point(p["y"])
    if "delta_ladder" in p:
        ladder = [float(v) for v in p["delta_ladder"]]
    elif "delta" in p:
        ladder = [float(p["delta"])]
    else:
        ladder = list(DELTA_LADDER)
    if mode in ("witness", "strengthened"):
        reports = rp_ladder(sys, x, y, d, ladder, budget, pin_x=mode == "strengthened")
        statuses = {r["delta"]: r["status"] for r in reports}
        if all(s == "found" for s in statuses.values()):
            reading = "witnesses at every probed delta (consistent with membership)"
        elif any(s == "not_found" for s in statuses.values()):
            reading = "certified non-member"
        else:
            reading = "inconclusive below the smallest delta with a witness"
        return {
            "tag": reports[0]["tag"],
            "measurement": reports,
            "interpretation": {
                "found_at": [r["delta"] for r in reports if r["status"] == "found"],
                "certified_absent_at": [r["delta"] for r in reports if r["status"] == "not_found"],
                "reading": reading,
            },
        }
    if mode in ("lemma25", "prop_eq_Q", "prop_eq_F"):
        threshold = float(p.get("threshold", min(ladder)))
        rep = characterization_probe(sys, x, y, d, mode, budget)
        return {
            "tag": rep["tag"],
            "measurement": rep,
            "interpretation": {
                "threshold": threshold,
                "below_threshold": rep["distance"] < threshold,
                "reading": "sampled distance is an upper bound; small values support membership",
            },
        }
    if mode == "transitivity":
        rep = transitivity_probe(sys, x, y, _point(p["z"]), d, min(ladder), budget)
        return {"tag": rep["tag"], "measurement": rep["measurement"], "interpretation": {"reading": rep["interpretation"]}}
    if mode == "factor":
        rep = factor_image_check(sys, x, y, d, min(ladder), budget)
        return {"tag": rep["tag"], "measurement": rep, "interpretation": {"reading": rep["status"]}}
    rep = proximal_probe(sys, x, y, int(p.get("horizon", 1000)), float(p.get("eta", 2.0**-5)), d, budget)
    rp_status = None if rep["rp"] is None else rep["rp"]["status"]
    return {
        "tag": rep["tag"],
        "measurement": rep,
        "interpretation": {"proximal": rep["proximal"], "rp_status": rp_status},
    }


def _run_cubes(config, sys):
    p = config["params"]
    seed = int(config["seed"])
    d = int(p.get("d", 2))
    kind = p.get("set", "Q")
    recipe = p.get("recipe", "total")
    if kind == "Y":
        cloud = sample_Y(sys, _point(p["x"]), d, int(p.get("budget", 10_000)), seed)
    else:
        budget, bases = DEFAULT_Q_BUDGETS[recipe]
        cloud = sample_Q(sys, d, int(p.get("budget", budget)), int(p.get("base_samples", bases)), seed, recipe)
    meas = {"points": len(cloud), "recipe": cloud.recipe, "set": kind}
    interp = {}
    if sys.kind == "rotation" and d == 2 and sys.rank == 1:
        res = float(parallelepiped_residual(cloud.points[..., 0]).max())
        meas["parallelepiped_residual_max"] = res
        interp["parallelepiped_law"] = res < 1e-9
    if kind == "Q" and p.get("compare_recipes", False):
        other = "face" if recipe == "total" else "total"
        ob, obases = DEFAULT_Q_BUDGETS[other]
        h = hausdorff(sys, cloud, sample_Q(sys, d, ob, obases, seed, other))
        meas["recipe_hausdorff"] = h
        interp["recipes_agree"] = h < float(p.get("hausdorff_threshold", 0.05))
    if p.get("minimality", False):
        rep = minimality_probe(
            sys, cloud, "face" if kind == "Y" else "total", float(p.get("epsilon", 0.05)), seed=seed
        )
        meas["minimality"] = rep
        interp["minimality_fraction"] = rep["fraction"]
    out = config.get("output", {})
    if out.get("csv"):
        to_csv(cloud, out["csv"])
    if out.get("binary"):
        to_binary(cloud, out["binary"])
    return {"tag": "Thm-min", "measurement": meas, "interpretation": interp}


def _run_scan(config, sys):
    p = config["params"]
    seed = int(config["seed"])
    grid = p.get("grid", 50)
    if _is_int(grid):
        g = (np.arange(grid) + 0.5) / grid
        pts = np.zeros((grid, sys.point_dim))
        pts[:, 0] = g
        if sys.kind == "sturmian":
            pts[:, 1] = 1.0
        grid = pts
    else:
        grid = np.array([_point(v) for v in grid])
    budget = ScanBudget(
        y=int(p.get("y_budget", ScanBudget.y)),
        q=int(p.get("q_budget", ScanBudget.q)),
        q_bases=int(p.get("q_bases", ScanBudget.q_bases)),
        sigma=float(p.get("sigma", ScanBudget.sigma)),
    )
    rep = generic_equality_scan(sys, int(p.get("d", 1)), grid, budget, seed)
    threshold = float(p.get("threshold", 0.05))
    return {
        "tag": rep["tag"],
        "measurement": rep,
        "interpretation": {"threshold": threshold, "all_below": rep["max"] < threshold},
    }


def _run_semigroup(config):
    p = config["params"]
    gens = p["generators"]
    gens = parse_generators(gens) if isinstance(gens, dict) else load_generators(gens)
    cap = int(p.get("cap", DEFAULT_CAP))
    S = closure(gens, cap=cap, include_identity=bool(p.get("monoid", False)))
    ideals = minimal_left_ideals(S)
    meas = {
        "n": S.n,
        "elements": len(S),
        "idempotents": int(len(idempotents(S))),
        "minimal_left_ideals": [int(len(L)) for L in ideals],
        "kernel": int(len(kernel(S, ideals))),
        "minimal_idempotents": int(len(minimal_idempotents(S, ideals))),
    }
    interp = {}
    if p.get("audit", False):
        uv = check_uv_identity(S)
        absorb = check_absorption(S)
        meas["uv"] = uv.to_dict()
        meas["absorption_violations"] = [list(v) for v in absorb]
        interp["uv_identity"] = uv.ok
        interp["absorption"] = not absorb
        if p.get("elements_listing", False):
            meas["tables"] = S.elements.tolist()
    if "tilde_d" in p:
        rep = check_tilde_u(gens, int(p["tilde_d"]), cap)
        meas["tilde_u"] = rep.to_dict()
        interp["tilde_u"] = rep.ok
    return {"tag": "Lemma-uv", "measurement": meas, "interpretation": interp}


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    return o


def run(config: dict) -> tuple[int, dict]:
    """Validate and execute; returns ``(exit_code, report)``. Raises ConfigError on invalid configs."""
    diags = validate(config)
    if diags:
        raise ConfigError(diags)
    cmd = config["command"]
    config = dict(config)
    config.setdefault("params", {})
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": cmd,
        "seed": config.get("seed"),
        "params": config["params"],
        "truncated": False,
    }
    code = EXIT_OK
    try:
        if cmd == "semigroup":
            body = _run_semigroup(config)
        else:
            sys = _build_system(config["system"])
            report["system"] = sys.config()
            body = {"rp": _run_rp, "cubes": _run_cubes, "scan": _run_scan}[cmd](config, sys)
        report.update(body)
    except ClosureCapExceeded as exc:
        report.update(truncated=True, error=str(exc), measurement={"cap": exc.cap, "size": exc.size}, interpretation={})
        code = EXIT_FAIL
    return code, _jsonable(report)


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report: dict, path, argv=None, threads=None) -> None:
    path = Path(path)
    path.write_text(dump_report(report))
    meta = {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
        "argv": list(argv or []),
        "threads": threads,
    }
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


# argument parsing

def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cubelab", description="Dynamical cubes, RP^[d] witness search and finite semigroup audits.")
    sub = ap.add_subparsers(dest="cmd")

    def common(sp, sampling=True):
        sp.add_argument("--config", help="TOML or JSON experiment config")
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--threads", type=int, help="worker cap (computation is serial)")
        if sampling:
            sp.add_argument("--system", help="system config file or a kind name: " + ", ".join(KINDS))
            sp.add_argument("--seed", type=int)
            sp.add_argument("--d", type=int)

    rp = sub.add_parser("rp", help="RP^[d] witness search and characterization probes")
    common(rp)
    rp.add_argument("--x")
    rp.add_argument("--y")
    rp.add_argument("--z")
    rp.add_argument("--delta", type=float)
    rp.add_argument("--delta-ladder", nargs="?", const="", default=None, help="comma-separated deltas; bare flag uses the default ladder")
    rp.add_argument("--mode", choices=RP_MODES)
    rp.add_argument("--budget-R", type=int)
    rp.add_argument("--budget-M", type=int)
    rp.add_argument("--horizon", type=int)

    cubes = sub.add_parser("cubes", help="sample Y_x^[d] or Q^[d] clouds")
    common(cubes)
    cubes.add_argument("--set", choices=("Y", "Q"))
    cubes.add_argument("--x")
    cubes.add_argument("--recipe", choices=("total", "face"))
    cubes.add_argument("--budget", type=int)
    cubes.add_argument("--base-samples", type=int)
    cubes.add_argument("--compare-recipes", action="store_true")
    cubes.add_argument("--minimality", action="store_true")
    cubes.add_argument("--csv")
    cubes.add_argument("--binary")

    sg = sub.add_parser("semigroup", help="closure, ideals and identity audits of finite transformation semigroups")
    common(sg, sampling=False)
    sg.add_argument("--generators", help='JSON file {"n": int, "maps": [[...], ...]}')
    sg.add_argument("--audit", action="store_true")
    sg.add_argument("--monoid", action="store_true", help="adjoin the identity map")
    sg.add_argument("--tilde-d", type=int)
    sg.add_argument("--cap", type=int)

    scan = sub.add_parser("scan", help="generic-equality scan of Y_x^[d] against Q_x^[d]")
    common(scan)
    scan.add_argument("--grid", type=int)
    scan.add_argument("--sigma", type=float)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return ap


def _system_arg(value: str):
    path = Path(value)
    if path.exists():
        cfg = load_config_file(path)
        return cfg.get("system", cfg)
    return {"kind": value}


def load_experiment(path) -> dict:
    """Read a config file; relative generator paths are taken relative to the file."""
    cfg = dict(load_config_file(path))
    params = dict(cfg.get("params", {}))
    gens = params.get("generators")
    if isinstance(gens, str) and not Path(gens).is_absolute():
        params["generators"] = str(Path(path).parent / gens)
        cfg["params"] = params
    return cfg


def config_from_args(args) -> dict:
    cfg = load_experiment(args.config) if args.config else {}
    cfg.setdefault("schema_version", SCHEMA_VERSION)
    cfg["command"] = args.cmd
    params = dict(cfg.get("params", {}))
    output = dict(cfg.get("output", {}))
    if getattr(args, "system", None):
        cfg["system"] = _system_arg(args.system)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if args.cmd == "semigroup":
        cfg.setdefault("seed", None)
    flag_map = {
        "d": "d",
        "x": "x",
        "y": "y",
        "z": "z",
        "delta": "delta",
        "mode": "mode",
        "budget_R": "budget_R",
        "budget_M": "budget_M",
        "horizon": "horizon",
        "set": "set",
        "recipe": "recipe",
        "budget": "budget",
        "base_samples": "base_samples",
        "generators": "generators",
        "tilde_d": "tilde_d",
        "cap": "cap",
        "grid": "grid",
        "sigma": "sigma",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            params[key] = _floats(v) if key in ("x", "y", "z") else v
    for attr in ("compare_recipes", "minimality", "audit", "monoid"):
        if getattr(args, attr, False):
            params[attr] = True
    ladder = getattr(args, "delta_ladder", None)
    if ladder is not None:
        params["delta_ladder"] = _floats(ladder) if ladder else list(DELTA_LADDER)
    for attr in ("csv", "binary"):
        if getattr(args, attr, None):
            output[attr] = getattr(args, attr)
    if args.out:
        output["report"] = args.out
    cfg["params"] = params
    cfg["output"] = output
    return cfg


def _error(kind: str, messages) -> None:
    _sys.stderr.write(json.dumps({"error": kind, "diagnostics": list(messages)}, sort_keys=True) + "\n")


def main(argv=None) -> int:
    argv = list(_sys.argv[1:] if argv is None else argv)
    ap = _parser()
    if not argv:
        ap.print_usage(_sys.stderr)
        return EXIT_USAGE
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.cmd is None:
        ap.print_usage(_sys.stderr)
        return EXIT_USAGE
    try:
        if args.cmd == "validate":
            cfg = load_experiment(args.config)
            diags = validate(cfg)
            _sys.stdout.write(json.dumps({"diagnostics": diags, "valid": not diags}, sort_keys=True) + "\n")
            return EXIT_OK if not diags else EXIT_USAGE
        cfg = config_from_args(args)
    except (OSError, ValueError) as exc:
        _error("config", [str(exc)])
        return EXIT_USAGE
    try:
        code, report = run(cfg)
    except ConfigError as exc:
        _error("config", exc.diagnostics)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure: report it and exit 1
        _error("runtime", [f"{type(exc).__name__}: {exc}"])
        return EXIT_FAIL
    out = cfg["output"].get("report")
    if out:
        write_report(report, out, argv, getattr(args, "threads", None))
    else:
        _sys.stdout.write(dump_report(report))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
