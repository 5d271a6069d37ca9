"""Command-line front end: ``worldsheet run|verify|sweep|gen-data|schema``.

Exit codes: 0 success, 2 configuration error, 3 assumption violated,
4 horizon violation, 5 run or suite failure.
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as datamod
from .config import DATA_SOURCES, load_config, schema_text
from .errors import AssumptionViolated, ConfigError, HorizonViolation, NotTimelike
from .io import read_data_table, write_data_table, write_diagnostics, write_snapshots
from .solvers import GridParams, solve_characteristic, solve_upwind_raw
from .spherical import SphericalChart, to_spherical_data
from .suites import fit_exponent, run_suites

log = logging.getLogger("worldsheet")

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_HORIZON, EXIT_FAILURE = 0, 2, 3, 4, 5


def build_data(cfg):
    d = cfg["data"]
    src = d["source"]
    if src == "file":
        out = read_data_table(d["path"])
    elif src == "epsilon-loop":
        out = datamod.epsilon_loop(d["epsilon"], r0=d["r0"], scale=d["scale"])
    elif src == "epsilon-line":
        out = datamod.epsilon_line(d["epsilon"], r0=d["r0"])
    elif src == "compact-patch":
        out = datamod.compact_patch(d["epsilon"], r0=d["r0"])
    elif src == "straight-string":
        out = datamod.straight_string(d["r0"])
    elif src == "standing-wave":
        out = datamod.standing_wave(d["amplitude"])
    elif src == "boosted-pulse":
        out = datamod.boosted_pulse(d["amplitude"])
    elif src == "h3-violating":
        out = datamod.h3_violating(d["amplitude"],
                                   r0=d["r0"] if cfg.mass > 0 else None)
    else:
        raise ConfigError("data.source", f"unknown source {src!r}")
    out.delta_hat = cfg.delta_hat if cfg.mass > 0 else out.delta_hat
    return out


def grid_from(cfg):
    g = cfg["grid"]
    return GridParams(nodes=g["nodes"], cfl=g["cfl"], interpolation=g["interpolation"],
                      pad=g["pad"], snapshot_times=tuple(cfg["output"]["snapshot_times"]))


def execute(cfg):
    """Run the configured pipeline; returns ``(results, assumption_report)``.

    Raises AssumptionViolated, HorizonViolation or NotTimelike on
    inadmissible data.
    """
    data = build_data(cfg)
    m = cfg.mass
    s = cfg["solver"]
    report = datamod.check_assumptions(data, m)
    if s["require_h3"] and not report.ok:
        raise AssumptionViolated(report.summary(), report)
    grid = grid_from(cfg)
    results = []
    if s["method"] in ("characteristic", "both"):
        results.append(solve_characteristic(data, m, s["T"], grid, require_h3=s["require_h3"]))
    if s["method"] in ("upwind", "both"):
        if s["chart"] == "spherical":
            results.append(solve_upwind_raw(to_spherical_data(data), m, s["T"], grid,
                                            chart=SphericalChart(m),
                                            require_h3=s["require_h3"]))
        else:
            results.append(solve_upwind_raw(data, m, s["T"], grid, require_h3=s["require_h3"]))
    return results, report


def _result_record(cfg, result, report):
    d = result.diagnostics.as_dict()
    return {"record": "run", "solver": result.solver, "chart": result.chart,
            "config": cfg.as_dict(), "assumptions": report.summary(), "diagnostics": d,
            "passed": result.ok and all(d["verdicts"].values())}


def cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg["output"]["prefix"]
    diag_path = out / f"{prefix}-diagnostics.jsonl"
    try:
        results, report = execute(cfg)
    except AssumptionViolated as exc:
        rep = exc.report
        witness = getattr(rep, "witness", None)
        print(f"AssumptionViolated: {exc}", file=sys.stderr)
        if witness is not None:
            print(f"witness pair: theta1={witness[0]:.9g} theta2={witness[1]:.9g}",
                  file=sys.stderr)
        write_diagnostics(diag_path, [{"record": "error", "error": "AssumptionViolated",
                                       "message": str(exc), "witness": witness}])
        return EXIT_ASSUMPTION
    except HorizonViolation as exc:
        print(f"HorizonViolation: {exc}", file=sys.stderr)
        write_diagnostics(diag_path, [{"record": "error", "error": "HorizonViolation",
                                       "message": str(exc)}])
        return EXIT_HORIZON
    except NotTimelike as exc:
        print(f"NotTimelike: {exc}", file=sys.stderr)
        write_diagnostics(diag_path, [{"record": "error", "error": "NotTimelike",
                                       "message": str(exc)}])
        return EXIT_FAILURE
    records = []
    status = EXIT_OK
    for r in results:
        path = out / f"{prefix}-{r.solver}-{r.chart}.csv"
        write_snapshots(path, r, cfg["output"]["snapshot_stride"])
        rec = _result_record(cfg, r, report)
        records.append(rec)
        d = r.diagnostics
        print(f"{r.solver}/{r.chart}: {r.termination.value} at t={d.t_final:.6g} "
              f"steps={d.steps} V_inf={d.v_inf:.4g} (initial {d.v_inf_0:.4g}) "
              f"Q_V={d.q_v:.4g} max_delta={d.max_delta:.3g} "
              f"min(r-2m)={d.min_horizon_gap:.4g}")
        for k, v in d.verdicts.items():
            print(f"  {k}: {'pass' if v else 'FAIL'}")
        print(f"  snapshots: {path}")
        if not rec["passed"]:
            status = EXIT_FAILURE
    write_diagnostics(diag_path, records)
    print(f"diagnostics: {diag_path}")
    return status


def _verify_options(cfg, quick):
    v = cfg["verify"]
    seed = v["seed"]
    opts = {
        "spectrum": {"count": v["jets"], "seed": seed, "tol": v["spectrum_tol"]},
        "identities": {"count": v["manufactured"], "seed": seed + 1, "h": v["identity_h"],
                       "tol": v["identity_tol"], "annihilation_tol": v["annihilation_tol"]},
        "degeneracy": {"count": v["states"], "seed": seed + 2, "tol": v["degeneracy_tol"]},
        "transport": {"order_min": v["order_min"]},
        "diffeomorphism": {"factor": v["roundtrip_factor"]},
        "flat": {"order_min": v["order_min"]},
        "estimates": {"exponent_tol": v["exponent_tol"]},
    }
    if quick:
        opts["spectrum"]["count"] = min(v["jets"], 500)
        opts["identities"]["count"] = min(v["manufactured"], 100)
        opts["degeneracy"]["count"] = min(v["states"], 500)
        opts["transport"]["nodes"] = (200, 400, 800)
        opts["diffeomorphism"].update(samples=100, times=(0.5, 2.0))
        opts["flat"].update(nodes=(201, 401, 801), T=2.0)
        opts["cross-chart"] = {"nodes": 401, "T": 5.0, "region": (-5.0, 5.0)}
        opts["cross-solver"] = {"nodes": (401, 801), "T": 5.0}
        opts["estimates"].update(T=20.0, nodes=1024, epsilons=(1e-2, 5e-3))
    return opts


def cmd_verify(args):
    cfg = load_config(args.config, _overrides(args))
    if args.suites:
        cfg = cfg.with_overrides({"verify.suites": args.suites})
    names = cfg["verify"]["suites"]
    results = run_suites(names, _verify_options(cfg, args.quick), mutate=args.mutate)
    failed = 0
    for r in results:
        print(r.line() + f" ({r.seconds:.1f} s)")
        failed += not r.passed
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['output']['prefix']}-verify.jsonl"
    write_diagnostics(path, [dict(r.as_dict(), record="suite", mutate=args.mutate)
                             for r in results])
    print(f"{len(results) - failed}/{len(results)} suites passed; report: {path}")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


def sweep_point(raw_config, source, axis, value):
    """Run one sweep point in a worker; returns a summary record."""
    from .config import parse_config
    key = {"epsilon": "data.epsilon", "nodes": "grid.nodes", "T": "solver.T"}[axis]
    text = str(int(value)) if axis == "nodes" else repr(float(value))
    t0 = time.perf_counter()
    try:
        cfg = parse_config(raw_config, source).with_overrides({key: text})
        results, _ = execute(cfg)
        r = results[0]
        d = r.diagnostics
        return {"record": "sweep-point", "axis": axis, "value": value,
                "termination": r.termination.value, "q_v": d.q_v, "v_one": d.v_one,
                "v_inf": d.v_inf, "v_inf_0": d.v_inf_0, "max_delta": d.max_delta,
                "min_horizon_gap": d.min_horizon_gap, "verdicts": d.verdicts,
                "x_final": r.snapshots[-1].x[r.snapshots[-1].valid].tolist()
                if axis == "nodes" else None,
                "seconds": time.perf_counter() - t0, "error": None}
    except Exception as exc:  # recorded; the sweep continues
        return {"record": "sweep-point", "axis": axis, "value": value,
                "error": f"{type(exc).__name__}: {exc}",
                "seconds": time.perf_counter() - t0}


def summarize_sweep(axis, points):
    """Fitted exponents from the successful points."""
    good = [p for p in points if p.get("error") is None]
    out = {"record": "sweep-summary", "axis": axis, "points": len(points),
           "failures": len(points) - len(good)}
    if axis == "epsilon" and len(good) >= 2:
        eps = [p["value"] for p in good]
        out["q_v_exponent"] = fit_exponent(eps, [p["q_v"] for p in good])
        out["v_one_exponent"] = fit_exponent(eps, [p["v_one"] for p in good])
    elif axis == "T":
        out["max_sup_ratio"] = max((p["v_inf"] / p["v_inf_0"] for p in good), default=None)
    elif axis == "nodes" and len(good) >= 3:
        good = sorted(good, key=lambda p: p["value"])
        q = np.array([p["q_v"] for p in good])
        diffs = np.abs(np.diff(q))
        ratio = np.array([good[i + 1]["value"] / good[i]["value"] for i in range(len(good) - 1)])
        with np.errstate(divide="ignore", invalid="ignore"):
            out["q_v_orders"] = (np.log(diffs[:-1] / diffs[1:]) / np.log(ratio[1:])).tolist()
    for p in points:
        p.pop("x_final", None)
    return out


def cmd_sweep(args):
    overrides = _overrides(args)
    cfg = load_config(args.config, overrides)
    sw = cfg["sweep"]
    axis = args.axis or sw["axis"]
    values = [float(v) for v in args.values.split(",")] if args.values else sw["values"]
    workers = args.workers or sw["workers"]
    raw = {s: {k: _text(v) for k, v in kv.items()} for s, kv in cfg.as_dict().items()}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_point, raw, cfg.source, axis, v) for v in values]
            points = [f.result() for f in futures]
    else:
        points = [sweep_point(raw, cfg.source, axis, v) for v in values]
    summary = summarize_sweep(axis, points)
    for p in points:
        if p.get("error"):
            print(f"{axis}={p['value']:g}: {p['error']}")
        else:
            print(f"{axis}={p['value']:g}: {p['termination']} Q_V={p['q_v']:.4e} "
                  f"V_inf/V_inf0={p['v_inf'] / p['v_inf_0']:.4f} ({p['seconds']:.1f} s)")
    for k, v in summary.items():
        if k != "record":
            print(f"{k}: {v}")
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg['output']['prefix']}-sweep-{axis}.jsonl"
    write_diagnostics(path, points + [summary])
    print(f"report: {path}")
    return EXIT_OK if summary["failures"] == 0 else EXIT_FAILURE


def cmd_gen_data(args):
    overrides = {"data.source": args.family}
    for key in ("epsilon", "r0", "scale", "amplitude"):
        val = getattr(args, key)
        if val is not None:
            overrides[f"data.{key}"] = str(val)
    cfg = load_config(None, overrides)
    data = build_data(cfg)
    path = write_data_table(args.output, data, args.nodes)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_schema(args):
    print(schema_text())
    return EXIT_OK


def _text(v):
    if v is None:
        return "none"
    if isinstance(v, list):
        return ", ".join(str(x) for x in v)
    return str(v)


def _overrides(args):
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(item, "expected section.key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    for flag, key in (("T", "solver.T"), ("nodes", "grid.nodes"), ("solver", "solver.method"),
                      ("epsilon", "data.epsilon"), ("mass", "metric.mass"),
                      ("output", "output.directory")):
        val = getattr(args, flag, None)
        if val is not None:
            out[key] = str(val)
    return out


def _common(p):
    p.add_argument("config", nargs="?", help="INI configuration file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one configuration value (repeatable)")
    p.add_argument("--output", help="output directory (overrides output.directory)")
    p.add_argument("--T", type=float, help="final time (solver.T)")
    p.add_argument("--nodes", type=int, help="grid nodes (grid.nodes)")
    p.add_argument("--solver", choices=["characteristic", "upwind", "both"],
                   help="solver.method")
    p.add_argument("--epsilon", type=float, help="data.epsilon")
    p.add_argument("--mass", type=float, help="metric.mass")


def build_parser():
    parser = argparse.ArgumentParser(prog="worldsheet",
                                     description="Strings in Schwarzschild: solvers and checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one configuration")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the property suites")
    _common(p)
    p.add_argument("--suites", help="comma-separated suite names")
    p.add_argument("--mutate", action="store_true",
                   help="flip the sign of the Christoffel source (the suites must fail)")
    p.add_argument("--quick", action="store_true", help="reduced sizes")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a configuration over a parameter axis")
    _common(p)
    p.add_argument("--axis", choices=["epsilon", "nodes", "T"])
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-data", help="write a data table")
    p.add_argument("--family", choices=[s for s in DATA_SOURCES if s != "file"],
                   default="epsilon-loop")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("schema", help="print the configuration schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
