"""Command line entry point: run, sweep, validate and inspect scenarios.

    etconsensus run fig2.scenario --out runs/fig2
    etconsensus run fig1.scenario --mode periodic-laplacian --h 0.1
    etconsensus sweep fig3.scenario --sigma 0.2,0.5,0.8 --baseline
    etconsensus validate my.scenario
    etconsensus spectral fig2.scenario

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import replace
import io
import itertools
import json
import math
from pathlib import Path
import sys
import warnings


from .analysis import empirical_rate, rate_certificate, run_metrics, verify_exponential_bound
from .engine import EngineError, run
from .graph import GraphError, degrees, is_strongly_connected, spectral
from .periodic import (
    PeriodicConfig,
    SamplingBoundError,
    max_period_event,
    max_period_laplacian,
    run_periodic_event,
    run_periodic_laplacian,
)
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    ValidationError,
    load_scenario,
    validate_scenario,
)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def execute(cfg: ScenarioConfig, h_check: str = "warn"):
    """Run a scenario in its configured mode and return the trajectory."""
    if cfg.mode == "event-driven":
        return run(cfg)
    if cfg.mode == "periodic-event":
        return run_periodic_event(cfg, PeriodicConfig(cfg.h, "periodic-event", h_check))
    return run_periodic_laplacian(cfg, PeriodicConfig(cfg.h, "periodic-laplacian"))


def trace_text(traj) -> str:
    """CSV with one row per logged point: ``t, kind, agent, x_1..x_n, V, N_E``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "kind", "agent"] + [f"x_{i + 1}" for i in range(traj.n)] + ["V", "N_E"])
    for k in range(len(traj.t)):
        agent = "" if traj.agent[k] < 0 else str(traj.agent[k] + 1)
        w.writerow([_fmt(traj.t[k]), traj.label[k], agent]
                   + [_fmt(v) for v in traj.x[k]] + [_fmt(traj.V[k]), str(traj.n_events[k])])
    return buf.getvalue()


def write_trace(traj, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as f:
        f.write(trace_text(traj))
    return p


def _finite(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def metrics_summary(cfg: ScenarioConfig, traj) -> dict:
    m = run_metrics(traj)
    out = {
        "scenario": cfg.name,
        "mode": traj.mode,
        "horizon": cfg.horizon,
        "sigma": cfg.sigma if not isinstance(cfg.sigma, tuple) else list(cfg.sigma),
        "h": cfg.h,
        "cooldown": cfg.cooldown if traj.mode == "event-driven" else None,
        "final_disagreement": m.final_disagreement,
        "N_E": m.event_count_total,
        "N_E_per_agent": m.event_count.tolist(),
        "min_interevent": _finite(m.min_interevent_overall),
        "min_interevent_per_agent": [_finite(v) for v in m.min_interevent],
        "V0": float(traj.V[0]),
        "V_final": float(traj.V[-1]),
        "empirical_rate": _finite(empirical_rate(traj.t, traj.V)),
        "certificate_rate": None,
        "certificate_A": None,
        "certificate_holds": None,
    }
    # the exponential certificate only covers the event-driven law on a fixed graph
    if traj.mode == "event-driven" and not cfg.is_switching and is_strongly_connected(cfg.graph):
        cert = rate_certificate(cfg.graph, cfg.trigger_params())
        out["certificate_rate"] = cert.rate
        out["certificate_A"] = cert.A
        out["certificate_holds"] = verify_exponential_bound(traj, cert).holds
    return out


def write_metrics(summary: dict, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(summary, indent=2) + "\n")
    return p


def _apply_flags(cfg: ScenarioConfig, args) -> ScenarioConfig:
    kw = {}
    if getattr(args, "mode", None):
        kw["mode"] = args.mode
    if getattr(args, "h", None) is not None and not isinstance(args.h, str):
        kw["h"] = args.h
    if getattr(args, "horizon", None) is not None:
        kw["horizon"] = args.horizon
    if getattr(args, "sigma", None) is not None and not isinstance(args.sigma, str):
        kw["sigma"] = args.sigma
    if getattr(args, "no_cooldown", False):
        kw["cooldown"] = False
    if getattr(args, "allow_unbalanced", False):
        kw["allow_unbalanced"] = True
    return replace(cfg, **kw) if kw else cfg


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(args.scenario, validate=False)
    cfg = _apply_flags(cfg, args)
    for msg in validate_scenario(cfg):
        print(f"warning: {msg}", file=sys.stderr)
    return cfg


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg.output:
        return Path(cfg.output)
    return Path("runs") / cfg.name


def cmd_run(args) -> int:
    cfg = _load(args)
    traj = execute(cfg, args.h_check)
    out = _out_dir(args, cfg)
    write_trace(traj, out / "trace.csv")
    summary = metrics_summary(cfg, traj)
    write_metrics(summary, out / "metrics.json")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _parse_grid(text: str | None) -> list[float]:
    if text is None:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"cannot parse grid values {text!r}") from None


def _point_label(sigma, h) -> str:
    parts = []
    if sigma is not None:
        parts.append(f"sigma={sigma:g}")
    if h is not None:
        parts.append(f"h={h:g}")
    return "_".join(parts)


def _sweep_point(cfg: ScenarioConfig, mode: str, sigma, h, out: Path, h_check: str) -> dict:
    label = _point_label(sigma, h) if mode != "periodic-laplacian" else f"baseline_h={h:g}"
    row = {"point": label, "mode": mode, "sigma": sigma, "h": h}
    try:
        kw = {"mode": mode}
        if sigma is not None:
            kw["sigma"] = sigma
        if h is not None:
            kw["h"] = h
        pc = replace(cfg, **kw)
        row["h"] = pc.h
        validate_scenario(pc)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = execute(pc, h_check)
        summary = metrics_summary(pc, traj)
        write_trace(traj, out / label / "trace.csv")
        write_metrics(summary, out / label / "metrics.json")
        row.update(status="ok", N_E=summary["N_E"], final_disagreement=summary["final_disagreement"],
                   V_final=summary["V_final"], empirical_rate=summary["empirical_rate"],
                   min_interevent=summary["min_interevent"])
    except Exception as exc:  # a failed point is recorded, the sweep goes on
        row.update(status=f"error: {exc}")
    return row


SWEEP_COLUMNS = ["point", "mode", "sigma", "h", "status", "N_E", "final_disagreement",
                 "V_final", "empirical_rate", "min_interevent"]


def cmd_sweep(args) -> int:
    sigmas = _parse_grid(args.sigma)
    hs = _parse_grid(args.h)
    if not sigmas and not hs:
        raise ScenarioError("empty parameter grid: give --sigma and/or --h values")
    cfg = load_scenario(args.scenario, validate=False)
    base_kw = {}
    if args.horizon is not None:
        base_kw["horizon"] = args.horizon
    if args.no_cooldown:
        base_kw["cooldown"] = False
    if args.allow_unbalanced:
        base_kw["allow_unbalanced"] = True
    cfg = replace(cfg, **base_kw)
    mode = args.mode or cfg.mode
    points = [(mode, s, h) for s, h in itertools.product(sigmas or [None], hs or [None])]
    if args.baseline:
        for h in (hs or [cfg.h]):
            if h is None:
                raise ScenarioError("--baseline needs a sampling period")
            points.append(("periodic-laplacian", None, h))
    out = _out_dir(args, cfg)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, itertools.repeat(cfg), *zip(*points),
                                 itertools.repeat(out), itertools.repeat(args.h_check)))
    else:
        rows = [_sweep_point(cfg, m, s, h, out, args.h_check) for m, s, h in points]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in SWEEP_COLUMNS})
    print(f"{'point':<24} {'status':<8} {'N_E':>7} {'final_disagreement':>20}")
    for r in rows:
        status = r["status"] if r["status"] == "ok" else "failed"
        ne = r.get("N_E", "")
        fd = r.get("final_disagreement")
        print(f"{r['point']:<24} {status:<8} {ne!s:>7} {'' if fd is None else format(fd, '.3e'):>20}")
        if status == "failed":
            print(f"    {r['status']}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"{cfg.name}: ok ({cfg.n} agents, {len(cfg.schedule)} graph(s), mode {cfg.mode})")
    return EXIT_OK


def cmd_spectral(args) -> int:
    cfg = _load(args)
    params = cfg.trigger_params()
    for t, g in cfg.schedule:
        sd = spectral(g)
        d = degrees(g)
        print(f"graph at t={t:g}: lambda2={sd.lambda2:.12g} lambdaN={sd.lambdaN:.12g} "
              f"d_min_out={d.d_min_out:g} w_max={d.w_max:g} |N_max_out|={d.n_out_max}")
        if sd.lambda2 > 0:
            cert = rate_certificate(g, params)
            print(f"  A={cert.A:.12g} rate={cert.rate:.12g} (sigma_max={cert.sigma_max:g})")
        else:
            print("  not strongly connected: no rate certificate")
        print(f"  periodic-event needs h < {max_period_event(g, params.sigma_max):.6g}; "
              f"periodic Laplacian needs h < {max_period_laplacian(g):.6g}")
        eps = ", ".join(f"{v:.6g}" for v in params.epsilon)
        print(f"  epsilon = [{eps}]")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etconsensus",
                                description="Event-triggered average consensus on weight-balanced digraphs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid=False):
        sp.add_argument("scenario", help="scenario file, or the name of a bundled one (fig1..fig3, switching)")
        sp.add_argument("--mode", choices=["event-driven", "periodic-event", "periodic-laplacian"])
        if grid:
            sp.add_argument("--sigma", help="comma-separated sigma values")
            sp.add_argument("--h", help="comma-separated sampling periods")
        else:
            sp.add_argument("--sigma", type=float)
            sp.add_argument("--h", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--no-cooldown", action="store_true",
                        help="disable the cooldown rebroadcast trigger (Zeno guard stays armed)")
        sp.add_argument("--allow-unbalanced", action="store_true")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--h-check", choices=["warn", "reject", "off"], default="warn",
                        help="what to do when h violates the sufficient sampling condition")

    sp = sub.add_parser("run", help="simulate one scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="run a grid over sigma and/or h")
    common(sp, grid=True)
    sp.add_argument("--baseline", action="store_true", help="add periodic Laplacian runs for comparison")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("validate", help="check a scenario without running it")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    sp = sub.add_parser("spectral", help="print lambda2, lambdaN and the rate certificate")
    common(sp)
    sp.set_defaults(func=cmd_spectral)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return args.func(args)
    except (ScenarioError, ValidationError, GraphError, SamplingBoundError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EngineError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
