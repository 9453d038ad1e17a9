"""Command-line entry points: twin (simulation), calib (fits), teleop
(network service and log replay)."""

from __future__ import annotations

import json
import os
import sys
import time

import click
import yaml

from .calibration import (check_linearity, fit_alpha, fit_moment_arm,
                          parse_characterization_csv)
from .config import default_config, load_config
from .errors import FiberError
from .planner import coverage
from .scenario import (bundled_scenario, load_scenario, pass_color,
                       run_scenario)
from .service import replay_log, run_server
from .session import Session
from .twin import Scene, Twin


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


def _load_scenario_arg(name_or_path: str):
    if os.path.exists(name_or_path):
        return load_scenario(name_or_path), open(name_or_path).read()
    sc = bundled_scenario(name_or_path)
    from importlib import resources
    text = resources.files("fiberctl").joinpath(
        f"scenarios/{name_or_path}.yaml").read_text()
    return sc, text


@click.group()
def twin() -> None:
    """Digital-twin simulation runs."""


@twin.command("run")
@click.option("--scenario", "scenario_arg", required=True,
              help="scenario YAML path, or a bundled scenario name")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="directory for telemetry.jsonl, result.json, scenario.yaml")
@click.option("--seed", type=int, default=None, help="override scenario seed")
def twin_run(scenario_arg: str, out_dir, seed) -> None:
    """Run a scenario and print its summary (exit 1 if target missed)."""
    try:
        sc, sc_text = _load_scenario_arg(scenario_arg)
        if seed is not None:
            sc.seed = seed
        jsonl = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            jsonl = os.path.join(out_dir, "telemetry.jsonl")
        result = run_scenario(sc, jsonl_path=jsonl)
        if out_dir is not None:
            with open(os.path.join(out_dir, "scenario.yaml"), "w",
                      encoding="utf-8") as fh:
                fh.write(sc_text)
            with open(os.path.join(out_dir, "result.json"), "w",
                      encoding="utf-8") as fh:
                json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
    except FiberError as exc:
        _fail(exc)
    out = result.to_dict()
    out.pop("plan")
    _echo_json(out)
    if not result.met_target:
        sys.exit(1)


def _read_records(log_path: str) -> list[dict]:
    records = []
    with open(log_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FiberError(f"{log_path}:{lineno}: not JSONL: {exc}")
    return records


@twin.command("coverage")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True),
              help="telemetry JSONL written by twin run")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True),
              default=None,
              help="scenario YAML (default: scenario.yaml next to the log)")
def twin_coverage(log_path: str, scenario_path) -> None:
    """Score lesion coverage from a telemetry log's stamped spots."""
    try:
        if scenario_path is None:
            scenario_path = os.path.join(os.path.dirname(log_path) or ".",
                                         "scenario.yaml")
            if not os.path.exists(scenario_path):
                raise FiberError(
                    "no scenario.yaml next to the log; pass --scenario")
        sc = load_scenario(scenario_path)
        records = _read_records(log_path)
        spots = [s for rec in records for s in rec.get("new_spots", [])]
        if sc.lesion is None:
            _echo_json({"n_records": len(records), "n_spots": len(spots),
                        "coverage": 0.0})
            return
        report = coverage(sc.lesion, spots, sc.config.scan)
        _echo_json({"n_records": len(records), "n_spots": len(spots),
                    "coverage": report.fraction,
                    "coverage_target": sc.coverage_target,
                    "met_target": report.fraction >= sc.coverage_target})
    except FiberError as exc:
        _fail(exc)


def _parse_speed(text: str) -> float:
    value = float(text.lstrip("xX"))
    if value <= 0.0:
        raise click.BadParameter("speed must be positive, e.g. x10")
    return value


@twin.command("replay")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True),
              help="telemetry JSONL written by twin run")
@click.option("--speed", default="x50", help="pacing multiplier, e.g. x10")
def twin_replay(log_path: str, speed: str) -> None:
    """Re-render a telemetry log to the terminal at a time-scaled pace."""
    try:
        rate = _parse_speed(speed)
        records = _read_records(log_path)
    except (FiberError, ValueError) as exc:
        _fail(exc)
    if not records:
        click.echo("empty log")
        return
    stride = max(1, len(records) // 40)
    n_spots = 0
    prev_t = records[0]["t"]
    for i, rec in enumerate(records):
        time.sleep(max(0.0, (rec["t"] - prev_t) / rate))
        prev_t = rec["t"]
        n_spots = rec.get("n_spots", n_spots)
        if i % stride == 0 or i == len(records) - 1:
            pp = rec.get("plane_point")
            pp_txt = ("--", "--") if pp is None else (f"{pp[0]:+7.3f}",
                                                      f"{pp[1]:+7.3f}")
            click.echo(f"t={rec['t']:8.2f}s mode={rec['mode']:<10} "
                       f"pass={rec['scan_pass_index']:>2} "
                       f"color={pass_color(max(1, rec['scan_pass_index'])):<6} "
                       f"plane=({pp_txt[0]},{pp_txt[1]}) "
                       f"laser={'ON ' if rec['laser_on'] else 'off'} "
                       f"spots={n_spots}")
    click.echo(f"replayed {len(records)} records, {n_spots} spots, "
               f"{records[-1]['t']:.2f} s of session time")


@click.group()
def calib() -> None:
    """Model-constant fits from characterisation CSV logs."""


def _scatter_svg(path, xs, ys, fit, xlabel: str, ylabel: str,
                 title: str) -> None:
    """Minimal standalone SVG scatter plot with the fitted curve."""
    w, h = 640, 420
    ml, mr, mt, mb = 64, 16, 28, 44
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(min(ys), 0.0), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x): return ml + (x - x0) / (x1 - x0) * (w - ml - mr)

    def sy(y): return h - mb - (y - y0) / (y1 - y0) * (h - mt - mb)

    n_fit = 64
    fit_pts = " ".join(
        f"{sx(x0 + (x1 - x0) * k / (n_fit - 1)):.1f},"
        f"{sy(fit(x0 + (x1 - x0) * k / (n_fit - 1))):.1f}"
        for k in range(n_fit))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'font-family="monospace" font-size="12">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2:.0f}" y="18" text-anchor="middle">{title}</text>',
        f'<line x1="{ml}" y1="{sy(y0):.1f}" x2="{w - mr}" y2="{sy(y0):.1f}" '
        'stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{h - mb}" stroke="black"/>',
    ]
    for k in range(5):
        xt = x0 + (x1 - x0) * k / 4
        yt = y0 + (y1 - y0) * k / 4
        parts.append(f'<text x="{sx(xt):.1f}" y="{h - mb + 16}" '
                     f'text-anchor="middle">{xt:.2f}</text>')
        parts.append(f'<text x="{ml - 6}" y="{sy(yt) + 4:.1f}" '
                     f'text-anchor="end">{yt:.2f}</text>')
    parts.append(f'<polyline points="{fit_pts}" fill="none" stroke="red"/>')
    parts.extend(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" '
                 'fill="none" stroke="blue"/>' for x, y in zip(xs, ys))
    parts.append(f'<text x="{(ml + w - mr) / 2:.0f}" y="{h - 10}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{(mt + h - mb) / 2:.0f}" '
                 f'text-anchor="middle" transform="rotate(-90 14 '
                 f'{(mt + h - mb) / 2:.0f})">{ylabel}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


@calib.command("fit")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True),
              help="characterisation CSV: input,displacement_mm,repeat")
@click.option("--kind", required=True,
              type=click.Choice(["thermal", "tendon"]),
              help="thermal: power->deflection gain; tendon: moment arm")
@click.option("--svg", "svg_path", type=click.Path(), default=None,
              help="write a scatter + fit plot here")
def calib_fit(csv_path: str, kind: str, svg_path) -> None:
    """Fit a model constant from a characterisation log."""
    cfg = default_config()
    try:
        ds = parse_characterization_csv(csv_path)
        if kind == "thermal":
            report = fit_alpha(ds)
            lin = check_linearity(ds)
            out = {"kind": kind, "alpha_mm_per_w": report.gain,
                   "fit": report.to_dict(), "linearity": lin.to_dict(),
                   "deflection_at_0p8_w_mm": report.gain * 0.8}

            def fit(x): return report.gain * x
            labels = ("channel power (W)", "deflection (mm)",
                      f"thermal gain fit: {report.gain:.4f} mm/W")
        else:
            report = fit_moment_arm(cfg.geometry, ds)
            out = {"kind": kind, "moment_arm_mm": report.gain,
                   "fit": report.to_dict()}
            from .kinematics import lateral_displacement

            def fit(x):
                return lateral_displacement(cfg.geometry, x / report.gain)
            labels = ("tendon pull (mm)", "lateral displacement (mm)",
                      f"moment-arm fit: {report.gain:.4f} mm")
        if svg_path is not None:
            _scatter_svg(svg_path, ds.inputs.tolist(),
                         ds.displacements.tolist(), fit, *labels)
            out["svg"] = svg_path
    except FiberError as exc:
        _fail(exc)
    _echo_json(out)


@click.group()
def teleop() -> None:
    """Networked teleoperation service and session-log replay."""


_SCENE_KEYS = {"standoff_mm", "insertion_depth_mm", "seed", "dt_s",
               "noise_sigma_mm", "time_scale"}


def _load_scene_file(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise FiberError("scene file must be a mapping")
    unknown = sorted(set(data) - _SCENE_KEYS)
    if unknown:
        raise FiberError(f"unknown scene keys: {', '.join(unknown)}")
    return data


def _next_log_path(log_dir: str) -> str:
    os.makedirs(log_dir, exist_ok=True)
    n = sum(1 for f in os.listdir(log_dir)
            if f.startswith("session-") and f.endswith(".jsonl"))
    return os.path.join(log_dir, f"session-{n:03d}.jsonl")


@teleop.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="robot config YAML (defaults built in)")
@click.option("--scene", "scene_path", type=click.Path(exists=True),
              default=None, help="scene YAML: standoff, depth, seed, dt ...")
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--log", "log_dir", type=click.Path(), default=None,
              help="directory for session JSONL logs")
def teleop_serve(config_path, scene_path, port: int, host: str,
                 log_dir) -> None:
    """Serve one twin session over a websocket."""
    try:
        cfg = load_config(config_path)
        scn = _load_scene_file(scene_path)
        scene = Scene(standoff=float(scn.get("standoff_mm", 2.0)),
                      insertion_depth=float(scn.get("insertion_depth_mm",
                                                    120.0)))
        seed = scn.get("seed")
        tw = Twin(config=cfg, scene=scene,
                  seed=int(seed) if seed is not None else None,
                  dt=float(scn.get("dt_s", 0.05)),
                  noise_sigma=float(scn.get("noise_sigma_mm", 0.02)))
        session = Session(tw)
        log_path = _next_log_path(log_dir) if log_dir else None
    except (FiberError, ValueError) as exc:
        _fail(exc)
    run_server(session, host=host, port=port,
               time_scale=float(scn.get("time_scale", 1.0)),
               log_path=log_path)


@teleop.command("replay")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True),
              help="session JSONL log written by teleop serve")
def teleop_replay(log_path: str) -> None:
    """Re-execute a session log and verify byte-identical telemetry."""
    try:
        stats = replay_log(log_path)
    except FiberError as exc:
        _fail(exc)
    _echo_json({"ok": True, **stats})


__all__ = ["twin", "calib", "teleop"]
