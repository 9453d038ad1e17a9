"""Declarative ablation scenarios: a lesion, a twin setup, a coverage target.

A scenario YAML fully determines a run, including the RNG seed, so repeated
runs produce identical telemetry. Results summarise coverage before and
after the optional swing-back pass plus per-pass bookkeeping for replay.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .config import RobotConfig, config_from_mapping, default_config
from .errors import ScenarioError
from .planner import (Lesion, RasterPath, ScanPlan, coverage, plan_scan,
                      swingback_path)
from .twin import SEED_ENV_VAR, Scene, Twin

# Scan-pass trail colours cycle in this order, pass 1 first.
PASS_COLORS = ("blue", "red", "yellow")


def pass_color(pass_index: int) -> str:
    """Colour for a 1-based scan pass index."""
    return PASS_COLORS[(pass_index - 1) % len(PASS_COLORS)]

_TOP_KEYS = {"name", "description", "seed", "dt_s", "telemetry_stride_ticks",
             "noise_sigma_mm", "coverage_target", "swingback", "config",
             "scene", "lesion"}
_SCENE_KEYS = {"standoff_mm", "insertion_depth_mm"}


@dataclass
class Scenario:
    name: str
    lesion: Lesion | None
    config: RobotConfig
    scene: Scene = field(default_factory=Scene)
    description: str = ""
    seed: int = 0
    dt: float = 0.05
    telemetry_stride: int = 1
    noise_sigma: float = 0.02
    coverage_target: float = 0.9
    swingback: bool = False


def _parse_lesion(spec: dict) -> Lesion:
    if not isinstance(spec, dict) or "shape" not in spec:
        raise ScenarioError("lesion needs a 'shape' key")
    shape = spec["shape"]
    try:
        if shape == "rectangle":
            return Lesion.rectangle(spec["center_mm"], spec["width_mm"],
                                    spec["height_mm"])
        if shape == "disc":
            return Lesion.disc(spec["center_mm"], spec["radius_mm"],
                               n=int(spec.get("segments", 64)))
        if shape == "polygon":
            return Lesion(spec["vertices_mm"])
    except KeyError as exc:
        raise ScenarioError(f"lesion shape {shape!r} is missing {exc}") from exc
    raise ScenarioError(f"unknown lesion shape {shape!r}")


def scenario_from_mapping(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario root must be a mapping")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {', '.join(unknown)}")
    if "name" not in data:
        raise ScenarioError("scenario needs at least a 'name'")
    cfg = (config_from_mapping(data["config"]) if data.get("config")
           else default_config())
    scene_spec = data.get("scene") or {}
    bad = sorted(set(scene_spec) - _SCENE_KEYS)
    if bad:
        raise ScenarioError(f"unknown scene keys: {', '.join(bad)}")
    scene = Scene(standoff=float(scene_spec.get("standoff_mm", 2.0)),
                  insertion_depth=float(scene_spec.get("insertion_depth_mm",
                                                       120.0)))
    # A scenario without a lesion is legal: it runs to an empty log with
    # coverage zero, which is how configuration smoke checks work.
    lesion = _parse_lesion(data["lesion"]) if data.get("lesion") else None
    return Scenario(
        name=str(data["name"]),
        lesion=lesion,
        config=cfg,
        scene=scene,
        description=str(data.get("description", "")),
        seed=int(data.get("seed", 0)),
        dt=float(data.get("dt_s", 0.05)),
        telemetry_stride=int(data.get("telemetry_stride_ticks", 1)),
        noise_sigma=float(data.get("noise_sigma_mm", 0.02)),
        coverage_target=float(data.get("coverage_target", 0.9)),
        swingback=bool(data.get("swingback", False)))


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return scenario_from_mapping(data)


def bundled_scenario(name: str) -> Scenario:
    """Load a packaged scenario by stem name."""
    ref = resources.files("fiberctl").joinpath(f"scenarios/{name}.yaml")
    try:
        with ref.open("r", encoding="utf-8") as fh:
            return scenario_from_mapping(yaml.safe_load(fh))
    except FileNotFoundError as exc:
        raise ScenarioError(f"no bundled scenario named {name!r}") from exc


@dataclass
class ScenarioResult:
    name: str
    seed: int
    coverage_main: float
    coverage_final: float
    coverage_target: float
    met_target: bool
    n_tiles: int
    n_strokes: int
    n_swingback_strokes: int
    n_spots: int
    duration_s: float
    max_temperature: float
    passes: list[dict]
    plan: dict

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        return d


def run_scenario(scenario: Scenario, jsonl_path=None,
                 twin: Twin | None = None) -> ScenarioResult:
    """Plan, execute and score one scenario on a fresh (or provided) twin.

    The FIBERCTL_SEED environment variable, when set, overrides the
    scenario's own seed; handy for shaking reproducibility bugs loose.
    """
    if twin is None:
        seed = scenario.seed
        if os.environ.get(SEED_ENV_VAR):
            seed = int(os.environ[SEED_ENV_VAR])
        twin = Twin(config=scenario.config, scene=scenario.scene,
                    seed=seed, dt=scenario.dt,
                    noise_sigma=scenario.noise_sigma,
                    telemetry_stride=scenario.telemetry_stride)
    scan = scenario.config.scan

    if scenario.lesion is None:
        if jsonl_path is not None:
            twin.write_jsonl(jsonl_path)
        empty = ScanPlan([], (0.0, 0.0), scan.raster_pitch)
        return ScenarioResult(
            name=scenario.name, seed=twin.seed, coverage_main=0.0,
            coverage_final=0.0, coverage_target=scenario.coverage_target,
            met_target=False, n_tiles=0, n_strokes=0, n_swingback_strokes=0,
            n_spots=0, duration_s=twin.time,
            max_temperature=twin.max_temperature, passes=[],
            plan=empty.to_dict())

    plan = plan_scan(twin.workspace, scenario.lesion, scan)
    passes: list[dict] = []

    def open_pass(kind: str, center) -> None:
        if passes:
            passes[-1]["t_end"] = twin.time
            passes[-1]["spot_end"] = len(twin.spots)
        passes.append({"kind": kind, "pass_index": twin.scan_pass_index,
                       "color": pass_color(twin.scan_pass_index),
                       "center": [float(center[0]), float(center[1])],
                       "t_start": twin.time, "spot_start": len(twin.spots),
                       "t_end": None, "spot_end": None})

    twin.execute_plan(plan, on_tile=lambda i, t: open_pass("tile", t.center))
    cov_main = coverage(scenario.lesion, twin.spots_array, scan)

    n_swing = 0
    if scenario.swingback and cov_main.fraction < scenario.coverage_target:
        sw = swingback_path(cov_main, scenario.lesion, scan)
        for stroke in sw.strokes:
            mid = 0.5 * (stroke[0] + stroke[1])
            twin.scan_pass_index += 1
            open_pass("swingback", mid)
            twin.execute_path(RasterPath([stroke]), pose_target=mid)
        n_swing = len(sw.strokes)
    if passes:
        passes[-1]["t_end"] = twin.time
        passes[-1]["spot_end"] = len(twin.spots)

    cov_final = coverage(scenario.lesion, twin.spots_array, scan)
    if jsonl_path is not None:
        twin.write_jsonl(jsonl_path)
    return ScenarioResult(
        name=scenario.name, seed=twin.seed,
        coverage_main=cov_main.fraction, coverage_final=cov_final.fraction,
        coverage_target=scenario.coverage_target,
        met_target=cov_final.fraction >= scenario.coverage_target,
        n_tiles=len(plan.tiles), n_strokes=plan.n_strokes,
        n_swingback_strokes=n_swing, n_spots=len(twin.spots),
        duration_s=twin.time, max_temperature=twin.max_temperature,
        passes=passes, plan=plan.to_dict())
