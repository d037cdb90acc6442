"""Scenario file parsing, validation, defaulting, and serialization.

Scenarios are JSON documents with four sections (world, robots, params,
failures) plus a strategy name and a seed. Unknown keys are rejected and
every omitted parameter gets the benchmark default, so an empty params
section reproduces the reference parameter set exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Any

STRATEGIES = ("CARE", "NONCO", "FR")

DEFAULT_RHO0 = 3.0e-3
DEFAULT_RHO1 = 1400.0

PARAM_DEFAULTS: dict[str, float] = {
    "u": 0.4,  # travel speed, m/s
    "omega": 0.32,  # tasking speed, cells/s
    "eta": 30.0,  # near-finish threshold, s
    "gamma": 200.0,  # sufficient-work threshold, s
    "kappa1": 6,  # neighborhood size, no-idling games
    "kappa2": 3,  # neighborhood size, resilience games
    "n_max": 4,  # max robots per task
    "L": 50,  # learning cycles per game
    "tau": 0.05,  # learning temperature
    "heartbeat_s": 5.0,
    "t0_s": 15.0,  # silence timeout before suspicion
    "sync_every_s": 1.0,  # map-change broadcast period
    "tick_s": 1.0,
    "noise_sigma_m": 0.0,  # localization noise
    "sense_radius_m": 5.0,  # obstacle detection radius
}

_INT_PARAMS = {"kappa1", "kappa2", "n_max", "L"}


class ScenarioError(ValueError):
    """Scenario schema violation; message names the offending key."""


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def cells(self) -> list[tuple[int, int]]:
        return [(cx, cy) for cy in range(self.y, self.y + self.h) for cx in range(self.x, self.x + self.w)]

    def contains(self, cell: tuple[int, int]) -> bool:
        return self.x <= cell[0] < self.x + self.w and self.y <= cell[1] < self.y + self.h


@dataclass(frozen=True)
class TargetSpec:
    mode: str  # "sampled" | "explicit"
    lam: tuple[float, ...] = ()  # per-task Poisson means (sampled mode)
    cells: tuple[tuple[int, int], ...] = ()  # explicit placements, repeats stack


@dataclass(frozen=True)
class WorldSpec:
    width: int
    height: int
    epsilon_m: float
    obstacles: tuple[tuple[int, int], ...]
    tasks: tuple[Rect, ...]
    targets: TargetSpec


@dataclass(frozen=True)
class RobotSpec:
    id: int
    start: tuple[int, int]
    rho0: float | str = DEFAULT_RHO0  # number or "sample"
    rho1: float | str = DEFAULT_RHO1


@dataclass(frozen=True)
class FailureSpec:
    robot: int
    time_s: float


@dataclass(frozen=True)
class Params:
    u: float = PARAM_DEFAULTS["u"]
    omega: float = PARAM_DEFAULTS["omega"]
    eta: float = PARAM_DEFAULTS["eta"]
    gamma: float = PARAM_DEFAULTS["gamma"]
    kappa1: int = PARAM_DEFAULTS["kappa1"]
    kappa2: int = PARAM_DEFAULTS["kappa2"]
    n_max: int = PARAM_DEFAULTS["n_max"]
    L: int = PARAM_DEFAULTS["L"]
    tau: float = PARAM_DEFAULTS["tau"]
    heartbeat_s: float = PARAM_DEFAULTS["heartbeat_s"]
    t0_s: float = PARAM_DEFAULTS["t0_s"]
    sync_every_s: float = PARAM_DEFAULTS["sync_every_s"]
    tick_s: float = PARAM_DEFAULTS["tick_s"]
    noise_sigma_m: float = PARAM_DEFAULTS["noise_sigma_m"]
    sense_radius_m: float = PARAM_DEFAULTS["sense_radius_m"]


@dataclass(frozen=True)
class ScenarioConfig:
    world: WorldSpec
    robots: tuple[RobotSpec, ...]
    params: Params = field(default_factory=Params)
    failures: tuple[FailureSpec, ...] = ()
    strategy: str = "CARE"
    seed: int = 0


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ScenarioError(f"{where}: unknown key '{key}'")
    for key in required:
        if key not in obj:
            raise ScenarioError(f"{where}: missing required key '{key}'")


def _as_cell(value: Any, where: str) -> tuple[int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(c, int) and not isinstance(c, bool) for c in value)
    ):
        raise ScenarioError(f"{where}: expected an [x, y] integer cell, got {value!r}")
    return (value[0], value[1])


def _as_rect(value: Any, where: str) -> Rect:
    if not isinstance(value, dict):
        raise ScenarioError(f"{where}: expected a rect object {{x, y, w, h}}")
    _require_keys(value, {"x", "y", "w", "h"}, {"x", "y", "w", "h"}, where)
    for k in ("x", "y", "w", "h"):
        if not isinstance(value[k], int) or isinstance(value[k], bool):
            raise ScenarioError(f"{where}.{k}: expected an integer, got {value[k]!r}")
    if value["w"] <= 0 or value["h"] <= 0:
        raise ScenarioError(f"{where}: rect sides must be positive")
    return Rect(value["x"], value["y"], value["w"], value["h"])


def _as_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _parse_world(obj: Any) -> WorldSpec:
    if not isinstance(obj, dict):
        raise ScenarioError("world: expected an object")
    _require_keys(
        obj,
        {"width", "height", "epsilon_m", "obstacles", "tasks", "targets"},
        {"width", "height", "tasks"},
        "world",
    )
    width, height = obj["width"], obj["height"]
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ScenarioError(f"world.{name}: expected a positive integer, got {v!r}")
    epsilon = _as_number(obj.get("epsilon_m", 1.0), "world.epsilon_m")
    if epsilon <= 0:
        raise ScenarioError("world.epsilon_m: must be positive")

    tasks = tuple(_as_rect(t, f"world.tasks[{i}]") for i, t in enumerate(obj["tasks"]))
    seen: dict[tuple[int, int], int] = {}
    for idx, rect in enumerate(tasks):
        if rect.x < 0 or rect.y < 0 or rect.x + rect.w > width or rect.y + rect.h > height:
            raise ScenarioError(f"world.tasks[{idx}]: rect exceeds the grid")
        for cell in rect.cells():
            if cell in seen:
                raise ScenarioError(f"world.tasks[{idx}]: overlaps task {seen[cell]} at cell {list(cell)}")
            seen[cell] = idx
    if len(seen) != width * height:
        raise ScenarioError("world.tasks: task rects must partition the whole grid")

    obstacles: list[tuple[int, int]] = []
    for i, entry in enumerate(obj.get("obstacles", [])):
        where = f"world.obstacles[{i}]"
        if isinstance(entry, dict):
            rect = _as_rect(entry, where)
            obstacles.extend(rect.cells())
        else:
            obstacles.append(_as_cell(entry, where))
    for cell in obstacles:
        if not (0 <= cell[0] < width and 0 <= cell[1] < height):
            raise ScenarioError(f"world.obstacles: cell {list(cell)} outside the grid")
    obstacle_cells = tuple(sorted(set(obstacles)))

    tgt = obj.get("targets", {"mode": "sampled", "lambda": 1.0})
    if not isinstance(tgt, dict):
        raise ScenarioError("world.targets: expected an object")
    _require_keys(tgt, {"mode", "lambda", "cells"}, {"mode"}, "world.targets")
    mode = tgt["mode"]
    if mode == "sampled":
        lam = tgt.get("lambda", 1.0)
        if isinstance(lam, (list, tuple)):
            if len(lam) != len(tasks):
                raise ScenarioError(
                    f"world.targets.lambda: expected {len(tasks)} per-task values, got {len(lam)}"
                )
            lams = tuple(_as_number(v, f"world.targets.lambda[{i}]") for i, v in enumerate(lam))
        else:
            lams = (float(_as_number(lam, "world.targets.lambda")),) * len(tasks)
        if any(v < 0 for v in lams):
            raise ScenarioError("world.targets.lambda: values must be nonnegative")
        targets = TargetSpec(mode="sampled", lam=lams)
    elif mode == "explicit":
        cells = tuple(
            _as_cell(c, f"world.targets.cells[{i}]") for i, c in enumerate(tgt.get("cells", []))
        )
        for cell in cells:
            if not (0 <= cell[0] < width and 0 <= cell[1] < height):
                raise ScenarioError(f"world.targets.cells: cell {list(cell)} outside the grid")
            if cell in set(obstacle_cells):
                raise ScenarioError(f"world.targets.cells: target on obstacle cell {list(cell)}")
        targets = TargetSpec(mode="explicit", cells=tuple(sorted(cells)))
    else:
        raise ScenarioError(f"world.targets.mode: expected 'sampled' or 'explicit', got {mode!r}")

    return WorldSpec(
        width=width,
        height=height,
        epsilon_m=epsilon,
        obstacles=obstacle_cells,
        tasks=tasks,
        targets=targets,
    )


def _parse_robot(obj: Any, where: str, world: WorldSpec) -> RobotSpec:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    _require_keys(obj, {"id", "start", "rho0", "rho1"}, {"id", "start"}, where)
    rid = obj["id"]
    if not isinstance(rid, int) or isinstance(rid, bool) or rid < 1:
        raise ScenarioError(f"{where}.id: expected a positive integer, got {rid!r}")
    start = _as_cell(obj["start"], f"{where}.start")
    if not (0 <= start[0] < world.width and 0 <= start[1] < world.height):
        raise ScenarioError(f"{where}.start: cell {list(start)} outside the grid")
    if start in set(world.obstacles):
        raise ScenarioError(f"{where}.start: cell {list(start)} is an obstacle cell")

    def battery(key: str, default: float) -> float | str:
        raw = obj.get(key, default)
        if raw == "sample":
            return "sample"
        val = _as_number(raw, f"{where}.{key}")
        if val <= 0:
            raise ScenarioError(f"{where}.{key}: must be positive")
        return val

    return RobotSpec(id=rid, start=start, rho0=battery("rho0", DEFAULT_RHO0), rho1=battery("rho1", DEFAULT_RHO1))


def _parse_params(obj: Any) -> Params:
    if obj is None:
        return Params()
    if not isinstance(obj, dict):
        raise ScenarioError("params: expected an object")
    _require_keys(obj, set(PARAM_DEFAULTS), set(), "params")
    values: dict[str, Any] = {}
    for key, raw in obj.items():
        val = _as_number(raw, f"params.{key}")
        if key in _INT_PARAMS:
            if val != int(val) or val < 1:
                raise ScenarioError(f"params.{key}: expected a positive integer, got {raw!r}")
            values[key] = int(val)
        else:
            if val <= 0 and key != "noise_sigma_m":
                raise ScenarioError(f"params.{key}: must be positive")
            if key == "noise_sigma_m" and val < 0:
                raise ScenarioError("params.noise_sigma_m: must be nonnegative")
            values[key] = val
    params = Params(**values)
    if params.eta >= params.gamma:
        raise ScenarioError("params.eta: must be smaller than params.gamma")
    if params.heartbeat_s >= params.t0_s:
        raise ScenarioError("params.heartbeat_s: must be smaller than params.t0_s")
    return params


def parse_scenario(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object at top level")
    _require_keys(
        doc,
        {"world", "robots", "params", "failures", "strategy", "seed"},
        {"world", "robots"},
        "scenario",
    )
    world = _parse_world(doc["world"])
    if not isinstance(doc["robots"], list) or not doc["robots"]:
        raise ScenarioError("robots: expected a non-empty list")
    robots = tuple(_parse_robot(r, f"robots[{i}]", world) for i, r in enumerate(doc["robots"]))
    ids = [r.id for r in robots]
    if len(set(ids)) != len(ids):
        raise ScenarioError("robots: duplicate robot ids")

    params = _parse_params(doc.get("params"))

    failures: list[FailureSpec] = []
    for i, entry in enumerate(doc.get("failures", [])):
        where = f"failures[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected an object")
        _require_keys(entry, {"robot", "time_s"}, {"robot", "time_s"}, where)
        rid = entry["robot"]
        if rid not in ids:
            raise ScenarioError(f"{where}.robot: unknown robot id {rid!r}")
        t = _as_number(entry["time_s"], f"{where}.time_s")
        if t < 0:
            raise ScenarioError(f"{where}.time_s: must be nonnegative")
        failures.append(FailureSpec(robot=rid, time_s=t))

    strategy = doc.get("strategy", "CARE")
    if strategy not in STRATEGIES:
        raise ScenarioError(f"strategy: expected one of {list(STRATEGIES)}, got {strategy!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ScenarioError(f"seed: expected an integer, got {seed!r}")

    return ScenarioConfig(
        world=world,
        robots=robots,
        params=params,
        failures=tuple(failures),
        strategy=strategy,
        seed=seed,
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(doc)


def scenario_to_dict(config: ScenarioConfig) -> dict:
    """Canonical JSON-ready form; parse(serialize(config)) == config."""
    world: dict[str, Any] = {
        "width": config.world.width,
        "height": config.world.height,
        "epsilon_m": config.world.epsilon_m,
        "obstacles": [list(c) for c in config.world.obstacles],
        "tasks": [asdict(r) for r in config.world.tasks],
    }
    if config.world.targets.mode == "sampled":
        world["targets"] = {"mode": "sampled", "lambda": list(config.world.targets.lam)}
    else:
        world["targets"] = {"mode": "explicit", "cells": [list(c) for c in config.world.targets.cells]}
    return {
        "world": world,
        "robots": [
            {"id": r.id, "start": list(r.start), "rho0": r.rho0, "rho1": r.rho1} for r in config.robots
        ],
        "params": asdict(config.params),
        "failures": [{"robot": f.robot, "time_s": f.time_s} for f in config.failures],
        "strategy": config.strategy,
        "seed": config.seed,
    }


def dump_scenario(config: ScenarioConfig) -> str:
    return json.dumps(scenario_to_dict(config), indent=2)
