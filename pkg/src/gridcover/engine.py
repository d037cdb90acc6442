"""Deterministic discrete-time simulation of the robot team.

One-second ticks (configurable) drive message delivery, scheduled failures,
heartbeat-based failure confirmation, robot motion and covering, event
generation, and game resolution (at most one game per tick, FIFO). Runs are
bit-reproducible for a fixed (scenario, seed).
"""

from __future__ import annotations

import logging
import math
import random
import time
from dataclasses import dataclass, field

from .game import gain_of_players, gain_of_team, max_logit, potential, team_potential
from .models import BatteryParams, reliability, success_probability
from .planner import Done, PlannerState, make_planner, next_waypoint, plan_travel_to_any
from .scenario import DEFAULT_RHO0, DEFAULT_RHO1, ScenarioConfig
from .supervisor import (
    DesState,
    EventRecord,
    RobotView,
    TeamSnapshot,
    build_noidling_game,
    build_resilience_game,
    build_team_model,
    detect_failures,
    noidling_action_menu,
    post_game_assign,
    step,
)
from .world import (
    Cell,
    CellState,
    Change,
    GridMap,
    build_world,
    centroid_m,
    coverage_fraction,
    mark_covered,
    mark_sensed,
    merge_maps,
    partition_subregions,
)

log = logging.getLogger("gridcover.engine")


class LivenessError(RuntimeError):
    """The run cannot make the progress the scenario contract promises."""


def apply_localization_noise(
    pos: tuple[float, float], sigma: float, rng: random.Random
) -> tuple[float, float]:
    """Perturb a position with independent zero-mean Gaussian noise per axis.

    sigma = 0 is the identity and draws nothing from the generator.
    """
    if sigma <= 0.0:
        return pos
    return (pos[0] + rng.gauss(0.0, sigma), pos[1] + rng.gauss(0.0, sigma))


@dataclass
class Robot:
    id: int
    battery: BatteryParams
    pos_m: tuple[float, float]
    cell: Cell
    belief: GridMap
    des: DesState = DesState.ST
    task: int | None = None
    region: frozenset[Cell] = frozenset()
    strip_idx: int | None = None
    planner: PlannerState | None = None
    mode: str = "idle"  # tasking | traveling | idle
    path: list[Cell] = field(default_factory=list)
    travel_m: float = 0.0  # meters banked toward the next hop
    work_s: float = 0.0  # seconds banked toward the next covering step
    pending: tuple[int, int | None] | None = None  # (task, strip) queued after current region
    t_k: float = 0.0  # accumulated tasking seconds
    alive: bool = True
    last_active: int = 0
    outbox: list[Change] = field(default_factory=list)

    def region_unexplored(self) -> int:
        return sum(1 for c in self.region if self.belief.state(c) is CellState.UNEXPLORED)


@dataclass
class GameRecord:
    gid: int
    kind: str  # "noidle" | "resilience"
    tick: int
    trigger: int  # idling robot or failed robot
    players: tuple[int, ...]
    initial: tuple
    final: tuple
    phi_init: float
    phi_star: float
    gain_players: float
    team_phi_init: float
    team_phi_star: float
    gain_team: float
    assigned: dict[int, int | None]
    standby: tuple[int, ...]
    solve_wall_s: float


@dataclass
class MetricsRecord:
    cr: float
    ct_s: float
    rr_min: float | None
    rr_mean: float | None
    rr_max: float | None
    notf: int
    targets_placed: int
    totd: dict[int, float | None]
    games_noidle: int
    games_resilience: int
    gp_min: float | None
    gt_min: float | None
    end_reason: str
    ticks: int


@dataclass
class RunLogs:
    events: list[EventRecord] = field(default_factory=list)
    games: list[GameRecord] = field(default_factory=list)
    changes: list[tuple[int, int, Change]] = field(default_factory=list)  # (tick, robot, change)
    trajectories: list[tuple[int, int, float, float, int, int, str]] = field(default_factory=list)
    discoveries: list[tuple[int, int]] = field(default_factory=list)  # (tick, cumulative found)
    detector: list[tuple[int, int, int, int]] = field(default_factory=list)  # (tick, robot, yes, jury)
    snapshots: list[tuple[int, str]] = field(default_factory=list)
    end_reason: str = ""
    ticks: int = 0
    liveness_ok: bool = True


@dataclass
class RunResult:
    config: ScenarioConfig
    grid: GridMap
    metrics: MetricsRecord
    logs: RunLogs


class Simulation:
    def __init__(self, config: ScenarioConfig, snapshot_every: int = 0):
        self.config = config
        self.params = config.params
        self.strategy = config.strategy
        self.grid = build_world(config.world, config.seed)
        self.truth = self.grid.ground_truth
        self.snapshot_every = snapshot_every

        self.rng_game = random.Random(f"{config.seed}:game")
        self.rng_noise = random.Random(f"{config.seed}:noise")
        rng_battery = random.Random(f"{config.seed}:battery")

        self.robots: dict[int, Robot] = {}
        for spec in config.robots:
            rho0 = spec.rho0
            rho1 = spec.rho1
            if rho0 == "sample":
                rho0 = max(1e-9, rng_battery.gauss(DEFAULT_RHO0, 7.5e-5))
            if rho1 == "sample":
                rho1 = max(1e-9, rng_battery.gauss(DEFAULT_RHO1, 35.0))
            cell = spec.start
            self.robots[spec.id] = Robot(
                id=spec.id,
                battery=BatteryParams(rho0=rho0, rho1=rho1),
                pos_m=self.grid.cell_center(cell),
                cell=cell,
                belief=self.grid.belief_copy(),
            )
        self.order = sorted(self.robots)

        self._obstacle_centers = [
            (c, self.grid.cell_center(c)) for c in sorted(self.truth.obstacles)
        ]
        self._strips: dict[int, list[list[Cell]]] = {}
        self.occupied: dict[tuple[int, int], int] = {}  # (task, strip) -> robot
        self.standby: dict[int, list[int]] = {}  # task -> ranked standby robots
        self.queue: list[tuple[str, int]] = []
        self.confirmed: set[int] = set()
        self.failures = sorted(config.failures, key=lambda f: (f.time_s, f.robot))
        self._failure_i = 0
        self.last_beat_sent: dict[int, float] = {r: 0.0 for r in self.order}
        self.last_beat_recv: dict[int, float] = {r: 0.0 for r in self.order}
        self._next_sync = 0.0

        self.visited: set[Cell] = set()
        self.found_total = 0
        self.logs = RunLogs()
        self.tick = 0
        self.now = 0.0
        self._gid = 0
        free = len(self.truth.free_space)
        self.tick_bound = 200 + int(10 * free / self.params.omega / self.params.tick_s)

    # ------------------------------------------------------------------ setup

    def _strips_of(self, task_id: int) -> list[list[Cell]]:
        if task_id not in self._strips:
            self._strips[task_id] = partition_subregions(self.grid, task_id, self.params.n_max)
        return self._strips[task_id]

    def _initial_assignments(self) -> None:
        for rid in self.order:
            self._fire(self.robots[rid], "e0")
        by_task: dict[int, list[Robot]] = {}
        for rid in self.order:
            r = self.robots[rid]
            task = self.grid.task_of[self.grid.idx(r.cell)]
            r.task = task
            by_task.setdefault(task, []).append(r)
        for task in sorted(by_task):
            group = by_task[task]
            if len(group) == 1:
                self._assign_region(group[0], task, None)
                continue
            strips = self._strips_of(task)
            existing = [(r.id, self._probe_p(r, task), r.pos_m, None) for r in group]
            assignment, _standby = post_game_assign(strips, self.grid, [], existing)
            for r in group:
                if r.id in assignment:
                    self._assign_region(r, task, assignment[r.id])
                else:
                    # crowded start cell: no strip left; resolves through a game
                    r.region = frozenset()
                    r.mode = "tasking"
                    r.planner = make_planner(r.region, r.cell)
        for rid in self.order:
            self._sense(self.robots[rid], self.robots[rid].cell)

    def _probe_p(self, r: Robot, task_id: int) -> float:
        task = self.grid.tasks[task_id]
        return success_probability(
            r.battery,
            r.t_k,
            math.dist(r.pos_m, task.centroid_m),
            self.params.u,
            task.n_unexplored,
            self.params.omega,
        )

    # ------------------------------------------------------------- primitives

    def _fire(self, r: Robot, event: str, payload: tuple = ()) -> None:
        before = r.des
        r.des = step(before, event)
        self.logs.events.append(
            EventRecord(tick=self.tick, robot=r.id, event=event, before=before, after=r.des, payload=payload)
        )

    def _log_changes(self, r: Robot, changes: list[Change]) -> None:
        for ch in changes:
            self.logs.changes.append((self.tick, r.id, ch))

    def _sense(self, r: Robot, cell: Cell) -> None:
        pos = self.grid.cell_center(cell)
        radius = self.params.sense_radius_m + 1e-9
        readings = [
            (oc, True) for oc, center in self._obstacle_centers if math.dist(center, pos) <= radius
        ]
        if not readings:
            return
        own = mark_sensed(r.belief, readings)
        team_changes = mark_sensed(self.grid, readings)
        self._log_changes(r, team_changes)
        r.outbox.extend(own)

    def _cover_attempt(self, r: Robot, true_cell: Cell) -> None:
        self.visited.add(true_cell)
        pos = self.grid.cell_center(true_cell)
        noisy = apply_localization_noise(pos, self.params.noise_sigma_m, self.rng_noise)
        mcell = self.grid.cell_of_position(*noisy)
        if not self.grid.in_bounds(mcell):
            return
        if self.grid.state(mcell) in (CellState.OBSTACLE, CellState.FORBIDDEN):
            return
        change, found = mark_covered(self.grid, mcell)
        if change is not None:
            self._log_changes(r, [change])
        if found:
            self.found_total += found
            self.logs.discoveries.append((self.tick, self.found_total))
        local = Change(cell=mcell, old=CellState.UNEXPLORED, new=CellState.EXPLORED)
        merge_maps(r.belief, [local])
        r.outbox.append(local)

    def _release_occupancy(self, r: Robot) -> None:
        if r.task is not None and r.strip_idx is not None:
            self.occupied.pop((r.task, r.strip_idx), None)
        r.strip_idx = None

    def _release_pending(self, r: Robot) -> None:
        if r.pending is not None:
            task, strip = r.pending
            if strip is not None and self.occupied.get((task, strip)) == r.id:
                self.occupied.pop((task, strip))
            r.pending = None

    def _drop_standby(self, rid: int) -> None:
        for members in self.standby.values():
            if rid in members:
                members.remove(rid)

    def _task_holders(self, task: int, exclude: int | None = None) -> list[int]:
        """Live robots that will work the task: active region there or committed."""
        out = []
        for rid in self.order:
            r = self.robots[rid]
            if not r.alive or rid == exclude:
                continue
            if (r.task == task and r.region) or (r.pending is not None and r.pending[0] == task):
                out.append(rid)
        return out

    def _assign_region(self, r: Robot, task_id: int, strip_idx: int | None) -> None:
        """Point a robot at a task (whole) or one strip of it and get it going."""
        self._release_occupancy(r)
        self._release_pending(r)
        self._drop_standby(r.id)
        r.task = task_id
        r.strip_idx = strip_idx
        if strip_idx is None:
            r.region = frozenset(self.grid.tasks[task_id].cells)
        else:
            r.region = frozenset(self._strips_of(task_id)[strip_idx])
            self.occupied[(task_id, strip_idx)] = r.id
        self._dispatch(r)

    def _dispatch(self, r: Robot) -> None:
        """Route a robot toward the unexplored part of its region."""
        for _ in range(2):
            targets = {c for c in r.region if r.belief.state(c) is CellState.UNEXPLORED}
            if not targets:
                r.mode = "tasking"
                r.path = []
                r.planner = make_planner(r.region, r.cell)
                return
            found = plan_travel_to_any(r.belief, r.cell, targets)
            if found is None:
                self._resolve_pocket(r, targets)
                continue
            path, _goal = found
            if not path:
                r.mode = "tasking"
                r.path = []
                r.planner = make_planner(r.region, r.cell)
            else:
                r.mode = "traveling"
                r.path = path
                r.travel_m = 0.0
                r.planner = None
            return
        raise LivenessError(f"robot {r.id} cannot reach or resolve region cells")

    def _resolve_pocket(self, r: Robot, cells: set[Cell]) -> None:
        """Mark a belief-enclosed unknown pocket from ground truth.

        Reachability is blocked only by known obstacle/forbidden cells, so
        with connected free space an enclosed pocket cannot contain
        coverable cells; anything else is a scenario-contract violation.
        """
        stuck = sorted(cells & self.truth.free_space)
        if stuck:
            raise LivenessError(
                f"coverable cells walled off (disconnected free space?): {stuck[:5]}"
            )
        obstacles: set[Cell] = set()
        for c in cells:
            if c in self.truth.obstacles:
                obstacles.add(c)
            x, y = c
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    nb = (x + dx, y + dy)
                    if nb in self.truth.obstacles:
                        obstacles.add(nb)
        readings = [(c, True) for c in sorted(obstacles)]
        own = mark_sensed(r.belief, readings)
        team_changes = mark_sensed(self.grid, readings)
        self._log_changes(r, team_changes)
        r.outbox.extend(own)
        leftover = [c for c in sorted(cells) if r.belief.state(c) is CellState.UNEXPLORED]
        if leftover:
            raise LivenessError(f"pocket resolution left unexplored cells: {leftover[:5]}")

    # ------------------------------------------------------------------ ticks

    def run(self) -> RunResult:
        self._initial_assignments()
        if self.snapshot_every:
            self._snapshot()
        end = None
        while end is None:
            self.tick += 1
            self.now = self.tick * self.params.tick_s
            self._deliver_messages()
            self._apply_scheduled_failures()
            self._detection_pass()
            for rid in self.order:
                r = self.robots[rid]
                if r.alive and r.des is DesState.WK:
                    self._advance(r)
            self._resolve_one_game()
            self._stop_sweep()
            self._log_trajectories()
            if self.snapshot_every and self.tick % self.snapshot_every == 0:
                self._snapshot()
            end = self._end_reason()
        self.logs.end_reason = end
        self.logs.ticks = self.tick
        ok_reasons = {"complete", "all_failed"}
        if self.strategy in ("NONCO", "FR"):
            ok_reasons.add("quiesced")
        self.logs.liveness_ok = end in ok_reasons
        if self.snapshot_every:
            self._snapshot()
        metrics = self._compute_metrics()
        log.info(
            "run finished: %s after %d ticks, CR=%.4f CT=%.1fs games=%d",
            end,
            self.tick,
            metrics.cr,
            metrics.ct_s,
            len(self.logs.games),
        )
        return RunResult(config=self.config, grid=self.grid, metrics=metrics, logs=self.logs)

    def _deliver_messages(self) -> None:
        hb = self.params.heartbeat_s
        for rid in self.order:
            r = self.robots[rid]
            if r.alive and self.now - self.last_beat_sent[rid] >= hb - 1e-9:
                self.last_beat_sent[rid] = self.now
                self.last_beat_recv[rid] = self.now
        if self.now + 1e-9 >= self._next_sync:
            self._next_sync += self.params.sync_every_s
            bundles = [(rid, self.robots[rid].outbox) for rid in self.order if self.robots[rid].outbox]
            for rid, changes in bundles:
                for other in self.order:
                    if other != rid:
                        merge_maps(self.robots[other].belief, changes)
            for rid, _ in bundles:
                self.robots[rid].outbox = []

    def _apply_scheduled_failures(self) -> None:
        while self._failure_i < len(self.failures) and self.failures[self._failure_i].time_s <= self.now:
            spec = self.failures[self._failure_i]
            self._failure_i += 1
            r = self.robots[spec.robot]
            if not r.alive or r.des in (DesState.FL, DesState.SP):
                log.warning("failure of robot %d at t=%.0f ignored (state %s)", r.id, spec.time_s, r.des.value)
                continue
            self._fire(r, "e7")
            r.alive = False
            r.mode = "idle"
            r.path = []
            r.planner = None
            self._release_occupancy(r)
            self._release_pending(r)
            self._drop_standby(r.id)

    def _detection_pass(self) -> None:
        live = [rid for rid in self.order if self.robots[rid].alive]
        subjects = [rid for rid in self.order if rid not in self.confirmed]
        votes = {
            l: {u: self.now - self.last_beat_recv[u] > self.params.t0_s for u in subjects if u != l}
            for l in live
        }
        positions = {rid: self.robots[rid].pos_m for rid in self.order}
        newly = detect_failures(subjects, live, votes, positions, self.params.kappa2, self.confirmed)
        for u in sorted(newly):
            self.confirmed.add(u)
            jury = [l for l in live if l != u]
            jury.sort(key=lambda l: (math.dist(positions[l], positions[u]), l))
            jury = jury[: self.params.kappa2]
            yes = sum(1 for l in jury if votes[l].get(u, False))
            self.logs.detector.append((self.tick, u, yes, len(jury)))
            log.info("t=%d: robot %d confirmed failed", self.tick, u)
            if self.strategy == "CARE":
                self._handle_confirmed_failure(u)

    def _working_in(self, task: int, exclude: int | None = None) -> list[int]:
        """Live robots physically tasking inside the task right now."""
        return [
            rid
            for rid in self.order
            if rid != exclude
            and self.robots[rid].alive
            and self.robots[rid].task == task
            and self.robots[rid].mode == "tasking"
            and self.robots[rid].region
        ]

    def _handle_confirmed_failure(self, failed_id: int) -> None:
        dead = self.robots[failed_id]
        task = dead.task
        if task is None or self.grid.tasks[task].n_unexplored == 0:
            return
        if self._working_in(task, exclude=failed_id):
            # Takeover: co-workers keep the task, standbys fill the freed slot.
            self._reactivate_standbys(task)
            return
        self.queue.append(("resilience", failed_id))

    def _reactivate_standbys(self, task: int) -> None:
        waiting = [
            rid
            for rid in self.standby.get(task, [])
            if self.robots[rid].alive and self.robots[rid].des is DesState.ID
        ]
        if not waiting:
            return
        strips = self._strips_of(task)
        free = [
            k
            for k in range(len(strips))
            if (task, k) not in self.occupied
            and any(self.grid.state(c) is CellState.UNEXPLORED for c in strips[k])
        ]
        for rid in waiting:
            if not free:
                break
            r = self.robots[rid]
            best = min(
                free, key=lambda k: (math.dist(r.pos_m, centroid_m(strips[k], self.grid.epsilon)), k)
            )
            free.remove(best)
            self._fire(r, "e1", payload=("reactivate", task))
            self._fire(r, "e3", payload=(task,))
            self._assign_region(r, task, best)

    # ------------------------------------------------------------ robot moves

    def _advance(self, r: Robot) -> None:
        if r.mode == "traveling":
            self._advance_travel(r)
        elif r.mode == "tasking":
            self._advance_tasking(r)
        if r.mode in ("traveling", "tasking"):
            r.last_active = self.tick

    def _advance_travel(self, r: Robot) -> None:
        if r.region_unexplored() == 0:
            self._workload_complete(r)
            return
        if any(r.belief.state(c) in (CellState.OBSTACLE, CellState.FORBIDDEN) for c in r.path):
            self._dispatch(r)
            if r.mode != "traveling":
                return
        r.travel_m += self.params.u * self.params.tick_s
        eps = self.grid.epsilon
        while r.path and r.travel_m >= eps - 1e-9:
            r.travel_m -= eps
            r.cell = r.path.pop(0)
            r.pos_m = self.grid.cell_center(r.cell)
            self._sense(r, r.cell)
        if not r.path:
            r.mode = "tasking"
            r.work_s = 0.0
            r.travel_m = 0.0
            r.planner = make_planner(r.region, r.cell)

    def _advance_tasking(self, r: Robot) -> None:
        if r.region_unexplored() == 0:
            self._workload_complete(r)
            return
        r.t_k += self.params.tick_s
        r.work_s += self.params.tick_s
        per_cell = 1.0 / self.params.omega
        while r.work_s >= per_cell - 1e-9:
            wp = next_waypoint(r.belief, r.planner, r.cell)
            if isinstance(wp, Done):
                if wp.unreachable:
                    self._resolve_pocket(r, set(wp.unreachable))
                    continue
                self._workload_complete(r)
                return
            r.work_s -= per_cell
            r.cell = wp
            r.pos_m = self.grid.cell_center(wp)
            self._sense(r, wp)
            if wp in r.region and r.belief.state(wp) is CellState.UNEXPLORED:
                self._cover_attempt(r, wp)

    def _workload_complete(self, r: Robot) -> None:
        self._release_occupancy(r)
        r.path = []
        r.planner = None
        if r.pending is not None:
            task, strip = r.pending
            r.pending = None
            self._drop_standby(r.id)
            r.task = task
            r.strip_idx = strip
            if strip is None:
                r.region = frozenset(self.grid.tasks[task].cells)
            else:
                r.region = frozenset(self._strips_of(task)[strip])
                self.occupied[(task, strip)] = r.id
            self._dispatch(r)
            return
        # Stay on the same task while an unclaimed incomplete strip remains.
        if r.task is not None and self.grid.tasks[r.task].n_unexplored > 0:
            strips = self._strips_of(r.task)
            free = [
                k
                for k in range(len(strips))
                if (r.task, k) not in self.occupied
                and any(r.belief.state(c) is CellState.UNEXPLORED for c in strips[k])
            ]
            if free:
                best = min(
                    free,
                    key=lambda k: (math.dist(r.pos_m, centroid_m(strips[k], self.grid.epsilon)), k),
                )
                self._assign_region(r, r.task, best)
                return
        done_task = r.task
        r.region = frozenset()
        r.mode = "idle"
        self._fire(r, "e2", payload=(done_task,))
        if self.strategy == "NONCO":
            self._fire(r, "e4")
            r.task = None
        else:
            self.queue.append(("noidle", r.id))

    # ------------------------------------------------------------------ games

    def _snapshot_team(self) -> TeamSnapshot:
        views = {}
        for rid in self.order:
            r = self.robots[rid]
            if not r.alive:
                continue
            views[rid] = RobotView(
                id=rid,
                pos_m=r.pos_m,
                task=r.task,
                region_unexplored=r.region_unexplored(),
                mode=r.mode,
                des=r.des,
                battery=r.battery,
                tasking_time_s=r.t_k,
            )
        return TeamSnapshot(grid=self.grid, params=self.params, robots=views)

    def _pending_tasks(self) -> dict[int, int]:
        return {
            rid: self.robots[rid].pending[0]
            for rid in self.order
            if self.robots[rid].alive and self.robots[rid].pending is not None
        }

    def _extend_assigned(self, model) -> None:
        # Robots committed to a task they have not switched to yet count as
        # assigned there for worth discounting and the orphan rule.
        for rid, task in sorted(self._pending_tasks().items()):
            if rid not in model.assigned[task]:
                model.assigned[task].append(rid)

    def _resolve_one_game(self) -> None:
        retry: list[tuple[str, int]] = []
        resolved = False
        while self.queue and not resolved:
            kind, subject = self.queue.pop(0)
            if kind == "noidle":
                r = self.robots[subject]
                if not r.alive or r.des is not DesState.NG:
                    continue
                if self.strategy == "FR":
                    resolved = self._resolve_fr(r)
                else:
                    resolved = self._resolve_noidling(r)
            else:
                dead = self.robots[subject]
                task = dead.task
                if task is None or self.grid.tasks[task].n_unexplored == 0:
                    continue
                if self._working_in(task, exclude=subject):
                    continue  # taken over meanwhile, nothing to re-optimize
                outcome = self._resolve_resilience(dead)
                if outcome == "retry":
                    retry.append((kind, subject))
                    continue
                resolved = outcome
        self.queue = retry + self.queue

    def _resolve_noidling(self, trigger: Robot) -> bool:
        snap = self._snapshot_team()
        model = build_team_model(snap)
        self._extend_assigned(model)
        game = build_noidling_game(trigger.id, snap, model, self.rng_game)
        if game is None:
            self._fire(trigger, "e4")
            trigger.task = None
            return False
        for v in game.players:
            if v != trigger.id:
                self._fire(self.robots[v], "e5", payload=(trigger.id,))
        self._apply_game(game, snap, model, kind="noidle", trigger=trigger.id)
        return True

    def _resolve_resilience(self, dead: Robot):
        snap = self._snapshot_team()
        model = build_team_model(snap)
        self._extend_assigned(model)
        game = build_resilience_game(dead.id, dead.pos_m, dead.task, snap, model)
        if game is None:
            return "retry"  # no eligible players right now
        for v in game.players:
            self._fire(self.robots[v], "e1", payload=(dead.id,))
        self._apply_game(game, snap, model, kind="resilience", trigger=dead.id)
        return True

    def _place_incoming(
        self, task: int, arrivals: list[int], model, skip: set[int]
    ) -> dict[int, int | None]:
        """Slot new arrivals into a task and re-strip its current holders.

        A single arrival into an unheld task takes it whole; otherwise the
        strip coordination runs: holders keep (or shrink to) the strip at
        their position, inbound reservations hold theirs, arrivals rank by
        success probability. Returns arrival placements; unplaced arrivals
        are absent (standby).
        """
        existing = []
        for rid in self.order:
            o = self.robots[rid]
            if not o.alive or rid in skip or rid in arrivals:
                continue
            if o.task == task and o.region:
                existing.append((rid, model.prob[rid][task], o.pos_m, o.strip_idx))
            elif o.pending is not None and o.pending[0] == task:
                existing.append((rid, model.prob[rid][task], o.pos_m, o.pending[1]))
        if not existing and len(arrivals) == 1:
            return {arrivals[0]: None}
        incoming = [(v, model.prob[v][task], self.robots[v].pos_m) for v in arrivals]
        placement, _out = post_game_assign(self._strips_of(task), self.grid, incoming, existing)
        for rid, _p, _pos, old_strip in existing:
            if rid in placement and placement[rid] != old_strip:
                o = self.robots[rid]
                if o.pending is not None and o.pending[0] == task:
                    self._release_pending(o)
                    o.pending = (task, placement[rid])
                    if placement[rid] is not None:
                        self.occupied[(task, placement[rid])] = rid
                else:
                    self._assign_region(o, task, placement[rid])
        return {v: placement[v] for v in arrivals if v in placement}

    def _team_phi_baseline(self, snap: TeamSnapshot, model, game, actions) -> float:
        """Team potential with players at the given game actions.

        Each robot contributes to its assigned/committed tasks; a player
        additionally contributes to its game action. Near-finishing players
        keep contributing to the current task they will complete first.
        """
        players = list(game.players)
        pending_now = self._pending_tasks()
        assignment: dict[int, object] = {}
        for v in snap.robots:
            tasks: set[int] = set()
            if v in players:
                act = actions[players.index(v)]
                if act is not None:
                    tasks.add(act)
                if model.pending_s[v] > 0.0 and snap.robots[v].task is not None:
                    tasks.add(snap.robots[v].task)
            else:
                if snap.robots[v].task is not None:
                    tasks.add(snap.robots[v].task)
                if v in pending_now:
                    tasks.add(pending_now[v])
            assignment[v] = tasks or None
        return team_potential(assignment, model.remaining, model.prob)

    def _apply_game(self, game, snap: TeamSnapshot, model, kind: str, trigger: int) -> None:
        t0 = time.perf_counter()
        a_star, _trace = max_logit(game, self.rng_game)
        wall = time.perf_counter() - t0
        phi_init = potential(game, game.initial)
        phi_star = potential(game, a_star)
        worth_sum = sum(game.worth.values())
        gp = gain_of_players(phi_star, phi_init, worth_sum)

        # The reallocation changes only the players' slice of the team
        # potential: non-player and finish-first contributions are invariant,
        # so the team potential moves exactly with the players' potential.
        team_sum = sum(model.remaining.values())
        team_init = self._team_phi_baseline(snap, model, game, game.initial)
        team_star = team_init + (phi_star - phi_init)
        gt = gain_of_team(team_star, team_init, team_sum)

        players = list(game.players)
        assigned_log: dict[int, int | None] = {}
        standby_log: list[int] = []
        menu = set(game.actions)
        stay: dict[int, bool] = {}
        incoming_by_task: dict[int, list[int]] = {}
        for i, v in enumerate(players):
            act = a_star[i]
            r = self.robots[v]
            if act not in menu:
                assigned_log[v] = None
                continue
            assigned_log[v] = act
            if (r.task == act and r.region) or (r.pending is not None and r.pending[0] == act):
                stay[v] = True
            else:
                incoming_by_task.setdefault(act, []).append(v)

        for task in sorted(incoming_by_task):
            arrivals = incoming_by_task[task]
            skip = {v for v in players if not stay.get(v)}
            placements = self._place_incoming(task, arrivals, model, skip)
            for v in arrivals:
                r = self.robots[v]
                if v in placements:
                    self._fire(r, "e3", payload=(task,))
                    if model.pending_s[v] > 0.0 and r.region:
                        # finish the near-done current region first
                        self._release_pending(r)
                        self._drop_standby(v)
                        strip = placements[v]
                        r.pending = (task, strip)
                        if strip is not None:
                            self.occupied[(task, strip)] = v
                    else:
                        self._assign_region(r, task, placements[v])
                else:
                    standby_log.append(v)
                    assigned_log[v] = None
                    self.standby.setdefault(task, []).append(v)
                    if r.region and r.region_unexplored() > 0:
                        self._fire(r, "e3", payload=(r.task,))
                    else:
                        self._fire(r, "e4")
                        r.task = None
                        r.region = frozenset()
                        r.mode = "idle"

        for v in players:
            r = self.robots[v]
            if r.des not in (DesState.NG, DesState.RG):
                continue  # already routed above
            if stay.get(v) or (assigned_log[v] is None and r.region and r.region_unexplored() > 0):
                self._fire(r, "e3", payload=(r.task,))
            else:
                self._fire(r, "e4")
                r.task = None
                r.region = frozenset()
                r.mode = "idle"

        self._gid += 1
        self.logs.games.append(
            GameRecord(
                gid=self._gid,
                kind=kind,
                tick=self.tick,
                trigger=trigger,
                players=tuple(players),
                initial=tuple(game.initial),
                final=tuple(a_star),
                phi_init=phi_init,
                phi_star=phi_star,
                gain_players=gp,
                team_phi_init=team_init,
                team_phi_star=team_star,
                gain_team=gt,
                assigned=assigned_log,
                standby=tuple(standby_log),
                solve_wall_s=wall,
            )
        )
        log.info(
            "t=%d: %s game %d players=%s G_P=%.4f G_T=%.4f",
            self.tick,
            kind,
            self._gid,
            players,
            gp,
            gt,
        )

    def _resolve_fr(self, trigger: Robot) -> bool:
        """First-responder pick: the idler alone maximizes its own payoff."""
        snap = self._snapshot_team()
        model = build_team_model(snap)
        self._extend_assigned(model)
        menu = noidling_action_menu(model, self.params.gamma)
        if not menu:
            self._fire(trigger, "e4")
            trigger.task = None
            return False
        worth = {}
        for rtask in menu:
            occ = [v for v in model.assigned[rtask] if v != trigger.id]
            share = 1.0
            for v in occ:
                share *= 1.0 - model.prob[v][rtask]
            worth[rtask] = model.remaining[rtask] * share
        scores = {rtask: worth[rtask] * model.prob[trigger.id][rtask] for rtask in menu}
        best = min(menu, key=lambda rtask: (-scores[rtask], rtask))

        pending_now = self._pending_tasks()
        assignment: dict[int, object] = {}
        for v in snap.robots:
            tasks: set[int] = set()
            if v != trigger.id:
                if snap.robots[v].task is not None:
                    tasks.add(snap.robots[v].task)
                if v in pending_now:
                    tasks.add(pending_now[v])
            assignment[v] = tasks or None
        team_sum = sum(model.remaining.values())
        team_init = team_potential(assignment, model.remaining, model.prob)
        team_star = team_init + scores[best]

        standby_log: list[int] = []
        placements = self._place_incoming(best, [trigger.id], model, {trigger.id})
        if trigger.id in placements:
            self._fire(trigger, "e3", payload=(best,))
            self._assign_region(trigger, best, placements[trigger.id])
            placed: int | None = best
        else:
            self._fire(trigger, "e4")
            trigger.task = None
            trigger.region = frozenset()
            trigger.mode = "idle"
            self.standby.setdefault(best, []).append(trigger.id)
            standby_log.append(trigger.id)
            placed = None

        self._gid += 1
        self.logs.games.append(
            GameRecord(
                gid=self._gid,
                kind="noidle",
                tick=self.tick,
                trigger=trigger.id,
                players=(trigger.id,),
                initial=(None,),
                final=(best,),
                phi_init=0.0,
                phi_star=scores[best],
                gain_players=gain_of_players(scores[best], 0.0, sum(worth.values())),
                team_phi_init=team_init,
                team_phi_star=team_star,
                gain_team=gain_of_team(team_star, team_init, team_sum),
                assigned={trigger.id: placed},
                standby=tuple(standby_log),
                solve_wall_s=0.0,
            )
        )
        return True

    # ------------------------------------------------------------- accounting

    def _stop_sweep(self) -> None:
        if self.grid.unexplored_total > 0:
            return
        for rid in self.order:
            r = self.robots[rid]
            if r.alive and r.des is DesState.ID:
                self._fire(r, "e6")
                r.task = None
                r.mode = "idle"

    def _log_trajectories(self) -> None:
        for rid in self.order:
            r = self.robots[rid]
            if not r.alive:
                continue
            self.logs.trajectories.append(
                (self.tick, rid, r.pos_m[0], r.pos_m[1], r.cell[0], r.cell[1], r.mode)
            )

    def _snapshot(self) -> None:
        chars = {
            CellState.UNEXPLORED: "U",
            CellState.EXPLORED: "E",
            CellState.FORBIDDEN: "F",
            CellState.OBSTACLE: "O",
        }
        rows = []
        for y in range(self.grid.height):
            rows.append("".join(chars[self.grid.state((x, y))] for x in range(self.grid.width)))
        self.logs.snapshots.append((self.tick, "\n".join(rows) + "\n"))

    def _end_reason(self) -> str | None:
        live = [self.robots[rid] for rid in self.order if self.robots[rid].alive]
        if not live:
            return "all_failed"
        if all(r.des is DesState.SP for r in live):
            return "complete"
        if all(r.des is DesState.ID for r in live) and not self.queue:
            return "stalled" if self.strategy == "CARE" else "quiesced"
        if self.tick >= self.tick_bound:
            return "tick_bound"
        return None

    def _compute_metrics(self) -> MetricsRecord:
        live = [self.robots[rid] for rid in self.order if self.robots[rid].alive]
        cr = coverage_fraction(self.truth, self.visited)
        if live:
            ct = max(r.last_active for r in live) * self.params.tick_s
            rr = sorted(reliability(r.battery, r.t_k) for r in live)
            rr_min, rr_max = rr[0], rr[-1]
            rr_mean = sum(rr) / len(rr)
        else:
            ct = max((r.last_active for r in self.robots.values()), default=0) * self.params.tick_s
            rr_min = rr_mean = rr_max = None
        placed = len(self.grid.targets)
        totd: dict[int, float | None] = {}
        for pct in range(10, 101, 10):
            need = pct * placed / 100.0 - 1e-9
            hit = next((t for t, cum in self.logs.discoveries if cum >= need), None)
            if placed == 0:
                hit = None
            totd[pct] = None if hit is None else hit * self.params.tick_s
        games = self.logs.games
        gps = [g.gain_players for g in games]
        gts = [g.gain_team for g in games]
        return MetricsRecord(
            cr=cr,
            ct_s=ct,
            rr_min=rr_min,
            rr_mean=rr_mean,
            rr_max=rr_max,
            notf=self.found_total,
            targets_placed=placed,
            totd=totd,
            games_noidle=sum(1 for g in games if g.kind == "noidle"),
            games_resilience=sum(1 for g in games if g.kind == "resilience"),
            gp_min=min(gps) if gps else None,
            gt_min=min(gts) if gts else None,
            end_reason=self.logs.end_reason,
            ticks=self.tick,
        )


def run(config: ScenarioConfig, snapshot_every: int = 0) -> RunResult:
    """Execute one scenario to completion; bit-reproducible per (config, seed)."""
    return Simulation(config, snapshot_every=snapshot_every).run()
