"""Worth-allocation potential games and the Max-Logit equilibrium search.

A game instance holds the players (robot ids), the contested task menu, the
per-task available worth and the per-(player, task) success probabilities.
The shared potential is the total expected worth collected by the joint
action; each player's utility is its marginal contribution to the potential,
which makes every instance an exact potential game.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

# A joint action assigns each player one task id, or None when unassigned.
# Entries that are neither None nor on the task menu (e.g. a player's
# near-finished current task in a resilience game) contribute nothing.
JointAction = tuple


@dataclass
class GameInstance:
    players: tuple[int, ...]  # robot ids, fixed order
    actions: tuple[int, ...]  # contested task ids, the shared action menu
    worth: dict[int, float]  # task id -> worth available to players
    prob: dict[int, dict[int, float]]  # robot id -> task id -> success probability
    cycles: int  # learning loop length L
    tau: float  # learning temperature
    initial: JointAction = field(default=None)

    def __post_init__(self) -> None:
        if not self.players:
            raise ValueError("game needs at least one player")
        if not self.actions:
            raise ValueError("game needs at least one action")
        for r in self.actions:
            if self.worth.get(r, 0.0) < 0:
                raise ValueError(f"negative worth for task {r}")
        for v in self.players:
            for r in self.actions:
                p = self.prob[v][r]
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"probability out of range for ({v}, {r}): {p}")
        if self.initial is None:
            self.initial = tuple([self.actions[0]] * len(self.players))
        if len(self.initial) != len(self.players):
            raise ValueError("initial joint action length mismatch")


def potential(g: GameInstance, a: JointAction) -> float:
    """Total expected worth over the task menu for joint action a.

    phi(a) = sum_r w_r * (1 - prod_{i: a_i = r} (1 - p_r(i))). Players whose
    entry is None or off-menu contribute to no task.
    """
    total = 0.0
    for r in g.actions:
        miss = 1.0
        for v, act in zip(g.players, a):
            if act == r:
                miss *= 1.0 - g.prob[v][r]
        total += g.worth[r] * (1.0 - miss)
    return total


def utility(g: GameInstance, i: int, a: JointAction) -> float:
    """Marginal-contribution payoff of player index i under joint action a.

    U_i = w_r * p_r(i) * prod_{j != i on r} (1 - p_r(j)) where r = a_i; zero
    for an unassigned or off-menu action.
    """
    r = a[i]
    if r is None or r not in g.worth:
        return 0.0
    me = g.players[i]
    share = 1.0
    for j, (v, act) in enumerate(zip(g.players, a)):
        if j != i and act == r:
            share *= 1.0 - g.prob[v][r]
    return g.worth[r] * g.prob[me][r] * share


def check_potential_game(g: GameInstance, samples: int, seed: int) -> tuple[float, bool]:
    """Spot-check the exact-alignment property on sampled unilateral deviations.

    Draws (player, action pair, context) tuples and compares the utility
    delta against the potential delta. Returns (max residual, ok at 1e-9).
    """
    rng = random.Random(seed)
    worst = 0.0
    menu = list(g.actions) + [None]
    for _ in range(samples):
        i = rng.randrange(len(g.players))
        context = [rng.choice(menu) for _ in g.players]
        a1, a2 = rng.choice(menu), rng.choice(menu)
        ja1 = tuple(a1 if j == i else c for j, c in enumerate(context))
        ja2 = tuple(a2 if j == i else c for j, c in enumerate(context))
        du = utility(g, i, ja1) - utility(g, i, ja2)
        dphi = potential(g, ja1) - potential(g, ja2)
        worst = max(worst, abs(du - dphi))
    return worst, worst <= 1e-9


def max_logit(g: GameInstance, seed: int | random.Random) -> tuple[JointAction, list[tuple[JointAction, float]]]:
    """Run the Max-Logit learning loop and return the best joint action visited.

    Each cycle one uniformly chosen player draws a uniform alternative from
    the action menu and switches with probability
    mu = min(1, exp((U(alt) - U(cur)) / tau)), the log-space form of
    psi(alt) / max(psi(cur), psi(alt)). The returned action maximizes the
    potential over everything visited (including the initial action), so the
    result never degrades the potential. Ties keep the earliest visit.
    """
    if g.tau <= 0:
        raise ValueError(f"tau must be positive, got {g.tau}")
    if g.cycles < 1:
        raise ValueError(f"cycle count must be >= 1, got {g.cycles}")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)

    current = list(g.initial)
    trace: list[tuple[JointAction, float]] = []
    best_a = tuple(current)
    best_phi = potential(g, best_a)
    trace.append((best_a, best_phi))

    for _ in range(g.cycles):
        i = rng.randrange(len(g.players))
        alt = g.actions[rng.randrange(len(g.actions))]
        if alt != current[i]:
            cur_u = utility(g, i, tuple(current))
            trial = list(current)
            trial[i] = alt
            alt_u = utility(g, i, tuple(trial))
            mu = math.exp(min(0.0, (alt_u - cur_u) / g.tau))
            if rng.random() < mu:
                current[i] = alt
        visited = tuple(current)
        phi = potential(g, visited)
        trace.append((visited, phi))
        if phi > best_phi:
            best_phi = phi
            best_a = visited
    return best_a, trace


def brute_force_optimum(g: GameInstance) -> tuple[JointAction, float]:
    """Exhaustive argmax of the potential over the full joint-action space.

    Test oracle; refuses instances with more than 1e7 joint actions. Ties
    break toward the lexicographically smallest joint action, which the
    sorted enumeration yields for free.
    """
    n = len(g.actions) ** len(g.players)
    if n > 10**7:
        raise ValueError(f"instance too large for exhaustive search: {n} joint actions")
    best_a = None
    best_phi = -math.inf
    for a in itertools.product(sorted(g.actions), repeat=len(g.players)):
        phi = potential(g, a)
        if phi > best_phi + 1e-15:
            best_phi = phi
            best_a = a
    return best_a, best_phi


def gain_of_players(phi_star: float, phi_init: float, worth_sum: float) -> float:
    """Normalized potential gain of the players from a reallocation."""
    if worth_sum <= 0:
        return 0.0
    return (phi_star - phi_init) / worth_sum


def team_potential(
    assignment: dict[int, object],
    worth_remaining: dict[int, float],
    prob: dict[int, dict[int, float]],
) -> float:
    """Total expected worth achievable by the whole team.

    `assignment` maps each live robot to a task id, None, or an iterable of
    task ids (a robot that will finish its near-done current task before
    moving contributes to both). Tasks absent from every robot's assignment
    contribute nothing beyond zero collection probability.
    """
    on_task: dict[int, list[int]] = {r: [] for r in worth_remaining}
    for v, assigned in assignment.items():
        if assigned is None:
            continue
        tasks = assigned if isinstance(assigned, (tuple, list, set, frozenset)) else (assigned,)
        for r in tasks:
            if r is None:
                continue
            if r not in on_task:
                raise ValueError(f"robot {v} assigned to unknown task {r}")
            if v not in on_task[r]:
                on_task[r].append(v)
    total = 0.0
    for r, w in worth_remaining.items():
        miss = 1.0
        for v in on_task[r]:
            miss *= 1.0 - prob[v][r]
        total += w * (1.0 - miss)
    return total


def gain_of_team(phi_star: float, phi_init: float, worth_sum: float) -> float:
    """Normalized team-potential gain from a reallocation."""
    if worth_sum <= 0:
        return 0.0
    return (phi_star - phi_init) / worth_sum
