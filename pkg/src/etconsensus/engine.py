"""Exact event-driven execution of the event-triggered consensus law.

Controls only change at broadcasts, so between two events every state
moves on a straight line and the next crossing of every trigger is known
in closed form. The engine jumps from event to event; nothing is
integrated numerically.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
import heapq
import math
import warnings

import numpy as np

from .graph import WeightedDigraph, is_weight_balanced
from .triggers import (
    TriggerParams,
    broadcast_due,
    controls,
    cooldown_rebroadcast,
    crossing_delay,
)

DEFAULT_SAMPLE_DT = 0.01
DEFAULT_ZENO_CEILING = 10_000.0


class EngineError(RuntimeError):
    pass


class ZenoGuardError(EngineError):
    pass


class CascadeOverflowError(EngineError):
    pass


class SchedulingError(EngineError):
    pass


class UnbalancedGraphWarning(UserWarning):
    pass


class EventKind(str, Enum):
    TRIGGER = "trigger"
    CASCADE = "cascade"
    SWITCH = "switch"
    PERIODIC = "periodic"


BROADCAST_KINDS = (EventKind.TRIGGER, EventKind.CASCADE, EventKind.PERIODIC)


@dataclass(frozen=True)
class SimEvent:
    """One entry of the event log.

    ``cause`` is the log index of the event that forced a cascade broadcast
    (another broadcast, or a topology switch). ``quiet`` is True when the
    agent received nothing since its previous broadcast. ``residual`` is
    ``e**2 - threshold`` at the instant a scheduled crossing fired.
    """

    t: float
    kind: EventKind
    agent: int | None
    cause: int | None = None
    quiet: bool = False
    residual: float | None = None

    @property
    def is_broadcast(self) -> bool:
        return self.kind in BROADCAST_KINDS


EventLog = list  # list[SimEvent], time-ordered


@dataclass
class Trajectory:
    """Logged rows: one per grid sample and one after every broadcast."""

    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    V: np.ndarray
    label: list[str]
    agent: np.ndarray
    n_events: np.ndarray
    events: list[SimEvent]
    horizon: float
    mode: str = "event-driven"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]

    def broadcasts(self) -> list[SimEvent]:
        return [ev for ev in self.events if ev.is_broadcast]


class _Recorder:
    def __init__(self, n: int):
        self.t: list[float] = []
        self.x: list[np.ndarray] = []
        self.xhat: list[np.ndarray] = []
        self.label: list[str] = []
        self.agent: list[int] = []
        self.count: list[int] = []

    def row(self, t, x, xhat, label, agent, count):
        self.t.append(t)
        self.x.append(np.array(x, dtype=float))
        self.xhat.append(np.array(xhat, dtype=float))
        self.label.append(label)
        self.agent.append(-1 if agent is None else agent)
        self.count.append(count)

    def grid_rows(self, times, x, u, t_now, xhat, count):
        """Samples at ``times`` (all in ``[t_now, next event)``), from the straight-line motion."""
        if len(times) == 0:
            return
        X = x[None, :] + (np.asarray(times) - t_now)[:, None] * u[None, :]
        for tk, xk in zip(times, X):
            self.t.append(float(tk))
            self.x.append(xk)
            self.xhat.append(xhat.copy())
            self.label.append("sample")
            self.agent.append(-1)
            self.count.append(count)

    def finish(self, events, horizon, mode, meta) -> Trajectory:
        from .analysis import lyapunov_series

        X = np.array(self.x)
        return Trajectory(
            t=np.array(self.t),
            x=X,
            xhat=np.array(self.xhat),
            V=lyapunov_series(X),
            label=self.label,
            agent=np.array(self.agent, dtype=int),
            n_events=np.array(self.count, dtype=int),
            events=events,
            horizon=horizon,
            mode=mode,
            meta=meta,
        )


def sample_grid(horizon: float, dt: float) -> np.ndarray:
    """Multiples of ``dt`` in ``[0, horizon]``, always ending exactly at ``horizon``."""
    k = int(math.floor(horizon / dt + 1e-9))
    grid = np.arange(k + 1) * dt
    if abs(grid[-1] - horizon) <= 1e-9 * dt:
        grid[-1] = horizon
    grid = grid[grid <= horizon]
    if grid[-1] < horizon:
        grid = np.append(grid, horizon)
    return grid


class World:
    """Mutable state of one event-driven run.

    ``x`` moves continuously; ``xhat`` holds the last broadcast values and
    ``u = -L xhat`` the piecewise-constant controls.
    """

    def __init__(self, graph: WeightedDigraph, params: TriggerParams, x0, *,
                 cooldown: bool = True, zeno_ceiling: float = DEFAULT_ZENO_CEILING,
                 allow_unbalanced: bool = False, recorder: _Recorder | None = None):
        x0 = np.array(x0, dtype=float)
        if x0.shape != (graph.n,):
            raise ValueError(f"initial state has {x0.size} entries, graph has {graph.n} vertices")
        if params.sigma.size != graph.n:
            raise ValueError("trigger parameters do not match the number of agents")
        self.n = graph.n
        self.params = params
        self.cooldown = cooldown
        self.zeno_ceiling = zeno_ceiling
        self.allow_unbalanced = allow_unbalanced
        self.rec = recorder
        self.t = 0.0
        self.x = x0.copy()
        # every agent starts having broadcast its initial state at t = 0
        self.xhat = x0.copy()
        self.t_last = np.zeros(self.n)
        self.received = np.zeros(self.n, dtype=bool)
        self.events: list[SimEvent] = []
        self.n_broadcasts = 0
        self._recent = deque()
        self._heap: list[tuple[float, int, int]] = []
        self._gen = np.zeros(self.n, dtype=np.int64)
        self.next_time = np.full(self.n, math.inf)
        self._set_graph(graph)
        self.u = controls(self.W, self.xhat)
        self._refresh_thresholds(range(self.n))
        self._reschedule(range(self.n))

    # -- graph-dependent caches ------------------------------------------------
    def _set_graph(self, g: WeightedDigraph):
        if not is_weight_balanced(g):
            if not self.allow_unbalanced:
                raise ValueError("communication graph is not weight-balanced")
            warnings.warn("graph is not weight-balanced; average preservation and convergence "
                          "are not guaranteed", UnbalancedGraphWarning, stacklevel=3)
        self.g = g
        self.W = np.array(g.adjacency)
        self.d_out = self.W.sum(axis=1)
        self.out_nbrs = g.out_neighbors
        self.in_nbrs = g.in_neighbors
        self.phi = np.zeros(self.n)
        self.threshold = np.zeros(self.n)

    def _refresh_thresholds(self, agents):
        for i in agents:
            nb = self.out_nbrs[i]
            if nb:
                diff = self.xhat[i] - self.xhat[list(nb)]
                p = float(self.W[i, list(nb)] @ (diff * diff))
                self.phi[i] = p
                self.threshold[i] = self.params.sigma[i] * p / (4.0 * self.d_out[i])
            else:
                self.phi[i] = 0.0
                self.threshold[i] = 0.0

    def _control(self, i: int) -> float:
        nb = list(self.out_nbrs[i])
        if not nb:
            return 0.0
        return float(self.W[i, nb] @ (self.xhat[nb] - self.xhat[i]))

    def error(self, i: int) -> float:
        return float(self.xhat[i] - self.x[i])

    def due(self, i: int) -> bool:
        return broadcast_due(self.error(i), self.phi[i], self.threshold[i])

    # -- scheduling -----------------------------------------------------------
    def _reschedule(self, agents):
        for i in agents:
            self._gen[i] += 1
            dt = crossing_delay(self.error(i), float(self.u[i]), float(self.threshold[i]))
            if math.isinf(dt):
                self.next_time[i] = math.inf
                continue
            t_next = self.t + dt
            if t_next <= self.t:
                t_next = float(np.nextafter(self.t, math.inf))
            self.next_time[i] = t_next
            heapq.heappush(self._heap, (t_next, i, int(self._gen[i])))

    def peek(self) -> tuple[float, int | None]:
        """Earliest live scheduled crossing, dropping stale heap entries."""
        while self._heap:
            t, i, gen = self._heap[0]
            if gen == self._gen[i]:
                return t, i
            heapq.heappop(self._heap)
        return math.inf, None

    def pop(self) -> tuple[float, int]:
        t, i = self.peek()
        heapq.heappop(self._heap)
        self._gen[i] += 1
        self.next_time[i] = math.inf
        return t, i

    # -- dynamics -------------------------------------------------------------
    def step_to(self, t_target: float):
        """Advance all states to ``t_target`` with the current constant controls."""
        if t_target < self.t:
            raise SchedulingError(f"cannot step backwards from {self.t} to {t_target}")
        if np.any(self.next_time < t_target):
            i = int(np.argmin(self.next_time))
            raise SchedulingError(
                f"agent {i} has a crossing at {self.next_time[i]!r}, inside ({self.t!r}, {t_target!r})")
        self.x += (t_target - self.t) * self.u
        self.t = t_target

    def _log(self, ev: SimEvent) -> int:
        self.events.append(ev)
        return len(self.events) - 1

    def _zeno_check(self):
        self._recent.append(self.t)
        while self._recent and self._recent[0] < self.t - 1.0:
            self._recent.popleft()
        if len(self._recent) > self.zeno_ceiling:
            raise ZenoGuardError(
                f"{len(self._recent)} broadcasts within one time unit before t={self.t:.6g} "
                f"(ceiling {self.zeno_ceiling:g})")

    def process_broadcast(self, i: int, kind: EventKind = EventKind.TRIGGER,
                          cause: int | None = None, residual: float | None = None) -> list[int]:
        """Broadcast of agent ``i`` at the current time and its cascade.

        Returns the agents that broadcast at this instant, in order.
        """
        return self._closure([(i, kind, cause, residual)])

    def _closure(self, seeds) -> list[int]:
        t = self.t
        queue = deque(seeds)
        queued = {s[0] for s in seeds}
        fired: list[int] = []
        fired_set: set[int] = set()
        while queue:
            b, kind, cause, residual = queue.popleft()
            if b in fired_set:
                raise CascadeOverflowError(f"agent {b} would broadcast twice at t={t!r}")
            fired.append(b)
            fired_set.add(b)
            idx = self._log(SimEvent(t, kind, b, cause, quiet=not self.received[b], residual=residual))
            self.n_broadcasts += 1
            self._zeno_check()
            self.xhat[b] = self.x[b]
            self.t_last[b] = t
            self.received[b] = False
            self.u[b] = self._control(b)
            receivers = self.in_nbrs[b]
            for j in receivers:
                self.u[j] = self._control(j)
            self._refresh_thresholds((b, *receivers))
            if self.rec is not None:
                self.rec.row(t, self.x, self.xhat, kind.value, b, self.n_broadcasts)
            for j in receivers:
                if j in fired_set:
                    if self.due(j):
                        raise CascadeOverflowError(f"agent {j} would broadcast twice at t={t!r}")
                    continue
                self.received[j] = True
                if j in queued:
                    continue
                if (self.cooldown and cooldown_rebroadcast(t, self.t_last[j], self.params.epsilon[j])) \
                        or self.due(j):
                    queue.append((j, EventKind.CASCADE, idx, None))
                    queued.add(j)
        affected = set(fired)
        for b in fired:
            affected.update(self.in_nbrs[b])
        self._reschedule(sorted(affected))
        return fired

    def fire_next(self) -> list[int]:
        """Pop the earliest crossing, advance to it and broadcast."""
        t, i = self.pop()
        self.step_to(t)
        e = self.error(i)
        return self.process_broadcast(i, EventKind.TRIGGER, None, residual=e * e - self.threshold[i])

    def apply_topology_switch(self, t: float, g_new: WeightedDigraph) -> list[int]:
        """Switch the communication graph at time ``t``.

        Agents whose in- or out-neighbor set changed broadcast, as does any
        agent whose trigger is violated under the new weights.
        """
        if g_new.n != self.n:
            raise ValueError("new graph has a different vertex set")
        if not is_weight_balanced(g_new) and not self.allow_unbalanced:
            raise ValueError("switched-to graph is not weight-balanced")
        self.step_to(t)
        old_out, old_in = self.out_nbrs, self.in_nbrs
        self._set_graph(g_new)
        self.u = controls(self.W, self.xhat)
        self._refresh_thresholds(range(self.n))
        idx = self._log(SimEvent(t, EventKind.SWITCH, None))
        changed = [i for i in range(self.n)
                   if old_out[i] != self.out_nbrs[i] or old_in[i] != self.in_nbrs[i]]
        for i in range(self.n):
            if t > self.t_last[i]:
                self.received[i] = True
        seeds = sorted(set(changed) | {i for i in range(self.n) if self.due(i)})
        fired = self._closure([(i, EventKind.CASCADE, idx, None) for i in seeds])
        self._reschedule(range(self.n))
        return fired


def switch_times(schedule, repeat_every: float | None, horizon: float):
    """Expand a (time, graph) schedule into all switch instants in (0, horizon]."""
    out = []
    if repeat_every is None:
        for t, g in schedule[1:]:
            if t <= horizon:
                out.append((float(t), g))
        return out
    m = 0
    while True:
        base = m * repeat_every
        if base > horizon:
            break
        for k, (t, g) in enumerate(schedule):
            tt = base + t
            if (m == 0 and k == 0) or tt > horizon:
                continue
            out.append((tt, g))
        m += 1
    return out


def simulate(graph, params: TriggerParams, x0, horizon: float, *, schedule=None,
             repeat_every: float | None = None, cooldown: bool = True,
             sample_dt: float = DEFAULT_SAMPLE_DT, zeno_ceiling: float = DEFAULT_ZENO_CEILING,
             allow_unbalanced: bool = False) -> Trajectory:
    """Event-driven run over ``[0, horizon]``.

    ``schedule`` is an optional list of ``(activation time, graph)`` with
    the first entry at 0; ``repeat_every`` repeats it periodically.
    """
    if schedule is None:
        schedule = [(0.0, graph)]
    graph = schedule[0][1]
    x0 = np.array(x0, dtype=float)
    rec = _Recorder(graph.n)
    world = World(graph, params, x0, cooldown=cooldown, zeno_ceiling=zeno_ceiling,
                  allow_unbalanced=allow_unbalanced, recorder=rec)
    switches = deque(switch_times(list(schedule), repeat_every, horizon))
    grid = sample_grid(horizon, sample_dt)
    k = 0
    while True:
        t_cross, _ = world.peek()
        t_sw = switches[0][0] if switches else math.inf
        t_next = min(t_cross, t_sw)
        stop = min(t_next, horizon)
        k_end = int(np.searchsorted(grid, stop, side="left"))
        if t_next > horizon:
            k_end = len(grid)
        if k_end > k:
            times = grid[k:k_end]
            rec.grid_rows(times, world.x, world.u, world.t, world.xhat, world.n_broadcasts)
            k = k_end
        if t_next > horizon:
            break
        if t_sw <= t_cross:
            _, g_new = switches.popleft()
            world.apply_topology_switch(t_sw, g_new)
        else:
            world.fire_next()
    world.step_to(horizon)
    if rec.t[-1] != horizon or rec.label[-1] != "sample":
        rec.row(horizon, world.x, world.xhat, "sample", None, world.n_broadcasts)
    meta = {"cooldown": cooldown, "sigma": params.sigma.tolist(), "epsilon": params.epsilon.tolist()}
    return rec.finish(world.events, horizon, "event-driven", meta)


def run(cfg) -> Trajectory:
    """Event-driven run of a :class:`~etconsensus.scenario.ScenarioConfig`."""
    return simulate(
        cfg.graph, cfg.trigger_params(), cfg.x0, cfg.horizon,
        schedule=list(cfg.schedule), repeat_every=cfg.repeat_every,
        cooldown=cfg.cooldown, sample_dt=cfg.sample_dt, zeno_ceiling=cfg.zeno_ceiling,
        allow_unbalanced=cfg.allow_unbalanced,
    )
