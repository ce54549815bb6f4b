"""Periodically checked triggers and the periodic Laplacian baseline.

Both laws only change controls at sample instants ``t_l = l*h``, so the
state is advanced exactly by ``x <- x + h*u`` between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math
import warnings

import numpy as np

from .engine import DEFAULT_SAMPLE_DT, EventKind, SimEvent, _Recorder, sample_grid
from .graph import WeightedDigraph, degrees, is_weight_balanced
from .triggers import TriggerParams, broadcast_due, controls


class PeriodicMode(str, Enum):
    EVENT = "periodic-event"
    LAPLACIAN = "periodic-laplacian"


class SamplingBoundError(ValueError):
    pass


class SamplingBoundWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PeriodicConfig:
    """``sufficiency_check`` is one of ``"warn"``, ``"reject"``, ``"off"``."""

    h: float
    mode: PeriodicMode = PeriodicMode.EVENT
    sufficiency_check: str = "warn"

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"sampling period must be positive, got {self.h}")
        object.__setattr__(self, "mode", PeriodicMode(self.mode))
        if self.sufficiency_check not in ("warn", "reject", "off"):
            raise ValueError("sufficiency_check must be 'warn', 'reject' or 'off'")

    @classmethod
    def from_scenario(cls, cfg, sufficiency_check: str = "warn") -> PeriodicConfig:
        if cfg.h is None:
            raise ValueError(f"mode {cfg.mode} needs a sampling period h")
        return cls(cfg.h, PeriodicMode(cfg.mode), sufficiency_check)


def sampling_margin(g: WeightedDigraph, sigma_max: float, h: float) -> float:
    """``sigma_max + 4 h w_max |N_max^out|``; convergence is guaranteed below 1."""
    d = degrees(g)
    return sigma_max + 4.0 * h * d.w_max * d.n_out_max


def max_period_event(g: WeightedDigraph, sigma_max: float) -> float:
    d = degrees(g)
    return (1.0 - sigma_max) / (4.0 * d.w_max * d.n_out_max)


def max_period_laplacian(g: WeightedDigraph) -> float:
    return 1.0 / float(degrees(g).d_out.max())


def check_sampling_period(g: WeightedDigraph, params: TriggerParams, pc: PeriodicConfig) -> bool:
    """Whether ``pc.h`` meets the sufficient condition; warns or raises per ``pc``."""
    margin = sampling_margin(g, params.sigma_max, pc.h)
    if margin < 1.0:
        return True
    msg = (f"h={pc.h:g} gives sigma_max + 4 h w_max |N_max^out| = {margin:.6g} >= 1; "
           f"convergence is only guaranteed for h < {max_period_event(g, params.sigma_max):.6g}")
    if pc.sufficiency_check == "reject":
        raise SamplingBoundError(msg)
    if pc.sufficiency_check == "warn":
        warnings.warn(msg, SamplingBoundWarning, stacklevel=3)
    return False


def _sample_count(horizon: float, h: float) -> int:
    return int(math.ceil(horizon / h - 1e-9))


def _check_graph(g: WeightedDigraph, allow_unbalanced: bool):
    if not is_weight_balanced(g) and not allow_unbalanced:
        raise ValueError("communication graph is not weight-balanced")


def periodic_event(graph: WeightedDigraph, params: TriggerParams, x0, horizon: float,
                   pc: PeriodicConfig, *, sample_dt: float = DEFAULT_SAMPLE_DT,
                   allow_unbalanced: bool = False):
    """Triggers evaluated only at ``t_l``; no cooldown trigger.

    At each instant all agents test their trigger against the current
    broadcast values and the violators broadcast together. A neighbor's
    broadcast can push a silent agent over its threshold, so the test is
    repeated with the updated values until every trigger holds at ``t_l``.
    """
    _check_graph(graph, allow_unbalanced)
    check_sampling_period(graph, params, pc)
    n = graph.n
    W = np.array(graph.adjacency)
    d_out = W.sum(axis=1)
    safe_d = np.where(d_out > 0, d_out, 1.0)
    x = np.array(x0, dtype=float)
    xhat = x.copy()
    u = controls(W, xhat)
    rec = _Recorder(n)
    events: list[SimEvent] = []
    grid = sample_grid(horizon, sample_dt)
    k = 0
    h = pc.h
    steps = _sample_count(horizon, h)
    for ell in range(steps):
        t = ell * h
        while True:
            diff = xhat[:, None] - xhat[None, :]
            ph = np.sum(W * diff * diff, axis=1)
            thr = np.where(d_out > 0, params.sigma * ph / (4.0 * safe_d), 0.0)
            e = xhat - x
            fire = [i for i in range(n) if broadcast_due(e[i], ph[i], thr[i])]
            if not fire:
                break
            xhat[fire] = x[fire]
            u = controls(W, xhat)
            for i in fire:
                events.append(SimEvent(t, EventKind.TRIGGER, i))
                rec.row(t, x, xhat, EventKind.TRIGGER.value, i, len(events))
        t_end = min((ell + 1) * h, horizon)
        k_end = int(np.searchsorted(grid, t_end, side="left"))
        rec.grid_rows(grid[k:k_end], x, u, t, xhat, len(events))
        k = k_end
        x = x + (t_end - t) * u
    rec.grid_rows(grid[k:], x, np.zeros(n), horizon, xhat, len(events))
    meta = {"h": h, "sigma": params.sigma.tolist()}
    return rec.finish(events, horizon, PeriodicMode.EVENT.value, meta)


def periodic_laplacian(graph: WeightedDigraph, x0, horizon: float, pc: PeriodicConfig, *,
                       sample_dt: float = DEFAULT_SAMPLE_DT, allow_unbalanced: bool = False):
    """Every agent broadcasts at every ``t_l``: ``x(t_{l+1}) = x(t_l) - h L x(t_l)``."""
    _check_graph(graph, allow_unbalanced)
    h_max = max_period_laplacian(graph)
    if not pc.h < h_max:
        raise SamplingBoundError(f"periodic Laplacian consensus needs h < 1/d_max = {h_max:.6g}, got {pc.h:g}")
    n = graph.n
    W = np.array(graph.adjacency)
    x = np.array(x0, dtype=float)
    rec = _Recorder(n)
    events: list[SimEvent] = []
    grid = sample_grid(horizon, sample_dt)
    k = 0
    h = pc.h
    steps = _sample_count(horizon, h)
    for ell in range(steps):
        t = ell * h
        xhat = x.copy()
        u = controls(W, xhat)
        for i in range(n):
            events.append(SimEvent(t, EventKind.PERIODIC, i))
            rec.row(t, x, xhat, EventKind.PERIODIC.value, i, len(events))
        t_end = min((ell + 1) * h, horizon)
        k_end = int(np.searchsorted(grid, t_end, side="left"))
        rec.grid_rows(grid[k:k_end], x, u, t, xhat, len(events))
        k = k_end
        x = x + (t_end - t) * u
    rec.grid_rows(grid[k:], x, np.zeros(n), horizon, x, len(events))
    meta = {"h": h}
    return rec.finish(events, horizon, PeriodicMode.LAPLACIAN.value, meta)


def run_periodic_event(cfg, pc: PeriodicConfig | None = None):
    pc = pc or PeriodicConfig.from_scenario(cfg)
    if len(cfg.schedule) > 1:
        raise ValueError("periodic modes do not support switching topologies")
    return periodic_event(cfg.graph, cfg.trigger_params(), cfg.x0, cfg.horizon, pc,
                          sample_dt=cfg.sample_dt, allow_unbalanced=cfg.allow_unbalanced)


def run_periodic_laplacian(cfg, pc: PeriodicConfig | None = None):
    pc = pc or PeriodicConfig(cfg.h, PeriodicMode.LAPLACIAN)
    if len(cfg.schedule) > 1:
        raise ValueError("periodic modes do not support switching topologies")
    return periodic_laplacian(cfg.graph, cfg.x0, cfg.horizon, pc,
                              sample_dt=cfg.sample_dt, allow_unbalanced=cfg.allow_unbalanced)
