"""Lyapunov values, convergence-rate certificates and event statistics."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .graph import WeightedDigraph, degrees, spectral
from .triggers import TriggerParams


def lyapunov(x) -> float:
    """Half the squared distance of ``x`` to its average."""
    x = np.asarray(x, dtype=float)
    dev = x - x.mean()
    return 0.5 * float(dev @ dev)


def lyapunov_series(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    dev = X - X.mean(axis=1, keepdims=True)
    return 0.5 * np.einsum("ij,ij->i", dev, dev)


@dataclass(frozen=True)
class RateCertificate:
    """``V(x(t)) <= V(x(0)) * exp(rate * t)`` for the event-triggered law."""

    A: float
    rate: float
    lambda2: float
    lambdaN: float
    d_min_out: float
    sigma_max: float

    def bound(self, t, V0: float):
        return V0 * np.exp(self.rate * np.asarray(t, dtype=float))


def certificate_constant(lambda2: float, lambdaN: float, d_min_out: float, sigma_max: float) -> float:
    return (1.0 + math.sqrt(lambdaN * sigma_max / (2.0 * d_min_out))) ** 2 / (2.0 * lambda2)


def rate_certificate(g: WeightedDigraph, params: TriggerParams | float) -> RateCertificate:
    sigma_max = params.sigma_max if isinstance(params, TriggerParams) else float(np.max(params))
    sd = spectral(g)
    if sd.lambda2 <= 0:
        raise ValueError("lambda2(Sym(L)) is zero: the graph is not strongly connected")
    d_min = degrees(g).d_min_out
    A = certificate_constant(sd.lambda2, sd.lambdaN, d_min, sigma_max)
    return RateCertificate(A, (sigma_max - 1.0) / (2.0 * A), sd.lambda2, sd.lambdaN, d_min, sigma_max)


@dataclass(frozen=True)
class BoundReport:
    holds: bool
    first_violation: float | None
    max_ratio: float
    """Largest V(t) / bound(t); the bound is conservative by the factor 1 / max_ratio."""


def verify_exponential_bound(traj, cert: RateCertificate, rtol: float = 1e-8,
                             atol: float = 1e-12) -> BoundReport:
    V0 = float(traj.V[0])
    bound = cert.bound(traj.t, V0)
    ok = traj.V <= bound * (1.0 + rtol) + atol
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, traj.V / bound, np.where(traj.V > 0, np.inf, 0.0))
    bad = np.flatnonzero(~ok)
    first = float(traj.t[bad[0]]) if bad.size else None
    return BoundReport(bad.size == 0, first, float(ratio.max()))


def empirical_rate(t, V, floor: float = 1e-10) -> float:
    """Least-squares slope of ``log V`` while ``V > floor * V(0)``.

    Compares directly with :attr:`RateCertificate.rate`. NaN when fewer
    than two usable points remain.
    """
    t = np.asarray(t, dtype=float)
    V = np.asarray(V, dtype=float)
    if V[0] <= 0:
        return math.nan
    keep = V > floor * V[0]
    if keep.sum() < 2 or np.ptp(t[keep]) == 0:
        return math.nan
    slope, _ = np.polyfit(t[keep], np.log(V[keep]), 1)
    return float(slope)


@dataclass
class RunMetrics:
    event_count_total: int
    event_count: np.ndarray
    instants: np.ndarray
    min_interevent: np.ndarray
    event_times: np.ndarray
    cumulative: np.ndarray
    final_disagreement: float | None = None
    V_trace: np.ndarray | None = None

    @property
    def min_interevent_overall(self) -> float:
        return float(self.min_interevent.min()) if self.min_interevent.size else math.inf


def event_stats(events, n: int) -> RunMetrics:
    """Broadcast counts and inter-event gaps from an event log.

    ``instants`` counts distinct broadcast times per agent; gaps of zero
    (two broadcasts at one instant) are ignored by ``min_interevent``.
    """
    times = [[] for _ in range(n)]
    all_t = []
    for ev in events:
        if ev.is_broadcast:
            times[ev.agent].append(ev.t)
            all_t.append(ev.t)
    counts = np.array([len(ts) for ts in times], dtype=int)
    instants = np.array([len(set(ts)) for ts in times], dtype=int)
    gaps = np.full(n, math.inf)
    for i, ts in enumerate(times):
        d = np.diff(np.unique(ts))
        if d.size:
            gaps[i] = d.min()
    all_t = np.array(all_t, dtype=float)
    return RunMetrics(
        event_count_total=int(counts.sum()),
        event_count=counts,
        instants=instants,
        min_interevent=gaps,
        event_times=all_t,
        cumulative=np.arange(1, all_t.size + 1),
    )


def run_metrics(traj) -> RunMetrics:
    m = event_stats(traj.events, traj.n)
    mean0 = traj.x[0].mean()
    m.final_disagreement = float(np.max(np.abs(traj.final_x - mean0)))
    m.V_trace = traj.V
    return m


def self_triggered_gaps(events, n: int) -> list[list[tuple[float, float]]]:
    """Per agent, ``(gap, time)`` for scheduled broadcasts preceded by no reception.

    These are the gaps bounded below by the inter-event floor. The initial
    state at t = 0 counts as a broadcast.
    """
    last = np.zeros(n)
    out = [[] for _ in range(n)]
    for ev in events:
        if not ev.is_broadcast:
            continue
        if ev.kind.value == "trigger" and ev.quiet:
            out[ev.agent].append((ev.t - last[ev.agent], ev.t))
        last[ev.agent] = ev.t
    return out
