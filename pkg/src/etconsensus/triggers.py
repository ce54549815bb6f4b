"""Triggering functions, broadcast rules and analytic next-crossing times.

Between broadcasts every agent's control is constant, so each error
``e_i = xhat_i - x_i`` moves linearly in time and the instant at which
``e_i**2`` reaches its threshold is the root of a quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .graph import WeightedDigraph, degrees

# |e^2 - threshold| <= EQ_RTOL * threshold counts as "f_i = 0"
EQ_RTOL = 1e-12


class TriggerStateError(RuntimeError):
    """The error already exceeds its threshold, so the trigger was missed."""


@dataclass(frozen=True, eq=False)
class TriggerParams:
    """Per-agent ``sigma`` in (0, 1) and cooldown window ``epsilon > 0``.

    Use :meth:`build` to check ``epsilon`` against the graph-dependent
    bound and to fill in defaults.
    """

    sigma: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float).reshape(-1)
        eps = np.array(self.epsilon, dtype=float).reshape(-1)
        if sigma.shape != eps.shape:
            raise ValueError(f"sigma has {sigma.size} entries but epsilon has {eps.size}")
        bad = np.flatnonzero(~((sigma > 0) & (sigma < 1)))
        if bad.size:
            raise ValueError(f"sigma must lie in (0, 1); agent {bad[0] + 1} has sigma={sigma[bad[0]]}")
        bad = np.flatnonzero(~(eps > 0))
        if bad.size:
            raise ValueError(f"epsilon must be positive; agent {bad[0] + 1} has epsilon={eps[bad[0]]}")
        sigma.setflags(write=False)
        eps.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "epsilon", eps)

    @property
    def sigma_max(self) -> float:
        return float(self.sigma.max())

    @classmethod
    def build(cls, graphs, sigma, epsilon=None) -> TriggerParams:
        """Validated parameters for one graph or a list of graphs.

        ``sigma`` may be a scalar. When ``epsilon`` is None each agent gets
        half of its upper bound (the tightest bound over all graphs).
        """
        if isinstance(graphs, WeightedDigraph):
            graphs = [graphs]
        n = graphs[0].n
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,)).copy()
        bad = np.flatnonzero(~((sigma > 0) & (sigma < 1)))
        if bad.size:
            raise ValueError(f"sigma must lie in (0, 1); agent {bad[0] + 1} has sigma={sigma[bad[0]]}")
        bound = np.full(n, np.inf)
        for g in graphs:
            bound = np.minimum(bound, epsilon_bound(g, sigma))
        if epsilon is None:
            # agents without out-neighbors anywhere never receive; any window works
            eps = np.where(np.isfinite(bound), 0.5 * bound, 1.0)
        else:
            eps = np.broadcast_to(np.asarray(epsilon, dtype=float), (n,)).copy()
            over = np.flatnonzero(~(eps < bound))
            if over.size:
                i = over[0]
                raise ValueError(
                    f"epsilon for agent {i + 1} is {eps[i]:.6g}, must be below "
                    f"sqrt(sigma_i / (4 d_i^out w_i^max |N_i^out|)) = {bound[i]:.6g}"
                )
        return cls(sigma, eps)


@dataclass(frozen=True, eq=False)
class TriggerSnapshot:
    phi: np.ndarray
    threshold: np.ndarray
    zhat: np.ndarray


def epsilon_bound(g: WeightedDigraph, sigma) -> np.ndarray:
    """Strict upper bound on each cooldown window; inf without out-neighbors."""
    d = degrees(g)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (g.n,))
    denom = 4.0 * d.d_out * d.w_i_max * d.n_out
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, np.sqrt(sigma / np.where(denom > 0, denom, 1.0)), np.inf)


def inter_event_floor(g: WeightedDigraph, sigma) -> np.ndarray:
    """Lower bound on the time between a broadcast and the next self-triggered one.

    Holds as long as the agent receives nothing in between. Numerically the
    same expression as :func:`epsilon_bound`.
    """
    return epsilon_bound(g, sigma)


def phi(i: int, xhat, g: WeightedDigraph) -> float:
    xi = xhat[i]
    W = g.adjacency
    return float(sum(W[i, j] * (xi - xhat[j]) ** 2 for j in g.out_neighbors[i]))


def zhat(i: int, xhat, g: WeightedDigraph) -> float:
    xi = xhat[i]
    W = g.adjacency
    return float(sum(W[i, j] * (xhat[j] - xi) for j in g.out_neighbors[i]))


def controls(W: np.ndarray, xhat) -> np.ndarray:
    """``u_i = sum_j w_ij (xhat_j - xhat_i)`` for all agents.

    Summed from differences rather than as ``-L @ xhat`` so that agreeing
    neighborhoods give exactly zero.
    """
    xhat = np.asarray(xhat, dtype=float)
    return np.sum(W * (xhat[None, :] - xhat[:, None]), axis=1)


def threshold_from_phi(phi_i: float, sigma_i: float, d_out_i: float) -> float:
    if d_out_i <= 0:
        return 0.0
    return sigma_i * phi_i / (4.0 * d_out_i)


def trigger_function(i: int, e_i: float, xhat, g: WeightedDigraph, sigma) -> float:
    """``e_i**2 - sigma_i * phi_i / (4 d_i^out)``; the agent must keep it <= 0."""
    sigma_i = float(np.broadcast_to(sigma, (g.n,))[i])
    d_out = float(g.adjacency[i].sum())
    return e_i * e_i - threshold_from_phi(phi(i, xhat, g), sigma_i, d_out)


def broadcast_due(e_i: float, phi_i: float, threshold_i: float) -> bool:
    e2 = e_i * e_i
    if phi_i == 0.0:
        return e2 > 0.0
    if e2 > threshold_i:
        return True
    return threshold_i - e2 <= EQ_RTOL * threshold_i


def should_broadcast(i: int, e_i: float, xhat, g: WeightedDigraph, params: TriggerParams) -> bool:
    """True when ``f_i > 0``, or ``f_i = 0`` while ``phi_i != 0``."""
    p = phi(i, xhat, g)
    d_out = float(g.adjacency[i].sum())
    return broadcast_due(e_i, p, threshold_from_phi(p, params.sigma[i], d_out))


def cooldown_rebroadcast(t: float, t_last_i: float, eps_i: float) -> bool:
    if t < t_last_i:
        raise ValueError("reception time precedes the last broadcast")
    return t_last_i < t < t_last_i + eps_i


def snapshot(xhat, g: WeightedDigraph, params: TriggerParams) -> TriggerSnapshot:
    xhat = np.asarray(xhat, dtype=float)
    W = g.adjacency
    diff = xhat[:, None] - xhat[None, :]
    ph = np.sum(W * diff * diff, axis=1)
    d_out = W.sum(axis=1)
    thr = np.where(d_out > 0, params.sigma * ph / (4.0 * np.where(d_out > 0, d_out, 1.0)), 0.0)
    return TriggerSnapshot(ph, thr, controls(W, xhat))


def crossing_delay(e0: float, z: float, threshold: float) -> float:
    """Smallest ``dt >= 0`` with ``(e0 - dt*z)**2 == threshold``.

    The error moves as ``e(t0 + dt) = e0 - dt * z``. Returns inf when the
    error is frozen (``z == 0``).
    """
    if e0 * e0 > threshold * (1.0 + EQ_RTOL) and not (threshold == 0.0 and e0 == 0.0):
        raise TriggerStateError(f"error {e0:.17g} already beyond threshold {threshold:.17g}")
    if z == 0.0:
        return math.inf
    # roots are e0/z -+ sqrt(thr)/|z|; the upper one is the leaving crossing
    r = math.sqrt(threshold)
    dt = (r + math.copysign(1.0, z) * e0) / abs(z)
    return max(dt, 0.0)


def next_crossing(i: int, e_i0: float, snap: TriggerSnapshot) -> float:
    """Time until agent ``i`` must broadcast, assuming no receptions meanwhile."""
    return crossing_delay(float(e_i0), float(snap.zhat[i]), float(snap.threshold[i]))
