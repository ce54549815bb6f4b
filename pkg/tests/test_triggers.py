import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from etconsensus.graph import WeightedDigraph, laplacian, random_balanced_digraph
from etconsensus.triggers import (
    TriggerParams,
    TriggerStateError,
    broadcast_due,
    cooldown_rebroadcast,
    crossing_delay,
    epsilon_bound,
    inter_event_floor,
    next_crossing,
    phi,
    should_broadcast,
    snapshot,
    trigger_function,
    zhat,
)

from conftest import X0, fig2_graph, pair_graph

# (d)^2 = 0.24975 solved symbolically: 3*sqrt(1110)/200
SINGLE_NEIGHBOR_CROSSING = 0.49974993746873045507

graph_seeds = st.tuples(st.integers(2, 8), st.integers(0, 2**32 - 1))


def graph_from(seed):
    n, s = seed
    return random_balanced_digraph(n, np.random.default_rng(s))


class TestPhiAndTrigger:
    def test_phi_zero_at_agreement(self):
        g = fig2_graph()
        assert all(phi(i, np.full(5, 0.3), g) == 0.0 for i in range(5))

    def test_phi_fig2(self):
        g = fig2_graph()
        assert phi(0, X0, g) == 1.0
        assert phi(1, X0, g) == 6.0

    def test_zhat_is_control(self):
        g = fig2_graph()
        u = -laplacian(g) @ np.array(X0)
        assert [zhat(i, X0, g) for i in range(5)] == pytest.approx(u.tolist(), abs=0)

    def test_trigger_function_fig2(self):
        assert trigger_function(0, 0.3, X0, fig2_graph(), 0.999) == pytest.approx(-0.15975, abs=1e-15)

    def test_zero_error_gives_minus_threshold(self):
        g = fig2_graph()
        f = trigger_function(1, 0.0, X0, g, 0.5)
        assert f == pytest.approx(-0.5 * 6.0 / (4 * 1.5))

    def test_agreement_with_error_is_positive(self):
        assert trigger_function(0, 0.1, np.zeros(5), fig2_graph(), 0.5) == pytest.approx(0.01)


class TestShouldBroadcast:
    params = TriggerParams.build(fig2_graph(), 0.5)

    def test_fresh_broadcast_silent(self):
        assert not should_broadcast(1, 0.0, X0, fig2_graph(), self.params)

    def test_error_at_agreement_fires(self):
        assert should_broadcast(1, 0.1, np.zeros(5), fig2_graph(), self.params)

    def test_zero_error_at_agreement_silent(self):
        assert not should_broadcast(1, 0.0, np.zeros(5), fig2_graph(), self.params)

    def test_equality_fires(self):
        # pair graph, xhat = [1, 0]: threshold = 0.5 * 1 / 4 = 0.125
        g = pair_graph()
        p = TriggerParams.build(g, 0.5)
        assert should_broadcast(0, math.sqrt(0.125), [1.0, 0.0], g, p)
        assert not should_broadcast(0, math.sqrt(0.125) * (1 - 1e-9), [1.0, 0.0], g, p)

    def test_broadcast_due_edges(self):
        assert broadcast_due(0.5, 1.0, 0.25)
        assert not broadcast_due(0.4, 1.0, 0.25)
        assert broadcast_due(0.1, 0.0, 0.0)
        assert not broadcast_due(0.0, 0.0, 0.0)

    @given(graph_seeds, st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    @settings(max_examples=60, deadline=None)
    def test_scaling_invariance(self, seed, xs, c):
        g = graph_from(seed)
        p = TriggerParams.build(g, 0.7)
        rng = np.random.default_rng(xs)
        xhat = rng.standard_normal(g.n)
        e = rng.standard_normal(g.n)
        for i in range(g.n):
            f = trigger_function(i, e[i], xhat, g, p.sigma)
            fc = trigger_function(i, c * e[i], c * xhat, g, p.sigma)
            assert fc == pytest.approx(c * c * f, rel=1e-9, abs=1e-12)
            assume(abs(f) > 1e-9 * (e[i] ** 2 + 1))
            assert should_broadcast(i, e[i], xhat, g, p) == should_broadcast(i, c * e[i], c * xhat, g, p)


class TestCooldown:
    def test_open_left(self):
        assert not cooldown_rebroadcast(1.0, 1.0, 0.2)

    def test_inside(self):
        assert cooldown_rebroadcast(1.1, 1.0, 0.2)

    def test_open_right(self):
        assert not cooldown_rebroadcast(1.25, 1.0, 0.25)

    def test_rejects_past(self):
        with pytest.raises(ValueError):
            cooldown_rebroadcast(0.5, 1.0, 0.2)


class TestParams:
    def test_sigma_range(self):
        for s in (0.0, 1.0, 1.2, -0.1):
            with pytest.raises(ValueError, match="sigma"):
                TriggerParams.build(fig2_graph(), s)

    def test_epsilon_above_bound_rejected(self):
        g = fig2_graph()
        bound = epsilon_bound(g, 0.999)
        with pytest.raises(ValueError, match=r"sqrt\(sigma_i / \(4 d_i\^out w_i\^max \|N_i\^out\|\)\)"):
            TriggerParams.build(g, 0.999, bound)

    def test_default_epsilon_is_half_bound(self):
        g = fig2_graph()
        p = TriggerParams.build(g, 0.999)
        # agent 1: d = 1, w = 1, one neighbor -> sqrt(0.999 / 4)
        assert p.epsilon[0] == pytest.approx(0.5 * math.sqrt(0.999 / 4))
        # agent 2: d = 1.5, w = 1, two neighbors -> sqrt(0.999 / 12)
        assert p.epsilon[1] == pytest.approx(0.5 * math.sqrt(0.999 / 12))

    def test_switching_uses_tightest_bound(self):
        a = pair_graph()
        b = WeightedDigraph.undirected(2, [(0, 1)], 4.0)
        p = TriggerParams.build([a, b], 0.5)
        assert p.epsilon[0] == pytest.approx(0.5 * epsilon_bound(b, 0.5)[0])


class TestCrossing:
    def test_frozen_error(self):
        assert crossing_delay(0.1, 0.0, 0.5) == math.inf
        snap = snapshot(np.zeros(5), fig2_graph(), TriggerParams.build(fig2_graph(), 0.5))
        assert next_crossing(0, 0.0, snap) == math.inf

    def test_single_neighbor(self):
        g = pair_graph()
        p = TriggerParams.build(g, 0.999)
        snap = snapshot([1.0, 0.0], g, p)
        assert snap.zhat[0] == -1.0
        assert snap.threshold[0] == pytest.approx(0.24975)
        dt = next_crossing(0, 0.0, snap)
        assert dt == pytest.approx(SINGLE_NEIGHBOR_CROSSING, abs=1e-9)
        # the floor is attained with equality for a single neighbor
        assert dt == pytest.approx(inter_event_floor(g, 0.999)[0], abs=1e-15)

    def test_nonzero_start(self):
        # e(t) = 0.2 - t * 1 must reach -0.5
        assert crossing_delay(0.2, 1.0, 0.25) == pytest.approx(0.7)
        assert crossing_delay(0.2, -1.0, 0.25) == pytest.approx(0.3)

    def test_missed_trigger_reported(self):
        with pytest.raises(TriggerStateError):
            crossing_delay(0.6, 1.0, 0.25)

    @given(graph_seeds, st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
    @settings(max_examples=80, deadline=None)
    def test_fresh_broadcast_floor(self, seed, xs, sigma):
        g = graph_from(seed)
        p = TriggerParams.build(g, sigma)
        xhat = np.random.default_rng(xs).standard_normal(g.n)
        snap = snapshot(xhat, g, p)
        floor = inter_event_floor(g, sigma)
        for i in range(g.n):
            if snap.zhat[i] != 0.0:
                assert next_crossing(i, 0.0, snap) >= floor[i] * (1 - 1e-12)


class TestSnapshot:
    @given(graph_seeds, st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_phi_sum_identity(self, seed, xs):
        g = graph_from(seed)
        xhat = np.random.default_rng(xs).standard_normal(g.n)
        snap = snapshot(xhat, g, TriggerParams.build(g, 0.5))
        assert snap.phi.sum() == pytest.approx(2 * xhat @ laplacian(g) @ xhat, rel=1e-12, abs=1e-12)
        assert np.allclose(snap.zhat, -laplacian(g) @ xhat, atol=1e-12)
        for i in range(g.n):
            assert snap.phi[i] == pytest.approx(phi(i, xhat, g), rel=1e-12, abs=1e-15)

    def test_zero_phi_zero_zhat(self):
        xhat = np.array([1.0, 1.0, 1.0, 1.0, 3.0])
        snap = snapshot(xhat, fig2_graph(), TriggerParams.build(fig2_graph(), 0.5))
        assert snap.phi[1] == 0.0 and snap.zhat[1] == 0.0

    @given(graph_seeds, st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
    @settings(max_examples=60, deadline=None)
    def test_decrease_certificate(self, seed, xs, sigma):
        """With every trigger satisfied, dV/dt <= sum (sigma_i - 1) phi_i / 4."""
        g = graph_from(seed)
        p = TriggerParams.build(g, sigma)
        rng = np.random.default_rng(xs)
        xhat = rng.standard_normal(g.n)
        snap = snapshot(xhat, g, p)
        e = np.sqrt(snap.threshold) * rng.uniform(-1, 1, g.n)
        x = xhat - e
        vdot = -(x - x.mean()) @ laplacian(g) @ xhat
        assert vdot <= np.sum((p.sigma - 1) * snap.phi) / 4 + 1e-12
