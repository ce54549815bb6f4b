"""
Consensus over alternating graphs
=================================

Neither graph alone connects everyone: the first links agents 1-2-3 in a
ring and 4-5 in a pair, the second links 1-4 and 2-5. Switching between
them every time unit is enough. Agents whose neighbors change at a switch
broadcast immediately.
"""

import numpy as np

from etconsensus import EventKind, is_strongly_connected, load_scenario, run
from etconsensus.graph import union

cfg = load_scenario("switching")
for t, g in cfg.schedule:
    print(f"graph from t = {t}: strongly connected = {is_strongly_connected(g)}")
print("union strongly connected:", is_strongly_connected(union(cfg.graphs)))

traj = run(cfg)
kinds = {}
for ev in traj.events:
    kinds[ev.kind.value] = kinds.get(ev.kind.value, 0) + 1
print("\nlog entries by kind:", kinds)

for t in (0, 10, 50, 100, 200):
    k = min(np.searchsorted(traj.t, t), len(traj.t) - 1)
    print(f"t = {t:>3}   max |x - mean| = {np.max(np.abs(traj.x[k] - np.mean(cfg.x0))):.2e}")

first = next(ev for ev in traj.events if ev.kind is EventKind.SWITCH)
forced = [ev.agent + 1 for ev in traj.events if ev.cause is not None and traj.events[ev.cause] is first]
print(f"\nfirst switch at t = {first.t}: agents {forced} rebroadcast")
