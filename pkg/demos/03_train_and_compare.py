"""Train radius-control agents, then compare them with the baselines.

Uses the toy network by default so it finishes in well under a minute.
Pass ``--default`` for the full network (several minutes on one core).

Run:  python3 demos/03_train_and_compare.py [--default]
"""

import sys
import time
from pathlib import Path

from edgesense import EdgeSim, build_topology, parse_config, run_episode, summarize
from edgesense.baselines import KINDS, make_policy
from edgesense.marl.env import MarlEnv
from edgesense.marl.train import Trainer

toy = Path(__file__).resolve().parent.parent / "configs" / "toy.cfg"
cfg = parse_config(None if "--default" in sys.argv else toy)
sim = EdgeSim(build_topology(cfg, cfg.seed), cfg)

t0 = time.perf_counter()
params, log = Trainer(MarlEnv(sim, horizon=cfg.episode_len), cfg.marl, cfg.seed).train()
r = log.rewards
print(f"trained {len(r)} episodes in {time.perf_counter() - t0:.0f}s")
tenth = max(1, len(r) // 10)
print(f"mean reward: first tenth {r[:tenth].mean():.3f}, last tenth {r[-tenth:].mean():.3f}")

logs = {k: run_episode(make_policy(k, params), sim, cfg.horizon, cfg.seed) for k in KINDS}
window = min(len(lg.slots) for lg in logs.values())
print(f"\nenergy compared over the first {window} slots (every policy was still running)")
print(f"{'policy':10s} {'J/slot':>8s} {'duration':>9s} {'coverage':>9s} {'device spread':>14s}")
for kind, lg in logs.items():
    s = summarize(lg, slot_s=cfg.energy.slot_s, window=window)
    duration = s.max_operational_duration
    mark = "+" if s.censored else ""
    print(f"{kind:10s} {s.device_J / window:8.2f} {duration:8d}{mark:1s} {s.mean_coverage:9.3f} "
          f"{s.device_energy_std_J:14.3f}")
print("\n'+' marks a run that reached the horizon with coverage intact")
