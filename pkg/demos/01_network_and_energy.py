"""Build the default network and look at where one slot's energy goes.

Run:  python3 demos/01_network_and_energy.py
"""

import numpy as np

from edgesense import EdgeSim, build_topology, parse_config
from edgesense.energy import account_slot
from edgesense.netmodel import coverage_fraction, duplication_rate

cfg = parse_config(None)
top = build_topology(cfg, cfg.seed)
print(f"{len(top.servers)} servers, {len(top.devices)} devices, {len(top.sensors)} sensors "
      f"({int(top.adjustable.sum())} adjustable) on a {top.grid.nx}x{top.grid.ny} grid")

alive = np.ones(len(top.devices), bool)
full = top.r_max
print(f"\nAt full radius: coverage {coverage_fraction(top, full, alive):.3f}, "
      f"duplication {duplication_rate(top, full, alive):.3f}")

# shrinking every adjustable sensor by a fifth trades a little coverage for less overlap
shrunk = np.where(top.adjustable, 0.8 * full, full)
print(f"Adjustable radii at 80%: coverage {coverage_fraction(top, shrunk, alive):.3f}, "
      f"duplication {duplication_rate(top, shrunk, alive):.3f}")

sim = EdgeSim(top, cfg)
for label, radii in (("full radius", full), ("80% radius", shrunk)):
    acct = account_slot(top, alive, radii, sim.selection, cfg.energy.slot_s)
    b = acct.breakdown
    print(f"\nOne slot at {label}: {b.total_J:.2f} J")
    for name, value in zip(("sensing", "sensor->device", "formatting", "device->server", "server->hub"),
                           b.as_tuple()):
        print(f"  {name:15s} {value:8.3f} J  ({100 * value / b.total_J:4.1f}%)")
    print(f"  busiest device spends {acct.device_J.max():.2f} J, quietest {acct.device_J.min():.2f} J")
