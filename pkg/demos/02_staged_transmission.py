"""How a fixed-range sensor avoids resending cells the edge tier already holds.

The sensor's disk is split into rings. The inner ring always goes out first;
the outer rings are skipped once their cells have arrived from elsewhere.

Run:  python3 demos/02_staged_transmission.py
"""

import numpy as np

from edgesense.dedup import hash_dedup, partition, staged_transmit
from edgesense.netmodel import AreaGrid, Sensor

grid = AreaGrid(100.0, 100.0)
sensor = Sensor(id=0, position=(50.5, 50.5), r_max=20.0, adjustable=False, voltage_U=5.0,
                current_law=(0.01, 0.001), bytes_per_cell=100.0, owner_device=0,
                link_rate_B1=5e4, link_power_P1=0.25, fixed_L1=12.0)
rings = partition(sensor, grid)
print(f"rings: red <= {rings.l1:g}, blue <= {rings.l2:g}, green <= {sensor.r_max:g}")
print(f"cells: red {len(rings.red_cells)}, blue {len(rings.blue_cells)}, green {len(rings.green_cells)}")


def show(title, held):
    batches = staged_transmit(rings, held)
    sent = sum(b.data_bytes for b in batches)
    stages = ", ".join(f"{b.stage.name.lower()} {b.data_bytes:.0f} B" for b in batches)
    print(f"\n{title}\n  sent {sent:.0f} B: {stages}")


held = np.zeros(grid.n_cells, bool)
show("Nothing held yet", held)

held[rings.green_cells] = True
show("A neighbour already delivered the green ring", held)

held[rings.blue_cells[::2]] = True
show("...and half of the blue ring", held)

# the hashing alternative compares whole batches after they have been sent
a = (rings.all_cells, 100.0 * len(rings.all_cells))
b = (rings.red_cells, 100.0 * len(rings.red_cells))
unique, dropped = hash_dedup([a, b])
print(f"\nHash dedup of two overlapping uploads: kept {unique:.0f} B, dropped {dropped:.0f} B "
      "(the duplicate bytes were still transmitted)")
