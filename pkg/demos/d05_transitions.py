"""
Year-to-year wheat transitions
==============================

Given one wheat mask per year on a shared grid, each year pair yields
gained, persisted and lost areas. Pixel accounting keeps the totals
consistent: persisted + lost is the earlier year's area and persisted +
gained the later one's.
"""

import numpy as np

from fieldmap.change import YearMask, flow_table, year_summary
from fieldmap.raster import BinaryMask, GeoTransform

gt = GeoTransform(0.0, 0.0, 10.0, -10.0)
rng = np.random.default_rng(0)

# Start from a random field layout and let each year keep most of last
# year's wheat while some fields switch in or out.
fields = rng.integers(0, 200, size=(300, 300))
wheat_fields = rng.random(200) < 0.4
years = []
for year in range(2016, 2025):
    flip = rng.random(200) < 0.25
    wheat_fields = wheat_fields ^ flip
    years.append(YearMask(year, BinaryMask(wheat_fields[fields], gt, "EPSG:32636")))

for s in map(year_summary, years):
    print(f"{s.year}: {s.area * 1e-6:6.2f} km2")

flows = flow_table(years, [1, 2])
print(len(flows), "flows")
for f in flows[:3] + flows[-2:]:
    print(f"{f.year_from}->{f.year_to}: gained {f.gained_area * 1e-6:.2f}, "
          f"persisted {f.persisted_area * 1e-6:.2f}, lost {f.lost_area * 1e-6:.2f} km2")

# Check the accounting on one flow.
a, b = years[0].mask.bits.sum(), years[1].mask.bits.sum()
f = flows[0]
print("conserved:", f.persisted_pixels + f.lost_pixels == a, f.persisted_pixels + f.gained_pixels == b)
