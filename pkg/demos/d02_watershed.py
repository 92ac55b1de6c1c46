"""
Seeded watershed on a field score map
=====================================

Seeds come from the connected components of the basins mask. The flood
then grows every seed over the thresholded field map, most confident
pixels first, until the fronts meet.
"""

import numpy as np

from fieldmap.raster import BinaryMask, GeoTransform, ProbabilityRaster
from fieldmap.threshold import basins_mask, gradual_threshold
from fieldmap.watershed import extract_seeds, filter_small_labels, watershed

gt = GeoTransform(0.0, 70.0, 10.0, -10.0)

# Two parcels meet along column 3. The boundary head is only sure about
# the top and bottom of that seam.
field = np.full((7, 7), 0.9, np.float32)
field[:, 3] = 0.4
bound = np.zeros((7, 7), np.float32)
bound[:, 3] = 0.6
bound[[0, 1, 5, 6], 3] = 1.0

gf = gradual_threshold(ProbabilityRaster(field, gt, "EPSG:32636"), 0.2)
gb = gradual_threshold(ProbabilityRaster(bound, gt, "EPSG:32636"), 0.8)
seeds = extract_seeds(basins_mask(gf, gb))
print("seed components:", seeds.seed_count)
print(seeds.labels.labels)

# With one seed the flood fills everything reachable.
flood = BinaryMask(gf.values > 0, gt, "EPSG:32636")
print(watershed(gf, seeds, flood).labels)

# Cut the seam where the boundary head is confident everywhere and the
# same flood now yields two parcels, split down the middle.
bound[:, 3] = 1.0
gb = gradual_threshold(ProbabilityRaster(bound, gt, "EPSG:32636"), 0.8)
seeds = extract_seeds(basins_mask(gf, gb))
labels = watershed(gf, seeds, flood)
print("seed components:", seeds.seed_count)
print(labels.labels)

# Parcels under 2500 m2 (25 pixels of 100 m2) are dropped: the 21-pixel
# parcel on the right goes, the 28-pixel one stays.
print(filter_small_labels(labels, 2500.0).labels)
