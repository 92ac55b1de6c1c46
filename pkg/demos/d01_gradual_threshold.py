"""
Gradual thresholding and the basins mask
========================================

Binarizing a score map throws away how confident each pixel is. Gradual
thresholding only zeroes the weak scores and keeps the rest, so the
watershed later still knows which pixels are the most field-like.
"""

import numpy as np

from fieldmap.raster import GeoTransform, ProbabilityRaster
from fieldmap.threshold import basins_mask, binarize, gradual_threshold

gt = GeoTransform(origin_x=0.0, origin_y=50.0, pixel_width=10.0, pixel_height=-10.0)

# A 1x5 transect across two parcels: high field scores on both sides,
# a boundary in the middle.
field = ProbabilityRaster(np.array([[0.9, 0.7, 0.15, 0.6, 0.95]], np.float32), gt, "EPSG:32636")
bound = ProbabilityRaster(np.array([[0.05, 0.3, 0.9, 0.5, 0.1]], np.float32), gt, "EPSG:32636")

g_field = gradual_threshold(field, 0.2)
g_bound = gradual_threshold(bound, 0.8)
print("field scores      ", field.values[0])
print("gradual, T=0.2    ", g_field.values[0])
print("binarized, T=0.2  ", binarize(field, 0.2).bits[0].astype(int))

# Only the confident boundary pixel survives T_boundary=0.8.
print("boundary, T=0.8   ", g_bound.values[0])

# basins = field * (1 - boundary); the middle pixel is zero, which splits
# the transect into two seeds.
basins = basins_mask(g_field, g_bound)
print("basins            ", np.round(basins.values[0], 3))
