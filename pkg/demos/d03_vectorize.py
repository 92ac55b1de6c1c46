"""
From labels to simplified polygons
==================================

Each region of a label raster becomes a polygon traced along pixel edges,
so the polygon area equals the pixel area exactly. Ramer-Douglas-Peucker
then removes staircase vertices within a tolerance.
"""

import numpy as np

from fieldmap.raster import GeoTransform, LabelRaster
from fieldmap.vectorize import area_of, polygonize, rasterize, simplify_rdp, to_feature_collection

gt = GeoTransform(500000.0, 3700000.0, 10.0, -10.0)

# A diagonal parcel with a one-pixel hole.
lab = np.zeros((12, 12), np.uint32)
for r in range(12):
    lab[r, max(0, r - 3):min(12, r + 5)] = 1
lab[6, 6] = 0
labels = LabelRaster(lab, gt, "EPSG:32636")

(poly,) = polygonize(labels)
print("pixels:", np.count_nonzero(lab), " polygon area:", poly.area, "m2")
print("exterior vertices:", len(poly.exterior) - 1, " holes:", len(poly.interiors))
print("ring areas:", area_of(poly.exterior), [area_of(h) for h in poly.interiors])

# The traced polygon rasterizes back to the same pixels.
print("round trip exact:", np.array_equal(rasterize([poly], labels).labels, lab))

for eps in (5.0, 10.0, 20.0):
    s = simplify_rdp(poly, eps)
    print(f"eps={eps:>4}: {len(s.exterior) - 1} exterior vertices, area {s.area:.0f} m2,"
          f" degenerate={s.properties.get('rdp_degenerate', False)}")

# The hole is a 10 m square; any eps that would collapse it leaves that ring as
# traced and flags the polygon.
feature = to_feature_collection([simplify_rdp(poly, 10.0)], "EPSG:32636")["features"][0]
print(feature["properties"])
