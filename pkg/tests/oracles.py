"""Independent reference computations used by several test modules."""

import itertools

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon
from shapely.ops import unary_union


def naive_iou(a, b) -> float:
    """Pixel-by-pixel double loop over two binary masks."""
    inter = union = 0
    h, w = len(a), len(a[0])
    for r in range(h):
        for c in range(w):
            pa = a[r][c] != 0
            pb = b[r][c] != 0
            inter += pa and pb
            union += pa or pb
    return 1.0 if union == 0 else inter / union


def box_corners(center, size):
    c = np.asarray(center, float)
    half = np.asarray(size, float) / 2
    return np.array([c + half * s for s in itertools.product((-1, 1), repeat=3)])


def projected_hull(camera, corners) -> Polygon:
    """Image-plane silhouette of a convex solid: hull of its projected corners."""
    cols, rows = camera.project(corners[:, 0], corners[:, 1], corners[:, 2])
    return MultiPoint(np.column_stack([cols, rows])).convex_hull


def band_violations(mask, hull: Polygon, band: float = 1.0) -> int:
    """Pixels whose center lies more than ``band`` pixels inside the hull but
    are unlabeled, or more than ``band`` outside it but labeled."""
    h, w = mask.shape
    cc, rr = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    inner = shapely.contains_xy(hull.buffer(-band), cc, rr)
    outer = shapely.contains_xy(hull.buffer(band), cc, rr)
    fg = mask > 0
    return int(np.count_nonzero(inner & ~fg) + np.count_nonzero(~outer & fg))


def plan_centroid(mesh):
    """Area centroid of the mesh's footprint seen straight from above."""
    v = mesh.vertices
    polys = []
    for t in mesh.triangles:
        p = Polygon(v[t, :2])
        if p.area > 0:
            polys.append(p)
    c = unary_union(polys).centroid
    return c.x, c.y
