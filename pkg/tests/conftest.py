import numpy as np
import pytest
from scipy.spatial import ConvexHull

from polyhom import geometry as G


def random_convex_polygon(rng, n_points: int = 9) -> G.ConvexPolytope:
    """Random convex polygon of diameter O(1) via the hull of disc samples."""
    while True:
        pts = rng.uniform(-0.8, 0.8, size=(n_points, 2))
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]  # CCW in 2-D
        if len(verts) >= 4:
            return G.polygon_from_vertices(verts)


def random_convex_polytope_3d(rng, n_points: int = 10) -> G.ConvexPolytope:
    """Random simplicial 3-polytope from sphere samples."""
    pts = rng.standard_normal((n_points, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= rng.uniform(0.7, 1.0, size=(n_points, 1))
    hull = ConvexHull(pts)
    hs = []
    for eq in hull.equations:  # eq . [x, 1] <= 0 with unit outward normal
        hs.append(G.HalfSpace(-eq[:3], float(eq[3])))
    return G.build_polytope(hs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
