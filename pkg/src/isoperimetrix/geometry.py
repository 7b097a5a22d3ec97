"""Low-level geometric primitives shared by the rest of the package.

Everything works in plain coordinates on R^d, d in {1, 2, 3}, with the
standard volume form (determinant).  Polytopes are stored in a canonical
vertex + facet form with the origin strictly inside; sphere grids carry
antipodally symmetric quadrature nodes and exact cell-area weights.
"""

import math
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull as _Qhull
from scipy.spatial import QhullError, cKDTree


class InputError(ValueError):
    """Malformed or out-of-contract input."""


class DegeneracyError(ValueError):
    """Input defines a lower-dimensional, unbounded or origin-touching body."""


class NumericError(RuntimeError):
    """An iterative routine failed to reach its tolerance."""


_OMEGA = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}

#: default direction-grid resolutions per dimension (2d: angle count,
#: 3d: icosphere subdivision level)
DEFAULT_RESOLUTION = {2: 720, 3: 4}


def omega(k):
    """Volume of the k-dimensional Euclidean unit ball, k in 1..3."""
    if not isinstance(k, (int, np.integer)) or k not in _OMEGA:
        raise InputError(f"omega is defined for integer k in 1..3, got {k!r}")
    return _OMEGA[k]


# ---------------------------------------------------------------------------
# direction grids


class DirectionGrid:
    """Quadrature nodes and weights on the Euclidean unit sphere S^(dim-1).

    nodes: (N, dim) unit vectors, antipodally symmetric (for each node u,
    -u is also a node, bit-exactly).  weights: positive, summing to the
    surface measure of the sphere.  For dim 3 the triangulation of the
    underlying icosphere is kept for interpolation and mesh searches.
    """

    def __init__(self, dim, nodes, weights, resolution, triangles=None):
        self.dim = dim
        self.nodes = nodes
        self.weights = weights
        self.resolution = resolution
        self.triangles = triangles
        self._antipode = None
        self._kdtree = None
        self._vertex_triangles = None

    def __len__(self):
        return len(self.nodes)

    @property
    def antipode(self):
        """Index array a with nodes[a[i]] == -nodes[i]."""
        if self._antipode is None:
            key = {np.round(v, 12).tobytes(): i for i, v in enumerate(self.nodes)}
            idx = np.empty(len(self.nodes), dtype=int)
            for i, v in enumerate(self.nodes):
                j = key.get(np.round(-v, 12).tobytes())
                if j is None:
                    raise NumericError("direction grid is not antipodally symmetric")
                idx[i] = j
            self._antipode = idx
        return self._antipode

    @property
    def kdtree(self):
        if self._kdtree is None:
            self._kdtree = cKDTree(self.nodes)
        return self._kdtree

    @property
    def vertex_triangles(self):
        """List of triangle indices incident to each node (dim 3)."""
        if self._vertex_triangles is None:
            if self.triangles is None:
                raise InputError("grid has no triangulation")
            inc = [[] for _ in range(len(self.nodes))]
            for t, tri in enumerate(self.triangles):
                for v in tri:
                    inc[v].append(t)
            self._vertex_triangles = [np.array(x) for x in inc]
        return self._vertex_triangles

    def same_as(self, other):
        return (
            self.dim == other.dim
            and self.resolution == other.resolution
            and len(self) == len(other)
        )


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    verts = np.array(verts)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    # faces = triples of mutually nearest vertices
    d = np.linalg.norm(verts[:, None, :] - verts[None, :, :], axis=2)
    edge_len = np.min(d[d > 1e-9])
    adj = d < edge_len * 1.2
    faces = []
    for i, j, k in combinations(range(12), 3):
        if adj[i, j] and adj[j, k] and adj[i, k]:
            if np.linalg.det(verts[[i, j, k]]) < 0:
                i, j = j, i
            faces.append((i, j, k))
    return verts, np.array(sorted(faces))


def _icosphere(level):
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new_faces)
    return np.array(verts), faces


def _spherical_triangle_areas(verts, tris):
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


@lru_cache(maxsize=64)
def make_sphere_grid(dim, resolution=None):
    """Build a DirectionGrid.

    dim 2: `resolution` equally spaced angles (must be even, >= 4), equal
    weights 2*pi/resolution.  dim 3: icosphere subdivided `resolution`
    times; weights are the spherical areas of the barycentric dual cells.
    """
    if resolution is None:
        resolution = DEFAULT_RESOLUTION.get(dim)
    if dim == 2:
        n = int(resolution)
        if n < 4:
            raise InputError("2d direction grids need resolution >= 4")
        if n % 2:
            raise InputError("2d direction grids need an even resolution (antipodal symmetry)")
        theta = 2.0 * np.pi * np.arange(n // 2) / n
        half = np.column_stack([np.cos(theta), np.sin(theta)])
        nodes = np.vstack([half, -half])  # angle order [0, pi) then [pi, 2 pi)
        weights = np.full(n, 2.0 * np.pi / n)
        return DirectionGrid(2, nodes, weights, n)
    if dim == 3:
        level = int(resolution)
        if level < 0 or level > 7:
            raise InputError("3d direction grids take subdivision levels 0..7")
        verts, tris = _icosphere(level)
        areas = _spherical_triangle_areas(verts, tris)
        weights = np.zeros(len(verts))
        np.add.at(weights, tris.ravel(), np.repeat(areas / 3.0, 3))
        return DirectionGrid(3, verts, weights, level, tris)
    raise InputError("direction grids exist for dim 2 and 3 only")


# ---------------------------------------------------------------------------
# polytopes


class Polytope:
    """Centrally symmetric convex polytope with origin strictly inside.

    vertices: (m, d).  Facet data: unit outward normals (F, d), offsets
    (F,) all positive, (d-1)-measures (F,), and vertex index tuples.  In
    3d the facets are the triangles reported by the hull; coplanar
    triangles are kept separate, which is harmless for every formula used
    here (areas and vertex sets add up).
    """

    def __init__(self, vertices, normals, offsets, areas, facet_vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        self.facet_normals = np.asarray(normals, dtype=float)
        self.facet_offsets = np.asarray(offsets, dtype=float)
        self.facet_areas = np.asarray(areas, dtype=float)
        self.facet_vertices = facet_vertices
        self.dim = self.vertices.shape[1]
        self._edges = None

    @property
    def scale(self):
        return float(np.abs(self.vertices).max())

    @property
    def edges(self):
        """Unique vertex index pairs lying on the 1-skeleton (dim 3)."""
        if self._edges is None:
            pairs = set()
            for tri in self.facet_vertices:
                k = len(tri)
                for i in range(k):
                    a, b = tri[i], tri[(i + 1) % k]
                    pairs.add((min(a, b), max(a, b)))
            self._edges = np.array(sorted(pairs), dtype=int)
        return self._edges

    def support(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.max(xi @ self.vertices.T, axis=-1)

    def gauge(self, x):
        """Minkowski functional: gauge(x) = inf {t > 0 : x in t*P}."""
        x = np.asarray(x, dtype=float)
        return np.max((x @ self.facet_normals.T) / self.facet_offsets, axis=-1)

    def volume(self):
        return float(np.dot(self.facet_offsets, self.facet_areas) / self.dim)

    def polar(self):
        pts = self.facet_normals / self.facet_offsets[:, None]
        return convex_hull(pts)


def _dedupe_points(points, rel_tol=1e-12):
    scale = max(float(np.abs(points).max()), 1e-300)
    seen = {}
    keep = []
    for i, p in enumerate(points):
        key = tuple(np.round(p / scale, 12))
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return points[np.array(keep)]


def _check_symmetric(vertices, tol_rel=1e-9):
    scale = float(np.abs(vertices).max())
    s = np.linalg.norm(vertices[:, None, :] + vertices[None, :, :], axis=2)
    worst = float(s.min(axis=1).max())
    if worst > tol_rel * scale:
        raise InputError(
            f"vertex set is not centrally symmetric (worst antipode miss {worst:.3e})"
        )


def _hull_1d(points):
    x = points[:, 0]
    hi, lo = float(x.max()), float(x.min())
    if hi - lo < 1e-12:
        raise DegeneracyError("degenerate 1d point set")
    if abs(hi + lo) > 1e-9 * max(abs(hi), abs(lo)):
        raise InputError("1d vertex set is not centrally symmetric")
    a = (hi - lo) / 2.0
    verts = np.array([[-a], [a]])
    normals = np.array([[-1.0], [1.0]])
    offsets = np.array([a, a])
    areas = np.array([1.0, 1.0])
    return Polytope(verts, normals, offsets, areas, [(0,), (1,)])


def _polygon_from_ccw(verts):
    """Facet data for an already-convex ccw-ordered 2d vertex loop."""
    verts = np.asarray(verts, dtype=float)
    m = len(verts)
    scale = float(np.abs(verts).max())
    # drop collinear / repeated vertices
    keep = []
    for i in range(m):
        a, b, c = verts[i - 1], verts[i], verts[(i + 1) % m]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if cross > 1e-13 * scale * scale:
            keep.append(i)
    if len(keep) < 3:
        raise DegeneracyError("degenerate polygon")
    verts = verts[keep]
    m = len(verts)
    normals, offsets, areas, fverts = [], [], [], []
    for i in range(m):
        v1, v2 = verts[i], verts[(i + 1) % m]
        e = v2 - v1
        ln = float(np.hypot(e[0], e[1]))
        n = np.array([e[1], -e[0]]) / ln
        normals.append(n)
        offsets.append(float(n @ v1))
        areas.append(ln)
        fverts.append((i, (i + 1) % m))
    P = Polytope(verts, np.array(normals), np.array(offsets), np.array(areas), fverts)
    if P.facet_offsets.min() <= 1e-12 * P.scale:
        raise DegeneracyError("polygon does not contain the origin strictly")
    return P


def convex_hull(points, require_symmetric=True):
    """Canonical Polytope from a point cloud.

    The hull must be full-dimensional, bounded (trivially), contain the
    origin strictly inside and have a centrally symmetric vertex set.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or not np.all(np.isfinite(points)):
        raise InputError("points must be a finite (m, d) array")
    d = points.shape[1]
    if d == 1:
        return _hull_1d(points)
    points = _dedupe_points(points)
    if len(points) <= d:
        raise DegeneracyError("not enough distinct points for a full-dimensional hull")
    try:
        hull = _Qhull(points)
    except QhullError as exc:
        raise DegeneracyError(f"degenerate hull: {exc}") from exc

    if d == 2:
        verts = points[hull.vertices]  # qhull returns ccw order in 2d
        # rotate so the vertex with least angle comes first (canonical order)
        ang = np.mod(np.arctan2(verts[:, 1], verts[:, 0]), 2.0 * np.pi)
        start = int(np.argmin(ang))
        verts = np.roll(verts, -start, axis=0)
        P = _polygon_from_ccw(verts)
    else:
        vidx = hull.vertices
        remap = -np.ones(len(points), dtype=int)
        remap[vidx] = np.arange(len(vidx))
        verts = points[vidx]
        order = np.lexsort(verts.T[::-1])
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        verts = verts[order]
        normals = hull.equations[:, :3]
        offsets = -hull.equations[:, 3]
        fverts = []
        areas = np.empty(len(hull.simplices))
        for f, tri in enumerate(hull.simplices):
            tri = inv[remap[tri]]
            a, b, c = verts[tri[0]], verts[tri[1]], verts[tri[2]]
            if np.dot(np.cross(b - a, c - a), normals[f]) < 0:
                tri = tri[[0, 2, 1]]
                a, b, c = verts[tri[0]], verts[tri[1]], verts[tri[2]]
            areas[f] = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
            fverts.append(tuple(int(t) for t in tri))
        forder = np.lexsort(np.column_stack([normals, offsets]).T[::-1])
        P = Polytope(
            verts,
            normals[forder],
            offsets[forder],
            areas[forder],
            [fverts[i] for i in forder],
        )
        if P.facet_offsets.min() <= 1e-12 * P.scale:
            raise DegeneracyError("hull does not contain the origin strictly")
    if P.volume() < 1e-12:
        raise DegeneracyError("hull volume below degeneracy threshold")
    if require_symmetric:
        _check_symmetric(P.vertices)
    return P


def halfspace_intersection(normals, offsets, require_symmetric=True):
    """Canonical Polytope {x : <n_i, x> <= c_i} via polar duality.

    All offsets must be positive (origin strictly inside); an unbounded
    intersection raises DegeneracyError.
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    if normals.ndim != 2 or len(normals) != len(offsets):
        raise InputError("need matching (F, d) normals and (F,) offsets")
    if np.min(offsets) <= 1e-14:
        raise DegeneracyError("halfspace offsets must be positive (origin inside)")
    norms = np.linalg.norm(normals, axis=1)
    if np.min(norms) <= 1e-14:
        raise InputError("zero normal vector")
    dual_pts = normals / (offsets * norms)[:, None] * norms[:, None]
    dual_pts = normals / offsets[:, None]
    d = normals.shape[1]
    if d == 1:
        pos = offsets[normals[:, 0] > 0] / np.abs(normals[normals[:, 0] > 0, 0])
        neg = offsets[normals[:, 0] < 0] / np.abs(normals[normals[:, 0] < 0, 0])
        if len(pos) == 0 or len(neg) == 0:
            raise DegeneracyError("unbounded halfspace intersection")
        a = min(pos.min(), neg.min())
        return convex_hull(np.array([[-a], [a]]), require_symmetric)
    D = convex_hull(dual_pts, require_symmetric=False)
    if D.facet_offsets.min() <= 1e-12 * D.scale:
        raise DegeneracyError("unbounded halfspace intersection")
    verts = D.facet_normals / D.facet_offsets[:, None]
    return convex_hull(verts, require_symmetric)


def polytope_volume(P):
    """Lebesgue volume by the fan triangulation from the origin."""
    return P.volume()


# ---------------------------------------------------------------------------
# ellipsoids


class Ellipsoid:
    """{x : x^T Q x <= 1} with Q symmetric positive definite."""

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError("Q must be a square matrix")
        if np.abs(Q - Q.T).max() > 1e-12 * max(np.abs(Q).max(), 1.0):
            raise InputError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        w = np.linalg.eigvalsh(Q)
        if w.min() <= 0:
            raise DegeneracyError("Q must be positive definite")
        self.Q = Q
        self.Qinv = np.linalg.inv(Q)
        self.Qinv = 0.5 * (self.Qinv + self.Qinv.T)
        self.dim = Q.shape[0]

    def support(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", xi, self.Qinv, xi), 0.0))

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", x, self.Q, x), 0.0))

    def volume(self):
        return omega(self.dim) / math.sqrt(np.linalg.det(self.Q))

    def polar(self):
        return Ellipsoid(self.Qinv)


# ---------------------------------------------------------------------------
# small numeric helpers

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_1d_convex(f, bracket, tol=1e-9):
    """Golden-section minimum of a convex scalar function on a bracket.

    Returns (argmin, min value); the argmin is within `tol` of the true
    minimiser.  Non-finite function values raise NumericError.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if not b > a:
        raise InputError("bracket must satisfy a < b")
    fa, fb = f(a), f(b)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for v in (fa, fb, fc, fd):
        if not np.isfinite(v):
            raise NumericError("non-finite value in 1d minimization")
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        if not (np.isfinite(fc) and np.isfinite(fd)):
            raise NumericError("non-finite value in 1d minimization")
    x = 0.5 * (a + b)
    fx = f(x)
    # the minimum may sit at an edge of the original bracket
    for xe, fe in ((float(bracket[0]), fa), (float(bracket[1]), fb)):
        if fe < fx:
            x, fx = xe, fe
    return x, float(fx)


def golden_min_batch(f, lo, hi, tol=1e-9, max_iter=80):
    """Vectorized golden-section minimum over per-row brackets.

    f maps a (k,) array of abscissae to a (k,) array of values.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if np.max(b - a) <= tol:
            break
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - _INVPHI * (b - a)
        d_new = a + _INVPHI * (b - a)
        # only one of the two inner points is fresh per row
        c_old_kept = np.where(left, c_new, d)  # placeholder to keep shapes
        new_c = np.where(left, c_new, d)
        fc_next = np.where(left, np.nan, fd)
        # evaluate fresh points in one call
        fresh_x = np.where(left, c_new, d_new)
        fresh_f = f(fresh_x)
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        fc, fd = np.where(left, fresh_f, fc), np.where(left, fc, fresh_f)
        # note: when stepping left the old c becomes d; when stepping right
        # the old d becomes c.  The where() pairs above implement exactly that.
        d = np.where(left, c_old_kept * 0 + d, d)
    x = 0.5 * (a + b)
    return x, f(x)


def hyperplane_basis(v):
    """Deterministic orthonormal basis of the hyperplane v-perp, as columns."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n <= 0:
        raise InputError("zero vector has no orthogonal complement")
    u = v / n
    d = len(u)
    if d == 2:
        return np.array([[-u[1]], [u[0]]])
    if d == 3:
        k = int(np.argmin(np.abs(u)))
        e = np.zeros(3)
        e[k] = 1.0
        b1 = e - u * u[k]
        b1 /= np.linalg.norm(b1)
        b2 = np.cross(u, b1)
        return np.column_stack([b1, b2])
    raise InputError("hyperplane bases implemented for dim 2 and 3")
