"""Polytope views of zonotopes and the intersection geometry used by fusion.

Conversions between generator, halfspace and vertex representations,
strips, tight strips around an intersection polytope, and the 2-D
polygon-to-zonotope realization.
"""

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

from ._validation import as_matrix, as_vector
from .errors import (
    DegenerateStripError,
    DegenerateZonotopeError,
    DimensionError,
    EmptyIntersectionError,
    FlatSetError,
    NotCentrallySymmetricError,
    UnboundedError,
)
from .zonotope import Zonotope, subset_indices

TAU_FEAS = 1e-9
TAU_DEDUP = 1e-8
TAU_ANGLE = 1e-9
TAU_SYM_POLY = 1e-7
# above this many n-subsets the exhaustive enumeration hands over to Qhull
EXHAUSTIVE_LIMIT = 60_000


@dataclass(frozen=True, eq=False)
class HalfspaceRep:
    """``{x : H x <= b}`` with rows stored as antipodal pairs (h_i, -h_i)."""

    H: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        b = as_vector(self.b, "b", dim=H.shape[0])
        if H.shape[0] % 2:
            raise DimensionError("halfspace rows must come in antipodal pairs")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.H.shape[1]

    @property
    def n_pairs(self):
        return self.H.shape[0] // 2

    @property
    def normals(self):
        """The ε facet normals h_i (one per pair), shape (ε, n)."""
        return self.H[0::2]

    def contains(self, x, tol=TAU_FEAS):
        x = as_vector(x, "x", dim=self.dim)
        return bool(np.all(self.H @ x <= self.b + tol * max(1.0, np.abs(self.b).max())))

    def to_record(self):
        return {"dim": self.dim, "pairs": self.n_pairs, "H": self.H.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_record(cls, rec):
        return cls(np.asarray(rec["H"], dtype=float).reshape(-1, int(rec["dim"])), rec["b"])


@dataclass(frozen=True, eq=False)
class Strip:
    """``{z : |normal . z - offset| <= 1}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        c = as_vector(self.normal, "normal")
        if not np.any(c):
            raise DegenerateStripError("strip normal must be nonzero")
        object.__setattr__(self, "normal", c)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]

    @property
    def halfwidth(self):
        """Euclidean half-width of the slab."""
        return 1.0 / float(np.linalg.norm(self.normal))

    def contains(self, x, tol=TAU_FEAS):
        return bool(abs(self.normal @ as_vector(x, "x", dim=self.dim) - self.offset) <= 1 + tol)

    def halfspaces(self):
        """The strip as two rows ``A x <= b``."""
        A = np.vstack([self.normal, -self.normal])
        b = np.array([1 + self.offset, 1 - self.offset])
        return A, b


@dataclass(frozen=True, eq=False)
class VertexSet:
    """Vertices stored as the columns of an (n, κ) matrix."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self):
        return self.vertices.shape[0]

    def __len__(self):
        return self.vertices.shape[1]

    def to_record(self):
        return {"dim": self.dim, "count": len(self), "vertices": self.vertices.tolist()}

    @classmethod
    def from_record(cls, rec):
        return cls(np.asarray(rec["vertices"], dtype=float).reshape(int(rec["dim"]), -1))


def _canonical_sign(N):
    """Flip each row so that its largest-magnitude entry is positive."""
    lead = N[np.arange(N.shape[0]), np.argmax(np.abs(N), axis=1)]
    return N * np.where(lead < 0, -1.0, 1.0)[:, None]


def _unique_directions(N, tol=TAU_ANGLE):
    """Deduplicate parallel unit rows; returns them in a deterministic order."""
    N = _canonical_sign(N)
    keys = np.round(N / tol).astype(np.int64) if tol > 0 else N
    _, first = np.unique(keys, axis=0, return_index=True)
    return N[np.sort(first)]


def facet_normals(R):
    """Unit normals orthogonal to every rank-(n-1) subset of generator columns."""
    n, r = R.shape
    if n == 1:
        return np.ones((1, 1))
    subsets = subset_indices(r, n - 1)
    blocks = R[:, subsets].transpose(1, 0, 2)  # (s, n, n-1)
    raw = np.empty((blocks.shape[0], n))
    rows = np.arange(n)
    for k in range(n):
        minor = blocks[:, rows != k, :]
        raw[:, k] = (-1.0) ** k * np.linalg.det(minor)
    mag = np.linalg.norm(raw, axis=1)
    colnorm = np.linalg.norm(R, axis=0)
    ref = np.prod(colnorm[subsets], axis=1)
    ok = mag > 1e-10 * np.maximum(ref, 1e-300)
    N = raw[ok] / mag[ok, None]
    return _unique_directions(N)


def halfspace_rep(z):
    """Exact H-representation of a full-dimensional zonotope (memoized)."""
    cached = z._cache.get("hrep")
    if cached is not None:
        return cached
    zc = z.compact()
    if zc.order == 0 or not zc.is_full_dimensional():
        raise DegenerateZonotopeError("H-representation needs a full-dimensional zonotope")
    N = facet_normals(zc.generators)
    hc = N @ zc.center
    w = np.abs(N @ zc.generators).sum(axis=1)
    H = np.empty((2 * N.shape[0], zc.dim))
    H[0::2] = N
    H[1::2] = -N
    b = np.empty(2 * N.shape[0])
    b[0::2] = hc + w
    b[1::2] = -hc + w
    rep = HalfspaceRep(H, b)
    z._cache["hrep"] = rep
    return rep


def strips_of(h):
    """One strip per antipodal pair of an H-representation."""
    out = []
    b1, b2 = h.b[0::2], h.b[1::2]
    for hi, u, l in zip(h.normals, b1, b2):
        width = u + l
        if width <= TAU_FEAS * max(1.0, abs(u), abs(l)):
            raise FlatSetError("halfspace pair has zero width")
        out.append(Strip(2 * hi / width, (u - l) / width))
    return out


def _as_halfspaces(h):
    if isinstance(h, HalfspaceRep):
        return h.H, h.b
    if isinstance(h, (list, tuple)) and h and isinstance(h[0], Strip):
        parts = [s.halfspaces() for s in h]
        return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    A, b = h
    A = as_matrix(A, "A")
    return A, as_vector(b, "b", dim=A.shape[0])


def _dedup_points(P, tol):
    """Drop columns of P within ``tol`` of an earlier kept column."""
    if P.shape[1] <= 1:
        return P
    tree = cKDTree(P.T)
    drop = np.zeros(P.shape[1], dtype=bool)
    for i, j in sorted(tree.query_pairs(tol)):
        if not drop[i]:
            drop[j] = True
    return P[:, ~drop]


def _sorted_columns(P):
    keys = np.round(P, 9)
    return P[:, np.lexsort(keys[::-1])]


def _chebyshev_center(A, b):
    """Center and radius of the largest ball inside {A x <= b}."""
    n = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=np.hstack([A, norms[:, None]]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 2:
        raise EmptyIntersectionError("halfspace intersection is empty")
    if res.status == 3:
        raise UnboundedError("halfspace intersection is unbounded")
    if res.status != 0:
        raise EmptyIntersectionError(f"interior-point search failed: {res.message}")
    return res.x[:n], res.x[-1]


def _check_bounded(A, b):
    n = A.shape[1]
    for k in range(n):
        for sign in (1.0, -1.0):
            cost = np.zeros(n)
            cost[k] = -sign
            res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * n, method="highs")
            if res.status == 2:
                raise EmptyIntersectionError("halfspace intersection is empty")
            if res.status == 3:
                raise UnboundedError(f"no vertex attains the support along {'+-'[sign < 0]}e{k}")


def _enumerate_exhaustive(A, b, tol):
    m, n = A.shape
    subsets = subset_indices(m, n)
    found = []
    for lo in range(0, subsets.shape[0], 50_000):
        S = subsets[lo:lo + 50_000]
        blocks = A[S]  # (s, n, n)
        det = np.linalg.det(blocks)
        ok = np.abs(det) > 1e-12
        if not ok.any():
            continue
        x = np.linalg.solve(blocks[ok], b[S[ok]][..., None])[..., 0]
        feas = np.all(x @ A.T <= b + tol, axis=1)
        found.append(x[feas])
    if not found:
        return np.zeros((n, 0))
    return np.vstack(found).T


def _enumerate_qhull(A, b, tol):
    center, radius = _chebyshev_center(A, b)
    if radius <= tol:
        raise EmptyIntersectionError("halfspace intersection has empty interior")
    try:
        hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), center)
    except QhullError as exc:
        raise EmptyIntersectionError(f"qhull failed: {exc}") from exc
    P = hs.intersections
    P = P[np.all(np.isfinite(P), axis=1)]
    P = P[np.all(P @ A.T <= b + tol, axis=1)]
    return P.T


def vertex_enum(h, check_bounded=True, method="auto"):
    """Vertices of a bounded, nonempty halfspace intersection.

    ``h`` is a HalfspaceRep, a list of Strips, or an ``(A, b)`` pair meaning
    ``A x <= b``. The default method enumerates every n-subset of rows when
    that is cheap (at most EXHAUSTIVE_LIMIT subsets) and otherwise uses
    Qhull's halfspace intersection seeded at the Chebyshev center.
    """
    A, b = _as_halfspaces(h)
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 0
    if np.any(~keep & (b < 0)):
        raise EmptyIntersectionError("a zero row has a negative offset")
    A, b = A[keep] / norms[keep, None], b[keep] / norms[keep]
    m, n = A.shape
    if m < n + 1:
        raise UnboundedError(f"{m} halfspaces cannot bound a region in dimension {n}")
    scale = max(1.0, float(np.abs(b).max()))
    tol = TAU_FEAS * scale
    if check_bounded:
        _check_bounded(A, b)
    if method == "auto":
        method = "exhaustive" if comb(m, n) <= EXHAUSTIVE_LIMIT else "qhull"
    if method == "exhaustive":
        P = _enumerate_exhaustive(A, b, tol)
    elif method == "qhull":
        P = _enumerate_qhull(A, b, tol)
    else:
        raise ValueError(f"unknown vertex enumeration method {method!r}")
    if P.shape[1] == 0:
        if not check_bounded:
            _check_bounded(A, b)
        raise EmptyIntersectionError("halfspace intersection is empty")
    diam = float(np.linalg.norm(P.max(axis=1) - P.min(axis=1)))
    P = _dedup_points(P, TAU_DEDUP * max(1.0, diam))
    return VertexSet(_sorted_columns(P))


def intersection_vertices(zonotopes):
    """Vertices of the intersection polytope of the given zonotopes."""
    if not zonotopes:
        raise ValueError("need at least one zonotope")
    n = zonotopes[0].dim
    if any(z.dim != n for z in zonotopes):
        raise DimensionError("zonotopes have different dimensions")
    reps = [halfspace_rep(z) for z in zonotopes]
    A = np.vstack([r.H for r in reps])
    b = np.concatenate([r.b for r in reps])
    return vertex_enum((A, b), check_bounded=False)


def tight_strips(center, h, verts):
    """Strips with the facet normals of ``h`` that hug ``verts`` about ``center``.

    For each normal the farthest vertex (lowest index on ties) fixes one
    hyperplane; its mirror image through ``center`` fixes the other.
    """
    V = getattr(verts, "vertices", verts)
    V = np.asarray(V, dtype=float)
    center = as_vector(center, "center", dim=h.dim)
    if V.shape[1] == 0:
        raise ValueError("empty vertex set")
    N = h.normals
    dist = N @ (center[:, None] - V)  # (ε, κ)
    s = np.argmax(np.abs(dist), axis=1)
    width = np.abs(dist[np.arange(N.shape[0]), s])
    scale = max(1.0, float(np.abs(V - center[:, None]).max()))
    if np.any(width <= TAU_FEAS * scale):
        raise DegenerateStripError("all vertices lie on a hyperplane through the center")
    hc = N @ center
    return [Strip(n_i / w, hc_i / w) for n_i, w, hc_i in zip(N, width, hc)]


def intersect_zonotope_strip(z, s):
    """Zonotope enclosure of ``z ∩ s`` with Frobenius-optimal correction vector."""
    if s.dim != z.dim:
        raise DimensionError("strip and zonotope dimensions differ")
    R = z.generators
    cR = s.normal @ R
    resid = s.offset - s.normal @ z.center
    if abs(resid) > 1 + np.abs(cR).sum() + TAU_FEAS * max(1.0, abs(resid)):
        raise EmptyIntersectionError("strip does not meet the zonotope")
    lam = (R @ cR) / (cR @ cR + 1.0)
    c = z.center + lam * resid
    G = np.hstack([R - np.outer(lam, cR), lam[:, None]])
    return Zonotope(c, G)


def _polygon_order(center, V):
    ang = np.arctan2(V[1] - center[1], V[0] - center[0])
    return V[:, np.argsort(ang, kind="stable")]


def _drop_collinear(V, tol):
    k = V.shape[1]
    keep = []
    for i in range(k):
        a, p, c = V[:, i - 1], V[:, i], V[:, (i + 1) % k]
        cross = (p[0] - a[0]) * (c[1] - p[1]) - (p[1] - a[1]) * (c[0] - p[0])
        if abs(cross) > tol * max(1.0, np.linalg.norm(c - a)):
            keep.append(i)
    return V[:, keep]


def symmetric_polygon_to_zonotope(center, verts):
    """Exact zonotope for a centrally symmetric polygon given by its vertices."""
    center = as_vector(center, "center", dim=2)
    V = np.asarray(getattr(verts, "vertices", verts), dtype=float)
    if V.shape[0] != 2:
        raise DimensionError("polygon realization is planar only")
    scale = max(1.0, float(np.abs(V - center[:, None]).max()))
    tol = TAU_SYM_POLY * scale
    V = _drop_collinear(_polygon_order(center, V), tol)
    k = V.shape[1]
    if k % 2 or k < 4:
        raise NotCentrallySymmetricError(f"polygon with {k} vertices is not centrally symmetric")
    half = k // 2
    mirror = 2 * center[:, None] - V[:, :half]
    if np.abs(mirror - V[:, half:]).max() > tol:
        raise NotCentrallySymmetricError("vertices are not symmetric about the center")
    edges = (V[:, 1:half + 1] - V[:, :half]) / 2
    return Zonotope(center, edges)


def zonotope_vertices(z):
    """Vertices of a full-dimensional zonotope (via its H-representation)."""
    return vertex_enum(halfspace_rep(z), check_bounded=False)


def to_off(verts):
    """OFF-format text of the convex hull of a 2-D or 3-D vertex set."""
    V = np.asarray(getattr(verts, "vertices", verts), dtype=float)
    n, k = V.shape
    if n == 2:
        hull = ConvexHull(V.T)
        pts = np.vstack([V[:, hull.vertices], np.zeros(len(hull.vertices))]).T
        faces = [list(range(len(hull.vertices)))]
    elif n == 3:
        hull = ConvexHull(V.T)
        pts = V.T
        faces = [list(f) for f in hull.simplices]
    else:
        raise DimensionError("OFF export supports 2-D and 3-D sets")
    lines = ["OFF", f"{pts.shape[0]} {len(faces)} 0"]
    lines += [" ".join(repr(float(v)) for v in p) for p in pts]
    lines += [f"{len(f)} " + " ".join(str(int(i)) for i in f) for f in faces]
    return "\n".join(lines) + "\n"
