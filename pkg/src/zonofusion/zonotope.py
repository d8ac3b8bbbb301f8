"""Zonotope calculus.

A zonotope ``<c, R>`` is the set ``{c + R u : ||u||_inf <= 1}``. Every
operation here is a pure function returning new immutable values.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
import warnings

import numpy as np
from scipy.optimize import linprog

from ._validation import as_matrix, as_vector
from .errors import (
    DegenerateWarning,
    DimensionError,
    EmptySetError,
    InvalidDirectionError,
    InvalidOrderError,
    InvalidWeightError,
)

TAU_SYM = 1e-10
TAU_MEM = 1e-9
TAU_RANK = 1e-10


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Zonotope with center ``c`` (n,) and generator matrix ``R`` (n, r).

    ``r`` may be zero; ``Zonotope(c, np.zeros((n, 0)))`` is the point ``c``.
    Arrays are copied and made read-only on construction.
    """

    center: np.ndarray
    generators: np.ndarray
    # derived representations (H-rep, rank) memoized per immutable instance
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = as_vector(self.center, "center").copy()
        R = np.asarray(self.generators, dtype=float)
        if R.ndim == 1:
            R = R.reshape(c.shape[0], -1) if R.size else np.zeros((c.shape[0], 0))
        R = as_matrix(R, "generators", rows=c.shape[0]).copy()
        c.flags.writeable = False
        R.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", R)

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def order(self):
        return self.generators.shape[1]

    @classmethod
    def from_box(cls, lower, upper):
        lo = as_vector(lower, "lower")
        up = as_vector(upper, "upper", dim=lo.shape[0])
        if np.any(up < lo):
            raise ValueError("upper bound below lower bound")
        return cls((lo + up) / 2, np.diag((up - lo) / 2))

    def compact(self, tol=0.0):
        """Drop generator columns whose max-abs entry is <= ``tol``."""
        keep = np.abs(self.generators).max(axis=0, initial=0.0) > tol
        if keep.all():
            return self
        return Zonotope(self.center, self.generators[:, keep])

    def rank(self):
        if "rank" not in self._cache:
            if self.order == 0:
                self._cache["rank"] = 0
            else:
                s = np.linalg.svd(self.generators, compute_uv=False)
                self._cache["rank"] = int(np.sum(s > TAU_RANK * max(s[0], 1e-300)))
        return self._cache["rank"]

    def is_full_dimensional(self):
        return self.rank() == self.dim

    def interval_bounds(self):
        rad = np.abs(self.generators).sum(axis=1)
        return self.center - rad, self.center + rad

    def scale(self):
        """Magnitude used to turn relative tolerances into absolute ones."""
        rad = np.abs(self.generators).sum(axis=1)
        return max(1.0, float(np.max(np.abs(self.center), initial=0.0)),
                   float(np.max(rad, initial=0.0)))

    def to_record(self):
        return {
            "dim": self.dim,
            "order": self.order,
            "center": self.center.tolist(),
            "generators": self.generators.tolist(),
        }

    @classmethod
    def from_record(cls, rec):
        n = int(rec["dim"])
        gens = np.asarray(rec["generators"], dtype=float)
        if gens.size == 0:
            gens = np.zeros((n, int(rec.get("order", 0))))
        z = cls(rec["center"], gens.reshape(n, -1))
        if z.dim != n or z.order != int(rec.get("order", z.order)):
            raise DimensionError("record header does not match its arrays")
        return z

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, order={self.order}, center={self.center.tolist()})"


class WeightMatrix:
    """Symmetric positive-definite weight with cached eigenvalue bounds."""

    def __init__(self, W):
        W = as_matrix(W, "W")
        n = W.shape[0]
        if W.shape != (n, n):
            raise InvalidWeightError(f"weight must be square, got {W.shape}")
        scale = max(np.abs(W).max(), 1e-300)
        if np.abs(W - W.T).max() > TAU_SYM * scale:
            raise InvalidWeightError("weight matrix is not symmetric")
        W = (W + W.T) / 2
        eig = np.linalg.eigvalsh(W)
        if eig[0] <= 0:
            raise InvalidWeightError("weight matrix is not positive definite")
        W.flags.writeable = False
        self.W = W
        self.lambda_min = float(eig[0])
        self.lambda_max = float(eig[-1])

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def dim(self):
        return self.W.shape[0]

    @property
    def condition(self):
        return self.lambda_max / self.lambda_min

    def __repr__(self):
        return f"WeightMatrix(dim={self.dim}, eig=[{self.lambda_min:.3g}, {self.lambda_max:.3g}])"


def as_weight(W, n):
    """Coerce ``None`` (identity), an array or a WeightMatrix to a WeightMatrix of size n."""
    if W is None:
        return WeightMatrix.identity(n)
    if not isinstance(W, WeightMatrix):
        W = WeightMatrix(W)
    if W.dim != n:
        raise DimensionError(f"weight has size {W.dim}, expected {n}")
    return W


def minkowski_sum(a, b):
    if a.dim != b.dim:
        raise DimensionError(f"cannot add zonotopes of dimension {a.dim} and {b.dim}")
    return Zonotope(a.center + b.center, np.hstack([a.generators, b.generators]))


def linear_image(L, z):
    L = as_matrix(L, "L")
    if L.shape[1] != z.dim:
        raise DimensionError(f"map has {L.shape[1]} columns, zonotope dimension is {z.dim}")
    return Zonotope(L @ z.center, L @ z.generators)


def column_weighted_norms(R, W=None):
    """Squared weighted norm of every column of ``R``."""
    R = np.asarray(R, dtype=float)
    if W is None:
        return np.einsum("ij,ij->j", R, R)
    Wm = as_weight(W, R.shape[0]).W
    return np.einsum("ij,ij->j", R, Wm @ R)


def weighted_norm_sq(R, W=None):
    """``Tr(R^T W R)``; W defaults to the identity."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if W is not None and as_weight(W, R.shape[0]).dim != R.shape[0]:
        raise DimensionError("weight and generator sizes differ")
    return float(column_weighted_norms(R, W).sum())


def aligned_box(R):
    """``diag(|R| 1)`` when R has more columns than rows, else R itself."""
    R = np.asarray(R, dtype=float)
    n, r = R.shape
    if r > n:
        return np.diag(np.abs(R).sum(axis=1))
    return R


def reduce(z, q, W=None):
    """Weighted reduction to exactly ``q`` generators (or fewer if q >= order).

    Columns are sorted by decreasing weighted norm (stable, so ties keep
    their original order); all but the first ``q - n`` are replaced by their
    aligned box.
    """
    n, r = z.dim, z.order
    if q < n:
        raise InvalidOrderError(f"reduction order {q} is below the dimension {n}")
    norms = column_weighted_norms(z.generators, W)
    idx = np.argsort(-norms, kind="stable")
    R = z.generators[:, idx]
    if q >= r:
        return Zonotope(z.center, R)
    kept = R[:, : q - n]
    boxed = aligned_box(R[:, q - n:])
    return Zonotope(z.center, np.hstack([kept, boxed]))


def support(z, d):
    """Maximum of ``d . x`` over ``x`` in ``z``."""
    d = as_vector(d, "direction", dim=z.dim)
    if not np.any(d):
        raise InvalidDirectionError("support direction must be nonzero")
    return float(d @ z.center + np.abs(d @ z.generators).sum())


@lru_cache(maxsize=64)
def subset_indices(r, k):
    """All k-subsets of range(r) as an (C(r,k), k) int array, lexicographic."""
    if k > r:
        return np.zeros((0, k), dtype=np.intp)
    idx = np.fromiter(
        (i for combo in combinations(range(r), k) for i in combo),
        dtype=np.intp,
    )
    idx = idx.reshape(-1, k)
    idx.flags.writeable = False
    return idx


def _chunks(total, size):
    for start in range(0, total, size):
        yield start, min(start + size, total)


def volume(z):
    """Exact volume: ``2^n * sum |det R_J|`` over all n-column subsets J."""
    z = z.compact()
    n, r = z.dim, z.order
    if r < n:
        return 0.0
    R = z.generators
    if n == 1:
        return float(2.0 * np.abs(R).sum())
    subsets = subset_indices(r, n)
    total = 0.0
    for lo, hi in _chunks(subsets.shape[0], 200_000):
        blocks = R[:, subsets[lo:hi]].transpose(1, 0, 2)
        total += float(np.abs(np.linalg.det(blocks)).sum())
    return (2.0 ** n) * total


def contains_point(z, x, tol=TAU_MEM):
    """Membership test with absolute slack ``tol * z.scale()`` per unit-normal row.

    Full-dimensional zonotopes are tested against their exact H-representation.
    Rank-deficient ones fall back to the least-norm solution of ``c + R u = x``
    (refined by a min-infinity-norm LP when that is inconclusive) and emit a
    DegenerateWarning.
    """
    x = as_vector(x, "x", dim=z.dim)
    zc = z.compact()
    slack = tol * z.scale()
    if zc.order == 0:
        return bool(np.abs(x - z.center).max() <= slack)
    if zc.is_full_dimensional():
        from .geometry import halfspace_rep

        h = halfspace_rep(zc)
        return bool(np.all(h.H @ x <= h.b + slack))

    warnings.warn("membership in a rank-deficient zonotope", DegenerateWarning, stacklevel=2)
    R = zc.generators
    diff = x - zc.center
    u, *_ = np.linalg.lstsq(R, diff, rcond=None)
    resid = np.abs(R @ u - diff).max()
    if resid <= slack and np.abs(u).max() <= 1 + tol:
        return True
    # min t s.t. R u = diff, -t <= u_j <= t
    r = R.shape[1]
    cost = np.zeros(r + 1)
    cost[-1] = 1.0
    A_ub = np.block([[np.eye(r), -np.ones((r, 1))], [-np.eye(r), -np.ones((r, 1))]])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * r),
                  A_eq=np.hstack([R, np.zeros((R.shape[0], 1))]), b_eq=diff,
                  bounds=[(None, None)] * r + [(0, None)], method="highs")
    return bool(res.status == 0 and res.x[-1] <= 1 + tol)


def interval_hull(points):
    """Smallest axis-aligned box zonotope containing the given points.

    ``points`` is a VertexSet or an (n, k) array of column points.
    """
    P = getattr(points, "vertices", points)
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if P.size == 0:
        raise EmptySetError("interval hull of an empty point set")
    return Zonotope.from_box(P.min(axis=1), P.max(axis=1))
