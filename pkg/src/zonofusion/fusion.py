"""Zonotope fusion criteria.

Batch fusion with analytically optimal weights, the tight-strip improvement,
sequential (arrival-ordered) fusion, plus a volume-optimal search and an
interval-hull baseline for comparison.
"""

from dataclasses import dataclass, field
from time import perf_counter
import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize, nnls

from .errors import (
    ConvergenceWarning,
    DimensionError,
    RankDeficiencyError,
    SingularSumError,
)
from .geometry import (
    halfspace_rep,
    intersect_zonotope_strip,
    intersection_vertices,
    symmetric_polygon_to_zonotope,
    tight_strips,
    vertex_enum,
    Strip,
)
from .local import LocalEstimate
from .zonotope import (
    Zonotope,
    as_weight,
    column_weighted_norms,
    interval_hull,
    subset_indices,
    volume,
    weighted_norm_sq,
)

METHODS = ("batch_opt", "improved", "sequential", "volume_opt", "box")
TAU_STAT = 1e-8
MAX_GRAM_COND = 1e12
# smallest per-generator scale in the rescaling realization; keeps every
# generator direction (and hence every facet normal) alive
MIN_SCALE = 1e-6


@dataclass
class FusionProblem:
    """Local estimates of one step, the weight, and their arrival order."""

    estimates: list
    W: object = None
    arrival: tuple = None

    def __post_init__(self):
        zs = [e.zonotope if isinstance(e, LocalEstimate) else e for e in self.estimates]
        if len(zs) < 2:
            raise ValueError("fusion needs at least two local estimates")
        n = zs[0].dim
        if any(z.dim != n for z in zs):
            raise DimensionError("local estimates have different dimensions")
        steps = {e.k for e in self.estimates if isinstance(e, LocalEstimate)}
        if len(steps) > 1:
            raise ValueError(f"local estimates come from different steps {sorted(steps)}")
        self.zonotopes = zs
        self.W = as_weight(self.W, n)
        if self.arrival is None:
            self.arrival = tuple(range(len(zs)))
        self.arrival = tuple(int(i) for i in self.arrival)
        if sorted(self.arrival) != list(range(len(zs))):
            raise ValueError(f"arrival order {self.arrival} is not a permutation")

    @property
    def L(self):
        return len(self.zonotopes)

    @property
    def dim(self):
        return self.zonotopes[0].dim

    def intersection(self):
        """Vertices of the intersection of all local estimates (memoized)."""
        if not hasattr(self, "_verts"):
            self._verts = intersection_vertices(self.zonotopes)
        return self._verts

    def local_norms(self):
        return [weighted_norm_sq(z.generators, self.W) for z in self.zonotopes]


@dataclass
class FusionResult:
    fused: Zonotope
    method: str
    parameters: list
    metrics: dict
    details: dict = field(default_factory=dict, repr=False)

    def to_record(self):
        return {
            "method": self.method,
            "fused": self.fused.to_record(),
            "parameters": [np.asarray(M).tolist() for M in self.parameters],
            "metrics": dict(self.metrics),
        }


def _result(fused, method, params, W, wall, with_volume=True, **details):
    metrics = {
        "weighted_norm_sq": weighted_norm_sq(fused.generators, W),
        "volume": volume(fused) if with_volume else float("nan"),
        "generator_order": fused.order,
        "wall_time": wall,
    }
    return FusionResult(fused, method, list(params), metrics, details)


def fuse_batch(problem, M, with_volume=True):
    """Batch fusion with given weights ``M = [M_2, ..., M_L]``."""
    t0 = perf_counter()
    fused = _batch_zonotope(problem.zonotopes, M)
    return _result(fused, "batch_opt", M, problem.W, perf_counter() - t0, with_volume)


def _batch_zonotope(zs, M):
    n = zs[0].dim
    if len(M) != len(zs) - 1:
        raise DimensionError(f"expected {len(zs) - 1} weight matrices, got {len(M)}")
    M = [np.asarray(m, dtype=float) for m in M]
    if any(m.shape != (n, n) for m in M):
        raise DimensionError("every weight matrix must be n x n")
    x1, R1 = zs[0].center, zs[0].generators
    center = x1 + sum(m @ (z.center - x1) for m, z in zip(M, zs[1:]))
    head = (np.eye(n) - sum(M)) @ R1
    G = np.hstack([head] + [m @ z.generators for m, z in zip(M, zs[1:])])
    return Zonotope(center, G)


def batch_blocks(zs):
    """The matrices N1, N2 with ``R_fused = N1 + M N2``."""
    n = zs[0].dim
    orders = [z.order for z in zs]
    total = sum(orders)
    N1 = np.zeros((n, total))
    N1[:, : orders[0]] = zs[0].generators
    N2 = np.zeros(((len(zs) - 1) * n, total))
    offsets = np.cumsum([0] + orders)
    for i, z in enumerate(zs[1:]):
        rows = slice(i * n, (i + 1) * n)
        N2[rows, : orders[0]] = -zs[0].generators
        N2[rows, offsets[i + 1]: offsets[i + 2]] = z.generators
    return N1, N2


def optimal_batch_weights(problem):
    """Weights minimizing the weighted Frobenius norm of the fused generators.

    Solves ``M (N2 N2^T) = -N1 N2^T`` by Cholesky; the optimum does not
    depend on W.
    """
    n = problem.dim
    N1, N2 = batch_blocks(problem.zonotopes)
    gram = N2 @ N2.T
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_GRAM_COND:
        raise RankDeficiencyError("N2 N2^T is singular; a local generator matrix lacks full row rank")
    try:
        Mt = cho_solve(cho_factor(gram), -N2 @ N1.T)
    except LinAlgError as exc:
        raise RankDeficiencyError(str(exc)) from exc
    M = Mt.T
    return [M[:, i * n:(i + 1) * n] for i in range(problem.L - 1)]


def batch_gradient(problem, M):
    """``2 W M N2 N2^T + 2 W N1 N2^T`` at the stacked weights M."""
    N1, N2 = batch_blocks(problem.zonotopes)
    Ms = np.hstack(M)
    W = problem.W.W
    return 2 * W @ Ms @ N2 @ N2.T + 2 * W @ N1 @ N2.T


def batch_objective(problem, M):
    N1, N2 = batch_blocks(problem.zonotopes)
    return weighted_norm_sq(N1 + np.hstack(M) @ N2, problem.W)


def fuse_batch_optimal(problem, with_volume=True):
    t0 = perf_counter()
    M = optimal_batch_weights(problem)
    fused = _batch_zonotope(problem.zonotopes, M)
    return _result(fused, "batch_opt", M, problem.W, perf_counter() - t0, with_volume)


def _strip_halfwidths(hrep, strips):
    tight = np.array([1.0 / np.linalg.norm(s.normal) for s in strips])
    original = (hrep.b[0::2] + hrep.b[1::2]) / 2
    return np.minimum(tight, original), original


def _rescale_generators(enclosure, normals, widths, W):
    """Per-generator scales t in [MIN_SCALE, 1] of least weighted norm such that
    every facet half-width of ``<c, R diag(t)>`` is at least ``widths``.

    Least-distance program solved through its NNLS dual.
    """
    R = enclosure.generators
    a = column_weighted_norms(R, W)
    sa = np.sqrt(a)
    G = np.abs(normals @ R) / sa  # constraints on s = sqrt(a) * t
    r = R.shape[1]
    E = np.vstack([G, np.eye(r), -np.eye(r)])
    f = np.concatenate([widths, sa * MIN_SCALE, -sa])
    rownorm = np.linalg.norm(E, axis=1)
    E, f = E / rownorm[:, None], f / rownorm
    A = np.vstack([E.T, f[None, :]])
    target = np.zeros(r + 1)
    target[-1] = 1.0
    u, _ = nnls(A, target, maxiter=50 * A.shape[1])
    resid = A @ u - target
    if abs(resid[-1]) < 1e-14:
        t = np.ones(r)
    else:
        t = np.clip(-resid[:r] / resid[-1] / sa, MIN_SCALE, 1.0)
    # pull toward t = 1 (always feasible) just enough to repair round-off
    full = np.abs(normals @ R).sum(axis=1)
    have = np.abs(normals @ R) @ t
    short = have < widths
    if short.any():
        gap = full - have
        theta = np.min(np.where(short & (gap > 0), (full - widths) / np.where(gap > 0, gap, 1), 1.0))
        t = theta * t + (1 - theta)
    return Zonotope(enclosure.center, R * t), t


def improve(enclosure, zonotopes, W, norm_bound=None, realization="auto", verts=None):
    """Tighten ``enclosure`` to the strips that hug the intersection of ``zonotopes``.

    Realizations: ``"exact"`` (planar only) turns the strip intersection into
    its zonotope; ``"scale"`` shrinks each generator of the enclosure;
    ``"fold"`` intersects the enclosure with every tightened strip in turn.
    ``"auto"`` uses the exact planar result unless its weighted norm exceeds
    ``norm_bound``, and the rescaling otherwise. ``verts`` may carry the
    precomputed intersection vertices.
    """
    W = as_weight(W, enclosure.dim)
    enclosure = enclosure.compact()
    hrep = halfspace_rep(enclosure)
    if verts is None:
        verts = intersection_vertices(zonotopes)
    strips = tight_strips(enclosure.center, hrep, verts)
    widths, original = _strip_halfwidths(hrep, strips)
    normals = hrep.normals
    center = enclosure.center
    hc = normals @ center
    strips = [Strip(h / w, c / w) for h, w, c in zip(normals, widths, hc)]
    n = enclosure.dim

    used = realization
    fused = None
    if realization in ("auto", "exact") and n <= 2:
        if n == 1:
            fused = Zonotope(center, [[widths.min()]])
        else:
            poly = vertex_enum(strips, check_bounded=False)
            fused = symmetric_polygon_to_zonotope(center, poly)
        used = "exact"
        if realization == "auto" and norm_bound is not None:
            bound = norm_bound + TAU_STAT * max(1.0, norm_bound)
            if weighted_norm_sq(fused.generators, W) > bound:
                fused = None
    elif realization == "exact":
        raise DimensionError("exact strip realization is available for n <= 2 only")
    if fused is None and realization in ("auto", "scale"):
        fused, _ = _rescale_generators(enclosure, normals, widths, W)
        used = "scale"
    elif realization == "fold":
        fused = enclosure
        for s, w, w0 in zip(strips, widths, original):
            if w < w0 * (1 - 1e-12):
                fused = intersect_zonotope_strip(fused, s)
    elif fused is None:
        raise ValueError(f"unknown realization {realization!r}")
    return fused, {"strips": strips, "vertices": verts, "hrep": hrep,
                   "realization": used, "halfwidths": widths}


def fuse_improved(problem, realization="auto", with_volume=True):
    """Batch-optimal fusion followed by the tight-strip improvement."""
    t0 = perf_counter()
    M = optimal_batch_weights(problem)
    batch_z = _batch_zonotope(problem.zonotopes, M)
    t_batch = perf_counter() - t0
    bound = min(problem.local_norms())
    fused, info = improve(batch_z, problem.zonotopes, problem.W, bound, realization,
                          problem.intersection())
    wall = perf_counter() - t0
    batch = _result(batch_z, "batch_opt", M, problem.W, t_batch, with_volume)
    return _result(fused, "improved", M, problem.W, wall, with_volume, batch=batch, **info)


def fuse_sequential_stage(acc, nxt, W=None):
    """Fuse the running result with the next arrival.

    ``M = P_acc (P_acc + P_next)^{-1}`` with ``P = R R^T``.
    """
    if acc.dim != nxt.dim:
        raise DimensionError("stage operands have different dimensions")
    Pf = acc.generators @ acc.generators.T
    Pn = nxt.generators @ nxt.generators.T
    S = Pf + Pn
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_GRAM_COND:
        raise SingularSumError("stage sum matrix is singular")
    M = cho_solve(cho_factor(S), Pf).T
    n = acc.dim
    center = acc.center + M @ (nxt.center - acc.center)
    G = np.hstack([(np.eye(n) - M) @ acc.generators, M @ nxt.generators])
    return Zonotope(center, G), M


def stage_gradient(acc, nxt, M, W=None):
    """Gradient of the stage objective w.r.t. M at M."""
    Wm = as_weight(W, acc.dim).W
    Pf = acc.generators @ acc.generators.T
    Pn = nxt.generators @ nxt.generators.T
    return 2 * Wm @ M @ Pf - 2 * Wm @ Pf + 2 * Wm @ M @ Pn


def sequential_stages(problem):
    """Fold the stage rule over the arrival order; returns (zonotope, Ms, seconds).

    Stages only touch the n x n Gram matrices; the generator matrix is assembled once.
    """
    t0 = perf_counter()
    zs = problem.zonotopes
    order = problem.arrival
    n = problem.dim
    eye = np.eye(n)
    first = zs[order[0]]
    center = first.center
    Pf = first.generators @ first.generators.T
    Ms = []
    for i in order[1:]:
        R = zs[i].generators
        Pn = R @ R.T
        S = Pf + Pn
        eig = np.linalg.eigvalsh(S)
        if eig[0] <= 0 or eig[-1] / eig[0] > MAX_GRAM_COND:
            raise SingularSumError("stage sum matrix is singular")
        M = np.linalg.solve(S, Pf).T
        center = center + M @ (zs[i].center - center)
        # Gram of the stage result at the optimal M
        Pf = M @ Pn
        Ms.append(M)
    # coefficient of each operand: later (I - M) factors times its own M
    T = eye
    blocks = []
    for M, i in zip(reversed(Ms), reversed(order[1:])):
        blocks.append(T @ M @ zs[i].generators)
        T = T @ (eye - M)
    blocks.append(T @ first.generators)
    G = np.hstack(blocks[::-1])
    acc = Zonotope(center, G)
    return acc, Ms, perf_counter() - t0


def fuse_sequential(problem, improve_result=True, realization="auto", with_volume=True):
    t0 = perf_counter()
    acc, Ms, t_stages = sequential_stages(problem)
    info = {"stage_time": t_stages, "stages": acc}
    fused = acc
    if improve_result:
        bound = min(problem.local_norms())
        fused, extra = improve(acc, problem.zonotopes, problem.W, bound, realization,
                               problem.intersection())
        info.update(extra)
    return _result(fused, "sequential", Ms, problem.W, perf_counter() - t0, with_volume, **info)


class _VolumeObjective:
    """Volume of the batch-fused zonotope as a function of flattened weights."""

    def __init__(self, zs):
        self.n = zs[0].dim
        self.N1, self.N2 = batch_blocks(zs)
        self.subsets = subset_indices(self.N1.shape[1], self.n)
        self.evals = 0

    def __call__(self, flat):
        self.evals += 1
        R = self.N1 + flat.reshape(self.n, -1) @ self.N2
        if self.n == 1:
            return 2.0 * np.abs(R).sum()
        blocks = R[:, self.subsets].transpose(1, 0, 2)
        return (2.0 ** self.n) * np.abs(np.linalg.det(blocks)).sum()


def fuse_volume_optimal(problem, max_evals=2000, with_volume=True):
    """Local search for batch weights of least fused volume, started at the
    Frobenius-optimal weights."""
    n, L = problem.dim, problem.L
    total = sum(z.order for z in problem.zonotopes)
    if n > 4 or L > 4 or subset_indices(total, n).shape[0] > 50_000:
        raise ValueError("volume-optimal fusion is limited to n <= 4, L <= 4 and small orders")
    t0 = perf_counter()
    M0 = optimal_batch_weights(problem)
    obj = _VolumeObjective(problem.zonotopes)
    x0 = np.hstack(M0).ravel()
    f0 = obj(x0)
    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"maxfev": max_evals, "xatol": 1e-10,
                            "fatol": 1e-12 * max(f0, 1e-300), "adaptive": True})
    best = res.x if res.fun <= f0 else x0
    if not res.success:
        warnings.warn(f"volume search stopped after {obj.evals} evaluations: {res.message}",
                      ConvergenceWarning, stacklevel=2)
    Ms = best.reshape(n, (L - 1) * n)
    M = [Ms[:, i * n:(i + 1) * n] for i in range(L - 1)]
    fused = _batch_zonotope(problem.zonotopes, M)
    return _result(fused, "volume_opt", M, problem.W, perf_counter() - t0, with_volume,
                   evaluations=obj.evals, start_volume=f0)


def box_baseline(problem, with_volume=True):
    """Interval hull of the intersection of all local estimates."""
    t0 = perf_counter()
    verts = problem.intersection()
    fused = interval_hull(verts)
    return _result(fused, "box", [], problem.W, perf_counter() - t0, with_volume, vertices=verts)


def fuse(problem, method, **kwargs):
    """Dispatch on a method tag from METHODS."""
    if method == "batch_opt":
        return fuse_batch_optimal(problem, **kwargs)
    if method == "improved":
        return fuse_improved(problem, **kwargs)
    if method == "sequential":
        return fuse_sequential(problem, **kwargs)
    if method == "volume_opt":
        return fuse_volume_optimal(problem, **kwargs)
    if method == "box":
        return box_baseline(problem, **kwargs)
    raise ValueError(f"unknown fusion method {method!r}; choose from {METHODS}")
