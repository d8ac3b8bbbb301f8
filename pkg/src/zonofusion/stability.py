"""Boundedness checks for the local estimator error dynamics.

Only time-invariant closed loops are handled: the decay rate is an
eigenvalue computation and the ultimate bound is the limit of the scalar
recursion ``p(k) <= contraction * p(k-1) + phi``.
"""

from dataclasses import dataclass, asdict
import math
import warnings

import numpy as np

from ._validation import as_matrix
from .errors import ConvergenceWarning, DimensionError
from .local import innovation_factor
from .zonotope import Zonotope, as_weight, reduce, weighted_norm_sq
from scipy.linalg import cho_solve

STEADY_RTOL = 1e-10
STEADY_MAX_ITER = 10_000


def compute_mu(lambda_min, lambda_max, d, n):
    """Reduction-loss factor ``((lmax/lmin)(d+n) - 1)(d+n)``."""
    if lambda_min <= 0 or lambda_max < lambda_min:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    if d < 0 or n < 1:
        raise ValueError("need d >= 0 and n >= 1")
    return ((lambda_max / lambda_min) * (d + n) - 1) * (d + n)


def estimate_gamma(A, C, K, W=None):
    """Smallest gamma with ``gamma W >= At^T W At`` for ``At = (I - K C) A``.

    Computed as the squared spectral norm of ``F At F^{-1}`` where
    ``W = F^T F``.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("A must be square")
    C = as_matrix(C, "C", cols=n)
    K = as_matrix(K, "K", rows=n, cols=C.shape[0])
    Wm = as_weight(W, n)
    F = np.linalg.cholesky(Wm.W).T
    At = (np.eye(n) - K @ C) @ A
    M = F @ At @ np.linalg.inv(F)
    return float(np.linalg.norm(M, 2) ** 2)


def steady_state_gain(A, B, C, D, r, W=None, R0=None, rtol=STEADY_RTOL, max_iter=STEADY_MAX_ITER):
    """Iterate predict/gain/observe/reduce on the generators until the gain settles.

    Returns ``(K, R)`` at the last iterate; warns with ConvergenceWarning
    when the relative gain change never drops below ``rtol``.
    """
    A, B, C, D = (np.asarray(M, dtype=float) for M in (A, B, C, D))
    n = A.shape[0]
    Wm = as_weight(W, n)
    R = np.eye(n) if R0 is None else np.asarray(R0, dtype=float)
    K_prev = None
    origin = np.zeros(n)
    for _ in range(max_iter):
        Rp = np.hstack([A @ R, B])
        P = Rp @ Rp.T
        CP = C @ P
        K = cho_solve(innovation_factor(CP @ C.T + D @ D.T), CP).T
        obs = Zonotope(origin, np.hstack([(np.eye(n) - K @ C) @ Rp, -K @ D]))
        R = reduce(obs, r, Wm).generators
        if K_prev is not None:
            change = np.linalg.norm(K - K_prev) / max(np.linalg.norm(K), 1e-300)
            if change <= rtol:
                return K, R
        K_prev = K
    warnings.warn(f"gain did not settle within {max_iter} iterations", ConvergenceWarning, stacklevel=2)
    return K, R


@dataclass
class StabilityReport:
    gamma: float
    mu: float
    d: int
    r: int
    contraction: float
    phi: float
    ultimate_bound: float

    @property
    def bounded(self):
        return self.contraction < 1

    def to_record(self):
        rec = asdict(self)
        rec["bounded"] = self.bounded
        return rec


def check_ultimate_boundedness(A, B, C, D, K, r, d, W=None, gamma=None):
    """Ultimate-boundedness verdict for a time-invariant loop with gain K.

    ``d`` is the number of columns dropped by each reduction, ``r`` the
    reduced order. ``phi = ||(I-KC) A B||_W^2 + ||K D||_W^2`` follows the
    printed recursion.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    B = as_matrix(B, "B", rows=n)
    C = as_matrix(C, "C", cols=n)
    D = as_matrix(D, "D", rows=C.shape[0])
    K = as_matrix(K, "K", rows=n, cols=C.shape[0])
    Wm = as_weight(W, n)
    if gamma is None:
        gamma = estimate_gamma(A, C, K, Wm)
    mu = compute_mu(Wm.lambda_min, Wm.lambda_max, d, n)
    contraction = gamma * (1 + mu / (d + r))
    IKC = np.eye(n) - K @ C
    phi = weighted_norm_sq(IKC @ A @ B, Wm) + weighted_norm_sq(K @ D, Wm)
    bound = phi / (1 - contraction) if contraction < 1 else math.inf
    return StabilityReport(float(gamma), float(mu), int(d), int(r), float(contraction), float(phi), float(bound))


def analyze_sensor(plant, sensor, r, W=None, k=0):
    """Steady-state gain and boundedness report for one sensor of a
    time-invariant plant (matrices evaluated at step ``k``)."""
    A, B = plant.A_at(k), plant.B_at(k)
    C, D = sensor.C_at(k), sensor.D_at(k)
    K, _ = steady_state_gain(A, B, C, D, r, W, plant.initial.generators)
    d = B.shape[1] + D.shape[1]
    return check_ultimate_boundedness(A, B, C, D, K, r, d, W)
