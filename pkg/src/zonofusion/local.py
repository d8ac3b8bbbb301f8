"""Per-sensor recursive zonotopic estimator (predict, observe, reduce)."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._validation import as_matrix, as_vector
from .errors import DimensionError, SingularInnovationError
from .zonotope import Zonotope, as_weight, reduce

MAX_INNOVATION_COND = 1e12


def _at(M, k):
    return np.asarray(M(k) if callable(M) else M, dtype=float)


@dataclass(frozen=True)
class PlantModel:
    """``x(k+1) = A(k) x(k) + B(k) w(k)`` with ``w`` in the unit box.

    ``A`` and ``B`` are constant arrays or callables of the step index.
    """

    A: object
    B: object
    initial: Zonotope

    def A_at(self, k):
        return as_matrix(_at(self.A, k), "A", rows=self.initial.dim, cols=self.initial.dim)

    def B_at(self, k):
        return as_matrix(_at(self.B, k), "B", rows=self.initial.dim)

    @property
    def dim(self):
        return self.initial.dim


@dataclass(frozen=True)
class SensorModel:
    """``y_i(k) = C_i(k) x(k) + D_i(k) v_i(k)`` with ``v_i`` in the unit box."""

    id: int
    C: object
    D: object

    def C_at(self, k):
        return as_matrix(_at(self.C, k), "C")

    def D_at(self, k):
        C = self.C_at(k)
        return as_matrix(_at(self.D, k), "D", rows=C.shape[0])


@dataclass(frozen=True)
class LocalEstimate:
    sensor_id: int
    k: int
    zonotope: Zonotope

    @property
    def order(self):
        return self.zonotope.order

    def to_record(self):
        return {"sensor_id": self.sensor_id, "k": self.k, "zonotope": self.zonotope.to_record()}

    @classmethod
    def from_record(cls, rec):
        return cls(int(rec["sensor_id"]), int(rec["k"]), Zonotope.from_record(rec["zonotope"]))


def predict(prev, plant, k):
    """Prediction of the step-k set from the step-(k-1) estimate."""
    z = prev.zonotope if isinstance(prev, LocalEstimate) else prev
    A, B = plant.A_at(k - 1), plant.B_at(k - 1)
    if A.shape[1] != z.dim:
        raise DimensionError("plant and estimate dimensions differ")
    return Zonotope(A @ z.center, np.hstack([A @ z.generators, B]))


def innovation_factor(S):
    """Cholesky factor of a symmetric innovation matrix with a conditioning guard."""
    S = (S + S.T) / 2
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_INNOVATION_COND:
        raise SingularInnovationError(f"innovation matrix is singular (eigenvalues {eig[0]:.3g}..{eig[-1]:.3g})")
    try:
        return cho_factor(S)
    except LinAlgError as exc:
        raise SingularInnovationError(str(exc)) from exc


def optimal_gain(pred, sensor, k):
    """``K = P C^T (C P C^T + D D^T)^{-1}`` with ``P = R_p R_p^T``."""
    C, D = sensor.C_at(k), sensor.D_at(k)
    if C.shape[1] != pred.dim:
        raise DimensionError("sensor and estimate dimensions differ")
    P = pred.generators @ pred.generators.T
    CP = C @ P
    factor = innovation_factor(CP @ C.T + D @ D.T)
    return cho_solve(factor, CP).T


def observe(pred, sensor, y, K, k):
    C, D = sensor.C_at(k), sensor.D_at(k)
    y = as_vector(y, "y", dim=C.shape[0])
    K = as_matrix(K, "K", rows=pred.dim, cols=C.shape[0])
    n = pred.dim
    center = pred.center + K @ (y - C @ pred.center)
    G = np.hstack([(np.eye(n) - K @ C) @ pred.generators, -K @ D])
    return Zonotope(center, G)


def step(prev, plant, sensor, y, W=None, r=None):
    """One predict -> observe -> reduce cycle producing the estimate at ``prev.k + 1``.

    ``r`` defaults to the order of ``prev``; ``W`` defaults to the identity.
    """
    k = prev.k + 1
    pred = predict(prev, plant, k)
    K = optimal_gain(pred, sensor, k)
    obs = observe(pred, sensor, y, K, k)
    order = prev.order if r is None else r
    reduced = reduce(obs, order, as_weight(W, obs.dim))
    return LocalEstimate(prev.sensor_id, k, reduced)


class LocalEstimator:
    """Stateful wrapper that advances one sensor's estimate step by step."""

    def __init__(self, plant, sensor, order, W=None, initial=None):
        self.plant = plant
        self.sensor = sensor
        self.order = order
        self.W = as_weight(W, plant.dim)
        z0 = plant.initial if initial is None else initial
        self.estimate = LocalEstimate(sensor.id, 0, z0)
        self.last_gain = None

    def update(self, y):
        k = self.estimate.k + 1
        pred = predict(self.estimate, self.plant, k)
        K = optimal_gain(pred, self.sensor, k)
        obs = observe(pred, self.sensor, y, K, k)
        self.estimate = LocalEstimate(self.sensor.id, k, reduce(obs, self.order, self.W))
        self.last_gain = K
        return self.estimate
