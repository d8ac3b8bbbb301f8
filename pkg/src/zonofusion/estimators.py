"""scikit-learn style wrappers around the local estimator and the fusion rules.

These are conveniences for pipelines and parameter handling; the functional
API in ``local`` and ``fusion`` is the primary interface.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fusion import METHODS, FusionProblem, fuse, fuse_batch
from .local import LocalEstimator, PlantModel, SensorModel
from .zonotope import Zonotope, contains_point, weighted_norm_sq


def _check_zonotopes(Z):
    zs = list(Z)
    if len(zs) < 2 or not all(isinstance(z, Zonotope) for z in zs):
        raise ValueError("expected a sequence of at least two Zonotope objects")
    return zs


class LocalZonotopicEstimator(BaseEstimator):
    """Run one sensor's recursive zonotopic estimator over a measurement sequence.

    ``fit(Y)`` consumes ``Y`` of shape (steps, m); ``predict`` returns the
    estimate centers, one row per step.
    """

    def __init__(self, A=None, B=None, C=None, D=None, c0=None, R0=None, order=None, W=None):
        self.A = A
        self.B = B
        self.C = C
        self.D = D
        self.c0 = c0
        self.R0 = R0
        self.order = order
        self.W = W

    def fit(self, Y, y=None):
        A = check_array(self.A)
        n = A.shape[0]
        C = check_array(self.C)
        Y = check_array(Y)
        if Y.shape[1] != C.shape[0]:
            raise ValueError(f"measurements have {Y.shape[1]} columns, sensor outputs {C.shape[0]}")
        plant = PlantModel(A, check_array(self.B), Zonotope(np.asarray(self.c0, float), check_array(self.R0)))
        sensor = SensorModel(0, C, check_array(self.D))
        order = n if self.order is None else int(self.order)
        est = LocalEstimator(plant, sensor, order, self.W)
        self.estimates_ = [est.update(row).zonotope for row in Y]
        self.gains_ = est.last_gain
        self.n_features_in_ = Y.shape[1]
        return self

    def predict(self, Y=None):
        check_is_fitted(self, "estimates_")
        return np.array([z.center for z in self.estimates_])

    def generator_norms(self):
        check_is_fitted(self, "estimates_")
        return np.array([weighted_norm_sq(z.generators, self.W) for z in self.estimates_])


class ZonotopeFusion(TransformerMixin, BaseEstimator):
    """Fuse a set of local zonotopes.

    ``fit(Z)`` solves the chosen fusion rule on the zonotopes ``Z``;
    ``transform(Z)`` fuses a new set with the fitted batch weights;
    ``predict(X)`` tests membership of the rows of X in the fused set.
    """

    def __init__(self, method="batch_opt", W=None):
        self.method = method
        self.W = W

    def fit(self, Z, y=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        problem = FusionProblem(_check_zonotopes(Z), self.W)
        self.result_ = fuse(problem, self.method)
        self.fused_ = self.result_.fused
        self.weights_ = self.result_.parameters
        self.n_features_in_ = problem.dim
        return self

    def transform(self, Z):
        check_is_fitted(self, "result_")
        if self.method not in ("batch_opt", "volume_opt"):
            raise ValueError("transform reuses batch weights; fit with batch_opt or volume_opt")
        problem = FusionProblem(_check_zonotopes(Z), self.W)
        return fuse_batch(problem, self.weights_).fused

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return np.array([contains_point(self.fused_, x) for x in X])
