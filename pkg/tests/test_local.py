import numpy as np
import pytest
from scipy.optimize import minimize

from zonofusion import (
    DimensionError,
    LocalEstimate,
    LocalEstimator,
    PlantModel,
    SensorModel,
    SingularInnovationError,
    Zonotope,
    contains_point,
    observe,
    optimal_gain,
    predict,
    step,
    weighted_norm_sq,
)
from zonofusion.sim import tracking_matrices

from conftest import sample_in


def gain_objective(K, Rp, C, D):
    n = Rp.shape[0]
    return weighted_norm_sq(np.hstack([(np.eye(n) - K @ C) @ Rp, -K @ D]))


def test_predict_examples():
    prev = LocalEstimate(0, 0, Zonotope([0, 0], np.eye(2)))
    out = predict(prev, PlantModel(np.eye(2), np.eye(2), prev.zonotope), 1)
    assert np.allclose(out.center, 0) and np.allclose(out.generators, np.hstack([np.eye(2)] * 2))
    B = np.array([[1.0], [2.0]])
    out = predict(Zonotope([3, 4], np.eye(2)), PlantModel(np.zeros((2, 2)), B, prev.zonotope), 1)
    assert np.allclose(out.center, 0) and np.allclose(out.generators, np.hstack([np.zeros((2, 2)), B]))


def test_predict_tracking_matrices():
    A, B, _ = tracking_matrices(1.0)
    assert np.allclose(A, [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]])
    assert np.allclose(B, [[0.5, 0], [1, 0], [0, 0.5], [0, 1]])
    z0 = Zonotope(np.zeros(4), np.eye(4))
    out = predict(z0, PlantModel(A, B, z0), 1)
    assert np.allclose(out.generators, np.hstack([A, B]))


def test_predict_uses_previous_step_matrices():
    seen = []
    plant = PlantModel(lambda k: seen.append(k) or np.eye(1), np.eye(1), Zonotope([0], [[1]]))
    predict(Zonotope([0], [[1]]), plant, 5)
    assert seen == [4]


def test_predict_dimension_error():
    plant = PlantModel(np.eye(3), np.eye(3), Zonotope(np.zeros(3), np.eye(3)))
    with pytest.raises(DimensionError):
        predict(Zonotope([0, 0], np.eye(2)), plant, 1)


def test_optimal_gain_examples():
    pred = Zonotope([0, 0], np.eye(2))
    K = optimal_gain(pred, SensorModel(0, np.eye(2), np.eye(2)), 1)
    assert np.allclose(K, 0.5 * np.eye(2))
    K = optimal_gain(pred, SensorModel(0, np.eye(2), 1e6 * np.eye(2)), 1)
    assert np.abs(K).max() <= 1e-5


def test_optimal_gain_matches_numerical_minimizer():
    rng = np.random.default_rng(1)
    Rp = rng.normal(size=(3, 5))
    C = rng.normal(size=(2, 3))
    D = rng.normal(size=(2, 2))
    K = optimal_gain(Zonotope(np.zeros(3), Rp), SensorModel(0, C, D), 1)
    best = gain_objective(K, Rp, C, D)
    res = minimize(lambda k: gain_objective(k.reshape(3, 2), Rp, C, D), np.zeros(6),
                   method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxfev": 40_000})
    assert abs(res.fun - best) / best <= 1e-6
    for _ in range(50):
        delta = rng.normal(size=K.shape)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert gain_objective(K + delta, Rp, C, D) >= best


def test_singular_innovation():
    pred = Zonotope([0, 0], np.zeros((2, 2)))
    with pytest.raises(SingularInnovationError):
        optimal_gain(pred, SensorModel(0, np.eye(2), np.zeros((2, 2))), 1)


def test_observe_examples():
    pred = Zonotope([0, 0], np.eye(2))
    sensor = SensorModel(0, np.eye(2), np.eye(2))
    out = observe(pred, sensor, [2, 0], 0.5 * np.eye(2), 1)
    assert np.allclose(out.center, [1, 0])
    assert np.allclose(out.generators, np.hstack([0.5 * np.eye(2), -0.5 * np.eye(2)]))
    out = observe(pred, sensor, [2, 0], np.zeros((2, 2)), 1)
    assert np.allclose(out.center, 0) and np.allclose(out.generators[:, :2], np.eye(2))
    assert np.allclose(out.generators[:, 2:], 0)


def test_observe_inclusion_monte_carlo():
    rng = np.random.default_rng(2)
    pred = Zonotope(rng.normal(size=3), rng.normal(size=(3, 5)))
    C, D = rng.normal(size=(2, 3)), np.diag([0.5, 1.5])
    sensor = SensorModel(0, C, D)
    K = optimal_gain(pred, sensor, 1)
    X = sample_in(pred, rng, 10_000)
    for i, x in enumerate(X.T):
        y = C @ x + D @ rng.uniform(-1, 1, 2)
        if i % 100 == 0 or i < 50:
            assert contains_point(observe(pred, sensor, y, K, 1), x)


def _stationary_norms(r):
    z0 = Zonotope([0, 0], 3 * np.eye(2))
    plant = PlantModel(np.eye(2), np.zeros((2, 0)), z0)
    sensor = SensorModel(0, np.eye(2), 0.1 * np.eye(2))
    est = LocalEstimate(0, 0, z0)
    norms = []
    for _ in range(10):
        est = step(est, plant, sensor, [0.0, 0.0], r=r)
        norms.append(weighted_norm_sq(est.zonotope.generators))
    return np.array(norms)


def test_step_stationary_plant_shrinks():
    # order 22 keeps every column for 10 steps, so only the gain acts
    norms = _stationary_norms(22)
    assert np.all(np.diff(norms) <= 1e-12)
    assert norms[-1] < 0.05 * 18


def test_step_stationary_plant_with_boxing_stays_small():
    # boxing may raise the norm by a bounded factor, so only a trend is checked
    norms = _stationary_norms(4)
    assert norms[-1] < norms[0] and norms.max() <= 0.05


def test_step_order_equals_dimension_gives_box():
    A, B, sensors = tracking_matrices()
    plant = PlantModel(A, B, Zonotope(np.zeros(4), np.eye(4)))
    est = LocalEstimate(0, 0, plant.initial)
    for k in range(5):
        est = step(est, plant, SensorModel(0, *sensors[0]), [0.0, 0.0], r=4)
        G = est.zonotope.generators
        assert est.k == k + 1 and np.allclose(G, np.diag(np.diag(G)))


def test_tracking_inclusion_every_step():
    A, B, sensors = tracking_matrices()
    rng = np.random.default_rng(3)
    z0 = Zonotope([0, 1, 0, 1], np.diag([5.0, 1, 5, 1]))
    plant = PlantModel(A, B, z0)
    ests = [LocalEstimator(plant, SensorModel(i, C, D), 6) for i, (C, D) in enumerate(sensors)]
    x = z0.center + z0.generators @ rng.uniform(-1, 1, 4)
    for _ in range(100):
        x = A @ x + B @ rng.uniform(-1, 1, 2)
        for e in ests:
            C, D = e.sensor.C_at(0), e.sensor.D_at(0)
            z = e.update(C @ x + D @ rng.uniform(-1, 1, 2)).zonotope
            assert z.order == 6 and contains_point(z, x)


def test_estimate_record_roundtrip():
    e = LocalEstimate(3, 7, Zonotope([1, 2], np.eye(2)))
    e2 = LocalEstimate.from_record(e.to_record())
    assert e2.sensor_id == 3 and e2.k == 7 and np.array_equal(e2.zonotope.generators, np.eye(2))
