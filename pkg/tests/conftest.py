import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.optimize import linprog

from zonofusion import Zonotope

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_zonotope(rng, n, r, spread=1.0):
    return Zonotope(rng.normal(size=n) * spread, rng.normal(size=(n, r)))


def intersecting(rng, n, L, r):
    """L random zonotopes of order r that share a common point x."""
    x = rng.normal(size=n)
    zs = []
    for _ in range(L):
        R = rng.normal(size=(n, r))
        zs.append(Zonotope(x - R @ rng.uniform(-1, 1, r), R))
    return zs, x


def lp_member(z, x, tol=1e-9):
    """Independent membership oracle: min ||u||_inf s.t. c + R u = x."""
    R = z.generators
    r = R.shape[1]
    cost = np.r_[np.zeros(r), 1.0]
    A_ub = np.block([[np.eye(r), -np.ones((r, 1))], [-np.eye(r), -np.ones((r, 1))]])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * r),
                  A_eq=np.hstack([R, np.zeros((z.dim, 1))]), b_eq=x - z.center,
                  bounds=[(None, None)] * r + [(0, None)], method="highs")
    return res.status == 0 and res.x[-1] <= 1 + tol


def sample_in(z, rng, k):
    """k points c + R u with u uniform in the unit box (columns)."""
    U = rng.uniform(-1, 1, size=(z.order, k))
    return z.center[:, None] + z.generators @ U


def sample_in_all(zs, rng, k, tries=20_000):
    """Rejection sample (rows) of points in the intersection, drawn from the first zonotope."""
    from zonofusion import halfspace_rep
    P = sample_in(zs[0], rng, tries)
    ok = np.ones(tries, dtype=bool)
    for z in zs[1:]:
        h = halfspace_rep(z)
        ok &= np.all(h.H @ P <= h.b[:, None], axis=0)
    return P[:, ok][:, :k].T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
