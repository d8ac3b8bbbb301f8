"""Scenario runner and fusion benchmark.

Randomness comes from counter-based Philox streams keyed by ``(seed, name)``
so that every consumer (truth noise, each sensor, arrival order) draws from
its own stream and adding a consumer never shifts the others.
"""

from dataclasses import dataclass, field
import hashlib
import io
import json
import math
from importlib import resources
import warnings
import zlib

import numpy as np

from .errors import ConvergenceWarning, InclusionViolationError
from .fusion import METHODS, FusionProblem, fuse, sequential_stages, fuse_batch_optimal
from .geometry import halfspace_rep
from .local import LocalEstimator, PlantModel, SensorModel
from .zonotope import Zonotope, as_weight, contains_point, support, volume, weighted_norm_sq

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CSV_SCHEMA = "zonofusion-steps/1"
BENCH_SCHEMA = "zonofusion-bench/1"
TAU_SUP = 1e-8
TAU_FEAS = 1e-9
DZFE_METHODS = ("batch_opt", "improved", "sequential")
DEFAULT_METHODS = ("batch_opt", "improved", "sequential", "box")


class NoiseStream:
    """Uniform noise on [-1, 1] from a named Philox stream.

    With ``adversarial=True`` every component is -1 or +1.
    """

    def __init__(self, seed, name, adversarial=False):
        key = zlib.crc32(name.encode())
        ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,))
        self.rng = np.random.Generator(np.random.Philox(ss))
        self.name = name
        self.adversarial = adversarial

    def draw(self, dim):
        if self.adversarial:
            return self.rng.choice([-1.0, 1.0], size=dim)
        return self.rng.uniform(-1.0, 1.0, size=dim)


def sample_noise(stream, dims):
    return stream.draw(dims)


def tracking_matrices(T=1.0):
    A = np.array([[1, T, 0, 0], [0, 1, 0, 0], [0, 0, 1, T], [0, 0, 0, 1]], dtype=float)
    B = np.array([[T**2 / 2, 0], [T, 0], [0, T**2 / 2], [0, T]], dtype=float)
    sensors = [
        (np.array([[1.0, 0, 0, 0], [0, 0, 1, 0]]), np.diag([2.0, 1.0])),
        (np.array([[0.0, 0, 1, 0], [1, 0, 0, 0]]), np.diag([1.0, 2.0])),
    ]
    return A, B, sensors


def load_zono2d_fixture():
    """Three planar zonotopes with a common point (synthetic, illustrative)."""
    text = resources.files("zonofusion").joinpath("data/zono2d.json").read_text()
    return [Zonotope.from_record(rec) for rec in json.loads(text)["zonotopes"]]


@dataclass
class ScenarioConfig:
    name: str
    A: np.ndarray
    B: np.ndarray
    sensors: list
    c0: np.ndarray
    R0: np.ndarray
    horizon: int = 200
    T: float = 1.0
    r: int = 6
    W: np.ndarray = None
    seed: int = 0
    arrival: object = "fixed"
    methods: tuple = DEFAULT_METHODS
    adversarial: bool = False
    strict: bool = True
    with_volume: bool = True

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.c0 = np.asarray(self.c0, dtype=float)
        self.R0 = np.asarray(self.R0, dtype=float)
        self.sensors = [(np.asarray(C, dtype=float), np.asarray(D, dtype=float)) for C, D in self.sensors]
        n = self.A.shape[0]
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.r < n:
            raise ValueError(f"reduction order {self.r} is below the state dimension {n}")
        if len(self.sensors) < 2:
            raise ValueError("a scenario needs at least two sensors")
        self.methods = tuple(self.methods)
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not (self.arrival in ("fixed", "random") or sorted(self.arrival) == list(range(len(self.sensors)))):
            raise ValueError("arrival must be 'fixed', 'random' or a permutation of sensor indices")
        self.weight = as_weight(self.W, n)

    @property
    def dim(self):
        return self.A.shape[0]

    def plant(self):
        return PlantModel(self.A, self.B, Zonotope(self.c0, self.R0))

    def sensor_models(self):
        return [SensorModel(i, C, D) for i, (C, D) in enumerate(self.sensors)]


def tracking_preset(T=1.0, **overrides):
    """Two-sensor constant-velocity tracking. The initial set is illustrative."""
    A, B, sensors = tracking_matrices(T)
    cfg = dict(name="tracking", A=A, B=B, sensors=sensors, T=T,
               c0=[0.0, 1.0, 0.0, 1.0], R0=np.diag([5.0, 1.0, 5.0, 1.0]), r=6)
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


PRESETS = {"tracking": tracking_preset}


def load_config(path, **overrides):
    """Read a TOML scenario file; keys override the named preset (default tracking)."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return config_from_mapping(doc, **overrides)


def config_from_mapping(doc, **overrides):
    doc = dict(doc)
    preset = doc.pop("preset", "tracking")
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    kw = {}
    T = float(doc.pop("T", 1.0))
    plant = doc.pop("plant", {})
    if "A" in plant:
        kw["A"] = plant["A"]
    if "B" in plant:
        kw["B"] = plant["B"]
    init = doc.pop("initial", {})
    if "center" in init:
        kw["c0"] = init["center"]
    if "generators" in init:
        kw["R0"] = init["generators"]
    if "sensors" in doc:
        kw["sensors"] = [(s["C"], s["D"]) for s in doc.pop("sensors")]
    if "weight" in doc:
        kw["W"] = doc.pop("weight")["W"]
    for key in ("horizon", "r", "seed", "arrival", "methods", "adversarial", "strict", "with_volume", "name"):
        if key in doc:
            kw[key] = doc.pop(key)
    if doc:
        raise ValueError(f"unknown config keys {sorted(doc)}")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return PRESETS[preset](T=T, **kw)


@dataclass
class StepRecord:
    k: int
    truth: np.ndarray
    locals: list
    methods: dict = field(default_factory=dict)

    def violations(self):
        out = []
        for i, rec in enumerate(self.locals):
            if not rec["inclusion"]:
                out.append(f"truth outside local estimate {i}")
        for m, rec in self.methods.items():
            for flag in ("inclusion", "superiority", "nesting"):
                if not rec[flag]:
                    out.append(f"{flag} failed for {m}")
        return out


def _nested(inner, outer, tol=TAU_FEAS):
    """Support-certified ``inner ⊆ outer`` on the facet normals of ``outer``."""
    h = halfspace_rep(outer.compact())
    slack = tol * max(inner.scale(), outer.scale())
    return all(support(inner, n) <= support(outer, n) + slack for n in h.H)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    records: list
    columns: list
    rows: list

    def csv_text(self):
        buf = io.StringIO()
        buf.write(f"# {CSV_SCHEMA} scenario={self.config.name} seed={self.config.seed}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def digest(self):
        """SHA-256 of the CSV with wall-time columns removed."""
        keep = [i for i, c in enumerate(self.columns) if not c.endswith("wall_time")]
        h = hashlib.sha256()
        h.update(",".join(self.columns[i] for i in keep).encode())
        for row in self.rows:
            h.update(("\n" + ",".join(_fmt(row[i]) for i in keep)).encode())
        return h.hexdigest()

    def violations(self):
        return [(rec.k, v) for rec in self.records for v in rec.violations()]

    def dat_text(self):
        """gnuplot blocks (one per local estimate and method): k, norm2, volume."""
        buf = io.StringIO()
        names = [f"local{i}" for i in range(len(self.config.sensors))] + list(self.config.methods)
        for j, name in enumerate(names):
            if j:
                buf.write("\n\n")
            buf.write(f"# {name}\n# k weighted_norm_sq volume\n")
            for rec in self.records:
                src = rec.locals[j] if j < len(rec.locals) else rec.methods[name]
                buf.write(f"{rec.k} {src['norm_sq']:.17g} {src['volume']:.17g}\n")
        return buf.getvalue()


def run_scenario(cfg, progress=None):
    """Simulate truth and sensors, run every local estimator and fusion method.

    With ``cfg.strict`` the first invariant violation raises
    InclusionViolationError carrying the step index.
    """
    n = cfg.dim
    W = cfg.weight
    plant = cfg.plant()
    sensors = cfg.sensor_models()
    L = len(sensors)
    w_stream = NoiseStream(cfg.seed, "process", cfg.adversarial)
    v_streams = [NoiseStream(cfg.seed, f"sensor{i}", cfg.adversarial) for i in range(L)]
    x0_stream = NoiseStream(cfg.seed, "initial")
    order_stream = NoiseStream(cfg.seed, "arrival")
    estimators = [LocalEstimator(plant, s, cfg.r, W) for s in sensors]

    x = cfg.c0 + cfg.R0 @ x0_stream.draw(cfg.R0.shape[1])
    columns = ["k"] + [f"x{j}" for j in range(n)]
    for i in range(L):
        columns += [f"local{i}_norm_sq", f"local{i}_volume", f"local{i}_inclusion"]
    for m in cfg.methods:
        columns += [f"{m}_norm_sq", f"{m}_volume", f"{m}_inclusion",
                    f"{m}_superiority", f"{m}_nesting", f"{m}_wall_time"]
    records, rows = [], []

    for k in range(1, cfg.horizon + 1):
        x = cfg.A @ x + cfg.B @ w_stream.draw(cfg.B.shape[1])
        locals_ = []
        for est, s, vs in zip(estimators, sensors, v_streams):
            C, D = s.C_at(k), s.D_at(k)
            y = C @ x + D @ vs.draw(D.shape[1])
            z = est.update(y).zonotope
            locals_.append({
                "norm_sq": weighted_norm_sq(z.generators, W),
                "volume": volume(z) if cfg.with_volume else math.nan,
                "inclusion": contains_point(z, x),
            })
        if cfg.arrival == "fixed":
            arrival = tuple(range(L))
        elif cfg.arrival == "random":
            arrival = tuple(order_stream.rng.permutation(L))
        else:
            arrival = tuple(cfg.arrival)
        problem = FusionProblem([e.estimate for e in estimators], W, arrival)
        best_local = min(r["norm_sq"] for r in locals_)
        rec = StepRecord(k, x.copy(), locals_)
        for m in cfg.methods:
            res = fuse(problem, m, with_volume=cfg.with_volume)
            norm = res.metrics["weighted_norm_sq"]
            sup = True
            if m in DZFE_METHODS:
                sup = norm <= best_local + TAU_SUP * max(1.0, best_local)
            nest = True
            if m == "improved":
                nest = _nested(res.fused, res.details["batch"].fused)
            elif m == "sequential" and "hrep" in res.details:
                nest = _nested(res.fused, res.details["stages"])
            rec.methods[m] = {
                "norm_sq": norm,
                "volume": res.metrics["volume"],
                "inclusion": contains_point(res.fused, x),
                "superiority": sup,
                "nesting": nest,
                "wall_time": res.metrics["wall_time"],
            }
        row = [k] + list(x)
        for r in locals_:
            row += [r["norm_sq"], r["volume"], r["inclusion"]]
        for m in cfg.methods:
            r = rec.methods[m]
            row += [r["norm_sq"], r["volume"], r["inclusion"], r["superiority"], r["nesting"], r["wall_time"]]
        records.append(rec)
        rows.append(row)
        if cfg.strict:
            bad = rec.violations()
            if bad:
                raise InclusionViolationError(k, "; ".join(bad))
        if progress is not None:
            progress(k)
    return ScenarioRun(cfg, records, columns, rows)


def random_fusion_instance(rng, n, L, r, spread=1.0):
    """L random zonotopes of order r sharing a random common point."""
    x = rng.normal(size=n) * spread
    zs = []
    for _ in range(L):
        R = rng.normal(size=(n, r))
        u = rng.uniform(-1, 1, size=r)
        zs.append(Zonotope(x - R @ u, R))
    return zs, x


def bench_fusion(orders, Ls, repetitions=5, dim=2, methods=("batch_opt", "sequential", "volume_opt"),
                 seed=0, volume_budget=2000):
    """Median wall times per method and size on random intersecting instances.

    ``sequential`` is timed on its fusion stages alone (no improvement) so it
    is comparable with the closed-form batch rule. Returns a list of dicts.
    """
    rows = []
    for L in Ls:
        for r in orders:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(L, r))))
            zs, _ = random_fusion_instance(rng, dim, L, r)
            problem = FusionProblem(zs)
            for m in methods:
                if m == "volume_opt" and (L > 4 or dim > 4):
                    continue
                times, norm = [], None
                for _ in range(repetitions):
                    if m == "sequential":
                        z, _, t = sequential_stages(problem)
                    elif m == "batch_opt":
                        res = fuse_batch_optimal(problem, with_volume=False)
                        z, t = res.fused, res.metrics["wall_time"]
                    elif m == "volume_opt":
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore", ConvergenceWarning)
                            res = fuse(problem, m, with_volume=False, max_evals=volume_budget)
                        z, t = res.fused, res.metrics["wall_time"]
                    else:
                        res = fuse(problem, m, with_volume=False)
                        z, t = res.fused, res.metrics["wall_time"]
                    times.append(t)
                    norm = weighted_norm_sq(z.generators)
                rows.append({"dim": dim, "L": L, "r": r, "method": m,
                             "median_wall_time": float(np.median(times)),
                             "repetitions": repetitions, "norm_sq": norm})
    return rows


def bench_csv(rows):
    cols = ["dim", "L", "r", "method", "median_wall_time", "repetitions", "norm_sq"]
    buf = io.StringIO()
    buf.write(f"# {BENCH_SCHEMA}\n" + ",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _fmt(v) for v in (row[c] for c in cols)) + "\n")
    return buf.getvalue()
