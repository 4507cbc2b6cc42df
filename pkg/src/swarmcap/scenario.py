"""Scenario configuration, random-swarm baseline and experiment runners.

Every experiment writes plain CSV files (fixed headers, floats with 17
significant digits) plus ``manifest.json`` holding the full configuration,
seed, file list and wall-clock timings. Timings live only in the manifest so
that CSV outputs are byte-identical across repeated runs.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bcd import BcdSettings, formation_objective, optimize_formation
from .constraints import FormationConstraints, validate_formation
from .errors import FeasibilityError, InvalidArgumentError
from .geometry import ArrayGeometry
from .metrics import (
    SwarmFormation,
    channel_matrix,
    interference_matrix,
    pairwise_distances,
    sic_sum_capacity,
    tin_sum_rate,
)
from .orthogonal import (
    AngularSector,
    FloorMode,
    asymptotic_capacity,
    closed_form_capacity,
    n_orthogonal,
    n_upa_asymptotic,
    n_upa_bounds,
    n_upa_exact,
)
from .sca import SCASettings

logger = logging.getLogger(__name__)

__all__ = [
    "ScenarioConfig",
    "ResultRow",
    "SCHEMES",
    "PRESETS",
    "FIGURES",
    "random_swarm",
    "proposed_formations",
    "capacity_upper_bound",
    "trial_rng",
    "run_experiment",
    "write_csv",
    "format_float",
]

SCHEMA_VERSION = 1
SCHEMES = ("RandomSwarm", "ProposedSIC", "ProposedTIN", "CapacityUB")
EXPERIMENTS = ("characterize", "optimize", "sweep", "cdf", "scaling")
_MAX_ATTEMPTS = 10_000


def format_float(x) -> str:
    """Lossless, locale-free float rendering."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class ScenarioConfig:
    """All inputs of one experiment. Angles in degrees, distances in meters."""

    array: str = "ULA"
    m_y: int = 16
    m_z: int = 1
    theta_deg: float = 0.0
    phi_deg: float = 90.0
    r_min: float = 50.0
    r_max: float = 500.0
    d_min: float = 0.0
    d_max: float = math.inf
    snr_db: float = 20.0
    r0: float = 100.0
    k_values: list = field(default_factory=lambda: [16])
    trials: int = 1
    seed: int = 0
    floor_mode: str = "strict"
    oversampling: int = 4
    max_rounds: int = 20
    rel_tol: float = 1e-4
    sca_max_iters: int = 30
    sca_tol: float = 1e-5
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        self.array = str(self.array).upper()
        if self.array not in ("ULA", "UPA"):
            raise InvalidArgumentError(f"array must be ULA or UPA, got {self.array!r}")
        if self.array == "ULA":
            self.m_z = 1
        if isinstance(self.k_values, int):
            self.k_values = [self.k_values]
        self.k_values = [int(k) for k in self.k_values]
        if not self.k_values or min(self.k_values) < 1:
            raise InvalidArgumentError("K values must be positive")
        if not 0 < self.r_min <= self.r_max:
            raise InvalidArgumentError("need 0 < r_min <= r_max")
        if not 0 <= self.d_min <= self.d_max:
            raise InvalidArgumentError("need 0 <= d_min <= d_max")
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be a 64-bit unsigned integer")
        FloorMode.parse(self.floor_mode)

    # derived objects -------------------------------------------------
    @property
    def geometry(self) -> ArrayGeometry:
        if self.array == "ULA":
            return ArrayGeometry.ula(self.m_y)
        return ArrayGeometry.upa(self.m_y, self.m_z)

    @property
    def sector(self) -> AngularSector:
        theta = 0.0 if self.array == "ULA" else self.theta_deg
        return AngularSector.from_degrees(theta, self.phi_deg)

    @property
    def constraints(self) -> FormationConstraints:
        return FormationConstraints(self.r_min, self.r_max, self.sector, self.d_min, self.d_max)

    @property
    def ref_snr(self) -> float:
        """Linear reference SNR at ``r0``."""
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def rho(self) -> float:
        """SNR at ``r_min`` before array gain."""
        return self.ref_snr * self.r0**2 / self.r_min**2

    @property
    def mode(self) -> FloorMode:
        return FloorMode.parse(self.floor_mode)

    def bcd_settings(self, objective: str) -> BcdSettings:
        return BcdSettings(
            max_rounds=self.max_rounds,
            rel_tol=self.rel_tol,
            objective=objective,
            oversampling=self.oversampling,
            floor_mode=self.mode,
            sca=SCASettings(max_outer_iters=self.sca_max_iters, objective_tol=self.sca_tol),
        )

    # serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["d_max"] = format_float(self.d_max) if math.isinf(self.d_max) else self.d_max
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if isinstance(data.get("d_max"), str):
            data["d_max"] = float(data["d_max"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    metric: str
    K: int
    trial: int
    value: float
    wall_ms: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if not self.value >= 0:
            raise InvalidArgumentError("rates are nonnegative")


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, key)``; stable under trial count changes."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


# ---------------------------------------------------------------------------
# random baseline


def _uniform_angles(cfg: ScenarioConfig, rng, n):
    sec = cfg.sector
    th = rng.uniform(-sec.theta_max, sec.theta_max, n) if cfg.array == "UPA" else np.zeros(n)
    ph = rng.uniform(-sec.phi_max, sec.phi_max, n)
    return th, ph


def random_swarm(cfg: ScenarioConfig, rng: np.random.Generator, K: Optional[int] = None) -> SwarmFormation:
    """Benchmark formation with uncontrolled positions.

    Without separation limits every terminal sits at ``r_min`` with i.i.d.
    uniform angles. Otherwise terminals are drawn one by one, uniformly over
    the range/angle box, rejecting draws that break a separation limit with
    an earlier terminal.
    """
    K = cfg.k_values[0] if K is None else K
    cons = cfg.constraints
    if not cons.has_separation:
        th, ph = _uniform_angles(cfg, rng, K)
        return SwarmFormation.from_arrays(np.full(K, cfg.r_min), th, ph, cfg.ref_snr)
    pos = np.empty((0, 3))
    rs, ths, phs = [], [], []
    for k in range(K):
        for _ in range(_MAX_ATTEMPTS):
            r = rng.uniform(cfg.r_min, cfg.r_max)
            th, ph = _uniform_angles(cfg, rng, 1)
            q = r * np.array([np.cos(th[0]) * np.cos(ph[0]), np.cos(th[0]) * np.sin(ph[0]), np.sin(th[0])])
            if pos.shape[0]:
                dist = np.linalg.norm(pos - q, axis=1)
                if dist.min() < cons.d_min or dist.max() > cons.d_max:
                    continue
            break
        else:
            raise FeasibilityError(
                f"random swarm: no feasible position for terminal {k} after {_MAX_ATTEMPTS} draws",
                family="C4/C5",
            )
        pos = np.vstack([pos, q])
        rs.append(r)
        ths.append(th[0])
        phs.append(ph[0])
    return SwarmFormation.from_arrays(rs, ths, phs, cfg.ref_snr)


# ---------------------------------------------------------------------------
# evaluation helpers


def _rates(cfg: ScenarioConfig, f: SwarmFormation):
    H = channel_matrix(cfg.geometry, f, cfg.r0)
    return sic_sum_capacity(H, f.ref_snr), tin_sum_rate(H, f.ref_snr)


def capacity_upper_bound(cfg: ScenarioConfig, K: int) -> float:
    """``K log2(1 + rho M)``: exact optimum while K fits the orthogonal
    set, an interference-free bound beyond it."""
    return K * math.log2(1.0 + cfg.rho * cfg.geometry.size)


def _optimize(cfg: ScenarioConfig, K: int, objective: str, initial=None):
    t = time.perf_counter()
    f, trace = optimize_formation(
        cfg.geometry,
        cfg.sector,
        K,
        cfg.constraints,
        cfg.ref_snr,
        cfg.r0,
        cfg.bcd_settings(objective),
        initial=initial,
    )
    return f, trace, 1e3 * (time.perf_counter() - t)


def proposed_formations(cfg: ScenarioConfig, K: int):
    """Optimised formations for TIN and SIC.

    The SIC optimiser is started twice, from the staggered seed and from the
    TIN optimum, and keeps the better end point: any formation's capacity is
    at least its TIN rate, so the SIC scheme is never beaten by the TIN one.
    Returns ``{scheme: (formation, trace, wall_ms)}``.
    """
    tin = _optimize(cfg, K, "TIN")
    sic = _optimize(cfg, K, "SIC")
    warm = _optimize(cfg, K, "SIC", initial=tin[0])
    if warm[1].final > sic[1].final:
        sic = (warm[0], warm[1], sic[2] + warm[2])
    else:
        sic = (sic[0], sic[1], sic[2] + warm[2])
    return {"ProposedSIC": sic, "ProposedTIN": tin}


def _random_trial(args):
    cfg, K, trial = args
    t = time.perf_counter()
    f = random_swarm(cfg, trial_rng(cfg.seed, K, trial), K)
    sic, tin = _rates(cfg, f)
    ms = 1e3 * (time.perf_counter() - t)
    return [
        ResultRow("RandomSwarm", "SIC", K, trial, sic, ms),
        ResultRow("RandomSwarm", "TIN", K, trial, tin, ms),
    ]


def _random_rows(cfg: ScenarioConfig, K: int) -> list:
    jobs = [(cfg, K, t) for t in range(cfg.trials)]
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_random_trial, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
    else:
        chunks = [_random_trial(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def _proposed_rows(cfg: ScenarioConfig, K: int):
    """Rows for the deterministic schemes, replicated over trials."""
    rows, forms, traces = [], {}, {}
    for scheme, (f, trace, ms) in proposed_formations(cfg, K).items():
        obj = scheme[len("Proposed"):]
        value = formation_objective(cfg.geometry, f, cfg.r0, obj)
        forms[scheme], traces[scheme] = f, trace
        rows += [ResultRow(scheme, obj, K, t, value, ms) for t in range(cfg.trials)]
    ub = capacity_upper_bound(cfg, K)
    rows += [ResultRow("CapacityUB", "SIC", K, t, ub) for t in range(cfg.trials)]
    return rows, forms, traces


def _sort_rows(rows):
    order = {s: i for i, s in enumerate(SCHEMES)}
    return sorted(rows, key=lambda r: (r.K, order[r.scheme], r.metric, r.trial))


# ---------------------------------------------------------------------------
# writers


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _write_manifest(out: Path, cfg: ScenarioConfig, experiment: str, files, timings, extra=None) -> Path:
    from . import __version__

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "rng": "PCG64 via SeedSequence(seed, spawn_key=(K, trial))",
        "files": sorted(str(Path(f).name) for f in files),
        "timings_ms": timings,
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _formation_tables(out: Path, cfg: ScenarioConfig, forms: dict) -> list:
    loc, inter, sep = [], [], []
    for scheme, f in forms.items():
        for k, pl in enumerate(f.placements):
            loc.append([scheme, k, float(pl.r), math.degrees(pl.dir.theta), math.degrees(pl.dir.phi)])
        C = interference_matrix(cfg.geometry, f)
        for i in range(C.shape[0]):
            for j in range(C.shape[1]):
                inter.append([scheme, i, j, float(C[i, j])])
        ii, jj, dist = pairwise_distances(f)
        for n, (i, j, d) in enumerate(zip(ii, jj, dist)):
            sep.append([scheme, n, int(i), int(j), float(d)])
    return [
        write_csv(out / "locations.csv", ["scheme", "uav", "range_m", "theta_deg", "phi_deg"], loc),
        write_csv(out / "interference.csv", ["scheme", "row", "col", "coefficient"], inter),
        write_csv(out / "separations.csv", ["scheme", "pair", "i", "j", "distance_m"], sep),
    ]


# ---------------------------------------------------------------------------
# experiments


def _characterize(cfg: ScenarioConfig, out: Path):
    g, sec, mode = cfg.geometry, cfg.sector, cfg.mode
    n = n_orthogonal(g, sec, mode)
    rows = [
        ["array", str(g)],
        ["M", g.size],
        ["floor_mode", mode.name],
        ["n_orthogonal", n],
        ["rho", float(cfg.rho)],
        ["capacity_closed_form", float(closed_form_capacity(g, sec, None, cfg.rho, mode))],
    ]
    if g.kind == "UPA":
        b = n_upa_bounds(g, sec)
        rows += [
            ["n_upa_lower", float(b.lower)],
            ["n_upa_upper", float(b.upper)],
            ["bounds_in_regime", int(b.in_regime)],
            ["n_upa_asymptotic", float(n_upa_asymptotic(g.size, sec))],
            ["capacity_asymptotic", float(asymptotic_capacity(g.size, sec, cfg.rho))],
        ]
    return [write_csv(out / "characterize.csv", ["quantity", "value"], rows)], {}


def _scaling(cfg: ScenarioConfig, out: Path, m_y_values=(5, 10, 20, 40, 80)):
    sec = cfg.sector
    rows = []
    for m_y in m_y_values:
        g = ArrayGeometry.upa(m_y, cfg.m_z)
        b = n_upa_bounds(g, sec)
        M = g.size
        rows.append([
            m_y, cfg.m_z, M,
            n_upa_exact(g, sec, cfg.mode) / M,
            b.lower / M,
            b.upper / M,
            n_upa_asymptotic(M, sec) / M,
        ])
    header = ["m_y", "m_z", "M", "exact_ratio", "lower_ratio", "upper_ratio", "asymptotic_ratio"]
    return [write_csv(out / "count_scaling.csv", header, rows)], {}


def _optimize_single(cfg: ScenarioConfig, out: Path):
    K = cfg.k_values[0]
    rows, forms, traces = _proposed_rows(cfg.replace(trials=1), K)
    rnd = random_swarm(cfg, trial_rng(cfg.seed, K, 0), K)
    forms = {"RandomSwarm": rnd, **forms}
    sic, tin = _rates(cfg, rnd)
    rows += [ResultRow("RandomSwarm", "SIC", K, 0, sic), ResultRow("RandomSwarm", "TIN", K, 0, tin)]
    ub = capacity_upper_bound(cfg, K)
    conv = []
    n_rounds = max(len(t.objectives) for t in traces.values())
    for scheme, tr in traces.items():
        for i, v in enumerate(tr.objectives):
            conv.append([scheme, i, float(v)])
    conv += [["CapacityUB", i, float(ub)] for i in range(n_rounds)]
    files = [
        write_csv(out / "convergence.csv", ["scheme", "round", "objective"], conv),
        write_csv(
            out / "summary.csv",
            ["scheme", "metric", "K", "value"],
            [[r.scheme, r.metric, r.K, float(r.value)] for r in _sort_rows(rows)],
        ),
    ]
    files += _formation_tables(out, cfg, forms)
    timings = {r.scheme: r.wall_ms for r in rows if r.scheme.startswith("Proposed")}
    extra = {
        "termination": {s: t.reason for s, t in traces.items()},
        "validation": {s: str(validate_formation(f, cfg.constraints)) for s, f in forms.items()},
    }
    return files, {"timings": timings, **extra}


def _sweep(cfg: ScenarioConfig, out: Path):
    all_rows, timings = [], {}
    for K in cfg.k_values:
        rows, _, _ = _proposed_rows(cfg, K)
        rows += _random_rows(cfg, K)
        all_rows += rows
        timings[str(K)] = {r.scheme: r.wall_ms for r in rows if r.trial == 0}
    groups = {}
    for r in _sort_rows(all_rows):
        groups.setdefault((r.K, r.scheme, r.metric), []).append(r.value)
    table = [[K, s, m, float(np.mean(v)), len(v)] for (K, s, m), v in groups.items()]
    files = [write_csv(out / "rate_vs_k.csv", ["K", "scheme", "metric", "mean_rate", "trials"], table)]
    return files, {"timings": timings}


def _cdf(cfg: ScenarioConfig, out: Path):
    K = cfg.k_values[0]
    rows, _, _ = _proposed_rows(cfg, K)
    rows += _random_rows(cfg, K)
    groups = {}
    for r in _sort_rows(rows):
        groups.setdefault((r.scheme, r.metric), []).append(r.value)
    table = []
    for (s, m), vals in groups.items():
        vals = sorted(vals)
        n = len(vals)
        table += [[s, m, K, i, float(v), (i + 1) / n] for i, v in enumerate(vals)]
    files = [write_csv(out / "rate_cdf.csv", ["scheme", "metric", "K", "rank", "rate", "cdf"], table)]
    return files, {"timings": {r.scheme: r.wall_ms for r in rows if r.trial == 0}}


_RUNNERS = {
    "characterize": _characterize,
    "optimize": _optimize_single,
    "sweep": _sweep,
    "cdf": _cdf,
    "scaling": _scaling,
}


def run_experiment(cfg: ScenarioConfig, experiment: str = "optimize", out_dir=None) -> dict:
    """Run one experiment kind and write its CSVs and manifest.

    Returns a mapping from file name to path. Raises
    :class:`FeasibilityError` or :class:`SolverError` on failure.
    """
    if experiment not in _RUNNERS:
        raise InvalidArgumentError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    files, extra = _RUNNERS[experiment](cfg, out)
    timings = extra.pop("timings", {})
    timings = {"total": 1e3 * (time.perf_counter() - t), "schemes": timings}
    manifest = _write_manifest(out, cfg, experiment, files, timings, extra)
    result = {Path(f).name: Path(f) for f in files}
    result["manifest.json"] = manifest
    return result


# ---------------------------------------------------------------------------
# presets

_CASE1 = dict(d_min=0.0, d_max=math.inf)
_CASE2 = dict(d_min=10.0, d_max=500.0)
_ULA16 = dict(array="ULA", m_y=16, m_z=1)
_UPA8 = dict(array="UPA", m_y=8, m_z=8)

PRESETS = {
    "ula16-phi60-case2": ScenarioConfig(**_ULA16, phi_deg=60.0, k_values=[13], **_CASE2),
    "upa8x8-60-case2": ScenarioConfig(**_UPA8, theta_deg=60.0, phi_deg=60.0, k_values=[41], **_CASE2),
    "ula16-phi90-case1": ScenarioConfig(**_ULA16, phi_deg=90.0, k_values=[16], **_CASE1),
    "ula16-phi60-case1": ScenarioConfig(**_ULA16, phi_deg=60.0, k_values=[13], **_CASE1),
    "ula16-phi90-case2": ScenarioConfig(**_ULA16, phi_deg=90.0, k_values=[16], **_CASE2),
    "upa20-scaling": ScenarioConfig(array="UPA", m_y=5, m_z=20, theta_deg=90.0, phi_deg=90.0, k_values=[1]),
    "upa8x8-90-case2": ScenarioConfig(**_UPA8, theta_deg=90.0, phi_deg=90.0, k_values=[47], **_CASE2),
}

_SWEEP_K = list(range(1, 17))

# figure number -> list of (subdirectory, preset name, experiment, overrides)
FIGURES = {
    2: [
        ("ula", "ula16-phi60-case2", "optimize", {}),
        ("upa", "upa8x8-60-case2", "optimize", {}),
    ],
    3: [("scaling", "upa20-scaling", "scaling", {})],
    4: [
        ("a", "ula16-phi90-case1", "optimize", {}),
        ("b", "ula16-phi60-case1", "optimize", {}),
        ("c", "ula16-phi90-case2", "optimize", {}),
        ("d", "ula16-phi60-case2", "optimize", {}),
    ],
    5: [("d", "ula16-phi60-case2", "optimize", {})],
    6: [("d", "ula16-phi60-case2", "optimize", {})],
    7: [
        ("a", "ula16-phi90-case1", "sweep", {"k_values": _SWEEP_K, "trials": 200}),
        ("b", "ula16-phi60-case1", "sweep", {"k_values": _SWEEP_K, "trials": 200}),
        ("c", "ula16-phi90-case2", "sweep", {"k_values": _SWEEP_K, "trials": 200}),
        ("d", "ula16-phi60-case2", "sweep", {"k_values": _SWEEP_K, "trials": 200}),
    ],
    8: [
        ("ula-phi90", "ula16-phi90-case2", "cdf", {"trials": 10_000}),
        ("ula-phi60", "ula16-phi60-case2", "cdf", {"trials": 10_000}),
        ("upa-90", "upa8x8-90-case2", "cdf", {"trials": 10_000}),
        ("upa-60", "upa8x8-60-case2", "cdf", {"trials": 10_000}),
    ],
}


def figure_jobs(number: int, overrides: Optional[dict] = None, out_dir="results") -> list:
    """Expand a figure number into ``(config, experiment, out_dir)`` jobs."""
    if number not in FIGURES:
        raise InvalidArgumentError(f"figure must be one of {sorted(FIGURES)}")
    jobs = []
    for sub, preset, experiment, fixed in FIGURES[number]:
        cfg = PRESETS[preset].replace(**{**fixed, **(overrides or {})})
        jobs.append((cfg, experiment, os.path.join(out_dir, f"fig{number}", sub)))
    return jobs
