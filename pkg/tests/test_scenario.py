"""Tests for scenario configuration, the random baseline and experiment output."""

import csv
import json
import math

import numpy as np
import pytest

from swarmcap.constraints import validate_formation
from swarmcap.errors import FeasibilityError, InvalidArgumentError
from swarmcap.scenario import (
    FIGURES,
    PRESETS,
    ResultRow,
    ScenarioConfig,
    capacity_upper_bound,
    figure_jobs,
    format_float,
    random_swarm,
    run_experiment,
    trial_rng,
)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SMALL = ScenarioConfig(m_y=8, phi_deg=60.0, k_values=[3], trials=20, seed=7)


@pytest.fixture(scope="module")
def fig4d(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig4d")
    run_experiment(PRESETS["ula16-phi60-case2"], "optimize", out)
    return out


class TestConfig:
    def test_defaults(self):
        cfg = ScenarioConfig()
        assert cfg.ref_snr == pytest.approx(100.0)
        assert cfg.rho == pytest.approx(400.0)
        assert cfg.geometry.size == 16 and cfg.m_z == 1

    @pytest.mark.parametrize(
        "kw",
        [
            {"r_min": 600.0},
            {"d_min": 20.0, "d_max": 10.0},
            {"trials": 0},
            {"k_values": [0]},
            {"array": "UCA"},
            {"floor_mode": "ceil"},
            {"seed": -1},
        ],
    )
    def test_invariants(self, kw):
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig(**kw)

    def test_json_round_trip(self, tmp_path):
        cfg = ScenarioConfig(array="UPA", m_y=8, m_z=8, theta_deg=60, d_min=10, k_values=[1, 2])
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        back = ScenarioConfig.from_json(p)
        assert back == cfg and math.isinf(back.d_max)

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            ScenarioConfig.from_dict({"antennas": 4})

    def test_ula_ignores_elevation(self):
        cfg = ScenarioConfig(theta_deg=60.0)
        assert cfg.sector.theta_max == 0.0

    def test_result_row(self):
        with pytest.raises(InvalidArgumentError):
            ResultRow("Oracle", "SIC", 1, 0, 1.0)
        with pytest.raises(InvalidArgumentError):
            ResultRow("RandomSwarm", "SIC", 1, 0, -1.0)

    def test_float_format(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(math.pi)) == math.pi
        assert format_float(math.inf) == "inf"


class TestRandomSwarm:
    def test_no_separation_at_r_min(self):
        f = random_swarm(SMALL, np.random.default_rng(1), 6)
        np.testing.assert_array_equal(f.ranges, 50.0)
        assert np.all(np.abs(f.phis) <= math.radians(60))
        np.testing.assert_array_equal(f.thetas, 0.0)

    def test_upa_angles(self):
        cfg = ScenarioConfig(array="UPA", m_y=4, m_z=4, theta_deg=30, phi_deg=45)
        f = random_swarm(cfg, np.random.default_rng(2), 50)
        assert np.all(np.abs(f.thetas) <= math.radians(30))
        assert np.all(np.abs(f.phis) <= math.radians(45))

    def test_single_user(self):
        cfg = SMALL.replace(d_min=10.0, d_max=20.0)
        assert len(random_swarm(cfg, np.random.default_rng(3), 1)) == 1

    def test_deterministic(self):
        a = random_swarm(SMALL.replace(d_min=10.0), trial_rng(5, 3, 0), 5)
        b = random_swarm(SMALL.replace(d_min=10.0), trial_rng(5, 3, 0), 5)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_streams_independent_of_trial_count(self):
        x = trial_rng(9, 4, 17).random(3)
        assert np.array_equal(x, trial_rng(9, 4, 17).random(3))
        assert not np.array_equal(x, trial_rng(9, 4, 18).random(3))

    def test_constraints_respected(self):
        cfg = SMALL.replace(d_min=10.0, d_max=300.0)
        for t in range(20):
            f = random_swarm(cfg, trial_rng(1, 8, t), 8)
            assert validate_formation(f, cfg.constraints).passed

    def test_infeasible(self):
        cfg = SMALL.replace(r_max=50.0, d_min=200.0)
        with pytest.raises(FeasibilityError):
            random_swarm(cfg, np.random.default_rng(0), 2)


class TestExperiments:
    def test_characterize(self, tmp_path):
        cfg = ScenarioConfig(array="UPA", m_y=8, m_z=8, theta_deg=60, phi_deg=60)
        files = run_experiment(cfg, "characterize", tmp_path)
        rows = {r["quantity"]: r["value"] for r in read_csv(files["characterize.csv"])}
        assert rows["n_orthogonal"] == "41"
        assert float(rows["capacity_closed_form"]) == pytest.approx(41 * math.log2(1 + 400 * 64))
        manifest = json.loads(files["manifest.json"].read_text())
        assert manifest["config"]["m_y"] == 8 and manifest["seed"] == 0
        assert manifest["files"] == ["characterize.csv"]

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            run_experiment(SMALL, "plot", tmp_path)

    def test_optimize_outputs(self, fig4d):
        names = {p.name for p in fig4d.iterdir()}
        assert {"convergence.csv", "summary.csv", "interference.csv", "separations.csv", "locations.csv", "manifest.json"} <= names
        manifest = json.loads((fig4d / "manifest.json").read_text())
        assert set(manifest["termination"]) == {"ProposedSIC", "ProposedTIN"}
        assert "C4: pass" in manifest["validation"]["ProposedSIC"]

    def test_interference_contrast(self, fig4d):
        worst = {}
        for r in read_csv(fig4d / "interference.csv"):
            if r["row"] != r["col"]:
                worst[r["scheme"]] = max(worst.get(r["scheme"], 0.0), float(r["coefficient"]))
        assert worst["ProposedSIC"] < 1e-2 and worst["ProposedTIN"] < 1e-2
        assert worst["RandomSwarm"] > 0.1

    def test_summary_ordering(self, fig4d):
        v = {(r["scheme"], r["metric"]): float(r["value"]) for r in read_csv(fig4d / "summary.csv")}
        assert v[("ProposedTIN", "TIN")] <= v[("ProposedSIC", "SIC")] <= v[("CapacityUB", "SIC")] + 1e-6
        assert v[("RandomSwarm", "TIN")] <= v[("ProposedTIN", "TIN")]

    def test_separations_within_limits(self, fig4d):
        for r in read_csv(fig4d / "separations.csv"):
            if r["scheme"] != "RandomSwarm":
                assert 10.0 - 1e-6 <= float(r["distance_m"]) <= 500.0 + 1e-6

    def test_convergence_monotone(self, fig4d):
        series = {}
        for r in read_csv(fig4d / "convergence.csv"):
            series.setdefault(r["scheme"], []).append(float(r["objective"]))
        for s in ("ProposedSIC", "ProposedTIN"):
            assert np.all(np.diff(series[s]) >= -1e-9)

    def test_sweep_linear_regime_and_ordering(self, tmp_path):
        cfg = SMALL.replace(k_values=[1, 2, 3, 4, 6], trials=30)
        files = run_experiment(cfg, "sweep", tmp_path)
        rows = read_csv(files["rate_vs_k.csv"])
        mean = {(int(r["K"]), r["scheme"], r["metric"]): float(r["mean_rate"]) for r in rows}
        n = 7  # orthogonal count for M=8, 60 deg
        for K in cfg.k_values:
            ub = capacity_upper_bound(cfg, K)
            assert mean[(K, "CapacityUB", "SIC")] == pytest.approx(K * math.log2(1 + 400 * 8))
            if K <= n:
                assert mean[(K, "ProposedSIC", "SIC")] == pytest.approx(ub, rel=1e-4)
                assert mean[(K, "ProposedTIN", "TIN")] == pytest.approx(ub, rel=1e-4)
            assert mean[(K, "RandomSwarm", "TIN")] <= mean[(K, "ProposedTIN", "TIN")] + 1e-9
            assert mean[(K, "ProposedTIN", "TIN")] <= mean[(K, "ProposedSIC", "SIC")] + 1e-9
        assert {int(r["trials"]) for r in rows} == {30}

    def test_cdf_single_atom(self, tmp_path):
        cfg = SMALL.replace(k_values=[4], trials=25, d_min=10.0, d_max=500.0)
        files = run_experiment(cfg, "cdf", tmp_path)
        by = {}
        for r in read_csv(files["rate_cdf.csv"]):
            by.setdefault((r["scheme"], r["metric"]), []).append((float(r["rate"]), float(r["cdf"])))
        for key in [("ProposedSIC", "SIC"), ("ProposedTIN", "TIN"), ("CapacityUB", "SIC")]:
            rates = [x for x, _ in by[key]]
            assert len(rates) == 25 and max(rates) - min(rates) <= 1e-6
        for metric in ("SIC", "TIN"):
            pts = by[("RandomSwarm", metric)]
            assert [x for x, _ in pts] == sorted(x for x, _ in pts)
            assert pts[-1][1] == 1.0 and pts[0][1] == pytest.approx(1 / 25)

    def test_parallel_trials_match_serial(self, tmp_path):
        cfg = SMALL.replace(k_values=[3], trials=12, d_min=10.0)
        a = run_experiment(cfg, "cdf", tmp_path / "a")
        b = run_experiment(cfg.replace(workers=2), "cdf", tmp_path / "b")
        assert a["rate_cdf.csv"].read_bytes() == b["rate_cdf.csv"].read_bytes()

    def test_scaling(self, tmp_path):
        files = run_experiment(PRESETS["upa20-scaling"], "scaling", tmp_path)
        rows = read_csv(files["count_scaling.csv"])
        assert [int(r["m_y"]) for r in rows] == [5, 10, 20, 40, 80]
        for r in rows:
            assert float(r["lower_ratio"]) <= float(r["exact_ratio"]) <= float(r["upper_ratio"])


class TestFigures:
    def test_jobs(self, tmp_path):
        jobs = figure_jobs(7, {"trials": 5}, str(tmp_path))
        assert len(jobs) == 4
        assert all(cfg.trials == 5 and exp == "sweep" for cfg, exp, _ in jobs)
        assert jobs[0][0].k_values == list(range(1, 17))

    def test_presets_match_evaluation_setup(self):
        for cfg in PRESETS.values():
            assert (cfg.r0, cfg.snr_db, cfg.r_min, cfg.r_max) == (100.0, 20.0, 50.0, 500.0)
        assert sorted(FIGURES) == [2, 3, 4, 5, 6, 7, 8]

    def test_bad_figure(self):
        with pytest.raises(InvalidArgumentError):
            figure_jobs(9)
