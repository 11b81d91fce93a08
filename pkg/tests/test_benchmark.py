import csv
import json

import numpy as np
import pytest

from mocondg.benchmark import (BenchmarkConfig, BenchmarkResult, InstanceKey, delta_bar_value, generate_starts,
                               instance_keys, load_result, problem_seed, run_benchmark, run_frontier)
from mocondg.errors import IoFailure
from mocondg.problems import BoxDomain
from mocondg.report import INSTANCE_COLUMNS, emit_report


def small_config(**kw):
    base = dict(problems=["BK1", "IM1"], starts=3, seed=5)
    base.update(kw)
    return BenchmarkConfig(**base)


class TestStarts:
    def test_deterministic(self):
        box = BoxDomain([-5.0, -5.0], [10.0, 10.0])
        np.testing.assert_array_equal(generate_starts(box, 100, 3), generate_starts(box, 100, 3))
        assert not np.array_equal(generate_starts(box, 5, 3), generate_starts(box, 5, 4))

    def test_prefix_stable(self):
        box = BoxDomain([0.0], [1.0])
        np.testing.assert_array_equal(generate_starts(box, 10, 1), generate_starts(box, 50, 1)[:10])

    def test_inside_box(self):
        box = BoxDomain([-5.0, 0.0, 2.0], [10.0, 1.0, 2.5])
        S = generate_starts(box, 1000, 0)
        assert np.all(S >= box.lb) and np.all(S <= box.ub)

    def test_mean_within_three_sigma(self):
        box = BoxDomain([-5.0, 0.0], [10.0, 1.0])
        S = generate_starts(box, 10_000, 8)
        width = box.ub - box.lb
        sigma = width / np.sqrt(12) / np.sqrt(len(S))
        assert np.all(np.abs(S.mean(axis=0) - box.midpoint) <= 3 * sigma)

    def test_count_positive(self):
        with pytest.raises(ValueError):
            generate_starts(BoxDomain([0.0], [1.0]), 0, 0)

    def test_problem_seeds_differ(self):
        assert problem_seed(0, "BK1") != problem_seed(0, "IM1")
        assert problem_seed(0, "BK1") == problem_seed(0, "BK1")


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small_config(delta_bar=[0.02, "random"], params={"zeta": 1e-3})
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert BenchmarkConfig.load(path).to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("bad", [{"solvers": ["Newton"]}, {"params": {"eta": 1}}, {"starts": 0},
                                     {"delta_bar": [0.5]}, {"step_rule": "wolfe"}])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            small_config(**bad)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            BenchmarkConfig.from_dict({"problemz": ["BK1"]})

    def test_instance_ids(self):
        key = InstanceKey("BK1", 0.05, "CondG", 7)
        assert key.id == "BK1_d0.05_CondG_007"
        assert len(instance_keys(small_config())) == 2 * 2 * 3

    def test_random_delta_bar_per_problem(self):
        cfg = small_config()
        a, b = delta_bar_value(cfg, "BK1", "random"), delta_bar_value(cfg, "IM1", "random")
        assert 0.02 <= a <= 0.10 and 0.02 <= b <= 0.10 and a != b
        assert delta_bar_value(cfg, "BK1", 0.05) == 0.05


class TestRun:
    def test_manifest_cardinality_and_files(self, tmp_path):
        res = run_benchmark(small_config(), tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest["instances"]) == 12
        assert all(item["status"] == "done" for item in manifest["instances"])
        for item in manifest["instances"]:
            assert (tmp_path / "instances" / f"{item['id']}.csv").exists()
        assert len(res.records) == 12

    def test_rerun_is_identical(self, tmp_path):
        a = run_benchmark(small_config(), tmp_path / "a")
        b = run_benchmark(small_config(), tmp_path / "b")
        assert a.success_matrix() == b.success_matrix()
        for ra, rb in zip(a.records, b.records):
            assert ra["F_final"] == rb["F_final"] and ra["iterations"] == rb["iterations"]
            csv_a = (tmp_path / "a" / "instances" / f"{ra['id']}.csv").read_bytes()
            assert csv_a == (tmp_path / "b" / "instances" / f"{rb['id']}.csv").read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        a = run_benchmark(small_config())
        b = run_benchmark(small_config(jobs=2), tmp_path)
        assert [r["F_final"] for r in a.records] == [r["F_final"] for r in b.records]

    def test_resume_after_interrupt(self, tmp_path):
        seen = []

        def stop_after_five(record):
            seen.append(record["id"])
            if len(seen) == 5:
                raise KeyboardInterrupt

        with pytest.raises(KeyboardInterrupt):
            run_benchmark(small_config(), tmp_path, progress=stop_after_five)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        status = [item["status"] for item in manifest["instances"]]
        assert status.count("done") == 5 and status.count("pending") == 7

        rerun = []
        res = run_benchmark(small_config(), tmp_path, progress=lambda r: rerun.append(r["id"]))
        assert len(rerun) == 7 and not set(rerun) & set(seen)
        assert len(res.records) == 12
        fresh = run_benchmark(small_config())
        assert [r["F_final"] for r in res.records] == [r["F_final"] for r in fresh.records]

    def test_changed_config_is_not_resumed(self, tmp_path):
        run_benchmark(small_config(starts=1), tmp_path)
        calls = []
        run_benchmark(small_config(starts=1, seed=6), tmp_path, progress=calls.append)
        assert len(calls) == 4

    def test_load_result(self, tmp_path):
        res = run_benchmark(small_config(), tmp_path)
        back = load_result(tmp_path)
        assert back.records == res.records
        with pytest.raises(FileNotFoundError):
            load_result(tmp_path / "nothing")

    def test_record_fields(self):
        res = run_benchmark(small_config(problems=["BK1"], starts=1))
        for r in res.records:
            assert r["success"] == (r["stop_reason"] in ("Converged", "CriticalAtStart"))
            assert 0.02 <= r["delta_bar"] <= 0.10
            assert "seconds" in r["metadata"]


class TestResultViews:
    def fake_result(self):
        cfg = small_config(problems=["P"] if False else ["BK1"], starts=3)
        recs = []
        costs = {"CondG": [(3, True), (4, True), (0, True)], "ProxGrad": [(6, True), (4, True), (9, False)]}
        for s, rows in costs.items():
            for i, (it, ok) in enumerate(rows):
                recs.append({"id": f"BK1_drandom_{s}_{i:03d}", "problem": "BK1", "solver": s, "start": i,
                             "delta_bar_setting": "random", "success": ok, "iterations": it,
                             "f_evals": it * 2 + 1, "F_final": [float(i), float(3 - i)],
                             "metadata": {"seconds": 0.1}})
        return BenchmarkResult(cfg, recs)

    def test_cost_matrix(self):
        C, solvers, keys = self.fake_result().cost_matrix("iterations")
        assert solvers == ["CondG", "ProxGrad"]
        np.testing.assert_array_equal(C, [[3, 6], [4, 4], [1, np.inf]])

    def test_profiles_from_result(self):
        prof = self.fake_result().profiles("iterations")
        assert prof["CondG"].efficiency == 1.0
        assert prof["ProxGrad"].efficiency == pytest.approx(1 / 3)
        assert prof["ProxGrad"](2.0) == pytest.approx(2 / 3)

    def test_success_rate(self):
        res = self.fake_result()
        assert res.success_rate("CondG") == 1.0
        assert res.success_rate("ProxGrad") == pytest.approx(2 / 3)


class TestReport:
    def test_empty_skeleton(self, tmp_path):
        files = emit_report(BenchmarkResult(small_config(), []), tmp_path)
        names = {f.name for f in files}
        assert {"summary.json", "instances.csv"} <= names
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["instances"] == 0
        rows = list(csv.reader((tmp_path / "instances.csv").open()))
        assert rows == [INSTANCE_COLUMNS]

    def test_report_files_and_bytes_stable(self, tmp_path):
        res = run_benchmark(small_config())
        emit_report(res, tmp_path / "a")
        emit_report(res, tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert {"profile_iterations.svg", "profile_f_evals.svg", "frontier_BK1.svg", "frontier_IM1.svg"} <= set(names)
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(IoFailure):
            emit_report(BenchmarkResult(small_config(), []), blocker / "sub")

    def test_uncertainty_layers(self, tmp_path):
        cfg = BenchmarkConfig(problems=["BK1"], solvers=["CondG"], delta_bar=[0.02, 0.05, 0.10], seed=1,
                              budgets={"frontier_seconds": 600, "frontier_starts": 20})
        res = run_frontier(cfg, tmp_path / "results")
        assert len(res.records) == 60
        assert set(res.frontier_budget.values()) == {"starts"}
        emit_report(res, tmp_path / "report")
        svg = (tmp_path / "report" / "frontier_BK1.svg").read_text()
        for label in ("δ̄=0.02", "δ̄=0.05", "δ̄=0.1"):
            assert label in svg
        summary = json.loads((tmp_path / "report" / "summary.json").read_text())
        assert {"BK1|0.02", "BK1|0.05", "BK1|0.1"} == set(summary["frontier_metrics"])
