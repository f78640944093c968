import numpy as np
import pytest
from scipy import stats

from szclass.errors import SearchFailedError
from szclass.hpo import (Categorical, IntRange, RealRange, SearchSpace, SweepRow, default_spaces,
                         preproc_grid, random_search, read_sweep_csv, select_top_configs,
                         sweep_csv, sweep_preproc_grid, trial_log_lines)


class TestSpaces:
    def test_knn_range(self):
        space = default_spaces()["knn"]
        ks = [space.sample(s, i)["k"] for s in range(5) for i in range(200)]
        assert min(ks) >= 1 and max(ks) <= 30
        assert set(ks) == set(range(1, 31))

    def test_alpha_log_uniform(self):
        space = default_spaces()["sgd"]
        alpha = np.array([space.sample(0, i)["alpha"] for i in range(1000)])
        assert alpha.min() >= 1e-7 and alpha.max() <= 1e-1
        res = stats.kstest(np.log10(alpha), stats.uniform(loc=-7, scale=6).cdf)
        assert res.pvalue > 0.01

    def test_sample_depends_only_on_seed_and_index(self):
        space = default_spaces()["gbt"]
        assert space.sample(3, 17) == space.sample(3, 17)
        assert space.sample(3, 17) != space.sample(3, 18)

    @pytest.mark.parametrize("bad", [lambda: IntRange(3, 1), lambda: RealRange(0, 1, log=True),
                                     lambda: Categorical(())])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            bad()


def _target(cfg):
    return -(cfg["x"] - 0.7) ** 2


SPACE = SearchSpace({"x": RealRange(0.0, 1.0)})


class TestRandomSearch:
    def test_budget_one(self):
        res = random_search(SPACE, _target, budget=1, seed=0)
        assert len(res.trials) == 1 and res.best is res.trials[0]

    def test_finds_target(self):
        # each seed misses with probability 0.9**100
        hits = [abs(random_search(SPACE, _target, 100, s).best.config["x"] - 0.7) <= 0.05
                for s in range(100)]
        assert all(hits)

    def test_best_is_max(self):
        res = random_search(SPACE, _target, 50, 3)
        assert res.best.objective == max(t.objective for t in res.trials)

    def test_determinism_and_workers(self):
        a = random_search(SPACE, _target, 30, 5)
        b = random_search(SPACE, _target, 30, 5, workers=4)
        assert [t.config for t in a.trials] == [t.config for t in b.trials]
        assert [t.objective for t in a.trials] == [t.objective for t in b.trials]

    def test_failures_count_toward_budget(self):
        def flaky(cfg):
            if cfg["x"] > 0.5:
                raise RuntimeError("boom")
            return cfg["x"]

        res = random_search(SPACE, flaky, 40, 1)
        assert len(res.trials) == 40
        failed = [t for t in res.trials if t.status == "failed"]
        assert failed and all("boom" in t.reason for t in failed)
        assert res.best.objective == max(t.objective for t in res.trials if t.status == "ok")

    def test_all_failed(self):
        with pytest.raises(SearchFailedError):
            random_search(SPACE, lambda cfg: 1 / 0, 5, 0)

    def test_ties_go_to_earliest(self):
        res = random_search(SPACE, lambda cfg: 1.0, 10, 0)
        assert res.best.index == 0

    def test_trial_log(self):
        res = random_search(SPACE, _target, 3, 0)
        lines = trial_log_lines(res).splitlines()
        assert len(lines) == 3 and '"index": 0' in lines[0]
        assert res.to_dict()["sampler"] == "random-v1"


class TestGrid:
    def test_fifty_points(self):
        grid = preproc_grid()
        assert len(grid) == 50 == len(set(grid))
        assert grid[0] == (12, 1, 0.5) and grid[1] == (12, 1, 0.75)
        assert [g[0] for g in grid] == sorted(g[0] for g in grid)

    def _rows(self, scores):
        return [SweepRow(1, "knn", f, w, o, s) for (f, w, o), s in zip(preproc_grid(), scores)]

    def test_top_decreasing(self):
        rows = self._rows(np.linspace(1, 0, 50))
        assert select_top_configs(rows, 4) == [r[:3] for r in preproc_grid()[:4]]

    def test_top_ties(self):
        scores = np.zeros(50)
        scores[[7, 3]] = 0.9
        top = select_top_configs(self._rows(scores), 2)
        assert top == [preproc_grid()[3], preproc_grid()[7]]

    def test_top_four_of_fifty(self):
        rows = self._rows(np.random.default_rng(0).random(50))
        assert len(select_top_configs(rows)) == 4

    def test_csv_round_trip(self):
        rows = self._rows(np.random.default_rng(1).random(50))
        text = sweep_csv(rows)
        assert text.splitlines()[0] == "method,classifier,f_max,W_l,O,weighted_f1"
        assert read_sweep_csv(text) == rows

    def test_sweep_deterministic(self, small_corpus, small_spec):
        _, manifest = small_corpus
        grid = [(12, 1, 0.5), (24, 2, 1.0)]
        kw = dict(montage=small_spec.montage, budget=3, k=2, seed=4, grid=grid)
        a = sweep_preproc_grid(manifest, "knn", **kw)
        b = sweep_preproc_grid(manifest, "knn", **kw)
        assert a == b and len(a) == 2
        assert [r.best_config for r in a] == [r.best_config for r in b]


def test_failed_points_rank_last():
    rows = [SweepRow(1, "knn", f, w, o, s) for (f, w, o), s in
            zip(preproc_grid()[:3], [float("nan"), 0.2, 0.1])]
    assert select_top_configs(rows, 3) == [preproc_grid()[1], preproc_grid()[2], preproc_grid()[0]]


def test_sweep_keeps_failed_point(small_corpus, small_spec):
    _, manifest = small_corpus
    space = SearchSpace({"k": IntRange(10_000, 10_000), "vote": Categorical(("uniform",))})
    rows = sweep_preproc_grid(manifest, "knn", small_spec.montage, budget=1, k=2,
                              grid=[(12, 1, 0.5)], space=space)
    assert len(rows) == 1 and np.isnan(rows[0].weighted_f1)
