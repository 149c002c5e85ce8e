import numpy as np
import pytest

from attnurse import svg
from attnurse.analysis import (
    COLUMNS,
    TrajectorySummary,
    correlation_matrix,
    pearson,
    run_analysis,
    summarize_trajectory,
)
from attnurse.diffusion import TrialRecord
from attnurse.errors import DegenerateVariance, EmptyTrajectory
from attnurse.metrics import MetricRecord


def _rec(seed, rows, formed=(True, True)):
    metrics = [MetricRecord(k, *r) for k, r in enumerate(rows)]
    return TrialRecord(seed, metrics, np.zeros((2, 2, 2)), formed)


def _random_summaries(n, seed=0):
    rng = np.random.default_rng(seed)
    return [TrajectorySummary(i, *rng.random(6), success=int(rng.random() < 0.5)) for i in range(n)]


class TestSummaries:
    def test_constant_trajectory(self):
        row = (0.1, 2.0, 0.3, 4.0, 0.5, 0.06)
        s = summarize_trajectory(_rec(1, [row] * 4))
        assert (s.intensity, s.variance, s.iou, s.com_distance, s.sym_kl, s.cc) == row

    def test_mean(self):
        s = summarize_trajectory(_rec(1, [(0, 0, 0.1, 0, 0, 0), (0, 0, 0.3, 0, 0, 0)]))
        assert s.iou == pytest.approx(0.2, abs=1e-15)

    def test_success_copied(self):
        assert summarize_trajectory(_rec(1, [(0,) * 6], formed=(True, False))).success == 0
        assert summarize_trajectory(_rec(1, [(0,) * 6], formed=(True, True))).success == 1

    @pytest.mark.parametrize("agg,want", [("final", 3.0), ("min", 1.0), ("max", 5.0), ("mean", 3.0)])
    def test_aggregates(self, agg, want):
        rows = [(v, 0, 0, 0, 0, 0) for v in (1.0, 5.0, 3.0)]
        assert summarize_trajectory(_rec(0, rows), agg).intensity == want

    def test_empty(self):
        with pytest.raises(EmptyTrajectory):
            summarize_trajectory(_rec(0, []))

    def test_unknown_aggregate(self):
        with pytest.raises(ValueError):
            summarize_trajectory(_rec(0, [(0,) * 6]), "median")


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == 1.0

    def test_anti(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == -1.0

    def test_independent(self):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x = rng.random(10_000)
            assert abs(pearson(x, rng.permutation(x))) < 0.05

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        x, y = rng.random(50), rng.random(50)
        r = pearson(x, y)
        assert pearson(3 * x + 7, 0.5 * y - 2) == pytest.approx(r, abs=1e-12)
        assert pearson(-x, y) == pytest.approx(-r, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateVariance):
            pearson([1, 1, 1], [1, 2, 3])

    @pytest.mark.parametrize("x,y", [([1, 2], [1, 2]), ([1, 2, 3], [1, 2])])
    def test_length(self, x, y):
        with pytest.raises(ValueError):
            pearson(x, y)


class TestMatrix:
    def test_symmetric_unit_diagonal(self):
        c = correlation_matrix(_random_summaries(40))
        assert c.shape == (7, 7)
        np.testing.assert_allclose(c, c.T, rtol=0, atol=1e-12)
        np.testing.assert_allclose(np.diag(c), 1.0, rtol=0, atol=1e-12)

    def test_duplicated_column(self):
        rng = np.random.default_rng(3)
        sums = []
        for i in range(30):
            v = rng.random(5)
            sums.append(TrajectorySummary(i, v[0], v[1], v[2], v[3], v[4], v[0], success=i % 2))
        c = correlation_matrix(sums)
        assert c[0, 5] == pytest.approx(1.0, abs=1e-12)

    def test_order_independent(self):
        sums = _random_summaries(25)
        shuffled = [sums[i] for i in np.random.default_rng(0).permutation(25)]
        assert correlation_matrix(shuffled).tobytes() == correlation_matrix(sums).tobytes()

    def test_degenerate_column(self):
        sums = [TrajectorySummary(i, float(i), 1.0, 0.1 * i, i, i, i, success=i % 2) for i in range(5)]
        with pytest.raises(DegenerateVariance, match="Var"):
            correlation_matrix(sums)

    def test_column_labels(self):
        assert COLUMNS == ("Int", "Var", "IoU", "D_CoM", "D_KL", "CC", "success")


class TestOutputs:
    def test_files_and_determinism(self, tmp_path):
        rng = np.random.default_rng(4)
        recs = [_rec(s, [tuple(rng.random(6)) for _ in range(3)], formed=(bool(s % 2), True)) for s in range(10)]
        run_analysis(recs, tmp_path / "a")
        run_analysis(list(reversed(recs)), tmp_path / "b")
        for name in ("summaries.csv", "corr.csv", "corr.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        lines = (tmp_path / "a" / "summaries.csv").read_text().splitlines()
        assert lines[0] == "seed,intensity,variance,iou,com_distance,sym_kl,cc,success"
        assert len(lines) == 11
        assert (tmp_path / "a" / "corr.csv").read_text().splitlines()[0] == ",Int,Var,IoU,D_CoM,D_KL,CC,success"

    def test_svg_pure(self):
        c = correlation_matrix(_random_summaries(20))
        assert svg.correlation_heatmap(c, COLUMNS) == svg.correlation_heatmap(c.copy(), COLUMNS)
        stack = np.random.default_rng(0).random((4, 4, 3))
        a = svg.attention_maps(stack, (0, 1), title="t0")
        assert a == svg.attention_maps(stack.copy(), (0, 1), title="t0")
        assert a.startswith("<svg") and a.count("<rect") == 3 * 16

    def test_diverging_endpoints(self):
        assert svg.diverging(1.0) == "#ff0000"
        assert svg.diverging(0.0) == "#ffffff"
        assert svg.diverging(-1.0) == "#0000ff"
