import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnurse.attention import normalize_stack
from attnurse.errors import DimMismatch, FewerThanTwoMaps, NonPositiveEntry
from attnurse.metrics import (
    CSV_HEADER,
    MetricRecord,
    cc,
    com_distance,
    intensity,
    iou,
    polygon_area,
    read_csv,
    record_metrics,
    sym_kl,
    variance,
    write_csv,
)
from attnurse.rng import Xoshiro256


def delta(h, w, r, c):
    m = np.zeros((h, w))
    m[r, c] = 1.0
    return m


def random_probs(seed, shape=(6, 5, 2)):
    return normalize_stack(Xoshiro256(seed).uniform(shape))


class TestIntensity:
    def test_constant_map(self):
        assert intensity([np.full((4, 4), 0.3)]) == pytest.approx(0.3, abs=1e-15)

    def test_minimum_over_maps(self):
        assert intensity([np.full((2, 2), 0.2), np.full((2, 2), 0.5)]) == pytest.approx(0.2, abs=1e-15)

    def test_zero_map(self):
        assert intensity([np.zeros((3, 3))]) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            intensity([np.zeros((2, 2)), np.zeros((2, 3))])


class TestVariance:
    def test_delta_is_zero(self):
        assert variance([delta(4, 4, 1, 2)]) == 0.0

    def test_uniform_row(self):
        # cells at 0..3 about the center 1.5: (2.25 + 0.25 + 0.25 + 2.25) / 4
        assert variance([np.full((1, 4), 0.25)]) == pytest.approx(1.25, abs=1e-15)

    def test_mean_over_maps(self):
        a = np.zeros((1, 4))
        a[0, 0] = 1.0
        assert variance([a, np.full((1, 4), 0.25)]) == pytest.approx(0.625, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_transpose_invariant(self, seed):
        p = random_probs(seed, (5, 5, 3))
        pt = p.transpose(1, 0, 2)
        assert variance(pt) == pytest.approx(variance(p), abs=1e-12)
        assert com_distance(pt) == pytest.approx(com_distance(p), abs=1e-12)


class TestIoU:
    def test_identical(self):
        p = random_probs(0)[..., 0]
        assert iou([p, p]) == pytest.approx(0.5, abs=1e-12)

    def test_disjoint(self):
        assert iou([delta(3, 3, 0, 0), delta(3, 3, 2, 2)]) == 0.0

    def test_three_identical(self):
        p = random_probs(1)[..., 0]
        assert iou([p, p, p]) == pytest.approx(0.5, abs=1e-12)

    def test_needs_two(self):
        with pytest.raises(FewerThanTwoMaps):
            iou([np.full((2, 2), 0.25)])

    @settings(max_examples=50)
    @given(st.integers(0, 10**6))
    def test_bounds(self, seed):
        v = iou(random_probs(seed))
        assert 0.0 <= v <= 0.5


class TestComDistance:
    def test_three_four_five(self):
        assert com_distance([delta(5, 5, 0, 0), delta(5, 5, 3, 4)]) == 25.0

    def test_identical_pair(self):
        p = random_probs(2)[..., 0]
        assert com_distance([p, p]) == 0.0

    def test_triangle(self):
        maps = [delta(5, 5, 0, 0), delta(5, 5, 4, 0), delta(5, 5, 0, 3)]
        assert com_distance(maps) == 6.0

    def test_square_any_input_order(self):
        corners = [(0, 0), (0, 3), (3, 3), (3, 0)]
        for perm in ([0, 1, 2, 3], [0, 2, 1, 3], [3, 1, 0, 2]):
            maps = [delta(4, 4, *corners[i]) for i in perm]
            assert com_distance(maps) == 9.0

    def test_collinear_is_zero(self):
        maps = [delta(5, 5, 0, 0), delta(5, 5, 2, 2), delta(5, 5, 4, 4)]
        assert com_distance(maps) == 0.0

    def test_polygon_area_ties_by_radius(self):
        # two vertices on the same ray from the centroid must not break the area
        pts = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0], [3.0, 3.0]])
        assert polygon_area(pts) > 0


class TestSymKL:
    def test_identical(self):
        p = random_probs(3)[..., 0]
        assert sym_kl([p, p]) == 0.0

    def test_two_cell_value(self):
        got = sym_kl([np.array([[0.75, 0.25]]), np.array([[0.25, 0.75]])])
        assert got == pytest.approx(0.5 * math.log(3.0), abs=1e-15)
        assert got == pytest.approx(0.549306, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric(self, seed):
        p = random_probs(seed)
        assert sym_kl([p[..., 0], p[..., 1]]) == pytest.approx(sym_kl([p[..., 1], p[..., 0]]), abs=1e-12)

    def test_zero_entry_rejected(self):
        with pytest.raises(NonPositiveEntry):
            sym_kl([delta(2, 2, 0, 0), np.full((2, 2), 0.25)])

    @settings(max_examples=50)
    @given(st.integers(0, 10**6))
    def test_nonnegative(self, seed):
        assert sym_kl(random_probs(seed, (4, 4, 3))) >= 0


class TestCC:
    def test_identical(self):
        p = np.full((2, 2), 0.25)
        assert cc([p, p]) == 0.25

    def test_disjoint_pair(self):
        assert cc([delta(2, 2, 0, 0), delta(2, 2, 1, 1)]) == 0.5

    def test_three_disjoint(self):
        assert cc([delta(2, 2, 0, 0), delta(2, 2, 0, 1), delta(2, 2, 1, 1)]) == 0.75

    @settings(max_examples=50)
    @given(st.integers(0, 10**6), st.integers(2, 4))
    def test_bounds(self, seed, n):
        p = random_probs(seed, (4, 3, n))
        v = cc(p)
        assert 1 / 12 - 1e-15 <= v <= n / 12 + 1e-15


class TestPermutationInvariance:
    @pytest.mark.parametrize("seed", range(5))
    def test_shared_cell_permutation(self, seed):
        p = random_probs(seed, (5, 6, 3))
        perm = np.random.default_rng(seed).permutation(30)
        q = p.reshape(30, 3)[perm].reshape(5, 6, 3)
        for fn in (iou, sym_kl, cc):
            assert fn(q) == pytest.approx(fn(p), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_entity_order(self, seed):
        p = random_probs(seed, (5, 5, 4))
        q = p[..., [2, 0, 3, 1]]
        for fn in (iou, sym_kl, cc, variance, com_distance):
            assert fn(q) == pytest.approx(fn(p), abs=1e-12)


class TestRecords:
    def test_record_fields(self):
        stack = Xoshiro256(0).uniform((4, 4, 3))
        rec = record_metrics(stack, (0, 2), step=7)
        probs = normalize_stack(stack[..., [0, 2]])
        assert rec.step == 7
        assert rec.intensity == intensity(stack[..., [0, 2]])
        assert rec.iou == iou(probs)
        assert rec.cc == cc(probs)

    def test_csv_round_trip(self, tmp_path):
        recs = [record_metrics(Xoshiro256(s).uniform((4, 4, 2)), (0, 1), step=s) for s in range(3)]
        write_csv(tmp_path / "m.csv", recs)
        assert (tmp_path / "m.csv").read_text().splitlines()[0] == "step,intensity,variance,iou,com_distance,sym_kl,cc"
        assert read_csv(tmp_path / "m.csv") == recs

    def test_header_names(self):
        assert CSV_HEADER[1:] == MetricRecord.names()

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n")
        with pytest.raises(ValueError):
            read_csv(tmp_path / "m.csv")
