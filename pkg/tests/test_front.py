"""Hypervolume, spacing, Jaccard distances, variance slices and scalarized selection."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physrisk.errors import ReferencePointError, TooFewPoints
from physrisk.front import (
    STRATEGY_WEIGHTS,
    ScalarizationWeights,
    active_positions,
    default_reference,
    distance_heatmap,
    front_metrics,
    hypervolume,
    jaccard_distance,
    scalarize_select,
    slice_by_variance,
    spacing,
)

from .oracles import box_sampling_hypervolume


def random_front(rng, n=25, m=3):
    """Points on the positive orthant of a sphere are mutually non-dominated."""
    x = np.abs(rng.normal(size=(n, m)))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return 1.0 - x


def inclusion_exclusion_hv(front, ref):
    """Union of the boxes [f, ref] by inclusion-exclusion over all subsets."""
    F = np.asarray(front, dtype=float)
    total = 0.0
    for r in range(1, len(F) + 1):
        for sub in itertools.combinations(range(len(F)), r):
            corner = F[list(sub)].max(axis=0)
            total += (-1) ** (r + 1) * np.prod(np.maximum(ref - corner, 0.0))
    return total


class TestHypervolume:
    def test_unit_box(self):
        assert hypervolume([[0.0, 0.0]], [1.0, 1.0]) == 1.0

    def test_two_point_union(self):
        assert hypervolume([[1.0, 2.0], [2.0, 1.0]], [3.0, 3.0]) == 3.0

    def test_dominated_point_ignored(self):
        base = [[1.0, 2.0], [2.0, 1.0]]
        assert hypervolume(base + [[2.5, 2.5]], [3.0, 3.0]) == 3.0

    def test_reference_must_be_dominated(self):
        with pytest.raises(ReferencePointError):
            hypervolume([[1.0, 3.0]], [3.0, 3.0])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_inclusion_exclusion(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.random((8, 3))
        ref = np.full(3, 1.1)
        assert hypervolume(F, ref) == pytest.approx(inclusion_exclusion_hv(F, ref), abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_box_sampling_oracle(self, seed):
        rng = np.random.default_rng(seed)
        F = random_front(rng)
        ref = default_reference(F)
        est, se = box_sampling_hypervolume(F, ref, 400_000, rng)
        assert abs(hypervolume(F, ref) - est) < 3 * se

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        F = rng.random((12, 3))
        ref = np.full(3, 1.5)
        full = hypervolume(F, ref)
        assert hypervolume(F[:-1], ref) <= full + 1e-15
        extra = rng.random((1, 3))
        assert hypervolume(np.vstack([F, extra]), ref) >= full - 1e-15

    def test_four_objectives(self):
        F = np.eye(4)
        ref = np.full(4, 2.0)
        assert hypervolume(F, ref) == pytest.approx(inclusion_exclusion_hv(F, ref), abs=1e-12)


class TestReference:
    def test_margin(self):
        np.testing.assert_allclose(default_reference([[0.0, 1.0], [1.0, 3.0]]), [1.1, 3.2])

    def test_degenerate_dimension_still_dominated(self):
        F = np.array([[0.0, 2.0, 0.0], [1.0, 1.0, 0.0]])
        ref = default_reference(F)
        assert np.all(F < ref)
        assert hypervolume(F, ref) > 0


class TestSpacing:
    def test_two_points(self):
        assert spacing([[0.0, 0.0], [1.0, 1.0]]) == 0.0

    def test_even_line(self):
        assert spacing(np.c_[np.arange(6.0), np.zeros(6)]) == pytest.approx(0.0, abs=1e-15)

    def test_hand_example(self):
        assert spacing([[0.0], [1.0], [3.0]]) == pytest.approx(np.std([1, 1, 2], ddof=1), abs=1e-12)
        assert spacing([[0.0], [1.0], [3.0]]) == pytest.approx(0.5773502691896258, abs=1e-12)

    def test_duplicates_use_distinct_neighbour(self):
        assert spacing([[0.0], [0.0], [1.0], [3.0]]) == pytest.approx(np.std([1, 1, 1, 2], ddof=1), abs=1e-12)

    def test_too_few(self):
        with pytest.raises(TooFewPoints):
            spacing([[1.0, 2.0]])

    def test_metrics_record(self, rng):
        F = random_front(rng, 10)
        m = front_metrics(F)
        assert m.hypervolume > 0 and m.spacing >= 0
        np.testing.assert_array_equal(m.reference_point, default_reference(F))


simplex = st.integers(2, 8).flatmap(
    lambda n: st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda v: sum(v) > 0)
)


class TestJaccard:
    def test_identity(self):
        assert jaccard_distance([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_disjoint(self):
        assert jaccard_distance([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_hand_example(self):
        assert jaccard_distance([0.5, 0.5, 0.0], [0.5, 0.0, 0.5]) == pytest.approx(2 / 3, abs=1e-12)

    @given(simplex, st.data())
    def test_symmetric_and_bounded(self, x, data):
        y = data.draw(st.lists(st.floats(0, 1), min_size=len(x), max_size=len(x)))
        d = jaccard_distance(x, y)
        assert d == jaccard_distance(y, x)
        assert 0.0 <= d <= 1.0

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1000)
        for _ in range(1000):
            x, y, z = rng.dirichlet(np.full(6, 0.5), size=3)
            assert jaccard_distance(x, z) <= jaccard_distance(x, y) + jaccard_distance(y, z) + 1e-12


class TestHeatmap:
    def test_singleton(self):
        D, order = distance_heatmap([[0.3, 0.7]])
        np.testing.assert_array_equal(D, [[0.0]])

    def test_duplicates_and_symmetry(self, rng):
        W = rng.dirichlet(np.ones(5), size=6)
        W[4] = W[1]
        D, order = distance_heatmap(W, rng.random(6))
        np.testing.assert_allclose(D, D.T, atol=1e-12)
        np.testing.assert_array_equal(np.diag(D), 0.0)
        i, j = np.nonzero(order == 1)[0][0], np.nonzero(order == 4)[0][0]
        assert D[i, j] == 0.0

    def test_sorted_by_variance(self, rng):
        W = rng.dirichlet(np.ones(4), size=5)
        v = np.array([0.5, 0.1, 0.3, 0.2, 0.4])
        D, order = distance_heatmap(W, v)
        np.testing.assert_array_equal(order, [1, 3, 2, 4, 0])
        assert D[0, 1] == pytest.approx(jaccard_distance(W[1], W[3]))


class TestActivePositions:
    def test_uniform(self):
        assert active_positions(np.full(120, 1 / 120)) == 120

    def test_one_hot(self):
        assert active_positions(np.eye(10)[3]) == 1

    def test_strict(self):
        assert active_positions(np.full(120, 1e-3)) == 0


class TestSlices:
    def _front(self, rng, n=40):
        F = rng.random((n, 3))
        F[:, 0] *= -1
        return F

    def test_single_bin(self, rng):
        F = self._front(rng)
        (s,) = slice_by_variance(F, 1)
        assert s.members.size == len(F)

    def test_max_goes_to_last_bin(self, rng):
        F = self._front(rng)
        slices = slice_by_variance(F, 6)
        assert np.argmax(F[:, 1]) in slices[-1].members

    @given(st.integers(0, 1000), st.integers(1, 10))
    def test_partition(self, seed, bins):
        F = self._front(np.random.default_rng(seed), 30)
        slices = slice_by_variance(F, bins)
        members = np.concatenate([s.members for s in slices])
        assert sorted(members) == list(range(30))
        for s in slices:
            assert np.all((F[s.members, 1] >= s.lower - 1e-15) & (F[s.members, 1] <= s.upper + 1e-15))

    def test_projections_and_fit(self):
        x = np.linspace(0, 1, 10)
        F = np.column_stack([-(1 + 2 * x - 3 * x**2), np.full(10, 0.5), x])
        (s,) = slice_by_variance(F, 1)
        np.testing.assert_allclose(s.expected_return, 1 + 2 * x - 3 * x**2)
        np.testing.assert_allclose(s.quadratic_fit, [-3, 2, 1], atol=1e-10)

    def test_rejects_zero_bins(self, rng):
        with pytest.raises(ValueError):
            slice_by_variance(self._front(rng), 0)


class TestScalarization:
    F = np.array([[-0.03, 0.05, 0.2], [-0.01, 0.01, 0.3], [-0.02, 0.03, 0.1]])

    def test_return_only(self):
        assert scalarize_select(self.F, ScalarizationWeights(1, 0, 0)) == 0

    def test_variance_only(self):
        assert scalarize_select(self.F, ScalarizationWeights(0, 1, 0)) == 1

    def test_climate_only(self):
        assert scalarize_select(self.F, ScalarizationWeights(0, 0, 1)) == 2

    def test_tie_goes_to_lowest_id(self):
        F = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert scalarize_select(F, ScalarizationWeights(0.5, 0.5, 0)) == 0

    def test_degenerate_column(self):
        F = self.F.copy()
        F[:, 2] = 0.7
        assert scalarize_select(F, ScalarizationWeights(0, 0, 1)) == 0

    def test_named_strategies(self, rng):
        expected = {
            "balanced": (1 / 3, 1 / 3, 1 / 3),
            "minimum-risk": (0, 0.5, 0.5),
            "return-oriented": (0.5, 0.25, 0.25),
            "variance-oriented": (0.25, 0.5, 0.25),
            "climate-oriented": (0.25, 0.25, 0.5),
            "mean-variance": (0.5, 0.5, 0),
        }
        F = random_front(rng, 30)
        for name, abc in expected.items():
            np.testing.assert_allclose(STRATEGY_WEIGHTS[name].as_array(), abc)
            assert 0 <= scalarize_select(F, STRATEGY_WEIGHTS[name]) < 30

    @given(st.integers(0, 1000), st.integers(0, 2), st.floats(0.01, 100), st.floats(-10, 10))
    def test_affine_invariance(self, seed, col, scale, shift):
        rng = np.random.default_rng(seed)
        F = rng.random((15, 3))
        G = F.copy()
        G[:, col] = scale * G[:, col] + shift
        w = ScalarizationWeights(0.2, 0.3, 0.5)
        assert scalarize_select(F, w) == scalarize_select(G, w)

    @pytest.mark.parametrize("bad", [(0.5, 0.5, 0.5), (-0.1, 0.6, 0.5)])
    def test_invalid_weights(self, bad):
        with pytest.raises(ValueError):
            ScalarizationWeights(*bad)
