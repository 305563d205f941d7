import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcstep.model import (
    DecisionRuleMass,
    ProblemSpec,
    Variant,
    classify_partition,
    enumerate_actions,
    induced_tests,
    label_tuple,
    labels_with_ones,
    loss,
    point_mass,
)


class TestProblemSpec:
    def test_valid_construction(self):
        spec = ProblemSpec(k=3, sigma2=1.0, rho=0.5, b=2.0, alpha=0.05)
        assert spec.k == 3
        assert spec.variant is Variant.POINT_NULL

    @pytest.mark.parametrize("kwargs", [
        dict(k=0),
        dict(k=2, sigma2=0.0),
        dict(k=2, sigma2=-1.0),
        dict(k=2, alpha=0.0),
        dict(k=2, alpha=1.0),
        dict(k=2, b=0.0),
        dict(k=2, rho=1.0),
        dict(k=2, rho=-1.0),
        dict(k=3, rho=-0.5),
    ])
    def test_invalid_construction(self, kwargs):
        with pytest.raises(ValueError):
            ProblemSpec(**kwargs)

    def test_k1_allows_any_rho(self):
        ProblemSpec(k=1, rho=-0.9)


class TestLoss:
    def test_one_false_rejection(self):
        assert loss((1, 1, 0), (1, 0, 0), 2.0) == 1

    def test_correct_decision_is_free(self):
        for a in enumerate_actions(3):
            assert loss(a, a, 3.7) == 0.0

    def test_two_false_acceptances(self):
        assert loss((0, 0), (1, 1), 2.5) == 5.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            loss((1, 0), (1, 0, 0), 1.0)

    @given(st.integers(1, 6), st.floats(0.1, 10.0), st.data())
    def test_additive_and_bounded(self, k, b, data):
        a = data.draw(st.lists(st.integers(0, 1), min_size=k, max_size=k))
        v = data.draw(st.lists(st.integers(0, 1), min_size=k, max_size=k))
        total = loss(a, v, b)
        per_component = sum(
            loss((a[i],), (v[i],), b) for i in range(k)
        )
        assert total == pytest.approx(per_component)
        assert 0.0 <= total <= k * max(1.0, b)


class TestClassifyPartition:
    def test_point_null(self):
        assert classify_partition([0.0, 2.3], Variant.POINT_NULL).tolist() == [0, 1]

    def test_composite_null(self):
        assert classify_partition([-1.2, 0.1], Variant.COMPOSITE_NULL).tolist() == [0, 1]

    def test_origin(self):
        assert classify_partition([0.0, 0.0, 0.0]).tolist() == [0, 0, 0]

    def test_point_null_rejects_negative(self):
        with pytest.raises(ValueError):
            classify_partition([-0.1, 1.0], Variant.POINT_NULL)

    def test_embedding_roundtrip(self):
        # embedding each label as a unit-positive mean and classifying
        # returns the label unchanged
        for v in enumerate_actions(4):
            assert classify_partition(v.astype(float)).tolist() == v.tolist()


class TestEnumerateActions:
    def test_k1(self):
        assert enumerate_actions(1).tolist() == [[0], [1]]

    def test_k2_documented_order(self):
        assert enumerate_actions(2).tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]

    def test_k3_all_distinct(self):
        rows = enumerate_actions(3)
        assert rows.shape == (8, 3)
        assert len({tuple(r) for r in rows}) == 8

    def test_capacity_guard(self):
        with pytest.raises(ValueError):
            enumerate_actions(21)

    def test_labels_with_ones(self):
        subset = labels_with_ones(4, 2)
        assert subset.shape[0] == 6
        assert all(r.sum() == 2 for r in subset)


class TestDecisionRuleMass:
    def test_uniform_induces_half(self):
        actions = enumerate_actions(2)
        delta = DecisionRuleMass({tuple(a): 0.25 for a in actions})
        assert induced_tests(delta) == pytest.approx([0.5, 0.5])

    def test_point_mass(self):
        delta = point_mass((1, 0))
        assert induced_tests(delta).tolist() == [1.0, 0.0]

    def test_mixture(self):
        delta = DecisionRuleMass({(1, 1): 0.5, (0, 1): 0.5})
        assert induced_tests(delta) == pytest.approx([0.5, 1.0])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            DecisionRuleMass({(1, 0): 0.4, (0, 1): 0.4})

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            DecisionRuleMass({(1, 0): 1.5, (0, 1): -0.5})

    def test_nonrandomized_bijection(self):
        # point-mass rules correspond one to one with 0/1 test vectors
        seen = set()
        for a in enumerate_actions(3):
            psi = induced_tests(point_mass(a))
            assert set(np.unique(psi)) <= {0.0, 1.0}
            assert psi.tolist() == list(a)
            seen.add(label_tuple(psi.astype(int)))
        assert len(seen) == 8

    @given(st.integers(1, 4), st.data())
    def test_induced_tests_in_unit_interval(self, k, data):
        actions = enumerate_actions(k)
        raw = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(actions),
                                 max_size=len(actions)))
        weights = np.asarray(raw) / np.sum(raw)
        delta = DecisionRuleMass({tuple(a): float(w) for a, w in zip(actions, weights)})
        psi = induced_tests(delta)
        assert np.all(psi >= 0.0) and np.all(psi <= 1.0)
