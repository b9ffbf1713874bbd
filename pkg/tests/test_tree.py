import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ibsead.baselines.dataset import Dataset
from ibsead.baselines.tree import (
    DecisionTree,
    Leaf,
    Split,
    best_split,
    dt_predict,
    dt_train,
    entropy,
    tree_from_dict,
    tree_to_dict,
)
from ibsead.errors import ArityMismatch, EmptyDataset

XOR = Dataset(["a", "b"], [[0, 0], [0, 1], [1, 0], [1, 1]], [0, 1, 1, 0], 2)


def depth2_trees(n_features, thresholds):
    """Every tree of depth <= 2 over the given thresholds with binary leaves."""
    leaves = [Leaf(0), Leaf(1)]
    stumps = leaves + [Split(f, t, a, b) for f in range(n_features) for t in thresholds for a in leaves for b in leaves]
    for f in range(n_features):
        for t in thresholds:
            for left, right in itertools.product(stumps, repeat=2):
                yield DecisionTree(Split(f, t, left, right), n_features, 2)


class TestTrain:
    def test_pure_input(self):
        d = Dataset(["x"], [[1.0], [2.0], [3.0]], [2, 2, 2], 3)
        assert dt_train(d).root == Leaf(2)

    def test_xor(self):
        # an exhaustive search confirms that a depth-2 tree can fit XOR perfectly
        assert any(
            all(dt_predict(t, x) == c for x, c in XOR.rows()) for t in depth2_trees(2, [0.5])
        )
        tree = dt_train(XOR)
        assert tree.depth == 2
        assert all(dt_predict(tree, x) == c for x, c in XOR.rows())

    def test_perfect_separator_gain(self):
        X = np.array([[0.0, 5.0], [1.0, 3.0], [2.0, 4.0], [3.0, 3.5]])
        y = np.array([0, 0, 1, 1])
        gain, feature, thr = best_split(X, y, 2)
        assert gain == pytest.approx(1.0, abs=1e-12)
        assert (feature, thr) == (0, 1.5)

    def test_max_depth(self):
        assert dt_train(XOR, max_depth=1).depth <= 1
        assert isinstance(dt_train(XOR, max_depth=0).root, Leaf)

    def test_majority_tie_goes_low(self):
        d = Dataset(["x"], [[1.0], [1.0]], [1, 0], 2)
        assert dt_train(d).root == Leaf(0)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            dt_train(Dataset(["x"], np.zeros((0, 1)), [], 2))

    @settings(max_examples=60)
    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 2)), min_size=1, max_size=30))
    def test_zero_training_error_when_consistent(self, rows):
        seen = {}
        clean = []
        for a, b, c in rows:
            if seen.setdefault((a, b), c) == c:
                clean.append(([a, b], c))
        d = Dataset.from_rows(["a", "b"], clean, 3)
        tree = dt_train(d)
        assert all(dt_predict(tree, x) == c for x, c in clean)

    def test_entropy_bits(self):
        assert entropy([1, 1]) == pytest.approx(1.0)
        assert entropy([4, 0]) == 0.0


class TestPredict:
    def test_leaf(self):
        assert dt_predict(DecisionTree(Leaf(1), 3, 2), [9.0, -1.0, 0.0]) == 1

    def test_threshold_goes_left(self):
        tree = DecisionTree(Split(0, 0.5, Leaf(0), Leaf(1)), 1, 2)
        assert dt_predict(tree, [0.5]) == 0
        assert dt_predict(tree, [0.5000001]) == 1

    def test_arity(self):
        with pytest.raises(ArityMismatch):
            dt_predict(dt_train(XOR), [1.0])

    def test_json_round_trip(self):
        tree = dt_train(XOR)
        assert tree_from_dict(tree_to_dict(tree)) == tree
