"""From-scratch classical baselines."""

from .bayes import GaussianNB, nb_predict, nb_train
from .dataset import Dataset, read_jsonl, write_jsonl
from .hmm import (
    DiscreteHMM,
    HmmClassifier,
    hmm_baum_welch,
    hmm_classifier_predict,
    hmm_classifier_train,
    hmm_forward,
    hmm_viterbi,
)
from .mlp import TinyMLP, mlp_loss_and_grad, mlp_predict, mlp_train
from .tree import DecisionTree, Leaf, Split, dt_predict, dt_train

__all__ = [
    "Dataset", "read_jsonl", "write_jsonl",
    "DecisionTree", "Leaf", "Split", "dt_train", "dt_predict",
    "DiscreteHMM", "HmmClassifier", "hmm_forward", "hmm_viterbi", "hmm_baum_welch",
    "hmm_classifier_train", "hmm_classifier_predict",
    "TinyMLP", "mlp_train", "mlp_predict", "mlp_loss_and_grad",
    "GaussianNB", "nb_train", "nb_predict",
]
