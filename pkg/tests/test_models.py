import math

import numpy as np
import pytest

from guidedec.models import log_prob_score, log_softmax, masked_log_prob_score, sequence_log_prob
from guidedec.tokenization import WordTokenizer
from guidedec.toy import TableARModel, TableMLMModel
from guidedec.types import Vocabulary


def uniform_model(size: int = 4) -> TableARModel:
    vocab = Vocabulary([f"t{i}" for i in range(size)])
    return TableARModel(vocab, order=0, rows={}, default_row=[1.0 / size] * size)


def ab_model() -> TableARModel:
    vocab = Vocabulary(["A", "B"])
    return TableARModel(
        vocab, order=1,
        rows={"": [0.5, 0.5], "A": [0.7, 0.3], "B": [0.4, 0.6]},
    )


class TestLogProbScore:
    def test_uniform_distribution(self):
        model = uniform_model(4)
        scores = log_prob_score(model, [])
        assert scores.shape == (4,)
        np.testing.assert_allclose(scores, math.log(0.25), rtol=0, atol=1e-12)

    def test_table_row_read_back(self):
        model = ab_model()
        scores = log_prob_score(model, [0])
        np.testing.assert_allclose(scores, [math.log(0.7), math.log(0.3)], atol=1e-12)

    def test_out_of_range_id_rejected(self):
        with pytest.raises(ValueError, match="unknown token id"):
            log_prob_score(ab_model(), [2])

    def test_scores_are_normalized(self):
        model = ab_model()
        for context in ([], [0], [1], [0, 1]):
            scores = log_prob_score(model, context)
            assert abs(np.exp(scores).sum() - 1.0) < 1e-6

    def test_unnormalized_backend_gets_log_softmax(self):
        class RawLogits:
            vocabulary = Vocabulary(["x", "y", "z"])
            tokenizer = WordTokenizer(vocabulary)
            normalized = False
            eos_id = None

            def score(self, context_ids):
                return np.array([1.0, 2.0, 3.0])

        scores = log_prob_score(RawLogits(), [])
        assert abs(np.exp(scores).sum() - 1.0) < 1e-12
        np.testing.assert_allclose(scores, log_softmax(np.array([1.0, 2.0, 3.0])))

    def test_pure_with_respect_to_inputs(self):
        model = ab_model()
        first = log_prob_score(model, [0, 1])
        second = log_prob_score(model, [0, 1])
        np.testing.assert_array_equal(first, second)


class TestMaskedScore:
    def test_masked_row_lookup(self):
        vocab = Vocabulary(["A", "B"])
        mlm = TableMLMModel(vocab, rows={"A|B": [0.9, 0.1]}, default_row=[0.5, 0.5])
        scores = masked_log_prob_score(mlm, [0], [1])
        np.testing.assert_allclose(scores, [math.log(0.9), math.log(0.1)], atol=1e-12)
        fallback = masked_log_prob_score(mlm, [1], [1])
        np.testing.assert_allclose(fallback, math.log(0.5), atol=1e-12)

    def test_empty_contexts_use_boundary_key(self):
        vocab = Vocabulary(["A", "B"])
        mlm = TableMLMModel(vocab, rows={"|A": [0.8, 0.2]}, default_row=[0.5, 0.5])
        scores = masked_log_prob_score(mlm, [], [0])
        np.testing.assert_allclose(scores, [math.log(0.8), math.log(0.2)], atol=1e-12)


class TestSequenceLogProb:
    def test_uniform_sequence(self):
        model = uniform_model(4)
        assert sequence_log_prob(model, [0, 1, 2]) == pytest.approx(3 * math.log(0.25))

    def test_table_chain(self):
        model = ab_model()
        expected = math.log(0.5) + math.log(0.3)
        assert sequence_log_prob(model, [0, 1]) == pytest.approx(expected, abs=1e-12)

    def test_single_token_chain(self):
        model = ab_model()
        assert sequence_log_prob(model, [1]) == pytest.approx(math.log(0.5), abs=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError, match="empty sequence"):
            sequence_log_prob(ab_model(), [])

    def test_native_sequence_scorer_preferred(self):
        class Native:
            vocabulary = Vocabulary(["x"])

            def sequence_log_prob(self, ids):
                return -1.5 * len(ids)

        assert sequence_log_prob(Native(), [0, 0]) == -3.0

    def test_matches_stepwise_exhaustively(self):
        # Every sequence of length <= 4 over a 5-token vocabulary.
        size = 5
        vocab = Vocabulary([f"t{i}" for i in range(size)])
        rng = np.random.default_rng(1234)
        rows = {}
        for tok in [""] + list(vocab.tokens):
            row = rng.uniform(0.05, 1.0, size=size)
            rows[tok] = (row / row.sum()).tolist()
        model = TableARModel(vocab, order=1, rows=rows)

        sequences: list[list[int]] = []
        frontier: list[list[int]] = [[]]
        for _ in range(4):
            frontier = [s + [t] for s in frontier for t in range(size)]
            sequences.extend(frontier)
        assert len(sequences) == 5 + 25 + 125 + 625

        for seq in sequences:
            stepwise = sum(float(log_prob_score(model, seq[:i])[tok]) for i, tok in enumerate(seq))
            assert sequence_log_prob(model, seq) == pytest.approx(stepwise, abs=1e-12)
