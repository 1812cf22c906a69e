import numpy as np
import pytest

from deepcand.mathkit import SeededRng
from deepcand.store import Corpus, CorpusIndex, DocEntry
from deepcand.synth import gaussian_topic_corpus


@pytest.fixture
def tiny_corpus():
    """Three hand-built docs, two labels, dim 2."""
    emb = np.array(
        [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [5.0, 5.0],
            [6.0, 5.0],
            [9.0, 9.0],
            [9.0, 8.0],
            [8.0, 9.0],
            [8.0, 8.0],
        ]
    )
    index = CorpusIndex(
        [
            DocEntry("a", "ham", 0, 3),
            DocEntry("b", "spam", 3, 2),
            DocEntry("c", "spam", 5, 4),
        ]
    )
    return Corpus(emb, index)


@pytest.fixture(scope="session")
def topic_corpus():
    """Small separated-topic corpus for pipeline-level tests. Never mutate it."""
    return gaussian_topic_corpus(77, 60, dim=8, n_topics=3, k_min=4, k_max=12)


@pytest.fixture
def rng():
    return SeededRng(1234, "tests")
