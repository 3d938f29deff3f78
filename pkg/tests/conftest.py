import json

import pytest

from campmap.fixtures import generate_corpus
from campmap.providers import (
    MockClassifier,
    MockEmbedder,
    MockInterpreter,
    MockJudge,
    MockReranker,
    ProviderConfig,
)
from campmap.taxonomy import Taxonomy, load_taxonomy

# dimension chosen so the test vocabularies hash without bucket collisions;
# token-count cosine oracles then match the hashed embedder exactly
TEST_DIM = 4096

GROCERY_NODES = [
    {"id": "pt1", "category": "Food", "family": "Fresh Produce", "type": "Apples"},
    {"id": "pt2", "category": "Food", "family": "Fresh Produce", "type": "Bananas"},
    {"id": "pt3", "category": "Office & Stationery", "family": "Money Handling",
     "type": "Money Deposit Bags"},
    {"id": "pt4", "category": "Office & Stationery", "family": "Money Handling",
     "type": "Cash Registers"},
    {"id": "pt5", "category": "Electronics", "family": "Audio Equipment",
     "type": "Wireless Headphones"},
]

PRODUCE_LEXICON = {
    "produce": ["fruit", "vegetables", "groceries"],
    "groceries": ["food"],
}


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


@pytest.fixture
def grocery_taxonomy(tmp_path) -> Taxonomy:
    path = write_jsonl(tmp_path / "taxonomy.jsonl", GROCERY_NODES)
    return load_taxonomy(path)


def mock_config(role="test", seed=0, dimension=TEST_DIM) -> ProviderConfig:
    return ProviderConfig(kind="mock", model_id=f"mock-{role}", seed=seed,
                          dimension=dimension)


@pytest.fixture
def embedder():
    return MockEmbedder(mock_config("embedder"))


@pytest.fixture
def reranker():
    return MockReranker(mock_config("reranker"))


@pytest.fixture
def classifier():
    return MockClassifier(mock_config("classifier"))


@pytest.fixture
def judge():
    return MockJudge(mock_config("judge"))


@pytest.fixture
def interpreter():
    return MockInterpreter(mock_config("interpreter"), lexicon=PRODUCE_LEXICON)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """The seeded synthetic corpus: 20 campaigns, 240 PTs, distractors."""
    out_dir = tmp_path_factory.mktemp("corpus")
    return generate_corpus(str(out_dir), seed=0)
