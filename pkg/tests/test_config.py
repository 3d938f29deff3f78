import math
import os

import pytest

from campmap.config import load_config
from campmap.errors import ConfigError
from campmap.providers import MockEmbedder, MockInterpreter

from conftest import write_jsonl


def write_config(tmp_path, body):
    write_jsonl(tmp_path / "taxonomy.jsonl",
                [{"id": "pt1", "category": "A", "family": "B", "type": "C"}])
    path = tmp_path / "config.yaml"
    path.write_text("taxonomy: taxonomy.jsonl\n" + body)
    return path


def test_defaults(tmp_path):
    config = load_config(write_config(tmp_path, ""))
    assert config.tau == 0.3
    assert config.bm25.k1 == 1.2 and config.bm25.b == 0.75
    assert config.bm25.top_k == 100
    assert config.label_window_ms == 7 * 24 * 60 * 60 * 1000
    assert config.parallelism == 1


def test_paths_resolved_relative_to_config_file(tmp_path):
    config = load_config(write_config(tmp_path, "output_dir: results\n"))
    assert config.taxonomy == str(tmp_path / "taxonomy.jsonl")
    assert config.output_dir == str(tmp_path / "results")
    assert config.dense_index_path().startswith(str(tmp_path))


def test_window_inf(tmp_path):
    config = load_config(write_config(tmp_path, "label_window_ms: inf\n"))
    assert math.isinf(config.label_window_ms)


def test_provider_inherits_run_seed(tmp_path):
    config = load_config(write_config(tmp_path, "seed: 7\n"))
    assert config.provider_config("embedder").seed == 7
    assert config.provider_config("embedder").model_id == "mock-embedder"


def test_provider_overrides(tmp_path):
    body = "providers:\n  embedder:\n    dimension: 64\n    seed: 3\n"
    config = load_config(write_config(tmp_path, body))
    embedder = config.make_provider("embedder")
    assert isinstance(embedder, MockEmbedder)
    assert embedder.dimension == 64
    assert config.provider_config("embedder").seed == 3


def test_lexicon_injected_into_interpreter(tmp_path):
    write_jsonl(tmp_path / "lex.jsonl",
                [{"token": "produce", "expansions": ["fruit"]}])
    config = load_config(write_config(tmp_path, "lexicon: lex.jsonl\n"))
    interp = config.make_provider("interpreter")
    assert isinstance(interp, MockInterpreter)
    assert interp.lexicon == {"produce": ["fruit"]}


@pytest.mark.parametrize("body,needle", [
    ("tau: 2.0\n", "tau"),
    ("bm25:\n  k1: 0\n", "bm25.k1"),
    ("bm25:\n  b: 1.5\n", "bm25.b"),
    ("label_window_ms: -5\n", "label_window_ms"),
    ("zero_shot_chunk_size: 0\n", "zero_shot_chunk_size"),
    ("parallelism: 0\n", "parallelism"),
    ("providers:\n  chef: {}\n", "providers.chef"),
    ("providers:\n  embedder:\n    bogus: 1\n", "providers.embedder.bogus"),
    ("lexicon: nowhere.jsonl\n", "lexicon"),
])
def test_invalid_configs_name_offending_key(tmp_path, body, needle):
    with pytest.raises(ConfigError) as exc:
        load_config(write_config(tmp_path, body))
    assert needle in str(exc.value)


def test_missing_taxonomy_key(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("output_dir: out\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_taxonomy_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("taxonomy: nope.jsonl\n")
    with pytest.raises(ConfigError):
        load_config(path)
