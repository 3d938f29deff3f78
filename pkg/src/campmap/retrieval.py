"""Candidate generation over the taxonomy: dense cosine retrieval, BM25, rerank.

Dense retrieval is an exact brute-force scan; at taxonomy scale (thousands of
nodes) that is cheap and keeps results bit-reproducible. All orderings are
total: score descending, pt_id ascending.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .taxonomy import Taxonomy
from .text import tokenize

STAGE_BM25 = "BM25"
STAGE_DENSE = "DENSE"
STAGE_RERANKED = "RERANKED"


@dataclass(frozen=True)
class Candidate:
    pt_id: str
    score: float
    stage: str


def _sorted_candidates(pairs, stage: str) -> list[Candidate]:
    ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
    return [Candidate(pt_id=pid, score=float(score), stage=stage)
            for pid, score in ordered]


# --- dense index ---

@dataclass
class DenseIndex:
    pt_ids: list[str]
    matrix: np.ndarray          # (n, dimension), rows L2-normalized
    model_id: str
    dimension: int

    def vector(self, pt_id: str) -> np.ndarray:
        return self.matrix[self.pt_ids.index(pt_id)]

    def vectors_by_id(self) -> dict[str, np.ndarray]:
        return {pid: self.matrix[i] for i, pid in enumerate(self.pt_ids)}


def build_dense_index(taxonomy: Taxonomy, embedder) -> DenseIndex:
    """One embedding per node, computed from the rendered node text."""
    rows = []
    pt_ids = []
    for node in taxonomy:
        try:
            rows.append(embedder.embed(node.render()))
        except Exception as exc:
            exc.pt_id = node.id  # attach the offending node for diagnostics
            raise
        pt_ids.append(node.id)
    matrix = np.vstack(rows)
    return DenseIndex(pt_ids=pt_ids, matrix=matrix,
                      model_id=embedder.model_id, dimension=embedder.dimension)


def dense_retrieve(index: DenseIndex, query_vec: np.ndarray, tau: float) -> list[Candidate]:
    """All nodes with cosine(query, node) >= tau, score desc, pt_id asc.

    Vectors are L2-normalized so cosine is the dot product; a zero vector on
    either side yields cosine 0.
    """
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (index.dimension,):
        raise DimensionMismatch(index.dimension, query_vec.shape[0] if query_vec.ndim else -1)
    scores = index.matrix @ query_vec
    keep = [(index.pt_ids[i], scores[i]) for i in np.flatnonzero(scores >= tau)]
    return _sorted_candidates(keep, STAGE_DENSE)


def save_dense_index(index: DenseIndex, path) -> None:
    """JSONL sidecar: header with model_id/dimension, then (pt_id, vector) rows."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"model_id": index.model_id, "dimension": index.dimension,
                  "count": len(index.pt_ids)}
        fh.write(json.dumps(header) + "\n")
        for pid, row in zip(index.pt_ids, index.matrix):
            fh.write(json.dumps({"pt_id": pid, "vector": [float(x) for x in row]}) + "\n")


def load_dense_index(path, expected_model_id: str | None = None) -> DenseIndex:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        model_id = header["model_id"]
        dimension = int(header["dimension"])
        if expected_model_id is not None and model_id != expected_model_id:
            raise ConfigError(
                f"index built with model {model_id!r}, config expects {expected_model_id!r}")
        pt_ids = []
        rows = []
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            pt_ids.append(record["pt_id"])
            rows.append(np.asarray(record["vector"], dtype=np.float64))
    matrix = np.vstack(rows) if rows else np.zeros((0, dimension))
    return DenseIndex(pt_ids=pt_ids, matrix=matrix, model_id=model_id, dimension=dimension)


# --- BM25 ---

@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[str, int]]]  # term -> [(pt_id, tf)]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    k1: float
    b: float


def bm25_build(taxonomy: Taxonomy, k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    """Inverted index over rendered node text.

    Tokenization: lowercase, split on non-alphanumeric, drop empties.
    """
    if k1 <= 0:
        raise ValueError("k1 must be positive")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must be in [0, 1]")
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for node in taxonomy:
        tokens = tokenize(node.render())
        doc_lengths[node.id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((node.id, tf))
    doc_count = len(taxonomy)
    avg_doc_length = sum(doc_lengths.values()) / doc_count
    return Bm25Index(postings=postings, doc_lengths=doc_lengths,
                     avg_doc_length=avg_doc_length, doc_count=doc_count, k1=k1, b=b)


def _idf(index: Bm25Index, df: int) -> float:
    # ln((N - df + 0.5) / (df + 0.5) + 1), clamped at >= 0
    return max(0.0, math.log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0))


def bm25_retrieve(index: Bm25Index, query: str, top_k: int) -> list[Candidate]:
    """Standard BM25 scoring; query terms contribute once per occurrence.

    Zero-score documents are excluded; top_k by score desc, pt_id asc.
    """
    scores: dict[str, float] = {}
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = _idf(index, len(plist))
        for pt_id, tf in plist:
            dl = index.doc_lengths[pt_id]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length)
            scores[pt_id] = scores.get(pt_id, 0.0) + idf * tf * (index.k1 + 1.0) / denom
    keep = [(pid, s) for pid, s in scores.items() if s > 0.0]
    return _sorted_candidates(keep, STAGE_BM25)[:top_k]


def save_bm25_index(index: Bm25Index, path) -> None:
    payload = {
        "postings": {t: [[pid, tf] for pid, tf in plist]
                     for t, plist in index.postings.items()},
        "doc_lengths": index.doc_lengths,
        "avg_doc_length": index.avg_doc_length,
        "doc_count": index.doc_count,
        "k1": index.k1,
        "b": index.b,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_bm25_index(path) -> Bm25Index:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return Bm25Index(
        postings={t: [(pid, int(tf)) for pid, tf in plist]
                  for t, plist in payload["postings"].items()},
        doc_lengths={k: int(v) for k, v in payload["doc_lengths"].items()},
        avg_doc_length=float(payload["avg_doc_length"]),
        doc_count=int(payload["doc_count"]),
        k1=float(payload["k1"]),
        b=float(payload["b"]),
    )


# --- reranking ---

def rerank(campaign_text: str, candidates: list[Candidate], scorer,
           taxonomy: Taxonomy, cutoff: int | None = None) -> list[Candidate]:
    """Rescore candidates with a pairwise scorer and re-sort.

    Without a cutoff this is a pure reordering (same candidate multiset);
    with cutoff=N exactly the top N survive.
    """
    if not candidates:
        return []
    rescored = [(c.pt_id, scorer.rerank_score(campaign_text, taxonomy.render(c.pt_id)))
                for c in candidates]
    out = _sorted_candidates(rescored, STAGE_RERANKED)
    if cutoff is not None:
        out = out[:cutoff]
    return out
