"""Campaign-to-PT mapping systems: the RAG pipeline and the three baselines.

Each system is an estimator: fit(taxonomy) builds whatever indexes it needs,
predict(campaigns) emits one CoverageSet per campaign. Per-campaign operations
are also exposed as functions for composition and testing.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .providers import RelevanceGrade
from .retrieval import (
    Bm25Index,
    DenseIndex,
    bm25_build,
    bm25_retrieve,
    build_dense_index,
    dense_retrieve,
    rerank,
)
from .taxonomy import Taxonomy

ABLATION_VARIANTS = (
    "retrieval_only",
    "des_retrieval",
    "des_retrieval_llm",
    "des_retrieval_rerank_llm",
)


@dataclass(frozen=True)
class Campaign:
    id: str
    title: str
    content: str

    def __post_init__(self):
        if not self.title and not self.content:
            raise ValueError(f"campaign {self.id!r}: title and content both empty")

    def canonical_text(self) -> str:
        return f"{self.title} | {self.content}"


@dataclass(frozen=True)
class Interpretation:
    campaign_id: str
    summary: str


@dataclass(frozen=True)
class CoverageEntry:
    pt_id: str
    grade: RelevanceGrade
    retrieval_score: float
    stage: str


@dataclass
class CoverageSet:
    campaign_id: str
    system_id: str
    entries: list[CoverageEntry]
    interpretation: str | None = None
    metadata: dict = field(default_factory=dict)

    def pt_ids(self) -> set[str]:
        return {e.pt_id for e in self.entries}

    def to_record(self) -> dict:
        record = {
            "campaign_id": self.campaign_id,
            "system_id": self.system_id,
            "entries": [
                {"pt_id": e.pt_id, "grade": e.grade.value,
                 "retrieval_score": e.retrieval_score, "stage": e.stage}
                for e in self.entries
            ],
        }
        if self.interpretation is not None:
            record["interpretation"] = self.interpretation
        if self.metadata:
            record["metadata"] = self.metadata
        return record

    @classmethod
    def from_record(cls, record: dict) -> "CoverageSet":
        return cls(
            campaign_id=record["campaign_id"],
            system_id=record["system_id"],
            entries=[
                CoverageEntry(
                    pt_id=e["pt_id"],
                    grade=RelevanceGrade(e["grade"]),
                    retrieval_score=float(e["retrieval_score"]),
                    stage=e.get("stage", ""),
                )
                for e in record["entries"]
            ],
            interpretation=record.get("interpretation"),
            metadata=record.get("metadata", {}),
        )


def load_campaigns(path) -> list[Campaign]:
    """Campaign JSONL: one {"id", "title", "content"} per line, ids unique."""
    campaigns = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record["id"] in seen:
                raise ValueError(f"duplicate campaign id {record['id']!r}")
            seen.add(record["id"])
            campaigns.append(Campaign(id=record["id"],
                                      title=record.get("title", ""),
                                      content=record.get("content", "")))
    return campaigns


def load_coverage(path) -> list[CoverageSet]:
    with open(path, encoding="utf-8") as fh:
        return [CoverageSet.from_record(json.loads(line))
                for line in fh if line.strip()]


def save_coverage(coverages, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cov in coverages:
            fh.write(json.dumps(cov.to_record()) + "\n")


# --- per-campaign operations ---

def interpret(campaign: Campaign, provider) -> Interpretation:
    try:
        summary = provider.generate_interpretation(campaign.canonical_text())
    except Exception as exc:
        exc.campaign_id = campaign.id
        raise
    return Interpretation(campaign_id=campaign.id, summary=summary)


def _classify_candidates(summary: str, candidates, taxonomy: Taxonomy,
                         classifier, parallelism: int = 1):
    """Grade every candidate; results keyed by pt_id so order never matters."""
    texts = {c.pt_id: taxonomy.render(c.pt_id) for c in candidates}
    if parallelism > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            grades = dict(zip(
                texts.keys(),
                pool.map(lambda t: classifier.classify_relevance(summary, t),
                         texts.values()),
            ))
    else:
        grades = {pid: classifier.classify_relevance(summary, text)
                  for pid, text in texts.items()}
    return grades


def run_pipeline(campaign: Campaign, *, taxonomy: Taxonomy, dense_index: DenseIndex,
                 embedder, interpreter, classifier, reranker=None, tau: float = 0.3,
                 rerank_cutoff: int | None = None, parallelism: int = 1,
                 system_id: str = "pipeline",
                 use_interpretation: bool = True,
                 use_classification: bool = True) -> CoverageSet:
    """Interpret -> embed -> dense retrieve -> optional rerank -> classify.

    The interpretation and classification stages can be disabled for ablation
    variants; the resulting coverage is always a subset of the retrieved set.
    """
    summary = None
    if use_interpretation:
        summary = interpret(campaign, interpreter).summary
        query_text = summary
    else:
        query_text = campaign.canonical_text()

    candidates = dense_retrieve(dense_index, embedder.embed(query_text), tau)
    if reranker is not None:
        candidates = rerank(campaign.canonical_text(), candidates, reranker,
                            taxonomy, cutoff=rerank_cutoff)

    entries = []
    if use_classification:
        grades = _classify_candidates(summary if summary is not None
                                      else campaign.canonical_text(),
                                      candidates, taxonomy, classifier, parallelism)
        for cand in candidates:
            grade = grades[cand.pt_id]
            if grade is not RelevanceGrade.IRRELEVANT:
                entries.append(CoverageEntry(cand.pt_id, grade, cand.score, cand.stage))
    else:
        entries = [CoverageEntry(c.pt_id, RelevanceGrade.STRONG, c.score, c.stage)
                   for c in candidates]

    return CoverageSet(campaign_id=campaign.id, system_id=system_id,
                       entries=entries, interpretation=summary)


def baseline_bm25(campaign: Campaign, index: Bm25Index, top_k: int,
                  system_id: str = "bm25") -> CoverageSet:
    """Lexical baseline: BM25 over the canonical campaign text, grade STRONG."""
    candidates = bm25_retrieve(index, campaign.canonical_text(), top_k)
    entries = [CoverageEntry(c.pt_id, RelevanceGrade.STRONG, c.score, c.stage)
               for c in candidates]
    return CoverageSet(campaign_id=campaign.id, system_id=system_id, entries=entries)


def baseline_dense(campaign: Campaign, index: DenseIndex, embedder, tau: float,
                   system_id: str | None = None) -> CoverageSet:
    """Embedding baseline: raw campaign text thresholded at tau, grade STRONG."""
    candidates = dense_retrieve(index, embedder.embed(campaign.canonical_text()), tau)
    entries = [CoverageEntry(c.pt_id, RelevanceGrade.STRONG, c.score, c.stage)
               for c in candidates]
    return CoverageSet(campaign_id=campaign.id,
                       system_id=system_id or f"dense@{tau}", entries=entries)


def baseline_zero_shot(campaign: Campaign, taxonomy: Taxonomy, provider,
                       chunk_size: int, system_id: str = "zero_shot") -> CoverageSet:
    """Chunked full-list selection; out-of-chunk ids count as hallucinations."""
    if chunk_size <= 0:
        raise ValueError("chunk_size must be positive")
    text = campaign.canonical_text()
    selected: list[str] = []
    seen: set[str] = set()
    hallucinations = 0
    failed_chunks = 0
    nodes = list(taxonomy)
    for start in range(0, len(nodes), chunk_size):
        chunk = nodes[start:start + chunk_size]
        items = [(n.id, n.render()) for n in chunk]
        chunk_ids = {n.id for n in chunk}
        try:
            picked = provider.select_pt_ids(text, items)
        except Exception:
            failed_chunks += 1
            continue
        for pid in picked:
            if pid not in chunk_ids:
                hallucinations += 1
            elif pid not in seen:
                seen.add(pid)
                selected.append(pid)
    entries = [CoverageEntry(pid, RelevanceGrade.STRONG, 0.0, "ZERO_SHOT")
               for pid in selected]
    metadata = {"hallucinations": hallucinations}
    if failed_chunks:
        metadata["failed_chunks"] = failed_chunks
    return CoverageSet(campaign_id=campaign.id, system_id=system_id,
                       entries=entries, metadata=metadata)


def run_ablation(campaign: Campaign, *, taxonomy: Taxonomy, dense_index: DenseIndex,
                 embedder, interpreter, classifier, reranker, tau: float = 0.3,
                 rerank_cutoff: int | None = None,
                 parallelism: int = 1) -> dict[str, CoverageSet]:
    """The four pipeline variants isolating interpretation, classification, rerank."""
    common = dict(taxonomy=taxonomy, dense_index=dense_index, embedder=embedder,
                  interpreter=interpreter, classifier=classifier, tau=tau,
                  parallelism=parallelism)
    return {
        "retrieval_only": run_pipeline(
            campaign, **common, system_id="retrieval_only",
            use_interpretation=False, use_classification=False),
        "des_retrieval": run_pipeline(
            campaign, **common, system_id="des_retrieval",
            use_classification=False),
        "des_retrieval_llm": run_pipeline(
            campaign, **common, system_id="des_retrieval_llm"),
        "des_retrieval_rerank_llm": run_pipeline(
            campaign, **common, system_id="des_retrieval_rerank_llm",
            reranker=reranker, rerank_cutoff=rerank_cutoff),
    }


# --- estimator surface ---

class _FittedMixin:
    def _check_fitted(self):
        if getattr(self, "taxonomy_", None) is None:
            raise NotFittedError(f"{type(self).__name__} is not fitted; call fit first")


class DenseRetrievalMapper(BaseEstimator, _FittedMixin):
    """Raw-embedding retrieval baseline with a cosine threshold."""

    def __init__(self, embedder=None, tau=0.3, system_id=None):
        self.embedder = embedder
        self.tau = tau
        self.system_id = system_id

    def fit(self, taxonomy: Taxonomy, y=None):
        self.taxonomy_ = taxonomy
        self.index_ = build_dense_index(taxonomy, self.embedder)
        return self

    def predict(self, campaigns) -> list[CoverageSet]:
        self._check_fitted()
        return [baseline_dense(c, self.index_, self.embedder, self.tau,
                               system_id=self.system_id)
                for c in campaigns]


class Bm25Mapper(BaseEstimator, _FittedMixin):
    """BM25 lexical baseline."""

    def __init__(self, k1=1.2, b=0.75, top_k=100, system_id="bm25"):
        self.k1 = k1
        self.b = b
        self.top_k = top_k
        self.system_id = system_id

    def fit(self, taxonomy: Taxonomy, y=None):
        self.taxonomy_ = taxonomy
        self.index_ = bm25_build(taxonomy, k1=self.k1, b=self.b)
        return self

    def predict(self, campaigns) -> list[CoverageSet]:
        self._check_fitted()
        return [baseline_bm25(c, self.index_, self.top_k, system_id=self.system_id)
                for c in campaigns]


class ZeroShotMapper(BaseEstimator, _FittedMixin):
    """Full-list LLM selection baseline, chunked."""

    def __init__(self, selector=None, chunk_size=200, system_id="zero_shot"):
        self.selector = selector
        self.chunk_size = chunk_size
        self.system_id = system_id

    def fit(self, taxonomy: Taxonomy, y=None):
        self.taxonomy_ = taxonomy
        return self

    def predict(self, campaigns) -> list[CoverageSet]:
        self._check_fitted()
        return [baseline_zero_shot(c, self.taxonomy_, self.selector,
                                   self.chunk_size, system_id=self.system_id)
                for c in campaigns]


class RagPipelineMapper(BaseEstimator, _FittedMixin):
    """Full pipeline: interpretation, retrieval, optional rerank, classification."""

    def __init__(self, embedder=None, interpreter=None, classifier=None,
                 reranker=None, tau=0.3, rerank_cutoff=None, parallelism=1,
                 system_id="pipeline"):
        self.embedder = embedder
        self.interpreter = interpreter
        self.classifier = classifier
        self.reranker = reranker
        self.tau = tau
        self.rerank_cutoff = rerank_cutoff
        self.parallelism = parallelism
        self.system_id = system_id

    def fit(self, taxonomy: Taxonomy, y=None):
        self.taxonomy_ = taxonomy
        self.index_ = build_dense_index(taxonomy, self.embedder)
        return self

    def predict(self, campaigns) -> list[CoverageSet]:
        self._check_fitted()
        return [run_pipeline(
                    c, taxonomy=self.taxonomy_, dense_index=self.index_,
                    embedder=self.embedder, interpreter=self.interpreter,
                    classifier=self.classifier, reranker=self.reranker,
                    tau=self.tau, rerank_cutoff=self.rerank_cutoff,
                    parallelism=self.parallelism, system_id=self.system_id)
                for c in campaigns]
