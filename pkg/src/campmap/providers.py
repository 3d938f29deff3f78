"""Model provider contracts: embedding, reranking, and instruction-following.

Two families ship here. Mock providers are pure functions of (inputs, seed,
config) so the whole engine is deterministic and testable offline. The HTTP
provider fronts a remote model endpoint with retries and a strict response
parser; it implements the same surface.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import requests

from .errors import (
    ConfigError,
    EmptyResponse,
    ProviderTimeout,
    ProviderUnavailable,
    UnparseableResponse,
)
from .text import normalize_whitespace, tokenize

DEFAULT_DIMENSION = 256


class RelevanceGrade(str, Enum):
    STRONG = "STRONG"
    WEAK = "WEAK"
    IRRELEVANT = "IRRELEVANT"


@dataclass
class ProviderConfig:
    kind: str = "mock"                  # "mock" | "http"
    model_id: str = "mock-default"
    endpoint: str | None = None         # http only
    timeout_ms: int = 10_000
    max_retries: int = 2
    backoff_ms: int = 100
    seed: int = 0                       # mock only
    dimension: int = DEFAULT_DIMENSION  # embedder only
    lexicon_path: str | None = None     # mock interpreter only
    auth_env: str | None = None         # env var holding the bearer token

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http provider requires an endpoint")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be non-negative")
        if self.dimension <= 0:
            raise ConfigError("dimension must be positive")


def load_lexicon(path) -> dict[str, list[str]]:
    """JSONL of {"token": str, "expansions": [str, ...]} -> lookup dict."""
    lexicon: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            lexicon[record["token"].lower()] = [str(e) for e in record["expansions"]]
    return lexicon


def _pt_segments(pt_text: str) -> tuple[str, str, str]:
    """Split a rendered pt into (category, family, type); extras join the type."""
    parts = pt_text.split("|")
    parts = [p.strip() for p in parts]
    while len(parts) < 3:
        parts.append("")
    return parts[0], parts[1], parts[2]


def _overlap_grade(reference_tokens: set[str], pt_text: str) -> RelevanceGrade:
    """Shared mock rule: STRONG on type-token overlap, WEAK on family-only."""
    _, family, type_name = _pt_segments(pt_text)
    if reference_tokens & set(tokenize(type_name)):
        return RelevanceGrade.STRONG
    if reference_tokens & set(tokenize(family)):
        return RelevanceGrade.WEAK
    return RelevanceGrade.IRRELEVANT


class MockEmbedder:
    """Deterministic lexical embedder.

    L2-normalized term-frequency vector over a seeded hash of lowercased
    alphanumeric tokens into a fixed dimension. Cosine between two such
    vectors tracks token overlap, which is what the tests lean on.
    """

    def __init__(self, config: ProviderConfig):
        self.model_id = config.model_id
        self.dimension = config.dimension
        self._key = str(config.seed).encode()

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode(), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            vec[self._bucket(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class MockReranker:
    """Token-Jaccard pairwise scorer; 1.0 for identical token sets."""

    def __init__(self, config: ProviderConfig):
        self.model_id = config.model_id

    def rerank_score(self, query: str, document: str) -> float:
        q = set(tokenize(query))
        d = set(tokenize(document))
        union = q | d
        if not union:
            return 0.0
        return len(q & d) / len(union)


class MockInterpreter:
    """Identity summary plus expansions from a synonym lexicon."""

    def __init__(self, config: ProviderConfig, lexicon: dict[str, list[str]] | None = None):
        self.model_id = config.model_id
        if lexicon is None and config.lexicon_path:
            lexicon = load_lexicon(config.lexicon_path)
        self.lexicon = lexicon or {}

    def generate_interpretation(self, campaign_text: str) -> str:
        tokens = tokenize(campaign_text)
        if not tokens:
            return normalize_whitespace(campaign_text)
        expansions: list[str] = []
        seen = set(tokens)
        for token in tokens:
            for exp in self.lexicon.get(token, []):
                for word in tokenize(exp):
                    if word not in seen:
                        seen.add(word)
                        expansions.append(word)
        return " ".join(tokens + expansions)


class MockClassifier:
    """Grades (summary, pt) by token overlap against family/type segments."""

    def __init__(self, config: ProviderConfig):
        self.model_id = config.model_id

    def classify_relevance(self, summary: str, pt_text: str) -> RelevanceGrade:
        return _overlap_grade(set(tokenize(summary)), pt_text)


class MockJudge:
    """Same overlap rule as the classifier, applied to raw campaign text."""

    def __init__(self, config: ProviderConfig):
        self.model_id = config.model_id

    def judge_relevance(self, campaign_text: str, pt_text: str) -> RelevanceGrade:
        return _overlap_grade(set(tokenize(campaign_text)), pt_text)

    def judge_set_score(self, campaign_text: str, pt_texts: list[str]) -> float:
        if not pt_texts:
            raise ValueError("judge_set_score requires at least one pt text")
        relevant = sum(
            1 for t in pt_texts
            if self.judge_relevance(campaign_text, t) is not RelevanceGrade.IRRELEVANT
        )
        return relevant / len(pt_texts)


class MockSelector:
    """Zero-shot stand-in: selects chunk members with any token overlap."""

    def __init__(self, config: ProviderConfig):
        self.model_id = config.model_id

    def select_pt_ids(self, campaign_text: str, items: list[tuple[str, str]]) -> list[str]:
        campaign_tokens = set(tokenize(campaign_text))
        return [pid for pid, text in items if campaign_tokens & set(tokenize(text))]


# --- prompt templates ---

DEFAULT_PROMPTS = {
    "interpret": (
        "Read the marketing campaign below and describe, in one short paragraph, "
        "what kinds of products it promotes, including implicit themes.\n"
        "Campaign: {campaign}"
    ),
    "classify": (
        "Campaign summary: {summary}\n"
        "Product type: {pt}\n"
        "Answer with exactly one word: STRONG, WEAK, or IRRELEVANT."
    ),
    "judge": (
        "Campaign: {campaign}\n"
        "Product type: {pt}\n"
        "Answer with exactly one word: STRONG, WEAK, or IRRELEVANT."
    ),
    "judge_set": (
        "Campaign: {campaign}\n"
        "Predicted product types:\n{pts}\n"
        "Rate how well this set matches the campaign intent as a single number "
        "between 0 and 1."
    ),
    "select": (
        "Campaign: {campaign}\n"
        "Product type list (id<TAB>text):\n{pts}\n"
        "Return a JSON array of the ids relevant to the campaign."
    ),
}


def load_prompts(path=None) -> dict[str, str]:
    """Prompt templates from a YAML/JSON mapping file; defaults fill gaps."""
    prompts = dict(DEFAULT_PROMPTS)
    if path is not None:
        import yaml
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        prompts.update({str(k): str(v) for k, v in loaded.items()})
    return prompts


_GRADE_WORDS = {g.value.lower(): g for g in RelevanceGrade}


def parse_grade(raw: str) -> RelevanceGrade:
    """Strict three-word contract: case-insensitive, surrounding whitespace only."""
    grade = _GRADE_WORDS.get(raw.strip().lower())
    if grade is None:
        raise UnparseableResponse(raw)
    return grade


class HttpProvider:
    """HTTP-backed provider implementing every role against one endpoint.

    Requests are JSON {"model", "task", ...inputs}; responses are JSON with a
    task-specific payload key. Retries with exponential backoff, then raises
    ProviderUnavailable. Non-conforming payloads raise UnparseableResponse.
    """

    def __init__(self, config: ProviderConfig, prompts: dict[str, str] | None = None,
                 session: requests.Session | None = None):
        self.config = config
        self.model_id = config.model_id
        self.dimension = config.dimension
        self.prompts = prompts or dict(DEFAULT_PROMPTS)
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, payload: dict) -> dict:
        payload = {"model": self.config.model_id, **payload}
        timeout = self.config.timeout_ms / 1000.0
        last_exc: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self._session.post(
                    self.config.endpoint, json=payload,
                    headers=self._headers(), timeout=timeout,
                )
                if resp.status_code >= 500:
                    raise ProviderUnavailable(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise UnparseableResponse(resp.text)
                return resp.json()
            except UnparseableResponse:
                raise
            except requests.Timeout as exc:
                last_exc = ProviderTimeout(str(exc))
            except (requests.ConnectionError, ProviderUnavailable) as exc:
                last_exc = exc
            if attempt < self.config.max_retries:
                time.sleep(self.config.backoff_ms / 1000.0 * (2 ** attempt))
        if isinstance(last_exc, ProviderTimeout):
            raise last_exc
        raise ProviderUnavailable(str(last_exc)) from last_exc

    def embed(self, text: str) -> np.ndarray:
        if not text:
            return np.zeros(self.dimension, dtype=np.float64)
        body = self._post({"task": "embed", "input": text})
        try:
            vec = np.asarray(body["embedding"], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise UnparseableResponse(json.dumps(body)) from None
        if vec.shape != (self.dimension,):
            raise UnparseableResponse(f"embedding of shape {vec.shape}")
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec = vec / norm
        return vec

    def rerank_score(self, query: str, document: str) -> float:
        body = self._post({"task": "rerank", "query": query, "document": document})
        try:
            score = float(body["score"])
        except (KeyError, TypeError, ValueError):
            raise UnparseableResponse(json.dumps(body)) from None
        if not 0.0 <= score <= 1.0:
            raise UnparseableResponse(f"rerank score out of range: {score}")
        return score

    def _generate(self, prompt: str) -> str:
        body = self._post({"task": "generate", "prompt": prompt})
        try:
            text = str(body["text"])
        except (KeyError, TypeError):
            raise UnparseableResponse(json.dumps(body)) from None
        return text

    def generate_interpretation(self, campaign_text: str) -> str:
        text = self._generate(self.prompts["interpret"].format(campaign=campaign_text))
        if not text.strip():
            raise EmptyResponse("empty interpretation")
        return text

    def classify_relevance(self, summary: str, pt_text: str) -> RelevanceGrade:
        prompt = self.prompts["classify"].format(summary=summary, pt=pt_text)
        return parse_grade(self._generate(prompt))

    def judge_relevance(self, campaign_text: str, pt_text: str) -> RelevanceGrade:
        prompt = self.prompts["judge"].format(campaign=campaign_text, pt=pt_text)
        return parse_grade(self._generate(prompt))

    def judge_set_score(self, campaign_text: str, pt_texts: list[str]) -> float:
        if not pt_texts:
            raise ValueError("judge_set_score requires at least one pt text")
        prompt = self.prompts["judge_set"].format(
            campaign=campaign_text, pts="\n".join(pt_texts))
        raw = self._generate(prompt)
        try:
            score = float(raw.strip())
        except ValueError:
            raise UnparseableResponse(raw) from None
        if not 0.0 <= score <= 1.0:
            raise UnparseableResponse(raw)
        return score

    def select_pt_ids(self, campaign_text: str, items: list[tuple[str, str]]) -> list[str]:
        listing = "\n".join(f"{pid}\t{text}" for pid, text in items)
        raw = self._generate(self.prompts["select"].format(campaign=campaign_text, pts=listing))
        try:
            ids = json.loads(raw)
        except json.JSONDecodeError:
            raise UnparseableResponse(raw) from None
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise UnparseableResponse(raw)
        return ids


_MOCK_ROLES = {
    "embedder": MockEmbedder,
    "reranker": MockReranker,
    "interpreter": MockInterpreter,
    "classifier": MockClassifier,
    "judge": MockJudge,
    "selector": MockSelector,
}


def build_provider(config: ProviderConfig, role: str,
                   prompts: dict[str, str] | None = None):
    """Instantiate the provider for one role from its config."""
    if config.kind == "http":
        return HttpProvider(config, prompts=prompts)
    cls = _MOCK_ROLES.get(role)
    if cls is None:
        raise ConfigError(f"unknown provider role {role!r}")
    return cls(config)
