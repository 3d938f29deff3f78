"""Declarative run configuration: one YAML document drives every command."""

import math
import os
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .providers import ProviderConfig, build_provider, load_lexicon, load_prompts

PROVIDER_ROLES = ("embedder", "reranker", "interpreter", "classifier", "judge", "selector")

DEFAULT_WINDOW_MS = 7 * 24 * 60 * 60 * 1000


@dataclass
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    top_k: int = 100


@dataclass
class RunConfig:
    taxonomy: str
    output_dir: str
    seed: int = 0
    tau: float = 0.3
    bm25: Bm25Params = field(default_factory=Bm25Params)
    rerank_cutoff: int | None = None
    zero_shot_chunk_size: int = 200
    label_window_ms: float = DEFAULT_WINDOW_MS
    parallelism: int = 1
    lexicon: str | None = None
    prompts: str | None = None
    providers: dict[str, ProviderConfig] = field(default_factory=dict)

    def provider_config(self, role: str) -> ProviderConfig:
        if role in self.providers:
            return self.providers[role]
        return ProviderConfig(kind="mock", model_id=f"mock-{role}", seed=self.seed)

    def make_provider(self, role: str):
        cfg = self.provider_config(role)
        prompts = load_prompts(self.prompts) if cfg.kind == "http" else None
        provider = build_provider(cfg, role, prompts=prompts)
        if role == "interpreter" and cfg.kind == "mock" and self.lexicon:
            provider.lexicon = load_lexicon(self.lexicon)
        return provider

    # artifact locations inside output_dir
    def dense_index_path(self) -> str:
        return os.path.join(self.output_dir, "dense_index.jsonl")

    def bm25_index_path(self) -> str:
        return os.path.join(self.output_dir, "bm25_index.json")

    def judge_cache_path(self) -> str:
        return os.path.join(self.output_dir, "judge_cache.jsonl")


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _parse_window(value) -> float:
    if value in ("inf", "infinite", None):
        return math.inf
    try:
        window = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"label_window_ms: not a number or 'inf': {value!r}") from None
    _require(window > 0, "label_window_ms", "must be positive")
    return window


def _parse_provider(role: str, raw: dict, default_seed: int) -> ProviderConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"providers.{role}: expected a mapping")
    known = {"kind", "model_id", "endpoint", "timeout_ms", "max_retries",
             "backoff_ms", "seed", "dimension", "lexicon_path", "auth_env"}
    for key in raw:
        _require(key in known, f"providers.{role}.{key}", "unknown key")
    kwargs = {"seed": default_seed, "model_id": f"mock-{role}"}
    kwargs.update(raw)
    try:
        return ProviderConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"providers.{role}: {exc}") from exc


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run config; errors name the offending key."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    _require("taxonomy" in raw, "taxonomy", "required")
    taxonomy = resolve(str(raw["taxonomy"]))
    _require(os.path.exists(taxonomy), "taxonomy", f"file not found: {taxonomy}")

    output_dir = resolve(str(raw.get("output_dir", "out")))

    tau = float(raw.get("tau", 0.3))
    _require(-1.0 <= tau <= 1.0, "tau", "must be in [-1, 1]")

    bm25_raw = raw.get("bm25", {}) or {}
    bm25 = Bm25Params(k1=float(bm25_raw.get("k1", 1.2)),
                      b=float(bm25_raw.get("b", 0.75)),
                      top_k=int(bm25_raw.get("top_k", 100)))
    _require(bm25.k1 > 0, "bm25.k1", "must be positive")
    _require(0.0 <= bm25.b <= 1.0, "bm25.b", "must be in [0, 1]")
    _require(bm25.top_k > 0, "bm25.top_k", "must be positive")

    rerank_cutoff = raw.get("rerank_cutoff")
    if rerank_cutoff is not None:
        rerank_cutoff = int(rerank_cutoff)
        _require(rerank_cutoff > 0, "rerank_cutoff", "must be positive")

    chunk_size = int(raw.get("zero_shot_chunk_size", 200))
    _require(chunk_size > 0, "zero_shot_chunk_size", "must be positive")

    parallelism = int(raw.get("parallelism", 1))
    _require(parallelism > 0, "parallelism", "must be positive")

    seed = int(raw.get("seed", 0))

    lexicon = raw.get("lexicon")
    if lexicon is not None:
        lexicon = resolve(str(lexicon))
        _require(os.path.exists(lexicon), "lexicon", f"file not found: {lexicon}")

    prompts = raw.get("prompts")
    if prompts is not None:
        prompts = resolve(str(prompts))
        _require(os.path.exists(prompts), "prompts", f"file not found: {prompts}")

    providers = {}
    providers_raw = raw.get("providers", {}) or {}
    if not isinstance(providers_raw, dict):
        raise ConfigError("providers: expected a mapping")
    for role, pr in providers_raw.items():
        _require(role in PROVIDER_ROLES, f"providers.{role}",
                 f"unknown role (expected one of {', '.join(PROVIDER_ROLES)})")
        providers[role] = _parse_provider(role, pr, seed)

    return RunConfig(
        taxonomy=taxonomy,
        output_dir=output_dir,
        seed=seed,
        tau=tau,
        bm25=bm25,
        rerank_cutoff=rerank_cutoff,
        zero_shot_chunk_size=chunk_size,
        label_window_ms=_parse_window(raw.get("label_window_ms", DEFAULT_WINDOW_MS)),
        parallelism=parallelism,
        lexicon=lexicon,
        prompts=prompts,
        providers=providers,
    )
