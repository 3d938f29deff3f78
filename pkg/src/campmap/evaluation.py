"""Mapping-quality metrics: set precision/recall/F1, coherence, Jaccard
agreement, judge-based metrics over the cross-system union, and mean ± std
aggregation in the shape of the reference tables.

Undefined metric values are represented as None and never coerced to 0;
aggregation runs over defined values only.
"""

import json
import math
import os
from dataclasses import dataclass, field
from itertools import combinations

from .errors import EmptyTruth, MissingEmbedding
from .providers import RelevanceGrade
from .retrieval import DenseIndex
from .taxonomy import Taxonomy

METRIC_FIELDS = (
    "precision", "recall", "f1", "coherence",
    "llm_precision", "llm_recall", "llm_score",
)

TABLE_COLUMNS = ("Precision", "Recall", "F1", "Coherence", "LLM Score")


def load_truth(path, taxonomy: Taxonomy | None = None) -> dict[str, set[str]]:
    """Truth JSONL: {"campaign_id", "pt_ids": [...]}; sets must be non-empty."""
    truth: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            pt_ids = set(record["pt_ids"])
            if not pt_ids:
                raise EmptyTruth(f"empty truth set for {record['campaign_id']!r}")
            if taxonomy is not None:
                unknown = pt_ids - set(taxonomy.by_id)
                if unknown:
                    raise EmptyTruth(
                        f"truth for {record['campaign_id']!r} has unknown pts {sorted(unknown)}")
            truth[record["campaign_id"]] = pt_ids
    return truth


def harmonic_f1(p: float, r: float) -> float | None:
    if p + r == 0:
        return None
    return 2 * p * r / (p + r)


def precision_recall_f1(pred: set, truth: set):
    """(precision, recall, f1) per set overlap; precision/f1 may be None."""
    if not truth:
        raise EmptyTruth("truth set is empty")
    hits = len(pred & truth)
    recall = hits / len(truth)
    if not pred:
        return None, recall, None
    precision = hits / len(pred)
    return precision, recall, harmonic_f1(precision, recall)


def coherence(pred_pt_ids: set, index: DenseIndex) -> float | None:
    """Mean pairwise cosine over all unordered pairs; None for fewer than 2."""
    ids = sorted(pred_pt_ids)
    if len(ids) < 2:
        return None
    vectors = index.vectors_by_id()
    for pid in ids:
        if pid not in vectors:
            raise MissingEmbedding(pid)
    total = 0.0
    count = 0
    for a, b in combinations(ids, 2):
        total += float(vectors[a] @ vectors[b])
        count += 1
    return total / count


def jaccard_agreement(set_a: set, set_b: set) -> float:
    """Jaccard similarity; two empty sets agree perfectly (1.0)."""
    union = set_a | set_b
    if not union:
        return 1.0
    return len(set_a & set_b) / len(union)


class JudgeCache:
    """Persistent (campaign_id, pt_id, model_id) -> grade cache.

    Backed by an append-only JSONL file so reruns and multi-system
    evaluations never grade the same pair twice.
    """

    def __init__(self, path=None):
        self.path = path
        self._grades: dict[tuple[str, str, str], RelevanceGrade] = {}
        if path is not None and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    r = json.loads(line)
                    key = (r["campaign_id"], r["pt_id"], r["model_id"])
                    self._grades[key] = RelevanceGrade(r["grade"])

    def get(self, campaign_id: str, pt_id: str, model_id: str):
        return self._grades.get((campaign_id, pt_id, model_id))

    def put(self, campaign_id: str, pt_id: str, model_id: str,
            grade: RelevanceGrade) -> None:
        key = (campaign_id, pt_id, model_id)
        if key in self._grades:
            return
        self._grades[key] = grade
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({
                    "campaign_id": campaign_id, "pt_id": pt_id,
                    "model_id": model_id, "grade": grade.value,
                }) + "\n")


def judge_metrics(campaign, systems: dict, judge, taxonomy: Taxonomy,
                  cache: JudgeCache | None = None) -> dict:
    """Per-system (llm_precision, llm_recall, llm_score).

    Every pt in the union of all systems' predictions is graded exactly once
    (cache-backed). Recall's denominator is the judge-relevant subset of that
    union; precision is over each system's own predictions. A judge failure
    aborts the whole campaign's judge evaluation.
    """
    if not systems:
        raise ValueError("judge_metrics requires at least one system")
    if cache is None:
        cache = JudgeCache()
    text = campaign.canonical_text()
    predictions = {sid: cov.pt_ids() for sid, cov in systems.items()}
    union = sorted(set().union(*predictions.values()))

    grades: dict[str, RelevanceGrade] = {}
    for pt_id in union:
        grade = cache.get(campaign.id, pt_id, judge.model_id)
        if grade is None:
            grade = judge.judge_relevance(text, taxonomy.render(pt_id))
            cache.put(campaign.id, pt_id, judge.model_id, grade)
        grades[pt_id] = grade
    relevant = {pid for pid, g in grades.items() if g is not RelevanceGrade.IRRELEVANT}

    out = {}
    for sid in systems:
        pred = predictions[sid]
        llm_precision = len(pred & relevant) / len(pred) if pred else None
        llm_recall = len(pred & relevant) / len(relevant) if relevant else None
        if pred:
            llm_score = judge.judge_set_score(
                text, [taxonomy.render(pid) for pid in sorted(pred)])
        else:
            llm_score = None
        out[sid] = (llm_precision, llm_recall, llm_score)
    return out


@dataclass
class MetricRow:
    system_id: str
    campaign_id: str
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    coherence: float | None = None
    llm_precision: float | None = None
    llm_recall: float | None = None
    llm_score: float | None = None

    def to_record(self) -> dict:
        record = {"system_id": self.system_id, "campaign_id": self.campaign_id}
        for name in METRIC_FIELDS:
            record[name] = getattr(self, name)
        return record


@dataclass
class EvalReport:
    rows: list[MetricRow]
    # system_id -> metric -> {"mean", "std" (None for n<2), "n"}
    aggregates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"rows": [r.to_record() for r in self.rows],
                "aggregates": self.aggregates}


def _mean_std(values: list[float]):
    n = len(values)
    if n == 0:
        return None, None, 0
    mean = sum(values) / n
    if n < 2:
        return mean, None, n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var), n


def aggregate(rows: list[MetricRow]) -> EvalReport:
    """Per (system, metric) mean and sample std over defined values only."""
    if not rows:
        raise ValueError("aggregate requires at least one row")
    systems: dict[str, dict] = {}
    order: list[str] = []
    for row in rows:
        if row.system_id not in systems:
            systems[row.system_id] = {}
            order.append(row.system_id)
    for sid in order:
        for metric in METRIC_FIELDS:
            values = [getattr(r, metric) for r in rows
                      if r.system_id == sid and getattr(r, metric) is not None]
            mean, std, n = _mean_std(values)
            systems[sid][metric] = {"mean": mean, "std": std, "n": n}
    return EvalReport(rows=rows, aggregates=systems)


def format_cell(stat: dict | None) -> str:
    """"mean ± std" to 4 decimals; mean only for n=1; "--" when undefined."""
    if stat is None or stat["n"] == 0 or stat["mean"] is None:
        return "--"
    if stat["std"] is None:
        return f"{stat['mean']:.4f}"
    return f"{stat['mean']:.4f} ± {stat['std']:.4f}"


def render_table(report: EvalReport, mode: str = "human") -> str:
    """Aligned-text table mirroring the reference layout.

    Columns: Precision, Recall, F1, Coherence, LLM Score. Human mode fills
    P/R from set metrics; judge mode fills them from the judge metrics.
    """
    if mode == "human":
        pr_fields = ("precision", "recall")
    elif mode == "judge":
        pr_fields = ("llm_precision", "llm_recall")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    fields = (*pr_fields, "f1", "coherence", "llm_score")

    rows = []
    for sid, stats in report.aggregates.items():
        rows.append([sid] + [format_cell(stats.get(f)) for f in fields])
    header = ["Model", *TABLE_COLUMNS]
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)
