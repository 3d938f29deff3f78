import math
import random
from itertools import combinations

import numpy as np
import pytest

from campmap.errors import EmptyTruth, MissingEmbedding
from campmap.evaluation import (
    EvalReport,
    JudgeCache,
    MetricRow,
    aggregate,
    coherence,
    format_cell,
    harmonic_f1,
    jaccard_agreement,
    judge_metrics,
    load_truth,
    precision_recall_f1,
    render_table,
)
from campmap.inference import Campaign, CoverageEntry, CoverageSet
from campmap.providers import RelevanceGrade
from campmap.retrieval import build_dense_index

from conftest import write_jsonl


def bitmask_prf(pred_mask, truth_mask, width):
    """Independent oracle on subsets of range(width) encoded as bitmasks."""
    hits = bin(pred_mask & truth_mask).count("1")
    n_pred = bin(pred_mask).count("1")
    n_truth = bin(truth_mask).count("1")
    recall = hits / n_truth
    if n_pred == 0:
        return None, recall, None
    precision = hits / n_pred
    if precision + recall == 0:
        return precision, recall, None
    return precision, recall, 2 * precision * recall / (precision + recall)


def mask_to_set(mask, width):
    return {i for i in range(width) if mask >> i & 1}


class TestPrecisionRecallF1:
    def test_perfect(self):
        assert precision_recall_f1({"a", "b"}, {"a", "b"}) == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        p, r, f1 = precision_recall_f1({"a"}, {"b"})
        assert (p, r) == (0.0, 0.0)
        assert f1 is None  # 0/0 harmonic mean is undefined

    def test_half_precision_full_recall(self):
        p, r, f1 = precision_recall_f1({"a", "b"}, {"a"})
        assert (p, r) == (0.5, 1.0)
        assert f1 == pytest.approx(2 / 3)

    def test_empty_pred_precision_undefined(self):
        p, r, f1 = precision_recall_f1(set(), {"a"})
        assert p is None and f1 is None
        assert r == 0.0

    def test_empty_truth_rejected(self):
        with pytest.raises(EmptyTruth):
            precision_recall_f1({"a"}, set())

    def test_exhaustive_small_universe(self):
        width = 5
        for pred_mask in range(1 << width):
            for truth_mask in range(1, 1 << width):
                got = precision_recall_f1(mask_to_set(pred_mask, width),
                                          mask_to_set(truth_mask, width))
                want = bitmask_prf(pred_mask, truth_mask, width)
                for g, w in zip(got, want):
                    if w is None:
                        assert g is None
                    else:
                        assert g == pytest.approx(w, abs=1e-12)

    def test_f1_identities(self):
        rng = random.Random(3)
        universe = list(range(12))
        for _ in range(200):
            pred = set(rng.sample(universe, rng.randrange(0, 9)))
            truth = set(rng.sample(universe, rng.randrange(1, 9)))
            p, r, f1 = precision_recall_f1(pred, truth)
            if p is None or f1 is None:
                continue
            assert f1 == pytest.approx(2 * p * r / (p + r), abs=1e-12)
            assert f1 <= min(2 * p, 2 * r) + 1e-12
            assert f1 <= max(p, r) + 1e-12


def test_harmonic_f1():
    assert harmonic_f1(1.0, 1.0) == 1.0
    assert harmonic_f1(0.0, 0.0) is None
    assert harmonic_f1(0.5, 1.0) == pytest.approx(2 / 3)


class TestCoherence:
    def test_fewer_than_two_undefined(self, grocery_taxonomy, embedder):
        index = build_dense_index(grocery_taxonomy, embedder)
        assert coherence(set(), index) is None
        assert coherence({"pt1"}, index) is None

    def test_hand_mean_of_pairs(self, grocery_taxonomy, embedder):
        index = build_dense_index(grocery_taxonomy, embedder)
        ids = {"pt1", "pt2", "pt3", "pt5"}
        vecs = index.vectors_by_id()
        want = np.mean([float(vecs[a] @ vecs[b])
                        for a, b in combinations(sorted(ids), 2)])
        got = coherence(ids, index)
        assert got == pytest.approx(want, abs=1e-12)
        # 4 ids -> 6 unordered pairs in the mean
        assert len(list(combinations(ids, 2))) == 6

    def test_sibling_types_more_coherent_than_mixed(self, grocery_taxonomy, embedder):
        index = build_dense_index(grocery_taxonomy, embedder)
        assert coherence({"pt1", "pt2"}, index) > coherence({"pt1", "pt5"}, index)

    def test_order_independent(self, grocery_taxonomy, embedder):
        index = build_dense_index(grocery_taxonomy, embedder)
        assert coherence({"pt1", "pt3", "pt4"}, index) == \
               coherence({"pt4", "pt1", "pt3"}, index)

    def test_missing_embedding(self, grocery_taxonomy, embedder):
        index = build_dense_index(grocery_taxonomy, embedder)
        with pytest.raises(MissingEmbedding):
            coherence({"pt1", "pt99"}, index)


class TestJaccard:
    def test_values(self):
        assert jaccard_agreement({"a"}, {"a"}) == 1.0
        assert jaccard_agreement({"a"}, {"b"}) == 0.0
        assert jaccard_agreement({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3)

    def test_both_empty_is_full_agreement(self):
        assert jaccard_agreement(set(), set()) == 1.0

    def test_symmetric(self):
        rng = random.Random(1)
        for _ in range(50):
            a = set(rng.sample(range(10), rng.randrange(0, 6)))
            b = set(rng.sample(range(10), rng.randrange(0, 6)))
            assert jaccard_agreement(a, b) == jaccard_agreement(b, a)


def make_coverage(campaign_id, system_id, pt_ids):
    entries = tuple(CoverageEntry(pid, RelevanceGrade.STRONG, 1.0, "DENSE")
                    for pid in sorted(pt_ids))
    return CoverageSet(campaign_id=campaign_id, system_id=system_id,
                       entries=entries)


class TestJudgeMetrics:
    def test_two_system_worked_example(self, grocery_taxonomy, judge):
        # campaign relevant to pt2 (bananas: STRONG) and pt4 (money: WEAK);
        # pt1 (apples) is judged IRRELEVANT.  A={pt1,pt2}, B={pt2,pt4}:
        # relevant union = {pt2, pt4} so A -> (0.5, 0.5), B -> (1.0, 1.0)
        campaign = Campaign("c1", "bananas and money saving deals", "")
        systems = {"A": make_coverage("c1", "A", {"pt1", "pt2"}),
                   "B": make_coverage("c1", "B", {"pt2", "pt4"})}
        out = judge_metrics(campaign, systems, judge, grocery_taxonomy)
        assert out["A"][0] == 0.5 and out["A"][1] == 0.5
        assert out["B"][0] == 1.0 and out["B"][1] == 1.0

    def test_union_graded_exactly_once(self, grocery_taxonomy, judge):
        calls = []
        real = judge.judge_relevance

        class Counting:
            model_id = judge.model_id

            def judge_relevance(self, text, pt):
                calls.append(pt)
                return real(text, pt)

            def judge_set_score(self, text, pts):
                return judge.judge_set_score(text, pts)

        campaign = Campaign("c1", "bananas and money saving deals", "")
        systems = {"A": make_coverage("c1", "A", {"pt1", "pt2"}),
                   "B": make_coverage("c1", "B", {"pt2", "pt4"})}
        cache = JudgeCache()
        judge_metrics(campaign, systems, Counting(), grocery_taxonomy, cache)
        assert len(calls) == 3  # union {pt1, pt2, pt4}, no repeats
        judge_metrics(campaign, systems, Counting(), grocery_taxonomy, cache)
        assert len(calls) == 3  # fully served from cache on rerun

    def test_empty_prediction_undefined(self, grocery_taxonomy, judge):
        campaign = Campaign("c1", "bananas", "")
        systems = {"A": make_coverage("c1", "A", set()),
                   "B": make_coverage("c1", "B", {"pt2"})}
        out = judge_metrics(campaign, systems, judge, grocery_taxonomy)
        assert out["A"] == (None, 0.0, None)

    def test_no_relevant_pts_recall_undefined(self, grocery_taxonomy, judge):
        campaign = Campaign("c1", "garden furniture", "")
        systems = {"A": make_coverage("c1", "A", {"pt1"})}
        out = judge_metrics(campaign, systems, judge, grocery_taxonomy)
        assert out["A"][0] == 0.0 and out["A"][1] is None

    def test_requires_systems(self, grocery_taxonomy, judge):
        with pytest.raises(ValueError):
            judge_metrics(Campaign("c", "t", ""), {}, judge, grocery_taxonomy)


class TestJudgeCache:
    def test_persists_and_reloads(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = JudgeCache(path)
        cache.put("c1", "pt1", "m", RelevanceGrade.WEAK)
        cache.put("c1", "pt2", "m", RelevanceGrade.STRONG)
        reloaded = JudgeCache(path)
        assert reloaded.get("c1", "pt1", "m") is RelevanceGrade.WEAK
        assert reloaded.get("c1", "pt2", "m") is RelevanceGrade.STRONG

    def test_keyed_by_model(self, tmp_path):
        cache = JudgeCache(tmp_path / "c.jsonl")
        cache.put("c1", "pt1", "m1", RelevanceGrade.WEAK)
        assert cache.get("c1", "pt1", "m2") is None

    def test_duplicate_put_not_appended(self, tmp_path):
        path = tmp_path / "c.jsonl"
        cache = JudgeCache(path)
        cache.put("c1", "pt1", "m", RelevanceGrade.WEAK)
        cache.put("c1", "pt1", "m", RelevanceGrade.STRONG)  # ignored
        assert len(path.read_text().splitlines()) == 1
        assert JudgeCache(path).get("c1", "pt1", "m") is RelevanceGrade.WEAK


class TestAggregation:
    def test_mean_and_sample_std(self):
        rows = [MetricRow("s", "c1", precision=0.8),
                MetricRow("s", "c2", precision=1.0)]
        stat = aggregate(rows).aggregates["s"]["precision"]
        assert stat["mean"] == pytest.approx(0.9)
        assert stat["std"] == pytest.approx(math.sqrt(0.02), abs=1e-12)
        assert stat["n"] == 2

    def test_none_values_excluded(self):
        rows = [MetricRow("s", "c1", precision=0.5),
                MetricRow("s", "c2", precision=None)]
        stat = aggregate(rows).aggregates["s"]["precision"]
        assert stat == {"mean": 0.5, "std": None, "n": 1}

    def test_all_undefined(self):
        stat = aggregate([MetricRow("s", "c1")]).aggregates["s"]["f1"]
        assert stat == {"mean": None, "std": None, "n": 0}

    def test_systems_kept_separate(self):
        rows = [MetricRow("a", "c1", recall=1.0), MetricRow("b", "c1", recall=0.0)]
        agg = aggregate(rows).aggregates
        assert agg["a"]["recall"]["mean"] == 1.0
        assert agg["b"]["recall"]["mean"] == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestFormatting:
    def test_cell_shapes(self):
        assert format_cell({"mean": 0.8934, "std": 0.0825, "n": 5}) == \
               "0.8934 ± 0.0825"
        assert format_cell({"mean": 0.5, "std": None, "n": 1}) == "0.5000"
        assert format_cell({"mean": None, "std": None, "n": 0}) == "--"
        assert format_cell(None) == "--"

    def test_rounding_to_four_decimals(self):
        assert format_cell({"mean": 1 / 3, "std": 2 / 3, "n": 3}) == \
               "0.3333 ± 0.6667"

    def test_table_columns_and_dashes(self):
        rows = [MetricRow("sysA", "c1", precision=1.0, recall=0.5),
                MetricRow("sysA", "c2", precision=0.5, recall=0.5)]
        table = render_table(aggregate(rows), mode="human")
        header = table.splitlines()[0]
        for col in ("Model", "Precision", "Recall", "F1", "Coherence", "LLM Score"):
            assert col in header
        body = table.splitlines()[2]
        assert "0.7500 ± 0.3536" in body
        assert "--" in body  # undefined coherence / llm score

    def test_judge_mode_uses_llm_columns(self):
        rows = [MetricRow("sysA", "c1", llm_precision=1.0, llm_recall=0.25)]
        table = render_table(aggregate(rows), mode="judge")
        assert "1.0000" in table and "0.2500" in table

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            render_table(aggregate([MetricRow("s", "c")]), mode="bogus")


class TestTruthLoading:
    def test_load(self, tmp_path, grocery_taxonomy):
        path = write_jsonl(tmp_path / "t.jsonl", [
            {"campaign_id": "c1", "pt_ids": ["pt1", "pt2"]}])
        assert load_truth(path, grocery_taxonomy) == {"c1": {"pt1", "pt2"}}

    def test_empty_set_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "t.jsonl", [
            {"campaign_id": "c1", "pt_ids": []}])
        with pytest.raises(EmptyTruth):
            load_truth(path)

    def test_unknown_pt_rejected(self, tmp_path, grocery_taxonomy):
        path = write_jsonl(tmp_path / "t.jsonl", [
            {"campaign_id": "c1", "pt_ids": ["pt99"]}])
        with pytest.raises(EmptyTruth):
            load_truth(path, grocery_taxonomy)


def test_report_json_round_trips():
    import json
    rows = [MetricRow("s", "c1", precision=0.5, recall=1.0, f1=2 / 3)]
    report = aggregate(rows)
    blob = json.dumps(report.to_json())
    back = json.loads(blob)
    assert back["aggregates"]["s"]["precision"]["mean"] == 0.5
    assert back["rows"][0]["campaign_id"] == "c1"
