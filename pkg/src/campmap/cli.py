"""Batch orchestration CLI: index, map, label, eval, ablate, fixtures.

Exit codes: 2 config error, 3 taxonomy error, 4 provider error,
5 truth/coverage alignment error. Diagnostics go to stderr; data lands in
files so stdout stays clean for piping.
"""

import functools
import json
import math
import os
import sys

import click

from . import fixtures as fixtures_mod
from .config import RunConfig, load_config
from .errors import ConfigError, ProviderError, TaxonomyError
from .evaluation import (
    JudgeCache,
    MetricRow,
    aggregate,
    coherence,
    harmonic_f1,
    judge_metrics,
    load_truth,
    precision_recall_f1,
    render_table,
)
from .inference import (
    Campaign,
    baseline_bm25,
    baseline_dense,
    baseline_zero_shot,
    load_campaigns,
    load_coverage,
    run_ablation,
    run_pipeline,
)
from .labeling import build_labels, coverage_lookup, load_exposures, load_purchases, save_labels
from .retrieval import (
    build_dense_index,
    bm25_build,
    load_bm25_index,
    load_dense_index,
    save_bm25_index,
    save_dense_index,
)
from .taxonomy import load_taxonomy

EXIT_CONFIG = 2
EXIT_TAXONOMY = 3
EXIT_PROVIDER = 4
EXIT_ALIGNMENT = 5


class AlignmentError(Exception):
    pass


def _eprint(message: str) -> None:
    click.echo(message, err=True)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _eprint(f"config error: {exc}")
            sys.exit(EXIT_CONFIG)
        except TaxonomyError as exc:
            _eprint(f"taxonomy error: {exc}")
            sys.exit(EXIT_TAXONOMY)
        except ProviderError as exc:
            _eprint(f"provider error: {exc}")
            sys.exit(EXIT_PROVIDER)
        except AlignmentError as exc:
            _eprint(f"alignment error: {exc}")
            sys.exit(EXIT_ALIGNMENT)
    return wrapper


@click.group()
def main():
    """Campaign-to-product-type mapping, labeling, and evaluation."""


def _load(config_path: str) -> RunConfig:
    return load_config(config_path)


def _dense_index(config: RunConfig):
    path = config.dense_index_path()
    if not os.path.exists(path):
        raise ConfigError(f"dense index not found at {path}; run `campmap index` first")
    return load_dense_index(path, expected_model_id=config.provider_config("embedder").model_id)


def _bm25_index(config: RunConfig):
    path = config.bm25_index_path()
    if not os.path.exists(path):
        raise ConfigError(f"bm25 index not found at {path}; run `campmap index` first")
    return load_bm25_index(path)


@main.command("index")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@_exit_codes
def cmd_index(config_path):
    """Build and persist the dense and BM25 indexes."""
    config = _load(config_path)
    taxonomy = load_taxonomy(config.taxonomy)
    embedder = config.make_provider("embedder")
    dense = build_dense_index(taxonomy, embedder)
    bm25 = bm25_build(taxonomy, k1=config.bm25.k1, b=config.bm25.b)
    os.makedirs(config.output_dir, exist_ok=True)
    save_dense_index(dense, config.dense_index_path())
    save_bm25_index(bm25, config.bm25_index_path())
    _eprint(f"indexed {len(taxonomy)} PTs (dimension {dense.dimension})")


def _map_one(system: str, campaign: Campaign, config: RunConfig, ctx: dict):
    if system == "pipeline":
        return run_pipeline(
            campaign, taxonomy=ctx["taxonomy"], dense_index=ctx["dense"],
            embedder=ctx["embedder"], interpreter=ctx["interpreter"],
            classifier=ctx["classifier"], reranker=ctx.get("reranker"),
            tau=config.tau, rerank_cutoff=config.rerank_cutoff,
            parallelism=config.parallelism)
    if system == "bm25":
        return baseline_bm25(campaign, ctx["bm25"], config.bm25.top_k)
    if system == "zero_shot":
        return baseline_zero_shot(campaign, ctx["taxonomy"], ctx["selector"],
                                  config.zero_shot_chunk_size)
    if system.startswith("dense@"):
        tau = float(system.split("@", 1)[1])
        if not -1.0 <= tau <= 1.0:
            raise ConfigError(f"dense threshold out of range: {tau}")
        return baseline_dense(campaign, ctx["dense"], ctx["embedder"], tau,
                              system_id=system)
    raise ConfigError(f"unknown system {system!r}")


@main.command("map")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--campaigns", "campaigns_path", required=True, type=click.Path(exists=True))
@click.option("--system", required=True,
              help="pipeline | bm25 | zero_shot | dense@TAU")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--continue-on-error", is_flag=True, default=False)
@_exit_codes
def cmd_map(config_path, campaigns_path, system, out_path, continue_on_error):
    """Run one system over all campaigns; checkpoint-resumable per campaign."""
    config = _load(config_path)
    taxonomy = load_taxonomy(config.taxonomy)
    campaigns = load_campaigns(campaigns_path)

    ctx = {"taxonomy": taxonomy}
    if system in ("pipeline",) or system.startswith("dense@"):
        ctx["dense"] = _dense_index(config)
        ctx["embedder"] = config.make_provider("embedder")
    if system == "pipeline":
        ctx["interpreter"] = config.make_provider("interpreter")
        ctx["classifier"] = config.make_provider("classifier")
        if config.rerank_cutoff is not None:
            ctx["reranker"] = config.make_provider("reranker")
    if system == "bm25":
        ctx["bm25"] = _bm25_index(config)
    if system == "zero_shot":
        ctx["selector"] = config.make_provider("selector")

    # resume: keep only complete, valid lines already on disk
    done: set[str] = set()
    kept_lines: list[str] = []
    if os.path.exists(out_path):
        with open(out_path, encoding="utf-8") as fh:
            for line in fh:
                try:
                    record = json.loads(line)
                    done.add(record["campaign_id"])
                    kept_lines.append(line.rstrip("\n"))
                except (json.JSONDecodeError, KeyError):
                    continue
        with open(out_path, "w", encoding="utf-8") as fh:
            for line in kept_lines:
                fh.write(line + "\n")

    skipped = 0
    with open(out_path, "a", encoding="utf-8") as fh:
        for campaign in campaigns:
            if campaign.id in done:
                continue
            try:
                cov = _map_one(system, campaign, config, ctx)
            except ProviderError as exc:
                if not continue_on_error:
                    raise
                _eprint(f"campaign {campaign.id}: skipped ({exc})")
                skipped += 1
                continue
            fh.write(json.dumps(cov.to_record()) + "\n")
            fh.flush()
    _eprint(f"mapped {len(campaigns) - len(done) - skipped} campaigns "
            f"({len(done)} resumed, {skipped} skipped) -> {out_path}")


@main.command("label")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--coverage", "coverage_path", required=True, type=click.Path(exists=True))
@click.option("--exposures", "exposures_path", required=True, type=click.Path(exists=True))
@click.option("--purchases", "purchases_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--window", default=None,
              help="attribution window in ms, or 'inf' (default: config value)")
@_exit_codes
def cmd_label(config_path, coverage_path, exposures_path, purchases_path, out_path, window):
    """Construct user-campaign purchase labels from coverage and event logs."""
    config = _load(config_path)
    taxonomy = load_taxonomy(config.taxonomy)
    window_ms = config.label_window_ms
    if window is not None:
        window_ms = math.inf if window == "inf" else float(window)
    coverage = coverage_lookup(load_coverage(coverage_path))
    labels = build_labels(coverage,
                          load_exposures(exposures_path),
                          load_purchases(purchases_path),
                          window_ms=window_ms,
                          known_pt_ids=set(taxonomy.by_id))
    save_labels(labels, out_path)
    positive = sum(1 for lab in labels if lab.label == 1)
    rate = positive / len(labels) if labels else 0.0
    _eprint(f"{len(labels)} labels, positive rate {rate:.4f} -> {out_path}")


def _campaign_lookup(campaigns_path):
    return {c.id: c for c in load_campaigns(campaigns_path)}


def _judge_rows(config, taxonomy, systems_by_campaign, campaigns, dense=None):
    judge = config.make_provider("judge")
    os.makedirs(config.output_dir, exist_ok=True)
    cache = JudgeCache(config.judge_cache_path())
    rows = []
    for cid in sorted(systems_by_campaign):
        if cid not in campaigns:
            raise AlignmentError(f"campaign {cid!r} in coverage but not in campaigns file")
        systems = systems_by_campaign[cid]
        metrics = judge_metrics(campaigns[cid], systems, judge, taxonomy, cache=cache)
        for sid, (lp, lr, ls) in metrics.items():
            coh = None
            if dense is not None:
                coh = coherence(systems[sid].pt_ids(), dense)
            f1 = harmonic_f1(lp, lr) if lp is not None and lr is not None else None
            rows.append(MetricRow(system_id=sid, campaign_id=cid,
                                  f1=f1, coherence=coh,
                                  llm_precision=lp, llm_recall=lr, llm_score=ls))
    return rows


def _write_report(report, out_path, table, mode):
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    if table:
        rendered = render_table(report, mode=mode)
        table_path = os.path.splitext(out_path)[0] + ".txt"
        with open(table_path, "w", encoding="utf-8") as fh:
            fh.write(rendered + "\n")
        _eprint(rendered)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["human", "judge"]), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True), default=None)
@click.option("--campaigns", "campaigns_path", type=click.Path(exists=True), default=None,
              help="campaign file (required in judge mode)")
@click.option("--coverage", "coverage_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--table", is_flag=True, default=False)
@_exit_codes
def cmd_eval(config_path, mode, truth_path, campaigns_path, coverage_paths, out_path, table):
    """Evaluate one or more coverage files against truth or the LLM judge."""
    config = _load(config_path)
    taxonomy = load_taxonomy(config.taxonomy)
    dense = None
    if os.path.exists(config.dense_index_path()):
        dense = _dense_index(config)

    coverages = [cov for path in coverage_paths for cov in load_coverage(path)]

    if mode == "human":
        if truth_path is None:
            raise ConfigError("human mode requires --truth")
        truth = load_truth(truth_path, taxonomy)
        rows = []
        for cov in coverages:
            if cov.campaign_id not in truth:
                raise AlignmentError(
                    f"campaign {cov.campaign_id!r} in coverage but not in truth")
            p, r, f1 = precision_recall_f1(cov.pt_ids(), truth[cov.campaign_id])
            coh = coherence(cov.pt_ids(), dense) if dense is not None else None
            rows.append(MetricRow(system_id=cov.system_id, campaign_id=cov.campaign_id,
                                  precision=p, recall=r, f1=f1, coherence=coh))
    else:
        if campaigns_path is None:
            raise ConfigError("judge mode requires --campaigns")
        campaigns = _campaign_lookup(campaigns_path)
        systems_by_campaign: dict[str, dict] = {}
        for cov in coverages:
            systems_by_campaign.setdefault(cov.campaign_id, {})[cov.system_id] = cov
        rows = _judge_rows(config, taxonomy, systems_by_campaign, campaigns, dense)

    report = aggregate(rows)
    _write_report(report, out_path, table, mode)
    _eprint(f"evaluated {len(rows)} (system, campaign) rows -> {out_path}")


@main.command("ablate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--campaigns", "campaigns_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.option("--table", is_flag=True, default=False)
@_exit_codes
def cmd_ablate(config_path, campaigns_path, out_dir, table):
    """Run the four pipeline variants and judge-evaluate them together."""
    config = _load(config_path)
    taxonomy = load_taxonomy(config.taxonomy)
    campaigns = load_campaigns(campaigns_path)
    dense = _dense_index(config)
    embedder = config.make_provider("embedder")
    interpreter = config.make_provider("interpreter")
    classifier = config.make_provider("classifier")
    reranker = config.make_provider("reranker")

    os.makedirs(out_dir, exist_ok=True)
    per_variant: dict[str, list] = {}
    containment_ok = True
    for campaign in campaigns:
        variants = run_ablation(
            campaign, taxonomy=taxonomy, dense_index=dense, embedder=embedder,
            interpreter=interpreter, classifier=classifier, reranker=reranker,
            tau=config.tau, rerank_cutoff=config.rerank_cutoff,
            parallelism=config.parallelism)
        if not variants["des_retrieval_llm"].pt_ids() <= variants["des_retrieval"].pt_ids():
            containment_ok = False
        for name, cov in variants.items():
            per_variant.setdefault(name, []).append(cov)

    for name, covs in per_variant.items():
        path = os.path.join(out_dir, f"ablation_{name}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for cov in covs:
                fh.write(json.dumps(cov.to_record()) + "\n")

    systems_by_campaign: dict[str, dict] = {}
    for name, covs in per_variant.items():
        for cov in covs:
            systems_by_campaign.setdefault(cov.campaign_id, {})[name] = cov
    rows = _judge_rows(config, taxonomy, systems_by_campaign,
                       {c.id: c for c in campaigns}, dense)
    report = aggregate(rows)
    payload = report.to_json()
    payload["metadata"] = {"variants": list(per_variant),
                           "containment_ok": containment_ok}
    out_path = os.path.join(out_dir, "report.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if table:
        rendered = render_table(report, mode="judge")
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(rendered + "\n")
        _eprint(rendered)
    _eprint(f"ablation over {len(campaigns)} campaigns -> {out_dir}")


@main.command("fixtures")
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--themes", default=10, type=int)
@click.option("--campaigns-per-theme", default=2, type=int)
@click.option("--users", default=120, type=int)
@_exit_codes
def cmd_fixtures(out_dir, seed, themes, campaigns_per_theme, users):
    """Emit the seeded synthetic taxonomy/campaign/event fixture corpus."""
    paths = fixtures_mod.generate_corpus(out_dir, seed=seed, num_themes=themes,
                                         campaigns_per_theme=campaigns_per_theme,
                                         num_users=users)
    _eprint("fixture corpus written:")
    for name, path in paths.items():
        _eprint(f"  {name}: {path}")


if __name__ == "__main__":
    main()
