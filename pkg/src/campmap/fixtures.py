"""Seeded synthetic corpus generator.

Emits a themed taxonomy with deliberate lexical distractors, campaigns whose
raw text is baited toward those distractors, a synonym lexicon that expands
campaign triggers into the theme vocabulary, ground-truth mappings, and user
event logs. The corpus is constructed so that retrieval alone over-selects,
interpretation narrows, and classification removes what remains of the bait.

Everything is a pure function of the seed; file bytes are reproducible.
"""

import json
import os
import random

import yaml

# every campaign carries these, and distractor categories are built from them
BAIT_WORDS = ("money", "guarantee", "delivery", "free")

_CONSONANTS = "bcdfgklmnprstvz"
_VOWELS = "aeiou"


def _new_word(rng: random.Random, used: set[str]) -> str:
    while True:
        n = rng.choice((2, 3))
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n))
        if word not in used and word not in BAIT_WORDS:
            used.add(word)
            return word


def _words(rng, used, count):
    return [_new_word(rng, used) for _ in range(count)]


def generate_corpus(out_dir, seed: int = 0, num_themes: int = 10,
                    campaigns_per_theme: int = 2, nouns_per_theme: int = 10,
                    num_users: int = 120, tau: float = 0.26,
                    dimension: int = 512) -> dict:
    """Write the fixture files into out_dir and return their paths."""
    rng = random.Random(seed)
    used: set[str] = set()
    os.makedirs(out_dir, exist_ok=True)

    themes = []
    for t in range(num_themes):
        themes.append({
            "category": _words(rng, used, 2),
            "families": [_words(rng, used, 2), _words(rng, used, 2)],
            "nouns": _words(rng, used, nouns_per_theme),
            "triggers": _words(rng, used, 2),
        })

    # taxonomy: per theme, each family crossed with each noun
    nodes = []
    truth_by_theme: list[list[str]] = []
    pt_counter = 0
    for t, theme in enumerate(themes):
        theme_ids = []
        for family in theme["families"]:
            for noun in theme["nouns"]:
                pt_id = f"pt{pt_counter:04d}"
                pt_counter += 1
                nodes.append({
                    "id": pt_id,
                    "category": " ".join(theme["category"]),
                    "family": " ".join(family),
                    "type": noun,
                })
                theme_ids.append(pt_id)
        truth_by_theme.append(theme_ids)

    # distractors: category text built from bait words so raw campaign
    # embeddings sit close, while family/type stay out of campaign vocabulary
    distractor_groups = ((4, 10), (3, 15), (2, 15))  # (bait tokens, count)
    for bait_count, count in distractor_groups:
        for _ in range(count):
            pt_id = f"pt{pt_counter:04d}"
            pt_counter += 1
            category = list(BAIT_WORDS[:bait_count]) + _words(rng, used, 4 - bait_count)
            nodes.append({
                "id": pt_id,
                "category": " ".join(category),
                "family": " ".join(_words(rng, used, 2)),
                "type": _new_word(rng, used),
            })

    # campaigns: triggers + category + family words + bait + unique fillers
    campaigns = []
    truth = []
    for t, theme in enumerate(themes):
        for j in range(campaigns_per_theme):
            cid = f"c{t:02d}{j}"
            fillers = _words(rng, used, 2)
            title = " ".join([theme["triggers"][0], *theme["category"],
                              BAIT_WORDS[0], BAIT_WORDS[1]])
            content = " ".join([theme["triggers"][1],
                                *theme["families"][0], *theme["families"][1],
                                BAIT_WORDS[2], BAIT_WORDS[3], *fillers])
            campaigns.append({"id": cid, "title": title, "content": content})
            truth.append({"campaign_id": cid, "pt_ids": truth_by_theme[t]})

    # lexicon: campaign triggers expand into the theme's type vocabulary
    lexicon = []
    for theme in themes:
        expansion = theme["nouns"]
        for trigger in theme["triggers"]:
            lexicon.append({"token": trigger, "expansions": expansion})

    # event logs: exposures then a mix of on-coverage / off-coverage purchases
    truth_by_cid = {r["campaign_id"]: r["pt_ids"] for r in truth}
    all_pt_ids = [n["id"] for n in nodes]
    exposures = []
    purchases = []
    base_ts = 1_700_000_000_000
    day = 24 * 60 * 60 * 1000
    for u in range(num_users):
        user_id = f"u{u:04d}"
        ts = base_ts + rng.randrange(0, 30) * day
        for cid in rng.sample([c["id"] for c in campaigns],
                              k=rng.randrange(1, 4)):
            exposures.append({"user_id": user_id, "campaign_id": cid, "ts": ts})
            roll = rng.random()
            if roll < 0.45:   # purchase inside the window from the truth set
                pt = rng.choice(truth_by_cid[cid])
                purchases.append({"user_id": user_id, "pt_id": pt,
                                  "ts": ts + rng.randrange(1, 6 * day)})
            elif roll < 0.60:  # purchase before exposure: must not count
                pt = rng.choice(truth_by_cid[cid])
                purchases.append({"user_id": user_id, "pt_id": pt,
                                  "ts": ts - rng.randrange(1, 3 * day)})
            elif roll < 0.75:  # unrelated purchase inside the window
                purchases.append({"user_id": user_id,
                                  "pt_id": rng.choice(all_pt_ids),
                                  "ts": ts + rng.randrange(1, 6 * day)})
            ts += rng.randrange(1, 2 * day)
    exposures.sort(key=lambda e: (e["user_id"], e["ts"]))
    purchases.sort(key=lambda e: (e["user_id"], e["ts"]))

    paths = {
        "taxonomy": os.path.join(out_dir, "taxonomy.jsonl"),
        "campaigns": os.path.join(out_dir, "campaigns.jsonl"),
        "lexicon": os.path.join(out_dir, "lexicon.jsonl"),
        "truth": os.path.join(out_dir, "truth.jsonl"),
        "exposures": os.path.join(out_dir, "exposures.jsonl"),
        "purchases": os.path.join(out_dir, "purchases.jsonl"),
        "config": os.path.join(out_dir, "config.yaml"),
    }

    def dump_jsonl(records, path):
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")

    dump_jsonl(nodes, paths["taxonomy"])
    dump_jsonl(campaigns, paths["campaigns"])
    dump_jsonl(lexicon, paths["lexicon"])
    dump_jsonl(truth, paths["truth"])
    dump_jsonl(exposures, paths["exposures"])
    dump_jsonl(purchases, paths["purchases"])

    config = {
        "taxonomy": "taxonomy.jsonl",
        "lexicon": "lexicon.jsonl",
        "output_dir": "out",
        "seed": seed,
        "tau": tau,
        "bm25": {"k1": 1.2, "b": 0.75, "top_k": 100},
        "zero_shot_chunk_size": 200,
        "label_window_ms": 7 * day,
        "parallelism": 1,
        "providers": {
            "embedder": {"kind": "mock", "model_id": "mock-embedder",
                         "dimension": dimension},
        },
    }
    with open(paths["config"], "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=True)

    return paths
