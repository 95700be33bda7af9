"""Deterministic synthetic corpus for demos and end-to-end tests.

A fraction of the examples get hypotheses of unrelated words. These mimic
transcripts that no longer match their audio, so CER filtering should rank
them worst.
"""

from __future__ import annotations

import random
from pathlib import Path

import yaml

from .manifest import AudioRef, Example, write_jsonl, write_manifest

VOCAB = (
    "the a of and to in he she it was for on with as his her they at by this had not are but from or have an "
    "which one you were all we when there can been has more if will would who so no time people year way day "
    "man thing woman life child world school state family student group country problem hand part place case "
    "week company system program question work government number night point home water room mother area money "
    "story fact month lot right study book eye job word business issue side kind head house service friend "
    "father power hour game line end member law car city community name president team minute idea body back "
    "parent face others level office door health person art war history party result change morning reason"
).split()

DATASETS = (("toyread", "eng"),)


def _sentence(rng: random.Random, lo=4, hi=12) -> str:
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(lo, hi)))


def _perturb(rng: random.Random, text: str, p: float = 0.05) -> str:
    words = text.split()
    out = [rng.choice(VOCAB) if rng.random() < p else w for w in words]
    return " ".join(out)


def make_toy_corpus(n: int = 200, noise: float = 0.10, seed: int = 0, clips_per_recording: int = 5):
    """Return ``(examples, hypotheses, segments, noisy_ids)``."""
    rng = random.Random(seed)
    n_noisy = round(n * noise)
    noisy_ids = set(rng.sample([f"utt{i:05d}" for i in range(n)], n_noisy))

    examples, hyps, segments = [], {}, []
    t = 0.0
    prev_text = ""
    for i in range(n):
        ex_id = f"utt{i:05d}"
        rec_idx = i // clips_per_recording
        if i % clips_per_recording == 0:
            t, prev_text = 0.0, ""
        dataset, lang = DATASETS[rec_idx % len(DATASETS)]
        text = _sentence(rng)
        dur = round(0.4 * len(text.split()) + rng.uniform(0.2, 1.0), 3)
        start = round(t, 3)
        end = round(start + dur, 3)
        rid = f"rec{rec_idx:04d}"
        examples.append(
            Example(
                id=ex_id,
                dataset=dataset,
                language=lang,
                task="asr",
                audio=AudioRef(rid, start, end),
                y_src=text,
                y_tgt=text,
                duration_sec=round(end - start, 3),
                y_prev=prev_text,
            )
        )
        hyps[ex_id] = _sentence(rng) if ex_id in noisy_ids else _perturb(rng, text)
        segments.append(
            {"id": ex_id, "recording_id": rid, "start_sec": start, "end_sec": end, "text": text,
             "dataset": dataset, "language": lang}
        )
        gap = round(rng.uniform(0.05, 0.3), 3)
        # occasional untranscribed stretch between clips
        if rng.random() < 0.15:
            u_end = round(end + gap + rng.uniform(1.0, 3.0), 3)
            segments.append(
                {"id": f"{ex_id}-untr", "recording_id": rid, "start_sec": round(end + gap, 3), "end_sec": u_end,
                 "text": None, "dataset": dataset, "language": lang}
            )
            t = u_end + gap
        else:
            t = end + gap
        prev_text = text
    return examples, hyps, segments, sorted(noisy_ids)


def pipeline_config(seed: int = 0) -> dict:
    return {
        "seed": seed,
        "manifest": "manifest.jsonl",
        "stages": [
            {"name": "stats"},
            {"name": "score", "hyp": "hyps.jsonl", "metric": "wer"},
            {"name": "filter", "hyp": "hyps.jsonl", "k": 10, "proxy_n": 100},
            {"name": "candidates", "endpoint": "mock"},
            {"name": "restore", "threshold": 0.30},
            {"name": "splice", "segments": "segments.jsonl", "max_dur": 30},
        ],
    }


def write_toy_corpus(out_dir, n: int = 200, noise: float = 0.10, seed: int = 0) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    examples, hyps, segments, noisy = make_toy_corpus(n, noise, seed)
    write_manifest(examples, out / "manifest.jsonl")
    write_jsonl(({"id": k, "text": v} for k, v in hyps.items()), out / "hyps.jsonl")
    write_jsonl(segments, out / "segments.jsonl")
    (out / "noisy_ids.txt").write_text("".join(f"{i}\n" for i in noisy), encoding="utf-8")
    with open(out / "pipeline.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(pipeline_config(seed), f, sort_keys=False)
    return {"manifest": out / "manifest.jsonl", "hyps": out / "hyps.jsonl", "segments": out / "segments.jsonl",
            "config": out / "pipeline.yaml", "noisy_ids": noisy}
