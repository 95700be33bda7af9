"""Declarative pipeline runner: stats -> score -> filter -> candidates -> restore -> splice.

The config names an input manifest and an ordered list of stages. Each stage
reads the manifest produced by the previous manifest-producing stage. Outputs
are written as ``<nn>_<stage>.partial.<ext>`` and renamed once the stage finishes,
so a failed run leaves its incomplete files clearly marked. ``run.json``
records the config snapshot, seed, version, timings and per-stage counts.
"""

from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path

import yaml

from . import __version__
from .align import corpus_error_rate
from .filtering import DEFAULT_K_OVERRIDES, DISCARD, KEEP, FilterConfig, filter_examples, proxy_sample
from .llmgate import EndpointConfig, LLMClient, PromptRegistry, generate_candidates, mock_client
from .longform import clean_subset, read_segments, splice
from .manifest import DataError, corpus_stats, read_manifest, read_records, read_texts, write_jsonl, write_manifest
from .restore import restore_manifest
from .textnorm import policy_for_metric

log = logging.getLogger(__name__)

STAGES = ("stats", "score", "filter", "candidates", "restore", "splice")


class PipelineError(DataError):
    pass


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) else json.loads(text)
    if not isinstance(data, dict):
        raise PipelineError(f"{path}: config must be a mapping")
    return data


def validate_config(config: dict, base: Path) -> None:
    if "stages" not in config or not isinstance(config["stages"], list) or not config["stages"]:
        raise PipelineError("config needs a non-empty 'stages' list")
    for i, st in enumerate(config["stages"]):
        name = st.get("name") if isinstance(st, dict) else st
        if name not in STAGES:
            raise PipelineError(f"stage {i}: unknown stage {name!r}; known stages: {', '.join(STAGES)}")
    if any((s.get("name") if isinstance(s, dict) else s) != "splice" for s in config["stages"]):
        if "manifest" not in config:
            raise PipelineError("config needs 'manifest' for manifest-consuming stages")
        _existing(base, config["manifest"], "manifest")
    for st in config["stages"]:
        if not isinstance(st, dict):
            continue
        for key in ("hyp", "segments", "candidates", "prompts"):
            if key in st:
                _existing(base, st[key], f"stage {st['name']}: {key}")


def _existing(base: Path, rel, what) -> Path:
    p = (base / rel) if not Path(rel).is_absolute() else Path(rel)
    if not p.exists():
        raise PipelineError(f"{what}: input file not found: {p}")
    return p


def _rel(path: Path, base: Path) -> str:
    # relative paths keep run.json identical across checkouts
    return Path(os.path.relpath(path, base)).as_posix()


def _partial(final: Path) -> Path:
    return final.with_name(f"{final.stem}.partial{final.suffix}")


class _Outputs:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.pending: list[Path] = []

    def path(self, name: str) -> Path:
        final = self.out_dir / name
        self.pending.append(final)
        return _partial(final)

    def commit(self) -> list[str]:
        done = []
        for final in self.pending:
            partial = _partial(final)
            if partial.exists():
                partial.replace(final)
                done.append(final.name)
        self.pending = []
        return done


def run_pipeline(config: dict, base_dir, out_dir, seed: int | None = None, jobs: int = 1,
                 plots: bool = False) -> dict:
    """Run every configured stage in order. Returns the run record."""
    base = Path(base_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    validate_config(config, base)
    seed = config.get("seed", 0) if seed is None else seed

    record = {
        "tool": "s2tcurate",
        "version": __version__,
        "seed": seed,
        "jobs": jobs,
        "config": config,
        "stages": [],
        "status": "running",
    }
    manifest_path = _existing(base, config["manifest"], "manifest") if "manifest" in config else None
    candidates_path = None
    outputs = _Outputs(out)
    try:
        for idx, st in enumerate(config["stages"], 1):
            st = {"name": st} if isinstance(st, str) else dict(st)
            name = st["name"]
            prefix = f"{idx:02d}_{name}"
            t0 = time.perf_counter()
            info = {"name": name, "input": _rel(manifest_path, base) if manifest_path else None}
            record["current_stage"] = name

            if name == "stats":
                examples = list(read_manifest(manifest_path))
                stats = corpus_stats(examples)
                with open(outputs.path(f"{prefix}.json"), "w", encoding="utf-8") as f:
                    json.dump([s.as_dict() for s in stats.values()], f, indent=2, ensure_ascii=False)
                if plots:
                    from .plotting import plot_volume

                    plot_volume(stats, outputs.path(f"{prefix}.png"))
                info["counts"] = {"in": len(examples), "out": len(examples)}

            elif name == "score":
                examples = list(read_manifest(manifest_path))
                hyps = read_texts(_existing(base, st["hyp"], "hyp"))
                policy = policy_for_metric(st.get("metric", "auto"))
                missing = [ex.id for ex in examples if ex.id not in hyps]
                if missing:
                    raise PipelineError(f"score: {len(missing)} example(s) have no hypothesis, e.g. {missing[0]}")
                pairs = [(ex.y_tgt, hyps[ex.id], ex.language) for ex in examples]
                rates = corpus_error_rate(pairs, policy=policy, average=bool(st.get("average", False)))
                with open(outputs.path(f"{prefix}.json"), "w", encoding="utf-8") as f:
                    json.dump({"metric": st.get("metric", "auto"), **rates.as_dict(),
                               "sub_rate": rates.sub_rate, "ins_rate": rates.ins_rate, "del_rate": rates.del_rate},
                              f, indent=2)
                info["counts"] = {"in": len(examples), "out": len(examples)}

            elif name == "filter":
                examples = list(read_manifest(manifest_path))
                hyps = read_texts(_existing(base, st["hyp"], "hyp"))
                overrides = dict(DEFAULT_K_OVERRIDES) if st.get("default_overrides", True) else {}
                overrides.update(st.get("k_overrides") or {})
                fcfg = FilterConfig(
                    k_percent=st.get("k", 5),
                    per_dataset_overrides=overrides,
                    seed=seed,
                    proxy_N=st.get("proxy_n", 50_000),
                    by_duration=bool(st.get("by_duration", False)),
                )
                kept, decisions = filter_examples(examples, hyps, fcfg, jobs=jobs)
                kept_path = outputs.path(f"{prefix}.jsonl")
                write_manifest(kept, kept_path)
                write_jsonl((d.as_dict() for d in decisions), outputs.path(f"{prefix}.decisions.jsonl"))
                sample = proxy_sample([e.id for e in kept], fcfg.k_percent, fcfg.proxy_N, seed)
                write_jsonl(({"id": i} for i in sample), outputs.path(f"{prefix}.proxy.jsonl"))
                if plots:
                    from .plotting import plot_cer_distribution

                    plot_cer_distribution(decisions, outputs.path(f"{prefix}.png"))
                n_discard = sum(d.verdict == DISCARD for d in decisions)
                n_keep = sum(d.verdict == KEEP for d in decisions)
                if n_keep + n_discard != len(examples) or n_keep != len(kept):
                    raise PipelineError("filter: counts do not reconcile")
                info["counts"] = {"in": len(examples), "out": len(kept), "kept": n_keep, "discarded": n_discard,
                                  "proxy_sample": len(sample)}
                manifest_path = out / f"{prefix}.jsonl"

            elif name == "candidates":
                examples = list(read_manifest(manifest_path))
                registry = PromptRegistry.from_file(_existing(base, st["prompts"], "prompts")) \
                    if "prompts" in st else PromptRegistry()
                endpoint = st.get("endpoint", "mock")
                if endpoint == "mock":
                    client = mock_client(registry=registry)
                else:
                    client = LLMClient(EndpointConfig.from_env(
                        base_url=endpoint, model_name=st.get("model"),
                        max_in_flight=st.get("max_in_flight"), max_retries=st.get("max_retries")))
                with client:
                    cands = generate_candidates(examples, client, registry)
                write_jsonl(cands, outputs.path(f"{prefix}.jsonl"))
                failed = sum(c["status"] == "llm_failed" for c in cands)
                info["counts"] = {"in": len(examples), "out": len(cands), "llm_failed": failed}
                candidates_path = out / f"{prefix}.jsonl"

            elif name == "restore":
                examples = list(read_manifest(manifest_path))
                cpath = _existing(base, st["candidates"], "candidates") if "candidates" in st else candidates_path
                if cpath is None:
                    raise PipelineError("restore: no candidates file (add a candidates stage or 'candidates:')")
                cands = read_records(cpath)
                restored, audit = restore_manifest(examples, cands, st.get("threshold", 0.30))
                write_manifest(restored, outputs.path(f"{prefix}.jsonl"))
                write_jsonl(audit, outputs.path(f"{prefix}.audit.jsonl"))
                statuses: dict[str, int] = {}
                for a in audit:
                    statuses[a["status"]] = statuses.get(a["status"], 0) + 1
                info["counts"] = {"in": len(examples), "out": len(restored), **statuses}
                manifest_path = out / f"{prefix}.jsonl"

            elif name == "splice":
                timelines = read_segments(_existing(base, st["segments"], "segments"))
                spliced = []
                for tl in timelines:
                    spliced.extend(splice(tl, st.get("max_dur", 30.0), st.get("gap_tolerance", 0.5)))
                chosen = clean_subset(spliced) if st.get("clean_only") else spliced
                write_manifest((e.to_example() for e in chosen), outputs.path(f"{prefix}.jsonl"))
                n_clips = sum(1 for tl in timelines for s in tl.segments if s.transcribed)
                info["counts"] = {"clips": n_clips, "out": len(chosen), "clean": sum(e.clean for e in spliced),
                                  "unclean": sum(not e.clean for e in spliced)}

            info["outputs"] = outputs.commit()
            info["seconds"] = round(time.perf_counter() - t0, 4)
            record["stages"].append(info)
        record["status"] = "ok"
        record.pop("current_stage", None)
    except Exception as exc:
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
        _write_run(out, record)
        raise
    _write_run(out, record)
    return record


def _write_run(out: Path, record: dict) -> None:
    with open(out / "run.json", "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, ensure_ascii=False, default=str)
