"""Pipeline orchestration: staged execution with on-disk state and resume.

A run walks fixed stages, each reading its inputs from the run directory and
writing its outputs back there:

    ingest   -> variants/ref_0.jsonl
    noising  -> variants/<level>_0.jsonl      (synthesized audio or direct
                                               text corruption)
    cleaning -> variants/<level>_<j>.jsonl
    outputs  -> outputs/<variant>.jsonl       (task model output per instance)
    scoring  -> scores/{wer,metrics,tournaments}.jsonl
    report   -> report/*.csv, summary.json, charts/*.svg

state.json records a content hash for every file each item produced; on
resume, items whose outputs still match are skipped.  Expensive model calls
are additionally memoized by the adapter cache, so re-running an interrupted
stage replays finished calls instead of paying for them again.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import adapters as ad
from .alignment import transcript_counts
from .audio import (
    NoiseSpec,
    generate_rir,
    mix_background,
    prepare_tts_segments,
    read_wav,
    reverberate,
    sample_room,
    white_noise,
    write_wav,
)
from .cleaning import LexiconAnnotator, SidecarAnnotator, clean
from .config import (
    AUDIO_BACKEND,
    ConfigError,
    PAIRWISE_METRIC,
    RunConfig,
    validate_files,
)
from .corpus import (
    CLASSIFICATION,
    QUESTION_ANSWERING,
    SUMMARIZATION,
    Dataset,
    Transcript,
    Utterance,
    VariantKey,
    VariantStore,
    enumerate_variants,
    ingest_dataset,
)
from .task_metrics import (
    CLEANED,
    NON_CLEANED,
    Candidate,
    classification_scores,
    qa_match,
    rouge_score,
    run_tournament,
)
from .util import (
    atomic_write_text,
    canonical_json,
    derive_seed,
    read_jsonl,
    sha256_file,
    write_jsonl,
)


class RunError(RuntimeError):
    """A failure while executing a run (as opposed to describing one)."""


@dataclass
class RunPaths:
    run_dir: Path

    @property
    def state_file(self) -> Path:
        return self.run_dir / "state.json"

    @property
    def config_file(self) -> Path:
        return self.run_dir / "config.json"

    @property
    def variants_dir(self) -> Path:
        return self.run_dir / "variants"

    @property
    def audio_dir(self) -> Path:
        return self.run_dir / "audio"

    @property
    def outputs_dir(self) -> Path:
        return self.run_dir / "outputs"

    @property
    def scores_dir(self) -> Path:
        return self.run_dir / "scores"

    @property
    def report_dir(self) -> Path:
        return self.run_dir / "report"

    def output_file(self, variant: VariantKey) -> Path:
        return self.outputs_dir / f"{variant.name}.jsonl"


class RunState:
    """Per-item completion ledger, persisted after every item."""

    def __init__(self, path: Path):
        self.path = path
        self.data: dict = {"items": {}}
        if path.is_file():
            self.data = json.loads(path.read_text(encoding="utf-8"))
            self.data.setdefault("items", {})

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def set(self, key: str, value) -> None:
        self.data[key] = value
        self._save()

    def item_done(self, item: str, run_dir: Path) -> bool:
        entry = self.data["items"].get(item)
        if entry is None:
            return False
        for relpath, digest in entry["outputs"].items():
            path = run_dir / relpath
            if not path.is_file() or sha256_file(path) != digest:
                return False
        return True

    def mark_done(self, item: str, run_dir: Path, outputs: Sequence[Path]) -> None:
        hashes = {
            str(p.relative_to(run_dir)): sha256_file(p) for p in sorted(outputs)
        }
        self.data["items"][item] = {"outputs": hashes}
        self._save()

    def _save(self) -> None:
        atomic_write_text(self.path, json.dumps(self.data, indent=2, sort_keys=True))


def variant_keys(config: RunConfig) -> list[VariantKey]:
    return enumerate_variants(config.noise.levels, len(config.cleaning.techniques))


def build_annotator(config: RunConfig):
    section = config.cleaning.annotator
    if section["type"] == "lexicon":
        if "path" in section:
            return LexiconAnnotator.from_json(section["path"])
        return LexiconAnnotator(pos_map={})
    return SidecarAnnotator(section["path"])


class Runner:
    def __init__(self, config: RunConfig, resume: bool = False):
        problems = validate_files(config)
        if problems:
            raise ConfigError("; ".join(problems))
        self.config = config
        self.paths = RunPaths(config.run_dir)
        self.paths.run_dir.mkdir(parents=True, exist_ok=True)

        fresh = not self.paths.state_file.is_file()
        if not fresh and not resume:
            raise RunError(
                f"{self.paths.run_dir} already holds a run; "
                "use the resume command to continue it"
            )
        self.state = RunState(self.paths.state_file)
        recorded = self.state.get("config_hash")
        if recorded is not None and recorded != config.config_hash():
            raise ConfigError(
                f"config hash {config.config_hash()[:12]} does not match the run "
                f"directory's {recorded[:12]}; pick a new run_id for changed configs"
            )
        self.state.set("run_id", config.run_id)
        self.state.set("config_hash", config.config_hash())
        atomic_write_text(
            self.paths.config_file,
            json.dumps({**config.raw, "run_id": config.run_id}, indent=2, sort_keys=True),
        )
        self.store = VariantStore(self.paths.variants_dir)
        self._adapters: dict[str, ad.AdapterClient] = {}

    # --- adapters -------------------------------------------------------

    def adapter(self, name: str) -> ad.AdapterClient:
        if name not in self._adapters:
            section = dict(self.config.adapters.section(name))
            if section.get("type") == "mock":
                options = dict(section.get("options", {}))
                if section.get("name") == "tts":
                    options.setdefault("sample_rate", self.config.audio.sample_rate)
                if section.get("name") == "corrupting_asr":
                    options.setdefault("seed", self.config.seed)
                if section.get("name") == "heuristic_task" and self.config.dataset.labels:
                    options.setdefault("labels", list(self.config.dataset.labels))
                section["options"] = options
            kind = {"tts": ad.TTS, "asr": ad.ASR, "task": ad.TASK, "judge": ad.JUDGE}[name]
            self._adapters[name] = ad.build_adapter(
                kind,
                section,
                cache_root=self.config.cache_dir,
                retries=self.config.adapters.retries,
                max_in_flight=self.config.adapters.max_in_flight,
            )
        return self._adapters[name]

    def close(self) -> None:
        for client in self._adapters.values():
            client.close()
        self._adapters.clear()

    # --- stage driver ---------------------------------------------------

    def run(self) -> Path:
        try:
            dataset = self.stage_ingest()
            self.stage_noising(dataset)
            self.stage_cleaning(dataset)
            self.stage_outputs(dataset)
            self.stage_scoring(dataset)
            self.stage_report()
        finally:
            self.close()
        return self.paths.run_dir

    def _skip(self, item: str) -> bool:
        if self.state.item_done(item, self.paths.run_dir):
            print(f"  [skip] {item}")
            return True
        return False

    def _done(self, item: str, outputs: Sequence[Path]) -> None:
        self.state.mark_done(item, self.paths.run_dir, outputs)
        print(f"  [done] {item}")

    # --- stages ---------------------------------------------------------

    def stage_ingest(self) -> Dataset:
        cfg = self.config
        dataset = ingest_dataset(
            cfg.dataset.path,
            cfg.dataset.task,
            classification_window=cfg.dataset.classification_utterance_window,
        )
        if not dataset.transcripts:
            raise RunError(f"{cfg.dataset.path} holds no transcripts")
        if not dataset.instances:
            raise RunError(f"{cfg.dataset.path} holds no task instances")
        if cfg.dataset.task == CLASSIFICATION:
            bad = sorted(
                {i.gold_label for i in dataset.instances} - set(cfg.dataset.labels)
            )
            if bad:
                raise RunError(
                    f"dataset uses labels {bad} that are absent from dataset.labels"
                )
        dataset_hash = sha256_file(cfg.dataset.path)
        recorded = self.state.get("dataset_hash")
        if recorded is not None and recorded != dataset_hash:
            raise ConfigError(
                "the dataset file changed since this run directory was created"
            )
        self.state.set("dataset_hash", dataset_hash)

        item = "ingest/dataset"
        if not self._skip(item):
            path = self.store.save(VariantKey.ref(), dataset.transcripts)
            self._done(item, [path])
        return dataset

    def stage_noising(self, dataset: Dataset) -> None:
        if self.config.noise.backend == AUDIO_BACKEND:
            self._noising_audio(dataset)
        else:
            self._noising_corrupt(dataset)

    def _noising_corrupt(self, dataset: Dataset) -> None:
        cfg = self.config
        for level in range(cfg.noise.levels + 1):
            item = f"noising/corrupt-{level}"
            if self._skip(item):
                continue
            rate = cfg.noise.corruption_rates[level]
            noisy = []
            for t in dataset.transcripts:
                utterances = []
                for utt in t.utterances:
                    rng = random.Random(
                        derive_seed(
                            cfg.seed, "corrupt", t.transcript_id, str(utt.index), str(level)
                        )
                    )
                    utterances.append(
                        Utterance(
                            index=utt.index,
                            speaker=utt.speaker,
                            text=ad.corrupt_text(utt.text, rate, rng),
                        )
                    )
                noisy.append(Transcript(transcript_id=t.transcript_id, utterances=utterances))
            path = self.store.save(VariantKey(level=level, cleaning=0), noisy)
            self._done(item, [path])

    def _segment_plan(self, dataset: Dataset) -> list[tuple[str, int, int, str]]:
        """(transcript_id, utterance_index, segment_index, text) for all audio."""
        plan = []
        for t in dataset.transcripts:
            for utt in t.utterances:
                for seg_idx, seg_text in enumerate(
                    prepare_tts_segments(utt.text, self.config.audio.tts_max_tokens)
                ):
                    plan.append((t.transcript_id, utt.index, seg_idx, seg_text))
        return plan

    def _seg_path(self, stage_dir: str, tid: str, utt: int, seg: int) -> Path:
        return self.paths.audio_dir / stage_dir / tid / f"{utt:04d}_{seg:02d}.wav"

    def _noising_audio(self, dataset: Dataset) -> None:
        cfg = self.config
        plan = self._segment_plan(dataset)
        if not plan:
            raise RunError("no synthesizable text in the dataset")

        item = "noising/tts"
        if not self._skip(item):
            tts = self.adapter("tts")
            outputs = []
            for tid, utt, seg, text in plan:
                target = self._seg_path("tts", tid, utt, seg)
                target.parent.mkdir(parents=True, exist_ok=True)
                reply = tts.call({"text": text, "output_path": str(target)})
                produced = Path(reply["audio_path"])
                if produced.resolve() != target.resolve():
                    raise RunError(
                        f"synthesis adapter wrote {produced}, expected {target}"
                    )
                # the sidecar makes every synthesized file self-describing,
                # whichever adapter produced it
                ad.write_sidecar(target, text)
                outputs += [target, ad.sidecar_path(target)]
            self._done(item, outputs)

        item = "noising/reverb"
        if not self._skip(item):
            outputs = []
            for tid, utt, seg, text in plan:
                source = self._seg_path("tts", tid, utt, seg)
                target = self._seg_path("reverb", tid, utt, seg)
                target.parent.mkdir(parents=True, exist_ok=True)
                room = sample_room(
                    derive_seed(cfg.seed, "room", tid, str(utt), str(seg)),
                    sample_rate=cfg.audio.sample_rate,
                )
                rir = generate_rir(room)
                write_wav(target, reverberate(read_wav(source), rir))
                ad.write_sidecar(target, text)
                outputs += [target, ad.sidecar_path(target)]
            self._done(item, outputs)

        background_file = None
        if cfg.audio.background["type"] == "wav":
            background_file = read_wav(cfg.audio.background["path"])
            if background_file.sample_rate != cfg.audio.sample_rate:
                raise RunError(
                    f"background wav is sampled at {background_file.sample_rate} Hz, "
                    f"the run uses {cfg.audio.sample_rate} Hz"
                )

        for level in range(1, cfg.noise.levels + 1):
            item = f"noising/mix-{level}"
            if self._skip(item):
                continue
            snr_db = cfg.noise.snr_grid_db[level - 1]
            outputs = []
            for tid, utt, seg, text in plan:
                base = read_wav(self._seg_path("reverb", tid, utt, seg))
                if background_file is not None:
                    background = background_file
                else:
                    background = white_noise(
                        len(base.samples),
                        derive_seed(cfg.seed, "bg", tid, str(utt), str(seg), str(level)),
                        cfg.audio.sample_rate,
                        rms=cfg.audio.background["rms"],
                    )
                mixed = mix_background(
                    base,
                    NoiseSpec(
                        background=background, snr_db=snr_db, epsilon=cfg.audio.epsilon
                    ),
                )
                target = self._seg_path(f"level_{level}", tid, utt, seg)
                target.parent.mkdir(parents=True, exist_ok=True)
                write_wav(target, mixed)
                ad.write_sidecar(target, text)
                outputs += [target, ad.sidecar_path(target)]
            self._done(item, outputs)

        level0_dir = "reverb" if cfg.audio.reverberate_level0 else "tts"
        segments_by_utterance: dict[tuple[str, int], list[int]] = {}
        for tid, utt, seg, _text in plan:
            segments_by_utterance.setdefault((tid, utt), []).append(seg)

        for level in range(cfg.noise.levels + 1):
            item = f"noising/asr-{level}"
            if self._skip(item):
                continue
            asr = self.adapter("asr")
            stage_dir = level0_dir if level == 0 else f"level_{level}"
            noisy = []
            for t in dataset.transcripts:
                utterances = []
                for utt in t.utterances:
                    pieces = []
                    for seg in segments_by_utterance.get((t.transcript_id, utt.index), []):
                        audio = self._seg_path(stage_dir, t.transcript_id, utt.index, seg)
                        reply = asr.call({"audio_path": str(audio)})
                        pieces.append(reply["text"].strip())
                    utterances.append(
                        Utterance(
                            index=utt.index,
                            speaker=utt.speaker,
                            text=" ".join(p for p in pieces if p),
                        )
                    )
                noisy.append(Transcript(transcript_id=t.transcript_id, utterances=utterances))
            path = self.store.save(VariantKey(level=level, cleaning=0), noisy)
            self._done(item, [path])

    def stage_cleaning(self, dataset: Dataset) -> None:
        cfg = self.config
        annotator = build_annotator(cfg)
        references = {t.transcript_id: t for t in self.store.load(VariantKey.ref())}
        for level in range(cfg.noise.levels + 1):
            noisy_key = VariantKey(level=level, cleaning=0)
            noisy = None
            for j, technique in enumerate(cfg.cleaning.techniques, start=1):
                item = f"cleaning/{level}_{j}"
                if self._skip(item):
                    continue
                if noisy is None:
                    noisy = self.store.load(noisy_key)
                cleaned = [
                    clean(
                        references[t.transcript_id],
                        t,
                        technique,
                        annotator,
                        chunk_size=cfg.cleaning.chunk_size,
                        case_fold=cfg.case_fold,
                        noisy_label=noisy_key.name,
                    )
                    for t in noisy
                ]
                path = self.store.save(VariantKey(level=level, cleaning=j), cleaned)
                self._done(item, [path])

    def stage_outputs(self, dataset: Dataset) -> None:
        cfg = self.config
        task = self.adapter("task")
        self.paths.outputs_dir.mkdir(parents=True, exist_ok=True)
        for key in variant_keys(cfg):
            item = f"outputs/{key.name}"
            if self._skip(item):
                continue
            transcripts = {t.transcript_id: t for t in self.store.load(key)}
            records = []
            for inst in dataset.instances:
                t = transcripts[inst.transcript_id]
                payload = self._task_payload(inst, t)
                reply = task.call(payload)
                records.append({"instance_id": inst.instance_id, "output": reply["output"]})
            path = self.paths.output_file(key)
            write_jsonl(path, records)
            self._done(item, [path])

    def _task_payload(self, inst, transcript: Transcript) -> dict:
        cfg = self.config
        if cfg.dataset.task == SUMMARIZATION:
            return {
                "task": SUMMARIZATION,
                "transcript": transcript.as_text(),
                "query": inst.query or "",
            }
        if cfg.dataset.task == QUESTION_ANSWERING:
            return {
                "task": QUESTION_ANSWERING,
                "transcript": transcript.as_text(),
                "question": inst.question,
            }
        return {
            "task": CLASSIFICATION,
            "utterance": transcript.utterances[inst.utterance_index].text,
            "labels": list(cfg.dataset.labels),
        }

    def _load_outputs(self, key: VariantKey) -> dict[str, str]:
        path = self.paths.output_file(key)
        return {
            record["instance_id"]: record["output"] for _, record in read_jsonl(path)
        }

    def stage_scoring(self, dataset: Dataset) -> None:
        cfg = self.config
        self.paths.scores_dir.mkdir(parents=True, exist_ok=True)

        item = "scoring/wer"
        if not self._skip(item):
            references = {t.transcript_id: t for t in self.store.load(VariantKey.ref())}
            records = []
            for key in variant_keys(cfg):
                per_transcript = {}
                wers = []
                for t in self.store.load(key):
                    counts = transcript_counts(
                        references[t.transcript_id], t, case_fold=cfg.case_fold
                    )
                    per_transcript[t.transcript_id] = {
                        "wer": counts.wer(),
                        "hits": counts.hits,
                        "substitutions": counts.substitutions,
                        "deletions": counts.deletions,
                        "insertions": counts.insertions,
                    }
                    wers.append(counts.wer())
                records.append(
                    {
                        "variant": key.name,
                        "set_wer": sum(wers) / len(wers),
                        "transcripts": per_transcript,
                    }
                )
            path = self.paths.scores_dir / "wer.jsonl"
            write_jsonl(path, records)
            self._done(item, [path])

        item = "scoring/metrics"
        if not self._skip(item):
            records = []
            for key in variant_keys(cfg):
                outputs = self._load_outputs(key)
                for metric in cfg.metrics:
                    if metric == PAIRWISE_METRIC:
                        continue
                    ids, scores, group = self._metric_scores(dataset, metric, outputs)
                    records.append(
                        {
                            "variant": key.name,
                            "metric": metric,
                            "group": group,
                            "ids": ids,
                            "scores": scores,
                        }
                    )
            path = self.paths.scores_dir / "metrics.jsonl"
            write_jsonl(path, records)
            self._done(item, [path])

        if cfg.tournament.enabled:
            item = "scoring/tournaments"
            if not self._skip(item):
                path = self._run_tournaments(dataset)
                self._done(item, [path])

    def _metric_scores(
        self, dataset: Dataset, metric: str, outputs: Mapping[str, str]
    ) -> tuple[list[str], list[float], str]:
        cfg = self.config
        if cfg.dataset.task == SUMMARIZATION:
            order = {"rouge1": 1, "rouge2": 2, "rougeL": "L"}[metric]
            ids, scores = [], []
            for inst in dataset.instances:
                ids.append(inst.instance_id)
                scores.append(rouge_score(outputs[inst.instance_id], inst.gold_summary, order))
            return ids, scores, "instance"
        if cfg.dataset.task == QUESTION_ANSWERING:
            ids, scores = [], []
            for inst in dataset.instances:
                ids.append(inst.instance_id)
                scores.append(
                    qa_match(outputs[inst.instance_id], list(inst.gold_answers), metric)
                )
            return ids, scores, "instance"
        # classification metrics have no per-instance decomposition, so the
        # spread comes from per-transcript groups
        by_transcript: dict[str, list] = {}
        for inst in dataset.instances:
            by_transcript.setdefault(inst.transcript_id, []).append(inst)
        ids, scores = [], []
        for tid in sorted(by_transcript):
            insts = by_transcript[tid]
            result = classification_scores(
                predictions=[outputs[i.instance_id] for i in insts],
                golds=[i.gold_label for i in insts],
                labels=list(cfg.dataset.labels),
            )
            ids.append(tid)
            scores.append(result.accuracy if metric == "accuracy" else result.macro_f1)
        return ids, scores, "transcript"

    def _run_tournaments(self, dataset: Dataset) -> Path:
        cfg = self.config
        judge_client = self.adapter("judge")

        def judge_fn(reference: str, first: str, second: str, query: str | None) -> str:
            reply = judge_client.call(
                {
                    "reference": reference,
                    "candidate_1": first,
                    "candidate_2": second,
                    "query": query or "",
                }
            )
            return reply["preference"]

        noncleaned_keys = [VariantKey.ref()] + [
            VariantKey(level=i, cleaning=0) for i in range(cfg.noise.levels + 1)
        ]
        outputs = {k.name: self._load_outputs(k) for k in variant_keys(cfg)}

        records = []
        for inst in dataset.instances:
            noncleaned = [
                Candidate(key=k.name, output=outputs[k.name][inst.instance_id])
                for k in noncleaned_keys
            ]
            if NON_CLEANED in cfg.tournament.modes:
                t = run_tournament(
                    NON_CLEANED,
                    noncleaned,
                    judge_fn,
                    reference=inst.gold_summary,
                    seed=cfg.seed,
                    instance_id=inst.instance_id,
                    query=inst.query,
                )
                records.append(self._tournament_record(inst.instance_id, None, t))
            if CLEANED in cfg.tournament.modes:
                for j, technique in enumerate(cfg.cleaning.techniques, start=1):
                    cleaned = [
                        Candidate(
                            key=f"{i}_{j}",
                            output=outputs[f"{i}_{j}"][inst.instance_id],
                        )
                        for i in range(cfg.noise.levels + 1)
                    ]
                    t = run_tournament(
                        CLEANED,
                        noncleaned,
                        judge_fn,
                        reference=inst.gold_summary,
                        seed=cfg.seed,
                        instance_id=inst.instance_id,
                        query=inst.query,
                        cleaned=cleaned,
                    )
                    records.append(self._tournament_record(inst.instance_id, technique, t))
        path = self.paths.scores_dir / "tournaments.jsonl"
        write_jsonl(path, records)
        return path

    @staticmethod
    def _tournament_record(instance_id: str, technique: str | None, t) -> dict:
        return {
            "instance_id": instance_id,
            "mode": t.mode,
            "technique": technique,
            "points": t.points,
            "total_points": t.total_points,
            "unresolved": [list(pair) for pair in t.unresolved],
            "warnings": t.warnings,
            "pairs": [
                {
                    "first": p.first,
                    "second": p.second,
                    "swapped": p.swapped,
                    "verdict": p.verdict,
                    "winner": p.winner,
                }
                for p in t.pairs
            ],
        }

    def stage_report(self) -> None:
        from .report import write_report

        item = "report/report"
        if self._skip(item):
            return
        outputs = write_report(self.config, self.paths)
        self._done(item, outputs)
