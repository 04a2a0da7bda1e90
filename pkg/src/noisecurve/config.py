"""Run configuration: parsing, validation, and identity hashing.

A run is described by one JSON file.  Relative paths inside it resolve
against the config file's directory.  The run id defaults to a digest of the
config content, so the same file always lands in the same run directory.

Adapter endpoints can be overridden without editing the file through
environment variables (NOISECURVE_TTS_ADAPTER, NOISECURVE_ASR_ADAPTER,
NOISECURVE_TASK_ADAPTER, NOISECURVE_JUDGE_ADAPTER); values are either a URL,
"mock:<name>", or a shell command line.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .cleaning import DEFAULT_CHUNK_SIZE, TECHNIQUES
from .corpus import CLASSIFICATION, QUESTION_ANSWERING, SUMMARIZATION, TASK_KINDS
from .task_metrics import CLEANED, NON_CLEANED
from .util import canonical_json, sha256_text

AUDIO_BACKEND = "audio"
CORRUPT_BACKEND = "corrupt"

METRICS_BY_TASK = {
    SUMMARIZATION: ("rouge1", "rouge2", "rougeL"),
    QUESTION_ANSWERING: ("exact", "f1", "fuzzy"),
    CLASSIFICATION: ("accuracy", "macro_f1"),
}

PAIRWISE_METRIC = "pairwise"

ENV_ADAPTER_OVERRIDES = {
    "tts": "NOISECURVE_TTS_ADAPTER",
    "asr": "NOISECURVE_ASR_ADAPTER",
    "task": "NOISECURVE_TASK_ADAPTER",
    "judge": "NOISECURVE_JUDGE_ADAPTER",
}


class ConfigError(ValueError):
    """The run configuration is malformed or internally inconsistent."""


def _require(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return mapping[key]


def _as_int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}, got {value}")
    return value


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class DatasetConfig:
    path: Path
    task: str
    labels: tuple[str, ...] = ()
    classification_utterance_window: int | None = None


@dataclass(frozen=True)
class NoiseConfig:
    backend: str
    levels: int
    snr_grid_db: tuple[float, ...] = ()
    corruption_rates: tuple[float, ...] = ()


@dataclass(frozen=True)
class CleaningConfig:
    techniques: tuple[str, ...]
    chunk_size: int
    annotator: Mapping


@dataclass(frozen=True)
class AudioConfig:
    sample_rate: int = 24000
    tts_max_tokens: int = 50
    epsilon: float = 1e-12
    background: Mapping = field(default_factory=lambda: {"type": "white", "rms": 0.1})
    reverberate_level0: bool = False


@dataclass(frozen=True)
class TournamentConfig:
    enabled: bool = False
    modes: tuple[str, ...] = (NON_CLEANED, CLEANED)
    shift_noncleaned_baseline: bool = True


@dataclass(frozen=True)
class AdaptersConfig:
    sections: Mapping[str, Mapping]
    retries: int = 2
    max_in_flight: int = 8

    def section(self, name: str) -> Mapping:
        if name not in self.sections:
            raise ConfigError(f"no adapter configured for {name!r}")
        return self.sections[name]


@dataclass(frozen=True)
class RunConfig:
    raw: Mapping
    run_id: str
    seed: int
    output_dir: Path
    cache_dir: Path
    dataset: DatasetConfig
    noise: NoiseConfig
    cleaning: CleaningConfig
    audio: AudioConfig
    tournament: TournamentConfig
    adapters: AdaptersConfig
    metrics: tuple[str, ...]
    case_fold: bool

    @property
    def run_dir(self) -> Path:
        return self.output_dir / self.run_id

    def config_hash(self) -> str:
        # where results land is not part of the experiment's identity
        skip = ("run_id", "output_dir", "cache_dir")
        hashable = {k: v for k, v in self.raw.items() if k not in skip}
        return sha256_text(canonical_json(hashable))


def load_config(path: Path | str, environ: Mapping[str, str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, base_dir=path.parent, environ=environ)


def parse_config(
    raw, base_dir: Path | str = ".", environ: Mapping[str, str] | None = None
) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    base_dir = Path(base_dir)
    environ = os.environ if environ is None else environ

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base_dir / p

    seed = _as_int(_require(raw, "seed", "config"), "seed", minimum=0)
    output_dir = resolve(raw.get("output_dir", "runs"))
    cache_dir = resolve(raw["cache_dir"]) if "cache_dir" in raw else output_dir / "cache"

    dataset = _parse_dataset(_require(raw, "dataset", "config"), resolve)
    noise = _parse_noise(_require(raw, "noise", "config"))
    cleaning = _parse_cleaning(raw.get("cleaning", {}), resolve)
    audio = _parse_audio(raw.get("audio", {}), resolve)
    tournament = _parse_tournament(raw.get("tournament", {}), dataset.task)
    adapters = _parse_adapters(raw.get("adapters", {}), noise, tournament, environ)
    metrics = _parse_metrics(raw.get("metrics"), dataset.task, tournament)

    alignment_section = raw.get("alignment", {})
    if not isinstance(alignment_section, dict):
        raise ConfigError("'alignment' must be an object")
    case_fold = bool(alignment_section.get("case_fold", False))

    run_id = raw.get("run_id")
    config = RunConfig(
        raw=raw,
        run_id=run_id or "",
        seed=seed,
        output_dir=output_dir,
        cache_dir=cache_dir,
        dataset=dataset,
        noise=noise,
        cleaning=cleaning,
        audio=audio,
        tournament=tournament,
        adapters=adapters,
        metrics=metrics,
        case_fold=case_fold,
    )
    if not run_id:
        run_id = "run-" + config.config_hash()[:12]
        config = dataclasses.replace(config, run_id=run_id)
    elif not isinstance(run_id, str) or "/" in run_id:
        raise ConfigError(f"run_id must be a plain directory name, got {run_id!r}")
    return config


def _parse_dataset(section, resolve) -> DatasetConfig:
    if not isinstance(section, dict):
        raise ConfigError("'dataset' must be an object")
    path = resolve(_require(section, "path", "dataset"))
    task = _require(section, "task", "dataset")
    if task not in TASK_KINDS:
        raise ConfigError(f"dataset.task must be one of {sorted(TASK_KINDS)}, got {task!r}")
    labels = section.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        raise ConfigError("dataset.labels must be a list of strings")
    if len(set(labels)) != len(labels):
        raise ConfigError("dataset.labels contains duplicates")
    window = section.get("classification_utterance_window")
    if window is not None:
        window = _as_int(window, "dataset.classification_utterance_window", minimum=1)
    if task == CLASSIFICATION and not labels:
        raise ConfigError("classification runs need dataset.labels")
    if task != CLASSIFICATION and window is not None:
        raise ConfigError(
            "dataset.classification_utterance_window only applies to classification"
        )
    return DatasetConfig(
        path=path, task=task, labels=tuple(labels), classification_utterance_window=window
    )


def _parse_noise(section) -> NoiseConfig:
    if not isinstance(section, dict):
        raise ConfigError("'noise' must be an object")
    backend = _require(section, "backend", "noise")
    if backend not in (AUDIO_BACKEND, CORRUPT_BACKEND):
        raise ConfigError(
            f"noise.backend must be {AUDIO_BACKEND!r} or {CORRUPT_BACKEND!r}, got {backend!r}"
        )
    levels = _as_int(_require(section, "levels", "noise"), "noise.levels", minimum=1)
    snr = section.get("snr_grid_db", [10.0, 5.0, 0.0, -5.0, -10.0][:levels])
    rates = section.get("corruption_rates", [])
    if backend == AUDIO_BACKEND:
        if not isinstance(snr, list) or len(snr) != levels:
            raise ConfigError(
                f"noise.snr_grid_db must list exactly {levels} values (one per noisy level)"
            )
        snr = tuple(_as_number(v, "noise.snr_grid_db entry") for v in snr)
        return NoiseConfig(backend=backend, levels=levels, snr_grid_db=snr)
    if not isinstance(rates, list) or len(rates) != levels + 1:
        raise ConfigError(
            f"noise.corruption_rates must list exactly {levels + 1} values "
            f"(levels 0..{levels})"
        )
    parsed = []
    for v in rates:
        v = _as_number(v, "noise.corruption_rates entry")
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"corruption rates must be in [0, 1], got {v}")
        parsed.append(v)
    return NoiseConfig(backend=backend, levels=levels, corruption_rates=tuple(parsed))


def _parse_cleaning(section, resolve) -> CleaningConfig:
    if not isinstance(section, dict):
        raise ConfigError("'cleaning' must be an object")
    requested = section.get("techniques", list(TECHNIQUES))
    if not isinstance(requested, list) or not requested:
        raise ConfigError("cleaning.techniques must be a non-empty list")
    unknown = [t for t in requested if t not in TECHNIQUES]
    if unknown:
        raise ConfigError(
            f"unknown cleaning techniques {unknown} (available: {list(TECHNIQUES)})"
        )
    # canonical order fixes the meaning of cleaning indices
    techniques = tuple(t for t in TECHNIQUES if t in set(requested))
    chunk_size = _as_int(
        section.get("chunk_size", DEFAULT_CHUNK_SIZE), "cleaning.chunk_size", minimum=1
    )
    annotator = section.get("annotator", {"type": "lexicon"})
    if not isinstance(annotator, dict):
        raise ConfigError("cleaning.annotator must be an object")
    ann_type = annotator.get("type")
    if ann_type not in ("lexicon", "sidecar"):
        raise ConfigError(
            f"cleaning.annotator.type must be 'lexicon' or 'sidecar', got {ann_type!r}"
        )
    annotator = dict(annotator)
    if "path" in annotator:
        annotator["path"] = str(resolve(annotator["path"]))
    elif ann_type == "sidecar":
        raise ConfigError("a sidecar annotator needs a 'path'")
    return CleaningConfig(techniques=techniques, chunk_size=chunk_size, annotator=annotator)


def _parse_audio(section, resolve) -> AudioConfig:
    if not isinstance(section, dict):
        raise ConfigError("'audio' must be an object")
    sample_rate = _as_int(section.get("sample_rate", 24000), "audio.sample_rate", minimum=1)
    tts_max_tokens = _as_int(
        section.get("tts_max_tokens", 50), "audio.tts_max_tokens", minimum=1
    )
    epsilon = _as_number(section.get("epsilon", 1e-12), "audio.epsilon")
    if epsilon <= 0:
        raise ConfigError("audio.epsilon must be positive")
    background = section.get("background", {"type": "white", "rms": 0.1})
    if not isinstance(background, dict):
        raise ConfigError("audio.background must be an object")
    bg_type = background.get("type")
    if bg_type not in ("white", "wav"):
        raise ConfigError(f"audio.background.type must be 'white' or 'wav', got {bg_type!r}")
    background = dict(background)
    if bg_type == "wav":
        if "path" not in background:
            raise ConfigError("a wav background needs a 'path'")
        background["path"] = str(resolve(background["path"]))
    else:
        rms = _as_number(background.get("rms", 0.1), "audio.background.rms")
        if rms <= 0:
            raise ConfigError("audio.background.rms must be positive")
        background["rms"] = rms
    return AudioConfig(
        sample_rate=sample_rate,
        tts_max_tokens=tts_max_tokens,
        epsilon=epsilon,
        background=background,
        reverberate_level0=bool(section.get("reverberate_level0", False)),
    )


def _parse_tournament(section, task: str) -> TournamentConfig:
    if not isinstance(section, dict):
        raise ConfigError("'tournament' must be an object")
    enabled = bool(section.get("enabled", False))
    modes = section.get("modes", [NON_CLEANED, CLEANED])
    if not isinstance(modes, list) or not modes:
        raise ConfigError("tournament.modes must be a non-empty list")
    unknown = [m for m in modes if m not in (NON_CLEANED, CLEANED)]
    if unknown:
        raise ConfigError(f"unknown tournament modes {unknown}")
    if enabled and task != SUMMARIZATION:
        raise ConfigError("pairwise tournaments are only defined for summarization runs")
    return TournamentConfig(
        enabled=enabled,
        modes=tuple(dict.fromkeys(modes)),
        shift_noncleaned_baseline=bool(section.get("shift_noncleaned_baseline", True)),
    )


def _parse_adapters(section, noise: NoiseConfig, tournament: TournamentConfig, environ) -> AdaptersConfig:
    if not isinstance(section, dict):
        raise ConfigError("'adapters' must be an object")
    retries = _as_int(section.get("retries", 2), "adapters.retries", minimum=0)
    max_in_flight = _as_int(
        section.get("max_in_flight", 8), "adapters.max_in_flight", minimum=1
    )
    sections: dict[str, Mapping] = {}
    for name in ("tts", "asr", "task", "judge"):
        configured = section.get(name)
        override = environ.get(ENV_ADAPTER_OVERRIDES[name])
        if override:
            configured = _adapter_from_env(override)
        if configured is not None:
            if not isinstance(configured, dict):
                raise ConfigError(f"adapters.{name} must be an object")
            sections[name] = configured

    required = ["task"]
    if noise.backend == AUDIO_BACKEND:
        required += ["tts", "asr"]
    if tournament.enabled:
        required.append("judge")
    missing = [name for name in required if name not in sections]
    if missing:
        raise ConfigError(f"missing adapter configuration for: {', '.join(missing)}")
    return AdaptersConfig(sections=sections, retries=retries, max_in_flight=max_in_flight)


def _adapter_from_env(value: str) -> dict:
    value = value.strip()
    if value.startswith("http://") or value.startswith("https://"):
        return {"type": "http", "url": value}
    if value.startswith("mock:"):
        return {"type": "mock", "name": value[len("mock:"):]}
    return {"type": "subprocess", "command": value}


def _parse_metrics(requested, task: str, tournament: TournamentConfig) -> tuple[str, ...]:
    valid = set(METRICS_BY_TASK[task])
    if tournament.enabled:
        valid.add(PAIRWISE_METRIC)
    if requested is None:
        metrics = list(METRICS_BY_TASK[task])
        if tournament.enabled:
            metrics.append(PAIRWISE_METRIC)
        return tuple(metrics)
    if not isinstance(requested, list) or not requested:
        raise ConfigError("'metrics' must be a non-empty list")
    unknown = [m for m in requested if m not in valid]
    if unknown:
        raise ConfigError(
            f"metrics {unknown} are not valid for task {task!r} (valid: {sorted(valid)})"
        )
    if PAIRWISE_METRIC in requested and not tournament.enabled:
        raise ConfigError("the pairwise metric needs tournament.enabled = true")
    return tuple(dict.fromkeys(requested))


def validate_files(config: RunConfig) -> list[str]:
    """Check that every file the config references exists; returns problems."""
    problems = []
    if not config.dataset.path.is_file():
        problems.append(f"dataset file not found: {config.dataset.path}")
    annotator = config.cleaning.annotator
    if "path" in annotator and not Path(annotator["path"]).is_file():
        problems.append(f"annotator file not found: {annotator['path']}")
    background = config.audio.background
    if background.get("type") == "wav" and not Path(background["path"]).is_file():
        problems.append(f"background wav not found: {background['path']}")
    return problems
