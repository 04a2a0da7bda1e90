"""External model adapters: wire protocol, transports, caching, and mocks.

Synthesis, transcription, task execution, and pairwise judging run behind a
single line-oriented protocol so any external process or HTTP service can
plug in.  One request is one JSON object on one line:

    {"kind": "ASR", "request_id": "...", "payload": {...}}

and the response mirrors it:

    {"request_id": "...", "status": "ok", "payload": {...}}
    {"request_id": "...", "status": "error", "error": "..."}

Payloads by kind:

    TTS    {"text": ..., "output_path": ...}        -> {"audio_path": ...}
    ASR    {"audio_path": ...}                      -> {"text": ...}
    TASK   {"task": ..., ...task inputs}            -> {"output": ...}
    JUDGE  {"reference": ..., "candidate_1": ...,
            "candidate_2": ..., "query": ...}       -> {"preference": "1"|"2"|"tie"}

Responses are cached content-addressed under cache/<adapter-id>/<hash>.json;
identical payloads replay from cache instead of re-invoking the adapter.
"""

from __future__ import annotations

import json
import random
import shlex
import subprocess
import threading
import urllib.error
import urllib.request
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .alignment import token_texts
from .util import atomic_write_text, canonical_json, derive_seed, sha256_text

TTS = "TTS"
ASR = "ASR"
TASK = "TASK"
JUDGE = "JUDGE"
ADAPTER_KINDS = (TTS, ASR, TASK, JUDGE)


class AdapterProtocolError(ValueError):
    """A message that does not follow the wire protocol."""


class AdapterTransportError(RuntimeError):
    """Transport kept failing after the configured retries."""


class AdapterCallError(RuntimeError):
    """The adapter answered with status == "error"."""


@dataclass(frozen=True)
class AdapterRequest:
    kind: str
    request_id: str
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in ADAPTER_KINDS:
            raise AdapterProtocolError(f"unknown adapter kind {self.kind!r}")
        if not self.request_id or not isinstance(self.request_id, str):
            raise AdapterProtocolError("request_id must be a non-empty string")
        if not isinstance(self.payload, dict):
            raise AdapterProtocolError("payload must be an object")

    def to_json(self) -> str:
        return canonical_json(
            {"kind": self.kind, "request_id": self.request_id, "payload": self.payload}
        )

    @classmethod
    def from_json(cls, line: str) -> "AdapterRequest":
        data = _parse_line(line)
        try:
            return cls(
                kind=data["kind"], request_id=data["request_id"], payload=data["payload"]
            )
        except KeyError as exc:
            raise AdapterProtocolError(f"request is missing field {exc}") from exc


@dataclass(frozen=True)
class AdapterResponse:
    request_id: str
    status: str
    payload: dict = field(default_factory=dict)
    error: str | None = None

    def __post_init__(self) -> None:
        if self.status not in ("ok", "error"):
            raise AdapterProtocolError(f"unknown response status {self.status!r}")
        if not self.request_id or not isinstance(self.request_id, str):
            raise AdapterProtocolError("request_id must be a non-empty string")
        if not isinstance(self.payload, dict):
            raise AdapterProtocolError("payload must be an object")
        if self.status == "error" and not self.error:
            raise AdapterProtocolError("error responses must carry an error message")
        if self.status == "ok" and self.error is not None:
            raise AdapterProtocolError("ok responses must not carry an error message")

    def to_json(self) -> str:
        data: dict = {"request_id": self.request_id, "status": self.status}
        if self.status == "ok":
            data["payload"] = self.payload
        else:
            data["error"] = self.error
        return canonical_json(data)

    @classmethod
    def from_json(cls, line: str) -> "AdapterResponse":
        data = _parse_line(line)
        try:
            return cls(
                request_id=data["request_id"],
                status=data["status"],
                payload=data.get("payload", {}),
                error=data.get("error"),
            )
        except KeyError as exc:
            raise AdapterProtocolError(f"response is missing field {exc}") from exc


def _parse_line(line: str) -> dict:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise AdapterProtocolError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise AdapterProtocolError("protocol messages must be JSON objects")
    return data


class Transport(Protocol):
    def send(self, line: str) -> str: ...

    def close(self) -> None: ...


class SubprocessTransport:
    """Keeps one worker process alive and exchanges protocol lines over its
    stdin/stdout.  A dead process is respawned on the next send; calls are
    serialized because the pipe carries one conversation.
    """

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ValueError("empty adapter command")
        self.command = list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def send(self, line: str) -> str:
        with self._lock:
            proc = self._ensure_process()
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
                reply = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise AdapterTransportError(f"adapter process pipe failed: {exc}") from exc
            if reply == "":
                code = proc.poll()
                raise AdapterTransportError(
                    f"adapter process closed its output (exit code {code})"
                )
            return reply.rstrip("\n")

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            self._proc = None


class HttpTransport:
    """POSTs each protocol line as a JSON body and reads the response body."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def send(self, line: str) -> str:
        request = urllib.request.Request(
            self.url,
            data=line.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as reply:
                if reply.status != 200:
                    raise AdapterTransportError(f"adapter returned HTTP {reply.status}")
                return reply.read().decode("utf-8").strip()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise AdapterTransportError(f"HTTP adapter call failed: {exc}") from exc

    def close(self) -> None:  # nothing persistent to release
        pass


# Mock handlers answer a request with a response payload; raising marks the
# response as an error.  They run in-process behind MockTransport, which still
# round-trips every message through the wire encoding.
MockHandler = Callable[[AdapterRequest], dict]


class MockTransport:
    def __init__(self, handler: MockHandler):
        self.handler = handler

    def send(self, line: str) -> str:
        request = AdapterRequest.from_json(line)
        try:
            payload = self.handler(request)
            response = AdapterResponse(
                request_id=request.request_id, status="ok", payload=payload
            )
        except Exception as exc:
            response = AdapterResponse(
                request_id=request.request_id, status="error", payload={}, error=str(exc)
            )
        return response.to_json()

    def close(self) -> None:
        pass


class AdapterClient:
    """Retrying, caching front end over a transport.

    Identical payloads share one cache entry keyed by a digest of
    (adapter id, kind, payload); while a call is live, concurrent requests
    for the same key wait for it instead of invoking the adapter again.
    """

    def __init__(
        self,
        adapter_id: str,
        kind: str,
        transport: Transport,
        cache_root: Path | str | None = None,
        retries: int = 2,
        max_in_flight: int = 8,
    ):
        if kind not in ADAPTER_KINDS:
            raise ValueError(f"unknown adapter kind {kind!r}")
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.adapter_id = adapter_id
        self.kind = kind
        self.transport = transport
        self.cache_dir = None if cache_root is None else Path(cache_root) / adapter_id
        self.retries = retries
        self._in_flight = threading.Semaphore(max_in_flight)
        self._key_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._key_locks_guard = threading.Lock()

    def cache_key(self, payload: dict) -> str:
        return sha256_text(
            canonical_json(
                {"adapter_id": self.adapter_id, "kind": self.kind, "payload": payload}
            )
        )

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _read_cache(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if path is None or not path.is_file():
            return None
        with open(path, "r", encoding="utf-8") as f:
            entry = json.load(f)
        return entry["response"]["payload"]

    def _write_cache(self, key: str, request: AdapterRequest, payload: dict) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        entry = {
            "request": {"kind": request.kind, "payload": request.payload},
            "response": {"status": "ok", "payload": payload},
        }
        atomic_write_text(path, canonical_json(entry))

    def call(self, payload: dict) -> dict:
        key = self.cache_key(payload)
        cached = self._read_cache(key)
        if cached is not None:
            return cached
        with self._key_locks_guard:
            lock = self._key_locks[key]
        with lock:
            cached = self._read_cache(key)  # a concurrent caller may have landed it
            if cached is not None:
                return cached
            return self._invoke(key, payload)

    def _invoke(self, key: str, payload: dict) -> dict:
        last_failure: Exception | None = None
        for attempt in range(self.retries + 1):
            request = AdapterRequest(
                kind=self.kind, request_id=f"{key[:24]}-{attempt}", payload=payload
            )
            try:
                with self._in_flight:
                    reply_line = self.transport.send(request.to_json())
                response = AdapterResponse.from_json(reply_line)
                if response.request_id != request.request_id:
                    raise AdapterTransportError(
                        f"response id {response.request_id!r} does not match "
                        f"request id {request.request_id!r}"
                    )
            except (AdapterTransportError, AdapterProtocolError) as exc:
                last_failure = exc
                continue
            if response.status == "error":
                raise AdapterCallError(
                    f"adapter {self.adapter_id} failed: {response.error}"
                )
            self._write_cache(key, request, response.payload)
            return response.payload
        raise AdapterTransportError(
            f"adapter {self.adapter_id} unreachable after {self.retries + 1} attempts: "
            f"{last_failure}"
        )

    def close(self) -> None:
        self.transport.close()


# --- audio text sidecars -----------------------------------------------------
#
# The built-in synthesizer writes "<audio>.txt" next to each file it renders,
# and derived (reverberated/mixed) copies inherit the sidecar.  That is the
# audio manifest the transcription mocks read.


def sidecar_path(audio_path: Path | str) -> Path:
    return Path(str(audio_path) + ".txt")


def write_sidecar(audio_path: Path | str, text: str) -> None:
    atomic_write_text(sidecar_path(audio_path), text)


def read_sidecar(audio_path: Path | str) -> str:
    path = sidecar_path(audio_path)
    if not path.is_file():
        raise FileNotFoundError(f"no text sidecar for audio file {audio_path}")
    return path.read_text(encoding="utf-8")


# --- corruption model for the mock transcriber -------------------------------

# Words that plausibly confuse a transcriber, used for substitutions.
CONFUSION_LEXICON: dict[str, tuple[str, ...]] = {
    "see": ("sea", "seen"),
    "sea": ("see", "seat"),
    "to": ("two", "too"),
    "two": ("to", "too"),
    "for": ("four", "fore"),
    "four": ("for", "form"),
    "there": ("their", "they"),
    "their": ("there", "they"),
    "right": ("write", "rite"),
    "write": ("right", "white"),
    "know": ("no", "now"),
    "no": ("know", "now"),
    "meeting": ("meting", "meaning"),
    "week": ("weak", "wick"),
    "hear": ("here", "ear"),
    "here": ("hear", "her"),
    "would": ("wood", "world"),
    "one": ("won", "own"),
    "buy": ("by", "bye"),
    "plan": ("plane", "plain"),
}

# Fallback replacement vocabulary for substitutions of unknown words and for
# foreign insertions.
GENERAL_LEXICON: tuple[str, ...] = (
    "about", "after", "again", "along", "board", "bring", "chair", "clear",
    "couch", "count", "dairy", "doubt", "eight", "field", "gains", "glass",
    "green", "house", "laugh", "light", "money", "month", "night", "north",
    "offer", "paper", "phone", "point", "quick", "radio", "river", "round",
    "scale", "sense", "seven", "shape", "short", "sound", "south", "spare",
    "stage", "stand", "start", "steel", "stone", "table", "thing", "think",
    "train", "value", "video", "voice", "watch", "water", "wheel", "world",
)


def corrupt_text(
    text: str,
    rate: float,
    rng,
    confusions: Mapping[str, Sequence[str]] = CONFUSION_LEXICON,
    lexicon: Sequence[str] = GENERAL_LEXICON,
) -> str:
    """Apply token-level transcription errors at the given rate.

    Each token is independently edited with probability `rate`; the edit is
    chosen uniformly among substitution (a confusable word for the original),
    deletion, and insertion (an unrelated lexicon word takes the token's
    slot).  Every edit consumes the original token, so at rate 1 nothing
    survives unedited, and each edit costs one alignment error, so the
    measured WER concentrates on `rate`.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"corruption rate must be in [0, 1], got {rate}")
    out: list[str] = []
    for token in token_texts(text):
        if rate == 0.0 or rng.random() >= rate:
            out.append(token)
            continue
        edit = rng.choice(("sub", "del", "ins"))
        if edit == "del":
            continue
        if edit == "sub":
            options = confusions.get(token.lower())
            if options:
                out.append(rng.choice(list(options)))
                continue
        # unknown-word substitution and insertion both draw a different word
        replacement = rng.choice(lexicon)
        while replacement == token.lower():
            replacement = rng.choice(lexicon)
        out.append(replacement)
    return " ".join(out)


# --- built-in mock adapters ---------------------------------------------------


def make_mock_tts(options: dict) -> MockHandler:
    """Renders deterministic filler audio and the text sidecar.

    Duration scales with the token count so downstream mixing sees realistic
    lengths; samples are seeded noise derived from the text alone.
    """
    sample_rate = int(options.get("sample_rate", 24000))
    seconds_per_token = float(options.get("seconds_per_token", 0.05))
    rms = float(options.get("rms", 0.1))

    def handler(request: AdapterRequest) -> dict:
        from .audio import Signal, write_wav

        text = request.payload["text"]
        output_path = Path(request.payload["output_path"])
        n_tokens = max(1, len(text.split()))
        n_samples = max(int(0.2 * sample_rate), int(n_tokens * seconds_per_token * sample_rate))
        rng = np.random.default_rng(derive_seed(0, "mock-tts", text))
        samples = rng.standard_normal(n_samples) * rms
        output_path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(output_path, Signal(samples=samples, sample_rate=sample_rate))
        write_sidecar(output_path, text)
        return {"audio_path": str(output_path)}

    return handler


def make_identity_asr(options: dict) -> MockHandler:
    """Returns the exact text recorded in the audio file's sidecar."""

    def handler(request: AdapterRequest) -> dict:
        return {"text": read_sidecar(request.payload["audio_path"])}

    return handler


def make_corrupting_asr(options: dict) -> MockHandler:
    """Reads the sidecar text and corrupts it at a fixed token error rate."""
    rate = float(options.get("rate", 0.1))
    seed = int(options.get("seed", 0))

    def handler(request: AdapterRequest) -> dict:
        audio_path = request.payload["audio_path"]
        text = read_sidecar(audio_path)
        anchor = "/".join(Path(audio_path).parts[-3:])
        rng = random.Random(derive_seed(seed, "mock-asr-corrupt", anchor, text))
        return {"text": corrupt_text(text, rate, rng)}

    return handler


def make_heuristic_task(options: dict) -> MockHandler:
    """Cheap deterministic stand-ins for a task model.

    summarization: the first N tokens of the transcript.
    question_answering: the utterance sharing most tokens with the question,
    or the literal "unanswerable" when nothing overlaps.
    classification: a label chosen by hashing the utterance text.
    """
    summary_tokens = int(options.get("summary_tokens", 30))
    labels = list(options.get("labels", []))

    def handler(request: AdapterRequest) -> dict:
        payload = request.payload
        task = payload["task"]
        if task == "summarization":
            tokens = payload["transcript"].split()
            return {"output": " ".join(tokens[:summary_tokens])}
        if task == "question_answering":
            question_tokens = {t.casefold() for t in token_texts(payload["question"])}
            best_line = None
            best_overlap = 0
            for line in payload["transcript"].splitlines():
                spoken = line.split(": ", 1)[1] if ": " in line else line
                overlap = sum(
                    1 for t in token_texts(spoken) if t.casefold() in question_tokens
                )
                if overlap > best_overlap:
                    best_overlap = overlap
                    best_line = spoken
            return {"output": best_line if best_line is not None else "unanswerable"}
        if task == "classification":
            if not labels:
                raise ValueError("the classification mock needs a 'labels' option")
            digest = derive_seed(0, "mock-label", payload["utterance"])
            return {"output": labels[digest % len(labels)]}
        raise ValueError(f"unsupported task {task!r}")

    return handler


def make_judge(options: dict) -> MockHandler:
    """Scripted judges: policy 'tie', 'first', or 'length' (longer text wins)."""
    policy = options.get("policy", "tie")
    if policy not in ("tie", "first", "length"):
        raise ValueError(f"unknown judge policy {policy!r}")

    def handler(request: AdapterRequest) -> dict:
        if policy == "tie":
            return {"preference": "tie"}
        if policy == "first":
            return {"preference": "1"}
        a = request.payload["candidate_1"]
        b = request.payload["candidate_2"]
        if len(a) == len(b):
            return {"preference": "tie"}
        return {"preference": "1" if len(a) > len(b) else "2"}

    return handler


MOCK_FACTORIES: dict[str, Callable[[dict], MockHandler]] = {
    "tts": make_mock_tts,
    "identity_asr": make_identity_asr,
    "corrupting_asr": make_corrupting_asr,
    "heuristic_task": make_heuristic_task,
    "judge": make_judge,
}


def build_transport(config: Mapping) -> tuple[str, Transport]:
    """Create a transport (and a stable adapter id) from an adapter config.

    Config shapes:
        {"type": "mock", "name": ..., "options": {...}}
        {"type": "subprocess", "command": [...] or "cmd string"}
        {"type": "http", "url": ..., "timeout": seconds}
    An explicit "id" overrides the derived adapter id.
    """
    adapter_type = config.get("type")
    if adapter_type == "mock":
        name = config.get("name")
        if name not in MOCK_FACTORIES:
            raise ValueError(
                f"unknown mock adapter {name!r} (available: {sorted(MOCK_FACTORIES)})"
            )
        handler = MOCK_FACTORIES[name](dict(config.get("options", {})))
        return config.get("id", f"mock-{name}"), MockTransport(handler)
    if adapter_type == "subprocess":
        command = config.get("command")
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ValueError("subprocess adapter needs a non-empty 'command'")
        derived = f"cmd-{sha256_text(canonical_json(command))[:12]}"
        return config.get("id", derived), SubprocessTransport(command)
    if adapter_type == "http":
        url = config.get("url")
        if not url:
            raise ValueError("http adapter needs a 'url'")
        timeout = float(config.get("timeout", 60.0))
        return config.get("id", f"http-{sha256_text(url)[:12]}"), HttpTransport(url, timeout)
    raise ValueError(f"unknown adapter type {adapter_type!r}")


def build_adapter(
    kind: str,
    config: Mapping,
    cache_root: Path | str | None,
    retries: int = 2,
    max_in_flight: int = 8,
) -> AdapterClient:
    adapter_id, transport = build_transport(config)
    return AdapterClient(
        adapter_id=adapter_id,
        kind=kind,
        transport=transport,
        cache_root=cache_root,
        retries=retries,
        max_in_flight=max_in_flight,
    )
