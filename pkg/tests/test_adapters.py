import json
import random
import socket
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from io import StringIO
from pathlib import Path

import numpy as np
import pytest

from noisecurve import mock_server
from noisecurve.adapters import (
    AdapterCallError,
    AdapterClient,
    AdapterProtocolError,
    AdapterRequest,
    AdapterResponse,
    AdapterTransportError,
    CONFUSION_LEXICON,
    GENERAL_LEXICON,
    HttpTransport,
    MockTransport,
    SubprocessTransport,
    build_transport,
    corrupt_text,
    make_corrupting_asr,
    make_heuristic_task,
    make_identity_asr,
    make_judge,
    make_mock_tts,
    read_sidecar,
    sidecar_path,
    write_sidecar,
)
from noisecurve.alignment import token_texts, utterance_counts
from noisecurve.audio import read_wav


class TestProtocolMessages:
    def test_request_round_trip(self):
        request = AdapterRequest(kind="ASR", request_id="r1", payload={"a": 1})
        assert AdapterRequest.from_json(request.to_json()) == request

    def test_request_validation(self):
        with pytest.raises(AdapterProtocolError, match="kind"):
            AdapterRequest(kind="OCR", request_id="r1", payload={})
        with pytest.raises(AdapterProtocolError, match="request_id"):
            AdapterRequest(kind="ASR", request_id="", payload={})
        with pytest.raises(AdapterProtocolError, match="payload"):
            AdapterRequest(kind="ASR", request_id="r1", payload=[1])

    def test_request_missing_field(self):
        with pytest.raises(AdapterProtocolError, match="missing field"):
            AdapterRequest.from_json('{"kind": "ASR", "payload": {}}')

    def test_response_round_trip_ok(self):
        response = AdapterResponse(request_id="r1", status="ok", payload={"x": 2})
        decoded = AdapterResponse.from_json(response.to_json())
        assert decoded == response

    def test_response_round_trip_error(self):
        response = AdapterResponse(request_id="r1", status="error", error="boom")
        decoded = AdapterResponse.from_json(response.to_json())
        assert decoded.status == "error"
        assert decoded.error == "boom"
        assert decoded.payload == {}

    def test_response_validation(self):
        with pytest.raises(AdapterProtocolError, match="status"):
            AdapterResponse(request_id="r1", status="maybe")
        with pytest.raises(AdapterProtocolError, match="error message"):
            AdapterResponse(request_id="r1", status="error")
        with pytest.raises(AdapterProtocolError, match="must not carry"):
            AdapterResponse(request_id="r1", status="ok", error="boom")
        with pytest.raises(AdapterProtocolError, match="request_id"):
            AdapterResponse(request_id="", status="ok")

    def test_malformed_lines(self):
        with pytest.raises(AdapterProtocolError, match="not valid JSON"):
            AdapterResponse.from_json("{nope")
        with pytest.raises(AdapterProtocolError, match="JSON objects"):
            AdapterRequest.from_json("[1, 2]")


class TestMockTransport:
    def test_ok_round_trip(self):
        transport = MockTransport(lambda request: {"echo": request.payload["x"]})
        request = AdapterRequest(kind="TASK", request_id="t1", payload={"x": 5})
        response = AdapterResponse.from_json(transport.send(request.to_json()))
        assert response.request_id == "t1"
        assert response.status == "ok"
        assert response.payload == {"echo": 5}

    def test_handler_exception_becomes_error_response(self):
        def explode(request):
            raise RuntimeError("kaboom")

        transport = MockTransport(explode)
        request = AdapterRequest(kind="TASK", request_id="t2", payload={})
        response = AdapterResponse.from_json(transport.send(request.to_json()))
        assert response.status == "error"
        assert response.request_id == "t2"
        assert "kaboom" in response.error


class _CountingTransport:
    """Mock transport wrapper that counts live invocations."""

    def __init__(self, handler, delay=0.0):
        self.inner = MockTransport(handler)
        self.calls = 0
        self.delay = delay
        self._lock = threading.Lock()

    def send(self, line):
        with self._lock:
            self.calls += 1
        if self.delay:
            time.sleep(self.delay)
        return self.inner.send(line)

    def close(self):
        pass


class TestAdapterClientCaching:
    def test_identical_payloads_hit_cache(self, tmp_path):
        transport = _CountingTransport(lambda request: {"v": 1})
        client = AdapterClient("mock-x", "TASK", transport, cache_root=tmp_path)
        assert client.call({"q": "a"}) == {"v": 1}
        assert client.call({"q": "a"}) == {"v": 1}
        assert transport.calls == 1
        assert client.call({"q": "b"}) == {"v": 1}
        assert transport.calls == 2

    def test_cache_file_layout(self, tmp_path):
        transport = _CountingTransport(lambda request: {"v": 7})
        client = AdapterClient("mock-x", "TASK", transport, cache_root=tmp_path)
        payload = {"q": "a"}
        client.call(payload)
        key = client.cache_key(payload)
        path = tmp_path / "mock-x" / f"{key}.json"
        assert path.is_file()
        entry = json.loads(path.read_text(encoding="utf-8"))
        assert entry["request"]["kind"] == "TASK"
        assert entry["request"]["payload"] == payload
        assert entry["response"] == {"status": "ok", "payload": {"v": 7}}

    def test_cache_survives_client_restart(self, tmp_path):
        first = _CountingTransport(lambda request: {"v": 1})
        AdapterClient("mock-x", "TASK", first, cache_root=tmp_path).call({"q": "a"})
        second = _CountingTransport(lambda request: {"v": 2})
        client = AdapterClient("mock-x", "TASK", second, cache_root=tmp_path)
        assert client.call({"q": "a"}) == {"v": 1}  # replayed, not re-invoked
        assert second.calls == 0

    def test_cache_key_depends_on_adapter_identity(self, tmp_path):
        transport = _CountingTransport(lambda request: {"v": 1})
        a = AdapterClient("adapter-a", "TASK", transport, cache_root=tmp_path)
        b = AdapterClient("adapter-b", "TASK", transport, cache_root=tmp_path)
        payload = {"q": "a"}
        assert a.cache_key(payload) != b.cache_key(payload)
        assert len(a.cache_key(payload)) == 64
        a.call(payload)
        b.call(payload)
        assert transport.calls == 2

    def test_no_cache_root_disables_replay(self):
        transport = _CountingTransport(lambda request: {"v": 1})
        client = AdapterClient("mock-x", "TASK", transport, cache_root=None)
        client.call({"q": "a"})
        client.call({"q": "a"})
        assert transport.calls == 2

    def test_concurrent_same_key_invokes_once(self, tmp_path):
        transport = _CountingTransport(lambda request: {"v": 1}, delay=0.05)
        client = AdapterClient("mock-x", "TASK", transport, cache_root=tmp_path)
        results = []
        threads = [
            threading.Thread(target=lambda: results.append(client.call({"q": "a"})))
            for _ in range(4)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
        assert results == [{"v": 1}] * 4
        assert transport.calls == 1

    def test_different_keys_run_concurrently(self, tmp_path):
        first_started = threading.Event()
        release_first = threading.Event()

        def handler(request):
            if request.payload["who"] == "slow":
                first_started.set()
                assert release_first.wait(timeout=10)
            return {"done": request.payload["who"]}

        client = AdapterClient(
            "mock-x", "TASK", MockTransport(handler), cache_root=tmp_path
        )
        slow = threading.Thread(target=lambda: client.call({"who": "slow"}))
        slow.start()
        assert first_started.wait(timeout=10)
        # a different key proceeds while the first is still in flight
        assert client.call({"who": "fast"}) == {"done": "fast"}
        release_first.set()
        slow.join(timeout=10)
        assert not slow.is_alive()

    def test_constructor_validation(self):
        transport = MockTransport(lambda request: {})
        with pytest.raises(ValueError, match="kind"):
            AdapterClient("x", "OCR", transport)
        with pytest.raises(ValueError, match="retries"):
            AdapterClient("x", "TASK", transport, retries=-1)


class _ScriptedTransport:
    """Replays a script of behaviors: 'ok', 'error', 'raise', 'wrong-id'."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []

    def send(self, line):
        request = json.loads(line)
        self.requests.append(request)
        action = self.script.pop(0)
        if action == "raise":
            raise AdapterTransportError("connection dropped")
        if action == "error":
            return json.dumps(
                {"request_id": request["request_id"], "status": "error", "error": "bad input"}
            )
        if action == "wrong-id":
            return json.dumps(
                {"request_id": "someone-else", "status": "ok", "payload": {}}
            )
        return json.dumps(
            {"request_id": request["request_id"], "status": "ok", "payload": {"ok": True}}
        )

    def close(self):
        pass


class TestAdapterClientRetries:
    def test_transport_error_retried(self):
        transport = _ScriptedTransport(["raise", "ok"])
        client = AdapterClient("x", "TASK", transport, retries=2)
        assert client.call({"q": 1}) == {"ok": True}
        assert [r["request_id"][-2:] for r in transport.requests] == ["-0", "-1"]

    def test_exhausted_retries(self):
        transport = _ScriptedTransport(["raise", "raise", "raise"])
        client = AdapterClient("x", "TASK", transport, retries=2)
        with pytest.raises(AdapterTransportError, match="unreachable after 3 attempts"):
            client.call({"q": 1})
        assert len(transport.requests) == 3

    def test_id_mismatch_retried(self):
        transport = _ScriptedTransport(["wrong-id", "ok"])
        client = AdapterClient("x", "TASK", transport, retries=1)
        assert client.call({"q": 1}) == {"ok": True}
        assert len(transport.requests) == 2

    def test_error_status_fails_fast(self):
        transport = _ScriptedTransport(["error", "ok"])
        client = AdapterClient("x", "TASK", transport, retries=5)
        with pytest.raises(AdapterCallError, match="bad input"):
            client.call({"q": 1})
        assert len(transport.requests) == 1  # no retry on a well-formed refusal

    def test_error_status_not_cached(self, tmp_path):
        transport = _ScriptedTransport(["error", "ok"])
        client = AdapterClient("x", "TASK", transport, cache_root=tmp_path, retries=0)
        with pytest.raises(AdapterCallError):
            client.call({"q": 1})
        assert client.call({"q": 1}) == {"ok": True}  # second call reaches the adapter

    def test_zero_retries_single_attempt(self):
        transport = _ScriptedTransport(["raise"])
        client = AdapterClient("x", "TASK", transport, retries=0)
        with pytest.raises(AdapterTransportError, match="after 1 attempts"):
            client.call({"q": 1})


_JUDGE_COMMAND = [
    sys.executable,
    "-m",
    "noisecurve.mock_server",
    "--mock",
    "judge",
    "--options",
    '{"policy": "first"}',
]

_ONE_SHOT_SERVER = (
    "import sys, json\n"
    "line = sys.stdin.readline()\n"
    "req = json.loads(line)\n"
    "reply = {'request_id': req['request_id'], 'status': 'ok', 'payload': {'n': 1}}\n"
    "print(json.dumps(reply), flush=True)\n"
)

_SILENT_EXIT_SERVER = "import sys\nsys.stdin.readline()\n"


class TestSubprocessTransport:
    def test_round_trip_through_mock_server(self):
        transport = SubprocessTransport(_JUDGE_COMMAND)
        client = AdapterClient("judge", "JUDGE", transport, retries=0)
        try:
            payload = {"reference": "r", "candidate_1": "a", "candidate_2": "b", "query": None}
            assert client.call(payload) == {"preference": "1"}
            assert client.call({**payload, "candidate_1": "c"}) == {"preference": "1"}
        finally:
            client.close()

    def test_respawns_after_process_exit(self):
        transport = SubprocessTransport([sys.executable, "-u", "-c", _ONE_SHOT_SERVER])
        client = AdapterClient("oneshot", "TASK", transport, retries=2)
        try:
            assert client.call({"q": 1}) == {"n": 1}
            first_proc = transport._proc
            first_proc.wait(timeout=10)  # the one-shot server exits after replying
            assert client.call({"q": 2}) == {"n": 1}
            assert transport._proc.pid != first_proc.pid
        finally:
            client.close()

    def test_eof_raises_transport_error(self):
        transport = SubprocessTransport([sys.executable, "-u", "-c", _SILENT_EXIT_SERVER])
        try:
            request = AdapterRequest(kind="TASK", request_id="r-0", payload={})
            with pytest.raises(AdapterTransportError, match="closed its output"):
                transport.send(request.to_json())
        finally:
            transport.close()

    def test_empty_command_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            SubprocessTransport([])


@pytest.fixture()
def judge_http_server():
    transport = MockTransport(make_judge({"policy": "length"}))

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            reply = transport.send(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Length", str(len(reply)))
            self.end_headers()
            self.wfile.write(reply)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()


class TestHttpTransport:
    def test_round_trip(self, judge_http_server):
        client = AdapterClient("judge", "JUDGE", HttpTransport(judge_http_server))
        payload = {"reference": "r", "candidate_1": "looooong", "candidate_2": "x", "query": None}
        assert client.call(payload) == {"preference": "1"}

    def test_http_error_code(self):
        class Failing(BaseHTTPRequestHandler):
            def do_POST(self):
                self.send_response(500)
                self.send_header("Content-Length", "0")
                self.end_headers()

            def log_message(self, *args):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), Failing)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            transport = HttpTransport(f"http://127.0.0.1:{server.server_address[1]}")
            with pytest.raises(AdapterTransportError):
                transport.send('{"request_id": "r", "kind": "TASK", "payload": {}}')
        finally:
            server.shutdown()
            server.server_close()

    def test_connection_refused(self):
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            unused_port = probe.getsockname()[1]
        transport = HttpTransport(f"http://127.0.0.1:{unused_port}", timeout=2.0)
        with pytest.raises(AdapterTransportError):
            transport.send("{}")


class TestServeStdio:
    def test_line_protocol(self):
        requests = [
            AdapterRequest(kind="JUDGE", request_id="a", payload={}).to_json(),
            "",  # blank lines are skipped
            AdapterRequest(kind="JUDGE", request_id="b", payload={}).to_json(),
        ]
        stdin = StringIO("\n".join(requests) + "\n")
        stdout = StringIO()
        mock_server.serve_stdio(make_judge({"policy": "tie"}), stdin=stdin, stdout=stdout)
        lines = stdout.getvalue().strip().splitlines()
        assert len(lines) == 2
        replies = [AdapterResponse.from_json(line) for line in lines]
        assert [r.request_id for r in replies] == ["a", "b"]
        assert all(r.payload == {"preference": "tie"} for r in replies)

    def test_main_rejects_unknown_mock(self, capsys):
        with pytest.raises(SystemExit):
            mock_server.main(["--mock", "telepathy"])

    def test_main_rejects_non_object_options(self, capsys):
        with pytest.raises(SystemExit):
            mock_server.main(["--mock", "judge", "--options", "[1]"])


class _ScriptedRng:
    """random()/choice() driven by explicit scripts, for exact edit paths."""

    def __init__(self, randoms, choices):
        self.randoms = list(randoms)
        self.choices = list(choices)

    def random(self):
        return self.randoms.pop(0)

    def choice(self, seq):
        value = self.choices.pop(0)
        assert value in list(seq), f"scripted choice {value!r} not offered in {seq!r}"
        return value


class TestCorruptText:
    def test_rate_zero_is_canonical_identity(self):
        rng = random.Random(0)
        text = "Hello there, world!"
        assert corrupt_text(text, 0.0, rng) == "Hello there , world !"

    def test_rate_validation(self):
        rng = random.Random(0)
        with pytest.raises(ValueError, match="rate"):
            corrupt_text("x", -0.1, rng)
        with pytest.raises(ValueError, match="rate"):
            corrupt_text("x", 1.1, rng)

    def test_rate_one_consumes_every_token(self):
        # tokens outside both lexicons can never reappear
        text = "qqq www eee rrr ttt yyy"
        for seed in range(10):
            out = corrupt_text(text, 1.0, random.Random(seed))
            out_tokens = out.split()
            assert not set(out_tokens) & set(text.split())
            assert len(out_tokens) <= 6

    def test_substitution_prefers_confusion_lexicon(self):
        rng = _ScriptedRng(randoms=[0.1], choices=["sub", "seen"])
        assert corrupt_text("see", 0.5, rng) == "seen"

    def test_substitution_of_unknown_word_uses_general_lexicon(self):
        rng = _ScriptedRng(randoms=[0.1], choices=["sub", "world"])
        assert corrupt_text("qqq", 0.5, rng) == "world"

    def test_deletion(self):
        rng = _ScriptedRng(randoms=[0.1, 0.9], choices=["del"])
        assert corrupt_text("drop keep", 0.5, rng) == "keep"

    def test_insertion_replaces_the_slot(self):
        rng = _ScriptedRng(randoms=[0.1, 0.9], choices=["ins", "table"])
        assert corrupt_text("gone keep", 0.5, rng) == "table keep"

    def test_insertion_redraws_until_different(self):
        rng = _ScriptedRng(randoms=[0.1], choices=["ins", "table", "water"])
        assert corrupt_text("table", 0.5, rng) == "water"

    def test_keep_path(self):
        rng = _ScriptedRng(randoms=[0.9], choices=[])
        assert corrupt_text("stay", 0.5, rng) == "stay"

    def test_deterministic_for_same_rng_seed(self):
        text = "the quick brown fox jumps over the lazy dog"
        a = corrupt_text(text, 0.5, random.Random(42))
        b = corrupt_text(text, 0.5, random.Random(42))
        assert a == b

    def test_expected_wer_tracks_rate(self):
        rate = 0.3
        wers = []
        for u in range(200):
            tokens = [f"tok{u:03d}x{i:02d}" for i in range(20)]
            ref = " ".join(tokens)
            noisy = corrupt_text(ref, rate, random.Random(u))
            wers.append(utterance_counts(ref, noisy).wer())
        assert abs(sum(wers) / len(wers) - rate) < 0.05

    def test_hypothesis_never_longer_than_reference(self):
        for seed in range(20):
            ref = " ".join(f"w{i}" for i in range(30))
            noisy = corrupt_text(ref, 0.5, random.Random(seed))
            assert len(noisy.split()) <= 30


class TestMockTts:
    def _call(self, handler, text, path):
        request = AdapterRequest(
            kind="TTS", request_id="t", payload={"text": text, "output_path": str(path)}
        )
        return handler(request)

    def test_writes_audio_and_sidecar(self, tmp_path):
        handler = make_mock_tts({"sample_rate": 8000})
        out = self._call(handler, "hello there friend", tmp_path / "a.wav")
        assert out == {"audio_path": str(tmp_path / "a.wav")}
        signal = read_wav(tmp_path / "a.wav")
        assert signal.sample_rate == 8000
        # three tokens at 0.05 s/token is under the 0.2 s floor
        assert len(signal) == 1600
        assert read_sidecar(tmp_path / "a.wav") == "hello there friend"

    def test_duration_scales_with_token_count(self, tmp_path):
        handler = make_mock_tts({"sample_rate": 8000})
        text = " ".join(["word"] * 30)
        self._call(handler, text, tmp_path / "b.wav")
        assert len(read_wav(tmp_path / "b.wav")) == 30 * 400

    def test_samples_depend_on_text_not_path(self, tmp_path):
        handler = make_mock_tts({"sample_rate": 8000})
        self._call(handler, "same words", tmp_path / "one.wav")
        self._call(handler, "same words", tmp_path / "two.wav")
        self._call(handler, "other words", tmp_path / "three.wav")
        one = read_wav(tmp_path / "one.wav").samples
        two = read_wav(tmp_path / "two.wav").samples
        three = read_wav(tmp_path / "three.wav").samples
        np.testing.assert_array_equal(one, two)
        assert not np.array_equal(one, three)


class TestIdentityAsr:
    def test_returns_sidecar_text(self, tmp_path):
        audio = tmp_path / "x.wav"
        audio.write_bytes(b"")
        write_sidecar(audio, "spoken words")
        handler = make_identity_asr({})
        request = AdapterRequest(
            kind="ASR", request_id="r", payload={"audio_path": str(audio)}
        )
        assert handler(request) == {"text": "spoken words"}

    def test_missing_sidecar_surfaces_as_call_error(self, tmp_path):
        client = AdapterClient(
            "asr", "ASR", MockTransport(make_identity_asr({})), retries=0
        )
        with pytest.raises(AdapterCallError, match="no text sidecar"):
            client.call({"audio_path": str(tmp_path / "missing.wav")})


class TestCorruptingAsr:
    def _request(self, audio):
        return AdapterRequest(
            kind="ASR", request_id="r", payload={"audio_path": str(audio)}
        )

    def test_rate_zero_is_identity(self, tmp_path):
        audio = tmp_path / "x.wav"
        write_sidecar(audio, "clean spoken text")
        handler = make_corrupting_asr({"rate": 0.0})
        assert handler(self._request(audio)) == {"text": "clean spoken text"}

    def test_deterministic_per_file(self, tmp_path):
        audio = tmp_path / "level" / "t0" / "0000_00.wav"
        audio.parent.mkdir(parents=True)
        write_sidecar(audio, "the meeting will start soon today")
        handler = make_corrupting_asr({"rate": 0.6, "seed": 1})
        first = handler(self._request(audio))
        second = handler(self._request(audio))
        assert first == second

    def test_output_varies_with_path_anchor(self, tmp_path):
        text = "the meeting will start soon today and run long"
        outputs = set()
        for level in range(6):
            audio = tmp_path / f"mix-{level}" / "t0" / "0000_00.wav"
            audio.parent.mkdir(parents=True)
            write_sidecar(audio, text)
            handler = make_corrupting_asr({"rate": 0.6, "seed": 1})
            outputs.add(handler(self._request(audio))["text"])
        assert len(outputs) > 1


class TestHeuristicTask:
    def test_summarization_takes_leading_tokens(self):
        handler = make_heuristic_task({"summary_tokens": 3})
        request = AdapterRequest(
            kind="TASK",
            request_id="r",
            payload={"task": "summarization", "transcript": "a b c d e f", "query": ""},
        )
        assert handler(request) == {"output": "a b c"}

    def test_question_answering_picks_overlapping_line(self):
        handler = make_heuristic_task({})
        request = AdapterRequest(
            kind="TASK",
            request_id="r",
            payload={
                "task": "question_answering",
                "transcript": "spk0: the cat sat on the mat\nspk1: dogs bark loudly at night",
                "question": "where did the cat sit",
            },
        )
        assert handler(request) == {"output": "the cat sat on the mat"}

    def test_question_answering_unanswerable(self):
        handler = make_heuristic_task({})
        request = AdapterRequest(
            kind="TASK",
            request_id="r",
            payload={
                "task": "question_answering",
                "transcript": "spk0: alpha beta\nspk1: gamma delta",
                "question": "zzz qqq",
            },
        )
        assert handler(request) == {"output": "unanswerable"}

    def test_classification_is_deterministic_and_in_labels(self):
        handler = make_heuristic_task({"labels": ["pos", "neg", "neutral"]})
        request = AdapterRequest(
            kind="TASK",
            request_id="r",
            payload={"task": "classification", "utterance": "great stuff", "labels": []},
        )
        first = handler(request)
        assert first["output"] in ("pos", "neg", "neutral")
        again = make_heuristic_task({"labels": ["pos", "neg", "neutral"]})(request)
        assert again == first

    def test_classification_requires_labels(self):
        handler = make_heuristic_task({})
        request = AdapterRequest(
            kind="TASK",
            request_id="r",
            payload={"task": "classification", "utterance": "x", "labels": []},
        )
        with pytest.raises(ValueError, match="labels"):
            handler(request)

    def test_unknown_task(self):
        handler = make_heuristic_task({})
        request = AdapterRequest(
            kind="TASK", request_id="r", payload={"task": "translation"}
        )
        with pytest.raises(ValueError, match="unsupported task"):
            handler(request)


class TestJudgeMock:
    def _request(self, one, two):
        return AdapterRequest(
            kind="JUDGE",
            request_id="r",
            payload={"reference": "ref", "candidate_1": one, "candidate_2": two, "query": None},
        )

    def test_tie_policy(self):
        handler = make_judge({"policy": "tie"})
        assert handler(self._request("a", "bb")) == {"preference": "tie"}

    def test_first_policy(self):
        handler = make_judge({"policy": "first"})
        assert handler(self._request("a", "bb")) == {"preference": "1"}

    def test_length_policy(self):
        handler = make_judge({"policy": "length"})
        assert handler(self._request("aaaa", "bb")) == {"preference": "1"}
        assert handler(self._request("bb", "aaaa")) == {"preference": "2"}
        assert handler(self._request("xx", "yy")) == {"preference": "tie"}

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="judge policy"):
            make_judge({"policy": "coin-flip"})


class TestBuildTransport:
    def test_mock(self):
        adapter_id, transport = build_transport({"type": "mock", "name": "judge"})
        assert adapter_id == "mock-judge"
        assert isinstance(transport, MockTransport)

    def test_unknown_mock_name(self):
        with pytest.raises(ValueError, match="unknown mock adapter"):
            build_transport({"type": "mock", "name": "telepathy"})

    def test_subprocess_from_string_command(self):
        adapter_id, transport = build_transport(
            {"type": "subprocess", "command": "cat -u"}
        )
        assert isinstance(transport, SubprocessTransport)
        assert transport.command == ["cat", "-u"]
        assert adapter_id.startswith("cmd-")
        assert len(adapter_id) == len("cmd-") + 12

    def test_subprocess_id_stable(self):
        a, _ = build_transport({"type": "subprocess", "command": ["cat"]})
        b, _ = build_transport({"type": "subprocess", "command": ["cat"]})
        c, _ = build_transport({"type": "subprocess", "command": ["tac"]})
        assert a == b != c

    def test_subprocess_needs_command(self):
        with pytest.raises(ValueError, match="command"):
            build_transport({"type": "subprocess", "command": ""})

    def test_http(self):
        adapter_id, transport = build_transport(
            {"type": "http", "url": "http://127.0.0.1:9", "timeout": 5}
        )
        assert isinstance(transport, HttpTransport)
        assert adapter_id.startswith("http-")
        assert transport.timeout == 5.0

    def test_http_needs_url(self):
        with pytest.raises(ValueError, match="url"):
            build_transport({"type": "http"})

    def test_explicit_id_wins(self):
        adapter_id, _ = build_transport(
            {"type": "mock", "name": "judge", "id": "my-judge"}
        )
        assert adapter_id == "my-judge"

    def test_unknown_type(self):
        with pytest.raises(ValueError, match="adapter type"):
            build_transport({"type": "carrier-pigeon"})


class TestSidecars:
    def test_path_appends_txt(self):
        assert sidecar_path("/tmp/a/b.wav") == Path("/tmp/a/b.wav.txt")

    def test_round_trip(self, tmp_path):
        audio = tmp_path / "x.wav"
        write_sidecar(audio, "line of text")
        assert read_sidecar(audio) == "line of text"

    def test_missing_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_sidecar(tmp_path / "ghost.wav")
