"""Run a built-in mock adapter as a standalone line-protocol server.

    python -m noisecurve.mock_server --mock identity_asr
    python -m noisecurve.mock_server --mock judge --options '{"policy": "length"}'
    python -m noisecurve.mock_server --mock heuristic_task --http 127.0.0.1:8731

Without --http the server speaks the stdin/stdout line protocol, one JSON
request per line, one JSON response per line.  With --http it answers POST
requests carrying the same JSON bodies.  Either way it doubles as a working
reference for writing real adapters.
"""

from __future__ import annotations

import argparse
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .adapters import MOCK_FACTORIES, MockHandler, MockTransport


def serve_stdio(handler: MockHandler, stdin=None, stdout=None) -> None:
    """Answer line-protocol requests until stdin closes."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    transport = MockTransport(handler)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(transport.send(line) + "\n")
        stdout.flush()


def serve_http(handler: MockHandler, host: str, port: int) -> None:
    transport = MockTransport(handler)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802 (http.server API)
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            reply = transport.send(body).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(reply)))
            self.end_headers()
            self.wfile.write(reply)

        def log_message(self, *args):  # keep the protocol stream clean
            pass

    server = ThreadingHTTPServer((host, port), Handler)
    print(f"serving on http://{host}:{server.server_address[1]}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mock", required=True, choices=sorted(MOCK_FACTORIES))
    parser.add_argument("--options", default="{}", help="JSON object of mock options")
    parser.add_argument("--http", metavar="HOST:PORT", help="serve over HTTP instead of stdio")
    args = parser.parse_args(argv)

    options = json.loads(args.options)
    if not isinstance(options, dict):
        parser.error("--options must be a JSON object")
    handler = MOCK_FACTORIES[args.mock](options)

    if args.http:
        host, _, port = args.http.partition(":")
        serve_http(handler, host or "127.0.0.1", int(port or 0))
    else:
        serve_stdio(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
