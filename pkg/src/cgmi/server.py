"""Reference HTTP oracle server.

Wire format::

    POST /v1/predict  {"inputs": [[x_1..x_d], ...], "return": "logits" | "probs"}
      200 -> {"outputs": [[s_1..s_C], ...], "kind": "logits" | "probs"}
      400 -> malformed request, 429 -> server-side query budget exhausted
    GET /v1/meta      -> {"classes": C, "input_dim": d}
"""
from __future__ import annotations

import json
import logging
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .oracle import LOGITS, PROBS, BudgetExhausted, QueryBudget, ToyClassifier, softmax

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024 * 1024


class _Handler(BaseHTTPRequestHandler):
    server: "OracleServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, doc: dict):
        body = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path.rstrip("/") == "/v1/meta":
            clf = self.server.classifier
            self._send(200, {"classes": clf.num_classes, "input_dim": clf.input_dim})
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path.rstrip("/") != "/v1/predict":
            self._send(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = -1
        if not 0 < length <= MAX_BODY:
            self._send(400, {"error": "missing or oversized body"})
            return
        raw = self.rfile.read(length)
        try:
            xs, kind = self.server.parse(raw)
        except ValueError as exc:
            self._send(400, {"error": str(exc)})
            return
        try:
            self.server.budget.charge(len(xs))
        except BudgetExhausted as exc:
            self._send(429, {"error": str(exc)})
            return
        scores = self.server.classifier.scores(xs) if len(xs) else np.empty((0, self.server.classifier.num_classes))
        if kind == PROBS and len(xs):
            scores = softmax(scores)
        self._send(200, {"outputs": scores.tolist(), "kind": kind})


class OracleServer(ThreadingHTTPServer):
    """Serves a :class:`ToyClassifier`; ``max_queries`` caps the server's own budget."""

    daemon_threads = True

    def __init__(self, classifier: ToyClassifier, host: str = "127.0.0.1", port: int = 0,
                 max_queries: int | None = None):
        self.classifier = classifier
        self.budget = QueryBudget(max_queries)
        self._thread = None
        super().__init__((host, port), _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def parse(self, raw: bytes):
        try:
            doc = json.loads(raw)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ValueError(f"body is not JSON: {exc}") from None
        if not isinstance(doc, dict) or "inputs" not in doc:
            raise ValueError("body must be an object with 'inputs'")
        kind = doc.get("return", LOGITS)
        if kind not in (LOGITS, PROBS):
            raise ValueError("'return' must be 'logits' or 'probs'")
        inputs = doc["inputs"]
        d = self.classifier.input_dim
        if not isinstance(inputs, list):
            raise ValueError("'inputs' must be a list")
        for row in inputs:
            if (not isinstance(row, list) or len(row) != d
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
                               for v in row)):
                raise ValueError(f"every input must be a list of {d} finite numbers")
        return np.asarray(inputs, dtype=np.float64).reshape(len(inputs), d), kind

    def start(self) -> "OracleServer":
        """Serve from a background thread (tests, loopback runs)."""
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
