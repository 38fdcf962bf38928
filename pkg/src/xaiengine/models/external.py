"""Black-box models living in a child process, spoken to over line-delimited JSON.

Protocol (UTF-8, one JSON document per line)::

    -> {"type": "spec"}
    <- {"type": "spec", "task": "classification", "n_outputs": 2}
    -> {"type": "predict", "id": 1, "inputs": [[...], ...]}
    <- {"type": "predict", "id": 1, "outputs": [[...], ...]}
    -> {"type": "shutdown"}            (child exits 0)
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from collections import deque
from typing import Sequence

import numpy as np

from ..errors import ProtocolError
from .base import TASKS, ModelHandle

logger = logging.getLogger(__name__)


class ExternalModel:
    """Owns the child process; requests are serialized through a lock."""

    def __init__(self, command, timeout: float = 60.0):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.argv = argv
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 1
        self._broken: ProtocolError | None = None
        self._stderr = deque(maxlen=200)
        self.wire: list[tuple[str, str]] = []  # (direction, line) capture for diagnostics/tests
        try:
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                          stderr=subprocess.PIPE, text=True, encoding="utf-8", bufsize=1)
        except OSError as exc:
            raise ProtocolError(f"cannot spawn external model {argv!r}: {exc}") from None
        self._lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()
        self.task, self.n_outputs = self._handshake()

    def _pump_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self):
        for line in self._proc.stderr:
            self._stderr.append(line.rstrip("\n"))

    @property
    def diagnostics(self) -> str:
        return "\n".join(self._stderr)

    def _send(self, doc: dict) -> None:
        line = json.dumps(doc, separators=(",", ":"))
        self.wire.append(("->", line))
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            raise self._fail("external model closed its input", doc.get("id")) from None

    def _receive(self, request_id=None) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise self._fail(f"no response within {self.timeout}s", request_id) from None
        if line is None:
            self._proc.wait(timeout=5)
            raise self._fail(f"external model exited with code {self._proc.returncode}", request_id)
        self.wire.append(("<-", line.rstrip("\n")))
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise self._fail(f"invalid JSON from external model: {exc.msg}: {line.strip()[:200]!r}",
                             request_id) from None
        if not isinstance(doc, dict):
            raise self._fail("response is not a JSON object", request_id)
        return doc

    def _fail(self, message, request_id=None) -> ProtocolError:
        # give the stderr pump a moment so diagnostics are complete
        threading.Event().wait(0.05)
        err = ProtocolError(message, request_id, self.diagnostics)
        self._broken = err
        return err

    def _handshake(self):
        self._send({"type": "spec"})
        doc = self._receive()
        if doc.get("type") != "spec":
            raise self._fail(f"handshake failed: expected spec reply, got {doc.get('type')!r}")
        task, n_out = doc.get("task"), doc.get("n_outputs")
        if task not in TASKS or not isinstance(n_out, int) or n_out < 1:
            raise self._fail(f"handshake failed: bad spec reply {doc!r}")
        return task, n_out

    def predict(self, x: np.ndarray) -> np.ndarray:
        with self._lock:
            if self._broken is not None:
                raise self._broken
            rid = self._next_id
            self._next_id += 1
            self._send({"type": "predict", "id": rid, "inputs": np.asarray(x, dtype=float).tolist()})
            doc = self._receive(rid)
            if doc.get("type") != "predict" or doc.get("id") != rid:
                raise self._fail(f"unexpected response {str(doc)[:200]}", rid)
            try:
                out = np.asarray(doc["outputs"], dtype=float)
            except (KeyError, TypeError, ValueError):
                raise self._fail("response lacks a numeric 'outputs' matrix", rid) from None
            if out.ndim != 2 or out.shape != (x.shape[0], self.n_outputs):
                raise self._fail(f"outputs shape {out.shape} != ({x.shape[0]}, {self.n_outputs})", rid)
            return out

    def close(self) -> int | None:
        with self._lock:
            if self._proc.poll() is None:
                try:
                    self._send({"type": "shutdown"})
                    self._proc.stdin.close()
                except ProtocolError:
                    pass
                try:
                    self._proc.wait(timeout=10)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
            return self._proc.returncode

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def spawn_external(command: str | Sequence[str], n_features: int | None = None, labels=(),
                   timeout: float = 60.0) -> ModelHandle:
    """Start a child model and return a (non-differentiable) handle to it.

    ``handle.model.close()`` performs the shutdown exchange.
    """
    ext = ExternalModel(command, timeout)
    return ModelHandle(ext.task, ext.n_outputs, ext.predict, n_features, labels=tuple(labels), model=ext)
