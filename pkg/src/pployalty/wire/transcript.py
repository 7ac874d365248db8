"""Newline-delimited capture of every wire message, exactly as sent."""

from __future__ import annotations

import base64
import json
import threading
import time


class Transcript:
    """Append-only NDJSON log; one entry per line on the wire.

    Entries: ``{"conn": n, "dir": "in"|"out", "ts": ms, "line": text}``.
    Lines that are not valid UTF-8 are stored as ``"line_b64"`` instead.
    """

    def __init__(self, path=None):
        self.path = path
        self.entries = []
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def record(self, conn, direction, raw):
        entry = {"conn": conn, "dir": direction, "ts": int(time.time() * 1000)}
        try:
            entry["line"] = raw.decode("utf-8").rstrip("\n")
        except UnicodeDecodeError:
            entry["line_b64"] = base64.b64encode(raw).decode("ascii")
        with self._lock:
            self.entries.append(entry)
            if self._fh is not None:
                self._fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
                self._fh.flush()

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def load(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def messages(entries, kinds=None):
    """Parsed message documents from transcript entries, optionally filtered by kind."""
    out = []
    for e in entries:
        if "line" not in e:
            continue
        try:
            doc = json.loads(e["line"])
        except ValueError:
            continue
        if isinstance(doc, dict) and (kinds is None or doc.get("kind") in kinds):
            out.append(doc)
    return out
