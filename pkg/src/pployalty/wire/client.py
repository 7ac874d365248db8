"""Customer-side transport: the :class:`VendorSession` interface over TCP."""

from __future__ import annotations

import itertools
import socket

from ..crypto_core import EncodingError
from ..loyalty.vendor import (
    ClaimResult,
    GroupResult,
    ProtocolReject,
    RedeemOutcome,
    SubmitOutcome,
    VendorBundle,
)
from . import messages as wm
from .messages import MAX_LINE, WireError, WireMessage


class TransportError(Exception):
    """The vendor could not be reached or answered with garbage."""


def parse_endpoint(text):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class RemoteVendor:
    _conn_ids = itertools.count(1)

    def __init__(self, address, timeout=30.0, transcript=None, backend=None):
        self.address = parse_endpoint(address) if isinstance(address, str) else tuple(address)
        self.timeout = timeout
        self.transcript = transcript
        self.backend = backend

    def session(self):
        return RemoteSession(self)

    def bundle(self):
        with self.session() as s:
            return s.bundle()


class RemoteSession:
    def __init__(self, remote):
        self.remote = remote
        self._sock = None
        self._rfile = None
        self._conn_id = next(RemoteVendor._conn_ids)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._sock is not None:
            try:
                self._rfile.close()
                self._sock.close()
            finally:
                self._sock = self._rfile = None

    def _connect(self):
        if self._sock is None:
            try:
                self._sock = socket.create_connection(self.remote.address, timeout=self.remote.timeout)
            except OSError as exc:
                raise TransportError(f"cannot reach vendor at {self.remote.address}: {exc}") from exc
            self._rfile = self._sock.makefile("rb")

    def _record(self, direction, raw):
        if self.remote.transcript is not None:
            self.remote.transcript.record(self._conn_id, direction, raw)

    def call(self, msg, expect):
        self._connect()
        raw = msg.encode()
        try:
            self._record("out", raw)
            self._sock.sendall(raw)
            line = self._rfile.readline(MAX_LINE + 1)
        except OSError as exc:
            self.close()
            raise TransportError(f"connection failed: {exc}") from exc
        if not line:
            self.close()
            raise TransportError("vendor closed the connection")
        self._record("in", line)
        try:
            reply = WireMessage.decode(line)
        except WireError as exc:
            self.close()
            raise TransportError(f"bad reply: {exc}") from exc
        if reply.kind == "error":
            self.close()
            raise ProtocolReject(str(reply.body.get("code", "error")), str(reply.body.get("message", "")))
        if reply.kind != expect:
            self.close()
            raise TransportError(f"expected {expect}, got {reply.kind}")
        return reply.body

    # -- VendorSession interface -------------------------------------------

    def bundle(self):
        body = self.call(WireMessage("get-bundle"), "bundle")
        return VendorBundle.from_dict(body["bundle"])

    def offer_receipts(self, product):
        body = self.call(WireMessage("issue-request", {"phase": "propose", "product": product}), "issue-response")
        return _str_list(body.get("offer"))

    def sign(self, us):
        body = self.call(WireMessage("issue-request", {"phase": "sign", "us": wm.enc_points(us)}), "issue-response")
        try:
            return wm.dec_points(body.get("vs"), backend=self.remote.backend)
        except EncodingError as exc:
            raise TransportError(f"bad signature element: {exc}") from exc

    def submit(self, claims):
        body = self.call(
            WireMessage("submit-request", {"claims": [wm.enc_chain(ch) for ch in claims]}),
            "submit-response",
        )
        try:
            results = [ClaimResult(bool(r["accepted"]), r.get("reason"), r.get("level"), bool(r.get("linked")))
                       for r in body["claims"]]
            return SubmitOutcome(results, int(body["amount"]), _str_list(body.get("offer", [])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"bad submit-response: {exc}") from exc

    def redeem(self, groups):
        body = self.call(
            WireMessage("redeem-request", {"groups": [wm.enc_group(c, ms, s) for c, ms, s in groups]}),
            "redeem-response",
        )
        try:
            results = [GroupResult(bool(r["accepted"]), r.get("reason"), int(r.get("credit", 0)))
                       for r in body["groups"]]
            return RedeemOutcome(results, int(body["credited"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"bad redeem-response: {exc}") from exc


def _str_list(x):
    if not isinstance(x, list) or not all(isinstance(s, str) for s in x):
        raise TransportError("expected a list of strings")
    return x
