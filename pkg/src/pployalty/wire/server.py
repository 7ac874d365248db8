"""Vendor daemon: one :class:`VendorSession` per TCP connection."""

from __future__ import annotations

import itertools
import logging
import socketserver
import threading

from ..crypto_core import EncodingError
from ..loyalty.vendor import ProtocolReject, decode_blinded
from . import messages as wm
from .messages import MAX_LINE, WireError, WireMessage

log = logging.getLogger(__name__)

IDLE_TIMEOUT = 60.0


class _CloseConnection(Exception):
    pass


class _Handler(socketserver.StreamRequestHandler):
    timeout = IDLE_TIMEOUT

    def setup(self):
        super().setup()
        self.conn_id = next(self.server.conn_ids)
        self.session = self.server.vendor.session()

    def handle(self):
        try:
            while True:
                line = self.rfile.readline(MAX_LINE + 1)
                if not line:
                    return
                self._record("in", line)
                if len(line) > MAX_LINE or not line.endswith(b"\n"):
                    self._send(wm.error("malformed", "line too long or unterminated"))
                    return
                try:
                    reply = self.dispatch(WireMessage.decode(line))
                except _CloseConnection:
                    return
                except ProtocolReject as exc:
                    self._send(wm.error(exc.code, exc.message))
                    return
                except (WireError, EncodingError, KeyError, TypeError, ValueError) as exc:
                    self._send(wm.error("malformed", str(exc)))
                    return
                except Exception:  # never let one client take the daemon down
                    log.exception("connection %d: internal error", self.conn_id)
                    self._send(wm.error("internal"))
                    return
                self._send(reply)
        except OSError:
            pass  # peer went away; nothing was committed for an unfinished step
        finally:
            self.session.close()

    def _record(self, direction, raw):
        if self.server.transcript is not None:
            self.server.transcript.record(self.conn_id, direction, raw)

    def _send(self, msg):
        raw = msg.encode()
        self._record("out", raw)
        self.wfile.write(raw)
        self.wfile.flush()

    # -- dispatch ----------------------------------------------------------

    def dispatch(self, msg):
        body = msg.body
        be = self.server.vendor.params.backend
        if msg.kind == "get-bundle":
            return WireMessage("bundle", {"bundle": self.session.bundle().to_dict()})
        if msg.kind == "issue-request":
            phase = body["phase"]
            if phase == "propose":
                product = body["product"]
                if not isinstance(product, str):
                    raise TypeError("product must be text")
                offer = self.session.offer_receipts(product)
                return WireMessage("issue-response", {"phase": "offer", "offer": offer})
            if phase == "sign":
                us = body["us"]
                if not isinstance(us, list):
                    raise TypeError("us must be a list")
                vs = self.session.sign(decode_blinded(us, be))
                return WireMessage("issue-response", {"phase": "signed", "vs": wm.enc_points(vs)})
            raise ProtocolReject("bad-request", f"unknown issue phase {phase!r}")
        if msg.kind == "submit-request":
            claims = body["claims"]
            if not isinstance(claims, list):
                raise TypeError("claims must be a list")
            outcome = self.session.submit([wm.dec_chain(ch, be) for ch in claims])
            return WireMessage("submit-response", {
                "claims": [
                    {"accepted": r.accepted, "reason": r.reason, "level": r.level, "linked": r.linked}
                    for r in outcome.claims
                ],
                "amount": outcome.amount,
                "offer": outcome.offer,
            })
        if msg.kind == "redeem-request":
            groups = body["groups"]
            if not isinstance(groups, list):
                raise TypeError("groups must be a list")
            outcome = self.session.redeem([wm.dec_group(g, be) for g in groups])
            return WireMessage("redeem-response", {
                "groups": [{"accepted": r.accepted, "reason": r.reason, "credit": r.credit}
                           for r in outcome.groups],
                "credited": outcome.credited,
            })
        raise ProtocolReject("unexpected-kind", f"{msg.kind} is not a request")


class VendorServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, vendor, address=("127.0.0.1", 0), transcript=None):
        self.vendor = vendor
        self.transcript = transcript
        self.conn_ids = itertools.count(1)
        super().__init__(address, _Handler)
        self._thread = None

    @property
    def address(self):
        return self.server_address[:2]

    def start(self):
        """Serve from a background thread; returns self."""
        self._thread = threading.Thread(target=self.serve_forever, name="pployalty-vendor", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def vendor_serve(vendor, host="127.0.0.1", port=0, transcript=None):
    return VendorServer(vendor, (host, port), transcript)
