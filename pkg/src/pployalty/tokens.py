"""Anonymous tokens with controlled linkability.

A token ``<c, m, sigma>`` carries public info ``c``, a secret message
``m = (alpha, y)`` and an unblinded signature. ``alpha`` makes each token
single-use; tokens spent with the same ``y`` are grouped by the vendor.
"""

from __future__ import annotations

import enum
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass
from typing import NamedTuple

from . import pbsig
from .crypto_core import (
    G2,
    EncodingError,
    GroupElement,
    Message,
    b64u_decode,
    b64u_encode,
    is_unit_scalar,
    random_scalar,
    scalar_from_bytes,
    scalar_to_bytes,
)

log = logging.getLogger(__name__)

__all__ = [
    "Message",
    "Token",
    "IssuanceError",
    "CustomerIssuance",
    "vendor_sign",
    "issue",
    "Reject",
    "SpendResult",
    "SpendRecord",
    "SpentLedger",
    "LedgerCorrupt",
    "verify_and_spend",
    "verify_and_spend_batch",
    "verify_and_spend_aggregate",
    "linkage_report",
]


@dataclass(frozen=True)
class Token:
    c: str
    m: Message
    sigma: pbsig.Signature

    @property
    def alpha(self):
        return self.m.alpha

    @property
    def y(self):
        return self.m.y

    def to_dict(self):
        return {
            "c": self.c,
            "alpha": b64u_encode(scalar_to_bytes(self.m.alpha)),
            "y": b64u_encode(scalar_to_bytes(self.m.y)),
            "sigma": b64u_encode(self.sigma.to_bytes()),
        }

    @classmethod
    def from_dict(cls, d, backend=None):
        try:
            m = Message(
                scalar_from_bytes(b64u_decode(d["alpha"])),
                scalar_from_bytes(b64u_decode(d["y"])),
            )
            sigma = pbsig.Signature.from_bytes(b64u_decode(d["sigma"]), backend)
            c = d["c"]
        except (KeyError, TypeError) as exc:
            raise EncodingError(f"malformed token: {exc}") from exc
        if not isinstance(c, str):
            raise EncodingError("malformed token: c must be text")
        return cls(c, m, sigma)


# -- issuance ----------------------------------------------------------------

class IssuanceError(Exception):
    pass


class CustomerIssuance:
    """Customer side of one issuance run.

    >>> run = CustomerIssuance(params, c, y)
    >>> v = vendor_sign(keys, c, run.u)      # over the wire in practice
    >>> token = run.finish(v, keys.pk)
    """

    def __init__(self, params, c, y, rng=None):
        if not is_unit_scalar(y):
            raise ValueError("y must lie in [1, q-1]")
        self.params = params
        self.c = c
        self.m = Message(random_scalar(rng), y)
        self.u, self._state = pbsig.blind(params, c, self.m, random_scalar(rng))

    def finish(self, v, pk):
        if not isinstance(v, GroupElement) or v.group != G2 or v.is_identity():
            raise IssuanceError("vendor returned an invalid signature element")
        sigma = pbsig.unblind(v, self._state)
        self._state = None
        if not pbsig.verify(self.params, pk, self.c, self.m, sigma):
            raise IssuanceError("issued token does not verify")
        return Token(self.c, self.m, sigma)


def vendor_sign(keys, c, u):
    """Vendor side of issuance. Sees only ``c`` and the blinded ``u``."""
    if not isinstance(u, GroupElement) or u.group != G2 or u.is_identity():
        raise IssuanceError("blinded message must be a non-identity G2 element")
    return pbsig.sign_blinded(keys, c, u)


def issue(params, keys, c, y, rng=None, transcript=None):
    """Run both sides locally. ``transcript`` collects the vendor's view."""
    run = CustomerIssuance(params, c, y, rng)
    v = vendor_sign(keys, c, run.u)
    if transcript is not None:
        transcript.append({"c": c, "u": run.u.to_bytes(), "v": v.to_bytes()})
    return run.finish(v, keys.pk)


# -- spending ----------------------------------------------------------------

class Reject(str, enum.Enum):
    BAD_SIGNATURE = "bad-signature"
    DOUBLE_SPEND = "double-spend"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class SpendResult:
    accepted: bool
    reason: Reject | None = None
    linked: bool = False
    y: int | None = None
    index: int | None = None

    def __bool__(self):
        return self.accepted


class SpendRecord(NamedTuple):
    c: str
    alpha: int
    y: int
    timestamp: int  # unix milliseconds


class LedgerCorrupt(Exception):
    pass


LEDGER_MAGIC = b"PPLEDGER"
LEDGER_VERSION = 1
_HEADER = LEDGER_MAGIC + struct.pack(">H", LEDGER_VERSION)


def _encode_record(rec):
    cb = rec.c.encode("utf-8")
    return (
        scalar_to_bytes(rec.alpha)
        + scalar_to_bytes(rec.y)
        + struct.pack(">I", len(cb))
        + cb
        + struct.pack(">Q", rec.timestamp)
    )


def _decode_records(buf, offset):
    """Yield (record, end_offset) until the buffer runs out or a record is torn."""
    n = len(buf)
    while offset + 68 <= n:
        alpha = int.from_bytes(buf[offset:offset + 32], "big")
        y = int.from_bytes(buf[offset + 32:offset + 64], "big")
        (clen,) = struct.unpack_from(">I", buf, offset + 64)
        end = offset + 68 + clen + 8
        if end > n:
            return
        c = buf[offset + 68:offset + 68 + clen].decode("utf-8")
        (ts,) = struct.unpack_from(">Q", buf, end - 8)
        yield SpendRecord(c, alpha, y, ts), end
        offset = end


def now_ms():
    return int(time.time() * 1000)


class SpentLedger:
    """Vendor-side set of spent ``alpha`` values plus ``y`` linkage groups.

    With a ``path`` every commit is appended to a binary log and replayed on
    open; without one the ledger lives in memory. ``commit`` is the only
    mutator and is linearizable.
    """

    def __init__(self, path=None, *, fsync=True):
        self.path = path
        self._fsync = fsync
        self._lock = threading.Lock()
        self._spent = {}
        self._groups = {}
        self._fh = None
        if path is not None:
            self._open(path)

    def _open(self, path):
        if os.path.exists(path) and os.path.getsize(path) > 0:
            with open(path, "rb") as fh:
                buf = fh.read()
            if buf[:len(_HEADER)] != _HEADER:
                raise LedgerCorrupt(f"{path}: bad ledger header")
            good = len(_HEADER)
            for rec, end in _decode_records(buf, good):
                if rec.alpha in self._spent:
                    raise LedgerCorrupt(f"{path}: alpha recorded twice")
                self._apply(rec)
                good = end
            if good != len(buf):
                log.warning("%s: discarding %d bytes of torn tail", path, len(buf) - good)
                with open(path, "r+b") as fh:
                    fh.truncate(good)
            self._fh = open(path, "ab")
        else:
            self._fh = open(path, "wb")
            self._fh.write(_HEADER)
            self._sync()

    def _sync(self):
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())

    def _apply(self, rec):
        self._spent[rec.alpha] = rec
        self._groups.setdefault(rec.y, []).append(rec)

    def close(self):
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __len__(self):
        return len(self._spent)

    def is_spent(self, alpha):
        return alpha in self._spent

    def commit(self, records):
        """Spend every record or none.

        Returns ``(None, linked_flags)`` on success, or ``(index, None)``
        naming the first record whose alpha is already spent (or repeated
        inside the batch).
        """
        records = list(records)
        with self._lock:
            seen = set()
            for i, rec in enumerate(records):
                if rec.alpha in self._spent or rec.alpha in seen:
                    return i, None
                seen.add(rec.alpha)
            if self._fh is not None:
                self._fh.write(b"".join(_encode_record(r) for r in records))
                self._sync()
            linked = []
            for rec in records:
                linked.append(rec.y in self._groups)
                self._apply(rec)
            return None, linked

    def linkage_report(self, y):
        with self._lock:
            return list(self._groups.get(y, ()))

    def linkage_groups(self):
        with self._lock:
            return {y: list(recs) for y, recs in self._groups.items()}

    def spent_alphas(self):
        with self._lock:
            return frozenset(self._spent)


def linkage_report(ledger, y):
    return [(r.c, r.alpha, r.timestamp) for r in ledger.linkage_report(y)]


def _well_formed(token):
    return (
        isinstance(token, Token)
        and isinstance(token.c, str)
        and isinstance(token.m, Message)
        and token.m.is_valid()
        and isinstance(token.sigma, pbsig.Signature)
    )


def verify_and_spend(ledger, params, pk, token, now=None):
    """Signature check, then spent check, then y-linkage."""
    return verify_and_spend_batch(ledger, params, pk, [token], now)


def verify_and_spend_batch(ledger, params, pk, tokens, now=None):
    """Verify each token, then spend all of them atomically.

    ``linked`` on acceptance reports whether the *first* token joined an
    existing linkage group.
    """
    tokens = list(tokens)
    if not tokens or not all(_well_formed(t) for t in tokens):
        return SpendResult(False, Reject.MALFORMED)
    if len({t.alpha for t in tokens}) != len(tokens):
        return SpendResult(False, Reject.MALFORMED)
    for i, t in enumerate(tokens):
        if not pbsig.verify(params, pk, t.c, t.m, t.sigma):
            return SpendResult(False, Reject.BAD_SIGNATURE, index=i)
    ts = now_ms() if now is None else now
    bad, linked = ledger.commit(SpendRecord(t.c, t.alpha, t.y, ts) for t in tokens)
    if bad is not None:
        return SpendResult(False, Reject.DOUBLE_SPEND, index=bad, y=tokens[bad].y)
    return SpendResult(True, linked=linked[0], y=tokens[0].y)


def verify_and_spend_aggregate(ledger, params, pk, c, messages, sig_agg, now=None):
    messages = list(messages)
    if not messages or not all(isinstance(m, Message) and m.is_valid() for m in messages):
        return SpendResult(False, Reject.MALFORMED)
    if len({m.alpha for m in messages}) != len(messages):
        return SpendResult(False, Reject.MALFORMED)
    if not pbsig.verify_aggregate(params, pk, c, messages, sig_agg):
        return SpendResult(False, Reject.BAD_SIGNATURE)
    ts = now_ms() if now is None else now
    bad, linked = ledger.commit(SpendRecord(c, m.alpha, m.y, ts) for m in messages)
    if bad is not None:
        return SpendResult(False, Reject.DOUBLE_SPEND, index=bad)
    return SpendResult(True, linked=linked[0], y=messages[0].y)
