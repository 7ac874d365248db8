"""Line-delimited JSON wire format.

Every message is one JSON object on one line::

    {"v": 1, "kind": "issue-request", "body": {...}}

Group elements and scalars travel as base64url of their fixed-width
encodings (48/96 bytes for G1/G2 points, 32 bytes per scalar).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..crypto_core import G2, EncodingError, GroupElement, Message, b64u_decode, b64u_encode
from ..pbsig import Signature
from ..tokens import Token

VERSION = 1
MAX_LINE = 1 << 20  # bytes, including the newline

KINDS = frozenset({
    "get-bundle",
    "bundle",
    "issue-request",
    "issue-response",
    "submit-request",
    "submit-response",
    "redeem-request",
    "redeem-response",
    "error",
})


class WireError(ValueError):
    """Bytes that are not a valid message of this protocol version."""


@dataclass(frozen=True)
class WireMessage:
    kind: str
    body: dict = field(default_factory=dict)
    version: int = VERSION

    def encode(self):
        doc = {"v": self.version, "kind": self.kind, "body": self.body}
        return (json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode()

    @classmethod
    def decode(cls, line):
        if len(line) > MAX_LINE:
            raise WireError("message too long")
        try:
            doc = json.loads(line)
        except (UnicodeDecodeError, ValueError) as exc:
            raise WireError("not a JSON document") from exc
        if not isinstance(doc, dict) or set(doc) != {"v", "kind", "body"}:
            raise WireError("message must have exactly v, kind and body")
        if type(doc["v"]) is not int or doc["v"] != VERSION:
            raise WireError(f"unsupported version {doc['v']!r}")
        if doc["kind"] not in KINDS:
            raise WireError(f"unknown kind {doc['kind']!r}")
        if not isinstance(doc["body"], dict):
            raise WireError("body must be an object")
        return cls(doc["kind"], doc["body"], doc["v"])


def error(code, message=""):
    return WireMessage("error", {"code": code, "message": message})


# -- body codecs ---------------------------------------------------------------

def enc_points(points):
    return [b64u_encode(p.to_bytes()) for p in points]


def dec_points(items, group=G2, backend=None):
    if not isinstance(items, list):
        raise EncodingError("expected a list of group elements")
    return [GroupElement.from_bytes(group, b64u_decode(x), backend) for x in items]


def enc_message(m):
    return b64u_encode(m.to_bytes())


def dec_message(text):
    return Message.from_bytes(b64u_decode(text))


def enc_chain(chain):
    return [t.to_dict() for t in chain]


def dec_chain(items, backend=None):
    if not isinstance(items, list):
        raise EncodingError("expected a list of tokens")
    out = []
    for d in items:
        if not isinstance(d, dict):
            raise EncodingError("token must be an object")
        out.append(Token.from_dict(d, backend))
    return out


def enc_group(c, messages, sigma):
    return {"c": c, "messages": [enc_message(m) for m in messages], "sigma": b64u_encode(sigma.to_bytes())}


def dec_group(d, backend=None):
    if not isinstance(d, dict) or not isinstance(d.get("c"), str) or not isinstance(d.get("messages"), list):
        raise EncodingError("malformed redeem group")
    messages = [dec_message(x) for x in d["messages"]]
    return d["c"], messages, Signature.from_bytes(b64u_decode(d.get("sigma")), backend)
