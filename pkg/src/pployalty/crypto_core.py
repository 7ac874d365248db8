"""Group, hash and encoding primitives shared by vendors and customers.

The curve is BLS12-381 (Type-3 pairing). Public keys and the left pairing
operand live in G1; blinded messages, signatures and hash-to-group outputs
live in G2. Group operations use multiplicative notation::

    pk = params.g ** sk
    u = hash_to_group(preimage) ** r
    a * b          # group operation

Scalars are plain ``int`` values modulo ``q``.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import secrets
import struct
from dataclasses import dataclass, field
from functools import cached_property

from . import _backend

CURVE = "BLS12-381"
SECURITY_LEVEL = 128
Q = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
SCALAR_BYTES = 32

# Domain-separation prefixes: every preimage fed to H starts with
# SCALAR_DOMAIN, every preimage fed to H0 with GROUP_DOMAIN.
SCALAR_DOMAIN = b"\x01"
GROUP_DOMAIN = b"\x02"
SCALAR_HASH_ID = "SHA-512/mod(q-1)+1"
GROUP_HASH_DST = b"PPLOYALTY-V01-CS01-with-BLS12381G2_XMD:SHA-256_SSWU_RO_"
GROUP_HASH_ID = GROUP_HASH_DST.decode()

PARAMS_VERSION = 1
_PARAMS_MAGIC = "pployalty-params"

G1, G2, GT = "G1", "G2", "GT"


class UnsupportedSecurityLevel(ValueError):
    pass


class EncodingError(ValueError):
    """A byte string is not a valid encoding of the expected object."""


class GroupMismatch(TypeError):
    pass


class GroupElement:
    """An element of G1, G2 or GT tagged with its group."""

    __slots__ = ("group", "_p", "_backend")

    def __init__(self, group, point, backend=None):
        self.group = group
        self._p = point
        self._backend = backend or _backend.impl

    @classmethod
    def from_bytes(cls, group, data, backend=None):
        """Decode a compressed G1/G2 point, enforcing subgroup membership."""
        be = backend or _backend.impl
        if group == G1:
            kind = be.G1
        elif group == G2:
            kind = be.G2
        else:
            raise EncodingError(f"no wire encoding for {group}")
        try:
            return cls(group, kind.from_bytes(bytes(data)), be)
        except (ValueError, TypeError) as exc:
            raise EncodingError(str(exc)) from exc

    @classmethod
    def identity(cls, group, backend=None):
        be = backend or _backend.impl
        kind = {G1: be.G1, G2: be.G2, GT: be.GT}[group]
        return cls(group, kind.identity(), be)

    def to_bytes(self):
        if self.group == GT:
            raise EncodingError("GT elements have no wire encoding")
        return bytes(self._p.to_bytes())

    @property
    def raw(self):
        return self._p

    def is_identity(self):
        return self._p.is_identity()

    def _check(self, other):
        if not isinstance(other, GroupElement) or other.group != self.group:
            raise GroupMismatch(f"expected a {self.group} element")

    def __mul__(self, other):
        self._check(other)
        if self.group == GT:
            return GroupElement(GT, self._p.mul(other._p), self._backend)
        return GroupElement(self.group, self._p.add(other._p), self._backend)

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        e = scalar_to_bytes(k % Q)
        if self.group == GT:
            return GroupElement(GT, self._p.pow(e), self._backend)
        return GroupElement(self.group, self._p.mul(e), self._backend)

    def inverse(self):
        if self.group == GT:
            return GroupElement(GT, self._p.inverse(), self._backend)
        return GroupElement(self.group, self._p.neg(), self._backend)

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.group == other.group and self._p == other._p

    def __hash__(self):
        return hash((self.group, self._p))

    def __repr__(self):
        if self.group == GT:
            return "GroupElement(GT)"
        return f"GroupElement({self.group}, {self.to_bytes()[:6].hex()}..)"


def product(elements):
    """Group product of a non-empty sequence of same-group elements."""
    elements = list(elements)
    if not elements:
        raise ValueError("empty product")
    group = elements[0].group
    for e in elements:
        if e.group != group:
            raise GroupMismatch("mixed groups in product")
    be = elements[0]._backend
    if group == GT:
        acc = elements[0]
        for e in elements[1:]:
            acc = acc * e
        return acc
    kind = be.G1 if group == G1 else be.G2
    return GroupElement(group, kind.sum([e._p for e in elements]), be)


@dataclass(frozen=True)
class SystemParams:
    lam: int
    q: int
    g: GroupElement = field(repr=False)
    h: GroupElement = field(repr=False)
    curve: str = CURVE
    scalar_hash: str = SCALAR_HASH_ID
    group_hash: str = GROUP_HASH_ID

    @property
    def backend(self):
        return self.g._backend

    @cached_property
    def _g_table(self):
        be = self.g._backend
        # wide windows only pay off when table construction is native
        window = 8 if be.__name__.endswith("_native") else 4
        return be.FixedBaseG1(self.g.raw, window)

    def g_pow(self, k):
        """g ** k through the precomputed fixed-base table."""
        e = scalar_to_bytes(k % self.q)
        return GroupElement(G1, self._g_table.mul(e), self.g._backend)

    def serialize(self):
        lines = [
            f"{_PARAMS_MAGIC}/{PARAMS_VERSION}",
            f"curve={self.curve}",
            f"lambda={self.lam}",
            f"q={self.q:x}",
            f"g={self.g.to_bytes().hex()}",
            f"h={self.h.to_bytes().hex()}",
            f"H={self.scalar_hash}",
            f"H0={self.group_hash}",
        ]
        return ("\n".join(lines) + "\n").encode()

    @classmethod
    def deserialize(cls, data):
        text = data.decode() if isinstance(data, (bytes, bytearray)) else data
        lines = text.strip("\n").split("\n")
        if not lines or lines[0] != f"{_PARAMS_MAGIC}/{PARAMS_VERSION}":
            raise EncodingError("unknown params header")
        kv = dict(line.split("=", 1) for line in lines[1:])
        if kv.get("curve") != CURVE:
            raise EncodingError(f"unsupported curve {kv.get('curve')!r}")
        params = setup(int(kv["lambda"]))
        if (
            int(kv["q"], 16) != params.q
            or bytes.fromhex(kv["g"]) != params.g.to_bytes()
            or bytes.fromhex(kv["h"]) != params.h.to_bytes()
            or kv.get("H") != params.scalar_hash
            or kv.get("H0") != params.group_hash
        ):
            raise EncodingError("params do not match the named curve")
        return params


_PARAMS_CACHE = {}


def setup(lam=SECURITY_LEVEL, backend=None):
    """Public parameters for security level ``lam`` (only 128 is supported)."""
    if lam != SECURITY_LEVEL:
        raise UnsupportedSecurityLevel(f"unsupported security level {lam}")
    be = backend or _backend.impl
    key = (lam, be.__name__)
    if key not in _PARAMS_CACHE:
        _PARAMS_CACHE[key] = SystemParams(
            lam=lam,
            q=Q,
            g=GroupElement(G1, be.G1.generator(), be),
            h=GroupElement(G2, be.G2.generator(), be),
        )
    return _PARAMS_CACHE[key]


# -- scalars ---------------------------------------------------------------

def scalar_to_bytes(x):
    return int(x).to_bytes(SCALAR_BYTES, "big")


def scalar_from_bytes(data):
    if len(data) != SCALAR_BYTES:
        raise EncodingError("scalar must be 32 bytes")
    x = int.from_bytes(data, "big")
    if x >= Q:
        raise EncodingError("scalar out of range")
    return x


def is_unit_scalar(x):
    """True for members of Z_q^*, i.e. integers in [1, q-1]."""
    return isinstance(x, int) and not isinstance(x, bool) and 0 < x < Q


def scalar_inv(x):
    if x % Q == 0:
        raise ZeroDivisionError("zero has no inverse mod q")
    return pow(x, -1, Q)


def random_scalar(rng=None):
    """Uniform element of [1, q-1]; ``rng`` is an optional ``random.Random``."""
    if rng is None:
        return secrets.randbelow(Q - 1) + 1
    return rng.randrange(1, Q)


# -- hashing ---------------------------------------------------------------

def scalar_hash_input(data):
    """Exact byte string hashed by :func:`hash_to_scalar`."""
    return SCALAR_DOMAIN + bytes(data)


def group_hash_input(data):
    """Exact message passed to hash-to-curve by :func:`hash_to_group`."""
    return GROUP_DOMAIN + bytes(data)


def hash_to_scalar(data):
    # 512-bit digest keeps the modular-reduction bias below 2^-256
    digest = hashlib.sha512(scalar_hash_input(data)).digest()
    return int.from_bytes(digest, "big") % (Q - 1) + 1


def hash_to_group(data, backend=None):
    be = backend or _backend.impl
    msg = group_hash_input(data)
    p = be.G2.hash(msg, GROUP_HASH_DST)
    counter = 0
    while p.is_identity():  # probability ~2^-255
        counter += 1
        p = be.G2.hash(msg + struct.pack(">I", counter), GROUP_HASH_DST)
    return GroupElement(G2, p, be)


def pair(a, b):
    if not isinstance(a, GroupElement) or a.group != G1:
        raise GroupMismatch("left pairing operand must be in G1")
    if not isinstance(b, GroupElement) or b.group != G2:
        raise GroupMismatch("right pairing operand must be in G2")
    return GroupElement(GT, a._backend.pairing(a.raw, b.raw), a._backend)


def pairing_product_is_one(pairs):
    """True iff prod e(a_i, b_i) == 1, with a single final exponentiation."""
    pairs = list(pairs)
    be = pairs[0][0]._backend
    return be.pairing_check([a.raw for a, _ in pairs], [b.raw for _, b in pairs])


# -- messages and preimages ------------------------------------------------

@dataclass(frozen=True)
class Message:
    """Secret part of a token: unique identifier ``alpha``, link identifier ``y``."""

    alpha: int
    y: int

    def is_valid(self):
        return is_unit_scalar(self.alpha) and is_unit_scalar(self.y)

    def to_bytes(self):
        return scalar_to_bytes(self.alpha) + scalar_to_bytes(self.y)

    @classmethod
    def from_bytes(cls, data):
        if len(data) != 2 * SCALAR_BYTES:
            raise EncodingError("message must be 64 bytes")
        return cls(scalar_from_bytes(data[:32]), scalar_from_bytes(data[32:]))


def encode_preimage(c, m):
    """Injective encoding of ``c || m``: u32 length of c, c, alpha, y."""
    if isinstance(c, str):
        cb = c.encode("utf-8")
    else:
        cb = bytes(c)
        cb.decode("utf-8")
    if len(cb) > 0xFFFFFFFF:
        raise ValueError("public info too long")
    return struct.pack(">I", len(cb)) + cb + scalar_to_bytes(m.alpha) + scalar_to_bytes(m.y)


def b64u_encode(data):
    return base64.urlsafe_b64encode(bytes(data)).rstrip(b"=").decode("ascii")


def b64u_decode(text):
    if not isinstance(text, str):
        raise EncodingError("expected base64url text")
    try:
        return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except (ValueError, binascii.Error) as exc:
        raise EncodingError("bad base64url") from exc
