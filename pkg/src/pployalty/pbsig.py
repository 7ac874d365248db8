"""Partially blind BLS-style signatures over a pairing.

Issuance (customer C, vendor V, agreed public info c, secret m = (alpha, y))::

    C: u = H0(c || m) ** r                      blind
    V: v = u ** (1 / (H(c) + x))                sign_blinded
    C: sigma = v ** (1 / r)                     unblind

and anyone holding pk = g ** x checks ``e(g**H(c) * pk, sigma) == e(g, H0(c||m))``.
The blinding factor cancels, so sigma depends only on (c, m, x).
"""

from __future__ import annotations

from dataclasses import dataclass

from .crypto_core import (
    G1,
    G2,
    Q,
    EncodingError,
    GroupElement,
    Message,
    encode_preimage,
    hash_to_group,
    hash_to_scalar,
    is_unit_scalar,
    pairing_product_is_one,
    product,
    random_scalar,
    scalar_inv,
)


class SigningError(Exception):
    """H(c) + sk vanishes mod q; the signature is undefined."""


@dataclass(frozen=True)
class VendorKeyPair:
    sk: int
    pk: GroupElement

    def __repr__(self):
        return f"VendorKeyPair(pk={self.pk!r})"


@dataclass
class BlindingState:
    """Customer-side secrets for one issuance run; discarded by :func:`unblind`."""

    r: int
    c: str
    m: Message


@dataclass(frozen=True)
class Signature:
    sigma: GroupElement

    def to_bytes(self):
        return self.sigma.to_bytes()

    @classmethod
    def from_bytes(cls, data, backend=None):
        return cls(GroupElement.from_bytes(G2, data, backend))


def keygen(params, rng=None, sk=None):
    """Fresh vendor key pair. ``sk`` forces the secret key (tests only)."""
    if sk is None:
        sk = random_scalar(rng)
    if not is_unit_scalar(sk) or sk >= params.q:
        raise ValueError("secret key must lie in [1, q-1]")
    return VendorKeyPair(sk=sk, pk=params.g_pow(sk))


def message_point(params, c, m):
    return hash_to_group(encode_preimage(c, m), backend=params.backend)


def blind(params, c, m, r):
    if not is_unit_scalar(r) or r >= params.q:
        raise ValueError("blinding factor must lie in [1, q-1]")
    u = message_point(params, c, m) ** r
    return u, BlindingState(r=r, c=c, m=m)


def sign_blinded(keys, c, u):
    """v = u ** ((H(c) + sk)^-1 mod q).

    Purely algebraic: an identity ``u`` yields an identity ``v``; refusing
    such requests is the issuing service's job.
    """
    if not isinstance(u, GroupElement) or u.group != G2:
        raise EncodingError("blinded message must be a G2 element")
    e = (hash_to_scalar(_c_bytes(c)) + keys.sk) % Q
    if e == 0:
        raise SigningError("H(c) + sk = 0 mod q")
    return u ** scalar_inv(e)


def unblind(v, state):
    r = state.r
    state.r = 0  # the state is single-use
    return Signature(v ** scalar_inv(r))


def _lhs(params, pk, c):
    return params.g_pow(hash_to_scalar(_c_bytes(c))) * pk


def verify(params, pk, c, m, sig):
    """Pairing check for one token. Total: malformed input gives False."""
    try:
        sigma = sig.sigma if isinstance(sig, Signature) else sig
        if not _good(pk, G1) or not _good(sigma, G2) or not m.is_valid():
            return False
        h = message_point(params, c, m)
        # e(g^H(c) pk, sigma) == e(g, H0)  <=>  e(g^H(c) pk, sigma) e(g^-1, H0) == 1
        return pairing_product_is_one([(_lhs(params, pk, c), sigma), (params.g.inverse(), h)])
    except (EncodingError, TypeError, ValueError, AttributeError, UnicodeError):
        return False


def aggregate(signatures):
    sigs = list(signatures)
    if not sigs:
        raise ValueError("cannot aggregate an empty list")
    return Signature(product(s.sigma for s in sigs))


def verify_aggregate(params, pk, c, messages, sig_agg):
    """Check e(g^H(c) pk, sigma_agg) == e(g, prod H0(c || m_i)).

    Messages must be non-empty with pairwise distinct alpha, otherwise False.
    """
    try:
        messages = list(messages)
        sigma = sig_agg.sigma if isinstance(sig_agg, Signature) else sig_agg
        if not messages or not _good(pk, G1) or not _good(sigma, G2):
            return False
        if not all(m.is_valid() for m in messages):
            return False
        if len({m.alpha for m in messages}) != len(messages):
            return False
        h = product(message_point(params, c, m) for m in messages)
        return pairing_product_is_one([(_lhs(params, pk, c), sigma), (params.g.inverse(), h)])
    except (EncodingError, TypeError, ValueError, AttributeError, UnicodeError):
        return False


def _good(x, group):
    return isinstance(x, GroupElement) and x.group == group and not x.is_identity()


def _c_bytes(c):
    return c.encode("utf-8") if isinstance(c, str) else bytes(c)
