"""Customer wallet and the customer side of Use, Submit/Issue and Redeem.

The customer functions take a vendor *session* (``VendorSession`` in
process, ``RemoteSession`` over the wire) and never reveal anything but
blinded messages during issuance.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import secrets
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field

from .. import pbsig
from ..crypto_core import b64u_decode, b64u_encode, random_scalar, scalar_from_bytes, scalar_to_bytes
from ..tokens import CustomerIssuance, IssuanceError, Token
from .info import InfoError, PointsInfo, ReceiptInfo, parse_info
from .vendor import VendorBundle

log = logging.getLogger(__name__)

WALLET_VERSION = 1


class WalletError(Exception):
    """Local validation failure; nothing was sent to the vendor."""


class OfferRejected(Exception):
    """The vendor proposed public info the customer will not accept."""


@dataclass
class PurchaseGroup:
    id: str
    product: str
    epoch: str
    y: int
    tokens: list  # leaf first, root last
    persona: str | None = None
    consumed: bool = False

    @property
    def labels(self):
        return [parse_info(t.c).label for t in self.tokens]

    def chain(self, level):
        return self.tokens[level:]

    def to_dict(self):
        return {
            "id": self.id,
            "product": self.product,
            "epoch": self.epoch,
            "y": b64u_encode(scalar_to_bytes(self.y)),
            "persona": self.persona,
            "consumed": self.consumed,
            "tokens": [t.to_dict() for t in self.tokens],
        }

    @classmethod
    def from_dict(cls, d, backend=None):
        return cls(
            id=d["id"],
            product=d["product"],
            epoch=d["epoch"],
            y=scalar_from_bytes(b64u_decode(d["y"])),
            persona=d.get("persona"),
            consumed=bool(d.get("consumed", False)),
            tokens=[Token.from_dict(t, backend) for t in d["tokens"]],
        )


@dataclass
class PointToken:
    token: Token
    denomination: int
    expiry: dt.date

    def to_dict(self):
        return {"token": self.token.to_dict(), "denomination": self.denomination,
                "expiry": self.expiry.isoformat()}

    @classmethod
    def from_dict(cls, d, backend=None):
        return cls(Token.from_dict(d["token"], backend), int(d["denomination"]),
                   dt.date.fromisoformat(d["expiry"]))


@dataclass
class CustomerWallet:
    bundle: VendorBundle
    purchases: list = field(default_factory=list)
    points: list = field(default_factory=list)
    personas: dict = field(default_factory=dict)  # name -> y
    credited: int = 0  # points the vendor has credited at redemption

    @property
    def params(self):
        return self.bundle.params

    @property
    def balance(self):
        return sum(p.denomination for p in self.points)

    def purchase(self, gid):
        for g in self.purchases:
            if g.id == gid:
                return g
        raise WalletError(f"no purchase {gid!r}")

    def open_purchases(self):
        return [g for g in self.purchases if not g.consumed]

    def persona_y(self, name, rng=None):
        if name not in self.personas:
            self.personas[name] = random_scalar(rng)
        return self.personas[name]

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        return {
            "version": WALLET_VERSION,
            "bundle": self.bundle.to_dict(),
            "personas": {k: b64u_encode(scalar_to_bytes(v)) for k, v in self.personas.items()},
            "purchases": [g.to_dict() for g in self.purchases],
            "points": [p.to_dict() for p in self.points],
            "credited": self.credited,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != WALLET_VERSION:
            raise WalletError(f"unsupported wallet version {d.get('version')!r}")
        bundle = VendorBundle.from_dict(d["bundle"])
        be = bundle.params.backend
        return cls(
            bundle=bundle,
            personas={k: scalar_from_bytes(b64u_decode(v)) for k, v in d["personas"].items()},
            purchases=[PurchaseGroup.from_dict(g, be) for g in d["purchases"]],
            points=[PointToken.from_dict(p, be) for p in d["points"]],
            credited=int(d.get("credited", 0)),
        )

    def save(self, path):
        """Atomic write: temp file in the same directory, then rename."""
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(prefix=".wallet-", dir=directory)
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(self.to_dict(), fh, indent=1)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def enroll(bundle):
    """Fresh wallet for a vendor; the bundle's taxonomy is validated locally."""
    if isinstance(bundle, dict):
        bundle = VendorBundle.from_dict(bundle)
    bundle.taxonomy  # parse check
    return CustomerWallet(bundle=bundle)


def _session(peer):
    # a Vendor (local or remote) hands out sessions; a session is used as is
    return peer.session() if hasattr(peer, "session") else peer


def _issue(wallet, session, cs, ys, rng):
    runs = [CustomerIssuance(wallet.params, c, y, rng) for c, y in zip(cs, ys)]
    vs = session.sign([r.u for r in runs])
    if len(vs) != len(runs):
        raise IssuanceError("vendor returned the wrong number of signatures")
    return [r.finish(v, wallet.bundle.pk) for r, v in zip(runs, vs)]


def use(wallet, session, product, persona=None, rng=None):
    """Buy ``product`` and collect one receipt per node on its generalization path.

    With ``persona`` the stored ``y`` of that persona is reused (created on
    first use); otherwise a fresh ``y`` makes the purchase unlinkable.
    """
    session = _session(session)
    taxonomy = wallet.bundle.taxonomy
    if product not in taxonomy or not taxonomy.is_leaf(product):
        raise WalletError(f"{product!r} is not a product in the vendor taxonomy")
    offer = session.offer_receipts(product)
    expected = taxonomy.path_to_root(product)
    try:
        infos = [parse_info(c) for c in offer]
    except InfoError as exc:
        raise OfferRejected(str(exc)) from exc
    if (
        len(infos) != len(expected)
        or not all(isinstance(i, ReceiptInfo) for i in infos)
        or [i.label for i in infos] != expected
        or len({i.epoch for i in infos}) != 1
    ):
        raise OfferRejected("vendor offered receipts that do not match the taxonomy path")
    y = wallet.persona_y(persona, rng) if persona else random_scalar(rng)
    # any failure below discards the partial group; its alphas are never spent
    toks = _issue(wallet, session, offer, [y] * len(offer), rng)
    group = PurchaseGroup(
        id=_new_id(wallet, rng),
        product=product,
        epoch=infos[0].epoch,
        y=y,
        persona=persona,
        tokens=toks,
    )
    wallet.purchases.append(group)
    return group


def _new_id(wallet, rng):
    taken = {g.id for g in wallet.purchases}
    while True:
        gid = f"{rng.getrandbits(32):08x}" if rng is not None else secrets.token_hex(4)
        if gid not in taken:
            return gid


@dataclass
class SubmitReport:
    accepted: list
    rejected: list  # (purchase id, reason)
    amount: int
    new_points: list


def submit(wallet, session, claims, rng=None):
    """Submit ``claims`` = [(purchase id, level), ...] and collect the points."""
    session = _session(session)
    groups = []
    for gid, level in claims:
        g = wallet.purchase(gid)
        if g.consumed:
            raise WalletError(f"purchase {gid} was already submitted")
        if not 0 <= level < len(g.tokens):
            raise WalletError(f"level {level} outside 0..{len(g.tokens) - 1}")
        groups.append((g, level))
    outcome = session.submit([g.chain(level) for g, level in groups])
    accepted, rejected = [], []
    for (g, _), res in zip(groups, outcome.claims):
        if res.accepted:
            # withheld tokens below the level are useless once the root is spent
            g.consumed = True
            accepted.append(g.id)
        else:
            rejected.append((g.id, res.reason))
    new_points = []
    if outcome.offer:
        new_points = _collect_points(wallet, session, outcome.offer, outcome.amount, rng)
        wallet.points.extend(new_points)
    return SubmitReport(accepted, rejected, outcome.amount, new_points)


def _collect_points(wallet, session, offer, amount, rng):
    b = wallet.bundle
    try:
        infos = [parse_info(c) for c in offer]
    except InfoError as exc:
        raise OfferRejected(str(exc)) from exc
    if (
        not all(isinstance(i, PointsInfo) and i.vendor_id == b.vendor_id for i in infos)
        or any(i.denomination not in b.denominations for i in infos)
        or sum(i.denomination for i in infos) != amount
    ):
        raise OfferRejected("points offer does not match the award")
    # a fresh y per points token keeps them mutually unlinkable
    ys = [random_scalar(rng) for _ in offer]
    toks = _issue(wallet, session, offer, ys, rng)
    return [PointToken(t, i.denomination, i.expiry) for t, i in zip(toks, infos)]


def select_points(wallet, amount):
    """Subset of held point tokens worth exactly ``amount``, or None."""
    if amount < 0:
        return None
    best = {0: []}
    for idx, p in enumerate(sorted(wallet.points, key=lambda p: p.expiry)):
        for total, picked in list(best.items()):
            t = total + p.denomination
            if t <= amount and t not in best:
                best[t] = picked + [idx]
    if amount not in best:
        return None
    ordered = sorted(wallet.points, key=lambda p: p.expiry)
    return [ordered[i] for i in best[amount]]


@dataclass
class RedeemReport:
    credited: int
    redeemed: list
    rejected: list  # (c, reason)


def redeem(wallet, session, points=None):
    """Redeem point tokens, aggregating signatures of tokens that share ``c``."""
    session = _session(session)
    points = list(wallet.points if points is None else points)
    if not points:
        raise WalletError("no point tokens to redeem")
    by_c = defaultdict(list)
    for p in points:
        by_c[p.token.c].append(p)
    groups, members = [], []
    for c, ps in by_c.items():
        sig = pbsig.aggregate([p.token.sigma for p in ps])
        groups.append((c, [p.token.m for p in ps], sig))
        members.append(ps)
    outcome = session.redeem(groups)
    redeemed, rejected = [], []
    for (c, _, _), ps, res in zip(groups, members, outcome.groups):
        if res.accepted:
            redeemed.extend(ps)
        else:
            rejected.append((c, res.reason))
    spent = {id(p) for p in redeemed}
    wallet.points = [p for p in wallet.points if id(p) not in spent]
    wallet.credited += outcome.credited
    return RedeemReport(outcome.credited, redeemed, rejected)
