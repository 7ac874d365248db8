"""Vendor side of the loyalty program.

A :class:`Vendor` owns the signing key, the published taxonomy, the spent
ledger and the reward policy. Customers talk to it through short-lived
:class:`VendorSession` objects, one per protocol run (Use, Submit+Issue or
Redeem); the wire daemon creates one session per connection.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import threading
from dataclasses import dataclass, field

from .. import crypto_core, pbsig, tokens
from ..crypto_core import G1, G2, EncodingError, GroupElement, SystemParams
from ..taxonomy import Taxonomy, parse_taxonomy
from .info import InfoError, PointsInfo, ReceiptInfo, epoch_of, parse_info
from .rewards import (
    DAY_MS,
    DEFAULT_DENOMINATIONS,
    AcceptedClaim,
    PolicyError,
    RewardPolicy,
    compute_reward,
    decompose,
    validate_denominations,
)

log = logging.getLogger(__name__)

DEFAULT_VALIDITY_DAYS = 365


class ProtocolReject(Exception):
    """The vendor refuses a request; ``code`` is a stable machine-readable reason."""

    def __init__(self, code, message=""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


class BundleError(ValueError):
    pass


@dataclass(frozen=True)
class VendorBundle:
    """Everything a vendor publishes."""

    vendor_id: str
    pk: GroupElement
    params: SystemParams
    taxonomy_doc: str
    policy: RewardPolicy
    denominations: tuple
    validity_days: int

    @property
    def taxonomy(self):
        return parse_taxonomy(self.taxonomy_doc)

    def to_dict(self):
        return {
            "vendor_id": self.vendor_id,
            "pk": crypto_core.b64u_encode(self.pk.to_bytes()),
            "params": self.params.serialize().decode(),
            "taxonomy": self.taxonomy_doc,
            "policy": self.policy.to_dict(),
            "denominations": list(self.denominations),
            "validity_days": self.validity_days,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            params = SystemParams.deserialize(d["params"])
            pk = GroupElement.from_bytes(G1, crypto_core.b64u_decode(d["pk"]), params.backend)
            if pk.is_identity():
                raise BundleError("identity public key")
            doc = d["taxonomy"]
            parse_taxonomy(doc)
            bundle = cls(
                vendor_id=str(d["vendor_id"]),
                pk=pk,
                params=params,
                taxonomy_doc=doc,
                policy=RewardPolicy.from_dict(d["policy"]),
                denominations=validate_denominations(d["denominations"]),
                validity_days=int(d["validity_days"]),
            )
        except BundleError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            # EncodingError, TaxonomyError and PolicyError are ValueErrors
            raise BundleError(f"malformed vendor bundle: {exc}") from exc
        return bundle


@dataclass(frozen=True)
class ClaimResult:
    accepted: bool
    reason: str | None = None
    level: int | None = None
    linked: bool = False


@dataclass(frozen=True)
class SubmitOutcome:
    claims: list
    amount: int
    offer: list = field(default_factory=list)  # points public info strings to sign


@dataclass(frozen=True)
class GroupResult:
    accepted: bool
    reason: str | None = None
    credit: int = 0


@dataclass(frozen=True)
class RedeemOutcome:
    groups: list
    credited: int


def _utcnow():
    return dt.datetime.now(dt.timezone.utc)


class Vendor:
    def __init__(
        self,
        params,
        keys,
        taxonomy,
        *,
        vendor_id="vendor",
        ledger=None,
        policy=None,
        denominations=DEFAULT_DENOMINATIONS,
        validity_days=DEFAULT_VALIDITY_DAYS,
        clock=None,
        authorize_purchase=None,
        audit=None,
    ):
        if not isinstance(taxonomy, Taxonomy):
            taxonomy = parse_taxonomy(taxonomy)
        self.params = params
        self.keys = keys
        self.taxonomy = taxonomy
        self.vendor_id = vendor_id
        self.ledger = ledger if ledger is not None else tokens.SpentLedger()
        self.policy = (policy or RewardPolicy()).validate()
        self.denominations = validate_denominations(denominations)
        if validity_days <= 0:
            raise PolicyError("validity_days must be positive")
        self.validity_days = validity_days
        self.clock = clock or _utcnow
        # payment is out of band; this hook lets an operator tie receipts to it
        self.authorize_purchase = authorize_purchase or (lambda product: True)
        self.audit = audit
        self._stats_lock = threading.Lock()
        self.awarded_total = 0
        self.issued_points_total = 0
        self.credited_total = 0

    @classmethod
    def setup(cls, params, taxonomy_doc, policy=None, denominations=DEFAULT_DENOMINATIONS,
              rng=None, **kwargs):
        """Publishable vendor with a fresh key pair and an empty ledger."""
        taxonomy = parse_taxonomy(taxonomy_doc)
        keys = pbsig.keygen(params, rng)
        return cls(params, keys, taxonomy, policy=policy, denominations=denominations, **kwargs)

    def bundle(self):
        return VendorBundle(
            vendor_id=self.vendor_id,
            pk=self.keys.pk,
            params=self.params,
            taxonomy_doc=self.taxonomy.dumps(),
            policy=self.policy,
            denominations=self.denominations,
            validity_days=self.validity_days,
        )

    def session(self):
        return VendorSession(self)

    def now_ms(self):
        return int(self.clock().timestamp() * 1000)

    def _event(self, kind, **payload):
        if self.audit is not None:
            self.audit({"event": kind, **payload})

    # -- Use -----------------------------------------------------------------

    def receipt_offer(self, product):
        if product not in self.taxonomy or not self.taxonomy.is_leaf(product):
            raise ProtocolReject("not-a-leaf", f"{product!r} is not a product")
        if not self.authorize_purchase(product):
            raise ProtocolReject("purchase-not-authorized")
        epoch = epoch_of(self.clock())
        return [ReceiptInfo(label, epoch).encode() for label in self.taxonomy.path_to_root(product)]

    def sign_all(self, cs, us):
        if len(cs) != len(us):
            raise ProtocolReject("bad-request", "expected one blinded message per offered token")
        try:
            vs = [tokens.vendor_sign(self.keys, c, u) for c, u in zip(cs, us)]
        except (tokens.IssuanceError, pbsig.SigningError) as exc:
            raise ProtocolReject("invalid-blinded-message", str(exc)) from exc
        self._event("sign", cs=list(cs), us=[u.to_bytes() for u in us], vs=[v.to_bytes() for v in vs])
        return vs

    # -- Submit --------------------------------------------------------------

    def _check_chain(self, chain):
        if not chain or not all(isinstance(t, tokens.Token) for t in chain):
            return None, "malformed"
        labels = []
        for t in chain:
            try:
                info = parse_info(t.c)
            except InfoError:
                return None, "not-a-receipt"
            if not isinstance(info, ReceiptInfo):
                return None, "not-a-receipt"
            labels.append(info.label)
        check = self.taxonomy.validate_chain(labels)
        if not check:
            return None, check.reason.value
        return check, None

    def submit_claims(self, claims):
        """Verify and spend each claimed chain; returns the award and points offer."""
        now = self.now_ms()
        results, accepted = [], []
        for chain in claims:
            chain = list(chain)
            check, fault = self._check_chain(chain)
            if check is None:
                results.append(ClaimResult(False, fault))
                continue
            res = tokens.verify_and_spend_batch(self.ledger, self.params, self.keys.pk, chain, now)
            if not res:
                results.append(ClaimResult(False, res.reason.value))
                continue
            root_token = chain[-1]
            accepted.append(AcceptedClaim(check.level, self.taxonomy.height, root_token.y, now))
            results.append(ClaimResult(True, level=check.level, linked=res.linked))
        amount = compute_reward(self.policy, accepted, lambda y: self.claims_in_window(y, now))
        offer = self.points_offer(amount)
        with self._stats_lock:
            self.awarded_total += amount
        self._event(
            "submit",
            claims=[[t.to_dict() for t in chain] for chain in claims],
            amount=amount,
        )
        return SubmitOutcome(results, amount, offer)

    def claims_in_window(self, y, now):
        """Claims linked by ``y`` spent within the policy window up to ``now``.

        Every claim spends exactly one root receipt, so root receipts are counted.
        """
        start = now - self.policy.window_days * DAY_MS
        n = 0
        for rec in self.ledger.linkage_report(y):
            if rec.timestamp < start or rec.timestamp > now:
                continue
            try:
                info = parse_info(rec.c)
            except InfoError:
                continue
            if isinstance(info, ReceiptInfo) and info.label == self.taxonomy.root:
                n += 1
        return n

    def points_offer(self, amount):
        expiry = self.clock().date() + dt.timedelta(days=self.validity_days)
        return [
            PointsInfo(self.vendor_id, d, expiry).encode()
            for d in decompose(amount, self.denominations)
        ]

    # -- Redeem --------------------------------------------------------------

    def redeem_groups(self, groups):
        """``groups`` holds (c, messages, sigma) triples, one aggregate per c."""
        today = self.clock().date()
        now = self.now_ms()
        results = []
        for c, messages, sigma in groups:
            try:
                info = parse_info(c)
            except InfoError:
                results.append(GroupResult(False, "malformed"))
                continue
            if not isinstance(info, PointsInfo) or info.vendor_id != self.vendor_id:
                results.append(GroupResult(False, "foreign-token"))
                continue
            if info.expired(today):
                results.append(GroupResult(False, "expired"))
                continue
            res = tokens.verify_and_spend_aggregate(
                self.ledger, self.params, self.keys.pk, c, messages, sigma, now
            )
            if not res:
                results.append(GroupResult(False, res.reason.value))
                continue
            results.append(GroupResult(True, credit=info.denomination * len(messages)))
        credited = sum(r.credit for r in results)
        with self._stats_lock:
            self.credited_total += credited
        self._event("redeem", groups=[
            {"c": c, "messages": [m.to_bytes() for m in ms], "sigma": s.to_bytes()}
            for c, ms, s in groups
        ], credited=credited)
        return RedeemOutcome(results, credited)

    # -- persistence ---------------------------------------------------------

    def save(self, directory):
        """Write key, config and taxonomy under ``directory`` (ledger lives there too)."""
        os.makedirs(directory, exist_ok=True)
        cfg = {
            "vendor_id": self.vendor_id,
            "sk": f"{self.keys.sk:064x}",
            "policy": self.policy.to_dict(),
            "denominations": list(self.denominations),
            "validity_days": self.validity_days,
        }
        path = os.path.join(directory, "vendor.json")
        fd = os.open(path + ".tmp", os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            json.dump(cfg, fh, indent=2)
        os.replace(path + ".tmp", path)
        with open(os.path.join(directory, "taxonomy.txt"), "w") as fh:
            fh.write(self.taxonomy.dumps())

    @classmethod
    def load(cls, directory, params=None, **kwargs):
        params = params or crypto_core.setup()
        with open(os.path.join(directory, "vendor.json")) as fh:
            cfg = json.load(fh)
        with open(os.path.join(directory, "taxonomy.txt")) as fh:
            taxonomy = parse_taxonomy(fh.read())
        keys = pbsig.keygen(params, sk=int(cfg["sk"], 16))
        ledger = tokens.SpentLedger(os.path.join(directory, "ledger.log"))
        return cls(
            params,
            keys,
            taxonomy,
            vendor_id=cfg["vendor_id"],
            ledger=ledger,
            policy=RewardPolicy.from_dict(cfg["policy"]),
            denominations=cfg["denominations"],
            validity_days=cfg["validity_days"],
            **kwargs,
        )


def vendor_setup(params, taxonomy_doc, policy=None, denominations=DEFAULT_DENOMINATIONS, **kwargs):
    return Vendor.setup(params, taxonomy_doc, policy, denominations, **kwargs)


class VendorSession:
    """One protocol run against a vendor.

    Use:    ``offer_receipts(product)`` then ``sign(us)``
    Submit: ``submit(claims)`` then, if points were awarded, ``sign(us)``
    Redeem: ``redeem(groups)``
    """

    def __init__(self, vendor):
        self.vendor = vendor
        self._protocol = None
        self._offer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._offer = None

    def _begin(self, protocol):
        if self._protocol is not None:
            raise ProtocolReject("session-used", "one protocol per session")
        self._protocol = protocol

    def bundle(self):
        return self.vendor.bundle()

    def offer_receipts(self, product):
        self._begin("use")
        self._offer = self.vendor.receipt_offer(product)
        return list(self._offer)

    def sign(self, us):
        if not self._offer:
            raise ProtocolReject("no-offer", "nothing to sign in this session")
        offer, self._offer = self._offer, None
        vs = self.vendor.sign_all(offer, list(us))
        if self._protocol == "submit":
            with self.vendor._stats_lock:
                self.vendor.issued_points_total += sum(parse_info(c).denomination for c in offer)
        return vs

    def submit(self, claims):
        self._begin("submit")
        outcome = self.vendor.submit_claims(claims)
        self._offer = list(outcome.offer)
        return outcome

    def redeem(self, groups):
        self._begin("redeem")
        return self.vendor.redeem_groups(groups)


def decode_blinded(items, backend=None):
    """Decode base64url G2 encodings from the wire, rejecting bad points."""
    out = []
    for item in items:
        try:
            out.append(GroupElement.from_bytes(G2, crypto_core.b64u_decode(item), backend))
        except EncodingError as exc:
            raise ProtocolReject("malformed", str(exc)) from exc
    return out
