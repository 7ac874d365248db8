import datetime as dt
import itertools
import json
import random

import pytest

from pployalty import crypto_core as cc
from pployalty import pbsig
from pployalty.loyalty import (
    BundleError,
    CustomerWallet,
    OfferRejected,
    ProtocolReject,
    RewardPolicy,
    Vendor,
    VendorBundle,
    WalletError,
    enroll,
    redeem,
    select_points,
    submit,
    system_setup,
    use,
    vendor_setup,
)
from pployalty.loyalty.info import PointsInfo, parse_info
from pployalty.tokens import Token

PATH = ["Inception", "ActionMovie", "Movie", "DigitalMedia", "Product"]


class Clock:
    def __init__(self, when=dt.datetime(2026, 10, 16, 12, tzinfo=dt.timezone.utc)):
        self.now = when

    def __call__(self):
        return self.now

    def advance(self, **kw):
        self.now += dt.timedelta(**kw)


@pytest.fixture
def clock():
    return Clock()


@pytest.fixture
def events():
    return []


@pytest.fixture
def vendor(params, movies_doc, rng, clock, events):
    return vendor_setup(params, movies_doc, rng=rng, clock=clock, audit=events.append)


@pytest.fixture
def wallet(vendor):
    return enroll(vendor.bundle())


class TestSetup:
    def test_system_setup(self):
        assert system_setup(128).serialize() == cc.setup(128).serialize()

    def test_bundle_round_trip(self, vendor):
        b = vendor.bundle()
        wire = json.loads(json.dumps(b.to_dict()))
        again = VendorBundle.from_dict(wire)
        assert again == b
        assert again.taxonomy.path_to_root("Inception") == PATH

    def test_empty_denominations(self, params, movies_doc):
        with pytest.raises(ValueError):
            vendor_setup(params, movies_doc, denominations=[])

    def test_bad_policy(self, params, movies_doc):
        with pytest.raises(ValueError):
            vendor_setup(params, movies_doc, policy=RewardPolicy(link_gamma=-1))

    def test_distinct_keys(self, params, movies_doc):
        assert vendor_setup(params, movies_doc).keys.pk != vendor_setup(params, movies_doc).keys.pk

    def test_save_load(self, vendor, tmp_path):
        vendor.save(tmp_path)
        again = Vendor.load(tmp_path)
        assert again.bundle() == vendor.bundle()
        assert (tmp_path / "vendor.json").stat().st_mode & 0o077 == 0
        again.ledger.close()


class TestEnroll:
    def test_empty(self, wallet):
        assert wallet.purchases == [] and wallet.points == [] and wallet.personas == {}

    def test_corrupted_taxonomy(self, vendor):
        d = vendor.bundle().to_dict()
        d["taxonomy"] = "A\n  x\nB\n"
        with pytest.raises(BundleError):
            enroll(d)
        d = vendor.bundle().to_dict()
        d["pk"] = "AAAA"
        with pytest.raises(BundleError):
            enroll(d)

    def test_independent(self, vendor, rng):
        a, b = enroll(vendor.bundle()), enroll(vendor.bundle())
        use(a, vendor, "Inception", rng=rng)
        assert b.purchases == []


class TestUse:
    def test_fresh(self, wallet, vendor, rng, params):
        g = use(wallet, vendor, "Inception", rng=rng)
        assert g.labels == PATH
        assert len({t.y for t in g.tokens}) == 1
        assert len({t.alpha for t in g.tokens}) == 5
        for t in g.tokens:
            assert pbsig.verify(params, vendor.keys.pk, t.c, t.m, t.sigma)

    def test_persona_reuse(self, wallet, vendor, rng):
        g1 = use(wallet, vendor, "Inception", persona="weekly", rng=rng)
        g2 = use(wallet, vendor, "Inception", persona="weekly", rng=rng)
        toks = g1.tokens + g2.tokens
        assert len(toks) == 10
        assert {t.y for t in toks} == {wallet.personas["weekly"]}
        assert len({t.alpha for t in toks}) == 10

    def test_fresh_is_unlinked(self, wallet, vendor, rng):
        g1 = use(wallet, vendor, "Inception", rng=rng)
        g2 = use(wallet, vendor, "Inception", rng=rng)
        assert g1.y != g2.y

    def test_not_a_leaf(self, wallet, vendor, rng):
        with pytest.raises(WalletError):
            use(wallet, vendor, "ActionMovie", rng=rng)
        with pytest.raises(ProtocolReject):
            vendor.session().offer_receipts("ActionMovie")

    def test_bad_offer_rejected(self, wallet, vendor, rng):
        class Lying:
            def __init__(self, inner):
                self.inner = inner

            def offer_receipts(self, product):
                offer = self.inner.offer_receipts(product)
                return offer[:-1] + ['["R","1999-01","Product"]']

            def sign(self, us):
                raise AssertionError("must not reach signing")

        with pytest.raises(OfferRejected):
            use(wallet, Lying(vendor.session()), "Inception", rng=rng)
        assert wallet.purchases == []

    def test_abort_discards_group(self, wallet, vendor, rng):
        class Dropping:
            def __init__(self, inner):
                self.inner = inner

            def offer_receipts(self, product):
                return self.inner.offer_receipts(product)

            def sign(self, us):
                vs = self.inner.sign(us)
                vs[2] = vs[2] * vs[2]  # corrupt one signature
                return vs

        with pytest.raises(Exception):
            use(wallet, Dropping(vendor.session()), "Inception", rng=rng)
        assert wallet.purchases == []
        assert len(vendor.ledger) == 0

    def test_purchase_hook(self, params, movies_doc, rng):
        v = vendor_setup(params, movies_doc, authorize_purchase=lambda p: p != "Queen")
        w = enroll(v.bundle())
        use(w, v, "Inception", rng=rng)
        with pytest.raises(ProtocolReject):
            use(w, v, "Queen", rng=rng)


class TestSubmit:
    def test_level_two(self, wallet, vendor, rng, events):
        g = use(wallet, vendor, "Inception", rng=rng)
        rep = submit(wallet, vendor, [(g.id, 2)], rng=rng)
        assert rep.accepted == [g.id]
        spent = [parse_info(r.c).label for r in vendor.ledger.linkage_report(g.y)]
        assert spent == ["Movie", "DigitalMedia", "Product"]
        assert rep.amount == 20 + 10
        assert sum(p.denomination for p in rep.new_points) == 30
        assert g.consumed
        submitted = [e for e in events if e["event"] == "submit"][0]["claims"][0]
        assert [parse_info(t["c"]).label for t in submitted] == ["Movie", "DigitalMedia", "Product"]

    def test_withheld_token_rejected(self, wallet, vendor, rng):
        g = use(wallet, vendor, "Inception", rng=rng)
        submit(wallet, vendor, [(g.id, 2)], rng=rng)
        out = vendor.session().submit([g.tokens[:1]])
        assert not out.claims[0].accepted and out.amount == 0

    @pytest.mark.parametrize("level", range(5))
    def test_withheld_suffixes_exhaustive(self, wallet, vendor, rng, level):
        g = use(wallet, vendor, "Inception", rng=rng)
        submit(wallet, vendor, [(g.id, level)], rng=rng)
        toks = g.tokens
        for i, j in itertools.combinations(range(len(toks) + 1), 2):
            chain = toks[i:j]
            if i >= level:
                continue  # already spent tokens are covered by double-spend
            out = vendor.session().submit([chain])
            assert not out.claims[0].accepted, (i, j)

    def test_wallet_refuses_consumed(self, wallet, vendor, rng):
        g = use(wallet, vendor, "Inception", rng=rng)
        submit(wallet, vendor, [(g.id, 0)], rng=rng)
        with pytest.raises(WalletError):
            submit(wallet, vendor, [(g.id, 0)], rng=rng)
        with pytest.raises(WalletError):
            submit(wallet, vendor, [("nope", 0)], rng=rng)

    def test_claims_independent(self, wallet, vendor, rng):
        g1 = use(wallet, vendor, "Inception", rng=rng)
        g2 = use(wallet, vendor, "Queen", rng=rng)
        bad = list(g2.tokens)
        bad.pop(2)  # broken chain
        out = vendor.session().submit([g1.tokens[1:], bad])
        assert out.claims[0].accepted and out.claims[1].reason == "broken-chain"
        assert not any(vendor.ledger.is_spent(t.alpha) for t in g2.tokens)

    def test_splice(self, wallet, vendor, rng):
        g1 = use(wallet, vendor, "Inception", rng=rng)
        g2 = use(wallet, vendor, "TheMatrix", rng=rng)
        spliced = g1.tokens[:2] + g2.tokens[2:]
        out = vendor.session().submit([spliced])
        assert out.claims[0].accepted
        broken = g1.tokens[:1] + g2.tokens[2:]
        assert vendor.session().submit([broken]).claims[0].reason == "broken-chain"

    def test_linkage_bonus(self, wallet, vendor, rng):
        gs = [use(wallet, vendor, "Inception", persona="p", rng=rng) for _ in range(3)]
        amounts = [submit(wallet, vendor, [(g.id, 4)], rng=rng).amount for g in gs]
        assert amounts == [10, 11, 12]  # R(1), R(2)-R(1), R(3)-R(2)

    def test_window(self, wallet, vendor, rng, clock):
        g1 = use(wallet, vendor, "Inception", persona="p", rng=rng)
        submit(wallet, vendor, [(g1.id, 4)], rng=rng)
        clock.advance(days=31)
        g2 = use(wallet, vendor, "Inception", persona="p", rng=rng)
        assert submit(wallet, vendor, [(g2.id, 4)], rng=rng).amount == 10

    def test_receipt_not_points(self, wallet, vendor, rng):
        g = use(wallet, vendor, "Inception", rng=rng)
        submit(wallet, vendor, [(g.id, 0)], rng=rng)
        p = wallet.points[0].token
        assert vendor.session().submit([[p]]).claims[0].reason == "not-a-receipt"

    def test_session_single_protocol(self, vendor):
        s = vendor.session()
        s.offer_receipts("Inception")
        with pytest.raises(ProtocolReject):
            s.submit([])
        with pytest.raises(ProtocolReject):
            vendor.session().sign([])


class TestRedeem:
    def _earn(self, wallet, vendor, rng, product="Inception", level=0):
        g = use(wallet, vendor, product, rng=rng)
        return submit(wallet, vendor, [(g.id, level)], rng=rng)

    def test_aggregate_same_c(self, wallet, vendor, rng):
        self._earn(wallet, vendor, rng, level=2)  # 30 -> [20, 10]
        self._earn(wallet, vendor, rng, level=2)
        by_c = {}
        for p in wallet.points:
            by_c.setdefault(p.token.c, []).append(p)
        twenty = by_c['["P","vendor",20,"2027-10-16"]']
        assert len(twenty) == 2
        rep = redeem(wallet, vendor, twenty)
        assert rep.credited == 40 and rep.rejected == []
        assert wallet.balance == 20

    def test_expired(self, wallet, vendor, rng, clock):
        self._earn(wallet, vendor, rng)
        clock.advance(days=366)
        alphas = [p.token.alpha for p in wallet.points]
        rep = redeem(wallet, vendor)
        assert rep.credited == 0 and {r for _, r in rep.rejected} == {"expired"}
        assert not any(vendor.ledger.is_spent(a) for a in alphas)

    def test_replay(self, wallet, vendor, rng):
        self._earn(wallet, vendor, rng)
        held = list(wallet.points)
        redeem(wallet, vendor)
        wallet.points = held
        rep = redeem(wallet, vendor)
        assert rep.credited == 0 and {r for _, r in rep.rejected} == {"double-spend"}

    def test_foreign(self, wallet, vendor, rng, params, movies_doc):
        other = vendor_setup(params, movies_doc, vendor_id="other")
        w2 = enroll(other.bundle())
        g = use(w2, other, "Inception", rng=rng)
        submit(w2, other, [(g.id, 0)], rng=rng)
        rep = redeem(w2, vendor)
        assert rep.credited == 0 and {r for _, r in rep.rejected} == {"foreign-token"}

    def test_forged_points_rejected(self, wallet, vendor, rng):
        self._earn(wallet, vendor, rng)
        p = wallet.points[0]
        forged_c = PointsInfo("vendor", 20 if p.denomination == 50 else 50, p.expiry).encode()
        out = vendor.session().redeem([(forged_c, [p.token.m], p.token.sigma)])
        assert out.credited == 0 and out.groups[0].reason == "bad-signature"

    def test_select_points(self, wallet, vendor, rng):
        self._earn(wallet, vendor, rng, level=3)  # 20 -> [20]
        self._earn(wallet, vendor, rng, level=3)
        assert select_points(wallet, 3) is None
        assert sum(p.denomination for p in select_points(wallet, 40)) == 40
        assert select_points(wallet, 0) == []


class TestWalletFile:
    def test_round_trip(self, wallet, vendor, rng, tmp_path):
        use(wallet, vendor, "Inception", persona="p", rng=rng)
        g = use(wallet, vendor, "Queen", rng=rng)
        submit(wallet, vendor, [(g.id, 1)], rng=rng)
        path = tmp_path / "w.json"
        wallet.save(path)
        again = CustomerWallet.load(path)
        assert again.to_dict() == wallet.to_dict()
        assert again.purchase(g.id).consumed
        assert [p.name for p in tmp_path.iterdir()] == ["w.json"]

    def test_version(self, wallet):
        d = wallet.to_dict()
        d["version"] = 99
        with pytest.raises(WalletError):
            CustomerWallet.from_dict(d)


class TestAnonymity:
    def test_issuance_events_hold_no_secrets(self, wallet, vendor, rng, events):
        gs = [use(wallet, vendor, p, persona="p", rng=rng) for p in ("Inception", "Queen", "Amelie")]
        submit(wallet, vendor, [(gs[0].id, 0), (gs[1].id, 2), (gs[2].id, 4)], rng=rng)
        redeem(wallet, vendor)
        sign_blob = json.dumps(
            [e for e in events if e["event"] == "sign"], default=lambda b: b.hex()
        )
        secrets = []
        for g in gs:
            for t in g.tokens:
                secrets += [cc.scalar_to_bytes(t.alpha).hex(), t.sigma.to_bytes().hex()]
        secrets.append(cc.scalar_to_bytes(gs[0].y).hex())
        assert not any(s in sign_blob for s in secrets)
        # the submit side does see the tokens
        submit_blob = json.dumps([e for e in events if e["event"] == "submit"])
        assert gs[0].tokens[0].to_dict()["sigma"] in submit_blob


def test_conservation_small(params, movies_doc, rng):
    v = vendor_setup(params, movies_doc, rng=rng)
    leaves = v.taxonomy.leaves()
    wallets = [enroll(v.bundle()) for _ in range(5)]
    for w in wallets:
        for _ in range(3):
            use(w, v, rng.choice(leaves), persona=rng.choice([None, "a"]), rng=rng)
        submit(w, v, [(g.id, rng.randrange(5)) for g in w.purchases], rng=rng)
    for w in wallets[:2]:
        redeem(w, v)
    assert v.credited_total < v.awarded_total
    for w in wallets[2:]:
        redeem(w, v)
    assert v.credited_total == v.awarded_total == v.issued_points_total
