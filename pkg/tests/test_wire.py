import json
import random
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pployalty import crypto_core as cc
from pployalty.loyalty import ProtocolReject, enroll, redeem, submit, use, vendor_setup
from pployalty.wire import (
    KINDS,
    MAX_LINE,
    RemoteVendor,
    Transcript,
    TransportError,
    WireError,
    WireMessage,
    parse_endpoint,
    vendor_serve,
)
from pployalty.wire import transcript as tr_mod


@pytest.fixture
def vendor(params, movies_doc, rng):
    return vendor_setup(params, movies_doc, rng=rng)


@pytest.fixture
def server(vendor):
    tr = Transcript()
    srv = vendor_serve(vendor, transcript=tr).start()
    yield srv
    srv.stop()


def raw_exchange(address, payload, timeout=5):
    """Send raw bytes, return everything the daemon answers before closing."""
    s = socket.create_connection(address, timeout=timeout)
    try:
        s.sendall(payload)
        s.shutdown(socket.SHUT_WR)
        chunks = []
        while True:
            b = s.recv(65536)
            if not b:
                break
            chunks.append(b)
        return b"".join(chunks)
    finally:
        s.close()


def state(vendor):
    return (vendor.ledger.spent_alphas(), vendor.awarded_total, vendor.credited_total)


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-2**40, 2**40) | st.text(max_size=20),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=8), kids, max_size=4),
    max_leaves=12,
)


class TestMessages:
    @given(st.sampled_from(sorted(KINDS)), st.dictionaries(st.text(max_size=8), json_values, max_size=5))
    def test_round_trip(self, kind, body):
        msg = WireMessage(kind, body)
        line = msg.encode()
        assert line.endswith(b"\n") and line.count(b"\n") == 1
        assert WireMessage.decode(line) == msg

    @pytest.mark.parametrize("line", [
        b"nope\n",
        b"[]\n",
        b'{"v":1,"kind":"launch","body":{}}\n',
        b'{"v":2,"kind":"bundle","body":{}}\n',
        b'{"v":true,"kind":"bundle","body":{}}\n',
        b'{"v":1,"kind":"bundle","body":[]}\n',
        b'{"v":1,"kind":"bundle"}\n',
        b'{"v":1,"kind":"bundle","body":{},"x":0}\n',
        b"\xff\xfe\n",
    ])
    def test_rejects(self, line):
        with pytest.raises(WireError):
            WireMessage.decode(line)

    def test_endpoint(self):
        assert parse_endpoint("h:1") == ("h", 1)
        assert parse_endpoint(":7") == ("127.0.0.1", 7)
        with pytest.raises(ValueError):
            parse_endpoint("nohost")


class TestDaemon:
    def test_bundle(self, server, vendor):
        assert RemoteVendor(server.address).bundle() == vendor.bundle()

    def test_full_flow(self, server, vendor, rng):
        rv = RemoteVendor(server.address)
        w = enroll(rv.bundle())
        g = use(w, rv, "Inception", rng=rng)
        rep = submit(w, rv, [(g.id, 2)], rng=rng)
        assert rep.amount == 30 and w.balance == 30
        assert redeem(w, rv).credited == 30
        assert vendor.credited_total == 30

    def test_unknown_kind_closes(self, server):
        out = raw_exchange(server.address, b'{"v":1,"kind":"launch","body":{}}\n{"v":1,"kind":"get-bundle","body":{}}\n')
        lines = out.splitlines()
        assert len(lines) == 1
        assert WireMessage.decode(lines[0]).body["code"] == "malformed"

    def test_response_kind_from_client(self, server):
        out = raw_exchange(server.address, WireMessage("bundle", {}).encode())
        assert WireMessage.decode(out).body["code"] == "unexpected-kind"

    def test_bad_base64_element(self, server, vendor):
        before = state(vendor)
        s = RemoteVendor(server.address).session()
        s.offer_receipts("Inception")
        with pytest.raises(ProtocolReject) as exc:
            s.call(WireMessage("issue-request", {"phase": "sign", "us": ["$$$"] * 5}), "issue-response")
        assert exc.value.code == "malformed"
        assert state(vendor) == before

    def test_identity_u_rejected(self, server):
        s = RemoteVendor(server.address).session()
        s.offer_receipts("Inception")
        ident = cc.GroupElement.identity(cc.G2)
        with pytest.raises(ProtocolReject) as exc:
            s.sign([ident] * 5)
        assert exc.value.code == "invalid-blinded-message"

    def test_wrong_count(self, server):
        s = RemoteVendor(server.address).session()
        s.offer_receipts("Inception")
        with pytest.raises(ProtocolReject):
            s.sign([cc.setup().h])

    def test_one_protocol_per_connection(self, server):
        s = RemoteVendor(server.address).session()
        s.offer_receipts("Inception")
        with pytest.raises(ProtocolReject):
            s.offer_receipts("Inception")

    def test_oversized_line(self, server):
        out = raw_exchange(server.address, b"x" * (MAX_LINE + 10))
        assert WireMessage.decode(out).kind == "error"

    def test_unterminated_line(self, server):
        out = raw_exchange(server.address, b'{"v":1,"kind":"get-bundle","body":{}}')
        assert WireMessage.decode(out).kind == "error"

    def test_drop_mid_issuance(self, server, vendor):
        before = state(vendor)
        s = RemoteVendor(server.address).session()
        s.offer_receipts("Inception")
        s.close()
        assert state(vendor) == before
        # the daemon is still serving
        assert RemoteVendor(server.address).bundle().vendor_id == vendor.vendor_id

    def test_concurrent_replay(self, server, vendor, rng):
        rv = RemoteVendor(server.address)
        w = enroll(rv.bundle())
        g = use(w, rv, "Inception", rng=rng)
        chain = g.tokens[2:]
        results = []
        barrier = threading.Barrier(8)

        def go():
            barrier.wait()
            with rv.session() as s:
                results.append(s.submit([chain]).claims[0])

        threads = [threading.Thread(target=go) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(r.accepted for r in results) == 1
        assert {r.reason for r in results if not r.accepted} == {"double-spend"}

    def test_unreachable(self):
        with pytest.raises(TransportError):
            RemoteVendor(("127.0.0.1", 1), timeout=1).bundle()

    def test_transcript_verbatim(self, server, rng):
        rv = RemoteVendor(server.address)
        w = enroll(rv.bundle())
        use(w, rv, "Inception", rng=rng)
        entries = server.transcript.entries
        kinds = [json.loads(e["line"])["kind"] for e in entries]
        assert kinds == ["get-bundle", "bundle", "issue-request", "issue-response", "issue-request", "issue-response"]
        assert tr_mod.messages(entries, {"issue-request"})[1]["body"]["phase"] == "sign"

    def test_transcript_file(self, vendor, tmp_path, rng):
        path = tmp_path / "t.ndjson"
        tr = Transcript(str(path))
        with vendor_serve(vendor, transcript=tr).start() as srv:
            RemoteVendor(srv.address).bundle()
        tr.close()
        assert [e["dir"] for e in tr_mod.load(path)] == ["in", "out"]


class TestFuzz:
    @settings(max_examples=60)
    @given(st.binary(max_size=2000))
    def test_random_bytes(self, server, vendor, data):
        before = state(vendor)
        out = raw_exchange(server.address, data + b"\n")
        for line in out.splitlines():
            WireMessage.decode(line + b"\n")  # replies are always well formed
        assert state(vendor) == before

    @settings(max_examples=60)
    @given(st.sampled_from(sorted(KINDS)), st.dictionaries(st.sampled_from(
        ["phase", "product", "us", "claims", "groups", "c", "messages", "sigma"]), json_values, max_size=4))
    def test_structured(self, server, vendor, kind, body):
        before = state(vendor)
        out = raw_exchange(server.address, WireMessage(kind, body).encode())
        assert out, "daemon must always answer"
        assert state(vendor) == before

    def test_mutated_valid_requests(self, server, vendor, rng):
        rv = RemoteVendor(server.address)
        w = enroll(rv.bundle())
        g = use(w, rv, "Inception", rng=rng)
        good = WireMessage("submit-request", {"claims": [[t.to_dict() for t in g.tokens[3:]]]}).encode()
        r = random.Random(1)
        before = state(vendor)
        for _ in range(40):
            b = bytearray(good)
            i = r.randrange(len(b) - 1)
            b[i] = r.randrange(256)
            raw_exchange(server.address, bytes(b))
        # a mutated request can at most spend this chain, never anything else
        assert vendor.ledger.spent_alphas() - before[0] <= {t.alpha for t in g.tokens[3:]}
        assert RemoteVendor(server.address).bundle() == vendor.bundle()
