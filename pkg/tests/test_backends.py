"""Compiled kernels against the pure-Python fallback (independent implementations)."""

import os
import random
import subprocess
import sys

import pytest

from pployalty import _backend, crypto_core as cc, pbsig
from pployalty.crypto_core import G1, G2, GroupElement, Message

from conftest import needs_native

pytestmark = needs_native


@pytest.fixture(scope="module")
def nat():
    return _backend.load("native")


@pytest.fixture(scope="module")
def py():
    return _backend.load("python")


def test_generators_agree(nat, py):
    assert nat.G1.generator().to_bytes() == py.G1.generator().to_bytes()
    assert nat.G2.generator().to_bytes() == py.G2.generator().to_bytes()
    assert nat.G1.identity().to_bytes() == py.G1.identity().to_bytes()
    assert nat.G2.identity().to_bytes() == py.G2.identity().to_bytes()


def test_exponentiation_agrees(nat, py):
    r = random.Random(11)
    for _ in range(5):
        e = cc.scalar_to_bytes(cc.random_scalar(r))
        assert nat.G1.generator().mul(e).to_bytes() == py.G1.generator().mul(e).to_bytes()
        assert nat.G2.generator().mul(e).to_bytes() == py.G2.generator().mul(e).to_bytes()
        assert nat.G2.generator().mul_ct(e).to_bytes() == nat.G2.generator().mul(e).to_bytes()


def test_hash_to_curve_agrees(nat, py):
    for msg in (b"", b"\x02abc", bytes(range(100))):
        assert nat.G2.hash(msg, cc.GROUP_HASH_DST).to_bytes() == py.G2.hash(msg, cc.GROUP_HASH_DST).to_bytes()


def test_decode_agrees(nat, py):
    r = random.Random(12)
    good = nat.G2.generator().mul(cc.scalar_to_bytes(cc.random_scalar(r))).to_bytes()
    assert py.G2.from_bytes(good).to_bytes() == good
    bad = bytearray(good)
    bad[-1] ^= 1
    outcomes = []
    for be in (nat, py):
        try:
            be.G2.from_bytes(bytes(bad))
            outcomes.append(True)
        except ValueError:
            outcomes.append(False)
    assert outcomes[0] == outcomes[1]


def test_fixed_base_agrees(nat, py):
    r = random.Random(13)
    tn = nat.FixedBaseG1(nat.G1.generator(), 8)
    tp = py.FixedBaseG1(py.G1.generator(), 4)
    for _ in range(5):
        e = cc.scalar_to_bytes(cc.random_scalar(r))
        assert tn.mul(e).to_bytes() == tp.mul(e).to_bytes()


def test_pairing_check_agrees(nat, py):
    for be in (nat, py):
        g, h = be.G1.generator(), be.G2.generator()
        two, three = cc.scalar_to_bytes(2), cc.scalar_to_bytes(3)
        assert be.pairing_check([g.mul(two), g.neg()], [h.mul(three), h.mul(cc.scalar_to_bytes(6))])
        assert not be.pairing_check([g.mul(two), g.neg()], [h.mul(three), h.mul(cc.scalar_to_bytes(5))])
        assert be.PreparedG2(h).pairing(g) == be.pairing(g, h)


def test_signature_agrees(nat, py):
    sigs = []
    for be in (nat, py):
        params = cc.setup(backend=be)
        keys = pbsig.keygen(params, sk=987654321)
        m = Message(31, 37)
        u, state = pbsig.blind(params, "cross", m, 41)
        sig = pbsig.unblind(pbsig.sign_blinded(keys, "cross", u), state)
        assert pbsig.verify(params, keys.pk, "cross", m, sig)
        sigs.append(sig.to_bytes())
    assert sigs[0] == sigs[1]


def test_cross_backend_decode(nat, py):
    p_nat = cc.setup(backend=nat)
    enc = (p_nat.h ** 77).to_bytes()
    a = GroupElement.from_bytes(G2, enc, py)
    assert a.to_bytes() == enc
    assert GroupElement.from_bytes(G1, p_nat.g.to_bytes(), py).to_bytes() == p_nat.g.to_bytes()


@pytest.mark.parametrize("choice,expected", [("python", "python"), ("native", "native"), ("auto", "native")])
def test_env_selection(choice, expected):
    env = dict(os.environ, PPLOYALTY_BACKEND=choice)
    out = subprocess.run(
        [sys.executable, "-c", "import pployalty; print(pployalty.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.load("gpu")


def test_auto_falls_back_without_native():
    code = (
        "import sys; sys.modules['pployalty._native'] = None\n"
        "import pployalty; print(pployalty.BACKEND)"
    )
    env = dict(os.environ, PPLOYALTY_BACKEND="auto")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
