"""Pure-Python BLS12-381 backend.

Drop-in replacement for the compiled ``_native`` module, built on
``py_ecc``'s optimized BLS12-381 arithmetic. Roughly two to three orders of
magnitude slower; used when the extension is unavailable and as an
independent cross-check of the compiled kernels.
"""

import hashlib

from py_ecc import optimized_bls12_381 as bls
from py_ecc.bls import point_compression as pc
from py_ecc.bls.hash_to_curve import hash_to_G2

CURVE = "BLS12-381"

_Q = bls.curve_order


def _scalar(data):
    if len(data) != 32:
        raise ValueError("scalar must be 32 bytes")
    k = int.from_bytes(data, "big")
    if k >= _Q:
        raise ValueError("scalar not reduced modulo q")
    return k


class _Point:
    __slots__ = ("p",)
    _zero = None
    _gen = None
    WIDTH = 0

    def __init__(self, p):
        self.p = p

    @classmethod
    def generator(cls):
        return cls(cls._gen)

    @classmethod
    def identity(cls):
        return cls(cls._zero)

    def add(self, other):
        return type(self)(bls.add(self.p, other.p))

    def neg(self):
        return type(self)(bls.neg(self.p))

    def mul(self, scalar):
        return type(self)(bls.multiply(self.p, _scalar(scalar)))

    mul_ct = mul

    def is_identity(self):
        return bls.is_inf(self.p)

    @classmethod
    def sum(cls, points):
        acc = cls._zero
        for pt in points:
            acc = bls.add(acc, pt.p)
        return cls(acc)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return bls.eq(self.p, other.p)

    def __hash__(self):
        return hash(self.to_bytes())

    def __repr__(self):
        return f"{type(self).__name__}({self.to_bytes()[:8].hex()}..)"


class G1(_Point):
    __slots__ = ()
    _zero = bls.Z1
    _gen = bls.G1
    WIDTH = 48

    @classmethod
    def from_bytes(cls, data):
        if len(data) != 48:
            raise ValueError("expected 48 bytes")
        try:
            p = pc.decompress_G1(int.from_bytes(data, "big"))
        except (ValueError, AssertionError) as exc:
            raise ValueError("invalid point encoding") from exc
        if not bls.is_inf(bls.multiply(p, _Q)):
            raise ValueError("invalid point encoding")
        return cls(p)

    def to_bytes(self):
        return pc.compress_G1(self.p).to_bytes(48, "big")


class G2(_Point):
    __slots__ = ()
    _zero = bls.Z2
    _gen = bls.G2
    WIDTH = 96

    @classmethod
    def from_bytes(cls, data):
        if len(data) != 96:
            raise ValueError("expected 96 bytes")
        z1 = int.from_bytes(data[:48], "big")
        z2 = int.from_bytes(data[48:], "big")
        try:
            p = pc.decompress_G2((z1, z2))
        except (ValueError, AssertionError) as exc:
            raise ValueError("invalid point encoding") from exc
        if not bls.is_inf(bls.multiply(p, _Q)):
            raise ValueError("invalid point encoding")
        return cls(p)

    def to_bytes(self):
        z1, z2 = pc.compress_G2(self.p)
        return z1.to_bytes(48, "big") + z2.to_bytes(48, "big")

    @classmethod
    def hash(cls, msg, dst):
        return cls(hash_to_G2(bytes(msg), bytes(dst), hashlib.sha256))


class GT:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    @classmethod
    def identity(cls):
        return cls(bls.FQ12.one())

    def mul(self, other):
        return GT(self.v * other.v)

    def pow(self, scalar):
        return GT(self.v ** _scalar(scalar))

    def inverse(self):
        return GT(self.v.inv())

    def is_identity(self):
        return self.v == bls.FQ12.one()

    def __eq__(self, other):
        if not isinstance(other, GT):
            return NotImplemented
        return self.v == other.v

    def __hash__(self):
        return hash(tuple(int(c) for c in self.v.coeffs))


def pairing(a, b):
    return GT(bls.pairing(b.p, a.p))


def pairing_check(g1s, g2s):
    if len(g1s) != len(g2s):
        raise ValueError("operand lists differ in length")
    acc = bls.FQ12.one()
    for a, b in zip(g1s, g2s):
        if bls.is_inf(a.p) or bls.is_inf(b.p):
            continue
        acc = acc * bls.pairing(b.p, a.p, final_exponentiate=False)
    return bls.final_exponentiate(acc) == bls.FQ12.one()


class PreparedG2:
    """Holds a fixed G2 argument. py_ecc exposes no line-coefficient cache,
    so this only saves the affine conversion."""

    __slots__ = ("q",)

    def __init__(self, q):
        self.q = bls.normalize(q.p) + (bls.FQ2.one(),)

    def pairing(self, a):
        return GT(bls.pairing(self.q, a.p))


class FixedBaseG1:
    """Fixed-base comb: table[i][j] = j * 2**(w*i) * base."""

    def __init__(self, base, window=4):
        if not 1 <= window <= 8:
            raise ValueError("window must be in 1..=8")
        self.window = window
        rows = -(-256 // window)
        self._table = []
        row_base = base.p
        for _ in range(rows):
            row = [bls.Z1]
            for _ in range((1 << window) - 1):
                row.append(bls.add(row[-1], row_base))
            self._table.append(row)
            for _ in range(window):
                row_base = bls.double(row_base)

    def mul(self, scalar):
        k = _scalar(scalar)
        mask = (1 << self.window) - 1
        acc = bls.Z1
        for row in self._table:
            digit = k & mask
            if digit:
                acc = bls.add(acc, row[digit])
            k >>= self.window
        return G1(acc)
