"""Prime-order group backends for the commitment/encryption layer.

Two interchangeable instantiations of one interface:

* ``CurveGroup``: the production backend. Short-Weierstrass curve
  y^2 = x^3 + 3 over a 254-bit prime field (the G1 group common to
  mainstream proof toolchains; no pairings are used here). The curve group
  has prime order and cofactor 1, so every on-curve point is a valid
  element and subgroup checks reduce to the curve equation.
* ``TinyGroup``: a multiplicative subgroup of prime order 2^31 - 1 inside
  a 37-bit prime field. Discrete logs in it are brute-forceable by design;
  oracle tests use it to cross-check relation semantics against exhaustive
  recomputation. Never use it outside tests.

Scalars are immutable and carry their modulus, so values from the two
backends cannot be mixed silently. Group elements are opaque value objects;
all arithmetic goes through the owning group instance. Scalar
multiplication runs in Jacobian coordinates internally, with lazily built
radix-16 tables for the two fixed bases (the generator and the derived
blinding generator), which is what makes pure-Python commitments fast
enough for the acceptance workloads.
"""

from __future__ import annotations

import hashlib
from typing import Iterator

from .errors import EncodingError

_DST_BLIND = b"anoncrowd/v1/blind-generator"
_DST_H2G = b"anoncrowd/v1/hash-to-group"


# ── scalars ──────────────────────────────────────────────────────────────────


class Scalar:
    """An integer modulo the group order.

    Supports the ring operations the protocol needs (addition for blinding
    sums, subtraction for deblinding, multiplication for signature and
    decryption algebra). Mixing scalars from different groups raises.
    """

    __slots__ = ("value", "order")

    def __init__(self, value: int, order: int):
        self.value = value % order
        self.order = order

    def _coerce(self, other: "Scalar | int") -> int:
        if isinstance(other, Scalar):
            if other.order != self.order:
                raise ValueError("scalar moduli differ")
            return other.value
        if isinstance(other, int):
            return other
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other: "Scalar | int") -> "Scalar":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return Scalar(self.value + v, self.order)

    __radd__ = __add__

    def __sub__(self, other: "Scalar | int") -> "Scalar":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return Scalar(self.value - v, self.order)

    def __rsub__(self, other: int) -> "Scalar":
        return Scalar(other - self.value, self.order)

    def __mul__(self, other: "Scalar | int") -> "Scalar":
        v = self._coerce(other)
        if v is NotImplemented:
            return NotImplemented
        return Scalar(self.value * v, self.order)

    __rmul__ = __mul__

    def __neg__(self) -> "Scalar":
        return Scalar(-self.value, self.order)

    def inverse(self) -> "Scalar":
        if self.value == 0:
            raise ZeroDivisionError("zero scalar has no inverse")
        return Scalar(pow(self.value, -1, self.order), self.order)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Scalar)
            and self.value == other.value
            and self.order == other.order
        )

    def __hash__(self) -> int:
        return hash((self.value, self.order))

    def __repr__(self) -> str:
        return f"Scalar({self.value})"


# ── element value objects ────────────────────────────────────────────────────


class GroupElement:
    """Marker base class; concrete layouts are backend-private."""

    __slots__ = ()


class CurvePoint(GroupElement):
    """Affine point, or the point at infinity when ``inf`` is set."""

    __slots__ = ("x", "y", "inf")

    def __init__(self, x: int, y: int, inf: bool = False):
        self.x = x
        self.y = y
        self.inf = inf

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CurvePoint):
            return NotImplemented
        if self.inf or other.inf:
            return self.inf and other.inf
        return self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.inf, self.x, self.y))

    def __repr__(self) -> str:
        if self.inf:
            return "CurvePoint(infinity)"
        return f"CurvePoint({hex(self.x)}, {hex(self.y)})"


class FieldUnit(GroupElement):
    """Element of the tiny multiplicative group (a unit mod its field)."""

    __slots__ = ("v",)

    def __init__(self, v: int):
        self.v = v

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldUnit):
            return NotImplemented
        return self.v == other.v

    def __hash__(self) -> int:
        return hash(("unit", self.v))

    def __repr__(self) -> str:
        return f"FieldUnit({self.v})"


# ── production curve arithmetic ──────────────────────────────────────────────

# Field and group parameters of the 254-bit curve y^2 = x^3 + 3.
_Q = 21888242871839275222246405745257275088696311157297823662689037894645226208583
_ORDER = 21888242871839275222246405745257275088548364400416034343698204186575808495617
_GX, _GY = 1, 2

# Jacobian triples (X, Y, Z); Z = 0 encodes infinity.
_J_INF = (0, 1, 0)


def _j_double(p: tuple[int, int, int]) -> tuple[int, int, int]:
    X1, Y1, Z1 = p
    if Z1 == 0 or Y1 == 0:
        return _J_INF
    A = (X1 * X1) % _Q
    B = (Y1 * Y1) % _Q
    C = (B * B) % _Q
    t = (X1 + B) % _Q
    D = (2 * (t * t - A - C)) % _Q
    E = (3 * A) % _Q
    F = (E * E) % _Q
    X3 = (F - 2 * D) % _Q
    Y3 = (E * (D - X3) - 8 * C) % _Q
    Z3 = (2 * Y1 * Z1) % _Q
    return (X3, Y3, Z3)


def _j_add_affine(p: tuple[int, int, int], ax: int, ay: int) -> tuple[int, int, int]:
    """Mixed addition: Jacobian ``p`` plus affine ``(ax, ay)``."""
    X1, Y1, Z1 = p
    if Z1 == 0:
        return (ax, ay, 1)
    Z1Z1 = (Z1 * Z1) % _Q
    U2 = (ax * Z1Z1) % _Q
    S2 = (ay * Z1 * Z1Z1) % _Q
    if U2 == X1:
        if S2 == Y1:
            return _j_double(p)
        return _J_INF
    H = (U2 - X1) % _Q
    HH = (H * H) % _Q
    I = (4 * HH) % _Q
    J = (H * I) % _Q
    r = (2 * (S2 - Y1)) % _Q
    V = (X1 * I) % _Q
    X3 = (r * r - J - 2 * V) % _Q
    Y3 = (r * (V - X3) - 2 * Y1 * J) % _Q
    t = (Z1 + H) % _Q
    Z3 = (t * t - Z1Z1 - HH) % _Q
    return (X3, Y3, Z3)


def _j_to_affine(p: tuple[int, int, int]) -> CurvePoint:
    X, Y, Z = p
    if Z == 0:
        return CurvePoint(0, 0, inf=True)
    zi = pow(Z, -1, _Q)
    zi2 = (zi * zi) % _Q
    return CurvePoint((X * zi2) % _Q, (Y * zi2 * zi) % _Q)


def _on_curve(x: int, y: int) -> bool:
    return (y * y - (x * x * x + 3)) % _Q == 0


class _FixedBaseTable:
    """Radix-16 decomposition table for one fixed base point.

    Row i holds d * 16^i * B for d in 1..15, stored affine so the main loop
    uses mixed additions only. A 254-bit scalar then costs at most 64
    additions and no doublings.
    """

    __slots__ = ("rows",)

    def __init__(self, base: CurvePoint, order_bits: int):
        nibbles = (order_bits + 3) // 4
        rows: list[list[tuple[int, int]]] = []
        cur = (base.x, base.y, 1)
        for _ in range(nibbles):
            row = [(0, 0)]
            acc = _J_INF
            cur_aff = _j_to_affine(cur)
            for _ in range(15):
                acc = _j_add_affine(acc, cur_aff.x, cur_aff.y)
                aff = _j_to_affine(acc)
                row.append((aff.x, aff.y))
            rows.append(row)
            for _ in range(4):
                cur = _j_double(cur)
        self.rows = rows

    def accumulate(self, k: int, acc: tuple[int, int, int]) -> tuple[int, int, int]:
        rows = self.rows
        i = 0
        while k:
            d = k & 0xF
            if d:
                ax, ay = rows[i][d]
                acc = _j_add_affine(acc, ax, ay)
            k >>= 4
            i += 1
        return acc


# ── group interface ──────────────────────────────────────────────────────────


class Group:
    """Common interface of the two backends. Not instantiated directly."""

    name: str
    order: int
    scalar_size: int
    element_size: int

    # scalar helpers

    def scalar(self, value: "int | Scalar") -> Scalar:
        if isinstance(value, Scalar):
            if value.order != self.order:
                raise ValueError("scalar belongs to a different group")
            return value
        return Scalar(value, self.order)

    def random_scalar(self, rng) -> Scalar:
        """Uniform scalar from a caller-supplied random.Random-like source."""
        return Scalar(rng.randrange(self.order), self.order)

    def encode_scalar(self, s: "Scalar | int") -> bytes:
        return self.scalar(s).value.to_bytes(self.scalar_size, "little")

    def decode_scalar(self, data: bytes) -> Scalar:
        if len(data) != self.scalar_size:
            raise EncodingError(f"scalar encoding must be {self.scalar_size} bytes")
        v = int.from_bytes(data, "little")
        if v >= self.order:
            raise EncodingError("scalar encoding exceeds group order")
        return Scalar(v, self.order)

    # element operations, provided by the backends

    def identity(self) -> GroupElement:
        raise NotImplementedError

    @property
    def generator(self) -> GroupElement:
        raise NotImplementedError

    @property
    def blind_generator(self) -> GroupElement:
        raise NotImplementedError

    def is_identity(self, p: GroupElement) -> bool:
        raise NotImplementedError

    def add(self, a: GroupElement, b: GroupElement) -> GroupElement:
        raise NotImplementedError

    def neg(self, a: GroupElement) -> GroupElement:
        raise NotImplementedError

    def sub(self, a: GroupElement, b: GroupElement) -> GroupElement:
        return self.add(a, self.neg(b))

    def mul(self, k: "Scalar | int", p: GroupElement) -> GroupElement:
        raise NotImplementedError

    def mul_gen(self, k: "Scalar | int") -> GroupElement:
        """k * generator (fixed-base fast path)."""
        raise NotImplementedError

    def mul_blind(self, k: "Scalar | int") -> GroupElement:
        """k * blind_generator (fixed-base fast path)."""
        raise NotImplementedError

    def dual_mul(self, k_gen: "Scalar | int", k_blind: "Scalar | int") -> GroupElement:
        """k_gen * G + k_blind * H in one pass; the commitment hot path."""
        return self.add(self.mul_gen(k_gen), self.mul_blind(k_blind))

    def encode_element(self, p: GroupElement) -> bytes:
        raise NotImplementedError

    def decode_element(self, data: bytes) -> GroupElement:
        raise NotImplementedError

    def hash_to_element(self, data: bytes) -> GroupElement:
        raise NotImplementedError

    def elements_for_test(self, rng, n: int) -> Iterator[GroupElement]:
        """n pseudo-random elements (known-dlog; for tests and tables only)."""
        for _ in range(n):
            yield self.mul_gen(self.random_scalar(rng))


class CurveGroup(Group):
    """Production backend over the 254-bit curve. Prefer module-level
    production_group() so the fixed-base tables are built once per process."""

    name = "curve254"
    order = _ORDER
    scalar_size = 32
    element_size = 33

    def __init__(self):
        self._gen = CurvePoint(_GX, _GY)
        self._blind: CurvePoint | None = None
        self._gen_table: _FixedBaseTable | None = None
        self._blind_table: _FixedBaseTable | None = None

    # internal helpers

    def _as_int(self, k: "Scalar | int") -> int:
        if isinstance(k, Scalar):
            if k.order != self.order:
                raise ValueError("scalar belongs to a different group")
            return k.value
        return k % self.order

    def _table_gen(self) -> _FixedBaseTable:
        if self._gen_table is None:
            self._gen_table = _FixedBaseTable(self._gen, self.order.bit_length())
        return self._gen_table

    def _table_blind(self) -> _FixedBaseTable:
        if self._blind_table is None:
            blind = self.blind_generator
            self._blind_table = _FixedBaseTable(blind, self.order.bit_length())
        return self._blind_table

    # interface

    def identity(self) -> CurvePoint:
        return CurvePoint(0, 0, inf=True)

    @property
    def generator(self) -> CurvePoint:
        return self._gen

    @property
    def blind_generator(self) -> CurvePoint:
        if self._blind is None:
            seed = _DST_BLIND + self.encode_element(self._gen)
            self._blind = self.hash_to_element(seed)
        return self._blind

    def is_identity(self, p: GroupElement) -> bool:
        return isinstance(p, CurvePoint) and p.inf

    def add(self, a: GroupElement, b: GroupElement) -> CurvePoint:
        assert isinstance(a, CurvePoint) and isinstance(b, CurvePoint)
        if a.inf:
            return b
        if b.inf:
            return a
        if a.x == b.x:
            if (a.y + b.y) % _Q == 0:
                return self.identity()
            return _j_to_affine(_j_double((a.x, a.y, 1)))
        lam = ((b.y - a.y) * pow(b.x - a.x, -1, _Q)) % _Q
        x3 = (lam * lam - a.x - b.x) % _Q
        y3 = (lam * (a.x - x3) - a.y) % _Q
        return CurvePoint(x3, y3)

    def neg(self, a: GroupElement) -> CurvePoint:
        assert isinstance(a, CurvePoint)
        if a.inf:
            return a
        return CurvePoint(a.x, (-a.y) % _Q)

    def mul(self, k: "Scalar | int", p: GroupElement) -> CurvePoint:
        assert isinstance(p, CurvePoint)
        kv = self._as_int(k)
        if kv == 0 or p.inf:
            return self.identity()
        # 4-bit windowed double-and-add over a per-call table; variable base.
        row = [(0, 0)] * 16
        acc = _J_INF
        for d in range(1, 16):
            acc = _j_add_affine(acc, p.x, p.y)
            aff = _j_to_affine(acc)
            row[d] = (aff.x, aff.y)
        res = _J_INF
        for shift in range((kv.bit_length() + 3) // 4 * 4 - 4, -1, -4):
            if res is not _J_INF:
                res = _j_double(_j_double(_j_double(_j_double(res))))
            d = (kv >> shift) & 0xF
            if d:
                ax, ay = row[d]
                res = _j_add_affine(res, ax, ay)
        return _j_to_affine(res)

    def mul_gen(self, k: "Scalar | int") -> CurvePoint:
        kv = self._as_int(k)
        if kv == 0:
            return self.identity()
        return _j_to_affine(self._table_gen().accumulate(kv, _J_INF))

    def mul_blind(self, k: "Scalar | int") -> CurvePoint:
        kv = self._as_int(k)
        if kv == 0:
            return self.identity()
        return _j_to_affine(self._table_blind().accumulate(kv, _J_INF))

    def dual_mul(self, k_gen: "Scalar | int", k_blind: "Scalar | int") -> CurvePoint:
        kg = self._as_int(k_gen)
        kb = self._as_int(k_blind)
        acc = _J_INF
        if kg:
            acc = self._table_gen().accumulate(kg, acc)
        if kb:
            acc = self._table_blind().accumulate(kb, acc)
        return _j_to_affine(acc)

    def encode_element(self, p: GroupElement) -> bytes:
        assert isinstance(p, CurvePoint)
        if p.inf:
            return b"\x00" * 33
        prefix = 0x03 if p.y & 1 else 0x02
        return bytes([prefix]) + p.x.to_bytes(32, "big")

    def decode_element(self, data: bytes) -> CurvePoint:
        if len(data) != 33:
            raise EncodingError("curve element encoding must be 33 bytes")
        if data == b"\x00" * 33:
            return self.identity()
        prefix = data[0]
        if prefix not in (0x02, 0x03):
            raise EncodingError("bad curve element prefix")
        x = int.from_bytes(data[1:], "big")
        if x >= _Q:
            raise EncodingError("curve x-coordinate out of field range")
        y2 = (x * x * x + 3) % _Q
        y = pow(y2, (_Q + 1) // 4, _Q)
        if (y * y) % _Q != y2:
            raise EncodingError("x-coordinate is not on the curve")
        if (y & 1) != (prefix == 0x03):
            y = _Q - y
        return CurvePoint(x, y)

    def hash_to_element(self, data: bytes) -> CurvePoint:
        """Try-and-increment map to the curve; nothing-up-my-sleeve, so the
        discrete log of the result relative to G is unknown."""
        ctr = 0
        while True:
            digest = hashlib.sha256(_DST_H2G + data + ctr.to_bytes(4, "little")).digest()
            x = int.from_bytes(digest, "big") % _Q
            y2 = (x * x * x + 3) % _Q
            y = pow(y2, (_Q + 1) // 4, _Q)
            if (y * y) % _Q == y2:
                if digest[0] & 1:
                    y = _Q - y
                return CurvePoint(x, y)
            ctr += 1


# ── tiny oracle backend ──────────────────────────────────────────────────────

# Subgroup of prime order 2^31 - 1 inside F_P with P = 46 * (2^31 - 1) + 1.
_T_ORDER = 2**31 - 1
_T_P = 46 * _T_ORDER + 1
_T_COFACTOR = 46
_T_GEN = pow(2, _T_COFACTOR, _T_P)


class TinyGroup(Group):
    """Brute-forceable backend for oracle tests. The group operation is
    field multiplication, so "addition" here multiplies residues and
    "scalar multiplication" is modular exponentiation."""

    name = "tiny31"
    order = _T_ORDER
    scalar_size = 8
    element_size = 8

    def __init__(self):
        self._gen = FieldUnit(_T_GEN)
        self._blind: FieldUnit | None = None

    def _as_int(self, k: "Scalar | int") -> int:
        if isinstance(k, Scalar):
            if k.order != self.order:
                raise ValueError("scalar belongs to a different group")
            return k.value
        return k % self.order

    def identity(self) -> FieldUnit:
        return FieldUnit(1)

    @property
    def generator(self) -> FieldUnit:
        return self._gen

    @property
    def blind_generator(self) -> FieldUnit:
        if self._blind is None:
            seed = _DST_BLIND + self.encode_element(self._gen)
            self._blind = self.hash_to_element(seed)
        return self._blind

    def is_identity(self, p: GroupElement) -> bool:
        return isinstance(p, FieldUnit) and p.v == 1

    def add(self, a: GroupElement, b: GroupElement) -> FieldUnit:
        assert isinstance(a, FieldUnit) and isinstance(b, FieldUnit)
        return FieldUnit((a.v * b.v) % _T_P)

    def neg(self, a: GroupElement) -> FieldUnit:
        assert isinstance(a, FieldUnit)
        return FieldUnit(pow(a.v, -1, _T_P))

    def mul(self, k: "Scalar | int", p: GroupElement) -> FieldUnit:
        assert isinstance(p, FieldUnit)
        return FieldUnit(pow(p.v, self._as_int(k), _T_P))

    def mul_gen(self, k: "Scalar | int") -> FieldUnit:
        return self.mul(k, self._gen)

    def mul_blind(self, k: "Scalar | int") -> FieldUnit:
        return self.mul(k, self.blind_generator)

    def encode_element(self, p: GroupElement) -> bytes:
        assert isinstance(p, FieldUnit)
        return p.v.to_bytes(8, "little")

    def decode_element(self, data: bytes) -> FieldUnit:
        if len(data) != 8:
            raise EncodingError("tiny element encoding must be 8 bytes")
        v = int.from_bytes(data, "little")
        if not 0 < v < _T_P:
            raise EncodingError("tiny element out of field range")
        if pow(v, _T_ORDER, _T_P) != 1:
            raise EncodingError("tiny element outside the prime-order subgroup")
        return FieldUnit(v)

    def hash_to_element(self, data: bytes) -> FieldUnit:
        ctr = 0
        while True:
            digest = hashlib.sha256(_DST_H2G + data + ctr.to_bytes(4, "little")).digest()
            v = int.from_bytes(digest, "big") % _T_P
            e = pow(v, _T_COFACTOR, _T_P)
            if e != 1:
                return FieldUnit(e)
            ctr += 1


# ── shared instances ─────────────────────────────────────────────────────────

_PROD: CurveGroup | None = None
_TINY: TinyGroup | None = None


def production_group() -> CurveGroup:
    """Process-wide curve backend (shares the fixed-base tables)."""
    global _PROD
    if _PROD is None:
        _PROD = CurveGroup()
    return _PROD


def tiny_group() -> TinyGroup:
    """Process-wide oracle backend. Test use only."""
    global _TINY
    if _TINY is None:
        _TINY = TinyGroup()
    return _TINY
