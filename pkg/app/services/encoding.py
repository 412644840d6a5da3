"""
Succinct trit encodings of integer sets and the reversible programs that
operate on them.

Basic encoding of S = {y1 < ... < yk} over [1, N]: the binary deltas
(y1)_2 2 (y2 - y1)_2 2 ... (yk - y(k-1))_2 2, padded with zeros to
capacity(N, k) trits. The efficient encoding splits a sequence into blocks
whose sizes follow the binary expansion of its length and encodes each
block as a set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from app.config import settings
from app.exceptions import (
    DuplicateElement,
    ElementOutOfRange,
    EmptySet,
    InvalidK,
    MalformedEncoding,
    NotDisjoint,
)
from app.services.circuits import NOT, PLUS1, PLUS2, ProgramBuilder, equals
from app.services.revcore import Program, Semantics, Values
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def bitlen(n: int) -> int:
    return max(1, int(n).bit_length())


def element_width(N: int) -> int:
    """Bits of an element register over [1, N]"""
    return bitlen(N)


def _floor_k_log(N: int, k: int, mult: int) -> int:
    # floor(mult * k * log2(N/k + 1)) computed exactly
    ratio = (N + k) ** (mult * k) // k ** (mult * k)
    return ratio.bit_length() - 1


def capacity(N: int, k: int) -> int:
    """Trits reserved for a basic encoding of k elements of [1, N]"""
    if not 1 <= k <= N:
        raise InvalidK(f"need 1 <= k <= N, got k={k}, N={N}")
    return _floor_k_log(N, k, 1) + 2 * k


def eff_bound(N: int, k: int) -> int:
    """Upper bound on the total trits of an efficient encoding"""
    if not 1 <= k <= N:
        raise InvalidK(f"need 1 <= k <= N, got k={k}, N={N}")
    return _floor_k_log(N, k, 2) + 8 * k


def block_sizes(k: int) -> Tuple[int, ...]:
    """Powers of two of the binary expansion of k, largest first"""
    if k < 1:
        raise InvalidK(f"k must be positive, got {k}")
    return tuple(1 << a for a in range(k.bit_length() - 1, -1, -1) if (k >> a) & 1)


def eff_layout(N: int, k: int) -> Tuple[int, ...]:
    """Trit widths of the blocks of an efficient encoding of k elements"""
    return tuple(capacity(N, size) for size in block_sizes(k))


@dataclass(frozen=True)
class TritString:
    cells: Tuple[int, ...]

    @property
    def capacity(self) -> int:
        return len(self.cells)

    def __str__(self) -> str:
        return "".join(str(c) for c in self.cells)

    @classmethod
    def parse(cls, text: str) -> "TritString":
        if any(ch not in "012" for ch in text):
            raise MalformedEncoding(f"not a trit string: {text!r}")
        return cls(tuple(int(ch) for ch in text))


@dataclass(frozen=True)
class EffEncoding:
    N: int
    sizes: Tuple[int, ...]
    blocks: Tuple[TritString, ...]

    @property
    def total_trits(self) -> int:
        return sum(b.capacity for b in self.blocks)

    @property
    def cells(self) -> Tuple[int, ...]:
        return tuple(c for b in self.blocks for c in b.cells)


def _raw_trits(elements: Sequence[int]) -> List[int]:
    trits: List[int] = []
    prev = 0
    for y in elements:
        trits.extend(int(ch) for ch in bin(y - prev)[2:])
        trits.append(2)
        prev = y
    return trits


def encode_basic(N: int, S: Iterable[int]) -> TritString:
    elements = list(S)
    if not elements:
        raise EmptySet("cannot encode the empty set")
    if len(set(elements)) != len(elements):
        raise DuplicateElement(f"repeated elements in {elements}")
    for y in elements:
        if not 1 <= y <= N:
            raise ElementOutOfRange(f"{y} outside [1, {N}]")
    trits = _raw_trits(sorted(elements))
    cap = capacity(N, len(elements))
    return TritString(tuple(trits + [0] * (cap - len(trits))))


def decode_basic(N: int, k: int, t: TritString) -> Set[int]:
    cells = t.cells if isinstance(t, TritString) else tuple(t)
    elements: List[int] = []
    block: List[int] = []
    prev = 0
    pos = 0
    while len(elements) < k:
        if pos >= len(cells):
            raise MalformedEncoding(f"found {len(elements)} of {k} blocks")
        d = cells[pos]
        pos += 1
        if d == 2:
            if not block:
                raise MalformedEncoding(f"empty block before separator at {pos - 1}")
            prev += int("".join(map(str, block)), 2)
            elements.append(prev)
            block = []
        else:
            if not block and d == 0:
                raise MalformedEncoding(f"leading zero at {pos - 1}")
            block.append(d)
    if any(cells[pos:]):
        raise MalformedEncoding("nonzero trits after the last block")
    if prev > N:
        raise MalformedEncoding(f"element {prev} exceeds N={N}")
    return set(elements)


def encode_eff(N: int, Z: Sequence[int]) -> EffEncoding:
    if len(set(Z)) != len(Z):
        raise DuplicateElement(f"repeated elements in {list(Z)}")
    if not Z:
        raise EmptySet("cannot encode the empty sequence")
    sizes = block_sizes(len(Z))
    blocks = []
    start = 0
    for size in sizes:
        blocks.append(encode_basic(N, Z[start:start + size]))
        start += size
    return EffEncoding(N, sizes, tuple(blocks))


def decode_eff(N: int, k: int, cells: Sequence[int]) -> List[Set[int]]:
    """Blocks of a concatenated efficient encoding, decoded as sets"""
    out = []
    start = 0
    for size, width in zip(block_sizes(k), eff_layout(N, k)):
        out.append(decode_basic(N, size, TritString(tuple(cells[start:start + width]))))
        start += width
    return out


# Reversible programs


def _materialize(N: int, k: int, materialize: Optional[bool]) -> bool:
    if materialize is not None:
        return materialize
    return capacity(N, k) <= settings.GATE_LEVEL_MAX_CELLS


def _to_int(bits: Sequence[int]) -> int:
    return sum(b << i for i, b in enumerate(bits))


def _to_bits(value: int, width: int) -> List[int]:
    return [(value >> i) & 1 for i in range(width)]


def _scan_blocks(cells: Sequence[int], k: int, w: int) -> List[int]:
    """Block values exactly as the gate-level scan accumulates them"""
    mask = (1 << w) - 1
    cmask = (1 << bitlen(k)) - 1
    blocks = [0] * k
    cnt = 0
    for d in cells:
        if d == 2:
            cnt = (cnt + 1) & cmask
        elif cnt < k:
            b = blocks[cnt]
            blocks[cnt] = (((b << 1) | (b >> (w - 1))) & mask) ^ d
    return blocks


def contains_parity(N: int, k: int, cells: Sequence[int], x: int) -> int:
    """Output flip of Contains(N, k) on arbitrary register contents"""
    w = element_width(N)
    mask = (1 << w) - 1
    y = 0
    hits = 0
    for b in _scan_blocks(cells, k, w):
        y = (y + b) & mask
        hits += y == x
    return hits & 1


@lru_cache(maxsize=None)
def _scan_prog(N: int, k: int, j: int, materialize: bool) -> Program:
    cap = capacity(N, k)
    w = element_width(N)
    b = ProgramBuilder(f"scan[{N},{k},{j}]", materialize)
    enc = b.cells(b.param("enc", cap, 3))
    blk = b.cells(b.param("block", w))
    cnt = b.cells(b.param("count", bitlen(k)))
    flag = b.cells(b.ancilla("flag", 1))[0]
    in_block = equals(cnt, j - 1)
    for p in range(cap):
        b.mc_gate(flag, NOT, [*in_block, (enc[p], 0)])
        b.mc_gate(flag, NOT, [*in_block, (enc[p], 1)])
        for i in range(w - 1, 0, -1):
            b.swap(blk[i], blk[i - 1], [(flag, 1)])
        b.gate(blk[0], NOT, [(flag, 1), (enc[p], 1)])
        b.mc_gate(flag, NOT, [*in_block, (enc[p], 1)])
        b.mc_gate(flag, NOT, [*in_block, (enc[p], 0)])
        b.increment(cnt, [(enc[p], 2)])
    return b.build()


@lru_cache(maxsize=None)
def contains_prog(N: int, k: int, materialize: Optional[bool] = None) -> Program:
    """
    Contains(N, k): out ^= [x in S] for enc = encode_basic(N, S), |S| = k.

    For each block j the scan rebuilds the j-th delta, adds it into the
    running prefix sum and compares; a second pass subtracts the deltas
    again so the prefix register ends at zero.
    """
    if not 1 <= k <= N:
        raise InvalidK(f"need 1 <= k <= N, got k={k}, N={N}")
    mat = _materialize(N, k, materialize)
    cap = capacity(N, k)
    w = element_width(N)
    b = ProgramBuilder(f"contains[{N},{k}]", mat)
    enc = b.param("enc", cap, 3)
    x = b.cells(b.param("x", w))
    out = b.cells(b.param("out", 1))[0]
    prefix = b.cells(b.ancilla("prefix", w))
    blk = b.ancilla("block", w)
    cnt = b.ancilla("count", bitlen(k))
    views = dict(enc=b.view(enc), block=b.view(blk), count=b.view(cnt))
    block = b.cells(blk)

    for j in range(1, k + 1):
        scan = _scan_prog(N, k, j, mat)
        b.call(scan, **views)
        b.add_register(prefix, block)
        b.call(scan, inverse=True, **views)
        b.xor_register(prefix, x)
        b.flip_if_equal(out, prefix, 0)
        b.xor_register(prefix, x)
    for j in range(k, 0, -1):
        scan = _scan_prog(N, k, j, mat)
        b.call(scan, **views)
        b.sub_register(prefix, block)
        b.call(scan, inverse=True, **views)

    def flip(v: Values) -> None:
        v["out"][0] ^= contains_parity(N, k, v["enc"], _to_int(v["x"]))

    return b.build(Semantics(flip, flip))


def _convert_trits(x: int) -> List[int]:
    return [int(ch) for ch in bin(x)[2:]] + [2] if x else []


@lru_cache(maxsize=None)
def convert_prog(N: int, materialize: Optional[bool] = None) -> Program:
    """Convert(N): out += encode_basic(N, {x}) on a zero trit register"""
    mat = _materialize(N, 1, materialize)
    cap = capacity(N, 1)
    w = element_width(N)
    b = ProgramBuilder(f"convert[{N}]", mat)
    x = b.cells(b.param("x", w))
    out = b.cells(b.param("out", cap, 3))
    flag = b.cells(b.ancilla("flag", 1))[0]
    for length in range(1, w + 1):
        top = [(x[length - 1], 1), *[(c, 0) for c in x[length:]]]
        b.mc_gate(flag, NOT, top)
        for pos in range(length):
            b.gate(out[pos], PLUS1, [(flag, 1), (x[length - 1 - pos], 1)])
        b.gate(out[length], PLUS2, [(flag, 1)])
        b.mc_gate(flag, NOT, top)

    def shift(sign: int):
        def apply(v: Values) -> None:
            cells = v["out"]
            for i, d in enumerate(_convert_trits(_to_int(v["x"]))):
                cells[i] = (cells[i] + sign * d) % 3
        return apply

    return b.build(Semantics(shift(1), shift(-1)))


@lru_cache(maxsize=None)
def _select_prog(N: int, k1: int, k2: int, j: int, materialize: bool) -> Program:
    # z ^= j-th smallest element of S1 u S2, p ^= the (j-1)-th
    K = k1 + k2
    w = element_width(N)
    c1 = contains_prog(N, k1)
    c2 = contains_prog(N, k2)
    b = ProgramBuilder(f"select[{N},{k1},{k2},{j}]", materialize)
    e1 = b.param("e1", capacity(N, k1), 3)
    e2 = b.param("e2", capacity(N, k2), 3)
    z = b.cells(b.param("z", w))
    p = b.cells(b.param("p", w))
    vslot = b.ancilla("value", w)
    mslot = b.ancilla("member", 1)
    rank = b.cells(b.ancilla("rank", bitlen(K)))
    value = b.cells(vslot)
    member = b.cells(mslot)[0]
    q1 = dict(enc=b.view(e1), x=b.view(vslot), out=b.view(mslot))
    q2 = dict(enc=b.view(e2), x=b.view(vslot), out=b.view(mslot))
    for v in range(1, N + 1):
        b.xor_const(value, v)
        b.call(c1, **q1)
        b.call(c2, **q2)
        b.increment(rank, [(member, 1)])
        b.xor_const(z, v, [*equals(rank, j), (member, 1)])
        if j >= 2:
            b.xor_const(p, v, [*equals(rank, j - 1), (member, 1)])
        b.call(c2, inverse=True, **q2)
        b.call(c1, inverse=True, **q1)
        b.xor_const(value, v)
    b.xor_const(rank, K)

    def select(v: Values) -> None:
        found = [
            u for u in range(1, N + 1)
            if contains_parity(N, k1, v["e1"], u) ^ contains_parity(N, k2, v["e2"], u)
        ]
        if len(found) != K:
            raise NotDisjoint(f"union of sizes {k1}+{k2} has {len(found)} distinct members")
        zv = _to_int(v["z"]) ^ found[j - 1]
        v["z"] = _to_bits(zv, w)
        if j >= 2:
            v["p"] = _to_bits(_to_int(v["p"]) ^ found[j - 2], w)

    return b.build(Semantics(select, select))


@lru_cache(maxsize=None)
def _locate_prog(N: int, K: int, j: int, materialize: bool) -> Program:
    # cursor ^= position just after the (j-1)-th separator of out
    cap = capacity(N, K)
    b = ProgramBuilder(f"locate[{N},{K},{j}]", materialize)
    out = b.cells(b.param("out", cap, 3))
    cursor = b.cells(b.param("cursor", bitlen(cap)))
    cnt = b.cells(b.ancilla("count", bitlen(K)))
    at = equals(cnt, j - 1)
    for q in range(cap):
        if q > 0:
            b.xor_const(cursor, q, [*at, (out[q - 1], 2)])
        b.increment(cnt, [(out[q], 2)])
    with b.inverted():
        for q in range(cap):
            b.increment(cnt, [(out[q], 2)])
    return b.build()


@lru_cache(maxsize=None)
def _normalize_prog(N: int, materialize: bool) -> Program:
    # (t, length) ^= (d shifted so its top set bit lands at w-1, bitlen(d))
    w = element_width(N)
    b = ProgramBuilder(f"normalize[{N}]", materialize)
    d = b.cells(b.param("d", w))
    t = b.cells(b.param("t", w))
    length = b.cells(b.param("length", bitlen(w)))
    flag = b.cells(b.ancilla("flag", 1))[0]
    for l in range(1, w + 1):
        top = [(d[l - 1], 1), *[(c, 0) for c in d[l:]]]
        b.mc_gate(flag, NOT, top)
        b.xor_const(length, l, [(flag, 1)])
        for i in range(l):
            b.gate(t[i + w - l], NOT, [(flag, 1), (d[i], 1)])
        b.mc_gate(flag, NOT, top)
    return b.build()


@lru_cache(maxsize=None)
def _write_prog(N: int, K: int, materialize: bool) -> Program:
    # out[cursor:] += digits of t (top first) and a separator after length digits
    cap = capacity(N, K)
    w = element_width(N)
    wc = bitlen(cap)
    b = ProgramBuilder(f"write[{N},{K}]", materialize)
    cursor = b.cells(b.param("cursor", wc))
    t = b.cells(b.param("t", w))
    length = b.cells(b.param("length", bitlen(w)))
    out = b.cells(b.param("out", cap, 3))
    for q in range(cap):
        for pos in range(w + 1):
            start = q - pos
            if start < 0:
                break
            at = equals(cursor, start)
            if pos < w:
                b.mc_gate(out[q], PLUS1, [*at, (t[w - 1 - pos], 1)])
            if pos >= 1:
                b.mc_gate(out[q], PLUS2, [*at, *equals(length, pos)])
    return b.build()


@lru_cache(maxsize=None)
def union_prog(N: int, k1: int, k2: int, materialize: Optional[bool] = None) -> Program:
    """
    Union(N, k1, k2): out += encode_basic(N, S1 u S2) for disjoint S1, S2.

    Elements are appended in rank order. The j-th element and its
    predecessor are recomputed from the inputs by membership queries, the
    write position is recovered from the separators already in out, and
    every intermediate is uncomputed before the next rank.
    """
    K = k1 + k2
    if k1 < 1 or k2 < 1 or K > N:
        raise InvalidK(f"need k1, k2 >= 1 and k1 + k2 <= N, got {k1}, {k2}, N={N}")
    mat = _materialize(N, K, materialize)
    cap = capacity(N, K)
    w = element_width(N)
    b = ProgramBuilder(f"union[{N},{k1},{k2}]", mat)
    e1 = b.param("e1", capacity(N, k1), 3)
    e2 = b.param("e2", capacity(N, k2), 3)
    out = b.param("out", cap, 3)
    zs = b.ancilla("z", w)
    ps = b.ancilla("p", w)
    ds = b.ancilla("d", w)
    ts = b.ancilla("t", w)
    ls = b.ancilla("length", bitlen(w))
    cs = b.ancilla("cursor", bitlen(cap))
    z, p, d = b.cells(zs), b.cells(ps), b.cells(ds)
    normalize = _normalize_prog(N, mat)
    write = _write_prog(N, K, mat)
    sel_views = dict(e1=b.view(e1), e2=b.view(e2), z=b.view(zs), p=b.view(ps))
    loc_views = dict(out=b.view(out), cursor=b.view(cs))
    norm_views = dict(d=b.view(ds), t=b.view(ts), length=b.view(ls))
    write_views = dict(cursor=b.view(cs), t=b.view(ts), length=b.view(ls), out=b.view(out))
    for j in range(1, K + 1):
        select = _select_prog(N, k1, k2, j, mat)
        locate = _locate_prog(N, K, j, mat)
        b.call(select, **sel_views)
        b.xor_register(d, z)
        b.sub_register(d, p)
        b.call(locate, **loc_views)
        b.call(normalize, **norm_views)
        b.call(write, **write_views)
        b.call(normalize, inverse=True, **norm_views)
        b.call(locate, inverse=True, **loc_views)
        b.add_register(d, p)
        b.xor_register(d, z)
        b.call(select, inverse=True, **sel_views)

    def merged(v: Values) -> List[int]:
        s1 = decode_basic(N, k1, TritString(tuple(v["e1"])))
        s2 = decode_basic(N, k2, TritString(tuple(v["e2"])))
        if s1 & s2:
            raise NotDisjoint(f"inputs share {sorted(s1 & s2)}")
        return list(encode_basic(N, s1 | s2).cells)

    def shift(sign: int):
        def apply(v: Values) -> None:
            v["out"] = [(o + sign * t) % 3 for o, t in zip(v["out"], merged(v))]
        return apply

    return b.build(Semantics(shift(1), shift(-1)))


def block_params(k: int) -> Tuple[str, ...]:
    return tuple(f"b{i}" for i in range(len(block_sizes(k))))


@lru_cache(maxsize=None)
def eff_contains_prog(N: int, k: int, materialize: Optional[bool] = None) -> Program:
    """EffContains(N, k): out ^= [x occurs in any block of the efficient encoding]"""
    if not 1 <= k <= N:
        raise InvalidK(f"need 1 <= k <= N, got k={k}, N={N}")
    sizes = block_sizes(k)
    mat = _materialize(N, sizes[0], materialize)
    w = element_width(N)
    b = ProgramBuilder(f"eff_contains[{N},{k}]", mat)
    blocks = [b.param(name, capacity(N, size), 3) for name, size in zip(block_params(k), sizes)]
    xs = b.param("x", w)
    out = b.cells(b.param("out", 1))[0]
    hs = b.ancilla("hits", len(sizes))
    hits = b.cells(hs)
    queries = [
        (contains_prog(N, size), dict(enc=b.view(blk), x=b.view(xs), out=b.view(hs, i, 1)))
        for i, (blk, size) in enumerate(zip(blocks, sizes))
    ]
    for prog, views in queries:
        b.call(prog, **views)
    b.gate(out, NOT)
    b.mc_gate(out, NOT, [(h, 0) for h in hits])
    for prog, views in reversed(queries):
        b.call(prog, inverse=True, **views)

    def flip(v: Values) -> None:
        x = _to_int(v["x"])
        hit = 0
        for name, size in zip(block_params(k), sizes):
            hit |= contains_parity(N, size, v[name], x)
        v["out"][0] ^= hit

    return b.build(Semantics(flip, flip))


def union_ancilla_bound(N: int, K: int) -> float:
    return settings.UNION_ANCILLA_ALPHA * (K * math.log2(N / K) + K + math.log2(N)) + settings.UNION_ANCILLA_BETA


def eff_contains_ancilla_bound(N: int) -> float:
    return settings.EFF_CONTAINS_ANCILLA_ALPHA * math.log2(N) + settings.EFF_CONTAINS_ANCILLA_BETA
