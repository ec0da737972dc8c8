"""Systematic random linear erasure code for the I2V broadcast.

Packets 0..k-1 of a block are the data payloads verbatim; packets k..k+r-1
are GF(2^8) combinations of them. The combination coefficients are
regenerated from the seed carried in every header, so a receiver needs
nothing but the packets it caught.

Header (big-endian, 21 bytes)::

    block_id u32 | index u16 | kind u8 | k u16 | r u16 | seed u64 | length u16
"""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels, galois

HEADER = struct.Struct(">IHBHHQH")
HEADER_LEN = HEADER.size

SYSTEMATIC = 0
CHECK = 1
_KIND_NAMES = {SYSTEMATIC: "systematic", CHECK: "check"}


class EccInsufficient(Exception):
    def __init__(self, missing, rank):
        super().__init__(f"cannot recover {missing} missing packet(s); check rank {rank}")
        self.missing = missing
        self.rank = rank


@dataclass(frozen=True)
class EccBlockParams:
    k: int
    r: int = 0
    coefficient_seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.r < 0:
            raise ValueError(f"need k >= 1 and r >= 0, got k={self.k} r={self.r}")
        if self.k > 0xFFFF or self.r > 0xFFFF:
            raise ValueError("k and r must fit in 16 bits")

    @classmethod
    def with_ratio(cls, k, ratio, seed=0):
        return cls(k, int(round(k * ratio)), seed)


@functools.lru_cache(maxsize=256)
def check_coefficients(params):
    """r x k coefficient matrix, nonzero entries, regenerated from the seed."""
    rng = np.random.Generator(np.random.PCG64(params.coefficient_seed))
    c = rng.integers(1, 256, size=(params.r, params.k), dtype=np.uint8)
    c.setflags(write=False)
    return c


@dataclass
class EccPacket:
    block_id: int
    index: int
    kind: int
    payload: bytes
    k: int
    r: int
    seed: int

    @property
    def kind_name(self):
        return _KIND_NAMES[self.kind]

    def to_bytes(self):
        head = HEADER.pack(
            self.block_id, self.index, self.kind, self.k, self.r, self.seed, len(self.payload)
        )
        return head + bytes(self.payload)

    @classmethod
    def from_bytes(cls, raw):
        if len(raw) < HEADER_LEN:
            raise ValueError(f"packet shorter than {HEADER_LEN}-byte header")
        block_id, index, kind, k, r, seed, length = HEADER.unpack_from(raw)
        body = bytes(raw[HEADER_LEN : HEADER_LEN + length])
        if len(body) != length:
            raise ValueError(f"truncated payload: header says {length}, got {len(body)}")
        if kind not in _KIND_NAMES:
            raise ValueError(f"unknown packet kind {kind}")
        return cls(block_id, index, kind, body, k, r, seed)

    def params(self):
        return EccBlockParams(self.k, self.r, self.seed)


def _as_rows(data):
    rows = [np.frombuffer(bytes(d), dtype=np.uint8) for d in data]
    if len({len(r) for r in rows}) > 1:
        raise ValueError("all payloads in a block must have equal length")
    return np.stack(rows)


def ecc_encode(data, params, block_id=0):
    """Encode k equal-length payloads into k + r EccPackets."""
    if len(data) != params.k:
        raise ValueError(f"expected {params.k} payloads, got {len(data)}")
    D = _as_rows(data)
    out = [
        EccPacket(block_id, i, SYSTEMATIC, bytes(data[i]), params.k, params.r, params.coefficient_seed)
        for i in range(params.k)
    ]
    if params.r:
        checks = galois.matmul(check_coefficients(params), D)
        for j in range(params.r):
            out.append(
                EccPacket(
                    block_id,
                    params.k + j,
                    CHECK,
                    checks[j].tobytes(),
                    params.k,
                    params.r,
                    params.coefficient_seed,
                )
            )
    return out


def ecc_decode(received, params):
    """Recover the k data payloads from any received subset of one block.

    Raises :class:`EccInsufficient` when the surviving check equations
    cannot pin down every missing data packet.
    """
    k = params.k
    systematic = {}
    checks = {}
    length = None
    for p in received:
        if length is None:
            length = len(p.payload)
        elif len(p.payload) != length:
            raise ValueError("mixed payload lengths within a block")
        if p.index < k:
            systematic[p.index] = p.payload
        elif p.index < k + params.r:
            checks[p.index - k] = p.payload
    missing = [i for i in range(k) if i not in systematic]
    if not missing:
        return [bytes(systematic[i]) for i in range(k)]
    if len(checks) < len(missing) or length is None:
        raise EccInsufficient(len(missing), _check_rank(params, checks, missing))

    C = check_coefficients(params)
    rows = sorted(checks)
    s = len(missing)
    aug = np.zeros((len(rows), s + length), dtype=np.uint8)
    known = [i for i in range(k) if i in systematic]
    K_known = (
        np.stack([np.frombuffer(systematic[i], dtype=np.uint8) for i in known]) if known else None
    )
    for n, j in enumerate(rows):
        aug[n, :s] = C[j, missing]
        y = np.frombuffer(checks[j], dtype=np.uint8).copy()
        if known:
            # strip the contribution of data packets we already hold
            y ^= galois.matmul(C[j : j + 1, known], K_known)[0]
        aug[n, s:] = y
    rank, piv = _kernels.rref(aug, s)
    if rank < s:
        raise EccInsufficient(s, int(rank))
    recovered = {missing[int(piv[i])]: aug[i, s:].tobytes() for i in range(s)}
    return [bytes(systematic[i]) if i in systematic else recovered[i] for i in range(k)]


def _check_rank(params, checks, missing):
    if not checks or not missing:
        return 0
    C = check_coefficients(params)
    return galois.rank(C[np.ix_(sorted(checks), missing)])


def decodable(params, received_indices):
    """True iff a block with these surviving indices can be decoded."""
    k = params.k
    got = set(received_indices)
    missing = [i for i in range(k) if i not in got]
    if not missing:
        return True
    check_rows = sorted(i - k for i in got if k <= i < k + params.r)
    if len(check_rows) < len(missing):
        return False
    C = check_coefficients(params)
    return galois.rank(C[np.ix_(check_rows, missing)]) == len(missing)


def delivery_fraction(params, erasure, blocks, rng, use_ecc=True):
    """Fraction of data packets delivered to the application under i.i.d. erasure.

    A block that decodes delivers all k packets; otherwise only its
    surviving systematic packets reach the application.
    """
    k, n = params.k, params.k + (params.r if use_ecc else 0)
    delivered = 0
    for _ in range(blocks):
        alive = np.flatnonzero(rng.random(n) >= erasure)
        if use_ecc and decodable(params, alive):
            delivered += k
        else:
            delivered += int(np.count_nonzero(alive < k))
    return delivered / (k * blocks)
