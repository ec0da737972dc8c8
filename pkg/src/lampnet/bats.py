"""BATS code: batched matrix-fountain outer code, RLNC inner code, GE decoder.

The source cuts a block into K packets and emits batches. Each batch mixes
``degree`` distinct source packets through a random ``degree x M`` generator
into M coded packets. Relays recode whatever subset of a batch survived into
fresh random combinations. The sink stacks one K-wide constraint row per
received packet and solves once the rank reaches K.

Batch metadata (degree, contributors, generator) is carried out-of-band,
keyed by ``batch_id``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import galois
from .galois import RowBasis


class InsufficientRank(Exception):
    """The received constraints do not determine the block."""

    def __init__(self, rank, needed, batch_ranks=None):
        super().__init__(f"insufficient rank {rank}/{needed}")
        self.rank = rank
        self.needed = needed
        self.batch_ranks = dict(batch_ranks or {})


@dataclass
class SourceBlock:
    packets: np.ndarray
    true_length: int | None = None

    def __post_init__(self):
        self.packets = np.ascontiguousarray(self.packets, dtype=np.uint8)
        if self.packets.ndim != 2 or self.packets.shape[0] < 1:
            raise ValueError("a source block needs at least one packet")
        if self.true_length is None:
            self.true_length = self.packets.size

    @property
    def K(self):
        return self.packets.shape[0]

    @property
    def packet_len(self):
        return self.packets.shape[1]

    @classmethod
    def from_bytes(cls, data, packet_len):
        if packet_len < 1:
            raise ValueError("packet_len must be positive")
        n = max(1, math.ceil(len(data) / packet_len))
        buf = np.zeros(n * packet_len, dtype=np.uint8)
        buf[: len(data)] = np.frombuffer(bytes(data), dtype=np.uint8)
        return cls(buf.reshape(n, packet_len), true_length=len(data))

    @classmethod
    def random(cls, K, packet_len, rng):
        return cls(rng.integers(0, 256, size=(K, packet_len), dtype=np.uint8))

    def to_bytes(self):
        return self.packets.tobytes()[: self.true_length]

    def __eq__(self, other):
        if not isinstance(other, SourceBlock):
            return NotImplemented
        return (
            self.true_length == other.true_length
            and self.packets.shape == other.packets.shape
            and bool(np.array_equal(self.packets, other.packets))
        )


def robust_soliton(k, c=0.1, delta=0.5, cap=None):
    """Robust soliton pmf over degrees 1..min(k, cap), renormalised."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = np.arange(1, k + 1, dtype=float)
    rho = np.empty(k)
    rho[0] = 1.0 / k
    rho[1:] = 1.0 / (d[1:] * (d[1:] - 1.0))
    R = c * math.log(k / delta) * math.sqrt(k)
    tau = np.zeros(k)
    spike = int(round(k / R)) if R > 0 else k
    spike = min(max(spike, 1), k)
    for i in range(1, spike):
        tau[i - 1] = R / (i * k)
    tau[spike - 1] += R * math.log(R / delta) / k if R > delta else 0.0
    pmf = rho + tau
    limit = k if cap is None else min(k, cap)
    pmf = pmf[:limit]
    return pmf / pmf.sum()


@dataclass(frozen=True)
class BatsParams:
    batch_size: int = 8
    degree_distribution: tuple = (1.0,)
    recode_output_count: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        pmf = tuple(float(p) for p in self.degree_distribution)
        if not pmf or any(p < 0 for p in pmf) or abs(sum(pmf) - 1.0) > 1e-9:
            raise ValueError("degree_distribution must be a pmf summing to 1")
        object.__setattr__(self, "degree_distribution", pmf)
        if self.recode_output_count is None:
            object.__setattr__(self, "recode_output_count", self.batch_size)
        if self.recode_output_count < 1:
            raise ValueError("recode_output_count must be >= 1")

    @classmethod
    def default(cls, K, batch_size=8, c=0.1, delta=0.5, max_degree=64):
        pmf = robust_soliton(K, c=c, delta=delta, cap=max_degree)
        return cls(batch_size=batch_size, degree_distribution=tuple(pmf))

    @classmethod
    def fixed_degree(cls, degree, batch_size=8, recode_output_count=None):
        pmf = [0.0] * degree
        pmf[-1] = 1.0
        return cls(batch_size, tuple(pmf), recode_output_count)

    @classmethod
    def dense(cls, K, batch_size=8, max_degree=64, recode_output_count=None):
        """Every batch touches min(K, max_degree) source packets."""
        return cls.fixed_degree(min(K, max_degree), batch_size, recode_output_count)

    def sample_degree(self, rng, K):
        d = int(rng.choice(len(self.degree_distribution), p=self.degree_distribution)) + 1
        return min(d, K)


@dataclass
class Batch:
    batch_id: int
    degree: int
    contributor_ids: np.ndarray
    generator: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.contributor_ids, dtype=np.int64)
        if len(set(ids.tolist())) != len(ids):
            raise ValueError("contributor ids must be distinct")
        if self.generator.shape[0] != self.degree or len(ids) != self.degree:
            raise ValueError("generator rows must equal the batch degree")
        self.contributor_ids = ids

    @property
    def batch_size(self):
        return self.generator.shape[1]


@dataclass
class CodedPacket:
    batch_id: int
    coeff_vector: np.ndarray
    payload: np.ndarray

    def copy(self):
        return CodedPacket(self.batch_id, self.coeff_vector.copy(), self.payload.copy())


def encode_batch(block, params, rng, batch_id=0, degree=None, contributors=None, generator=None):
    """Draw one batch from ``block``; returns (Batch, list of M CodedPacket).

    ``degree``/``contributors``/``generator`` may be forced for testing.
    """
    M = params.batch_size
    K = block.K
    if contributors is not None:
        contributors = np.asarray(contributors, dtype=np.int64)
        d = len(contributors)
    else:
        d = params.sample_degree(rng, K) if degree is None else min(int(degree), K)
        contributors = np.sort(rng.choice(K, size=d, replace=False)).astype(np.int64)
    if generator is None:
        generator = galois.random_matrix(d, M, rng)
    else:
        generator = np.ascontiguousarray(generator, dtype=np.uint8)
    batch = Batch(batch_id, d, contributors, generator)
    # coded[j] = sum_i generator[i, j] * packet[contributors[i]]
    payloads = galois.matmul(np.ascontiguousarray(generator.T), block.packets[contributors])
    eye = galois.identity(M)
    packets = [CodedPacket(batch_id, eye[j].copy(), payloads[j]) for j in range(M)]
    return batch, packets


class BatsEncoder:
    """Stateful source: hands out successive batches of one block."""

    def __init__(self, block, params, rng):
        self.block = block
        self.params = params
        self.rng = rng
        self.next_id = 0
        self.batches = {}

    def next_batch(self):
        batch, packets = encode_batch(self.block, self.params, self.rng, batch_id=self.next_id)
        self.batches[batch.batch_id] = batch
        self.next_id += 1
        return batch, packets


def recode(batch_buffer, count, rng, coefficients=None):
    """Emit ``count`` random GF(2^8) combinations of a batch's buffered packets."""
    if not batch_buffer:
        raise ValueError("cannot recode an empty buffer")
    bid = batch_buffer[0].batch_id
    plen = len(batch_buffer[0].payload)
    for p in batch_buffer:
        if p.batch_id != bid:
            raise ValueError(f"mixed batch ids in recode buffer: {bid} and {p.batch_id}")
        if len(p.payload) != plen:
            raise ValueError("mixed payload lengths in recode buffer")
    n = len(batch_buffer)
    if coefficients is None:
        coefficients = galois.random_matrix(count, n, rng)
    else:
        coefficients = np.ascontiguousarray(coefficients, dtype=np.uint8)
        if coefficients.shape != (count, n):
            raise ValueError(f"coefficients must be {count}x{n}")
    C = np.stack([p.coeff_vector for p in batch_buffer])
    P = np.stack([p.payload for p in batch_buffer])
    new_c = galois.matmul(coefficients, C)
    new_p = galois.matmul(coefficients, P)
    return [CodedPacket(bid, new_c[i], new_p[i]) for i in range(count)]


def constraint_row(batch, packet, K):
    """K-wide row: generator composed with coeff_vector, scattered to contributors."""
    g = galois.matmul(batch.generator, packet.coeff_vector[:, None])[:, 0]
    row = np.zeros(K, dtype=np.uint8)
    row[batch.contributor_ids] = g
    return row


@dataclass
class BatsDecoder:
    """Incremental whole-block Gaussian-elimination decoder.

    Keeps a reduced basis of augmented rows (K coefficient columns followed
    by the payload), so the block can be read off the moment rank hits K.
    """

    K: int
    packet_len: int
    received: int = 0
    batch_ranks: dict = field(default_factory=dict)

    def __post_init__(self):
        self._basis = RowBasis(self.K, width=self.K + self.packet_len)
        self._batch_basis = {}

    @property
    def rank(self):
        return self._basis.rank

    @property
    def complete(self):
        return self._basis.full

    def add(self, batch, packet):
        """Absorb one packet; return True if it was innovative."""
        self.received += 1
        bb = self._batch_basis.get(batch.batch_id)
        if bb is None:
            bb = self._batch_basis[batch.batch_id] = RowBasis(batch.batch_size)
        bb.add(packet.coeff_vector)
        self.batch_ranks[batch.batch_id] = bb.rank
        if self.complete:
            return False
        row = np.empty(self.K + self.packet_len, dtype=np.uint8)
        row[: self.K] = constraint_row(batch, packet, self.K)
        row[self.K :] = packet.payload
        return self._basis.add(row)

    def result(self, true_length=None):
        if not self.complete:
            raise InsufficientRank(self.rank, self.K, self.batch_ranks)
        rows = self._basis.rows()
        piv = self._basis.pivots()
        out = np.empty((self.K, self.packet_len), dtype=np.uint8)
        out[piv] = rows[:, self.K :]
        return SourceBlock(out, true_length=true_length)


def decode(received, K, true_length=None):
    """Decode a sequence of (Batch, CodedPacket) pairs into a SourceBlock.

    Raises :class:`InsufficientRank` carrying the achieved rank and the
    per-batch coefficient-vector ranks.
    """
    received = list(received)
    if not received:
        raise InsufficientRank(0, K)
    plen = len(received[0][1].payload)
    dec = BatsDecoder(K, plen)
    for batch, pkt in received:
        dec.add(batch, pkt)
    return dec.result(true_length)


def stacked_constraints(received, K):
    """The K-wide constraint matrix for a set of received packets."""
    if not received:
        return np.zeros((0, K), dtype=np.uint8)
    return np.stack([constraint_row(b, p, K) for b, p in received])
