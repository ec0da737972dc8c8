"""Seeded discrete-event simulation of a linear lamppost chain.

Nodes sit at indices 0..n-1 and talk to their immediate neighbours. Every
directed link serialises packets FIFO at its bandwidth, adds a fixed
latency, and drops each packet independently with its loss probability.
When a link goes down, the upstream node reaches one position further over
a "skip" link whose parameters come from the scenario.

Time is kept in integer microseconds; the public API speaks milliseconds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bats as bats_mod

UP = "up"
DOWN = "down"

USEC_PER_MS = 1000


class Unreachable(Exception):
    pass


class Partition(Unreachable):
    """Link failure left no way around the broken segment."""


def to_us(ms):
    return int(round(ms * USEC_PER_MS))


def to_ms(us):
    return us / USEC_PER_MS


@dataclass
class LinkState:
    src: int
    dst: int
    loss_prob: float = 0.0
    bandwidth: float = 100.0  # Mbit/s, i.e. bits per microsecond
    latency: float = 0.0  # ms
    status: str = UP

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob {self.loss_prob} outside [0, 1]")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.latency < 0:
            raise ValueError("latency must be non-negative")
        if self.status not in (UP, DOWN):
            raise ValueError(f"bad link status {self.status!r}")

    @property
    def up(self):
        return self.status == UP

    def serialization_us(self, nbytes):
        return math.ceil(nbytes * 8 / self.bandwidth)

    @property
    def latency_us(self):
        return to_us(self.latency)


@dataclass
class RouteTable:
    """next_hop[(node, dst)] for every reachable ordered pair."""

    n: int
    next_hop: dict = field(default_factory=dict)
    hop_reach: dict = field(default_factory=dict)

    def path(self, src, dst):
        if src == dst:
            return [src]
        out = [src]
        cur = src
        while cur != dst:
            nxt = self.next_hop.get((cur, dst))
            if nxt is None:
                raise Unreachable(f"no route from {src} to {dst}")
            out.append(nxt)
            cur = nxt
        return out

    def reachable(self, src, dst):
        try:
            self.path(src, dst)
        except Unreachable:
            return False
        return True

    def hops(self, src, dst):
        return len(self.path(src, dst)) - 1


class Chain:
    """Linear topology with neighbour links and optional skip-one links."""

    def __init__(self, n, links, skip_links=None, recovery=True, positions=None):
        if n < 1:
            raise ValueError("a chain needs at least one node")
        self.n = n
        self.links = {(l.src, l.dst): l for l in links}
        self.skip_links = {(l.src, l.dst): l for l in (skip_links or [])}
        self.recovery = recovery
        self.positions = list(positions) if positions is not None else list(range(n))
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("chain positions must strictly increase with index")
        for (a, b) in self.links:
            if abs(a - b) != 1 or not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"link {a}->{b} is not between neighbours")
        for (a, b) in self.skip_links:
            if abs(a - b) != 2 or not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"skip link {a}->{b} must span exactly two positions")

    @classmethod
    def linear(
        cls,
        n,
        loss=0.0,
        bandwidth=100.0,
        latency=0.0,
        skip_loss=None,
        skip_bandwidth=None,
        skip_latency=None,
        recovery=True,
        spacing=1.0,
    ):
        links = []
        for i in range(n - 1):
            links.append(LinkState(i, i + 1, loss, bandwidth, latency))
            links.append(LinkState(i + 1, i, loss, bandwidth, latency))
        skips = []
        if skip_bandwidth is not None:
            sl = loss if skip_loss is None else skip_loss
            sd = latency if skip_latency is None else skip_latency
            for i in range(n - 2):
                skips.append(LinkState(i, i + 2, sl, skip_bandwidth, sd))
                skips.append(LinkState(i + 2, i, sl, skip_bandwidth, sd))
        return cls(n, links, skips, recovery, positions=[i * spacing for i in range(n)])

    def copy(self):
        return Chain(
            self.n,
            [replace(l) for l in self.links.values()],
            [replace(l) for l in self.skip_links.values()],
            self.recovery,
            self.positions,
        )

    def link(self, a, b):
        if abs(a - b) == 1:
            return self.links.get((a, b))
        return self.skip_links.get((a, b))

    def set_status(self, a, b, status, both=True):
        pairs = [(a, b), (b, a)] if both else [(a, b)]
        for p in pairs:
            l = self.links.get(p) or self.skip_links.get(p)
            if l is not None:
                l.status = status

    def fail_node(self, i):
        for j in (i - 2, i - 1, i + 1, i + 2):
            self.set_status(i, j, DOWN)

    def route_table(self):
        table = RouteTable(self.n)
        for src in range(self.n):
            reach = 1
            for dst in range(self.n):
                if src == dst:
                    continue
                step = 1 if dst > src else -1
                nb = self.links.get((src, src + step))
                if nb is not None and nb.up:
                    table.next_hop[(src, dst)] = src + step
                    continue
                if not self.recovery:
                    continue
                far = src + 2 * step
                if (far - dst) * step > 0:
                    continue  # skipping would overshoot the destination
                sk = self.skip_links.get((src, far))
                if sk is not None and sk.up:
                    table.next_hop[(src, dst)] = far
                    reach = 2
            table.hop_reach[src] = reach
        return table

    def path_links(self, src, dst, table=None):
        table = table or self.route_table()
        p = table.path(src, dst)
        return [self.link(a, b) for a, b in zip(p, p[1:])]

    def path_bandwidth(self, src, dst, table=None):
        """Bottleneck bandwidth along the route, inf for src == dst, 0 if cut."""
        if src == dst:
            return math.inf
        try:
            links = self.path_links(src, dst, table)
        except Unreachable:
            return 0.0
        return min(l.bandwidth for l in links)


def fail_link(chain, failed):
    """Take ``failed`` (both directions) down and return the recovered routes.

    Raises :class:`Partition` when the chain is cut with no skip link
    around the failure.
    """
    a, b = failed.src, failed.dst
    chain.set_status(a, b, DOWN)
    table = chain.route_table()
    lo, hi = min(a, b), max(a, b)
    for s, d in ((0, chain.n - 1), (chain.n - 1, 0)):
        if chain.n > 1 and not table.reachable(s, d):
            raise Partition(f"link {lo}<->{hi} failed and no further node is reachable")
    return table


recover_route = fail_link


@dataclass
class DeliveryRecord:
    src: int
    dst: int
    sent_ms: float
    arrival_ms: float | None
    dropped_on: tuple | None = None
    hops: int = 0

    @property
    def delivered(self):
        return self.arrival_ms is not None


@dataclass
class GoodputRecord:
    coding: str
    hops: int
    delivered_bytes: int
    total_bytes: int
    elapsed_ms: float
    packets_sent: int
    completed: bool
    timed_out: bool = False
    batches: int = 0
    rounds: int = 0
    decoded_ok: bool | None = None

    @property
    def goodput_mbps(self):
        if self.elapsed_ms <= 0:
            return 0.0
        return self.delivered_bytes * 8 / (self.elapsed_ms * 1000)

    @property
    def delivered_fraction(self):
        return self.delivered_bytes / self.total_bytes if self.total_bytes else 1.0


class Simulator:
    """Event loop over a :class:`Chain`; single-threaded and deterministic.

    Loss draws come from ``rng`` in transmit order, so identical inputs give
    identical event logs.
    """

    EVENT_KINDS = ("transmit", "deliver", "drop", "link_change", "timer")

    def __init__(self, chain, rng, trace=False):
        self.chain = chain
        self.rng = rng
        self.now = 0
        self._seq = 0
        self._queue = []
        self._busy = {}
        self.trace = trace
        self.log = []
        self.table = chain.route_table()

    # -- event queue --------------------------------------------------
    def schedule(self, time_us, kind, fn=None, *args):
        if time_us < self.now:
            raise ValueError(f"cannot schedule {kind} at {time_us}us before now={self.now}us")
        if kind not in self.EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        heapq.heappush(self._queue, (time_us, self._seq, kind, fn, args))
        self._seq += 1

    def run(self, until_us=None, stop=None):
        q = self._queue
        while q:
            if until_us is not None and q[0][0] > until_us:
                break
            t, _, kind, fn, args = heapq.heappop(q)
            self.now = t
            if fn is not None:
                fn(*args)
            if stop is not None and stop():
                break

    def record(self, kind, src, dst, nbytes, outcome):
        if self.trace:
            self.log.append((self.now, kind, src, dst, nbytes, outcome))

    def refresh_routes(self):
        self.table = self.chain.route_table()

    def change_link(self, at_ms, a, b, status):
        def apply():
            self.chain.set_status(a, b, status)
            self.refresh_routes()
            self.record("link_change", a, b, 0, status)

        self.schedule(max(self.now, to_us(at_ms)), "link_change", apply)

    # -- transmission -------------------------------------------------
    def transmit(self, a, b, nbytes, on_arrive, on_drop=None, *args):
        """Queue ``nbytes`` on link a->b now; returns the link-free time."""
        link = self.chain.link(a, b)
        if link is None or not link.up:
            raise Unreachable(f"link {a}->{b} is not available")
        start = max(self.now, self._busy.get((a, b), 0))
        end = start + link.serialization_us(nbytes)
        self._busy[(a, b)] = end
        arrive = end + link.latency_us
        self.record("transmit", a, b, nbytes, start)
        lost = link.loss_prob > 0 and self.rng.random() < link.loss_prob
        if lost:
            self.schedule(arrive, "drop", self._dropped, a, b, nbytes, on_drop, args)
        else:
            self.schedule(arrive, "deliver", self._delivered, a, b, nbytes, on_arrive, args)
        return end

    def link_free_at(self, a, b):
        return max(self.now, self._busy.get((a, b), 0))

    def _delivered(self, a, b, nbytes, fn, args):
        self.record("deliver", a, b, nbytes, "ok")
        if fn is not None:
            fn(b, *args)

    def _dropped(self, a, b, nbytes, fn, args):
        self.record("drop", a, b, nbytes, "lost")
        if fn is not None:
            fn(a, b, *args)

    def next_hop(self, node, dst):
        nxt = self.table.next_hop.get((node, dst))
        if nxt is None:
            raise Unreachable(f"no route from {node} to {dst}")
        return nxt

    def forward(self, node, dst, nbytes, on_final, on_drop=None, *args):
        """Store-and-forward a packet hop by hop until it reaches ``dst``."""

        def arrive(at, *a):
            if at == dst:
                on_final(at, *a)
            else:
                self.transmit(at, self.next_hop(at, dst), nbytes, arrive, on_drop, *a)

        self.transmit(node, self.next_hop(node, dst), nbytes, arrive, on_drop, *args)

    def event_log_lines(self):
        return [
            f"{t}\t{kind}\t{src}\t{dst}\t{nbytes}\t{outcome}"
            for t, kind, src, dst, nbytes, outcome in self.log
        ]


def send(chain, src, dst, nbytes, at=0.0, rng=None, trace=False, sim=None):
    """Send one packet; returns a :class:`DeliveryRecord`."""
    if not (0 <= src < chain.n and 0 <= dst < chain.n):
        raise ValueError(f"node out of range: {src} -> {dst}")
    if src == dst:
        return DeliveryRecord(src, dst, at, at, None, 0)
    if sim is None:
        sim = Simulator(chain, rng if rng is not None else np.random.default_rng(0), trace)
    path = sim.table.path(src, dst)  # raises Unreachable
    result = {}

    def final(node):
        result["arrival"] = sim.now

    def lost(a, b):
        result["drop"] = (a, b)

    def start():
        sim.forward(src, dst, nbytes, final, lost)

    sim.schedule(max(sim.now, to_us(at)), "timer", start)
    sim.run(stop=lambda: bool(result))
    arrival = result.get("arrival")
    return DeliveryRecord(
        src,
        dst,
        at,
        None if arrival is None else to_ms(arrival),
        result.get("drop"),
        len(path) - 1,
    )


# -- transfers ----------------------------------------------------------

PLAIN_HEADER = 8  # sequence number + length
ACK_BYTES = 40


def bats_header_len(batch_size):
    return 4 + batch_size


def run_transfer(
    chain,
    src,
    dst,
    block,
    coding,
    rng,
    params=None,
    window=32,
    batch_budget=None,
    collection_window_us=None,
    trace=False,
    verify=True,
):
    """Move ``block`` from src to dst and report goodput.

    ``coding`` is ``"none"`` (send once), ``"arq"`` (windowed end-to-end
    retransmission) or ``"bats"`` (batches with recoding at every relay).
    """
    sim = Simulator(chain, rng, trace)
    if src == dst:
        return GoodputRecord(coding, 0, len(block.to_bytes()), block.true_length, 0.0, 0, True)
    hops = sim.table.hops(src, dst)
    if coding == "none":
        rec = _transfer_plain(sim, src, dst, block)
    elif coding == "arq":
        rec = _transfer_arq(sim, src, dst, block, window)
    elif coding == "bats":
        if params is None:
            params = bats_mod.BatsParams.default(block.K)
        if batch_budget is None:
            batch_budget = max(64, 20 * math.ceil(block.K / params.batch_size))
        rec = _transfer_bats(sim, src, dst, block, params, batch_budget, collection_window_us, verify)
    else:
        raise ValueError(f"unknown coding {coding!r}")
    rec.hops = hops
    if trace:
        rec.event_log = sim.event_log_lines()
    return rec


def _per_packet_bytes(block, K):
    """True payload bytes carried by each source packet (last one is short)."""
    L = block.packet_len
    sizes = [L] * K
    sizes[-1] = block.true_length - L * (K - 1)
    return sizes


def _transfer_plain(sim, src, dst, block):
    K = block.K
    wire = block.packet_len + PLAIN_HEADER
    sizes = _per_packet_bytes(block, K)
    state = {"bytes": 0, "last": 0, "done": 0}

    def final(node, i):
        state["bytes"] += sizes[i]
        state["last"] = sim.now
        state["done"] += 1

    def lost(a, b, i):
        state["done"] += 1

    for i in range(K):
        sim.forward(src, dst, wire, final, lost, i)
    sim.run()
    return GoodputRecord("none", 0, state["bytes"], block.true_length, to_ms(state["last"]), K, True)


def _path_rtt_us(sim, src, dst, wire):
    links = sim.chain.path_links(src, dst, sim.table)
    fwd = sum(l.serialization_us(wire) + l.latency_us for l in links)
    back = sum(l.serialization_us(ACK_BYTES) + l.latency_us for l in links)
    return fwd + back


def _transfer_arq(sim, src, dst, block, window):
    """Windowed end-to-end retransmission.

    The sender pushes up to ``window`` outstanding packets, then waits one
    path RTT after the last one leaves before learning which arrived; lost
    packets lead the next window.
    """
    K = block.K
    wire = block.packet_len + PLAIN_HEADER
    sizes = _per_packet_bytes(block, K)
    rtt = _path_rtt_us(sim, src, dst, wire)
    delivered = set()
    pending = list(range(K))
    state = {"sent": 0, "rounds": 0, "last": 0}
    first = sim.next_hop(src, dst)

    def final(node, i):
        if i not in delivered:
            delivered.add(i)
            state["last"] = sim.now

    def round_():
        if not pending:
            return
        burst = pending[:window]
        del pending[:window]
        state["rounds"] += 1
        for i in burst:
            state["sent"] += 1
            sim.forward(src, dst, wire, final, None, i)
        left = sim.link_free_at(src, first) - sim.now
        sim.schedule(sim.now + left + rtt, "timer", check, burst)

    def check(burst):
        lost = [i for i in burst if i not in delivered]
        pending[:0] = lost
        round_()

    sim.schedule(0, "timer", round_)
    sim.run()
    total = sum(sizes)
    return GoodputRecord(
        "arq", 0, total, block.true_length, to_ms(state["last"]), state["sent"], True,
        rounds=state["rounds"],
    )


def _transfer_bats(sim, src, dst, block, params, batch_budget, collection_window_us, verify):
    M = params.batch_size
    wire = block.packet_len + bats_header_len(M)
    encoder = bats_mod.BatsEncoder(block, params, sim.rng)
    decoder = bats_mod.BatsDecoder(block.K, block.packet_len)
    buffers = {}
    flushed = set()
    state = {"sent": 0, "done_at": None, "batches": 0}
    first = sim.next_hop(src, dst)

    def window_for(prev, node):
        if collection_window_us is not None:
            return collection_window_us
        link = sim.chain.link(prev, node)
        return M * link.serialization_us(wire)

    def arrive(node, prev, pkt):
        if state["done_at"] is not None:
            return
        batch = encoder.batches[pkt.batch_id]
        if node == dst:
            decoder.add(batch, pkt)
            if decoder.complete:
                state["done_at"] = sim.now
            return
        key = (node, pkt.batch_id)
        if key in flushed:
            return  # straggler after this relay already recoded the batch
        buf = buffers.get(key)
        if buf is None:
            buf = buffers[key] = []
            sim.schedule(sim.now + window_for(prev, node), "timer", flush, node, pkt.batch_id)
        buf.append(pkt)

    def flush(node, batch_id):
        key = (node, batch_id)
        buf = buffers.pop(key, [])
        flushed.add(key)
        if not buf or state["done_at"] is not None:
            return
        nxt = sim.next_hop(node, dst)
        for out in bats_mod.recode(buf, params.recode_output_count, sim.rng):
            sim.transmit(node, nxt, wire, arrive, None, node, out)

    def emit():
        if state["done_at"] is not None or state["batches"] >= batch_budget:
            return
        _, packets = encoder.next_batch()
        state["batches"] += 1
        for pkt in packets:
            state["sent"] += 1
            free = sim.transmit(src, first, wire, arrive, None, src, pkt)
        sim.schedule(free, "timer", emit)

    sim.schedule(0, "timer", emit)
    sim.run(stop=lambda: state["done_at"] is not None)
    done = state["done_at"] is not None
    ok = None
    if done and verify:
        ok = decoder.result(block.true_length) == block
    return GoodputRecord(
        "bats",
        0,
        block.true_length if done else 0,
        block.true_length,
        to_ms(state["done_at"] if done else sim.now),
        state["sent"],
        done,
        timed_out=not done,
        batches=state["batches"],
        decoded_ok=ok,
    )


def closed_form_delivery(loss, hops):
    """End-to-end survival probability of i.i.d. per-hop Bernoulli loss."""
    return (1.0 - loss) ** hops
