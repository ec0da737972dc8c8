"""Passive I2V broadcast: MCS choice, channel plans, drives, multi-vehicle rates.

A node injects frames on its own channel at a fixed, installation-measured
rate; vehicles sniff whichever channel belongs to the nearest node in range.
Retuning costs a short deaf period. The reassociation baseline is the same
drive with a much larger per-switch cost and no control-channel beacon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NUM_CHANNELS = 24
CONTROL_CHANNEL = 0  # index 0 stands for channel 36
DEFAULT_BEACON_PERIOD_MS = 100.0
DEFAULT_BASIC_RATE = 6.0
DEFAULT_REASSOCIATION_MS = 500.0


class ConfigurationError(ValueError):
    pass


class ChannelAssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class McsCandidate:
    phy_rate: float
    measured_loss: float

    @property
    def goodput(self):
        return self.phy_rate * (1.0 - self.measured_loss)


class McsTable:
    """Per-environment candidate (rate, measured loss) lists."""

    def __init__(self, environments):
        self.environments = {}
        for env, rows in environments.items():
            cands = [McsCandidate(float(r), float(l)) for r, l in rows]
            rates = [c.phy_rate for c in cands]
            if any(b <= a for a, b in zip(rates, rates[1:])):
                raise ConfigurationError(f"MCS rates for {env!r} must be strictly increasing")
            if any(not 0.0 <= c.measured_loss <= 1.0 for c in cands):
                raise ConfigurationError(f"MCS losses for {env!r} must lie in [0, 1]")
            self.environments[env] = cands

    def candidates(self, environment):
        try:
            cands = self.environments[environment]
        except KeyError:
            raise ConfigurationError(f"unknown road environment {environment!r}") from None
        if not cands:
            raise ConfigurationError(f"no MCS candidates for {environment!r}")
        return cands

    def to_dict(self):
        return {
            env: [[c.phy_rate, c.measured_loss] for c in cands]
            for env, cands in self.environments.items()
        }


# Synthetic stand-ins (2 spatial streams, 20 MHz rates); not measured data.
DEFAULT_MCS = McsTable(
    {
        "campus": list(zip(
            [13, 26, 39, 52, 78, 104, 117, 130, 156],
            [0.02, 0.03, 0.05, 0.08, 0.12, 0.30, 0.45, 0.55, 0.75],
        )),
        "community": list(zip(
            [13, 26, 39, 52, 78, 104, 117, 130, 156],
            [0.03, 0.05, 0.08, 0.12, 0.22, 0.45, 0.60, 0.70, 0.85],
        )),
        "public": list(zip(
            [13, 26, 39, 52, 78, 104, 117, 130, 156],
            [0.05, 0.08, 0.12, 0.20, 0.35, 0.55, 0.70, 0.80, 0.90],
        )),
    }
)


def select_mcs(table, environment):
    """Candidate maximising rate * (1 - loss); ties go to the lower rate."""
    best = None
    for c in table.candidates(environment):
        if best is None or c.goodput > best.goodput:
            best = c
    return best


@dataclass
class ChannelPlan:
    channels: dict
    control_channel: int = CONTROL_CHANNEL

    def channel_of(self, node):
        return self.channels[node]

    def collision_free(self):
        vals = list(self.channels.values())
        return len(vals) == len(set(vals)) and self.control_channel not in vals


def assign_channels(cluster, interference=None, control_channel=CONTROL_CHANNEL):
    """Give each node a distinct data channel that avoids its blocked set.

    Node i (in input order) defaults to the i-th non-control channel; a node
    whose default is blocked moves to the lowest channel that is free.
    """
    interference = interference or {}
    data_channels = [c for c in range(NUM_CHANNELS) if c != control_channel]
    nodes = list(cluster)
    if len(nodes) > len(data_channels):
        raise ChannelAssignmentError(
            f"{len(nodes)} nodes but only {len(data_channels)} data channels"
        )
    plan = {}
    used = set()
    displaced = []
    for i, node in enumerate(nodes):
        default = data_channels[i]
        if default in interference.get(node, ()):
            displaced.append(node)
        else:
            plan[node] = default
            used.add(default)
    for node in displaced:
        blocked = set(interference.get(node, ()))
        for c in data_channels:
            if c not in used and c not in blocked:
                plan[node] = c
                used.add(c)
                break
        else:
            raise ChannelAssignmentError(f"no free channel left for node {node}")
    return ChannelPlan({n: plan[n] for n in nodes}, control_channel)


@dataclass
class VehicleTrace:
    """Waypoints of (time ms, road position m); linear between them."""

    waypoints: list

    def __post_init__(self):
        self.waypoints = [(float(t), float(x)) for t, x in self.waypoints]
        ts = [t for t, _ in self.waypoints]
        xs = [x for _, x in self.waypoints]
        if len(ts) < 2:
            raise ValueError("a trace needs at least two waypoints")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("trace times must be strictly increasing")
        inc = all(b >= a for a, b in zip(xs, xs[1:]))
        dec = all(b <= a for a, b in zip(xs, xs[1:]))
        if not (inc or dec):
            raise ValueError("trace positions must be monotone")

    @classmethod
    def constant_speed(cls, start_m, end_m, speed_kmh, t0_ms=0.0):
        if speed_kmh <= 0:
            raise ValueError("speed must be positive")
        dur = abs(end_m - start_m) / (speed_kmh / 3.6) * 1000.0
        return cls([(t0_ms, start_m), (t0_ms + dur, end_m)])

    @property
    def start(self):
        return self.waypoints[0][0]

    @property
    def end(self):
        return self.waypoints[-1][0]

    def speeds_kmh(self):
        return [
            abs(x1 - x0) / ((t1 - t0) / 1000.0) * 3.6
            for (t0, x0), (t1, x1) in zip(self.waypoints, self.waypoints[1:])
        ]

    def position_at(self, t_ms):
        ts, xs = zip(*self.waypoints)
        return np.interp(t_ms, ts, xs)


@dataclass
class BroadcastSession:
    node: int
    channel: int
    mcs: McsCandidate
    app_rate: float
    position: float
    sensing_range: float

    @property
    def goodput(self):
        return min(self.app_rate, self.mcs.goodput)


@dataclass
class ReceptionInterval:
    start_ms: float
    end_ms: float
    node: int | None
    megabits: float


@dataclass
class ReceptionTimeline:
    intervals: list = field(default_factory=list)
    switch_instants: list = field(default_factory=list)
    switch_deaf_ms: float = 0.0
    beacon_wait_ms: float = 0.0
    drive_ms: float = 0.0
    # (start_ms, end_ms, node, live_from_ms): which node the radio follows
    attachments: list = field(default_factory=list)

    def attachment_at(self, t_ms):
        """(node, live_from_ms) the vehicle is tuned to at ``t_ms``, or None."""
        for start, end, node, live in self.attachments:
            if start <= t_ms < end:
                return node, live
        return None

    @property
    def overhead_fraction(self):
        return self.switch_deaf_ms / self.drive_ms if self.drive_ms > 0 else 0.0

    @property
    def total_megabits(self):
        return sum(i.megabits for i in self.intervals)

    def records(self, delimiter=","):
        lines = [delimiter.join(("start_ms", "end_ms", "node", "megabits"))]
        for iv in self.intervals:
            node = "" if iv.node is None else str(iv.node)
            lines.append(
                delimiter.join((f"{iv.start_ms:.3f}", f"{iv.end_ms:.3f}", node, f"{iv.megabits:.6f}"))
            )
        return "\n".join(lines) + "\n"


def simulate_drive(
    trace,
    plan,
    sessions,
    switch_cost,
    beacon_period=DEFAULT_BEACON_PERIOD_MS,
    step_ms=1.0,
    bin_ms=100.0,
):
    """Step a vehicle along ``trace`` and account what it receives.

    The vehicle tunes to the nearest in-range node's channel. Each retune
    leaves it deaf for ``switch_cost`` ms; a vehicle already in range when
    the trace starts begins tuned. On first entering the cluster it
    must hear one control-channel beacon (every ``beacon_period`` ms)
    before its first tune; pass ``beacon_period=None`` to skip that, as the
    reassociation baseline does.
    """
    for s in sessions:
        if plan.channels.get(s.node) != s.channel:
            raise ConfigurationError(f"session on node {s.node} uses an unplanned channel")
    tl = ReceptionTimeline(drive_ms=trace.end - trace.start)
    if not sessions:
        return tl
    pos = np.array([s.position for s in sessions])
    rng_m = np.array([s.sensing_range for s in sessions])
    n_steps = int(math.floor((trace.end - trace.start) / step_ms + 1e-9))
    times = trace.start + step_ms * np.arange(n_steps)
    xs = trace.position_at(times)

    have_plan = beacon_period is None
    target = None
    deaf_until = -math.inf
    bins = {}
    for t, x in zip(times, xs):
        d = np.abs(pos - x)
        inr = np.flatnonzero(d <= rng_m)
        if inr.size:
            cand = int(inr[np.lexsort(([sessions[i].node for i in inr], d[inr]))[0]])
        else:
            cand = None
        if t == trace.start and cand is not None:
            # already in range when the trace begins: tuned, with the plan in hand
            target = cand
            have_plan = True
            seg = (float(t), float(t))
        elif cand != target:
            if target is not None:
                seg_start, seg_live = seg
                tl.attachments.append((seg_start, float(t), sessions[target].node, seg_live))
            if deaf_until > t:
                # previous retune cut short; only the elapsed part was deafness
                tl.switch_deaf_ms -= deaf_until - t
            target = cand
            deaf_until = -math.inf
            if target is not None:
                start = t
                if not have_plan:
                    start = math.ceil(t / beacon_period) * beacon_period
                    tl.beacon_wait_ms += start - t
                    have_plan = True
                deaf_until = start + switch_cost
                seg = (float(t), float(deaf_until))
                tl.switch_instants.append(float(t))
                tl.switch_deaf_ms += switch_cost
        if target is None:
            continue
        live = min(step_ms, max(0.0, t + step_ms - max(t, deaf_until)))
        mb = sessions[target].goodput * live / 1000.0
        b = int((t - trace.start) // bin_ms)
        slot = bins.setdefault(b, [sessions[target].node, 0.0])
        slot[0] = sessions[target].node
        slot[1] += mb
    if target is not None:
        tl.attachments.append((seg[0], float(trace.end), sessions[target].node, seg[1]))
    if deaf_until > trace.end:
        tl.switch_deaf_ms -= deaf_until - trace.end
    for b in sorted(bins):
        node, mb = bins[b]
        start = trace.start + b * bin_ms
        tl.intervals.append(ReceptionInterval(start, min(start + bin_ms, trace.end), node, mb))
    return tl


def broadcast_throughput(session, vehicles, mode, basic_rate=DEFAULT_BASIC_RATE, unicast_rate=None):
    """Per-vehicle throughput (Mbit/s) for ``vehicles`` receivers.

    ``soar`` sniffers all get the selected MCS goodput; ``plain_broadcast``
    is pinned to the basic rate; ``unicast`` splits one link's rate (the
    same goodput unless ``unicast_rate`` overrides it) across receivers.
    """
    if vehicles < 1:
        raise ValueError("need at least one vehicle")
    if mode == "soar":
        rate = session.mcs.goodput
        return [rate] * vehicles
    if mode == "plain_broadcast":
        return [basic_rate] * vehicles
    if mode == "unicast":
        full = session.mcs.goodput if unicast_rate is None else unicast_rate
        return [full / vehicles] * vehicles
    raise ValueError(f"unknown broadcast mode {mode!r}")


def adaptive_redundancy(goodput, app_rate, cap=1.0):
    """Check-to-data ratio that fills the airtime left over by the app stream."""
    if app_rate <= 0:
        return cap
    return max(0.0, min(cap, goodput / app_rate - 1.0))
