"""Experiment execution and run reports.

``run`` dispatches on the scenario kind. The ``cluster`` kind is the full
pipeline: dispatch, per-node scheduling with remote inputs delayed by the
I2I route, then result delivery to whichever vehicles are attached to the
cluster when a job completes. Compute and delivery share the instance's
deadline; an instance fails on the first leg that misses it.
"""

from __future__ import annotations

import hashlib
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lampnet import bats, dispatch, ecc, i2v, netsim, sched
from lampnet.harness.deadline import deadline_note, derive_deadline
from lampnet.harness.seeds import component_rng

COMPUTE = "compute"
TRANSMIT = "transmit"
DELIVERY_MISSED = "delivery_missed"


@dataclass(frozen=True)
class FailureRecord:
    instance: str
    task: str
    source_node: int
    leg: str
    cause: str


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)

    def render(self, delimiter=","):
        lines = [delimiter.join(self.header)]
        lines.extend(delimiter.join(_fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


@dataclass
class RunReport:
    scenario: str
    kind: str
    seed: int
    digest: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    events: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    node_failure_rate: dict = field(default_factory=dict)
    node_metrics: dict = field(default_factory=dict)
    timelines: list = field(default_factory=list)

    def files(self, trace=False):
        """File name -> exact bytes this report writes."""
        out = {}
        for name in sorted(self.tables):
            out[f"metrics_{name}.csv"] = self.tables[name].render().encode()
        summary = Table(("key", "value"), [(k, self.summary[k]) for k in sorted(self.summary)])
        out["metrics_summary.csv"] = summary.render().encode()
        if self.notes:
            out["notes.txt"] = ("\n".join(self.notes) + "\n").encode()
        if trace:
            out["events.tsv"] = ("\n".join(["time_ms\tsource\tevent\tsubject\tdetail", *self.events]) + "\n").encode()
        lines = [f"config_sha256 {self.digest}", f"seed {self.seed}"]
        for name in sorted(out):
            lines.append(f"{name} {hashlib.sha256(out[name]).hexdigest()}")
        out["digest.txt"] = ("\n".join(lines) + "\n").encode()
        return out

    def write(self, out_dir, trace=False):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, blob in self.files(trace).items():
            p = out / name
            p.write_bytes(blob)
            paths.append(p)
        return paths


def run(config, seed=None, trace=False):
    """Execute ``config``; ``seed`` overrides the scenario's master seed."""
    seed = config.master_seed if seed is None else int(seed)
    report = RunReport(config.name, config.kind, seed, config.digest)
    _RUNNERS[config.kind](config.data, seed, report, trace)
    return report


# -- shared builders ------------------------------------------------------


def _mcs_table(m):
    return i2v.DEFAULT_MCS if m.get("tables") is None else i2v.McsTable(m["tables"])


def _bats_params(b, K):
    if b["degree"] == "dense":
        return bats.BatsParams.dense(K, b["batch_size"], b["max_degree"])
    if b["degree"] == "robust_soliton":
        return bats.BatsParams.default(K, b["batch_size"], max_degree=b["max_degree"])
    return bats.BatsParams.fixed_degree(min(int(b["degree"]), K), b["batch_size"])


def _profile(v):
    if v is None:
        return None
    return dispatch.ModelProfile(
        inference=float(v["inference"]),
        accuracy=float(v.get("accuracy", 1.0)),
        sensor_read=float(v.get("sensor_read", 0.0)),
        preprocess=float(v.get("preprocess", 0.0)),
        postprocess=float(v.get("postprocess", 0.0)),
    )


def build_tasks(d):
    out = []
    for rank, t in enumerate(d["tasks"]):
        prof = d["profiles"][t["profile"]]
        out.append(
            dispatch.TaskSpec(
                id=t["id"],
                period=float(t.get("period", t["deadline"])),
                deadline=float(t["deadline"]),
                source_node=int(t["source"]),
                original=_profile(prof["original"]),
                lite=_profile(prof.get("lite")),
                input_size=float(prof.get("input_size", 0.0)),
                result_size=float(prof.get("result_size", 0.0)),
                priority_rank=rank,
            )
        )
    return out


def build_chain(d):
    """Chain over nodes sorted by position; returns (chain, node ids by index)."""
    nodes = sorted(d["nodes"]["list"], key=lambda n: n["position"])
    ids = [int(n["id"]) for n in nodes]
    L = d["links"]
    sk = L["skip"]
    chain = netsim.Chain.linear(
        len(ids),
        loss=L["loss"],
        bandwidth=L["bandwidth"],
        latency=L["latency"],
        skip_loss=None if sk is None else sk["loss"],
        skip_bandwidth=None if sk is None else sk["bandwidth"],
        skip_latency=None if sk is None else sk["latency"],
        recovery=L["recovery"],
    )
    chain.positions = [float(n["position"]) for n in nodes]
    index = {nid: i for i, nid in enumerate(ids)}
    for o in L["overrides"]:
        a, b = index[o["a"]], index[o["b"]]
        for p in ((a, b), (b, a)):
            link = chain.link(*p)
            if link is None:
                raise ValueError(f"no link between nodes {o['a']} and {o['b']}")
            for key, attr in (("loss", "loss_prob"), ("bandwidth", "bandwidth"), ("latency", "latency")):
                if key in o:
                    setattr(link, attr, float(o[key]))
            if "status" in o:
                link.status = o["status"]
    return chain, ids


def measure_bandwidth(chain, ids, d, seed):
    """Per ordered pair Mbit/s: route bottleneck, or BATS goodput over the route."""
    table = chain.route_table()
    mode = d["policy"]["bandwidth"]
    b = d["coding"]["bats"]
    K = int(b["K"] or 64)
    cache = {}
    bw = {}
    rows = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if not table.reachable(i, j) or not table.reachable(j, i):
                continue
            if mode == "bottleneck":
                val = chain.path_bandwidth(i, j, table)
            else:
                links = chain.path_links(i, j, table)
                sig = tuple((l.loss_prob, l.bandwidth, l.latency) for l in links)
                if sig not in cache:
                    rng = component_rng(seed, "bandwidth", len(cache))
                    block = bats.SourceBlock.random(K, int(b["packet_len"]), rng)
                    rec = netsim.run_transfer(
                        chain, i, j, block, "bats", rng, params=_bats_params(b, K), verify=False
                    )
                    cache[sig] = rec.goodput_mbps if rec.completed else 0.0
                val = cache[sig]
            if val > 0:
                bw[(ids[i], ids[j])] = val
                bw[(ids[j], ids[i])] = val
                rows.append((ids[i], ids[j], table.hops(i, j), val))
    return bw, rows


def _transfer_ms(size_mb, a, b, bw):
    if a == b or size_mb <= 0:
        return 0.0
    v = bw.get((a, b), 0.0)
    return math.inf if v <= 0 else size_mb / v * 1000.0


# -- cluster ------------------------------------------------------------


def _run_cluster(d, seed, report, trace):
    pol = d["policy"]
    soar = pol["system"] == "soar"
    horizon = float(d["horizon_ms"])
    chain, ids = build_chain(d)
    bw, link_rows = measure_bandwidth(chain, ids, d, seed)
    report.tables["links"] = Table(("src", "dst", "hops", "goodput_mbps"), link_rows)

    tasks = build_tasks(d)
    by_id = {t.id: t for t in tasks}
    node_recs = [
        dispatch.NodeRecord(int(n["id"]), float(n["position"]), float(n.get("base_load", 0.0)))
        for n in d["nodes"]["list"]
    ]
    problem = dispatch.DispatchProblem(tasks, node_recs, bw, float(pol["capacity"]))
    weights = dispatch.order_and_weight(tasks)
    assignment = dispatch.dispatch(problem, weights) if soar else dispatch.local_assignment(problem)
    report.tables["assignment"] = _assignment_table(assignment, weights, by_id)

    queue = pol["queue"] if soar else sched.EDF
    lite = bool(pol["lite"]) if soar else False
    mult = sched.inflation_multipliers(tasks, horizon, float(pol["inflation_sigma"]), component_rng(seed, "sched"))
    offsets = {t["id"]: float(t.get("offset", 0.0)) for t in d["tasks"]}

    jobs_by_task = {}
    task_rows = []
    for node in sorted(ids):
        here = [by_id[t] for t in assignment.tasks_on(node)]
        if not here:
            continue
        delay = {t.id: _transfer_ms(t.input_size, t.source_node, node, bw) for t in here}
        log = [] if trace else None
        nm = sched.run_node(
            here,
            horizon,
            policy=queue,
            lite_enabled=lite,
            multipliers=mult,
            input_delay=delay,
            offsets=offsets,
            node=node,
            trace=log,
        )
        report.node_metrics[node] = nm
        for j in nm.jobs:
            jobs_by_task.setdefault(j.task_id, []).append(j)
        for tid in sorted(nm.tasks):
            m = nm.tasks[tid]
            task_rows.append(
                (
                    node, tid, m.drop_ratio, m.exceed_ratio,
                    m.mean_e2e if m.completed else None, m.mean_acc_loss,
                    by_id[tid].source_node, m.jobs, assignment.e2e.get(tid),
                )
            )
        if log is not None:
            report.events.extend(
                f"{t:.3f}\tnode{node}\t{ev}\t{tid}#{k}\t{detail}" for t, ev, tid, k, detail in log
            )
    report.tables["tasks"] = Table(
        ("node", "task", "drop_ratio", "exceed_ratio", "mean_e2e_ms", "mean_acc_loss",
         "source", "jobs", "estimated_e2e_ms"),
        task_rows,
    )

    timelines = _vehicle_timelines(d, ids, soar)
    report.timelines = timelines
    tl_rows = []
    for v, tl in enumerate(timelines):
        for iv in tl.intervals:
            tl_rows.append((v, iv.start_ms, iv.end_ms, iv.node, iv.megabits))
    report.tables["i2v_timeline"] = Table(("vehicle", "start_ms", "end_ms", "node", "megabits"), tl_rows)

    deliver = _Delivery(d, soar, bw, component_rng(seed, "i2v"), timelines)
    inst = {n: 0 for n in ids}
    fails = {n: [0, 0] for n in ids}
    for t in sorted(tasks, key=lambda t: t.id):
        if assignment.node_of(t.id) is None:
            n_jobs = sched._job_count(t, horizon, offsets.get(t.id, 0.0))
            for k in range(n_jobs):
                report.failures.append(FailureRecord(f"{t.id}#{k}", t.id, t.source_node, COMPUTE, sched.DROPPED))
            inst[t.source_node] += n_jobs
            fails[t.source_node][0] += n_jobs
            continue
        exec_node = assignment.node_of(t.id)
        for j in sorted(jobs_by_task.get(t.id, []), key=lambda j: j.index):
            inst[t.source_node] += 1
            name = f"{t.id}#{j.index}"
            if j.outcome != sched.SUCCESS:
                report.failures.append(FailureRecord(name, t.id, t.source_node, COMPUTE, j.outcome))
                fails[t.source_node][0] += 1
                continue
            ok, note = deliver(t, j, exec_node)
            if trace and note:
                report.events.append(f"{j.finish_time:.3f}\tdelivery\t{note}\t{name}\t")
            if not ok:
                report.failures.append(FailureRecord(name, t.id, t.source_node, TRANSMIT, DELIVERY_MISSED))
                fails[t.source_node][1] += 1

    node_rows = []
    for n in sorted(ids):
        total = inst[n]
        rate = (fails[n][0] + fails[n][1]) / total if total else 0.0
        if total:
            report.node_failure_rate[n] = rate
        node_rows.append((n, total, fails[n][0] + fails[n][1], fails[n][0], fails[n][1], rate))
    report.tables["nodes"] = Table(
        ("node", "instances", "failures", "compute_failures", "transmit_failures", "failure_rate"), node_rows
    )
    report.tables["failures"] = Table(
        ("instance", "task", "source", "leg", "cause"),
        [(f.instance, f.task, f.source_node, f.leg, f.cause) for f in report.failures],
    )
    rates = list(report.node_failure_rate.values())
    deployed = assignment.deployed()
    report.summary.update(
        {
            "system": pol["system"],
            "instances": sum(inst.values()),
            "failures": len(report.failures),
            "avg_failure_rate": float(np.mean(rates)) if rates else 0.0,
            "max_failure_rate": max(rates) if rates else 0.0,
            "deployed_tasks": len(deployed),
            "objective": dispatch.objective(assignment, weights),
        }
    )
    dd = d["deadline_derivation"]
    if dd is not None:
        exact = derive_deadline(dd["sensing_range"], dd["coverage"], dd["speed_kmh"])
        report.summary["derived_deadline_ms"] = exact
        report.notes.append(deadline_note(exact, dd.get("rounded")))


def _assignment_table(assignment, weights, by_id):
    rows = []
    for tid in sorted(assignment.placement, key=lambda t: -weights[t]):
        node = assignment.placement[tid]
        e2e = assignment.e2e.get(tid) if node is not None else None
        rows.append((tid, by_id[tid].source_node, node, e2e, weights[tid]))
    return Table(("task", "source", "node", "e2e_ms", "weight"), rows)


def _vehicle_timelines(d, ids, soar):
    vehicles = d["vehicles"]
    if not vehicles:
        return []
    pol = d["policy"]
    table = _mcs_table(d["mcs"])
    mcs = i2v.select_mcs(table, d["mcs"]["environment"])
    plan = i2v.assign_channels(sorted(ids))
    pos = {int(n["id"]): float(n["position"]) for n in d["nodes"]["list"]}
    sessions = [
        i2v.BroadcastSession(n, plan.channel_of(n), mcs, float(pol["app_rate"]), pos[n], float(d["nodes"]["sensing_range"]))
        for n in sorted(ids)
    ]
    cost = float(pol["switch_cost_ms"] if soar else pol["reassociation_ms"])
    beacon = pol["beacon_period_ms"] if soar else None
    out = []
    for v in vehicles:
        if "waypoints" in v:
            tr = i2v.VehicleTrace([tuple(w) for w in v["waypoints"]])
        else:
            tr = i2v.VehicleTrace.constant_speed(v["start_m"], v["end_m"], v["speed_kmh"], v.get("t0_ms", 0.0))
        out.append(i2v.simulate_drive(tr, plan, sessions, cost, beacon_period=beacon))
    return out


class _Delivery:
    """Result leg: I2I hop to the vehicle's node, then the I2V airtime.

    Soar broadcasts ECC-coded packets at the selected MCS and the vehicle
    must decode every block; the baseline unicasts with link-layer
    retransmission, so it is slower but never loses data once associated.
    """

    def __init__(self, d, soar, bw, rng, timelines):
        self.soar = soar
        self.bw = bw
        self.rng = rng
        self.timelines = timelines
        table = _mcs_table(d["mcs"])
        self.mcs = i2v.select_mcs(table, d["mcs"]["environment"])
        e = d["coding"]["ecc"]
        red = e["redundancy"]
        app = float(d["policy"]["app_rate"])
        self.ratio = i2v.adaptive_redundancy(self.mcs.goodput, app) if red == "adaptive" else float(red)
        self.k = int(e["k"])
        self.seed = int(e["seed"])
        self.packet_bits = int(e["packet_len"]) * 8

    def __call__(self, task, job, exec_node):
        ok_all = True
        notes = []
        for v, tl in enumerate(self.timelines):
            att = tl.attachment_at(job.finish_time)
            if att is None:
                continue
            serving, live = att
            t0 = job.finish_time + _transfer_ms(task.result_size, exec_node, serving, self.bw)
            t0 = max(t0, live)
            mb = task.result_size
            if self.soar:
                air = mb * (1.0 + self.ratio) / self.mcs.phy_rate * 1000.0
                ok = self._decodes(mb)
            else:
                air = mb / self.mcs.goodput * 1000.0
                ok = True
            done = t0 + air
            if done > job.abs_deadline:
                ok = False
            notes.append(f"v{v}@{serving}:{'ok' if ok else 'miss'}")
            ok_all = ok_all and ok
        return ok_all, ",".join(notes)

    def _decodes(self, mb):
        n_packets = max(1, math.ceil(mb * 1e6 / self.packet_bits))
        loss = self.mcs.measured_loss
        while n_packets > 0:
            k = min(self.k, n_packets)
            n_packets -= k
            params = ecc.EccBlockParams.with_ratio(k, self.ratio, self.seed)
            alive = np.flatnonzero(self.rng.random(params.k + params.r) >= loss)
            if not ecc.decodable(params, alive):
                return False
        return True


# -- single-mechanism experiments ---------------------------------------------


def _run_transfer(d, seed, report, trace):
    ch = d["chain"]
    hops = int(ch["hops"])
    sk = ch["skip"]
    chain = netsim.Chain.linear(
        hops + 1, loss=ch["loss"], bandwidth=ch["bandwidth"], latency=ch["latency"],
        skip_loss=None if sk is None else sk["loss"],
        skip_bandwidth=None if sk is None else sk["bandwidth"],
        skip_latency=None if sk is None else sk["latency"],
    )
    K, L = int(d["block"]["K"]), int(d["block"]["packet_len"])
    params = _bats_params(d["coding"]["bats"], K)
    rows = []
    per_scheme = {}
    for r in range(int(d["runs"])):
        block = bats.SourceBlock.random(K, L, component_rng(seed, "block", r))
        for scheme in d["coding"]["schemes"]:
            rng = component_rng(seed, f"transfer:{scheme}", r)
            rec = netsim.run_transfer(
                chain, 0, hops, block, scheme, rng, params=params,
                window=int(d["coding"]["window"]), trace=trace,
            )
            rows.append((scheme, r, hops, rec.goodput_mbps, rec.delivered_fraction, rec.completed, rec.packets_sent))
            per_scheme.setdefault(scheme, []).append(rec.goodput_mbps)
            if trace:
                report.events.extend(f"{line}\t{scheme}#{r}" for line in rec.event_log)
    report.tables["transfer"] = Table(
        ("scheme", "run", "hops", "goodput_mbps", "delivered_fraction", "completed", "packets_sent"), rows
    )
    report.summary["hops"] = hops
    for scheme, vals in per_scheme.items():
        report.summary[f"median_goodput_{scheme}"] = float(statistics.median(vals))


def _run_pdr(d, seed, report, trace):
    table = _mcs_table(d["mcs"])
    env = d["mcs"]["environment"]
    mcs = i2v.select_mcs(table, env)
    erasure = mcs.measured_loss if d["erasure"] is None else float(d["erasure"])
    app = float(d["app_rate"])
    e = d["ecc"]
    ratio = i2v.adaptive_redundancy(mcs.goodput, app) if e["redundancy"] == "adaptive" else float(e["redundancy"])
    params = ecc.EccBlockParams.with_ratio(int(e["k"]), ratio, int(e["seed"]))
    blocks = int(d["blocks"])
    with_ecc = ecc.delivery_fraction(params, erasure, blocks, component_rng(seed, "pdr", 0), use_ecc=True)
    plain = ecc.delivery_fraction(params, erasure, blocks, component_rng(seed, "pdr", 1), use_ecc=False)
    report.tables["pdr"] = Table(
        ("environment", "app_rate", "erasure", "k", "r", "pdr_ecc", "pdr_plain"),
        [(env, app, erasure, params.k, params.r, with_ecc, plain)],
    )
    report.summary.update({"pdr_ecc": with_ecc, "pdr_plain": plain, "r": params.r, "erasure": erasure})


def drive_setup(d):
    n = d["nodes"]
    ids = list(range(1, int(n["count"]) + 1))
    plan = i2v.assign_channels(ids)
    mcs = i2v.select_mcs(_mcs_table(d["mcs"]), d["mcs"]["environment"])
    sessions = [
        i2v.BroadcastSession(
            nid, plan.channel_of(nid), mcs, float(d["app_rate"]),
            float(n["first"]) + (nid - 1) * float(n["spacing"]), float(n["sensing_range"]),
        )
        for nid in ids
    ]
    v = d["vehicle"]
    tr = i2v.VehicleTrace.constant_speed(v["start_m"], v["end_m"], v["speed_kmh"])
    return tr, plan, sessions


def _run_drive(d, seed, report, trace):
    tr, plan, sessions = drive_setup(d)
    tl = i2v.simulate_drive(tr, plan, sessions, float(d["switch_cost_ms"]), beacon_period=d["beacon_period_ms"])
    report.timelines = [tl]
    report.tables["i2v_timeline"] = Table(
        ("start_ms", "end_ms", "node", "megabits"),
        [(iv.start_ms, iv.end_ms, iv.node, iv.megabits) for iv in tl.intervals],
    )
    report.summary.update(
        {
            "drive_ms": tl.drive_ms,
            "switches": len(tl.switch_instants),
            "switch_deaf_ms": tl.switch_deaf_ms,
            "beacon_wait_ms": tl.beacon_wait_ms,
            "overhead_fraction": tl.overhead_fraction,
            "total_megabits": tl.total_megabits,
        }
    )
    if trace:
        report.events.extend(f"{t:.3f}\tvehicle\tretune\t\t" for t in tl.switch_instants)


def _run_broadcast(d, seed, report, trace):
    mcs = i2v.select_mcs(_mcs_table(d["mcs"]), d["mcs"]["environment"])
    session = i2v.BroadcastSession(1, 1, mcs, float(d["app_rate"]), 0.0, 50.0)
    rows = []
    for mode in d["modes"]:
        for n in d["vehicles"]:
            rates = i2v.broadcast_throughput(session, int(n), mode, basic_rate=float(d["basic_rate"]))
            rows.append((mode, int(n), rates[0], sum(rates)))
            report.summary[f"{mode}_{int(n)}"] = rates[0]
    report.tables["broadcast"] = Table(("mode", "vehicles", "per_vehicle_mbps", "aggregate_mbps"), rows)
    report.summary["mcs_rate"] = mcs.phy_rate


_RUNNERS = {
    "cluster": _run_cluster,
    "transfer": _run_transfer,
    "pdr": _run_pdr,
    "drive": _run_drive,
    "broadcast": _run_broadcast,
}
