"""Per-node opportunistic scheduling of concurrent DL tasks.

Each job reads its sensor, optionally waits for its input to arrive over
I2I, then runs preprocess -> inference -> postprocess. Pre/post segments
share one processing lane; inference has its own exclusive lane, so one
task's pre/post overlaps another's inference. Nothing is preempted.

When the inference lane frees up, overdue jobs are dropped, the next job
is picked by the queue policy, and the variant is chosen: the lite model
runs when the original would finish the current job late, or when it would
leave the next most urgent queued job without enough time.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

STAGES = ("sensor_read", "preprocess", "inference", "postprocess")
LATEST_DEADLINE = "latest_deadline"
EDF = "edf"
POLICIES = (LATEST_DEADLINE, EDF)

ORIGINAL = "original"
LITE = "lite"
UNDECIDED = "undecided"

SUCCESS = "success"
DROPPED = "dropped"
EXCEEDED = "deadline_exceeded"


@dataclass
class Job:
    task_id: str
    index: int
    release_time: float
    abs_deadline: float
    seq: int = 0
    stage: str = "sensor_read"
    variant: str = UNDECIDED
    finish_time: float | None = None
    outcome: str | None = None
    multipliers: tuple = (1.0, 1.0, 1.0, 1.0)

    def advance(self, stage):
        if STAGES.index(stage) < STAGES.index(self.stage):
            raise ValueError(f"job {self.task_id}#{self.index} cannot go back to {stage}")
        self.stage = stage

    @property
    def e2e(self):
        return None if self.finish_time is None else self.finish_time - self.release_time


class ProfileTable:
    """task id -> {"original": ModelProfile, "lite": ModelProfile | None}."""

    def __init__(self, entries):
        self._p = {}
        for tid, variants in entries.items():
            orig = variants[ORIGINAL]
            lite = variants.get(LITE)
            for prof in filter(None, (orig, lite)):
                if prof.inference <= 0:
                    raise ValueError(f"task {tid}: inference time must be positive")
                if min(prof.sensor_read, prof.preprocess, prof.postprocess) < 0:
                    raise ValueError(f"task {tid}: stage times must be non-negative")
            if lite is not None and lite.inference > orig.inference:
                raise ValueError(f"task {tid}: lite inference slower than original")
            self._p[tid] = {ORIGINAL: orig, LITE: lite}

    @classmethod
    def from_tasks(cls, tasks):
        return cls({t.id: {ORIGINAL: t.original, LITE: t.lite} for t in tasks})

    def get(self, task_id, variant=ORIGINAL):
        return self._p[task_id][variant]

    def has_lite(self, task_id):
        return self._p[task_id][LITE] is not None

    def accuracy_loss(self, task_id, variant):
        if variant != LITE:
            return 0.0
        p = self._p[task_id]
        return p[ORIGINAL].accuracy - p[LITE].accuracy


def pick_next(inference_queue, now, policy=LATEST_DEADLINE):
    """Job to run next on the inference lane; ties go to the earlier release."""
    if not inference_queue:
        raise ValueError("empty inference queue")
    if policy == LATEST_DEADLINE:
        return min(inference_queue, key=lambda j: (-j.abs_deadline, j.release_time, j.seq))
    if policy == EDF:
        return min(inference_queue, key=lambda j: (j.abs_deadline, j.release_time, j.seq))
    raise ValueError(f"unknown queue policy {policy!r}")


def choose_variant(current, queue, now, profiles):
    """``lite`` iff the original would finish ``current`` late, or would starve
    the most urgent other queued job; otherwise ``original``."""
    if not profiles.has_lite(current.task_id):
        return ORIGINAL
    orig = profiles.get(current.task_id, ORIGINAL)
    done = now + orig.inference
    if done + orig.postprocess > current.abs_deadline:
        return LITE
    others = [j for j in queue if j is not current]
    if others:
        nxt = min(others, key=lambda j: (j.abs_deadline, j.release_time, j.seq))
        np_ = profiles.get(nxt.task_id, ORIGINAL)
        if done + np_.inference + np_.postprocess > nxt.abs_deadline:
            return LITE
    return ORIGINAL


def drop_overdue(queue, now):
    """Split ``queue`` into (kept, dropped); a job is overdue once now > deadline."""
    kept = [j for j in queue if j.abs_deadline >= now]
    dropped = [j for j in queue if j.abs_deadline < now]
    return kept, dropped


@dataclass
class TaskMetrics:
    task_id: str
    jobs: int = 0
    dropped: int = 0
    exceeded: int = 0
    succeeded: int = 0
    e2e_sum: float = 0.0
    completed: int = 0
    acc_loss_sum: float = 0.0
    lite_runs: int = 0

    @property
    def drop_ratio(self):
        return self.dropped / self.jobs if self.jobs else 0.0

    @property
    def exceed_ratio(self):
        return self.exceeded / self.jobs if self.jobs else 0.0

    @property
    def success_ratio(self):
        return self.succeeded / self.jobs if self.jobs else 0.0

    @property
    def miss_rate(self):
        return (self.dropped + self.exceeded) / self.jobs if self.jobs else 0.0

    @property
    def mean_e2e(self):
        return self.e2e_sum / self.completed if self.completed else math.nan

    @property
    def mean_acc_loss(self):
        return self.acc_loss_sum / self.completed if self.completed else 0.0


@dataclass
class NodeMetrics:
    node: int
    tasks: dict = field(default_factory=dict)
    jobs: list = field(default_factory=list)

    def _sum(self, attr):
        return sum(getattr(m, attr) for m in self.tasks.values())

    @property
    def total_jobs(self):
        return self._sum("jobs")

    @property
    def drop_ratio(self):
        n = self.total_jobs
        return self._sum("dropped") / n if n else 0.0

    @property
    def exceed_ratio(self):
        n = self.total_jobs
        return self._sum("exceeded") / n if n else 0.0

    @property
    def success_ratio(self):
        n = self.total_jobs
        return self._sum("succeeded") / n if n else 0.0

    @property
    def misses(self):
        return self._sum("dropped") + self._sum("exceeded")

    @property
    def miss_rate(self):
        n = self.total_jobs
        return self.misses / n if n else 0.0

    @property
    def mean_e2e(self):
        c = self._sum("completed")
        return self._sum("e2e_sum") / c if c else math.nan

    @property
    def mean_acc_loss(self):
        c = self._sum("completed")
        return self._sum("acc_loss_sum") / c if c else 0.0

    def records(self, delimiter=","):
        head = ("node", "task", "drop_ratio", "exceed_ratio", "mean_e2e_ms", "mean_acc_loss")
        lines = [delimiter.join(head)]
        for tid in sorted(self.tasks):
            m = self.tasks[tid]
            lines.append(
                delimiter.join(
                    (
                        str(self.node),
                        tid,
                        f"{m.drop_ratio:.6f}",
                        f"{m.exceed_ratio:.6f}",
                        "" if m.completed == 0 else f"{m.mean_e2e:.3f}",
                        f"{m.mean_acc_loss:.6f}",
                    )
                )
            )
        return "\n".join(lines) + "\n"


def inflation_multipliers(tasks, horizon, sigma, rng):
    """Pre-drawn per-job, per-stage delay multipliers (>= 1), keyed by task id.

    Drawn in a fixed order independent of scheduling decisions, so runs
    with different policies over the same seed see identical delays.
    """
    out = {}
    for t in sorted(tasks, key=lambda t: t.id):
        n = _job_count(t, horizon)
        if sigma > 0:
            out[t.id] = np.exp(sigma * np.abs(rng.standard_normal((n, len(STAGES)))))
        else:
            out[t.id] = np.ones((n, len(STAGES)))
    return out


def _job_count(task, horizon, offset=0.0):
    return max(0, math.ceil((horizon - offset) / task.period))


def run_node(
    tasks,
    horizon,
    profiles=None,
    policy=LATEST_DEADLINE,
    lite_enabled=True,
    multipliers=None,
    input_delay=None,
    offsets=None,
    node=0,
    trace=None,
):
    """Simulate one node over [0, horizon) of periodic releases.

    ``input_delay`` maps task id -> ms of I2I transfer between sensor read
    and preprocessing (remote executions); ``offsets`` shifts each task's
    first release. Returns :class:`NodeMetrics` with every job attached.
    If ``trace`` is a list, (time, event, task, index, detail) tuples are
    appended to it.
    """
    tasks = list(tasks)
    profiles = profiles or ProfileTable.from_tasks(tasks)
    input_delay = input_delay or {}
    offsets = offsets or {}
    metrics = NodeMetrics(node, {t.id: TaskMetrics(t.id) for t in tasks})
    events = []
    seq = [0]

    def log(now, event, job, detail=""):
        if trace is not None:
            trace.append((now, event, job.task_id, job.index, detail))

    def push(time, kind, job):
        heapq.heappush(events, (time, seq[0], kind, job))
        seq[0] += 1

    jobs = []
    for t in sorted(tasks, key=lambda t: t.id):
        off = offsets.get(t.id, 0.0)
        mult = None if multipliers is None else multipliers.get(t.id)
        for k in range(_job_count(t, horizon, off)):
            r = off + k * t.period
            m = (1.0,) * 4 if mult is None else tuple(float(x) for x in mult[k])
            jobs.append(Job(t.id, k, r, r + t.deadline, multipliers=m))
    jobs.sort(key=lambda j: (j.release_time, j.task_id))
    for i, j in enumerate(jobs):
        j.seq = i
        push(j.release_time, "release", j)
    metrics.jobs = jobs

    proc_queue = []  # (ready_time, seq, job, stage)
    infer_queue = []
    lanes = {"proc": False, "infer": False}

    def dur(job, stage, variant=ORIGINAL):
        prof = profiles.get(job.task_id, variant)
        return getattr(prof, stage) * job.multipliers[STAGES.index(stage)]

    def finish(job, outcome, now):
        job.outcome = outcome
        log(now, outcome, job, job.stage)
        tm = metrics.tasks[job.task_id]
        if outcome == DROPPED:
            tm.dropped += 1
            return
        job.finish_time = now
        tm.completed += 1
        tm.e2e_sum += now - job.release_time
        tm.acc_loss_sum += profiles.accuracy_loss(job.task_id, job.variant)
        if job.variant == LITE:
            tm.lite_runs += 1
        if outcome == EXCEEDED:
            tm.exceeded += 1
        else:
            tm.succeeded += 1

    def start_proc(now):
        while not lanes["proc"] and proc_queue:
            _, _, job, stage = heapq.heappop(proc_queue)
            if job.abs_deadline < now:
                finish(job, DROPPED, now)
                continue
            job.advance(stage)
            variant = job.variant if stage == "postprocess" else ORIGINAL
            lanes["proc"] = True
            log(now, "start", job, stage)
            push(now + dur(job, stage, variant), "proc_done", job)

    def start_infer(now):
        nonlocal infer_queue
        if lanes["infer"] or not infer_queue:
            return
        infer_queue, dropped = drop_overdue(infer_queue, now)
        for j in dropped:
            finish(j, DROPPED, now)
        if not infer_queue:
            return
        job = pick_next(infer_queue, now, policy)
        infer_queue.remove(job)
        if lite_enabled:
            job.variant = choose_variant(job, infer_queue, now, profiles)
        else:
            job.variant = ORIGINAL
        job.advance("inference")
        lanes["infer"] = True
        log(now, "start", job, f"inference:{job.variant}")
        push(now + dur(job, "inference", job.variant), "infer_done", job)

    while events:
        now, _, kind, job = heapq.heappop(events)
        if kind == "release":
            metrics.tasks[job.task_id].jobs += 1
            ready = now + dur(job, "sensor_read") + input_delay.get(job.task_id, 0.0)
            push(ready, "input_ready", job)
        elif kind == "input_ready":
            heapq.heappush(proc_queue, (now, job.seq, job, "preprocess"))
        elif kind == "proc_done":
            lanes["proc"] = False
            if job.stage == "preprocess":
                infer_queue.append(job)
            else:
                finish(job, SUCCESS if now <= job.abs_deadline else EXCEEDED, now)
        elif kind == "infer_done":
            lanes["infer"] = False
            heapq.heappush(proc_queue, (now, job.seq, job, "postprocess"))
        start_proc(now)
        start_infer(now)
    return metrics
