"""Cluster-level task dispatch.

Maximise the priority-weighted count of deployed tasks subject to every
deployed task meeting its deadline and each task sitting on at most one
node. Priorities are powers of two ordered by relative deadline, so a more
urgent task always outweighs every less urgent one combined.

The heuristic walks tasks from highest weight down and, for each, looks at
nodes in order of physical distance from its source, deploying it on the
least utilised node that meets the deadline. A node's utilisation is the
sum of exec/period over its tasks and may not exceed the node capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

UNDEPLOYED = None


@dataclass(frozen=True)
class ModelProfile:
    """Profiled stage times (ms) and accuracy of one model variant."""

    inference: float
    accuracy: float = 1.0
    sensor_read: float = 0.0
    preprocess: float = 0.0
    postprocess: float = 0.0

    @property
    def total_exec(self):
        return self.sensor_read + self.preprocess + self.inference + self.postprocess

    @classmethod
    def flat(cls, total_exec, accuracy=1.0):
        return cls(inference=total_exec, accuracy=accuracy)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    period: float
    deadline: float
    source_node: int
    original: ModelProfile
    lite: ModelProfile | None = None
    input_size: float = 0.0  # megabits shipped to a remote executor
    result_size: float = 0.0  # megabits delivered to the vehicle
    priority_rank: int = 0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"task {self.id}: period must be positive")
        if self.deadline < self.period:
            raise ValueError(f"task {self.id}: deadline {self.deadline} < period {self.period}")
        if self.lite is not None:
            if self.lite.total_exec > self.original.total_exec:
                raise ValueError(f"task {self.id}: lite model slower than original")
            if self.lite.accuracy > self.original.accuracy:
                raise ValueError(f"task {self.id}: lite model more accurate than original")

    @property
    def laxity(self):
        return self.original.total_exec / self.period


@dataclass(frozen=True)
class NodeRecord:
    id: int
    position: float
    base_load: float = 0.0


@dataclass
class DispatchProblem:
    tasks: list
    nodes: list
    bandwidth: dict  # (src, dst) -> Mbit/s for reachable ordered pairs
    capacity: float = 1.0

    def __post_init__(self):
        self._pos = {n.id: n.position for n in self.nodes}
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate task ids")

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def distance(self, a, b):
        return abs(self._pos[a] - self._pos[b])

    @classmethod
    def from_chain(cls, tasks, chain, node_ids=None, base_loads=None, capacity=1.0):
        """Bandwidths are route bottlenecks on ``chain`` (index i -> node_ids[i])."""
        ids = list(node_ids) if node_ids is not None else list(range(chain.n))
        loads = base_loads or {}
        nodes = [NodeRecord(nid, chain.positions[i], loads.get(nid, 0.0)) for i, nid in enumerate(ids)]
        table = chain.route_table()
        bw = {}
        for i, a in enumerate(ids):
            for j, b in enumerate(ids):
                if i != j:
                    v = chain.path_bandwidth(i, j, table)
                    if v > 0:
                        bw[(a, b)] = v
        return cls(list(tasks), nodes, bw, capacity)


@dataclass
class PriorityWeights:
    weights: dict
    order: list  # task ids, lowest weight first

    def __getitem__(self, task_id):
        return self.weights[task_id]


@dataclass
class Assignment:
    placement: dict = field(default_factory=dict)  # task id -> node id | None
    e2e: dict = field(default_factory=dict)  # task id -> estimated ms

    def node_of(self, task_id):
        return self.placement.get(task_id)

    def deployed(self):
        return [t for t, n in self.placement.items() if n is not None]

    def tasks_on(self, node_id):
        return [t for t, n in self.placement.items() if n == node_id]

    def records(self, weights, delimiter=","):
        lines = [delimiter.join(("task", "node", "e2e_ms", "weight"))]
        for tid in sorted(self.placement, key=lambda t: -weights[t]):
            node = self.placement[tid]
            e2e = self.e2e.get(tid)
            lines.append(
                delimiter.join(
                    (
                        tid,
                        "" if node is None else str(node),
                        "" if e2e is None or node is None else f"{e2e:.3f}",
                        str(weights[tid]),
                    )
                )
            )
        return "\n".join(lines) + "\n"


def order_and_weight(tasks):
    """Weight 2**i by position in descending-deadline order (ties: id ascending)."""
    if not tasks:
        raise ValueError("no tasks to weight")
    ordered = sorted(tasks, key=lambda t: (-t.deadline, t.id))
    return PriorityWeights({t.id: 1 << i for i, t in enumerate(ordered)}, [t.id for t in ordered])


def estimate_e2e(task, node, problem):
    """Input transfer time over the route bottleneck plus original exec time."""
    if node == task.source_node:
        comm = 0.0
    else:
        bw = problem.bandwidth.get((task.source_node, node), 0.0)
        if bw <= 0:
            return math.inf
        comm = task.input_size / bw * 1000.0
    return comm + task.original.total_exec


def utilization(node, assignment, problem):
    """Base load plus the laxity (exec / period) of every task placed on ``node``."""
    by_id = {t.id: t for t in problem.tasks}
    u = problem.node(node).base_load
    for tid in assignment.tasks_on(node):
        u += by_id[tid].laxity
    return u


def objective(assignment, weights):
    return sum(weights[t] for t in assignment.deployed())


def dispatch(problem, weights=None):
    """Greedy proximity-then-utilisation placement; see module docstring."""
    result = Assignment({t.id: UNDEPLOYED for t in problem.tasks}, {})
    if not problem.tasks:
        return result
    weights = weights or order_and_weight(problem.tasks)
    by_id = {t.id: t for t in problem.tasks}
    load = {n.id: n.base_load for n in problem.nodes}
    for tid in reversed(weights.order):
        task = by_id[tid]
        if task.source_node not in load:
            continue
        candidates = sorted(
            load, key=lambda n: (problem.distance(task.source_node, n), n)
        )
        best = None
        for n in candidates:
            e2e = estimate_e2e(task, n, problem)
            if e2e > task.deadline:
                continue
            if load[n] + task.laxity > problem.capacity + 1e-12:
                continue
            key = (load[n], problem.distance(task.source_node, n), n)
            if best is None or key < best[0]:
                best = (key, n, e2e)
        if best is not None:
            _, n, e2e = best
            result.placement[tid] = n
            result.e2e[tid] = e2e
            load[n] += task.laxity
    return result


def local_assignment(problem):
    """Every task on its own source node, feasible or not (Local-EDF baseline)."""
    out = Assignment()
    for t in problem.tasks:
        out.placement[t.id] = t.source_node
        out.e2e[t.id] = estimate_e2e(t, t.source_node, problem)
    return out
