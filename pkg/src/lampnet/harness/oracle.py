"""Brute-force and closed-form cross-checks for small instances.

Nothing here calls into the code it checks: feasibility, weights and
GF(2^8) arithmetic are recomputed from first principles.
"""

from __future__ import annotations

import itertools
import math
from pathlib import Path

import yaml

MAX_DISPATCH_NODES = 4
MAX_DISPATCH_TASKS = 6
MAX_DECODE_K = 8


class OracleLimitError(ValueError):
    pass


# -- dispatch -----------------------------------------------------------


def _weights(tasks):
    ordered = sorted(tasks, key=lambda t: (-t.deadline, t.id))
    return {t.id: 2**i for i, t in enumerate(ordered)}


def _e2e(task, node, problem):
    if node == task.source_node:
        comm = 0.0
    else:
        bw = problem.bandwidth.get((task.source_node, node), 0.0)
        if bw <= 0:
            return math.inf
        comm = 1000.0 * task.input_size / bw
    o = task.original
    return comm + o.sensor_read + o.preprocess + o.inference + o.postprocess


def validate_assignment(problem, assignment, tol=1e-9):
    """Constraint violations of ``assignment`` (empty list when valid)."""
    errors = []
    by_id = {t.id: t for t in problem.tasks}
    nodes = {n.id: n for n in problem.nodes}
    load = {n: nodes[n].base_load for n in nodes}
    for tid, node in assignment.placement.items():
        if tid not in by_id:
            errors.append(f"unknown task {tid}")
            continue
        if node is None:
            continue
        if node not in nodes:
            errors.append(f"{tid} placed on unknown node {node}")
            continue
        t = by_id[tid]
        e2e = _e2e(t, node, problem)
        if e2e > t.deadline + tol:
            errors.append(f"{tid} on node {node}: e2e {e2e:.3f} ms exceeds deadline {t.deadline}")
        o = t.original
        load[node] += (o.sensor_read + o.preprocess + o.inference + o.postprocess) / t.period
    for n, u in load.items():
        if u > problem.capacity + tol and any(assignment.placement.get(t) == n for t in by_id):
            errors.append(f"node {n} utilisation {u:.3f} exceeds capacity {problem.capacity}")
    missing = set(by_id) - set(assignment.placement)
    if missing:
        errors.append(f"tasks missing from assignment: {sorted(missing)}")
    return errors


def exhaustive_dispatch(problem):
    """Optimal placement by enumerating all (N+1)^M assignments."""
    from lampnet.dispatch import Assignment

    n, m = len(problem.nodes), len(problem.tasks)
    if n > MAX_DISPATCH_NODES or m > MAX_DISPATCH_TASKS:
        raise OracleLimitError(
            f"dispatch oracle handles at most {MAX_DISPATCH_NODES} nodes x {MAX_DISPATCH_TASKS} tasks, "
            f"got {n} x {m}"
        )
    w = _weights(problem.tasks)
    choices = [None] + [nd.id for nd in problem.nodes]
    best, best_score = None, -1
    for combo in itertools.product(choices, repeat=m):
        score = sum(w[t.id] for t, c in zip(problem.tasks, combo) if c is not None)
        if score <= best_score:
            continue
        cand = Assignment({t.id: c for t, c in zip(problem.tasks, combo)})
        if not validate_assignment(problem, cand):
            best, best_score = cand, score
    for t in problem.tasks:
        node = best.placement[t.id]
        if node is not None:
            best.e2e[t.id] = _e2e(t, node, problem)
    return best, best_score


def load_dispatch_instance(data):
    from lampnet.dispatch import DispatchProblem, ModelProfile, NodeRecord, TaskSpec

    nodes = [NodeRecord(int(x["id"]), float(x.get("position", x["id"])), float(x.get("base_load", 0.0)))
             for x in data["nodes"]]
    tasks = []
    for x in data["tasks"]:
        prof = x.get("original")
        if prof is None:
            orig = ModelProfile.flat(float(x["exec"]))
        else:
            orig = ModelProfile(**{k: float(v) for k, v in prof.items()})
        dl = float(x["deadline"])
        tasks.append(TaskSpec(str(x["id"]), float(x.get("period", dl)), dl, int(x["source"]), orig,
                              input_size=float(x.get("input_size", 0.0))))
    bw = {}
    for a, b, v in data.get("bandwidth", []):
        bw[(int(a), int(b))] = float(v)
        bw.setdefault((int(b), int(a)), float(v))
    return DispatchProblem(tasks, nodes, bw, float(data.get("capacity", 1.0)))


# -- GF(2^8) decode -----------------------------------------------------


def _gf_tables(poly=0x11D):
    exp, log = [0] * 510, [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= poly
    for i in range(255, 510):
        exp[i] = exp[i - 255]
    return exp, log


_EXP, _LOG = _gf_tables()


def _mul(a, b):
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def _inv(a):
    return _EXP[255 - _LOG[a]]


def gauss_solve(rows, rhs):
    """Solve rows @ x = rhs over GF(2^8) with plain lists (rows: n x n)."""
    n = len(rows)
    a = [list(r) + list(b) for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if a[i][col]), None)
        if piv is None:
            raise ValueError("singular system")
        a[col], a[piv] = a[piv], a[col]
        inv = _inv(a[col][col])
        a[col] = [_mul(inv, v) for v in a[col]]
        for i in range(n):
            if i != col and a[i][col]:
                f = a[i][col]
                a[i] = [v ^ _mul(f, p) for v, p in zip(a[i], a[col])]
    return [row[n:] for row in a]


def decode_oracle(data):
    """Encode with the shipped codec, erase, and recover with :func:`gauss_solve`.

    Returns ``{"recovered": [hex...], "matches_source": bool, "codec_agrees": bool}``.
    """
    import numpy as np

    from lampnet import ecc

    k = int(data["k"])
    r = int(data.get("r", k))
    if k > MAX_DECODE_K:
        raise OracleLimitError(f"decode oracle handles blocks with k <= {MAX_DECODE_K}, got k={k}")
    params = ecc.EccBlockParams(k, r, int(data.get("seed", 0)))
    if "data" in data:
        source = [bytes.fromhex(h) for h in data["data"]]
    else:
        rng = np.random.default_rng(int(data.get("seed", 0)))
        plen = int(data.get("packet_len", 16))
        source = [rng.integers(0, 256, plen, dtype=np.uint8).tobytes() for _ in range(k)]
    if len(source) != k or len({len(s) for s in source}) != 1:
        raise ValueError(f"need {k} equal-length source packets")
    packets = ecc.ecc_encode(source, params)
    received = sorted(set(int(i) for i in data.get("received", range(k))))
    kept = [p for p in packets if p.index in received]
    coeffs = ecc.check_coefficients(params)
    rows, rhs = [], []
    for p in kept:
        if p.index < k:
            rows.append([1 if j == p.index else 0 for j in range(k)])
        else:
            rows.append([int(v) for v in coeffs[p.index - k]])
        rhs.append(list(p.payload))
    sel_rows, sel_rhs = _independent_subset(rows, rhs, k)
    recovered = [bytes(x) for x in gauss_solve(sel_rows, sel_rhs)]
    try:
        codec = ecc.ecc_decode(kept, params)
        agrees = [bytes(x) for x in codec] == recovered
    except ecc.EccInsufficient:
        agrees = False
    return {
        "k": k,
        "r": r,
        "received": received,
        "recovered": [x.hex() for x in recovered],
        "matches_source": recovered == source,
        "codec_agrees": agrees,
    }


def _independent_subset(rows, rhs, k):
    """Greedily pick k linearly independent equations (raises if impossible)."""
    chosen, basis = [], []
    for i, row in enumerate(rows):
        v = list(row)
        for b in basis:
            lead = next(j for j, x in enumerate(b) if x)
            if v[lead]:
                f = _mul(v[lead], _inv(b[lead]))
                v = [x ^ _mul(f, y) for x, y in zip(v, b)]
        if any(v):
            basis.append(v)
            chosen.append(i)
        if len(chosen) == k:
            break
    if len(chosen) < k:
        raise ValueError(f"received packets have rank {len(chosen)} < k={k}; block cannot be decoded")
    return [rows[i] for i in chosen], [rhs[i] for i in chosen]


# -- loss ---------------------------------------------------------------


def loss_oracle(data):
    p = float(data["p"])
    hops = int(data["hops"])
    if not 0 <= p <= 1 or hops < 0:
        raise ValueError("need 0 <= p <= 1 and hops >= 0")
    return {"p": p, "hops": hops, "delivery": (1.0 - p) ** hops}


def load_instance(path):
    try:
        return yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise OracleLimitError(f"cannot read instance {path}: {exc.strerror}") from None


def run_oracle(kind, data):
    """Uniform entry point for the CLI; returns a JSON-serialisable dict."""
    if kind == "dispatch":
        from lampnet.dispatch import dispatch, objective, order_and_weight

        problem = load_dispatch_instance(data)
        best, score = exhaustive_dispatch(problem)
        heur = dispatch(problem)
        return {
            "optimal": {t: best.placement[t] for t in sorted(best.placement)},
            "optimal_objective": score,
            "heuristic": {t: heur.placement[t] for t in sorted(heur.placement)},
            "heuristic_objective": objective(heur, order_and_weight(problem.tasks)),
            "heuristic_violations": validate_assignment(problem, heur),
        }
    if kind == "decode":
        return decode_oracle(data)
    if kind == "loss":
        return loss_oracle(data)
    raise ValueError(f"unknown oracle {kind!r}")
