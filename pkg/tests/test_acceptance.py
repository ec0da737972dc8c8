"""Exit criteria. Each check prints one ``CRITERION n: PASS|FAIL`` line.

Run under pytest (``-m acceptance``) or directly: ``python3 tests/test_acceptance.py``.
"""

import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_dispatch_problem, ref_rank  # noqa: E402

from lampnet import bats, dispatch, ecc, sched  # noqa: E402
from lampnet.harness import oracle  # noqa: E402
from lampnet.harness.deadline import derive_deadline  # noqa: E402
from lampnet.harness.runner import build_tasks, run  # noqa: E402
from lampnet.harness.scenario import load_scenario, with_overrides  # noqa: E402
from lampnet.harness.seeds import component_rng  # noqa: E402

SCEN = resources.files("lampnet") / "scenarios"


def _scenario(name):
    return load_scenario(str(SCEN / f"{name}.yaml"))


def c1():
    cfg = _scenario("chain_bats")
    nine = run(cfg).summary
    six = run(with_overrides(cfg, {"chain.hops": 6, "coding.schemes": ["bats"]})).summary
    b9, a9, b6 = nine["median_goodput_bats"], nine["median_goodput_arq"], six["median_goodput_bats"]
    ok = b9 >= 2 * a9 and b9 >= 0.85 * b6
    return ok, f"9 hops: bats {b9:.1f} vs arq {a9:.1f} Mbps ({b9 / a9:.2f}x); 6 hops bats {b6:.1f} ({b9 / b6:.3f})"


def c2():
    rng = np.random.default_rng(1602)
    mismatches = 0
    for _ in range(400):
        K = int(rng.integers(1, 17))
        block = bats.SourceBlock.random(K, 4, rng)
        M = int(rng.integers(1, 9))
        params = bats.BatsParams(M, tuple([1.0 / K] * K))
        received = []
        for bid in range(int(rng.integers(1, 2 * K // M + 3))):
            batch, pkts = bats.encode_batch(block, params, rng, batch_id=bid)
            received += [(batch, p) for p in pkts if rng.random() < 0.75]
        rank = ref_rank(bats.stacked_constraints(received, K)) if received else 0
        try:
            ok = bats.decode(received, K) == block
        except bats.InsufficientRank:
            ok = False
        mismatches += ok != (rank == K)
    corrupt = decoded = 0
    params = bats.BatsParams.dense(16, batch_size=4)
    for _ in range(1000):
        block = bats.SourceBlock.random(16, 8, rng)
        enc = bats.BatsEncoder(block, params, rng)
        dec = bats.BatsDecoder(16, 8)
        for _ in range(12):
            batch, pkts = enc.next_batch()
            pkts = [p for p in pkts if rng.random() >= 0.2]
            if pkts:
                pkts = [p for p in bats.recode(pkts, 4, rng) if rng.random() >= 0.2]
            for p in pkts:
                dec.add(batch, p)
            if dec.complete:
                break
        if dec.complete:
            decoded += 1
            corrupt += dec.result() != block
    ok = mismatches == 0 and corrupt == 0 and decoded > 0
    return ok, f"rank<->decode mismatches {mismatches}/400; corrupt {corrupt}/{decoded} decoded of 1000"


def c3():
    params = ecc.EccBlockParams(32, 32, 13)
    out = {}
    for e in (0.4, 0.01):
        out[e] = (
            ecc.delivery_fraction(params, e, 1000, np.random.default_rng(int(e * 1000))),
            ecc.delivery_fraction(params, e, 1000, np.random.default_rng(int(e * 1000) + 1), use_ecc=False),
        )
    ok = (
        out[0.4][0] >= 0.90
        and out[0.01][0] >= 0.99
        and all(abs(plain - (1 - e)) <= 0.03 for e, (_, plain) in out.items())
    )
    detail = "; ".join(f"erasure {e}: ecc {w:.4f}, plain {p:.4f}" for e, (w, p) in out.items())
    return ok, detail


def c4():
    rng = np.random.default_rng(2024)
    valid = near = 0
    for _ in range(200):
        p = random_dispatch_problem(rng)
        heur = dispatch.dispatch(p)
        valid += not oracle.validate_assignment(p, heur)
        _, best = oracle.exhaustive_dispatch(p)
        near += dispatch.objective(heur, dispatch.order_and_weight(p.tasks)) >= 0.9 * best
    ok = valid == 200 and near >= 190
    return ok, f"constraints satisfied {valid}/200; >= 0.9x optimum on {near}/200"


def c5():
    cfg = _scenario("node1_table2")
    d = cfg.data
    tasks = build_tasks(d)
    horizon = float(d["horizon_ms"])
    sigma = float(d["policy"]["inflation_sigma"])
    wins, lite_miss, base_miss, losses = 0, [], [], []
    for i in range(100):
        mult = sched.inflation_multipliers(tasks, horizon, sigma, component_rng(cfg.master_seed, "sched", i))
        lite = sched.run_node(tasks, horizon, policy=sched.EDF, lite_enabled=True, multipliers=mult)
        base = sched.run_node(tasks, horizon, policy=sched.EDF, lite_enabled=False, multipliers=mult)
        wins += lite.misses <= base.misses
        lite_miss.append(lite.miss_rate)
        base_miss.append(base.miss_rate)
        losses.append(lite.mean_acc_loss)
    acc = float(np.mean(losses))
    ok = wins == 100 and acc <= 0.015
    detail = (f"lite <= no-lite on {wins}/100 traces; miss {np.mean(lite_miss):.4f} vs "
              f"{np.mean(base_miss):.4f}; accuracy loss {acc:.4%}")
    return ok, detail


def c6():
    cfg = _scenario("table2_cluster2")
    soar = run(cfg).summary
    base = run(with_overrides(cfg, {"policy.system": "baseline"})).summary
    ok = (soar["avg_failure_rate"] < base["avg_failure_rate"]
          and base["max_failure_rate"] >= 2 * soar["max_failure_rate"])
    detail = (f"soar avg {soar['avg_failure_rate']:.4f} worst {soar['max_failure_rate']:.4f}; "
              f"baseline avg {base['avg_failure_rate']:.4f} worst {base['max_failure_rate']:.4f}")
    return ok, detail


def _gaps(report):
    """Timeline bins after the first tune that carry under half a full bin."""
    rows = report.tables["i2v_timeline"].rows
    full = max(r[3] for r in rows)
    return sum(1 for r in rows[1:-1] if r[3] < 0.5 * full)


def c7():
    fast = run(_scenario("drive_5node"))
    slow = run(_scenario("drive_5node_reassociation"))
    f, s = fast.summary["overhead_fraction"], slow.summary["overhead_fraction"]
    boundaries = slow.summary["switches"] - 1
    gaps = _gaps(slow)
    ok = f <= 0.01 and s >= 0.10 and gaps >= boundaries
    return ok, f"overhead {f:.4%} (5 ms) vs {s:.2%} (500 ms); {gaps} gap bins over {boundaries} boundaries"


def c8():
    s = run(_scenario("broadcast_campus")).summary
    soar = [s[f"soar_{n}"] for n in range(1, 7)]
    ok = len(set(soar)) == 1 and soar[0] >= 50 and soar[5] >= 3 * s["unicast_6"]
    return ok, f"soar {soar[0]:.1f} Mbps for 1..6 vehicles; unicast at 6: {s['unicast_6']:.2f}"


def c9():
    names = sorted(p.name[:-5] for p in SCEN.iterdir() if p.name.endswith(".yaml") and p.name != "chain_bats.yaml")
    bad = []
    for name in names:
        cfg = _scenario(name)
        if cfg.kind == "cluster":
            cfg = with_overrides(cfg, {"horizon_ms": min(cfg.get("horizon_ms"), 10000)})
        a = run(cfg, 77, trace=True).files(True)
        b = run(cfg, 77, trace=True).files(True)
        if a != b:
            bad.append(name)
    quick = with_overrides(_scenario("chain_bats"), {"runs": 3})
    if run(quick, 5, trace=True).files(True) != run(quick, 5, trace=True).files(True):
        bad.append("chain_bats")
    ok = not bad
    return ok, f"{len(names) + 1} scenarios re-run; differing: {bad or 'none'}"


def c10():
    exact = derive_deadline(50, 0.9, 70)
    rep = run(with_overrides(_scenario("table2_cluster2"), {"horizon_ms": 500}))
    note = next((n for n in rep.notes if "257.14" in n), "")
    ok = round(exact, 2) == 257.14 and "250" in note
    return ok, f"{exact:.4f} ms; note: {note!r}"


CRITERIA = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10]
# wall-clock budgets in seconds; the last is "negligible", read as a short cluster run
BUDGET = [120, 60, 60, 120, 60, 180, 30, 30, 60, 5]


def check(n):
    t0 = time.perf_counter()
    ok, detail = CRITERIA[n - 1]()
    dt = time.perf_counter() - t0
    ok = ok and dt <= BUDGET[n - 1]
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({dt:.1f}s of {BUDGET[n - 1]}s) {detail}"
    print(line)
    return ok, line


@pytest.mark.acceptance
@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, capsys):
    ok, line = check(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [check(n)[0] for n in range(1, 11)]
    sys.exit(0 if all(results) else 1)
