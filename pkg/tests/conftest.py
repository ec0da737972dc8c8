import numpy as np
import pytest

from lampnet import _gf_numpy

try:
    from lampnet import _gfcore
except ImportError:  # extension not built
    _gfcore = None

BACKENDS = [pytest.param(_gf_numpy, id="numpy")]
if _gfcore is not None:
    BACKENDS.append(pytest.param(_gfcore, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernel(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Independent reference arithmetic: shift-and-add multiply, no tables.
def clmul(a, b, poly=0x11D):
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= poly
    return r


def ref_matmul(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.uint8)
    for i in range(n):
        for j in range(m):
            acc = 0
            for t in range(k):
                acc ^= clmul(int(a[i, t]), int(b[t, j]))
            out[i, j] = acc
    return out


def ref_inv(a):
    for x in range(1, 256):
        if clmul(a, x) == 1:
            return x
    raise ZeroDivisionError


def ref_rank(m):
    rows = [list(map(int, r)) for r in m]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = ref_inv(rows[rank][c])
        rows[rank] = [clmul(inv, v) for v in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c]:
                f = rows[i][c]
                rows[i] = [v ^ clmul(f, p) for v, p in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def random_dispatch_problem(rng, max_nodes=4, max_tasks=6):
    """Small random instance in the oracle's size range."""
    from lampnet.dispatch import DispatchProblem, ModelProfile, NodeRecord, TaskSpec

    n = int(rng.integers(1, max_nodes + 1))
    m = int(rng.integers(1, max_tasks + 1))
    nodes = [NodeRecord(i, float(i * 40), float(rng.choice([0.0, 0.0, 0.3, 0.6]))) for i in range(n)]
    tasks = []
    for j in range(m):
        period = float(rng.choice([100, 200, 250]))
        deadline = period + float(rng.choice([0, 50, 100, 150]))
        exec_ms = float(rng.uniform(10, 0.9 * period))
        tasks.append(TaskSpec(f"t{j}", period, deadline, int(rng.integers(0, n)),
                              ModelProfile.flat(exec_ms), input_size=float(rng.uniform(0, 10))))
    bw = {}
    for a in range(n):
        for b in range(n):
            if a != b and rng.random() < 0.9:
                bw[(a, b)] = float(rng.uniform(20, 100)) / abs(a - b)
    return DispatchProblem(tasks, nodes, bw, 1.0)
