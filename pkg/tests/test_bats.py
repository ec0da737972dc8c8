import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lampnet import bats, galois
from lampnet.bats import BatsParams, SourceBlock

from conftest import ref_matmul, ref_rank


def _stream(block, params, rng, loss, hops, limit=400):
    """Push batches through ``hops`` lossy links until the sink decodes."""
    enc = bats.BatsEncoder(block, params, rng)
    dec = bats.BatsDecoder(block.K, block.packet_len)
    used = 0
    while not dec.complete and used < limit:
        batch, pkts = enc.next_batch()
        used += 1
        for hop in range(hops):
            pkts = [p for p in pkts if rng.random() >= loss]
            if not pkts:
                break
            if hop < hops - 1:
                pkts = bats.recode(pkts, params.recode_output_count, rng)
        for p in pkts:
            dec.add(batch, p)
    return dec, used


def test_identity_code():
    block = SourceBlock(np.array([[7, 8, 9]], dtype=np.uint8))
    params = BatsParams.fixed_degree(1, batch_size=1)
    batch, pkts = bats.encode_batch(block, params, np.random.default_rng(0), generator=[[1]])
    assert len(pkts) == 1
    assert pkts[0].coeff_vector.tolist() == [1]
    assert pkts[0].payload.tolist() == [7, 8, 9]


def test_encode_matches_direct_combination(rng):
    block = SourceBlock.random(4, 12, rng)
    params = BatsParams.fixed_degree(3, batch_size=2)
    batch, pkts = bats.encode_batch(block, params, rng)
    src = block.packets[batch.contributor_ids]
    expected = ref_matmul(batch.generator.T, src)
    for j, p in enumerate(pkts):
        assert p.coeff_vector.tolist() == [int(j == i) for i in range(2)]
        assert p.payload.tolist() == expected[j].tolist()


def test_full_degree_touches_every_packet(rng):
    block = SourceBlock.random(6, 4, rng)
    params = BatsParams.fixed_degree(6, batch_size=3)
    for i in range(5):
        batch, _ = bats.encode_batch(block, params, rng, batch_id=i)
        assert sorted(batch.contributor_ids.tolist()) == list(range(6))


def test_degree_clamped_to_block_size(rng):
    block = SourceBlock.random(3, 4, rng)
    batch, _ = bats.encode_batch(block, BatsParams.fixed_degree(10, batch_size=2), rng)
    assert batch.degree == 3


def test_params_validation():
    with pytest.raises(ValueError):
        BatsParams(batch_size=0)
    with pytest.raises(ValueError):
        BatsParams(degree_distribution=(0.5, 0.4))
    with pytest.raises(ValueError):
        BatsParams(recode_output_count=0)


def test_robust_soliton_is_pmf():
    for k in (1, 2, 10, 100, 1000):
        pmf = bats.robust_soliton(k, cap=64)
        assert len(pmf) == min(k, 64)
        assert abs(pmf.sum() - 1.0) < 1e-9
        assert (pmf >= 0).all()


def test_recode_single_packet_unit_coefficient(rng):
    block = SourceBlock.random(2, 5, rng)
    _, pkts = bats.encode_batch(block, BatsParams.fixed_degree(2, batch_size=2), rng)
    out = bats.recode(pkts[:1], 1, rng, coefficients=[[1]])
    assert out[0].coeff_vector.tolist() == pkts[0].coeff_vector.tolist()
    assert out[0].payload.tolist() == pkts[0].payload.tolist()


def test_recode_matches_direct_combination(rng):
    block = SourceBlock.random(4, 9, rng)
    _, pkts = bats.encode_batch(block, BatsParams.fixed_degree(4, batch_size=2), rng)
    coeffs = np.array([[3, 200], [0, 17], [91, 1]], dtype=np.uint8)
    out = bats.recode(pkts, 3, rng, coefficients=coeffs)
    C = np.stack([p.coeff_vector for p in pkts])
    P = np.stack([p.payload for p in pkts])
    for i, o in enumerate(out):
        assert o.coeff_vector.tolist() == ref_matmul(coeffs[i : i + 1], C)[0].tolist()
        assert o.payload.tolist() == ref_matmul(coeffs[i : i + 1], P)[0].tolist()


def test_recode_rejects_mixed_batches(rng):
    block = SourceBlock.random(4, 3, rng)
    params = BatsParams.fixed_degree(2, batch_size=2)
    _, a = bats.encode_batch(block, params, rng, batch_id=0)
    _, b = bats.encode_batch(block, params, rng, batch_id=1)
    with pytest.raises(ValueError, match="mixed batch ids"):
        bats.recode([a[0], b[0]], 2, rng)
    with pytest.raises(ValueError):
        bats.recode([], 2, rng)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
def test_recode_never_increases_rank(seed, keep, count):
    rng = np.random.default_rng(seed)
    block = SourceBlock.random(8, 2, rng)
    _, pkts = bats.encode_batch(block, BatsParams.fixed_degree(8, batch_size=8), rng)
    buf = pkts[:keep]
    before = ref_rank(np.stack([p.coeff_vector for p in buf]))
    out = bats.recode(buf, count, rng)
    assert ref_rank(np.stack([p.coeff_vector for p in out])) <= before


def test_square_invertible_single_batch(rng):
    K = 6
    block = SourceBlock.random(K, 10, rng)
    gen = galois.random_matrix(K, K, rng)
    while galois.rank(gen) < K:
        gen = galois.random_matrix(K, K, rng)
    params = BatsParams.fixed_degree(K, batch_size=K)
    batch, pkts = bats.encode_batch(block, params, rng, generator=gen)
    out = bats.decode([(batch, p) for p in pkts], K)
    assert out == block
    again = bats.decode([(batch, p) for p in reversed(pkts)], K)
    assert again == block


def test_three_hop_chain_recovers_byte_identical():
    rng = np.random.default_rng(2024)
    block = SourceBlock.random(64, 32, rng)
    dec, used = _stream(block, BatsParams.default(64), rng, loss=0.2, hops=3)
    assert dec.complete
    assert dec.result() == block
    # 64 packets at three hops of 20% loss need more than 64/8 batches
    assert 8 < used < 100


def test_rank_deficit_report(rng):
    K = 5
    block = SourceBlock.random(K, 4, rng)
    params = BatsParams.fixed_degree(K, batch_size=K)
    batch, pkts = bats.encode_batch(block, params, rng)
    received = [(batch, p) for p in pkts]
    full = ref_rank(bats.stacked_constraints(received, K))
    assert full == K
    # withhold one packet whose removal drops the rank
    for i in range(K):
        rest = received[:i] + received[i + 1 :]
        if ref_rank(bats.stacked_constraints(rest, K)) == K - 1:
            break
    with pytest.raises(bats.InsufficientRank) as err:
        bats.decode(rest, K)
    assert err.value.rank == K - 1
    assert err.value.batch_ranks == {0: K - 1}


def test_empty_receive_reports_zero_rank():
    with pytest.raises(bats.InsufficientRank) as err:
        bats.decode([], 4)
    assert err.value.rank == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decode_iff_full_rank(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 7))
    block = SourceBlock.random(K, 3, rng)
    params = BatsParams(batch_size=3, degree_distribution=tuple([1.0 / K] * K))
    received = []
    for bid in range(int(rng.integers(1, 4))):
        batch, pkts = bats.encode_batch(block, params, rng, batch_id=bid)
        received += [(batch, p) for p in pkts if rng.random() < 0.7]
    rank = ref_rank(bats.stacked_constraints(received, K)) if received else 0
    try:
        out = bats.decode(received, K)
    except bats.InsufficientRank as exc:
        assert rank < K
        assert exc.rank == rank
    else:
        assert rank == K
        assert out == block


def test_thousand_trials_never_corrupt():
    rng = np.random.default_rng(99)
    params = BatsParams.fixed_degree(8, batch_size=4)
    decoded = 0
    for _ in range(1000):
        block = SourceBlock.random(8, 6, rng)
        dec, _ = _stream(block, params, rng, loss=0.3, hops=2, limit=6)
        if dec.complete:
            decoded += 1
            assert dec.result() == block
    assert decoded > 500


def test_from_bytes_pads_and_restores():
    data = b"hello, relay chain"
    block = SourceBlock.from_bytes(data, 5)
    assert block.K == 4
    assert bytes(block.packets[-1]) == b"ain\x00\x00"
    assert block.to_bytes() == data
