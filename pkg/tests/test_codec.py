from itertools import combinations

import numpy as np
import pytest

from codedseq.codec import (
    InfeasibleConfiguration,
    InsufficientResults,
    SourceMatrices,
    decode_prefix,
    dump_rows,
    encode_all,
    make_generator,
    split_matrix,
    worker_multiply,
)
from codedseq.feasibility import Configuration, check_feasible, row_count_s


def random_source(cfg, m, seed):
    rng = np.random.default_rng(seed)
    return SourceMatrices(
        matrices=tuple(rng.standard_normal((k, m)) for k in cfg.k), m=m
    )


def roundtrip_max_error(cfg, m=10, seed=0):
    """Max relative decode error over every worker subset of every size."""
    src = random_source(cfg, m, seed)
    workers = encode_all(src, cfg)
    rng = np.random.default_rng(seed + 1)
    z = rng.standard_normal(m)
    results = [worker_multiply(w, z) for w in workers]
    worst = 0.0
    for ell in range(1, cfg.L + 1):
        for subset in combinations(range(cfg.L), ell):
            decoded = decode_prefix([results[i] for i in subset], cfg)
            assert len(decoded) == ell
            for level, block in enumerate(decoded, start=1):
                truth = src.matrices[level - 1] @ z
                assert block.shape == truth.shape
                if truth.size:
                    err = np.abs(block - truth).max() / max(1.0, np.abs(truth).max())
                    worst = max(worst, float(err))
    return worst


class TestSplit:
    def test_remainder_split(self):
        A = np.arange(12.0).reshape(3, 4)
        s = split_matrix(A, 2)
        assert len(s.full_blocks) == 1
        np.testing.assert_array_equal(s.full_blocks[0], A[:2])
        np.testing.assert_array_equal(s.remainder, A[2:])

    def test_exact_split(self):
        A = np.arange(12.0).reshape(3, 4)
        s = split_matrix(A, 3)
        assert len(s.full_blocks) == 1
        assert s.remainder is None

    def test_single_row_high_level(self):
        A = np.ones((1, 4))
        s = split_matrix(A, 4)
        assert s.full_blocks == ()
        assert s.remainder.shape == (1, 4)

    def test_empty_matrix(self):
        s = split_matrix(np.empty((0, 4)), 2)
        assert s.full_blocks == () and s.remainder is None


class TestGenerator:
    def test_square_is_identity(self):
        gen = make_generator(2, 2)
        np.testing.assert_array_equal(gen.coefficients, np.eye(2))

    def test_repetition_like(self):
        gen = make_generator(1, 3)
        assert gen.coefficients[0, 0] == 1.0
        assert all(gen.coefficients[r, 0] != 0.0 for r in range(3))

    def test_all_square_submatrices_invertible(self):
        # independent re-check by direct determinants
        gen = make_generator(2, 4)
        for rows in combinations(range(4), 2):
            det = np.linalg.det(gen.coefficients[list(rows)])
            assert abs(det) > 1e-12

    def test_systematic_prefix(self):
        for rows_in, rows_out in [(1, 4), (2, 5), (3, 5), (4, 6)]:
            gen = make_generator(rows_in, rows_out)
            np.testing.assert_array_equal(
                gen.coefficients[:rows_in], np.eye(rows_in)
            )

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            make_generator(0, 2)
        with pytest.raises(ValueError):
            make_generator(3, 2)


class TestEncode:
    def test_reference_example_structure(self):
        cfg = Configuration(L=4, n=3, k=(0, 3, 3, 1))
        workers = encode_all(random_source(cfg, 7, 0), cfg)
        assert [len(w.tags) for w in workers] == [3, 3, 3, 3]
        # full blocks of levels 2 and 3: exactly one coded row in every worker
        for level, block in [(2, 0), (3, 0)]:
            for w in workers:
                hits = [t for t in w.tags if (t.level, t.block) == (level, block)]
                assert len(hits) == 1
        # level-2 remainder: one row in each of exactly 3 distinct workers
        carriers = [
            w.worker_id
            for w in workers
            if sum(1 for t in w.tags if (t.level, t.block) == (2, 1)) == 1
        ]
        assert len(carriers) == 3
        # level-4 single row lives in exactly one worker (the least loaded)
        quads = [w.worker_id for w in workers if any(t.level == 4 for t in w.tags)]
        assert quads == [4]

    def test_capacity_and_total(self):
        cfg = Configuration(L=5, n=5, k=(1, 2, 3, 4, 5))
        budget = check_feasible(cfg)
        assert budget.feasible
        workers = encode_all(random_source(cfg, 6, 3), cfg)
        assert all(len(w.tags) <= cfg.n for w in workers)
        assert sum(len(w.tags) for w in workers) == budget.total

    def test_infeasible_configuration_rejected(self):
        cfg = Configuration(L=2, n=1, k=(2, 0))
        with pytest.raises(InfeasibleConfiguration):
            encode_all(random_source(cfg, 3, 0), cfg)

    def test_shape_mismatch_rejected(self):
        cfg = Configuration(L=2, n=2, k=(1, 1))
        src = random_source(Configuration(L=2, n=2, k=(2, 1)), 3, 0)
        with pytest.raises(ValueError):
            encode_all(src, cfg)

    def test_rows_are_immutable(self):
        cfg = Configuration(L=2, n=2, k=(1, 1))
        workers = encode_all(random_source(cfg, 3, 0), cfg)
        with pytest.raises(ValueError):
            workers[0].rows[0, 0] = 7.0


class TestWorkerMultiply:
    def test_zero_vector(self):
        cfg = Configuration(L=2, n=2, k=(1, 2))
        workers = encode_all(random_source(cfg, 5, 1), cfg)
        res = worker_multiply(workers[0], np.zeros(5))
        np.testing.assert_array_equal(res.y, np.zeros(len(workers[0].tags)))

    def test_one_hot_selects_column(self):
        cfg = Configuration(L=2, n=2, k=(1, 2))
        workers = encode_all(random_source(cfg, 5, 1), cfg)
        z = np.zeros(5)
        z[3] = 1.0
        res = worker_multiply(workers[1], z)
        np.testing.assert_allclose(res.y, workers[1].rows[:, 3])

    def test_matches_dense_multiply(self):
        cfg = Configuration(L=3, n=3, k=(1, 2, 3))
        workers = encode_all(random_source(cfg, 6, 2), cfg)
        z = np.random.default_rng(5).standard_normal(6)
        for w in workers:
            np.testing.assert_allclose(worker_multiply(w, z).y, w.rows @ z)

    def test_dimension_mismatch(self):
        cfg = Configuration(L=2, n=2, k=(1, 2))
        workers = encode_all(random_source(cfg, 5, 1), cfg)
        with pytest.raises(ValueError):
            worker_multiply(workers[0], np.zeros(4))


class TestDecode:
    def test_reference_example_pair_recovers_level_two(self):
        cfg = Configuration(L=4, n=3, k=(0, 3, 3, 1))
        src = random_source(cfg, 7, 0)
        workers = encode_all(src, cfg)
        z = np.random.default_rng(9).standard_normal(7)
        results = [worker_multiply(w, z) for w in workers]
        decoded = decode_prefix([results[2], results[3]], cfg)
        assert decoded[0].size == 0
        np.testing.assert_allclose(decoded[1], src.matrices[1] @ z, atol=1e-10)

    def test_reference_example_full_set(self):
        cfg = Configuration(L=4, n=3, k=(0, 3, 3, 1))
        src = random_source(cfg, 7, 0)
        workers = encode_all(src, cfg)
        z = np.random.default_rng(11).standard_normal(7)
        decoded = decode_prefix([worker_multiply(w, z) for w in workers], cfg)
        for level in (2, 3, 4):
            np.testing.assert_allclose(
                decoded[level - 1], src.matrices[level - 1] @ z, atol=1e-9
            )

    def test_all_subsets_reference_example(self):
        cfg = Configuration(L=4, n=3, k=(0, 3, 3, 1))
        assert roundtrip_max_error(cfg, m=7, seed=0) < 1e-9

    @pytest.mark.parametrize(
        "k",
        [
            (1,),
            (2, 3),
            (0, 4, 2),
            (2, 3, 5, 7),
            (1, 2, 3, 4, 5),
            (8, 8, 8, 8, 8),
        ],
    )
    def test_roundtrip_various_configs(self, k):
        L = len(k)
        total = sum(row_count_s(i, k_i, L) for i, k_i in enumerate(k, 1))
        n = max(1, -(-total // L))
        cfg = Configuration(L=L, n=n, k=k)
        assert roundtrip_max_error(cfg, m=10, seed=L) <= 1e-8

    def test_subset_independence(self):
        cfg = Configuration(L=4, n=5, k=(1, 3, 4, 2))
        src = random_source(cfg, 8, 7)
        workers = encode_all(src, cfg)
        z = np.random.default_rng(13).standard_normal(8)
        results = [worker_multiply(w, z) for w in workers]
        outs = []
        for subset in combinations(range(4), 2):
            decoded = decode_prefix([results[i] for i in subset], cfg)
            outs.append(np.concatenate(decoded))
        for other in outs[1:]:
            np.testing.assert_allclose(outs[0], other, rtol=1e-8, atol=1e-10)

    def test_linearity(self):
        cfg = Configuration(L=3, n=3, k=(1, 2, 2))
        src = random_source(cfg, 6, 21)
        workers = encode_all(src, cfg)
        rng = np.random.default_rng(22)
        z1, z2 = rng.standard_normal(6), rng.standard_normal(6)
        alpha = 1.7
        subset = [workers[0], workers[2]]
        dec_comb = decode_prefix(
            [worker_multiply(w, alpha * z1 + z2) for w in subset], cfg
        )
        dec1 = decode_prefix([worker_multiply(w, z1) for w in subset], cfg)
        dec2 = decode_prefix([worker_multiply(w, z2) for w in subset], cfg)
        for c, a, b in zip(dec_comb, dec1, dec2):
            np.testing.assert_allclose(c, alpha * a + b, rtol=1e-9, atol=1e-10)

    def test_full_response_uses_systematic_rows_verbatim(self):
        # divisible config: every block's systematic rows live in the first
        # workers, so decoding with all workers copies their outputs exactly
        cfg = Configuration(L=4, n=2, k=(0, 2, 0, 4))
        src = random_source(cfg, 5, 4)
        workers = encode_all(src, cfg)
        z = np.random.default_rng(6).standard_normal(5)
        results = [worker_multiply(w, z) for w in workers]
        decoded = decode_prefix(results, cfg)
        sys_rows = {}
        for res in results:
            for value, tag in zip(res.y, res.tags):
                if tag.systematic:
                    sys_rows[(tag.level, tag.block, tag.row)] = value
        np.testing.assert_array_equal(
            decoded[1], np.array([sys_rows[(2, 0, 0)], sys_rows[(2, 0, 1)]])
        )

    def test_duplicate_workers_rejected(self):
        cfg = Configuration(L=2, n=2, k=(1, 1))
        workers = encode_all(random_source(cfg, 3, 1), cfg)
        res = worker_multiply(workers[0], np.zeros(3))
        with pytest.raises(ValueError):
            decode_prefix([res, res], cfg)

    def test_insufficient_rows_detected(self):
        cfg = Configuration(L=2, n=2, k=(1, 1))
        workers = encode_all(random_source(cfg, 3, 1), cfg)
        z = np.random.default_rng(2).standard_normal(3)
        res = worker_multiply(workers[0], z)
        # strip the level-1 row to fake an encoder bug
        keep = [i for i, t in enumerate(res.tags) if t.level != 1]
        broken = type(res)(
            worker_id=res.worker_id,
            y=res.y[keep],
            tags=tuple(res.tags[i] for i in keep),
        )
        with pytest.raises(InsufficientResults):
            decode_prefix([broken], cfg)


class TestDump:
    def test_rows_cover_budget_and_parse(self):
        cfg = Configuration(L=4, n=3, k=(0, 3, 3, 1))
        workers = encode_all(random_source(cfg, 7, 0), cfg)
        records = list(dump_rows(workers, cfg))
        total = sum(row_count_s(i, k, cfg.L) for i, k in enumerate(cfg.k, 1))
        assert len(records) == total
        for rec in records:
            coeffs = [float(v) for v in rec["coefficients"].split()]
            assert coeffs  # at least one coefficient per coded row
