import logging
import time

import numpy as np
import pytest

from mtnn import gbdt, selector
from mtnn.kernels import ProblemShape
from mtnn.selector import (
    Choice,
    Dispatcher,
    Reason,
    SelectionDecision,
    build_features,
    mtnn_gemm,
    select,
)

from oracles import oracle_nt, random_matrix, rel_frobenius

AMPLE = 1 << 40


def train_model(rng, label_rule=None, n=300):
    """Model over 8 features; labels from m*n*k size by default."""
    x = np.column_stack([
        np.full(n, 8.0), np.full(n, 20.0), np.full(n, 1607.0),
        np.full(n, 256.0), np.full(n, 2048.0),
        rng.integers(1, 1025, n), rng.integers(1, 1025, n), rng.integers(1, 1025, n),
    ]).astype(np.float64)
    if label_rule is None:
        label_rule = lambda row: 1 if row[5] * row[6] * row[7] < 2**24 else -1
    y = np.array([label_rule(row) for row in x])
    if len(set(y)) == 1:  # keep the model non-degenerate
        y[0] = -y[0]
    return gbdt.fit_gbdt(x, y)


def constant_model(label, rng):
    x = rng.uniform(size=(20, 8))
    return gbdt.fit_gbdt(x, np.full(20, label, dtype=int))


class TestBuildFeatures:
    def test_reference_row_vector(self, platform_a):
        got = build_features(platform_a, ProblemShape(128, 128, 128))
        assert got.tolist() == [8, 20, 1607, 256, 2048, 128, 128, 128]

    def test_mnk_positions(self, platform_a):
        base = build_features(platform_a, ProblemShape(1, 2, 3))
        permuted = build_features(platform_a, ProblemShape(3, 1, 2))
        assert np.array_equal(base[:5], permuted[:5])
        assert base[5:].tolist() == [1, 2, 3]
        assert permuted[5:].tolist() == [3, 1, 2]

    def test_deterministic(self, platform_a):
        shape = ProblemShape(4, 5, 6)
        assert np.array_equal(
            build_features(platform_a, shape), build_features(platform_a, shape)
        )


class TestSelect:
    def test_memory_fallback(self, platform_a, rng):
        model = constant_model(-1, rng)
        decision = select(model, platform_a, ProblemShape(1, 1, 1), free_memory=0)
        assert decision.choice is Choice.USE_NT
        assert decision.reason is Reason.MEMORY_FALLBACK
        assert np.isnan(decision.raw_score)

    def test_constant_negative_model_selects_tnn(self, platform_a, rng):
        model = constant_model(-1, rng)
        decision = select(model, platform_a, ProblemShape(64, 64, 64), AMPLE)
        assert decision.choice is Choice.USE_TNN
        assert decision.reason is Reason.PREDICTED
        assert decision.raw_score < 0

    def test_agrees_with_learner_predict(self, platform_a, rng):
        model = train_model(rng)
        for _ in range(100):
            shape = ProblemShape(*rng.integers(1, 1025, 3))
            decision = select(model, platform_a, shape, AMPLE)
            label = gbdt.predict(model, build_features(platform_a, shape))
            assert (decision.choice is Choice.USE_NT) == (label == 1)

    def test_never_tnn_without_memory(self, platform_a, rng):
        model = constant_model(-1, rng)
        for _ in range(50):
            shape = ProblemShape(*rng.integers(1, 4096, 3))
            budget = int(rng.integers(0, 4 * shape.n * shape.k))
            decision = select(model, platform_a, shape, budget)
            if 4 * shape.n * shape.k > budget:
                assert decision.choice is Choice.USE_NT
                assert decision.reason is Reason.MEMORY_FALLBACK

    def test_fallback_decision_invariant(self):
        with pytest.raises(ValueError, match="fallback"):
            SelectionDecision(Choice.USE_TNN, Reason.MEMORY_FALLBACK, 0.0)


class TestDispatcher:
    def test_matches_module_select(self, platform_a, rng):
        model = train_model(rng)
        dispatcher = Dispatcher(model, platform_a)
        for _ in range(100):
            shape = ProblemShape(*rng.integers(1, 1025, 3))
            a = dispatcher.select(shape, AMPLE)
            b = select(model, platform_a, shape, AMPLE)
            assert a.choice is b.choice and a.reason is b.reason
            assert a.raw_score == pytest.approx(b.raw_score)

    def test_gemm_matches_direct_nt(self, platform_a, rng):
        model = train_model(rng)
        dispatcher = Dispatcher(model, platform_a)
        for _ in range(50):
            m, n, k = rng.integers(1, 48, 3)
            a = random_matrix(rng, m, k)
            b = random_matrix(rng, n, k)
            assert rel_frobenius(dispatcher.gemm(a, b), oracle_nt(a, b)) < 1e-4

    def test_gemm_identity(self, platform_a, rng):
        model = train_model(rng)
        dispatcher = Dispatcher(model, platform_a)
        a = random_matrix(rng, 5, 5)
        assert rel_frobenius(dispatcher.gemm(a, np.eye(5, dtype=np.float32)), a) < 1e-6

    def test_branches_agree(self, platform_a, rng):
        # same inputs through a forced-NT and a forced-TNN dispatcher
        nt_model = constant_model(1, rng)
        tnn_model = constant_model(-1, rng)
        d_nt = Dispatcher(nt_model, platform_a)
        d_tnn = Dispatcher(tnn_model, platform_a)
        worst = 0.0
        for _ in range(100):
            m, n, k = rng.integers(1, 40, 3)
            a = random_matrix(rng, m, k)
            b = random_matrix(rng, n, k)
            got_nt = d_nt.gemm(a, b)
            got_tnn = d_tnn.gemm(a, b)
            worst = max(worst, rel_frobenius(got_tnn, got_nt))
        assert worst <= 1e-4

    def test_memory_error_retries_as_nt(self, platform_a, rng, monkeypatch, caplog):
        model = constant_model(-1, rng)
        dispatcher = Dispatcher(model, platform_a)

        def boom(*args, **kwargs):
            raise MemoryError("no room")

        monkeypatch.setattr(selector._impl, "gemm_tnn", boom)
        a = random_matrix(rng, 4, 6)
        b = random_matrix(rng, 5, 6)
        with caplog.at_level(logging.WARNING, logger="mtnn.selector"):
            got = dispatcher.gemm(a, b, free_memory=AMPLE)
        assert rel_frobenius(got, oracle_nt(a, b)) < 1e-4
        assert any("retrying as NT" in rec.message for rec in caplog.records)

    def test_gemm_validates_inputs(self, platform_a, rng):
        model = constant_model(1, rng)
        dispatcher = Dispatcher(model, platform_a)
        with pytest.raises(ValueError, match="share k"):
            dispatcher.gemm(random_matrix(rng, 2, 3), random_matrix(rng, 2, 4))
        with pytest.raises(TypeError, match="float32"):
            dispatcher.gemm(np.ones((2, 2)), random_matrix(rng, 2, 2))

    def test_empty_model_dispatches_nt(self, platform_a, rng):
        model = gbdt.GbdtModel(trees=(), params=gbdt.GbdtParams(), n_features=8)
        dispatcher = Dispatcher(model, platform_a)
        decision = dispatcher.select(ProblemShape(8, 8, 8), AMPLE)
        assert decision.choice is Choice.USE_NT
        assert decision.raw_score == 0.0

    def test_wrong_arity_model_rejected(self, platform_a, rng):
        x = rng.uniform(size=(10, 3))
        model = gbdt.fit_gbdt(x, np.ones(10, dtype=int))
        with pytest.raises(ValueError, match="8 features"):
            Dispatcher(model, platform_a)

    def test_selection_overhead_budget(self, platform_a, rng):
        model = train_model(rng)
        dispatcher = Dispatcher(model, platform_a)
        shape = ProblemShape(512, 512, 512)
        dispatcher.select(shape, AMPLE)
        samples = []
        for _ in range(300):
            start = time.perf_counter()
            dispatcher.select(shape, AMPLE)
            samples.append(time.perf_counter() - start)
        assert float(np.median(samples)) <= 1e-4

    def test_plain_select_overhead_budget(self, platform_a, rng):
        model = train_model(rng)
        shape = ProblemShape(512, 512, 512)
        select(model, platform_a, shape, AMPLE)
        samples = []
        for _ in range(300):
            start = time.perf_counter()
            select(model, platform_a, shape, AMPLE)
            samples.append(time.perf_counter() - start)
        assert float(np.median(samples)) <= 1e-4


def test_mtnn_gemm_convenience(platform_a, rng):
    model = constant_model(1, rng)
    a = random_matrix(rng, 6, 4)
    b = random_matrix(rng, 5, 4)
    assert rel_frobenius(mtnn_gemm(model, platform_a, a, b), oracle_nt(a, b)) < 1e-4
