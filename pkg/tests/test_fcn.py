import numpy as np
import pytest

from mtnn import fcn, gbdt
from mtnn.fcn import (
    DEFAULT_BATCHES,
    FcnInfeasibleError,
    compare_dispatchers,
    fcn_scenario,
    preset_widths,
    scaled_widths,
)
from mtnn.selector import Dispatcher


def tiny_dispatcher(platform_a, rng):
    x = rng.uniform(size=(20, 8))
    model = gbdt.fit_gbdt(x, np.ones(20, dtype=int))
    return Dispatcher(model, platform_a)


class TestPresets:
    def test_mnist_like_widths(self):
        assert preset_widths("mnist-like", 2) == (784, 10, (2048, 1024))
        assert preset_widths("mnist-like", 4) == (784, 10, (2048, 2048, 2048, 1024))

    def test_synthetic_like_widths(self):
        in_dim, out_dim, hidden = preset_widths("synthetic-like", 3)
        assert in_dim == out_dim == 26752
        assert hidden == (4096, 4096, 4096)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset_widths("imagenet", 2)

    def test_unsupported_depth(self):
        with pytest.raises(ValueError, match="hidden layers"):
            preset_widths("mnist-like", 5)

    def test_scaled_widths(self):
        assert scaled_widths((26752, 4096), 8) == (3344, 512)
        assert scaled_widths((10,), 16) == (1,)  # floors at 1
        with pytest.raises(ValueError, match="divisor"):
            scaled_widths((8,), 0)

    def test_default_batches_cover_presets(self):
        assert set(DEFAULT_BATCHES) == set(fcn.PRESETS)


class TestScenario:
    def test_smallest_network_runs(self):
        result = fcn_scenario([1], batch=1, input_dim=1, output_dim=1, dispatch="nt")
        assert result.forward_seconds > 0
        assert result.backward_seconds > 0
        assert result.total_seconds == pytest.approx(
            result.forward_seconds + result.backward_seconds
        )

    def test_call_log_shapes(self):
        result = fcn_scenario(
            [6], batch=4, input_dim=5, output_dim=3, dispatch="nt"
        )
        forward = [c for c in result.calls if c.phase == "forward"]
        backward = [c for c in result.calls if c.phase == "backward"]
        # layers: 5 -> 6 -> 3
        assert [(c.op, c.m, c.n, c.k) for c in forward] == [
            ("nt", 4, 6, 5),
            ("nt", 4, 3, 6),
        ]
        # reversed layer order, one NN and one fixed-NT product each
        assert [(c.op, c.m, c.n, c.k) for c in backward] == [
            ("nn", 4, 6, 3),
            ("nt-fixed", 3, 6, 4),
            ("nn", 4, 5, 6),
            ("nt-fixed", 6, 5, 4),
        ]
        assert all(c.seconds >= 0 for c in result.calls)

    def test_dispatch_modes(self, platform_a, rng):
        for dispatch in ("nt", "tnn", tiny_dispatcher(platform_a, rng)):
            result = fcn_scenario([4], 2, 3, 2, dispatch)
            assert result.forward_seconds > 0

    def test_invalid_dispatch(self):
        with pytest.raises(ValueError, match="dispatch"):
            fcn_scenario([4], 2, 3, 2, "cublas")

    def test_invalid_sizes(self):
        with pytest.raises(ValueError, match="batch"):
            fcn_scenario([4], 0, 3, 2, "nt")
        with pytest.raises(ValueError, match="widths"):
            fcn_scenario([0], 2, 3, 2, "nt")
        with pytest.raises(ValueError, match="iters"):
            fcn_scenario([4], 2, 3, 2, "nt", iters=0)

    def test_infeasible_names_layer(self):
        with pytest.raises(FcnInfeasibleError, match="layer 1"):
            fcn_scenario(
                [2, 50_000], batch=50_000, input_dim=2, output_dim=50_000,
                dispatch="nt", mem_fraction=0.05,
            )

    def test_deterministic_call_structure(self):
        a = fcn_scenario([3, 2], 2, 4, 2, "nt", seed=1)
        b = fcn_scenario([3, 2], 2, 4, 2, "nt", seed=1)
        assert [(c.phase, c.op, c.m, c.n, c.k) for c in a.calls] == [
            (c.phase, c.op, c.m, c.n, c.k) for c in b.calls
        ]


class TestCompare:
    def test_returns_all_dispatchers(self, platform_a, rng):
        totals = compare_dispatchers(
            {"nt": "nt", "tnn": "tnn", "mtnn": tiny_dispatcher(platform_a, rng)},
            hidden=[8], batches=(2, 4), input_dim=6, output_dim=4, iters=2,
        )
        assert set(totals) == {"nt", "tnn", "mtnn"}
        for fwd, bwd in totals.values():
            assert fwd > 0 and bwd > 0

    def test_backward_phases_comparable(self):
        # backward work is identical across dispatchers; allow a loose
        # noise bound here (the acceptance suite uses the tight one)
        totals = compare_dispatchers(
            {"nt": "nt", "tnn": "tnn"},
            hidden=[64, 64], batches=(32,), input_dim=64, output_dim=64, iters=3,
        )
        bwds = sorted(t[1] for t in totals.values())
        assert bwds[1] / bwds[0] < 1.5

    def test_iters_guard(self):
        with pytest.raises(ValueError, match="iters"):
            compare_dispatchers({"nt": "nt"}, [4], (2,), 3, 2, iters=0)
