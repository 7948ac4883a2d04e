import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixprune.allocator import (
    LayerSensitivity,
    allocate_sparsity,
    default_clip_bounds,
    layer_sensitivity,
    plan_uniform,
)
from mixprune.calibration import hessian_from_rows, invert_hessian
from mixprune.errors import BudgetError, ConfigError
from mixprune.saliency import SaliencyMap, compute_saliency


def sens(*scores, counts=None):
    counts = counts or [100] * len(scores)
    return [
        LayerSensitivity(name=f"layer{i}", score=float(s), param_count=c)
        for i, (s, c) in enumerate(zip(scores, counts))
    ]


class TestLayerSensitivity:
    def test_all_zero_weights_score_zero(self):
        w = np.zeros((2, 4))
        s = SaliencyMap(values=np.zeros((2, 4)), criterion="magnitude")
        assert layer_sensitivity("l", w, s, 0.5).score == 0.0

    def test_worked_example(self):
        state = hessian_from_rows(np.eye(2))
        w = np.array([[3.0, -1.0]])
        s = compute_saliency(w, state, invert_hessian(state), "obs")
        result = layer_sensitivity("l", w, s, 0.5)
        assert result.score == pytest.approx(0.5)  # smallest 1 of {9, 1} over N = 2
        assert result.param_count == 2

    def test_duplicating_rows_leaves_score_unchanged(self, rng):
        w = rng.standard_normal((3, 6))
        s = SaliencyMap(values=w**2, criterion="magnitude")
        single = layer_sensitivity("l", w, s, 0.5)
        doubled_w = np.vstack([w, w])
        doubled_s = SaliencyMap(values=doubled_w**2, criterion="magnitude")
        doubled = layer_sensitivity("l", doubled_w, doubled_s, 0.5)
        assert doubled.score == pytest.approx(single.score, rel=1e-12)
        assert doubled.param_count == 2 * single.param_count

    def test_probe_bounds(self, rng):
        w = rng.standard_normal((2, 2))
        s = SaliencyMap(values=w**2, criterion="magnitude")
        with pytest.raises(ConfigError):
            layer_sensitivity("l", w, s, 0.0)
        with pytest.raises(ConfigError):
            layer_sensitivity("l", w, s, 1.1)


class TestAllocate:
    def test_two_layer_worked_example(self):
        plan = allocate_sparsity(sens(1.0, 3.0), 0.5, p_min=0.0, p_max=1.0)
        assert plan.per_layer["layer0"] == pytest.approx(0.75, abs=1e-9)
        assert plan.per_layer["layer1"] == pytest.approx(0.25, abs=1e-9)

    def test_equal_scores_give_uniform_plan(self):
        plan = allocate_sparsity(sens(2.0, 2.0, 2.0), 0.4, p_min=0.0, p_max=1.0)
        assert all(v == 0.4 for v in plan.per_layer.values())

    def test_clip_then_water_fill(self):
        plan = allocate_sparsity(sens(1.0, 3.0), 0.5, p_min=0.0, p_max=0.6)
        assert plan.per_layer["layer0"] == pytest.approx(0.6, abs=1e-9)
        assert plan.per_layer["layer1"] == pytest.approx(0.4, abs=1e-9)
        assert plan.weighted_mean() == pytest.approx(0.5, abs=1e-9)

    def test_infeasible_high_target_names_bound(self):
        with pytest.raises(BudgetError, match="p_max"):
            allocate_sparsity(sens(1.0, 2.0), 0.8, p_min=0.0, p_max=0.7)

    def test_infeasible_low_target_names_bound(self):
        with pytest.raises(BudgetError, match="p_min"):
            allocate_sparsity(sens(1.0, 2.0), 0.1, p_min=0.2, p_max=0.7)

    def test_empty_layer_list(self):
        with pytest.raises(ConfigError):
            allocate_sparsity([], 0.5)

    def test_param_weighted_budget(self):
        plan = allocate_sparsity(
            sens(1.0, 3.0, counts=[300, 100]), 0.5, p_min=0.0, p_max=1.0
        )
        mean = (plan.per_layer["layer0"] * 300 + plan.per_layer["layer1"] * 100) / 400
        assert mean == pytest.approx(0.5, abs=1e-9)

    def test_monotonicity_higher_score_never_higher_sparsity(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 8))
            scores = rng.exponential(size=n)
            counts = rng.integers(10, 1000, size=n).tolist()
            plan = allocate_sparsity(
                sens(*scores, counts=counts), 0.5, p_min=0.05, p_max=0.9
            )
            values = [plan.per_layer[f"layer{i}"] for i in range(n)]
            for i in range(n):
                for j in range(n):
                    if scores[i] > scores[j]:
                        assert values[i] <= values[j] + 1e-12

    def test_permutation_equivariance(self, rng):
        scores = [0.5, 4.0, 1.5, 0.1]
        counts = [10, 20, 30, 40]
        base = allocate_sparsity(sens(*scores, counts=counts), 0.5, p_min=0.0, p_max=1.0)
        perm = [2, 0, 3, 1]
        sens_perm = [
            LayerSensitivity(name=f"layer{perm[i]}", score=scores[perm[i]], param_count=counts[perm[i]])
            for i in range(4)
        ]
        shuffled = allocate_sparsity(sens_perm, 0.5, p_min=0.0, p_max=1.0)
        for name in base.per_layer:
            assert shuffled.per_layer[name] == pytest.approx(base.per_layer[name], rel=1e-12)

    @pytest.mark.parametrize("scale", [1e-6, 0.5, 3.0, 1e6])
    def test_positive_scaling_invariance(self, rng, scale):
        scores = rng.exponential(size=5) + 0.01
        base = allocate_sparsity(sens(*scores), 0.5, p_min=0.05, p_max=0.9)
        scaled = allocate_sparsity(sens(*(scale * scores)), 0.5, p_min=0.05, p_max=0.9)
        for name in base.per_layer:
            assert scaled.per_layer[name] == pytest.approx(base.per_layer[name], rel=1e-9)

    @given(
        n=st.integers(min_value=1, max_value=9),
        target=st.floats(min_value=0.0, max_value=1.0),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=100, deadline=None)
    def test_budget_exactness_property(self, n, target, seed):
        local = np.random.default_rng(seed)
        scores = local.exponential(size=n)
        counts = local.integers(1, 500, size=n).tolist()
        p_min = float(local.uniform(0, target)) if target > 0 else 0.0
        p_max = float(local.uniform(target, 1.0)) if target < 1 else 1.0
        plan = allocate_sparsity(sens(*scores, counts=counts), target, p_min=p_min, p_max=p_max)
        assert abs(plan.weighted_mean() - target) <= 1e-3
        for value in plan.per_layer.values():
            assert p_min - 1e-12 <= value <= p_max + 1e-12


class TestUniformPlan:
    def test_constant_plan(self):
        plan = plan_uniform(sens(1.0, 2.0, 3.0), 0.5)
        assert list(plan.per_layer.values()) == [0.5, 0.5, 0.5]
        assert plan.weighted_mean() == 0.5

    def test_zero_target_is_noop_plan(self):
        plan = plan_uniform(sens(1.0), 0.0)
        assert plan.per_layer["layer0"] == 0.0


class TestDefaultClipBounds:
    def test_moderate_target(self):
        p_min, p_max = default_clip_bounds(0.5)
        assert p_min == pytest.approx(0.05)
        assert p_max == pytest.approx(0.9)

    def test_high_target_capped(self):
        assert default_clip_bounds(0.75)[1] == pytest.approx(0.9)

    def test_low_target(self):
        p_min, p_max = default_clip_bounds(0.1)
        assert p_min == pytest.approx(0.01)
        assert p_max == pytest.approx(0.2)
