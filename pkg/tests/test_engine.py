"""End-to-end scheduling, metrics, cost estimation, and oracle verification."""

import numpy as np
import pytest

from slotcnn import (
    Backend,
    CostModel,
    HEParams,
    ModelSpec,
    builtin,
    builtin_names,
    estimate_cost,
    footprint,
    infer,
    reference_infer,
    run_inference,
    verify_against_oracle,
)
from slotcnn.errors import SlotCnnError

PARAMS = HEParams()

LEVEL_TRACES = {
    "M1": [7, 6, 5, 3, 2, 1, 0],
    "M2": [7, 6, 5, 5, 4, 3, 3, 1, 0],
    "M3": [9, 8, 6, 6, 4, 3, 1, 0],
    "M4": [9, 8, 7, 7, 6, 5, 5, 4, 3, 3, 2, 1, 0],
    "M5": [8, 7, 6, 6, 5, 4, 4, 3, 2, 2, 1, 0],
    "M6": [7, 6, 5, 3, 2, 1, 0],
    "M7": [7, 6, 5, 4, 3, 2, 1, 0],
}


def rand_samples(m, count, seed=0):
    rng = np.random.default_rng(seed)
    return list(rng.uniform(0.0, 1.0, size=(count, m.channels, m.height, m.width)))


class TestInference:
    def test_m1_matches_oracle_exactly(self):
        m = builtin("M1")
        samples = rand_samples(m, 1)
        outputs, metrics, _ = run_inference(m, samples, PARAMS)
        want = reference_infer(m, samples[0])
        assert np.array_equal(outputs[0], want)
        assert np.argmax(outputs[0]) == np.argmax(want)

    def test_m7_five_logits(self):
        m = builtin("M7")
        samples = rand_samples(m, 3, seed=2)
        outputs, _, _ = run_inference(m, samples, PARAMS)
        assert len(outputs) == 3
        for sample, out in zip(samples, outputs):
            assert out.shape == (5,)
            assert np.array_equal(out, reference_infer(m, sample))

    @pytest.mark.parametrize("name", builtin_names())
    def test_level_trace(self, name):
        m = builtin(name)
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        assert [row.level_after for row in metrics.per_layer] == LEVEL_TRACES[name]
        assert metrics.per_layer[0].name == "Drop Level"
        assert metrics.per_layer[0].level_after == metrics.total_mults
        assert metrics.per_layer[-1].level_after == 0

    def test_m1_operation_totals(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        totals = metrics.totals()
        assert totals["rotations"] == 209
        assert totals["pt_mults"] == 376
        assert totals["ct_mults"] == 9
        assert totals["adds"] == 395

    def test_m2_layer_rows(self):
        m = builtin("M2")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        names = [row.name for row in metrics.per_layer]
        assert names == [
            "Drop Level", "Conv2d", "Square", "AvgPool2d",
            "Conv2d", "Square", "AvgPool2d", "Flatten", "FC1",
        ]
        conv2 = metrics.per_layer[4]
        assert conv2.rotations == 100 and conv2.pt_mults == 1200

    def test_metrics_match_backend_counter(self):
        m = builtin("M6")
        backend = Backend(PARAMS)
        _, metrics, _ = run_inference(m, rand_samples(m, 2), PARAMS, backend=backend)
        totals = metrics.totals()
        counted = backend.counter.totals()
        for key in counted:
            assert totals[key] == counted[key]

    def test_fc_rows_carry_schedule_detail(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        fc2 = metrics.per_layer[-1]
        assert fc2.detail == {
            "rotation_indices": 10,
            "masked_mults": 20,
            "fold_rotations": 7,
            "nontrivial_rotations": 16,
        }
        assert fc2.rotations == 16 and fc2.pt_mults == 20

    def test_deterministic(self):
        m = builtin("M7", seed=3)
        a_out, a_metrics, _ = run_inference(m, rand_samples(m, 2, seed=5), PARAMS)
        b_out, b_metrics, _ = run_inference(m, rand_samples(m, 2, seed=5), PARAMS)
        for a, b in zip(a_out, b_out):
            assert np.array_equal(a, b)
        assert [r.to_dict() for r in a_metrics.per_layer] == [r.to_dict() for r in b_metrics.per_layer]

    def test_batch_matches_solo(self):
        m = builtin("M6")
        samples = rand_samples(m, 3, seed=7)
        batched, _, _ = run_inference(m, samples, PARAMS)
        for i, sample in enumerate(samples):
            solo, _, _ = run_inference(m, [sample], PARAMS)
            assert np.array_equal(batched[i], solo[0])

    def test_invalid_model_raises(self):
        m = builtin("M1")
        with pytest.raises(SlotCnnError, match="depth budget exceeded"):
            run_inference(m, rand_samples(m, 1), HEParams(depth=6))

    def test_zero_layer_model_passes_through(self):
        m = ModelSpec("empty", 1, 2, 3, ())
        samples = [np.arange(6.0).reshape(1, 2, 3)]
        outputs, metrics, _ = run_inference(m, samples, PARAMS)
        assert np.array_equal(outputs[0], np.arange(6.0))
        assert metrics.per_layer == []

    def test_infer_respects_sample_count(self):
        m = builtin("M7")
        plan = footprint(m, PARAMS)
        from slotcnn import batch_pack, flatten_input

        samples = rand_samples(m, 2, seed=9)
        packed = batch_pack([flatten_input(s) for s in samples], plan)
        outputs, _ = infer(m, packed, PARAMS, plan, n_samples=2)
        assert len(outputs) == 2

    def test_metrics_to_dict_shape(self):
        m = builtin("M7")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        doc = metrics.to_dict()
        assert set(doc) == {"per_layer", "totals"}
        row = doc["per_layer"][0]
        assert set(row) == {"layer", "rotations", "pt_mults", "ct_mults", "adds", "level_after", "est_cost"}


class TestCostModel:
    def test_prices(self):
        cm = CostModel()
        assert cm.price("pt_mult", 1024, 3) == 1024 * 3
        assert cm.price("rotation", 1024, 3) == 1024 * 10 * 9
        assert cm.price("ct_mult", 1024, 3) == 3.0 * 1024 * 3
        assert cm.price("add", 1024, 7) == 1024
        with pytest.raises(ValueError):
            cm.price("bootstrap", 1024, 1)

    def test_estimate_matches_recorded_run(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        assert estimate_cost(metrics, PARAMS) == pytest.approx(metrics.totals()["est_cost"])

    def test_strictly_increasing_in_depth(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        costs = [estimate_cost(metrics, PARAMS, depth_override=d) for d in range(7, 12)]
        assert all(b > a for a, b in zip(costs, costs[1:]))

    def test_budget_below_need_rejected(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        with pytest.raises(ValueError):
            estimate_cost(metrics, PARAMS, depth_override=6)

    def test_zero_layer_model_costs_nothing(self):
        m = ModelSpec("empty", 1, 2, 2, ())
        _, metrics, _ = run_inference(m, [np.zeros((1, 2, 2))], PARAMS)
        assert estimate_cost(metrics, PARAMS) == 0.0

    def test_doubling_ring_more_than_doubles_cost(self):
        m = builtin("M1")
        _, metrics, _ = run_inference(m, rand_samples(m, 1), PARAMS)
        small = estimate_cost(metrics, HEParams(poly_degree=8192))
        large = estimate_cost(metrics, HEParams(poly_degree=16384))
        assert large > 2 * small


class TestVerify:
    def test_exact_without_quantization(self):
        result = verify_against_oracle(builtin("M7"), PARAMS, n_trials=5, seed=1)
        assert result["trials"] == 5
        assert result["max_abs_err"] == 0.0
        assert result["mean_abs_err"] == 0.0
        assert result["argmax_agreement"] == 1.0
        assert result["ok"]

    def test_quantized_m1_error_small_on_unit_inputs(self):
        params = HEParams(quantize=True, scale_bits=32)
        result = verify_against_oracle(builtin("M1"), params, n_trials=3, seed=2, tol=1e-4)
        assert 0.0 < result["max_abs_err"] < 1e-4
        assert result["ok"]

    def test_scale_trend(self):
        coarse = verify_against_oracle(builtin("M7"), HEParams(quantize=True, scale_bits=16), n_trials=4)
        fine = verify_against_oracle(builtin("M7"), HEParams(quantize=True, scale_bits=30), n_trials=4)
        assert fine["mean_abs_err"] < coarse["mean_abs_err"]

    def test_batches_through_capacity(self):
        m = builtin("M6")
        result = verify_against_oracle(m, PARAMS, n_trials=30, seed=3)
        assert result["trials"] == 30 and result["ok"]
