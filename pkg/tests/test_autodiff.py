import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamescribe import autodiff as ad
from gamescribe.autodiff import (
    Parameter,
    ParamStore,
    ShapeError,
    Tensor,
    backward,
    grad_check,
    load_tensors,
    save_tensors,
    toposort,
)
from gamescribe.gradcheck import check_primitives, primitive_checks


class TestPrimitiveValues:
    def test_tanh_of_zero_vector(self):
        assert np.array_equal(ad.tanh(Tensor(np.zeros(4))).data, np.zeros(4))

    def test_sigmoid_of_zero(self):
        assert ad.sigmoid(Tensor(np.asarray(0.0))).item() == 0.5

    def test_sigmoid_extreme_inputs_stay_finite(self):
        out = ad.sigmoid(Tensor(np.array([-1e4, 1e4]))).data
        assert np.all(np.isfinite(out)) and out[0] == 0.0 and out[1] == 1.0

    def test_bilinear_matches_dense(self, rng):
        u, w, v = rng.normal(size=3), rng.normal(size=(3, 5)), rng.normal(size=5)
        got = ad.bilinear(Tensor(u), Tensor(w), Tensor(v)).item()
        assert got == pytest.approx(u @ w @ v)

    def test_nll_matches_log_softmax(self, rng):
        logits = rng.normal(size=7) * 3
        t = Tensor(logits)
        direct = float(ad.nll_from_logits(t, 4).data)
        composed = -math.log(float(ad.softmax(t).data[4]))
        assert direct == pytest.approx(composed, rel=1e-12)

    def test_bce_matches_log_sigmoid(self):
        x = Tensor(np.asarray(1.3))
        assert float(ad.bce_with_logits(x, 1).data) == pytest.approx(-math.log(1 / (1 + math.exp(-1.3))))
        assert float(ad.bce_with_logits(x, 0).data) == pytest.approx(-math.log(1 - 1 / (1 + math.exp(-1.3))))

    def test_shape_mismatch_is_descriptive(self):
        with pytest.raises(ShapeError, match="add"):
            ad.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))
        with pytest.raises(ShapeError, match="matmul"):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros(4)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=-500, max_value=500), min_size=1, max_size=12))
def test_softmax_normalized_and_positive(values):
    out = ad.softmax(Tensor(np.array(values, dtype=np.float64))).data
    assert np.all(out >= 0)
    assert abs(out.sum() - 1.0) <= 1e-9


class TestBackward:
    def test_sum_gives_ones(self):
        p = Parameter("p", np.array([1.0, -2.0, 3.0]))
        backward(ad.tsum(p))
        assert np.array_equal(p.grad, np.ones(3))

    def test_dot_square_gradient(self):
        p = Parameter("p", np.array([1.0, 2.0]))
        backward(ad.matmul(p, p))
        assert np.allclose(p.grad, [2.0, 4.0])

    def test_non_scalar_loss_rejected(self):
        p = Parameter("p", np.ones(3))
        with pytest.raises(ShapeError, match="scalar"):
            backward(ad.tanh(p))

    def test_repeated_backward_accumulates(self):
        p = Parameter("p", np.array([1.0, 2.0]))
        backward(ad.tsum(p))
        backward(ad.tsum(p))
        assert np.array_equal(p.grad, [2.0, 2.0])
        p.zero_grad()
        assert np.array_equal(p.grad, [0.0, 0.0])

    def test_diamond_graph_visits_each_node_once(self):
        p = Parameter("p", np.array([0.5, -0.5]))
        shared = ad.tanh(p)
        loss = ad.tsum(shared + shared)  # diamond: shared feeds add twice
        order = toposort(loss)
        assert len(order) == len({id(n) for n in order})
        backward(loss)
        # d/dp sum(2*tanh(p)) = 2*(1 - tanh^2 p)
        assert np.allclose(p.grad, 2 * (1 - np.tanh(p.data) ** 2))

    def test_deterministic_bit_identical(self):
        def run():
            rng = np.random.default_rng(33)
            p = Parameter("p", rng.normal(size=(4, 3)))
            x = Tensor(rng.normal(size=3))
            backward(ad.tsum(ad.tanh(ad.matmul(p, x))))
            return p.grad.copy()

        assert np.array_equal(run(), run())


class TestGradCheckSuite:
    def test_every_primitive_many_random_seeds(self):
        # >= 100 (primitive, seed) combinations against central differences
        names = sorted(primitive_checks().keys())
        assert len(names) >= 20
        worst = 0.0
        for seed in range(5):
            for name, builder in primitive_checks().items():
                rng = np.random.default_rng(hash((name, seed)) % 2**32)
                f, params = builder(rng)
                report = grad_check(f, params, epsilon=1e-5)
                worst = max(worst, report.max_relative_error)
        assert worst <= 1e-4

    def test_sigmoid_of_dot_is_tight(self, rng):
        a = Parameter("a", rng.normal(size=6))
        b = Parameter("b", rng.normal(size=6))
        report = grad_check(lambda: ad.sigmoid(ad.matmul(a, b)), [a, b])
        assert report.max_relative_error <= 1e-6

    def test_constant_function_has_zero_gradients(self):
        p = Parameter("p", np.ones(4))
        report = grad_check(lambda: Tensor(np.asarray(3.0)), [p])
        assert report.max_relative_error == 0.0

    def test_report_shape(self):
        results = check_primitives(seed=1)
        assert set(results) == set(primitive_checks())
        assert all(v <= 1e-4 for v in results.values())


class TestParamStoreAndCheckpoint:
    def test_duplicate_names_rejected(self):
        store = ParamStore()
        store.add(Parameter("w", np.zeros(2)))
        with pytest.raises(ValueError, match="duplicate"):
            store.add(Parameter("w", np.zeros(2)))

    def test_save_load_round_trip(self, tmp_path, rng):
        tensors = {
            "a.w": rng.normal(size=(3, 4)),
            "b": rng.normal(size=7),
            "c.scalar": np.asarray(2.5),
        }
        path = tmp_path / "ck.bin"
        save_tensors(path, tensors)
        back = load_tensors(path)
        assert set(back) == set(tensors)
        for k in tensors:
            assert np.array_equal(back[k], tensors[k])
            assert back[k].dtype == np.float64

    def test_truncated_file_rejected(self, tmp_path, rng):
        path = tmp_path / "ck.bin"
        save_tensors(path, {"w": rng.normal(size=16)})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_tensors(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_tensors(path)

    def test_store_shape_mismatch_rejected(self, tmp_path):
        store = ParamStore()
        store.add(Parameter("w", np.zeros((2, 2))))
        save_tensors(tmp_path / "ck.bin", {"w": np.zeros(5)})
        with pytest.raises(ValueError, match="shape"):
            store.load(tmp_path / "ck.bin")

    def test_store_name_mismatch_rejected(self, tmp_path):
        store = ParamStore()
        store.add(Parameter("w", np.zeros(2)))
        save_tensors(tmp_path / "ck.bin", {"other": np.zeros(2)})
        with pytest.raises(ValueError, match="mismatch"):
            store.load(tmp_path / "ck.bin")

    def test_non_finite_values_rejected_on_load(self, tmp_path):
        arr = np.zeros(4)
        arr[1] = np.nan
        path = tmp_path / "ck.bin"
        # bypass Parameter's finite check by writing the container directly
        save_tensors(path, {"w": arr})
        with pytest.raises(ValueError, match="non-finite"):
            load_tensors(path)
