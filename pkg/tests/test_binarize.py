import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xnorconv.binarize import (
    SignPlane,
    combined_scale,
    sign_binarize,
    sign_plane,
)
from xnorconv.tensor import Tensor2, Tensor3


class TestSignBinarize:
    def test_alternating_filter(self):
        w = Tensor3(np.array([[[1, -2, 3], [-4, 5, -6], [7, -8, 9]]], dtype=float))
        approx = sign_binarize(w)
        assert approx.scale == 5.0  # (1+2+...+9)/9
        expected = np.array([[1, -1, 1], [-1, 1, -1], [1, -1, 1]], dtype=np.int8)
        np.testing.assert_array_equal(approx.signs[0].signs, expected)

    def test_all_zero_weights(self):
        approx = sign_binarize(Tensor3(np.zeros((2, 3, 3))))
        assert approx.scale == 0.0
        for plane in approx.signs:
            assert (plane.signs == 1).all()

    def test_scale_matches_scalar_loop(self):
        rng = np.random.default_rng(5)
        w = Tensor3(rng.uniform(-1, 1, (4, 3, 3)))
        approx = sign_binarize(w)
        acc = 0.0
        for v in w.data.ravel():
            acc += abs(float(v))
        assert approx.scale == pytest.approx(acc / w.data.size, abs=1e-6)

    def test_scale_is_l2_optimal_for_signs(self):
        # the mean-absolute scale beats 100 random perturbations of itself
        rng = np.random.default_rng(6)
        w = Tensor3(rng.uniform(-1, 1, (4, 3, 3)))
        approx = sign_binarize(w)
        b = np.stack([p.signs for p in approx.signs]).astype(float)
        best = np.sum((w.data - approx.scale * b) ** 2)
        for _ in range(100):
            other = approx.scale * (1.0 + rng.uniform(-0.5, 0.5))
            assert best <= np.sum((w.data - other * b) ** 2) + 1e-12

    def test_sign_vector_maximizes_dot(self):
        # exhaustive over all sign assignments for small n
        rng = np.random.default_rng(8)
        w = Tensor3(rng.normal(size=(1, 2, 3)))
        flat = w.data.ravel()
        n = flat.size
        returned = np.concatenate(
            [p.signs.ravel() for p in sign_binarize(w).signs]
        ).astype(float)
        best = max(
            float(flat @ (2 * np.array([(m >> i) & 1 for i in range(n)]) - 1))
            for m in range(2**n)
        )
        assert float(flat @ returned) == pytest.approx(best, abs=1e-12)

    @given(lam_exp=st.integers(-3, 3), seed=st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_scale_invariance_of_signs(self, lam_exp, seed):
        lam = 2.0**lam_exp  # power of two: exact in floating point
        rng = np.random.default_rng(seed)
        w = Tensor3(rng.uniform(-1, 1, (2, 3, 3)))
        base = sign_binarize(w)
        scaled = sign_binarize(Tensor3(lam * w.data))
        for a, b in zip(base.signs, scaled.signs):
            np.testing.assert_array_equal(a.signs, b.signs)
        assert scaled.scale == lam * base.scale


class TestSignPlane:
    def test_zero_convention(self):
        x = Tensor2(np.array([[0.5, -0.5], [0.0, -0.0]]))
        np.testing.assert_array_equal(
            sign_plane(x).signs, np.array([[1, -1], [1, 1]], dtype=np.int8)
        )

    def test_all_negative(self):
        x = Tensor2(-np.ones((3, 4)))
        assert (sign_plane(x).signs == -1).all()

    def test_only_plus_minus_one(self):
        rng = np.random.default_rng(9)
        s = sign_plane(Tensor2(rng.normal(size=(10, 10))))
        assert set(np.unique(s.signs)) <= {-1, 1}

    def test_sign_product_multiplicative(self):
        rng = np.random.default_rng(10)
        x = Tensor2(rng.normal(size=(6, 6)))
        y = Tensor2(rng.normal(size=(6, 6)))
        sx = sign_plane(x).signs.astype(np.int32)
        sy = sign_plane(y).signs.astype(np.int32)
        # product of sign planes = sign plane of the elementwise sign product
        prod = sign_plane(Tensor2((sx * sy).astype(float))).signs
        np.testing.assert_array_equal(sx * sy, prod)

    def test_rejects_other_values(self):
        with pytest.raises(ValueError):
            SignPlane(np.array([[1, 0], [-1, 1]], dtype=np.int8))


class TestCombinedScale:
    def test_product(self):
        assert combined_scale(5.0, 0.2) == 1.0

    def test_zero_absorbs(self):
        assert combined_scale(0.0, 123.4) == 0.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            combined_scale(-1.0, 2.0)

    def test_exact_on_separable_magnitudes(self):
        # constant |X| and |W|: (1/n) sum |X_i||W_i| equals the product of
        # the two mean absolute values exactly
        rng = np.random.default_rng(12)
        n = 64
        beta, alpha = 0.75, 0.5
        x = beta * rng.choice([-1.0, 1.0], n)
        w = alpha * rng.choice([-1.0, 1.0], n)
        direct = float(np.mean(np.abs(x) * np.abs(w)))
        assert combined_scale(alpha, beta) == direct
