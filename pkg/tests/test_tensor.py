import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import f32_tensor
from xnorconv.tensor import (
    BadMagicError,
    DimensionOverflowError,
    Tensor2,
    Tensor3,
    TruncatedPayloadError,
    channel_abs_mean,
    load_tensor,
    save_tensor,
    zero_pad,
)


class TestConstruction:
    def test_dims(self):
        t = Tensor3(np.zeros((2, 3, 4)))
        assert (t.channels, t.height, t.width) == (2, 3, 4)

    def test_rejects_nan(self):
        data = np.ones((1, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Tensor3(data)

    def test_rejects_inf(self):
        with pytest.raises(ValueError, match="finite"):
            Tensor2(np.array([[1.0, np.inf]]))

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            Tensor3(np.zeros((2, 2)))

    def test_rejects_empty_dim(self):
        with pytest.raises(ValueError):
            Tensor3(np.zeros((0, 2, 2)))

    def test_immutable(self):
        t = Tensor3(np.ones((1, 2, 2)))
        with pytest.raises(ValueError):
            t.data[0, 0, 0] = 5.0


class TestZeroPad:
    def test_ring_of_zeros(self):
        t = Tensor3(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        padded = zero_pad(t, 1)
        expected = np.array([[
            [0, 0, 0, 0],
            [0, 1, 2, 0],
            [0, 3, 4, 0],
            [0, 0, 0, 0],
        ]], dtype=float)
        assert padded.data.shape == (1, 4, 4)
        np.testing.assert_array_equal(padded.data, expected)

    def test_pad_zero_is_identity(self):
        t = Tensor3(np.arange(12, dtype=float).reshape(1, 3, 4))
        np.testing.assert_array_equal(zero_pad(t, 0).data, t.data)

    def test_sum_preserved(self):
        rng = np.random.default_rng(7)
        t = Tensor3(rng.uniform(-1, 1, (3, 5, 5)))
        padded = zero_pad(t, 2)
        assert padded.data.shape == (3, 9, 9)
        assert padded.data.sum() == pytest.approx(t.data.sum(), abs=1e-12)

    def test_negative_pad_rejected(self):
        with pytest.raises(ValueError):
            zero_pad(Tensor3(np.ones((1, 2, 2))), -1)

    @given(pad=st.integers(0, 4), seed=st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_multiset_and_zero_count(self, pad, seed):
        rng = np.random.default_rng(seed)
        c, h, w = 2, 4, 5
        # nonzero values so interior and padding are distinguishable
        t = Tensor3(rng.uniform(0.5, 1.0, (c, h, w)))
        padded = zero_pad(t, pad)
        for ch in range(c):
            inner = np.sort(t.data[ch].ravel())
            outer = np.sort(padded.data[ch].ravel())
            zeros = (h + 2 * pad) * (w + 2 * pad) - h * w
            assert (outer[:zeros] == 0).all()
            np.testing.assert_array_equal(outer[zeros:], inner)


class TestChannelAbsMean:
    def test_two_channel_pixel(self):
        t = Tensor3(np.array([[[3.0]], [[-5.0]]]))
        assert channel_abs_mean(t).data[0, 0] == 4.0

    def test_all_negative_ones(self):
        t = Tensor3(-np.ones((1, 3, 3)))
        np.testing.assert_array_equal(channel_abs_mean(t).data, np.ones((3, 3)))

    def test_matches_pixel_loop(self):
        rng = np.random.default_rng(11)
        t = Tensor3(rng.uniform(-2, 2, (3, 8, 8)))
        got = channel_abs_mean(t)
        for y in range(8):
            for x in range(8):
                want = sum(abs(t.data[ch, y, x]) for ch in range(3)) / 3
                assert got.data[y, x] == pytest.approx(want, abs=1e-6)

    def test_non_negative(self):
        rng = np.random.default_rng(13)
        t = Tensor3(rng.normal(size=(4, 6, 6)))
        assert (channel_abs_mean(t).data >= 0).all()


class TestFixtureFiles:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        t = Tensor3(f32_tensor(rng, (2, 3, 4)))
        path = tmp_path / "t.btsr"
        save_tensor(t, path)
        back = load_tensor(path)
        np.testing.assert_array_equal(back.data, t.data)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.btsr"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagicError):
            load_tensor(path)

    def test_dimension_overflow(self, tmp_path):
        import struct

        path = tmp_path / "huge.btsr"
        path.write_bytes(b"BTSR" + struct.pack("<III", 1, 2**31, 2**31))
        with pytest.raises(DimensionOverflowError):
            load_tensor(path)

    def test_truncated_payload(self, tmp_path):
        import struct

        path = tmp_path / "short.btsr"
        path.write_bytes(b"BTSR" + struct.pack("<III", 1, 2, 2) + b"\x00" * 7)
        with pytest.raises(TruncatedPayloadError):
            load_tensor(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny.btsr"
        path.write_bytes(b"BTSR\x01")
        with pytest.raises(TruncatedPayloadError):
            load_tensor(path)

    @given(
        c=st.integers(1, 8),
        h=st.integers(1, 64),
        w=st.integers(1, 64),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=25, deadline=None)
    def test_round_trip_property(self, c, h, w, seed):
        import tempfile

        rng = np.random.default_rng(seed)
        t = Tensor3(f32_tensor(rng, (c, h, w), -100, 100))
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/p.btsr"
            save_tensor(t, path)
            np.testing.assert_array_equal(load_tensor(path).data, t.data)
