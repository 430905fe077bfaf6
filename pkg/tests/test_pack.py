import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import BACKENDS, placement_count
from xnorconv.binarize import SignPlane, sign_plane
from xnorconv.pack import (
    OverlapMismatchError,
    PackedTileGrid,
    TileGeometry,
    pack,
    tile_grid_shape,
    unpack,
)
from xnorconv.tensor import Tensor2


def random_sign_plane(rng, h, w):
    return SignPlane((rng.integers(0, 2, (h, w)) * 2 - 1).astype(np.int8))


class TestTileGeometry:
    def test_64_bit_shape(self):
        g = TileGeometry(64, 3, 3)
        assert (g.tile_h, g.tile_w) == (8, 8)
        assert (g.stride_y, g.stride_x) == (6, 6)

    def test_32_bit_shape(self):
        g = TileGeometry(32, 3, 3)
        assert (g.tile_h, g.tile_w) == (8, 4)
        assert (g.stride_y, g.stride_x) == (6, 2)

    def test_kernel_one(self):
        g = TileGeometry(64, 1, 1)
        assert (g.stride_y, g.stride_x) == (8, 8)

    def test_rejects_bad_word_bits(self):
        with pytest.raises(ValueError):
            TileGeometry(16, 3, 3)

    def test_rejects_kernel_too_wide(self):
        with pytest.raises(ValueError):
            TileGeometry(32, 3, 5)
        with pytest.raises(ValueError):
            TileGeometry(64, 9, 3)

    def test_rejects_kernel_zero(self):
        with pytest.raises(ValueError):
            TileGeometry(64, 0, 3)


class TestTileGridShape:
    def test_spec_cases(self):
        assert tile_grid_shape(TileGeometry(64, 3, 3), 16, 16) == (3, 3)
        assert tile_grid_shape(TileGeometry(64, 3, 3), 6, 6) == (1, 1)
        assert tile_grid_shape(TileGeometry(32, 3, 3), 12, 12) == (2, 6)

    def test_rejects_empty_output(self):
        with pytest.raises(ValueError):
            tile_grid_shape(TileGeometry(64, 3, 3), 0, 4)

    @pytest.mark.parametrize("word_bits", [64, 32])
    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_matches_placement_enumeration(self, word_bits, k):
        th, tw = (8, 8) if word_bits == 64 else (8, 4)
        if k > tw:
            pytest.skip("kernel wider than tile")
        geom = TileGeometry(word_bits, k, k)
        for out in range(1, 65, 7):
            ty, tx = tile_grid_shape(geom, out, out)
            assert ty == placement_count(out, geom.stride_y)
            assert tx == placement_count(out, geom.stride_x)


class TestPack:
    def test_all_plus_one_single_tile(self):
        plane = SignPlane(np.ones((8, 8), dtype=np.int8))
        grid = pack(plane, TileGeometry(64, 3, 3))
        assert grid.words.shape == (1, 1)
        assert grid.words[0, 0] == np.uint64(0xFFFF_FFFF_FFFF_FFFF)

    def test_single_bit_top_left(self):
        signs = -np.ones((8, 8), dtype=np.int8)
        signs[0, 0] = 1
        grid = pack(SignPlane(signs), TileGeometry(64, 3, 3))
        assert grid.words[0, 0] == np.uint64(1)

    def test_bit_is_row_major(self):
        signs = -np.ones((8, 8), dtype=np.int8)
        signs[2, 5] = 1  # bit index 2*8 + 5 = 21
        grid = pack(SignPlane(signs), TileGeometry(64, 3, 3))
        assert grid.words[0, 0] == np.uint64(1 << 21)

    def test_32_bit_mode_top_half(self):
        signs = -np.ones((8, 4), dtype=np.int8)
        signs[1, 3] = 1  # bit 1*4 + 3 = 7
        grid = pack(SignPlane(signs), TileGeometry(32, 3, 3))
        assert grid.words[0, 0] == np.uint64(1 << 7)
        assert grid.words[0, 0] < np.uint64(1) << np.uint64(32)

    def test_round_trip_20x20(self):
        rng = np.random.default_rng(21)
        plane = random_sign_plane(rng, 20, 20)
        geom = TileGeometry(64, 3, 3)
        back = unpack(pack(plane, geom), 20, 20)
        np.testing.assert_array_equal(back.signs, plane.signs)

    def test_plane_smaller_than_kernel_rejected(self):
        with pytest.raises(ValueError):
            pack(SignPlane(np.ones((2, 2), dtype=np.int8)), TileGeometry(64, 3, 3))

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("word_bits", [64, 32])
    def test_backends_agree(self, backend, word_bits):
        rng = np.random.default_rng(22)
        plane = random_sign_plane(rng, 33, 47)
        geom = TileGeometry(word_bits, 3, 3)
        base = pack(plane, geom, backend="python")
        other = pack(plane, geom, backend=backend)
        np.testing.assert_array_equal(base.words, other.words)

    @given(
        h=st.integers(8, 64),
        w=st.integers(8, 64),
        word_bits=st.sampled_from([64, 32]),
        k=st.sampled_from([1, 3]),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_round_trip_property(self, h, w, word_bits, k, seed):
        rng = np.random.default_rng(seed)
        plane = random_sign_plane(rng, h, w)
        geom = TileGeometry(word_bits, k, k)
        back = unpack(pack(plane, geom), h, w)
        np.testing.assert_array_equal(back.signs, plane.signs)


class TestUnpack:
    def test_all_ones_grid(self):
        geom = TileGeometry(64, 3, 3)
        words = np.full((2, 2), 0xFFFF_FFFF_FFFF_FFFF, dtype=np.uint64)
        plane = unpack(PackedTileGrid(geom, words), 14, 14)
        assert (plane.signs == 1).all()

    def test_corrupted_overlap_detected(self):
        rng = np.random.default_rng(23)
        plane = random_sign_plane(rng, 14, 14)
        geom = TileGeometry(64, 3, 3)
        grid = pack(plane, geom)
        words = grid.words.copy()
        # flip a bit inside the overlap between tile (0,0) and tile (0,1):
        # tile (0,1) starts at x=6, so tile (0,0) columns 6,7 are shared
        words[0, 0] ^= np.uint64(1) << np.uint64(7)  # row 0, col 7
        with pytest.raises(OverlapMismatchError):
            unpack(PackedTileGrid(geom, words), 14, 14)

    def test_asked_size_beyond_coverage(self):
        geom = TileGeometry(64, 3, 3)
        grid = PackedTileGrid(geom, np.zeros((1, 1), dtype=np.uint64))
        with pytest.raises(ValueError):
            unpack(grid, 30, 30)


class TestCoverage:
    @pytest.mark.parametrize("word_bits,k,out", [(64, 3, 16), (32, 3, 12), (64, 1, 9)])
    def test_valid_regions_tile_output_exactly(self, word_bits, k, out):
        geom = TileGeometry(word_bits, k, k)
        ty, tx = tile_grid_shape(geom, out, out)
        counts = np.zeros((out, out), dtype=int)
        for i in range(ty):
            for j in range(tx):
                y0, x0 = i * geom.stride_y, j * geom.stride_x
                counts[y0 : y0 + geom.stride_y, x0 : x0 + geom.stride_x] += 1
        assert (counts == 1).all()

    def test_popcount_conservation(self):
        # total 1-bits over non-overlapping valid regions = +1 pixels there
        rng = np.random.default_rng(24)
        plane = random_sign_plane(rng, 20, 20)
        geom = TileGeometry(64, 3, 3)
        grid = pack(plane, geom)
        total = 0
        for i in range(grid.tiles_y):
            for j in range(grid.tiles_x):
                word = int(grid.words[i, j])
                for r in range(geom.stride_y):
                    oy = i * geom.stride_y + r
                    if oy >= 20:
                        break
                    for c in range(geom.stride_x):
                        ox = j * geom.stride_x + c
                        if ox >= 20:
                            break
                        total += (word >> (r * geom.tile_w + c)) & 1
        covered_h = min(20, grid.tiles_y * geom.stride_y)
        covered_w = min(20, grid.tiles_x * geom.stride_x)
        assert total == (plane.signs[:covered_h, :covered_w] == 1).sum()

    def test_tail_bits_pack_as_minus_one(self):
        # 9x9 plane with k=3: output 7x7 needs 2x2 tiles, the tail tile
        # reaches beyond the plane and must pack zeros there
        plane = SignPlane(np.ones((9, 9), dtype=np.int8))
        geom = TileGeometry(64, 3, 3)
        grid = pack(plane, geom)
        assert grid.words.shape == (2, 2)
        tail = int(grid.words[1, 1])  # origin (6, 6), covers rows/cols 6..13
        for r in range(8):
            for c in range(8):
                bit = (tail >> (r * 8 + c)) & 1
                inside = (6 + r) < 9 and (6 + c) < 9
                assert bit == (1 if inside else 0)


def test_padding_binarizes_to_plus_one():
    # zero padding applied before sign extraction turns the ring into +1
    from xnorconv.tensor import Tensor3, zero_pad

    t = Tensor3(-np.ones((1, 4, 4)))
    padded = zero_pad(t, 1)
    s = sign_plane(Tensor2(padded.data[0]))
    assert (s.signs[0, :] == 1).all()
    assert (s.signs[1:-1, 1:-1][1:-1, 1:-1] == -1).all()
