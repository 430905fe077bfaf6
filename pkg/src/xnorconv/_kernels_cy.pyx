# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: tile packing, XNOR+popcount decode, naive convolution,
and the box-filtered scale path.

Same interface as _kernels_py.  Every output element is written by exactly
one thread and computed in a fixed left-to-right order, so results are
bit-identical across thread counts.
"""

import numpy as np

from cython.parallel cimport prange

from libc.math cimport fabs, fabsf
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset

ctypedef unsigned long long u64

cdef extern from *:
    """
    #include <stdint.h>
    static inline int popcount_u64(uint64_t x) { return __builtin_popcountll(x); }
    """
    int popcount_u64(u64 x) nogil

ctypedef fused plane_t:
    float
    double
    signed char

ctypedef fused real_t:
    float
    double

# Multiplying a little-endian word of 0/1 bytes by this constant gathers
# the byte values into the top byte: bit i of (v * MAGIC) >> 56 equals
# byte i of v.
cdef u64 _GATHER = 0x0102040810204080ULL


def pack_plane(const plane_t[:, ::1] plane, int tiles_y, int tiles_x,
               int tile_h, int tile_w, int stride_y, int stride_x,
               u64[:, ::1] out_words, int threads):
    cdef Py_ssize_t h = plane.shape[0]
    cdef Py_ssize_t w = plane.shape[1]
    cdef Py_ssize_t cov_h = (tiles_y - 1) * stride_y + tile_h
    cdef Py_ssize_t cov_w = (tiles_x - 1) * stride_x + tile_w
    cdef Py_ssize_t fill_h = min(h, cov_h)
    cdef Py_ssize_t fill_w = min(w, cov_w)
    # 8-byte margin lets every tile row load one full word.
    mask_arr = np.zeros((cov_h, cov_w + 8), dtype=np.uint8)
    cdef unsigned char[:, ::1] bytemask = mask_arr
    cdef Py_ssize_t n = tiles_y * tiles_x
    cdef Py_ssize_t t, ty, tx, oy, ox, r, c, y, x
    cdef u64 word, chunk, row_bits
    cdef u64 col_mask = ((<u64>1) << tile_w) - 1

    for y in prange(fill_h, nogil=True, num_threads=threads, schedule="static"):
        for x in range(fill_w):
            bytemask[y, x] = plane[y, x] >= 0

    for t in prange(n, nogil=True, num_threads=threads, schedule="static"):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        oy = ty * stride_y
        ox = tx * stride_x
        word = 0
        for r in range(tile_h):
            memcpy(&chunk, &bytemask[oy + r, ox], 8)
            row_bits = ((chunk * _GATHER) >> 56) & col_mask
            word = word | (row_bits << (r * tile_w))
        out_words[ty, tx] = word


def xnor_accumulate(const u64[:, :, ::1] words, const u64[::1] weight_words,
                    u64 mask, int tile_w, int stride_y, int stride_x,
                    int k_area, int[:, ::1] out, int threads):
    cdef Py_ssize_t channels = words.shape[0]
    cdef Py_ssize_t tiles_y = words.shape[1]
    cdef Py_ssize_t tiles_x = words.shape[2]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t n = tiles_y * tiles_x
    cdef Py_ssize_t t, ty, tx, ch, row, col
    cdef int dy, dx, shift, acc
    cdef u64 diff
    for t in prange(n, nogil=True, num_threads=threads, schedule="static"):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        for dy in range(stride_y):
            row = ty * stride_y + dy
            if row >= out_h:
                break
            for dx in range(stride_x):
                col = tx * stride_x + dx
                if col >= out_w:
                    break
                shift = dy * tile_w + dx
                acc = 0
                for ch in range(channels):
                    diff = ((words[ch, ty, tx] >> shift) ^ weight_words[ch]) & mask
                    acc = acc + (k_area - 2 * popcount_u64(diff))
                out[row, col] = acc


def vanilla_conv(const real_t[:, :, ::1] padded, const real_t[:, :, ::1] weights,
                 real_t[:, ::1] out, int threads):
    cdef Py_ssize_t channels = padded.shape[0]
    cdef Py_ssize_t kh = weights.shape[1]
    cdef Py_ssize_t kw = weights.shape[2]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t y, x, ch, ky, kx
    cdef real_t acc
    for y in prange(out_h, nogil=True, num_threads=threads, schedule="static"):
        for x in range(out_w):
            acc = 0
            for ch in range(channels):
                for ky in range(kh):
                    for kx in range(kw):
                        acc = acc + padded[ch, y + ky, x + kx] * weights[ch, ky, kx]
            out[y, x] = acc


def box_mean(const real_t[:, ::1] a, Py_ssize_t kh, Py_ssize_t kw, double scale,
             real_t[:, ::1] tmp, real_t[:, ::1] out, int threads):
    # tmp holds per-row window sums: shape (a_h, a_w - kw + 1).  Sums are
    # evaluated directly per element (not as running windows).
    cdef Py_ssize_t h = a.shape[0]
    cdef Py_ssize_t tmp_w = tmp.shape[1]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef real_t box_scale = <real_t> scale
    cdef Py_ssize_t y, x, d
    cdef real_t acc
    for y in prange(h, nogil=True, num_threads=threads, schedule="static"):
        for x in range(tmp_w):
            acc = 0
            for d in range(kw):
                acc = acc + a[y, x + d]
            tmp[y, x] = acc
    for y in prange(out_h, nogil=True, num_threads=threads, schedule="static"):
        for x in range(out_w):
            acc = 0
            for d in range(kh):
                acc = acc + tmp[y + d, x]
            out[y, x] = acc * box_scale


def scale_rows(const real_t[:, :, ::1] padded, Py_ssize_t kw,
               real_t[:, ::1] tmp, int threads):
    # Fused channel abs-mean + row window sums:
    # tmp[y, x] = sum_{d<kw} mean_ch |padded[ch, y, x+d]|
    cdef Py_ssize_t channels = padded.shape[0]
    cdef Py_ssize_t h = padded.shape[1]
    cdef Py_ssize_t tmp_w = tmp.shape[1]
    cdef real_t inv = <real_t>(1.0 / channels)
    cdef Py_ssize_t y, x, d, ch
    cdef real_t acc, m
    for y in prange(h, nogil=True, num_threads=threads, schedule="static"):
        if channels == 1:
            if real_t is float:
                for x in range(tmp_w):
                    acc = 0
                    for d in range(kw):
                        acc = acc + fabsf(padded[0, y, x + d]) * inv
                    tmp[y, x] = acc
            else:
                for x in range(tmp_w):
                    acc = 0
                    for d in range(kw):
                        acc = acc + fabs(padded[0, y, x + d]) * inv
                    tmp[y, x] = acc
        else:
            for x in range(tmp_w):
                acc = 0
                for d in range(kw):
                    m = 0
                    for ch in range(channels):
                        if real_t is float:
                            m = m + fabsf(padded[ch, y, x + d])
                        else:
                            m = m + fabs(padded[ch, y, x + d])
                    acc = acc + m * inv
                tmp[y, x] = acc


def scale_join(const real_t[:, ::1] tmp, const int[:, ::1] ints, Py_ssize_t kh,
               double scale, double weight_scale, real_t[:, ::1] out, int threads):
    # Fused column window sums + elementwise reconstruction:
    # out[y, x] = ints[y, x] * (sum_{d<kh} tmp[y+d, x] * scale) * weight_scale
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef real_t box_scale = <real_t> scale
    cdef real_t wscale = <real_t> weight_scale
    cdef Py_ssize_t y, x, d
    cdef real_t acc
    for y in prange(out_h, nogil=True, num_threads=threads, schedule="static"):
        for x in range(out_w):
            acc = 0
            for d in range(kh):
                acc = acc + tmp[y + d, x]
            out[y, x] = (<real_t> ints[y, x]) * (acc * box_scale) * wscale


cdef inline void _window_row(const real_t[:, :, ::1] padded, Py_ssize_t y,
                             Py_ssize_t kw, real_t inv, real_t* mean_row,
                             real_t* row, Py_ssize_t out_w) noexcept nogil:
    # row[x] = sum_{d<kw} mean_ch |padded[ch, y, x+d]|, identical to the
    # corresponding scale_rows row.
    cdef Py_ssize_t channels = padded.shape[0]
    cdef Py_ssize_t pw = padded.shape[2]
    cdef Py_ssize_t x, d, ch
    cdef real_t m, acc
    if channels == 1:
        for x in range(pw):
            if real_t is float:
                mean_row[x] = fabsf(padded[0, y, x]) * inv
            else:
                mean_row[x] = fabs(padded[0, y, x]) * inv
    else:
        for x in range(pw):
            m = 0
            for ch in range(channels):
                if real_t is float:
                    m = m + fabsf(padded[ch, y, x])
                else:
                    m = m + fabs(padded[ch, y, x])
            mean_row[x] = m * inv
    if kw == 3:
        for x in range(out_w):
            row[x] = mean_row[x] + mean_row[x + 1] + mean_row[x + 2]
    else:
        for x in range(out_w):
            acc = 0
            for d in range(kw):
                acc = acc + mean_row[x + d]
            row[x] = acc


def xnor_reconstruct(const u64[::1] weight_words, u64 mask,
                     int tile_h, int tile_w, int stride_y, int stride_x,
                     int k_area, const real_t[:, :, ::1] padded,
                     Py_ssize_t kh, Py_ssize_t kw, double scale,
                     double weight_scale, real_t[:, ::1] out, int threads):
    # Single streaming pass over output rows fusing tile packing, the XNOR
    # decode, and the scale reconstruction.  Tile words are packed one tile
    # row at a time into a band-local buffer; row window sums live in a
    # kh-row ring buffer.  Every value equals the split-kernel path bit for
    # bit, so fused and split runs are interchangeable.
    cdef Py_ssize_t channels = padded.shape[0]
    cdef Py_ssize_t ph = padded.shape[1]
    cdef Py_ssize_t pw = padded.shape[2]
    cdef Py_ssize_t out_h = out.shape[0]
    cdef Py_ssize_t out_w = out.shape[1]
    cdef Py_ssize_t tiles_x = (out_w + stride_x - 1) // stride_x
    cdef real_t inv = <real_t>(1.0 / channels)
    cdef real_t box_scale = <real_t> scale
    cdef real_t wscale = <real_t> weight_scale
    cdef Py_ssize_t slab_w = pw + 8
    cdef Py_ssize_t n_bands = min(threads, out_h)
    cdef Py_ssize_t step = (out_h + n_bands - 1) // n_bands
    cdef Py_ssize_t b, y0, y1, y, y2, r, ty, cur_ty, tx, ch, col, col0, d, x
    cdef int dy, dx, shift, shift_base, acc
    cdef u64 diff, w0, ww0, chunk, word
    cdef u64 col_mask = ((<u64>1) << tile_w) - 1
    cdef real_t macc
    cdef real_t* mean_row
    cdef real_t* ring
    cdef real_t* map_row
    cdef real_t* ring_rows[8]
    cdef real_t* r_a
    cdef real_t* r_b
    cdef real_t* r_c
    cdef unsigned char* slab
    cdef unsigned char* srow
    cdef u64* wbuf
    ww0 = weight_words[0]
    for b in prange(n_bands, nogil=True, num_threads=threads, schedule="static"):
        y0 = b * step
        y1 = min(y0 + step, out_h)
        if y0 >= y1:
            continue
        mean_row = <real_t*> malloc(pw * sizeof(real_t))
        ring = <real_t*> malloc(kh * out_w * sizeof(real_t))
        map_row = <real_t*> malloc(out_w * sizeof(real_t))
        slab = <unsigned char*> malloc(tile_h * slab_w)
        wbuf = <u64*> malloc(channels * tiles_x * sizeof(u64))
        for r in range(kh - 1):
            _window_row(padded, y0 + r, kw, inv, mean_row,
                        ring + ((y0 + r) % kh) * out_w, out_w)
        cur_ty = -1
        for y in range(y0, y1):
            _window_row(padded, y + kh - 1, kw, inv, mean_row,
                        ring + ((y + kh - 1) % kh) * out_w, out_w)
            for d in range(kh):
                ring_rows[d] = ring + ((y + d) % kh) * out_w
            # Scaled column sums for this output row (vectorizable pass).
            if kh == 3:
                r_a = ring_rows[0]
                r_b = ring_rows[1]
                r_c = ring_rows[2]
                for col in range(out_w):
                    map_row[col] = (r_a[col] + r_b[col] + r_c[col]) * box_scale
            else:
                for col in range(out_w):
                    macc = ring_rows[0][col]
                    for d in range(1, kh):
                        macc = macc + ring_rows[d][col]
                    map_row[col] = macc * box_scale
            ty = y // stride_y
            dy = <int>(y - ty * stride_y)
            shift_base = dy * tile_w
            if ty != cur_ty:
                # Pack tile row ty for all channels: binarize the tile_h
                # source rows into a byte slab, then gather words.
                cur_ty = ty
                for ch in range(channels):
                    for r in range(tile_h):
                        y2 = ty * stride_y + r
                        srow = slab + r * slab_w
                        memset(srow, 0, slab_w)
                        if y2 < ph:
                            for x in range(pw):
                                srow[x] = padded[ch, y2, x] >= 0
                    for tx in range(tiles_x):
                        col0 = tx * stride_x
                        word = 0
                        for r in range(tile_h):
                            memcpy(&chunk, slab + r * slab_w + col0, 8)
                            word = word | ((((chunk * _GATHER) >> 56) & col_mask)
                                           << (r * tile_w))
                        wbuf[ch * tiles_x + tx] = word
            for tx in range(tiles_x):
                col0 = tx * stride_x
                w0 = wbuf[tx]
                for dx in range(stride_x):
                    col = col0 + dx
                    if col >= out_w:
                        break
                    shift = shift_base + dx
                    diff = ((w0 >> shift) ^ ww0) & mask
                    acc = k_area - 2 * popcount_u64(diff)
                    for ch in range(1, channels):
                        diff = ((wbuf[ch * tiles_x + tx] >> shift)
                                ^ weight_words[ch]) & mask
                        acc = acc + (k_area - 2 * popcount_u64(diff))
                    out[y, col] = (<real_t> acc) * map_row[col] * wscale
        free(mean_row)
        free(ring)
        free(map_row)
        free(slab)
        free(wbuf)
