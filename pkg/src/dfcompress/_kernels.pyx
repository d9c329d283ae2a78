# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; loop-for-loop mirror of ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF CO = 0
DEF CI = 1
DEF FX = 4
DEF FY = 5


def conv_nest(const double[:, :, ::1] padded, const double[:, :, :, ::1] weights,
              double[:, :, ::1] out, Py_ssize_t stride):
    cdef Py_ssize_t n_co = weights.shape[0], n_ci = weights.shape[1]
    cdef Py_ssize_t n_fx = weights.shape[2], n_fy = weights.shape[3]
    cdef Py_ssize_t n_x = out.shape[1], n_y = out.shape[2]
    cdef Py_ssize_t co, ci, x, y, fx, fy
    cdef double acc
    for co in range(n_co):
        for ci in range(n_ci):
            for x in range(n_x):
                for y in range(n_y):
                    acc = out[co, x, y]
                    for fx in range(n_fx):
                        for fy in range(n_fy):
                            acc = acc + padded[ci, x * stride + fx, y * stride + fy] * weights[co, ci, fx, fy]
                    out[co, x, y] = acc


cdef inline bint _is_weight_dim(int d):
    return d == CO or d == CI or d == FX or d == FY


def simulate_loop_nest(bounds, spatial, temporal, Py_ssize_t stride, Py_ssize_t px, Py_ssize_t py,
                       int input_policy, int weight_policy, bint weight_latch, int output_policy):
    cdef Py_ssize_t b6[6]
    cdef Py_ssize_t idx[6]
    cdef int k
    for k in range(6):
        b6[k] = bounds[k]
        idx[k] = 0
    cdef int sa = spatial[0], sb = spatial[1]
    cdef int t0 = temporal[0], t1 = temporal[1], t2 = temporal[2], t3 = temporal[3]
    cdef Py_ssize_t n_ci = b6[1], n_x = b6[2], n_y = b6[3], n_fx = b6[4], n_fy = b6[5]
    cdef Py_ssize_t na = b6[sa], nb = b6[sb]
    cdef bint wa = _is_weight_dim(sa), wb = _is_weight_dim(sb)
    cdef Py_ssize_t nslot_b = nb if wb else 1

    cdef cnp.int64_t[::1] in_stamp = np.zeros(b6[1] * px * py, dtype=np.int64)
    cdef cnp.int64_t[::1] w_stamp = np.zeros(b6[0] * b6[1] * n_fx * n_fy, dtype=np.int64)
    cdef cnp.int64_t[::1] out_stamp = np.zeros(b6[0] * n_x * n_y, dtype=np.int64)
    cdef cnp.uint8_t[::1] out_stored = np.zeros(b6[0] * n_x * n_y, dtype=np.uint8)
    cdef cnp.int64_t[::1] latch = np.full((na if wa else 1) * nslot_b, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] acc = np.full(na * nb, -1, dtype=np.int64)

    cdef long long in_reads = 0, w_reads = 0, out_reads = 0, out_writes = 0, regs = 0
    cdef long long step = 0
    cdef Py_ssize_t i0, i1, i2, i3, a, b, slot, pe
    cdef Py_ssize_t co, ci, x, y, fx, fy, i_in, i_w, i_out, held

    for i0 in range(b6[t0]):
        idx[t0] = i0
        for i1 in range(b6[t1]):
            idx[t1] = i1
            for i2 in range(b6[t2]):
                idx[t2] = i2
                for i3 in range(b6[t3]):
                    idx[t3] = i3
                    step += 1
                    for a in range(na):
                        idx[sa] = a
                        for b in range(nb):
                            idx[sb] = b
                            co = idx[0]; ci = idx[1]; x = idx[2]; y = idx[3]; fx = idx[4]; fy = idx[5]
                            i_in = (ci * px + x * stride + fx) * py + y * stride + fy
                            i_w = ((co * n_ci + ci) * n_fx + fx) * n_fy + fy
                            i_out = (co * n_x + x) * n_y + y

                            if input_policy == 0:
                                in_reads += 1
                            elif in_stamp[i_in] != step:
                                in_stamp[i_in] = step
                                in_reads += 1

                            slot = (a if wa else 0) * nslot_b + (b if wb else 0)
                            if weight_policy == 0:
                                w_reads += 1
                            elif weight_policy == 1:
                                if w_stamp[i_w] != step:
                                    w_stamp[i_w] = step
                                    w_reads += 1
                            elif latch[slot] != i_w:
                                w_reads += 1
                            if weight_latch and latch[slot] != i_w:
                                latch[slot] = i_w
                                regs += 1

                            if output_policy == 0:
                                pe = a * nb + b
                                held = acc[pe]
                                if held != i_out:
                                    if held >= 0:
                                        out_writes += 1
                                        out_stored[held] = 1
                                    if out_stored[i_out]:
                                        out_reads += 1
                                    acc[pe] = i_out
                                regs += 1
                            elif out_stamp[i_out] != step:
                                out_stamp[i_out] = step
                                if out_stored[i_out]:
                                    out_reads += 1
                                out_stored[i_out] = 1
                                out_writes += 1
    if output_policy == 0:
        for pe in range(na * nb):
            if acc[pe] >= 0:
                out_writes += 1
    return in_reads, w_reads, out_reads, out_writes, regs
