# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled annotation-sampling kernel.

Must stay byte-identical to kernels.sampling_py: same uniform-consumption
layout (one row of three uniforms per annotation), same comparisons, same
consensus rule.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sample_many(
    double[::1] gt_cum,
    int proposal,
    double[::1] deltas,
    double[:, :, ::1] noise_cum,
    int a_cons,
    int a_full,
    double agreement,
    double[:, ::1] uniforms,
):
    """See kernels.sampling_py.sample_many for the contract."""
    cdef int n_annotators = deltas.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.empty(a_full, dtype=np.int32)
    cdef cnp.int32_t[::1] out_view = out
    cdef int i, annotator, cls, sampled
    cdef double u

    for i in range(a_full):
        annotator = i % n_annotators
        if proposal >= 0 and uniforms[i, 0] < deltas[annotator]:
            cls = proposal
        else:
            u = uniforms[i, 1]
            cls = 0
            while u >= gt_cum[cls]:
                cls += 1
        u = uniforms[i, 2]
        sampled = cls
        cls = 0
        while u >= noise_cum[annotator, sampled, cls]:
            cls += 1
        out_view[i] = cls

    cdef int n_used = a_full
    cdef int max_count, count, j
    if a_cons < a_full:
        max_count = 0
        for i in range(a_cons):
            count = 0
            for j in range(a_cons):
                if out_view[j] == out_view[i]:
                    count += 1
            if count > max_count:
                max_count = count
        if max_count >= agreement * a_cons - 1e-9:
            n_used = a_cons
    return out[:n_used]
