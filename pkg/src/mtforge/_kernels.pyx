# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics must match mtforge._pykernels bit for bit."""

import numpy as np

from cython.operator cimport dereference, preincrement
from libc.stdint cimport int64_t, uint8_t, uint64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector


cdef inline uint64_t _pack(uint64_t left, uint64_t right) noexcept nogil:
    return (left << 32) | right


cdef class MergeTable:
    """Pair -> (rank, merged id) lookup keyed by packed 32-bit id pairs."""

    cdef unordered_map[uint64_t, uint64_t] table

    def __init__(self, entries):
        cdef uint64_t left, right, rank, merged
        for left, right, rank, merged in entries:
            self.table[_pack(left, right)] = (rank << 32) | merged


def make_merge_table(entries):
    return MergeTable(entries)


def encode_word(MergeTable table, ids):
    """Apply merges to one word in learned (rank) order; see _pykernels."""
    cdef vector[uint64_t] syms
    cdef uint64_t x
    for x in ids:
        syms.push_back(x)

    cdef size_t i, j, n
    cdef uint64_t best_rank = 0, rank, packed, left = 0, right = 0, merged
    cdef bint found
    cdef unordered_map[uint64_t, uint64_t].iterator it

    while syms.size() >= 2:
        n = syms.size()
        found = False
        for i in range(n - 1):
            it = table.table.find(_pack(syms[i], syms[i + 1]))
            if it != table.table.end():
                rank = dereference(it).second >> 32
                if not found or rank < best_rank:
                    found = True
                    best_rank = rank
                    left = syms[i]
                    right = syms[i + 1]
        if not found:
            break
        merged = table.table[_pack(left, right)] & <uint64_t> 0xFFFFFFFF
        j = 0
        i = 0
        while i < n:
            if i + 1 < n and syms[i] == left and syms[i + 1] == right:
                syms[j] = merged
                i += 2
            else:
                syms[j] = syms[i]
                i += 1
            j += 1
        syms.resize(j)
    return [int(syms[i]) for i in range(syms.size())]


def count_pairs(flat_ids, offsets, freqs):
    """Count adjacent symbol pairs over a word list; see _pykernels."""
    cdef int64_t[::1] ids_v = np.ascontiguousarray(flat_ids, dtype=np.int64)
    cdef int64_t[::1] off_v = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int64_t[::1] freq_v = np.ascontiguousarray(freqs, dtype=np.int64)
    cdef unordered_map[uint64_t, int64_t] counts
    cdef Py_ssize_t w, i, start, end
    cdef int64_t f
    cdef Py_ssize_t n_words = off_v.shape[0] - 1
    for w in range(n_words):
        start = off_v[w]
        end = off_v[w + 1]
        f = freq_v[w]
        for i in range(start, end - 1):
            counts[_pack(<uint64_t> ids_v[i], <uint64_t> ids_v[i + 1])] += f
    out = {}
    cdef unordered_map[uint64_t, int64_t].iterator it = counts.begin()
    cdef uint64_t key
    while it != counts.end():
        key = dereference(it).first
        out[(int(key >> 32), int(key & <uint64_t> 0xFFFFFFFF))] = int(dereference(it).second)
        preincrement(it)
    return out


def assign_capacity(top1, top2, int num_experts, long capacity):
    """Two-pass capacity-constrained assignment; see _pykernels."""
    cdef int64_t[::1] t1 = np.ascontiguousarray(top1, dtype=np.int64)
    cdef int64_t[::1] t2 = np.ascontiguousarray(top2, dtype=np.int64)
    cdef Py_ssize_t n = t1.shape[0]
    keep1_arr = np.zeros(n, dtype=np.uint8)
    keep2_arr = np.zeros(n, dtype=np.uint8)
    load_arr = np.zeros(num_experts, dtype=np.int64)
    cdef uint8_t[::1] keep1 = keep1_arr
    cdef uint8_t[::1] keep2 = keep2_arr
    cdef int64_t[::1] load = load_arr
    cdef Py_ssize_t t
    cdef int64_t e
    for t in range(n):
        e = t1[t]
        if load[e] < capacity:
            keep1[t] = 1
            load[e] += 1
    for t in range(n):
        if keep1[t] == 0:
            e = t2[t]
            if load[e] < capacity:
                keep2[t] = 1
                load[e] += 1
    for t in range(n):
        if keep1[t] == 1:
            e = t2[t]
            if load[e] < capacity:
                keep2[t] = 1
                load[e] += 1
    return keep1_arr, keep2_arr, load_arr
