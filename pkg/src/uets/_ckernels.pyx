# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``; int64 arithmetic throughout."""

from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int64_t INF = 0x3FFFFFFFFFFFFFFF


cdef struct _Search:
    int64_t* table
    int n
    int k
    int cap
    int64_t lower
    int64_t best
    int64_t target
    int* blocks
    int* sizes
    int* labels
    int* best_labels


cdef bint _improve(_Search* s, int i, int used, int64_t cur) nogil:
    cdef int b, top, bit
    cdef int64_t c, nxt
    cdef bint stop
    if i == s.n:
        s.best = cur
        for b in range(s.n):
            s.best_labels[b] = s.labels[b]
        return s.best <= s.lower
    bit = 1 << i
    top = used + 1 if used < s.k else used
    for b in range(top):
        if s.sizes[b] >= s.cap:
            continue
        c = s.table[s.blocks[b] | bit]
        nxt = c if c > cur else cur
        if s.best >= 0 and nxt >= s.best:
            continue
        s.blocks[b] |= bit
        s.sizes[b] += 1
        s.labels[i] = b
        stop = _improve(s, i + 1, used + 1 if b == used else used, nxt)
        s.blocks[b] ^= bit
        s.sizes[b] -= 1
        if stop:
            return True
    return False


cdef bint _first(_Search* s, int i, int used) nogil:
    cdef int b, top, bit
    if i == s.n:
        return True
    bit = 1 << i
    top = used + 1 if used < s.k else used
    for b in range(top):
        if s.sizes[b] >= s.cap or s.table[s.blocks[b] | bit] > s.target:
            continue
        s.blocks[b] |= bit
        s.sizes[b] += 1
        s.labels[i] = b
        if _first(s, i + 1, used + 1 if b == used else used):
            return True
        s.blocks[b] ^= bit
        s.sizes[b] -= 1
    return False


def minmax_partition(table, int n, int k, int cap):
    if n == 0:
        return 0, []
    if k < 1 or <long long>k * cap < n:
        raise ValueError("no partition satisfies the block count and size cap")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] arr = np.ascontiguousarray(table, dtype=np.int64)
    cdef _Search s
    cdef int i
    cdef int64_t lower = 0
    cdef bint found
    for i in range(n):
        if arr[1 << i] > lower:
            lower = arr[1 << i]
    s.table = <int64_t*> arr.data
    s.n = n
    s.k = k
    s.cap = cap
    s.lower = lower
    s.best = -1
    s.blocks = <int*> malloc(k * sizeof(int))
    s.sizes = <int*> malloc(k * sizeof(int))
    s.labels = <int*> malloc(n * sizeof(int))
    s.best_labels = <int*> malloc(n * sizeof(int))
    try:
        for i in range(k):
            s.blocks[i] = 0
            s.sizes[i] = 0
        with nogil:
            _improve(&s, 0, 0, 0)
        s.target = s.best
        for i in range(k):
            s.blocks[i] = 0
            s.sizes[i] = 0
        with nogil:
            found = _first(&s, 0, 0)
        if found:
            labels = [s.labels[i] for i in range(n)]
        else:
            labels = [s.best_labels[i] for i in range(n)]
        return int(s.best), labels
    finally:
        free(s.blocks)
        free(s.sizes)
        free(s.labels)
        free(s.best_labels)


def held_karp_all(dist):
    cdef int p = len(dist)
    cdef int m = p - 1
    if m <= 0:
        return [0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] d = np.ascontiguousarray(dist, dtype=np.int64)
    cdef int full = 1 << m
    cdef cnp.ndarray[cnp.int64_t, ndim=2] dp = np.full((full, m), INF, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tours = np.zeros(full, dtype=np.int64)
    cdef int mask, j, nxt, bit
    cdef int64_t cur, cand, best
    for j in range(m):
        dp[1 << j, j] = d[0, j + 1]
    with nogil:
        for mask in range(1, full):
            for j in range(m):
                cur = dp[mask, j]
                if cur >= INF:
                    continue
                for nxt in range(m):
                    bit = 1 << nxt
                    if mask & bit:
                        continue
                    cand = cur + d[j + 1, nxt + 1]
                    if cand < dp[mask | bit, nxt]:
                        dp[mask | bit, nxt] = cand
        for mask in range(1, full):
            best = INF
            for j in range(m):
                if (mask >> j) & 1:
                    cand = dp[mask, j] + d[j + 1, 0]
                    if cand < best:
                        best = cand
            tours[mask] = best
    return [int(x) for x in tours]


def subadditive_violation(table, int n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(table, dtype=np.int64)
    cdef int s, low, rest, sub, x
    cdef int hit_x = -1, hit_y = -1
    with nogil:
        for s in range(1, 1 << n):
            low = s & -s
            rest = s ^ low
            sub = rest
            while True:
                x = sub | low
                if x != s and t[x] + t[s ^ x] < t[s]:
                    hit_x = x
                    hit_y = s ^ x
                    break
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            if hit_x >= 0:
                break
    if hit_x < 0:
        return None
    return hit_x, hit_y


def monotone_violation(table, int n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(table, dtype=np.int64)
    cdef int s, i, bit
    for s in range(1, 1 << n):
        for i in range(n):
            bit = 1 << i
            if s & bit and t[s ^ bit] > t[s]:
                return s ^ bit, s
    return None


def closure_table(table, int n):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(table, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(1 << n, dtype=np.int64)
    cdef int s, low, rest, sub, x
    cdef int64_t best, cand
    with nogil:
        for s in range(1, 1 << n):
            low = s & -s
            rest = s ^ low
            best = t[s]
            sub = rest
            while True:
                x = sub | low
                if x != s:
                    cand = t[x] + out[s ^ x]
                    if cand < best:
                        best = cand
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            out[s] = best
    return [int(v) for v in out]
