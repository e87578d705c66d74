# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernel: exhaustive dot-product scoring plus top-k
selection. Must stay numerically identical to `pure.cosine_topk`:
sequential accumulation, ties keep the lower row index."""

from libc.stdlib cimport free, malloc


def cosine_topk(const double[::1] matrix, Py_ssize_t n, Py_ssize_t dim,
                const double[::1] query, Py_ssize_t k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 0:
        return []
    cdef Py_ssize_t i, j, base, picks, best
    cdef double acc, best_score
    cdef double* scores = <double*> malloc(n * sizeof(double))
    cdef unsigned char* used = <unsigned char*> malloc(n * sizeof(unsigned char))
    if scores == NULL or used == NULL:
        free(scores)
        free(used)
        raise MemoryError()
    try:
        for i in range(n):
            base = i * dim
            acc = 0.0
            for j in range(dim):
                acc += matrix[base + j] * query[j]
            scores[i] = acc
            used[i] = 0
        picks = k if k < n else n
        out = []
        for _ in range(picks):
            best = -1
            best_score = 0.0
            for i in range(n):
                if used[i]:
                    continue
                # strict > keeps the earliest index on exact ties
                if best < 0 or scores[i] > best_score:
                    best = i
                    best_score = scores[i]
            used[best] = 1
            out.append((best, scores[best]))
        return out
    finally:
        free(scores)
        free(used)
