"""Pure-Python twin of the compiled search kernel.

Arithmetic is kept bit-identical to the Cython version: dot products
accumulate sequentially in IEEE doubles, and ties resolve to the lower
row index. Either implementation may serve a given process; results must
not depend on which one did.
"""

from __future__ import annotations

from typing import Sequence


def dot_scores(matrix: Sequence[float], n: int, dim: int, query: Sequence[float]) -> list[float]:
    """Row-wise dot products of an n*dim row-major matrix with a query."""
    scores = []
    for i in range(n):
        base = i * dim
        acc = 0.0
        for j in range(dim):
            acc += matrix[base + j] * query[j]
        scores.append(acc)
    return scores


def cosine_topk(
    matrix: Sequence[float], n: int, dim: int, query: Sequence[float], k: int
) -> list[tuple[int, float]]:
    """Top-k rows by dot product (cosine, for normalized rows).

    Returns (row_index, score) pairs sorted by descending score; equal
    scores keep the earlier row first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = dot_scores(matrix, n, dim, query)
    order = sorted(range(n), key=lambda i: (-scores[i], i))[: min(k, n)]
    return [(i, scores[i]) for i in order]
