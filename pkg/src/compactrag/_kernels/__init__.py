"""Hot search kernels with import-time backend selection.

The compiled Cython kernel is preferred; the pure-Python twin loads when
the extension is unavailable or COMPACTRAG_PURE_KERNELS is set. Both
produce bit-identical results (see benchmarks/bench_kernels.py for the
speed comparison).
"""

import os

from compactrag._kernels.pure import cosine_topk as _pure_cosine_topk

if os.environ.get("COMPACTRAG_PURE_KERNELS", "") not in ("", "0"):
    cosine_topk = _pure_cosine_topk
    KERNEL_IMPL = "pure"
else:
    try:
        from compactrag._kernels._cosine import cosine_topk  # type: ignore[no-redef]

        KERNEL_IMPL = "compiled"
    except ImportError:
        cosine_topk = _pure_cosine_topk
        KERNEL_IMPL = "pure"

__all__ = ["KERNEL_IMPL", "cosine_topk"]
