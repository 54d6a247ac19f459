"""Kernel backend selection: compiled extension when available, else pure Python.

Set MTFORGE_PURE_PYTHON=1 to force the fallback (used by the benchmark and
for debugging). `kernels` exposes make_merge_table / encode_word /
count_pairs / assign_capacity with identical semantics either way.
"""

import os

if os.environ.get("MTFORGE_PURE_PYTHON"):
    from mtforge import _pykernels as kernels

    COMPILED = False
else:
    try:
        from mtforge import _kernels as kernels  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from mtforge import _pykernels as kernels  # type: ignore[no-redef]

        COMPILED = False


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"
