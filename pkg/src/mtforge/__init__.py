"""mtforge: deterministic building blocks for multilingual MT system pipelines.

Library modules mirror the pipeline stages: filtering, ngram_lm, selection,
subword, mining, sharding, moe, checkpoint, rerank, metrics, postprocess.
The `mtforge` CLI binds them behind subcommands. Hot kernels run through a
compiled extension when available; `mtforge._backend.backend_name()` reports
which implementation is active.
"""

from mtforge._backend import COMPILED, backend_name

__version__ = "0.1.0"

__all__ = ["COMPILED", "backend_name", "__version__"]
