"""Margin-based parallel sentence mining over precomputed sentence embeddings.

Candidates come from the union of forward and backward exact top-k cosine
neighbor lists; each candidate's ratio margin is its cosine divided by the
mean of the 2k neighbor cosines of its two sides; a greedy one-to-one match
in descending margin order keeps pairs at or above the threshold. All
tie-breaking uses sentence ids, so results are invariant under permutation
of input rows.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from mtforge.errors import ConfigError, DataError

DEFAULT_K = 4
DEFAULT_THRESHOLD = 1.06

MAGIC = b"MTFG-EMB"
NORM_TOLERANCE = 0.01


@dataclass
class EmbeddingSet:
    ids: List[str]
    vectors: np.ndarray  # n x d, rows unit-normalized
    lang: str = ""

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise DataError("bad_embedding_shape", "need an n x d matrix with n >= 1")
        if len(self.ids) != self.vectors.shape[0]:
            raise DataError("id_count_mismatch", "one id per row required")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("duplicate_ids", "sentence ids must be unique")
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise DataError("not_unit_norm", "rows must be unit vectors (load with normalize)")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class MinedPair:
    src_id: str
    tgt_id: str
    margin: float


def normalize_rows(vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("zero_vector", "cannot normalize a zero row")
    return vectors / norms


def knn(
    query: EmbeddingSet,
    index: EmbeddingSet,
    k: int,
    workers: int = 1,
) -> List[List[Tuple[str, float]]]:
    """Exact top-k by cosine for every query row; ties break to the smaller
    index-side id. Chunks of query rows may be scored in parallel; the merged
    result is identical to sequential evaluation."""
    if not (1 <= k <= index.n):
        raise ConfigError("bad_k", f"k must be in 1..{index.n}")
    ids = np.asarray(index.ids)

    def score_chunk(rows: np.ndarray) -> List[List[Tuple[str, float]]]:
        sims = rows @ index.vectors.T
        out = []
        for row in sims:
            order = np.lexsort((ids, -row))[:k]
            out.append([(index.ids[j], float(row[j])) for j in order])
        return out

    if workers > 1 and query.n > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(query.vectors, min(workers, query.n))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(score_chunk, chunks))
        return [item for chunk in results for item in chunk]
    return score_chunk(query.vectors)


def margin_score(
    x: np.ndarray,
    y: np.ndarray,
    nnx: Sequence[float],
    nny: Sequence[float],
    k: int,
) -> float:
    """cos(x, y) / (sum(nnx)/2k + sum(nny)/2k); 0 if the denominator is 0."""
    if len(nnx) != k or len(nny) != k:
        raise ConfigError("bad_neighbor_count", "need exactly k neighbor cosines per side")
    denom = (float(np.sum(nnx)) + float(np.sum(nny))) / (2 * k)
    cos = float(np.dot(x, y))
    if denom == 0.0:
        return 0.0
    return cos / denom


def mine_pairs(
    src: EmbeddingSet,
    tgt: EmbeddingSet,
    k: int = DEFAULT_K,
    threshold: float = DEFAULT_THRESHOLD,
    workers: int = 1,
) -> List[MinedPair]:
    """Greedy one-to-one matching of top-k margin candidates, best first."""
    fwd = knn(src, tgt, k, workers=workers)
    bwd = knn(tgt, src, k, workers=workers)
    tgt_row = {sid: i for i, sid in enumerate(tgt.ids)}
    src_row = {sid: i for i, sid in enumerate(src.ids)}

    mean_fwd = [sum(c for _, c in neighbors) / k for neighbors in fwd]
    mean_bwd = [sum(c for _, c in neighbors) / k for neighbors in bwd]

    candidates = set()
    for i, neighbors in enumerate(fwd):
        for tid, _ in neighbors:
            candidates.add((i, tgt_row[tid]))
    for j, neighbors in enumerate(bwd):
        for sid, _ in neighbors:
            candidates.add((src_row[sid], j))

    scored = []
    for i, j in candidates:
        cos = float(np.dot(src.vectors[i], tgt.vectors[j]))
        denom = (mean_fwd[i] + mean_bwd[j]) / 2.0
        margin = cos / denom if denom != 0.0 else 0.0
        scored.append((margin, src.ids[i], tgt.ids[j]))
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))

    used_src = set()
    used_tgt = set()
    out: List[MinedPair] = []
    for margin, sid, tid in scored:
        if margin < threshold:
            break
        if sid in used_src or tid in used_tgt:
            continue
        used_src.add(sid)
        used_tgt.add(tid)
        out.append(MinedPair(src_id=sid, tgt_id=tid, margin=margin))
    return out


# --- embedding file -------------------------------------------------------------
#
# Little-endian container: magic "MTFG-EMB" | u32 n | u32 d | n*d f32 rows |
# newline-separated UTF-8 ids.


def save_embeddings(es: EmbeddingSet, path: str) -> None:
    n, d = es.vectors.shape
    with open(path, "wb") as fp:
        fp.write(MAGIC)
        fp.write(struct.pack("<II", n, d))
        fp.write(es.vectors.astype("<f4").tobytes())
        fp.write("\n".join(es.ids).encode("utf-8") + b"\n")


def load_embeddings(path: str, lang: str = "", normalize: bool = False) -> EmbeddingSet:
    """Load and unit-normalize rows. Unless `normalize` is set, raw norms must
    already be within 0.01 of 1."""
    with open(path, "rb") as fp:
        buf = fp.read()
    if buf[: len(MAGIC)] != MAGIC:
        raise DataError("bad_magic", f"{path}: not an embedding file")
    off = len(MAGIC)
    n, d = struct.unpack_from("<II", buf, off)
    off += 8
    count = n * d
    vectors = np.frombuffer(buf, dtype="<f4", count=count, offset=off).astype(np.float64)
    vectors = vectors.reshape(n, d)
    off += 4 * count
    ids = buf[off:].decode("utf-8").splitlines()
    if len(ids) != n:
        raise DataError("id_count_mismatch", f"{path}: {len(ids)} ids for {n} rows")
    if not normalize:
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
            raise DataError(
                "not_unit_norm",
                f"{path}: row norms deviate from 1 by more than {NORM_TOLERANCE}",
            )
    return EmbeddingSet(ids=ids, vectors=normalize_rows(vectors), lang=lang)
