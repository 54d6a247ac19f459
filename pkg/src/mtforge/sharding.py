"""Deterministic corpus sharding with per-epoch shard scheduling.

Every corpus gets ceil(size / base size) shards relative to a designated
base (lowest-resource) corpus, so each epoch draws a roughly base-sized
slice from every corpus: high-resource and synthetic data are downsampled
rather than low-resource data upsampled.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping

from mtforge.errors import ConfigError, DataError


@dataclass
class ShardPlan:
    # corpus -> (total line count, shard count); line i of a corpus belongs
    # to shard i mod s, and epoch e uses shard e mod s.
    corpora: Dict[str, "CorpusShards"]

    def shard_count(self, corpus: str) -> int:
        return self.corpora[corpus].shards


@dataclass
class CorpusShards:
    lines: int
    shards: int


def plan_shards(sizes: Mapping[str, int], base_corpus: str) -> ShardPlan:
    """Base corpus gets one shard; corpus c gets max(1, ceil(size_c / size_base))."""
    if not sizes:
        raise ConfigError("empty_sizes", "need at least one corpus")
    if base_corpus not in sizes:
        raise ConfigError("unknown_base_corpus", f"{base_corpus!r} not in sizes")
    for name, count in sizes.items():
        if count <= 0:
            raise DataError("empty_corpus", f"{name}: corpus size must be > 0")
    base = sizes[base_corpus]
    corpora = {}
    for name, count in sizes.items():
        shards = 1 if name == base_corpus else max(1, math.ceil(count / base))
        corpora[name] = CorpusShards(lines=count, shards=shards)
    return ShardPlan(corpora=corpora)


def write_shards(lines: Iterable[str], s: int, out_dir: str, corpus: str) -> List[str]:
    """Round-robin lines into `<corpus>.shard<k>.txt`; returns the file paths."""
    if s < 1:
        raise ConfigError("bad_shard_count", "shard count must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f"{corpus}.shard{k}.txt") for k in range(s)]
    files = [open(p, "w", encoding="utf-8") for p in paths]
    try:
        for i, line in enumerate(lines):
            files[i % s].write(line.rstrip("\n") + "\n")
    finally:
        for fp in files:
            fp.close()
    return paths


def epoch_manifest(plan: ShardPlan, epoch: int) -> Dict[str, int]:
    """corpus -> shard index used in this epoch."""
    if epoch < 0:
        raise ConfigError("bad_epoch", "epoch must be >= 0")
    return {name: epoch % cs.shards for name, cs in plan.corpora.items()}


def save_plan(plan: ShardPlan, path: str) -> None:
    doc = {name: {"lines": cs.lines, "shards": cs.shards} for name, cs in plan.corpora.items()}
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2, sort_keys=True)
        fp.write("\n")


def load_plan(path: str) -> ShardPlan:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    return ShardPlan(
        corpora={name: CorpusShards(lines=v["lines"], shards=v["shards"]) for name, v in doc.items()}
    )
