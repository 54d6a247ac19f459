"""Noisy-channel reranking of n-best lists and random-search weight tuning.

Each hypothesis combines direct, channel, and language-model log scores as
direct + lambda1 * channel + lambda2 * lm + length_penalty * length.
Tuning samples the three weights uniformly from the given bounds with a
counter-based seeded RNG (trial i depends only on (seed, i)), evaluates
corpus BLEU of the reranked output against the references, and keeps the
earliest best trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from mtforge.errors import ConfigError, DataError
from mtforge.metrics import BleuStats, bleu_stats, corpus_bleu, tokenize
from mtforge.rng import random_uniform

DEFAULT_TRIALS = 1000
DEFAULT_BOUNDS = (0.0, 2.0)


@dataclass(frozen=True)
class Hypothesis:
    text: str
    direct: float
    channel: float
    lm: float
    length: int

    def __post_init__(self):
        for name in ("direct", "channel", "lm"):
            if not math.isfinite(getattr(self, name)):
                raise DataError("nonfinite_score", f"{name} score must be finite")
        if self.length < 0:
            raise DataError("bad_length", "length must be >= 0")


@dataclass
class Segment:
    seg_id: str
    hypotheses: List[Hypothesis]
    source: str = ""

    def __post_init__(self):
        if not self.hypotheses:
            raise DataError("empty_segment", f"segment {self.seg_id!r} has no hypotheses")


@dataclass
class NBestList:
    segments: List[Segment]


@dataclass(frozen=True)
class RerankWeights:
    lambda1: float
    lambda2: float
    length_penalty: float


def combined_score(h: Hypothesis, w: RerankWeights) -> float:
    return h.direct + w.lambda1 * h.channel + w.lambda2 * h.lm + w.length_penalty * h.length


def rerank(nbest: NBestList, w: RerankWeights) -> List[str]:
    """Per-segment argmax of the combined score; ties keep the earliest
    hypothesis."""
    out = []
    for seg in nbest.segments:
        best_idx = 0
        best_score = combined_score(seg.hypotheses[0], w)
        for i, h in enumerate(seg.hypotheses[1:], start=1):
            score = combined_score(h, w)
            if score > best_score:
                best_idx, best_score = i, score
        out.append(seg.hypotheses[best_idx].text)
    return out


def weights_for_trial(seed: int, trial: int, bounds: Tuple[float, float]) -> RerankWeights:
    lo, hi = bounds
    return RerankWeights(
        lambda1=random_uniform(seed, 3 * trial, lo, hi),
        lambda2=random_uniform(seed, 3 * trial + 1, lo, hi),
        length_penalty=random_uniform(seed, 3 * trial + 2, lo, hi),
    )


def tune(
    nbest: NBestList,
    refs: Sequence[str],
    trials: int = DEFAULT_TRIALS,
    bounds: Tuple[float, float] = DEFAULT_BOUNDS,
    seed: int = 0,
    scheme: str = "intl",
    workers: int = 1,
) -> Tuple[RerankWeights, float]:
    """Random search over bounds^3; returns (best weights, BLEU of the best
    trial). Deterministic for a fixed seed regardless of worker count."""
    if len(refs) != len(nbest.segments):
        raise DataError("ref_count_mismatch", "one reference per segment required")
    if trials < 1:
        raise ConfigError("bad_trials", "trials must be >= 1")
    if not bounds[1] >= bounds[0]:
        raise ConfigError("bad_bounds", "bounds must be a non-empty interval")

    # BLEU statistics depend only on which hypothesis wins per segment;
    # precompute them so each trial is a cheap argmax + stat merge.
    seg_stats: List[List[BleuStats]] = []
    for seg, ref in zip(nbest.segments, refs):
        ref_tokens = tokenize(ref, scheme)
        seg_stats.append([bleu_stats(tokenize(h.text, scheme), ref_tokens) for h in seg.hypotheses])

    def evaluate(trial: int) -> Tuple[float, int]:
        w = weights_for_trial(seed, trial, bounds)
        chosen = []
        for seg in nbest.segments:
            best_idx = 0
            best_score = combined_score(seg.hypotheses[0], w)
            for i, h in enumerate(seg.hypotheses[1:], start=1):
                score = combined_score(h, w)
                if score > best_score:
                    best_idx, best_score = i, score
            chosen.append(best_idx)
        bleu = corpus_bleu([seg_stats[s][i] for s, i in enumerate(chosen)])
        return bleu, trial

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, range(trials)))
    else:
        results = [evaluate(t) for t in range(trials)]

    best_bleu, best_trial = results[0]
    for bleu, trial in results[1:]:
        if bleu > best_bleu:
            best_bleu, best_trial = bleu, trial
    return weights_for_trial(seed, best_trial, bounds), best_bleu


# --- n-best file ------------------------------------------------------------------
#
# One hypothesis per line: `seg_id ||| hypothesis text ||| direct channel lm length`.
# Segments are ordered by first appearance; references align to that order.


def read_nbest(fp: TextIO) -> NBestList:
    segments: Dict[str, Segment] = {}
    order: List[str] = []
    hyps: Dict[str, List[Hypothesis]] = {}
    for lineno, line in enumerate(fp, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = [p.strip() for p in line.split("|||")]
        if len(parts) != 3:
            raise DataError("bad_nbest_row", f"line {lineno}: expected 3 `|||`-separated fields")
        seg_id, text, score_block = parts
        fields = score_block.split()
        if len(fields) != 4:
            raise DataError("bad_nbest_scores", f"line {lineno}: expected `direct channel lm length`")
        try:
            direct, channel, lm = (float(x) for x in fields[:3])
            length = int(float(fields[3]))
        except ValueError:
            raise DataError("bad_nbest_scores", f"line {lineno}: unparseable scores")
        if seg_id not in hyps:
            hyps[seg_id] = []
            order.append(seg_id)
        hyps[seg_id].append(Hypothesis(text=text, direct=direct, channel=channel, lm=lm, length=length))
    if not order:
        raise DataError("empty_nbest", "n-best file has no hypotheses")
    return NBestList(segments=[Segment(seg_id=sid, hypotheses=hyps[sid]) for sid in order])


def write_nbest(fp: TextIO, nbest: NBestList) -> None:
    for seg in nbest.segments:
        for h in seg.hypotheses:
            fp.write(f"{seg.seg_id} ||| {h.text} ||| {h.direct} {h.channel} {h.lm} {h.length}\n")
