"""Corpus BLEU (4-gram, single reference, no smoothing) and its tokenizers."""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Sequence

from mtforge.errors import ConfigError

MAX_ORDER = 4

TOKENIZE_SCHEMES = ("intl", "char")


@dataclass
class BleuStats:
    """Additive sufficient statistics for corpus BLEU."""

    clipped: List[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: List[int] = field(default_factory=lambda: [0] * MAX_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def __iadd__(self, other: "BleuStats") -> "BleuStats":
        for n in range(MAX_ORDER):
            self.clipped[n] += other.clipped[n]
            self.totals[n] += other.totals[n]
        self.hyp_len += other.hyp_len
        self.ref_len += other.ref_len
        return self


def tokenize(text: str, scheme: str = "intl") -> List[str]:
    """`intl`: space out unicode punctuation, then split on whitespace.
    `char`: one token per non-whitespace character."""
    if scheme == "intl":
        out = []
        for ch in text:
            if unicodedata.category(ch).startswith("P"):
                out.append(f" {ch} ")
            else:
                out.append(ch)
        return "".join(out).split()
    if scheme == "char":
        return [ch for chunk in text.split() for ch in chunk]
    raise ConfigError("bad_tokenize_scheme", f"unknown scheme {scheme!r}")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str]) -> BleuStats:
    """Clipped n-gram matches of one segment against its reference."""
    stats = BleuStats()
    stats.hyp_len = len(hyp)
    stats.ref_len = len(ref)
    for n in range(1, MAX_ORDER + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        stats.totals[n - 1] = sum(hyp_counts.values())
        stats.clipped[n - 1] = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    return stats


def corpus_bleu(stats: Sequence[BleuStats]) -> float:
    """100 * BP * exp(mean log precision); 0 if any precision is 0."""
    if not stats:
        raise ConfigError("no_stats", "need at least one segment")
    total = BleuStats()
    for s in stats:
        total += s
    if total.hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(MAX_ORDER):
        if total.totals[n] == 0 or total.clipped[n] == 0:
            return 0.0
        log_sum += math.log(total.clipped[n] / total.totals[n])
    bp = min(1.0, math.exp(1.0 - total.ref_len / total.hyp_len))
    return 100.0 * bp * math.exp(log_sum / MAX_ORDER)


def corpus_bleu_from_texts(hyps: Sequence[str], refs: Sequence[str], scheme: str = "intl") -> float:
    if len(hyps) != len(refs):
        raise ConfigError("length_mismatch", "hypothesis/reference counts differ")
    return corpus_bleu([bleu_stats(tokenize(h, scheme), tokenize(r, scheme)) for h, r in zip(hyps, refs)])
