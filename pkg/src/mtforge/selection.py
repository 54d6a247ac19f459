"""Cross-entropy-difference selection of in-domain monolingual data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from mtforge.errors import ConfigError
from mtforge.ngram_lm import NGramModel, lm_cross_entropy, tokenize_for_lm

DEFAULT_THRESHOLD = 0.01

# Selection modes. "in_domain" keeps sentences the in-domain LM scores much
# better than the general LM (score < -threshold). "literal" keeps sentences
# with score > threshold, i.e. the inequality written the other way around.
MODE_IN_DOMAIN = "in_domain"
MODE_LITERAL = "literal"


@dataclass
class SelectionConfig:
    in_domain_lm: NGramModel
    general_lm: NGramModel
    threshold: float = DEFAULT_THRESHOLD
    mode: str = MODE_IN_DOMAIN

    def __post_init__(self):
        if self.mode not in (MODE_IN_DOMAIN, MODE_LITERAL):
            raise ConfigError("bad_selection_mode", f"unknown mode {self.mode!r}")
        if math.isnan(self.threshold):
            raise ConfigError("bad_threshold", "threshold must not be NaN")


@dataclass
class SelectionStats:
    selected: int = 0
    total: int = 0

    @property
    def frac(self) -> float:
        return self.selected / self.total if self.total else 0.0


def ml_score(cfg: SelectionConfig, tokens: Sequence[str]) -> float:
    """H_in_domain(s) - H_general(s), in nats per token."""
    return lm_cross_entropy(cfg.in_domain_lm, tokens) - lm_cross_entropy(cfg.general_lm, tokens)


def keeps(cfg: SelectionConfig, tokens: Sequence[str]) -> bool:
    score = ml_score(cfg, tokens)
    if cfg.mode == MODE_IN_DOMAIN:
        return score < -cfg.threshold
    return score > cfg.threshold


def select(
    cfg: SelectionConfig,
    lines: Iterable[str],
    stats: SelectionStats | None = None,
) -> Iterator[str]:
    """Order-preserving filter over raw text lines; fills `stats` if given."""
    for line in lines:
        if stats is not None:
            stats.total += 1
        if keeps(cfg, tokenize_for_lm(line)):
            if stats is not None:
                stats.selected += 1
            yield line
