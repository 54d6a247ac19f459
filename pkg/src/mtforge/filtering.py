"""Bitext/monolingual cleaning: punctuation normalization, length rules, language ID."""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

from mtforge.errors import ConfigError, DataError
from mtforge.records import ParallelRecord, SentenceRecord

# Versioned normalization table. Exhaustive: only these codepoints are mapped.
PUNCT_TABLE: Dict[str, str] = {
    "“": '"', "”": '"', "„": '"', "«": '"', "»": '"',
    "‘": "'", "’": "'",
    "–": "-", "—": "-", "−": "-",
    " ": " ", " ": " ", " ": " ",
}

_TRANSLATE = str.maketrans(PUNCT_TABLE)
_SPACE_RUN = re.compile(" {2,}")

DEFAULT_MAX_LEN = 250
DEFAULT_MAX_RATIO = 3.0
DEFAULT_LID_ALPHA = 0.1
LID_ORDERS = (1, 2, 3, 4)


def normalize_punct(text: str) -> str:
    """Map quote/dash/space variants to ASCII, collapse space runs, trim.

    Idempotent: mapped codepoints never occur in the output.
    """
    text = text.translate(_TRANSLATE)
    text = _SPACE_RUN.sub(" ", text)
    return text.strip(" ")


def token_count(text: str) -> int:
    return len(text.split())


def length_ratio_filter(
    pairs: Iterable[ParallelRecord],
    max_len: int = DEFAULT_MAX_LEN,
    max_ratio: float = DEFAULT_MAX_RATIO,
) -> Iterator[ParallelRecord]:
    """Drop pairs with an over-long side or a length ratio exceeding max_ratio.

    Lengths are whitespace token counts; "exceeding" is strict, so boundary
    values (exactly max_len words, ratio exactly max_ratio) are kept. A pair
    with an empty side has infinite ratio and is dropped.
    """
    if max_len < 1:
        raise ConfigError("bad_max_len", "max_len must be >= 1")
    if max_ratio < 1:
        raise ConfigError("bad_max_ratio", "max_ratio must be >= 1")
    for pair in pairs:
        n_src = token_count(pair.src.text)
        n_tgt = token_count(pair.tgt.text)
        if n_src > max_len or n_tgt > max_len:
            continue
        if min(n_src, n_tgt) == 0:
            continue
        if max(n_src, n_tgt) > max_ratio * min(n_src, n_tgt):
            continue
        yield pair


# --- Character n-gram Naive Bayes language ID ---------------------------------


@dataclass
class LidModel:
    """Multinomial Naive Bayes over character 1..4-grams, add-alpha smoothed.

    log_probs[cls] covers the full shared event space (every n-gram type seen
    in training, any class), so per-class probabilities normalize to 1.
    """

    alpha: float
    log_priors: Dict[str, float]
    log_probs: Dict[str, Dict[str, float]]
    ngram_orders: Tuple[int, ...] = LID_ORDERS

    @property
    def classes(self) -> List[str]:
        return sorted(self.log_priors)


def _char_ngrams(text: str, orders: Sequence[int] = LID_ORDERS) -> Iterator[str]:
    for n in orders:
        for i in range(len(text) - n + 1):
            yield text[i : i + n]


def lid_train(labeled: Iterable[SentenceRecord], alpha: float = DEFAULT_LID_ALPHA) -> LidModel:
    """Train from (text, lang) records; counts are order-independent."""
    if alpha <= 0:
        raise ConfigError("bad_alpha", "alpha must be > 0")
    counts: Dict[str, Counter] = defaultdict(Counter)
    docs: Counter = Counter()
    for rec in labeled:
        if not rec.text:
            raise DataError("empty_training_text", "LID training text must be non-empty")
        docs[rec.lang] += 1
        counts[rec.lang].update(_char_ngrams(rec.text))
    if len(docs) < 2:
        raise ConfigError("too_few_classes", "LID training needs at least 2 distinct labels")

    vocab = set()
    for c in counts.values():
        vocab.update(c)
    v_size = len(vocab)
    total_docs = sum(docs.values())

    log_priors = {cls: math.log(n / total_docs) for cls, n in docs.items()}
    log_probs: Dict[str, Dict[str, float]] = {}
    for cls in docs:
        total = sum(counts[cls].values())
        denom = total + alpha * v_size
        log_probs[cls] = {g: math.log((counts[cls][g] + alpha) / denom) for g in vocab}
    return LidModel(alpha=alpha, log_priors=log_priors, log_probs=log_probs)


def lid_predict(model: LidModel, text: str) -> str:
    """Argmax class; n-grams unseen in training are skipped. Ties break to the
    lexicographically smallest class."""
    grams = Counter(_char_ngrams(text, model.ngram_orders))
    best_cls = None
    best_score = -math.inf
    for cls in model.classes:
        table = model.log_probs[cls]
        score = model.log_priors[cls]
        for g, k in grams.items():
            lp = table.get(g)
            if lp is not None:
                score += k * lp
        if score > best_score:
            best_cls, best_score = cls, score
    assert best_cls is not None
    return best_cls


def lid_filter(
    records: Iterable[SentenceRecord],
    model: LidModel | None,
    expected_lang: str,
    bypass: bool = False,
) -> Iterator[SentenceRecord]:
    """Keep records predicted as expected_lang; bypass passes everything through."""
    if bypass:
        yield from records
        return
    if model is None:
        raise ConfigError("missing_lid_model", "lid_filter needs a model unless bypass is set")
    if expected_lang not in model.log_priors:
        raise ConfigError("unknown_lid_class", f"{expected_lang!r} not in model classes")
    for rec in records:
        if lid_predict(model, rec.text) == expected_lang:
            yield rec


def save_lid(model: LidModel, path: str) -> None:
    doc = {
        "alpha": model.alpha,
        "ngram_orders": list(model.ngram_orders),
        "log_priors": model.log_priors,
        "log_probs": model.log_probs,
    }
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, sort_keys=True, ensure_ascii=False)


def load_lid(path: str) -> LidModel:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    return LidModel(
        alpha=doc["alpha"],
        log_priors=doc["log_priors"],
        log_probs=doc["log_probs"],
        ngram_orders=tuple(doc["ngram_orders"]),
    )
