"""Word n-gram language model with interpolated Kneser-Ney smoothing.

A single fixed discount D is used at every level. Lower-order distributions
use continuation counts derived from the top-level n-grams; the unigram
level interpolates discounted continuation counts with the uniform
distribution over the event space (word types + EOS + UNK), which makes
every conditional distribution sum to exactly 1 and gives unseen words
(scored as UNK) the positive floor probability stored on the model.

Models score from an ARPA-style table (conditional probability for every
observed n-gram plus one backoff weight per observed context), so a model
scores identically before and after serialization.
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Set, Tuple

from mtforge.errors import ConfigError, DataError
from mtforge.filtering import normalize_punct
from mtforge.records import SentenceRecord

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

DEFAULT_ORDER = 5
DEFAULT_DISCOUNT = 0.75

MAGIC = b"MTFG-NGLM"
VERSION = 1
_BACKOFF_ID = 0xFFFFFFFF

Context = Tuple[str, ...]


@dataclass
class NGramModel:
    order: int
    discount: float
    vocab: Set[str]  # event vocabulary (words + EOS + UNK) plus BOS
    prob_table: Dict[Context, Dict[str, float]]  # context -> {word: p(word|context)}
    backoffs: Dict[Context, float]  # context -> interpolation weight for shorter context
    unigram_floor: float  # probability of any zero-continuation-count event (e.g. UNK)

    def events(self) -> Dict[str, float]:
        """Unigram distribution over every predictable token."""
        return self.prob_table[()]

    def map_token(self, token: str) -> str:
        return token if token in self.prob_table[()] else UNK

    def prob(self, context: Sequence[str], word: str) -> float:
        """p(word | context); word must be in the event vocabulary.

        Walks from the longest stored context down, multiplying backoff
        weights of observed-but-unmatched contexts. Unobserved contexts
        back off transparently (weight 1).
        """
        ctx = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        weight = 1.0
        while True:
            entry = self.prob_table.get(ctx)
            if entry is not None:
                p = entry.get(word)
                if p is not None:
                    return weight * p
            if not ctx:
                # unknown event: identical to UNK (zero counts at every level)
                return weight * self.prob_table[()][UNK]
            gamma = self.backoffs.get(ctx)
            if gamma is not None:
                weight *= gamma
            ctx = ctx[1:]


def tokenize_for_lm(text: str) -> List[str]:
    """Shared tokenization for LM training and scoring: normalize, then split."""
    return normalize_punct(text).split()


def lm_train(
    corpus: Iterable[SentenceRecord],
    order: int = DEFAULT_ORDER,
    discount: float = DEFAULT_DISCOUNT,
) -> NGramModel:
    """Train from sentence records; counts depend only on the input multiset."""
    if not (1 <= order <= 8):
        raise ConfigError("bad_order", "order must be in 1..8")
    if not (0.0 < discount < 1.0):
        raise ConfigError("bad_discount", "discount must be in (0, 1)")

    top = Counter()
    n_sentences = 0
    for rec in corpus:
        n_sentences += 1
        tokens = tokenize_for_lm(rec.text)
        padded = [BOS] * (order - 1) + tokens + [EOS]
        for i in range(order - 1, len(padded)):
            top[tuple(padded[i - order + 1 : i + 1])] += 1
    if n_sentences == 0:
        raise ConfigError("empty_corpus", "LM training corpus is empty")

    # counts[k]: k-gram -> count. Top level raw; lower levels continuation
    # (type) counts derived from the level above.
    counts: Dict[int, Counter] = {order: top}
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for gram in counts[k + 1]:
            cont[gram[1:]] += 1
        counts[k] = cont

    D = discount
    events = sorted(set(g[-1] for g in counts[1])) + [UNK]
    n_events = len(events)
    t1 = sum(counts[1].values())
    n_pos = len(counts[1])
    gamma1 = D * n_pos / t1
    floor = gamma1 / n_events

    prob_table: Dict[Context, Dict[str, float]] = {}
    backoffs: Dict[Context, float] = {}
    unigrams = {
        w: max(counts[1][(w,)] - D, 0.0) / t1 + gamma1 / n_events for w in events
    }
    prob_table[()] = unigrams

    model = NGramModel(
        order=order,
        discount=discount,
        vocab=set(events) | {BOS},
        prob_table=prob_table,
        backoffs=backoffs,
        unigram_floor=floor,
    )

    for k in range(2, order + 1):
        totals: Counter = Counter()
        types: Counter = Counter()
        by_ctx: Dict[Context, List[Tuple[str, int]]] = {}
        for gram, c in counts[k].items():
            ctx = gram[:-1]
            totals[ctx] += c
            types[ctx] += 1
            by_ctx.setdefault(ctx, []).append((gram[-1], c))
        for ctx, words in by_ctx.items():
            total = totals[ctx]
            gamma = D * types[ctx] / total
            backoffs[ctx] = gamma
            entry = {}
            for w, c in words:
                entry[w] = max(c - D, 0.0) / total + gamma * model.prob(ctx[1:], w)
            prob_table[ctx] = entry

    return model


def lm_logprob(model: NGramModel, tokens: Sequence[str]) -> float:
    """Sum of ln p over the sentence including the EOS transition."""
    mapped = [model.map_token(t) for t in tokens]
    padded = [BOS] * (model.order - 1) + mapped + [EOS]
    n = model.order
    total = 0.0
    for i in range(n - 1, len(padded)):
        total += math.log(model.prob(padded[max(0, i - n + 1) : i], padded[i]))
    return total


def lm_cross_entropy(model: NGramModel, tokens: Sequence[str]) -> float:
    """Word-normalized cross entropy in nats per token (EOS included)."""
    return -lm_logprob(model, tokens) / (len(tokens) + 1)


# --- serialization -------------------------------------------------------------
#
# Little-endian container:
#   magic "MTFG-NGLM" | u16 version | u16 order | f64 discount
#   vocab block:   u32 count, then per word: u16 byte length + UTF-8 bytes
#   context block: u32 count, then per context: u8 length + length * u32 word id
#   triple block:  u64 count, then per entry: u32 context id, u32 word id, f64 value
# A word id of 0xFFFFFFFF marks the entry as the context's backoff weight.


def save_lm(model: NGramModel, path: str) -> None:
    words = sorted(model.vocab | {w for e in model.prob_table.values() for w in e})
    word_id = {w: i for i, w in enumerate(words)}
    contexts = sorted(set(model.prob_table) | set(model.backoffs), key=lambda c: (len(c), c))
    ctx_id = {c: i for i, c in enumerate(contexts)}

    out = bytearray()
    out += MAGIC
    out += struct.pack("<HH", VERSION, model.order)
    out += struct.pack("<d", model.discount)
    out += struct.pack("<I", len(words))
    for w in words:
        b = w.encode("utf-8")
        out += struct.pack("<H", len(b)) + b
    out += struct.pack("<I", len(contexts))
    for c in contexts:
        out += struct.pack("<B", len(c))
        out += struct.pack(f"<{len(c)}I", *(word_id[t] for t in c))

    triples: List[Tuple[int, int, float]] = []
    for c in contexts:
        cid = ctx_id[c]
        if c in model.backoffs:
            triples.append((cid, _BACKOFF_ID, model.backoffs[c]))
        entry = model.prob_table.get(c)
        if entry:
            for w in sorted(entry):
                triples.append((cid, word_id[w], entry[w]))
    out += struct.pack("<Q", len(triples))
    for cid, wid, value in triples:
        out += struct.pack("<IId", cid, wid, value)

    with open(path, "wb") as fp:
        fp.write(bytes(out))


def load_lm(path: str) -> NGramModel:
    with open(path, "rb") as fp:
        buf = fp.read()
    if buf[: len(MAGIC)] != MAGIC:
        raise DataError("bad_magic", f"{path}: not an n-gram model file")
    off = len(MAGIC)
    version, order = struct.unpack_from("<HH", buf, off)
    off += 4
    if version != VERSION:
        raise DataError("bad_version", f"{path}: unsupported version {version}")
    (discount,) = struct.unpack_from("<d", buf, off)
    off += 8

    (n_words,) = struct.unpack_from("<I", buf, off)
    off += 4
    words = []
    for _ in range(n_words):
        (blen,) = struct.unpack_from("<H", buf, off)
        off += 2
        words.append(buf[off : off + blen].decode("utf-8"))
        off += blen

    (n_ctx,) = struct.unpack_from("<I", buf, off)
    off += 4
    contexts: List[Context] = []
    for _ in range(n_ctx):
        (clen,) = struct.unpack_from("<B", buf, off)
        off += 1
        ids = struct.unpack_from(f"<{clen}I", buf, off) if clen else ()
        off += 4 * clen
        contexts.append(tuple(words[i] for i in ids))

    (n_triples,) = struct.unpack_from("<Q", buf, off)
    off += 8
    prob_table: Dict[Context, Dict[str, float]] = {}
    backoffs: Dict[Context, float] = {}
    for _ in range(n_triples):
        cid, wid, value = struct.unpack_from("<IId", buf, off)
        off += 16
        ctx = contexts[cid]
        if wid == _BACKOFF_ID:
            backoffs[ctx] = value
        else:
            prob_table.setdefault(ctx, {})[words[wid]] = value

    floor = prob_table[()][UNK]
    return NGramModel(
        order=order,
        discount=discount,
        vocab=set(words),
        prob_table=prob_table,
        backoffs=backoffs,
        unigram_floor=floor,
    )
