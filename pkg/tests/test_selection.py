import random

import pytest

from mtforge.errors import ConfigError
from mtforge.ngram_lm import lm_cross_entropy, lm_train
from mtforge.records import SentenceRecord
from mtforge.selection import (
    MODE_IN_DOMAIN,
    MODE_LITERAL,
    SelectionConfig,
    SelectionStats,
    ml_score,
    select,
)

IN_VOCAB = ["alpha", "amber", "anchor", "apple", "arrow", "aspen"]
OUT_VOCAB = ["bison", "blaze", "boulder", "briar", "brook", "bramble"]


def recs(lines):
    return [SentenceRecord(t, "x", line_no=i) for i, t in enumerate(lines)]


def gen_lines(rng, vocab, n, lo=3, hi=9):
    return [" ".join(rng.choice(vocab) for _ in range(rng.randrange(lo, hi))) for _ in range(n)]


@pytest.fixture(scope="module")
def two_domain():
    # Disjoint vocabularies make the separation deterministic: in-domain
    # sentences are all-OOV under the general LM and vice versa.
    rng = random.Random(42)
    news_lm = lm_train(recs(gen_lines(rng, IN_VOCAB, 120)), order=3)
    gen_lm = lm_train(recs(gen_lines(rng, OUT_VOCAB, 120)), order=3)
    return SelectionConfig(in_domain_lm=news_lm, general_lm=gen_lm, threshold=0.01)


class TestScore:
    def test_same_model_scores_zero(self, two_domain):
        cfg = SelectionConfig(
            in_domain_lm=two_domain.in_domain_lm,
            general_lm=two_domain.in_domain_lm,
            threshold=0.01,
        )
        for sent in (["alpha", "amber"], ["bison"], []):
            assert ml_score(cfg, sent) == 0.0

    def test_in_domain_sentence_scores_negative(self, two_domain):
        assert ml_score(two_domain, ["alpha", "alpha", "apple"]) < 0

    def test_score_is_cross_entropy_difference(self, two_domain):
        sent = ["alpha", "bison"]
        expected = lm_cross_entropy(two_domain.in_domain_lm, sent) - lm_cross_entropy(
            two_domain.general_lm, sent
        )
        assert ml_score(two_domain, sent) == expected

    def test_deterministic(self, two_domain):
        sent = ["amber", "arrow"]
        assert ml_score(two_domain, sent) == ml_score(two_domain, sent)


class TestSelect:
    def test_identical_lms_select_nothing(self, two_domain):
        cfg = SelectionConfig(
            in_domain_lm=two_domain.in_domain_lm,
            general_lm=two_domain.in_domain_lm,
            threshold=0.01,
        )
        rng = random.Random(0)
        lines = gen_lines(rng, IN_VOCAB, 20)
        assert list(select(cfg, lines)) == []

    def test_infinite_threshold_selects_nothing(self, two_domain):
        cfg = SelectionConfig(
            in_domain_lm=two_domain.in_domain_lm,
            general_lm=two_domain.general_lm,
            threshold=float("inf"),
        )
        rng = random.Random(1)
        lines = gen_lines(rng, IN_VOCAB + OUT_VOCAB, 30)
        assert list(select(cfg, lines)) == []

    def test_disjoint_mix_selects_exactly_in_domain_half(self, two_domain):
        rng = random.Random(9)
        in_half = gen_lines(rng, IN_VOCAB, 50)
        out_half = gen_lines(rng, OUT_VOCAB, 50)
        mixed = [s for pair in zip(in_half, out_half) for s in pair]
        stats = SelectionStats()
        selected = list(select(two_domain, mixed, stats=stats))
        assert selected == [s for s in mixed if s in set(in_half)]
        assert stats.total == 100 and stats.selected == 50
        assert stats.frac == pytest.approx(0.5)

    def test_literal_mode_selects_complement_direction(self, two_domain):
        rng = random.Random(10)
        out_half = gen_lines(rng, OUT_VOCAB, 30)
        literal = SelectionConfig(
            in_domain_lm=two_domain.in_domain_lm,
            general_lm=two_domain.general_lm,
            threshold=0.01,
            mode=MODE_LITERAL,
        )
        assert list(select(literal, out_half)) == out_half

    def test_monotone_in_threshold(self, two_domain):
        rng = random.Random(11)
        lines = gen_lines(rng, IN_VOCAB + OUT_VOCAB, 80)
        prev = None
        for threshold in sorted(rng.uniform(-2.0, 2.0) for _ in range(20)):
            cfg = SelectionConfig(
                in_domain_lm=two_domain.in_domain_lm,
                general_lm=two_domain.general_lm,
                threshold=threshold,
            )
            selected = set(select(cfg, lines))
            if prev is not None:
                assert selected.issubset(prev)
            prev = selected

    def test_idempotent_and_order_preserving(self, two_domain):
        rng = random.Random(12)
        lines = gen_lines(rng, IN_VOCAB + OUT_VOCAB, 60)
        once = list(select(two_domain, lines))
        assert list(select(two_domain, once)) == once
        positions = [lines.index(s) for s in once]
        assert positions == sorted(positions)

    def test_bad_mode_rejected(self, two_domain):
        with pytest.raises(ConfigError):
            SelectionConfig(
                in_domain_lm=two_domain.in_domain_lm,
                general_lm=two_domain.general_lm,
                mode="sideways",
            )
