"""Sentence and sentence-pair records flowing through the pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, TextIO

from mtforge.errors import DataError


@dataclass(frozen=True)
class SentenceRecord:
    text: str
    lang: str
    origin: str = ""
    line_no: int = 0

    def __post_init__(self):
        if "\n" in self.text or "\r" in self.text:
            raise DataError("newline_in_text", "sentence text must not contain newlines")
        if self.line_no < 0:
            raise DataError("negative_line_no", "line_no must be non-negative")


@dataclass(frozen=True)
class ParallelRecord:
    src: SentenceRecord
    tgt: SentenceRecord
    score: Optional[float] = None

    def __post_init__(self):
        if self.src.lang == self.tgt.lang:
            raise DataError("same_language_pair", f"src and tgt share language {self.src.lang!r}")
        if self.score is not None and not math.isfinite(self.score):
            raise DataError("nonfinite_score", "alignment score must be finite")


def read_mono(fp: TextIO, lang: str, origin: str = "") -> Iterator[SentenceRecord]:
    """One sentence per line, UTF-8."""
    for i, line in enumerate(fp):
        yield SentenceRecord(text=line.rstrip("\n"), lang=lang, origin=origin, line_no=i)


def read_pairs(fp: TextIO, src_lang: str, tgt_lang: str, origin: str = "") -> Iterator[ParallelRecord]:
    """TSV bitext: src TAB tgt [TAB score]."""
    for i, line in enumerate(fp):
        parts = line.rstrip("\n").split("\t")
        if len(parts) < 2:
            raise DataError("bad_tsv_row", f"line {i + 1}: expected at least 2 tab-separated fields")
        score = None
        if len(parts) >= 3 and parts[2] != "":
            try:
                score = float(parts[2])
            except ValueError:
                raise DataError("bad_tsv_score", f"line {i + 1}: unparseable score {parts[2]!r}")
        yield ParallelRecord(
            src=SentenceRecord(parts[0], src_lang, origin, i),
            tgt=SentenceRecord(parts[1], tgt_lang, origin, i),
            score=score,
        )


def write_pairs(fp: TextIO, pairs: Iterable[ParallelRecord]) -> int:
    """Inverse of read_pairs; returns the number of rows written."""
    n = 0
    for p in pairs:
        if p.score is not None:
            fp.write(f"{p.src.text}\t{p.tgt.text}\t{p.score}\n")
        else:
            fp.write(f"{p.src.text}\t{p.tgt.text}\n")
        n += 1
    return n
