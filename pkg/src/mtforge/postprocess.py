"""Language-specific output punctuation normalization.

cs/de/is: straight double quotes alternate into low-9 opening quotes and
left closing quotes; an unpaired final quote is left alone. zh/ja: ASCII
punctuation becomes its fullwidth counterpart (periods only when sentence
final or before a space, and never inside decimal numbers); one space
immediately after a converted mark is absorbed, since fullwidth punctuation
carries its own spacing. Other languages pass through unchanged.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

GERMAN_QUOTE_LANGS = ("cs", "de", "is")
CJK_LANGS = ("ja", "zh")

QUOTE_OPEN = "„"  # „
QUOTE_CLOSE = "“"  # “

CJK_TABLE: Dict[str, str] = {
    ",": "，",  # ，
    ".": "。",  # 。 (conditional, see below)
    "?": "？",  # ？
    "!": "！",  # ！
    ":": "：",  # ：
    ";": "；",  # ；
    "(": "（",  # （
    ")": "）",  # ）
}


def _german_quotes(line: str) -> str:
    positions = [i for i, ch in enumerate(line) if ch == '"']
    paired = len(positions) - (len(positions) % 2)
    chars = list(line)
    for k in range(paired):
        chars[positions[k]] = QUOTE_OPEN if k % 2 == 0 else QUOTE_CLOSE
    return "".join(chars)


def _cjk_punct(line: str) -> str:
    out: List[str] = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        mapped = CJK_TABLE.get(ch)
        if mapped is None:
            out.append(ch)
            i += 1
            continue
        if ch == ".":
            at_end = i + 1 == n
            before_space = not at_end and line[i + 1] == " "
            decimal = (
                0 < i < n - 1 and line[i - 1].isdigit() and line[i + 1].isdigit()
            )
            if decimal or not (at_end or before_space):
                out.append(ch)
                i += 1
                continue
        out.append(mapped)
        i += 1
        if i < n and line[i] == " ":
            i += 1  # fullwidth punctuation absorbs one following space
    return "".join(out)


def postprocess(text: str, lang: str) -> str:
    """Apply the language's punctuation rules line by line; idempotent."""
    if lang in GERMAN_QUOTE_LANGS:
        per_line = _german_quotes
    elif lang in CJK_LANGS:
        per_line = _cjk_punct
    else:
        return text
    return "\n".join(per_line(line) for line in text.split("\n"))


def dump_table(lang: str) -> List[Tuple[str, str]]:
    """(from, to) codepoint rules for --print-table, as hex strings."""
    rules: List[Tuple[str, str]] = []
    if lang in GERMAN_QUOTE_LANGS:
        rules.append((f"U+{ord(chr(34)):04X}", f"U+{ord(QUOTE_OPEN):04X}/U+{ord(QUOTE_CLOSE):04X}"))
    elif lang in CJK_LANGS:
        for src, dst in CJK_TABLE.items():
            rules.append((f"U+{ord(src):04X}", f"U+{ord(dst):04X}"))
    return rules
