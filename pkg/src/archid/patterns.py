"""Byte-pattern definitions and matching for signature features.

Patterns are written in a small hex-based expression language, parsed to
an element tree, and compiled once to a bytes regex.  Matching uses
leftmost, non-overlapping scan semantics: after a match of length L at
offset i the scan resumes at i+L.  Repetition is greedy (with
backtracking inside a single match attempt) and alternatives are tried
in written order.  Negative lookahead is zero-width and only allowed at
the head of a pattern.

Expression grammar, tokens separated by whitespace:

    55              literal byte (two hex digits)
    ??              any byte
    [7d-7f]         byte class: hex bytes and ranges, space separated
    [^41]           negated byte class
    ( A | B )s      group with alternation
    ( ... ){m,n}    bounded greedy repetition of a group
    (?! ... )       negative lookahead, head position only

The 31 prolog/epilog signatures are adapted from the angr project's
function-boundary fingerprints and are transcribed verbatim, including
their quirks: `[83 2c 81]` keeps the 0x2c member the upstream class
contains, and `[^0a]` positions reproduce upstream wildcard-dot
semantics which never match 0x0a.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InvalidPattern

__all__ = [
    "BytePattern",
    "Literal",
    "ByteClass",
    "Group",
    "Repeat",
    "NegativeLookahead",
    "parse_pattern",
    "compile_builtin_patterns",
    "load_pattern_file",
    "count_matches",
    "BUILTIN_PATTERN_SOURCES",
]


@dataclass(frozen=True)
class Literal:
    value: int


@dataclass(frozen=True)
class ByteClass:
    allowed: frozenset


@dataclass(frozen=True)
class Group:
    alternatives: tuple  # tuple of element tuples


@dataclass(frozen=True)
class Repeat:
    group: Group
    min_count: int
    max_count: int


@dataclass(frozen=True)
class NegativeLookahead:
    elements: tuple


@dataclass(frozen=True)
class BytePattern:
    key: str
    elements: tuple
    regex: re.Pattern
    min_length: int

    def finditer(self, data: bytes):
        return self.regex.finditer(data)


# --- expression parser -------------------------------------------------

_HEX = re.compile(r"^[0-9a-fA-F]{2}$")


def _tokenize(expr: str) -> list[str]:
    tokens = []
    i = 0
    n = len(expr)
    while i < n:
        c = expr[i]
        if c.isspace():
            i += 1
        elif c == "[":
            j = expr.find("]", i)
            if j < 0:
                raise InvalidPattern(f"unterminated byte class in {expr!r}")
            tokens.append(expr[i:j + 1])
            i = j + 1
        elif expr.startswith("(?!", i):
            tokens.append("(?!")
            i += 3
        elif c in "(|)":
            tokens.append(c)
            i += 1
        elif c == "{":
            j = expr.find("}", i)
            if j < 0:
                raise InvalidPattern(f"unterminated repetition in {expr!r}")
            tokens.append(expr[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not expr[j].isspace() and expr[j] not in "([|){":
                j += 1
            tokens.append(expr[i:j])
            i = j
    return tokens


def _parse_class(token: str) -> ByteClass:
    body = token[1:-1].strip()
    negate = body.startswith("^")
    if negate:
        body = body[1:].strip()
    allowed = set()
    for item in body.split():
        if "-" in item:
            lo, hi = item.split("-", 1)
            if not (_HEX.match(lo) and _HEX.match(hi)):
                raise InvalidPattern(f"bad range {item!r} in {token!r}")
            lo_v, hi_v = int(lo, 16), int(hi, 16)
            if lo_v > hi_v:
                raise InvalidPattern(f"reversed range {item!r} in {token!r}")
            allowed.update(range(lo_v, hi_v + 1))
        else:
            if not _HEX.match(item):
                raise InvalidPattern(f"bad byte {item!r} in {token!r}")
            allowed.add(int(item, 16))
    if not allowed:
        raise InvalidPattern(f"empty byte class {token!r}")
    if negate:
        allowed = set(range(256)) - allowed
        if not allowed:
            raise InvalidPattern(f"class {token!r} excludes every byte")
    return ByteClass(frozenset(allowed))


def _parse_sequence(tokens: list[str], pos: int, stop: tuple) -> tuple[list, int]:
    elements = []
    while pos < len(tokens) and tokens[pos] not in stop:
        tok = tokens[pos]
        if tok == "??":
            elements.append(ByteClass(frozenset(range(256))))
            pos += 1
        elif _HEX.match(tok):
            elements.append(Literal(int(tok, 16)))
            pos += 1
        elif tok.startswith("["):
            elements.append(_parse_class(tok))
            pos += 1
        elif tok == "(?!":
            if elements:
                raise InvalidPattern("negative lookahead is only supported at the pattern head")
            inner, pos = _parse_sequence(tokens, pos + 1, stop=(")",))
            if pos >= len(tokens):
                raise InvalidPattern("unterminated lookahead")
            pos += 1  # consume ")"
            if not inner:
                raise InvalidPattern("empty lookahead")
            elements.append(NegativeLookahead(tuple(inner)))
        elif tok == "(":
            alternatives = []
            pos += 1
            while True:
                alt, pos = _parse_sequence(tokens, pos, stop=("|", ")"))
                if not alt:
                    raise InvalidPattern("empty alternative in group")
                alternatives.append(tuple(alt))
                if pos >= len(tokens):
                    raise InvalidPattern("unterminated group")
                if tokens[pos] == "|":
                    pos += 1
                    continue
                pos += 1  # consume ")"
                break
            group = Group(tuple(alternatives))
            if pos < len(tokens) and tokens[pos].startswith("{"):
                m = re.match(r"^\{(\d+),(\d+)\}$", tokens[pos])
                if not m:
                    raise InvalidPattern(f"bad repetition {tokens[pos]!r}")
                lo, hi = int(m.group(1)), int(m.group(2))
                if lo > hi:
                    raise InvalidPattern(f"reversed repetition bounds {tokens[pos]!r}")
                elements.append(Repeat(group, lo, hi))
                pos += 1
            else:
                elements.append(group)
        else:
            raise InvalidPattern(f"unrecognized token {tok!r}")
    return elements, pos


def parse_pattern(key: str, expr: str) -> BytePattern:
    tokens = _tokenize(expr)
    elements, pos = _parse_sequence(tokens, 0, stop=())
    if pos != len(tokens):
        raise InvalidPattern(f"trailing tokens in {expr!r}")
    if not elements:
        raise InvalidPattern(f"empty pattern {key!r}")
    min_len = _min_length(elements)
    if min_len < 1:
        raise InvalidPattern(f"pattern {key!r} can match zero bytes")
    return BytePattern(
        key=key,
        elements=tuple(elements),
        regex=re.compile(_to_regex(elements)),
        min_length=min_len,
    )


def _min_length(elements) -> int:
    total = 0
    for el in elements:
        if isinstance(el, (Literal, ByteClass)):
            total += 1
        elif isinstance(el, Group):
            total += min(_min_length(alt) for alt in el.alternatives)
        elif isinstance(el, Repeat):
            total += el.min_count * min(_min_length(alt) for alt in el.group.alternatives)
        elif isinstance(el, NegativeLookahead):
            pass  # zero-width
    return total


# --- compilation to a bytes regex --------------------------------------

def _escape_byte(b: int) -> bytes:
    return re.escape(bytes([b]))


def _class_to_regex(allowed: frozenset) -> bytes:
    if len(allowed) == 256:
        return b"[\\x00-\\xff]"
    if len(allowed) == 1:
        return _escape_byte(next(iter(allowed)))
    # Positive class built from contiguous runs; negation is already
    # expanded into the allowed set.
    runs = []
    values = sorted(allowed)
    start = prev = values[0]
    for v in values[1:]:
        if v == prev + 1:
            prev = v
            continue
        runs.append((start, prev))
        start = prev = v
    runs.append((start, prev))
    parts = []
    for lo, hi in runs:
        if lo == hi:
            parts.append(_escape_byte(lo))
        elif hi == lo + 1:
            parts.append(_escape_byte(lo) + _escape_byte(hi))
        else:
            parts.append(_escape_byte(lo) + b"-" + _escape_byte(hi))
    return b"[" + b"".join(parts) + b"]"


def _to_regex(elements) -> bytes:
    out = []
    for el in elements:
        if isinstance(el, Literal):
            out.append(_escape_byte(el.value))
        elif isinstance(el, ByteClass):
            out.append(_class_to_regex(el.allowed))
        elif isinstance(el, Group):
            out.append(b"(?:" + b"|".join(_to_regex(a) for a in el.alternatives) + b")")
        elif isinstance(el, Repeat):
            inner = b"(?:" + b"|".join(_to_regex(a) for a in el.group.alternatives) + b")"
            out.append(inner + b"{%d,%d}" % (el.min_count, el.max_count))
        elif isinstance(el, NegativeLookahead):
            out.append(b"(?!" + _to_regex(el.elements) + b")")
        else:  # pragma: no cover
            raise InvalidPattern(f"unknown element {el!r}")
    return b"".join(out)


# --- builtin signature set ----------------------------------------------

# Endianness markers, function prolog/epilog fingerprints, and the two
# PowerPC SPE opcode signatures (isel-form and vector-load/evl-form).
BUILTIN_PATTERN_SOURCES = {
    "be_one": "00 01",
    "le_one": "01 00",
    "be_stack": "ff fe",
    "le_stack": "fe ff",
    "armel32_prolog_1": "?? ?? 2d e9",
    "armel32_prolog_2": "04 e0 2d e5",
    "armel32_epilog_1": "?? ?? bd e8 1e ff 2f e1",
    "armel32_epilog_2": "04 e0 9d e4 1e ff 2f e1",
    "arm32_prolog_1": "e9 2d ?? ??",
    "arm32_prolog_2": "e5 2d e0 04",
    "arm32_epilog_1": "e8 bd ?? ?? e1 2f ff 1e",
    "arm32_epilog_2": "e4 9d e0 04 e1 2f ff 1e",
    "mips32_prolog_1": "27 bd ff ??",
    "mips32_prolog_2": "3c 1c ?? ?? 9c 27 ?? ??",
    "mips32_epilog_1": "8f bf ?? ?? (?? ?? ?? ??){0,4} 03 e0 00 08",
    "mips32el_prolog_1": "?? ff bd 27",
    "mips32el_prolog_2": "?? ?? 1c 3c ?? ?? 9c 27",
    "mips32el_epilog_1": "?? ?? bf 8f (?? ?? ?? ??){0,4} 08 00 e0 03",
    "ppc32_prolog_1": "94 21 ?? ?? 7c 08 02 a6",
    "ppc32_epilog_1": "?? ?? 03 a6 (?? ?? ?? ??){0,6} 4e 80 00 20",
    "ppcel32_prolog_1": "?? ?? 21 94 a6 02 08 7c",
    "ppcel32_epilog_1": "a6 03 ?? ?? (?? ?? ?? ??){0,6} 20 00 80 4e",
    "ppc64_prolog_1": "94 21 ?? ?? 7c 08 02 a6",
    "ppc64_prolog_2": "(?! 94 21 ?? ??) 7c 08 02 a6",
    "ppc64_prolog_3": "f8 61 ?? ??",
    "ppc64_epilog_1": "?? ?? 03 a6 (?? ?? ?? ??){0,6} 4e 80 00 20",
    "ppcel64_prolog_1": "?? ?? 21 94 a6 02 08 7c",
    "ppcel64_epilog_1": "a6 03 ?? ?? (?? ?? ?? ??){0,6} 20 00 80 4e",
    "s390x_prolog_1": "eb [^0a] [f0-ff] [^0a] [^0a] 24",
    "s390x_epilog_1": "07 f4",
    "amd64_prolog_1": "55 48 89 e5",
    "amd64_prolog_2": "48 [83 2c 81] ec ??",
    "amd64_epilog_1": "c9 c3",
    "amd64_epilog_2": "([^41] [50-5f] | 41 [50-5f]) c3",
    "amd64_epilog_3": "48 [83 2c 81] c4 (?? | ?? ?? ?? ??) c3",
    "powerpcspe_spe_instruction_isel": "[7d-7f] ?? ?? (1e | 5e | 9e)",
    "powerpcspe_spe_instruction_evl": "(10 | 11 | 12 | 13) ?? ?? (01 | c1 | c8 | c9 | c0 | d0 | d1 | da)",
}

_builtin_cache: list[BytePattern] | None = None


def compile_builtin_patterns() -> list[BytePattern]:
    """The 37 builtin signature patterns, compiled once and cached."""
    global _builtin_cache
    if _builtin_cache is None:
        _builtin_cache = [
            parse_pattern(key, expr) for key, expr in BUILTIN_PATTERN_SOURCES.items()
        ]
    return list(_builtin_cache)


def load_pattern_file(path) -> list[BytePattern]:
    """Extension point: one `key <TAB> expression` pattern per line.

    Blank lines and lines starting with '#' are ignored.
    """
    patterns = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise InvalidPattern(f"{path}:{lineno}: expected 'key<TAB>expression'")
            key, expr = line.split("\t", 1)
            key = key.strip()
            if not key or key in seen:
                raise InvalidPattern(f"{path}:{lineno}: missing or duplicate key {key!r}")
            seen.add(key)
            patterns.append(parse_pattern(key, expr))
    return patterns


def count_matches(pattern: BytePattern, data: bytes) -> int:
    """Non-overlapping leftmost match count over data."""
    n = 0
    for _ in pattern.regex.finditer(data):
        n += 1
    return n
