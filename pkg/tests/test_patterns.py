import random

import pytest

import datagen
import oracle
from archid import patterns
from archid.errors import InvalidPattern


@pytest.fixture(scope="module")
def builtins():
    return {p.key: p for p in patterns.compile_builtin_patterns()}


def test_builtin_count_is_37(builtins):
    assert len(builtins) == 37


def test_builtin_group_sizes(builtins):
    endian = {k for k in builtins if k in ("be_one", "le_one", "be_stack", "le_stack")}
    spe = {k for k in builtins if k.startswith("powerpcspe_")}
    prolog_epilog = set(builtins) - endian - spe
    assert len(endian) == 4
    assert len(spe) == 2
    assert len(prolog_epilog) == 31


def test_be_one_matches_exact_pair(builtins):
    p = builtins["be_one"]
    assert patterns.count_matches(p, b"\x00\x01") == 1
    assert patterns.count_matches(p, b"\x00\x01\x00\x01") == 2
    assert patterns.count_matches(p, b"\x00\x00\x01\x01") == 1
    assert patterns.count_matches(p, b"\x01\x00") == 0


def test_armel32_prolog_2_exact(builtins):
    p = builtins["armel32_prolog_2"]
    assert patterns.count_matches(p, b"\x04\xe0\x2d\xe5") == 1
    assert patterns.count_matches(p, b"\x04\xe0\x2d\xe4") == 0


def test_amd64_prolog_nonoverlapping(builtins):
    p = builtins["amd64_prolog_1"]
    data = b"\x55\x48\x89\xe5" * 2 + b"\x55"
    assert patterns.count_matches(p, data) == 2


def test_match_resumes_after_end(builtins):
    # c9 c3 c9 c3: matches at 0 and 2; the middle c3 c9 never counts.
    p = builtins["amd64_epilog_1"]
    assert patterns.count_matches(p, b"\xc9\xc3\xc9\xc3") == 2
    assert patterns.count_matches(p, b"\xc9\xc9\xc3\xc3") == 1


def test_repetition_is_greedy(builtins):
    # prefix + one 4-byte filler group + tail: single greedy match.
    p = builtins["mips32_epilog_1"]
    data = b"\x8f\xbf\x00\x00" + b"\xaa\xbb\xcc\xdd" + b"\x03\xe0\x00\x08"
    assert patterns.count_matches(p, data) == 1
    # Tail can also follow immediately ({0,4} allows zero copies).
    assert patterns.count_matches(p, b"\x8f\xbf\x00\x00\x03\xe0\x00\x08") == 1
    # Five filler groups exceed the bound.
    data = b"\x8f\xbf\x00\x00" + b"\xaa" * 20 + b"\x03\xe0\x00\x08"
    assert patterns.count_matches(p, data) == 0


def test_s390x_prolog_dot_excludes_newline(builtins):
    p = builtins["s390x_prolog_1"]
    assert patterns.count_matches(p, b"\xeb\x11\xf0\x22\x33\x24") == 1
    assert patterns.count_matches(p, b"\xeb\x0a\xf0\x22\x33\x24") == 0
    assert patterns.count_matches(p, b"\xeb\x11\xf0\x0a\x33\x24") == 0


def test_amd64_prolog_2_class_members(builtins):
    p = builtins["amd64_prolog_2"]
    for b in (0x81, 0x2C, 0x83):
        assert patterns.count_matches(p, bytes([0x48, b, 0xEC, 0x00])) == 1
    assert patterns.count_matches(p, b"\x48\x82\xec\x00") == 0


def test_powerpcspe_evl_single_final_byte(builtins):
    p = builtins["powerpcspe_spe_instruction_evl"]
    assert patterns.count_matches(p, b"\x10\xaa\xbb\xc1") == 1
    assert patterns.count_matches(p, b"\x13\xaa\xbb\x01") == 1
    # No trailing-space byte required after the opcode.
    assert patterns.count_matches(p, b"\x10\xaa\xbb\xc1\x20") == 1
    assert patterns.count_matches(p, b"\x10\xaa\xbb\xc2") == 0


def test_ppc64_prolog_2_head_lookahead(builtins):
    p = builtins["ppc64_prolog_2"]
    assert patterns.count_matches(p, b"\x7c\x08\x02\xa6") == 1
    assert patterns.count_matches(p, b"\x94\x21\x00\x00\x7c\x08\x02\xa6") == 1


def test_min_lengths_at_least_two(builtins):
    assert min(p.min_length for p in builtins.values()) >= 2


def test_differential_smoke_against_oracle(builtins):
    # The full >=1e4-cases-per-pattern battery runs in the acceptance
    # suite; this is a quick regression net.
    rng = random.Random(1234)
    for pat in builtins.values():
        for data in datagen.differential_inputs(pat, rng, count=150):
            assert patterns.count_matches(pat, data) == oracle.count_matches_oracle(pat, data), (
                pat.key, data.hex())


def test_oracle_prescreen_is_sound(builtins):
    rng = random.Random(99)
    for pat in builtins.values():
        for data in datagen.differential_inputs(pat, rng, count=40, max_len=96):
            assert oracle.count_matches_oracle(pat, data) == oracle.count_matches_naive(
                pat.elements, data)


def _random_expression(rng):
    """A random syntactically valid pattern expression."""
    def byte_token():
        roll = rng.random()
        if roll < 0.45:
            return f"{rng.randrange(256):02x}"
        if roll < 0.6:
            return "??"
        lo = rng.randrange(250)
        hi = lo + rng.randrange(1, 6)
        if rng.random() < 0.3:
            return f"[^{lo:02x}-{hi:02x}]"
        if rng.random() < 0.5:
            return f"[{lo:02x}-{hi:02x}]"
        values = " ".join(f"{rng.randrange(256):02x}" for _ in range(rng.randint(1, 3)))
        return f"[{values}]"

    def group_token():
        alts = [" ".join(byte_token() for _ in range(rng.randint(1, 3)))
                for _ in range(rng.randint(1, 3))]
        text = "( " + " | ".join(alts) + " )"
        if rng.random() < 0.5:
            lo = rng.randint(0, 2)
            hi = lo + rng.randint(0, 3)
            text += f"{{{lo},{hi}}}"
        return text

    tokens = []
    if rng.random() < 0.2:
        tokens.append("(?! " + " ".join(byte_token() for _ in range(rng.randint(1, 3))) + " )")
    tokens.append(byte_token())  # ensure nonzero minimum length
    for _ in range(rng.randint(0, 4)):
        tokens.append(group_token() if rng.random() < 0.35 else byte_token())
    return " ".join(tokens)


def test_alternative_order_not_longest_match():
    # Alternatives are tried in written order with backtracking, so the
    # first alternative that lets the whole pattern match wins.
    p = patterns.parse_pattern("x", "( 01 | 01 02 ) 03")
    assert patterns.count_matches(p, b"\x01\x03") == 1
    assert patterns.count_matches(p, b"\x01\x02\x03") == 1  # backtracks into alt 2
    assert oracle.count_matches_naive(p.elements, b"\x01\x02\x03") == 1

    p = patterns.parse_pattern("y", "( 01 02 | 01 ) 02")
    # First alt eats both bytes and strands the tail; second alt matches.
    assert patterns.count_matches(p, b"\x01\x02") == 1
    assert oracle.count_matches_naive(p.elements, b"\x01\x02") == 1

    # Greedy repetition backtracks to let the tail match.
    p = patterns.parse_pattern("z", "( 02 ){0,3} 02 03")
    assert patterns.count_matches(p, b"\x02\x02\x02\x03") == 1
    assert oracle.count_matches_naive(p.elements, b"\x02\x02\x02\x03") == 1


def test_random_grammar_patterns_match_oracle():
    rng = random.Random(271828)
    for i in range(300):
        expr = _random_expression(rng)
        pat = patterns.parse_pattern(f"rand_{i}", expr)
        for data in datagen.differential_inputs(pat, rng, count=25, max_len=80):
            got = patterns.count_matches(pat, data)
            want = oracle.count_matches_naive(pat.elements, data)
            assert got == want, (expr, data.hex(), got, want)


def test_parse_rejects_bad_patterns():
    bad = [
        "",                      # empty
        "5",                     # half a byte
        "zz",                    # not hex
        "[",                     # unterminated class
        "( 01 | )",              # empty alternative
        "( 01 ",                 # unterminated group
        "01 (?! 02 ) 03",        # lookahead not at head
        "(01){2,1}",             # reversed bounds
        "(?! 01 )",              # zero minimum length
        "[^00-ff]",              # excludes everything
    ]
    for expr in bad:
        with pytest.raises(InvalidPattern):
            patterns.parse_pattern("x", expr)


def test_pattern_file_roundtrip(tmp_path):
    path = tmp_path / "extra.patterns"
    path.write_text("# custom\nmy_sig\t55 48 (89 | 8b) e5\n")
    loaded = patterns.load_pattern_file(path)
    assert [p.key for p in loaded] == ["my_sig"]
    assert patterns.count_matches(loaded[0], b"\x55\x48\x8b\xe5") == 1

    path.write_text("dup\t01 02\ndup\t03 04\n")
    with pytest.raises(InvalidPattern):
        patterns.load_pattern_file(path)
