import ast
import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from vmga.errors import LiteralSyntaxError
from vmga.literal import parse_literal, render_literal

GOLDEN = json.loads((Path(__file__).parent / "data" / "literal_golden.json").read_text(encoding="utf-8"))
VALID = [c for c in GOLDEN if "expected" in c]
MALFORMED = [c for c in GOLDEN if "error_offset" in c]


def same_typed(a, b):
    if type(a) is not type(b):
        return False
    if isinstance(a, list):
        return len(a) == len(b) and all(same_typed(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(same_typed(a[k], b[k]) for k in a)
    return a == b


def untuple(v):
    if isinstance(v, (list, tuple)):
        return [untuple(x) for x in v]
    if isinstance(v, dict):
        return {k: untuple(x) for k, x in v.items()}
    return v


def test_golden_file_shape():
    assert len(GOLDEN) == 30
    assert len(MALFORMED) == 5


@pytest.mark.parametrize("case", VALID, ids=lambda c: c["text"][:30])
def test_golden_valid(case):
    value = parse_literal(case["text"])
    assert same_typed(value, case["expected"])
    # Independent oracle: the stdlib evaluator on the same text.
    assert same_typed(value, untuple(ast.literal_eval(case["text"].strip())))
    assert same_typed(parse_literal(render_literal(value)), value)


@pytest.mark.parametrize("case", MALFORMED, ids=lambda c: c["text"])
def test_golden_malformed(case):
    with pytest.raises(LiteralSyntaxError) as info:
        parse_literal(case["text"])
    assert info.value.offset == case["error_offset"]


def test_spec_examples():
    assert parse_literal("{'cpus': 0.5, 'mem': [1, 2]}") == {"cpus": 0.5, "mem": [1, 2]}
    assert parse_literal("None") is None
    with pytest.raises(LiteralSyntaxError) as info:
        parse_literal("{'a':}")
    assert info.value.offset == 5


@pytest.mark.parametrize("text", ["foo", "f(1)", "[1, len]", "{1: 2}", "{'a': 1, 'a': 2}", "1e", "", "   ", "'x\n'"])
def test_rejects_non_literals(text):
    with pytest.raises(LiteralSyntaxError):
        parse_literal(text)


def test_int_real_distinction():
    assert type(parse_literal("10")) is int
    assert type(parse_literal("10.")) is float
    assert type(parse_literal("1e2")) is float


def test_bytes_input_and_byte_offsets():
    assert parse_literal("'é'".encode()) == "é"
    with pytest.raises(LiteralSyntaxError) as info:
        parse_literal("['éé', ?]")
    assert info.value.offset == len("['éé', ".encode())


def test_deep_nesting_is_an_error_not_a_crash():
    with pytest.raises(LiteralSyntaxError):
        parse_literal("[" * 5000 + "]" * 5000)


literals = st.recursive(
    st.none() | st.booleans() | st.integers(-10**12, 10**12)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=12),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=6), kids, max_size=4),
    max_leaves=20,
)


@given(literals)
def test_render_parse_roundtrip(value):
    assert same_typed(parse_literal(render_literal(value)), value)
