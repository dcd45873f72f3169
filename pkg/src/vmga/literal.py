"""Recursive-descent parser for the Python literal subset found in trace cells.

Google cluster traces store nested records such as
``{'cpus': 0.02, 'memory': 0.01}`` as strings. :func:`parse_literal` turns the
text back into plain values without evaluating anything: ``None``, booleans,
ints, floats, quoted strings, lists, tuples (returned as lists) and mappings
with string keys.

Errors carry the byte offset (UTF-8) of the first character that could not be
consumed; hitting the end of input reports the input length.
"""
from __future__ import annotations

import math
from typing import Union

from .errors import LiteralSyntaxError

LiteralValue = Union[None, bool, int, float, str, list, dict]

_SIMPLE_ESCAPES = {
    "\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t", "r": "\r",
    "b": "\b", "f": "\f", "v": "\v", "a": "\a", "\n": "",
}
_HEX_ESCAPES = {"x": 2, "u": 4, "U": 8}
_KEYWORDS = {"None": None, "True": True, "False": False}
_WS = " \t\r\n\f\v"
_DIGITS = "0123456789"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        raise LiteralSyntaxError(message, len(self.text[:pos].encode("utf-8")))

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self):
        text, n = self.text, len(self.text)
        while self.pos < n and text[self.pos] in _WS:
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.peek() != ch:
            self.fail(f"expected {ch!r}" if self.peek() else f"expected {ch!r}, got end of input")
        self.pos += 1

    def parse(self) -> LiteralValue:
        value = self.value()
        self.skip_ws()
        if self.pos != len(self.text):
            self.fail("unexpected trailing input")
        return value

    def value(self) -> LiteralValue:
        self.skip_ws()
        ch = self.peek()
        if not ch:
            self.fail("unexpected end of input")
        if ch == "{":
            return self.mapping()
        if ch == "[":
            self.pos += 1
            return self.items("]")
        if ch == "(":
            return self.paren()
        if ch in "'\"":
            return self.string()
        if ch in _DIGITS or ch in "+-.":
            return self.number()
        if ch.isalpha() or ch == "_":
            return self.keyword()
        self.fail(f"unexpected character {ch!r}")

    def keyword(self) -> LiteralValue:
        start = self.pos
        text, n = self.text, len(self.text)
        while self.pos < n and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        word = text[start:self.pos]
        if word in _KEYWORDS:
            return _KEYWORDS[word]
        self.fail(f"non-literal name {word!r}", start)

    def number(self) -> int | float:
        start = self.pos
        text, n = self.text, len(self.text)
        if self.peek() in "+-":
            self.pos += 1
        body = self.pos
        while self.pos < n and text[self.pos] in _DIGITS:
            self.pos += 1
        int_digits = self.pos - body
        is_real = False
        if self.peek() == ".":
            is_real = True
            self.pos += 1
            frac = self.pos
            while self.pos < n and text[self.pos] in _DIGITS:
                self.pos += 1
            if int_digits == 0 and self.pos == frac:
                self.fail("malformed number", start)
        elif int_digits == 0:
            self.fail("malformed number", self.pos)
        if self.peek() in ("e", "E"):
            is_real = True
            self.pos += 1
            if self.peek() in "+-":
                self.pos += 1
            exp = self.pos
            while self.pos < n and text[self.pos] in _DIGITS:
                self.pos += 1
            if self.pos == exp:
                self.fail("malformed exponent", self.pos)
        if self.peek().isalpha() or self.peek() == "_":
            self.fail("malformed number", self.pos)
        literal = text[start:self.pos]
        return float(literal) if is_real else int(literal)

    def string(self) -> str:
        quote = self.peek()
        self.pos += 1
        text, n = self.text, len(self.text)
        out = []
        while True:
            if self.pos >= n:
                self.fail("unterminated string", n)
            ch = text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(out)
            if ch == "\n":
                self.fail("newline in string", self.pos)
            if ch != "\\":
                out.append(ch)
                self.pos += 1
                continue
            esc_at = self.pos
            self.pos += 1
            if self.pos >= n:
                self.fail("unterminated string", n)
            e = text[self.pos]
            if e in _SIMPLE_ESCAPES:
                out.append(_SIMPLE_ESCAPES[e])
                self.pos += 1
            elif e in _HEX_ESCAPES:
                width = _HEX_ESCAPES[e]
                digits = text[self.pos + 1:self.pos + 1 + width]
                if len(digits) != width or any(c not in "0123456789abcdefABCDEF" for c in digits):
                    self.fail("truncated \\%s escape" % e, esc_at)
                code = int(digits, 16)
                if code > 0x10FFFF:
                    self.fail("escape out of unicode range", esc_at)
                out.append(chr(code))
                self.pos += 1 + width
            elif e in "01234567":
                j = self.pos
                while j < n and j - self.pos < 3 and text[j] in "01234567":
                    j += 1
                out.append(chr(int(text[self.pos:j], 8)))
                self.pos = j
            else:
                self.fail(f"invalid escape \\{e}", esc_at)

    def items(self, close_ch: str) -> list:
        # Opening bracket already consumed.
        items = []
        while True:
            self.skip_ws()
            if self.peek() == close_ch:
                self.pos += 1
                return items
            items.append(self.value())
            self.skip_ws()
            ch = self.peek()
            if ch == ",":
                self.pos += 1
            elif ch == close_ch:
                self.pos += 1
                return items
            else:
                self.fail(f"expected ',' or {close_ch!r}")

    def paren(self) -> LiteralValue:
        # "(x)" is just x; a tuple needs a comma or is empty.
        self.pos += 1
        self.skip_ws()
        if self.peek() == ")":
            self.pos += 1
            return []
        first = self.value()
        self.skip_ws()
        if self.peek() == ")":
            self.pos += 1
            return first
        if self.peek() != ",":
            self.fail("expected ',' or ')'")
        self.pos += 1
        return [first, *self.items(")")]

    def mapping(self) -> dict:
        self.pos += 1
        out: dict = {}
        while True:
            self.skip_ws()
            if self.peek() == "}":
                self.pos += 1
                return out
            key_at = self.pos
            key = self.value()
            if not isinstance(key, str):
                self.fail("mapping keys must be strings", key_at)
            if key in out:
                self.fail(f"duplicate key {key!r}", key_at)
            self.expect(":")
            out[key] = self.value()
            self.skip_ws()
            ch = self.peek()
            if ch == ",":
                self.pos += 1
            elif ch == "}":
                self.pos += 1
                return out
            else:
                self.fail("expected ',' or '}'")


def parse_literal(text: str | bytes) -> LiteralValue:
    """Parse one literal; raises :class:`LiteralSyntaxError` with a byte offset."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LiteralSyntaxError("invalid UTF-8", exc.start) from None
    parser = _Parser(text)
    try:
        return parser.parse()
    except RecursionError:
        raise LiteralSyntaxError("nesting too deep", len(text[:parser.pos].encode("utf-8"))) from None


def render_literal(value: LiteralValue) -> str:
    """Canonical text form; ``parse_literal(render_literal(v)) == v``."""
    if value is None or value is True or value is False:
        return repr(value)
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite floats have no literal form")
        return repr(value)
    if isinstance(value, str):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(render_literal(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = []
        for k, v in value.items():
            if not isinstance(k, str):
                raise ValueError("mapping keys must be strings")
            parts.append(f"{render_literal(k)}: {render_literal(v)}")
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"not a literal value: {type(value).__name__}")
