"""Generator words such as ``z^3``, ``U1*U2'`` or ``(U1*U2)^-2``.

Grammar::

    word    := factor ('*' factor)*
    factor  := primary ('^' int | "'")*
    primary := identifier | number | '(' word ')'

``'`` is the adjoint; a negative power is a power of the adjoint.  The
identifier ``1`` (or any number) is a scalar multiple of the unit.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

from .action_model import ActionModel, GradedElement, element_from_dict

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[*^'()\-+]))")


class WordError(ValueError):
    pass


def tokenize(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise WordError(f"unexpected character {text[pos]!r} at position {pos} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, model: ActionModel, tokens, amp: int):
        self.model = model
        self.toks = tokens
        self.i = 0
        self.amp = amp

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise WordError(f"expected {value or 'token'} at token {self.i}")
        self.i += 1
        return tok

    def word(self) -> GradedElement:
        x = self.factor()
        while self.peek()[1] == "*":
            self.take("*")
            x = x * self.factor()
        return x

    def factor(self) -> GradedElement:
        x = self.primary()
        while self.peek()[1] in ("^", "'"):
            if self.take()[1] == "'":
                x = x.adjoint()
            else:
                x = x.power(self.integer())
        return x

    def integer(self) -> int:
        sign = 1
        if self.peek()[1] in ("-", "+"):
            sign = -1 if self.take()[1] == "-" else 1
        kind, val = self.take()
        if kind != "num" or not val.isdigit():
            raise WordError(f"power must be an integer, got {val!r}")
        return sign * int(val)

    def primary(self) -> GradedElement:
        kind, val = self.peek()
        if val == "(":
            self.take("(")
            x = self.word()
            self.take(")")
            return x
        if kind == "num":
            self.take()
            return float(val) * GradedElement.unit(self.model, self.amp)
        if kind == "id":
            self.take()
            try:
                return self.model.generator(val, self.amp)
            except KeyError:
                raise WordError(f"unknown generator {val!r}; known: {self.model.generator_names}") from None
        raise WordError(f"unexpected token {val!r}")


def parse_word(model: ActionModel, text: str, amp: int = 1) -> GradedElement:
    """Evaluate a generator word in ``model``."""
    toks = tokenize(text)
    if not toks:
        raise WordError("empty word")
    p = _Parser(model, toks, amp)
    x = p.word()
    if p.i != len(toks):
        raise WordError(f"trailing input after token {p.i} in {text!r}")
    return x


def load_element(model: ActionModel, spec: str) -> GradedElement:
    """A word, or the path of a JSON element document."""
    path = Path(spec)
    if spec.endswith(".json") and path.exists():
        return element_from_dict(model, json.loads(path.read_text()))
    return parse_word(model, spec)
