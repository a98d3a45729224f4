"""Bundled programs under test.

Three byte-level parsers written against the trace-context API: a JSON
subset, a tiny expression language whose lexer dispatches over
``( ) ,`` and classifies every input byte, and a line-oriented INI
format.  Each ships an independent plain recognizer used as a grammar
oracle in tests; the recognizers never touch the symbolic API.

Targets read input bytes only through ``SymbolicInput.at`` and make
every input-dependent decision through the trace context, so the
coverage tree sees the full branch structure.
"""
from __future__ import annotations

from typing import Callable

from .tracing import (
    ProgramUnderTest,
    SymbolicInput,
    TraceContext,
    if_site,
    switch_site,
)

# -- JSON subset ----------------------------------------------------------

_J = "json.c"
S_WS = if_site(_J, "skip_space", 8, 12)
S_VALUE = switch_site(_J, "parse_value", 15, 5)
S_KEYWORD = if_site(_J, "parse_keyword", 24, 9)
S_DIG_LO = if_site(_J, "scan_digit", 31, 12)
S_DIG_HI = if_site(_J, "scan_digit", 31, 26)
S_OBJ_EMPTY = if_site(_J, "parse_object", 40, 9)
S_KEY_QUOTE = if_site(_J, "parse_object", 44, 13)
S_COLON = if_site(_J, "parse_object", 48, 13)
S_OBJ_SEP = switch_site(_J, "parse_object", 53, 13)
S_ARR_EMPTY = if_site(_J, "parse_array", 61, 9)
S_ARR_SEP = switch_site(_J, "parse_array", 67, 13)
S_STR_END = if_site(_J, "parse_string", 75, 9)
S_STR_ESC = if_site(_J, "parse_string", 77, 9)
S_STR_CH = if_site(_J, "parse_string", 79, 9)

_VALUE_CASES = [0x7B, 0x5B, 0x22, 0x74, 0x66, 0x6E, 0x2D]


class _JsonParser:
    def __init__(self, inp: SymbolicInput, ctx: TraceContext):
        self.inp = inp
        self.ctx = ctx
        self.i = 0
        self.n = len(inp)

    def run(self) -> bool:
        with self.ctx.function("parse_document"):
            self.space()
            if not self.value():
                return False
            self.space()
            return self.i == self.n

    def space(self) -> None:
        while self.i < self.n and self.ctx.if_cmp(S_WS, self.inp.at(self.i), "le", 0x20):
            self.i += 1

    def value(self) -> bool:
        with self.ctx.function("parse_value"):
            if self.i >= self.n:
                return False
            case = self.ctx.switch_byte(S_VALUE, self.inp.at(self.i), _VALUE_CASES)
            if case == 0x7B:
                return self.object_()
            if case == 0x5B:
                return self.array()
            if case == 0x22:
                return self.string()
            if case == 0x74:
                return self.keyword(b"true")
            if case == 0x66:
                return self.keyword(b"false")
            if case == 0x6E:
                return self.keyword(b"null")
            if case == 0x2D:
                self.i += 1
                if self.i >= self.n or not self.digit():
                    return False
                return self.digits()
            if not self.digit():
                return False
            return self.digits()

    def keyword(self, word: bytes) -> bool:
        with self.ctx.function("parse_keyword"):
            self.i += 1
            for ch in word[1:]:
                if self.i >= self.n:
                    return False
                if not self.ctx.if_cmp(S_KEYWORD, self.inp.at(self.i), "eq", ch):
                    return False
                self.i += 1
            return True

    def digit(self) -> bool:
        b = self.inp.at(self.i)
        return self.ctx.if_cmp(S_DIG_LO, b, "ge", 0x30) and self.ctx.if_cmp(
            S_DIG_HI, b, "le", 0x39
        )

    def digits(self) -> bool:
        self.i += 1
        while self.i < self.n and self.digit():
            self.i += 1
        return True

    def object_(self) -> bool:
        with self.ctx.function("parse_object"):
            self.i += 1
            self.space()
            if self.i >= self.n:
                return False
            if self.ctx.if_cmp(S_OBJ_EMPTY, self.inp.at(self.i), "eq", 0x7D):
                self.i += 1
                return True
            while True:
                self.space()
                if self.i >= self.n:
                    return False
                if not self.ctx.if_cmp(S_KEY_QUOTE, self.inp.at(self.i), "eq", 0x22):
                    return False
                if not self.string():
                    return False
                self.space()
                if self.i >= self.n:
                    return False
                if not self.ctx.if_cmp(S_COLON, self.inp.at(self.i), "eq", 0x3A):
                    return False
                self.i += 1
                self.space()
                if not self.value():
                    return False
                self.space()
                if self.i >= self.n:
                    return False
                sep = self.ctx.switch_byte(S_OBJ_SEP, self.inp.at(self.i), [0x2C, 0x7D])
                self.i += 1
                if sep == 0x7D:
                    return True
                if sep == self.ctx.DEFAULT:
                    return False

    def array(self) -> bool:
        with self.ctx.function("parse_array"):
            self.i += 1
            self.space()
            if self.i >= self.n:
                return False
            if self.ctx.if_cmp(S_ARR_EMPTY, self.inp.at(self.i), "eq", 0x5D):
                self.i += 1
                return True
            while True:
                self.space()
                if not self.value():
                    return False
                self.space()
                if self.i >= self.n:
                    return False
                sep = self.ctx.switch_byte(S_ARR_SEP, self.inp.at(self.i), [0x2C, 0x5D])
                self.i += 1
                if sep == 0x5D:
                    return True
                if sep == self.ctx.DEFAULT:
                    return False

    def string(self) -> bool:
        with self.ctx.function("parse_string"):
            self.i += 1
            while self.i < self.n:
                b = self.inp.at(self.i)
                if self.ctx.if_cmp(S_STR_END, b, "eq", 0x22):
                    self.i += 1
                    return True
                if self.ctx.if_cmp(S_STR_ESC, b, "eq", 0x5C):
                    self.i += 2
                    continue
                if not self.ctx.if_cmp(S_STR_CH, b, "ge", 0x20):
                    return False
                self.i += 1
            return False


def json_subset_entry(inp: SymbolicInput, ctx: TraceContext) -> bool:
    return _JsonParser(inp, ctx).run()


# -- expression language -----------------------------------------------------

_E = "expr.c"
S_SCAN_LO = if_site(_E, "scan_classes", 7, 13)
S_SCAN_HI = if_site(_E, "scan_classes", 7, 31)
S_LEXX = switch_site(_E, "lex_token", 9, 3)
S_PLUS = if_site(_E, "lex_token", 14, 9)
S_NUM_LO = if_site(_E, "lex_number", 21, 11)
S_NUM_HI = if_site(_E, "lex_number", 21, 29)
S_STAR = if_site(_E, "parse_term", 36, 13)

_PUNCT_CASES = [0x28, 0x29, 0x2C]


class _ExprParser:
    def __init__(self, inp: SymbolicInput, ctx: TraceContext):
        self.inp = inp
        self.ctx = ctx
        self.i = 0
        self.n = len(inp)

    def run(self) -> bool:
        self.scan_classes()
        with self.ctx.function("parse_program"):
            if self.n == 0:
                return False
            if not self.expr():
                return False
            return self.i == self.n

    def scan_classes(self) -> None:
        # Byte classification over the whole input; every byte funnels
        # through the same two branch sites.
        with self.ctx.function("scan_classes"):
            for pos in range(self.n):
                b = self.inp.at(pos)
                if self.ctx.if_cmp(S_SCAN_LO, b, "ge", 0x30):
                    self.ctx.if_cmp(S_SCAN_HI, b, "le", 0x39)

    def classify(self) -> int:
        with self.ctx.function("lex_token"):
            return self.ctx.switch_byte(S_LEXX, self.inp.at(self.i), _PUNCT_CASES)

    def expr(self) -> bool:
        with self.ctx.function("parse_expr"):
            if not self.term():
                return False
            while self.i < self.n:
                case = self.classify()
                if case == 0x2C:
                    self.i += 1
                    if not self.term():
                        return False
                    continue
                if case != self.ctx.DEFAULT:
                    return True
                if self.ctx.if_cmp(S_PLUS, self.inp.at(self.i), "eq", 0x2B):
                    self.i += 1
                    if not self.term():
                        return False
                    continue
                return True
            return True

    def term(self) -> bool:
        with self.ctx.function("parse_term"):
            if not self.factor():
                return False
            while self.i < self.n and self.ctx.if_cmp(
                S_STAR, self.inp.at(self.i), "eq", 0x2A
            ):
                self.i += 1
                if not self.factor():
                    return False
            return True

    def factor(self) -> bool:
        with self.ctx.function("parse_factor"):
            if self.i >= self.n:
                return False
            case = self.classify()
            if case == 0x28:
                self.i += 1
                if not self.expr():
                    return False
                if self.i >= self.n:
                    return False
                if self.classify() != 0x29:
                    return False
                self.i += 1
                return True
            if case != self.ctx.DEFAULT:
                return False
            return self.number()

    def number(self) -> bool:
        with self.ctx.function("lex_number"):
            if not self.digit():
                return False
            self.i += 1
            while self.i < self.n and self.digit():
                self.i += 1
            return True

    def digit(self) -> bool:
        b = self.inp.at(self.i)
        return self.ctx.if_cmp(S_NUM_LO, b, "ge", 0x30) and self.ctx.if_cmp(
            S_NUM_HI, b, "le", 0x39
        )


def expr_lang_entry(inp: SymbolicInput, ctx: TraceContext) -> bool:
    return _ExprParser(inp, ctx).run()


# -- INI format ----------------------------------------------------------------

_I = "ini.c"
S_NL = if_site(_I, "next_line", 6, 11)
S_COMMENT = if_site(_I, "parse_line", 12, 9)
S_HASH = if_site(_I, "parse_line", 13, 9)
S_LBRACK = if_site(_I, "parse_line", 15, 9)
S_RBRACK = if_site(_I, "parse_section", 22, 13)
S_EQUALS = if_site(_I, "parse_pair", 30, 13)


def ini_lang_entry(inp: SymbolicInput, ctx: TraceContext) -> bool:
    i, n = 0, len(inp)
    with ctx.function("parse_ini"):
        while i < n:
            start = i
            with ctx.function("next_line"):
                while i < n and not ctx.if_cmp(S_NL, inp.at(i), "eq", 0x0A):
                    i += 1
            end = i
            if i < n:
                i += 1
            if not _ini_line(inp, ctx, start, end):
                return False
        return True


def _ini_line(inp: SymbolicInput, ctx: TraceContext, start: int, end: int) -> bool:
    with ctx.function("parse_line"):
        if start == end:
            return True
        first = inp.at(start)
        if ctx.if_cmp(S_COMMENT, first, "eq", 0x3B):
            return True
        if ctx.if_cmp(S_HASH, first, "eq", 0x23):
            return True
        if ctx.if_cmp(S_LBRACK, first, "eq", 0x5B):
            with ctx.function("parse_section"):
                # section name must be non-empty and ] must close the line
                j = start + 1
                while j < end and not ctx.if_cmp(S_RBRACK, inp.at(j), "eq", 0x5D):
                    j += 1
                return j == end - 1 and j > start + 1
        with ctx.function("parse_pair"):
            j = start
            while j < end and not ctx.if_cmp(S_EQUALS, inp.at(j), "eq", 0x3D):
                j += 1
            return j < end and j > start


# -- plain grammar oracles -----------------------------------------------------
# Independent recognizers, no symbolic API; used to cross-check the targets.

def json_ok(data: bytes) -> bool:
    pos = _o_space(data, 0)
    pos = _o_value(data, pos)
    if pos < 0:
        return False
    return _o_space(data, pos) == len(data)


def _o_space(data: bytes, i: int) -> int:
    while i < len(data) and data[i] <= 0x20:
        i += 1
    return i


def _o_value(data: bytes, i: int) -> int:
    if i >= len(data):
        return -1
    c = data[i]
    if c == 0x7B:
        return _o_object(data, i + 1)
    if c == 0x5B:
        return _o_array(data, i + 1)
    if c == 0x22:
        return _o_string(data, i + 1)
    for word in (b"true", b"false", b"null"):
        if c == word[0]:
            return i + len(word) if data[i : i + len(word)] == word else -1
    if c == 0x2D:
        i += 1
        if i >= len(data) or not (0x30 <= data[i] <= 0x39):
            return -1
    if not (0x30 <= data[i] <= 0x39):
        return -1
    while i < len(data) and 0x30 <= data[i] <= 0x39:
        i += 1
    return i


def _o_string(data: bytes, i: int) -> int:
    while i < len(data):
        c = data[i]
        if c == 0x22:
            return i + 1
        if c == 0x5C:
            i += 2
            continue
        if c < 0x20:
            return -1
        i += 1
    return -1


def _o_object(data: bytes, i: int) -> int:
    i = _o_space(data, i)
    if i < len(data) and data[i] == 0x7D:
        return i + 1
    while True:
        i = _o_space(data, i)
        if i >= len(data) or data[i] != 0x22:
            return -1
        i = _o_string(data, i + 1)
        if i < 0:
            return -1
        i = _o_space(data, i)
        if i >= len(data) or data[i] != 0x3A:
            return -1
        i = _o_space(data, i + 1)
        i = _o_value(data, i)
        if i < 0:
            return -1
        i = _o_space(data, i)
        if i >= len(data):
            return -1
        if data[i] == 0x7D:
            return i + 1
        if data[i] != 0x2C:
            return -1
        i += 1


def _o_array(data: bytes, i: int) -> int:
    i = _o_space(data, i)
    if i < len(data) and data[i] == 0x5D:
        return i + 1
    while True:
        i = _o_space(data, i)
        i = _o_value(data, i)
        if i < 0:
            return -1
        i = _o_space(data, i)
        if i >= len(data):
            return -1
        if data[i] == 0x5D:
            return i + 1
        if data[i] != 0x2C:
            return -1
        i += 1


def expr_ok(data: bytes) -> bool:
    if not data:
        return False
    pos = _o_expr(data, 0)
    return pos == len(data)


def _o_expr(data: bytes, i: int) -> int:
    i = _o_term(data, i)
    if i < 0:
        return -1
    while i < len(data) and data[i] in (0x2B, 0x2C):
        i = _o_term(data, i + 1)
        if i < 0:
            return -1
    return i


def _o_term(data: bytes, i: int) -> int:
    i = _o_factor(data, i)
    if i < 0:
        return -1
    while i < len(data) and data[i] == 0x2A:
        i = _o_factor(data, i + 1)
        if i < 0:
            return -1
    return i


def _o_factor(data: bytes, i: int) -> int:
    if i >= len(data):
        return -1
    if data[i] == 0x28:
        i = _o_expr(data, i + 1)
        if i < 0 or i >= len(data) or data[i] != 0x29:
            return -1
        return i + 1
    if not (0x30 <= data[i] <= 0x39):
        return -1
    while i < len(data) and 0x30 <= data[i] <= 0x39:
        i += 1
    return i


def ini_ok(data: bytes) -> bool:
    for line in data.split(b"\n"):
        if not line:
            continue
        if line[0] in (0x3B, 0x23):
            continue
        if line[0] == 0x5B:
            if len(line) < 3 or line[-1] != 0x5D or 0x5D in line[1:-1]:
                return False
            continue
        eq = line.find(b"=")
        if eq <= 0:
            return False
    return True


# -- registry --------------------------------------------------------------------

json_subset = ProgramUnderTest("json_subset", "JSON", json_subset_entry)
expr_lang = ProgramUnderTest("expr_lang", "EXPR", expr_lang_entry)
ini_lang = ProgramUnderTest("ini_lang", "INI", ini_lang_entry)

REGISTRY: dict[str, ProgramUnderTest] = {}
ORACLES: dict[str, Callable[[bytes], bool]] = {}


def register(program: ProgramUnderTest, oracle: Callable[[bytes], bool] | None = None):
    REGISTRY[program.name] = program
    if oracle is not None:
        ORACLES[program.name] = oracle
    return program


def get_target(name: str) -> ProgramUnderTest:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown target {name!r}; known: {sorted(REGISTRY)}") from None


register(json_subset, json_ok)
register(expr_lang, expr_ok)
register(ini_lang, ini_ok)

FORMAT_ORACLES: dict[str, Callable[[bytes], bool]] = {
    "JSON": json_ok,
    "EXPR": expr_ok,
    "INI": ini_ok,
}
