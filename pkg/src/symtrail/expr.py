"""Symbolic byte-level expressions.

Expressions are immutable trees over per-byte input variables (``k!n``),
bit-vector constants, zero-extension, concatenation, comparisons, and
boolean negation.  They support three things the rest of the engine is
built on:

* concrete evaluation against an input byte string,
* an SMT-LIB flavoured text form that round-trips bit-exactly (the same
  text is embedded in solver prompts),
* enumeration of the input positions an expression depends on.

Zero-extension prints as a concat with an all-zero constant, e.g.
``(concat #x000000 k!95)`` for an 8-bit variable widened to 32 bits, and
parses back to the same node.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .errors import ExprError, IndexOutOfRange, ParseError


class CmpOp(Enum):
    """Comparison operators over equal-width bit-vectors."""

    EQ = "="
    NE = "distinct"
    SLT = "bvslt"
    SLE = "bvsle"
    SGT = "bvsgt"
    SGE = "bvsge"
    ULT = "bvult"
    ULE = "bvule"
    UGT = "bvugt"
    UGE = "bvuge"


_SIGNED = {CmpOp.SLT, CmpOp.SLE, CmpOp.SGT, CmpOp.SGE}
_OP_BY_TOKEN = {op.value: op for op in CmpOp}


class SymExpr:
    """Base class; concrete variants below are frozen dataclasses."""

    __slots__ = ()

    def width(self) -> int | None:
        """Bit width of the value, or None for boolean expressions."""
        raise NotImplementedError

    def is_bool(self) -> bool:
        return self.width() is None

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class ByteVar(SymExpr):
    """One symbolic input byte, ``k!index``."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ExprError(f"byte variable index must be >= 0, got {self.index}")

    def width(self) -> int:
        return 8


@dataclass(frozen=True)
class Const(SymExpr):
    """A bit-vector constant of width 8, 16, or 32 bits."""

    value: int
    bits: int = 32

    def __post_init__(self):
        if self.bits not in (8, 16, 32):
            raise ExprError(f"constant width must be 8, 16, or 32 bits, got {self.bits}")
        if not 0 <= self.value < (1 << self.bits):
            raise ExprError(f"constant {self.value:#x} does not fit in {self.bits} bits")

    def width(self) -> int:
        return self.bits


@dataclass(frozen=True)
class ZeroExtend(SymExpr):
    """``inner`` widened with zero bits up to ``to_bits``."""

    inner: SymExpr
    to_bits: int

    def __post_init__(self):
        iw = self.inner.width()
        if iw is None:
            raise ExprError("cannot zero-extend a boolean expression")
        if self.to_bits <= iw:
            raise ExprError(f"zero-extend target {self.to_bits} must exceed inner width {iw}")
        if (self.to_bits - iw) % 8 != 0:
            raise ExprError("zero-extend padding must be a whole number of bytes")

    def width(self) -> int:
        return self.to_bits


@dataclass(frozen=True)
class Concat(SymExpr):
    """Big-endian concatenation; the first part holds the highest bits."""

    parts: tuple[SymExpr, ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ExprError("concat needs at least two parts")
        for p in self.parts:
            if p.width() is None:
                raise ExprError("concat parts must be bit-vectors")

    def width(self) -> int:
        return sum(p.width() for p in self.parts)


@dataclass(frozen=True)
class Cmp(SymExpr):
    """Comparison of two bit-vectors of equal width; evaluates to a boolean."""

    op: CmpOp
    lhs: SymExpr
    rhs: SymExpr

    def __post_init__(self):
        lw, rw = self.lhs.width(), self.rhs.width()
        if lw is None or rw is None:
            raise ExprError("comparison operands must be bit-vectors")
        if lw != rw:
            raise ExprError(f"comparison operands must have equal width, got {lw} and {rw}")

    def width(self) -> None:
        return None


@dataclass(frozen=True)
class Not(SymExpr):
    """Boolean negation of a boolean expression."""

    inner: SymExpr

    def __post_init__(self):
        if not self.inner.is_bool():
            raise ExprError("not() applies to boolean expressions only")

    def width(self) -> None:
        return None


# -- construction helpers ----------------------------------------------------

def byte_var(index: int) -> ByteVar:
    return ByteVar(index)


def widen32(e: SymExpr) -> SymExpr:
    """Zero-extend a bit-vector to 32 bits (identity if already 32)."""
    w = e.width()
    if w is None:
        raise ExprError("cannot widen a boolean expression")
    if w == 32:
        return e
    return ZeroExtend(e, 32)


def cmp32(op: CmpOp, lhs: SymExpr, rhs: SymExpr) -> Cmp:
    """Comparison with both sides zero-extended to 32 bits first."""
    return Cmp(op, widen32(lhs), widen32(rhs))


# -- evaluation ---------------------------------------------------------------

def _as_signed(value: int, bits: int) -> int:
    return value - (1 << bits) if value >= (1 << (bits - 1)) else value


def eval_expr(expr: SymExpr, data: bytes) -> int | bool:
    """Concrete value of ``expr`` under the assignment k!n := data[n].

    Bit-vector expressions yield a non-negative int, comparisons and
    negations a bool.  Signed comparisons interpret both operands as
    two's complement at their shared width.
    """
    if isinstance(expr, ByteVar):
        if expr.index >= len(data):
            raise IndexOutOfRange(expr.index, len(data))
        return data[expr.index]
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, ZeroExtend):
        return eval_expr(expr.inner, data)
    if isinstance(expr, Concat):
        acc = 0
        for part in expr.parts:
            acc = (acc << part.width()) | eval_expr(part, data)
        return acc
    if isinstance(expr, Cmp):
        lv = eval_expr(expr.lhs, data)
        rv = eval_expr(expr.rhs, data)
        if expr.op in _SIGNED:
            bits = expr.lhs.width()
            lv, rv = _as_signed(lv, bits), _as_signed(rv, bits)
        if expr.op is CmpOp.EQ:
            return lv == rv
        if expr.op is CmpOp.NE:
            return lv != rv
        if expr.op in (CmpOp.SLT, CmpOp.ULT):
            return lv < rv
        if expr.op in (CmpOp.SLE, CmpOp.ULE):
            return lv <= rv
        if expr.op in (CmpOp.SGT, CmpOp.UGT):
            return lv > rv
        return lv >= rv
    if isinstance(expr, Not):
        return not eval_expr(expr.inner, data)
    raise ExprError(f"cannot evaluate {type(expr).__name__}")


def positions(expr: SymExpr) -> frozenset[int]:
    """Set of input indices appearing as byte variables in ``expr``."""
    found: set[int] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, ByteVar):
            found.add(e.index)
        elif isinstance(e, ZeroExtend):
            stack.append(e.inner)
        elif isinstance(e, Concat):
            stack.extend(e.parts)
        elif isinstance(e, Cmp):
            stack.append(e.lhs)
            stack.append(e.rhs)
        elif isinstance(e, Not):
            stack.append(e.inner)
    return frozenset(found)


# -- text form ----------------------------------------------------------------

def _hex_const(value: int, bits: int) -> str:
    return "#x" + format(value, f"0{bits // 4}x")


def to_text(expr: SymExpr, anonymize_vars: bool = False) -> str:
    """SMT-LIB flavoured s-expression for ``expr``.

    With ``anonymize_vars`` every byte variable prints as ``k!*``, which
    is the normalization used to spot constraints identical up to the
    symbolic byte index.
    """
    if isinstance(expr, ByteVar):
        return "k!*" if anonymize_vars else f"k!{expr.index}"
    if isinstance(expr, Const):
        return _hex_const(expr.value, expr.bits)
    if isinstance(expr, ZeroExtend):
        pad = expr.to_bits - expr.inner.width()
        return f"(concat {_hex_const(0, pad)} {to_text(expr.inner, anonymize_vars)})"
    if isinstance(expr, Concat):
        inner = " ".join(to_text(p, anonymize_vars) for p in expr.parts)
        return f"(concat {inner})"
    if isinstance(expr, Cmp):
        return (
            f"({expr.op.value} {to_text(expr.lhs, anonymize_vars)}"
            f" {to_text(expr.rhs, anonymize_vars)})"
        )
    if isinstance(expr, Not):
        return f"(not {to_text(expr.inner, anonymize_vars)})"
    raise ExprError(f"cannot print {type(expr).__name__}")


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_VAR_RE = re.compile(r"^k!(\d+)$")
_HEX_RE = re.compile(r"^#x([0-9a-fA-F]+)$")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _read(tokens: list[str], pos: int):
    """Recursive s-expression reader; returns (node, next_pos)."""
    if pos >= len(tokens):
        raise ParseError("unexpected end of constraint text")
    tok = tokens[pos]
    if tok == ")":
        raise ParseError("unexpected ')'")
    if tok != "(":
        return tok, pos + 1
    items = []
    pos += 1
    while pos < len(tokens) and tokens[pos] != ")":
        item, pos = _read(tokens, pos)
        items.append(item)
    if pos >= len(tokens):
        raise ParseError("missing ')'")
    return items, pos + 1


def _build(node) -> SymExpr | tuple[int, int]:
    """Turn a read s-expression into a SymExpr.

    Hex atoms come back as raw (value, bits) pairs so that a leading
    all-zero constant inside a two-part concat can canonicalize into a
    ZeroExtend before constant width rules apply.
    """
    if isinstance(node, str):
        m = _VAR_RE.match(node)
        if m:
            return ByteVar(int(m.group(1)))
        m = _HEX_RE.match(node)
        if m:
            digits = m.group(1)
            return (int(digits, 16), 4 * len(digits))
        raise ParseError(f"unknown atom {node!r}")
    if not node:
        raise ParseError("empty expression")
    head = node[0]
    if isinstance(head, list):
        # ((_ zero_extend N) e) is accepted as an alias for the concat form.
        if len(head) == 3 and head[0] == "_" and head[1] == "zero_extend" and len(node) == 2:
            inner = _to_expr(_build(node[1]))
            return ZeroExtend(inner, inner.width() + int(head[2]))
        raise ParseError(f"unsupported operator {head!r}")
    if head == "concat":
        raw = [_build(n) for n in node[1:]]
        if len(raw) == 2 and isinstance(raw[0], tuple) and raw[0][0] == 0:
            second = _to_expr(raw[1])
            return ZeroExtend(second, raw[0][1] + second.width())
        return Concat(tuple(_to_expr(r) for r in raw))
    if head == "not":
        if len(node) != 2:
            raise ParseError("not takes exactly one argument")
        return Not(_to_expr(_build(node[1])))
    if head in _OP_BY_TOKEN:
        if len(node) != 3:
            raise ParseError(f"{head} takes exactly two arguments")
        return Cmp(_OP_BY_TOKEN[head], _to_expr(_build(node[1])), _to_expr(_build(node[2])))
    raise ParseError(f"unsupported operator {head!r}")


def _to_expr(built) -> SymExpr:
    if isinstance(built, tuple):
        value, bits = built
        try:
            return Const(value, bits)
        except ExprError as exc:
            raise ParseError(str(exc)) from exc
    return built


@lru_cache(maxsize=4096)
def from_text(text: str) -> SymExpr:
    """Parse constraint text produced by :func:`to_text`.

    Expressions are immutable, so parses are memoized.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty constraint text")
    node, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ParseError("trailing tokens after expression")
    try:
        return _to_expr(_build(node))
    except ExprError as exc:
        raise ParseError(str(exc)) from exc
