"""Branch sites, path constraints, and the trace context targets run against.

A program under test does all of its input-dependent branching through a
:class:`TraceContext`: ``branch_if`` for two-way conditions, ``branch_switch``
for byte dispatch over a declared case list, and ``enter``/``leave`` to keep
the call-stack attribute honest.  Running a target once under
:func:`run_concolic` yields a :class:`Trace`: the ordered path constraints,
the visited branch sites with their calling context, and the parse outcome.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Callable

from . import expr as ex
from .errors import ConsistencyError, UnbalancedExit

# Branch id of the default edge of a switch (a real case value is 0..255,
# -1 names the switch head itself).
DEFAULT_CASE = -2


class BranchType(IntEnum):
    IF = 0
    SWITCH = 1


@dataclass(frozen=True)
class BranchSite:
    """Static location of one conditional.

    ``loc()`` renders the unique identifier ``file_func_line_col_brType``
    with ``_brId`` appended for a specific arm (br_id -1 is the bare
    site, used for switch heads).
    """

    file: str
    func: str
    line: int
    col: int
    br_type: BranchType
    br_id: int = -1

    def __post_init__(self):
        if self.line <= 0 or self.col <= 0:
            raise ValueError("line and col must be positive")

    def loc(self) -> str:
        kind = "if" if self.br_type is BranchType.IF else "switch"
        base = f"{self.file}_{self.func}_{self.line}_{self.col}_{kind}"
        if self.br_id == -1:
            return base
        if self.br_id == DEFAULT_CASE:
            return f"{base}_default"
        return f"{base}_{self.br_id}"

    def head(self) -> "BranchSite":
        return self if self.br_id == -1 else replace(self, br_id=-1)

    def arm(self, br_id: int) -> "BranchSite":
        return replace(self, br_id=br_id)


def if_site(file: str, func: str, line: int, col: int) -> BranchSite:
    return BranchSite(file, func, line, col, BranchType.IF)


def switch_site(file: str, func: str, line: int, col: int) -> BranchSite:
    return BranchSite(file, func, line, col, BranchType.SWITCH)


@dataclass(frozen=True)
class PathConstraint:
    """One branch decision: expression, direction taken, and where.

    ``positions`` is exactly the set of byte-variable indices in ``expr``.
    ``context`` is the function-name chain active at the branch; the
    coverage tree uses it to keep the same site distinct under different
    callers.
    """

    site: BranchSite
    expr: ex.SymExpr
    taken: bool
    positions: frozenset[int]
    call_stack_size: int
    order: int
    context: tuple[str, ...] = ()

    @classmethod
    def make(cls, site, expr, taken, call_stack_size, order, context=()) -> "PathConstraint":
        return cls(site, expr, taken, ex.positions(expr), call_stack_size, order, context)

    def negated(self) -> "PathConstraint":
        """The same branch with the direction flipped; involutive."""
        return replace(self, taken=not self.taken)

    def formula(self) -> ex.SymExpr:
        """Expression that must evaluate true for this constraint to hold.

        Negating a constraint therefore wraps (or unwraps) a ``not``
        around the recorded expression.
        """
        if self.taken:
            return self.expr
        if isinstance(self.expr, ex.Not):
            return self.expr.inner
        return ex.Not(self.expr)

    def formula_text(self) -> str:
        return ex.to_text(self.formula())


@dataclass(frozen=True)
class SiteVisit:
    site: BranchSite
    call_stack_size: int
    context: tuple[str, ...] = ()


class Outcome(Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    CRASH = "crash"


@dataclass
class Trace:
    """Record of one concolic run."""

    input: bytes
    constraints: list[PathConstraint]
    visits: list[SiteVisit]
    outcome: Outcome
    crash_reason: str = ""
    switch_cases: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def serialized(self) -> str:
        """Deterministic text form, used to compare whole traces."""
        lines = [f"input {self.input.hex()}", f"outcome {self.outcome.value} {self.crash_reason}"]
        for pc in self.constraints:
            lines.append(
                f"pc {pc.order} {pc.site.loc()} taken={int(pc.taken)} cs={pc.call_stack_size}"
                f" ctx={'/'.join(pc.context)} {ex.to_text(pc.expr)}"
            )
        for v in self.visits:
            lines.append(f"visit {v.site.loc()} cs={v.call_stack_size} ctx={'/'.join(v.context)}")
        for loc in sorted(self.switch_cases):
            lines.append(f"cases {loc} {list(self.switch_cases[loc])}")
        return "\n".join(lines)


@dataclass(frozen=True)
class SymByte:
    """A concrete input byte paired with its symbolic variable."""

    pos: int
    concrete: int

    @property
    def var(self) -> ex.ByteVar:
        return ex.ByteVar(self.pos)


class SymbolicInput:
    """Read-only handle over the input bytes handed to a target."""

    def __init__(self, data: bytes):
        self._data = bytes(data)

    def __len__(self) -> int:
        return len(self._data)

    def at(self, i: int) -> SymByte:
        return SymByte(i, self._data[i])

    def raw(self) -> bytes:
        # For oracles and reporting only; targets must not branch on this.
        return self._data


# Comparison helpers build constant-on-the-left signed forms, so a
# "byte <= 0x39" check prints as (bvsge #x00000039 (concat #x000000 k!n)).
_CMP_BUILDERS: dict[str, Callable[[ex.SymExpr, int], ex.Cmp]] = {
    "eq": lambda v, k: ex.cmp32(ex.CmpOp.EQ, ex.Const(k, 32), v),
    "ne": lambda v, k: ex.cmp32(ex.CmpOp.NE, ex.Const(k, 32), v),
    "le": lambda v, k: ex.cmp32(ex.CmpOp.SGE, ex.Const(k, 32), v),
    "lt": lambda v, k: ex.cmp32(ex.CmpOp.SGT, ex.Const(k, 32), v),
    "ge": lambda v, k: ex.cmp32(ex.CmpOp.SLE, ex.Const(k, 32), v),
    "gt": lambda v, k: ex.cmp32(ex.CmpOp.SLT, ex.Const(k, 32), v),
}

_CMP_CONCRETE: dict[str, Callable[[int, int], bool]] = {
    "eq": lambda b, k: b == k,
    "ne": lambda b, k: b != k,
    "le": lambda b, k: b <= k,
    "lt": lambda b, k: b < k,
    "ge": lambda b, k: b >= k,
    "gt": lambda b, k: b > k,
}


class TraceContext:
    """Collects constraints and visits while a target executes."""

    DEFAULT = DEFAULT_CASE

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.constraints: list[PathConstraint] = []
        self.visits: list[SiteVisit] = []
        self.switch_cases: dict[str, tuple[int, ...]] = {}
        self._stack: list[str] = []
        self._order = 0

    # -- call stack ------------------------------------------------------

    def enter(self, func: str) -> None:
        self._stack.append(func)

    def leave(self) -> None:
        if not self._stack:
            raise UnbalancedExit("function exit at call-stack depth 0")
        self._stack.pop()

    @contextmanager
    def function(self, func: str):
        self.enter(func)
        try:
            yield self
        finally:
            self.leave()

    @property
    def depth(self) -> int:
        return len(self._stack)

    # -- branch primitives -------------------------------------------------

    def _record(self, site: BranchSite, cond: ex.SymExpr, taken: bool) -> None:
        ctx = tuple(self._stack)
        self.constraints.append(
            PathConstraint.make(site, cond, taken, self.depth, self._order, ctx)
        )
        self._order += 1

    def _visit(self, site: BranchSite) -> None:
        self.visits.append(SiteVisit(site, self.depth, tuple(self._stack)))

    def branch_if(self, site: BranchSite, cond: ex.SymExpr, concrete: bool) -> bool:
        """Record a two-way branch and return the concrete direction."""
        if site.br_type is not BranchType.IF:
            raise ConsistencyError(f"branch_if on non-if site {site.loc()}")
        if bool(ex.eval_expr(cond, self.data)) != concrete:
            raise ConsistencyError(
                f"condition at {site.loc()} evaluates to {not concrete}, caller said {concrete}"
            )
        arm = site.arm(0 if concrete else 1)
        self._record(arm, cond, concrete)
        self._visit(arm)
        return concrete

    def branch_switch(
        self, site: BranchSite, scrutinee: ex.SymExpr, concrete: int, cases: list[int]
    ) -> int:
        """Record a byte dispatch; returns the matched case or DEFAULT.

        The full case list is registered against the site so the coverage
        tree can materialize untaken case children.  A default traversal
        is recorded as one not-equal constraint per declared case.
        """
        if site.br_type is not BranchType.SWITCH:
            raise ConsistencyError(f"branch_switch on non-switch site {site.loc()}")
        value = ex.eval_expr(scrutinee, self.data)
        if value != concrete:
            raise ConsistencyError(
                f"scrutinee at {site.loc()} evaluates to {value:#x}, caller said {concrete:#x}"
            )
        head_loc = site.head().loc()
        registered = self.switch_cases.get(head_loc)
        case_tuple = tuple(cases)
        if registered is None:
            self.switch_cases[head_loc] = case_tuple
        elif registered != case_tuple:
            raise ConsistencyError(f"switch at {head_loc} re-registered with different cases")
        widened = ex.widen32(scrutinee)
        if concrete in cases:
            arm = site.arm(concrete)
            self._record(arm, ex.Cmp(ex.CmpOp.EQ, widened, ex.Const(concrete, 32)), True)
            self._visit(arm)
            return concrete
        arm = site.arm(DEFAULT_CASE)
        for c in cases:
            self._record(arm, ex.Cmp(ex.CmpOp.NE, widened, ex.Const(c, 32)), True)
        self._visit(arm)
        return DEFAULT_CASE

    # -- ergonomic wrappers used by the bundled targets --------------------

    def if_cmp(self, site: BranchSite, b: SymByte, op: str, k: int) -> bool:
        """Two-way branch comparing one input byte against a constant."""
        cond = _CMP_BUILDERS[op](b.var, k)
        return self.branch_if(site, cond, _CMP_CONCRETE[op](b.concrete, k))

    def switch_byte(self, site: BranchSite, b: SymByte, cases: list[int]) -> int:
        return self.branch_switch(site, b.var, b.concrete, cases)


@dataclass(frozen=True)
class ProgramUnderTest:
    """A target: deterministic entry point driving all branching via ctx."""

    name: str
    format: str
    entry: Callable[[SymbolicInput, TraceContext], bool]


def run_concolic(program: ProgramUnderTest, data: bytes) -> Trace:
    """Execute a target once, concretely, while collecting constraints.

    Exceptions raised by the target are captured as a crash outcome,
    never propagated.
    """
    ctx = TraceContext(data)
    try:
        accepted = program.entry(SymbolicInput(data), ctx)
        outcome = Outcome.ACCEPT if accepted else Outcome.REJECT
        reason = ""
    except (ConsistencyError, UnbalancedExit):
        raise
    except Exception as exc:  # the crash is the result we are after
        outcome = Outcome.CRASH
        reason = f"{type(exc).__name__}: {exc}"
    return Trace(
        input=bytes(data),
        constraints=list(ctx.constraints),
        visits=list(ctx.visits),
        outcome=outcome,
        crash_reason=reason,
        switch_cases=dict(ctx.switch_cases),
    )
