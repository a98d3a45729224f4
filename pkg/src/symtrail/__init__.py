"""symtrail: concolic execution for structured parser inputs.

The engine runs small parser targets written against an embedded
symbolic-byte API, keeps a human-readable coverage tree of every branch
arm, selects which path constraints are worth negating, solves them
either with an exhaustive byte-domain baseline or an LLM-driven
solve-complete step guarded by a soundness validator, and acquires new
structured seeds from coverage history whenever testing saturates.
"""

from .expr import ByteVar, CmpOp, Concat, Const, Cmp, Not, SymExpr, ZeroExtend
from .tracing import (
    BranchSite,
    BranchType,
    Outcome,
    PathConstraint,
    ProgramUnderTest,
    SymbolicInput,
    Trace,
    TraceContext,
    run_concolic,
)
from .ect import EctNode, EctTree
from .selector import Candidate, SelectorParams

__version__ = "0.1.0"

__all__ = [
    "BranchSite",
    "BranchType",
    "ByteVar",
    "Candidate",
    "Cmp",
    "CmpOp",
    "Concat",
    "Const",
    "EctNode",
    "EctTree",
    "Not",
    "Outcome",
    "PathConstraint",
    "ProgramUnderTest",
    "SelectorParams",
    "SymExpr",
    "SymbolicInput",
    "Trace",
    "TraceContext",
    "ZeroExtend",
    "run_concolic",
    "__version__",
]
