"""Baseline byte-domain constraint solving.

Plays the role of an off-the-shelf SMT solver for the small constraints
parsers produce: satisfiability only, fixed-size output.  The search is
exhaustive over the constrained byte positions and always picks the
lexicographically smallest satisfying assignment, so results are
reproducible where a real solver would return an arbitrary model.
"""
from __future__ import annotations

from itertools import product

from . import expr as ex
from .errors import TooManyVarsError, UnsatError
from .tracing import PathConstraint

# Exhaustive search is capped; parsing constraints are almost always
# single-byte comparisons, and 256**3 evaluations is already the limit
# of what a desk-scale run should spend on one constraint.
MAX_SOLVE_POSITIONS = 3

_solution_cache: dict[tuple[ex.SymExpr, bool], dict[int, int]] = {}


def evaluate_constraint(pc: PathConstraint, data: bytes) -> bool:
    """True iff ``data`` drives the branch in the direction ``pc`` records.

    Total: positions beyond the end of the input make the constraint
    unsatisfied rather than an error, since flexibly sized candidates
    may be shorter than the seed they came from.
    """
    if any(p >= len(data) for p in pc.positions):
        return False
    return bool(ex.eval_expr(pc.expr, data)) == pc.taken


def _search(pc: PathConstraint, buffer: bytearray, max_vars: int) -> dict[int, int]:
    spots = sorted(pc.positions)
    if len(spots) > max_vars:
        raise TooManyVarsError(len(spots), max_vars)
    want = pc.taken
    for combo in product(range(256), repeat=len(spots)):
        for pos, value in zip(spots, combo):
            buffer[pos] = value
        if bool(ex.eval_expr(pc.expr, bytes(buffer))) == want:
            return dict(zip(spots, combo))
    raise UnsatError(f"no byte assignment satisfies {pc.formula_text()}")


def get_solution(pc: PathConstraint, max_vars: int = MAX_SOLVE_POSITIONS) -> dict[int, int]:
    """Smallest satisfying assignment for the constraint in isolation.

    The constraint only reads its own positions, so the assignment is
    independent of surrounding bytes; results are memoized.
    """
    if not pc.positions:
        raise UnsatError("constraint has no symbolic positions")
    key = (pc.expr, pc.taken)
    hit = _solution_cache.get(key)
    if hit is not None:
        return dict(hit)
    buffer = bytearray(max(pc.positions) + 1)
    solution = _search(pc, buffer, max_vars)
    _solution_cache[key] = dict(solution)
    return solution


def solve_fixed(pc: PathConstraint, seed: bytes, max_vars: int = MAX_SOLVE_POSITIONS) -> bytes:
    """Mutate only the constrained positions of ``seed`` to satisfy ``pc``.

    Output length equals the seed length.  Raises UnsatError when no
    assignment exists or a position falls outside the seed.
    """
    if not pc.positions:
        raise UnsatError("constraint has no symbolic positions")
    if max(pc.positions) >= len(seed):
        raise UnsatError("constrained position beyond seed length")
    solution = get_solution(pc, max_vars)
    out = bytearray(seed)
    for pos, value in solution.items():
        out[pos] = value
    return bytes(out)


def clear_cache() -> None:
    _solution_cache.clear()
