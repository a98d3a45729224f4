"""Two-phase structure-aware path-constraint selection.

Phase one drops constraints within a single trace that differ only in
the symbolic byte index (the classic per-byte classification loop emits
one structurally identical constraint per input byte).  Phase two ranks
the survivors against the global coverage tree by node weight

    weight = alpha * untaken + beta * visit_cnt + gamma * depth

and drops candidates whose flipped direction is already covered and
whose shape was already dispatched to the solver in an earlier
iteration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Collection

from . import expr as ex
from .ect import EctTree
from .tracing import PathConstraint, Trace

NormKey = tuple[tuple[str, ...], str, str]


@dataclass(frozen=True)
class SelectorParams:
    """Weights and throttle for phase-two ranking.

    ``visit_term`` selects between the literal weight formula
    (``beta * vc``) and the rarely-visited reading (``beta / (1 + vc)``).
    ``depth_source`` picks tree depth or recorded call-stack size.
    """

    alpha: float = 1.0
    beta: float = 3.0
    gamma: float = 0.8
    top_k: int = 16
    visit_term: str = "literal"
    depth_source: str = "ect"

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.visit_term not in ("literal", "inverse"):
            raise ValueError(f"unknown visit_term {self.visit_term!r}")
        if self.depth_source not in ("ect", "stack"):
            raise ValueError(f"unknown depth_source {self.depth_source!r}")


@dataclass(frozen=True)
class Candidate:
    pc: PathConstraint
    weight: float
    norm_key: NormKey


def norm_key(pc: PathConstraint) -> NormKey:
    """Calling context, location, and expression text with byte indices
    anonymized.  The context keeps the key aligned with the coverage
    tree, where the same site under different callers is a different
    branch."""
    return (pc.context, pc.site.loc(), ex.to_text(pc.expr, anonymize_vars=True))


def phase1_dedup(trace: Trace) -> list[PathConstraint]:
    """Keep the first constraint per (context, loc, shape), in order."""
    seen: set[NormKey] = set()
    kept: list[PathConstraint] = []
    for pc in trace.constraints:
        key = norm_key(pc)
        if key in seen:
            continue
        seen.add(key)
        kept.append(pc)
    return kept


def score(tree: EctTree, pc: PathConstraint, params: SelectorParams) -> float:
    """Node weight of the branch arm this constraint took."""
    node = tree.resolve(pc.site, pc.context)
    untaken = 1.0 if tree.untaken_direction(pc) else 0.0
    if params.visit_term == "literal":
        visit = float(node.vc)
    else:
        visit = 1.0 / (1.0 + node.vc)
    depth = float(node.depth if params.depth_source == "ect" else node.cs)
    return params.alpha * untaken + params.beta * visit + params.gamma * depth


def phase2_select(
    tree: EctTree,
    candidates: list[PathConstraint],
    params: SelectorParams,
    dispatched: Collection[NormKey] = (),
) -> list[Candidate]:
    """Rank phase-one survivors and return at most ``top_k`` of them.

    A candidate is dropped only when its negated direction is already
    taken and its shape was dispatched before; a fresh untaken direction
    is always eligible no matter how it scores.
    """
    scored: list[Candidate] = []
    for pc in candidates:
        key = norm_key(pc)
        if not tree.untaken_direction(pc) and key in dispatched:
            continue
        scored.append(Candidate(pc=pc, weight=score(tree, pc, params), norm_key=key))
    scored.sort(key=lambda c: (-c.weight, c.pc.order, c.pc.site.loc()))
    return scored[: params.top_k]
