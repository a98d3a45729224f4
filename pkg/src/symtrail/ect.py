"""The expressive coverage tree (ECT).

A hierarchical map of branch coverage whose edges are either call context
(caller to callee, by function name) or branch structure (switch or if
head to its arms).  Every node names its branch site in a human-readable
``loc`` string and carries taken status, visit count, call-stack size,
and branch id, so both people and language models can read the tree to
decide where testing should go next.

Serialization uses exactly the field names ``loc, tp, tk, cs, vc, br, ch``
in that order; children keep first-visit order, so the JSON form is
deterministic and golden-file friendly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import expr as ex
from .errors import SchemaError, SiteConflict, UnknownSite
from .tracing import DEFAULT_CASE, BranchSite, BranchType, PathConstraint, Trace

# Function-name chains longer than this collapse to their deepest kept
# frame so recursion cannot grow the tree without bound.
DEFAULT_CONTEXT_DEPTH = 8

_NODE_FIELDS = ("loc", "tp", "tk", "cs", "vc", "br", "ch")
_COVERAGE_FIELDS = ("tp", "tk", "cs", "vc", "br")


@dataclass
class EctNode:
    """One tree node; context nodes (root, function frames) carry loc only."""

    loc: str
    tp: int = 0
    tk: int = 0
    cs: int = 0
    vc: int = 0
    br: int = -1
    is_context: bool = False
    depth: int = 0
    children: dict[str, "EctNode"] = field(default_factory=dict)
    parent: "EctNode | None" = field(default=None, repr=False, compare=False)

    def child(self, loc: str) -> "EctNode | None":
        return self.children.get(loc)

    def add_child(self, node: "EctNode") -> "EctNode":
        node.depth = self.depth + 1
        node.parent = self
        self.children[node.loc] = node
        return node


@dataclass
class UpdateSummary:
    new_taken: int
    total_taken: int


@dataclass
class CoverageStats:
    taken_nodes: int
    total_nodes: int
    taken_per_site_type: dict[str, int]


class EctTree:
    """Global coverage tree updated after every concolic run."""

    def __init__(self, context_depth: int = DEFAULT_CONTEXT_DEPTH):
        self.root = EctNode(loc="root", is_context=True, depth=0)
        self.generation = 0
        self.context_depth = context_depth
        self.switch_cases: dict[str, tuple[int, ...]] = {}
        self.expected_taken: set[str] = set()
        # First node registered per loc; later context-sensitive duplicates
        # keep their own nodes but loc-based queries resolve to the first.
        self._by_loc: dict[str, EctNode] = {}

    # -- node resolution ---------------------------------------------------

    def _context_node(self, chain: tuple[str, ...]) -> EctNode:
        node = self.root
        for name in chain[: self.context_depth]:
            nxt = node.child(name)
            if nxt is None:
                nxt = node.add_child(EctNode(loc=name, is_context=True))
            node = nxt
        return node

    def _register(self, node: EctNode) -> None:
        self._by_loc.setdefault(node.loc, node)

    def _branch_node(
        self, parent: EctNode, loc: str, tp: int, br: int, cs: int
    ) -> tuple[EctNode, bool]:
        node = parent.child(loc)
        if node is not None:
            if node.tp != tp:
                raise SiteConflict(f"{loc} recorded as both branch types")
            return node, False
        node = parent.add_child(EctNode(loc=loc, tp=tp, br=br, cs=cs))
        self._register(node)
        return node, True

    def resolve(self, site: BranchSite, context: tuple[str, ...] = ()) -> EctNode:
        """Node for a site under a calling context; falls back to the
        first node recorded for the loc when the context path is gone."""
        node = self.root
        for name in context[: self.context_depth]:
            node = node.child(name)
            if node is None:
                break
        else:
            head = node.child(site.head().loc())
            if head is not None:
                if site.br_id == -1:
                    return head
                arm = head.child(site.loc())
                if arm is not None:
                    return arm
        fallback = self._by_loc.get(site.loc())
        if fallback is None:
            raise UnknownSite(site.loc())
        return fallback

    # -- updates -------------------------------------------------------------

    def record_trace(self, trace: Trace) -> UpdateSummary:
        """Fold one trace into the tree.

        Creates head and arm nodes under their call context, bumps visit
        counts, and eagerly materializes untaken siblings: the opposite
        arm for an if, every registered case for a switch.  The default
        edge of a switch appears only once a run actually takes it.
        """
        for loc, cases in trace.switch_cases.items():
            known = self.switch_cases.get(loc)
            if known is None:
                self.switch_cases[loc] = cases
            elif known != cases:
                raise SiteConflict(f"switch at {loc} registered with different case lists")

        new_taken = 0
        for visit in trace.visits:
            site = visit.site
            chain = visit.context
            parent = self._context_node(chain)
            tp = int(site.br_type)
            head, _ = self._branch_node(parent, site.head().loc(), tp, -1, visit.call_stack_size)
            if head.tk == 0:
                head.tk = 1
                new_taken += 1
            head.vc += 1
            head.cs = visit.call_stack_size

            arm, _ = self._branch_node(head, site.loc(), tp, site.br_id, visit.call_stack_size)
            if arm.tk == 0:
                arm.tk = 1
                new_taken += 1
            arm.vc += 1
            arm.cs = visit.call_stack_size

            if site.br_type is BranchType.IF:
                other = site.arm(1 - site.br_id)
                self._branch_node(head, other.loc(), tp, other.br_id, visit.call_stack_size)
            else:
                for case in self.switch_cases.get(site.head().loc(), ()):
                    sibling = site.arm(case)
                    self._branch_node(head, sibling.loc(), tp, case, visit.call_stack_size)

        if new_taken:
            self.generation += new_taken
        return UpdateSummary(new_taken=new_taken, total_taken=self.stats().taken_nodes)

    def mark_expected(self, site: BranchSite) -> None:
        """Validator bookkeeping: this branch should be taken by a queued case."""
        self.expected_taken.add(site.loc())

    # -- queries ---------------------------------------------------------------

    def untaken_direction(self, pc: PathConstraint) -> bool:
        """True when negating ``pc`` aims at a branch arm never yet taken."""
        node = self.resolve(pc.site, pc.context)
        head = node.parent if node.parent is not None and not node.parent.is_context else node
        if head.br != -1:
            raise UnknownSite(pc.site.head().loc())
        if pc.site.br_type is BranchType.IF:
            other_loc = pc.site.arm(1 - pc.site.br_id).loc()
            other = head.child(other_loc)
            return other is None or other.tk == 0
        if pc.site.br_id == DEFAULT_CASE:
            # Negating one of the default edge's not-equal constraints
            # targets the specific case named in the constraint.
            target = _ne_case_value(pc)
            if target is None:
                return False
            child = head.child(pc.site.arm(target).loc())
            return child is None or child.tk == 0
        for child in head.children.values():
            if child.br >= 0 and child.loc != node.loc and child.tk == 0:
                return True
        return False

    def node_depth(self, loc: str) -> int:
        node = self._by_loc.get(loc)
        if node is None:
            raise UnknownSite(loc)
        return node.depth

    def locs(self, taken: bool) -> list[str]:
        """Branch locs in first-visit order, aggregated across contexts.

        A loc counts as taken when any of its context-sensitive nodes is
        taken, so the covered and uncovered lists partition the locs.
        """
        status: dict[str, bool] = {}

        def walk(node: EctNode) -> None:
            for child in node.children.values():
                if not child.is_context:
                    status[child.loc] = status.get(child.loc, False) or bool(child.tk)
                walk(child)

        walk(self.root)
        return [loc for loc, is_taken in status.items() if is_taken == taken]

    def stats(self) -> CoverageStats:
        taken = 0
        total = 0
        per_type = {"if": 0, "switch": 0}

        def walk(node: EctNode) -> None:
            nonlocal taken, total
            for child in node.children.values():
                if not child.is_context:
                    total += 1
                    if child.tk:
                        taken += 1
                        per_type["switch" if child.tp == 1 else "if"] += 1
                walk(child)

        walk(self.root)
        return CoverageStats(taken_nodes=taken, total_nodes=total, taken_per_site_type=per_type)


def _ne_case_value(pc: PathConstraint) -> int | None:
    e = pc.expr
    if isinstance(e, ex.Cmp) and e.op is ex.CmpOp.NE and isinstance(e.rhs, ex.Const):
        return e.rhs.value
    return None


# -- JSON form -----------------------------------------------------------------

def _node_payload(node: EctNode, force_children: bool = False) -> dict:
    if node.is_context:
        payload: dict = {"loc": node.loc}
    else:
        payload = {
            "loc": node.loc,
            "tp": node.tp,
            "tk": node.tk,
            "cs": node.cs,
            "vc": node.vc,
            "br": node.br,
        }
    if node.children or force_children or node.is_context:
        payload["ch"] = [_node_payload(c) for c in node.children.values()]
    return payload


def node_to_json(node: EctNode) -> str:
    """Canonical JSON for one node subtree."""
    return json.dumps(_node_payload(node), indent=1)


def to_json(tree: EctTree) -> str:
    """Canonical JSON for the whole tree, root included."""
    return json.dumps(_node_payload(tree.root, force_children=True), indent=1)


def _node_from_payload(payload, depth: int) -> EctNode:
    if not isinstance(payload, dict):
        raise SchemaError("tree node must be an object")
    unknown = set(payload) - set(_NODE_FIELDS)
    if unknown:
        raise SchemaError(f"unknown node fields: {sorted(unknown)}")
    if "loc" not in payload:
        raise SchemaError("node missing loc")
    present = [f for f in _COVERAGE_FIELDS if f in payload]
    if present and len(present) != len(_COVERAGE_FIELDS):
        missing = sorted(set(_COVERAGE_FIELDS) - set(present))
        raise SchemaError(f"node {payload['loc']!r} missing fields: {missing}")
    node = EctNode(loc=payload["loc"], is_context=not present, depth=depth)
    if present:
        for f in _COVERAGE_FIELDS:
            value = payload[f]
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaError(f"field {f} of {payload['loc']!r} must be an int")
            setattr(node, f, value)
    ch = payload.get("ch", [])
    if not isinstance(ch, list):
        raise SchemaError("ch must be a list")
    for child_payload in ch:
        child = _node_from_payload(child_payload, depth + 1)
        if child.loc in node.children:
            raise SchemaError(f"duplicate sibling loc {child.loc!r}")
        node.children[child.loc] = child
    return node


def node_from_json(text: str) -> EctNode:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return _node_from_payload(payload, depth=0)


def from_json(text: str) -> EctTree:
    """Rebuild a tree from its JSON form.

    A document whose top node is not the synthetic root (such as a
    single-branch excerpt) is attached under a fresh root.
    """
    top = node_from_json(text)
    tree = EctTree()
    if top.is_context and top.loc == "root":
        tree.root = top
        tree.root.depth = 0
        _renumber(tree.root)
    else:
        tree.root.add_child(top)
        _renumber(tree.root)

    def index(node: EctNode) -> None:
        for child in node.children.values():
            if not child.is_context:
                tree._by_loc.setdefault(child.loc, child)
            index(child)

    index(tree.root)
    return tree


def _renumber(node: EctNode) -> None:
    for child in node.children.values():
        child.depth = node.depth + 1
        child.parent = node
        _renumber(child)


def structurally_equal(a: EctNode, b: EctNode) -> bool:
    if (a.loc, a.is_context) != (b.loc, b.is_context):
        return False
    if not a.is_context:
        if (a.tp, a.tk, a.cs, a.vc, a.br) != (b.tp, b.tk, b.cs, b.vc, b.br):
            return False
    if list(a.children) != list(b.children):
        return False
    return all(structurally_equal(a.children[k], b.children[k]) for k in a.children)
