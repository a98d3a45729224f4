"""Solve-complete prompting and the test-case validator.

A negated path constraint is rendered into a prompt holding the
constraint text and the seed with two kinds of masks: one ``[k!n]``
constraint mask per constrained byte, and a single ``[xxx]`` flexible
mask covering everything after the last constrained byte.  The model is
asked to first solve the constraint masks syntax-aware, then complete
the flexible mask with a string of any length that keeps the whole
input valid.

Model output is untrusted.  ``validate_and_refine`` checks every
candidate against the constraint and, when it fails, overwrites the
constrained bytes with the baseline solver's assignment, so every test
case that leaves this module satisfies its negated constraint.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ect import EctTree
from .errors import UnparseableResponse, UnsatDrop, UnsatError
from .solver import evaluate_constraint, get_solution
from .tracing import BranchSite, PathConstraint

TASK_SOLVE = "Task: solve-complete"
TASK_INITIAL = "Task: generate initial inputs"
TASK_FRESH = "Task: generate fresh inputs"

SOLVE_SYSTEM_PROMPT = (
    "You are a constraint solver for structured test inputs. Solve every "
    "constraint mask for a value that satisfies the path constraint and fits "
    "the input syntax, then complete the flexible mask so the whole input "
    "stays syntactically valid. Answer with the final test input in one "
    "fenced block."
)

SEED_SYSTEM_PROMPT = (
    "You are a test input generator for parsers. Reply with each test input "
    "in its own fenced block and nothing else inside the blocks."
)


@dataclass
class MaskedSeed:
    """Seed text with constraint masks and one flexible mask applied."""

    text: bytes
    constrained_positions: dict[str, int]
    flexible_origin: int


@dataclass(frozen=True)
class LlmRequest:
    model: str
    system: str
    user: str
    temperature: float = 0.0


@dataclass
class LlmResponse:
    text: str
    candidate: bytes | None = None
    solved: dict[int, int] = field(default_factory=dict)


def mask_seed(pc: PathConstraint, seed: bytes) -> MaskedSeed:
    """Replace constrained bytes with ``[k!n]`` tokens and the suffix
    after the last constrained byte with ``[xxx]``."""
    spots = sorted(pc.positions)
    if not spots:
        raise ValueError("constraint has no symbolic positions to mask")
    pieces: list[bytes] = []
    mapping: dict[str, int] = {}
    prev = 0
    for p in spots:
        pieces.append(seed[prev:p])
        token = f"[k!{p}]"
        pieces.append(token.encode("ascii"))
        mapping[token] = p
        prev = p + 1
    pieces.append(b"[xxx]")
    return MaskedSeed(
        text=b"".join(pieces),
        constrained_positions=mapping,
        flexible_origin=spots[-1] + 1,
    )


def build_solve_complete_prompt(
    pc: PathConstraint, seed: bytes, fmt: str
) -> tuple[MaskedSeed, str]:
    """Deterministic user prompt for one negated constraint.

    ``pc`` is the already-negated constraint; its formula text is what
    the model must make hold.
    """
    masked = mask_seed(pc, seed)
    prompt = (
        f"{TASK_SOLVE}\n"
        f"Input format: {fmt}\n"
        "Path constraint (SMT-LIB bit-vector form; it must hold over the "
        "named input bytes, where k!n is input byte n):\n"
        "```\n"
        f"{pc.formula_text()}\n"
        "```\n"
        "Marked test input ([k!n] is a constraint mask standing for input "
        "byte n; [xxx] is a flexible mask that may be replaced by a string "
        "of any length, including empty):\n"
        "```\n"
        f"{masked.text.decode('latin-1')}\n"
        "```\n"
        "Step 1: solve each constraint mask. Pick a byte value that "
        "satisfies the path constraint and also fits the "
        f"{fmt} syntax at that spot, then put that single character in "
        "place of the mask.\n"
        "Step 2: complete the flexible mask. Replace [xxx] with any string, "
        "of any length, that turns the whole text into a syntactically "
        f"valid {fmt} input.\n"
        "Reply with the final test input in one fenced block."
    )
    return masked, prompt


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n?(.*?)```", re.DOTALL)
_INLINE_RE = re.compile(r"`([^`\n]+)`")


def extract_blocks(text: str) -> list[str]:
    """All fenced blocks in a response, outermost fences only."""
    blocks = []
    for m in _FENCE_RE.finditer(text):
        body = m.group(1)
        if body.endswith("\n"):
            body = body[:-1]
        blocks.append(body)
    return blocks


def parse_response(text: str, masked: MaskedSeed | None = None) -> bytes:
    """Candidate bytes from a model response.

    Takes the last fenced block, falling back to the last inline-quoted
    span; anything else is unparseable and the validator treats the
    candidate as failed.
    """
    blocks = extract_blocks(text)
    if blocks:
        return blocks[-1].encode("latin-1")
    inline = _INLINE_RE.findall(text)
    if inline:
        return inline[-1].encode("latin-1")
    raise UnparseableResponse("no fenced or quoted test input in response")


def solved_bytes(masked: MaskedSeed, candidate: bytes) -> dict[int, int]:
    """Bytes the candidate placed at the constrained positions."""
    out: dict[int, int] = {}
    for pos in masked.constrained_positions.values():
        if pos < len(candidate):
            out[pos] = candidate[pos]
    return out


def validate_and_refine(
    pc: PathConstraint,
    br: BranchSite,
    candidate: bytes,
    seed: bytes,
    tree: EctTree,
) -> tuple[bytes, bool]:
    """Check a candidate against its negated constraint; repair if needed.

    Returns (final test case, refined?).  A compliant candidate passes
    through unchanged.  A failing one gets the baseline solver's
    assignment written at the constrained positions, extending the
    candidate with the seed's own bytes when it is shorter than the last
    constrained position.  Unsatisfiable constraints raise UnsatDrop and
    the candidate is discarded.
    """
    if evaluate_constraint(pc, candidate):
        tree.mark_expected(br)
        return candidate, False
    try:
        solution = get_solution(pc)
    except UnsatError as exc:
        raise UnsatDrop(str(exc)) from exc
    need = max(solution) + 1
    if len(candidate) < need:
        candidate = candidate + seed[len(candidate):need]
        if len(candidate) < need:
            candidate = candidate + bytes(need - len(candidate))
    refined = bytearray(candidate)
    for pos, value in solution.items():
        refined[pos] = value
    tree.mark_expected(br)
    return bytes(refined), True
