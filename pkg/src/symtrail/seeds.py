"""History coverage recording, saturation detection, and seed acquisition.

The history recorder keeps the mapping between each executed test input
and the branch locs it covered, plus the global covered and uncovered
loc sets derived from the coverage tree.  When the tree's generation
counter stops moving for a configured window (wall clock, or an
iteration count in deterministic test mode), testing is saturated and
the campaign asks the model for fresh seeds built from that history.
Transport failure always degrades to random printable seeds, so
acquisition is total.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .ect import EctTree
from .errors import TransportError, UnparseableResponse
from .llm import (
    SEED_SYSTEM_PROMPT,
    TASK_FRESH,
    TASK_INITIAL,
    LlmRequest,
    extract_blocks,
)
from .tracing import Outcome, Trace

RECENT_RING_SIZE = 32
LOC_BUDGET = 20
RECENT_IN_PROMPT = 3
DEFAULT_SEED_COUNT = 4
RANDOM_SEED_LENGTH = 12


@dataclass
class HistoryEntry:
    test_id: int
    data: bytes
    covered: tuple[str, ...]
    outcome: Outcome
    iteration: int


@dataclass
class HistoryRecord:
    """Per-test coverage mapping plus global covered/uncovered loc sets."""

    entries: list[HistoryEntry] = field(default_factory=list)
    covered: list[str] = field(default_factory=list)
    uncovered: list[str] = field(default_factory=list)
    recent: deque = field(default_factory=lambda: deque(maxlen=RECENT_RING_SIZE))

    def record(
        self, test_id: int, data: bytes, trace: Trace, tree: EctTree, iteration: int
    ) -> None:
        locs = tuple(dict.fromkeys(v.site.loc() for v in trace.visits))
        self.entries.append(HistoryEntry(test_id, bytes(data), locs, trace.outcome, iteration))
        self.covered = tree.locs(taken=True)
        self.uncovered = tree.locs(taken=False)
        self.recent.append(bytes(data))


@dataclass
class SaturationState:
    """Pure function of (tree generation, clock): has coverage stalled?

    With ``iteration_window`` > 0 the wall clock is ignored and
    saturation means that many consecutive observations without a
    generation change, which keeps tests free of real sleeps.
    """

    window: float = 180.0
    iteration_window: int = 0
    last_generation: int = -1
    last_change: float = 0.0
    flat_observations: int = 0

    def observe(self, generation: int, now: float = 0.0) -> bool:
        if generation != self.last_generation:
            self.last_generation = generation
            self.last_change = now
            self.flat_observations = 0
            return False
        self.flat_observations += 1
        if self.iteration_window > 0:
            return self.flat_observations >= self.iteration_window
        return (now - self.last_change) >= self.window

    def reset(self, now: float = 0.0) -> None:
        """Called after an acquisition so one stall triggers one refill."""
        self.last_change = now
        self.flat_observations = 0


def _group_locs(locs: list[str]) -> list[tuple[str, list[str]]]:
    """Group loc strings by their file and function prefix.

    The loc grammar is file_func_line_col_type[_branch]; the trailing
    segments are peeled off from the right so underscores inside file or
    function names survive.
    """
    groups: dict[str, list[str]] = {}
    for loc in locs:
        parts = loc.split("_")
        tail = 0
        for idx in range(len(parts) - 1, -1, -1):
            if parts[idx] in ("if", "switch"):
                tail = idx
                break
        prefix = "_".join(parts[: max(tail - 2, 1)])
        groups.setdefault(prefix, []).append(loc)
    return list(groups.items())


def build_initial_seed_prompt(fmt: str, n: int = DEFAULT_SEED_COUNT) -> str:
    return (
        f"{TASK_INITIAL}\n"
        f"Input format: {fmt}\n"
        f"Produce {n} diverse, syntactically valid {fmt} test inputs of the "
        "kind that has historically triggered parser bugs: unusual nesting, "
        "boundary values, mixed constructs. Keep each input short.\n"
        "Reply with each test input in its own fenced block."
    )


def build_fresh_seed_prompt(
    history: HistoryRecord, fmt: str, n: int = DEFAULT_SEED_COUNT
) -> str:
    covered = history.covered[:LOC_BUDGET]
    uncovered = history.uncovered[:LOC_BUDGET]
    recent = list(history.recent)[-RECENT_IN_PROMPT:]
    lines = [
        TASK_FRESH,
        f"Input format: {fmt}",
        "Coverage has stalled. Branch identifiers read "
        "file_func_line_col_type[_branch]; for a switch the branch suffix "
        "is the case byte value.",
        "Covered branches (grouped by file and function):",
    ]
    for prefix, locs in _group_locs(covered):
        lines.append(f"- {prefix}:")
        lines.extend(f"    {loc}" for loc in locs)
    lines.append("Uncovered branches (grouped by file and function):")
    for prefix, locs in _group_locs(uncovered):
        lines.append(f"- {prefix}:")
        lines.extend(f"    {loc}" for loc in locs)
    lines.append("Recent inputs:")
    for data in recent:
        lines.append("```")
        lines.append(data.decode("latin-1"))
        lines.append("```")
    lines.extend(
        [
            "Step 1: compare the covered and uncovered branches, group them by "
            "source location, and identify where execution diverges.",
            "Step 2: infer which input bytes are responsible for the uncovered "
            "branches.",
            f"Step 3: produce {n} new {fmt} inputs, each in its own fenced "
            "block, either by mutating a recent input or by writing one from "
            "scratch that should reach the uncovered branches.",
        ]
    )
    return "\n".join(lines)


def random_seed(fmt: str, length: int, rng: random.Random) -> bytes:
    """Uniform printable bytes; format-agnostic fallback."""
    return bytes(rng.randrange(0x20, 0x7F) for _ in range(length))


def acquire_seeds(
    timing: str,
    history: HistoryRecord,
    fmt: str,
    transport,
    rng: random.Random,
    model: str = "mock",
    n: int = DEFAULT_SEED_COUNT,
) -> list[tuple[bytes, str]]:
    """Up to ``n`` new seed inputs tagged with their provenance.

    ``timing`` is "initial" or "fresh".  Any transport failure or an
    unparseable response falls back to random seeds so the campaign
    always continues.
    """
    if timing == "initial":
        prompt = build_initial_seed_prompt(fmt, n)
    elif timing == "fresh":
        prompt = build_fresh_seed_prompt(history, fmt, n)
    else:
        raise ValueError(f"unknown acquisition timing {timing!r}")
    provenance = f"seed:llm:{timing}"
    if transport is not None:
        try:
            response = transport.complete(
                LlmRequest(model=model, system=SEED_SYSTEM_PROMPT, user=prompt)
            )
            blocks = extract_blocks(response.text)
            seeds = [b.encode("latin-1") for b in blocks[:n]]
            if seeds:
                return [(s, provenance) for s in seeds]
        except (TransportError, UnparseableResponse):
            pass
    return [
        (random_seed(fmt, RANDOM_SEED_LENGTH, rng), "seed:random") for _ in range(n)
    ]
