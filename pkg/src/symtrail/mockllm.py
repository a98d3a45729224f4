"""Deterministic model stand-ins for offline runs and tests.

Three behaviors behind the same transport interface:

* ``syntax``: solves constraint masks with a byte that both satisfies
  the parsed constraint and is plausible for the input format, then
  completes the flexible mask using small grammar-repair searches
  checked against the bundled plain recognizers.  Seed prompts get
  valid documents from a per-format bank, preferring documents that
  contain byte values named by uncovered switch cases, plus a mutation
  of a recent input.
* ``adversarial``: fills constraint masks with a value that violates
  the constraint and drops the flexible region, exercising the
  validator's refinement path.
* ``echo``: returns the user prompt verbatim, so the extracted
  candidate is the last fenced block of the prompt itself.

Everything is a pure function of the request, so campaigns using a mock
are bit-reproducible.
"""
from __future__ import annotations

import re
from itertools import product

from . import expr as ex
from .errors import ParseError
from .llm import TASK_FRESH, TASK_INITIAL, TASK_SOLVE, LlmRequest, LlmResponse, extract_blocks
from .targets import FORMAT_ORACLES

_MASK_RE = re.compile(r"\[k!(\d+)\]")
_CASE_SUFFIX_RE = re.compile(r"_(\d+)$")
_FORMAT_RE = re.compile(r"^Input format: (\S+)$", re.MULTILINE)

_PREFERRED = {
    "JSON": b'{["0123456789-tfn}]:, aeruls',
    "EXPR": b"0123456789()+*,",
    "INI": b"[]=\nkabcxyz0123456789;# ",
}

_REPAIR_PIECES = {
    "JSON": [
        b"}",
        b"]",
        b'"',
        b"0",
        b'"}',
        b'"]',
        b"0}",
        b"0]",
        b":0}",
        b'":0}',
        b"rue",
        b"alse",
        b"ull",
        b'"a"',
        b"{}",
        b"[]",
        b"1",
    ],
    "EXPR": [b"1", b")", b"1)", b"+1", b"*1", b"1)*2", b"))", b"1))"],
    "INI": [b"", b"\n", b"]", b"]\n", b"=1", b"=1\n", b"k=1\n", b"[s]\n", b"s]\n"],
}

_SEED_BANKS = {
    "JSON": [
        b"{}",
        b"[]",
        b'{"a": 1}',
        b"[1, 2, 3]",
        b'{"k": [true, false, null]}',
        b'"text"',
        b'{"s": "x", "n": -12}',
        b'[{"a": []}, 34]',
        b'{"outer": {"inner": [1, {"deep": "v"}]}}',
        b"[[0], [1, [2]]]",
        b"true",
        b"-7",
        b'{"mix": [1, "two", {"three": 3}, [4]]}',
        b'[""]',
        b'{"esc": "a\\"b"}',
        b"null",
    ],
    "EXPR": [
        b"1",
        b"1+2",
        b"(1+2)*3",
        b"2*3*4",
        b"(1)",
        b"((2))",
        b"1,2",
        b"(1+2),(3*4)",
        b"12+345",
        b"1*(2+(3*4))",
        b"(((1+1)))",
        b"7,8,9",
    ],
    "INI": [
        b"",
        b"[s]\nk=v",
        b"[a]\nx=1\ny=2",
        b"; note\n[b]\nk=v",
        b"k=v",
        b"[sec]",
        b"# c",
        b"[m]\nkey=va lue",
        b"[x]\na=1\n\n[y]\nb=2",
    ],
}

_ADVERSARIAL_SEEDS = [b"%%%", b"((", b"=nope", b"\x01\x02\x03", b">>>"]


def _ordered_bytes(preferred: bytes) -> list[int]:
    order = list(dict.fromkeys(preferred))
    order.extend(v for v in range(256) if v not in set(order))
    return order


def _holds(formula: ex.SymExpr, assignment: dict[int, int]) -> bool:
    buffer = bytearray(max(assignment) + 1 if assignment else 0)
    for pos, val in assignment.items():
        buffer[pos] = val
    try:
        return bool(ex.eval_expr(formula, bytes(buffer)))
    except Exception:
        return False


_assignment_cache: dict[tuple, dict[int, int] | None] = {}


def _pick_assignment(
    formula: ex.SymExpr, spots: list[int], order: list[int], want: bool
) -> dict[int, int] | None:
    # Pure search over a deterministic order; memoized so repeated
    # prompts for the same constraint shape answer instantly.
    key = (formula, tuple(spots), tuple(order[:8]), len(order), want)
    if key in _assignment_cache:
        hit = _assignment_cache[key]
        return dict(hit) if hit is not None else None
    found = None
    for combo in product(order, repeat=len(spots)):
        assignment = dict(zip(spots, combo))
        if _holds(formula, assignment) == want:
            found = assignment
            break
    _assignment_cache[key] = dict(found) if found is not None else None
    return found


def _complete(prefix: bytes, fmt: str, max_depth: int = 3) -> bytes | None:
    """Smallest piece sequence that repairs ``prefix`` into a valid input."""
    oracle = FORMAT_ORACLES.get(fmt)
    if oracle is None:
        return None
    if oracle(prefix):
        return b""
    pieces = _REPAIR_PIECES.get(fmt, [])
    frontier = [b""]
    for _ in range(max_depth):
        nxt = []
        for stem in frontier:
            for piece in pieces:
                suffix = stem + piece
                if oracle(prefix + suffix):
                    return suffix
                nxt.append(suffix)
        frontier = nxt
    return None


class MockTransport:
    """Offline stand-in for the chat-completion endpoint."""

    def __init__(self, mode: str = "syntax", fmt: str = "JSON"):
        if mode not in ("syntax", "adversarial", "echo"):
            raise ValueError(f"unknown mock mode {mode!r}")
        self.mode = mode
        self.fmt = fmt

    def complete(self, request: LlmRequest) -> LlmResponse:
        prompt = request.user
        if self.mode == "echo":
            return LlmResponse(text=prompt)
        fmt = self._format_of(prompt)
        if prompt.startswith(TASK_SOLVE):
            return self._solve(prompt, fmt)
        if prompt.startswith(TASK_INITIAL):
            return self._seeds(fmt, uncovered_bytes=[], recents=[], n=self._count(prompt))
        if prompt.startswith(TASK_FRESH):
            return self._seeds(
                fmt,
                uncovered_bytes=self._uncovered_bytes(prompt),
                recents=[b.encode("latin-1") for b in extract_blocks(prompt)],
                n=self._count(prompt),
            )
        return LlmResponse(text=prompt)

    def _format_of(self, prompt: str) -> str:
        m = _FORMAT_RE.search(prompt)
        return m.group(1) if m else self.fmt

    @staticmethod
    def _count(prompt: str) -> int:
        m = re.search(r"[Pp]roduce (\d+)", prompt)
        return int(m.group(1)) if m else 4

    @staticmethod
    def _uncovered_bytes(prompt: str) -> list[int]:
        lines = prompt.splitlines()
        values: list[int] = []
        inside = False
        for line in lines:
            if line.startswith("Uncovered branches"):
                inside = True
                continue
            if inside and not (line.startswith("    ") or line.startswith("- ")):
                break
            if inside and line.startswith("    "):
                m = _CASE_SUFFIX_RE.search(line.strip())
                if m:
                    value = int(m.group(1))
                    if 0 <= value <= 255:
                        values.append(value)
        return values

    # -- solve-complete -------------------------------------------------

    def _solve(self, prompt: str, fmt: str) -> LlmResponse:
        blocks = extract_blocks(prompt)
        if len(blocks) < 2:
            return LlmResponse(text=prompt)
        constraint_text, marked = blocks[0].strip(), blocks[1]
        try:
            formula = ex.from_text(constraint_text)
        except ParseError:
            return LlmResponse(text=f"Cannot read the constraint.\n```\n{marked}\n```")
        spots = sorted(int(m) for m in _MASK_RE.findall(marked))
        if self.mode == "adversarial":
            assignment = _pick_assignment(formula, spots, list(range(256)), want=False)
            if assignment is None:
                assignment = _pick_assignment(formula, spots, list(range(256)), want=True)
            return self._render_solution(marked, assignment or {}, completion=b"")
        order = _ordered_bytes(_PREFERRED.get(fmt, b""))
        assignment = _pick_assignment(formula, spots, order, want=True)
        if assignment is None:
            # Unsatisfiable: answer with the masks stripped so the
            # validator sees a failing candidate.
            return self._render_solution(marked, {}, completion=b"")
        prefix = self._substitute(marked, assignment)
        completion = _complete(prefix, fmt)
        return self._render_solution(marked, assignment, completion or b"")

    @staticmethod
    def _substitute(marked: str, assignment: dict[int, int]) -> bytes:
        def repl(m: re.Match) -> str:
            value = assignment.get(int(m.group(1)))
            return chr(value) if value is not None else ""

        return _MASK_RE.sub(repl, marked).replace("[xxx]", "").encode("latin-1")

    def _render_solution(
        self, marked: str, assignment: dict[int, int], completion: bytes
    ) -> LlmResponse:
        final = self._substitute(marked, assignment) + completion
        steps = ", ".join(
            f"k!{pos} -> {value:#04x}" for pos, value in sorted(assignment.items())
        )
        text = (
            f"Step 1: solved {steps or 'nothing'}.\n"
            f"Step 2: completed the flexible mask with {completion.decode('latin-1')!r}.\n"
            "```\n"
            f"{final.decode('latin-1')}\n"
            "```"
        )
        return LlmResponse(text=text, candidate=final, solved=dict(assignment))

    # -- seed generation -------------------------------------------------

    def _seeds(
        self, fmt: str, uncovered_bytes: list[int], recents: list[bytes], n: int
    ) -> LlmResponse:
        if self.mode == "adversarial":
            docs = _ADVERSARIAL_SEEDS[:n]
        else:
            docs = self._choose_docs(fmt, uncovered_bytes, recents, n)
        body = "\n".join(f"```\n{d.decode('latin-1')}\n```" for d in docs)
        return LlmResponse(text=f"Here are {len(docs)} inputs.\n{body}")

    def _choose_docs(
        self, fmt: str, uncovered_bytes: list[int], recents: list[bytes], n: int
    ) -> list[bytes]:
        bank = _SEED_BANKS.get(fmt, [b""])
        wanted = set(uncovered_bytes)
        ranked = sorted(
            range(len(bank)),
            key=lambda idx: (-sum(1 for v in wanted if v in bank[idx]), idx),
        )
        docs = [bank[idx] for idx in ranked[:n]]
        mutation = self._mutate(fmt, recents, wanted)
        if mutation is not None:
            docs = [mutation] + docs[: max(n - 1, 0)]
        return docs[:n]

    @staticmethod
    def _mutate(fmt: str, recents: list[bytes], wanted: set[int]) -> bytes | None:
        oracle = FORMAT_ORACLES.get(fmt)
        if oracle is None or not recents:
            return None
        base = recents[0]
        if not oracle(base):
            return None
        bank = _SEED_BANKS.get(fmt, [])
        extra = next((d for d in bank if any(v in d for v in wanted)), bank[0] if bank else b"")
        if fmt == "JSON":
            mutant = b"[" + base + b", " + extra + b"]"
        elif fmt == "EXPR":
            mutant = b"(" + base + b")+" + extra
        else:
            mutant = base + b"\n" + extra
        return mutant if oracle(mutant) else None
