"""Masking, prompts, response parsing, and the validator."""
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from symtrail import expr as ex
from symtrail.ect import EctTree
from symtrail.errors import UnparseableResponse, UnsatDrop
from symtrail.llm import (
    LlmRequest,
    SOLVE_SYSTEM_PROMPT,
    build_solve_complete_prompt,
    mask_seed,
    parse_response,
    solved_bytes,
    validate_and_refine,
)
from symtrail.mockllm import MockTransport
from symtrail.solver import evaluate_constraint, get_solution
from symtrail.targets import json_ok

from conftest import byte_cmp, mk_pc


def require_gt_0x39_at(index: int):
    expr = ex.Cmp(ex.CmpOp.SGE, ex.Const(0x39, 32), ex.ZeroExtend(ex.ByteVar(index), 32))
    return mk_pc(expr, taken=False)


def js_like_seed() -> bytes:
    return b"a" * 94 + b"r?turn 1;"


def test_mask_seed_reference_shape():
    pc = require_gt_0x39_at(95)
    masked = mask_seed(pc, js_like_seed())
    assert masked.text.endswith(b"r[k!95][xxx]")
    assert masked.constrained_positions == {"[k!95]": 95}
    assert masked.flexible_origin == 96


def test_mask_seed_first_byte_boundary():
    pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 0x7B), taken=True)
    masked = mask_seed(pc, b"abcdef")
    assert masked.text == b"[k!0][xxx]"
    assert masked.flexible_origin == 1


def test_mask_seed_multiple_positions_ascending():
    expr = ex.Cmp(ex.CmpOp.EQ, ex.Concat((ex.ByteVar(4), ex.ByteVar(1))), ex.Const(0x0102, 16))
    pc = mk_pc(expr, taken=True)
    masked = mask_seed(pc, b"abcdefgh")
    assert masked.text == b"a[k!1]cd[k!4][xxx]"
    assert masked.flexible_origin == 5


def test_prompt_contents_and_determinism():
    pc = require_gt_0x39_at(95)
    masked1, prompt1 = build_solve_complete_prompt(pc, js_like_seed(), "JavaScript")
    masked2, prompt2 = build_solve_complete_prompt(pc, js_like_seed(), "JavaScript")
    assert prompt1 == prompt2
    assert masked1.text == masked2.text
    assert "JavaScript" in prompt1
    assert pc.formula_text() in prompt1
    assert masked1.text.decode("latin-1") in prompt1
    assert "Step 1" in prompt1 and "Step 2" in prompt1
    assert "[xxx]" in prompt1


def test_parse_response_fenced_block():
    assert parse_response("```\nreturn 1;\n```") == b"return 1;"


def test_parse_response_takes_last_block_after_narration():
    text = (
        "Step 1: the constraint needs a byte above 0x39, pick 'e'.\n"
        "```\nintermediate\n```\n"
        "Step 2: complete the suffix.\n"
        "```\nreturn 1;\n```"
    )
    assert parse_response(text) == b"return 1;"


def test_parse_response_inline_fallback_and_failure():
    assert parse_response("the answer is `x=1`") == b"x=1"
    with pytest.raises(UnparseableResponse):
        parse_response("")
    with pytest.raises(UnparseableResponse):
        parse_response("no blocks at all")


def test_validator_keeps_compliant_candidate():
    pc = require_gt_0x39_at(95)
    seed = js_like_seed()
    candidate = seed[:95] + b"eturn 1;"  # 'e' satisfies byte95 > 0x39
    tree = EctTree()
    out, refined = validate_and_refine(pc, pc.site, candidate, seed, tree)
    assert out == candidate and refined is False
    assert pc.site.loc() in tree.expected_taken


def test_validator_refines_wrong_byte_to_baseline_solution():
    pc = require_gt_0x39_at(95)
    seed = js_like_seed()
    bad = seed[:95] + b"9turn 1;"  # '9' == 0x39 violates the strict bound
    assert evaluate_constraint(pc, bad) is False
    tree = EctTree()
    out, refined = validate_and_refine(pc, pc.site, bad, seed, tree)
    assert refined is True
    assert evaluate_constraint(pc, out) is True
    assert out[95] == get_solution(pc)[95]
    assert out[:95] == bad[:95] and out[96:] == bad[96:]


def test_validator_extends_short_candidate_with_seed_suffix():
    pc = require_gt_0x39_at(95)
    seed = js_like_seed()
    out, refined = validate_and_refine(pc, pc.site, b"oops", seed, EctTree())
    assert refined is True
    assert len(out) == 96
    assert out[:4] == b"oops"
    assert out[4:95] == seed[4:95]
    assert evaluate_constraint(pc, out) is True


def test_validator_accepts_flexible_sizes():
    pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 0x7B), taken=True)
    seed = b"{ }"
    long_candidate = b'{"much": ["longer", "than", "the", "seed"]}'
    out, refined = validate_and_refine(pc, pc.site, long_candidate, seed, EctTree())
    assert refined is False and out == long_candidate
    short = b"{"
    out, refined = validate_and_refine(pc, pc.site, short, seed, EctTree())
    assert refined is False and out == b"{"


def test_validator_unsat_drop():
    pc = mk_pc(ex.Cmp(ex.CmpOp.NE, ex.ByteVar(0), ex.ByteVar(0)), taken=True)
    with pytest.raises(UnsatDrop):
        validate_and_refine(pc, pc.site, b"x", b"seed", EctTree())


def test_requests_pin_temperature_zero():
    req = LlmRequest(model="m", system="s", user="u")
    assert req.temperature == 0.0


def test_solved_bytes_mapping():
    pc = require_gt_0x39_at(2)
    masked = mask_seed(pc, b"abcdef")
    assert solved_bytes(masked, b"abX") == {2: ord("X")}
    assert solved_bytes(masked, b"ab") == {}


def _ask_mock(mode: str, pc, seed: bytes, fmt: str = "JSON"):
    masked, prompt = build_solve_complete_prompt(pc, seed, fmt)
    transport = MockTransport(mode, fmt)
    response = transport.complete(
        LlmRequest(model="mock", system=SOLVE_SYSTEM_PROMPT, user=prompt)
    )
    return masked, parse_response(response.text, masked)


def test_syntax_mock_solves_and_completes_valid_json():
    seed = b'{"a":5}'
    pc = mk_pc(byte_cmp(ex.CmpOp.SLE, 5, 0x30), taken=True)  # byte5 >= '0'
    masked, candidate = _ask_mock("syntax", pc, seed)
    assert masked.text == b'{"a":[k!5][xxx]'
    assert evaluate_constraint(pc, candidate) is True
    assert json_ok(candidate) is True


def test_adversarial_mock_violates_constraint():
    seed = b'{"a":5}'
    pc = mk_pc(byte_cmp(ex.CmpOp.SLE, 5, 0x30), taken=True)
    _, candidate = _ask_mock("adversarial", pc, seed)
    assert evaluate_constraint(pc, candidate) is False


def test_echo_mock_returns_marked_block():
    seed = b'{"a":5}'
    pc = mk_pc(byte_cmp(ex.CmpOp.SLE, 5, 0x30), taken=True)
    masked, candidate = _ask_mock("echo", pc, seed)
    assert candidate == masked.text


def test_mock_determinism():
    seed = b'{"a":5}'
    pc = mk_pc(byte_cmp(ex.CmpOp.SLE, 5, 0x30), taken=True)
    _, a = _ask_mock("syntax", pc, seed)
    _, b = _ask_mock("syntax", pc, seed)
    assert a == b


@st.composite
def solvable_constraints(draw):
    op = draw(
        st.sampled_from(
            [ex.CmpOp.EQ, ex.CmpOp.NE, ex.CmpOp.SLT, ex.CmpOp.SLE, ex.CmpOp.SGT, ex.CmpOp.SGE]
        )
    )
    index = draw(st.integers(0, 5))
    const = draw(st.integers(0, 255))
    taken = draw(st.booleans())
    return mk_pc(byte_cmp(op, index, const), taken=taken)


@given(solvable_constraints(), st.binary(min_size=6, max_size=10))
@settings(max_examples=150, deadline=None)
def test_validator_sound_under_any_transport(pc, junk):
    """Whatever bytes come back, the emitted case satisfies the constraint."""
    seed = b"seedbytes!"
    try:
        baseline = get_solution(pc)
    except Exception:
        baseline = None
    try:
        out, _ = validate_and_refine(pc, pc.site, junk, seed, EctTree())
    except UnsatDrop:
        assert baseline is None
        return
    assert evaluate_constraint(pc, out) is True


def test_refinement_matches_baseline_assignments_over_stream():
    """Adversarial candidates refine to exactly the baseline solver picks."""
    seed = b'{"k": 123}'
    stream = [
        mk_pc(byte_cmp(op, i, const), taken=taken)
        for i, (op, const, taken) in enumerate(
            [
                (ex.CmpOp.EQ, 0x7B, True),
                (ex.CmpOp.SGE, 0x39, False),
                (ex.CmpOp.NE, 0x20, True),
                (ex.CmpOp.SLT, 0x41, True),
                (ex.CmpOp.SLE, 0x30, True),
                (ex.CmpOp.SGT, 0x7A, False),
            ]
        )
    ]
    refined_assignments = Counter()
    baseline_assignments = Counter()
    for pc in stream:
        masked, candidate = _ask_mock("adversarial", pc, seed)
        out, refined = validate_and_refine(pc, pc.site, candidate, seed, EctTree())
        assert refined is True
        for pos in pc.positions:
            refined_assignments[(pos, out[pos])] += 1
        for pos, val in get_solution(pc).items():
            baseline_assignments[(pos, val)] += 1
    assert refined_assignments == baseline_assignments
