"""Two-phase constraint selection and the node-weight formula."""
import itertools
import re

from hypothesis import given, settings, strategies as st

from symtrail import expr as ex
from symtrail.ect import EctTree
from symtrail.selector import SelectorParams, norm_key, phase1_dedup, phase2_select, score
from symtrail.targets import expr_lang
from symtrail.tracing import run_concolic

from conftest import byte_cmp, if_site, mk_pc, mk_trace, switch_site


def classification_pcs(count=96, site=None, ctx=("scan",)):
    """The per-byte classification workload: one constraint per input
    position, identical up to the symbolic index."""
    site = site or if_site(file="lex.c", func="is_ident_char", line=3, col=12)
    return [
        mk_pc(byte_cmp(ex.CmpOp.SGE, i, 0x39), site=site, br_id=0, order=i, context=ctx)
        for i in range(count)
    ]


def as_trace(pcs):
    visits = [(pc.site, pc.call_stack_size, pc.context) for pc in pcs]
    return mk_trace(visits, constraints=pcs)


def test_phase1_keeps_one_of_ninety_six():
    pcs = classification_pcs(96)
    kept = phase1_dedup(as_trace(pcs))
    assert len(kept) == 1
    assert kept[0] is pcs[0]


def test_phase1_keeps_distinct_sites():
    a = classification_pcs(1)[0]
    b = classification_pcs(1, site=if_site(line=99))[0]
    kept = phase1_dedup(as_trace([a, b]))
    assert kept == [a, b]


def test_phase1_keeps_distinct_constants():
    # Normalization replaces only variable indices, never constants.
    site = if_site()
    a = mk_pc(byte_cmp(ex.CmpOp.SGE, 0, 0x39), site=site, order=0)
    b = mk_pc(byte_cmp(ex.CmpOp.SGE, 1, 0x41), site=site, order=1)
    oracle_a = re.sub(r"k!\d+", "k!*", ex.to_text(a.expr))
    oracle_b = re.sub(r"k!\d+", "k!*", ex.to_text(b.expr))
    assert oracle_a != oracle_b
    assert len(phase1_dedup(as_trace([a, b]))) == 2


def test_phase1_keeps_distinct_contexts():
    site = if_site()
    a = mk_pc(byte_cmp(ex.CmpOp.SGE, 0, 0x39), site=site, order=0, context=("f",))
    b = mk_pc(byte_cmp(ex.CmpOp.SGE, 1, 0x39), site=site, order=1, context=("g",))
    assert len(phase1_dedup(as_trace([a, b]))) == 2


def test_phase1_preserves_norm_key_set():
    pcs = classification_pcs(20) + classification_pcs(5, site=if_site(line=77))
    trace = as_trace(pcs)
    before = {norm_key(pc) for pc in trace.constraints}
    after = {norm_key(pc) for pc in phase1_dedup(trace)}
    assert before == after


def test_phase1_order_preserved():
    site_a, site_b = if_site(line=1), if_site(line=2)
    pcs = [
        mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 1), site=site_a, order=0),
        mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 2), site=site_b, order=1),
        mk_pc(byte_cmp(ex.CmpOp.EQ, 1, 1), site=site_a, order=2),
    ]
    kept = phase1_dedup(as_trace(pcs))
    assert [pc.order for pc in kept] == [0, 1]


def depth10_tree_and_pc():
    """An if arm at tree depth 10 with vc=1 and its sibling untaken."""
    ctx = tuple(f"fn{i}" for i in range(8))
    site = if_site()
    pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 0x7B), site=site, br_id=0, cs=8, context=ctx)
    tree = EctTree()
    tree.record_trace(mk_trace([(site.arm(0), 8, ctx)]))
    assert tree.resolve(pc.site, ctx).depth == 10
    return tree, pc


def test_score_golden_twelve():
    tree, pc = depth10_tree_and_pc()
    params = SelectorParams(alpha=1.0, beta=3.0, gamma=0.8)
    assert score(tree, pc, params) == 12.0


def test_score_zero_case():
    site = if_site()
    tree = EctTree()
    # both arms taken, vc forced to zero afterwards to isolate the formula
    tree.record_trace(mk_trace([(site.arm(0), 0, ()), (site.arm(1), 0, ())]))
    node = tree.resolve(site.arm(0), ())
    node.vc = 0
    pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 1), site=site, br_id=0, context=())
    node.depth = 0
    assert score(tree, pc, SelectorParams()) == 0.0


def test_score_monotone_in_depth():
    params = SelectorParams()
    site = if_site()
    scores = []
    for chain_len in (1, 3, 6):
        ctx = tuple(f"c{i}" for i in range(chain_len))
        tree = EctTree()
        tree.record_trace(mk_trace([(site.arm(0), chain_len, ctx)]))
        pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 1), site=site, br_id=0, context=ctx)
        scores.append(score(tree, pc, params))
    assert scores == sorted(scores) and len(set(scores)) == 3


def test_score_visit_term_modes():
    tree, pc = depth10_tree_and_pc()
    node = tree.resolve(pc.site, pc.context)
    node.vc = 3
    literal = score(tree, pc, SelectorParams(beta=3.0))
    inverse = score(tree, pc, SelectorParams(beta=3.0, visit_term="inverse"))
    assert literal == 1.0 + 9.0 + 8.0
    assert inverse == 1.0 + 3.0 / 4.0 + 8.0


def test_score_depth_source_stack():
    tree, pc = depth10_tree_and_pc()
    node = tree.resolve(pc.site, pc.context)
    node.cs = 4
    got = score(tree, pc, SelectorParams(depth_source="stack"))
    assert got == 1.0 + 3.0 + 0.8 * 4


def test_phase2_drops_taken_and_dispatched():
    tree = EctTree()
    site = if_site()
    ctx = ("f",)
    tree.record_trace(mk_trace([(site.arm(0), 1, ctx), (site.arm(1), 1, ctx)]))
    pc = mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 0x7B), site=site, br_id=0, context=ctx)
    params = SelectorParams()
    dispatched = {norm_key(pc): 1}
    assert phase2_select(tree, [pc], params, dispatched) == []
    # not yet dispatched: kept even though the direction is covered
    assert len(phase2_select(tree, [pc], params, {})) == 1


def test_phase2_keeps_fresh_untaken_regardless_of_dispatch():
    tree = EctTree()
    site = switch_site()
    ctx = ("f",)
    tree.record_trace(
        mk_trace([(site.arm(40), 1, ctx)], switch_cases={site.head().loc(): (40, 41, 44)})
    )
    pc = mk_pc(
        ex.Cmp(ex.CmpOp.EQ, ex.widen32(ex.ByteVar(0)), ex.Const(40, 32)),
        site=site,
        br_id=40,
        context=ctx,
    )
    dispatched = {norm_key(pc): 1}
    kept = phase2_select(tree, [pc], SelectorParams(), dispatched)
    assert len(kept) == 1


def test_phase2_top_k_and_weight_order():
    tree = EctTree()
    ctx = ("f",)
    pcs = []
    for i in range(40):
        site = if_site(line=i + 1)
        tree.record_trace(mk_trace([(site.arm(0), 1, ctx)]))
        pcs.append(
            mk_pc(byte_cmp(ex.CmpOp.EQ, i % 4, 0x30 + i), site=site, br_id=0, order=i, context=ctx)
        )
    # bump visit counts unevenly so weights differ
    for i, pc in enumerate(pcs):
        tree.resolve(pc.site, ctx).vc = i % 7
    out = phase2_select(tree, pcs, SelectorParams(top_k=16), {})
    assert len(out) == 16
    weights = [c.weight for c in out]
    assert weights == sorted(weights, reverse=True)


def test_phase2_selection_set_invariant_under_permutation():
    tree = EctTree()
    ctx = ("f",)
    pcs = []
    for i in range(24):
        site = if_site(line=i + 1)
        tree.record_trace(mk_trace([(site.arm(0), 1, ctx)]))
        pcs.append(
            mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 0x30 + i), site=site, br_id=0, order=i, context=ctx)
        )
    params = SelectorParams(top_k=10)
    baseline = {c.norm_key for c in phase2_select(tree, pcs, params, {})}
    for perm in itertools.islice(itertools.permutations(pcs), 0, 40, 7):
        got = {c.norm_key for c in phase2_select(tree, list(perm), params, {})}
        assert got == baseline


def test_phase2_argmax_sanity_alpha_only():
    tree = EctTree()
    ctx = ("f",)
    covered_site, fresh_site = if_site(line=1), if_site(line=2)
    tree.record_trace(
        mk_trace([(covered_site.arm(0), 1, ctx), (covered_site.arm(1), 1, ctx)])
    )
    tree.record_trace(mk_trace([(fresh_site.arm(0), 1, ctx)]))
    pcs = [
        mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 1), site=covered_site, br_id=0, order=0, context=ctx),
        mk_pc(byte_cmp(ex.CmpOp.EQ, 0, 2), site=fresh_site, br_id=0, order=1, context=ctx),
    ]
    out = phase2_select(tree, pcs, SelectorParams(alpha=1.0, beta=0.0, gamma=0.0), {})
    assert all(tree.untaken_direction(c.pc) for c in out if c.weight > 0)
    assert out[0].pc.site == fresh_site.arm(0)


def test_classification_loop_dedup_on_real_target():
    data = b"1" * 96
    trace = run_concolic(expr_lang, data)
    scan_lo = "expr.c_scan_classes_7_13_if_0"
    raw = [pc for pc in trace.constraints if pc.site.loc() == scan_lo]
    assert len(raw) == 96
    kept = [pc for pc in phase1_dedup(trace) if pc.site.loc() == scan_lo]
    assert len(kept) == 1


@given(st.binary(min_size=1, max_size=32))
@settings(max_examples=50)
def test_phase1_safety_property_on_real_traces(data):
    trace = run_concolic(expr_lang, data)
    before = {norm_key(pc) for pc in trace.constraints}
    after = {norm_key(pc) for pc in phase1_dedup(trace)}
    assert before == after
