"""Shared builders for tests."""
from __future__ import annotations

import random

import pytest

from symtrail import expr as ex
from symtrail.config import CampaignConfig
from symtrail.tracing import (
    BranchSite,
    BranchType,
    Outcome,
    PathConstraint,
    SiteVisit,
    Trace,
)


def if_site(line: int = 10, col: int = 5, file: str = "t.c", func: str = "f") -> BranchSite:
    return BranchSite(file, func, line, col, BranchType.IF)


def switch_site(line: int = 9, col: int = 3, file: str = "t.c", func: str = "f") -> BranchSite:
    return BranchSite(file, func, line, col, BranchType.SWITCH)


def byte_cmp(op: ex.CmpOp, index: int, value: int, const_first: bool = True) -> ex.Cmp:
    var = ex.ZeroExtend(ex.ByteVar(index), 32)
    const = ex.Const(value, 32)
    return ex.Cmp(op, const, var) if const_first else ex.Cmp(op, var, const)


def mk_pc(
    expr: ex.SymExpr,
    taken: bool = True,
    site: BranchSite | None = None,
    br_id: int = 0,
    cs: int = 1,
    order: int = 0,
    context: tuple[str, ...] = ("f",),
) -> PathConstraint:
    site = (site or if_site()).arm(br_id)
    return PathConstraint.make(site, expr, taken, cs, order, context)


def mk_trace(
    visits: list[tuple[BranchSite, int, tuple[str, ...]]],
    constraints: list[PathConstraint] = (),
    input_bytes: bytes = b"",
    outcome: Outcome = Outcome.REJECT,
    switch_cases: dict[str, tuple[int, ...]] | None = None,
) -> Trace:
    return Trace(
        input=input_bytes,
        constraints=list(constraints),
        visits=[SiteVisit(s, cs, ctx) for s, cs, ctx in visits],
        outcome=outcome,
        switch_cases=dict(switch_cases or {}),
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


@pytest.fixture
def campaign_factory(tmp_path):
    """Builds ready-to-run campaign configs under a temp tree."""

    counter = {"n": 0}

    def make(
        seed_docs: list[bytes],
        target: str = "json_subset",
        fmt: str = "JSON",
        **overrides,
    ) -> CampaignConfig:
        counter["n"] += 1
        root = tmp_path / f"camp{counter['n']}"
        (root / "in").mkdir(parents=True)
        for i, doc in enumerate(seed_docs):
            (root / "in" / f"seed{i}.bin").write_bytes(doc)
        cfg = CampaignConfig(
            format=fmt,
            target=target,
            input_dir=str(root / "in"),
            output_dir=str(root / "out"),
            failed_dir=str(root / "failed"),
            iterations=60,
            iteration_window=8,
            solver_mode="baseline",
            select_mode="ect",
            mock="syntax",
            seed_acquisition=True,
            prng_seed=7,
        )
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg

    return make
