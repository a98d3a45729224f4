"""Campaign orchestration: the concolic loop, corpus, and metrics.

One iteration executes one test case: run it concolically, fold the
trace into the coverage tree and history, select path constraints worth
negating, solve each one per the configured solver mode, and queue the
results.  Children of a run that found new coverage are scheduled ahead
of everything else; within a class the queue is FIFO.  When coverage
saturates and acquisition is enabled, fresh seeds are requested from the
model.

Every artifact written under the output directory is a pure function of
the config, the PRNG seed, and the transport, so two identical runs
produce byte-identical files.
"""
from __future__ import annotations

import json
import random
import shutil
import time
from dataclasses import dataclass
from pathlib import Path

from .config import CampaignConfig
from .ect import EctTree, to_json
from .errors import (
    ConfigError,
    TooManyVarsError,
    TransportError,
    UnparseableResponse,
    UnsatDrop,
    UnsatError,
)
from .llm import (
    SOLVE_SYSTEM_PROMPT,
    LlmRequest,
    build_solve_complete_prompt,
    parse_response,
    validate_and_refine,
)
from .mockllm import MockTransport
from .seeds import HistoryRecord, SaturationState, acquire_seeds
from .selector import Candidate, norm_key, phase1_dedup, phase2_select
from .solver import evaluate_constraint, solve_fixed
from .tracing import Outcome, run_concolic
from .transport import HttpTransport, resolve_api_key
from . import targets as targets_mod


@dataclass
class TestCase:
    """One corpus entry with its provenance chain."""

    __test__ = False  # not a pytest class, despite the name

    id: int
    data: bytes
    provenance: str
    parent: int | None = None
    iteration: int = 0
    outcome: Outcome | None = None
    crash_reason: str = ""
    constraint_text: str = ""
    site_loc: str = ""

    def file_name(self) -> str:
        return f"{self.id:06d}_{self.provenance.replace(':', '-')}.bin"


@dataclass
class Metrics:
    """Campaign counters; all monotone while the loop runs."""

    iterations: int = 0
    executed: int = 0
    generated: int = 0
    accepted_generated: int = 0
    accepted_seed_generated: int = 0
    constraints_collected: int = 0
    constraints_deduped: int = 0
    constraints_selected: int = 0
    solved: int = 0
    refined: int = 0
    llm_calls: int = 0
    llm_solve_attempts: int = 0
    llm_direct_success: int = 0
    acquisitions: int = 0
    crashes: int = 0
    taken_nodes: int = 0
    total_nodes: int = 0

    @property
    def pass_rate(self) -> float:
        return self.accepted_generated / self.generated if self.generated else 0.0

    @property
    def llm_direct_rate(self) -> float:
        if not self.llm_solve_attempts:
            return 0.0
        return self.llm_direct_success / self.llm_solve_attempts

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "executed": self.executed,
            "generated": self.generated,
            "accepted_generated": self.accepted_generated,
            "accepted_seed_generated": self.accepted_seed_generated,
            "pass_rate": self.pass_rate,
            "constraints_collected": self.constraints_collected,
            "constraints_deduped": self.constraints_deduped,
            "constraints_selected": self.constraints_selected,
            "solved": self.solved,
            "refined": self.refined,
            "llm_calls": self.llm_calls,
            "llm_solve_attempts": self.llm_solve_attempts,
            "llm_direct_success": self.llm_direct_success,
            "llm_direct_rate": self.llm_direct_rate,
            "acquisitions": self.acquisitions,
            "crashes": self.crashes,
            "taken_nodes": self.taken_nodes,
            "total_nodes": self.total_nodes,
        }


class _Queue:
    """Two FIFO classes: children of coverage-increasing runs go first."""

    def __init__(self):
        self.high: list[TestCase] = []
        self.low: list[TestCase] = []

    def push(self, tc: TestCase, priority: bool) -> None:
        (self.high if priority else self.low).append(tc)

    def pop(self) -> TestCase | None:
        if self.high:
            return self.high.pop(0)
        if self.low:
            return self.low.pop(0)
        return None

    def __len__(self) -> int:
        return len(self.high) + len(self.low)


def build_transport(cfg: CampaignConfig):
    """Mock transport unless mock is off; then HTTP when a key exists."""
    if cfg.mock != "off":
        return MockTransport(cfg.mock, cfg.format)
    key = resolve_api_key(cfg.api_key)
    if not key and not cfg.llm_base_url:
        return None
    return HttpTransport(
        base_url=cfg.llm_base_url, api_key=cfg.api_key, timeout=cfg.llm_timeout
    )


class Campaign:
    def __init__(self, cfg: CampaignConfig, clock=time.monotonic):
        cfg.validate()
        try:
            self.target = targets_mod.get_target(cfg.target)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        self.cfg = cfg
        self.clock = clock
        self.tree = EctTree()
        self.history = HistoryRecord()
        self.saturation = SaturationState(
            window=cfg.saturation_window, iteration_window=cfg.iteration_window
        )
        self.rng = random.Random(cfg.prng_seed)
        self.transport = build_transport(cfg)
        self.queue = _Queue()
        self.metrics = Metrics()
        self.dispatched: dict[tuple[str, str], int] = {}
        self.executed: list[TestCase] = []
        self._next_id = 0
        self._cycle_pos = 0
        self._handles: dict[str, object] = {}
        self.out = Path(cfg.output_dir)
        self.failed = Path(cfg.failed_dir)

    # -- plumbing -----------------------------------------------------------

    def _new_case(self, data: bytes, provenance: str, **kw) -> TestCase:
        tc = TestCase(id=self._next_id, data=bytes(data), provenance=provenance, **kw)
        self._next_id += 1
        return tc

    def _log(self, name: str, row: dict) -> None:
        fh = self._handles.get(name)
        if fh is None:
            fh = (self.out / name).open("a", encoding="utf-8")
            self._handles[name] = fh
        fh.write(json.dumps(row, sort_keys=True) + "\n")

    def _close_logs(self) -> None:
        for fh in self._handles.values():
            fh.close()
        self._handles.clear()

    def _write_corpus(self, tc: TestCase) -> Path:
        path = self.out / tc.file_name()
        path.write_bytes(tc.data)
        self._log(
            "corpus_index.jsonl",
            {
                "id": tc.id,
                "file": tc.file_name(),
                "provenance": tc.provenance,
                "parent": tc.parent,
                "iteration": tc.iteration,
                "outcome": tc.outcome.value if tc.outcome else None,
                "crash_reason": tc.crash_reason,
                "constraint": tc.constraint_text,
                "site": tc.site_loc,
                "length": len(tc.data),
            },
        )
        return path

    # -- seeds ------------------------------------------------------------------

    def _load_user_seeds(self) -> list[TestCase]:
        in_dir = Path(self.cfg.input_dir)
        if not in_dir.is_dir():
            return []
        cases = []
        for path in sorted(in_dir.iterdir()):
            if path.is_file():
                cases.append(self._new_case(path.read_bytes(), "seed:user"))
        return cases

    def _acquire(self, timing: str, iteration: int) -> None:
        pairs = acquire_seeds(
            timing,
            self.history,
            self.cfg.format,
            self.transport,
            self.rng,
            model=self.cfg.llm_model,
            n=self.cfg.seeds_per_acquisition,
        )
        for data, provenance in pairs:
            tc = self._new_case(data, provenance, iteration=iteration)
            self.queue.push(tc, priority=True)
        self.metrics.acquisitions += 1
        self._log(
            "llm.log",
            {
                "iteration": iteration,
                "kind": f"seed:{timing}",
                "count": len(pairs),
                "provenance": pairs[0][1] if pairs else "",
            },
        )
        self.saturation.reset(self.clock() if self.cfg.iteration_window == 0 else 0.0)

    # -- solving ------------------------------------------------------------------

    def _solve_baseline(self, cand: Candidate, parent: TestCase, it: int) -> TestCase | None:
        neg = cand.pc.negated()
        try:
            data = solve_fixed(neg, parent.data, self.cfg.max_solve_vars)
        except (UnsatError, TooManyVarsError) as exc:
            self._log(
                "llm.log",
                {"iteration": it, "kind": "skip", "loc": cand.pc.site.loc(), "reason": str(exc)},
            )
            return None
        return self._new_case(
            data,
            "solved:baseline",
            parent=parent.id,
            iteration=it,
            constraint_text=neg.formula_text(),
            site_loc=cand.pc.site.loc(),
        )

    def _solve_llm(self, cand: Candidate, parent: TestCase, it: int) -> TestCase | None:
        neg = cand.pc.negated()
        masked, prompt = build_solve_complete_prompt(neg, parent.data, self.cfg.format)
        request = LlmRequest(model=self.cfg.llm_model, system=SOLVE_SYSTEM_PROMPT, user=prompt)
        try:
            response = self.transport.complete(request)
        except TransportError as exc:
            self._log(
                "llm.log",
                {
                    "iteration": it,
                    "kind": "transport-error",
                    "loc": cand.pc.site.loc(),
                    "error": str(exc),
                },
            )
            return self._solve_baseline(cand, parent, it)
        self.metrics.llm_calls += 1
        validated = self.cfg.solver_mode == "llm+validator"
        try:
            candidate = parse_response(response.text, masked)
        except UnparseableResponse:
            if not validated:
                return self._solve_baseline(cand, parent, it)
            candidate = b""
        self.metrics.llm_solve_attempts += 1
        direct = evaluate_constraint(neg, candidate)
        if direct:
            self.metrics.llm_direct_success += 1
        refined = False
        if validated:
            try:
                final, refined = validate_and_refine(
                    neg, cand.pc.site, candidate, parent.data, self.tree
                )
            except UnsatDrop as exc:
                self._log(
                    "llm.log",
                    {
                        "iteration": it,
                        "kind": "unsat-drop",
                        "loc": cand.pc.site.loc(),
                        "reason": str(exc),
                    },
                )
                return None
        else:
            final = candidate
        if refined:
            self.metrics.refined += 1
        self._log(
            "llm.log",
            {
                "iteration": it,
                "kind": "solve",
                "loc": cand.pc.site.loc(),
                "constraint": neg.formula_text(),
                "prompt": prompt,
                "response": response.text,
                "candidate": final.decode("latin-1"),
                "direct": direct,
                "refined": refined,
            },
        )
        provenance = "solved:refined" if refined else "solved:llm"
        return self._new_case(
            final,
            provenance,
            parent=parent.id,
            iteration=it,
            constraint_text=neg.formula_text(),
            site_loc=cand.pc.site.loc(),
        )

    def _dispatch(self, cand: Candidate, parent: TestCase, it: int) -> TestCase | None:
        if self.cfg.solver_mode == "baseline" or self.transport is None:
            return self._solve_baseline(cand, parent, it)
        return self._solve_llm(cand, parent, it)

    # -- the loop ---------------------------------------------------------------

    def run(self) -> Metrics:
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)
        self.failed.mkdir(parents=True, exist_ok=True)
        for name in ("selection.log", "llm.log", "metrics.jsonl", "corpus_index.jsonl"):
            (self.out / name).write_text("")

        seeds = self._load_user_seeds()
        if not seeds and not cfg.seed_acquisition:
            raise ConfigError("no seed inputs and seed acquisition is disabled")
        for tc in seeds:
            self.queue.push(tc, priority=True)
        if not seeds:
            self._acquire("initial", iteration=0)

        started = self.clock()
        last_poll = started
        it = 0
        while True:
            if cfg.iterations and it >= cfg.iterations:
                break
            if cfg.timeout and self.clock() - started >= cfg.timeout:
                break
            tc = self.queue.pop()
            rerun = False
            if tc is None:
                # Drained queue: cycle the corpus and let the saturation
                # window pace any fresh acquisition.
                if not self.executed:
                    break
                tc = self.executed[self._cycle_pos % len(self.executed)]
                self._cycle_pos += 1
                rerun = True
            it += 1
            self.metrics.iterations = it
            self._step(tc, it, rerun)
            if cfg.iteration_window > 0:
                saturated = self.saturation.observe(self.tree.generation)
            else:
                now = self.clock()
                saturated = False
                if now - last_poll >= cfg.cov_timeout:
                    last_poll = now
                    saturated = self.saturation.observe(self.tree.generation, now)
            if saturated and cfg.seed_acquisition:
                self._acquire("fresh", iteration=it)

        stats = self.tree.stats()
        self.metrics.taken_nodes = stats.taken_nodes
        self.metrics.total_nodes = stats.total_nodes
        self._close_logs()
        return self.metrics

    def _step(self, tc: TestCase, it: int, rerun: bool) -> None:
        cfg = self.cfg
        trace = run_concolic(self.target, tc.data)
        first_run = tc.outcome is None
        tc.outcome = trace.outcome
        tc.crash_reason = trace.crash_reason
        self.metrics.executed += 1
        if first_run and not rerun:
            if tc.iteration == 0:
                tc.iteration = it
            path = self._write_corpus(tc)
            if trace.outcome is Outcome.CRASH:
                self.metrics.crashes += 1
                shutil.copy2(path, self.failed / tc.file_name())
            if tc.provenance != "seed:user":
                self.metrics.generated += 1
                if trace.outcome is Outcome.ACCEPT:
                    self.metrics.accepted_generated += 1
                    if tc.provenance.startswith("seed:"):
                        self.metrics.accepted_seed_generated += 1
            self.executed.append(tc)

        summary = self.tree.record_trace(trace)
        self.history.record(tc.id, tc.data, trace, self.tree, it)
        (self.out / "ect.json").write_text(to_json(self.tree))

        self.metrics.constraints_collected += len(trace.constraints)
        deduped = phase1_dedup(trace)
        self.metrics.constraints_deduped += len(deduped)

        if cfg.select_mode == "ect":
            selected = phase2_select(self.tree, deduped, cfg.selector, self.dispatched)
        else:
            selected = [Candidate(pc=pc, weight=0.0, norm_key=norm_key(pc)) for pc in deduped]
        selected_keys = {c.norm_key for c in selected}
        for pc in deduped:
            key = norm_key(pc)
            self._log(
                "selection.log",
                {
                    "iteration": it,
                    "loc": pc.site.loc(),
                    "context": "/".join(key[0]),
                    "norm": key[2],
                    "weight": next((c.weight for c in selected if c.norm_key == key), None),
                    "decision": "selected" if key in selected_keys else "dropped",
                },
            )

        self.metrics.constraints_selected += len(selected)
        priority = summary.new_taken > 0
        for cand in selected:
            if cfg.select_mode == "ect":
                self.dispatched[cand.norm_key] = it
            child = self._dispatch(cand, tc, it)
            if child is not None:
                self.metrics.solved += 1
                self.queue.push(child, priority)

        stats = self.tree.stats()
        self._log(
            "metrics.jsonl",
            {
                "iteration": it,
                "test_id": tc.id,
                "provenance": tc.provenance,
                "outcome": trace.outcome.value,
                "new_taken": summary.new_taken,
                "taken_nodes": stats.taken_nodes,
                "total_nodes": stats.total_nodes,
                "generation": self.tree.generation,
                "executed": self.metrics.executed,
                "generated": self.metrics.generated,
                "accepted_generated": self.metrics.accepted_generated,
                "pass_rate": round(self.metrics.pass_rate, 6),
                "constraints_collected": self.metrics.constraints_collected,
                "constraints_deduped": self.metrics.constraints_deduped,
                "constraints_selected": self.metrics.constraints_selected,
                "solved": self.metrics.solved,
                "refined": self.metrics.refined,
                "llm_direct_success": self.metrics.llm_direct_success,
                "llm_solve_attempts": self.metrics.llm_solve_attempts,
                "crashes": self.metrics.crashes,
                "queue": len(self.queue),
            },
        )


def run_campaign(cfg: CampaignConfig, clock=time.monotonic) -> Metrics:
    return Campaign(cfg, clock=clock).run()


def replay(target_name: str, data: bytes) -> dict:
    """Run one input and report what happened, for triage and audits."""
    trace = run_concolic(targets_mod.get_target(target_name), data)
    locs = list(dict.fromkeys(v.site.loc() for v in trace.visits))
    return {
        "target": target_name,
        "length": len(data),
        "outcome": trace.outcome.value,
        "crash_reason": trace.crash_reason,
        "constraints": len(trace.constraints),
        "visited_sites": len(trace.visits),
        "locs": locs,
    }
