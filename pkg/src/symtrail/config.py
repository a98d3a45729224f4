"""Campaign configuration and its INI file form.

The config file mirrors the deployment layout:

    [common-settings]
    format = JSON
    llm_model = gpt-4o-mini
    api_key = xxx
    mock = syntax

    [running-locations]
    mainDir = /campaigns/json
    inputDir = in
    outputDir = out
    failedDir = failed

    [running-targets]
    target = json_subset

    [running-params]
    timeout = 43200        // running timeout, seconds
    cov_timeout = 60       // saturation poll interval, seconds
    saturation_window = 180
    iterations = 0
    solver = llm-validated
    select = ect
    prng_seed = 0

    [selector]
    alpha = 1.0
    beta = 3.0
    gamma = 0.8
    top_k = 16
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .selector import SelectorParams

SOLVER_MODES = ("baseline", "llm", "llm+validator")
SELECT_MODES = ("ect", "all")
MOCK_MODES = ("syntax", "adversarial", "echo", "off")

# CLI spelling of the validated mode.
_SOLVER_ALIASES = {"llm-validated": "llm+validator"}


@dataclass
class CampaignConfig:
    format: str = "JSON"
    target: str = "json_subset"
    input_dir: str = "in"
    output_dir: str = "out"
    failed_dir: str = "failed"
    timeout: float = 0.0
    iterations: int = 0
    cov_timeout: float = 60.0
    saturation_window: float = 180.0
    iteration_window: int = 0
    solver_mode: str = "llm+validator"
    select_mode: str = "ect"
    mock: str = "syntax"
    llm_model: str = "gpt-4o-mini"
    api_key: str = ""
    llm_base_url: str = ""
    llm_timeout: float = 60.0
    prng_seed: int = 0
    max_solve_vars: int = 3
    seed_acquisition: bool = True
    seeds_per_acquisition: int = 4
    selector: SelectorParams = field(default_factory=SelectorParams)

    def validate(self) -> None:
        dirs = [self.input_dir, self.output_dir, self.failed_dir]
        if any(not d for d in dirs):
            raise ConfigError("input, output, and failed directories must all be set")
        if len({str(Path(d).resolve()) for d in dirs}) != 3:
            raise ConfigError("input, output, and failed directories must be distinct")
        if self.timeout <= 0 and self.iterations <= 0:
            raise ConfigError("either timeout or iterations must be positive")
        if self.solver_mode not in SOLVER_MODES:
            raise ConfigError(f"solver must be one of {SOLVER_MODES}")
        if self.select_mode not in SELECT_MODES:
            raise ConfigError(f"select must be one of {SELECT_MODES}")
        if self.mock not in MOCK_MODES:
            raise ConfigError(f"mock must be one of {MOCK_MODES}")
        if self.seeds_per_acquisition < 1:
            raise ConfigError("seeds_per_acquisition must be >= 1")


def normalize_solver_mode(name: str) -> str:
    return _SOLVER_ALIASES.get(name, name)


def load_config(path: str | Path) -> CampaignConfig:
    """Read an INI campaign config; // and # start inline comments."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("//", "#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser.read(path)
    cfg = CampaignConfig()

    common = parser["common-settings"] if parser.has_section("common-settings") else {}
    cfg.format = common.get("format", cfg.format)
    cfg.llm_model = common.get("llm_model", cfg.llm_model)
    cfg.api_key = common.get("api_key", cfg.api_key)
    cfg.mock = common.get("mock", cfg.mock)
    cfg.llm_base_url = common.get("llm_base_url", cfg.llm_base_url)

    locations = parser["running-locations"] if parser.has_section("running-locations") else {}
    base = Path(locations.get("mainDir", "") or path.parent)

    def _dir(key: str, default: str) -> str:
        raw = locations.get(key, default)
        p = Path(raw)
        return str(p if p.is_absolute() else base / p)

    cfg.input_dir = _dir("inputDir", cfg.input_dir)
    cfg.output_dir = _dir("outputDir", cfg.output_dir)
    cfg.failed_dir = _dir("failedDir", cfg.failed_dir)

    targets = parser["running-targets"] if parser.has_section("running-targets") else {}
    cfg.target = targets.get("target", cfg.target)

    params = parser["running-params"] if parser.has_section("running-params") else {}

    def _num(key, default, cast):
        raw = params.get(key, None)
        if raw is None:
            return default
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc

    cfg.timeout = _num("timeout", cfg.timeout, float)
    cfg.cov_timeout = _num("cov_timeout", cfg.cov_timeout, float)
    cfg.saturation_window = _num("saturation_window", cfg.saturation_window, float)
    cfg.iteration_window = _num("iteration_window", cfg.iteration_window, int)
    cfg.iterations = _num("iterations", cfg.iterations, int)
    cfg.prng_seed = _num("prng_seed", cfg.prng_seed, int)
    cfg.max_solve_vars = _num("max_solve_vars", cfg.max_solve_vars, int)
    cfg.llm_timeout = _num("llm_timeout", cfg.llm_timeout, float)
    cfg.seeds_per_acquisition = _num("seeds_per_acquisition", cfg.seeds_per_acquisition, int)
    cfg.solver_mode = normalize_solver_mode(params.get("solver", cfg.solver_mode))
    cfg.select_mode = params.get("select", cfg.select_mode)
    if "seed_acquisition" in params:
        cfg.seed_acquisition = params.get("seed_acquisition").lower() in ("1", "true", "yes", "on")

    if parser.has_section("selector"):
        sel = parser["selector"]
        cfg.selector = replace(
            cfg.selector,
            alpha=float(sel.get("alpha", cfg.selector.alpha)),
            beta=float(sel.get("beta", cfg.selector.beta)),
            gamma=float(sel.get("gamma", cfg.selector.gamma)),
            top_k=int(sel.get("top_k", cfg.selector.top_k)),
            visit_term=sel.get("visit_term", cfg.selector.visit_term),
            depth_source=sel.get("depth_source", cfg.selector.depth_source),
        )
    return cfg
