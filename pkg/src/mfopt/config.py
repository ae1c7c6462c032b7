"""JSON run configurations.

Top-level sections: ``problem``, ``model``, ``policy``, ``budget``, ``seed``,
``output``, plus the optional ``compare`` and ``uq`` blocks. Validation
collects every violation before raising :class:`ConfigError`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .acquisition import ACQUISITIONS, POLICY_MODES, AcquisitionSpec, MfPolicySpec
from .benchmarks import BENCHMARKS
from .campaign import MODEL_KINDS, ModelSpec
from .errors import ConfigError

TOP_KEYS = {"problem", "model", "policy", "budget", "seed", "output", "compare", "uq"}
PROBLEM_KEYS = {"benchmark", "levels", "costs"}
MODEL_KEYS = {"prior", "kernel", "basis", "noise_variance", "restarts", "n_initial"}
POLICY_KEYS = {"acquisition", "beta", "n_candidates", "starts", "mode", "epsilon", "force_hf_after"}
COMPARE_KEYS = {"seeds", "target", "baseline", "histories"}
UQ_KEYS = {"marginal", "lf_order", "disc_order", "n_lf", "n_hf", "n_test", "m", "level"}
KERNELS = ("se", "matern52")


@dataclass(frozen=True)
class ProblemConfig:
    benchmark: str
    levels: tuple | None = None
    costs: tuple | None = None


@dataclass(frozen=True)
class CompareConfig:
    seeds: tuple
    target: float
    baseline: str = "gp"
    histories: str | None = None


@dataclass(frozen=True)
class UqConfig:
    marginal: str = "uniform"
    lf_order: int = 2
    disc_order: int | None = None
    n_lf: int = 60
    n_hf: int = 12
    n_test: int = 1000
    m: int = 1000
    level: str = "hf"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    model: ModelSpec
    acquisition: AcquisitionSpec
    policy: MfPolicySpec
    budget: float
    seed: int
    output: str | None = None
    n_initial: tuple | None = None
    compare: CompareConfig | None = None
    uq: UqConfig = field(default_factory=UqConfig)

    def objective(self):
        bench = BENCHMARKS[self.problem.benchmark]
        opts = {}
        if self.problem.levels is not None:
            opts["levels"] = self.problem.levels
        if self.problem.costs is not None:
            opts["costs"] = self.problem.costs
        return bench.objective(**opts)


def _section(raw, name, allowed, errors):
    sec = raw.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        errors.append(f"{name}: must be an object")
        return {}
    unknown = sorted(set(sec) - allowed)
    if unknown:
        errors.append(f"{name}: unknown keys {unknown}; allowed {sorted(allowed)}")
    return sec


def _number(sec, key, default, errors, where, *, integer=False, positive=False, minimum=None):
    v = sec.get(key, default)
    if v is None:
        return v
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok:
        errors.append(f"{where}.{key}: expected {'an integer' if integer else 'a number'}, got {v!r}")
        return default
    if positive and not v > 0:
        errors.append(f"{where}.{key} must be positive")
    if minimum is not None and v < minimum:
        errors.append(f"{where}.{key} must be >= {minimum}")
    return v


def _choice(sec, key, default, options, errors, where):
    v = sec.get(key, default)
    if v not in options:
        errors.append(f"{where}.{key}: unknown value {v!r}; valid options are {list(options)}")
        return default
    return v


def _int_list(sec, key, errors, where):
    v = sec.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        errors.append(f"{where}.{key}: expected a list of integers")
        return None
    return tuple(v)


def parse_config(text):
    """Parse and validate a JSON configuration into a :class:`RunConfig`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    errors = []
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        errors.append(f"unknown top-level keys {unknown}; allowed {sorted(TOP_KEYS)}")

    prob = _section(raw, "problem", PROBLEM_KEYS, errors)
    if "problem" not in raw:
        errors.append("problem: section is required")
    bench = prob.get("benchmark")
    if "problem" in raw and bench not in BENCHMARKS:
        errors.append(f"problem.benchmark: unknown benchmark {bench!r}; valid options are {sorted(BENCHMARKS)}")
    levels = _int_list(prob, "levels", errors, "problem")
    if levels is not None and bench != "quadrature-forrester":
        errors.append("problem.levels applies only to the quadrature-forrester benchmark")
    costs = prob.get("costs")
    if costs is not None:
        if not isinstance(costs, list) or not all(isinstance(c, (int, float)) and c > 0 for c in costs):
            errors.append("problem.costs: expected a list of positive numbers")
            costs = None
        else:
            costs = tuple(float(c) for c in costs)
        if levels is not None or bench == "quadrature-forrester":
            errors.append("problem.costs: quadrature costs are integrand calls and cannot be overridden")
            costs = None

    mod = _section(raw, "model", MODEL_KEYS, errors)
    prior = _choice(mod, "prior", "recursive", MODEL_KINDS, errors, "model")
    kernel = _choice(mod, "kernel", "se", KERNELS, errors, "model")
    basis = _choice(mod, "basis", "constant", ("constant", "linear", "quadratic"), errors, "model")
    noise = _number(mod, "noise_variance", 1e-6, errors, "model", minimum=0)
    restarts = _number(mod, "restarts", 4, errors, "model", integer=True, minimum=1)
    n_initial = _int_list(mod, "n_initial", errors, "model")

    pol = _section(raw, "policy", POLICY_KEYS, errors)
    kind = _choice(pol, "acquisition", "EI", ACQUISITIONS, errors, "policy")
    beta = _number(pol, "beta", 2.0, errors, "policy", minimum=0)
    n_cand = _number(pol, "n_candidates", 512, errors, "policy", integer=True, minimum=1)
    starts = _number(pol, "starts", 8, errors, "policy", integer=True, minimum=1)
    mode = _choice(pol, "mode", "two-stage", POLICY_MODES, errors, "policy")
    eps = _number(pol, "epsilon", 0.0, errors, "policy", minimum=0)
    if isinstance(eps, (int, float)) and eps > 1:
        errors.append("policy.epsilon must lie in [0, 1]")
    force = _number(pol, "force_hf_after", 10, errors, "policy", integer=True, minimum=0)

    if "budget" not in raw:
        errors.append("budget is required")
    budget = _number(raw, "budget", None, errors, "config")
    if budget is not None and not budget > 0:
        errors.append("budget must be positive")
    if "seed" not in raw:
        errors.append("seed is required (no implicit randomness)")
    seed = _number(raw, "seed", None, errors, "config", integer=True, minimum=0)
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        errors.append("output: expected a file path string")

    compare = None
    if "compare" in raw:
        cmp_ = _section(raw, "compare", COMPARE_KEYS, errors)
        seeds = cmp_.get("seeds")
        if isinstance(seeds, int) and not isinstance(seeds, bool) and seeds > 0:
            seeds = tuple(range(seeds))
        elif isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds):
            seeds = tuple(seeds)
        else:
            errors.append("compare.seeds: expected a positive count or a non-empty list of integers")
            seeds = ()
        target = _number(cmp_, "target", None, errors, "compare")
        if target is None:
            errors.append("compare.target is required")
        baseline = _choice(cmp_, "baseline", "gp", MODEL_KINDS, errors, "compare")
        compare = CompareConfig(seeds, target, baseline, cmp_.get("histories"))

    uq_raw = _section(raw, "uq", UQ_KEYS, errors)
    uq = UqConfig(
        _choice(uq_raw, "marginal", "uniform", ("uniform", "normal"), errors, "uq"),
        _number(uq_raw, "lf_order", 2, errors, "uq", integer=True, minimum=0),
        _number(uq_raw, "disc_order", None, errors, "uq", integer=True, minimum=0),
        _number(uq_raw, "n_lf", 60, errors, "uq", integer=True, minimum=1),
        _number(uq_raw, "n_hf", 12, errors, "uq", integer=True, minimum=1),
        _number(uq_raw, "n_test", 1000, errors, "uq", integer=True, minimum=1),
        _number(uq_raw, "m", 1000, errors, "uq", integer=True, minimum=2),
        _choice(uq_raw, "level", "hf", ("hf", "lf"), errors, "uq"),
    )

    if errors:
        raise ConfigError(errors)
    try:
        model = ModelSpec(prior, kernel, basis, float(noise), int(restarts))
        acq = AcquisitionSpec(kind, float(beta), int(n_cand), int(starts))
        policy = MfPolicySpec(mode, None, float(eps), int(force))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(ProblemConfig(bench, levels, costs), model, acq, policy, float(budget), int(seed), output,
                     n_initial, compare, uq)
