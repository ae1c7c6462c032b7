"""Bayesian optimization campaigns over a fidelity hierarchy.

A campaign draws a quasi-random initial design, then repeats
refit -> maximize acquisition -> pick fidelity -> evaluate -> log until the
next evaluation would overrun the cost budget. The incumbent is the best
high-fidelity value seen so far; lower levels never update it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .acquisition import (
    AcquisitionSpec,
    MfPolicySpec,
    epsilon_greedy_pick,
    expected_improvement,
    fidelity_utility,
    maximize_acquisition,
    quasi_random_points,
    thompson_select,
    ucb_score,
)
from .errors import ConfigError, NumericalError
from .gp import KernelSpec, fit_gp
from .mf_priors import (
    FidelityHierarchy,
    SingleFidelityModel,
    fit_autoregressive,
    fit_input_augmented,
    fit_nonlinear_autoregressive,
    fit_recursive,
)

MODEL_KINDS = ("gp", "recursive", "autoregressive", "input_augmented", "nonlinear_ar")
REFIT_EVERY_POINTS = 50
REFIT_PERIOD = 5
FIT_ATTEMPTS = 3
# lower-level variance (in noise units) below which an evaluation is uninformative
INFO_FLOOR = 10.0
# priors that condition each level on the frozen posterior of the level below;
# their HF variance only collapses where every lower level is observed too
NESTED_KINDS = ("recursive", "nonlinear_ar")


@dataclass
class Objective:
    """Per-level evaluators (lowest fidelity first) with their costs.

    ``charge(level, x)`` optionally overrides the cost actually billed for an
    evaluation (e.g. only the new integrand calls of a nested quadrature
    chain); ``charge_levels(levels, x)`` bills several levels evaluated in
    increasing order at one ``x``; ``reset`` clears any evaluator state
    before a campaign.
    """

    evaluators: Sequence[Callable]
    costs: Sequence[float]
    bounds: np.ndarray
    optimum: float | None = None
    optimum_x: np.ndarray | None = None
    name: str = "objective"
    charge: Callable | None = None
    reset: Callable | None = None
    charge_levels: Callable | None = None

    def __post_init__(self):
        self.evaluators = list(self.evaluators)
        self.costs = tuple(float(c) for c in self.costs)
        self.bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if len(self.costs) != len(self.evaluators):
            raise ValueError("one cost per evaluator required")
        if min(self.costs) <= 0:
            raise ValueError("costs must be strictly positive")
        if self.bounds.shape[1] != 2 or not np.isfinite(self.bounds).all():
            raise ValueError("bounds must be a finite (d, 2) array")
        if np.any(self.bounds[:, 1] <= self.bounds[:, 0]):
            raise ValueError("every lower bound must be below its upper bound")

    @property
    def n_levels(self):
        return len(self.evaluators)

    @property
    def dim(self):
        return self.bounds.shape[0]

    @property
    def hf_level(self):
        return self.n_levels - 1

    def cost(self, level, x):
        return float(self.charge(level, x)) if self.charge is not None else self.costs[level]

    def sequence_cost(self, levels, x):
        """Cost of evaluating ``levels`` (increasing) at ``x`` one after another."""
        if self.charge_levels is not None:
            return float(self.charge_levels(levels, x))
        if self.charge is not None and len(levels) > 1:
            raise ValueError("an objective with a custom charge needs charge_levels for multi-level steps")
        return sum(self.cost(t, x) for t in levels)

    def evaluate(self, level, x):
        y = float(self.evaluators[level](np.asarray(x, dtype=float)))
        return y


def initial_design(bounds, n_per_level, seed):
    """Scrambled Sobol points for each level, seeded per level."""
    b = np.atleast_2d(np.asarray(bounds, dtype=float))
    out = []
    for t, n in enumerate(n_per_level):
        n = int(n)
        if n < 0:
            raise ConfigError(f"level {t}: negative design size")
        if n == 0:
            out.append(np.zeros((0, b.shape[0])))
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            u = qmc.Sobol(d=b.shape[0], scramble=True, seed=np.random.default_rng([seed, t])).random(n)
        out.append(b[:, 0] + u * (b[:, 1] - b[:, 0]))
    return out


def default_design_sizes(n_levels, dim, kind):
    n_hf = max(5, 2 * dim)
    if kind == "gp":
        return (0,) * (n_levels - 1) + (n_hf,)
    return (4 * n_hf,) * (n_levels - 1) + (n_hf,)


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "recursive"
    kernel: str = "se"
    basis: str = "constant"
    noise_variance: float = 1e-6
    restarts: int = 4

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.kind!r}; choose from {MODEL_KINDS}")
        if self.kernel not in ("se", "matern52"):
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from ('se', 'matern52')")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        if self.restarts < 1:
            raise ValueError("at least one restart required")


@dataclass(frozen=True)
class Record:
    iter: int
    level: int
    cost: float
    cum_cost: float
    x: tuple
    y: float
    best_hf: float


@dataclass
class CampaignHistory:
    records: list
    seed: int
    digest: str
    hf_level: int
    failed: bool = False
    message: str = ""
    explored: list = field(default_factory=list)

    @property
    def dim(self):
        return len(self.records[0].x) if self.records else 0

    @property
    def incumbent(self):
        return self.records[-1].best_hf if self.records else math.inf

    @property
    def total_cost(self):
        return self.records[-1].cum_cost if self.records else 0.0

    @property
    def initial_cost(self):
        init = [r.cum_cost for r in self.records if r.iter == 0]
        return init[-1] if init else 0.0

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# seed={self.seed}\n# digest={self.digest}\n# hf_level={self.hf_level}\n")
        buf.write(f"# failed={int(self.failed)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "level", "cost", "cum_cost"] + [f"x_{i + 1}" for i in range(self.dim)]
                   + ["y", "best_hf"])
        for r in self.records:
            w.writerow([r.iter, r.level, _fmt(r.cost), _fmt(r.cum_cost)] + [_fmt(v) for v in r.x]
                       + [_fmt(r.y), _fmt(r.best_hf)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line:
                body.append(line)
        rows = list(csv.reader(body))
        header, rows = rows[0], rows[1:]
        d = len(header) - 6
        records = [
            Record(int(r[0]), int(r[1]), float(r[2]), float(r[3]), tuple(float(v) for v in r[4:4 + d]),
                   float(r[4 + d]), float(r[5 + d]))
            for r in rows
        ]
        return cls(records, int(meta.get("seed", 0)), meta.get("digest", ""), int(meta.get("hf_level", 0)),
                   bool(int(meta.get("failed", 0))))


def _fmt(v):
    return "%.17g" % v


def config_digest(*parts):
    def plain(p):
        if hasattr(p, "__dataclass_fields__"):
            return asdict(p)
        return p

    blob = json.dumps([plain(p) for p in parts], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _sub_seed(seed, *tags):
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


class _Standardizer:
    def __init__(self, ys):
        allv = np.concatenate([np.asarray(v, dtype=float) for v in ys if len(v)])
        self.mu = float(allv.mean())
        sd = float(allv.std())
        self.sd = sd if sd > 0 else 1.0

    def __call__(self, y):
        return (np.asarray(y, dtype=float) - self.mu) / self.sd


def _previous_kernels(model, kind):
    if model is None:
        return None
    if kind == "gp":
        return [model.gp.kernel]
    if kind == "recursive":
        return [lv.gp.kernel for lv in model.levels]
    if kind == "nonlinear_ar":
        return [gp.kernel for gp in model.gps]
    if kind == "input_augmented":
        return [model.gp.kernel]
    return None


def _fit_model(spec, levels, dim, noise, seed, prev, refit):
    """``levels``: list of (U, y_standardized) over the fidelities the model uses."""
    kernels = _previous_kernels(prev, spec.kind)
    warm = kernels is not None
    base = KernelSpec(spec.kernel, np.full(dim, 0.3), noise_variance=noise)
    if warm:
        kernels = [replace(k, noise_variance=noise) for k in kernels]
    opt = refit or not warm
    if spec.kind == "gp":
        U, y = levels[-1]
        gp = fit_gp(U, y, kernels[0] if warm else base, mean="constant", restarts=spec.restarts, seed=seed,
                    optimize_hypers=opt)
        return SingleFidelityModel(gp)
    hierarchy = FidelityHierarchy([(U, y) for U, y in levels])
    if spec.kind == "recursive":
        return fit_recursive(hierarchy, spec.basis, kernels if warm else base, restarts=spec.restarts,
                             seed=seed, optimize_hypers=opt)
    if spec.kind == "autoregressive":
        return fit_autoregressive(hierarchy, base, restarts=spec.restarts, seed=seed,
                                  noise_variance=max(noise, 1e-10))
    if spec.kind == "nonlinear_ar":
        return fit_nonlinear_autoregressive(hierarchy, spec.kernel, restarts=spec.restarts, seed=seed,
                                            noise_variance=noise, kernels=kernels, optimize_hypers=opt)
    return fit_input_augmented(hierarchy, kernel_family=spec.kernel, kernel=kernels[0] if warm else None,
                               fit=opt, restarts=spec.restarts, seed=seed, noise_variance=noise)


def _correlations(model, U, hf, floor=0.0):
    """``Cor[f_t(U), f_hf(U)]`` for every level ``t`` (rows: levels).

    A lower level whose posterior variance is at or below ``floor`` is
    already known at that point and gets correlation 0.
    """
    out = np.ones((hf + 1, U.shape[0]))
    for t in range(hf):
        va, vb, c = model.level_cov(U, t, hf)
        denom = np.sqrt(np.maximum(va, 0.0) * np.maximum(vb, 0.0))
        cor = np.where(denom > 0, np.clip(c / np.where(denom > 0, denom, 1.0), -1.0, 1.0), 0.0)
        out[t] = np.where(va > floor, cor, 0.0)
    return out


class _HfView:
    def __init__(self, model, hf):
        self.model, self.hf = model, hf

    def predict(self, X, full_cov=False):
        return self.model.predict(X, level=self.hf, full_cov=full_cov)


def _choose_level(model, u, hf, costs, floor=0.0):
    """Two-stage fidelity choice at one point; ties favour higher fidelity."""
    cor = _correlations(model, u[None, :], hf, floor)[:, 0]
    best_t, best = hf, fidelity_utility(cor[hf], hf, costs)
    for t in range(hf - 1, -1, -1):
        v = fidelity_utility(cor[t], t, costs)
        if v > best:
            best_t, best = t, v
    return best_t


def _propose(model, hf, incumbent, acq, policy, costs, dim, seed, multi, floor):
    """Return ``(u, level)`` in unit-cube coordinates."""
    unit = np.array([[0.0, 1.0]] * dim)

    def base_score(U):
        m, v = model.predict(U, level=hf)
        s = np.sqrt(np.maximum(v, 0.0))
        if acq.kind == "UCB":
            return ucb_score(m, s, acq.beta)
        return expected_improvement(m, s, incumbent)

    if acq.kind == "TS":
        cand = quasi_random_points(unit, acq.n_candidates, seed)
        u = cand[thompson_select(_HfView(model, hf), cand, seed)]
        return u, (_choose_level(model, u, hf, costs, floor) if multi else hf)
    if not multi or policy.mode == "two-stage":
        u, _ = maximize_acquisition(base_score, unit, starts=acq.starts, seed=seed)
        return u, (_choose_level(model, u, hf, costs, floor) if multi else hf)
    best = None
    for t in range(hf, -1, -1):
        if policy.mode == "joint-cost":
            def score(U, t=t):
                return base_score(U) / costs[t]
        else:
            def score(U, t=t):
                return base_score(U) * np.maximum(_correlations(model, U, hf, floor)[t], 0.0) / costs[t]
        u, v = maximize_acquisition(score, unit, starts=acq.starts, seed=seed)
        if best is None or v > best[2]:
            best = (u, t, v)
    return best[0], best[1]


def _design_cost(objective, design, used):
    """Billed cost of the initial design, with shared points charged once per level chain."""
    levels_at = {}
    for t in used:
        for x in design[t]:
            levels_at.setdefault(tuple(x.tolist()), []).append(t)
    if objective.charge is not None and objective.charge_levels is None:
        return sum(objective.cost(t, np.array(x)) for x, ts in levels_at.items() for t in ts)
    return sum(objective.sequence_cost(ts, np.array(x)) for x, ts in levels_at.items())


def run_campaign(objective, model_spec=None, acquisition_spec=None, policy_spec=None, budget=None, seed=None,
                 n_initial=None, digest=None):
    """Run one seeded campaign; see the module docstring for the loop.

    ``model_spec.kind == "gp"`` gives a single-fidelity campaign on the
    highest level. ``n_initial`` holds one design size per level (defaults:
    ``max(5, 2d)`` high-fidelity points and four times that per lower level).
    """
    if seed is None:
        raise ConfigError("a seed is required")
    if budget is None or not budget > 0:
        raise ConfigError("budget must be positive")
    model_spec = model_spec or ModelSpec()
    acq = acquisition_spec or AcquisitionSpec()
    policy = policy_spec or MfPolicySpec()
    T, d, hf = objective.n_levels, objective.dim, objective.hf_level
    multi = model_spec.kind != "gp" and T > 1
    costs = policy.costs if policy.costs is not None else objective.costs
    if len(costs) != T:
        raise ConfigError(f"{T} policy costs required, got {len(costs)}")
    sizes = tuple(n_initial) if n_initial is not None else default_design_sizes(T, d, model_spec.kind)
    if len(sizes) != T:
        raise ConfigError(f"{T} initial design sizes required, got {len(sizes)}")
    if sizes[hf] < 1:
        raise ConfigError("the initial design needs at least one high-fidelity point")
    if multi and min(sizes) < 1:
        raise ConfigError(f"model {model_spec.kind!r} needs initial points at every level, got {list(sizes)}")
    if digest is None:
        digest = config_digest(objective.name, model_spec, acq, policy, budget, seed, list(sizes))
    if objective.reset is not None:
        objective.reset()

    lo, width = objective.bounds[:, 0], objective.bounds[:, 1] - objective.bounds[:, 0]
    used = list(range(T)) if multi else [hf]
    U = {t: [] for t in used}
    Y = {t: [] for t in used}
    seen = {t: set() for t in used}
    records, explored = [], []
    cum, best = 0.0, math.inf
    history = CampaignHistory(records, int(seed), digest, hf)

    def log(it, level, x):
        nonlocal cum, best
        c = objective.cost(level, x)
        y = objective.evaluate(level, x)
        if not math.isfinite(y):
            raise NumericalError(f"level {level} returned {y} at x={x.tolist()}")
        cum += c
        if level == hf:
            best = min(best, y)
        U[level].append((x - lo) / width)
        Y[level].append(y)
        seen[level].add(tuple(x.tolist()))
        records.append(Record(it, level, c, cum, tuple(float(v) for v in x), y, best))

    design = initial_design(objective.bounds, sizes, seed)
    nested = multi and model_spec.kind in NESTED_KINDS
    if nested:
        for t in range(1, T):
            if sizes[t] <= sizes[t - 1]:
                design[t] = design[t - 1][: sizes[t]]
    init_cost = _design_cost(objective, design, used)
    if init_cost > budget + 1e-12:
        raise ConfigError(f"initial design costs {init_cost} which exceeds the budget {budget}")
    try:
        for t in used:
            for x in design[t]:
                log(0, t, x)
    except NumericalError as exc:
        history.failed, history.message = True, str(exc)
        return history

    model, it, lf_streak, since_refit = None, 0, 0, 0
    while True:
        it += 1
        n_points = sum(len(v) for v in Y.values())
        refit = model is None or n_points < REFIT_EVERY_POINTS or since_refit + 1 >= REFIT_PERIOD
        std = _Standardizer([Y[t] for t in used])
        levels = [(np.array(U[t]), std(Y[t])) for t in used]
        fitted = None
        noise = model_spec.noise_variance
        for attempt in range(FIT_ATTEMPTS):
            try:
                fitted = _fit_model(model_spec, levels, d, noise, _sub_seed(seed, it, attempt), model, refit)
                break
            except (NumericalError, np.linalg.LinAlgError, ValueError):
                noise = max(noise, 1e-8) * 100.0
        if fitted is None:
            history.failed, history.message = True, f"model fit failed at iteration {it}"
            return history
        model = fitted
        since_refit = 0 if refit else since_refit + 1
        m_hf = hf if multi else 0
        floor = INFO_FLOOR * max(noise, 1e-10)
        try:
            u, level_idx = _propose(model, m_hf, float(std(best)), acq, policy,
                                    [costs[t] for t in used], d, _sub_seed(seed, it, 7), multi, floor)
        except NumericalError as exc:
            history.failed, history.message = True, f"acquisition failed at iteration {it}: {exc}"
            return history
        u, took = epsilon_greedy_pick(u, np.array([[0.0, 1.0]] * d), policy.epsilon, _sub_seed(seed, it, 11),
                                      return_flag=True)
        if took and multi and (acq.kind == "TS" or policy.mode == "two-stage"):
            level_idx = _choose_level(model, u, m_hf, [costs[t] for t in used], floor)
        level = used[level_idx]
        if multi and level != hf:
            lf_streak += 1
            if lf_streak > policy.force_hf_after:
                level, lf_streak = hf, 0
        else:
            lf_streak = 0
        x = lo + np.clip(u, 0.0, 1.0) * width
        key = tuple(x.tolist())
        steps = [t for t in range(level) if key not in seen[t]] if nested else []
        steps.append(level)
        if cum + objective.sequence_cost(steps, x) > budget + 1e-12:
            break
        explored.append(bool(took))
        history.explored = explored
        try:
            for t in steps:
                log(it, t, x)
        except NumericalError as exc:
            history.failed, history.message = True, str(exc)
            return history
    return history


# ----------------------------------------------------------------------------
# paired single- vs multi-fidelity comparison
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmConfig:
    model: ModelSpec
    acquisition: AcquisitionSpec = AcquisitionSpec()
    policy: MfPolicySpec = MfPolicySpec()
    n_initial: tuple | None = None


@dataclass(frozen=True)
class ArmResult:
    seed: int
    cost: float
    censored: bool
    history: CampaignHistory = field(repr=False, compare=False)


@dataclass
class Comparison:
    target: float
    budget: float
    arms: dict

    def median(self, arm):
        return float(np.median([r.cost for r in self.arms[arm]]))

    def rows(self):
        names = list(self.arms)
        seeds = [r.seed for r in self.arms[names[0]]]
        out = []
        for i, s in enumerate(seeds):
            row = {"seed": s}
            for n in names:
                row[f"{n}_cost"] = self.arms[n][i].cost
                row[f"{n}_censored"] = self.arms[n][i].censored
            out.append(row)
        return out


def cost_to_target(history, target, hf_cost=1.0, budget=None):
    """Cost spent after the initial design until the incumbent first reaches
    ``target`` (in units of ``hf_cost``); ``(budget, True)`` if never."""
    init = history.initial_cost
    for r in history.records:
        if r.best_hf <= target:
            return max(0.0, r.cum_cost - init) / hf_cost, False
    return (budget if budget is not None else history.total_cost) / hf_cost, True


def compare_sf_mf(objective, configs, seeds, *, target, budget):
    """Run each arm of ``configs`` (name -> :class:`ArmConfig`) on every seed
    and tabulate the high-fidelity-equivalent cost to reach ``target``."""
    if len({a.acquisition.kind for a in configs.values()}) > 1:
        raise ConfigError("all arms must use the same acquisition family")
    hf_cost = objective.costs[objective.hf_level]
    arms = {}
    for name, arm in configs.items():
        results = []
        for s in seeds:
            h = run_campaign(objective, arm.model, arm.acquisition, arm.policy, budget, s, arm.n_initial)
            cost, censored = cost_to_target(h, target, hf_cost, budget)
            results.append(ArmResult(int(s), cost, censored, h))
        arms[name] = results
    return Comparison(target, budget, arms)
