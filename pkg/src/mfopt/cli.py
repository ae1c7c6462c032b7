"""Command-line entry point.

Exit codes: 0 success, 2 configuration or argument error, 3 numerical
failure. Every output file is written to a temporary sibling and renamed.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
import warnings

import numpy as np

from .benchmarks import BENCHMARKS, pce_hf, pce_lf
from .campaign import ArmConfig, ModelSpec, compare_sf_mf, run_campaign
from .config import parse_config
from .errors import ConfigError, NumericalError
from .pce import (
    RandomInput,
    UndersampledWarning,
    fit_mf_pce,
    fit_pce_least_squares,
    mc_estimate,
    pce_moments,
    total_degree_multi_indices,
)
from .quadrature import make_rule
from .sampling import CandidatePool, greedy_select

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def atomic_write(path, text):
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, path):
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _read_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(v):
    return "%.17g" % v


def cmd_bench_list(args):
    rows = [[b.name, b.dim, " ".join(_g(c) for c in b.costs), b.description] for b in BENCHMARKS.values()]
    _emit(_csv(rows, ["name", "dim", "costs", "description"]), None)
    return EXIT_OK


def cmd_bo_run(args):
    cfg = _read_config(args.config)
    out = args.output or cfg.output
    if not out:
        raise ConfigError("no output path: set 'output' in the config or pass --output")
    hist = run_campaign(cfg.objective(), cfg.model, cfg.acquisition, cfg.policy, cfg.budget, cfg.seed,
                        cfg.n_initial)
    atomic_write(out, hist.to_csv())
    if hist.failed:
        print(f"campaign aborted: {hist.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{len(hist.records)} evaluations, cost {hist.total_cost:g}, incumbent {hist.incumbent:.10g}")
    return EXIT_OK


def cmd_bo_compare(args):
    cfg = _read_config(args.config)
    if cfg.compare is None:
        raise ConfigError("bo compare needs a 'compare' section with seeds and target")
    out = args.output or cfg.output
    if not out:
        raise ConfigError("no output path: set 'output' in the config or pass --output")
    objective = cfg.objective()
    arms = {
        "sf": ArmConfig(ModelSpec(cfg.compare.baseline, cfg.model.kernel, cfg.model.basis,
                                  cfg.model.noise_variance, cfg.model.restarts), cfg.acquisition, cfg.policy),
        "mf": ArmConfig(cfg.model, cfg.acquisition, cfg.policy, cfg.n_initial),
    }
    table = compare_sf_mf(objective, arms, cfg.compare.seeds, target=cfg.compare.target, budget=cfg.budget)
    rows = [[r["seed"], _g(r["sf_cost"]), int(r["sf_censored"]), _g(r["mf_cost"]), int(r["mf_censored"])]
            for r in table.rows()]
    atomic_write(out, _csv(rows, ["seed", "sf_cost", "sf_censored", "mf_cost", "mf_censored"]))
    if cfg.compare.histories:
        os.makedirs(cfg.compare.histories, exist_ok=True)
        for name, results in table.arms.items():
            for r in results:
                atomic_write(os.path.join(cfg.compare.histories, f"{name}_seed{r.seed}.csv"), r.history.to_csv())
    print(f"median cost to target: sf {table.median('sf'):g}, mf {table.median('mf'):g}")
    return EXIT_OK


def _uq_input(cfg):
    return RandomInput((cfg.uq.marginal,) * 2)


def cmd_uq_pce(args):
    cfg = _read_config(args.config)
    if cfg.problem.benchmark != "pce-pair":
        raise ConfigError("uq pce supports the pce-pair benchmark")
    u = cfg.uq
    inp = _uq_input(cfg)
    lf_set = total_degree_multi_indices(2, u.lf_order)
    disc_set = total_degree_multi_indices(2, u.disc_order if u.disc_order is not None else max(1, u.lf_order - 1))
    xi_l = inp.low_discrepancy(u.n_lf, np.random.default_rng([cfg.seed, 0]))
    xi_h = inp.low_discrepancy(u.n_hf, np.random.default_rng([cfg.seed, 1]))
    xi_t = inp.sample(u.n_test, np.random.default_rng([cfg.seed, 2]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UndersampledWarning)
        mf = fit_mf_pce(inp, lf_set, (xi_l, pce_lf(xi_l)), (xi_h, pce_hf(xi_h)), disc_set)
        hf_only = fit_pce_least_squares(inp, disc_set, (xi_h, pce_hf(xi_h)))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    truth = pce_hf(xi_t)
    rows = []
    for name, model, mean in (("mf", mf, mf.lf.mean + mf.discrepancy.mean),
                              ("hf_only", hf_only, pce_moments(hf_only).mean)):
        rmse = float(np.sqrt(np.mean((model.predict(xi_t) - truth) ** 2)))
        rows.append([name, _g(rmse), _g(mean)])
    _emit(_csv(rows, ["model", "rmse", "mean"]), args.output or cfg.output)
    return EXIT_OK


def cmd_uq_mc(args):
    cfg = _read_config(args.config)
    if cfg.problem.benchmark != "pce-pair":
        raise ConfigError("uq mc supports the pce-pair benchmark")
    fn = pce_hf if cfg.uq.level == "hf" else pce_lf
    est = mc_estimate(fn, _uq_input(cfg), cfg.uq.m, cfg.seed)
    _emit(_csv([[_g(est.mean), _g(est.variance), est.m, _g(est.mse)]], ["mean", "variance", "m", "mse"]),
          args.output or cfg.output)
    return EXIT_OK


def cmd_quad_table(args):
    try:
        rule = make_rule(args.rule, args.level)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [[_g(x), _g(w)] for x, w in zip(rule.nodes[:, 0], rule.weights)]
    _emit(_csv(rows, ["node", "weight"]), args.output)
    return EXIT_OK


def _read_pool(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read pool {path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise ConfigError("pool file needs a header and at least one row")
    header, body = rows[0], rows[1:]
    if not header or header[0] != "id":
        raise ConfigError("pool header must start with 'id'")
    lf_cols = [i for i, h in enumerate(header) if h.startswith("fL_")]
    sur_cols = [i for i, h in enumerate(header) if h.startswith("fLtilde_")]
    if not lf_cols:
        raise ConfigError("pool needs fL_1..fL_q columns")
    if sur_cols and len(sur_cols) != len(lf_cols):
        raise ConfigError("fLtilde_ columns must match fL_ columns")
    try:
        ids = [r[0] for r in body]
        lf = np.array([[float(r[i]) for i in lf_cols] for r in body])
        sur = np.array([[float(r[i]) for i in sur_cols] for r in body]) if sur_cols else None
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed pool row: {exc}") from None
    return CandidatePool(ids, lf, sur)


def cmd_sample_greedy(args):
    pool = _read_pool(args.pool)
    if not 1 <= args.k <= len(pool):
        raise ConfigError(f"--k must lie in 1..{len(pool)}")
    if args.weight is not None and args.weight < 0:
        raise ConfigError("--weight must be non-negative")
    ids, scores = greedy_select(pool, args.k, args.weight, return_scores=True)
    rows = [[i + 1, pid, _g(s)] for i, (pid, s) in enumerate(zip(ids, scores))]
    _emit(_csv(rows, ["rank", "id", "score"]), args.output)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="mfopt", description="Multi-fidelity optimization and UQ toolkit")
    sub = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    bench.add_parser("list").set_defaults(fn=cmd_bench_list)

    bo = sub.add_parser("bo").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, fn in (("run", cmd_bo_run), ("compare", cmd_bo_compare)):
        c = bo.add_parser(name)
        c.add_argument("--config", required=True)
        c.add_argument("--output")
        c.set_defaults(fn=fn)

    uq = sub.add_parser("uq").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, fn in (("pce", cmd_uq_pce), ("mc", cmd_uq_mc)):
        c = uq.add_parser(name)
        c.add_argument("--config", required=True)
        c.add_argument("--output")
        c.set_defaults(fn=fn)

    quad = sub.add_parser("quad").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    c = quad.add_parser("table")
    c.add_argument("--rule", required=True)
    c.add_argument("--level", required=True, type=int)
    c.add_argument("--output")
    c.set_defaults(fn=cmd_quad_table)

    sample = sub.add_parser("sample").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    c = sample.add_parser("greedy")
    c.add_argument("--pool", required=True)
    c.add_argument("--k", required=True, type=int)
    c.add_argument("--weight", type=float)
    c.add_argument("--output")
    c.set_defaults(fn=cmd_sample_greedy)
    return p


def run_cli(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
