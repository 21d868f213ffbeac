"""Command-line experiment driver.

Subcommands: ``simulate``, ``chain``, ``seeds``, ``thresholds`` and
``compare``. Exit status is 0 on success, 1 for invalid input and 2 for
runtime or solver failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ChainConfig, ConfigError, ExperimentConfig, GraphSource, ThresholdConfig, load_json
from .dynamics import DynamicsParams, Trajectory, allocate_seeds, run_async, run_sync_br
from .graph import (EdgeListError, Graph, GraphError, gen_configuration, gen_random_regular,
                    lognormal_degree_sequence, read_edge_list)
from .meanfield import (ChainError, ChainSpec, StateSpaceTooLarge, analyze, build_chain, seed_set,
                        solve_absorption)
from .threshold import q_star, run_sync_lt

logger = logging.getLogger("trustdiff")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
_GRAPH_KEY = 0
_TRIAL_KEY = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for runtime errors
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---- seeding and graphs ----

def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Independent stream per trial; adding trials never changes earlier ones."""
    return np.random.SeedSequence(master_seed, spawn_key=(_TRIAL_KEY, trial))


def build_graph(src: GraphSource, rng) -> Graph:
    if src.edge_list is not None:
        return read_edge_list(src.edge_list).graph
    if src.generator == "random_regular":
        return gen_random_regular(src.n, src.k, rng)
    if src.generator == "configuration":
        return gen_configuration(src.degree_counts, rng)
    seq = lognormal_degree_sequence(src.n, src.mean_degree, src.sigma, src.max_degree, rng)
    return gen_configuration(seq, rng)


def shared_graph(cfg: ExperimentConfig) -> Graph | None:
    if cfg.graph.per_trial:
        return None
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(_GRAPH_KEY,)))
    return build_graph(cfg.graph, rng)


def dynamics_params(cfg: ExperimentConfig, horizon: int | None = None) -> DynamicsParams:
    return DynamicsParams(cfg.model, cfg.payoff, cfg.trust, cfg.sens,
                          horizon=cfg.horizon if horizon is None else horizon,
                          stop_on_consensus=cfg.stop_on_consensus, metric_stride=cfg.metric_stride)


def run_trial(cfg: ExperimentConfig, graph: Graph | None, trial: int) -> tuple[Trajectory, int]:
    """One simulation trial; returns the trajectory and the graph size."""
    g_ss, init_ss, dyn_ss = trial_seed(cfg.master_seed, trial).spawn(3)
    g = graph if graph is not None else build_graph(cfg.graph, np.random.default_rng(g_ss))
    init = allocate_seeds(g, cfg.seed_fraction, cfg.allocation, np.random.default_rng(init_ss))
    params = dynamics_params(cfg)
    if cfg.model == "BR_LTE":
        traj = run_sync_br(g, params, init)
    else:
        traj = run_async(g, params, init, np.random.default_rng(dyn_ss))
    return traj, g.n


_worker_state: dict = {}


def _init_worker(cfg, graph):
    _worker_state["cfg"], _worker_state["graph"] = cfg, graph


def _worker(trial):
    return run_trial(_worker_state["cfg"], _worker_state["graph"], trial)


def run_trials(cfg: ExperimentConfig, jobs: int = 1) -> list[tuple[Trajectory, int]]:
    graph = shared_graph(cfg)
    trials = range(cfg.trials)
    if jobs <= 1 or cfg.trials == 1:
        return [run_trial(cfg, graph, t) for t in trials]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg, graph)) as ex:
        return list(ex.map(_worker, trials))  # results in trial order


def aggregate(trajectories: Sequence[Trajectory], stride: int,
              grid: Sequence[int] | None = None) -> list[tuple[int, float, float]]:
    """Mean adoption and utility across trials on a common step grid.

    The default grid is every ``stride`` steps up to the longest run, plus
    that run's final step. A trial that has ended contributes its final
    sample.
    """
    if grid is None:
        last = max(t.samples[-1][0] for t in trajectories)
        grid = list(range(0, last + 1, stride))
        if grid[-1] != last:
            grid.append(last)
    adopt = np.zeros(len(grid))
    util = np.zeros(len(grid))
    g = np.array(grid)
    for t in trajectories:
        steps = np.array([s[0] for s in t.samples])
        pos = np.searchsorted(steps, g, side="right") - 1
        adopt += np.array([s[1] for s in t.samples])[pos]
        util += np.array([s[2] for s in t.samples])[pos]
    m = len(trajectories)
    return [(int(s), float(a / m), float(u / m)) for s, a, u in zip(grid, adopt, util)]


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _out_dir(path) -> Path:
    d = Path(path)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {d}: {exc}") from exc
    if not os.access(d, os.W_OK):
        raise OSError(f"output directory {d} is not writable")
    return d


# ---- subcommands ----

def cmd_simulate(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    if cfg.horizon < 1:
        raise ConfigError(["horizon: simulate needs horizon >= 1"])
    out = _out_dir(cfg.out or "trustdiff_out")
    results = run_trials(cfg, jobs)
    trajs = [t for t, _ in results]
    n = results[0][1]
    width = len(str(cfg.trials - 1))
    for i, t in enumerate(trajs):
        _write(out / f"trial_{i:0{width}d}.csv", t.to_csv())
    async_model = cfg.model != "BR_LTE"
    stride = cfg.metric_stride or (max(n, 1) if async_model else 1)
    agg = aggregate(trajs, stride)
    _write(out / "aggregate.csv", _csv_text(
        ["step", "sweep", "mean_adoption", "mean_utility"],
        [(s, s / n, a, u) for s, a, u in agg]))
    per_trial = [t.summary(cfg.model, seed=i) for i, t in enumerate(trajs)]
    consensus_A = sum(t.terminated_by == "consensus_A" for t in trajs)
    absorbed = [t.steps for t in trajs if t.terminated_by.startswith("consensus")]
    summary = {
        "config": cfg.to_json(),
        "n_players": n,
        "trials": per_trial,
        "mean_final_adoption": float(np.mean([s["final_adoption"] for s in per_trial])),
        "mean_final_avg_utility": float(np.mean([s["final_avg_utility"] for s in per_trial])),
        "domination_frequency": consensus_A / len(trajs),
        "mean_consensus_steps": float(np.mean(absorbed)) if absorbed else None,
    }
    _write(out / "summary.json", _json_text(summary))
    return summary


def _chain_spec(cfg: ChainConfig) -> ChainSpec:
    return ChainSpec.from_counts(cfg.degree_counts, payoff=cfg.payoff, trust=cfg.trust,
                                 sens=cfg.sens, model=cfg.model)


def _solve_chain(spec: ChainSpec, max_states: int):
    if spec.is_1d:
        return analyze(spec, max_states)
    return solve_absorption(build_chain(spec, max_states))


def cmd_chain(cfg: ChainConfig, stdout=None, stderr=None) -> dict:
    spec = _chain_spec(cfg)
    if spec.n_states > cfg.max_states:
        raise StateSpaceTooLarge(spec.n_states, cfg.max_states)
    res = _solve_chain(spec, cfg.max_states)
    K = spec.K
    header = ["state_index"] + [f"y_{k}" for k in range(1, K + 1)] + ["w_all_A", "tau"]
    rows = ((i, *spec.state(i), res.w_all_A[i], res.tau[i]) for i in range(spec.n_states))
    summary = {"n_states": spec.n_states, "solver": res.solver, "residual": res.residual}
    if res.impassable:
        summary["impassable"] = res.impassable
    _emit(cfg.out, "chain", _csv_text(header, rows), summary, stdout, stderr)
    return summary


def cmd_seeds(cfg: ChainConfig, stdout=None, stderr=None) -> dict:
    if cfg.alpha is None:
        raise ConfigError(["alpha: required for seeds"])
    spec = _chain_spec(cfg)
    res = _solve_chain(spec, cfg.max_states)
    ss = seed_set(res, cfg.alpha)
    header = ["state_index"] + [f"y_{k}" for k in range(1, spec.K + 1)] + ["w_all_A"]
    rows = ((spec.index(y), *y, res.w_all_A[spec.index(y)]) for y in ss.states)
    summary = {"alpha": cfg.alpha, "n_qualifying": len(ss.states), "solver": res.solver,
               "min_seeds": ss.min_seeds}
    if ss.upper_interval is not None:
        summary["upper_interval"] = ss.upper_interval
    _emit(cfg.out, "seeds", _csv_text(header, rows), summary, stdout, stderr)
    return summary


def threshold_rows(cfg: ThresholdConfig):
    for dp in cfg.delta_primes:
        t = q_star(cfg.payoff, dp)
        yield dp, t.q_w, t.q_u, t.delta_tilde, t.q_star


def cmd_thresholds(cfg: ThresholdConfig, stdout=None) -> str:
    text = _csv_text(["delta_prime", "q_w", "q_u", "delta_tilde", "q_star"], threshold_rows(cfg))
    if cfg.out:
        _write(_out_dir(cfg.out) / "thresholds.csv", text)
    else:
        (stdout or sys.stdout).write(text)
    return text


def compare_runs(g: Graph, cfg: ExperimentConfig, init) -> dict:
    """Run BR-LTE and LT-LTE from the same start and compare every round."""
    if cfg.horizon == 0:
        return {"identical": True, "rounds": 0}
    params = DynamicsParams("BR_LTE", cfg.payoff, cfg.trust, cfg.sens, horizon=cfg.horizon)
    br = run_sync_br(g, params, init, record_states=True)
    lt = run_sync_lt(g, cfg.payoff, cfg.trust, init, cfg.horizon, record_states=True)
    for t, (x, y) in enumerate(zip(br.states, lt.states)):
        if not np.array_equal(x, y):
            return {"identical": False, "rounds": max(br.steps, lt.steps), "divergence_step": t}
    if len(br.states) != len(lt.states):
        return {"identical": False, "rounds": max(br.steps, lt.steps),
                "divergence_step": min(len(br.states), len(lt.states))}
    out = {"identical": True, "rounds": br.steps, "terminated_by": br.terminated_by}
    if br.cycle_length is not None:
        out["cycle_length"] = br.cycle_length
    return out


def cmd_compare(cfg: ExperimentConfig, stdout=None) -> dict:
    g_ss, init_ss, _ = trial_seed(cfg.master_seed, 0).spawn(3)
    graph = shared_graph(cfg) or build_graph(cfg.graph, np.random.default_rng(g_ss))
    init = allocate_seeds(graph, cfg.seed_fraction, cfg.allocation, np.random.default_rng(init_ss))
    result = compare_runs(graph, cfg, init)
    text = _json_text(result)
    if cfg.out:
        _write(_out_dir(cfg.out) / "compare.json", text)
    else:
        (stdout or sys.stdout).write(text)
    return result


def _emit(out, stem, csv_text, summary, stdout, stderr):
    if out:
        d = _out_dir(out)
        _write(d / f"{stem}.csv", csv_text)
        _write(d / f"{stem}.json", _json_text(summary))
    else:
        (stdout or sys.stdout).write(csv_text)
        (stderr or sys.stderr).write(_json_text(summary))


# ---- argument handling ----

def _parse_override(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _default_jobs() -> int:
    raw = os.environ.get("TRUSTDIFF_JOBS")
    if raw is None:
        return 1
    try:
        v = int(raw)
    except ValueError:
        raise UsageError(f"TRUSTDIFF_JOBS must be an integer, got {raw!r}") from None
    if v < 1:
        raise UsageError("TRUSTDIFF_JOBS must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trustdiff", description="Limited-trust diffusion experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--jobs", type=int, help="parallel trials (default: $TRUSTDIFF_JOBS or 1)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a top-level config field; VALUE is parsed as JSON")
        return p

    common(sub.add_parser("simulate", help="Monte Carlo trials on a graph"))
    common(sub.add_parser("chain", help="mean-field absorption probabilities and times"))
    p = common(sub.add_parser("seeds", help="initial states reaching all-A with probability >= alpha"))
    p.add_argument("--alpha", type=float)
    p = common(sub.add_parser("thresholds", help="q_w, q_u and q* for a list of trust limits"),
               needs_config=False)
    p.add_argument("--payoff", help="a,b,c,d")
    p.add_argument("--delta-prime", help="comma-separated normalized trust limits")
    common(sub.add_parser("compare", help="synchronous BR-LTE vs threshold dynamics"))
    return parser


def _load(args) -> dict:
    data = load_json(args.config) if args.config else {}
    for item in args.set:
        k, v = _parse_override(item)
        data[k] = v
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    if getattr(args, "alpha", None) is not None:
        data["alpha"] = args.alpha
    if args.command == "thresholds":
        try:
            if args.payoff:
                data["payoff"] = [float(v) for v in args.payoff.split(",")]
            if args.delta_prime:
                data["delta_primes"] = [float(v) for v in args.delta_prime.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad number in --payoff/--delta-prime: {exc}") from None
    return data


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        jobs = args.jobs if args.jobs is not None else _default_jobs()
        if jobs < 1:
            raise UsageError("--jobs must be >= 1")
        data = _load(args)
        if args.command == "simulate":
            cmd_simulate(ExperimentConfig.from_dict(data), jobs)
        elif args.command == "compare":
            cmd_compare(ExperimentConfig.from_dict(data))
        elif args.command == "chain":
            cmd_chain(ChainConfig.from_dict(data))
        elif args.command == "seeds":
            cmd_seeds(ChainConfig.from_dict(data))
        else:
            cmd_thresholds(ThresholdConfig.from_dict(data))
    except UsageError as exc:
        print(f"trustdiff: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, EdgeListError) as exc:
        print(f"trustdiff: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ChainError, GraphError, OSError, KeyError, ValueError) as exc:
        print(f"trustdiff: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
