"""Command-line entry point.

Exit status: 0 on success, 1 when a solver fails, 2 for bad configuration
or a malformed input file.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import Policy, TabularMDP, load_mdp, policy_bias_values
from .errors import MDPError, ValidationError
from .generators import GeneratorSpec, generate_mdp
from .imitation import RewardClass, irl_saddle_solve, load_demonstrations
from .lp_duality import (
    build_dual_lp,
    build_primal_lp,
    extract_policy,
    verify_strong_duality,
)
from .regularized import (
    RegKind,
    Regularizer,
    mirror_descent_solve,
    run_dual_averaging,
    run_theoretical_trpo,
    solve_regularized,
)
from .report import RunResult, Table, emit_report
from .simplex import format_lp, solve_lp
from .trpo import run_trpo

COMMANDS = ("solve-lp", "solve-reg", "run-md", "run-theoretical-trpo", "run-da",
            "run-trpo", "run-irl", "compare", "generate")
COMPARE_SOLVERS = ("lp", "shannon", "conditional", "md", "theoretical-trpo", "da", "trpo")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    mdp_path: str | None = None
    generate: str | None = "chain:2"
    seed: int = 0
    etas: tuple[float, ...] = (1.0,)
    delta: float = 0.01
    iters: int | None = None
    out: str = "out"
    solvers: tuple[str, ...] = ()
    dump_lp: bool = False
    trace_format: str = "csv"
    entropy_weight: float = 0.1
    reward_bound: float = 1.0
    demos: str | None = None
    timing: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.etas or any(not e > 0 for e in self.etas):
            raise ConfigError("every eta must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.iters is not None and self.iters < 1:
            raise ConfigError("iters must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.trace_format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.entropy_weight < 0 or not self.reward_bound > 0:
            raise ConfigError("entropy weight must be >= 0 and reward bound > 0")
        kinds = {k.value for k in RegKind}
        allowed = set(COMPARE_SOLVERS) if self.command == "compare" else kinds
        bad = [s for s in self.solvers if s not in allowed]
        if bad:
            raise ConfigError(f"unknown solver(s) {bad}; choose from {sorted(allowed)}")


def _load(cfg: ExperimentConfig) -> tuple[TabularMDP, str]:
    if cfg.mdp_path:
        return load_mdp(cfg.mdp_path), str(cfg.mdp_path)
    spec = GeneratorSpec.parse(cfg.generate)
    return generate_mdp(spec, cfg.seed), f"{spec} seed={cfg.seed}"


def _kinds(cfg: ExperimentConfig, default=("shannon", "conditional")) -> list[RegKind]:
    chosen = [s for s in cfg.solvers if s in ("shannon", "conditional")] or list(default)
    return [RegKind(s) for s in chosen]


# ---------------------------------------------------------------------------
# individual runs

def _lp_run(mdp, cfg, out: Path) -> RunResult:
    primal_lp, dual_lp = build_primal_lp(mdp), build_dual_lp(mdp)
    if cfg.dump_lp:
        out.mkdir(parents=True, exist_ok=True)
        (out / "primal.lp").write_text(format_lp(primal_lp))
        (out / "dual.lp").write_text(format_lp(dual_lp))
    primal, dual = solve_lp(primal_lp), solve_lp(dual_lp)
    report = verify_strong_duality(primal, dual, mdp)
    policy = extract_policy(primal, mdp)
    return RunResult(
        "lp", "lp", None, primal.objective_value, primal.objective_value, report.gap,
        primal.iterations + dual.iterations, "ok" if report.passed else "check-failed",
        details={
            "dual_objective": dual.objective_value,
            "bellman_residual": report.bellman_residual,
            "values": report.values.V.tolist(),
            "policy": policy.probs.tolist(),
        })


def _reg_runs(mdp, cfg) -> list[RunResult]:
    results = []
    for kind in _kinds(cfg):
        reg = Regularizer.uniform(kind, *mdp.shape)
        for eta in cfg.etas:
            sol, trace = solve_regularized(mdp, eta, reg)
            measure = sol.gap if kind is RegKind.SHANNON else sol.value.residual
            name = f"reg-{kind.value}-eta{eta:g}"
            results.append(RunResult(
                name, kind.value, float(eta), float(np.sum(sol.mu.mu * mdp.R)), sol.dual_objective,
                measure, len(trace), "ok",
                traces={"trace": Table.from_trace(trace)},
                details={"primal_objective": sol.primal_objective, "gap": sol.gap,
                         "flow_residual_before": sol.flow_residual_before,
                         "values": sol.value.V.tolist(), "policy": sol.policy.probs.tolist()}))
    return results


def _md_runs(mdp, cfg) -> list[RunResult]:
    results = []
    iters = cfg.iters or 1000
    for kind in _kinds(cfg, default=("shannon",)):
        pi, trace = mirror_descent_solve(mdp, cfg.etas[0], kind, iters)
        last = trace.records[-1]
        results.append(RunResult(
            f"md-{kind.value}", f"md-{kind.value}", cfg.etas[0], last.objective, last.objective,
            last.gap_or_residual, len(trace), "converged" if trace.converged else trace.reason,
            traces={"trace": Table.from_trace(trace)}, details={"policy": pi.probs.tolist()}))
    return results


def _theoretical_trpo_run(mdp, cfg) -> RunResult:
    pi, trace = run_theoretical_trpo(mdp, cfg.etas[0], cfg.iters or 500)
    last = trace.records[-1]
    return RunResult("theoretical-trpo", "theoretical-trpo", cfg.etas[0], last.objective, last.objective,
                     last.gap_or_residual, len(trace) - 1, trace.reason,
                     traces={"trace": Table.from_trace(trace)}, details={"policy": pi.probs.tolist()})


def _da_run(mdp, cfg) -> RunResult:
    pi, trace = run_dual_averaging(mdp, cfg.etas[0], cfg.iters or 500)
    last = trace.records[-1]
    return RunResult("da", "da", cfg.etas[0], last.objective, last.objective, last.gap_or_residual,
                     len(trace) - 1, trace.reason,
                     traces={"trace": Table.from_trace(trace)}, details={"policy": pi.probs.tolist()})


def _trpo_run(mdp, cfg) -> RunResult:
    run = run_trpo(mdp, cfg.delta, cfg.iters or 100)
    last = run.records[-1]
    return RunResult("trpo", "trpo", None, last.avg_reward, last.surrogate, last.kl, len(run.records) - 1,
                     run.reason, traces={"trace": Table.from_trpo(run)},
                     details={"delta": cfg.delta, "policy": run.params.policy.probs.tolist()})


def _irl_run(mdp, cfg) -> RunResult:
    if cfg.demos:
        expert = load_demonstrations(cfg.demos, *mdp.shape)
        expert_desc = cfg.demos
    else:
        expert = extract_policy(solve_lp(build_primal_lp(mdp)), mdp)
        expert_desc = "lp-optimal policy"
    res = irl_saddle_solve(mdp, expert, RewardClass(cfg.reward_bound), cfg.entropy_weight, cfg.iters or 500)
    gain = policy_bias_values(res.recovered_policy, mdp).avg_reward
    last = res.objective_trace.records[-1]
    return RunResult("irl", "irl", None, gain, last.objective, res.occupancy_gap, len(res.objective_trace),
                     res.objective_trace.reason, traces={"trace": Table.from_trace(res.objective_trace)},
                     details={"expert": expert_desc, "entropy_weight": cfg.entropy_weight,
                              "recovered_reward": res.recovered_reward.tolist(),
                              "policy": res.recovered_policy.probs.tolist()})


def _compare(mdp, cfg, out) -> list[RunResult]:
    chosen = cfg.solvers or COMPARE_SOLVERS
    sweep_cfg = ExperimentConfig(**{**cfg.__dict__, "solvers": ()})
    results = []
    for solver in COMPARE_SOLVERS:
        if solver not in chosen:
            continue
        if solver == "lp":
            results.append(_lp_run(mdp, cfg, out))
        elif solver in ("shannon", "conditional"):
            sweep_cfg.solvers = (solver,)
            results.extend(_reg_runs(mdp, sweep_cfg))
        elif solver == "md":
            sweep_cfg.solvers = ("shannon",)
            results.extend(_md_runs(mdp, sweep_cfg))
        elif solver == "theoretical-trpo":
            results.append(_theoretical_trpo_run(mdp, cfg))
        elif solver == "da":
            results.append(_da_run(mdp, cfg))
        else:
            results.append(_trpo_run(mdp, cfg))
    return results


def run_experiment(cfg: ExperimentConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg.validate()
        mdp, source = _load(cfg)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    except MDPError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    out = Path(cfg.out)
    header = {"command": cfg.command, "mdp": source, "n_states": mdp.n_states,
              "n_actions": mdp.n_actions, "seed": cfg.seed, "version": __version__}
    if cfg.command == "generate":
        out.mkdir(parents=True, exist_ok=True)
        (out / "mdp.json").write_text(json.dumps(mdp.to_dict(), indent=1) + "\n")
        print(f"wrote {out / 'mdp.json'}", file=stdout)
        return 0
    runners = {
        "solve-lp": lambda: [_lp_run(mdp, cfg, out)],
        "solve-reg": lambda: _reg_runs(mdp, cfg),
        "run-md": lambda: _md_runs(mdp, cfg),
        "run-theoretical-trpo": lambda: [_theoretical_trpo_run(mdp, cfg)],
        "run-da": lambda: [_da_run(mdp, cfg)],
        "run-trpo": lambda: [_trpo_run(mdp, cfg)],
        "run-irl": lambda: [_irl_run(mdp, cfg)],
        "compare": lambda: _compare(mdp, cfg, out),
    }
    start = time.perf_counter()
    try:
        results = runners[cfg.command]()
    except (ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    except MDPError as exc:
        emit_report([RunResult(cfg.command, cfg.command, status=f"error: {exc}")], out, header,
                    cfg.trace_format)
        print(f"solver error: {exc}", file=stderr)
        return 1
    if cfg.timing:
        header["runtime_s"] = time.perf_counter() - start
    emit_report(results, out, header, cfg.trace_format)
    print((out / "report.txt").read_text(), end="", file=stdout)
    return 0


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdpdual", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mdp", dest="mdp_path", metavar="PATH", help="MDP JSON file")
    src.add_argument("--generate", metavar="KIND:PARAMS", default="chain:2",
                     help="chain:N | gridworld:W,H,SLIP | garnet:S,A,B (default chain:2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta", dest="etas", type=_floats, default=(1.0,), help="comma-separated list")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--solver", default="", help="comma-separated solver names")
    p.add_argument("--dump-lp", action="store_true")
    p.add_argument("--format", dest="trace_format", choices=("csv", "json"), default="csv")
    p.add_argument("--entropy-weight", type=float, default=0.1)
    p.add_argument("--reward-bound", type=float, default=1.0)
    p.add_argument("--demos", metavar="PATH", help="demonstration JSON for run-irl")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime in the summary (output no longer reproducible)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(
        command=args.command, mdp_path=args.mdp_path, generate=args.generate, seed=args.seed,
        etas=args.etas, delta=args.delta, iters=args.iters, out=args.out,
        solvers=tuple(s.strip() for s in args.solver.split(",") if s.strip()),
        dump_lp=args.dump_lp, trace_format=args.trace_format, entropy_weight=args.entropy_weight,
        reward_bound=args.reward_bound, demos=args.demos, timing=args.timing)
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
