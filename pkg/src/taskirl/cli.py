"""Experiment runner.

Subcommands:
  gen-env    write a random environment file
  learn-dfa  infer the task automaton with an exact equivalence teacher
  train      fit a reward model from saved demonstrations and automaton
  evaluate   measure a saved model's success ratio on an environment
  run        full pipeline: active inference, reward learning, test envs

A config file holds flat `key = value` lines named after the long flags;
flags override file values. Every command requires a seed, from the flag
or the config, so outputs are a pure function of (inputs, seed).

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Optional, TypeVar

from . import viz
from .automata import (
    DfaError,
    StateError,
    build_product,
    exact_equivalence,
    load_dfa,
    save_dfa,
)
from .grid_env import (
    GridError,
    PlacementError,
    generate_random_env,
    load_env,
    save_env,
)
from .irl import (
    ConvergenceError,
    TrainConfig,
    soft_policy,
    soft_value_iteration,
    train,
    write_metrics,
)
from .oracle import FIXTURE_TASKS, TaskSpec, load_demos, load_fixture_task, save_demos
from .orchestrator import (
    BASELINES,
    LoopConfig,
    default_horizon,
    derive_seed,
    evaluate_on_envs,
    learn_dfa_exact,
    make_evaluator,
    run_active_irl,
    run_baseline,
    shortest_accepting_words,
    success_ratio,
)
from .rewards import DEFAULT_HIDDEN, load_model, make_model, product_features, save_model

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_INTERNAL = 4

VARIANTS = ("tabular", "linear", "mlp")


class InputError(Exception):
    """Missing or malformed option, file, or field."""


T = TypeVar("T")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _hidden(text: str) -> tuple[int, ...]:
    vals = tuple(int(v) for v in text.replace(",", " ").split())
    if not vals:
        raise ValueError("hidden layer list is empty")
    return vals


def _parse_config(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}")
    cfg: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{ln}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


class Resolver:
    """Option lookup: CLI flag first, then config file, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = _parse_config(args.config) if getattr(args, "config", None) else {}

    def get(
        self,
        name: str,
        cast: Callable[[str], T],
        default: Optional[T] = None,
        required: bool = False,
    ) -> Optional[T]:
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None and name in self.cfg:
            try:
                value = cast(self.cfg[name])
            except ValueError as exc:
                raise InputError(f"config option {name}: {exc}")
        if value is None:
            if required:
                raise InputError(f"option {name} is required (flag or config)")
            return default
        return value

    def seed(self) -> int:
        return self.get("seed", int, required=True)


def _resolve_task(name: str) -> TaskSpec:
    if name in FIXTURE_TASKS:
        return load_fixture_task(name)
    path = Path(name)
    if not path.exists():
        raise InputError(
            f"unknown task {name!r}: expected one of {FIXTURE_TASKS} or a .dfa path"
        )
    return TaskSpec(dfa=load_dfa(str(path)), name=path.stem)


def _load_grid(path: str, slip: float):
    if not Path(path).exists():
        raise InputError(f"environment file not found: {path}")
    return load_env(path, slip=slip)


def _train_config(r: Resolver, seed: int) -> TrainConfig:
    try:
        return TrainConfig(
            gamma=r.get("gamma", float, 0.95),
            alpha=r.get("alpha", float, None),
            alpha_decay=r.get("alpha-decay", _bool, False),
            vi_tol=r.get("vi-tol", float, 1e-8),
            vi_cap=r.get("vi-cap", int, 10000),
            eval_every=r.get("eval-every", int, 20),
            eps_stop=r.get("eps-stop", float, 0.01),
            min_updates=r.get("min-updates", int, 60),
            max_updates=r.get("max-updates", int, 2000),
            l2=r.get("l2", float, 0.0),
            rollouts=r.get("rollouts", int, 1000),
            horizon=r.get("horizon", int, None),
            log_floor=r.get("log-floor", float, -700.0),
            seed=seed,
        )
    except ValueError as exc:
        raise InputError(str(exc))


def _loop_config(r: Resolver, seed: int) -> LoopConfig:
    try:
        return LoopConfig(
            kappa=r.get("kappa", float, 0.9),
            max_outer=r.get("max-outer", int, 10),
            demos_per_query=r.get("demos-per-query", int, 10),
            ce_rollouts=r.get("ce-rollouts", int, 200),
            ce_random_words=r.get("ce-random-words", int, 20000),
            ce_max_word_len=r.get("ce-max-word-len", int, 8),
            rollouts=r.get("rollouts", int, 1000),
            horizon=r.get("horizon", int, None),
            demo_starts=r.get("demo-starts", str, "uniform"),
            seed=seed,
        )
    except ValueError as exc:
        raise InputError(str(exc))


def _out_dir(r: Resolver) -> Path:
    out = Path(r.get("out", str, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_phase_metrics(reports, path: Path) -> None:
    lines = ["phase,iteration,loglik,grad_norm,beta"]
    for phase, report in enumerate(reports):
        for t, ll, gnorm, beta in report.metrics_rows():
            b = "" if beta == "" else repr(float(beta))
            lines.append(f"{phase},{t},{repr(float(ll))},{repr(float(gnorm))},{b}")
    path.write_text("\n".join(lines) + "\n")


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_gen_env(args: argparse.Namespace) -> int:
    r = Resolver(args)
    seed = r.seed()
    width = r.get("width", int, 12)
    height = r.get("height", int, 12)
    regions = r.get("regions", int, 1)
    slip = r.get("slip", float, 0.0)
    try:
        grid = generate_random_env(width, height, regions, seed=seed, slip=slip)
    except PlacementError as exc:
        raise InputError(f"infeasible placement: {exc}")
    out = r.get("out", str, required=True)
    save_env(grid, out)
    centers = int((grid.label_table() >= 0).sum())
    if r.get("render", _bool, False):
        viz.render_env(grid, str(Path(out).with_suffix(".png")))
    print(f"wrote {out}: {width}x{height}, {centers} labeled centers, seed {seed}")
    return EXIT_OK


def cmd_learn_dfa(args: argparse.Namespace) -> int:
    r = Resolver(args)
    r.seed()
    grid = _load_grid(r.get("env", str, required=True), slip=0.0)
    if grid.start is None:
        raise InputError("environment has no start cell; membership needs one")
    task = _resolve_task(r.get("task", str, required=True))
    out = _out_dir(r)
    dfa, oracle, rounds = learn_dfa_exact(
        task, grid, max_rounds=r.get("max-outer", int, 16)
    )
    save_dfa(dfa, str(out / "learned.dfa"))
    oracle.save_log(str(out / "queries.csv"))
    equal = exact_equivalence(dfa, task.dfa) is None
    print(
        f"learned {dfa.n_states}-state automaton in {rounds} rounds, "
        f"{oracle.num_queries} membership queries, language_equal={equal}"
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    r = Resolver(args)
    seed = r.seed()
    slip = r.get("slip", float, 0.0)
    grid = _load_grid(r.get("env", str, required=True), slip=slip)
    dfa_path = r.get("dfa", str, required=True)
    if not Path(dfa_path).exists():
        raise InputError(f"automaton file not found: {dfa_path}")
    dfa = load_dfa(dfa_path)
    demos_path = r.get("demos", str, required=True)
    if not Path(demos_path).exists():
        raise InputError(f"demonstration file not found: {demos_path}")
    demos = load_demos(demos_path, grid)
    if not demos:
        raise InputError(f"{demos_path}: no demonstrations")
    variant = r.get("variant", str, "linear")
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}: options {VARIANTS}")
    k = r.get("window", int, 7)
    hidden = r.get("hidden", _hidden, DEFAULT_HIDDEN)
    irl_cfg = _train_config(r, seed)
    loop_cfg = _loop_config(r, seed)
    out = _out_dir(r)

    product = build_product(grid, dfa)
    features = None if variant == "tabular" else product_features(product, k)
    model = make_model(
        variant, product, features, hidden=hidden, seed=derive_seed(seed, 19)
    )
    evaluator = None
    task_name = r.get("task", str, None)
    if task_name is not None:
        task = _resolve_task(task_name)
        horizon = irl_cfg.horizon or default_horizon(grid)
        phase = r.get("phase", int, 0)
        evaluator = make_evaluator(grid, task, product, loop_cfg, horizon, phase)
    model, report, _ = train(product, demos, model, irl_cfg, evaluator, features)
    save_model(model, str(out / "model.txt"))
    write_metrics(report, str(out / "metrics.csv"))
    viz.plot_training_curves([report], str(out / "training.png"))
    final_ll = report.rows[-1][1] if report.rows else float("nan")
    print(
        f"trained {variant} model: {report.updates} updates, "
        f"final loglik {final_ll:.6g}, beta {report.final_beta:.3f}, "
        f"stopped by {report.stop_reason}"
    )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    r = Resolver(args)
    seed = r.seed()
    slip = r.get("slip", float, 0.0)
    grid = _load_grid(r.get("env", str, required=True), slip=slip)
    dfa_path = r.get("dfa", str, required=True)
    if not Path(dfa_path).exists():
        raise InputError(f"automaton file not found: {dfa_path}")
    dfa = load_dfa(dfa_path)
    model_path = r.get("model", str, required=True)
    if not Path(model_path).exists():
        raise InputError(f"model file not found: {model_path}")
    model = load_model(model_path)
    task = _resolve_task(r.get("task", str, required=True))
    k = r.get("window", int, 7)
    irl_cfg = _train_config(r, seed)

    product = build_product(grid, dfa)
    if model.variant == "tabular":
        if (model.n_states, model.n_actions) != (product.n_states, product.n_actions):
            raise InputError(
                f"tabular model is {model.n_states}x{model.n_actions} but the "
                f"product is {product.n_states}x{product.n_actions}; tabular "
                "rewards only evaluate on their training environment"
            )
        features = None
    else:
        features = product_features(product, k)
        if features.shape[-1] != model.n_features:
            raise InputError(
                f"model expects {model.n_features} features, environment "
                f"yields {features.shape[-1]} (window {k}, automaton "
                f"{dfa.n_states} states)"
            )
    qtable = soft_value_iteration(product, model, irl_cfg, features)
    policy = soft_policy(qtable)
    horizon = irl_cfg.horizon or default_horizon(grid)
    rollouts = r.get("rollouts", int, 1000)
    ratio = success_ratio(grid, task, product, policy, rollouts, horizon, seed)
    out_path = r.get("out", str, None)
    if out_path is not None:
        _write_json(
            {
                "beta": ratio.beta,
                "successes": ratio.successes,
                "rollouts": ratio.rollouts,
                "horizon": ratio.horizon,
                "seed": seed,
                "env": r.get("env", str),
                "dfa": dfa_path,
                "model": model_path,
                "task": task.name,
            },
            Path(out_path),
        )
    print(
        f"beta {ratio.beta} ({ratio.successes}/{ratio.rollouts}, "
        f"horizon {ratio.horizon}, seed {seed})"
    )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    r = Resolver(args)
    seed = r.seed()
    slip = r.get("slip", float, 0.0)
    env_path = r.get("env", str, required=True)
    grid = _load_grid(env_path, slip=slip)
    if grid.start is None:
        raise InputError("environment has no start cell")
    task = _resolve_task(r.get("task", str, required=True))
    variant = r.get("variant", str, "linear")
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}: options {VARIANTS}")
    baseline = r.get("baseline", str, "none")
    if baseline not in ("none",) + BASELINES:
        raise InputError(f"unknown baseline {baseline!r}: options {BASELINES}")
    k = r.get("window", int, 7)
    hidden = r.get("hidden", _hidden, DEFAULT_HIDDEN)
    test_envs = r.get("test-envs", int, 0)
    regions = r.get("regions", int, 1)
    exact = r.get("exact", _bool, False)
    irl_cfg = _train_config(r, seed)
    loop_cfg = _loop_config(r, seed)
    out = _out_dir(r)

    viz.render_env(grid, str(out / "env.png"))
    summary: dict = {
        "task": task.name,
        "variant": variant,
        "baseline": baseline,
        "seed": seed,
        "env": env_path,
        "width": grid.width,
        "height": grid.height,
        "slip": slip,
        "kappa": loop_cfg.kappa,
        "files": {"env_figure": "env.png", "summary": "summary.json"},
    }

    if baseline == "none":
        result = run_active_irl(
            grid,
            task,
            irl_cfg,
            loop_cfg,
            variant=variant,
            k=k,
            hidden=hidden,
            exact_truth=task.dfa if exact else None,
        )
        converged = result.converged
        beta = result.beta
        dfa = result.dfa
        model = result.model
        demos = result.demos
        reports = result.reports
        summary["iterations"] = [
            {**asdict(log), "counterexample": None if log.counterexample is None
             else list(log.counterexample)}
            for log in result.logs
        ]
        summary["membership_queries"] = result.membership_queries
        summary["dfa_states"] = dfa.n_states
        if result.oracle is not None:
            result.oracle.save_log(str(out / "queries.csv"))
            summary["files"]["queries"] = "queries.csv"
    else:
        result = run_baseline(
            grid, task, baseline, irl_cfg, loop_cfg, variant=variant, k=k,
            hidden=hidden,
        )
        converged = True
        beta = result.ratio.beta
        dfa = result.automaton
        model = result.model
        demos = result.demos
        reports = [result.report]
        summary["iterations"] = []
        summary["dfa_states"] = dfa.n_states

    summary["converged"] = converged
    summary["beta"] = beta
    summary["n_demos"] = len(demos)

    save_dfa(dfa, str(out / "learned.dfa"))
    summary["files"]["dfa"] = "learned.dfa"
    if demos:
        save_demos(demos, str(out / "demos.txt"))
        summary["files"]["demos"] = "demos.txt"
    if model is not None:
        save_model(model, str(out / "model.txt"))
        summary["files"]["model"] = "model.txt"
    if reports:
        _write_phase_metrics(reports, out / "metrics.csv")
        viz.plot_training_curves(reports, str(out / "training.png"))
        summary["files"]["metrics"] = "metrics.csv"
        summary["files"]["training_figure"] = "training.png"

    if test_envs > 0 and model is not None:
        words = shortest_accepting_words(task.dfa)
        report = evaluate_on_envs(
            task,
            dfa,
            model,
            irl_cfg,
            loop_cfg,
            n_envs=test_envs,
            width=grid.width,
            height=grid.height,
            regions_per_type=regions,
            slip=slip,
            k=k,
            train_words=words,
        )
        summary["test_envs"] = {
            "count": test_envs,
            "betas": report.betas,
            "mean": report.mean,
            "std": report.std,
            "env_seeds": report.env_seeds,
            "eval_seeds": report.eval_seeds,
        }
        label = baseline if baseline != "none" else "active"
        viz.plot_test_betas(
            [label], [report.mean], [report.std], str(out / "test_betas.png"),
            per_env=[report.betas],
        )
        summary["files"]["test_figure"] = "test_betas.png"

    _write_json(summary, out / "summary.json")
    mean_note = ""
    if "test_envs" in summary:
        te = summary["test_envs"]
        mean_note = f", test mean {te['mean']:.3f} +- {te['std']:.3f}"
    print(
        f"{'converged' if converged else 'did not converge'}: "
        f"beta {beta:.3f} (kappa {loop_cfg.kappa}){mean_note}; "
        f"outputs in {out}"
    )
    return EXIT_OK if converged else EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskirl",
        description="Task-automaton inference with maximum-entropy IRL "
        "on grid navigation environments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value option file")
        p.add_argument("--seed", type=int, help="master seed (required)")

    def hyper(p: argparse.ArgumentParser) -> None:
        p.add_argument("--gamma", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--alpha-decay", action="store_true", default=None)
        p.add_argument("--vi-tol", type=float)
        p.add_argument("--vi-cap", type=int)
        p.add_argument("--eval-every", type=int)
        p.add_argument("--eps-stop", type=float)
        p.add_argument("--min-updates", type=int)
        p.add_argument("--max-updates", type=int)
        p.add_argument("--l2", type=float)
        p.add_argument("--rollouts", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--log-floor", type=float)
        p.add_argument("--window", type=int, help="feature window size k")
        p.add_argument("--hidden", type=_hidden, help="mlp sizes, e.g. 214,50")

    def loop(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kappa", type=float)
        p.add_argument("--max-outer", type=int)
        p.add_argument("--demos-per-query", type=int)
        p.add_argument("--ce-rollouts", type=int)
        p.add_argument("--ce-random-words", type=int)
        p.add_argument("--ce-max-word-len", type=int)
        p.add_argument("--demo-starts", choices=("fixed", "uniform"))

    p = sub.add_parser("gen-env", help="generate a random environment")
    common(p)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--regions", type=int, help="blocks per landmark type")
    p.add_argument("--slip", type=float)
    p.add_argument("--out", help="environment file to write")
    p.add_argument("--render", action="store_true", default=None,
                   help="also draw the grid next to the file")
    p.set_defaults(func=cmd_gen_env)

    p = sub.add_parser("learn-dfa", help="infer the automaton (exact teacher)")
    common(p)
    p.add_argument("--env")
    p.add_argument("--task", help="task1|task2|task3 or a .dfa file")
    p.add_argument("--max-outer", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_learn_dfa)

    p = sub.add_parser("train", help="fit a reward model from saved pieces")
    common(p)
    p.add_argument("--env")
    p.add_argument("--dfa", help="automaton file to build the product with")
    p.add_argument("--demos", help="demonstration file")
    p.add_argument("--task", help="ground truth for success evaluation")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--slip", type=float)
    p.add_argument("--phase", type=int,
                   help="training phase index for evaluation seeding")
    p.add_argument("--out")
    hyper(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="success ratio of a saved model")
    common(p)
    p.add_argument("--env")
    p.add_argument("--dfa")
    p.add_argument("--model")
    p.add_argument("--task")
    p.add_argument("--slip", type=float)
    p.add_argument("--out", help="optional JSON result path")
    hyper(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline on one environment")
    common(p)
    p.add_argument("--env")
    p.add_argument("--task")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--baseline", choices=("none",) + BASELINES)
    p.add_argument("--slip", type=float)
    p.add_argument("--test-envs", type=int,
                   help="evaluate on this many fresh environments")
    p.add_argument("--regions", type=int,
                   help="blocks per landmark type in test environments")
    p.add_argument("--exact", action="store_true", default=None,
                   help="fall back to exact equivalence for counterexamples")
    p.add_argument("--out")
    hyper(p)
    loop(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GridError, DfaError, PlacementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StateError, ConvergenceError) as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
