"""Command-line experiment runner.

    opbandit run <config> -o <dir> [--seed N] [--replications R] [--horizon T] [--plot]
    opbandit bounds <config> -o <dir> [--quadrature-step S] [--alpha A]
    opbandit compare <run-dir> <bounds-dir> [-o report.txt]
    opbandit list-configs

``<config>`` is a YAML file path or the name of a bundled scenario.  Exit
codes: 0 success, 1 configuration or input error, 2 a hard pull-count
envelope was violated by the compared run.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .bounds import DEFAULT_QUADRATURE_STEP, evaluate_bounds
from .config import ConfigError, ExperimentConfig, build_plan, load_config, parse_config
from .report import (
    config_dict_from_metadata,
    load_metadata,
    read_bounds_csv,
    read_results_csv,
    sha256_file,
    write_bounds_csv,
    write_metadata,
    write_regret_svg,
    write_results_csv,
)
from .simulator import run_experiment

__all__ = ["main"]


def _bundled_names() -> list[str]:
    root = resources.files("opbandit") / "configs"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def _resolve_config(arg: str) -> ExperimentConfig:
    p = Path(arg)
    if p.exists():
        return load_config(p)
    root = resources.files("opbandit") / "configs"
    candidate = root / f"{arg}.yaml"
    if candidate.is_file():
        return parse_config(yaml.safe_load(candidate.read_text(encoding="utf-8")))
    raise ConfigError(
        "config",
        f"{arg!r} is neither a file nor a bundled config (available: {', '.join(_bundled_names())})",
    )


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        changes["replications"] = args.replications
    if args.horizon is not None:
        if args.horizon < 2:
            raise ConfigError("horizon", "must be >= 2")
        changes["horizon"] = args.horizon
        if cfg.checkpoints is not None:
            pts = tuple(t for t in cfg.checkpoints if t <= args.horizon)
            if not pts or pts[-1] != args.horizon:
                pts = pts + (args.horizon,)
            changes["checkpoints"] = pts
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    plan = build_plan(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    results = run_experiment(
        plan.bandit,
        plan.load_model,
        plan.reward_model,
        plan.policies,
        cfg.horizon,
        cfg.replications,
        cfg.base_seed,
        checkpoints=plan.checkpoints,
        realized=(cfg.regret == "realized"),
    )

    csv_path = out / "results.csv"
    write_results_csv(csv_path, results, plan.bandit.n_arms)
    extras = {"results_sha256": sha256_file(csv_path)}
    if args.plot:
        svg_path = out / "regret.svg"
        write_regret_svg(svg_path, results, title=cfg.name)
        extras["plot"] = svg_path.name
    write_metadata(out / "metadata.json", cfg.to_dict(), plan.resolved, extras)

    for label, trace in results.items():
        final = trace.mean_regret[-1]
        print(f"{cfg.name}: {label}: regret(T={cfg.horizon}) = {final:.4f} "
              f"(std {trace.std_regret[-1]:.4f}, R={cfg.replications})")
    print(f"wrote {csv_path}")
    return 0


def _pick_alpha(plan, override) -> float:
    if override is not None:
        return override
    alphas = {
        info["alpha"]
        for info in plan.resolved["policies"].values()
        if info["kind"] in ("adaucb", "eadaucb") and "alpha" in info
    }
    if len(alphas) == 1:
        return alphas.pop()
    raise ConfigError(
        "policies",
        "cannot infer the bound alpha (no unique adaptive policy); pass --alpha",
    )


def _single_threshold(plan) -> float | None:
    for info in plan.resolved["policies"].values():
        if info["kind"] == "adaucb" and info.get("lower") == info.get("upper"):
            return info["lower"]
    return None


def _cmd_bounds(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    plan = build_plan(cfg)
    alpha = _pick_alpha(plan, args.alpha)
    report = evaluate_bounds(
        plan.bandit,
        plan.load_model,
        plan.reward_model,
        alpha,
        plan.checkpoints,
        single_threshold=_single_threshold(plan),
        quadrature_step=args.quadrature_step,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bounds.csv"
    write_bounds_csv(csv_path, report)
    write_metadata(
        out / "metadata.json",
        cfg.to_dict(),
        {
            "alpha": alpha,
            "params": report.params,
            "columns": sorted(report.columns),
            "constant_note": report.constant_note,
        },
        {"bounds_sha256": sha256_file(csv_path)},
    )
    print(f"wrote {csv_path} with columns: {', '.join(sorted(report.columns))}")
    return 0


def _cmd_compare(args) -> int:
    run_dir = Path(args.run)
    bounds_dir = Path(args.bounds)
    results = read_results_csv(run_dir / "results.csv")
    meta = load_metadata(run_dir / "metadata.json")
    kinds = {
        label: info.get("kind", "")
        for label, info in meta.get("resolved", {}).get("policies", {}).items()
    }
    bounds = read_bounds_csv(bounds_dir / "bounds.csv")
    ts = bounds["t"].astype(int)

    lines = []
    hard_fail = False
    for label, rec in results.items():
        run_ts = rec["t"].astype(int)
        if len(run_ts) != len(ts) or np.any(run_ts != ts):
            raise ConfigError(
                "checkpoints",
                f"run and bounds checkpoints differ for policy {label!r}",
            )
        if kinds.get(label) == "adaucb" and "pull_upper" in bounds:
            pulls2 = rec["mean_pulls_arm_2"]
            upper = bounds["pull_upper"]
            lower = bounds.get("pull_lower", np.full_like(upper, np.nan))
            for i, t in enumerate(ts):
                up_ok = pulls2[i] <= upper[i] + 1e-9
                lo_ok = np.isnan(lower[i]) or pulls2[i] >= lower[i] - 1e-9
                status = "PASS" if up_ok and lo_ok else "FAIL"
                if status == "FAIL":
                    hard_fail = True
                lo_txt = "-inf" if np.isnan(lower[i]) else f"{lower[i]:.3f}"
                lines.append(
                    f"{label} t={int(t)} pulls_arm_2={pulls2[i]:.3f} "
                    f"in [{lo_txt}, {upper[i]:.3f}]: {status}"
                )
        if "regret_log_term" in bounds:
            term = bounds["regret_log_term"]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(term > 0, rec["mean_regret"] / term, np.nan)
            finite = ratio[np.isfinite(ratio)]
            if len(finite):
                lines.append(
                    f"{label} regret/log-term ratio: last={finite[-1]:.4f} "
                    f"max={finite.max():.4f}"
                )
    lines.append(f"OVERALL: {'FAIL' if hard_fail else 'PASS'}")
    text = "\n".join(lines)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    return 2 if hard_fail else 0


def _cmd_list(args) -> int:
    for name in _bundled_names():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opbandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="config file path or bundled config name")
    p_run.add_argument("-o", "--output", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override base seed")
    p_run.add_argument("--replications", type=int, default=None, help="override replication count")
    p_run.add_argument("--horizon", type=int, default=None, help="override horizon")
    p_run.add_argument("--plot", action="store_true", help="also write regret.svg")
    p_run.set_defaults(func=_cmd_run)

    p_bounds = sub.add_parser("bounds", help="evaluate analytic envelopes for a config")
    p_bounds.add_argument("config")
    p_bounds.add_argument("-o", "--output", required=True)
    p_bounds.add_argument("--seed", type=int, default=None)
    p_bounds.add_argument("--replications", type=int, default=None)
    p_bounds.add_argument("--horizon", type=int, default=None)
    p_bounds.add_argument("--alpha", type=float, default=None, help="alpha used in the envelopes")
    p_bounds.add_argument(
        "--quadrature-step",
        type=float,
        default=DEFAULT_QUADRATURE_STEP,
        help="trapezoid step for the lower pull envelope",
    )
    p_bounds.set_defaults(func=_cmd_bounds)

    p_cmp = sub.add_parser("compare", help="check a run against evaluated envelopes")
    p_cmp.add_argument("run", help="directory written by `run`")
    p_cmp.add_argument("bounds", help="directory written by `bounds`")
    p_cmp.add_argument("-o", "--output", default=None, help="also save the verdict here")
    p_cmp.set_defaults(func=_cmd_compare)

    p_list = sub.add_parser("list-configs", help="list bundled scenario configs")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
