"""Command-line interface: validate, train, eval, fitts, scenarios, serve."""

import json
import os
import sys
import threading

import click
import numpy as np

from . import configio
from .checkpoint import load_checkpoint
from .errors import ValidationError


@click.group()
def main():
    """Muscle-arm interaction task prototyping toolkit."""


def _load_saved(config_arg):
    try:
        return configio.load_config(config_arg)
    except (ValidationError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.argument("config")
def validate(config):
    """Validate a config file or bundled scenario name."""
    if os.path.exists(config):
        with open(config, encoding="utf-8") as fh:
            violations = configio.validate_config(fh.read())
    else:
        violations = configio.validate_config(_load_saved(config))
    if violations:
        for v in violations:
            click.echo(f"violation: {v}")
        sys.exit(1)
    click.echo("ok")


@main.command()
@click.argument("config")
@click.option("--budget", type=int, default=None, help="Total env steps (default: from config/heuristic).")
@click.option("--seed", type=int, default=None, help="Training seed override.")
@click.option("--resume", "resume_path", default=None, help="Checkpoint to resume from.")
@click.option("--run-dir", default="run", help="Directory for metrics/checkpoints/evals.")
@click.option("--num-envs", type=int, default=None, help="Parallel environment instances.")
@click.option("--eval-episodes", type=int, default=50)
@click.option("--eval-every", type=int, default=None, help="Steps between evaluations.")
@click.option("--target-success", type=float, default=None,
              help="Stop early once an evaluation reaches this success rate.")
@click.option("--max-minutes", type=float, default=None,
              help="Wall-clock limit; the run stops cleanly with a checkpoint.")
@click.option("--workers", type=int, default=1, help="Environment worker threads.")
@click.option("--entropy-cost", type=float, default=None, help="Entropy bonus override.")
@click.option("--learning-rate", type=float, default=None, help="Learning rate override.")
def train(config, budget, seed, resume_path, run_dir, num_envs, eval_episodes,
          eval_every, target_success, max_minutes, workers, entropy_cost,
          learning_rate):
    """Train a policy on CONFIG (path or bundled scenario name)."""
    import torch

    from . import ppo
    from .metrics import MetricsSink

    torch.set_num_threads(max(1, workers))
    saved = _load_saved(config)
    violations = configio.validate_config(saved)
    if violations:
        raise click.ClickException("; ".join(violations))
    hyper = saved.hyper
    updates = {}
    if budget is not None:
        updates["total_steps"] = budget
    if seed is not None:
        updates["seed"] = seed
    if num_envs is not None:
        updates["num_envs"] = num_envs
    if eval_every is not None:
        updates["eval_every"] = eval_every
    if entropy_cost is not None:
        updates["entropy_cost"] = entropy_cost
    if learning_rate is not None:
        updates["learning_rate"] = learning_rate
    if updates:
        from dataclasses import replace

        hyper = replace(hyper, **updates)
    os.makedirs(run_dir, exist_ok=True)
    sink = MetricsSink(os.path.join(run_dir, "metrics.jsonl"), run_id=saved.name)
    stop_event = threading.Event()
    timer = None
    if max_minutes is not None:
        timer = threading.Timer(max_minutes * 60.0, stop_event.set)
        timer.daemon = True
        timer.start()
    final = ppo.train(
        saved.config, hyper, sink=sink, run_dir=run_dir,
        resume=resume_path, stop_event=stop_event,
        eval_episodes=eval_episodes, target_success=target_success,
        run_id=saved.name, n_workers=workers,
    )
    sink.close()
    if timer is not None:
        timer.cancel()
    click.echo(
        f"done: step={final.step} status={final.extra['status']} "
        f"checkpoint={os.path.join(run_dir, 'checkpoint_final.bin')}"
    )


@main.command("eval")
@click.argument("ckpt")
@click.option("--episodes", type=int, default=50)
@click.option("--seed", type=int, default=0)
@click.option("--deterministic/--stochastic", default=True)
@click.option("--trajectories", "traj_path", default=None,
              help="Write trajectory JSONL for each episode to this file.")
@click.option("--out", default=None, help="Write the EvalReport JSON here.")
def eval_cmd(ckpt, episodes, seed, deterministic, traj_path, out):
    """Evaluate a checkpoint and print its EvalReport."""
    import torch

    from . import ppo
    from .metrics import evaluation_run

    torch.set_num_threads(1)
    net, config, _ = ppo.policy_from_checkpoint(load_checkpoint(ckpt))
    gen = torch.Generator().manual_seed(seed)
    report, trajs = evaluation_run(
        ppo.make_policy_fn(net, gen), config, episodes, seed=seed,
        deterministic=deterministic, record_trajectories=traj_path is not None,
    )
    if traj_path:
        with open(traj_path, "w", encoding="utf-8") as fh:
            for traj in trajs:
                fh.write(json.dumps(traj) + "\n")
    text = report.to_json()
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    click.echo(text)


@main.command()
@click.argument("ckpt")
@click.option("--reaches-per-cell", type=int, default=12)
@click.option("--seed", type=int, default=0)
@click.option("--out-prefix", default="fitts", help="Prefix for CSV/JSON outputs.")
def fitts(ckpt, reaches_per_cell, seed, out_prefix):
    """Run the Fitts'-Law motion battery on a trained checkpoint."""
    import torch

    from . import motion, ppo

    torch.set_num_threads(1)
    net, config, _ = ppo.policy_from_checkpoint(load_checkpoint(ckpt))
    result = motion.fitts_battery(
        ppo.make_policy_fn(net), config, reaches_per_cell=reaches_per_cell, seed=seed
    )
    with open(f"{out_prefix}_points.csv", "w", encoding="utf-8") as fh:
        fh.write(motion.fitts_points_csv(result["points"]))
    summary = {
        "n_reaches": len(result["points"]),
        "n_cells": len(result["per_cell"]),
        "fit": None,
        "motion": {
            "n_reaches": len(result["motion"]),
            "submovements_1_or_2": (
                float(
                    np.mean(
                        [1.0 if 1 <= s["submovements"] <= 2 else 0.0 for s in result["motion"]]
                    )
                )
                if result["motion"]
                else None
            ),
            "peak_in_first_60pct": (
                float(np.mean([1.0 if s["peak_fraction"] <= 0.6 else 0.0 for s in result["motion"]]))
                if result["motion"]
                else None
            ),
        },
    }
    if result["fit"] is not None:
        a, b, r2 = result["fit"]
        summary["fit"] = {"a": a, "b": b, "r_squared": r2}
    with open(f"{out_prefix}_fit.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    click.echo(json.dumps(summary, indent=2))


@main.group()
def scenarios():
    """Bundled scenario library."""


@scenarios.command("list")
def scenarios_list():
    for name, saved in configio.list_scenarios().items():
        task = saved.config.task
        click.echo(
            f"{name}: {task.n_subtasks} subtasks, "
            f"budget {saved.hyper.total_steps:,} steps"
        )


@scenarios.command("export")
@click.argument("name")
@click.option("--out", default=None, help="Output path (default: <name>.cfg).")
def scenarios_export(name, out):
    all_scen = configio.list_scenarios()
    if name not in all_scen:
        raise click.ClickException(
            f"unknown scenario {name!r}; choices: {', '.join(sorted(all_scen))}"
        )
    path = out or f"{name}.cfg"
    configio.save_config(all_scen[name], path)
    click.echo(path)


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
def serve(port, host):
    """Start the HTTP API (serves the dashboard backend)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
