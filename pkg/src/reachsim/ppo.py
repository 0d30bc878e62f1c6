"""Proximal policy optimization with generalized advantage estimation over
the batch environment: actor/critic networks, clipped-surrogate updates,
the step-budget heuristic, checkpointing and periodic evaluation."""

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .environment import BatchEnv, RUNNING, SUCCESS
from .errors import ValidationError
from .metrics import MetricRecord, aggregate_rollout, evaluation_run

log = logging.getLogger(__name__)

LOG2PI = math.log(2.0 * math.pi)
SAMPLE_CLIP = 4.0  # standard-normal draws clipped to +-4 sigma


@dataclass
class HyperParams:
    num_envs: int = 64
    batch_size: int = 128  # retained for reference; minibatch size is derived
    num_minibatches: int = 8
    updates_per_batch: int = 8
    unroll_length: int = 10
    entropy_cost: float = 0.001
    discount: float = 0.97
    learning_rate: float = 3e-4
    reward_scaling: float = 0.1
    clip_epsilon: float = 0.3
    gae_lambda: float = 0.95
    total_steps: int = 1_000_000
    checkpoint_every: int = 2_000_000
    eval_every: int = 2_000_000
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def steps_per_update(self):
        return self.num_envs * self.unroll_length

    def validate(self):
        positive = (
            "num_envs", "batch_size", "num_minibatches", "updates_per_batch",
            "unroll_length", "entropy_cost", "discount", "learning_rate",
            "reward_scaling", "clip_epsilon", "gae_lambda",
            "checkpoint_every", "eval_every",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(f"hyperparameter {name} must be positive")
        if self.total_steps < 0:
            raise ValidationError("total_steps must be non-negative")
        if self.steps_per_update % self.num_minibatches != 0:
            raise ValidationError(
                "num_envs * unroll_length must be divisible by num_minibatches"
            )


# ---------------------------------------------------------------------------
# networks


def _orthogonal(rng, rows, cols, gain):
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))[None, :]
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def _build_mlp(rng, in_dim, hidden, out_dim, final_gain, dtype):
    layers = []
    prev = in_dim
    for h in hidden:
        lin = nn.Linear(prev, h)
        with torch.no_grad():
            lin.weight.copy_(torch.as_tensor(_orthogonal(rng, h, prev, math.sqrt(2.0))))
            lin.bias.zero_()
        layers += [lin, nn.Tanh()]
        prev = h
    lin = nn.Linear(prev, out_dim)
    with torch.no_grad():
        lin.weight.copy_(torch.as_tensor(_orthogonal(rng, out_dim, prev, final_gain)))
        lin.bias.zero_()
    net = nn.Sequential(*layers)
    net.append(lin)
    return net.to(dtype)


class ActorCritic(nn.Module):
    """Actor emits pre-squash Gaussian means (logistic-squashed to (0,1))
    plus state-independent log-stds; critic emits a scalar value."""

    ACTOR_HIDDEN = (128, 128, 128, 128)
    CRITIC_HIDDEN = (256, 256, 256, 256, 256)

    def __init__(
        self, obs_dim, act_dim, seed=0, dtype=torch.float32,
        actor_hidden=None, critic_hidden=None,
    ):
        super().__init__()
        if obs_dim <= 0 or act_dim <= 0:
            raise ValidationError("network dims must be positive")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.dtype_t = dtype
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        actor_hidden = self.ACTOR_HIDDEN if actor_hidden is None else actor_hidden
        critic_hidden = self.CRITIC_HIDDEN if critic_hidden is None else critic_hidden
        self.actor = _build_mlp(rng, obs_dim, actor_hidden, act_dim, 0.01, dtype)
        self.critic = _build_mlp(rng, obs_dim, critic_hidden, 1, 0.05, dtype)
        self.log_std = nn.Parameter(torch.full((act_dim,), -1.0, dtype=dtype))

    def policy_stats(self, obs):
        mu = self.actor(obs)
        std = torch.exp(self.log_std)
        return mu, std.expand_as(mu)

    def value(self, obs):
        return self.critic(obs).squeeze(-1)

    def log_prob(self, u, mu, std):
        z = (u - mu) / std
        return (-0.5 * z * z - torch.log(std) - 0.5 * LOG2PI).sum(-1)

    def entropy(self):
        return (0.5 * (1.0 + LOG2PI) + self.log_std).sum()

    def act(self, obs, generator=None, deterministic=False):
        """Sample pre-squash u and return (u, logistic(u), log-prob of u)."""
        mu, std = self.policy_stats(obs)
        if deterministic:
            u = mu
        else:
            z = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
            u = mu + std * z.clamp_(-SAMPLE_CLIP, SAMPLE_CLIP)
        return u, torch.sigmoid(u), self.log_prob(u, mu, std)


def init_params(obs_dim, act_dim, seed, dtype=torch.float32):
    return ActorCritic(obs_dim, act_dim, seed=seed, dtype=dtype)


def make_policy_fn(net, generator=None):
    """Adapt a network to the evaluation-run policy interface."""

    def policy(obs, deterministic=True):
        with torch.no_grad():
            o = torch.as_tensor(np.asarray(obs)[None, :], dtype=net.dtype_t)
            _, action, _ = net.act(o, generator, deterministic)
        return action[0].numpy().astype(np.float64)

    return policy


# ---------------------------------------------------------------------------
# advantage estimation


def gae(rewards, values, dones, discount, lam):
    """Backward GAE recursion.

    rewards, dones: (T, N); values: (T+1, N) with the bootstrap row last.
    Returns (advantages, return targets), both (T, N). Episode boundaries
    (dones) zero both the bootstrap and the advantage carry.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    t_len, n = rewards.shape
    if values.shape != (t_len + 1, n) or dones.shape != (t_len, n):
        raise ValidationError("gae: misaligned shapes")
    adv = np.zeros_like(rewards)
    carry = np.zeros(n)
    for t in range(t_len - 1, -1, -1):
        nonterm = 1.0 - dones[t]
        delta = rewards[t] + discount * values[t + 1] * nonterm - values[t]
        carry = delta + discount * lam * nonterm * carry
        adv[t] = carry
    return adv, adv + values[:-1]


# ---------------------------------------------------------------------------
# rollout collection


@dataclass
class RolloutBuffer:
    observations: torch.Tensor  # (T, N, obs_dim)
    pre_actions: torch.Tensor  # (T, N, A) pre-squash samples
    log_probs: torch.Tensor  # (T, N)
    rewards: np.ndarray  # (T, N) scaled
    dones: np.ndarray  # (T, N)
    values: np.ndarray  # (T+1, N)
    advantages: np.ndarray = None
    returns: np.ndarray = None

    @property
    def n_steps(self):
        return self.rewards.shape[0] * self.rewards.shape[1]


_COMPONENTS = ("distance", "subtask", "completion", "effort", "total")


class RolloutCollector:
    """Drives a BatchEnv and accumulates per-lane episode statistics across
    rollout windows (episodes rarely align with unroll boundaries)."""

    def __init__(self, batch_env):
        self.env = batch_env
        n = batch_env.n
        self._comp = np.zeros((n, len(_COMPONENTS)))
        self._steps = np.zeros(n, dtype=np.int64)
        self.obs = batch_env.observations()

    def rollout(self, net, hyper, generator, deterministic=False):
        t_len, n = hyper.unroll_length, self.env.n
        obs_buf = torch.empty((t_len, n, net.obs_dim), dtype=net.dtype_t)
        u_buf = torch.empty((t_len, n, net.act_dim), dtype=net.dtype_t)
        logp_buf = torch.empty((t_len, n), dtype=net.dtype_t)
        rewards = np.zeros((t_len, n))
        dones = np.zeros((t_len, n))
        values = np.zeros((t_len + 1, n))
        episodes = []

        for t in range(t_len):
            obs_t = torch.as_tensor(self.obs, dtype=net.dtype_t)
            with torch.no_grad():
                u, action, logp = net.act(obs_t, generator, deterministic)
                values[t] = net.value(obs_t).numpy()
            obs_buf[t] = obs_t
            u_buf[t] = u
            logp_buf[t] = logp
            results = self.env.step(action.numpy().astype(np.float64))
            next_obs = np.empty_like(self.obs)
            timeouts = []  # (lane, terminal observation) for value bootstrap
            for i, r in enumerate(results):
                br = r.reward
                self._comp[i] += (
                    br.distance_term, br.subtask_term, br.completion_term,
                    br.effort_term, br.total,
                )
                self._steps[i] += 1
                rewards[t, i] = br.total * hyper.reward_scaling
                if r.done != RUNNING:
                    dones[t, i] = 1.0
                    if r.done == "timeout":
                        timeouts.append((i, r.info["terminal_observation"]))
                    episodes.append(
                        {
                            "success": r.done == SUCCESS,
                            "completed_flags": r.info["completed_flags"],
                            "length_steps": int(self._steps[i]),
                            "duration": r.info["episode_time"],
                            "terminal_distance": r.info["terminal_distance"],
                            "components": dict(zip(_COMPONENTS, self._comp[i])),
                        }
                    )
                    self._comp[i] = 0.0
                    self._steps[i] = 0
                next_obs[i] = r.observation
            if timeouts:
                # time limits are not real task terminations: fold the value
                # of the state the clock cut off into that step's reward
                term = torch.as_tensor(
                    np.stack([o for _, o in timeouts]), dtype=net.dtype_t
                )
                with torch.no_grad():
                    term_v = net.value(term).numpy()
                for (i, _), v in zip(timeouts, term_v):
                    rewards[t, i] += hyper.discount * float(v)
            self.obs = next_obs

        with torch.no_grad():
            values[t_len] = net.value(torch.as_tensor(self.obs, dtype=net.dtype_t)).numpy()
        buffer = RolloutBuffer(
            observations=obs_buf, pre_actions=u_buf, log_probs=logp_buf,
            rewards=rewards, dones=dones, values=values,
        )
        return buffer, episodes


# ---------------------------------------------------------------------------
# updates


def ppo_loss(net, obs, u, old_logp, adv, returns, hyper):
    """Minimized objective: -clipped surrogate + 0.5*value MSE - entropy bonus."""
    mu, std = net.policy_stats(obs)
    logp = net.log_prob(u, mu, std)
    ratio = torch.exp(logp - old_logp)
    eps = hyper.clip_epsilon
    surrogate = torch.minimum(
        ratio * adv, torch.clamp(ratio, 1.0 - eps, 1.0 + eps) * adv
    ).mean()
    value = net.value(obs)
    value_mse = ((value - returns) ** 2).mean()
    entropy = net.entropy()
    loss = -surrogate + 0.5 * value_mse - hyper.entropy_cost * entropy
    return loss, {
        "policy_loss": -surrogate.item(),
        "value_loss": value_mse.item(),
        "entropy": entropy.item(),
        "total_loss": loss.item(),
    }


def normalize_advantages(adv):
    """Zero-mean, unit-std (population) normalization over the whole update."""
    return (adv - adv.mean()) / (adv.std(unbiased=False) + 1e-8)


def ppo_update(net, optimizer, buffer, hyper, generator):
    """Shuffled-minibatch PPO passes over one rollout buffer.

    Returns (ok, mean loss diagnostics). A non-finite loss aborts the whole
    update and restores the pre-update parameters.
    """
    t_len, n = buffer.rewards.shape
    total = t_len * n
    obs = buffer.observations.reshape(total, -1)
    u = buffer.pre_actions.reshape(total, -1)
    old_logp = buffer.log_probs.reshape(total)
    adv = normalize_advantages(
        torch.as_tensor(buffer.advantages.reshape(total), dtype=net.dtype_t)
    )
    returns = torch.as_tensor(buffer.returns.reshape(total), dtype=net.dtype_t)
    mb = total // hyper.num_minibatches

    snapshot = {k: v.detach().clone() for k, v in net.state_dict().items()}
    sums = {}
    count = 0
    for _ in range(hyper.updates_per_batch):
        perm = torch.randperm(total, generator=generator)
        for k in range(hyper.num_minibatches):
            idx = perm[k * mb : (k + 1) * mb]
            loss, parts = ppo_loss(
                net, obs[idx], u[idx], old_logp[idx], adv[idx], returns[idx], hyper
            )
            if not torch.isfinite(loss):
                net.load_state_dict(snapshot)
                log.warning("non-finite loss; update aborted")
                return False, parts
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            for name, v in parts.items():
                sums[name] = sums.get(name, 0.0) + v
            count += 1
    return True, {name: v / count for name, v in sums.items()}


# ---------------------------------------------------------------------------
# budget heuristic


def recommended_steps(
    task,
    base=18_000_000,
    per_target=1_000_000,
    per_dwell=1_000_000,
    desk_multiplier=0.25,
):
    """Step budget: base, plus per_target for each subtask beyond the first,
    plus per_dwell for each full 0.3 s of total dwell time, all scaled by
    the desk multiplier."""
    if base <= 0 or per_target <= 0 or per_dwell <= 0 or desk_multiplier <= 0:
        raise ValidationError("recommended_steps arguments must be positive")
    n = task.n_subtasks
    dwell_increments = int(math.floor(task.total_dwell / 0.3 + 1e-9))
    return int(
        round(desk_multiplier * (base + per_target * (n - 1) + per_dwell * dwell_increments))
    )


# ---------------------------------------------------------------------------
# checkpoint glue


def _config_text(config, hyper):
    from . import configio

    return configio.serialize_run_config(config, hyper)


def make_checkpoint(net, optimizer, generator, step, config, hyper, status="ok"):
    arrays = {f"net.{k}": v.detach().numpy() for k, v in net.state_dict().items()}
    adam_steps = {}
    for idx, st in optimizer.state_dict()["state"].items():
        arrays[f"opt.{idx}.exp_avg"] = st["exp_avg"].numpy()
        arrays[f"opt.{idx}.exp_avg_sq"] = st["exp_avg_sq"].numpy()
        adam_steps[str(idx)] = int(st["step"])
    extra = {
        "adam_steps": adam_steps,
        "torch_rng": generator.get_state().numpy().tobytes().hex(),
        "obs_dim": net.obs_dim,
        "act_dim": net.act_dim,
        "status": status,
    }
    return Checkpoint(
        step=step, config_text=_config_text(config, hyper), arrays=arrays, extra=extra
    )


def restore_from_checkpoint(ckpt, net, optimizer=None, generator=None):
    state = {
        k[len("net.") :]: torch.as_tensor(v)
        for k, v in ckpt.arrays.items()
        if k.startswith("net.")
    }
    net.load_state_dict(state)
    if optimizer is not None and ckpt.extra.get("adam_steps"):
        opt_sd = optimizer.state_dict()
        opt_state = {}
        for key, step_count in ckpt.extra["adam_steps"].items():
            idx = int(key)
            opt_state[idx] = {
                "step": torch.tensor(float(step_count)),
                "exp_avg": torch.as_tensor(ckpt.arrays[f"opt.{idx}.exp_avg"]),
                "exp_avg_sq": torch.as_tensor(ckpt.arrays[f"opt.{idx}.exp_avg_sq"]),
            }
        opt_sd["state"] = opt_state
        optimizer.load_state_dict(opt_sd)
    if generator is not None and ckpt.extra.get("torch_rng"):
        raw = bytes.fromhex(ckpt.extra["torch_rng"])
        generator.set_state(torch.tensor(list(raw), dtype=torch.uint8))


def policy_from_checkpoint(ckpt):
    """Rebuild the network (and the environment config) stored in a checkpoint."""
    from . import configio

    config, hyper = configio.parse_run_config(ckpt.config_text)
    net = init_params(ckpt.extra["obs_dim"], ckpt.extra["act_dim"], seed=0)
    restore_from_checkpoint(ckpt, net)
    return net, config, hyper


# ---------------------------------------------------------------------------
# training loop


def train(
    config,
    hyper,
    sink=None,
    run_dir=None,
    resume=None,
    stop_event=None,
    eval_episodes=50,
    target_success=None,
    run_id="",
    n_workers=1,
    on_phase=None,
):
    """Rollout / GAE / update loop until the step budget.

    Emits per-update metric records from the training rollouts, runs
    isolated evaluations every eval_every steps, writes checkpoints every
    checkpoint_every steps and at completion, and resumes from a prior
    checkpoint (path or Checkpoint). Three aborted updates flag the run
    Unstable and terminate it. Returns the final Checkpoint.
    """
    import os

    generator = torch.Generator().manual_seed(hyper.seed)
    net = init_params(config.obs_dim, config.model.actuator_count, hyper.seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=hyper.learning_rate)
    step = 0
    if resume is not None:
        ckpt = load_checkpoint(resume) if isinstance(resume, (str, os.PathLike)) else resume
        restore_from_checkpoint(ckpt, net, optimizer, generator)
        step = ckpt.step

    env_config = replace(config, seed=config.seed + step) if step else config
    batch = BatchEnv(env_config, hyper.num_envs, n_workers=n_workers)
    collector = RolloutCollector(batch)
    n_sub = config.task.n_subtasks
    strikes = 0
    status = "ok"
    last_eval = step
    last_ckpt = step

    def run_eval(at_step):
        if on_phase is not None:
            on_phase("evaluating", at_step)
        report, _ = evaluation_run(
            make_policy_fn(net), config, eval_episodes, seed=hyper.seed + at_step
        )
        if sink is not None:
            sink.emit(MetricRecord(at_step, "eval_success_rate", report.success_rate, run_id))
            sink.emit(
                MetricRecord(
                    at_step, "eval_terminal_distance",
                    report.mean_terminal_distance, run_id,
                )
            )
        if run_dir is not None:
            with open(os.path.join(run_dir, f"eval_{at_step}.json"), "w") as fh:
                fh.write(report.to_json())
            with open(os.path.join(run_dir, "eval_latest.json"), "w") as fh:
                fh.write(report.to_json())
        if on_phase is not None:
            on_phase("training", at_step)
        return report

    while step < hyper.total_steps:
        if stop_event is not None and stop_event.is_set():
            status = "stopped"
            break
        buffer, episodes = collector.rollout(net, hyper, generator)
        buffer.advantages, buffer.returns = gae(
            buffer.rewards, buffer.values, buffer.dones,
            hyper.discount, hyper.gae_lambda,
        )
        ok, diag = ppo_update(net, optimizer, buffer, hyper, generator)
        step += hyper.steps_per_update
        if not ok:
            strikes += 1
            if strikes >= 3:
                status = "unstable"
                log.error("run flagged Unstable after 3 aborted updates")
                break
            continue
        if sink is not None:
            sink.emit_many(aggregate_rollout(episodes, step, n_sub, run_id))
            for name, v in diag.items():
                sink.emit(MetricRecord(step, name, v, run_id))
        if step - last_eval >= hyper.eval_every:
            last_eval = step
            report = run_eval(step)
            if target_success is not None and report.success_rate >= target_success:
                status = "early_stop"
                break
        if run_dir is not None and step - last_ckpt >= hyper.checkpoint_every:
            last_ckpt = step
            ckpt = make_checkpoint(net, optimizer, generator, step, config, hyper)
            save_checkpoint(os.path.join(run_dir, f"ckpt_{step}.bin"), ckpt)

    final = make_checkpoint(net, optimizer, generator, step, config, hyper, status=status)
    if run_dir is not None:
        save_checkpoint(os.path.join(run_dir, "checkpoint_final.bin"), final)
        run_eval(step)
    return final
