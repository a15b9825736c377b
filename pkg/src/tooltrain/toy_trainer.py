"""Desk-scale training demonstrations.

Two demos live here:

* a tabular categorical policy over a synthetic function-calling task,
  optimized with the clipped group-relative objective against the real
  reward pipeline (the policy renders template text, the scorer parses it);
* a distillation-dynamics fit of free student logits against fixed teacher
  top-k distributions, tracking escape mass and entropy per step.

The policy emits structurally valid template text by construction, so its
format reward is always 1 and the learning signal varies only through the
answer term. One decision trajectory is: choose a function, then for each of
its parameters choose a domain value (or the explicit omit action when the
parameter is optional). The log-probability of a trajectory is the sum of
the chosen slots' log-softmax entries, which makes the objective gradient
with respect to the slot tables exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import divergence as dv
from .chat_format import ToolCall
from .grpo import (
    GrpoConfig,
    Rollout,
    RolloutGroup,
    filter_homogeneous,
    grpo_objective,
    standardize_advantages,
)
from .reward import total_reward
from .toy_task import ToyTask, render_call_text

OMIT = "<omit>"


@dataclass(frozen=True)
class ToyTrainConfig:
    group_size: int = 8
    learning_rate: float = 2.0
    epsilon: float = 0.2
    beta: float = 1e-3
    filter_groups: bool = True
    reward_mode: str = "sim"  # "sim" or "binary"

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.reward_mode not in ("sim", "binary"):
            raise ValueError("reward_mode must be 'sim' or 'binary'")

    def grpo(self) -> GrpoConfig:
        return GrpoConfig(epsilon=self.epsilon, beta=self.beta,
                          filter_homogeneous=self.filter_groups)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ToyTrainConfig":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class TrainLog:
    """Per-iteration curves; mean_reward is always on the graded scale."""

    mean_reward: list[float] = field(default_factory=list)
    mean_entropy: list[float] = field(default_factory=list)
    filtered_fraction: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.mean_reward)

    def trailing_mean_reward(self, window: int = 50) -> float:
        tail = self.mean_reward[-window:]
        return float(np.mean(tail)) if tail else float("nan")

    def to_csv(self, path: str | Path) -> None:
        lines = ["iteration,mean_reward,mean_entropy,filtered_fraction"]
        for it, (r, h, f) in enumerate(zip(self.mean_reward, self.mean_entropy,
                                           self.filtered_fraction)):
            lines.append(f"{it},{r!r},{h!r},{f!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Decision:
    slot: tuple
    action: int


@dataclass
class Trajectory:
    decisions: list[Decision]
    text: str
    reward: float            # training reward (graded or binary)
    graded_reward: float     # graded reward regardless of mode


class ToyPolicy:
    """Dense per-prompt logit tables over the task's decision slots.

    Slot keys are ``(prompt_id, "fn")`` for the function choice and
    ``(prompt_id, "arg", function_name, param_name)`` for each value choice.
    Optional parameters carry one extra trailing action that omits them.
    Tables start at zero (a uniform policy); the initial tables are kept as
    the frozen reference for the KL penalty.
    """

    def __init__(self, task: ToyTask):
        self.task = task
        self.tables: dict[tuple, np.ndarray] = {}
        for prompt in task.prompts:
            pid = prompt.prompt_id
            self.tables[(pid, "fn")] = np.zeros(len(task.schema.functions))
            for fdef in task.schema.functions:
                for pname in fdef.parameters:
                    size = len(task.domains[fdef.name][pname])
                    if fdef.parameters[pname].has_default:
                        size += 1
                    self.tables[(pid, "arg", fdef.name, pname)] = np.zeros(size)
        self.ref_tables = {k: v.copy() for k, v in self.tables.items()}

    def actions(self, slot: tuple) -> list[Any]:
        """Domain values of a slot; optional-parameter slots end with OMIT."""
        if slot[1] == "fn":
            return [f.name for f in self.task.schema.functions]
        _, _, fname, pname = slot
        values = list(self.task.domains[fname][pname])
        if self.task.schema.get(fname).parameters[pname].has_default:
            values.append(OMIT)
        return values

    def sample_trajectory(self, prompt_id: str,
                          rng: np.random.Generator) -> tuple[list[Decision], ToolCall]:
        fn_slot = (prompt_id, "fn")
        probs = dv.softmax(self.tables[fn_slot])
        fn_action = int(rng.choice(probs.size, p=probs))
        decisions = [Decision(fn_slot, fn_action)]
        fdef = self.task.schema.functions[fn_action]
        arguments: dict[str, Any] = {}
        for pname in fdef.parameters:
            slot = (prompt_id, "arg", fdef.name, pname)
            probs = dv.softmax(self.tables[slot])
            action = int(rng.choice(probs.size, p=probs))
            decisions.append(Decision(slot, action))
            value = self.actions(slot)[action]
            if value is not OMIT:
                arguments[pname] = value
        return decisions, ToolCall(fdef.name, arguments)

    def logps(self, decisions: Iterable[Decision],
              tables: dict[tuple, np.ndarray] | None = None) -> np.ndarray:
        """Per-decision log-probabilities under the given tables."""
        tables = self.tables if tables is None else tables
        out = []
        for d in decisions:
            z = tables[d.slot]
            out.append(z[d.action] - _logsumexp(z))
        return np.array(out, dtype=np.float64)

    def mean_entropy(self) -> float:
        return float(np.mean([dv.entropy(dv.softmax(z))
                              for z in self.tables.values()]))


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def render_trajectory(call: ToolCall) -> str:
    return render_call_text("select the matching tool", [call])


def _score(task: ToyTask, prompt_id: str, text: str) -> float:
    return total_reward(text, task.prompt(prompt_id).ground_truth, task.schema).total


def sample_group(policy: ToyPolicy, prompt_id: str, group_size: int,
                 rng: np.random.Generator,
                 reward_mode: str = "sim") -> tuple[RolloutGroup, list[Trajectory]]:
    """Sample a rollout group and keep the decision paths for the update.

    At sampling time logp_old equals logp_new; logp_ref comes from the frozen
    initial tables.
    """
    rollouts = []
    trajectories = []
    for _ in range(group_size):
        decisions, call = policy.sample_trajectory(prompt_id, rng)
        text = render_trajectory(call)
        graded = _score(policy.task, prompt_id, text)
        reward = graded if reward_mode == "sim" else (1.0 if graded == 1.0 else -1.0)
        logp = policy.logps(decisions)
        rollouts.append(Rollout(logp_new=logp, logp_old=logp.copy(),
                                logp_ref=policy.logps(decisions, policy.ref_tables),
                                reward=reward))
        trajectories.append(Trajectory(decisions=decisions, text=text,
                                       reward=reward, graded_reward=graded))
    return RolloutGroup(prompt_id=prompt_id, rollouts=rollouts), trajectories


def rollout(policy: ToyPolicy, prompt_id: str, group_size: int,
            rng_seed: int) -> RolloutGroup:
    """Seeded rollout group; byte-identical across repeated invocations."""
    rng = np.random.default_rng(rng_seed)
    group, _ = sample_group(policy, prompt_id, group_size, rng)
    return group


@dataclass
class GroupSample:
    group: RolloutGroup
    trajectories: list[Trajectory]
    advantages: np.ndarray


def objective_and_gradient(policy: ToyPolicy, samples: list[GroupSample],
                           cfg: GrpoConfig) -> tuple[float, dict[tuple, np.ndarray]]:
    """Mean clipped objective over groups and its exact slot-table gradient.

    Each token's contribution to the gradient of the objective J with respect
    to its slot logits z is

        c * (onehot(action) - softmax(z)),
        c = (A * r * [unclipped branch active] - beta * (logp_new - logp_ref))
            / (n_groups * G * T_i)

    where the unclipped branch of min(r*A, clip(r)*A) is active for A >= 0
    when r <= 1 + eps and for A < 0 when r >= 1 - eps.
    """
    grads = {key: np.zeros_like(z) for key, z in policy.tables.items()}
    value = 0.0
    n_groups = len(samples)
    for sample in samples:
        group_rollouts = []
        for traj, rollout_rec in zip(sample.trajectories, sample.group.rollouts):
            logp_new = policy.logps(traj.decisions)
            group_rollouts.append(Rollout(
                logp_new=logp_new, logp_old=rollout_rec.logp_old,
                logp_ref=rollout_rec.logp_ref, reward=rollout_rec.reward))
        live = RolloutGroup(sample.group.prompt_id, group_rollouts)
        report = grpo_objective(live, sample.advantages, cfg)
        value += report.value / n_groups

        for i, (traj, roll) in enumerate(zip(sample.trajectories, group_rollouts)):
            adv = sample.advantages[i]
            ratio = np.exp(roll.logp_new - roll.logp_old)
            tokens = len(traj.decisions)
            for t, decision in enumerate(traj.decisions):
                r = ratio[t]
                active = (adv >= 0 and r <= 1.0 + cfg.epsilon) or \
                    (adv < 0 and r >= 1.0 - cfg.epsilon)
                coef = (adv * r if active else 0.0) \
                    - cfg.beta * (roll.logp_new[t] - roll.logp_ref[t])
                coef /= n_groups * len(sample.trajectories) * tokens
                z = policy.tables[decision.slot]
                probs = dv.softmax(z)
                grads[decision.slot] -= coef * probs
                grads[decision.slot][decision.action] += coef
    return value, grads


def train_sim_rl(task: ToyTask, cfg: ToyTrainConfig, iterations: int,
                 seed: int) -> tuple[ToyPolicy, TrainLog]:
    """Optimize a fresh tabular policy with one plain ascent step per batch.

    Each iteration samples one group per prompt from a single sequential
    seeded generator, drops homogeneous groups, standardizes the surviving
    rewards, and ascends the clipped objective. Identical (task, cfg, seed)
    reproduce the log exactly.
    """
    rng = np.random.default_rng(seed)
    policy = ToyPolicy(task)
    grpo_cfg = cfg.grpo()
    log = TrainLog()
    for _ in range(iterations):
        samples: list[GroupSample] = []
        graded: list[float] = []
        groups = []
        by_id = {}
        for prompt in task.prompts:
            group, trajectories = sample_group(policy, prompt.prompt_id,
                                               cfg.group_size, rng, cfg.reward_mode)
            graded.extend(t.graded_reward for t in trajectories)
            groups.append(group)
            by_id[prompt.prompt_id] = trajectories
        survivors = filter_homogeneous(groups) if grpo_cfg.filter_homogeneous else groups
        for group in survivors:
            samples.append(GroupSample(
                group=group,
                trajectories=by_id[group.prompt_id],
                advantages=standardize_advantages(group.rewards()),
            ))
        if samples:
            _, grads = objective_and_gradient(policy, samples, grpo_cfg)
            for key, grad in grads.items():
                policy.tables[key] += cfg.learning_rate * grad
        log.mean_reward.append(float(np.mean(graded)))
        log.mean_entropy.append(policy.mean_entropy())
        log.filtered_fraction.append(1.0 - len(survivors) / len(groups))
    return policy, log


def evaluate_policy(policy: ToyPolicy, task: ToyTask, samples_per_prompt: int,
                    seed: int) -> float:
    """Mean graded reward of freshly sampled trajectories."""
    rng = np.random.default_rng(seed)
    scores = []
    for prompt in task.prompts:
        for _ in range(samples_per_prompt):
            _, call = policy.sample_trajectory(prompt.prompt_id, rng)
            scores.append(_score(task, prompt.prompt_id, render_trajectory(call)))
    return float(np.mean(scores))


# --- distillation-dynamics demo ---------------------------------------------

KD_LOSS_KINDS = ("fkl", "rkl", "rkl-stab", "ckd")


@dataclass
class KdCurves:
    """Step-indexed means over positions; index 0 is the initial state."""

    escape_mass: np.ndarray
    entropy: np.ndarray


def adversarial_teacher_family(positions: int = 8, vocab_size: int = 32,
                               k: int = 4, seed: int = 7) -> list[dv.TopKDistribution]:
    """Teacher tops that trip the masked reverse KL.

    Each position concentrates mass on one token but keeps a near-zero
    probability on its k-th entry; the masked objective then pays to move
    student mass outside the top-k set entirely.
    """
    if not 2 <= k <= vocab_size:
        raise ValueError("need 2 <= k <= vocab_size")
    middle = np.full(k - 2, 0.08 / (k - 2)) if k > 2 else np.empty(0)
    profile = np.concatenate([[0.90], middle, [0.0005]])
    rng = np.random.default_rng(seed)
    family = []
    for _ in range(positions):
        idx = rng.choice(vocab_size, size=k, replace=False)
        family.append(dv.TopKDistribution(indices=idx, probs=profile.copy()))
    return family


def _kd_loss(kind: str, teacher: dv.TopKDistribution, z: np.ndarray, m: int,
             lambda_tail: float) -> dv.LossReport:
    if kind == "fkl":
        return dv.fkl_topk(teacher, z)
    if kind == "rkl":
        return dv.rkl_topk_masked(teacher, z)
    if kind == "rkl-stab":
        return dv.rkl_topk_stabilized(teacher, z, m, lambda_tail)
    if kind == "ckd":
        return dv.ckd_loss(teacher, z, m, lambda_tail)
    raise ValueError(f"unknown loss kind '{kind}', expected one of {KD_LOSS_KINDS}")


def kd_fit(teachers: list[dv.TopKDistribution], loss_kind: str, steps: int,
           step_size: float, seed: int, vocab_size: int = 32, m: int = 8,
           lambda_tail: float = dv.DEFAULT_LAMBDA_TAIL) -> KdCurves:
    """Gradient-descend student logits against fixed teachers.

    Students start from seeded standard-normal logits, one row per teacher
    position; curves record the position means of escape mass (student
    probability outside the teacher's top-k) and entropy.
    """
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(len(teachers), vocab_size))
    escape = np.zeros(steps + 1)
    ent = np.zeros(steps + 1)

    def record(step: int) -> None:
        e_sum = h_sum = 0.0
        for teacher, z in zip(teachers, logits):
            q = dv.softmax(z)
            e_sum += 1.0 - q[teacher.indices].sum()
            h_sum += dv.entropy(q)
        escape[step] = e_sum / len(teachers)
        ent[step] = h_sum / len(teachers)

    record(0)
    for step in range(1, steps + 1):
        for row, teacher in enumerate(teachers):
            report = _kd_loss(loss_kind, teacher, logits[row], m, lambda_tail)
            logits[row] -= step_size * report.grad
        record(step)
    return KdCurves(escape_mass=escape, entropy=ent)


def collapse_witness() -> tuple[dv.TopKDistribution, np.ndarray, int]:
    """Frozen three-token instance where the masked reverse KL inverts.

    The teacher endorses tokens {0, 1} (k=2) with a tiny probability on
    token 1; the student is confidently wrong on token 2 (its top-1 set,
    m=1). Under the masked reverse KL the teacher-endorsed logit 1 receives a
    larger gradient than the confident-but-wrong logit 2, i.e. descent pushes
    the endorsed token down while raising the wrong one. The tail penalty in
    the stabilized reverse KL and in the constrained forward-KL loss restores
    grad(wrong) > grad(endorsed).
    """
    teacher = dv.TopKDistribution(indices=np.array([0, 1]),
                                  probs=np.array([0.98, 0.015]))
    student_logits = np.log(np.array([0.1, 0.1, 0.8]))
    return teacher, student_logits, 1
