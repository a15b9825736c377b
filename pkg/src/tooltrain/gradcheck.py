"""Finite-difference verification of the analytic divergence gradients.

Central differences of the loss value are an oracle that is independent of
the analytic gradient code paths. Instances whose student top-m boundary is
too close for the probe step to leave J'_m membership unchanged are filtered
out (the index sets are constants under differentiation, so the analytic
gradient is only defined away from those boundaries).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import divergence as dv

FD_STEP = 1e-5
REL_TOL = 1e-6
GRAD_SUM_TOL = 1e-8
# membership margin in probability space; generous vs the O(q*h) probe shift
TOPM_MARGIN = 1e-4

LossFn = Callable[[dv.TopKDistribution, np.ndarray], dv.LossReport]


def make_loss_fns(m: int, lambda_tail: float) -> dict[str, LossFn]:
    """The five kernels under test, closed over their hyperparameters."""
    return {
        "fkl": dv.fkl_topk,
        "tail": lambda t, z: dv.tail_penalty(t, z, m),
        "ckd": lambda t, z: dv.ckd_loss(t, z, m, lambda_tail),
        "rkl": dv.rkl_topk_masked,
        "rkl-stab": lambda t, z: dv.rkl_topk_stabilized(t, z, m, lambda_tail),
    }


def central_difference(loss_fn: Callable[[np.ndarray], float], z: np.ndarray,
                       step: float = FD_STEP) -> np.ndarray:
    """Two-sided difference quotient of a scalar function, per coordinate."""
    z = np.asarray(z, dtype=np.float64)
    grad = np.zeros_like(z)
    for j in range(z.size):
        zp = z.copy()
        zp[j] += step
        zm = z.copy()
        zm[j] -= step
        grad[j] = (loss_fn(zp) - loss_fn(zm)) / (2.0 * step)
    return grad


def topm_boundary_gap(z: np.ndarray, m: int) -> float:
    """Probability gap between the student's m-th and (m+1)-th entries."""
    q = np.sort(dv.softmax(z))[::-1]
    if m >= q.size:
        return np.inf
    return float(q[m - 1] - q[m])


def random_instance(rng: np.random.Generator, vocab_size: int, k: int, m: int,
                    margin: float = TOPM_MARGIN, max_tries: int = 200,
                    stats: dict | None = None) -> tuple[dv.TopKDistribution, np.ndarray]:
    """Draw a teacher top-k and student logits clear of the top-m boundary.

    Draws whose top-m boundary gap is inside the margin are rejected and
    counted in ``stats["rejected"]`` when a stats dict is passed.
    """
    teacher_p = dv.softmax(rng.normal(size=vocab_size) * 2.0)
    teacher = dv.topk_of(teacher_p, k)
    for _ in range(max_tries):
        z = rng.normal(size=vocab_size) * 1.5
        if topm_boundary_gap(z, m) > margin:
            return teacher, z
        if stats is not None:
            stats["rejected"] = stats.get("rejected", 0) + 1
    raise RuntimeError("could not draw an instance away from the top-m boundary")


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.abs(analytic).max()), float(np.abs(numeric).max()), 1e-12)
    return float(np.abs(analytic - numeric).max()) / scale


@dataclass
class SuiteResult:
    max_rel_err: float
    max_grad_sum: float
    instances: int
    rejected: int = 0  # boundary-filtered draws, replaced by fresh ones

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= REL_TOL and self.max_grad_sum <= GRAD_SUM_TOL


def run_gradient_suite(seed: int = 0, trials: int = 50, vocab_size: int = 32,
                       k: int = 8, m: int = 16,
                       lambda_tail: float = dv.DEFAULT_LAMBDA_TAIL,
                       step: float = FD_STEP) -> dict[str, SuiteResult]:
    """Gradcheck every kernel on ``trials`` boundary-filtered random instances."""
    results: dict[str, SuiteResult] = {}
    for name, loss_fn in make_loss_fns(m, lambda_tail).items():
        rng = np.random.default_rng(seed)
        max_rel = 0.0
        max_sum = 0.0
        stats: dict = {}
        for _ in range(trials):
            teacher, z = random_instance(rng, vocab_size, k, m, stats=stats)
            report = loss_fn(teacher, z)
            numeric = central_difference(lambda zz: loss_fn(teacher, zz).loss, z, step)
            max_rel = max(max_rel, relative_error(report.grad, numeric))
            max_sum = max(max_sum, abs(float(report.grad.sum())))
        results[name] = SuiteResult(max_rel_err=max_rel, max_grad_sum=max_sum,
                                    instances=trials,
                                    rejected=stats.get("rejected", 0))
    return results
