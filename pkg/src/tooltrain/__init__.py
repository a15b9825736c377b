"""Training utilities for tiny function-calling policies.

The library covers three layers: a graded reward for tool-calling
generations (format gate, IoU-style call matching, ROUGE-L response
scoring), top-k distillation divergences with analytic gradients, and
group-relative policy-optimization primitives, plus a desk-scale trainer
that exercises the whole stack end to end.
"""

from .chat_format import (
    FormatViolation,
    FunctionDef,
    ParamSpec,
    ParsedGeneration,
    ToolCall,
    ToolSchema,
    parse_generation,
    render_generation,
    validate_format,
)
from .divergence import (
    DegenerateStudent,
    DegenerateTeacher,
    LossReport,
    TopKDistribution,
    ckd_loss,
    entropy,
    fkl_topk,
    rkl_topk_masked,
    rkl_topk_stabilized,
    softmax,
    tail_penalty,
    topk_of,
)
from .grpo import (
    GrpoConfig,
    LengthMismatch,
    Rollout,
    RolloutGroup,
    ZeroVariance,
    filter_homogeneous,
    grpo_objective,
    kl_k2,
    standardize_advantages,
)
from .reward import (
    MalformedGroundTruth,
    RewardBreakdown,
    greedy_match,
    response_reward,
    tool_call_reward,
    total_reward,
)
from .similarity import call_similarity, lcs_length, rouge_l_f1, value_similarity

__version__ = "0.1.0"

__all__ = [
    "FormatViolation", "FunctionDef", "ParamSpec", "ParsedGeneration",
    "ToolCall", "ToolSchema", "parse_generation", "render_generation",
    "validate_format",
    "DegenerateStudent", "DegenerateTeacher", "LossReport", "TopKDistribution",
    "ckd_loss", "entropy", "fkl_topk", "rkl_topk_masked", "rkl_topk_stabilized",
    "softmax", "tail_penalty", "topk_of",
    "GrpoConfig", "LengthMismatch", "Rollout", "RolloutGroup", "ZeroVariance",
    "filter_homogeneous", "grpo_objective", "kl_k2", "standardize_advantages",
    "MalformedGroundTruth", "RewardBreakdown", "greedy_match",
    "response_reward", "tool_call_reward", "total_reward",
    "call_similarity", "lcs_length", "rouge_l_f1", "value_similarity",
]
