"""Sequence and argument similarity metrics.

String similarity is ROUGE-L F1 over lowercased, whitespace-split tokens.
Typed argument values dispatch on type: strings are compared with ROUGE-L,
numbers and booleans by exact equality, everything else (and mixed-type
pairs) by equality of canonical string renderings. Call-level similarity is
the mean contribution over the union of argument keys.
"""

from __future__ import annotations

import json
from typing import Any

from .chat_format import ToolCall


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace; empty text gives no tokens."""
    return text.lower().split()


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence, O(|a|*|b|) dynamic program."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[len(b)]


def rouge_l_f1(pred: str, ref: str) -> float:
    """ROUGE-L F1 between two strings.

    Both empty counts as perfect agreement (1.0); exactly one empty, or no
    common subsequence at all, scores 0.0.
    """
    pred_tokens = tokenize(pred)
    ref_tokens = tokenize(ref)
    if not pred_tokens and not ref_tokens:
        return 1.0
    if not pred_tokens or not ref_tokens:
        return 0.0
    lcs = lcs_length(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred_tokens)
    recall = lcs / len(ref_tokens)
    return 2 * precision * recall / (precision + recall)


def _is_number(value: Any) -> bool:
    # bool is an int subclass; keep it out of the numeric branch.
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def canonical_str(value: Any) -> str:
    """Deterministic string rendering used by the fallback comparison.

    Numbers render without a decimal point when integral and in shortest
    round-trip form otherwise; containers render as canonical JSON (sorted
    keys, no whitespace, strings quoted) with the same number treatment
    applied recursively, so e.g. ``[1.0, 2]`` and ``[1, 2]`` render
    identically. A top-level string renders bare, which is what lets a
    mixed string/number pair like ``"3"`` and ``3`` compare equal.
    """
    if isinstance(value, str):
        return value
    return _canon_nested(value)


def _canon_nested(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if _is_number(value):
        if isinstance(value, float):
            if value.is_integer():
                return str(int(value))
            return repr(value)
        return str(value)
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, list):
        return "[" + ",".join(_canon_nested(v) for v in value) + "]"
    if isinstance(value, dict):
        items = sorted(value.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_canon_nested(v)}"
                              for k, v in items) + "}"
    return str(value)


def value_similarity(pred: Any, gold: Any) -> float:
    """Similarity of one argument value pair, in [0, 1]."""
    if isinstance(pred, str) and isinstance(gold, str):
        return rouge_l_f1(pred, gold)
    if isinstance(pred, bool) and isinstance(gold, bool):
        return 1.0 if pred == gold else 0.0
    if _is_number(pred) and _is_number(gold):
        return 1.0 if pred == gold else 0.0
    return 1.0 if canonical_str(pred) == canonical_str(gold) else 0.0


def call_similarity(pred: ToolCall, gold: ToolCall) -> float:
    """Argument-level similarity between two calls, in [0, 1].

    Sums ``value_similarity`` over the intersection of argument keys and
    divides by the size of their union; two empty argument maps are a perfect
    match. Names are ignored here -- name agreement is the matcher's job.
    """
    pred_keys = set(pred.arguments)
    gold_keys = set(gold.arguments)
    union = pred_keys | gold_keys
    if not union:
        return 1.0
    shared = pred_keys & gold_keys
    total = sum(value_similarity(pred.arguments[k], gold.arguments[k]) for k in shared)
    return total / len(union)
