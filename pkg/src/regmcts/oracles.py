"""Exact optimal values by backward induction, experiment metrics, and bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .regularizers import (
    RegularizerContext,
    RegularizerKind,
    conjugate_value,
    regularizer_bounds,
)
from .search import SearchResult
from .synthetic import SyntheticTree


@dataclass(frozen=True)
class OracleValues:
    v_star_uct: float
    v_star_reg: float
    root_child_values: np.ndarray
    v_star: float


@dataclass(frozen=True)
class MetricRecord:
    tree_id: int
    run_id: int
    algorithm: str
    k: int
    d: int
    tau: float
    epsilon: float
    sim_index: int
    v_omega: float
    eps_omega: float
    eps_uct: float
    cum_regret: float


def _backward_induction(tree: SyntheticTree, reduce) -> np.ndarray:
    """Values of the depth-1 nodes (the root's children are the last level reduced)."""
    values = np.asarray(tree.leaf_means, dtype=float)
    # leaves are numbered left to right, so each row of k is one parent's action vector
    for _ in range(tree.d - 1):
        values = reduce(values.reshape(-1, tree.k))
    return values


def optimal_value_unregularized(tree: SyntheticTree) -> float:
    return float(np.max(_backward_induction(tree, lambda q: q.max(axis=-1))))


def optimal_value_regularized(tree: SyntheticTree, ctx: RegularizerContext) -> float:
    """Regularized optimum: the max of backward induction replaced by the conjugate.

    A relative-entropy context applies its prior at every node.
    """
    def reduce(q):
        return np.atleast_1d(conjugate_value(q, ctx))

    return float(conjugate_value(_backward_induction(tree, reduce), ctx))


def root_child_values(tree: SyntheticTree) -> np.ndarray:
    """Best leaf mean below each root action."""
    return np.asarray(tree.leaf_means).reshape(tree.k, -1).max(axis=1)


def compute_oracles(tree: SyntheticTree, ctx: Optional[RegularizerContext]) -> OracleValues:
    """Ground truth for one tree; ``ctx=None`` (UCT) uses the unregularized optimum."""
    v_uct = optimal_value_unregularized(tree)
    children = root_child_values(tree)
    v_reg = v_uct if ctx is None else optimal_value_regularized(tree, ctx)
    return OracleValues(v_star_uct=v_uct, v_star_reg=v_reg, root_child_values=children, v_star=float(children.max()))


def regret_trace(choices, child_values) -> np.ndarray:
    """Cumulative pseudo-regret ``n * V* - sum_{t<=n} V_{i_t}`` for each prefix of ``choices``."""
    choices = np.asarray(choices)
    values = np.asarray(child_values, dtype=float)
    if choices.size == 0:
        raise ValueError("choices must be non-empty")
    if choices.min() < 0 or choices.max() >= values.size:
        raise ValueError(f"choice out of range for {values.size} children")
    gaps = values.max() - values[choices]
    return np.cumsum(gaps)


class RegretBound(NamedTuple):
    value: float
    omitted: str = "O(n / log n) remainder with unspecified constant"


def regret_bound(
    kind: RegularizerKind,
    tau: float,
    num_actions: int,
    support_size: int,
    m: Optional[float],
    n: int,
) -> RegretBound:
    """Explicit terms of the expected-regret bound for each entropy.

    maximum:  tau * log|A| + n|A| / tau
    relative: tau * (log|A| - 1/m) + n|A| / tau
    tsallis:  tau * (|A| - 1) / |A| + n|K| / 2

    The asymptotic remainder is not included; ``RegretBound.omitted`` says so.
    """
    if not (tau > 0 and num_actions >= 1 and n >= 1 and support_size >= 1):
        raise ValueError("tau, num_actions, support_size and n must be positive")
    if support_size > num_actions:
        raise ValueError("support_size cannot exceed num_actions")
    a = num_actions
    if kind is RegularizerKind.MAXIMUM_ENTROPY:
        value = tau * math.log(a) + n * a / tau
    elif kind is RegularizerKind.RELATIVE_ENTROPY:
        if m is None or not 0 < m <= 1:
            raise ValueError("relative entropy needs m in (0, 1]")
        value = tau * (math.log(a) - 1.0 / m) + n * a / tau
    else:
        value = tau * (a - 1) / a + n * support_size / 2.0
    return RegretBound(value)


def error_bound(
    kind: RegularizerKind,
    tau: float,
    num_actions: int,
    m: Optional[float],
    gamma: float,
    sigma_hat_term: float,
) -> tuple[float, float]:
    """High-probability interval ``(-psi - tau (U - L) / (1 - gamma), psi)`` on the root error.

    ``sigma_hat_term`` is the concentration term psi, supplied by the caller
    because its constants are not known. ``(L, U)`` come from
    :func:`regularizer_bounds`; for relative entropy ``m`` is the smallest
    prior probability.
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma!r}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if kind is RegularizerKind.RELATIVE_ENTROPY:
        if m is None or not 0 < m <= 1.0 / num_actions:
            raise ValueError("relative entropy needs m in (0, 1/|A|]")
        lo, hi = 0.0, -math.log(num_actions) + math.log(1.0 / m)
    else:
        lo, hi = regularizer_bounds(num_actions, RegularizerContext(kind, tau))
    psi = sigma_hat_term
    return (-psi - tau * (hi - lo) / (1.0 - gamma), psi)


def metric_columns(result: SearchResult, oracles: OracleValues) -> dict[str, np.ndarray]:
    """Per-simulation metric arrays: v_omega, eps_omega, eps_uct, cum_regret."""
    values = np.asarray(result.root_value_trace, dtype=float)
    choices = np.asarray(result.root_choice_trace)
    if values.shape != choices.shape or values.ndim != 1:
        raise ValueError("value and choice traces are not aligned")
    return {
        "v_omega": values,
        "eps_omega": values - oracles.v_star_reg,
        "eps_uct": values - oracles.v_star_uct,
        "cum_regret": regret_trace(choices, oracles.root_child_values),
    }


def compute_metrics(result: SearchResult, oracles: OracleValues, meta: dict) -> list[MetricRecord]:
    """One record per simulation. ``meta`` supplies tree_id, run_id, algorithm, k, d, tau, epsilon."""
    cols = metric_columns(result, oracles)
    return [
        MetricRecord(
            tree_id=meta["tree_id"],
            run_id=meta["run_id"],
            algorithm=str(meta["algorithm"]),
            k=meta["k"],
            d=meta["d"],
            tau=meta["tau"],
            epsilon=meta["epsilon"],
            sim_index=i + 1,
            v_omega=float(v),
            eps_omega=float(e),
            eps_uct=float(u),
            cum_regret=float(r),
        )
        for i, (v, e, u, r) in enumerate(
            zip(cols["v_omega"], cols["eps_omega"], cols["eps_uct"], cols["cum_regret"])
        )
    ]
