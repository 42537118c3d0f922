"""
Entropy regularizers for regularized tree search.

Each regularizer Omega comes with its convex conjugate (a "soft maximum"
over action values) and the conjugate's gradient, which is the policy
attaining that maximum:

=============  ===============================  ==============================
kind           Omega(pi)                        policy = grad Omega*_tau(q)
=============  ===============================  ==============================
maximum        sum pi log pi                    softmax(q / tau)
relative       KL(pi || prior)                  prior-weighted softmax(q / tau)
tsallis        (||pi||^2 - 1) / 2               sparsemax(q / tau)
=============  ===============================  ==============================

The temperature is applied once, inside the conjugate: callers pass raw
action values ``q``. All functions operate along the last axis, so a batch
of value vectors can be evaluated with a single call.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

SIMPLEX_TOL = 1e-9


class RegularizerKind(enum.Enum):
    MAXIMUM_ENTROPY = "maximum"
    RELATIVE_ENTROPY = "relative"
    TSALLIS_ENTROPY = "tsallis"


@dataclass(frozen=True, eq=False)
class RegularizerContext:
    """Which regularizer is in force, its temperature and (relative entropy only) the prior.

    The prior is the previous-iterate policy that the relative entropy is
    measured against. It must be strictly positive.
    """

    kind: RegularizerKind
    tau: float
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.kind, RegularizerKind):
            raise ValueError(f"kind must be a RegularizerKind, got {self.kind!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be a positive finite real, got {self.tau!r}")
        if self.kind is RegularizerKind.RELATIVE_ENTROPY:
            if self.prior is None:
                raise ValueError("relative entropy requires a prior")
            prior = np.array(self.prior, dtype=float)
            if prior.ndim != 1 or prior.size == 0:
                raise ValueError("prior must be a non-empty vector")
            if not np.all(np.isfinite(prior)) or np.any(prior <= 0):
                raise ValueError("prior entries must be strictly positive")
            if abs(prior.sum() - 1.0) > SIMPLEX_TOL:
                raise ValueError(f"prior must sum to 1, sums to {prior.sum()!r}")
            prior.setflags(write=False)
            object.__setattr__(self, "prior", prior)
        elif self.prior is not None:
            raise ValueError(f"{self.kind.value} entropy takes no prior")

    @classmethod
    def uniform(cls, kind: RegularizerKind, tau: float, num_actions: int) -> "RegularizerContext":
        """Context with a uniform prior when ``kind`` needs one."""
        prior = None
        if kind is RegularizerKind.RELATIVE_ENTROPY:
            prior = np.full(num_actions, 1.0 / num_actions)
        return cls(kind, tau, prior)


def _as_values(q) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise ValueError("value vector must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("value vector has non-finite entries")
    return arr


def _log_prior(ctx: RegularizerContext, num_actions: int) -> np.ndarray:
    if ctx.prior.shape[-1] != num_actions:
        raise ValueError(
            f"prior has {ctx.prior.shape[-1]} entries, values have {num_actions}"
        )
    return np.log(ctx.prior)


def _logsumexp(x: np.ndarray) -> np.ndarray:
    m = np.max(x, axis=-1, keepdims=True)
    return m[..., 0] + np.log(np.sum(np.exp(x - m), axis=-1))


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def _sparsemax_parts(f: np.ndarray):
    """Sorted order, support mask (in sorted order) and support size along the last axis."""
    # stable sort of -f: descending, ties by ascending index
    order = np.argsort(-f, axis=-1, kind="stable")
    z = np.take_along_axis(f, order, axis=-1)
    cumulative = np.cumsum(z, axis=-1)
    rank = np.arange(1, f.shape[-1] + 1)
    condition = 1.0 + rank * z > cumulative
    prefix = np.cumprod(condition, axis=-1).astype(bool)
    size = prefix.sum(axis=-1)
    return order, z, cumulative, prefix, size


def _sparsemax(f: np.ndarray) -> np.ndarray:
    # shift invariant; shifting by the max makes a single-action support exactly 1
    f = f - np.max(f, axis=-1, keepdims=True)
    order, _, cumulative, prefix, size = _sparsemax_parts(f)
    threshold = (np.take_along_axis(cumulative, size[..., None] - 1, axis=-1) - 1.0) / size[..., None]
    in_support = np.zeros_like(prefix)
    np.put_along_axis(in_support, order, prefix, axis=-1)
    return np.where(in_support, np.maximum(f - threshold, 0.0), 0.0)


def _spmax(f: np.ndarray) -> np.ndarray:
    # spmax(f + c) = spmax(f) + c; shifting by the max keeps the squares small
    top = np.max(f, axis=-1, keepdims=True)
    g = f - top
    _, z, cumulative, prefix, size = _sparsemax_parts(g)
    sq = np.sum(np.where(prefix, z * z, 0.0), axis=-1)
    s = np.take_along_axis(cumulative, size[..., None] - 1, axis=-1)[..., 0]
    return 0.5 * sq - (s - 1.0) ** 2 / (2.0 * size) + 0.5 + top[..., 0]


def support_set(f) -> np.ndarray:
    """Indices receiving nonzero sparsemax mass, in descending order of ``f``.

    Sorting ``f`` descending (ties by ascending index), this is the longest
    prefix whose i-th element satisfies ``1 + i * f_(i) > sum_{j<=i} f_(j)``.
    Never empty.
    """
    f = _as_values(f)
    if f.ndim != 1:
        raise ValueError("support_set takes a single vector")
    order, _, _, _, size = _sparsemax_parts(f)
    return order[: int(size)]


def support_size(f) -> np.ndarray:
    """Size of the sparsemax support along the last axis."""
    return _sparsemax_parts(_as_values(f))[4]


def conjugate_value(q, ctx: RegularizerContext):
    """Soft maximum ``Omega*_tau(q) = max_pi <pi, q> - tau * Omega(pi)``.

    Returns a float for a single vector, an array for a batch.
    """
    q = _as_values(q)
    x = q / ctx.tau
    kind = ctx.kind
    if kind is RegularizerKind.MAXIMUM_ENTROPY:
        out = ctx.tau * _logsumexp(x)
    elif kind is RegularizerKind.RELATIVE_ENTROPY:
        out = ctx.tau * _logsumexp(x + _log_prior(ctx, q.shape[-1]))
    else:
        out = ctx.tau * _spmax(x)
    return float(out) if np.ndim(out) == 0 else out


def policy(q, ctx: RegularizerContext) -> np.ndarray:
    """The maximizing policy ``grad Omega*_tau(q)``."""
    q = _as_values(q)
    x = q / ctx.tau
    kind = ctx.kind
    if kind is RegularizerKind.MAXIMUM_ENTROPY:
        return _softmax(x)
    if kind is RegularizerKind.RELATIVE_ENTROPY:
        return _softmax(x + _log_prior(ctx, q.shape[-1]))
    return _sparsemax(x)


def entropy_value(pi, ctx: RegularizerContext):
    """Evaluate the regularizer ``Omega(pi)`` itself (0 log 0 taken as 0)."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim == 0 or pi.shape[-1] == 0:
        raise ValueError("policy must be non-empty")
    if np.any(pi < 0) or np.any(pi > 1) or np.any(np.abs(pi.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("policy is not a point of the probability simplex")
    kind = ctx.kind
    if kind is RegularizerKind.TSALLIS_ENTROPY:
        out = 0.5 * (np.sum(pi * pi, axis=-1) - 1.0)
    else:
        positive = pi > 0
        safe = np.where(positive, pi, 1.0)
        if kind is RegularizerKind.MAXIMUM_ENTROPY:
            out = np.sum(np.where(positive, pi * np.log(safe), 0.0), axis=-1)
        else:
            log_prior = _log_prior(ctx, pi.shape[-1])
            if np.any(positive & ~np.isfinite(log_prior)):
                raise ValueError("policy puts mass where the prior has none")
            out = np.sum(np.where(positive, pi * (np.log(safe) - log_prior), 0.0), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _check_actions(num_actions: int) -> int:
    if int(num_actions) != num_actions or num_actions < 1:
        raise ValueError(f"num_actions must be a positive integer, got {num_actions!r}")
    return int(num_actions)


def regularizer_bounds(num_actions: int, ctx: RegularizerContext) -> tuple[float, float]:
    """``(L, U)`` bounds on Omega used by the error and regret calculators.

    For relative entropy this is ``(0, log(1/m) - log|A|)`` with ``m`` the
    smallest prior entry. That pair is what the error bounds are stated in;
    it is *not* a valid range for KL in general (see :func:`entropy_range`).
    """
    n = _check_actions(num_actions)
    kind = ctx.kind
    if kind is RegularizerKind.MAXIMUM_ENTROPY:
        return (-math.log(n), 0.0)
    if kind is RegularizerKind.TSALLIS_ENTROPY:
        return (-(n - 1) / (2 * n), 0.0)
    if ctx.prior.shape[-1] != n:
        raise ValueError(f"prior has {ctx.prior.shape[-1]} entries, expected {n}")
    m = float(ctx.prior.min())
    return (0.0, -math.log(n) + math.log(1.0 / m))


def entropy_range(num_actions: int, ctx: RegularizerContext) -> tuple[float, float]:
    """Attainable ``(min, max)`` of Omega over the simplex.

    Coincides with :func:`regularizer_bounds` for maximum and Tsallis
    entropy. For relative entropy the maximum is ``log(1/m)``, reached by
    the point mass on the least likely prior action.
    """
    if ctx.kind is not RegularizerKind.RELATIVE_ENTROPY:
        return regularizer_bounds(num_actions, ctx)
    n = _check_actions(num_actions)
    if ctx.prior.shape[-1] != n:
        raise ValueError(f"prior has {ctx.prior.shape[-1]} entries, expected {n}")
    return (0.0, -math.log(float(ctx.prior.min())))
