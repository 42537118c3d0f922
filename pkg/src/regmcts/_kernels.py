"""Small-vector regularizer kernels on plain lists.

The search touches vectors of a handful of entries millions of times, where
numpy's per-call overhead dominates. These mirror the array functions in
:mod:`regmcts.regularizers` without validation. Zero prior entries are
allowed here and carry zero weight; they arise when repeated relative-entropy
updates underflow.
"""

from __future__ import annotations

from math import exp, log

from .regularizers import RegularizerKind

_NEG_INF = float("-inf")


def _max_value(q, tau, prior):
    m = max(q)
    s = 0.0
    for v in q:
        s += exp((v - m) / tau)
    return m + tau * log(s)


def _max_policy(q, tau, prior):
    m = max(q)
    w = [exp((v - m) / tau) for v in q]
    s = sum(w)
    return [x / s for x in w]


def _logits(q, tau, prior):
    return [v / tau + log(p) if p > 0.0 else _NEG_INF for v, p in zip(q, prior)]


def _rel_value(q, tau, prior):
    z = _logits(q, tau, prior)
    m = max(z)
    s = 0.0
    for v in z:
        s += exp(v - m)
    return tau * (m + log(s))


def _rel_policy(q, tau, prior):
    z = _logits(q, tau, prior)
    m = max(z)
    w = [exp(v - m) for v in z]
    s = sum(w)
    return [x / s for x in w]


def _support(f):
    z = sorted(f, reverse=True)
    cumulative = 0.0
    size = 0
    for i, v in enumerate(z, 1):
        cumulative += v
        if 1.0 + i * v > cumulative:
            size = i
            total = cumulative
        else:
            break
    return z, size, total


def _ts_value(q, tau, prior):
    m = max(q)
    f = [(v - m) / tau for v in q]
    z, size, total = _support(f)
    sq = 0.0
    for v in z[:size]:
        sq += v * v
    return tau * (0.5 * sq - (total - 1.0) ** 2 / (2.0 * size) + 0.5) + m


def _ts_policy(q, tau, prior):
    f = [v / tau for v in q]
    top = max(f)
    f = [v - top for v in f]
    order = sorted(range(len(f)), key=f.__getitem__, reverse=True)
    # sorted(reverse=True) keeps ties in original order, matching the array version
    cumulative = 0.0
    size = 0
    total = 0.0
    for i, a in enumerate(order, 1):
        v = f[a]
        cumulative += v
        if 1.0 + i * v > cumulative:
            size = i
            total = cumulative
        else:
            break
    threshold = (total - 1.0) / size
    out = [0.0] * len(f)
    for a in order[:size]:
        d = f[a] - threshold
        if d > 0.0:
            out[a] = d
    return out


KERNELS = {
    RegularizerKind.MAXIMUM_ENTROPY: (_max_value, _max_policy),
    RegularizerKind.RELATIVE_ENTROPY: (_rel_value, _rel_policy),
    RegularizerKind.TSALLIS_ENTROPY: (_ts_value, _ts_policy),
}
