"""Linear-chain conditional random field over per-token label scores.

A length-T sequence y is scored as

    score(y) = start[y_0] + sum_t e[t, y_t]
             + sum_{t>=1} transitions[y_{t-1}, y_t] + end[y_{T-1}]

where e is the T x L emission matrix.  The partition function, posterior
marginals, and negative log-likelihood gradients come from the
forward-backward recursions; decoding is max-product with backpointers.
Everything runs in float64 log-space with max-subtracted log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class EmptySequence(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass
class CrfParams:
    """Transition table plus boundary scores.

    transitions[i, j] scores label j immediately following label i.
    """

    transitions: np.ndarray  # (L, L)
    start: np.ndarray  # (L,)
    end: np.ndarray  # (L,)

    @classmethod
    def zeros(cls, n_labels: int) -> "CrfParams":
        return cls(
            transitions=np.zeros((n_labels, n_labels)),
            start=np.zeros(n_labels),
            end=np.zeros(n_labels),
        )

    @property
    def n_labels(self) -> int:
        return self.start.shape[0]

    def copy(self) -> "CrfParams":
        return CrfParams(self.transitions.copy(), self.start.copy(), self.end.copy())


def _logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    if axis is None:
        return out.reshape(())
    return np.squeeze(out, axis=axis)


def _check_emissions(emissions: np.ndarray) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] == 0:
        raise EmptySequence("emission matrix must be T x L with T >= 1")
    return emissions


def path_score(emissions: np.ndarray, params: CrfParams, labels: Sequence[int]) -> float:
    """Unnormalized log-score of one specific label sequence."""
    emissions = _check_emissions(emissions)
    y = np.asarray(labels, dtype=np.intp)
    if y.shape[0] != emissions.shape[0]:
        raise LengthMismatch(
            f"{y.shape[0]} labels for {emissions.shape[0]} emission rows"
        )
    score = params.start[y[0]] + emissions[np.arange(len(y)), y].sum() + params.end[y[-1]]
    if len(y) > 1:
        score += params.transitions[y[:-1], y[1:]].sum()
    return float(score)


def _forward(emissions: np.ndarray, params: CrfParams) -> tuple[np.ndarray, float]:
    """Alpha lattice (log-sum of prefix scores, emission included) and log Z."""
    T = emissions.shape[0]
    alpha = np.empty_like(emissions)
    alpha[0] = params.start + emissions[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + params.transitions, axis=0) + emissions[t]
    log_z = float(_logsumexp(alpha[-1] + params.end))
    return alpha, log_z


def _backward(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Beta lattice: log-sum of suffix scores, current emission excluded."""
    T = emissions.shape[0]
    beta = np.empty_like(emissions)
    beta[-1] = params.end
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(
            params.transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1
        )
    return beta


def log_partition(emissions: np.ndarray, params: CrfParams) -> float:
    """log of the sum of exp(score) over all L^T label sequences."""
    emissions = _check_emissions(emissions)
    return _forward(emissions, params)[1]


def marginals(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Posterior P(y_t = l) per position; rows sum to 1."""
    emissions = _check_emissions(emissions)
    alpha, log_z = _forward(emissions, params)
    beta = _backward(emissions, params)
    return np.exp(alpha + beta - log_z)


def nll_and_grads(
    emissions: np.ndarray, params: CrfParams, gold: Sequence[int]
) -> tuple[float, np.ndarray, CrfParams]:
    """Negative log-likelihood of the gold sequence and exact gradients.

    Gradients are expectation minus observation: the emission gradient is
    the unary marginal minus the gold indicator, the transition gradient
    aggregates pairwise marginals minus gold bigram counts, and the
    boundary gradients use the first/last unary marginals.
    """
    emissions = _check_emissions(emissions)
    y = np.asarray(gold, dtype=np.intp)
    T, L = emissions.shape
    if y.shape[0] != T:
        raise LengthMismatch(f"{y.shape[0]} gold labels for {T} emission rows")

    alpha, log_z = _forward(emissions, params)
    beta = _backward(emissions, params)
    unary = np.exp(alpha + beta - log_z)

    loss = log_z - path_score(emissions, params, y)

    grad_e = unary.copy()
    grad_e[np.arange(T), y] -= 1.0

    grad_trans = np.zeros((L, L))
    for t in range(T - 1):
        pairwise = np.exp(
            alpha[t][:, None]
            + params.transitions
            + (emissions[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
        grad_trans += pairwise
        grad_trans[y[t], y[t + 1]] -= 1.0

    grad_start = unary[0].copy()
    grad_start[y[0]] -= 1.0
    grad_end = unary[-1].copy()
    grad_end[y[-1]] -= 1.0

    return loss, grad_e, CrfParams(grad_trans, grad_start, grad_end)


def viterbi(emissions: np.ndarray, params: CrfParams) -> tuple[list[int], float]:
    """Highest-scoring label sequence and its score.

    Ties resolve to the lowest label index at every backtrack step
    (argmax takes the first maximum), so decoding is deterministic.
    """
    emissions = _check_emissions(emissions)
    T, L = emissions.shape
    v = params.start + emissions[0]
    backptr = np.empty((T, L), dtype=np.intp)
    for t in range(1, T):
        scores = v[:, None] + params.transitions
        backptr[t] = np.argmax(scores, axis=0)
        v = scores[backptr[t], np.arange(L)] + emissions[t]
    v = v + params.end
    last = int(np.argmax(v))
    best_score = float(v[last])

    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, best_score
