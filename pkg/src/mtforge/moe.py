"""Top-2 sparsely gated expert routing with capacity limits and balance loss.

Routing is a pure function of the gate logits: softmax gates, per-token
top-1/top-2 experts (ties to the lower expert index), then two seating
passes against a shared per-expert capacity C = ceil(cf * T / E). Pass 1
seats first choices in token order. Pass 2 seats second choices, serving
tokens whose first choice overflowed before tokens that already hold a
seat. Surviving weights are renormalized per token; a token with no seat
is dropped.

The balance loss is l_aux = E * sum_e f_e * pbar_e with f_e the fraction of
tokens whose top-1 is expert e (non-differentiable) and pbar_e the mean
gate probability of expert e; the training objective adds
gate_loss_weight * l_aux.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from mtforge._backend import kernels
from mtforge.errors import ConfigError, DataError

DEFAULT_CAPACITY_FACTOR = 2.0
DEFAULT_GATE_LOSS_WEIGHT = 0.01
TOP_K = 2


@dataclass
class RouterConfig:
    num_experts: int
    top_k: int = TOP_K
    capacity_factor: float = DEFAULT_CAPACITY_FACTOR
    gate_loss_weight: float = DEFAULT_GATE_LOSS_WEIGHT

    def __post_init__(self):
        if self.num_experts < 2:
            raise ConfigError("bad_num_experts", "need at least 2 experts")
        if self.top_k != TOP_K:
            raise ConfigError("bad_top_k", "only top-2 routing is supported")
        if self.capacity_factor <= 0:
            raise ConfigError("bad_capacity_factor", "capacity factor must be > 0")
        if self.gate_loss_weight < 0:
            raise ConfigError("bad_gate_loss_weight", "gate loss weight must be >= 0")

    def capacity(self, num_tokens: int) -> int:
        return math.ceil(self.capacity_factor * num_tokens / self.num_experts)


@dataclass
class RouteResult:
    gates: np.ndarray  # T x E softmax probabilities
    assignments: List[List[Tuple[int, float]]]  # per token, up to 2 (expert, weight)
    dropped: np.ndarray  # bool per token
    aux_loss: float  # unweighted l_aux
    expert_load: np.ndarray  # seats taken per expert
    capacity: int


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _top2(gates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # argmax picks the first (lowest-index) maximum, which is the tie rule.
    top1 = np.argmax(gates, axis=1)
    masked = gates.copy()
    masked[np.arange(gates.shape[0]), top1] = -np.inf
    top2 = np.argmax(masked, axis=1)
    return top1, top2


def route(logits: np.ndarray, cfg: RouterConfig) -> RouteResult:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise DataError("bad_logits_shape", "logits must be a T x E matrix with T >= 1")
    if logits.shape[1] != cfg.num_experts:
        raise ConfigError("expert_count_mismatch", f"logits have {logits.shape[1]} columns for {cfg.num_experts} experts")
    if not np.all(np.isfinite(logits)):
        raise DataError("nonfinite_logits", "logits must be finite")

    T, E = logits.shape
    gates = softmax_rows(logits)
    top1, top2 = _top2(gates)
    C = cfg.capacity(T)
    keep1, keep2, load = kernels.assign_capacity(
        np.asarray(top1, dtype=np.int64), np.asarray(top2, dtype=np.int64), E, C
    )

    assignments: List[List[Tuple[int, float]]] = []
    dropped = np.zeros(T, dtype=bool)
    for t in range(T):
        chosen: List[Tuple[int, float]] = []
        if keep1[t]:
            chosen.append((int(top1[t]), float(gates[t, top1[t]])))
        if keep2[t]:
            chosen.append((int(top2[t]), float(gates[t, top2[t]])))
        if not chosen:
            dropped[t] = True
        else:
            z = sum(w for _, w in chosen)
            chosen = [(e, w / z) for e, w in chosen]
        assignments.append(chosen)

    aux = gate_loss(gates, top1)
    return RouteResult(
        gates=gates,
        assignments=assignments,
        dropped=dropped,
        aux_loss=aux,
        expert_load=load,
        capacity=C,
    )


def gate_loss(gates: np.ndarray, top1: np.ndarray) -> float:
    """l_aux = E * sum_e f_e * pbar_e; 1.0 at perfect balance."""
    gates = np.asarray(gates, dtype=np.float64)
    T, E = gates.shape
    f = np.bincount(np.asarray(top1), minlength=E) / T
    pbar = gates.mean(axis=0)
    return float(E * np.dot(f, pbar))


def gate_loss_grad(logits: np.ndarray) -> np.ndarray:
    """Analytic d l_aux / d logits with the top-1 fractions held constant.

    With a_e = E * f_e / T, the softmax chain rule gives
    grad[t, j] = g[t, j] * (a_j - sum_e a_e g[t, e]); rows sum to zero.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise DataError("nonfinite_logits", "logits must be finite")
    T, E = logits.shape
    gates = softmax_rows(logits)
    top1 = np.argmax(gates, axis=1)
    f = np.bincount(top1, minlength=E) / T
    a = E * f / T
    inner = gates @ a  # per-token sum_e a_e g_te
    return gates * (a[None, :] - inner[:, None])
