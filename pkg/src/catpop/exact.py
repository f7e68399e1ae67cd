"""Simulation-free ground truth at desk scale.

The law of the population at time T is computed exactly by mixing powers of
the truncated jump-chain matrix over the Poisson number of clock events.
States above the truncation level are absorbed and their mass is reported as
``truncation_error`` rather than silently dropped, so every returned figure
carries an explicit accuracy budget.  The module also provides the exact
lower tails (uniform-sum convolution, Poisson CDF) that the closed-form
bounds are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .model import ModelParams


class TruncationBudgetExceeded(RuntimeError):
    """The requested truncation cannot certify the caller's error budget."""


@dataclass(eq=False)
class Pmf:
    """Probability masses over states {0, ..., M} plus unaccounted mass.

    ``masses.sum() + truncation_error`` is 1 up to rounding; the truncation
    error covers both the Poisson event counts beyond the cap and any paths
    that escaped above the state cap.
    """

    masses: np.ndarray
    truncation_error: float

    def __post_init__(self):
        if np.any(self.masses < 0) or self.truncation_error < 0:
            raise ValueError("probability masses must be nonnegative")
        total = float(self.masses.sum()) + self.truncation_error
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses + truncation_error = {total}, expected 1")


def chain_matrix(params: ModelParams, M: int) -> np.ndarray:
    """Jump-chain transition matrix truncated to states {0, ..., M}.

    Row 0 puts all mass on state 1.  Rows 1..M-1 follow the kernel exactly.
    Row M keeps only the catastrophe mass; the missing birth mass
    lambda/(lambda+mu) escapes the truncation and must be accounted as
    truncation error by the caller.
    """
    if M < 1:
        raise ValueError(f"state cap M must be >= 1, got {M}")
    p_birth = params.birth_prob
    P = np.zeros((M + 1, M + 1))
    P[0, 1] = 1.0
    for i in range(1, M + 1):
        P[i, :i] = (1.0 - p_birth) / i
        if i < M:
            P[i, i + 1] = p_birth
    return P


def exact_state_distribution(
    params: ModelParams,
    T: float,
    M: int,
    K: int,
    error_budget: float = 1e-9,
) -> Pmf:
    """Exact law of the population at time T, truncated to M states, K events.

    Mixes the k-step chain distributions over the Poisson(alpha*T) number of
    clock events for k = 0..K.  Refuses (raises) if the mass lost to
    truncation exceeds ``error_budget``.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if K < 0:
        raise ValueError(f"event cap K must be >= 0, got {K}")
    P = chain_matrix(params, M)
    dist = np.zeros(M + 1)
    dist[0] = 1.0
    weight = math.exp(-params.alpha * T)  # Poisson weight at k = 0
    acc = weight * dist
    for k in range(1, K + 1):
        dist = dist @ P
        weight *= params.alpha * T / k
        acc += weight * dist
    truncation = max(0.0, 1.0 - float(acc.sum()))
    if truncation > error_budget:
        raise TruncationBudgetExceeded(
            f"truncation error {truncation:.3e} exceeds budget {error_budget:.3e}; "
            f"increase M={M} or K={K}"
        )
    return Pmf(acc, truncation)


def exact_tail_probability(
    params: ModelParams,
    T: float,
    x: float,
    M: int,
    K: int,
    error_budget: float = 1e-9,
) -> tuple[float, float]:
    """Exact P(state(T) >= x*T) with its truncation uncertainty.

    Returns ``(value, uncertainty)``: the true probability lies within
    ``value + [0, uncertainty]`` because truncated mass can only add to a
    tail.
    """
    pmf = exact_state_distribution(params, T, M, K, error_budget)
    threshold = math.ceil(x * T)
    if threshold <= 0:
        value = float(pmf.masses.sum())
    elif threshold > M:
        value = 0.0
    else:
        value = float(pmf.masses[threshold:].sum())
    return value, pmf.truncation_error


def uniform_sum_tail_exact(m: int, n: int, a: float) -> float:
    """Exact P(U_1 + ... + U_n <= a) for i.i.d. uniforms on {1, ..., m}."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return 1.0 if a >= 0 else 0.0
    base = np.full(m, 1.0 / m)  # support {1, ..., m}
    dist = np.ones(1)
    for _ in range(n):
        dist = np.convolve(dist, base)
    # dist[j] is the mass of the sum value n + j
    top = math.floor(a) - n
    if top < 0:
        return 0.0
    return float(dist[: top + 1].sum())


def poisson_lower_tail_exact(rate: float, k: int) -> float:
    """Exact P(N <= k) for N Poisson(rate), terms accumulated recursively."""
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if k < 0:
        return 0.0
    term = math.exp(-rate)
    total = term
    for j in range(1, k + 1):
        term *= rate / j
        total += term
    return total


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two mass vectors (padded to length)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    size = max(p.size, q.size)
    pp = np.zeros(size)
    qq = np.zeros(size)
    pp[: p.size] = p
    qq[: q.size] = q
    return 0.5 * float(np.abs(pp - qq).sum())
