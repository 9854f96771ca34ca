"""Exact policy evaluation on the induced (age, service) Markov chain.

Fixing a stationary deterministic policy turns the controlled kernel into a
plain Markov chain over the states reachable from ``(1, 0)``.  Solving its
stationary distribution gives the long-run average age ``delta = E[a] + 1/2``
and the edge-use frequency ``p_bar`` (total stationary mass on states where
the policy offloads) without any sampling error, which makes this module the
reference evaluator for every policy family in the package.

All built-in policies are threshold-form: per service column ``z`` they
store the least age at which they offload.  That single representation
covers never-offload (threshold ``NEVER_OFFLOAD``), always-offload
(threshold 1), age thresholds, service thresholds (offload at every
occurring age once ``z >= z_star``) and the solver's optimal tables.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import RESET, ModelParams, State, transitions
from .heuristics import EvalResult

__all__ = [
    "NEVER_OFFLOAD",
    "Policy",
    "age_threshold_policy",
    "service_threshold_policy",
    "local_only_policy",
    "mec_only_policy",
    "threshold_table_policy",
    "ChainModel",
    "build_chain",
    "StationaryDistribution",
    "StationarySolveError",
    "stationary",
    "evaluate_exact",
]

#: Age-threshold entry meaning "no finite age triggers an offload".
NEVER_OFFLOAD = 2**31


@dataclass(frozen=True)
class Policy:
    """Stationary deterministic action rule, total on every state.

    Threshold-form policies store one age threshold per service column; the
    last entry applies to all larger ``z``.  Arbitrary rules can instead
    supply ``action_fn``; those lose the fast simulation path and threshold
    introspection but evaluate exactly the same way.
    """

    name: str
    thresholds: tuple[int, ...] | None = None
    action_fn: Callable[[int, int], int] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if (self.thresholds is None) == (self.action_fn is None):
            raise ValueError("exactly one of thresholds/action_fn must be given")
        if self.thresholds is not None:
            if len(self.thresholds) == 0:
                raise ValueError("threshold table must not be empty")
            if any(int(t) != t or t < 1 for t in self.thresholds):
                raise ValueError("thresholds must be integers >= 1")

    def action(self, a: int, z: int) -> int:
        if self.thresholds is not None:
            t = self.thresholds[z] if z < len(self.thresholds) else self.thresholds[-1]
            return 1 if a >= t else 0
        return 1 if self.action_fn(a, z) else 0

    def threshold(self, z: int) -> int | None:
        """Offload age at service column ``z`` for threshold-form policies."""
        if self.thresholds is None:
            return None
        return self.thresholds[z] if z < len(self.thresholds) else self.thresholds[-1]


def age_threshold_policy(a_star: int, a_max: int) -> Policy:
    """Offload exactly when the age reaches ``a_star``.

    Defined with ``>=`` rather than ``==`` so the rule is total on every
    state even though trajectories from ``(1, 0)`` only ever hit the
    threshold with equality.
    """
    if int(a_star) != a_star or a_star < 1:
        raise ValueError(f"a_star must be an integer >= 1, got {a_star}")
    if a_star > a_max:
        raise ValueError(f"a_star {a_star} exceeds the age ceiling {a_max}")
    return Policy(name=f"age_threshold({a_star})", thresholds=(int(a_star),))


def service_threshold_policy(z_star: int) -> Policy:
    """Offload exactly when the in-service update has been busy ``z_star`` slots.

    In state terms: act 1 iff ``z >= z_star``, which at every occurring age
    (``a >= z + 1``) is an age threshold of 1 from column ``z_star`` onward.
    """
    if int(z_star) != z_star or z_star < 0:
        raise ValueError(f"z_star must be a non-negative integer, got {z_star}")
    return Policy(
        name=f"service_threshold({z_star})",
        thresholds=(NEVER_OFFLOAD,) * int(z_star) + (1,),
    )


def local_only_policy() -> Policy:
    return Policy(name="local_only", thresholds=(NEVER_OFFLOAD,))


def mec_only_policy() -> Policy:
    return Policy(name="mec_only", thresholds=(1,))


def threshold_table_policy(table, name: str | None = None) -> Policy:
    return Policy(name=name or "threshold_table", thresholds=tuple(int(t) for t in table))


@dataclass
class ChainModel:
    """Row-stochastic transition structure of a policy restricted to the
    states reachable from ``(1, 0)`` under the truncated dynamics."""

    states: list[State]
    index: dict[State, int]
    matrix: sp.csr_matrix
    actions: np.ndarray
    params: ModelParams

    @property
    def n(self) -> int:
        return len(self.states)


def build_chain(policy: Policy, params: ModelParams) -> ChainModel:
    """Breadth-first expansion of the chain induced by ``policy``.

    States at the age ceiling offload regardless of the policy (that is what
    truncation means), so the reachable set is finite and every row sums to
    one exactly.
    """
    states: list[State] = [RESET]
    index: dict[State, int] = {RESET: 0}
    actions: list[int] = []
    rows: list[int] = []
    cols: list[int] = []
    probs: list[float] = []
    queue: deque[State] = deque([RESET])
    while queue:
        s = queue.popleft()
        i = index[s]
        u = 1 if s.a >= params.a_max else policy.action(s.a, s.z)
        actions.append(u)
        for t in transitions(s, u, params):
            j = index.get(t.next)
            if j is None:
                j = len(states)
                index[t.next] = j
                states.append(t.next)
                queue.append(t.next)
            rows.append(i)
            cols.append(j)
            probs.append(t.prob)
    n = len(states)
    matrix = sp.csr_matrix((probs, (rows, cols)), shape=(n, n))
    return ChainModel(states=states, index=index, matrix=matrix,
                      actions=np.asarray(actions), params=params)


class StationarySolveError(RuntimeError):
    """Stationary solve did not reach the required balance residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class StationaryDistribution:
    """Probability vector with its balance residual ``max |pi P - pi|``."""

    states: list[State]
    probs: np.ndarray
    residual: float
    method: str
    iterations: int = 0

    def prob(self, s) -> float:
        s = State(*s)
        for st, p in zip(self.states, self.probs):
            if st == s:
                return float(p)
        return 0.0

    def as_dict(self) -> dict[State, float]:
        return {s: float(p) for s, p in zip(self.states, self.probs)}


def _residual(matrix: sp.csr_matrix, pi: np.ndarray) -> float:
    return float(np.max(np.abs(pi @ matrix - pi)))


def _solve_direct(matrix: sp.csr_matrix) -> np.ndarray:
    n = matrix.shape[0]
    if n == 1:
        return np.ones(1)
    b = np.zeros(n)
    b[0] = 1.0  # one balance equation replaced by the normalization
    if n <= 600:
        a = matrix.toarray().T - np.eye(n)
        a[0, :] = 1.0
        pi = np.linalg.solve(a, b)
    else:
        a = (matrix.T - sp.identity(n, format="csr")).tolil()
        a[0, :] = 1.0
        pi = spla.spsolve(a.tocsr(), b)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    return pi / pi.sum()


def _solve_power(matrix: sp.csr_matrix, tol: float, max_iters: int):
    n = matrix.shape[0]
    pt = matrix.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for it in range(1, max_iters + 1):
        nxt = pt @ pi
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) <= tol:
            return nxt, it, True
        pi = nxt
    return pi, max_iters, False


def stationary(
    chain: ChainModel,
    method: str = "auto",
    tol: float = 1e-12,
    max_iters: int = 10**6,
    residual_tol: float = 1e-10,
) -> StationaryDistribution:
    """Stationary distribution of the chain.

    ``power`` iterates ``pi <- pi P`` until successive iterates differ by at
    most ``tol`` in max norm; ``direct`` solves the balance equations
    sparsely.  ``auto`` runs power iteration and falls back to the direct
    solve when it fails to converge on chains small enough to factor
    (< 5000 states).  Whatever the route, the result must satisfy the
    balance residual bound or a ``StationarySolveError`` is raised.
    """
    if method not in ("auto", "power", "direct"):
        raise ValueError(f"unknown stationary method {method!r}")
    matrix = chain.matrix
    n = chain.n
    used = method
    iterations = 0
    if method == "direct" or n == 1:
        pi = _solve_direct(matrix)
        used = "direct"
    else:
        pi, iterations, converged = _solve_power(matrix, tol, max_iters)
        used = "power"
        if not converged:
            if method == "auto" and n < 5000:
                pi = _solve_direct(matrix)
                used = "direct"
            else:
                raise StationarySolveError(
                    f"power iteration did not converge within {max_iters} iterations "
                    f"(residual {_residual(matrix, pi):.3e})",
                    residual=_residual(matrix, pi),
                )
    res = _residual(matrix, pi)
    if res > residual_tol or pi.min() < -1e-12 or abs(pi.sum() - 1.0) > 1e-10:
        raise StationarySolveError(
            f"stationary solve ({used}) failed the balance check: residual {res:.3e}",
            residual=res,
        )
    return StationaryDistribution(states=chain.states, probs=np.maximum(pi, 0.0),
                                  residual=res, method=used, iterations=iterations)


def evaluate_exact(policy: Policy, params: ModelParams, method: str = "auto") -> EvalResult:
    """Average age, edge-use frequency and cost of ``policy``, solved exactly."""
    chain = build_chain(policy, params)
    dist = stationary(chain, method=method)
    ages = np.fromiter((s.a for s in chain.states), dtype=float, count=chain.n)
    delta = float(ages @ dist.probs) + 0.5
    p_bar = float(dist.probs[chain.actions == 1].sum())
    p_bar = min(max(p_bar, 0.0), 1.0)
    return EvalResult(delta=delta, p_bar=p_bar, g=delta + params.lam * p_bar)
