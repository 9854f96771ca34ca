"""Discrete-time model primitives for the edge-offloading scheduler.

One slot of the system is described by the pair ``(a, z)``: the age of the
freshest update held by the monitor and the number of slots the update
currently in service has spent on the local processor.  Each slot the
scheduler either lets the local processor keep working (action 0), which
finishes with probability ``mu`` and delivers an update of age ``z + 1``,
or aborts local work, pulls a fresh update and has the edge cloud serve it
within the slot (action 1), which costs ``lam`` and resets the system to
``(1, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "State",
    "Transition",
    "ModelParams",
    "RESET",
    "LOCAL",
    "OFFLOAD",
    "transitions",
    "cost",
    "truncated_states",
    "validate_state",
]

LOCAL = 0
OFFLOAD = 1


class State(NamedTuple):
    """Age at the monitor (``a >= 1``) and elapsed local service (``z >= 0``)."""

    a: int
    z: int


class Transition(NamedTuple):
    """One outgoing edge of the kernel: successor state and its probability."""

    next: State
    prob: float


#: State right after an edge-served update is delivered.
RESET = State(1, 0)


@dataclass(frozen=True)
class ModelParams:
    """Model constants shared by every solver and evaluator.

    mu:    per-slot completion probability of the local processor, in (0, 1].
    lam:   price charged per edge use, >= 0.
    beta:  discount factor for the discounted value iterates, in (0, 1).
    a_max: age ceiling of the truncated state space; once the age reaches it
           the scheduler is forced to offload, so ages never exceed a_max.
    """

    mu: float
    lam: float = 0.0
    beta: float = 0.99
    a_max: int = 50

    def __post_init__(self) -> None:
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must be in (0, 1], got {self.mu}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if int(self.a_max) != self.a_max or self.a_max < 2:
            raise ValueError(f"a_max must be an integer >= 2, got {self.a_max}")


def validate_state(s: State) -> None:
    if s.a < 1 or s.z < 0:
        raise ValueError(f"invalid state {tuple(s)}: need a >= 1 and z >= 0")


def _validate_action(u: int) -> None:
    if u not in (LOCAL, OFFLOAD):
        raise ValueError(f"invalid action {u!r}: must be 0 (local) or 1 (offload)")


def transitions(s: State, u: int, p: ModelParams) -> list[Transition]:
    """Successor distribution for one slot.

    Offloading resets to ``(1, 0)`` with probability one.  Keeping the work
    local completes with probability ``mu`` (the monitor then holds an update
    of age ``z + 1`` and a fresh one enters service) and otherwise both
    counters advance.  Zero-probability branches are dropped, so the result
    always carries total probability one.  The kernel itself knows nothing
    about truncation; callers that enforce the ``a_max`` ceiling must forbid
    action 0 at ``a == a_max`` instead.
    """
    s = State(*s)
    validate_state(s)
    _validate_action(u)
    if u == OFFLOAD:
        return [Transition(RESET, 1.0)]
    out = []
    if p.mu > 0.0:
        out.append(Transition(State(s.z + 1, 0), p.mu))
    if p.mu < 1.0:
        out.append(Transition(State(s.a + 1, s.z + 1), 1.0 - p.mu))
    return out


def cost(s: State, u: int, p: ModelParams) -> float:
    """Per-slot cost: the age accrued over the slot plus the edge price if used.

    Ages accrue continuously within a slot, so a slot entered at age ``a``
    contributes ``a + 1/2``.
    """
    s = State(*s)
    validate_state(s)
    _validate_action(u)
    return s.a + 0.5 + p.lam * u


def truncated_states(a_max: int) -> list[State]:
    """All states that can occur from ``(1, 0)`` with ages up to ``a_max``.

    The age at generation ``a - z`` is at least one and is preserved while an
    update sits in local service, so occurring states satisfy ``z <= a - 1``.
    Enumeration is row-major over ``a``.
    """
    return [State(a, z) for a in range(1, a_max + 1) for z in range(a)]
