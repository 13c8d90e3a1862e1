"""Selection samplers and the selection code built on top of them.

Both samplers read proposals ``Y_1, Y_2, ...`` from the shared stream, so the
decoder only needs the selected index ``N`` to reproduce ``Y_N``.  Draw
layout per step (part of the wire contract, since decoders seek directly to
step ``N``):

* rejection: ``Y_k`` (``mech.marginal_draws`` words), then ``U_k`` (one word)
* pfr:       ``Delta_k`` (one word), then ``Y_k``

The pfr layout lets the stopping test at step ``k`` read ``T_{k+1}`` without
touching proposal ``k + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

from .codes import BitCursor, BitString, elias_delta_decode, elias_delta_encode
from .errors import BudgetExhausted, UnboundedRatioError
from .models import Mechanism
from .randomness import DeterministicStream

__all__ = [
    "Budget", "SelectionOutcome", "PfrState", "ALGORITHMS",
    "rejection_select", "pfr_select", "sort_index",
    "selection_select", "selection_encode", "selection_decode", "proposal_offset",
]

ALGORITHMS = ("rejection", "pfr")


@dataclass(frozen=True)
class Budget:
    """Cap on the number of proposals a sampler may examine.

    With ``approximate=True`` an exhausted sampler returns its current best
    candidate instead of raising, which gives a biased but bounded-time
    sampler.
    """

    max_steps: int | None = None
    approximate: bool = False

    def __post_init__(self):
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    @property
    def unlimited(self) -> bool:
        return self.max_steps is None


UNLIMITED = Budget()


@dataclass(frozen=True)
class SelectionOutcome:
    index: int
    steps: int
    sample: Any
    exact: bool = True


@dataclass
class PfrState:
    tau: float = math.inf
    arrival: float = 0.0
    best_index: int = 0


def _checked_sup(mech: Mechanism, x) -> float:
    bound = mech.ratio_sup(x)
    if not math.isfinite(bound):
        raise UnboundedRatioError(f"ratio bound is not finite at x={x}")
    return bound


def rejection_select(mech: Mechanism, x, stream: DeterministicStream,
                     budget: Budget = UNLIMITED) -> SelectionOutcome:
    bound = _checked_sup(mech, x)
    limit = budget.max_steps
    k = 0
    best_index, best_score, best_sample = 0, math.inf, None
    while limit is None or k < limit:
        k += 1
        y = mech.marginal_sample(stream)
        u = stream.next_uniform()
        r = mech.density_ratio(x, y)
        if u * bound <= r:
            return SelectionOutcome(k, k, y)
        if r > 0 and u / r < best_score:
            best_index, best_score, best_sample = k, u / r, y
    if budget.approximate and best_index:
        return SelectionOutcome(best_index, k, best_sample, exact=False)
    raise BudgetExhausted(k, best_index)


def pfr_select(mech: Mechanism, x, stream: DeterministicStream,
               budget: Budget = UNLIMITED, trace: list | None = None) -> SelectionOutcome:
    """Poisson functional representation (global-bound A*) sampler.

    If ``trace`` is a list, the state after each examined proposal is
    appended to it as a ``PfrState`` snapshot.
    """
    bound = _checked_sup(mech, x)
    limit = budget.max_steps
    st = PfrState()
    best_sample = None
    k = 0
    while True:
        arrival = st.arrival + stream.next_exponential()
        # tau_k <= T_{k+1} / ||r||: the best candidate can no longer be beaten
        if k and st.tau * bound <= arrival:
            return SelectionOutcome(st.best_index, k, best_sample)
        if limit is not None and k >= limit:
            break
        k += 1
        st.arrival = arrival
        y = mech.marginal_sample(stream)
        r = mech.density_ratio(x, y)
        if r > 0:
            score = arrival / r
            if score < st.tau:
                st.tau, st.best_index, best_sample = score, k, y
        if trace is not None:
            trace.append(PfrState(st.tau, st.arrival, st.best_index))
    if budget.approximate and st.best_index:
        return SelectionOutcome(st.best_index, k, best_sample, exact=False)
    raise BudgetExhausted(k, st.best_index)


def sort_index(uniforms: Sequence[float], k: int, horizon: int) -> int:
    """Rank of ``uniforms[k-1]`` among the first ``horizon`` values (1-based)."""
    if not 1 <= k <= horizon <= len(uniforms):
        raise IndexError(f"need 1 <= k={k} <= horizon={horizon} <= {len(uniforms)}")
    pivot = uniforms[k - 1]
    return sum(1 for u in uniforms[:horizon] if u <= pivot)


_SAMPLERS = {"rejection": rejection_select, "pfr": pfr_select}


def _sampler(algo: str):
    try:
        return _SAMPLERS[algo]
    except KeyError:
        raise ValueError(f"unknown selection algorithm {algo!r}") from None


def proposal_offset(mech: Mechanism, algo: str, index: int) -> int:
    """Stream counter at which proposal ``index`` (1-based) starts."""
    _sampler(algo)
    step = mech.marginal_draws + 1
    return (index - 1) * step + (1 if algo == "pfr" else 0)


def selection_select(mech: Mechanism, x, seed: int, substream: int, algo: str,
                     budget: Budget = UNLIMITED) -> SelectionOutcome:
    return _sampler(algo)(mech, x, DeterministicStream(seed, substream), budget)


def selection_encode(mech: Mechanism, x, seed: int, substream: int, algo: str,
                     budget: Budget = UNLIMITED) -> BitString:
    outcome = selection_select(mech, x, seed, substream, algo, budget)
    return elias_delta_encode(outcome.index)


def selection_decode(mech: Mechanism, bits: BitString, cursor: BitCursor, seed: int,
                     substream: int, algo: str):
    """Recover the selected proposal.

    A seed or substream mismatch cannot be detected: the decoder will simply
    return a proposal from the wrong sequence.
    """
    index = elias_delta_decode(bits, cursor)
    stream = DeterministicStream(seed, substream, proposal_offset(mech, algo, index))
    return mech.marginal_sample(stream)
