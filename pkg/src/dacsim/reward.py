"""Reward schemes for contract responses and the cheap-bribe attacks on them.

A contract holding a reward pot T can pay responders to a complaint, hoping
to guarantee a response.  Unless the pot covers the committee's total
response cost, an adversary can buy a mixed equilibrium in which every
member responds only with some probability and the complaint goes
unanswered with constant probability.  Two variants: the adversary buys
silence over the network only, or over the network and the contract both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

ROOT_SCAN_POINTS = 1000
ROOT_ITERATIONS = 200


class NoEquilibrium(Exception):
    """The reward pot is large enough to deter the attack."""


@dataclass(frozen=True)
class RewardSchedule:
    """Pot T and the amount T_n paid out when n members respond."""

    total: float
    per_count: tuple[float, ...]

    def __post_init__(self):
        if any(not 0.0 <= t <= self.total for t in self.per_count):
            raise ValueError("every payout must lie in [0, total]")

    @property
    def n_members(self) -> int:
        return len(self.per_count)


def constant_schedule(total: float, n_members: int) -> RewardSchedule:
    """First responder takes the pot: the payout is the full pot at any count."""
    return RewardSchedule(total=total, per_count=(total,) * n_members)


def payoff_vectors(
    n_members: int, stake: float, schedule: RewardSchedule, q: float
) -> tuple[np.ndarray, np.ndarray]:
    """Response-count distribution and per-responder payout vector.

    q_vec[i] is the probability that exactly i of the other n-1 members
    respond when each responds independently with probability q; T_vec[i] is
    the expected payout share T_{i+1}/(i+1), plus the avoided slash `stake`
    in the lone-responder slot i = 0.
    """
    if n_members < 2:
        raise ValueError("needs at least 2 members; the single-member case degenerates")
    counts = np.arange(n_members)
    q_vec = binom.pmf(counts, n_members - 1, q)
    t_vec = np.array(
        [schedule.per_count[i] / (i + 1) + (stake if i == 0 else 0.0) for i in counts]
    )
    return q_vec, t_vec


@dataclass(frozen=True)
class RewardEquilibrium:
    q_contract: float
    q_fail: float
    q_network: Optional[float] = None
    bribe_cost_per_node: Optional[float] = None
    adversary_spend: float = 0.0
    residual: float = 0.0


def _solve_response_rate(
    n_members: int, stake: float, schedule: RewardSchedule, target: float
) -> tuple[float, float]:
    """Smallest q in (0, 1) with <q_vec(q), T_vec> = target.

    The inner product need not be monotone in q for general schedules, so the
    root is bracketed by a coarse scan before bisecting; the smallest root is
    a deterministic tie-break.  Returns (root, residual).
    """

    def value(q: float) -> float:
        q_vec, t_vec = payoff_vectors(n_members, stake, schedule, q)
        return float(q_vec @ t_vec)

    grid = np.linspace(0.0, 1.0, ROOT_SCAN_POINTS + 1)
    values = np.array([value(q) for q in grid])
    signs = values - target
    bracket_at = None
    for i in range(len(grid) - 1):
        if signs[i] == 0.0:
            return float(grid[i]), 0.0
        if signs[i] * signs[i + 1] <= 0.0:
            bracket_at = i
            break
    if bracket_at is None:
        raise NoEquilibrium("indifference equation has no root in [0, 1]")
    lo, hi = float(grid[bracket_at]), float(grid[bracket_at + 1])
    increasing = signs[bracket_at] < 0.0
    for _ in range(ROOT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        below = (value(mid) < target) if increasing else (value(mid) > target)
        if below:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return root, abs(value(root) - target)


def solve_reward_equilibrium(
    n_members: int, clue_cost: float, stake: float, schedule: RewardSchedule
) -> RewardEquilibrium:
    """Equilibrium when the adversary pays clue_cost per member for silence
    over the network, and members race for contract rewards.

    Exists only while the pot is below the committee's total response cost
    n * clue_cost; then every member responds on the contract with
    probability q*, the complaint dies with probability (1 - q*)^n, and the
    per-member bribe actually needed is below clue_cost.
    """
    if schedule.n_members != n_members:
        raise ValueError("schedule length must match the member count")
    if schedule.total >= n_members * clue_cost:
        raise NoEquilibrium(
            "pot covers the committee's response cost; the attack is deterred"
        )
    q_star, residual = _solve_response_rate(n_members, stake, schedule, clue_cost)
    q_fail = (1.0 - q_star) ** n_members
    per_node = clue_cost - (1.0 - q_star) ** (n_members - 1) * stake
    return RewardEquilibrium(
        q_contract=q_star,
        q_fail=q_fail,
        bribe_cost_per_node=per_node,
        adversary_spend=n_members * per_node,
        residual=residual,
    )


def solve_reward_equilibrium_bribed(
    n_members: int,
    clue_cost: float,
    stake: float,
    bribe: float,
    schedule: RewardSchedule,
) -> RewardEquilibrium:
    """Equilibrium when the bribe buys silence over the network and the
    contract both.

    Members mix twice: respond over the network with probability q_r*, and
    on a complaint respond on the contract with probability q_c*.  The
    complaint dies when nobody responds anywhere, with probability
    ((1 - q_r*)(1 - q_c*))^n.
    """
    if schedule.n_members != n_members:
        raise ValueError("schedule length must match the member count")
    if not clue_cost < stake:
        raise ValueError("requires clue_cost < stake")
    if not 0.0 < bribe <= stake - clue_cost:
        raise ValueError("requires 0 < bribe <= stake - clue_cost")
    if schedule.total >= n_members * (clue_cost + bribe):
        raise NoEquilibrium(
            "pot covers response cost plus bribe; the attack is deterred"
        )
    q_c, residual = _solve_response_rate(
        n_members, stake, schedule, clue_cost + bribe
    )
    silent = (1.0 - q_c) ** (n_members - 1)
    denom = bribe + silent * stake
    q_r = 1.0 - (bribe / denom) ** (1.0 / (n_members - 1))
    q_fail = ((1.0 - q_r) * (1.0 - q_c)) ** n_members
    spend = n_members * (bribe**2 * (1.0 - q_c) / denom)
    return RewardEquilibrium(
        q_contract=q_c,
        q_fail=q_fail,
        q_network=q_r,
        adversary_spend=spend,
        residual=residual,
    )
