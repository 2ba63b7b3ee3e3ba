"""Core protocol parameters, utility functions, and payoff bookkeeping.

Monetary amounts are real-valued and denominated in ETH.  USD only ever
appears as a display conversion in the CLI.  All types here are immutable
values and all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

T_ANSWER = 4  # slot at whose beginning payoffs are realized; fixed by the protocol


@dataclass(frozen=True)
class ProtocolParams:
    """Committee size, recovery threshold, and the contract's monetary knobs.

    n_nodes:       total committee size N (nodes N-f+1..N are the Byzantine ones).
    n_byzantine:   number f of adversary-controlled nodes.
    threshold_k:   clues needed to reconstruct an answer (1 <= k <= N - f).
    stake:         collateral per node, forfeited entirely on a failed query.
    clue_cost:     cost of building and posting one clue on chain.
    query_cost:    cost for the client to post a query on chain.
    client_value:  client's payoff from a timely answer.
    compensation:  paid to the client out of slashed funds when recovery fails.
    epsilon_slash: extra margin added to the mild penalty for safe non-response.
    """

    n_nodes: int
    n_byzantine: int
    threshold_k: int
    stake: float
    clue_cost: float
    query_cost: float
    client_value: float
    compensation: float
    epsilon_slash: float
    t_answer: int = T_ANSWER

    @property
    def n_rational(self) -> int:
        """Number of bribe-susceptible (non-Byzantine) nodes, N - f."""
        return self.n_nodes - self.n_byzantine

    @property
    def n_critical(self) -> int:
        """Smallest set of rational nodes whose silence defeats recovery, N - f - k + 1."""
        return self.n_rational - self.threshold_k + 1

    @property
    def collusion_threshold(self) -> float:
        """Bribe budget above which full withholding becomes an equilibrium."""
        return self.n_critical * (self.stake - self.clue_cost)

    @property
    def safe_penalty(self) -> float:
        """Penalty for a missing clue when the quorum was met anyway."""
        return self.clue_cost + self.epsilon_slash


@dataclass(frozen=True)
class AdversaryParams:
    """Bribe budgets: node_budget to split among nodes, client_bribe for the client."""

    node_budget: float
    client_bribe: float

    def __post_init__(self):
        if self.node_budget < 0 or self.client_bribe < 0:
            raise ValueError("bribe budgets must be nonnegative")


@dataclass(frozen=True)
class UtilitySpec:
    """Wealth utility U(x) = x**nu over end-of-game wealth baseline + payoff.

    nu = 1 is risk-neutral with the baseline normalized to 0.  nu < 1 models
    risk aversion; the baseline is then the node's starting wealth stake +
    clue_cost so that even a fully slashed node ends at wealth zero.
    """

    nu: float
    baseline: float

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("nu must lie in (0, 1]")
        if self.nu == 1.0 and self.baseline != 0.0:
            raise ValueError("risk-neutral utility requires a zero baseline")
        if self.nu < 1.0 and self.baseline < 0.0:
            raise ValueError("risk-averse utility requires a nonnegative baseline")


def risk_neutral() -> UtilitySpec:
    return UtilitySpec(nu=1.0, baseline=0.0)


def risk_averse(nu: float, params: ProtocolParams) -> UtilitySpec:
    """Concave utility with the node's starting wealth as baseline."""
    if not 0.0 < nu < 1.0:
        raise ValueError("risk-averse nu must lie in (0, 1)")
    return UtilitySpec(nu=nu, baseline=params.stake + params.clue_cost)


def utility(spec: UtilitySpec, net_payoff: float) -> float:
    """Evaluate U(baseline + net_payoff).

    Raises ValueError for a negative argument under nu < 1: that signals
    parameters where a punishment exceeds total wealth.
    """
    if spec.nu == 1.0:
        return net_payoff
    wealth = spec.baseline + net_payoff
    if wealth < 0.0:
        raise ValueError(
            f"negative wealth {wealth} not in the domain of x**{spec.nu}"
        )
    return wealth ** spec.nu


class ActionVector:
    """Response bitmap of length N: entry i is 1 iff node i posted a valid clue
    in the slot after the on-chain query."""

    __slots__ = ("bits",)

    def __init__(self, bits: Sequence[int] | np.ndarray):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("action vector must be one-dimensional")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("action vector entries must be binary")
        self.bits = arr

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def responders(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, ActionVector) and np.array_equal(self.bits, other.bits)

    def __repr__(self) -> str:
        return f"ActionVector({self.bits.tolist()})"


@dataclass(frozen=True)
class PayoffReport:
    """Per-node payoff deltas plus the client's delta for one contract round."""

    node_payoffs: np.ndarray
    client_payoff: float

    def __post_init__(self):
        object.__setattr__(
            self, "node_payoffs", np.asarray(self.node_payoffs, dtype=float)
        )


def validate(params: ProtocolParams) -> list[str]:
    """Return the violated parameter constraints by name; empty means valid."""
    violations = []
    if params.n_nodes < 1:
        violations.append("n_nodes >= 1")
    if not 0 <= params.n_byzantine < params.n_nodes:
        violations.append("0 <= n_byzantine < n_nodes")
    if params.threshold_k < 1:
        violations.append("threshold_k >= 1")
    if params.threshold_k > params.n_nodes - params.n_byzantine:
        violations.append("threshold_k <= n_nodes - n_byzantine")
    if not params.query_cost < params.compensation:
        violations.append("query_cost < compensation")
    if not params.compensation < params.stake:
        violations.append("compensation < stake")
    if not params.compensation < params.client_value:
        violations.append("compensation < client_value")
    if params.clue_cost < 0:
        violations.append("clue_cost >= 0")
    if not params.stake > params.clue_cost:
        violations.append("stake > clue_cost")
    if not params.epsilon_slash > 0:
        violations.append("epsilon_slash > 0")
    if params.t_answer != T_ANSWER:
        violations.append("t_answer == 4")
    return violations


def require_valid(params: ProtocolParams) -> ProtocolParams:
    bad = validate(params)
    if bad:
        raise ValueError("invalid protocol parameters: " + "; ".join(bad))
    return params


# Flat JSON wire format shared by the CLI config file and library users.
_JSON_FIELDS = (
    "n_nodes",
    "n_byzantine",
    "threshold_k",
    "stake",
    "clue_cost",
    "query_cost",
    "client_value",
    "compensation",
    "epsilon_slash",
    "p0",
    "p1",
    "nu",
)


def config_to_json(
    params: ProtocolParams, adversary: AdversaryParams, spec: UtilitySpec
) -> dict:
    """Serialize the three parameter blocks to one flat JSON object."""
    return {
        "n_nodes": params.n_nodes,
        "n_byzantine": params.n_byzantine,
        "threshold_k": params.threshold_k,
        "stake": params.stake,
        "clue_cost": params.clue_cost,
        "query_cost": params.query_cost,
        "client_value": params.client_value,
        "compensation": params.compensation,
        "epsilon_slash": params.epsilon_slash,
        "p0": adversary.node_budget,
        "p1": adversary.client_bribe,
        "nu": spec.nu,
    }


def config_from_json(obj: dict) -> tuple[ProtocolParams, AdversaryParams, UtilitySpec]:
    """Parse the flat JSON object produced by config_to_json."""
    missing = [k for k in _JSON_FIELDS if k not in obj]
    if missing:
        raise ValueError(f"missing config fields: {', '.join(missing)}")
    params = ProtocolParams(
        n_nodes=int(obj["n_nodes"]),
        n_byzantine=int(obj["n_byzantine"]),
        threshold_k=int(obj["threshold_k"]),
        stake=float(obj["stake"]),
        clue_cost=float(obj["clue_cost"]),
        query_cost=float(obj["query_cost"]),
        client_value=float(obj["client_value"]),
        compensation=float(obj["compensation"]),
        epsilon_slash=float(obj["epsilon_slash"]),
    )
    adversary = AdversaryParams(
        node_budget=float(obj["p0"]), client_bribe=float(obj["p1"])
    )
    nu = float(obj["nu"])
    spec = risk_neutral() if nu == 1.0 else risk_averse(nu, params)
    return params, adversary, spec


def eth_table2_params(n_nodes: int = 300_000) -> ProtocolParams:
    """Ethereum-scale defaults: 32 ETH stake, one-third committee rule."""
    n_critical = max(1, n_nodes // 3)
    # choose f = k so that N - f - k + 1 hits the committee rule exactly
    spare = n_nodes - n_critical + 1
    threshold_k = spare // 2
    n_byzantine = spare - threshold_k
    return ProtocolParams(
        n_nodes=n_nodes,
        n_byzantine=n_byzantine,
        threshold_k=threshold_k,
        stake=32.0,
        clue_cost=0.0226,
        query_cost=0.001,
        client_value=1.0,
        compensation=0.01,
        epsilon_slash=0.001,
    )
