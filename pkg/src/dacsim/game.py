"""Slot-based simulator of the query game and its repeated bribery variant.

One game spans four slots: the client's query goes out over the network at
slot 1 and replies arrive by its end; at slot 2 the client may post the query
on chain; nodes respond on chain one slot after they observe it; payoffs are
realized at the beginning of slot 4.  Messages sent at a slot are delivered
by its end, and on-chain state becomes visible at the start of the next slot.

Monte Carlo entry points route through the compiled kernels when the profile
allows it, with a reference slot-by-slot path kept for auditing; both consume
the same pre-drawn uniforms, so they agree trial by trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .contract import SlashingFunction, optimal
from .model import (
    ActionVector,
    AdversaryParams,
    ProtocolParams,
    UtilitySpec,
    require_valid,
    utility,
)

Z99 = 2.5758293035489004  # two-sided 99% normal quantile

NODE_KINDS = ("honest", "byzantine", "bribed_withhold", "free_rider", "place_only")
CLIENT_KINDS = ("honest", "always_query", "silent")

_NODE_CODE = {
    "honest": kernels.HONEST,
    "byzantine": kernels.BYZANTINE,
    "bribed_withhold": kernels.BRIBED,
    "free_rider": kernels.FREE_RIDER,
    "place_only": kernels.PLACE_ONLY,
}
_CLIENT_CODE = {
    "honest": kernels.CLIENT_HONEST,
    "always_query": kernels.CLIENT_ALWAYS,
    "silent": kernels.CLIENT_SILENT,
}


@dataclass(frozen=True)
class NodeStrategy:
    kind: str
    place_prob: float = 1.0  # free_rider only
    coin: int = 0  # bribed_withhold only: shared-coin id

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"unknown node strategy {self.kind!r}")
        if not 0.0 <= self.place_prob <= 1.0:
            raise ValueError("place_prob must lie in [0, 1]")


def honest() -> NodeStrategy:
    return NodeStrategy("honest")


def byzantine() -> NodeStrategy:
    return NodeStrategy("byzantine")


def bribed_withhold(coin: int = 0) -> NodeStrategy:
    return NodeStrategy("bribed_withhold", coin=coin)


def free_rider(place_prob: float) -> NodeStrategy:
    return NodeStrategy("free_rider", place_prob=place_prob)


def place_only() -> NodeStrategy:
    return NodeStrategy("place_only")


@dataclass(frozen=True)
class ClientStrategy:
    kind: str

    def __post_init__(self):
        if self.kind not in CLIENT_KINDS:
            raise ValueError(f"unknown client strategy {self.kind!r}")


def honest_client() -> ClientStrategy:
    return ClientStrategy("honest")


def always_query() -> ClientStrategy:
    return ClientStrategy("always_query")


def silent_client() -> ClientStrategy:
    return ClientStrategy("silent")


@dataclass(frozen=True)
class GameConfig:
    params: ProtocolParams
    adversary: AdversaryParams
    utility: UtilitySpec
    slashing: SlashingFunction = field(default_factory=optimal)
    rng_seed: int = 0
    coin_withhold_prob: float = 0.0  # shared-coin bias for bribed nodes

    def __post_init__(self):
        require_valid(self.params)
        if not 0.0 <= self.coin_withhold_prob <= 1.0:
            raise ValueError("coin_withhold_prob must lie in [0, 1]")


@dataclass(frozen=True)
class Deviation:
    """Flip one participant's single-shot decision: a node's reply or chain
    response, or the client's query."""

    actor: str  # "node" or "client"
    index: int = 0
    action: str = "place"  # reply | place | query


@dataclass(frozen=True)
class GameDraws:
    """Pre-drawn uniforms so replays and paired comparisons share randomness."""

    coin: np.ndarray  # one uniform per distinct coin id, sorted by id
    nodes: np.ndarray  # one uniform per node


@dataclass
class GameOutcome:
    security_ok: bool
    queried: bool
    replied: np.ndarray
    placed: Optional[np.ndarray]
    action_vector: Optional[ActionVector]
    node_net_payoffs: np.ndarray
    client_net_payoff: float
    bribes_paid: np.ndarray
    client_bribe_paid: float
    transcript: list


def _coin_ids(node_strategies: Sequence[NodeStrategy]) -> list[int]:
    return sorted({s.coin for s in node_strategies if s.kind == "bribed_withhold"})


def _draws_for(config: GameConfig, node_strategies, seed=None) -> GameDraws:
    rng = np.random.default_rng(config.rng_seed if seed is None else seed)
    n_coins = max(1, len(_coin_ids(node_strategies)))
    return GameDraws(coin=rng.random(n_coins), nodes=rng.random(config.params.n_nodes))


def run_game(
    config: GameConfig,
    node_strategies: Sequence[NodeStrategy],
    client_strategy: ClientStrategy,
    draws: Optional[GameDraws] = None,
    deviation: Optional[Deviation] = None,
) -> GameOutcome:
    """Play one four-slot game and return the full outcome with transcript."""
    params = config.params
    n = params.n_nodes
    if len(node_strategies) != n:
        raise ValueError("need one strategy per node")
    if draws is None:
        draws = _draws_for(config, node_strategies)

    coin_ids = _coin_ids(node_strategies)
    coin_withhold = {
        cid: bool(draws.coin[j] < config.coin_withhold_prob)
        for j, cid in enumerate(coin_ids)
    }

    transcript = []

    def flips(actor, index, action):
        return (
            deviation is not None
            and deviation.actor == actor
            and deviation.index == index
            and deviation.action == action
        )

    # slot 1: the environment hands the query to everyone; honest nodes reply
    # over the network, delivered by the end of the slot
    replied = np.zeros(n, dtype=bool)
    for i, strat in enumerate(node_strategies):
        wants = strat.kind == "honest"
        if flips("node", i, "reply"):
            wants = not wants
        replied[i] = wants
        if wants:
            transcript.append({"slot": 1, "actor": f"node_{i}", "action": "reply"})

    # slot 2: the client knows the slot-1 replies and may post the query
    replies_seen = int(replied.sum())
    if client_strategy.kind == "honest":
        wants_query = replies_seen < params.threshold_k
    elif client_strategy.kind == "always_query":
        wants_query = True
    else:
        wants_query = False
    if flips("client", 0, "query"):
        wants_query = not wants_query
    queried = wants_query
    if queried:
        transcript.append({"slot": 2, "actor": "client", "action": "query"})

    # slot 3: nodes saw the on-chain query at the start of the slot and
    # respond on chain; the contract accepts exactly this slot's clues
    placed = None
    if queried:
        for cid in coin_ids:
            transcript.append(
                {
                    "slot": 3,
                    "actor": "adversary",
                    "action": "coin",
                    "detail": {"id": cid, "withhold": coin_withhold[cid]},
                }
            )
        placed = np.zeros(n, dtype=bool)
        for i, strat in enumerate(node_strategies):
            if strat.kind in ("honest", "place_only"):
                wants = True
            elif strat.kind == "bribed_withhold":
                wants = not coin_withhold[strat.coin]
            elif strat.kind == "free_rider":
                wants = draws.nodes[i] < strat.place_prob
            else:  # byzantine
                wants = False
            if flips("node", i, "place"):
                wants = not wants
            placed[i] = wants
            if wants:
                transcript.append({"slot": 3, "actor": f"node_{i}", "action": "place"})

    # beginning of slot 4: payoffs realize
    if queried:
        served = bool(np.count_nonzero(replied | placed) >= params.threshold_k)
    else:
        served = replies_seen >= params.threshold_k
    security_ok = served

    node_net = np.zeros(n)
    client_net = 0.0
    action_vector = None
    if queried:
        action_vector = ActionVector(placed.astype(np.uint8))
        slash_nodes, slash_client = config.slashing.payoffs(
            params, action_vector.bits
        )
        node_net += slash_nodes - params.clue_cost * placed
        client_net += slash_client - params.query_cost
        for i in range(n):
            if slash_nodes[i] < 0.0:
                transcript.append(
                    {
                        "slot": 4,
                        "actor": "contract",
                        "action": "slash",
                        "detail": {"node": i, "amount": -float(slash_nodes[i])},
                    }
                )
        if slash_client > 0.0:
            transcript.append(
                {
                    "slot": 4,
                    "actor": "contract",
                    "action": "compensate",
                    "detail": {"amount": float(slash_client)},
                }
            )
    if security_ok:
        client_net += params.client_value

    # bribes settle at game end, paid on observed compliance
    bribes_paid = np.zeros(n)
    bribed_idx = [
        i for i, s in enumerate(node_strategies) if s.kind == "bribed_withhold"
    ]
    if bribed_idx and config.adversary.node_budget > 0.0:
        per_node = config.adversary.node_budget / len(bribed_idx)
        for i in bribed_idx:
            complied = not replied[i]
            if queried:
                dictate_place = not coin_withhold[node_strategies[i].coin]
                complied = complied and placed[i] == dictate_place
            if complied:
                bribes_paid[i] = per_node
                transcript.append(
                    {
                        "slot": 4,
                        "actor": "adversary",
                        "action": "pay_bribe",
                        "detail": {"recipient": i, "amount": per_node},
                    }
                )
    node_net += bribes_paid

    client_bribe_paid = 0.0
    if config.adversary.client_bribe > 0.0 and client_strategy.kind != "honest":
        instructed_query = client_strategy.kind == "always_query"
        if queried == instructed_query:
            client_bribe_paid = config.adversary.client_bribe
            transcript.append(
                {
                    "slot": 4,
                    "actor": "adversary",
                    "action": "pay_bribe",
                    "detail": {"recipient": "client", "amount": client_bribe_paid},
                }
            )
    client_net += client_bribe_paid

    return GameOutcome(
        security_ok=security_ok,
        queried=queried,
        replied=replied,
        placed=placed,
        action_vector=action_vector,
        node_net_payoffs=node_net,
        client_net_payoff=client_net,
        bribes_paid=bribes_paid,
        client_bribe_paid=client_bribe_paid,
        transcript=transcript,
    )


@dataclass(frozen=True)
class MonteCarloResult:
    trials: int
    failures: int
    rate: float
    ci99: float
    queried: int
    method: str

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "failures": self.failures,
            "rate": self.rate,
            "ci99": self.ci99,
            "queried": self.queried,
            "method": self.method,
        }


def _kernel_profile(config, node_strategies, client_strategy):
    """Encode a profile for the kernels, or return None when unsupported."""
    if len(_coin_ids(node_strategies)) > 1:
        return None
    codes = np.array([_NODE_CODE[s.kind] for s in node_strategies], dtype=np.int64)
    probs = np.array([s.place_prob for s in node_strategies])
    return codes, probs, _CLIENT_CODE[client_strategy.kind]


def monte_carlo_failure(
    config: GameConfig,
    node_strategies: Sequence[NodeStrategy],
    client_strategy: ClientStrategy,
    trials: int,
    seed: int = 0,
    method: str = "auto",
    force_kernel: Optional[str] = None,
) -> MonteCarloResult:
    """Empirical failure rate with a binomial 99% confidence halfwidth.

    Trial t consumes row t of a uniform table drawn once from `seed`, so the
    result is deterministic and identical across the kernel and reference
    paths.
    """
    if trials < 1:
        raise ValueError("needs at least one trial")
    n = config.params.n_nodes
    rng = np.random.default_rng(seed)
    coin_u = rng.random(trials)
    node_u = rng.random((trials, n))

    encoded = _kernel_profile(config, node_strategies, client_strategy)
    if method == "auto":
        method = "kernel" if encoded is not None else "reference"
    if method == "kernel":
        if encoded is None:
            raise ValueError("profile not expressible in the kernel encoding")
        codes, probs, client_code = encoded
        failed, queried = kernels.profile_trials(
            codes,
            probs,
            config.coin_withhold_prob,
            client_code,
            config.params.threshold_k,
            node_u,
            coin_u,
            force=force_kernel,
        )
    elif method == "reference":
        failed = np.empty(trials, dtype=bool)
        queried = np.empty(trials, dtype=bool)
        for t in range(trials):
            outcome = run_game(
                config,
                node_strategies,
                client_strategy,
                draws=GameDraws(coin=coin_u[t : t + 1], nodes=node_u[t]),
            )
            failed[t] = not outcome.security_ok
            queried[t] = outcome.queried
    else:
        raise ValueError("method must be auto, kernel, or reference")

    failures = int(failed.sum())
    rate = failures / trials
    ci99 = Z99 * math.sqrt(rate * (1.0 - rate) / trials)
    return MonteCarloResult(
        trials=trials,
        failures=failures,
        rate=rate,
        ci99=ci99,
        queried=int(queried.sum()),
        method=method,
    )


@dataclass(frozen=True)
class RepeatedGameConfig:
    rounds: int
    discount: float
    coin_withhold_prob: float
    grim_trigger: bool = True
    defect_node: Optional[int] = None  # inject: place despite a withhold coin
    defect_round: Optional[int] = None
    adversary_stop_round: Optional[int] = None  # inject: offers stop here

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if not 0.0 <= self.coin_withhold_prob <= 1.0:
            raise ValueError("coin_withhold_prob must lie in [0, 1]")
        if self.rounds < 1:
            raise ValueError("needs at least one round")


@dataclass
class RepeatedGameResult:
    utilities: np.ndarray  # rounds x nodes
    offered: np.ndarray
    defections: np.ndarray
    placed: np.ndarray
    coins: np.ndarray
    failures: np.ndarray
    spend: np.ndarray
    bribed: np.ndarray
    mean_utilities: np.ndarray
    discounted_utilities: np.ndarray

    @property
    def failure_rate(self) -> float:
        return float(self.failures.mean())

    def round_records(self):
        for t in range(self.utilities.shape[0]):
            yield {
                "round": t,
                "coin_withhold": bool(self.coins[t]),
                "bribes_offered": self.offered[t].tolist(),
                "defections": self.defections[t].tolist(),
                "utilities": self.utilities[t].tolist(),
                "failure": bool(self.failures[t]),
            }


def default_bribed_mask(params: ProtocolParams) -> np.ndarray:
    """Bribe the first critical-set-sized block of rational nodes."""
    mask = np.zeros(params.n_nodes, dtype=bool)
    mask[: params.n_critical] = True
    return mask


def run_repeated_game(
    config: GameConfig,
    repeated: RepeatedGameConfig,
    bribed_mask: Optional[np.ndarray] = None,
    force_kernel: Optional[str] = None,
) -> RepeatedGameResult:
    """Repeated contract sub-game held together by grim triggers.

    Each round the adversary offers the per-node bribe, a shared coin tells
    the bribed nodes whether to withhold, and payoffs realize under the
    slashing rule.  A node that responds against a withhold coin loses all
    future offers; an adversary that stops offering loses all cooperation.
    """
    params = config.params
    if bribed_mask is None:
        bribed_mask = default_bribed_mask(params)
    bribed_mask = np.asarray(bribed_mask, dtype=bool)
    byz = np.zeros(params.n_nodes, dtype=bool)
    if params.n_byzantine:
        byz[-params.n_byzantine :] = True
    if (bribed_mask & byz).any():
        raise ValueError("bribes target rational nodes only")
    n_bribed = int(bribed_mask.sum())
    per_node = config.adversary.node_budget / n_bribed if n_bribed else 0.0

    rng = np.random.default_rng(config.rng_seed)
    coin_u = rng.random(repeated.rounds)
    utilities, offered, defections, placed, coins, failures, spend = kernels.repeated_rounds(
        coin_u,
        repeated.coin_withhold_prob,
        bribed_mask,
        byz,
        params.threshold_k,
        per_node,
        params.clue_cost,
        params.stake,
        config.slashing.safe_penalty(params),
        config.utility.nu,
        config.utility.baseline,
        grim_trigger=repeated.grim_trigger,
        defect_node=-1 if repeated.defect_node is None else repeated.defect_node,
        defect_round=-1 if repeated.defect_round is None else repeated.defect_round,
        adversary_stop_round=(
            -1 if repeated.adversary_stop_round is None else repeated.adversary_stop_round
        ),
        force=force_kernel,
    )
    weights = repeated.discount ** np.arange(repeated.rounds)
    return RepeatedGameResult(
        utilities=utilities,
        offered=offered,
        defections=defections,
        placed=placed,
        coins=coins,
        failures=failures,
        spend=spend,
        bribed=bribed_mask,
        mean_utilities=utilities.mean(axis=0),
        discounted_utilities=weights @ utilities,
    )


def single_stage_expected_utility(
    config: GameConfig, withhold_prob: float, bribed: bool, per_node_bribe: float
) -> float:
    """Analytic per-round expectation for a node in the repeated game: a
    complying bribed node risks the full slash on a withhold coin, everyone
    else just pays the clue cost."""
    params, spec = config.params, config.utility
    if not bribed:
        return utility(spec, -params.clue_cost)
    return withhold_prob * utility(spec, per_node_bribe - params.stake) + (
        1.0 - withhold_prob
    ) * utility(spec, per_node_bribe - params.clue_cost)


@dataclass(frozen=True)
class DeviationEstimate:
    participant: str
    deviation: str
    mean_gain: float
    ci99: float


@dataclass(frozen=True)
class DeviationReport:
    estimates: tuple[DeviationEstimate, ...]

    def max_gain(self) -> DeviationEstimate:
        return max(self.estimates, key=lambda e: e.mean_gain)


def _participant_utilities(config: GameConfig, outcome: GameOutcome) -> np.ndarray:
    spec = config.utility
    vals = [utility(spec, p) for p in outcome.node_net_payoffs]
    client = outcome.client_net_payoff
    vals.append(client if spec.nu == 1.0 else max(client, 0.0) ** spec.nu)
    return np.array(vals)


def check_no_profitable_deviation(
    config: GameConfig,
    node_strategies: Sequence[NodeStrategy],
    client_strategy: ClientStrategy,
    trials: int = 2000,
    seed: int = 0,
) -> DeviationReport:
    """Estimate the utility change of every single-shot deviation by paired
    Monte Carlo (common random numbers across the base and deviated runs)."""
    params = config.params
    if params.n_nodes > 10:
        raise ValueError("deviation enumeration supported up to 10 nodes")
    n = params.n_nodes
    rng = np.random.default_rng(seed)
    n_coins = max(1, len(_coin_ids(node_strategies)))
    coin_u = rng.random((trials, n_coins))
    node_u = rng.random((trials, n))

    deviations = []
    for i, strat in enumerate(node_strategies):
        if strat.kind == "byzantine":
            continue
        deviations.append((f"node_{i}", Deviation("node", i, "reply")))
        deviations.append((f"node_{i}", Deviation("node", i, "place")))
    deviations.append(("client", Deviation("client", 0, "query")))

    base = np.empty((trials, n + 1))
    for t in range(trials):
        outcome = run_game(
            config,
            node_strategies,
            client_strategy,
            draws=GameDraws(coin=coin_u[t], nodes=node_u[t]),
        )
        base[t] = _participant_utilities(config, outcome)

    estimates = []
    for name, dev in deviations:
        who = n if dev.actor == "client" else dev.index
        gains = np.empty(trials)
        for t in range(trials):
            outcome = run_game(
                config,
                node_strategies,
                client_strategy,
                draws=GameDraws(coin=coin_u[t], nodes=node_u[t]),
                deviation=dev,
            )
            gains[t] = _participant_utilities(config, outcome)[who] - base[t, who]
        mean = float(gains.mean())
        spread = float(gains.std(ddof=1)) if trials > 1 else 0.0
        estimates.append(
            DeviationEstimate(
                participant=name,
                deviation=f"flip_{dev.action}",
                mean_gain=mean,
                ci99=Z99 * spread / math.sqrt(trials),
            )
        )
    return DeviationReport(estimates=tuple(estimates))
