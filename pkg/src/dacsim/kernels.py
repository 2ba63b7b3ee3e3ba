"""Hot Monte Carlo kernels: numba-compiled loops with pure-numpy fallbacks.

Every kernel consumes pre-drawn uniforms, so the compiled and the numpy path
produce bit-identical results from the same seed.  Set DACSIM_DISABLE_NUMBA=1
to force the numpy path (it is also used automatically when numba is not
installed).  benchmarks/bench_kernels.py compares the two.

Node strategy codes shared with the game module:
    0 honest        reply over the network, then respond on chain if queried
    1 byzantine     never act
    2 bribed        never reply; respond on chain unless the shared coin says withhold
    3 free_rider    never reply; respond on chain independently with prob place_prob
    4 place_only    never reply; respond on chain if queried
Client codes: 0 honest (query iff replies < k), 1 always query, 2 silent.
"""

from __future__ import annotations

import os

import numpy as np

HONEST, BYZANTINE, BRIBED, FREE_RIDER, PLACE_ONLY = 0, 1, 2, 3, 4
CLIENT_HONEST, CLIENT_ALWAYS, CLIENT_SILENT = 0, 1, 2

NUMBA_DISABLED = os.environ.get("DACSIM_DISABLE_NUMBA", "").lower() in (
    "1",
    "true",
    "yes",
)

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by DACSIM_DISABLE_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# ---------------------------------------------------------------------------
# single-shot game trials for a fixed strategy profile


@njit(cache=True)
def _profile_trials_jit(codes, place_probs, coin_q, client_code, k, uniforms, coin_uniforms):
    trials, n = uniforms.shape
    failed = np.empty(trials, np.bool_)
    queried = np.empty(trials, np.bool_)
    replies = 0
    for i in range(n):
        if codes[i] == 0:  # honest replies over the network
            replies += 1
    for t in range(trials):
        if client_code == 0:
            do_query = replies < k
        elif client_code == 1:
            do_query = True
        else:
            do_query = False
        if do_query:
            withhold = coin_uniforms[t] < coin_q
            served = 0
            for i in range(n):
                c = codes[i]
                placed = False
                if c == 0 or c == 4:
                    placed = True
                elif c == 2:
                    placed = not withhold
                elif c == 3:
                    placed = uniforms[t, i] < place_probs[i]
                if placed or c == 0:
                    served += 1
            ok = served >= k
        else:
            ok = replies >= k
        failed[t] = not ok
        queried[t] = do_query
    return failed, queried


def _profile_trials_np(codes, place_probs, coin_q, client_code, k, uniforms, coin_uniforms):
    trials, n = uniforms.shape
    replies = int((codes == HONEST).sum())
    if client_code == CLIENT_HONEST:
        do_query = replies < k
    elif client_code == CLIENT_ALWAYS:
        do_query = True
    else:
        do_query = False
    queried = np.full(trials, do_query)
    if not do_query:
        return np.full(trials, replies < k), queried
    withhold = coin_uniforms < coin_q
    always = (codes == HONEST) | (codes == PLACE_ONLY)
    placed = (
        np.broadcast_to(always[None, :], uniforms.shape)
        | ((codes == BRIBED)[None, :] & ~withhold[:, None])
        | ((codes == FREE_RIDER)[None, :] & (uniforms < place_probs[None, :]))
    )
    served = (placed | (codes == HONEST)[None, :]).sum(axis=1)
    return served < k, queried


def profile_trials(codes, place_probs, coin_q, client_code, k, uniforms, coin_uniforms, force=None):
    """Per-trial (failed, queried) flags for one strategy profile."""
    impl = _pick(force)
    fn = _profile_trials_jit if impl == "numba" else _profile_trials_np
    return fn(
        np.ascontiguousarray(codes, dtype=np.int64),
        np.ascontiguousarray(place_probs, dtype=np.float64),
        float(coin_q),
        int(client_code),
        int(k),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        np.ascontiguousarray(coin_uniforms, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# two-stage reward-game trials: respond over the network, then on the contract


@njit(cache=True)
def _reward_trials_jit(q_network, q_contract, net_uniforms, contract_uniforms):
    trials, n = net_uniforms.shape
    failed = np.empty(trials, np.bool_)
    for t in range(trials):
        any_net = False
        for i in range(n):
            if net_uniforms[t, i] < q_network:
                any_net = True
                break
        if any_net:
            failed[t] = False
            continue
        any_contract = False
        for i in range(n):
            if contract_uniforms[t, i] < q_contract:
                any_contract = True
                break
        failed[t] = not any_contract
    return failed


def _reward_trials_np(q_network, q_contract, net_uniforms, contract_uniforms):
    any_net = (net_uniforms < q_network).any(axis=1)
    any_contract = (contract_uniforms < q_contract).any(axis=1)
    return ~any_net & ~any_contract


def reward_trials(q_network, q_contract, net_uniforms, contract_uniforms, force=None):
    """Per-trial failure flags for the two-stage mixed reward equilibrium."""
    impl = _pick(force)
    fn = _reward_trials_jit if impl == "numba" else _reward_trials_np
    return fn(
        float(q_network),
        float(q_contract),
        np.ascontiguousarray(net_uniforms, dtype=np.float64),
        np.ascontiguousarray(contract_uniforms, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# repeated bribery game with grim triggers on both sides


@njit(cache=True)
def _repeated_rounds_jit(
    coin_uniforms,
    coin_q,
    bribed,
    byzantine,
    k,
    per_node_bribe,
    clue_cost,
    stake,
    safe_penalty,
    nu,
    baseline,
    grim_trigger,
    defect_node,
    defect_round,
    adversary_stop_round,
):
    rounds = coin_uniforms.shape[0]
    n = bribed.shape[0]
    utilities = np.empty((rounds, n))
    offered = np.zeros((rounds, n), np.bool_)
    defections = np.zeros((rounds, n), np.bool_)
    placed_all = np.zeros((rounds, n), np.bool_)
    coins = np.empty(rounds, np.bool_)
    fail = np.empty(rounds, np.bool_)
    spend = np.zeros(rounds)
    triggered = np.zeros(n, np.bool_)
    nodes_quit = False  # grim response to the adversary skipping an offer
    for t in range(rounds):
        adversary_active = adversary_stop_round < 0 or t < adversary_stop_round
        if not adversary_active:
            nodes_quit = True
        withhold = coin_uniforms[t] < coin_q
        coins[t] = withhold
        placed_count = 0
        for i in range(n):
            if bribed[i] and adversary_active and not (grim_trigger and triggered[i]):
                offered[t, i] = True
            placed = False
            if byzantine[i]:
                placed = False
            elif not bribed[i]:
                placed = True
            elif offered[t, i] and not nodes_quit:
                placed = not withhold
                if i == defect_node and t == defect_round and withhold:
                    placed = True
                    defections[t, i] = True
            else:
                placed = True  # unbribed this round: responding dominates
            placed_all[t, i] = placed
            if placed:
                placed_count += 1
        fail[t] = placed_count < k
        for i in range(n):
            placed = placed_all[t, i]
            net = -clue_cost if placed else -(stake if fail[t] else safe_penalty)
            if offered[t, i] and not nodes_quit:
                complied = placed != withhold and not defections[t, i]
                if complied:
                    net += per_node_bribe
                    spend[t] += per_node_bribe
                elif grim_trigger and withhold and placed:
                    triggered[i] = True
            utilities[t, i] = net if nu == 1.0 else (baseline + net) ** nu
    return utilities, offered, defections, placed_all, coins, fail, spend


def _repeated_rounds_np(
    coin_uniforms,
    coin_q,
    bribed,
    byzantine,
    k,
    per_node_bribe,
    clue_cost,
    stake,
    safe_penalty,
    nu,
    baseline,
    grim_trigger,
    defect_node,
    defect_round,
    adversary_stop_round,
):
    rounds = coin_uniforms.shape[0]
    n = bribed.shape[0]
    utilities = np.empty((rounds, n))
    offered = np.zeros((rounds, n), np.bool_)
    defections = np.zeros((rounds, n), np.bool_)
    placed_all = np.zeros((rounds, n), np.bool_)
    coins = coin_uniforms < coin_q
    fail = np.empty(rounds, np.bool_)
    spend = np.zeros(rounds)
    triggered = np.zeros(n, np.bool_)
    no_offers = np.zeros(n, np.bool_)
    for t in range(rounds):
        adversary_active = adversary_stop_round < 0 or t < adversary_stop_round
        withhold = bool(coins[t])
        if not adversary_active:
            offers = no_offers
        elif grim_trigger:
            offers = bribed & ~triggered
        else:
            offers = bribed
        offered[t] = offers
        # offered bribed nodes follow the coin; everyone else rational responds
        placed = ~byzantine & ~(offers & withhold)
        if withhold and defect_node >= 0 and t == defect_round and offers[defect_node]:
            placed = placed.copy()
            placed[defect_node] = True
            defections[t, defect_node] = True
        placed_all[t] = placed
        fail[t] = int(placed.sum()) < k
        net = np.where(
            placed, -clue_cost, -(stake if fail[t] else safe_penalty)
        ).astype(float)
        complied = offers & (placed != withhold) & ~defections[t]
        net[complied] += per_node_bribe
        spend[t] = per_node_bribe * int(complied.sum())
        if grim_trigger and withhold:
            triggered = triggered | (offers & placed)
        utilities[t] = net if nu == 1.0 else (baseline + net) ** nu
    return utilities, offered, defections, placed_all, coins, fail, spend


def repeated_rounds(
    coin_uniforms,
    coin_q,
    bribed,
    byzantine,
    k,
    per_node_bribe,
    clue_cost,
    stake,
    safe_penalty,
    nu,
    baseline,
    grim_trigger=True,
    defect_node=-1,
    defect_round=-1,
    adversary_stop_round=-1,
    force=None,
):
    """Round-by-round records of the repeated bribery game."""
    impl = _pick(force)
    fn = _repeated_rounds_jit if impl == "numba" else _repeated_rounds_np
    return fn(
        np.ascontiguousarray(coin_uniforms, dtype=np.float64),
        float(coin_q),
        np.ascontiguousarray(bribed, dtype=np.bool_),
        np.ascontiguousarray(byzantine, dtype=np.bool_),
        int(k),
        float(per_node_bribe),
        float(clue_cost),
        float(stake),
        float(safe_penalty),
        float(nu),
        float(baseline),
        bool(grim_trigger),
        int(defect_node),
        int(defect_round),
        int(adversary_stop_round),
    )


def _pick(force):
    if force is None:
        return "numba" if USING_NUMBA else "numpy"
    if force not in ("numba", "numpy"):
        raise ValueError("force must be 'numba' or 'numpy'")
    if force == "numba" and not USING_NUMBA:
        raise RuntimeError("numba path unavailable (disabled or not installed)")
    return force
