"""Command-line interface: bribe-bound tables, sweeps, simulations, checks.

Subcommands: bounds, sweep, simulate, axioms, reward, game.  A JSON config
file (--config, or the DAC_CONFIG environment variable) supplies defaults;
explicit flags win.  Exit codes: 0 success, 1 a check failed, 2 usage or
config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import contract, equilibrium, game, reward
from .model import ProtocolParams, AdversaryParams, risk_averse, risk_neutral, validate

DEFAULT_ETH_USD = 1231.0
DEFAULT_NU_VALUES = (0.1, 0.5, 0.8, 1.0)
SWEEP_COLUMNS = (
    "n_nodes,nu,epsilon_target,p0_lower_eth,p0_upper_eth,p0_lower_usd,p0_upper_usd"
)

CONFIG_KEYS = {
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
    "epsilon_target",
    "eth_usd_rate",
    "nu_values",
    "committee_rule",
    "n_count",
    "n_max",
}


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _load_config(path: str | None) -> dict:
    if path is None:
        path = os.environ.get("DAC_CONFIG")
    if path is None:
        return {}
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path}: top level must be a JSON object")
    unknown = sorted(set(obj) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"config {path}: unknown fields: {', '.join(unknown)}")
    return obj


def _committee_divisor(rule: str) -> int:
    rule = rule.strip().lower().replace(" ", "")
    if not rule.startswith("n/"):
        raise ConfigError(f"committee_rule must look like 'n/3', got {rule!r}")
    try:
        divisor = int(rule[2:])
    except ValueError:
        raise ConfigError(f"committee_rule divisor not an integer in {rule!r}")
    if divisor < 1:
        raise ConfigError("committee_rule divisor must be positive")
    return divisor


def _params_for_scale(n_nodes: int, stake: float, clue_cost: float, divisor: int) -> ProtocolParams:
    """Committee of n nodes with the critical-set size pinned to n // divisor."""
    n_critical = max(1, n_nodes // divisor)
    spare = n_nodes - n_critical + 1  # = f + k
    threshold_k = max(1, spare // 2)
    n_byzantine = spare - threshold_k
    return ProtocolParams(
        n_nodes=n_nodes,
        n_byzantine=n_byzantine,
        threshold_k=threshold_k,
        stake=stake,
        clue_cost=clue_cost,
        query_cost=min(0.001, clue_cost / 2) if clue_cost > 0 else 0.0005,
        client_value=stake,
        compensation=min(0.01, stake / 2),
        epsilon_slash=0.001,
    )


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# bounds


def cmd_bounds(args, config: dict) -> int:
    stake = args.stake if args.stake is not None else config.get("stake", 32.0)
    clue = args.clue_cost if args.clue_cost is not None else config.get("clue_cost", 0.0226)
    n_nodes = args.n_nodes if args.n_nodes is not None else config.get("n_nodes", 300_000)
    epsilon = args.epsilon if args.epsilon is not None else config.get("epsilon_target", 1e-3)
    rate = args.eth_usd_rate if args.eth_usd_rate is not None else config.get(
        "eth_usd_rate", DEFAULT_ETH_USD
    )
    nu_values = args.nu if args.nu else config.get("nu_values", list(DEFAULT_NU_VALUES))
    divisor = _committee_divisor(args.committee_rule or config.get("committee_rule", "n/3"))

    params = _params_for_scale(int(n_nodes), float(stake), float(clue), divisor)
    lines = ["nu,p0_lower_eth,p0_upper_eth,p0_lower_usd,p0_upper_usd"]
    saturated = epsilon >= 1.0
    for nu in sorted(float(v) for v in nu_values):
        if saturated:
            p0_min = p0_max = params.collusion_threshold
        else:
            bounds = equilibrium.min_bribe_for_failure(params, nu, float(epsilon))
            p0_min, p0_max = bounds.p0_min, bounds.p0_max
        lines.append(
            ",".join(
                [
                    _fmt(nu),
                    _fmt(p0_min),
                    _fmt(p0_max),
                    _fmt(p0_min * rate),
                    _fmt(p0_max * rate),
                ]
            )
        )
    if saturated:
        lines.append("# failure target saturates at the full-withholding threshold")
    _emit("\n".join(lines) + "\n", args.output)
    return 0


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(args, config: dict) -> int:
    stake = args.stake if args.stake is not None else config.get("stake", 32.0)
    clue = args.clue_cost if args.clue_cost is not None else config.get("clue_cost", 0.0226)
    n_max = args.n_max if args.n_max is not None else config.get("n_max", 300_000)
    count = args.count if args.count is not None else config.get("n_count", 200)
    epsilon = args.epsilon if args.epsilon is not None else config.get("epsilon_target", 1e-6)
    rate = args.eth_usd_rate if args.eth_usd_rate is not None else config.get(
        "eth_usd_rate", DEFAULT_ETH_USD
    )
    nu_values = args.nu if args.nu else config.get("nu_values", list(DEFAULT_NU_VALUES))
    divisor = _committee_divisor(args.committee_rule or config.get("committee_rule", "n/3"))

    n_grid = np.unique(
        np.rint(np.geomspace(1, int(n_max), int(count))).astype(int)
    )
    rows = []
    for nu in sorted(float(v) for v in nu_values):
        for n in n_grid:
            params = _params_for_scale(int(n), float(stake), float(clue), divisor)
            bounds = equilibrium.min_bribe_for_failure(params, nu, float(epsilon))
            rows.append(
                ",".join(
                    [
                        str(int(n)),
                        _fmt(nu),
                        _fmt(float(epsilon)),
                        _fmt(bounds.p0_min),
                        _fmt(bounds.p0_max),
                        _fmt(bounds.p0_min * rate),
                        _fmt(bounds.p0_max * rate),
                    ]
                )
            )
    _emit(SWEEP_COLUMNS + "\n" + "\n".join(rows) + "\n", args.output)
    return 0


# ---------------------------------------------------------------------------
# simulate / game

SCENARIOS = ("collusive-withhold", "free-rider", "no-attack", "network-only", "bribed-client")


def _scenario_params(args, config: dict) -> ProtocolParams:
    def pick(flag, key, default):
        v = getattr(args, flag)
        return v if v is not None else config.get(key, default)

    return ProtocolParams(
        n_nodes=int(pick("n_nodes", "n_nodes", 6)),
        n_byzantine=int(pick("n_byzantine", "n_byzantine", 1)),
        threshold_k=int(pick("threshold_k", "threshold_k", 2)),
        stake=float(pick("stake", "stake", 2.0)),
        clue_cost=float(pick("clue_cost", "clue_cost", 0.1)),
        query_cost=float(pick("query_cost", "query_cost", 0.05)),
        client_value=float(pick("client_value", "client_value", 3.0)),
        compensation=float(pick("compensation", "compensation", 0.5)),
        epsilon_slash=float(pick("epsilon_slash", "epsilon_slash", 0.01)),
    )


def _build_scenario(args, config: dict):
    params = _scenario_params(args, config)
    bad = validate(params)
    if bad:
        raise ConfigError("invalid parameters: " + "; ".join(bad))
    nu = float(args.nu if args.nu is not None else config.get("nu", 1.0))
    spec = risk_neutral() if nu == 1.0 else risk_averse(nu, params)
    name = args.scenario
    m = params.n_critical
    rational = params.n_rational
    byz = [game.byzantine()] * params.n_byzantine

    if name == "collusive-withhold" or name == "bribed-client":
        if args.q is not None:
            coin_q = float(args.q)
            p0 = coin_q * params.collusion_threshold
        else:
            p0 = float(args.p0 if args.p0 is not None else config.get("p0", 0.0))
            coin_q = equilibrium.q_star_risk_neutral(params, p0).value
        p1 = float(args.p1 if args.p1 is not None else config.get("p1", 0.0))
        if name == "bribed-client" and p1 == 0.0:
            p1 = params.query_cost  # minimal bribe making always-query rational
        nodes = (
            [game.bribed_withhold()] * m
            + [game.place_only()] * (params.threshold_k - 1)
            + byz
        )
        cfg = game.GameConfig(
            params=params,
            adversary=AdversaryParams(node_budget=p0, client_bribe=p1),
            utility=spec,
            rng_seed=args.seed,
            coin_withhold_prob=coin_q,
        )
        return cfg, nodes, game.always_query(), coin_q

    if name == "free-rider":
        penalty = float(args.punishment if args.punishment is not None else 0.0)
        slashing = contract.custom_punishment(penalty)
        eq = equilibrium.solve_free_rider(params, penalty, spec)
        nodes = [game.free_rider(eq.r_star)] * rational + byz
        cfg = game.GameConfig(
            params=params,
            adversary=AdversaryParams(0.0, 0.0),
            utility=spec,
            slashing=slashing,
            rng_seed=args.seed,
        )
        return cfg, nodes, game.always_query(), eq.failure.value

    if name == "no-attack":
        nodes = [game.honest()] * rational + byz
        cfg = game.GameConfig(
            params=params,
            adversary=AdversaryParams(0.0, 0.0),
            utility=spec,
            rng_seed=args.seed,
        )
        return cfg, nodes, game.honest_client(), 0.0

    if name == "network-only":
        nodes = [game.honest()] * rational + byz
        p0 = float(args.p0 if args.p0 is not None else 0.0)
        p1 = float(args.p1 if args.p1 is not None else 0.0)
        cfg = game.GameConfig(
            params=params,
            adversary=AdversaryParams(p0, p1),
            utility=spec,
            rng_seed=args.seed,
        )
        return cfg, nodes, game.honest_client(), 0.0

    raise ConfigError(f"unknown scenario {args.scenario!r}")


def cmd_simulate(args, config: dict) -> int:
    cfg, nodes, client, expected = _build_scenario(args, config)
    result = game.monte_carlo_failure(
        cfg, nodes, client, trials=args.trials, seed=args.seed
    )
    record = {"scenario": args.scenario, "seed": args.seed, "expected_rate": expected}
    record.update(result.to_json())
    _emit(json.dumps(record) + "\n", args.output)
    return 0


def cmd_game(args, config: dict) -> int:
    cfg, nodes, client, _ = _build_scenario(args, config)
    outcome = game.run_game(cfg, nodes, client)
    lines = [json.dumps(event) for event in outcome.transcript]
    lines.append(
        json.dumps(
            {
                "slot": cfg.params.t_answer,
                "actor": "environment",
                "action": "settle",
                "detail": {
                    "security_ok": outcome.security_ok,
                    "client_payoff": outcome.client_net_payoff,
                    "node_payoffs": outcome.node_net_payoffs.tolist(),
                },
            }
        )
    )
    _emit("\n".join(lines) + "\n", args.output)
    return 0


# ---------------------------------------------------------------------------
# axioms


def cmd_axioms(args, config: dict) -> int:
    params = _scenario_params(args, config)
    bad = validate(params)
    if bad:
        raise ConfigError("invalid parameters: " + "; ".join(bad))
    if args.function == "optimal":
        fn = contract.optimal()
    else:
        penalty = float(args.punishment if args.punishment is not None else 0.0)
        fn = contract.custom_punishment(penalty)
    bound = args.bound if args.bound is not None else fn.safe_penalty(params)
    checks = [
        contract.check_symmetry(fn, params, mode=args.mode, trials=args.trials, seed=args.seed),
        contract.check_no_reward(fn, params, mode=args.mode, trials=args.trials, seed=args.seed),
        contract.check_minimal_punishment(
            fn, params, bound, mode=args.mode, trials=args.trials, seed=args.seed
        ),
    ]
    _emit("\n".join(json.dumps(c.to_json()) for c in checks) + "\n", args.output)
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------
# reward


def cmd_reward(args, config: dict) -> int:
    schedule = reward.constant_schedule(args.total, args.n_members)
    try:
        if args.variant == "withhold-network":
            eq = reward.solve_reward_equilibrium(
                args.n_members, args.response_cost, args.member_stake, schedule
            )
        else:
            if args.member_bribe is None:
                raise ConfigError("withhold-all requires --pb")
            eq = reward.solve_reward_equilibrium_bribed(
                args.n_members,
                args.response_cost,
                args.member_stake,
                args.member_bribe,
                schedule,
            )
    except reward.NoEquilibrium as exc:
        _emit(json.dumps({"variant": args.variant, "no_equilibrium": str(exc)}) + "\n", args.output)
        return 0
    record = {"variant": args.variant, "q_contract": eq.q_contract}
    if eq.q_network is not None:
        record["q_network"] = eq.q_network
    record["q_fail"] = eq.q_fail
    if eq.bribe_cost_per_node is not None:
        record["bribe_cost_per_node"] = eq.bribe_cost_per_node
    record["adversary_spend"] = eq.adversary_spend
    _emit(json.dumps(record) + "\n", args.output)
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file (or set DAC_CONFIG)")
    shared.add_argument("--seed", type=int, default=0, help="RNG seed")
    shared.add_argument("--output", help="write output to this path instead of stdout")
    shared.add_argument("--eth-usd-rate", type=float, default=None)

    scale = argparse.ArgumentParser(add_help=False)
    scale.add_argument("--stake", type=float, default=None)
    scale.add_argument("--clue-cost", type=float, default=None)
    scale.add_argument("--epsilon", type=float, default=None, help="target failure probability")
    scale.add_argument("--nu", type=float, action="append", default=None)
    scale.add_argument("--committee-rule", default=None, help="critical-set rule, e.g. n/3")

    proto = argparse.ArgumentParser(add_help=False)
    proto.add_argument("--n-nodes", "--n", dest="n_nodes", type=int, default=None)
    proto.add_argument("--n-byzantine", "--f", dest="n_byzantine", type=int, default=None)
    proto.add_argument("--threshold-k", "--k", dest="threshold_k", type=int, default=None)
    proto.add_argument("--stake", type=float, default=None)
    proto.add_argument("--clue-cost", type=float, default=None)
    proto.add_argument("--query-cost", type=float, default=None)
    proto.add_argument("--client-value", type=float, default=None)
    proto.add_argument("--compensation", type=float, default=None)
    proto.add_argument("--epsilon-slash", type=float, default=None)
    proto.add_argument("--p0", type=float, default=None)
    proto.add_argument("--p1", type=float, default=None)
    proto.add_argument("--nu", type=float, default=None)

    parser = argparse.ArgumentParser(
        prog="dacsim",
        description="incentive analysis of a slashing-secured data availability committee",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[shared, scale], help="bribe bounds at a failure target")
    p.add_argument("--n-nodes", type=int, default=None)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("sweep", parents=[shared, scale], help="bribe bounds across committee sizes")
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--count", type=int, default=None, help="log-spaced committee sizes")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("simulate", parents=[shared, proto], help="Monte Carlo failure rate")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--q", type=float, default=None, help="shared-coin withhold probability")
    p.add_argument("--punishment", type=float, default=None, help="custom safe-case penalty")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("game", parents=[shared, proto], help="one game, transcript as JSON lines")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--punishment", type=float, default=None)
    p.set_defaults(handler=cmd_game)

    p = sub.add_parser("axioms", parents=[shared, proto], help="audit a slashing function")
    p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    p.add_argument("--trials", type=int, default=contract.DEFAULT_SAMPLED_VECTORS)
    p.add_argument("--function", choices=("optimal", "custom"), default="optimal")
    p.add_argument("--punishment", type=float, default=None)
    p.add_argument("--bound", type=float, default=None, help="minimal-punishment bound to check")
    p.set_defaults(handler=cmd_axioms)

    p = sub.add_parser("reward", parents=[shared], help="reward-scheme equilibria")
    p.add_argument("--variant", choices=("withhold-network", "withhold-all"), required=True)
    p.add_argument("--n", dest="n_members", type=int, required=True)
    p.add_argument("--pw", dest="response_cost", type=float, required=True)
    p.add_argument("--ps", dest="member_stake", type=float, required=True)
    p.add_argument("--t", dest="total", type=float, required=True)
    p.add_argument("--pb", dest="member_bribe", type=float, default=None)
    p.set_defaults(handler=cmd_reward)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.handler(args, config)
    except ConfigError as exc:
        print(f"dacsim: {exc}", file=sys.stderr)
        return 2
    except equilibrium.ThresholdSaturation as exc:
        print(f"dacsim: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
