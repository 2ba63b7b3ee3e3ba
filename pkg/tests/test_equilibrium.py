import numpy as np
import pytest

from dacsim import equilibrium as eq
from dacsim.model import (
    AdversaryParams,
    ProtocolParams,
    eth_table2_params,
    risk_averse,
    risk_neutral,
)

ETH = eth_table2_params()  # N = 300000, committee rule n/3, stake 32, clue 0.0226

# published bribe-bound table at failure target 1e-3 (ETH)
PUBLISHED_BOUNDS = {
    1.0: (3197.9, 3197.9),
    0.8: (3197.9, 3977.5),
    0.5: (3197.9, 6082.5),
    0.1: (3197.9, 13257.7),
}


def small_params(n=5, f=2, k=2, stake=2.0, clue=0.1):
    return ProtocolParams(
        n_nodes=n,
        n_byzantine=f,
        threshold_k=k,
        stake=stake,
        clue_cost=clue,
        query_cost=0.05,
        client_value=3.0,
        compensation=0.4,
        epsilon_slash=0.01,
    )


class TestRiskNeutralClosedForm:
    def test_zero_budget(self):
        assert eq.q_star_risk_neutral(ETH, 0.0).value == 0.0

    def test_eth_scale_point(self):
        # N - f - k + 1 = 100000, stake 32, clue 0.0226: budget 3197.74 buys
        # failure probability 1e-3 exactly
        got = eq.q_star_risk_neutral(ETH, 3197.74)
        assert got.value == pytest.approx(1e-3, rel=1e-12)
        assert got.provenance == "exact-closed-form"
        # and it matches the published table row within 1%
        assert 3197.74 == pytest.approx(PUBLISHED_BOUNDS[1.0][0], rel=0.01)

    def test_saturates_at_threshold(self):
        assert eq.q_star_risk_neutral(ETH, ETH.collusion_threshold).value == 1.0

    def test_monotone_in_budget_and_parameters(self):
        rng = np.random.default_rng(7)
        p = small_params()
        budgets = np.sort(rng.uniform(0, p.collusion_threshold, size=12))
        values = [eq.q_star_risk_neutral(p, b).value for b in budgets]
        assert all(a <= b for a, b in zip(values, values[1:]))
        # larger stake, larger critical set: both reduce the failure probability
        richer = small_params(stake=3.0)
        wider = small_params(f=1)  # raises n_critical
        assert eq.q_star_risk_neutral(richer, 1.0).value < eq.q_star_risk_neutral(p, 1.0).value
        assert eq.q_star_risk_neutral(wider, 1.0).value < eq.q_star_risk_neutral(p, 1.0).value


class TestRiskAverseBounds:
    def test_risk_neutral_collapse(self):
        p = small_params()
        closed = eq.q_star_risk_neutral(p, 0.7).value
        lo, up = eq.q_star_bounds_risk_averse(p, 0.7, 1.0)
        assert lo.value == pytest.approx(closed, rel=1e-12)
        assert up.value == pytest.approx(closed, rel=1e-12)

    def test_zero_budget(self):
        lo, up = eq.q_star_bounds_risk_averse(small_params(), 0.0, 0.5)
        assert (lo.value, up.value) == (0.0, 0.0)

    def test_published_upper_bound_inverts(self):
        # the published 13257.7 ETH budget pushes the certified lower bound
        # to the 1e-3 failure target
        lo, _ = eq.q_star_bounds_risk_averse(ETH, 13257.7, 0.1)
        assert lo.value == pytest.approx(1e-3, rel=0.01)

    def test_threshold_raises(self):
        with pytest.raises(eq.StrongAdversaryError):
            eq.q_star_bounds_risk_averse(ETH, ETH.collusion_threshold, 0.5)

    @pytest.mark.parametrize("seed", range(6))
    def test_sandwich_and_monotonicity_random_grid(self, seed):
        rng = np.random.default_rng(seed)
        p = small_params(
            n=int(rng.integers(4, 9)),
            f=int(rng.integers(0, 2)),
            k=2,
            stake=float(rng.uniform(1.5, 4.0)),
        )
        nu = float(rng.uniform(0.1, 0.99))
        budgets = np.sort(rng.uniform(0, 0.95 * p.collusion_threshold, size=8))
        prev_lo = prev_up = -1.0
        for b in budgets:
            lo, up = eq.q_star_bounds_risk_averse(p, float(b), nu)
            assert lo.value <= up.value + 1e-12
            assert lo.value >= prev_lo - 1e-12 and up.value >= prev_up - 1e-12
            prev_lo, prev_up = lo.value, up.value


# --------------------------------------------------------------------------
# exact small-instance solver and its brute-force oracle

FIXTURE = small_params(n=5, f=2, k=2, stake=2.0, clue=0.1)  # 3 rational, |G| = 3

# brute-force oracle: exhaustive sorted grid over bribe splits at step 1e-3
# (21084 exact LP solves), frozen from tests/oracles.py
ORACLE_VALUE_NU05_P05 = 0.09443768282696016


def bribe_grid_oracle(params, p0, nu, step_units):
    """Exhaustive sorted-grid search; independent of the multistart path."""
    groups = eq.enumerate_critical_groups(params)
    unit = p0 / step_units
    best = 0.0
    for a in range(step_units, -1, -1):
        rem = step_units - a
        for b in range(min(a, rem), -1, -1):
            c = rem - b
            if c > b:
                continue
            caps = eq._respond_caps(
                np.array([a * unit, b * unit, c * unit]),
                params.stake,
                params.clue_cost,
                nu,
            )
            v = min(eq._withholding_lp(groups, params.n_rational, caps), 1.0)
            best = max(best, v)
    return best


class TestExactSmallInstance:
    def test_risk_neutral_matches_closed_form(self):
        got = eq.solve_q_star_exact_small(FIXTURE, 0.5, 1.0)
        want = eq.q_star_risk_neutral(FIXTURE, 0.5).value
        assert got.value == pytest.approx(want, abs=eq.LP_TOL)
        assert got.provenance == "numerical-optimum"

    def test_zero_budget_forces_zero(self):
        assert eq.solve_q_star_exact_small(FIXTURE, 0.0, 0.5).value == 0.0

    def test_matches_frozen_fine_oracle(self):
        got = eq.solve_q_star_exact_small(FIXTURE, 0.5, 0.5)
        assert got.value == pytest.approx(ORACLE_VALUE_NU05_P05, abs=1e-3)

    def test_coarse_live_oracle_consistent(self):
        # same oracle at a coarser step reproduces the frozen optimum
        live = bribe_grid_oracle(FIXTURE, 0.5, 0.5, step_units=100)
        assert live == pytest.approx(ORACLE_VALUE_NU05_P05, abs=1e-3)

    @pytest.mark.parametrize("nu", [0.3, 0.5, 0.8])
    def test_within_certified_bounds(self, nu):
        lo, up = eq.q_star_bounds_risk_averse(FIXTURE, 0.5, nu)
        got = eq.solve_q_star_exact_small(FIXTURE, 0.5, nu)
        assert lo.value - 1e-9 <= got.value <= up.value + 1e-9

    def test_large_instance_rejected(self):
        big = ProtocolParams(14, 0, 7, 2.0, 0.1, 0.05, 3.0, 0.4, 0.01)
        with pytest.raises(eq.InstanceTooLargeError):
            eq.solve_q_star_exact_small(big, 0.5, 0.5)


class TestMinBribeForFailure:
    @pytest.mark.parametrize("nu", [1.0, 0.8, 0.5, 0.1])
    def test_published_table(self, nu):
        bounds = eq.min_bribe_for_failure(ETH, nu, 1e-3)
        want_min, want_max = PUBLISHED_BOUNDS[nu]
        assert bounds.p0_min == pytest.approx(want_min, rel=0.01)
        assert bounds.p0_max == pytest.approx(want_max, rel=0.01)

    def test_risk_neutral_bounds_coincide(self):
        bounds = eq.min_bribe_for_failure(ETH, 1.0, 1e-3)
        assert bounds.p0_min == pytest.approx(bounds.p0_max, rel=1e-12)

    @pytest.mark.parametrize("nu", [1.0, 0.5, 0.1])
    def test_inversion_residual(self, nu):
        bounds = eq.min_bribe_for_failure(ETH, nu, 1e-3)
        if nu == 1.0:
            back = eq.q_star_risk_neutral(ETH, bounds.p0_min).value
        else:
            _, up = eq.q_star_bounds_risk_averse(ETH, bounds.p0_min, nu)
            back = up.value
        assert abs(back - 1e-3) / 1e-3 < 1e-8
        lo, _ = eq.q_star_bounds_risk_averse(ETH, bounds.p0_max, nu) if nu < 1.0 else (
            eq.q_star_risk_neutral(ETH, bounds.p0_max),
            None,
        )
        assert abs(lo.value - 1e-3) / 1e-3 < 1e-8

    def test_epsilon_domain(self):
        with pytest.raises(ValueError):
            eq.min_bribe_for_failure(ETH, 0.5, 1.0)


class TestRepeatedQueryFactor:
    def test_values(self):
        assert eq.repeated_query_factor(0.5, 1) == 0.5
        assert eq.repeated_query_factor(0.5, 5) == pytest.approx(0.1)
        assert eq.repeated_query_factor(0.0, 17) == 0.0

    def test_requires_positive_count(self):
        with pytest.raises(ValueError):
            eq.repeated_query_factor(0.5, 0)


class TestFreeRider:
    def test_no_equilibrium_at_full_penalty(self):
        p = small_params(n=7, f=2, k=2)
        out = eq.solve_free_rider(p, p.clue_cost, risk_neutral())
        assert out.r_star == 1.0
        assert out.failure.value == 0.0

    def test_hand_fixture(self):
        # 5 rational nodes, threshold 2, stake 2, clue cost 0.1, no penalty:
        # indifference pins P[Binom(4, r) < 2] at clue_cost / stake = 0.05
        p = small_params(n=7, f=2, k=2, stake=2.0, clue=0.1)
        out = eq.solve_free_rider(p, 0.0, risk_neutral())
        assert out.residual < eq.PROB_ABS_TOL
        assert eq.binomial_below(4, 2, out.r_star) == pytest.approx(0.05, abs=1e-10)
        assert out.failure.value == pytest.approx(
            eq.binomial_below(5, 2, out.r_star), abs=1e-15
        )

    def test_threshold_one_closed_form(self):
        # with threshold 1 the tail is (1-r)^(n-1); solve it directly
        p = small_params(n=6, f=2, k=1, stake=2.0, clue=0.1)
        out = eq.solve_free_rider(p, 0.0, risk_neutral())
        n1 = p.n_rational - 1
        # indifference: clue = stake * (1-r)^n1
        want = 1.0 - (p.clue_cost / p.stake) ** (1.0 / n1)
        assert out.r_star == pytest.approx(want, abs=1e-10)

    def test_risk_averse_residual(self):
        p = small_params(n=7, f=2, k=2)
        spec = risk_averse(0.5, p)
        out = eq.solve_free_rider(p, 0.02, spec)
        assert out.residual < eq.PROB_ABS_TOL
        assert 0.0 < out.r_star < 1.0


class TestP1Supports:
    def test_risk_neutral_reduces_to_query_cost(self):
        p = small_params()
        spec = risk_neutral()
        assert eq.p1_supports_contract_path(p, spec, 0.0, p.query_cost)
        assert not eq.p1_supports_contract_path(p, spec, 0.0, p.query_cost - 1e-9)

    def test_maximal_bribe_always_supports(self):
        p = small_params()
        top = p.compensation - p.query_cost
        for q in (0.0, 0.3, 0.9):
            assert eq.p1_supports_contract_path(p, risk_neutral(), q, top)
            assert eq.p1_supports_contract_path(p, risk_averse(0.4, p), q, top)

    def test_zero_bribe_fails_with_positive_query_cost(self):
        p = small_params()
        assert not eq.p1_supports_contract_path(p, risk_neutral(), 0.0, 0.0)


class TestClassifyRegime:
    def test_no_attack(self):
        got = eq.classify_regime(small_params(), AdversaryParams(0.0, 0.0), risk_neutral())
        assert got.regime == eq.REGIME_SECURE_NO_ATTACK

    def test_client_bribed(self):
        p = small_params()
        adv = AdversaryParams(0.0, p.compensation - p.query_cost + 0.01)
        assert eq.classify_regime(p, adv, risk_neutral()).regime == eq.REGIME_CLIENT_BRIBED

    def test_strong_adversary(self):
        p = small_params()
        adv = AdversaryParams(p.collusion_threshold, 0.0)
        assert eq.classify_regime(p, adv, risk_neutral()).regime == eq.REGIME_STRONG_ADVERSARY

    def test_secure_without_contract(self):
        p = small_params(k=1)
        adv = AdversaryParams(0.5 * p.n_rational * p.clue_cost, 0.0)
        got = eq.classify_regime(p, adv, risk_neutral())
        assert got.regime == eq.REGIME_SECURE_WITHOUT_CONTRACT

    def test_contract_path_failure_carries_q(self):
        p = small_params(k=2)
        adv = AdversaryParams(1.0, p.compensation - p.query_cost - 0.01)
        got = eq.classify_regime(p, adv, risk_neutral())
        assert got.regime == eq.REGIME_CONTRACT_PATH_FAILURE
        assert got.q == pytest.approx(eq.q_star_risk_neutral(p, 1.0).value)

    @pytest.mark.parametrize("seed", range(10))
    def test_total_and_deterministic_on_random_grid(self, seed):
        rng = np.random.default_rng(seed)
        p = small_params(n=int(rng.integers(4, 9)), f=int(rng.integers(0, 2)), k=int(rng.integers(1, 3)))
        adv = AdversaryParams(
            float(rng.uniform(0, 1.2 * p.collusion_threshold)),
            float(rng.uniform(0, 1.2 * (p.compensation - p.query_cost))),
        )
        nu = float(rng.choice([1.0, 0.7, 0.4]))
        spec = risk_neutral() if nu == 1.0 else risk_averse(nu, p)
        first = eq.classify_regime(p, adv, spec)
        second = eq.classify_regime(p, adv, spec)
        assert first == second
        assert first.regime in {
            eq.REGIME_SECURE_NO_ATTACK,
            eq.REGIME_SECURE_WITHOUT_CONTRACT,
            eq.REGIME_CONTRACT_PATH_FAILURE,
            eq.REGIME_STRONG_ADVERSARY,
            eq.REGIME_CLIENT_BRIBED,
        }
