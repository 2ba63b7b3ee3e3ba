import numpy as np
import pytest

from dacsim import reward


class TestPayoffVectors:
    def test_two_member_hand_values(self):
        schedule = reward.constant_schedule(1.5, 2)
        q_vec, t_vec = reward.payoff_vectors(2, 1.0, schedule, q=0.5)
        assert q_vec.tolist() == pytest.approx([0.5, 0.5])
        assert t_vec.tolist() == pytest.approx([1.5 + 1.0, 0.75])

    @pytest.mark.parametrize("q", [0.0, 0.2, 0.7, 1.0])
    def test_distribution_normalized(self, q):
        schedule = reward.constant_schedule(1.0, 6)
        q_vec, _ = reward.payoff_vectors(6, 1.0, schedule, q)
        assert q_vec.sum() == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_at_zero(self):
        schedule = reward.constant_schedule(1.0, 4)
        q_vec, _ = reward.payoff_vectors(4, 1.0, schedule, 0.0)
        assert q_vec.tolist() == pytest.approx([1.0, 0.0, 0.0, 0.0])

    def test_single_member_rejected(self):
        with pytest.raises(ValueError):
            reward.payoff_vectors(1, 1.0, reward.constant_schedule(1.0, 1), 0.5)

    def test_schedule_validates_entries(self):
        with pytest.raises(ValueError):
            reward.RewardSchedule(total=1.0, per_count=(0.5, 1.5))


class TestNetworkWithholdEquilibrium:
    def test_linear_hand_case(self):
        # two members, winner-take-first pot 1.5, response cost 1, stake 0.5:
        # indifference is linear, 1 = (1-q)(1.5+0.5) + q*0.75, root q = 0.8
        eq = reward.solve_reward_equilibrium(2, 1.0, 0.5, reward.constant_schedule(1.5, 2))
        assert eq.q_contract == pytest.approx(0.8, abs=1e-10)
        assert eq.q_fail == pytest.approx(0.04, abs=1e-10)
        assert eq.bribe_cost_per_node == pytest.approx(0.9, abs=1e-10)
        assert eq.residual < 1e-10

    def test_pot_covering_costs_deters(self):
        with pytest.raises(reward.NoEquilibrium):
            reward.solve_reward_equilibrium(2, 1.0, 0.5, reward.constant_schedule(2.0, 2))

    @pytest.mark.parametrize("n,pot", [(3, 0.2), (5, 0.4), (8, 0.6)])
    def test_equilibrium_properties(self, n, pot):
        eq = reward.solve_reward_equilibrium(n, 0.2, 1.0, reward.constant_schedule(pot, n))
        assert 0.0 < eq.q_contract < 1.0
        assert 0.0 < eq.q_fail < 1.0
        assert eq.residual < 1e-10
        # total bribe spend stays strictly below the committee response cost
        assert eq.adversary_spend < n * 0.2


class TestFullWithholdEquilibrium:
    def test_closed_form_identity(self):
        eq = reward.solve_reward_equilibrium_bribed(
            3, 0.1, 1.0, 0.3, reward.constant_schedule(0.5, 3)
        )
        want = ((1.0 - eq.q_network) * (1.0 - eq.q_contract)) ** 3
        assert eq.q_fail == pytest.approx(want, abs=1e-12)

    def test_three_member_fixture(self):
        # frozen from the bisection + closed forms; independently confirmed by
        # the Monte Carlo acceptance run
        eq = reward.solve_reward_equilibrium_bribed(
            3, 0.1, 1.0, 0.3, reward.constant_schedule(0.5, 3)
        )
        assert eq.q_contract == pytest.approx(0.6185466433100755, abs=1e-9)
        assert eq.q_network == pytest.approx(0.17939619698795206, abs=1e-9)
        assert eq.q_fail == pytest.approx(0.03067078550501711, abs=1e-9)
        assert eq.adversary_spend == pytest.approx(0.23118039478118335, abs=1e-9)
        assert eq.residual < 1e-10

    def test_vanishing_bribe_limit(self):
        eq = reward.solve_reward_equilibrium_bribed(
            3, 0.1, 1.0, 1e-9, reward.constant_schedule(0.25, 3)
        )
        assert eq.q_network > 0.999
        assert eq.q_fail < 1e-6

    def test_preconditions(self):
        schedule = reward.constant_schedule(0.5, 3)
        with pytest.raises(ValueError):
            reward.solve_reward_equilibrium_bribed(3, 1.0, 0.5, 0.1, schedule)  # cost >= stake
        with pytest.raises(ValueError):
            reward.solve_reward_equilibrium_bribed(3, 0.1, 1.0, 1.0, schedule)  # bribe too big
        with pytest.raises(reward.NoEquilibrium):
            reward.solve_reward_equilibrium_bribed(
                3, 0.1, 1.0, 0.3, reward.constant_schedule(1.3, 3)
            )


class TestRootBracketing:
    def test_non_monotone_profile_still_bracketed(self):
        # full-crowd payouts make the expected payout dip then rise in q
        schedule = reward.RewardSchedule(total=0.4, per_count=(0.0, 0.0, 0.4))
        grid = np.linspace(0, 1, 200)
        vals = []
        for q in grid:
            q_vec, t_vec = reward.payoff_vectors(3, 0.2, schedule, q)
            vals.append(float(q_vec @ t_vec))
        vals = np.array(vals)
        assert np.any(np.diff(vals) > 0) and np.any(np.diff(vals) < 0)
        eq = reward.solve_reward_equilibrium(3, 0.15, 0.2, schedule)
        assert eq.residual < 1e-10
        # analytic root of 0.2(1-q)^2 + (0.4/3) q^2 = 0.15
        assert eq.q_contract == pytest.approx(0.14173, abs=1e-4)
