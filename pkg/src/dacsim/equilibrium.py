"""Equilibrium failure probabilities, bribe bounds, and regime classification.

The central quantity is the worst-equilibrium probability that a query posted
to the contract goes unanswered, as a function of the adversary's node-bribe
budget.  For risk-neutral nodes it has a closed form; for risk-averse nodes
it is the optimum of a nonconvex bribe-allocation problem, which this module
brackets with certified bounds, and solves exactly on small instances by
subset enumeration plus an exact inner LP.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

from . import simplex
from .model import AdversaryParams, ProtocolParams, UtilitySpec, require_valid, utility

# Fixed solver tolerances.  Bisections run to double-precision interval
# collapse, so the guaranteed tolerances below hold with a wide margin; the
# test suite asserts them as stated.
ROOT_ITERATIONS = 200  # bisection halvings; drives intervals to double resolution
PROB_ABS_TOL = 1e-10  # guaranteed on roots in [0, 1]
COIN_REL_TOL = 1e-10  # guaranteed (relative) on coin-amount roots
LP_TOL = 1e-9  # guaranteed agreement of the exact solver with closed forms
MAX_GROUPS = 500  # subset-enumeration cap for the exact small-instance solver


class StrongAdversaryError(Exception):
    """Budget at or above the full-withholding threshold: failure probability 1."""


class ThresholdSaturation(Exception):
    """Requested failure level is not reachable below the full-withholding
    threshold; the budget saturates at the threshold itself."""


class InstanceTooLargeError(Exception):
    pass


@dataclass(frozen=True)
class FailureProbability:
    """A probability in [0, 1] with the provenance of how it was obtained."""

    value: float
    provenance: str  # exact-closed-form | lower-bound | upper-bound |
    #                  numerical-optimum | monte-carlo
    trials: Optional[int] = None
    ci_halfwidth: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability {self.value} outside [0, 1]")


@dataclass(frozen=True)
class BribeAllocation:
    """Per-node bribe offers to the rational nodes."""

    per_node: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.per_node, dtype=float)
        if (arr < 0).any():
            raise ValueError("bribes must be nonnegative")
        object.__setattr__(self, "per_node", arr)

    @property
    def total(self) -> float:
        return float(self.per_node.sum())


@dataclass(frozen=True)
class RegimeClassification:
    regime: str
    q: Optional[float] = None
    provenance: Optional[str] = None

    def to_json(self) -> dict:
        return {"regime": self.regime, "q": self.q, "provenance": self.provenance}


REGIME_SECURE_NO_ATTACK = "SecureNoAttack"
REGIME_SECURE_WITHOUT_CONTRACT = "SecureWithoutContract"
REGIME_CONTRACT_PATH_FAILURE = "ContractPathFailure"
REGIME_STRONG_ADVERSARY = "StrongAdversaryFailure"
REGIME_CLIENT_BRIBED = "ClientBribedFailure"


def _bisect(f, lo, hi, iterations=ROOT_ITERATIONS):
    """Root of the increasing function f on [lo, hi] with f(lo) <= 0 <= f(hi)."""
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def q_star_risk_neutral(params: ProtocolParams, p0: float) -> FailureProbability:
    """Worst-equilibrium contract-path failure probability for linear utility.

    Equals p0 / (n_critical * (stake - clue_cost)), saturating at 1 once the
    budget lets the adversary pay every critical node its full opportunity
    cost of responding.
    """
    require_valid(params)
    if p0 < 0:
        raise ValueError("p0 must be nonnegative")
    threshold = params.collusion_threshold
    if p0 >= threshold:
        return FailureProbability(1.0, "exact-closed-form")
    return FailureProbability(p0 / threshold, "exact-closed-form")


def _indifference_prob(bribe: float, stake: float, clue_cost: float, nu: float) -> float:
    """Largest withholding probability a bribed node tolerates: the root of
    indifference between responding and risking the slash.

    ((stake+b)^nu - stake^nu) / ((stake+b)^nu - (clue_cost+b)^nu)
    """
    if bribe <= 0.0:
        return 0.0
    if nu == 1.0:
        return bribe / (stake - clue_cost)
    top = stake**nu * math.expm1(nu * math.log1p(bribe / stake))
    bottom = (stake + bribe) ** nu - (clue_cost + bribe) ** nu
    return top / bottom


def q_star_bounds_risk_averse(
    params: ProtocolParams, p0: float, nu: float
) -> tuple[FailureProbability, FailureProbability]:
    """Certified lower and upper bounds on the worst-equilibrium failure
    probability for utility x**nu.

    The lower bound is achieved by spreading the budget evenly over a
    critical set; the upper bound combines the linear relaxation with the
    concentrate-on-one-node relaxation.  At nu = 1 both collapse to the
    closed form.
    """
    require_valid(params)
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    if p0 < 0:
        raise ValueError("p0 must be nonnegative")
    if p0 >= params.collusion_threshold:
        raise StrongAdversaryError(
            "budget reaches the full-withholding threshold; failure probability 1"
        )
    m = params.n_critical
    stake, clue = params.stake, params.clue_cost
    if nu == 1.0:
        q = p0 / params.collusion_threshold
        return (
            FailureProbability(q, "lower-bound"),
            FailureProbability(q, "upper-bound"),
        )
    lower = _indifference_prob(p0 / m, stake, clue, nu)
    upper = min(p0 / (stake - clue), _indifference_prob(p0, stake, clue, nu)) / m
    lower = min(lower, 1.0)
    upper = min(upper, 1.0)
    return (
        FailureProbability(lower, "lower-bound"),
        FailureProbability(upper, "upper-bound"),
    )


def _respond_caps(bribes: np.ndarray, stake: float, clue: float, nu: float) -> np.ndarray:
    return np.array([_indifference_prob(b, stake, clue, nu) for b in bribes])


def _withholding_lp(
    groups: list[tuple[int, ...]], n_rational: int, caps: np.ndarray
) -> float:
    """Exact value of: max sum x_G s.t. per-node group sums <= caps, x_G in [0,1]."""
    g = len(groups)
    rows = []
    rhs = []
    for i in range(n_rational):
        row = np.zeros(g)
        for j, grp in enumerate(groups):
            if i in grp:
                row[j] = 1.0
        rows.append(row)
        rhs.append(caps[i])
    A = np.vstack([np.array(rows), np.eye(g)])
    b = np.concatenate([np.array(rhs), np.ones(g)])
    value, _ = simplex.maximize(np.ones(g), A, b, tol=1e-13)
    return value


def enumerate_critical_groups(params: ProtocolParams) -> list[tuple[int, ...]]:
    n_rational, m = params.n_rational, params.n_critical
    count = math.comb(n_rational, m)
    if count > MAX_GROUPS:
        raise InstanceTooLargeError(
            f"{count} critical node sets exceed the cap of {MAX_GROUPS}"
        )
    return list(itertools.combinations(range(n_rational), m))


def _compositions(parts: int, steps: int):
    """Sorted-descending integer compositions of `steps` into `parts`.
    Sortedness exploits node exchangeability."""
    for cuts in itertools.combinations_with_replacement(range(steps + 1), parts - 1):
        shares = []
        prev = 0
        for c in cuts:
            shares.append(c - prev)
            prev = c
        shares.append(steps - prev)
        yield tuple(sorted(shares, reverse=True))


def _grid_splits(p0: float, parts: int, steps: int) -> list[np.ndarray]:
    """Deterministic coarse grid of budget splits; the grid resolution drops
    when the composition count would blow up, leaving refinement to the
    pattern search."""
    eff = steps
    while eff > 1 and math.comb(eff + parts - 1, parts - 1) > 4000:
        eff -= 1
    seen = set()
    out = []
    for shares in _compositions(parts, eff):
        if shares in seen:
            continue
        seen.add(shares)
        out.append(np.array(shares, dtype=float) * (p0 / eff))
    return out


def _optimize_bribes(
    params: ProtocolParams,
    p0: float,
    nu: float,
    grid: int,
    multistarts: int,
    seed: int,
) -> tuple[float, BribeAllocation]:
    n_rational = params.n_rational
    m = params.n_critical
    stake, clue = params.stake, params.clue_cost
    groups = enumerate_critical_groups(params)

    def value_of(bribes: np.ndarray) -> float:
        caps = _respond_caps(bribes, stake, clue, nu)
        return min(_withholding_lp(groups, n_rational, caps), 1.0)

    if p0 == 0.0:
        return 0.0, BribeAllocation(np.zeros(n_rational))

    # deterministic coarse grid over sorted budget splits (budget fully spent:
    # enlarging any bribe only relaxes the LP)
    candidates = _grid_splits(p0, n_rational, grid)
    # always include the even split over a critical set and over everyone
    even_critical = np.zeros(n_rational)
    even_critical[:m] = p0 / m
    candidates.append(even_critical)
    candidates.append(np.full(n_rational, p0 / n_rational))

    scored = [(value_of(c), tuple(c)) for c in candidates]
    scored.sort(reverse=True)
    best_value, best_alloc = scored[0][0], np.array(scored[0][1])

    rng = np.random.default_rng(seed)
    starts = [np.array(s[1]) for s in scored[:3]]
    for _ in range(multistarts):
        w = rng.dirichlet(np.ones(n_rational))
        starts.append(np.sort(w)[::-1] * p0)

    # pairwise-transfer pattern search with shrinking step
    for start in starts:
        alloc = start.copy()
        val = value_of(alloc)
        step = p0 / grid
        while step > p0 * 1e-6:
            improved = False
            for i in range(n_rational):
                for j in range(n_rational):
                    if i == j or alloc[j] < step:
                        continue
                    trial = alloc.copy()
                    trial[j] -= step
                    trial[i] += step
                    tv = value_of(trial)
                    if tv > val + 1e-15:
                        alloc, val = trial, tv
                        improved = True
            if not improved:
                step *= 0.5
        if val > best_value:
            best_value, best_alloc = val, alloc
    return best_value, BribeAllocation(best_alloc)


def solve_q_star_exact_small(
    params: ProtocolParams,
    p0: float,
    nu: float,
    grid: int = 16,
    multistarts: int = 8,
    seed: int = 0,
) -> FailureProbability:
    """Exact worst-equilibrium failure probability on small instances.

    Enumerates every critical set of rational nodes; for a fixed bribe split
    the inner withholding-mass problem is a linear program solved exactly,
    and the nonconvex outer split is searched by a sorted grid plus
    multistart pairwise-transfer refinement.
    """
    require_valid(params)
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    if p0 >= params.collusion_threshold:
        raise StrongAdversaryError("budget reaches the full-withholding threshold")
    value, _ = _optimize_bribes(params, p0, nu, grid, multistarts, seed)
    return FailureProbability(min(max(value, 0.0), 1.0), "numerical-optimum")


@dataclass(frozen=True)
class BribeBounds:
    """Bribe budgets needed to push the failure probability to a target.

    p0_min comes from inverting the failure upper bound (no smaller budget
    can possibly reach the target), p0_max from inverting the lower bound
    (this budget certainly suffices).
    """

    p0_min: float
    p0_max: float
    epsilon_target: float


def min_bribe_for_failure(
    params: ProtocolParams, nu: float, epsilon_target: float
) -> BribeBounds:
    """Invert the failure-probability bounds at a target failure level."""
    require_valid(params)
    if not 0.0 < epsilon_target < 1.0:
        raise ValueError("epsilon_target must lie in (0, 1)")
    threshold = params.collusion_threshold

    def upper_at(p0: float) -> float:
        if nu == 1.0:
            return p0 / threshold
        _, up = q_star_bounds_risk_averse(params, p0, nu)
        return up.value

    def lower_at(p0: float) -> float:
        if nu == 1.0:
            return p0 / threshold
        lo, _ = q_star_bounds_risk_averse(params, p0, nu)
        return lo.value

    # both bound expressions are increasing in the budget and reach
    # epsilon_target strictly below the full-withholding threshold
    hi = threshold * (1 - 1e-15)
    if upper_at(hi) < epsilon_target or lower_at(hi) < epsilon_target:
        raise ThresholdSaturation(
            f"failure level {epsilon_target} only reachable at the "
            f"full-withholding threshold {threshold}"
        )
    p0_min = _bisect(lambda p: upper_at(p) - epsilon_target, 0.0, hi)
    p0_max = _bisect(lambda p: lower_at(p) - epsilon_target, 0.0, hi)
    return BribeBounds(p0_min=p0_min, p0_max=p0_max, epsilon_target=epsilon_target)


def repeated_query_factor(q_star: float, ell: int) -> float:
    """Failure probability per campaign when the client may repeat the query
    ell times: collusion simply withholds in all repeats with probability
    q_star / ell."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    return q_star / ell


def binomial_below(n: int, k: int, p: float) -> float:
    """P[Binomial(n, p) < k]."""
    if k <= 0:
        return 0.0
    if k > n:
        return 1.0
    return float(binom.cdf(k - 1, n, p))


@dataclass(frozen=True)
class FreeRiderEquilibrium:
    r_star: float
    failure: FailureProbability
    residual: float


def solve_free_rider(
    params: ProtocolParams, penalty: float, spec: UtilitySpec
) -> FreeRiderEquilibrium:
    """Mixed equilibrium under an under-punishing contract.

    With the safe-case penalty below the clue cost, each rational node relies
    on the others and posts its clue only with probability r*, the root of
    the indifference condition between responding (pay the clue cost) and
    withholding (risk the stake when fewer than threshold_k of the others
    respond, otherwise pay only `penalty`).
    """
    require_valid(params)
    n_rational, k = params.n_rational, params.threshold_k
    clue = params.clue_cost
    if penalty >= clue:
        return FreeRiderEquilibrium(
            r_star=1.0,
            failure=FailureProbability(0.0, "exact-closed-form"),
            residual=0.0,
        )

    u_respond = utility(spec, -clue)

    def withhold_gain(r: float) -> float:
        below = binomial_below(n_rational - 1, k, r)
        u_withhold = below * utility(spec, -params.stake) + (1 - below) * utility(
            spec, -penalty
        )
        return u_withhold - u_respond

    # withholding beats responding at r = 1 (mild penalty < clue cost) and
    # loses at r = 0 (certain slash), so the increasing gain has a root
    if withhold_gain(1.0) < 0.0:
        return FreeRiderEquilibrium(
            r_star=0.0,
            failure=FailureProbability(1.0, "exact-closed-form"),
            residual=abs(withhold_gain(0.0)),
        )
    r_star = _bisect(withhold_gain, 0.0, 1.0)
    fail = binomial_below(n_rational, k, r_star)
    return FreeRiderEquilibrium(
        r_star=r_star,
        failure=FailureProbability(fail, "exact-closed-form"),
        residual=abs(withhold_gain(r_star)),
    )


def p1_supports_contract_path(
    params: ProtocolParams, spec: UtilitySpec, q_star: float, p1: float
) -> bool:
    """Whether a client bribe of p1 makes always-querying at least as good for
    the client as trusting network replies."""
    nu = spec.nu
    base = params.client_value - params.query_cost + p1
    lhs = (1 - q_star) * base**nu + q_star * (base + params.compensation) ** nu
    return lhs >= params.client_value**nu


def worst_case_q(params: ProtocolParams, p0: float, nu: float) -> FailureProbability:
    """Exact closed form at nu = 1; certified upper bound otherwise."""
    if nu == 1.0:
        return q_star_risk_neutral(params, p0)
    if p0 >= params.collusion_threshold:
        return FailureProbability(1.0, "upper-bound")
    _, up = q_star_bounds_risk_averse(params, p0, nu)
    return up


def classify_regime(
    params: ProtocolParams, adversary: AdversaryParams, spec: UtilitySpec
) -> RegimeClassification:
    """Place an adversary in one of the five security regimes.

    Checked in order: a bribed client that never queries, an overwhelming
    node budget, no attack at all, the small-budget small-bribe case where
    network replies alone secure every equilibrium (threshold_k = 1), and
    otherwise the residual contract-path failure probability.
    """
    require_valid(params)
    p0, p1 = adversary.node_budget, adversary.client_bribe
    if p1 > params.compensation - params.query_cost:
        return RegimeClassification(REGIME_CLIENT_BRIBED, q=1.0, provenance="exact-closed-form")
    if p0 >= params.collusion_threshold:
        return RegimeClassification(REGIME_STRONG_ADVERSARY, q=1.0, provenance="exact-closed-form")
    if p0 == 0.0 and p1 == 0.0:
        return RegimeClassification(REGIME_SECURE_NO_ATTACK, q=0.0, provenance="exact-closed-form")
    q = worst_case_q(params, p0, spec.nu)
    if (
        params.threshold_k == 1
        and p0 < params.n_rational * params.clue_cost
        and not p1_supports_contract_path(params, spec, q.value, p1)
    ):
        return RegimeClassification(
            REGIME_SECURE_WITHOUT_CONTRACT, q=0.0, provenance="exact-closed-form"
        )
    return RegimeClassification(
        REGIME_CONTRACT_PATH_FAILURE, q=q.value, provenance=q.provenance
    )
