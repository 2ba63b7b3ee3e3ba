"""The on-chain slashing rule and black-box checkers for its fairness axioms.

The slashing rule maps the response bitmap of one contract round to payoffs:
a responder pays nothing extra, a non-responder loses its whole stake if the
quorum failed and only a mild penalty if the quorum was met.  The checkers
audit any user-supplied payoff function, not just the built-in ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import ActionVector, PayoffReport, ProtocolParams

EXHAUSTIVE_MAX_NODES = 12  # 2**N action vectors stay enumerable up to here
FULL_PERMUTATION_MAX_NODES = 8  # above this, symmetry uses sampled permutations
DEFAULT_SAMPLED_PERMUTATIONS = 512
DEFAULT_SAMPLED_VECTORS = 2048


@dataclass(frozen=True)
class SlashingFunction:
    """Payoff rule for one contract round.

    kind "optimal" penalizes safe non-response by clue_cost + epsilon_slash.
    kind "custom" replaces that penalty with a fixed amount; the failure
    branch (full stake) and the client compensation are unchanged.  The
    custom variant exists to exhibit the free-rider equilibrium of
    under-punishing contracts.
    """

    kind: str = "optimal"
    custom_safe_penalty: float = 0.0

    def safe_penalty(self, params: ProtocolParams) -> float:
        if self.kind == "optimal":
            return params.safe_penalty
        return self.custom_safe_penalty

    def payoffs(self, params: ProtocolParams, bits: np.ndarray) -> tuple[np.ndarray, float]:
        responders = int(bits.sum())
        quorum = responders >= params.threshold_k
        penalty = self.safe_penalty(params) if quorum else params.stake
        node = np.where(bits == 1, 0.0, -penalty)
        client = 0.0 if quorum else params.compensation
        return node, client


def optimal() -> SlashingFunction:
    return SlashingFunction(kind="optimal")


def custom_punishment(penalty: float) -> SlashingFunction:
    return SlashingFunction(kind="custom", custom_safe_penalty=penalty)


def slash(fn: SlashingFunction, params: ProtocolParams, x: ActionVector) -> PayoffReport:
    """Apply the slashing rule to one response bitmap."""
    if len(x) != params.n_nodes:
        raise ValueError(
            f"action vector length {len(x)} does not match n_nodes {params.n_nodes}"
        )
    node, client = fn.payoffs(params, x.bits)
    return PayoffReport(node_payoffs=node, client_payoff=client)


@dataclass(frozen=True)
class CheckResult:
    axiom: str
    mode: str
    tested: int
    passed: bool
    counterexample: Optional[dict] = None

    def to_json(self) -> dict:
        record = {
            "axiom": self.axiom,
            "mode": self.mode,
            "tested": self.tested,
            "result": "pass" if self.passed else "fail",
        }
        if self.counterexample is not None:
            record["counterexample"] = self.counterexample
        return record


Evaluator = Callable[[ProtocolParams, np.ndarray], tuple[np.ndarray, float]]


def _as_evaluator(fn) -> Evaluator:
    if isinstance(fn, SlashingFunction):
        return fn.payoffs
    return fn


def _all_vectors(n: int) -> np.ndarray:
    # lexicographic enumeration of {0,1}^n, row index = binary value of the tuple
    idx = np.arange(2**n, dtype=np.uint32)
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def _payoff_table(ev: Evaluator, params: ProtocolParams, vectors: np.ndarray):
    rows = vectors.shape[0]
    node = np.empty((rows, params.n_nodes))
    client = np.empty(rows)
    for r in range(rows):
        node[r], client[r] = ev(params, vectors[r])
    return node, client


def _vector_pool(params: ProtocolParams, mode: str, trials: int, seed: int):
    n = params.n_nodes
    if mode == "exhaustive":
        if n > EXHAUSTIVE_MAX_NODES:
            raise ValueError(
                f"exhaustive checking supports at most {EXHAUSTIVE_MAX_NODES} nodes"
            )
        return _all_vectors(n)
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(trials, n), dtype=np.uint8)


def _permutation_pool(n: int, mode: str, trials: int, seed: int) -> list[tuple[int, ...]]:
    if mode == "exhaustive" and n <= FULL_PERMUTATION_MAX_NODES:
        return list(itertools.permutations(range(n)))
    rng = np.random.default_rng(seed)
    count = min(trials, 1_000_000)
    perms = [tuple(range(n)), tuple(reversed(range(n)))]
    perms += [tuple(rng.permutation(n)) for _ in range(count)]
    return perms


def check_symmetry(
    fn,
    params: ProtocolParams,
    mode: str = "exhaustive",
    trials: int = DEFAULT_SAMPLED_VECTORS,
    seed: int = 0,
) -> CheckResult:
    """Verify that relabeling nodes relabels payoffs: f(perm(x)) == perm(f(x)).

    Exhaustive mode enumerates all 2**N vectors (N <= 12) and all N!
    permutations for N <= 8; larger N fall back to a seeded permutation
    sample.  The reported counterexample is the lexicographically first
    violating (vector, permutation) pair.
    """
    ev = _as_evaluator(fn)
    n = params.n_nodes
    vectors = _vector_pool(params, mode, trials, seed)
    perm_trials = DEFAULT_SAMPLED_PERMUTATIONS if mode == "exhaustive" else trials
    perms = _permutation_pool(n, mode, perm_trials, seed)

    node_table, client_table = _payoff_table(ev, params, vectors)
    tested = 0
    best: Optional[tuple[int, int]] = None  # (vector row, permutation rank)

    if mode == "exhaustive":
        # vectors are index-addressable: process permutations in blocks
        pow2 = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
        perm_arr = np.array(perms, dtype=np.intp)
        # block size tuned to stay cache-resident
        chunk = max(1, 100_000 // (vectors.shape[0] * n))
        for start in range(0, len(perms), chunk):
            block = perm_arr[start : start + chunk]  # (C, n)
            permuted = vectors[:, block].astype(np.int64)  # (M, C, n)
            idx = permuted @ pow2  # (M, C)
            lhs_node = node_table[idx]  # (M, C, n)
            lhs_client = client_table[idx]
            rhs_node = node_table[:, block]
            tested += idx.size
            bad = ~(
                (lhs_node == rhs_node).all(axis=2)
                & (lhs_client == client_table[:, None])
            )
            if bad.any():
                rows, cols = np.nonzero(bad)
                order = np.lexsort((cols, rows))
                cand = (int(rows[order[0]]), start + int(cols[order[0]]))
                if best is None or cand < best:
                    best = cand
    else:
        # sampled vectors are not index-addressable; evaluate permuted inputs
        for rank, perm in enumerate(perms):
            p = np.asarray(perm)
            lhs_node, lhs_client = _payoff_table(ev, params, vectors[:, p])
            rhs_node = node_table[:, p]
            tested += vectors.shape[0]
            bad = ~(
                np.all(lhs_node == rhs_node, axis=1) & (lhs_client == client_table)
            )
            if bad.any():
                row = int(np.argmax(bad))
                if best is None or (row, rank) < best:
                    best = (row, rank)
    if best is None:
        return CheckResult("symmetry", mode, tested, True)
    row, rank = best
    return CheckResult(
        "symmetry",
        mode,
        tested,
        False,
        counterexample={
            "vector": vectors[row].tolist(),
            "permutation": list(perms[rank]),
        },
    )


def check_no_reward(
    fn,
    params: ProtocolParams,
    mode: str = "exhaustive",
    trials: int = DEFAULT_SAMPLED_VECTORS,
    seed: int = 0,
) -> CheckResult:
    """Verify no positive payoffs: every node payoff <= 0 and the client plus
    node total <= 0 on every tested vector."""
    ev = _as_evaluator(fn)
    vectors = _vector_pool(params, mode, trials, seed)
    node_table, client_table = _payoff_table(ev, params, vectors)
    node_ok = np.all(node_table <= 0.0, axis=1)
    sum_ok = client_table + node_table.sum(axis=1) <= 0.0
    bad = ~(node_ok & sum_ok)
    if not bad.any():
        return CheckResult("no_reward", mode, vectors.shape[0], True)
    row = int(np.argmax(bad))
    return CheckResult(
        "no_reward",
        mode,
        vectors.shape[0],
        False,
        counterexample={
            "vector": vectors[row].tolist(),
            "node_payoffs": node_table[row].tolist(),
            "client_payoff": float(client_table[row]),
        },
    )


def check_minimal_punishment(
    fn,
    params: ProtocolParams,
    bound: float,
    mode: str = "exhaustive",
    trials: int = DEFAULT_SAMPLED_VECTORS,
    seed: int = 0,
) -> CheckResult:
    """Verify that when the quorum is met, no node loses more than `bound`."""
    ev = _as_evaluator(fn)
    vectors = _vector_pool(params, mode, trials, seed)
    node_table, _ = _payoff_table(ev, params, vectors)
    quorum = vectors.sum(axis=1) >= params.threshold_k
    ok = np.all(node_table >= -bound, axis=1) | ~quorum
    bad = ~ok
    if not bad.any():
        return CheckResult("minimal_punishment", mode, vectors.shape[0], True)
    row = int(np.argmax(bad))
    return CheckResult(
        "minimal_punishment",
        mode,
        vectors.shape[0],
        False,
        counterexample={
            "vector": vectors[row].tolist(),
            "node_payoffs": node_table[row].tolist(),
            "bound": bound,
        },
    )
