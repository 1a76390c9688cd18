"""Seeded instance generators for the verification sweeps.

All randomness flows through a splittable scheme: stream(seed, index, ...)
builds an independent generator per scenario, so adding scenarios never
perturbs earlier ones and results are reproducible under any scheduling.
"""

from __future__ import annotations

import numpy as np

from .chain import ChainScenario, ReversibleChain, stationary_from_potential
from .errors import DisconnectedGraph
from .probcore import Distribution
from .rlvr import PromptRecord, RlvrFamily

_GRAPH_ATTEMPTS = 1000


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _connected_er_graph(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric Erdos-Renyi adjacency conditioned on connectivity."""
    if n == 1:
        raise ValueError("need at least 2 states for a proposal graph")
    edge_p = min(1.0, max(0.35, 2.0 * np.log(n) / n))
    for _ in range(_GRAPH_ATTEMPTS):
        upper = rng.random((n, n)) < edge_p
        adj = np.triu(upper, k=1)
        adj = adj | adj.T
        if _adj_connected(adj):
            return adj
    raise DisconnectedGraph("failed to sample a connected proposal graph")


def _adj_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while frontier.size:
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = np.nonzero(nxt)[0]
    return bool(seen.all())


def random_scenario(seed: int, index: int, n_states: int = 32,
                    beta: float = 1.0) -> ChainScenario:
    """Generic instance: Dirichlet base distribution, standard-normal
    improvement potential, connected random proposal graph."""
    rng = stream(seed, index)
    adj = _connected_er_graph(rng, n_states)
    p_data = Distribution.from_probs(rng.dirichlet(np.ones(n_states)))
    h = rng.standard_normal(n_states)
    return ChainScenario(
        n_states=n_states,
        p_data=p_data,
        proposal_graph=adj,
        h=h,
        beta=float(beta),
        seed=int(seed),
    )


def scenario_grid(seed: int, count: int, sizes=(8, 16, 32, 64),
                  betas=(0.25, 0.5, 1.0, 2.0, 4.0)) -> list[ChainScenario]:
    """Deterministic sweep of `count` scenarios cycling through sizes/betas."""
    out = []
    for i in range(count):
        out.append(
            random_scenario(
                seed, i,
                n_states=sizes[i % len(sizes)],
                beta=betas[i % len(betas)],
            )
        )
    return out


def birth_death_chain(seed: int, index: int, n_states: int = 24,
                      move_prob: float = 0.45) -> tuple[ReversibleChain, float]:
    """Drift-compliant ladder chain plus a target threshold.

    Potential rises linearly with the state index; moves go one step up or
    down with Metropolis acceptance, so every state above the threshold has
    uniformly negative drift.  Returns (chain, threshold_b) with the
    threshold placed a quarter of the way up the ladder.
    """
    rng = stream(seed, index)
    slope = float(rng.uniform(0.5, 1.5))
    n = n_states
    v = slope * np.arange(n, dtype=float)
    accept_up = float(np.exp(-slope))
    kernel = np.zeros((n, n))
    for s in range(n):
        if s + 1 < n:
            kernel[s, s + 1] = move_prob * accept_up
        if s - 1 >= 0:
            kernel[s, s - 1] = move_prob
        kernel[s, s] = 1.0 - kernel[s].sum()
    chain = ReversibleChain(
        kernel=kernel,
        potential=v,
        stationary=stationary_from_potential(v),
    )
    threshold_b = float(v[max(1, n // 4) - 1])
    return chain, threshold_b


def random_family(seed: int, index: int, n_prompts: int = 16,
                  n_responses: int = 12, beta: float = 1.0) -> RlvrFamily:
    """Binary-reward family with every prompt mixed (>=1 success, >=1 failure)."""
    rng = stream(seed, index)
    prompts = []
    for _ in range(n_prompts):
        pi_inst = Distribution.from_probs(rng.dirichlet(np.ones(n_responses)))
        n_ones = int(rng.integers(1, n_responses))
        reward = np.zeros(n_responses)
        reward[rng.choice(n_responses, size=n_ones, replace=False)] = 1.0
        prompts.append(PromptRecord(pi_inst=pi_inst, reward=reward))
    weights = rng.dirichlet(np.ones(n_prompts))
    return RlvrFamily(prompts=tuple(prompts), prompt_weights=Distribution.from_probs(weights),
                      beta=float(beta))


def near_target_family(seed: int, index: int, n_prompts: int = 12,
                       n_responses: int = 12, beta: float = 0.1) -> RlvrFamily:
    """Family whose target accuracies all sit above 0.99.

    Small beta makes the endpoint tilt strong; keeping at least a quarter of
    the responses rewarded bounds the success mass away from zero.
    """
    rng = stream(seed, index)
    prompts = []
    k_min = max(1, n_responses // 4)
    for _ in range(n_prompts):
        pi_inst = Distribution.from_probs(rng.dirichlet(np.ones(n_responses)))
        n_ones = int(rng.integers(k_min, n_responses - 1))
        reward = np.zeros(n_responses)
        reward[rng.choice(n_responses, size=n_ones, replace=False)] = 1.0
        prompts.append(PromptRecord(pi_inst=pi_inst, reward=reward))
    weights = rng.dirichlet(np.ones(n_prompts))
    return RlvrFamily(prompts=tuple(prompts), prompt_weights=Distribution.from_probs(weights),
                      beta=float(beta))
