"""The embedded birth-death chain of the process restricted to one branch.

Along any fixed infinite branch the living particles form one contiguous
clan; its size, observed at jump times, is a Markov chain on the
nonnegative integers that steps up when the clan-edge particle places a
child on the branch before the clan head's kill clock rings, and down
otherwise.  The up-probability

    p = (lam / d) * [1 - (lam / (1 + lam))^d]
      = (1/d) * sum_{i=1..d} P(Gamma(i, lam) < Exponential(1))

does not depend on the clan size, so extinction reduces to gambler's ruin
with constant p: certain for p <= 1/2 (equivalently h_d(lam) >= 0, i.e.
lam <= lambda_s(d)), and of probability q/p from the initial single-type
clan otherwise.  Which branch is fixed is immaterial by symmetry; no branch
is ever materialised.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .criticality import ratio_power
from .seeding import substream


def p_up(d: int, lam: float) -> float:
    """Up-step probability of the embedded chain (0 at lam = 0)."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d!r}")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam == 0.0:
        return 0.0
    return float(lam / d * (1.0 - ratio_power(lam / (1.0 + lam), d)))


@dataclass(frozen=True)
class ChainParams:
    """Embedded-chain transition probabilities for (d, lam)."""

    d: int
    lam: float
    p: float
    q: float

    @classmethod
    def from_model(cls, d: int, lam: float) -> "ChainParams":
        p = p_up(d, lam)
        return cls(d=d, lam=lam, p=p, q=1.0 - p)


def extinction_prob_branch(d: int, lam: float) -> float:
    """Probability the clan on a fixed branch ever dies out.

    Gambler's ruin from state 1 with constant up-probability p: the chain
    is absorbed almost surely iff q/p >= 1 (the geometric series
    sum (q/p)^k diverges), i.e. iff lam <= lambda_s(d); above that the
    ruin probability is q/p.
    """
    p = p_up(d, lam)
    if p <= 0.0:
        return 1.0
    q = 1.0 - p
    if q >= p:
        return 1.0
    return q / p


@dataclass(frozen=True)
class ChainRun:
    """One simulated chain path from the starting clan size."""

    outcome: str  # "extinct" (hit 0) or "censored" (max_steps reached)
    steps: int
    max_clan_size: int
    seed: int


def simulate_chain(d: int, lam: float, max_steps: int, seed: int,
                   start: int = 1) -> ChainRun:
    """Random walk from ``start``: up with probability p_up, absorbing at 0.

    At lam = lambda_s(d) the walk is critical: absorption is almost sure
    but the expected absorption time is infinite, so long censored runs are
    expected there.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    p = p_up(d, lam)
    g = substream(seed)
    absorbed, steps, mx, _x = _kernels.run_chain(g, p, int(max_steps), int(start))
    return ChainRun(
        outcome="extinct" if absorbed else "censored",
        steps=int(steps),
        max_clan_size=int(mx),
        seed=int(seed),
    )


@dataclass
class ChainReplicaSet:
    """Outcomes of n independent chain runs."""

    d: int
    lam: float
    p: float
    n: int
    max_steps: int
    master_seed: int
    absorbed: np.ndarray
    steps: np.ndarray
    max_states: np.ndarray
    final_states: np.ndarray

    @property
    def extinct_fraction(self) -> float:
        return float(np.count_nonzero(self.absorbed)) / self.n

    @property
    def censored_fraction(self) -> float:
        return 1.0 - self.extinct_fraction


def run_chain_replicas(d: int, lam: float, max_steps: int, n_replicas: int,
                       master_seed: int, threads: int = 1, start: int = 1,
                       key_prefix: tuple[int, ...] = ()) -> ChainReplicaSet:
    """n independent chain runs; replica r draws from
    substream(master_seed, *key_prefix, r).  Thread count never changes the
    result (same contract as engine.run_replicas)."""
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    n = int(n_replicas)
    p = p_up(d, lam)
    absorbed = np.empty(n, np.bool_)
    steps = np.empty(n, np.int64)
    max_states = np.empty(n, np.int64)
    final_states = np.empty(n, np.int64)

    def work(block):
        for r in block:
            g = substream(master_seed, *key_prefix, r)
            a, s, mx, x = _kernels.run_chain(g, p, int(max_steps), int(start))
            absorbed[r] = a
            steps[r] = s
            max_states[r] = mx
            final_states[r] = x

    threads = max(1, int(threads))
    if threads == 1:
        work(range(n))
    else:
        chunk = (n + threads - 1) // threads
        blocks = [range(i, min(i + chunk, n)) for i in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, blocks))

    return ChainReplicaSet(
        d=d, lam=lam, p=p, n=n, max_steps=int(max_steps),
        master_seed=int(master_seed),
        absorbed=absorbed, steps=steps, max_states=max_states,
        final_states=final_states,
    )
