"""Core types for the mutation / mass-extinction process on the rooted d-ary tree.

A particle occupying a vertex at depth k has type k; its offspring occupy
the d child vertices, one per birth, and carry type k + 1.  All particles
of one type share a single exponential kill clock, armed only once every
lower type is gone; when it rings the whole cohort is removed at once.
Types therefore die in strictly increasing order, and a vertex can never be
occupied twice over a run (its only possible parent is dead by the time its
own cohort dies).

Vertices are addressed by explicit tuples of child indices so that traces
stay human-readable and parent/level lookups are O(1); memory is bounded by
the live population, which the engine's stop rules bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import substream


@dataclass(frozen=True)
class ModelParams:
    """Branching degree d and per-particle birth rate lam.

    lam == 0 is admitted as a degenerate engine test case (no births, the
    root dies alone); the model proper assumes lam > 0.
    """

    d: int
    lam: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be an integer >= 1, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        lam = float(self.lam)
        if not (lam >= 0.0 and math.isfinite(lam)):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)


@dataclass(frozen=True)
class VertexId:
    """Tree address: the sequence of child indices (1-based) from the root.

    The empty tuple is the root; level equals the path length and equals
    the type of the particle occupying the vertex.
    """

    path: tuple[int, ...] = ()

    @property
    def level(self) -> int:
        return len(self.path)

    @property
    def parent(self) -> "VertexId":
        if not self.path:
            raise ValueError("the root has no parent")
        return VertexId(self.path[:-1])

    def __str__(self) -> str:
        return ".".join(str(j) for j in self.path)


ROOT = VertexId()


def child_address(v: VertexId, j: int, d: int) -> VertexId:
    """Address of child j (1 <= j <= d) of vertex v."""
    if not 1 <= j <= d:
        raise ValueError(f"child index {j} out of range 1..{d}")
    return VertexId(v.path + (int(j),))


@dataclass
class Particle:
    """A living particle: its vertex, type, and unused child slots.

    ``unfilled`` holds the child indices not yet used; its internal order is
    sampling state (uniform pick with swap-removal), not meaningful.  A
    particle is fertile while any slot remains.
    """

    vertex: VertexId
    ptype: int
    children_born: int = 0
    unfilled: list[int] = field(default_factory=list)
    _fertile_pos: int = -1  # index in the state's fertile list, -1 if absent

    @property
    def fertile(self) -> bool:
        return len(self.unfilled) > 0

    @property
    def unfilled_children(self) -> frozenset[int]:
        return frozenset(self.unfilled)


@dataclass
class ProcessState:
    """Full live configuration of one run.

    Cohort keys are consecutive integers starting at lowest_live_type; only
    that lowest cohort has an armed kill clock (kill_deadline is the
    absolute time it rings; +inf once the state is empty).  A state is owned
    by exactly one run and must not be shared between concurrent runs.
    """

    params: ModelParams
    time: float
    lowest_live_type: int
    cohorts: dict[int, list[Particle]]
    kill_deadline: float
    total_born_by_type: list[int]
    live_particles: int
    rng: np.random.Generator
    _fertile: list[Particle] = field(default_factory=list)

    @property
    def fertile_count(self) -> int:
        return len(self._fertile)

    @property
    def max_type_born(self) -> int:
        return len(self.total_born_by_type) - 1

    # fertile-index maintenance: O(1) uniform pick and O(1) swap-with-last
    # removal, required for runs holding ~1e5 live particles.  The engine
    # kernel mirrors this bookkeeping exactly.

    def _fertile_add(self, p: Particle) -> None:
        p._fertile_pos = len(self._fertile)
        self._fertile.append(p)

    def _fertile_remove(self, p: Particle) -> None:
        pos = p._fertile_pos
        last = self._fertile[-1]
        self._fertile[pos] = last
        last._fertile_pos = pos
        self._fertile.pop()
        p._fertile_pos = -1


def initial_state(params: ModelParams, seed: int) -> ProcessState:
    """Time-zero state: one fertile type-0 particle at the root.

    The root has no parent, so its kill clock is armed immediately: the
    first draw of the run's stream is the Exponential(1) deadline.  The same
    (params, seed) always yields a bit-identical state.
    """
    root = Particle(
        vertex=ROOT, ptype=0, children_born=0, unfilled=list(range(1, params.d + 1))
    )
    rng = substream(seed)
    state = ProcessState(
        params=params,
        time=0.0,
        lowest_live_type=0,
        cohorts={0: [root]},
        kill_deadline=float(rng.standard_exponential()),
        total_born_by_type=[1],
        live_particles=1,
        rng=rng,
    )
    state._fertile_add(root)
    return state
