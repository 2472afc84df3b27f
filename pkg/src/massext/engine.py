"""Exact event-driven simulation of the continuous-time process.

With F fertile particles alive, the next birth candidate arrives after an
Exponential(lam * F) wait (the superposition of the particles' independent
rate-lam birth processes, with births of saturated particles discarded);
the candidate competes against the armed cohort kill deadline.  A birth
places one child at a uniformly chosen unfilled slot of a uniformly chosen
fertile particle; a kill removes the entire lowest living cohort and, if
anything survives, arms a fresh Exponential(1) deadline for the next type
(exact, because the clock armed when the parent cohort died is memoryless).

Two implementations share this one protocol: the readable object-level
``step``/``run_reference`` below, and the numba kernel behind ``run``.
They consume RNG draws in the same order from the same substreams, so for a
given (params, stop, seed) both produce bit-identical run records; a test
pins this.

Survival cannot be observed directly at desk scale, so runs are censored by
stop bounds.  Censoring by population or by type depth counts as the
survival proxy (supercritical runs grow without bound); censoring by time
or by the event budget is indeterminate and reported separately.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    ModelParams,
    Particle,
    ProcessState,
    VertexId,
    child_address,
    initial_state,
)
from .seeding import substream
from .stats import wilson_interval

_BIG = 1 << 62

# outcome codes -> censoring reason
_REASONS = {
    _kernels.CENSOR_POPULATION: "population",
    _kernels.CENSOR_TYPE: "type",
    _kernels.CENSOR_EVENTS: "events",
    _kernels.CENSOR_TIME: "time",
}
SURVIVAL_REASONS = ("population", "type")

# per-replica birth counts are kept for types below this cap (aggregate
# sums cover all types); enough for the level-k cross-checks
RECORDED_TYPES = 64


@dataclass(frozen=True)
class StopRule:
    """Censoring bounds for a run; at least one must be finite.

    Defaults are the standard desk-scale rule: population 1e5, type depth
    1e4, event budget 1e7, no time bound.
    """

    max_time: float | None = None
    max_live_particles: int | None = 100_000
    max_type_born: int | None = 10_000
    max_events: int | None = 10_000_000

    def __post_init__(self):
        bounds = (self.max_time, self.max_live_particles,
                  self.max_type_born, self.max_events)
        if all(b is None for b in bounds):
            raise ValueError("StopRule needs at least one finite bound")
        for b in bounds:
            if b is not None and not b > 0:
                raise ValueError(f"stop bounds must be positive, got {b!r}")


@dataclass(frozen=True)
class Birth:
    parent: VertexId
    child_vertex: VertexId


@dataclass(frozen=True)
class Kill:
    ptype: int
    cohort_size: int


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one replica.

    outcome is "extinct" (end_time is the final kill time) or "censored"
    (reason names the first bound hit).  total_born_by_type[k] counts every
    type-k particle ever born, the root included.
    """

    outcome: str
    reason: str | None
    end_time: float
    total_born_by_type: np.ndarray
    total_born: int
    max_type_reached: int
    event_count: int
    seed: int

    @property
    def survival_proxy(self) -> bool:
        return self.outcome == "censored" and self.reason in SURVIVAL_REASONS


def step(state: ProcessState, rng: np.random.Generator | None = None):
    """Advance one event; mutates state and returns Birth(...) or Kill(...).

    Raises RuntimeError on an empty state.  Uses the state's own stream
    unless an explicit generator is passed.
    """
    g = state.rng if rng is None else rng
    if state.live_particles == 0:
        raise RuntimeError("step() called on an empty state")
    lam = state.params.lam
    d = state.params.d
    F = len(state._fertile)

    candidate = math.inf
    if F > 0 and lam > 0.0:
        candidate = state.time + g.standard_exponential() / (lam * F)

    if candidate < state.kill_deadline:
        parent = state._fertile[g.integers(0, F)]
        r = len(parent.unfilled)
        si = g.integers(0, r)
        digit = parent.unfilled[si]
        parent.unfilled[si] = parent.unfilled[r - 1]
        parent.unfilled.pop()
        parent.children_born += 1
        if not parent.unfilled:
            state._fertile_remove(parent)
        child = Particle(
            vertex=child_address(parent.vertex, digit, d),
            ptype=parent.ptype + 1,
            children_born=0,
            unfilled=list(range(1, d + 1)),
        )
        state._fertile_add(child)
        state.cohorts.setdefault(child.ptype, []).append(child)
        if len(state.total_born_by_type) <= child.ptype:
            state.total_born_by_type.append(0)
        state.total_born_by_type[child.ptype] += 1
        state.live_particles += 1
        state.time = candidate
        return Birth(parent=parent.vertex, child_vertex=child.vertex)

    # kill the whole lowest cohort, in insertion order
    state.time = state.kill_deadline
    killed = state.lowest_live_type
    cohort = state.cohorts.pop(killed)
    for p in cohort:
        if p.unfilled:
            state._fertile_remove(p)
    state.live_particles -= len(cohort)
    state.lowest_live_type = killed + 1
    if state.live_particles > 0:
        state.kill_deadline = state.time + g.standard_exponential()
    else:
        state.kill_deadline = math.inf
    return Kill(ptype=killed, cohort_size=len(cohort))


def disarm_kill_clock(state: ProcessState) -> None:
    """Test-harness hook: suspend killing so only births occur."""
    state.kill_deadline = math.inf


def outcome_reason(code: int) -> tuple[str, str | None]:
    """Map a kernel outcome code to (outcome, reason)."""
    if code == _kernels.EXTINCT:
        return "extinct", None
    return "censored", _REASONS[code]


def _stop_bounds(stop: StopRule):
    return (
        _BIG if stop.max_live_particles is None else int(stop.max_live_particles),
        _BIG if stop.max_type_born is None else int(stop.max_type_born),
        _BIG if stop.max_events is None else int(stop.max_events),
        math.inf if stop.max_time is None else float(stop.max_time),
    )


def run_reference(params: ModelParams, stop: StopRule, seed: int,
                  on_event=None) -> RunRecord:
    """Pure-Python run, bit-identical to ``run``; for validation and small
    exploratory runs (the kernel path is orders of magnitude faster).

    on_event, if given, is called as on_event(event, state) after each event.
    """
    max_live, max_type, max_events, max_time = _stop_bounds(stop)
    state = initial_state(params, seed)
    n_events = 0
    while True:
        if state.live_particles == 0:
            outcome, reason = "extinct", None
            break
        if state.live_particles >= max_live:
            outcome, reason = "censored", "population"
            break
        if state.max_type_born >= max_type:
            outcome, reason = "censored", "type"
            break
        if n_events >= max_events:
            outcome, reason = "censored", "events"
            break
        if state.time >= max_time:
            outcome, reason = "censored", "time"
            break
        ev = step(state)
        n_events += 1
        if on_event is not None:
            on_event(ev, state)
    born = np.array(state.total_born_by_type, dtype=np.int64)
    return RunRecord(
        outcome=outcome,
        reason=reason,
        end_time=state.time,
        total_born_by_type=born,
        total_born=int(born.sum()),
        max_type_reached=len(born) - 1,
        event_count=n_events,
        seed=int(seed),
    )


def _record_from_kernel(out, seed: int) -> RunRecord:
    outcome, t, n_born, max_type_reached, n_events, born_by_type = out
    born = born_by_type[: max_type_reached + 1].copy()
    return RunRecord(
        outcome="extinct" if outcome == _kernels.EXTINCT else "censored",
        reason=_REASONS.get(outcome),
        end_time=float(t),
        total_born_by_type=born,
        total_born=int(n_born),
        max_type_reached=int(max_type_reached),
        event_count=int(n_events),
        seed=int(seed),
    )


def run(params: ModelParams, stop: StopRule, seed: int) -> RunRecord:
    """Run one replica to extinction or the first stop bound.

    Deterministic for fixed (params, stop, seed).
    """
    g = substream(seed)
    max_live, max_type, max_events, max_time = _stop_bounds(stop)
    out = _kernels.run_tree(g, params.d, params.lam, max_live, max_type,
                            max_events, max_time)
    return _record_from_kernel(out, seed)


@dataclass(frozen=True)
class EventLog:
    """Recorded event stream of one run, for trace emission.

    Line format (one event per line):
        event_index,time,kind,type,path
    kind is B or K; path is the child vertex's dot-joined child indices
    (empty for kill lines).
    """

    kinds: np.ndarray      # 0 birth, 1 kill
    times: np.ndarray
    types: np.ndarray      # child type (birth) or killed type (kill)
    extra: np.ndarray      # 1 for births, cohort size for kills
    paths: list            # tuple of child indices per birth, () for kills

    def lines(self):
        for i in range(len(self.kinds)):
            kind = "B" if self.kinds[i] == 0 else "K"
            path = ".".join(str(x) for x in self.paths[i])
            yield f"{i},{float(self.times[i])!r},{kind},{int(self.types[i])},{path}"


def run_traced(params: ModelParams, stop: StopRule, seed: int):
    """Like ``run`` but also returns the EventLog of the run.

    Traces come from the object-level engine (bit-identical to the kernel,
    far slower); intended for exploratory scales, not censored-at-1e5 runs.
    """
    kinds, times, types, extra, paths = [], [], [], [], []

    def collect(ev, state):
        times.append(state.time)
        if isinstance(ev, Birth):
            kinds.append(0)
            types.append(ev.child_vertex.level)
            extra.append(1)
            paths.append(ev.child_vertex.path)
        else:
            kinds.append(1)
            types.append(ev.ptype)
            extra.append(ev.cohort_size)
            paths.append(())

    record = run_reference(params, stop, seed, on_event=collect)
    log = EventLog(
        kinds=np.array(kinds, dtype=np.int8),
        times=np.array(times, dtype=np.float64),
        types=np.array(types, dtype=np.int64),
        extra=np.array(extra, dtype=np.int64),
        paths=paths,
    )
    return record, log


def write_trace(log: EventLog, fileobj) -> None:
    for line in log.lines():
        fileobj.write(line + "\n")


@dataclass
class ReplicaSet:
    """Per-replica outcomes of n independent runs plus exact aggregates.

    born_by_type_sum covers every type over all replicas (int64, order
    independent); born_by_type_mat holds per-replica counts for types below
    RECORDED_TYPES, enough to put error bars on level-k means.
    """

    params: ModelParams
    stop: StopRule
    n: int
    master_seed: int
    key_prefix: tuple[int, ...]
    outcome_codes: np.ndarray
    end_times: np.ndarray
    total_born: np.ndarray
    max_types: np.ndarray
    event_counts: np.ndarray
    born_by_type_sum: np.ndarray
    born_by_type_mat: np.ndarray

    @property
    def n_extinct(self) -> int:
        return int(np.sum(self.outcome_codes == _kernels.EXTINCT))

    @property
    def n_survival_proxy(self) -> int:
        return int(np.sum((self.outcome_codes == _kernels.CENSOR_POPULATION)
                          | (self.outcome_codes == _kernels.CENSOR_TYPE)))

    @property
    def n_indeterminate(self) -> int:
        return self.n - self.n_extinct - self.n_survival_proxy


def run_replicas(params: ModelParams, stop: StopRule, n_replicas: int,
                 master_seed: int, threads: int = 1,
                 key_prefix: tuple[int, ...] = ()) -> ReplicaSet:
    """n independent replicas; replica r draws from
    substream(master_seed, *key_prefix, r).

    Results are identical for any thread count: every replica owns its
    substream, per-replica values are written at index r, and cross-replica
    aggregates are integer sums.
    """
    if n_replicas < 1:
        raise ValueError("n_replicas must be >= 1")
    n = int(n_replicas)
    d, lam = params.d, params.lam
    max_live, max_type, max_events, max_time = _stop_bounds(stop)

    outcome_codes = np.empty(n, np.int64)
    end_times = np.empty(n, np.float64)
    total_born = np.empty(n, np.int64)
    max_types = np.empty(n, np.int64)
    event_counts = np.empty(n, np.int64)
    born_mat = np.zeros((n, RECORDED_TYPES), np.int64)

    def work(block) -> np.ndarray:
        local_sum = np.zeros(RECORDED_TYPES, np.int64)
        for r in block:
            g = substream(master_seed, *key_prefix, r)
            outcome, t, n_born, mt, n_ev, born = _kernels.run_tree(
                g, d, lam, max_live, max_type, max_events, max_time)
            outcome_codes[r] = outcome
            end_times[r] = t
            total_born[r] = n_born
            max_types[r] = mt
            event_counts[r] = n_ev
            upto = mt + 1
            rec = min(upto, RECORDED_TYPES)
            born_mat[r, :rec] = born[:rec]
            if upto > len(local_sum):
                grown = np.zeros(upto, np.int64)
                grown[: len(local_sum)] = local_sum
                local_sum = grown
            local_sum[:upto] += born[:upto]
        return local_sum

    threads = max(1, int(threads))
    if threads == 1:
        partials = [work(range(n))]
    else:
        chunk = (n + threads - 1) // threads
        blocks = [range(i, min(i + chunk, n)) for i in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            partials = list(ex.map(work, blocks))

    width = max(len(p) for p in partials)
    born_sum = np.zeros(width, np.int64)
    for p in partials:
        born_sum[: len(p)] += p

    return ReplicaSet(
        params=params, stop=stop, n=n, master_seed=int(master_seed),
        key_prefix=tuple(key_prefix),
        outcome_codes=outcome_codes, end_times=end_times,
        total_born=total_born, max_types=max_types,
        event_counts=event_counts,
        born_by_type_sum=born_sum, born_by_type_mat=born_mat,
    )


@dataclass(frozen=True)
class SurvivalEstimate:
    """Survival-proxy estimate over a replica set.

    p_hat counts replicas censored by population or type depth; extinct
    replicas count against it.  Replicas censored by time or by the event
    budget are indeterminate: excluded from the numerator and reported in
    censored_fraction.
    """

    p_hat: float
    wilson_95_interval: tuple[float, float]
    censored_fraction: float
    n_replicas: int
    n_survived: int
    n_extinct: int
    n_indeterminate: int


def survival_from_replicas(rs: ReplicaSet) -> SurvivalEstimate:
    n_surv = rs.n_survival_proxy
    return SurvivalEstimate(
        p_hat=n_surv / rs.n,
        wilson_95_interval=wilson_interval(n_surv, rs.n),
        censored_fraction=rs.n_indeterminate / rs.n,
        n_replicas=rs.n,
        n_survived=n_surv,
        n_extinct=rs.n_extinct,
        n_indeterminate=rs.n_indeterminate,
    )


def estimate_survival(params: ModelParams, stop: StopRule, n_replicas: int,
                      master_seed: int, threads: int = 1,
                      key_prefix: tuple[int, ...] = ()) -> SurvivalEstimate:
    """Monte Carlo survival-proxy estimate over n_replicas runs."""
    rs = run_replicas(params, stop, n_replicas, master_seed,
                      threads=threads, key_prefix=key_prefix)
    return survival_from_replicas(rs)
