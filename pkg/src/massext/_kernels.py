"""Numba kernels for the event loop and the embedded chain.

The tree kernel implements exactly the same event protocol, in the same
RNG draw order, as the pure-Python ``engine.step`` / ``engine.run_reference``
path (numba's Generator methods are bit-compatible with NumPy's), so a run
from the same substream is bit-identical through either implementation; a
test pins this, and any edit here must preserve it.  Per event, the draws
are:

    1. if F > 0 and lam > 0: one standard_exponential (birth candidate)
    2. on a birth: integers(0, F) fertile pick, then integers(0, r) slot
       pick among the parent's r remaining slots (swap-with-last removal)
    3. on a kill that leaves survivors: one standard_exponential (fresh
       Exponential(1) deadline; exact by memorylessness)

Which child digit a birth occupies never changes counts, times or future
draws (the slot pick is uniform over however many slots remain), so the
kernel tracks only per-particle remaining-slot counts; vertex identity
lives solely in the object-level engine, which also serves event traces.

Kernels are compiled nogil so replica blocks can run on worker threads;
determinism does not depend on the thread count because every replica owns
its own substream and aggregation is by replica index.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# outcome codes shared with engine.py
EXTINCT = 0
CENSOR_POPULATION = 1
CENSOR_TYPE = 2
CENSOR_EVENTS = 3
CENSOR_TIME = 4


@njit(cache=True, nogil=True)
def run_tree(g, d, lam, max_live, max_type, max_events, max_time):
    """Run one replica to extinction or the first stop bound.

    Returns (outcome, end_time, n_born, max_type_reached, n_events,
    born_by_type); born_by_type is capacity-sized, valid up to
    max_type_reached.
    """
    cap = 1024
    ptype = np.empty(cap, np.int32)        # per born particle
    slots_left = np.empty(cap, np.int64)   # unfilled child slots
    fert_list = np.empty(cap, np.int64)
    fert_pos = np.empty(cap, np.int64)
    nxt = np.empty(cap, np.int64)          # cohort linked list, insertion order

    tcap = 256
    head = np.full(tcap, -1, np.int64)
    tail = np.full(tcap, -1, np.int64)
    born_by_type = np.zeros(tcap, np.int64)

    # root particle
    n_born = 1
    ptype[0] = 0
    slots_left[0] = d
    fert_list[0] = 0
    fert_pos[0] = 0
    F = 1
    head[0] = 0
    tail[0] = 0
    nxt[0] = -1
    born_by_type[0] = 1

    live = 1
    lowest = 0
    max_type_reached = 0
    t = 0.0
    deadline = g.standard_exponential()
    n_events = 0

    while True:
        if live == 0:
            outcome = EXTINCT
            break
        if live >= max_live:
            outcome = CENSOR_POPULATION
            break
        if max_type_reached >= max_type:
            outcome = CENSOR_TYPE
            break
        if n_events >= max_events:
            outcome = CENSOR_EVENTS
            break
        if t >= max_time:
            outcome = CENSOR_TIME
            break

        candidate = np.inf
        if F > 0 and lam > 0.0:
            candidate = t + g.standard_exponential() / (lam * F)

        if candidate < deadline:
            # birth: uniform fertile parent, uniform remaining slot
            pi = fert_list[g.integers(0, F)]
            r = slots_left[pi]
            g.integers(0, r)  # slot pick; only the count matters here
            slots_left[pi] = r - 1
            if r == 1:
                pos = fert_pos[pi]
                last = fert_list[F - 1]
                fert_list[pos] = last
                fert_pos[last] = pos
                F -= 1
                fert_pos[pi] = -1

            ci = n_born
            if ci >= cap:
                ncap = cap * 2
                a32 = np.empty(ncap, np.int32); a32[:cap] = ptype; ptype = a32
                a = np.empty(ncap, np.int64); a[:cap] = slots_left; slots_left = a
                a = np.empty(ncap, np.int64); a[:cap] = fert_list; fert_list = a
                a = np.empty(ncap, np.int64); a[:cap] = fert_pos; fert_pos = a
                a = np.empty(ncap, np.int64); a[:cap] = nxt; nxt = a
                cap = ncap
            n_born += 1

            ct = ptype[pi] + 1
            if ct >= tcap:
                ntcap = tcap * 2
                a = np.full(ntcap, -1, np.int64); a[:tcap] = head; head = a
                a = np.full(ntcap, -1, np.int64); a[:tcap] = tail; tail = a
                a = np.zeros(ntcap, np.int64); a[:tcap] = born_by_type
                born_by_type = a
                tcap = ntcap
            ptype[ci] = ct
            slots_left[ci] = d
            fert_list[F] = ci
            fert_pos[ci] = F
            F += 1
            if head[ct] == -1:
                head[ct] = ci
            else:
                nxt[tail[ct]] = ci
            tail[ct] = ci
            nxt[ci] = -1
            born_by_type[ct] += 1
            if ct > max_type_reached:
                max_type_reached = ct
            live += 1
            t = candidate
        else:
            # kill: remove the whole lowest cohort, walking insertion order
            t = deadline
            size = 0
            p = head[lowest]
            while p != -1:
                if slots_left[p] > 0:
                    pos = fert_pos[p]
                    last = fert_list[F - 1]
                    fert_list[pos] = last
                    fert_pos[last] = pos
                    F -= 1
                    fert_pos[p] = -1
                size += 1
                p = nxt[p]
            head[lowest] = -1
            tail[lowest] = -1
            live -= size
            lowest += 1
            if live > 0:
                deadline = t + g.standard_exponential()
            else:
                deadline = np.inf
        n_events += 1

    return outcome, t, n_born, max_type_reached, n_events, born_by_type


@njit(cache=True, nogil=True)
def run_chain(g, p, max_steps, start):
    """Birth-death walk with constant up-probability p, absorbing at 0.

    Returns (absorbed, steps, max_state, final_state); steps is the number
    of transitions taken (= max_steps when censored).
    """
    x = start
    mx = start
    steps = 0
    while steps < max_steps:
        if x == 0:
            return True, steps, mx, x
        if g.random() < p:
            x += 1
            if x > mx:
                mx = x
        else:
            x -= 1
        steps += 1
    return x == 0, steps, mx, x
