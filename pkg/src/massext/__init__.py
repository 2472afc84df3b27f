"""Branching evolution with mass extinction on the rooted d-ary tree.

A single type-0 particle starts at the root; each living particle spawns
higher-type mutations onto its d child vertices at rate lam, and the whole
lowest living type is removed at once when its shared Exponential(1) clock
(armed only after the parent type died) rings.  The package simulates the
process exactly, solves the critical rates lambda_c(d) and lambda_s(d) for
whole-tree and fixed-branch survival, and carries independent Monte Carlo
oracles for the identities behind those thresholds.
"""

from .branch import (
    ChainParams,
    ChainRun,
    extinction_prob_branch,
    p_up,
    run_chain_replicas,
    simulate_chain,
)
from .criticality import (
    BracketError,
    CriticalResult,
    f_d,
    h_d,
    objective,
    solve_lambda_c,
    solve_lambda_s,
)
from .engine import (
    Birth,
    EventLog,
    Kill,
    ReplicaSet,
    RunRecord,
    StopRule,
    SurvivalEstimate,
    disarm_kill_clock,
    estimate_survival,
    run,
    run_reference,
    run_replicas,
    run_traced,
    step,
    survival_from_replicas,
    write_trace,
)
from .model import (
    ModelParams,
    Particle,
    ProcessState,
    VertexId,
    child_address,
    initial_state,
)
from .oracles import (
    LevelKEstimate,
    PreconditionError,
    RateEstimate,
    WSample,
    estimate_levelk_prob,
    ld_rate,
    sample_W,
    sample_w_values,
    w_laplace,
)
from .seeding import substream
from .stats import wilson_interval

__version__ = "0.1.0"
