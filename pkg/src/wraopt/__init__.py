"""Derivative-free min-max optimization with worst-case ranking approximation.

The package optimizes ``min over x of max over y of f(x, y)`` for black-box
``f`` by running CMA-ES on the worst-case objective while a ranking
approximation mechanism supplies candidate orderings at a small f-call
cost.  It ships two inner maximization solvers, two comparison baselines,
eleven analytic test problems with worst-case oracles, and a CLI benchmark
harness (``wraopt run|bench|eval|list``).
"""

from .cmaes import PopulationCma, TerminationReason, mirror_into_box, rank_candidates
from .drivers import (
    ALGORITHM_IDS,
    AdvCmaConfig,
    OuterSettings,
    RestartArchive,
    TrialRecord,
    ZoPgdaConfig,
    local_search_hybrid,
    run_adversarial_cmaes,
    run_algorithm,
    run_with_restarts,
    run_wra,
    run_zopgda,
    zo_gradient,
)
from .elitist import ElitistCma, multistart_maximize
from .evaluation import (
    BatchSummary,
    ClosedForm,
    Multistart,
    aggregate,
    certify_worst_case,
    judge_success,
)
from .exceptions import (
    InvalidInputError,
    NotPositiveDefiniteError,
    NotPSDError,
    ProtocolViolationError,
    RankDeficientError,
    UnsupportedError,
)
from .inner import (
    InnerCmaSolver,
    InnerSolverParams,
    aga_inner_round,
    cma_inner_round,
    finite_difference_gradient,
)
from .linalg import (
    cholesky_lower,
    condition_number,
    eigh,
    moore_penrose,
    sample_gaussian,
)
from .problems import (
    BoxDomain,
    EvalCounter,
    InteractionMatrix,
    Problem,
    list_problems,
    make_problem,
)
from .rng import Rng, derive_seed
from .wra import ScenarioPool, WraOutcome, WraParams, kendall_tau, pool_init, wra_approximate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
