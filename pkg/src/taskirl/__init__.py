"""Active task-automaton inference with maximum-entropy IRL on grids.

The package learns a task's finite-state structure from membership queries
answered by attempted execution, couples it with a grid environment into a
product MDP, and fits a reward whose soft-Bellman policy imitates
demonstrations. Baselines with fixed memory structures and a
cross-environment evaluation harness reproduce the benchmark layout.
"""

from .automata import (
    Dfa,
    DfaError,
    ProductMdp,
    StateError,
    build_product,
    exact_equivalence,
    info_bits_automaton,
    load_dfa,
    save_dfa,
    trap_states,
    trivial_automaton,
)
from .grid_env import (
    GridError,
    GridMap,
    PlacementError,
    emitted_labels,
    generate_random_env,
    initial_distribution,
    load_env,
    region_label,
    save_env,
    step_distribution,
)
from .irl import (
    ConvergenceError,
    GradTable,
    QTable,
    TrainConfig,
    TrainReport,
    grad_value_iteration,
    project_demo,
    soft_policy,
    soft_value_iteration,
    train,
)
from .lstar import MembershipOracle, ObservationTable, learn_dfa
from .oracle import (
    FIXTURE_TASKS,
    Demonstration,
    TaskSpec,
    answer_membership,
    demonstrate,
    load_fixture_task,
    plan_execution,
    task_eval,
)
from .orchestrator import (
    LoopConfig,
    SuccessRatio,
    evaluate_on_envs,
    find_counterexample,
    learn_dfa_exact,
    run_active_irl,
    run_baseline,
    success_ratio,
)
from .rewards import (
    LinearReward,
    MlpReward,
    TabularReward,
    load_model,
    make_model,
    product_features,
    save_model,
)

__version__ = "0.1.0"
