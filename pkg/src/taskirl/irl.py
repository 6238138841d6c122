"""Maximum-entropy inverse reinforcement learning on a product MDP.

The policy model is the softmax of a soft state-action value function: the
value of a state is the log-sum-exp of its action values, and action values
are reward plus discounted expected next-state value. Demonstration
log-likelihood is ascended in the reward parameters; its gradient is the
fixed point of a linear backup, computed either as a dense per-parameter
table or through an equivalent adjoint recursion on a visitation vector.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from . import automata
from .automata import Dfa, ProductMdp, StateError
from .grid_env import Cell, GridMap
from .oracle import Demonstration
from .rewards import RewardModel

# Step sizes for the per-demonstration mean gradient. The network needs a
# much smaller step: its gradient scale grows with the hidden widths and the
# ascent diverges around 3e-2 on the reference instances.
DEFAULT_ALPHAS = {"tabular": 1.0, "linear": 0.3, "mlp": 3e-3}


class ConvergenceError(RuntimeError):
    """An iterative solver hit its sweep cap before reaching tolerance."""


@dataclass
class TrainConfig:
    """Hyperparameters for the soft solvers and the ascent loop.

    alpha defaults per reward variant and applies to the per-demonstration
    mean gradient; alpha_decay scales it by 1/sqrt(t+1). Every eval_every
    updates the evaluator measures the policy success ratio, and the loop
    stops once the ratio improved by at most eps_stop since the previous
    measurement (not before min_updates, and always by max_updates).
    rollouts/horizon parameterize the evaluator.
    """

    gamma: float = 0.95
    alpha: Optional[float] = None
    alpha_decay: bool = False
    l2: float = 0.0
    vi_tol: float = 1e-8
    vi_cap: int = 10000
    eval_every: int = 20
    eps_stop: float = 0.01
    min_updates: int = 0
    max_updates: int = 2000
    rollouts: int = 1000
    horizon: Optional[int] = None
    log_floor: float = -700.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.eps_stop < 0.0:
            raise ValueError("eps_stop must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.l2 < 0.0:
            raise ValueError("l2 must be >= 0")


@dataclass
class QTable:
    """Converged soft action values."""

    q: np.ndarray  # (Z, A)
    gamma: float
    residual: float
    sweeps: int

    def values(self) -> np.ndarray:
        return logsumexp(self.q, axis=1)


@dataclass
class GradTable:
    """Parameter derivatives of the soft action values.

    dq[z, a] is the d-vector dQ(z, a)/dtheta; w[z, a] = pi(a|z) * dq[z, a].
    """

    dq: np.ndarray  # (Z, A, d)
    w: np.ndarray  # (Z, A, d)
    residual: float
    sweeps: int


def _next_values(product: ProductMdp, v: np.ndarray) -> np.ndarray:
    """Expected next-state value per (z, a); terminal states contribute 0."""
    vv = np.where(product.terminal_mask, 0.0, v)
    return (product.succ_p * vv[product.succ_idx]).sum(axis=2)


def soft_value_iteration(
    product: ProductMdp,
    model: RewardModel,
    cfg: TrainConfig,
    features: Optional[np.ndarray] = None,
    q_init: Optional[np.ndarray] = None,
) -> QTable:
    """Fixed point of Q = R + gamma * E[logsumexp Q'] to sup-norm vi_tol."""
    r = model.reward_table(features)
    q = r.copy() if q_init is None else np.asarray(q_init, dtype=np.float64).copy()
    for sweep in range(1, cfg.vi_cap + 1):
        # Inlined logsumexp: the library wrapper's shape plumbing costs more
        # than the reduction itself at this size and this loop runs for
        # thousands of sweeps when gamma is close to 1.
        m = q.max(axis=1)
        v = m + np.log(np.exp(q - m[:, None]).sum(axis=1))
        q_new = r + cfg.gamma * _next_values(product, v)
        residual = float(np.max(np.abs(q_new - q)))
        q = q_new
        if residual <= cfg.vi_tol:
            return QTable(q=q, gamma=cfg.gamma, residual=residual, sweeps=sweep)
    raise ConvergenceError(
        f"value iteration residual {residual:.3e} after {cfg.vi_cap} sweeps"
    )


def soft_policy(qtable: QTable) -> np.ndarray:
    """Row-stochastic softmax policy exp(Q - V)."""
    q = qtable.q
    return np.exp(q - logsumexp(q, axis=1, keepdims=True))


def grad_value_iteration(
    product: ProductMdp,
    policy: np.ndarray,
    model: RewardModel,
    cfg: TrainConfig,
    features: Optional[np.ndarray] = None,
) -> GradTable:
    """Dense fixed point of dQ = dR + gamma * E[sum_a' pi(a'|z') dQ(z', a')].

    Stores a d-vector per state-action pair; meant for modest state and
    parameter counts (verification and small runs).
    """
    dr = model.reward_grads(features)
    dq = dr.copy()
    term = product.terminal_mask
    for sweep in range(1, cfg.vi_cap + 1):
        w = np.einsum("za,zad->zd", policy, dq)
        w[term] = 0.0
        nxt = np.einsum("zak,zakd->zad", product.succ_p, w[product.succ_idx])
        dq_new = dr + cfg.gamma * nxt
        residual = float(np.max(np.abs(dq_new - dq)))
        dq = dq_new
        if residual <= cfg.vi_tol:
            return GradTable(
                dq=dq, w=policy[:, :, None] * dq, residual=residual, sweeps=sweep
            )
    raise ConvergenceError(
        f"gradient iteration residual {residual:.3e} after {cfg.vi_cap} sweeps"
    )


def policy_grad(policy: np.ndarray, grads: GradTable) -> np.ndarray:
    """(Z, A, d) softmax derivative: w(z,a) - pi(a|z) * sum_a' w(z,a')."""
    total = grads.w.sum(axis=1, keepdims=True)
    return grads.w - policy[:, :, None] * total


def project_demo(
    grid: GridMap, dfa: Dfa, demo: Demonstration
) -> tuple[list[tuple[Cell, int]], list[int]]:
    """Lift a grid trajectory into the product space.

    The automaton advances on the label of each cell entered. When the
    automaton defines acceptance, the projection is truncated at the first
    accepting or trap state: the episode ends there and later steps carry
    no usable signal.
    """
    labels = grid.label_table()

    def lab(cell: Cell) -> Optional[int]:
        v = int(labels[cell[1], cell[0]])
        return None if v < 0 else v

    stops: frozenset[int] = frozenset()
    if dfa.accepting:
        stops = dfa.accepting | automata.trap_states(dfa)
    q = automata.advance(dfa, dfa.init, lab(demo.cells[0]))
    states = [(demo.cells[0], q)]
    actions: list[int] = []
    if q in stops:
        return states, actions
    for i, a in enumerate(demo.actions):
        nxt = demo.cells[i + 1]
        nq = q if nxt == demo.cells[i] else automata.advance(dfa, q, lab(nxt))
        actions.append(a)
        states.append((nxt, nq))
        q = nq
        if q in stops:
            break
    return states, actions


def demo_indices(
    product: ProductMdp, demo: Demonstration
) -> tuple[np.ndarray, np.ndarray]:
    """Product-state index sequence and action sequence of one trajectory."""
    states, actions = project_demo(product.grid, product.dfa, demo)
    try:
        idx = np.array([product.index_of(c, q) for c, q in states], dtype=np.int64)
    except StateError as exc:
        raise StateError(f"demonstration leaves the product space: {exc}") from exc
    return idx, np.array(actions, dtype=np.int64)


def demo_counts(product: ProductMdp, indexed: list[tuple[np.ndarray, np.ndarray]]
                ) -> np.ndarray:
    """(Z, A) visit counts of demonstration state-action pairs."""
    counts = np.zeros((product.n_states, product.n_actions))
    for idx, actions in indexed:
        if len(actions):
            np.add.at(counts, (idx[: len(actions)], actions), 1.0)
    return counts


def loglik_and_grad(
    indexed: list[tuple[np.ndarray, np.ndarray]],
    qtable: QTable,
    grads: GradTable,
    policy: np.ndarray,
    log_floor: float = -700.0,
) -> tuple[float, np.ndarray, bool]:
    """Demonstration log-likelihood and its parameter gradient (dense path).

    Steps whose log-probability falls below log_floor mark the likelihood
    as -inf, but the gradient stays the finite fixed-point expression.
    Empty demonstration lists yield (0, zeros).
    """
    d = grads.dq.shape[-1]
    if not indexed:
        return 0.0, np.zeros(d), False
    logpi = qtable.q - logsumexp(qtable.q, axis=1, keepdims=True)
    wsum = grads.w.sum(axis=1)
    ll = 0.0
    grad = np.zeros(d)
    clamped = False
    for idx, actions in indexed:
        if len(actions) == 0:
            continue
        z = idx[: len(actions)]
        step_ll = logpi[z, actions]
        if step_ll.min() < log_floor:
            clamped = True
        ll += float(step_ll.sum())
        grad += grads.dq[z, actions].sum(axis=0) - wsum[z].sum(axis=0)
    if clamped:
        ll = float("-inf")
    return ll, grad, clamped


def demo_gradient(
    product: ProductMdp,
    counts: np.ndarray,
    qtable: QTable,
    policy: np.ndarray,
    model: RewardModel,
    cfg: TrainConfig,
    features: Optional[np.ndarray] = None,
    mu_init: Optional[np.ndarray] = None,
) -> tuple[float, np.ndarray, np.ndarray, bool]:
    """Likelihood and gradient through the adjoint of the dense backup.

    Solves mu = c + gamma * pi * inflow(mu) with c the demonstration counts
    centered by the policy; the gradient is then the mu-weighted reward
    gradient. Agrees with the dense path to solver tolerance at any
    parameter count.
    """
    state_counts = counts.sum(axis=1)
    c = counts - state_counts[:, None] * policy
    mu = c.copy() if mu_init is None else np.asarray(mu_init, dtype=np.float64).copy()
    nonterm = ~product.terminal_mask
    flat_idx = product.succ_idx.ravel()
    for _ in range(cfg.vi_cap):
        inflow = np.bincount(flat_idx,
                             weights=(product.succ_p * mu[:, :, None]).ravel(),
                             minlength=product.n_states)
        inflow *= nonterm
        mu_new = c + cfg.gamma * policy * inflow[:, None]
        delta = float(np.abs(mu_new - mu).sum())
        mu = mu_new
        if delta <= cfg.vi_tol:
            break
    else:
        raise ConvergenceError("visitation fixed point did not converge")

    logpi = qtable.q - logsumexp(qtable.q, axis=1, keepdims=True)
    used = counts > 0
    clamped = bool(used.any() and logpi[used].min() < cfg.log_floor)
    ll = float((counts * logpi)[used].sum())
    if clamped:
        ll = float("-inf")
    grad = model.weighted_grad(features, mu)
    return ll, grad, mu, clamped


@dataclass
class TrainReport:
    """Ascent trace: per-update likelihood and norms, periodic success."""

    rows: list[tuple[int, float, float, float]] = field(default_factory=list)
    evals: list[tuple[int, float]] = field(default_factory=list)
    final_beta: float = 0.0
    stop_reason: str = ""
    clamped: bool = False
    updates: int = 0
    wall_time: float = 0.0

    def metrics_rows(self) -> list[tuple]:
        """CSV rows: iteration, loglik, gradient norm, success ratio."""
        betas = dict(self.evals)
        out = []
        for t, ll, gnorm, _ in self.rows:
            beta = betas.get(t)
            out.append((t, ll, gnorm, "" if beta is None else beta))
        return out


Evaluator = Callable[[np.ndarray, int], float]


def train(
    product: ProductMdp,
    demos: list[Demonstration],
    model: RewardModel,
    cfg: TrainConfig,
    evaluator: Optional[Evaluator] = None,
    features: Optional[np.ndarray] = None,
) -> tuple[RewardModel, TrainReport, np.ndarray]:
    """Gradient ascent on the demonstration log-likelihood.

    Every eval_every updates the evaluator scores the current policy; the
    loop stops when the score improved by at most eps_stop since the last
    measurement (never before min_updates). Returns the trained model, the
    report, and the final policy.
    """
    if not demos:
        raise ValueError("train needs at least one demonstration")
    indexed = [demo_indices(product, demo) for demo in demos]
    counts = demo_counts(product, indexed)
    # The likelihood and its gradient sum over demonstrations, so the raw
    # gradient scales with the corpus. Stepping by alpha times the mean keeps
    # one alpha usable across corpus sizes and keeps theta small enough that
    # the reward structure, not the step size, decides the policy.
    alpha0 = cfg.alpha if cfg.alpha is not None else DEFAULT_ALPHAS[model.variant]
    n_demos = float(len(indexed))
    report = TrainReport()
    started = time.perf_counter()
    q = None
    mu = None
    prev_beta = float("-inf")
    stop = ""
    policy = None
    for t in range(cfg.max_updates):
        qtable = soft_value_iteration(product, model, cfg, features, q_init=q)
        q = qtable.q
        policy = soft_policy(qtable)
        ll, grad, mu, clamped = demo_gradient(
            product, counts, qtable, policy, model, cfg, features, mu_init=mu
        )
        report.clamped = report.clamped or clamped
        gnorm = float(np.linalg.norm(grad))
        report.rows.append((t, ll, gnorm, float(np.linalg.norm(model.theta))))
        # Score and test the stopping rule before touching theta, so a stop
        # returns the exact parameters the measured policy came from.
        if evaluator is not None and t % cfg.eval_every == 0:
            beta = evaluator(policy, t)
            report.evals.append((t, beta))
            report.final_beta = beta
            if beta - prev_beta <= cfg.eps_stop and t >= cfg.min_updates:
                stop = "plateau"
                break
            prev_beta = beta
        alpha = alpha0 / np.sqrt(t + 1.0) if cfg.alpha_decay else alpha0
        model.theta = model.theta + alpha * (grad / n_demos - cfg.l2 * model.theta)
        report.updates = t + 1
    report.stop_reason = stop or "max_updates"
    if not stop:
        # Ran out of updates with theta one step past the last policy; bring
        # the returned policy back in line with the returned parameters.
        qtable = soft_value_iteration(product, model, cfg, features, q_init=q)
        policy = soft_policy(qtable)
    report.wall_time = time.perf_counter() - started
    return model, report, policy


def write_metrics(report: TrainReport, path: str) -> None:
    """Delimited training trace: iteration, loglik, grad norm, success."""
    lines = ["iteration,loglik,grad_norm,beta"]
    for t, ll, gnorm, beta in report.metrics_rows():
        b = "" if beta == "" else repr(float(beta))
        lines.append(f"{t},{repr(float(ll))},{repr(float(gnorm))},{b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
