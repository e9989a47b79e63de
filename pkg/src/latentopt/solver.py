"""The outer search loop.

Each iteration verifies the current iterate, estimates the loss gradient
from random-direction queries, and takes a plain or Adam-adjusted descent
step. Valid iterates are collected into a solution set; restarts rerun the
search from the start point with a fresh direction stream and the best
valid candidate over all restarts is selected by molecular score.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.model_selection import ParameterGrid

from .errors import ConfigError, EstimatorError, OracleError
from .gradient import combine_differences, sample_directions
from .seeding import rng_stream
from .validation import as_latent, check_int_at_least, check_positive

OPTIMIZERS = ("adam", "gd")
SCHEDULES = ("constant", "inv_sqrt")

# A restart aborts as diverged once ||z|| exceeds this affine bound on ||z0||.
DIVERGENCE_FACTOR = 1e6
DIVERGENCE_OFFSET = 1e6


def gd_step(z, grad_estimate, alpha_t):
    """One descent step: z - alpha_t * grad_estimate."""
    return z - alpha_t * np.asarray(grad_estimate, dtype=np.float64)


@dataclass
class AdamState:
    """First/second moment accumulators for the Adam update rule."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def initial(cls, dim, epsilon=1e-8):
        return cls(m=np.zeros(dim), v=np.zeros(dim), epsilon=epsilon)


def adam_step(state: AdamState, z, grad_estimate, alpha0):
    """One bias-corrected Adam step; returns the advanced state and iterate."""
    g = np.asarray(grad_estimate, dtype=np.float64)
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    t = state.t + 1
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    z_new = z - alpha0 * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2,
                          epsilon=state.epsilon)
    return new_state, z_new


@dataclass
class Candidate:
    """One scored iterate: latent point, decoded sequence, and oracle values."""

    restart: int
    iteration: int
    latent: np.ndarray
    sequence: str
    properties: dict
    similarities: dict
    loss: float
    score: float
    valid: bool


@dataclass
class SolutionSet:
    """All valid candidates of a run plus the selected best."""

    candidates: list
    best: Candidate = None

    def __len__(self):
        return len(self.candidates)


def select_best(candidates):
    """Maximizer of the molecular score among valid candidates.

    Ties break toward the earliest iteration, then the lowest restart
    index. Returns None for an empty set.
    """
    best = None
    for c in candidates:
        if not c.valid:
            raise ConfigError("select_best expects only valid candidates")
        if best is None:
            best = c
            continue
        key = (c.score, -c.iteration, -c.restart)
        best_key = (best.score, -best.iteration, -best.restart)
        if key > best_key:
            best = c
    return best


@dataclass
class RestartResult:
    restart: int
    trajectory: list
    candidates: list
    success: bool
    aborted: str = None
    n_loss_evaluations: int = 0


@dataclass
class RunResult:
    solutions: SolutionSet
    restarts: list
    n_loss_evaluations: int

    @property
    def success(self):
        return self.solutions.best is not None

    @property
    def success_flags(self):
        return [r.success for r in self.restarts]


def run_single(objective, suite, z0, *, optimizer="adam", alpha0=0.05, n_iter=20,
               n_queries=50, beta=10.0, seed=0, restart=0,
               stop_on_first_success=False, step_schedule="constant",
               adam_epsilon=1e-8):
    """One restart of the search from ``z0``.

    Per iteration: evaluate the loss at the current iterate (this is the
    +1 of the Q+1 query budget and doubles as the validity check), record
    the iterate, then probe Q perturbed points as one batch and step. With
    ``stop_on_first_success`` the loop returns right after the first valid
    iterate, before spending that iteration's Q perturbation queries.

    The direction stream is seeded with ``seed + restart`` so every restart
    explores independently but reproducibly.
    """
    dim = suite.dim if suite is not None else z0.size
    z = as_latent(z0, dim, name="z0")
    rng = rng_stream(seed + restart, "directions")
    guard = DIVERGENCE_FACTOR * float(np.linalg.norm(z)) + DIVERGENCE_OFFSET
    adam = AdamState.initial(dim, epsilon=adam_epsilon) if optimizer == "adam" else None

    trajectory, candidates = [], []
    aborted = None
    n_evals = 0
    for t in range(n_iter):
        try:
            base = objective.evaluate(z, suite)
        except OracleError as exc:
            aborted = f"oracle failure at iteration {t}: {exc}"
            break
        n_evals += 1
        record = Candidate(
            restart=restart, iteration=t, latent=z.copy(), sequence=base.sequence,
            properties=dict(base.properties), similarities=dict(base.similarities),
            loss=base.loss, score=base.score, valid=base.valid,
        )
        trajectory.append(record)
        if base.valid:
            candidates.append(record)
            if stop_on_first_success:
                break
        if not math.isfinite(base.loss):
            aborted = f"non-finite loss at iteration {t}"
            break

        directions = sample_directions(dim, n_queries, rng)
        try:
            evals = objective.evaluate_batch(
                [z + beta * directions[q] for q in range(n_queries)], suite)
        except OracleError as exc:
            aborted = f"oracle failure at iteration {t}: {exc}"
            break
        n_evals += n_queries
        diffs = np.empty(n_queries)
        for q, ev in enumerate(evals):
            if not math.isfinite(ev.loss):
                aborted = str(EstimatorError(
                    f"non-finite loss at perturbation query {q}", query_index=q))
                break
            diffs[q] = ev.loss - base.loss
        if aborted:
            break
        grad = combine_differences(diffs, directions, beta, dim)

        if optimizer == "adam":
            adam, z = adam_step(adam, z, grad, alpha0)
        else:
            alpha_t = alpha0 if step_schedule == "constant" else alpha0 / math.sqrt(t + 1)
            z = gd_step(z, grad, alpha_t)
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > guard:
            aborted = f"diverged at iteration {t}"
            break

    return RestartResult(
        restart=restart, trajectory=trajectory, candidates=candidates,
        success=len(candidates) > 0, aborted=aborted, n_loss_evaluations=n_evals,
    )


def run_with_restarts(objective, suite, z0, *, restarts=1, **kwargs):
    """Run up to ``restarts`` independent searches from ``z0``.

    Aggregation pools every valid candidate and keeps the globally best
    one. With ``stop_on_first_success`` no further restart is launched once
    one has succeeded. Oracle failures abort only the restart that hit
    them.
    """
    check_int_at_least(restarts, 1, "restarts")
    stop = kwargs.get("stop_on_first_success", False)
    results = []
    for r in range(restarts):
        result = run_single(objective, suite, z0, restart=r, **kwargs)
        results.append(result)
        if result.success and stop:
            break
    pooled = [c for res in results for c in res.candidates]
    solutions = SolutionSet(candidates=pooled, best=select_best(pooled))
    return RunResult(
        solutions=solutions, restarts=results,
        n_loss_evaluations=sum(r.n_loss_evaluations for r in results),
    )


class LatentSequenceOptimizer(BaseEstimator):
    """Query-based sequence optimizer with a scikit-learn estimator surface.

    Hyperparameters live in ``__init__`` (so ``get_params`` / ``set_params``
    and grid tooling compose), and ``fit`` runs the search from a start
    point: either a latent vector or, when the oracle suite has an encoder,
    a sequence string.

    Parameters
    ----------
    objective : Objective
        Constraint/score configuration to minimize.
    oracle : OracleBase or None
        Query-counted oracle suite; None only for objectives that evaluate
        latent vectors directly.
    optimizer : {"adam", "gd"}
    alpha0 : float
        Initial step size.
    n_iter : int
        Iterations per restart (T).
    n_queries : int
        Random directions per iteration (Q).
    beta : float
        Smoothing radius for perturbations.
    restarts : int
    stop_on_first_success : bool
    step_schedule : {"constant", "inv_sqrt"}
        Step-size schedule for plain gradient descent; Adam adapts on its
        own and ignores this.
    adam_epsilon : float
    seed : int
        64-bit base seed; restart r draws directions from seed + r.

    Attributes
    ----------
    result_ : RunResult
    solutions_ : SolutionSet
    best_ : Candidate or None
    trajectories_ : list of per-restart iterate records
    success_flags_ : list of bool, one per executed restart
    n_loss_evaluations_ : int
    """

    def __init__(self, objective=None, oracle=None, optimizer="adam", alpha0=0.05,
                 n_iter=20, n_queries=50, beta=10.0, restarts=1,
                 stop_on_first_success=False, step_schedule="constant",
                 adam_epsilon=1e-8, seed=0):
        self.objective = objective
        self.oracle = oracle
        self.optimizer = optimizer
        self.alpha0 = alpha0
        self.n_iter = n_iter
        self.n_queries = n_queries
        self.beta = beta
        self.restarts = restarts
        self.stop_on_first_success = stop_on_first_success
        self.step_schedule = step_schedule
        self.adam_epsilon = adam_epsilon
        self.seed = seed

    def _validate(self):
        if self.objective is None:
            raise ConfigError("an objective is required")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.step_schedule not in SCHEDULES:
            raise ConfigError(f"step_schedule must be one of {SCHEDULES}")
        check_positive(self.alpha0, "alpha0")
        check_positive(self.beta, "beta")
        check_int_at_least(self.n_iter, 1, "n_iter")
        check_int_at_least(self.n_queries, 1, "n_queries")
        check_int_at_least(self.restarts, 1, "restarts")
        if self.oracle is not None and hasattr(self.objective, "check_resolvable"):
            self.objective.check_resolvable(self.oracle)

    def _resolve_start(self, start):
        if isinstance(start, str):
            if self.oracle is None or not self.oracle.has_encoder():
                raise ConfigError(
                    "sequence starts need an oracle suite with an encoder; "
                    "pass a latent vector instead"
                )
            return self.oracle.encode(start)
        dim = self.oracle.dim if self.oracle is not None else None
        return as_latent(start, dim, name="start")

    def fit(self, start, y=None):
        """Run the search from ``start`` and record results on the estimator."""
        self._validate()
        z0 = self._resolve_start(start)
        result = run_with_restarts(
            self.objective, self.oracle, z0,
            restarts=self.restarts, optimizer=self.optimizer, alpha0=self.alpha0,
            n_iter=self.n_iter, n_queries=self.n_queries, beta=self.beta,
            seed=self.seed, stop_on_first_success=self.stop_on_first_success,
            step_schedule=self.step_schedule, adam_epsilon=self.adam_epsilon,
        )
        self.result_ = result
        self.solutions_ = result.solutions
        self.best_ = result.solutions.best
        self.trajectories_ = [r.trajectory for r in result.restarts]
        self.success_flags_ = result.success_flags
        self.n_loss_evaluations_ = result.n_loss_evaluations
        return self


def sweep(estimator: LatentSequenceOptimizer, start, param_grid):
    """Fit one clone per hyperparameter combination and pool the solutions.

    ``param_grid`` follows scikit-learn's ParameterGrid conventions.
    Returns the best pooled candidate (scores compared as evaluated under
    each combination's own coefficients) and the per-combination results.
    """
    runs = []
    pooled = []
    for params in ParameterGrid(param_grid):
        est = clone(estimator).set_params(**params)
        est.fit(start)
        runs.append((params, est.result_))
        pooled.extend(est.solutions_.candidates)
    return select_best(pooled), runs
