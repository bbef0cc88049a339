"""Fixed-step IMEX time stepping: GLM steps, stage solves, the starting
procedure, and a generic additive-RK stepper for comparators.

One GLM step advances the external vector y^[n-1] (r blocks of length d)
through s stages

    Y_i = h sum_{j<i} a_ij f(Y_j) + h sum_{j<=i} ahat_ij g(Y_j) + sum_j u_ij y_j,
    y_i^[n] = h sum_j (b_ij f(Y_j) + bhat_ij g(Y_j)) + sum_j v_ij y_j,

with f/g evaluated at t + c_i h.  Diagonally implicit stage solves share a
single factorization of I - h*lambda*J_g whenever g is linear, since the
diagonal is constant for this method class.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import splu

from .methods import ImexRkMethod, load_ark_method
from .tableau import ImexGlmMethod


class StageSolveError(RuntimeError):
    """Implicit stage solve failed (Newton stall, divergence, or singular
    iteration matrix)."""

    def __init__(self, msg, stage=None, residual=None):
        super().__init__(msg)
        self.stage = stage
        self.residual = residual


class IntegrationError(RuntimeError):
    """A step produced non-finite values or a stage solve failed."""


@dataclass
class SemiDiscreteProblem:
    """Split ODE system y' = f(t, y) + g(t, y), f nonstiff and g stiff."""

    name: str
    d: int
    t0: float
    tF: float
    y0: np.ndarray
    f: Callable[[float, np.ndarray], np.ndarray]
    g: Callable[[float, np.ndarray], np.ndarray]
    g_jacobian: Callable[[float, np.ndarray], object]  # dense or sparse d x d
    g_is_linear: bool = False
    exact: Callable[[float], np.ndarray] | None = None
    stiff_scale: float | None = None  # rough spectral bound of the full RHS

    def __post_init__(self):
        self.y0 = np.asarray(self.y0, dtype=float)
        if self.y0.shape != (self.d,):
            raise ValueError(f"y0 must have shape ({self.d},)")

    def rhs(self, t, y):
        return self.f(t, y) + self.g(t, y)


@dataclass
class ExternalState:
    """The r external blocks at time t, plus the last stage of the step
    that produced them (the solution readout, valid since c_s = 1)."""

    t: float
    h: float
    blocks: np.ndarray                 # (r, d)
    last_stage: np.ndarray | None = None

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=float)
        if self.blocks.ndim != 2:
            raise ValueError("blocks must be a (r, d) array")
        if not np.isfinite(self.blocks).all():
            raise IntegrationError("non-finite external state")

    @property
    def r(self) -> int:
        return self.blocks.shape[0]


@dataclass(frozen=True)
class StageSolveConfig:
    newton_tol: float = 1e-12
    max_newton: int = 25
    jacobian_refresh: str = "frozen-for-linear"  # | "per-stage" | "per-step"

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_newton < 1:
            raise ValueError("newton_tol must be > 0 and max_newton >= 1")
        if self.jacobian_refresh not in ("frozen-for-linear", "per-stage", "per-step"):
            raise ValueError(f"unknown refresh policy {self.jacobian_refresh!r}")


@dataclass(frozen=True)
class StartingConfig:
    """Starting micro-step tau and the auxiliary scheme that generates the
    r-1 micro-solutions.  scheme is 'imex-euler', an ImexRkMethod, or a
    path to an ARK coefficient file."""

    tau: float | None = None           # absolute micro-step; None defers
    tau_ratio: float | None = None     # tau as a fraction of h; None: 1/2
    scheme: object = "imex-euler"

    def resolve_tau(self, h: float) -> float:
        if self.tau is not None:
            return float(self.tau)
        ratio = 0.5 if self.tau_ratio is None else float(self.tau_ratio)
        return ratio * h


def imex_euler_ark() -> ImexRkMethod:
    """IMEX Euler as a 2-stage additive RK pair (forward/backward Euler)."""
    return ImexRkMethod(
        name="imex-euler-ark",
        c=np.array([0.0, 1.0]),
        A_explicit=np.array([[0.0, 0.0], [1.0, 0.0]]),
        b_explicit=np.array([1.0, 0.0]),
        A_implicit=np.array([[0.0, 0.0], [0.0, 1.0]]),
        b_implicit=np.array([0.0, 1.0]),
    )


# ---------------------------------------------------------------------------
# implicit stage solves

class StiffSolverCache:
    """Factorization reuse for stage solves.

    For linear g the iteration matrix I - gamma*J_g is constant in time, so
    one factorization per distinct gamma = h*ahat_ii serves every stage of
    every step (the DIMSIM diagonal is constant, giving a single gamma per
    run).  Dense Jacobians go through LAPACK LU, sparse ones through
    SuperLU.
    """

    def __init__(self, prob: SemiDiscreteProblem):
        self.prob = prob
        self._fact = {}
        self._J = None

    def linear_jacobian(self):
        if self._J is None:
            self._J = self.prob.g_jacobian(self.prob.t0, self.prob.y0)
        return self._J

    def factorization(self, gamma: float):
        key = float(gamma)
        if key not in self._fact:
            self._fact[key] = _factorize(self.linear_jacobian(), gamma, self.prob.d)
        return self._fact[key]


def _factorize(J, gamma: float, d: int):
    if sparse.issparse(J):
        M = (sparse.identity(d, format="csc") - gamma * J.tocsc()).tocsc()
        try:
            lu = splu(M)
        except RuntimeError as exc:
            raise StageSolveError(f"singular iteration matrix (gamma={gamma})") from exc
        return lu.solve
    M = np.eye(d) - gamma * np.asarray(J)
    try:
        fact = lu_factor(M)
    except np.linalg.LinAlgError as exc:
        raise StageSolveError(f"singular iteration matrix (gamma={gamma})") from exc
    return lambda rhs: lu_solve(fact, rhs)


def _implicit_solve(gamma, rhs, prob, t_stage, cfg, cache, predictor=None,
                    stage_index=None):
    """Solve Y = rhs + gamma * g(t_stage, Y) to the configured tolerance."""
    if gamma == 0.0:
        return rhs
    if not np.isfinite(rhs).all():
        raise StageSolveError("non-finite stage right-hand side",
                              stage=stage_index)
    scale = max(1.0, float(np.linalg.norm(rhs)))
    tol = cfg.newton_tol * scale

    if prob.g_is_linear and cfg.jacobian_refresh != "per-stage":
        solve = cache.factorization(gamma)
        offset = prob.g(t_stage, np.zeros(prob.d))  # g(t, y) = J y + offset
        Y = solve(rhs + gamma * offset)
        return np.asarray(Y)
    if prob.g_is_linear:
        # per-stage policy: rebuild the (identical) factorization each time
        solve = _factorize(prob.g_jacobian(t_stage, rhs), gamma, prob.d)
        offset = prob.g(t_stage, np.zeros(prob.d))
        return np.asarray(solve(rhs + gamma * offset))

    # nonlinear g: modified Newton with J frozen at the stage predictor
    y = np.array(rhs if predictor is None else predictor, dtype=float)
    J = prob.g_jacobian(t_stage, y)
    solve = _factorize(J, gamma, prob.d)
    res_norm = np.inf
    for _ in range(cfg.max_newton):
        res = y - gamma * prob.g(t_stage, y) - rhs
        res_norm = float(np.linalg.norm(res))
        if not np.isfinite(res_norm):
            raise StageSolveError("Newton iteration diverged (non-finite residual)",
                                  stage=stage_index, residual=res_norm)
        if res_norm <= tol:
            return y
        y = y - solve(res)
    raise StageSolveError(
        f"Newton stalled after {cfg.max_newton} iterations "
        f"(residual {res_norm:.3e}, tol {tol:.3e})",
        stage=stage_index, residual=res_norm)


def solve_stage(i, rhs, m: ImexGlmMethod, prob, t, h,
                cfg: StageSolveConfig | None = None,
                cache: StiffSolverCache | None = None,
                predictor=None):
    """Stage solve Y_i = rhs + h*ahat_ii * g(t + c_i h, Y_i)."""
    cfg = cfg or StageSolveConfig()
    cache = cache or StiffSolverCache(prob)
    gamma = h * float(m.Ahat[i, i])
    t_stage = t + float(m.c[i]) * h
    return _implicit_solve(gamma, rhs, prob, t_stage, cfg, cache,
                           predictor=predictor, stage_index=i)


# ---------------------------------------------------------------------------
# the GLM step

def glm_step(m: ImexGlmMethod, prob: SemiDiscreteProblem, state: ExternalState,
             cfg: StageSolveConfig | None = None,
             cache: StiffSolverCache | None = None) -> ExternalState:
    """Advance the external vector by one step of size state.h."""
    if state.r != m.r:
        raise ValueError(f"state has {state.r} blocks, method wants {m.r}")
    cfg = cfg or StageSolveConfig()
    cache = cache or StiffSolverCache(prob)
    s, h, t = m.s, state.h, state.t
    A, Ah = m.A, m.Ahat
    F = np.empty((s, prob.d))
    G = np.empty((s, prob.d))
    Uy = m.explicit.U @ state.blocks   # (s, d)

    Y = state.blocks[0]
    for i in range(s):
        rhs = Uy[i] + h * (A[i, :i] @ F[:i] + Ah[i, :i] @ G[:i])
        Y = solve_stage(i, rhs, m, prob, t, h, cfg, cache, predictor=Y)
        t_i = t + float(m.c[i]) * h
        F[i] = prob.f(t_i, Y)
        G[i] = prob.g(t_i, Y)

    new_blocks = h * (m.B @ F + m.Bhat @ G) + m.explicit.V @ state.blocks
    if not np.isfinite(new_blocks).all():
        raise IntegrationError(f"non-finite external state after step at t={t}")
    return ExternalState(t=t + h, h=h, blocks=new_blocks, last_stage=Y.copy())


# ---------------------------------------------------------------------------
# starting procedure

def derivative_weights(r: int) -> np.ndarray:
    """Finite-difference weights on nodes {0..r-1}: row k satisfies
    tau^k x^(k)(t0) = tau * sum_j D[k-1, j] x'(t0 + j tau) + O(tau^{r+1}),
    from the Vandermonde moment system.  Row 1 is e_1 exactly, so the
    first-derivative term consumes f(y0) directly.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > 12:
        warnings.warn(f"derivative weights for r={r} are badly conditioned",
                      RuntimeWarning, stacklevel=2)
    nodes = np.arange(r, dtype=float)
    Vm = np.vander(nodes, r, increasing=True).T        # Vm[m, j] = j^m
    rhs = np.diag([float(factorial(k)) for k in range(r)])
    D = np.linalg.solve(Vm, rhs).T                     # row k-1: weights for x^(k)
    D[0] = 0.0
    D[0, 0] = 1.0                                      # exact e_1, not 1e-16 noise
    return D


def rescaling_matrix(h: float, tau: float, r: int) -> np.ndarray:
    """diag((h/tau)^k, k = 1..r)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return np.diag((h / tau) ** np.arange(1, r + 1))


def _starter_stepper(scheme, cfg, cache):
    """Map a StartingConfig scheme to a micro-step function."""
    if isinstance(scheme, str) and scheme == "imex-euler":
        scheme = imex_euler_ark()
    elif isinstance(scheme, (str, os.PathLike)):
        scheme = load_ark_method(scheme)
    if not isinstance(scheme, ImexRkMethod):
        raise TypeError("starting scheme must be 'imex-euler', an ImexRkMethod, "
                        "or a path to an ARK file")

    def step(prob, y, t, tau):
        return ark_step(scheme, prob, y, t, tau, cfg, cache)

    return step


def initialize_external(m: ImexGlmMethod, prob: SemiDiscreteProblem, h: float,
                        start: StartingConfig | None = None,
                        cfg: StageSolveConfig | None = None,
                        cache: StiffSolverCache | None = None) -> ExternalState:
    """Bootstrap the external vector at t0.

    Runs r-1 micro-steps of size tau with the auxiliary scheme, reconstructs
    scaled derivatives of the two split parts from the micro right-hand-side
    values, and combines them with the method's starting weights:

        y^[0] = 1_r (x) y0 + tau (Q_d R D (x) I) F + tau (Qhat_d R D (x) I) G,

    where Q_d holds the derivative columns k = 1..r, R = diag((h/tau)^k)
    rescales micro-derivatives to step-size powers, and D are the
    finite-difference weights.
    """
    start = start or StartingConfig()
    cfg = cfg or StageSolveConfig()
    cache = cache or StiffSolverCache(prob)
    r = m.r
    tau = start.resolve_tau(h)
    if not 0.0 < tau <= h:
        raise ValueError(f"starting micro-step tau={tau} outside (0, h]")

    t0, y0 = prob.t0, prob.y0
    ys = [y0]
    if r > 1:
        micro = _starter_stepper(start.scheme, cfg, cache)
        y = y0
        for j in range(r - 1):
            y = micro(prob, y, t0 + j * tau, tau)
            ys.append(y)
    Fs = np.array([prob.f(t0 + j * tau, ys[j]) for j in range(r)])
    Gs = np.array([prob.g(t0 + j * tau, ys[j]) for j in range(r)])

    D = derivative_weights(r)
    R = rescaling_matrix(h, tau, r)
    Wf = m.Q[:, 1:r + 1] @ R @ D
    Wg = m.Qhat[:, 1:r + 1] @ R @ D
    blocks = y0[None, :] + tau * (Wf @ Fs + Wg @ Gs)
    return ExternalState(t=t0, h=h, blocks=blocks, last_stage=None)


# ---------------------------------------------------------------------------
# whole-interval drivers

@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    n_steps: int
    h: float
    t_readout: float | None = None     # time the readout y approximates
    state: ExternalState | None = None
    trajectory: list = field(default_factory=list)


def integrate(m: ImexGlmMethod, prob: SemiDiscreteProblem, n_steps: int,
              start: StartingConfig | None = None,
              cfg: StageSolveConfig | None = None,
              record_trajectory: bool = False) -> IntegrationResult:
    """initialize_external + n_steps glm_steps; returns Y_s of the final
    step as the solution readout.

    The readout approximates y(tF - h + c_s h), which is y(tF) for the
    abscissa layout c_s = 1 used by the built-in methods.  t_readout on the
    result records that time so first-order comparators with c_s = 0 can be
    scored against the right instant.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    cfg = cfg or StageSolveConfig()
    h = (prob.tF - prob.t0) / n_steps
    cache = StiffSolverCache(prob)
    state = initialize_external(m, prob, h, start, cfg, cache)
    traj = []
    for n in range(n_steps):
        try:
            state = glm_step(m, prob, state, cfg, cache)
        except (StageSolveError, IntegrationError) as exc:
            raise IntegrationError(
                f"step {n + 1}/{n_steps} at t={state.t:.6g} failed: {exc}") from exc
        if record_trajectory:
            traj.append((state.t, state.last_stage.copy()))
    t_read = state.t - h + float(m.c[-1]) * h
    return IntegrationResult(t=state.t, y=state.last_stage, n_steps=n_steps,
                             h=h, t_readout=t_read, state=state, trajectory=traj)


def ark_step(mrk: ImexRkMethod, prob: SemiDiscreteProblem, y, t, h,
             cfg: StageSolveConfig | None = None,
             cache: StiffSolverCache | None = None) -> np.ndarray:
    """One additive-RK step from (t, y) to t + h."""
    cfg = cfg or StageSolveConfig()
    cache = cache or StiffSolverCache(prob)
    sig = mrk.sigma
    Ae, Ai = mrk.A_explicit, mrk.A_implicit
    F = np.empty((sig, prob.d))
    G = np.empty((sig, prob.d))
    y = np.asarray(y, dtype=float)
    Y = y
    for i in range(sig):
        rhs = y + h * (Ae[i, :i] @ F[:i] + Ai[i, :i] @ G[:i])
        t_i = t + float(mrk.c[i]) * h
        Y = _implicit_solve(h * float(Ai[i, i]), rhs, prob, t_i, cfg, cache,
                            predictor=Y, stage_index=i)
        F[i] = prob.f(t_i, Y)
        G[i] = prob.g(t_i, Y)
    out = y + h * (mrk.b_explicit @ F + mrk.b_implicit @ G)
    if not np.isfinite(out).all():
        raise IntegrationError(f"non-finite additive-RK update at t={t}")
    return out


def ark_integrate(mrk: ImexRkMethod, prob: SemiDiscreteProblem, n_steps: int,
                  cfg: StageSolveConfig | None = None,
                  record_trajectory: bool = False) -> IntegrationResult:
    """Fixed-step additive-RK run over [t0, tF] (comparator driver)."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    cfg = cfg or StageSolveConfig()
    h = (prob.tF - prob.t0) / n_steps
    cache = StiffSolverCache(prob)
    y, t = prob.y0, prob.t0
    traj = []
    for n in range(n_steps):
        try:
            y = ark_step(mrk, prob, y, t, h, cfg, cache)
        except (StageSolveError, IntegrationError) as exc:
            raise IntegrationError(
                f"step {n + 1}/{n_steps} at t={t:.6g} failed: {exc}") from exc
        t = prob.t0 + (n + 1) * h
        if record_trajectory:
            traj.append((t, y.copy()))
    return IntegrationResult(t=t, y=y, n_steps=n_steps, h=h, t_readout=t,
                             trajectory=traj)
