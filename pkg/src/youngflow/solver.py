"""Linear Young differential equations dx = A x dt + C x d(omega).

Solutions are built by Picard iteration on greedy intervals. On each grid
cell the coefficients are frozen at their left values and the driver is
linear, so the cell increment of the frozen equation is exactly
exp(M_i) - I with M_i = A(t_i) dt_i + C(t_i) d(omega)_i. The fixed-point
map on an interval is therefore

    X_j = x_a + sum_{i<j} (exp(M_i) - I) X_i,

whose fixed point is the ordered product of the cell exponentials. This
keeps the flow identities (composition, adjoint inverse, Liouville
formula) exact up to rounding on any grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .errors import DegeneracyError, DomainError, IterationError
from .paths import (
    GreedyPartition,
    Interval,
    SampledPath,
    as_interval,
    greedy_partition,
    p_variation_norm,
    p_variation_seminorm,
)
from .young import YoungParams

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200
# |det| below this is treated as numerically singular
DET_FLOOR = 1e-300
_LOG_DET_FLOOR = math.log(DET_FLOOR)


@dataclass(frozen=True, eq=False)
class LinearYDE:
    """Coefficient pair (A, C) of dx = A(t) x dt + C(t) x d(omega)."""

    A: SampledPath
    C: SampledPath
    params: YoungParams = field(default_factory=YoungParams)

    def __post_init__(self):
        if self.A.shape != self.C.shape:
            raise DomainError(f"A has shape {self.A.shape} but C has shape {self.C.shape}")
        r, c = self.A.shape
        if r != c:
            raise DomainError(f"coefficients must be square, got {self.A.shape}")

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @classmethod
    def constant(cls, A, C, times, params: YoungParams | None = None) -> "LinearYDE":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        return cls(SampledPath.constant(A, times), SampledPath.constant(C, times), params or YoungParams())

    def adjoint(self) -> "LinearYDE":
        """The equation dy = -A^T y dt - C^T y d(omega)."""
        return LinearYDE(self.A.transpose().scaled(-1.0), self.C.transpose().scaled(-1.0), self.params)

    def on_grid(self, times) -> "LinearYDE":
        """Coefficients sampled at ``times`` (linear interpolation where needed)."""
        times = np.asarray(times, dtype=float)
        A = self.A if _grid_equal(self.A.times, times) else self.A.resample(times)
        C = self.C if _grid_equal(self.C.times, times) else self.C.resample(times)
        return LinearYDE(A, C, self.params)

    def a_sup(self, window=None) -> float:
        """sup of the Frobenius norm of A over the grid nodes in ``window``."""
        return self.A.sup_norm(window)

    def c_qvar_norm(self, window=None) -> float:
        """|C(a)| + |||C|||_{q-var,[a,b]}."""
        return p_variation_norm(self.C, self.params.q, window)

    def m_star(self, window=None) -> float:
        """max(||A||_inf, 2K ||C||_{q-var}) on ``window``."""
        return max(self.a_sup(window), 2 * self.params.K * self.c_qvar_norm(window))


def _grid_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and (a is b or np.array_equal(a, b))


def default_mu(m_star: float) -> float:
    return min(1.0, m_star) / 2


def check_mu(mu: float, m: float) -> None:
    if not 0 < mu < min(1.0, m):
        raise DomainError(f"mu={mu} outside (0, min(1, M)={min(1.0, m)})")


def log_growth_exponent(m_star: float, mu: float, p: float, T: float, omega_pvar: float) -> float:
    """(2M*/mu)^p (T^p + |||omega|||^p), shared by the growth bounds."""
    return (2 * m_star / mu) ** p * (T**p + omega_pvar**p)


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


@dataclass(frozen=True)
class SolveReport:
    """Solution of a linear YDE with the a-priori bounds it must satisfy.

    Bounds are kept in log form as well since they overflow quickly.
    """

    solution: SampledPath
    partition: GreedyPartition
    picard_iterations: np.ndarray
    contraction_ratios: np.ndarray
    sup_norm: float
    pvar_norm: float
    log_growth_bound: float
    log_pvar_bound: float
    m_star: float
    mu: float
    eta: float

    @property
    def growth_bound(self) -> float:
        return _safe_exp(self.log_growth_bound)

    @property
    def pvar_bound(self) -> float:
        return _safe_exp(self.log_pvar_bound)

    def bounds_hold(self) -> bool:
        ok_sup = self.sup_norm == 0 or math.log(self.sup_norm) <= self.log_growth_bound
        ok_pvar = self.pvar_norm == 0 or math.log(self.pvar_norm) <= self.log_pvar_bound
        return bool(ok_sup and ok_pvar)


@dataclass(frozen=True)
class _RawSolve:
    X: np.ndarray
    partition: GreedyPartition
    iterations: np.ndarray
    ratios: np.ndarray
    m_star: float
    mu: float


def cell_exponentials(eq: LinearYDE, omega: SampledPath, i: int, j: int) -> np.ndarray:
    """exp(A(t_k) dt_k + C(t_k) d(omega)_k) for the cells between nodes i and j."""
    if omega.shape != (1, 1):
        raise DomainError(f"the driver must be scalar, got shape {omega.shape}")
    t = omega.times[i : j + 1]
    eq = eq.on_grid(omega.times)
    dt = np.diff(t)
    dw = np.diff(omega.values[i : j + 1, 0, 0])
    M = eq.A.values[i:j] * dt[:, None, None] + eq.C.values[i:j] * dw[:, None, None]
    return expm(M)


def _solve_raw(eq: LinearYDE, omega: SampledPath, window, x0: np.ndarray, mu, tol, max_iter) -> _RawSolve:
    if omega.shape != (1, 1):
        raise DomainError(f"the driver must be scalar, got shape {omega.shape}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    w = as_interval(window, omega)
    i, j = omega.window_indices(w)
    if j <= i:
        raise DomainError("solve window is degenerate")
    eq = eq.on_grid(omega.times)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x0.shape[0] != eq.d:
        raise DomainError(f"initial value has {x0.shape[0]} rows, system has dimension {eq.d}")
    if not np.all(np.isfinite(x0)):
        raise DomainError("initial value must be finite")

    p = eq.params.p
    wg = Interval(float(omega.times[i]), float(omega.times[j]))
    m_star = eq.m_star(wg)
    if m_star == 0:
        # A and C vanish: the solution is constant and one interval suffices
        X = np.broadcast_to(x0, (j - i + 1,) + x0.shape).copy()
        part = GreedyPartition(
            taus=np.array([wg.a, wg.b]),
            indices=np.array([i, j], dtype=np.int64),
            mu=0.0,
            m_star=0.0,
            p=p,
            pvar_window=p_variation_seminorm(omega, p, wg),
        )
        return _RawSolve(X, part, np.ones(1, dtype=np.int64), np.zeros(1), 0.0, 0.0)

    mu = default_mu(m_star) if mu is None else float(mu)
    check_mu(mu, m_star)
    part = greedy_partition(omega, p, mu, m_star, wg)
    E = cell_exponentials(eq, omega, i, j)
    G = E - np.eye(eq.d)
    bounds = part.indices - i
    X, iters, ratios = _kernels.picard_partition(G, bounds, np.ascontiguousarray(x0), eq.params.q, float(tol), int(max_iter))
    bad = np.flatnonzero(iters < 0)
    if bad.size:
        k = int(bad[0])
        raise IterationError(
            f"Picard iteration did not converge in {max_iter} steps on "
            f"[{part.taus[k]}, {part.taus[k + 1]}]; refine the grid or reduce mu"
        )
    if not np.all(np.isfinite(X)):
        raise DegeneracyError("solution overflowed")
    return _RawSolve(X, part, iters, ratios, m_star, mu)


def picard_solve(
    eq: LinearYDE,
    x0,
    omega: SampledPath,
    window=None,
    mu: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolveReport:
    """Solve x(t) = x0 + int A x ds + int C x d(omega) on ``window``.

    ``x0`` may be a vector (d,) or a matrix (d, k) of k initial vectors.
    ``mu`` defaults to min(1, M*)/2; iteration on each greedy interval stops
    once successive iterates differ by less than ``tol`` relative to the
    interval's left value, in the grid q-variation norm.
    """
    raw = _solve_raw(eq, omega, window, x0, mu, tol, max_iter)
    part = raw.partition
    i, j = int(part.indices[0]), int(part.indices[-1])
    sol = SampledPath(omega.times[i : j + 1], raw.X)
    x0n = float(np.linalg.norm(raw.X[0]))
    sup = float(np.max(np.linalg.norm(raw.X.reshape(raw.X.shape[0], -1), axis=1)))
    pvar = p_variation_norm(sol, eq.params.p)
    if raw.m_star == 0:
        eta, expo = 0.0, 0.0
        log_g = log_p = math.log(x0n) if x0n > 0 else -math.inf
    else:
        eta = -math.log1p(-raw.mu)
        T = part.taus[-1] - part.taus[0]
        expo = log_growth_exponent(raw.m_star, raw.mu, eq.params.p, T, part.pvar_window)
        logx = math.log(x0n) if x0n > 0 else -math.inf
        log_g = logx + eta * (2 + expo)
        log_p = logx + (1 + eta) * (3 + expo)
    return SolveReport(
        solution=sol,
        partition=part,
        picard_iterations=raw.iterations,
        contraction_ratios=raw.ratios,
        sup_norm=sup,
        pvar_norm=pvar,
        log_growth_bound=log_g,
        log_pvar_bound=log_p,
        m_star=raw.m_star,
        mu=raw.mu,
        eta=eta,
    )


# -- flows -------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowMatrix:
    """Phi(s, t) for s in ``base_times`` and t in ``eval_times``.

    ``matrices[a, b]`` is Phi(base_times[a], eval_times[b]); ``adjoint``
    holds Psi on the same pairs when it was computed.
    """

    base_times: np.ndarray
    eval_times: np.ndarray
    matrices: np.ndarray
    adjoint: np.ndarray | None = None

    def __call__(self, s: float, t: float) -> np.ndarray:
        a = _lookup(self.base_times, s)
        b = _lookup(self.eval_times, t)
        return self.matrices[a, b]

    def log_abs_det(self) -> tuple[np.ndarray, np.ndarray]:
        """log|det Phi| for every pair and a mask of numerically singular pairs."""
        sign, logdet = np.linalg.slogdet(self.matrices)
        degenerate = (sign == 0) | (logdet < _LOG_DET_FLOOR)
        return logdet, degenerate


def _lookup(grid: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(grid - t)))
    if abs(grid[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise DomainError(f"time {t} is not among the flow's times")
    return k


def _forward_products(eq: LinearYDE, omega: SampledPath, t0: float, t1: float, tol, max_iter) -> tuple[np.ndarray, int, int]:
    i0 = omega.index_of(t0)
    i1 = omega.index_of(t1)
    if i1 == i0:
        return np.eye(eq.d)[None], i0, i1
    raw = _solve_raw(eq, omega, (omega.times[i0], omega.times[i1]), np.eye(eq.d), None, tol, max_iter)
    return raw.X, i0, i1


def flow_path(eq: LinearYDE, omega: SampledPath, t0: float, t1: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SampledPath:
    """t -> Phi(t0, t) on every grid node of [t0, t1]."""
    X, i0, i1 = _forward_products(eq, omega, t0, t1, tol, max_iter)
    if i1 == i0:
        raise DomainError("flow window is degenerate")
    return SampledPath(omega.times[i0 : i1 + 1], X)


def _sample(X: np.ndarray, i0: int, omega: SampledPath, eval_times) -> np.ndarray:
    idx = [omega.index_of(t) - i0 for t in eval_times]
    if min(idx) < 0:
        raise DomainError("evaluation times must not precede the base time")
    return X[idx]


def fundamental_matrix(
    eq: LinearYDE,
    omega: SampledPath,
    t0: float,
    eval_times,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    with_adjoint: bool = False,
) -> FlowMatrix:
    """Phi(t0, t) for each t in ``eval_times`` (grid nodes, t >= t0)."""
    eval_times = np.atleast_1d(np.asarray(eval_times, dtype=float))
    X, i0, _ = _forward_products(eq, omega, t0, float(eval_times.max()), tol, max_iter)
    mats = _sample(X, i0, omega, eval_times)
    adj = None
    if with_adjoint:
        Y, _, _ = _forward_products(eq.adjoint(), omega, t0, float(eval_times.max()), tol, max_iter)
        adj = _sample(Y, i0, omega, eval_times)[None]
    return FlowMatrix(np.array([float(t0)]), eval_times, mats[None], adj)


def adjoint_fundamental(
    eq: LinearYDE,
    omega: SampledPath,
    t0: float,
    eval_times,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FlowMatrix:
    """Psi(t0, t) solving dPsi = -A^T Psi dt - C^T Psi d(omega), Psi(t0, t0) = I."""
    eval_times = np.atleast_1d(np.asarray(eval_times, dtype=float))
    Y, i0, _ = _forward_products(eq.adjoint(), omega, t0, float(eval_times.max()), tol, max_iter)
    mats = _sample(Y, i0, omega, eval_times)
    return FlowMatrix(np.array([float(t0)]), eval_times, mats[None])


def two_parameter_flow(eq: LinearYDE, omega: SampledPath, s: float, t: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Phi(s, t) for either order of s and t.

    For t < s the backward flow is Psi(t, s)^T, the transposed adjoint flow.
    """
    if t >= s:
        X, _, _ = _forward_products(eq, omega, s, t, tol, max_iter)
        return X[-1]
    Y, _, _ = _forward_products(eq.adjoint(), omega, t, s, tol, max_iter)
    return Y[-1].T


def liouville_log_det(eq: LinearYDE, omega: SampledPath, t0: float, t: float) -> float:
    """int_{t0}^t tr A ds + int_{t0}^t tr C d(omega), both as left-point sums."""
    i = omega.index_of(t0)
    j = omega.index_of(t)
    if j < i:
        raise DomainError("liouville_log_det needs t >= t0")
    eq = eq.on_grid(omega.times)
    trA = np.trace(eq.A.values[i:j], axis1=1, axis2=2)
    trC = np.trace(eq.C.values[i:j], axis1=1, axis2=2)
    dt = np.diff(omega.times[i : j + 1])
    dw = np.diff(omega.values[i : j + 1, 0, 0])
    return float(np.sum(trA * dt) + np.sum(trC * dw))


def log_abs_det(M: np.ndarray) -> float:
    """log|det M| via LU; raises when |det M| < 1e-300."""
    sign, logdet = np.linalg.slogdet(M)
    if sign == 0 or logdet < _LOG_DET_FLOOR:
        raise DegeneracyError(f"|det| below {DET_FLOOR}")
    return float(logdet)


# -- continuity of the solution map ------------------------------------------------


@dataclass(frozen=True)
class ContinuityRow:
    size: float
    dx0: float
    domega_pvar: float
    delta_pvar: float

    @property
    def ratio(self) -> float:
        denom = self.dx0 + self.domega_pvar
        return self.delta_pvar / denom if denom > 0 else 0.0


def continuity_probe(
    eq: LinearYDE,
    x0,
    omega: SampledPath,
    sizes,
    window=None,
    direction=None,
    perturbation: SampledPath | None = None,
) -> list[ContinuityRow]:
    """p-variation distance between solutions under perturbations of (x0, omega).

    For each size eps, x0 moves by eps * direction (a unit vector, default
    e_1) and omega by eps * perturbation, where the perturbation path is
    scaled to unit p-variation seminorm (default a sine bump vanishing at
    the window start).
    """
    p = eq.params.p
    w = as_interval(window, omega)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if direction is None:
        direction = np.zeros_like(x0)
        direction[0] = 1.0
    direction = np.asarray(direction, dtype=float).reshape(-1)
    nd = np.linalg.norm(direction)
    direction = direction / nd if nd > 0 else direction
    if perturbation is None:
        s = (omega.times - w.a) / max(w.length, 1e-300)
        perturbation = SampledPath(omega.times, np.sin(np.pi * np.clip(s, 0, 1)))
    pv = p_variation_seminorm(perturbation, p, w)
    unit = perturbation.scaled(1.0 / pv) if pv > 0 else perturbation
    base = picard_solve(eq, x0, omega, w).solution
    rows = []
    for eps in sizes:
        eps = float(eps)
        om2 = omega + unit.scaled(eps)
        other = picard_solve(eq, x0 + eps * direction, om2, w).solution
        delta = p_variation_norm(base - other, p)
        rows.append(
            ContinuityRow(
                size=eps,
                dx0=eps * float(np.linalg.norm(direction)),
                domega_pvar=p_variation_seminorm(om2 - omega, p, w),
                delta_pvar=delta,
            )
        )
    return rows
