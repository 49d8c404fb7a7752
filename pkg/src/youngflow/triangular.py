"""Explicit solutions of scalar and upper-triangular linear Young equations.

These serve as an independent oracle for the Picard solver and the
spectrum estimators. Triangular fundamental matrices are stored in the
normalized form Z = X diag(Y)^{-1}, where Y_k is the k-th diagonal
solution, so that nothing overflows over long horizons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError
from .paths import SampledPath
from .solver import LinearYDE
from .young import young_integral_path

DEFAULT_EXACT_TOL = 0.02
DEFAULT_TAIL_TOL = 1e-8


class TriangularYDE(LinearYDE):
    """A LinearYDE whose coefficients are upper triangular at every node."""

    def __post_init__(self):
        super().__post_init__()
        lower = np.tril_indices(self.d, -1)
        for name, M in (("A", self.A), ("C", self.C)):
            if np.any(M.values[:, lower[0], lower[1]] != 0):
                raise DomainError(f"{name} has nonzero strictly-lower entries")

    @classmethod
    def from_linear(cls, eq: LinearYDE) -> "TriangularYDE":
        return cls(eq.A, eq.C, eq.params)


def _on(path: SampledPath, omega: SampledPath, i: int, j: int) -> SampledPath:
    times = omega.times[i : j + 1]
    if path.n == omega.n and np.array_equal(path.times, omega.times):
        return SampledPath(times, path.values[i : j + 1])
    return path.resample(times)


def _log_flow_1d(a: SampledPath, c: SampledPath, omega: SampledPath, window) -> tuple[SampledPath, np.ndarray]:
    """Grid omega restricted to window, and int a ds + int c d(omega) at each node."""
    i, j = omega.window_indices(window)
    if j <= i:
        raise DomainError("degenerate window")
    om = SampledPath(omega.times[i : j + 1], omega.values[i : j + 1])
    clock = SampledPath(om.times, om.times)
    a_ = _on(a, omega, i, j)
    c_ = _on(c, omega, i, j)
    S = young_integral_path(a_, clock).scalar_values + young_integral_path(c_, om).scalar_values
    return om, S


def solve_1d_explicit(a: SampledPath, c: SampledPath, omega: SampledPath, z0: float, window=None) -> SampledPath:
    """z(t) = z0 exp(int_a^t a ds + int_a^t c d(omega)) with grid Young sums."""
    om, S = _log_flow_1d(a, c, omega, window)
    return SampledPath(om.times, z0 * np.exp(S))


def solve_1d_nonhomogeneous(
    a: SampledPath,
    c: SampledPath,
    h1: SampledPath,
    h2: SampledPath,
    omega: SampledPath,
    x0: float,
    window=None,
) -> SampledPath:
    """Variation of constants for dx = (a x + h1) dt + (c x + h2) d(omega).

    x(t) = E(t) (x0 + int E^{-1} h1 ds + int E^{-1} h2 d(omega)) with
    E(t) = exp(int a ds + int c d(omega)).
    """
    om, S = _log_flow_1d(a, c, omega, window)
    i, j = omega.window_indices(window)
    clock = SampledPath(om.times, om.times)
    einv = np.exp(-S)
    g1 = SampledPath(om.times, einv * _on(h1, omega, i, j).scalar_values)
    g2 = SampledPath(om.times, einv * _on(h2, omega, i, j).scalar_values)
    inner = x0 + young_integral_path(g1, clock).scalar_values + young_integral_path(g2, om).scalar_values
    return SampledPath(om.times, np.exp(S) * inner)


# -- diagonal means ----------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalMeans:
    """Running means abar_kk(t) = (1/t) int_0^t a_kk ds and their tail spread."""

    times: np.ndarray
    abar: np.ndarray
    final: np.ndarray
    spread: np.ndarray
    exact: np.ndarray
    tol: float

    @property
    def all_exact(self) -> bool:
        return bool(np.all(self.exact))

    def to_dict(self) -> dict:
        return {
            "abar_final": [float(x) for x in self.final],
            "tail_spread": [float(x) for x in self.spread],
            "exact": [bool(x) for x in self.exact],
            "tol": self.tol,
        }


def diagonal_means(eq: LinearYDE, horizon: float, tol: float = DEFAULT_EXACT_TOL) -> DiagonalMeans:
    """Trapezoidal running means of the diagonal of A on [0, horizon].

    A mean counts as exact when max - min of the running mean over the
    trailing half of the horizon is at most ``tol``.
    """
    A = eq.A
    t0 = A.start
    j = A.index_of(t0 + horizon)
    t = A.times[: j + 1]
    diag = np.diagonal(A.values[: j + 1], axis1=1, axis2=2)
    integ = cumulative_trapezoid(diag, t, axis=0, initial=0.0)
    el = t - t0
    abar = np.full_like(integ, np.nan)
    abar[1:] = integ[1:] / el[1:, None]
    tail = el >= horizon / 2
    spread = abar[tail].max(axis=0) - abar[tail].min(axis=0)
    return DiagonalMeans(
        times=t,
        abar=abar,
        final=abar[-1].copy(),
        spread=spread,
        exact=spread <= tol,
        tol=float(tol),
    )


def triangular_spectrum(eq: TriangularYDE, horizon: float, tol: float = DEFAULT_EXACT_TOL) -> tuple[DiagonalMeans, np.ndarray]:
    """Diagonal means and the spectrum {abar_kk} sorted nonincreasing.

    The spectrum is meaningful only when every mean is exact; otherwise the
    system is possibly irregular and ``means.all_exact`` is False.
    """
    if not isinstance(eq, TriangularYDE):
        eq = TriangularYDE.from_linear(eq)
    means = diagonal_means(eq, horizon, tol)
    return means, np.sort(means.final)[::-1]


def regularity_criterion(eq: TriangularYDE, horizon: float, tol: float = DEFAULT_EXACT_TOL) -> tuple[bool, DiagonalMeans]:
    """A triangular system is regular iff every diagonal mean has an exact limit."""
    means, _ = triangular_spectrum(eq, horizon, tol)
    return means.all_exact, means


# -- fundamental matrix ------------------------------------------------------------


@dataclass(frozen=True)
class TriangularFundamental:
    """X(t) = Z(t) diag(exp(log_diag(t))) on the grid of [0, horizon].

    ``base_points[i, k]`` is 0 or inf; ``tail_bound[i, k]`` estimates the
    truncation error of the improper integrals in normalized units.
    """

    times: np.ndarray
    z: np.ndarray
    log_diag: np.ndarray
    base_points: np.ndarray
    tail_bound: np.ndarray
    t_max: float

    def matrix(self) -> np.ndarray:
        """X(t) itself; may overflow for long horizons."""
        with np.errstate(over="ignore"):
            return self.z * np.exp(self.log_diag)[:, None, :]

    def as_path(self) -> SampledPath:
        return SampledPath(self.times, self.matrix())

    def log_abs_det(self) -> np.ndarray:
        """log|det X(t)| = sum_k log Y_k(t) since Z is unit upper triangular."""
        return self.log_diag.sum(axis=1)


def triangular_fundamental(
    eq: TriangularYDE,
    omega: SampledPath,
    horizon: float,
    t_max: float | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    exact_tol: float = DEFAULT_EXACT_TOL,
) -> TriangularFundamental:
    """Fundamental matrix of an upper-triangular system built by substitution.

    Diagonal entries are Y_k. Entry (i, k), i < k, is
    Y_i(t) int_{t_ik}^t Y_i^{-1} sum_j (a_ij x_jk ds + c_ij x_jk d omega), with
    t_ik = 0 when abar_kk >= abar_ii and t_ik = +inf (truncated at t_max)
    otherwise. Columns are filled left to right and rows bottom to top.
    Integrals are left-point grid sums.
    """
    if not isinstance(eq, TriangularYDE):
        eq = TriangularYDE.from_linear(eq)
    if omega.shape != (1, 1):
        raise DomainError("the driver must be scalar")
    t_max = 2.0 * horizon if t_max is None else float(t_max)
    if t_max < horizon:
        raise DomainError(f"t_max={t_max} is below the horizon {horizon}")
    t0 = omega.start
    i_end = omega.index_of(t0 + horizon)
    i_max = omega.index_of(t0 + t_max)
    eq = eq.on_grid(omega.times)
    d = eq.d
    n = i_max + 1
    t = omega.times[:n]
    dt = np.diff(t)
    dw = np.diff(omega.values[:n, 0, 0])
    A = eq.A.values[:n]
    C = eq.C.values[:n]

    dA = np.diagonal(A, axis1=1, axis2=2)
    dC = np.diagonal(C, axis1=1, axis2=2)
    S = np.zeros((n, d))
    S[1:] = np.cumsum(dA[:-1] * dt[:, None] + dC[:-1] * dw[:, None], axis=0)

    abar = diagonal_means(eq, horizon, exact_tol).final
    Z = np.zeros((n, d, d))
    base = np.zeros((d, d))
    tail = np.zeros((d, d))
    for k in range(d):
        Z[:, k, k] = 1.0
        for i in range(k - 1, -1, -1):
            zk = Z[:-1, i + 1 : k + 1, k]
            h = np.einsum("nj,nj->n", A[:-1, i, i + 1 : k + 1], zk) * dt + np.einsum("nj,nj->n", C[:-1, i, i + 1 : k + 1], zk) * dw
            D = S[:, i] - S[:, k]
            growth = np.exp(np.diff(D))
            z = np.zeros(n)
            if abar[k] - abar[i] >= 0:
                for m in range(n - 1):
                    z[m + 1] = growth[m] * (z[m] + h[m])
            else:
                base[i, k] = math.inf
                R = 0.0
                for m in range(n - 2, -1, -1):
                    R = h[m] + R / growth[m]
                    z[m] = -R
                mid = (i_end + i_max) // 2
                scale = float(np.max(np.abs(z[i_end : mid + 1]))) if mid > i_end else float(abs(z[i_end]))
                decay = float(np.max(D[: i_end + 1] - D[i_max]))
                tail[i, k] = scale * math.exp(min(decay, 700.0))
            Z[:, i, k] = z
    if np.any(tail > tail_tol):
        warnings.warn(
            f"truncation at t_max={t_max} leaves a tail of up to {tail.max():.3g}; increase t_max",
            RuntimeWarning,
            stacklevel=2,
        )
    return TriangularFundamental(
        times=t[: i_end + 1].copy(),
        z=Z[: i_end + 1],
        log_diag=S[: i_end + 1],
        base_points=base,
        tail_bound=tail,
        t_max=t_max,
    )


def integral_residual(eq: LinearYDE, omega: SampledPath, fund: TriangularFundamental, window: float = 1.0) -> float:
    """Relative residual of X(t) - X(s) - int_s^t A X - int_s^t C X d(omega) on windows.

    Windows of length ``window`` start at each multiple of it. Column k is
    rescaled by Y_k at the window start, and the residual is measured
    relative to the column's sup over the window.
    """
    eq = eq.on_grid(omega.times)
    t = fund.times
    n = t.size
    dt = np.diff(t)
    dw = np.diff(omega.values[:n, 0, 0])
    A = eq.A.values[:n]
    C = eq.C.values[:n]
    worst = 0.0
    starts = np.arange(t[0], t[-1], window)
    for s in starts:
        i = omega.index_of(s)
        j = omega.index_of(min(s + window, t[-1]))
        if j <= i:
            continue
        X = fund.z[i : j + 1] * np.exp(fund.log_diag[i : j + 1] - fund.log_diag[i])[:, None, :]
        incr = np.matmul(A[i:j], X[:-1]) * dt[i:j, None, None] + np.matmul(C[i:j], X[:-1]) * dw[i:j, None, None]
        resid = X[1:] - X[0] - np.cumsum(incr, axis=0)
        scale = np.max(np.abs(X), axis=(0, 1))
        worst = max(worst, float(np.max(np.abs(resid).max(axis=(0, 1)) / scale)))
    return worst
