"""Young integration by left-point Riemann-Stieltjes sums."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .paths import SampledPath, _same_grid


@dataclass(frozen=True)
class YoungParams:
    """Variation orders of the integrator (p) and integrand (q).

    theta = 1/p + 1/q > 1 makes the Young integral well defined and
    K = (1 - 2^{1-theta})^{-1} is the Young-Loeve constant.
    """

    p: float = 1.5
    q: float = 2.0
    theta: float = field(init=False)
    K: float = field(init=False)

    def __post_init__(self):
        if not 1 < self.p < 2:
            raise DomainError(f"p must lie in (1, 2), got {self.p}")
        if not self.q > self.p:
            raise DomainError(f"q must exceed p, got q={self.q}, p={self.p}")
        theta = 1.0 / self.p + 1.0 / self.q
        if not theta > 1:
            raise DomainError(f"1/p + 1/q must exceed 1, got {theta}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "K", 1.0 / (1.0 - 2.0 ** (1.0 - theta)))


def _check_shapes(x: SampledPath, omega: SampledPath) -> tuple:
    _same_grid(x, omega)
    xr, xc = x.shape
    wr, wc = omega.shape
    if (xr, xc) == (1, 1) or (wr, wc) == (1, 1):
        return None
    if xc != wr:
        raise DomainError(f"cannot left-multiply shape {x.shape} by increments of shape {omega.shape}")
    return (xr, wc)


def _increment_products(x: SampledPath, omega: SampledPath, i: int, j: int) -> np.ndarray:
    _check_shapes(x, omega)
    dw = np.diff(omega.values[i : j + 1], axis=0)
    xl = x.values[i:j]
    if x.shape == (1, 1):
        return xl[:, 0, 0, None, None] * dw
    if omega.shape == (1, 1):
        return xl * dw[:, 0, 0, None, None]
    return np.matmul(xl, dw)


def young_integral(x: SampledPath, omega: SampledPath, window=None) -> np.ndarray:
    """Left-point sum of x(t_i)(omega(t_{i+1}) - omega(t_i)) over the grid in ``window``.

    Scalar integrands scale the integrator; otherwise the product is
    the matrix product x @ d(omega).
    """
    i, j = omega.window_indices(window)
    prods = _increment_products(x, omega, i, j)
    if prods.shape[0] == 0:
        return np.zeros(_result_shape(x, omega))
    return prods.sum(axis=0)


def young_integral_path(x: SampledPath, omega: SampledPath, window=None) -> SampledPath:
    """Running integral t -> int_a^t x d(omega) on the grid nodes of ``window``."""
    i, j = omega.window_indices(window)
    if j <= i:
        raise DomainError("running integral needs a nondegenerate window")
    prods = _increment_products(x, omega, i, j)
    out = np.zeros((j - i + 1,) + prods.shape[1:])
    np.cumsum(prods, axis=0, out=out[1:])
    return SampledPath(omega.times[i : j + 1], out)


def _result_shape(x: SampledPath, omega: SampledPath) -> tuple:
    shape = _check_shapes(x, omega)
    if shape is not None:
        return shape
    return omega.shape if x.shape == (1, 1) else x.shape


def young_loeve_defect_bound(x_qvar: float, omega_pvar: float, params: YoungParams) -> float:
    """K |||x|||_q |||omega|||_p, bounding |int_s^t x d(omega) - x(s)(omega(t)-omega(s))|."""
    if x_qvar < 0 or omega_pvar < 0:
        raise DomainError("seminorms must be nonnegative")
    return params.K * x_qvar * omega_pvar


def merge_grids(x: SampledPath, omega: SampledPath) -> tuple[SampledPath, SampledPath]:
    """Bring x and omega onto the union of their grids.

    The integrand is linearly interpolated; the integrator keeps its nodes
    and is interpolated only at the extra nodes, so every original
    increment is preserved as a sum of sub-increments. Only the
    overlapping span is retained.
    """
    a = max(x.start, omega.start)
    b = min(x.end, omega.end)
    if not a < b:
        raise DomainError("paths have no overlapping span")
    grid = np.union1d(x.times, omega.times)
    grid = grid[(grid >= a) & (grid <= b)]
    return x.resample(grid), omega.resample(grid)
