"""Sampled paths, their variation and Hölder seminorms, and greedy partitions.

All norms are computed exactly on the sample grid: the supremum runs over
sub-partitions made of grid points, which is a lower bound for the
seminorm of any continuous path through the samples.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError

# relative slack used when matching window endpoints to grid nodes
_GRID_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Values of a scalar, vector or matrix function on a strictly increasing grid.

    ``values`` has shape ``(n, rows, cols)``; scalars use ``(1, 1)`` and
    vectors ``(d, 1)``.
    """

    times: np.ndarray
    values: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1, 1)
        elif v.ndim == 2:
            v = v.reshape(v.shape[0], v.shape[1], 1)
        if v.ndim != 3:
            raise DomainError(f"values must be 1-, 2- or 3-dimensional, got {v.ndim}")
        if t.size < 2:
            raise DomainError("a path needs at least two grid points")
        if v.shape[0] != t.size:
            raise DomainError(f"{v.shape[0]} values for {t.size} grid points")
        if not np.all(np.diff(t) > 0):
            raise DomainError("grid times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DomainError("grid times and values must be finite")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_function(cls, f: Callable, times) -> "SampledPath":
        times = np.asarray(times, dtype=float)
        return cls(times, np.array([np.asarray(f(t), dtype=float) for t in times]))

    @classmethod
    def constant(cls, value, times) -> "SampledPath":
        times = np.asarray(times, dtype=float)
        v = np.asarray(value, dtype=float)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(-1, 1)
        return cls(times, np.broadcast_to(v, (times.size,) + v.shape))

    @classmethod
    def zeros(cls, times, shape=(1, 1)) -> "SampledPath":
        return cls.constant(np.zeros(shape), times)

    # -- basic accessors ----------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def flat(self) -> np.ndarray:
        """Values flattened row-major to shape (n, rows*cols)."""
        return self.values.reshape(self.n, -1)

    @property
    def scalar_values(self) -> np.ndarray:
        if self.shape != (1, 1):
            raise DomainError(f"path of shape {self.shape} is not scalar")
        return self.values[:, 0, 0]

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid node."""
        i = int(np.searchsorted(self.times, t))
        tol = _GRID_RTOL * max(1.0, abs(t))
        for j in (i - 1, i):
            if 0 <= j < self.n and abs(self.times[j] - t) <= tol:
                return j
        raise DomainError(f"time {t!r} is not a grid node of the path")

    def window_indices(self, window=None) -> tuple[int, int]:
        w = as_interval(window, self)
        return self.index_of(w.a), self.index_of(w.b)

    def at(self, t) -> np.ndarray:
        """Linear interpolation of the values at time(s) ``t`` inside the grid span."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.start - _GRID_RTOL) or np.any(t > self.end + _GRID_RTOL):
            raise DomainError("evaluation time outside the grid span")
        flat = self.flat
        out = np.stack([np.interp(t, self.times, flat[:, c]) for c in range(flat.shape[1])], axis=-1)
        return out.reshape(t.shape + self.shape)

    def resample(self, times) -> "SampledPath":
        times = np.asarray(times, dtype=float)
        return SampledPath(times, self.at(times))

    def restrict(self, window) -> "SampledPath":
        i, j = self.window_indices(window)
        if j <= i:
            raise DomainError("restriction to a degenerate window")
        return SampledPath(self.times[i : j + 1], self.values[i : j + 1])

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "SampledPath":
        """Apply ``f`` to the stacked values array (n, rows, cols)."""
        return SampledPath(self.times, f(self.values))

    def __add__(self, other: "SampledPath") -> "SampledPath":
        _same_grid(self, other)
        return SampledPath(self.times, self.values + other.values)

    def __sub__(self, other: "SampledPath") -> "SampledPath":
        _same_grid(self, other)
        return SampledPath(self.times, self.values - other.values)

    def scaled(self, c: float) -> "SampledPath":
        return SampledPath(self.times, c * self.values)

    def transpose(self) -> "SampledPath":
        return SampledPath(self.times, np.swapaxes(self.values, 1, 2))

    def sup_norm(self, window=None) -> float:
        i, j = self.window_indices(window)
        return float(np.max(np.linalg.norm(self.flat[i : j + 1], axis=1)))

    def _cached(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache[key] = value
        return value


def _same_grid(x: SampledPath, y: SampledPath):
    if x.n != y.n or not np.allclose(x.times, y.times, rtol=0, atol=1e-12):
        raise DomainError("paths do not share a grid")


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise DomainError(f"interval endpoints out of order: [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a


def as_interval(window, path: SampledPath | None = None) -> Interval:
    if window is None:
        if path is None:
            raise DomainError("a window is required")
        return Interval(path.start, path.end)
    if isinstance(window, Interval):
        w = window
    else:
        a, b = window
        w = Interval(float(a), float(b))
    if path is not None:
        tol = _GRID_RTOL * max(1.0, abs(path.start), abs(path.end))
        if w.a < path.start - tol or w.b > path.end + tol:
            raise DomainError(f"window [{w.a}, {w.b}] outside grid span [{path.start}, {path.end}]")
    return w


# -- seminorms ------------------------------------------------------------------


def p_variation_seminorm(path: SampledPath, p: float, window=None) -> float:
    """Grid p-variation seminorm of ``path`` over ``window``.

    Exact maximum over all partitions built from grid points, computed by
    dynamic programming over the sample points.
    """
    if not p >= 1:
        raise DomainError(f"p-variation needs p >= 1, got {p}")
    i, j = path.window_indices(window)
    if j <= i:
        return 0.0

    def compute():
        if path.shape == (1, 1):
            s = _kernels.pvar_scalar(np.ascontiguousarray(path.values[i : j + 1, 0, 0]), float(p))
        else:
            s = _kernels.pvar_prefix(np.ascontiguousarray(path.flat), float(p), i, j)[-1]
        return float(s ** (1.0 / p))

    return path._cached(("pvar", float(p), i, j), compute)


def p_variation_norm(path: SampledPath, p: float, window=None) -> float:
    """|x(a)| + |||x|||_{p-var,[a,b]}."""
    i, _ = path.window_indices(window)
    return float(np.linalg.norm(path.flat[i])) + p_variation_seminorm(path, p, window)


def holder_seminorm(path: SampledPath, alpha: float, window=None) -> float:
    if not 0 < alpha <= 1:
        raise DomainError(f"Hölder exponent must lie in (0, 1], got {alpha}")
    i, j = path.window_indices(window)
    if j <= i:
        return 0.0
    return float(_kernels.holder_sup(path.times, np.ascontiguousarray(path.flat), float(alpha), np.inf, i, j))


def holder_module(path: SampledPath, alpha: float, delta: float, window=None) -> float:
    """Sup of Hölder quotients over grid pairs at distance at most ``delta``."""
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not 0 < alpha <= 1:
        raise DomainError(f"Hölder exponent must lie in (0, 1], got {alpha}")
    i, j = path.window_indices(window)
    if j <= i:
        return 0.0
    delta_eff = float(delta) * (1 + 1e-12)
    return float(_kernels.holder_sup(path.times, np.ascontiguousarray(path.flat), float(alpha), delta_eff, i, j))


@dataclass(frozen=True)
class PrecompactnessReport:
    sup_start: float
    deltas: tuple
    module_sups: tuple

    def decreasing(self) -> bool:
        m = np.asarray(self.module_sups)
        return bool(np.all(np.diff(m) <= 1e-12))


def precompactness_check(family: Sequence[SampledPath], alpha: float, window, deltas) -> PrecompactnessReport:
    """Report the two quantities that decide relative compactness of a family.

    These are the sup of |c(a)| over the family and, for each delta, the sup
    of the Hölder module. Whether the module sequence decays is left to the
    caller.
    """
    if len(family) == 0:
        raise DomainError("empty family")
    shape = family[0].shape
    if any(c.shape != shape for c in family):
        raise DomainError("family members must share a value shape")
    w = as_interval(window, family[0])
    sup_start = max(float(np.linalg.norm(c.flat[c.index_of(w.a)])) for c in family)
    mods = tuple(max(holder_module(c, alpha, d, w) for c in family) for d in deltas)
    return PrecompactnessReport(sup_start, tuple(float(d) for d in deltas), mods)


# -- greedy partition -------------------------------------------------------------


@dataclass(frozen=True)
class GreedyPartition:
    """Greedy times tau_0 < tau_1 < ... covering a window.

    ``count`` is the number of taus in (a, b].
    """

    taus: np.ndarray
    indices: np.ndarray
    mu: float
    m_star: float
    p: float
    pvar_window: float

    @property
    def count(self) -> int:
        return int(self.taus.size - 1)

    def count_bound(self) -> float:
        """(2M*/mu)^p (T^p + |||omega|||^p) bounding count - 1."""
        T = float(self.taus[-1] - self.taus[0])
        return (2 * self.m_star / self.mu) ** self.p * (T**self.p + self.pvar_window**self.p)


def greedy_partition(omega: SampledPath, p: float, mu: float, m_star: float, window=None, tol: float = 1e-10) -> GreedyPartition:
    """Greedy times where elapsed time plus driver p-variation reaches mu/m_star.

    Each tau_k is the first grid node at which the nondecreasing function
    t -> (t - tau_{k-1}) + |||omega|||_{p-var,[tau_{k-1}, t]} reaches the
    budget, so the defining equality holds to within one grid cell. The
    last interval ends at the window end and may be slack.
    """
    if not m_star > 0:
        raise DomainError(f"m_star must be positive, got {m_star}")
    if not 0 < mu < min(1.0, m_star):
        raise DomainError(f"mu={mu} outside (0, min(1, M*)={min(1.0, m_star)})")
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    i0, i1 = omega.window_indices(window)
    budget = mu / m_star
    vals = np.ascontiguousarray(omega.flat)
    idx = [i0]
    cur = i0
    while cur < i1:
        cur = int(_kernels.greedy_next(omega.times, vals, cur, i1, float(p), budget, tol))
        idx.append(cur)
    idx = np.asarray(idx, dtype=np.int64)
    w = Interval(float(omega.times[i0]), float(omega.times[i1]))
    return GreedyPartition(
        taus=omega.times[idx].copy(),
        indices=idx,
        mu=float(mu),
        m_star=float(m_star),
        p=float(p),
        pvar_window=p_variation_seminorm(omega, p, w),
    )


# -- transforms -------------------------------------------------------------------


def insert_nodes(path: SampledPath, times) -> SampledPath:
    """Add grid nodes at ``times`` by linear interpolation (existing nodes kept)."""
    new = np.union1d(path.times, np.asarray(times, dtype=float))
    return path.resample(new)


def wiener_shift(path: SampledPath, r: float) -> SampledPath:
    """(theta_r omega)(t) = omega(t + r) - omega(r) on the translated grid."""
    if not path.start <= r < path.end:
        raise DomainError(f"shift {r} outside grid span [{path.start}, {path.end})")
    try:
        i = path.index_of(r)
        base = path
    except DomainError:
        base = insert_nodes(path, [r])
        i = base.index_of(r)
    return SampledPath(base.times[i:] - r, base.values[i:] - base.values[i])


def uniform_grid(a: float, b: float, per_unit: int) -> np.ndarray:
    """Grid on [a, b] with ``per_unit`` cells per unit time (rounded up)."""
    n = max(1, int(np.ceil(round((b - a) * per_unit, 9))))
    return np.linspace(a, b, n + 1)
