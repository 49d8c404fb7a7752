"""Lyapunov exponents, spectra and regularity of linear Young flows.

Spectra are read off the discrete-time flow Phi(t0, t0 + jh), built from
one-step matrices. Two estimators are provided: Benettin-style QR
re-orthonormalization, and singular values obtained from exterior powers
of the accumulated product.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DegeneracyError, DomainError
from .paths import SampledPath, p_variation_norm, p_variation_seminorm
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LinearYDE,
    _forward_products,
    check_mu,
    default_mu,
    liouville_log_det,
)

NEG_INF = float("-inf")
QR = "qr"
SVD = "svd"

# |R_kk| below this means the flow lost rank numerically
_R_FLOOR = 1e-300
_SVD_RENORM_EVERY = 10
_SVD_RENORM_CAP = 1e100


def chi(h: SampledPath, tail_fraction: float = 0.2) -> float:
    """Finite-horizon estimate of limsup (1/t) log|h(t)|.

    Takes the max of (1/t) log|h(t)| over the trailing ``tail_fraction``
    of the grid (only t > 0). Returns NEG_INF if h vanishes on the whole
    tail.
    """
    if not 0 < tail_fraction <= 1:
        raise DomainError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    t = h.times
    start = t[0] + (1 - tail_fraction) * (t[-1] - t[0])
    mask = (t >= start - 1e-12) & (t > 0)
    if not np.any(mask):
        raise DomainError("no positive times in the tail")
    norms = _row_norms(h.flat[mask])
    if not np.any(norms > 0):
        return NEG_INF
    with np.errstate(divide="ignore"):
        vals = np.log(norms) / t[mask]
    return float(np.max(vals))


def _row_norms(v: np.ndarray) -> np.ndarray:
    # rescaled so tiny or huge entries do not under/overflow when squared
    scale = np.max(np.abs(v), axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.linalg.norm(v / safe[:, None], axis=1)


def chi_sum(*values: float) -> float:
    """Exponent bound for a sum: the max (NEG_INF if all are NEG_INF)."""
    return max(values) if values else NEG_INF


def chi_product(*values: float) -> float:
    """Exponent bound for a product: the sum, with NEG_INF absorbing."""
    if any(v == NEG_INF for v in values):
        return NEG_INF
    return float(sum(values))


# -- spectrum ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentSeries:
    """Per-checkpoint sorted exponent estimates lambda_k(t) = (1/t) log sigma_k.

    ``times`` are elapsed times j*h since t0; ``logdet`` is (1/t) log|det Phi|.
    """

    times: np.ndarray
    lambdas: np.ndarray
    logdet: np.ndarray
    method: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.lambdas.shape[1]
        w.writerow(["t"] + [f"lambda_{k + 1}" for k in range(d)] + ["logdet"])
        for t, row, ld in zip(self.times, self.lambdas, self.logdet):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row] + [repr(float(ld))])
        return buf.getvalue()


@dataclass(frozen=True)
class SpectrumEstimate:
    """Final exponents lambda_1 >= ... >= lambda_d with tail diagnostics.

    ``flag_basis`` is orthonormal with columns ordered from most to least
    expanding initial direction; columns k..d (1-based) span the estimate
    of the Lyapunov subspace E_k.
    """

    lambdas: np.ndarray
    lambdas_max: np.ndarray
    tail_window: tuple
    dispersion: np.ndarray
    flag_basis: np.ndarray
    method: str

    def to_dict(self) -> dict:
        return {
            "lambdas": [float(x) for x in self.lambdas],
            "lambdas_tail_max": [float(x) for x in self.lambdas_max],
            "tail_window": [float(x) for x in self.tail_window],
            "dispersion": [float(x) for x in self.dispersion],
            "flag_basis": [[float(x) for x in row] for row in self.flag_basis],
            "method": self.method,
        }


def step_matrices(
    eq: LinearYDE,
    omega: SampledPath,
    t0: float,
    n_steps: int,
    h: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """One-step flows Phi(t0 + jh, t0 + (j+1)h) for j < n_steps, shape (n, d, d)."""
    out = np.empty((n_steps, eq.d, eq.d))
    eq = eq.on_grid(omega.times)
    for j in range(n_steps):
        X, _, _ = _forward_products(eq, omega, t0 + j * h, t0 + (j + 1) * h, tol, max_iter)
        out[j] = X[-1]
    return out


def _signed_qr(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(Z)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def _qr_logs(steps: np.ndarray) -> np.ndarray:
    n, d, _ = steps.shape
    Q = np.eye(d)
    acc = np.zeros(d)
    out = np.empty((n, d))
    for j in range(n):
        Q, R = _signed_qr(steps[j] @ Q)
        diag = np.abs(np.diag(R))
        if np.any(diag < _R_FLOOR):
            raise DegeneracyError(f"|R_kk| below {_R_FLOOR} at step {j}")
        acc += np.log(diag)
        out[j] = acc
    return out


def _compound_index(d: int, k: int) -> np.ndarray:
    return np.array(list(combinations(range(d), k)), dtype=np.int64).reshape(-1, k)


def compound(M: np.ndarray, k: int) -> np.ndarray:
    """k-th exterior power of M: the matrix of its k x k minors (lexicographic subsets)."""
    d = M.shape[0]
    idx = _compound_index(d, k)
    sub = M[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def _svd_logs(steps: np.ndarray) -> np.ndarray:
    # log ||wedge^k P||_2 = log(sigma_1 ... sigma_k), so differences give log sigma_k
    n, d, _ = steps.shape
    W = [np.eye(math.comb(d, k)) for k in range(1, d + 1)]
    scale = np.zeros(d)
    out = np.empty((n, d))
    for j in range(n):
        for k in range(1, d + 1):
            W[k - 1] = compound(steps[j], k) @ W[k - 1]
            nrm = np.linalg.norm(W[k - 1])
            if nrm == 0 or not np.isfinite(nrm):
                raise DegeneracyError(f"exterior power {k} degenerated at step {j}")
            if (j + 1) % _SVD_RENORM_EVERY == 0 or nrm > _SVD_RENORM_CAP or nrm < 1 / _SVD_RENORM_CAP:
                W[k - 1] /= nrm
                scale[k - 1] += math.log(nrm)
        cum = np.array([scale[k] + math.log(np.linalg.norm(W[k], 2)) for k in range(d)])
        out[j] = np.diff(np.concatenate([[0.0], cum]))
    return out


def flag_basis(steps: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose leading columns span the most expanding directions.

    QR-iterates the transposed one-step matrices from the last step back
    to the first, which orthonormalizes the rows of the accumulated flow.
    """
    d = steps.shape[1]
    Q = np.eye(d)
    for j in range(steps.shape[0] - 1, -1, -1):
        Q, _ = _signed_qr(steps[j].T @ Q)
    return Q


def _tail_slice(n: int, tail_fraction: float) -> slice:
    k = max(1, int(math.ceil(tail_fraction * n)))
    return slice(n - k, n)


def spectrum_from_steps(steps: np.ndarray, h: float, method: str = QR, tail_fraction: float = 0.2) -> tuple[ExponentSeries, SpectrumEstimate]:
    """Exponent series and tail estimate from stored one-step matrices."""
    method = method.lower()
    if method == QR:
        logs = _qr_logs(steps)
    elif method == SVD:
        logs = _svd_logs(steps)
    else:
        raise DomainError(f"unknown method {method!r}; use 'qr' or 'svd'")
    n = steps.shape[0]
    times = h * np.arange(1, n + 1)
    sign, dets = np.linalg.slogdet(steps)
    if np.any(sign == 0):
        raise DegeneracyError("a one-step flow is singular")
    logdet = np.cumsum(dets) / times
    lam = -np.sort(-logs, axis=1) / times[:, None]
    series = ExponentSeries(times, lam, logdet, method)
    tail = _tail_slice(n, tail_fraction)
    est = SpectrumEstimate(
        lambdas=lam[tail].mean(axis=0),
        lambdas_max=lam[tail].max(axis=0),
        tail_window=(float(times[tail][0]), float(times[tail][-1])),
        dispersion=lam[tail].std(axis=0),
        flag_basis=flag_basis(steps),
        method=method,
    )
    return series, est


def discrete_spectrum(
    eq: LinearYDE,
    omega: SampledPath,
    t0: float,
    horizon: float,
    h: float = 1.0,
    method: str = QR,
    tail_fraction: float = 0.2,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[ExponentSeries, SpectrumEstimate]:
    """Lyapunov spectrum of the flow sampled at t0 + jh, j = 1..horizon/h."""
    if not h > 0:
        raise DomainError(f"step h must be positive, got {h}")
    n = int(round(horizon / h))
    if abs(n * h - horizon) > 1e-9 * max(1.0, horizon):
        raise DomainError(f"horizon {horizon} is not a multiple of h={h}")
    if n < 10:
        raise DomainError(f"horizon/h must be at least 10, got {n}")
    steps = step_matrices(eq, omega, t0, n, h, tol, max_iter)
    return spectrum_from_steps(steps, h, method, tail_fraction)


# -- explicit bounds ---------------------------------------------------------------


def c_hat(eq: LinearYDE, delta: float = 1.0, stride: float | None = None, window=None) -> float:
    """sup of ||C||_{q-var,[s,s+delta]} over a lattice of window starts."""
    C = eq.C
    a = C.start if window is None else float(window[0])
    b = C.end if window is None else float(window[1])
    stride = delta / 8 if stride is None else stride
    best = 0.0
    s = a
    while True:
        e = min(s + delta, b)
        i, j = _nearest(C.times, s), _nearest(C.times, e)
        if j > i:
            w = (C.times[i], C.times[j])
            best = max(best, p_variation_norm(C, eq.params.q, w))
        if e >= b:
            break
        s += stride
    return best


def _nearest(times: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(times - t)))


def m_zero(eq: LinearYDE, delta: float = 1.0, stride: float | None = None, window=None) -> float:
    """max(A_hat, 2K C_hat) with A_hat the sup of |A| over the sampled span."""
    if window is None:
        a_hat = eq.A.sup_norm()
    else:
        i, j = _nearest(eq.A.times, window[0]), _nearest(eq.A.times, window[1])
        a_hat = float(np.max(np.linalg.norm(eq.A.flat[i : j + 1], axis=1)))
    return max(a_hat, 2 * eq.params.K * c_hat(eq, delta, stride, window))


def exponent_bound_value(m0: float, p: float, gamma_p: float, mu: float | None = None) -> float:
    """eta [2 + (2 M0 / mu)^p (1 + Gamma_p)] with eta = -log(1 - mu)."""
    if gamma_p < 0:
        raise DomainError(f"gamma_p must be nonnegative, got {gamma_p}")
    if m0 == 0:
        return 0.0
    mu = default_mu(m0) if mu is None else mu
    check_mu(mu, m0)
    eta = -math.log1p(-mu)
    return eta * (2 + (2 * m0 / mu) ** p * (1 + gamma_p))


def exponent_bound(eq: LinearYDE, gamma_p: float, mu: float | None = None, delta: float = 1.0, stride: float | None = None, window=None) -> float:
    """Closed-form bound on every |lambda_k| given the driver statistic Gamma_p."""
    return exponent_bound_value(m_zero(eq, delta, stride, window), eq.params.p, gamma_p, mu)


# -- regularity --------------------------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    sum_lambda: float
    det_liminf: float
    sigma: float
    perron_defects: np.ndarray
    forward: np.ndarray
    adjoint: np.ndarray
    threshold: float
    regular: bool

    def to_dict(self) -> dict:
        return {
            "sum_lambda": self.sum_lambda,
            "det_liminf": self.det_liminf,
            "sigma": self.sigma,
            "perron_defects": [float(x) for x in self.perron_defects],
            "forward_lambdas": [float(x) for x in self.forward],
            "adjoint_lambdas": [float(x) for x in self.adjoint],
            "threshold": self.threshold,
            "regular": self.regular,
        }


def liouville_series(eq: LinearYDE, omega: SampledPath, t0: float, horizon: float, h: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Checkpoint times jh and (1/t) int (tr A ds + tr C d omega) from t0."""
    n = int(round(horizon / h))
    times = h * np.arange(1, n + 1)
    vals = np.array([liouville_log_det(eq, omega, t0, t0 + t) for t in times]) / times
    return times, vals


def nonregularity(
    eq: LinearYDE,
    omega: SampledPath,
    t0: float,
    horizon: float,
    h: float = 1.0,
    method: str = QR,
    tail_fraction: float = 0.2,
    threshold: float | None = None,
    tol: float = DEFAULT_TOL,
) -> RegularityReport:
    """Nonregularity coefficient and Perron defects of the forward/adjoint pair.

    sigma = sum of final exponents - tail min of (1/t) log|det Phi| via the
    Liouville formula. Forward exponents are sorted decreasing and adjoint
    ones increasing before forming alpha_i + beta_i.
    """
    _, fwd = discrete_spectrum(eq, omega, t0, horizon, h, method, tail_fraction, tol)
    _, adj = discrete_spectrum(eq.adjoint(), omega, t0, horizon, h, method, tail_fraction, tol)
    alpha = np.sort(fwd.lambdas)[::-1]
    beta = np.sort(adj.lambdas)
    times, ld = liouville_series(eq, omega, t0, horizon, h)
    tail = _tail_slice(times.size, tail_fraction)
    det_liminf = float(np.min(ld[tail]))
    sum_lambda = float(np.sum(alpha))
    sigma = sum_lambda - det_liminf
    threshold = 0.05 * eq.d if threshold is None else threshold
    return RegularityReport(
        sum_lambda=sum_lambda,
        det_liminf=det_liminf,
        sigma=sigma,
        perron_defects=alpha + beta,
        forward=alpha,
        adjoint=beta,
        threshold=float(threshold),
        regular=bool(sigma <= threshold),
    )


# -- exponent arithmetic -----------------------------------------------------------


@dataclass(frozen=True)
class ArithmeticReport:
    chi_sum: float
    chi_product: float
    max_lambda: float
    sum_lambda: float
    chi_seminorms: tuple
    sum_ok: bool
    product_ok: bool
    seminorm_ok: bool

    @property
    def ok(self) -> bool:
        return self.sum_ok and self.product_ok and self.seminorm_ok


def seminorm_series(g: SampledPath, q: float) -> SampledPath:
    """n -> |||g|||_{q-var,[n,n+1]} at n = 1, 2, ... inside the span."""
    ns = np.arange(math.ceil(g.start), math.floor(g.end))
    vals = []
    times = []
    for n in ns:
        if n + 1 > g.end or n <= 0:
            continue
        vals.append(p_variation_seminorm(g, q, (float(n), float(n + 1))))
        times.append(float(n))
    return SampledPath(np.asarray(times), np.asarray(vals))


def exponent_arithmetic_check(
    paths: Sequence[SampledPath],
    lambdas: Sequence[float],
    q: float = 2.0,
    tail_fraction: float = 0.2,
    tol: float = 0.05,
) -> ArithmeticReport:
    """Check chi(sum g_i) <= max lambda_i and chi(prod g_i) <= sum lambda_i on the tails.

    The seminorm version checks chi(n -> |||g_i|||_{q-var,[n,n+1]}) <= lambda_i.
    Unit-window seminorms need integer grid nodes.
    """
    if len(paths) != len(lambdas) or not paths:
        raise DomainError("need one exponent per path and at least one path")
    total = paths[0]
    prod = paths[0]
    for g in paths[1:]:
        total = total + g
        prod = prod.map(lambda v, g=g: v * g.values)
    c_sum = chi(total, tail_fraction)
    c_prod = chi(prod, tail_fraction)
    semis = tuple(chi(seminorm_series(g, q), tail_fraction) for g in paths)
    mx = chi_sum(*lambdas)
    sm = chi_product(*lambdas)
    return ArithmeticReport(
        chi_sum=c_sum,
        chi_product=c_prod,
        max_lambda=mx,
        sum_lambda=sm,
        chi_seminorms=semis,
        sum_ok=bool(c_sum <= mx + tol),
        product_ok=bool(c_prod <= sm + tol),
        seminorm_ok=all(s <= lam + tol for s, lam in zip(semis, lambdas)),
    )
