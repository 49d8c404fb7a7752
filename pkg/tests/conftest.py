import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from youngflow.paths import SampledPath, uniform_grid
from youngflow.stochastic import FbmSpec, fbm_sample

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    n = marker.args[0]
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    ok, first, count = _ACCEPTANCE.get(n, (True, doc, 0))
    _ACCEPTANCE[n] = (ok and call.excinfo is None, first, count + 1)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, doc, count = _ACCEPTANCE[n]
        more = f" [{count} tests]" if count > 1 else ""
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {doc}{more}")


@pytest.fixture(scope="session")
def fbm_unit():
    """fBm (H=0.7) on [0, 1] with 2^10 cells."""
    return fbm_sample(FbmSpec(hurst=0.7, dt=2.0**-10, horizon=1.0, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def linear_path(a=0.0, b=1.0, n=101, slope=1.0):
    t = np.linspace(a, b, n)
    return SampledPath(t, slope * t)


def fbm_on(horizon, per_unit=64, seed=0, hurst=0.7):
    return fbm_sample(FbmSpec(hurst=hurst, dt=1.0 / per_unit, horizon=horizon, seed=seed))


def grid(a, b, per_unit):
    return uniform_grid(a, b, per_unit)


def random_triangular(rng, d, times, gap=0.5, noise=0.2, diag_noise=None):
    """Regular upper-triangular system: diagonal means spaced >= gap apart, constant plus periodic.

    ``diag_noise`` scales the diagonal of C separately (default ``noise``); it
    sets the finite-horizon offset c_kk omega(T)/T of each exponent.
    """
    from youngflow.triangular import TriangularYDE

    means = np.cumsum(gap + rng.uniform(0, 0.5, d))
    means = means - means.mean()
    rng.shuffle(means)
    t = times[:, None]
    freqs = rng.uniform(0.5, 2.0, d)
    diag_a = means + 0.5 * np.sin(freqs * t + rng.uniform(0, 2 * np.pi, d))
    A = np.triu(np.broadcast_to(0.5 * rng.standard_normal((d, d)), (times.size, d, d)), 1).copy()
    A[:, np.arange(d), np.arange(d)] = diag_a
    z = rng.standard_normal((d, d))
    C0 = noise * z
    if diag_noise is not None:
        C0[np.diag_indices(d)] = diag_noise * np.diag(z)
    C = np.triu(np.broadcast_to(C0, (times.size, d, d))).copy()
    return TriangularYDE(SampledPath(times, A), SampledPath(times, C)), np.sort(means)[::-1]


def oscillating_mean(t):
    """1 on [2^k, 2^{k+1}) for even k, else 0: its running mean has no limit."""
    k = np.floor(np.log2(np.maximum(t, 1.0)))
    return np.where(k % 2 == 0, 1.0, 0.0)
