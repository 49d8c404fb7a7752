import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fbm_on, linear_path
from youngflow.errors import DomainError
from youngflow.paths import SampledPath, p_variation_seminorm
from youngflow.young import (
    YoungParams,
    merge_grids,
    young_integral,
    young_integral_path,
    young_loeve_defect_bound,
)


def weierstrass(t, alpha, levels=24, phase=0.0):
    """Hölder-alpha test function sum_k 2^{-k alpha} cos(2^k pi t + phase)."""
    k = np.arange(levels)[:, None]
    return np.sum(2.0 ** (-k * alpha) * np.cos(2.0**k * np.pi * t[None, :] + phase * (k + 1)), axis=0)


def refinement_rate(fx, fw, levels=range(6, 15)):
    vals = []
    for m in levels:
        t = np.linspace(0, 1, 2**m + 1)
        vals.append(young_integral(SampledPath(t, fx(t)), SampledPath(t, fw(t))).item())
    diffs = np.abs(np.diff(vals))
    mesh = 2.0 ** -np.array(list(levels))[:-1]
    return np.polyfit(np.log(mesh), np.log(diffs), 1)[0]


class TestParams:
    def test_constant(self):
        prm = YoungParams(1.5, 2.0)
        assert prm.theta == pytest.approx(7 / 6)
        assert prm.K == pytest.approx(1 / (1 - 2 ** (-1 / 6)), rel=1e-14)
        assert prm.K == pytest.approx(9.16580, abs=1e-5)

    @pytest.mark.parametrize("p, q", [(1.0, 2.0), (2.0, 3.0), (1.5, 1.4), (1.9, 30.0)])
    def test_invalid(self, p, q):
        with pytest.raises(DomainError):
            YoungParams(p, q)

    def test_defect_bound(self):
        prm = YoungParams(1.5, 2.0)
        assert young_loeve_defect_bound(0.0, 3.0, prm) == 0.0
        assert young_loeve_defect_bound(2.0, 3.0, prm) == pytest.approx(6 * prm.K)
        assert young_loeve_defect_bound(2.0, 3.0, prm) == pytest.approx(54.995, abs=1e-3)


class TestIntegral:
    def test_constant_integrand(self, fbm_unit):
        x = SampledPath.constant(2.5, fbm_unit.times)
        val = young_integral(x, fbm_unit, (0.25, 0.75)).item()
        d = fbm_unit.values[fbm_unit.index_of(0.75), 0, 0] - fbm_unit.values[fbm_unit.index_of(0.25), 0, 0]
        assert val == pytest.approx(2.5 * d, abs=1e-12)

    def test_t_dt(self):
        for m, tol in [(8, 3e-3), (12, 2e-4)]:
            w = linear_path(n=2**m + 1)
            assert young_integral(w, w).item() == pytest.approx(0.5, abs=tol)

    def test_grid_mismatch(self):
        with pytest.raises(DomainError):
            young_integral(linear_path(n=11), linear_path(n=21))

    def test_shapes(self):
        t = np.linspace(0, 1, 11)
        M = SampledPath.constant(np.eye(2), t)
        v = SampledPath(t, np.stack([t, t**2], axis=1))
        assert young_integral(M, v).shape == (2, 1)
        assert young_integral(SampledPath(t, t), v).shape == (2, 1)
        with pytest.raises(DomainError):
            young_integral(v, M)

    def test_running_integral(self, fbm_unit):
        one = SampledPath.constant(1.0, fbm_unit.times)
        run = young_integral_path(one, fbm_unit)
        np.testing.assert_allclose(run.scalar_values, fbm_unit.scalar_values - fbm_unit.scalar_values[0], atol=1e-12)
        assert run.scalar_values[0] == 0.0

    @given(st.integers(0, 1000), st.integers(1, 63), st.integers(1, 63))
    def test_additive(self, seed, i, j):
        w = fbm_on(1.0, seed=seed)
        x = SampledPath(w.times, np.cos(3 * w.times) + w.scalar_values)
        a, b = sorted((i / 64, j / 64))
        whole = young_integral(x, w).item()
        parts = young_integral(x, w, (0, a)).item() + young_integral(x, w, (a, b)).item() + young_integral(x, w, (b, 1)).item()
        assert whole == pytest.approx(parts, abs=1e-12)
        run = young_integral_path(x, w)
        assert run.scalar_values[w.index_of(b)] - run.scalar_values[w.index_of(a)] == pytest.approx(
            young_integral(x, w, (a, b)).item(), abs=1e-12
        )

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 100))
    def test_bilinear(self, alpha, beta, seed):
        w1 = fbm_on(1.0, seed=seed)
        w2 = fbm_on(1.0, seed=seed + 1)
        x1 = SampledPath(w1.times, np.sin(5 * w1.times))
        x2 = SampledPath(w1.times, w2.scalar_values)
        lhs = young_integral(x1.scaled(alpha) + x2.scaled(beta), w1).item()
        rhs = alpha * young_integral(x1, w1).item() + beta * young_integral(x2, w1).item()
        assert lhs == pytest.approx(rhs, abs=1e-10)
        lhs = young_integral(x1, w1.scaled(alpha) + w2.scaled(beta)).item()
        rhs = alpha * young_integral(x1, w1).item() + beta * young_integral(x1, w2).item()
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_integration_by_parts(self):
        f = lambda t: np.sin(3 * t) + t**2
        errs = []
        for m in (6, 8, 10, 12):
            t = np.linspace(0, 1, 2**m + 1)
            F = SampledPath(t, f(t))
            G = SampledPath(t, f(t) ** 2 + np.cos(t))
            total = young_integral(F, G).item() + young_integral(G, F).item()
            errs.append(abs(total - (F.scalar_values[-1] * G.scalar_values[-1] - F.scalar_values[0] * G.scalar_values[0])))
        # the defect is sum dF dG = O(mesh)
        assert errs[-1] < 8.0 / 2**12
        assert all(3.5 < a / b < 4.5 for a, b in zip(errs, errs[1:]))

    def test_omega_d_omega(self):
        # int w dw + int w dw -> w(1)^2 - w(0)^2 for a smooth sampled w
        w = lambda t: np.exp(t) - 2 * t
        for m in (10, 14):
            t = np.linspace(0, 1, 2**m + 1)
            W = SampledPath(t, w(t))
            val = 2 * young_integral(W, W).item()
            assert val == pytest.approx(w(1.0) ** 2 - w(0.0) ** 2, abs=4.0 / 2**m)


class TestMerge:
    def test_merge_preserves_integrator_increments(self):
        w = fbm_on(1.0, per_unit=64, seed=4)
        x = SampledPath(np.linspace(0, 1, 10), np.linspace(0, 1, 10) ** 2)
        xm, wm = merge_grids(x, w)
        assert wm.values[wm.index_of(0.5), 0, 0] == pytest.approx(w.values[w.index_of(0.5), 0, 0])
        assert wm.n >= w.n
        young_integral(xm, wm)


class TestYoungLoeve:
    @given(st.integers(0, 10_000))
    def test_bound_on_subintervals(self, seed):
        prm = YoungParams(1.5, 2.0)
        w = fbm_on(1.0, per_unit=256, seed=seed)
        rng = np.random.default_rng(seed)
        x = SampledPath(w.times, np.cos(2 * w.times) + 0.5 * fbm_on(1.0, per_unit=256, seed=seed + 7).scalar_values)
        for _ in range(5):
            i, j = sorted(rng.choice(w.n, size=2, replace=False))
            s, t = w.times[i], w.times[j]
            lhs = abs(young_integral(x, w, (s, t)).item() - x.scalar_values[i] * (w.scalar_values[j] - w.scalar_values[i]))
            rhs = young_loeve_defect_bound(p_variation_seminorm(x, 2.0, (s, t)), p_variation_seminorm(w, 1.5, (s, t)), prm)
            assert lhs <= rhs + 1e-12

    def test_rate_linear_integrator(self):
        beta = 0.6
        rate = refinement_rate(lambda t: weierstrass(t, beta), lambda t: t)
        assert rate >= beta - 0.2

    def test_rate_holder_pair(self):
        a_w, a_x = 0.7, 0.6
        prm = YoungParams(1 / a_w, 1 / a_x)
        rate = refinement_rate(lambda t: weierstrass(t, a_x, phase=0.3), lambda t: weierstrass(t, a_w, phase=1.1))
        assert rate >= prm.theta - 1 - 0.2
