import math

import numpy as np
import pytest
from scipy import integrate, stats

from zeta_arclen import riemann_core as rc
from zeta_arclen import special_fn as sf
from zeta_arclen import stochastic_model as sm
from zeta_arclen.window import DomainError, EvalWindow

P_GRID = [1e2, 1e3, 1e4, 1e5, 1e6]


def _w(P, U=1.0):
    return EvalWindow.from_truncation(P, U)


@pytest.fixture(scope="module")
def w100():
    return _w(100.0)


@pytest.fixture(scope="module")
def w200():
    return EvalWindow(1e6, 1.0, P=200.0)


@pytest.fixture(scope="module")
def phase_block_1e5(w100):
    return sm._phase_block(w100, sm.McConfig(100_000, master_seed=5), 0, 100_000)


@pytest.fixture(scope="module")
def samples(w100):
    return sm.phi1_samples(w100.T, w100, sm.McConfig(200_000, master_seed=7))


def _within_3_sigma(values, mean, variance):
    values = np.asarray(values)
    est = sm.McEstimate.from_values(values)
    assert abs(est.mean - mean) <= 3 * est.std_error
    assert abs(est.variance - variance) <= 3 * sm.variance_std_error(values)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"sample_count": 1},
        {"sample_count": 10, "batch_size": 0},
        {"sample_count": 10, "workers": 0},
        {"sample_count": 10, "master_seed": -1},
        {"sample_count": 10, "master_seed": 2**64},
    ])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            sm.McConfig(**kw)

    def test_estimate_invariants(self):
        est = sm.McEstimate.from_values(np.array([1.0, 2.0, 4.0]))
        assert est.variance >= 0
        assert est.std_error == math.sqrt(est.variance / est.count)


class TestPhases:
    def test_deterministic(self, w100):
        cfg = sm.McConfig(10, master_seed=42)
        a, b = sm.sample_phases(w100, cfg, 3), sm.sample_phases(w100, cfg, 3)
        assert a.seed_path == (42, 3)
        assert np.array_equal(a.phases, b.phases)

    def test_shape_and_range(self, w100):
        s = sm.sample_phases(w100, sm.McConfig(10), 0)
        assert s.phases.shape == (99,)
        assert np.all((s.phases >= -math.pi) & (s.phases <= math.pi))

    def test_index_bounds(self, w100):
        with pytest.raises(DomainError):
            sm.sample_phases(w100, sm.McConfig(10), 10)

    def test_uniform_moments(self, phase_block_1e5):
        _within_3_sigma(phase_block_1e5[:, 1], 0.0, math.pi**2 / 3)

    def test_independent_across_indices(self, phase_block_1e5):
        # 1e4 pairs (2k, 2k+1) of full phase vectors
        a = phase_block_1e5[0:20_000:2].ravel()
        b = phase_block_1e5[1:20_000:2].ravel()
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01

    def test_independent_of_batch_layout(self, w100):
        cfg = sm.McConfig(50, master_seed=9)
        block = sm._phase_block(w100, cfg, 10, 20)
        assert np.array_equal(block[4], sm.sample_phases(w100, cfg, 14).phases)


class TestPhi1:
    def test_zero_phases_give_z1(self, w100):
        rng = np.random.default_rng(3)
        t = w100.T + w100.U * rng.random(100)
        zero = sm.PhaseSample(np.zeros(w100.n_terms), (0, 0))
        a, b = sm.phi1(t, zero, w100), rc.z1(t, w100)
        scale = np.sum(np.abs(rc._terms(w100.P).amp_z1))
        assert np.max(np.abs(a - b)) <= 1e-12 * scale
        assert sm.phi1(float(t[0]), zero, w100) == pytest.approx(float(b[0]), rel=1e-12, abs=1e-12 * scale)

    def test_triangle_bound(self, w100):
        bound = np.sum(rc._terms(w100.P).amp_z1)
        t = np.linspace(w100.T, w100.end, 101)
        for i in range(20):
            s = sm.sample_phases(w100, sm.McConfig(20), i)
            assert np.all(np.abs(sm.phi1(t, s, w100)) <= bound)

    def test_length_mismatch(self, w100):
        with pytest.raises(DomainError):
            sm.phi1(w100.T, sm.PhaseSample(np.zeros(5), (0, 0)), w100)

    def test_outside_window(self, w100):
        s = sm.sample_phases(w100, sm.McConfig(2), 0)
        with pytest.raises(DomainError):
            sm.phi1(w100.end + 1.0, s, w100)

    def test_samples_match_single_evaluation(self, w100):
        cfg = sm.McConfig(5, master_seed=11)
        batch = sm.phi1_samples(w100.T, w100, cfg)
        single = [sm.phi1(w100.T, sm.sample_phases(w100, cfg, i), w100) for i in range(5)]
        assert batch == pytest.approx(single, rel=1e-13, abs=1e-12)


class TestPerTerm:
    @pytest.mark.parametrize("col", [0, 9, 60])
    def test_single_term_moments(self, w100, phase_block_1e5, col):
        n = col + 1
        t = w100.T
        base = rc.phases(t, w100)[0][col] + math.pi / 2
        x = 2 / math.sqrt(n) * math.log(w100.P / n) * np.cos(base + phase_block_1e5[:, col])
        _within_3_sigma(x, 0.0, 2 / n * math.log(w100.P / n) ** 2)


class TestMcMoments:
    def test_mean_zero(self, samples):
        est = sm.McEstimate.from_values(samples)
        assert abs(est.mean) <= 3 * est.std_error

    def test_variance_matches_exact(self, w100, samples):
        est = sm.McEstimate.from_values(samples)
        assert abs(est.variance - sm.variance_exact(w100)) <= 3 * sm.variance_std_error(samples)

    def test_regression_pair(self, w100):
        est = sm.mc_moments(w100.T, w100, sm.McConfig(2, master_seed=12345))
        pair = [10.348256124141917, -11.1980034566849]
        assert est.count == 2
        assert est.mean == math.fsum(pair) / 2
        assert est.variance == math.fsum((v - est.mean) ** 2 for v in pair)

    def test_rejects_single_sample(self, w100):
        with pytest.raises(DomainError):
            sm.mc_moments(w100.T, w100, sm.McConfig(1))

    @pytest.mark.parametrize("workers,batch", [(1, 7), (3, 64), (4, 4096)])
    def test_bit_identical_across_layout(self, w100, workers, batch):
        ref = sm.phi1_samples(w100.T, w100, sm.McConfig(500, master_seed=3))
        got = sm.phi1_samples(w100.T, w100, sm.McConfig(500, master_seed=3, batch_size=batch, workers=workers))
        assert ref.tobytes() == got.tobytes()
        assert sm.McEstimate.from_values(ref) == sm.McEstimate.from_values(got)


class TestVariance:
    def test_P2(self):
        assert sm.variance_exact(_w(2.0)) == pytest.approx(2 * math.log(2) ** 2, rel=1e-15)
        assert sm.variance_exact(_w(2.0)) == pytest.approx(0.960906, abs=1e-6)

    def test_P4(self):
        L2 = math.log(2)
        expected = 2 * (math.log(4) ** 2 + 0.5 * L2**2 + math.log(4 / 3) ** 2 / 3)
        assert sm.variance_exact(_w(4.0)) == pytest.approx(expected, rel=1e-14)
        assert sm.variance_exact(_w(4.0)) == pytest.approx(4.37925, abs=1e-5)

    def test_P1e4_ratio(self):
        r4 = sm.variance_exact(_w(1e4)) / sm.variance_asymptotic(_w(1e4))
        r2 = sm.variance_exact(_w(1e2)) / sm.variance_asymptotic(_w(1e2))
        assert abs(r4 - 1) <= 0.10
        assert abs(r4 - 1) < abs(r2 - 1)

    def test_asymptotic(self):
        assert sm.variance_asymptotic(_w(math.e)) == pytest.approx(2 / 3, rel=1e-15)
        assert sm.variance_asymptotic(_w(math.exp(10))) == pytest.approx(2000 / 3, rel=1e-14)

    def test_second_order_remainder(self):
        cs = []
        for P in [1e2, 1e3, 1e4, 1e5]:
            w = _w(P)
            cs.append(abs(sm.variance_exact(w) - sm.variance_asymptotic(w)) / w.log_P**2)
        C = max(cs)
        # one constant covers the grid and the normalized remainder is not drifting
        assert C < 2.0
        assert min(cs) / C > 0.8

    def test_ratio_tends_to_one(self):
        gaps = [abs(sm.variance_exact(_w(P)) / sm.variance_asymptotic(_w(P)) - 1) for P in P_GRID]
        inversions = sum(b > a for a, b in zip(gaps, gaps[1:]))
        assert inversions <= 1


class TestThirdMoment:
    def test_abs_cos_cubed_mean(self):
        oracle = integrate.quad(lambda x: abs(math.cos(x)) ** 3, -math.pi, math.pi, points=[-math.pi / 2, math.pi / 2])[0]
        assert sm.ABS_COS_CUBED_MEAN == pytest.approx(oracle / (2 * math.pi), rel=1e-12)

    def test_P2(self):
        value = sm.third_moment_sum(_w(2.0))
        assert value == pytest.approx(32 / (3 * math.pi) * math.log(2) ** 3, rel=1e-14)
        assert value == pytest.approx(1.1305, abs=5e-4)

    @pytest.mark.parametrize("P", [2.5, 10.0, 1e3, 1e5])
    def test_below_bound(self, P):
        assert sm.third_moment_sum(_w(P)) < sm.third_moment_bound(_w(P))

    @pytest.mark.parametrize("P", [10.0, 1e3, 1e5])
    def test_below_zeta_cap(self, P):
        A = 8 * math.fsum(np.arange(1, 2_000_001, dtype=float) ** -1.5)
        w = _w(P)
        assert sm.third_moment_sum(w) < A * w.log_P**3


class TestLyapunov:
    def test_P2(self):
        w = _w(2.0)
        expected = sm.third_moment_sum(w) / sm.variance_exact(w) ** 1.5
        assert sm.lyapunov_ratio(w) == expected
        assert sm.lyapunov_ratio(w) == pytest.approx(1.200, abs=1e-3)

    def test_doubling_grid_decreasing(self):
        ratios = [sm.lyapunov_ratio(_w(100.0 * 2**k)) for k in range(8)]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert sm.lyapunov_ratio(_w(1e4)) < sm.lyapunov_ratio(_w(1e2))

    def test_rate(self):
        scaled = [sm.lyapunov_ratio(_w(P)) * _w(P).log_P**1.5 for P in P_GRID]
        assert max(scaled) < 20.0

    def test_decreasing_and_small_at_1e6(self):
        ratios = [sm.lyapunov_ratio(_w(P)) for P in P_GRID]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] < 0.2


class TestDistribution:
    def test_ks_at_P200(self, w200):
        assert sm.distribution_check(w200.T, w200, sm.McConfig(10_000, master_seed=1)) <= sm.KS_THRESHOLD

    def test_both_checkpoints(self, w200):
        cfg = sm.McConfig(10_000, master_seed=1)
        for t in (w200.T, w200.T + w200.U / 2):
            assert sm.distribution_check(t, w200, cfg) <= sm.KS_THRESHOLD

    def test_half_variance_rejected(self, w200):
        cfg = sm.McConfig(10_000, master_seed=1)
        d = sm.distribution_check(w200.T, w200, cfg, variance=sm.variance_exact(w200) / 2)
        assert d > 0.1

    def test_half_variance_discriminated(self, w200):
        # population distance between N(0, s^2) and N(0, s^2/2)
        x = np.linspace(0, 6, 600_001)
        population = np.max(stats.norm.cdf(math.sqrt(2) * x) - stats.norm.cdf(x))  # 0.0830
        cfg = sm.McConfig(10_000, master_seed=1)
        right = sm.distribution_check(w200.T, w200, cfg)
        wrong = sm.distribution_check(w200.T, w200, cfg, variance=sm.variance_exact(w200) / 2)
        assert wrong > population > 3 * right

    def test_sample_size_trend(self, w200):
        ks = [sm.distribution_check(w200.T, w200, sm.McConfig(n, master_seed=1)) for n in (1000, 4000, 16000)]
        assert sum(b > a for a, b in zip(ks, ks[1:])) <= 1
        assert ks[-1] < ks[0]

    def test_needs_1000_samples(self, w200):
        with pytest.raises(DomainError):
            sm.distribution_check(w200.T, w200, sm.McConfig(999))


class TestPhi2:
    def test_zero_series(self):
        w = EvalWindow(1e6, 0.75)
        est = sm.phi2_mc(w, sm.McConfig(8), scale=0.0)
        assert est.mean == 0.75
        assert est.variance == 0.0

    def test_at_least_U(self):
        w = EvalWindow(1e6, 0.5)
        values, failures = sm.phi2_values(w, sm.McConfig(16, master_seed=2))
        assert failures == 0
        assert np.all(values >= w.U)

    def test_matches_deterministic_quadrature(self):
        w = EvalWindow(1e6, 0.25)
        cfg = sm.McConfig(3, master_seed=4)
        values, _ = sm.phi2_values(w, cfg)
        s = sm.sample_phases(w, cfg, 1)
        direct = integrate.quad(lambda t: math.sqrt(1 + sm.phi1(t, s, w) ** 2), w.T, w.end,
                                epsabs=1e-9, epsrel=1e-12, limit=500)[0]
        assert values[1] == pytest.approx(direct, abs=1e-6)

    def test_bit_identical_across_workers(self):
        w = EvalWindow(1e6, 0.5)
        a, _ = sm.phi2_values(w, sm.McConfig(12, master_seed=6, batch_size=5))
        b, _ = sm.phi2_values(w, sm.McConfig(12, master_seed=6, batch_size=2, workers=4))
        assert a.tobytes() == b.tobytes()

    def test_failures_abort(self):
        w = EvalWindow(1e6, 0.5)
        with pytest.raises(sm.QuadratureError):
            sm.phi2_mc(w, sm.McConfig(4), max_depth=0, tol=1e-30)

    @pytest.mark.slow
    def test_agreement_with_closed_form_recorded(self):
        w = EvalWindow(1e6, 1.0)
        est = sm.phi2_mc(w, sm.McConfig(200, master_seed=1, workers=4))
        closed = sf.e_inf_phi2(w)
        z = (est.mean - closed) / est.std_error
        print(f"phi2 MC {est.mean:.4f} +- {est.std_error:.4f}, closed form {closed:.4f}, z = {z:.2f}, "
              f"var(phi2) = {est.variance:.4f}")
        assert est.failures == 0
        assert math.isfinite(z)
        assert est.mean > w.U
