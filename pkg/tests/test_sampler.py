import math

import numpy as np
import pytest

from gevrey_ibc import KernelParams, build_spectrum, kernel_value, mc_avg_error, trace
from gevrey_ibc.budget import Budget, BudgetExhausted
from gevrey_ibc.sampler import evaluate, optimal_truncation, sample_path

GEO = KernelParams(1, 0.5, 1, 1)
PLANE = KernelParams(1.5, 0.5, 1, 2)


class TestSamplePath:
    def test_reproducible(self):
        a = sample_path(PLANE, seed=3, trial=5)
        b = sample_path(PLANE, seed=3, trial=5)
        assert np.array_equal(a.coefficients, b.coefficients)
        assert not np.array_equal(a.coefficients, sample_path(PLANE, seed=3, trial=6).coefficients)
        assert not np.array_equal(a.coefficients, sample_path(PLANE, seed=4, trial=5).coefficients)

    def test_modes_ordered_and_closed_under_negation(self):
        path = sample_path(PLANE, tail_frac=1e-4)
        assert tuple(path.modes[0]) == (0, 0)
        assert np.all(np.diff(path.eigenvalues) <= 0)
        index = {tuple(k): i for i, k in enumerate(path.modes)}
        for k, a in zip(path.modes, path.coefficients):
            assert path.coefficients[index[tuple(-k)]] == np.conj(a)
        assert path.coefficients[0].imag == 0.0

    def test_excluded_tail_below_fraction(self):
        frac = 1e-5
        path = sample_path(PLANE, tail_frac=frac)
        t = trace(PLANE)
        assert path.excluded_tail <= frac * t.upper
        assert math.fsum(path.eigenvalues) + path.excluded_tail >= t.lower * (1 - 1e-13)

    def test_coefficient_variance_matches_eigenvalues(self):
        trials = 4000
        draws = np.array([sample_path(GEO, 1e-4, seed=1, trial=t).coefficients for t in range(trials)])
        lam = sample_path(GEO, 1e-4).eigenvalues
        second = np.mean(np.abs(draws) ** 2, axis=0)
        # |a_k|^2 / lambda_k is chi-square(2)/2 (chi-square(1) at the origin): relative sd <= 1/sqrt(trials / 2)
        sd = math.sqrt(2 / trials)
        assert np.all(np.abs(second / lam - 1) <= 5 * sd)

    def test_square_norm_mean_is_trace(self):
        trials = 3000
        norms = [sample_path(PLANE, 1e-6, seed=2, trial=t).square_norm() for t in range(trials)]
        mean = sum(norms) / trials
        se = np.std(norms, ddof=1) / math.sqrt(trials)
        assert abs(mean - trace(PLANE).mid) <= 4 * se

    def test_to_rows(self):
        rows = sample_path(GEO, 1e-2).to_rows()
        assert rows[0]["mode"] == (0,) and rows[0]["im"] == 0.0
        h = max(r["mode"][0] for r in rows)
        assert sorted(r["mode"] for r in rows) == [(k,) for k in range(-h, h + 1)]

    def test_budget(self):
        with pytest.raises(BudgetExhausted):
            sample_path(KernelParams(0.5, 0.5, 0.5, 3), 1e-8, budget=Budget(max_classes=20))

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_path(GEO, tail_frac=0)
        with pytest.raises(ValueError):
            sample_path(GEO, tail_frac=1)


class TestEvaluate:
    def test_constant_path(self):
        path = sample_path(PLANE, 1e-3)
        const = optimal_truncation(path, build_spectrum(PLANE, 1), 1)
        vals = evaluate(const, np.random.default_rng(0).uniform(0, 7, size=(5, 2)))
        assert np.allclose(vals, path.coefficients[0].real, rtol=0, atol=1e-15)

    def test_single_pair_is_cosine(self):
        path = sample_path(GEO, 1e-3, seed=9)
        spec = build_spectrum(GEO, 3)
        pair = optimal_truncation(path, spec, 3)
        a1 = pair.coefficients[list(map(tuple, pair.modes)).index((1,))]
        for x in (0.0, 0.4, 2.5):
            expected = pair.coefficients[0].real + 2 * (a1.real * math.cos(x) - a1.imag * math.sin(x))
            assert evaluate(pair, [x]) == pytest.approx(expected, abs=1e-13)

    def test_periodic(self):
        path = sample_path(PLANE, 1e-4, seed=1)
        x = np.array([0.3, 1.9])
        assert evaluate(path, x + [2 * math.pi, -4 * math.pi]) == pytest.approx(evaluate(path, x), abs=1e-10)

    def test_shape_checks(self):
        path = sample_path(PLANE, 1e-2)
        assert evaluate(path, np.zeros((4, 2))).shape == (4,)
        with pytest.raises(ValueError):
            evaluate(path, [0.0, 0.0, 0.0])

    def test_covariance_is_kernel(self):
        # the modal sum of the path equals K(x, y) up to the excluded tail
        path = sample_path(PLANE, 1e-8)
        x, y = np.array([0.2, 1.0]), np.array([2.0, -0.5])
        modal = math.fsum(path.eigenvalues * np.cos(path.modes @ (x - y)))
        kv = kernel_value(PLANE, x, y, trunc_tol=1e-12)
        assert abs(modal - kv.value) <= path.excluded_tail + kv.tail_bound + 1e-12

    def test_empirical_covariance(self):
        x, y = np.array([0.2, 1.0]), np.array([2.0, -0.5])
        prods = np.array([
            evaluate(p, x) * evaluate(p, y)
            for p in (sample_path(PLANE, 1e-6, seed=5, trial=t) for t in range(3000))
        ])
        target = kernel_value(PLANE, x, y).value
        assert abs(prods.mean() - target) <= 4 * prods.std(ddof=1) / math.sqrt(len(prods))


class TestTruncation:
    def test_residual_nonincreasing(self):
        spec = build_spectrum(PLANE, 40)
        path = sample_path(PLANE, 1e-6, seed=4)
        total = path.square_norm()
        kept = [optimal_truncation(path, spec, n).square_norm() for n in range(41)]
        residual = [total - k for k in kept]
        assert all(a >= b - 1e-15 for a, b in zip(residual, residual[1:]))
        assert kept[0] == 0.0

    def test_rejects_mismatched_inputs(self):
        path = sample_path(GEO, 1e-2)
        spec = build_spectrum(GEO, 5)
        with pytest.raises(ValueError):
            optimal_truncation(path, build_spectrum(PLANE, 5), 2)
        with pytest.raises(ValueError):
            optimal_truncation(path, spec, -1)


class TestMonteCarlo:
    def test_matches_library_paths(self):
        params = GEO
        est = mc_avg_error(params, 3, trials=200, seed=11, tail_frac=1e-6)
        manual = [
            math.fsum(np.abs(sample_path(params, 1e-6, seed=11, trial=t).coefficients[3:]) ** 2) for t in range(200)
        ]
        assert est.mean_sq_error == math.fsum(manual) / 200

    @pytest.mark.parametrize("n", [0, 1, 5, 20])
    def test_agrees_with_formula(self, n):
        est = mc_avg_error(PLANE, n, trials=4000, seed=1)
        assert est.consistent(4)
        lo, hi = est.formula_value
        assert lo <= hi

    def test_threads_do_not_change_estimate(self):
        a = mc_avg_error(PLANE, 5, trials=400, seed=2)
        b = mc_avg_error(PLANE, 5, trials=400, seed=2, threads=3)
        assert a.mean_sq_error == pytest.approx(b.mean_sq_error, rel=1e-15)
        assert a.std_error == pytest.approx(b.std_error, rel=1e-12)

    def test_large_n_grows_layout(self):
        est = mc_avg_error(GEO, 40, trials=100, tail_frac=1e-3)
        assert est.n == 40 and est.mean_sq_error >= 0

    def test_deviation_edge_cases(self):
        est = mc_avg_error(GEO, 0, trials=100)
        assert math.isfinite(est.deviation())
        row = est.as_row()
        assert row["trials"] == 100 and row["formula_lo"] <= row["formula_hi"]

    def test_validation(self):
        with pytest.raises(ValueError):
            mc_avg_error(GEO, 1, trials=10)
        with pytest.raises(ValueError):
            mc_avg_error(GEO, -1)
