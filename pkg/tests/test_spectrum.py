import csv
import io
import itertools
import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gevrey_ibc import KernelParams, brute_force_points, build_spectrum, power_trace, tail_bound, tail_sum, trace
from gevrey_ibc.budget import Budget, BudgetExhausted
from gevrey_ibc.spectrum import horizon_for_tail, level_counts, log_tail_bound

E = math.e


def factorized_trace(beta, p, d, dps=40):
    """(1 + 2 sum_{h>=1} exp(-2 beta h^p))^d by high-precision series summation."""
    with mp.workdps(dps):
        a = 1 + 2 * mp.nsum(lambda h: mp.exp(-2 * mp.mpf(beta) * h ** mp.mpf(p)), [1, mp.inf])
        return a**d


def exact_tail(params, horizon, tau=1.0):
    """sum of lambda^tau over lattice points with value >= horizon, by brute force in a box.

    The box holds every point whose term exceeds exp(-40) times the largest tail term.
    """
    d, p = params.d, params.p
    c = params.rate * tau
    g = params.alpha / p
    cap = ((c * horizon**g + 40.0) / c) ** (1.0 / g)
    radius = int(math.ceil(cap ** (1.0 / p))) + 1
    axis = np.abs(np.arange(-radius, radius + 1, dtype=np.float64)) ** p
    values = axis
    for _ in range(d - 1):
        values = np.add.outer(values, axis).ravel()
    values = values[values >= horizon]
    return math.fsum(np.exp(-c * values**g))


class TestBuildSpectrum:
    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.3])
    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_unit_vector_plateau(self, p, d):
        params = KernelParams(1.7, 0.6, p, d)
        spec = build_spectrum(params, 2 * d + 1, 1e-6)
        vals = spec.expanded(2 * d + 2)
        assert vals[0] == 1.0
        assert vals[1 : 2 * d + 1] == [math.exp(-1.2)] * (2 * d)
        assert spec.runs[0] == (1.0, 1)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    def test_one_dimensional_ladder(self, p):
        spec = build_spectrum(KernelParams(2, 1, p, 1), 9, 1e-12)
        expected = [(1.0, 1)] + [(math.exp(-2.0 * h * h), 2) for h in range(1, 5)]
        for (lam, m), (lam_ref, m_ref) in zip(spec.runs[:5], expected):
            assert m == m_ref
            # (h^p)^(alpha/p) equals h^alpha only up to rounding when p is fractional
            assert lam == pytest.approx(lam_ref, rel=1e-13)

    def test_square_lattice_third_run(self):
        spec = build_spectrum(KernelParams(2, 1, 2, 2), 10, 1e-8)
        assert spec.runs[2] == (math.exp(-4.0), 4)

    def test_tail_goal_met(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1.5, 3), 5, 1e-9)
        assert spec.complete
        assert 0 <= spec.tail_upper <= 1e-9 * spec.partial_sum
        assert spec.enumerated_count >= 5

    def test_min_count_met(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 2), 500, 1.0)
        assert spec.enumerated_count >= 500

    def test_runs_strictly_decreasing(self):
        spec = build_spectrum(KernelParams(1.2, 0.3, 0.7, 3), 1, 1e-8)
        eig = spec.eigenvalues
        assert all(a > b for a, b in zip(eig, eig[1:]) if b > 0)
        assert sum(spec.multiplicities) == spec.enumerated_count

    @pytest.mark.parametrize(
        "params",
        [KernelParams(1, 0.5, 1, 4), KernelParams(2, 1, 2, 6), KernelParams(0.7, 0.4, 1, 3), KernelParams(3, 0.2, 3, 3)],
    )
    def test_class_and_level_routes_agree_bitwise(self, params):
        a = build_spectrum(params, 1, 1e-10, method="classes")
        b = build_spectrum(params, 1, 1e-10, method="levels")
        n = min(len(a), len(b))
        assert a.runs[:n] == b.runs[:n]
        # the routes may stop at different horizons; each partial sum is within its own tail of the trace
        slack = a.tail_upper + b.tail_upper + 1e-14 * a.partial_sum
        assert abs(a.partial_sum - b.partial_sum) <= slack

    def test_level_counts_match_grid(self):
        from gevrey_ibc import grid_count

        for d in (1, 2, 3, 5):
            for p in (1, 2, 3):
                counts = level_counts(d, p, 20)
                running = list(itertools.accumulate(counts))
                for m in (0, 1, 4, 9, 20):
                    assert running[m] == grid_count(m, d, p)

    def test_level_route_needs_integer_p(self):
        with pytest.raises(ValueError):
            build_spectrum(KernelParams(1, 1, 0.5, 2), 1, 1e-3, method="levels")

    def test_invalid_arguments(self):
        params = KernelParams(1, 1, 1, 1)
        with pytest.raises(ValueError):
            build_spectrum(params, 0, 1e-3)
        with pytest.raises(ValueError):
            build_spectrum(params, 1, 0.0)
        with pytest.raises(ValueError):
            build_spectrum(params, 1, 1e-3, method="magic")

    def test_budget_returns_partial(self):
        spec = build_spectrum(KernelParams(0.5, 0.5, 0.5, 4), 1, 1e-12, budget=Budget(max_classes=200))
        assert not spec.complete
        assert spec.tail_upper > 1e-12 * spec.partial_sum

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_rearrangement_matches_brute_force(self, alpha, beta, p, d):
        params = KernelParams(alpha, beta, p, d)
        radius = 6
        brute = brute_force_points(params, radius)
        # every point outside the box has value >= (radius+1)^p, so the box covers all smaller values
        cover = (radius + 1) ** p
        covered = [lam for k, lam in brute if sum(abs(c) ** p for c in k) < cover * (1 - 1e-12)]
        n = min(200, len(covered))
        spec = build_spectrum(params, n, math.inf)
        assert spec.expanded(n) == covered[:n]

    def test_export_rows(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 1), 1, 1e-10)
        rows = spec.to_rows()
        assert rows[0] == {"eigenvalue": 1.0, "multiplicity": 1, "cumulative_count": 1, "cumulative_sum": 1.0}
        assert rows[-1]["cumulative_count"] == spec.enumerated_count
        assert rows[-1]["cumulative_sum"] == pytest.approx(spec.partial_sum, rel=1e-15)
        parsed = list(csv.DictReader(io.StringIO(spec.to_csv())))
        assert float(parsed[1]["eigenvalue"]) == rows[1]["eigenvalue"]
        blob = json.loads(spec.to_json())
        assert blob["runs"][2]["multiplicity"] == 2


class TestTailBound:
    @pytest.mark.parametrize(
        "alpha,beta,p,d,horizon",
        [
            (1, 0.5, 1, 1, 5),
            (2, 1, 2, 1, 4),
            (0.5, 0.5, 0.5, 1, 30),
            (1, 0.5, 2, 2, 9),
            (2, 0.5, 1, 2, 6),
            (0.5, 1, 1, 2, 20),
            (1, 1, 0.5, 2, 8),
            (1.5, 0.3, 2.5, 2, 7),
        ],
    )
    def test_bounds_true_tail(self, alpha, beta, p, d, horizon):
        params = KernelParams(alpha, beta, p, d)
        truth = exact_tail(params, horizon)
        bound = tail_bound(params, horizon)
        assert bound >= truth
        # and not absurdly loose
        assert bound <= 1e6 * truth + 1e-300

    def test_power_tail(self):
        params = KernelParams(1, 0.5, 1, 2)
        for tau in (0.3, 2.0):
            assert tail_bound(params, 6, tau) >= exact_tail(params, 6, tau)

    def test_zero_horizon_bounds_trace(self):
        params = KernelParams(2, 1, 2, 3)
        assert tail_bound(params, 0) >= float(factorized_trace(1, 2, 3))

    def test_decreasing_in_horizon(self):
        params = KernelParams(1, 0.5, 1.5, 3)
        vals = [log_tail_bound(params, v) for v in (1, 2, 4, 8, 16, 32)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    @settings(max_examples=30, deadline=None)
    @given(
        alpha=st.sampled_from([0.5, 1.0, 1.5, 2.0]),
        p=st.sampled_from([0.5, 1.0, 2.0]),
        d=st.integers(1, 8),
        goal=st.floats(1e-14, 1e-2),
    )
    def test_horizon_meets_goal(self, alpha, p, d, goal):
        params = KernelParams(alpha, 1.0, p, d)
        v = horizon_for_tail(params, 0.0, goal)
        assert tail_bound(params, v) <= goal * (1 + 1e-12)


class TestTrace:
    def test_geometric_one_dimensional(self):
        est = trace(KernelParams(1, 0.5, 1, 1), 1e-10)
        assert est.contains(1 + 2 / (E - 1))
        assert est.lower == pytest.approx(2.1639534137, abs=1e-9)

    def test_factorized_five_dimensional(self):
        est = trace(KernelParams(2, 1, 2, 5), 1e-10)
        a = 1 + 2 * sum(math.exp(-2 * h * h) for h in range(1, 10))
        assert a == pytest.approx(1.2713415, abs=1e-6)
        assert est.lower <= float(factorized_trace(1, 2, 5)) <= est.upper

    @pytest.mark.parametrize("p", [1.0, 2.0, 1.5])
    @pytest.mark.parametrize("beta", [0.5, 1.0])
    @pytest.mark.parametrize("d", [1, 3, 8])
    def test_factorization_identity(self, p, beta, d):
        est = trace(KernelParams(p, beta, p, d), 1e-9)
        assert est.width <= 1e-9 * est.lower
        assert est.contains(float(factorized_trace(beta, p, d)))

    @settings(max_examples=25, deadline=None)
    @given(
        alpha=st.floats(0.7, 3.0),
        beta=st.floats(0.4, 2.0),
        p=st.floats(0.7, 3.0),
        d=st.integers(1, 3),
    )
    def test_at_least_one(self, alpha, beta, p, d):
        assert trace(KernelParams(alpha, beta, p, d), 1e-6).lower >= 1.0

    def test_width_shrinks_with_tolerance(self):
        params = KernelParams(1.3, 0.5, 1.1, 2)
        ests = [trace(params, tol) for tol in (1e-3, 1e-6, 1e-9, 1e-12)]
        widths = [e.width for e in ests]
        assert all(a >= b for a, b in zip(widths, widths[1:]))
        for e in ests:
            assert e.width <= 1e-3 * e.lower
        for a, b in zip(ests, ests[1:]):
            assert a.lower <= b.upper and b.lower <= a.upper

    def test_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            trace(KernelParams(1, 1, 1, 1), 0.0)
        with pytest.raises(ValueError):
            trace(KernelParams(1, 1, 1, 1), 1.0)

    def test_budget(self):
        with pytest.raises(BudgetExhausted):
            trace(KernelParams(0.5, 0.5, 0.5, 5), 1e-10, budget=Budget(max_classes=1000))


class TestPowerTrace:
    def test_tau_one_is_trace(self):
        params = KernelParams(1.5, 0.7, 1, 2)
        assert power_trace(params, 1.0) == trace(params)

    def test_half_power_factorizes(self):
        params = KernelParams(2, 1, 2, 3)
        est = power_trace(params, 0.5, 1e-10)
        assert est.contains(float(factorized_trace(0.5, 2, 3)))

    def test_squared_geometric(self):
        est = power_trace(KernelParams(1, 0.5, 1, 1), 2.0, 1e-10)
        assert est.contains(1 + 2 / (E**2 - 1))
        assert est.mid == pytest.approx(1.3130352855, abs=1e-9)

    @pytest.mark.parametrize("tau", [0.3, 0.5, 2.0])
    @pytest.mark.parametrize(
        "params", [KernelParams(1, 0.5, 1, 3), KernelParams(2, 1, 1, 2), KernelParams(1.5, 0.8, 0.8, 2)]
    )
    def test_matches_scaled_beta(self, tau, params):
        a = power_trace(params, tau, 1e-10)
        b = trace(params.with_beta(tau * params.beta), 1e-10)
        assert a.lower <= b.upper and b.lower <= a.upper

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            power_trace(KernelParams(1, 1, 1, 1), 0.0)


class TestTailSum:
    def test_at_zero_encloses_trace(self):
        params = KernelParams(1, 0.5, 1, 1)
        spec = build_spectrum(params, 1, 1e-10)
        lo, hi = tail_sum(spec, 0)
        assert lo == spec.partial_sum and hi == lo + spec.tail_upper
        assert lo <= 1 + 2 / (E - 1) <= hi + 1e-15

    def test_at_end(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 2), 1, 1e-10)
        assert tail_sum(spec, spec.enumerated_count) == (0.0, spec.tail_upper)

    def test_after_first(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 1), 1, 1e-12)
        lo, hi = tail_sum(spec, 1)
        assert lo == pytest.approx(2 / (E - 1), abs=1e-11)
        assert lo == pytest.approx(1.1639534137, abs=1e-9)
        assert lo <= 2 / (E - 1) + 1e-15 and 2 / (E - 1) <= hi + 1e-15

    def test_out_of_range(self):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 1), 1, 1e-3)
        with pytest.raises(ValueError):
            tail_sum(spec, spec.enumerated_count + 1)
        with pytest.raises(ValueError):
            tail_sum(spec, -1)

    def test_direct_sum_matches_oracle_at_every_n(self):
        params = KernelParams(1.2, 0.4, 1.5, 2)
        spec = build_spectrum(params, 1, 1e-10)
        expanded = spec.expanded()
        for n in range(0, min(len(expanded), 300)):
            assert spec.rest_sum(n) == pytest.approx(math.fsum(expanded[n:]), rel=1e-13, abs=1e-300)

    @settings(max_examples=30, deadline=None)
    @given(
        alpha=st.floats(0.5, 2.5),
        beta=st.floats(0.3, 1.5),
        p=st.floats(0.5, 2.5),
        d=st.integers(1, 3),
    )
    def test_nonnegative_and_nonincreasing(self, alpha, beta, p, d):
        spec = build_spectrum(KernelParams(alpha, beta, p, d), 50, 1e-4)
        vals = [spec.rest_sum(n) for n in range(0, min(spec.enumerated_count, 200) + 1)]
        assert all(v >= 0 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    @settings(max_examples=40, deadline=None)
    @given(threshold=st.floats(0.0, 3.0), offset=st.floats(0.0, 0.1))
    def test_first_position_agrees_with_scan(self, threshold, offset):
        spec = build_spectrum(KernelParams(1, 0.5, 1, 2), 1, 1e-8)
        got = spec.first_position(threshold, offset)
        scan = next(
            (n for n in range(spec.enumerated_count + 1) if spec.rest_sum(n) + offset <= threshold),
            None,
        )
        assert got == scan
