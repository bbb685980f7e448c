import numpy as np
import pytest

from conftest import GOLD_LAMBDA, GOLD_MIN_CURRENTS, REF_MESH_SIZE, sample_box
from robinsdp import (
    BoxBounds,
    build_disk_geometry,
    closed_form_step_count,
    converse_monotonicity_check,
    evaluate_criterion,
    find_sufficient_m,
    lambda_max,
    probe_points,
    probe_step_count,
)


class TestBoxBounds:
    @pytest.mark.parametrize("a,b,n", [(0.0, 1.0, 2), (-1.0, 1.0, 2), (2.0, 1.0, 2), (1.0, 2.0, 1)])
    def test_validation(self, a, b, n):
        with pytest.raises(ValueError):
            BoxBounds(a, b, n)

    def test_contains(self):
        bounds = BoxBounds(1.0, 2.0, 2)
        assert bounds.contains(np.array([1.0, 2.0]))
        assert not bounds.contains(np.array([0.99, 1.5]))


class TestStepCount:
    @pytest.mark.parametrize(
        "a,b,n,expected",
        [
            (1.0, 1.0, 2, 2),  # b = a collapses the ladder to the minimum index
            (1.0, 2.0, 2, 5),  # 4 * 1 * 1 / 1 + 1
            (1.0, 2.0, 3, 9),  # ceil(4 * 2 * 1 / 1) + 1
        ],
    )
    def test_inequality_based_count(self, a, b, n, expected):
        assert probe_step_count(BoxBounds(a, b, n)) == expected

    def test_ladder_reaches_past_upper_bound(self):
        for a, b, n in [(1.0, 2.0, 2), (0.5, 3.0, 4), (2.0, 2.0, 3), (1.0, 10.0, 2)]:
            bounds = BoxBounds(a, b, n)
            k_max = probe_step_count(bounds)
            step = a / (4 * (n - 1))
            assert a + k_max * step >= b + step
            if k_max > 2:
                assert a + (k_max - 1) * step < b + step

    def test_closed_form_can_be_negative(self):
        assert closed_form_step_count(BoxBounds(1.0, 2.0, 2)) == -3
        assert closed_form_step_count(BoxBounds(1.0, 10.0, 2)) == 29


class TestProbePoints:
    def test_reference_point_and_direction(self):
        data = probe_points(BoxBounds(1.0, 2.0, 2))
        assert data.k_max == 5
        np.testing.assert_allclose(data.points[(1, 2)], [1.5, 0.5])
        np.testing.assert_allclose(data.directions[0], [-0.5, 3.0])

    def test_three_component_point(self):
        data = probe_points(BoxBounds(2.0, 2.0, 3))
        np.testing.assert_allclose(data.points[(2, 2)], [1.0, 2.5, 1.0])

    def test_structure_invariants(self):
        bounds = BoxBounds(1.5, 3.0, 3)
        data = probe_points(bounds)
        off_value = bounds.a / 2
        cap = bounds.b + bounds.a / (2 * (bounds.n - 1))
        for (j, k), z in data.points.items():
            others = np.delete(z, j - 1)
            assert np.all(others == off_value)
            assert bounds.a < z[j - 1] <= cap
        for j, d in enumerate(data.directions, start=1):
            assert d[j - 1] == -0.5
            others = np.delete(d, j - 1)
            expected = (2 * bounds.b - bounds.a) * (bounds.n - 1) / bounds.a
            assert np.all(others == expected)
            assert np.all(others > 0)

    def test_eigenvalues_unset(self):
        data = probe_points(BoxBounds(1.0, 2.0, 2))
        assert data.eigenvalues is None and data.lam is None
        with pytest.raises(ValueError):
            data.fulfilled()


class TestEvaluateCriterion:
    def test_lam_is_minimum(self, ref_map, ref_bounds, ref_criterion):
        assert ref_criterion.lam == min(ref_criterion.eigenvalues.values())
        expected_keys = {
            (j, k) for j in (1, 2) for k in range(2, ref_criterion.k_max + 1)
        }
        assert set(ref_criterion.eigenvalues) == expected_keys

    def test_reference_setup_fulfilled(self, ref_criterion):
        assert ref_criterion.fulfilled(1e-8)
        assert ref_criterion.lam == pytest.approx(GOLD_LAMBDA, rel=1e-6)

    def test_nonnegative_direction_fails_criterion(self, ref_map, ref_criterion):
        # flipping the probe direction to be entrywise nonnegative must kill
        # the positive eigenvalue: derivatives in nonnegative directions are
        # Loewner-nonpositive
        z = ref_criterion.points[(1, 2)]
        d_nonneg = np.abs(ref_criterion.directions[0])
        assert lambda_max(ref_map.directional_derivative(z, d_nonneg)) <= 1e-10

    def test_arc_count_mismatch(self, ref_map):
        with pytest.raises(ValueError):
            evaluate_criterion(ref_map, BoxBounds(1.0, 2.0, 3))

    def test_single_current_insufficient(self, ref_geometry, ref_bounds):
        from robinsdp import assemble

        fmap = assemble(ref_geometry, REF_MESH_SIZE, 1)
        data = evaluate_criterion(fmap, ref_bounds)
        assert data.lam < 0


class TestFindSufficientM:
    def test_golden_reference_sweep(self, ref_geometry, ref_bounds):
        sweep = find_sufficient_m(ref_geometry, ref_bounds, REF_MESH_SIZE, 40)
        assert sweep.satisfied
        assert sweep.m == GOLD_MIN_CURRENTS
        assert sweep.data.lam == pytest.approx(GOLD_LAMBDA, rel=1e-6)
        assert len(sweep.history) == sweep.m
        assert all(b >= a for a, b in zip(sweep.history, sweep.history[1:]))

    def test_three_arcs(self):
        geometry = build_disk_geometry(3, 0.5, 8)
        sweep = find_sufficient_m(geometry, BoxBounds(1.0, 2.0, 3), REF_MESH_SIZE, 8)
        assert sweep.satisfied and sweep.m == 5

    def test_exhaustion_reports_best(self, ref_geometry, ref_bounds):
        sweep = find_sufficient_m(ref_geometry, ref_bounds, REF_MESH_SIZE, 2)
        assert not sweep.satisfied
        assert sweep.m == 2
        assert sweep.data.lam < sweep.lambda_floor
        assert len(sweep.history) == 2

    def test_degenerate_box_runs(self, ref_geometry):
        bounds = BoxBounds(1.0, 1.0, 2)
        sweep = find_sufficient_m(ref_geometry, bounds, REF_MESH_SIZE, 4)
        assert sweep.data.k_max == 2
        assert len(sweep.history) >= 1

    def test_empty_sweep_rejected(self, ref_geometry, ref_bounds):
        with pytest.raises(ValueError):
            find_sufficient_m(ref_geometry, ref_bounds, REF_MESH_SIZE, 0)


class TestConverseMonotonicity:
    def test_equal_points_vacuous(self, ref_map, ref_bounds, ref_criterion):
        x = np.array([1.5, 1.5])
        assert converse_monotonicity_check(ref_map, ref_bounds, x, x, ref_criterion.lam)

    def test_dominating_pairs(self, ref_map, ref_bounds, ref_criterion):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = sample_box(rng, ref_bounds)
            y = x + (ref_bounds.b - x) * rng.random(2)
            assert converse_monotonicity_check(ref_map, ref_bounds, x, y, ref_criterion.lam)

    def test_random_pairs(self, ref_map, ref_bounds, ref_criterion):
        rng = np.random.default_rng(4)
        for _ in range(200):
            x = sample_box(rng, ref_bounds)
            y = sample_box(rng, ref_bounds)
            assert converse_monotonicity_check(ref_map, ref_bounds, x, y, ref_criterion.lam)

    def test_validation(self, ref_map, ref_bounds):
        x = np.array([1.5, 1.5])
        with pytest.raises(ValueError):
            converse_monotonicity_check(ref_map, ref_bounds, x, x, 0.0)
        with pytest.raises(ValueError):
            converse_monotonicity_check(ref_map, ref_bounds, np.array([0.5, 1.5]), x, 1.0)


def test_axis_direction_margin_uniform_over_box(ref_map, ref_bounds, ref_criterion):
    # with the criterion verified, every in-box point certifies the same
    # margin along the axis test directions (n-1) e_j' - e_j
    rng = np.random.default_rng(5)
    n = ref_bounds.n
    for _ in range(30):
        x = sample_box(rng, ref_bounds)
        for j in range(n):
            direction = np.full(n, float(n - 1))
            direction[j] = -1.0
            value = lambda_max(ref_map.directional_derivative(x, direction))
            assert value >= ref_criterion.lam - 1e-9


def test_measurement_order_implies_larger_sum(ref_map, ref_bounds, ref_criterion):
    # uniqueness consequence: Loewner-dominated measurements force a larger
    # coefficient sum
    rng = np.random.default_rng(6)
    x_hat = np.array([1.4, 1.6])
    f_hat = ref_map.measurements(x_hat)
    accepted = 0
    from robinsdp import loewner_leq

    while accepted < 50:
        x = sample_box(rng, ref_bounds)
        if loewner_leq(ref_map.measurements(x), f_hat, 0.0):
            assert x.sum() > x_hat.sum()
            accepted += 1
