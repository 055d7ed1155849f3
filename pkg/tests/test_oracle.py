import warnings

import numpy as np
import pytest

from bruteforce import bang_bang_infeasible
from feasmap.dynamics import PiecewiseConstant, integrate, make_cart_spring
from feasmap.errors import InvalidArgumentError, OutOfDomainError
from feasmap.oracle import (
    CART_SPRING_K,
    CART_SPRING_P,
    cart_spring_ocp,
    enrich_feasible,
    label_dataset,
    solve_feasibility,
    verify_terminal_assumptions,
)
from feasmap.sampling import GeneratorInfo, halton_sample_set
from feasmap.setgeom import EllipsoidSet


@pytest.fixture(scope="module")
def spec_a():
    return cart_spring_ocp(horizon_T=1.0, mu=0.5)


class TestSolveFeasibility:
    def test_origin_feasible_with_zero_violation(self, spec_a):
        result = solve_feasibility(spec_a, np.zeros(2))
        assert result.label == 1
        assert result.violation == 0.0
        np.testing.assert_array_equal(result.control, np.zeros((10, 1)))

    def test_terminal_set_point_feasible(self, spec_a):
        # a point already inside the terminal set: the feedback seed certifies
        ell = EllipsoidSet(CART_SPRING_P, 0.5)
        x0 = 0.9 * ell.boundary_points(8)[3]
        result = solve_feasibility(spec_a, x0)
        assert result.label == 1
        assert result.violation <= spec_a.feas_tol

    def test_far_corner_infeasible(self, spec_a):
        x0 = np.array([-2.0, -2.0])
        assert bang_bang_infeasible(spec_a, x0)
        result = solve_feasibility(spec_a, x0)
        assert result.label == -1
        assert result.violation > spec_a.feas_tol

    def test_out_of_domain(self, spec_a):
        with pytest.raises(OutOfDomainError):
            solve_feasibility(spec_a, np.array([2.5, 0.0]))

    def test_positive_labels_replay_through_integrator(self, spec_a):
        points = halton_sample_set(24, spec_a.model.state_set, start_index=1)
        labeled = label_dataset(spec_a, points)
        seg = spec_a.horizon_T / spec_a.segments
        replayed = 0
        for sample in labeled:
            if sample.label != 1:
                continue
            result = solve_feasibility(spec_a, sample.state)
            control = PiecewiseConstant(result.control, np.full(spec_a.segments, seg))
            traj = integrate(
                spec_a.model, sample.state, control, None, spec_a.horizon_T, spec_a.dt
            )
            box_viol = spec_a.model.state_set.violation(traj.states).max()
            quad = float(traj.final_state @ spec_a.P @ traj.final_state)
            total = max(box_viol, quad - spec_a.terminal_level, 0.0)
            assert total <= spec_a.feas_tol
            replayed += 1
        assert replayed > 0

    def test_determinism(self, spec_a):
        x0 = np.array([0.8, -1.1])
        a = solve_feasibility(spec_a, x0)
        b = solve_feasibility(spec_a, x0)
        assert a.label == b.label
        assert a.violation == b.violation
        np.testing.assert_array_equal(a.control, b.control)


class TestLabelDataset:
    def test_both_classes_and_order(self, spec_a):
        points = halton_sample_set(64, spec_a.model.state_set, start_index=1)
        result = label_dataset(spec_a, points)
        assert len(result) == 64
        assert not result.degenerate
        labels = result.labels
        assert (labels == 1).any() and (labels == -1).any()
        for sample, point in zip(result, points.points):
            np.testing.assert_array_equal(sample.state, point)

    def test_single_origin_sample(self, spec_a):
        points = halton_sample_set(1, spec_a.model.state_set, start_index=1)
        object.__setattr__(points, "points", np.zeros((1, 2)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # single sample is trivially one-class
            result = label_dataset(spec_a, points)
        assert result.labels.tolist() == [1]
        assert result[0].violation == 0.0

    def test_parallelism_does_not_change_labels(self, spec_a):
        points = halton_sample_set(300, spec_a.model.state_set, start_index=1)
        serial = label_dataset(spec_a, points, parallelism=1)
        parallel = label_dataset(spec_a, points, parallelism=2)
        assert serial.labels.tolist() == parallel.labels.tolist()
        np.testing.assert_array_equal(
            [s.violation for s in serial], [s.violation for s in parallel]
        )

    def test_empty_rejected(self, spec_a):
        points = halton_sample_set(4, spec_a.model.state_set, start_index=1)
        object.__setattr__(points, "points", points.points[:0])
        with pytest.raises(InvalidArgumentError):
            label_dataset(spec_a, points)

    def test_degenerate_flag_and_warning(self):
        spec = cart_spring_ocp(horizon_T=1.0, mu=0.9)
        ell = EllipsoidSet(CART_SPRING_P, 0.9)
        inner = 0.5 * ell.sample_inside(8, seed=0)
        ss = halton_sample_set(8, spec.model.state_set, start_index=1)
        object.__setattr__(ss, "points", inner)
        with pytest.warns(UserWarning, match="single class"):
            result = label_dataset(spec, ss)
        assert result.degenerate
        assert set(result.labels.tolist()) == {1}

    def test_monotone_in_terminal_level(self):
        points = halton_sample_set(64, make_cart_spring().state_set, start_index=1)
        low = label_dataset(cart_spring_ocp(1.0, 0.5), points)
        high = label_dataset(cart_spring_ocp(1.0, 0.9), points)
        assert high.positive_count >= low.positive_count

    def test_monotone_in_horizon(self):
        points = halton_sample_set(64, make_cart_spring().state_set, start_index=1)
        short = label_dataset(cart_spring_ocp(1.0, 0.5), points)
        long = label_dataset(cart_spring_ocp(2.0, 0.5), points)
        assert long.positive_count >= short.positive_count


class TestRobustLabeling:
    def test_eroded_level_shrinks_feasible_count(self):
        points = halton_sample_set(64, make_cart_spring().state_set, start_index=1)
        nominal = label_dataset(cart_spring_ocp(1.0, 0.5), points)
        robust = label_dataset(
            cart_spring_ocp(1.0, 0.5, mu_effective=0.46493960962428105), points
        )
        assert robust.positive_count <= nominal.positive_count

    def test_mu_effective_validation(self):
        with pytest.raises(InvalidArgumentError):
            cart_spring_ocp(1.0, 0.5, mu_effective=0.7)


class TestEnrichment:
    def test_target_already_met(self, spec_a, small_labels):
        gen = GeneratorInfo("halton", 2, 1, 96)
        result = enrich_feasible(spec_a, small_labels, 1, gen)
        assert result.added == []
        assert not result.cap_exceeded

    def test_adds_feasible_points(self, spec_a, small_labels):
        have = small_labels.positive_count
        gen = GeneratorInfo("halton", 2, 1, 96)
        result = enrich_feasible(spec_a, small_labels, have + 5, gen)
        assert len(result.added) == 5
        assert not result.cap_exceeded
        for sample in result.added:
            assert sample.label == 1
            assert spec_a.model.state_set.contains(sample.state)
            check = solve_feasibility(spec_a, sample.state)
            assert check.label == 1
        # descriptor advanced past both the original and the examined points
        assert result.generator.next_start_index > 97

    def test_cap_exceeded_when_nothing_feasible(self):
        spec = cart_spring_ocp(horizon_T=0.05, mu=1e-6, restarts=2)
        gen = GeneratorInfo("halton", 2, 1, 0)
        result = enrich_feasible(spec, [], 5, gen)
        assert result.cap_exceeded
        assert len(result.added) < 5


class TestTerminalAssumptions:
    def test_benchmark_gain_passes(self, spec_a):
        report = verify_terminal_assumptions(spec_a, CART_SPRING_K, n_samples=1500)
        assert report.pass_fraction == 1.0
        assert report.max_decrease_residual <= 1e-9
        assert report.input_violations == 0

    def test_zero_gain_fails_decrease(self, spec_a):
        report = verify_terminal_assumptions(spec_a, np.zeros((1, 2)), n_samples=1500)
        assert report.pass_fraction < 1.0
        assert report.max_decrease_residual > 0.0

    def test_oversized_gain_violates_input_box(self, spec_a):
        report = verify_terminal_assumptions(spec_a, 5.0 * CART_SPRING_K, n_samples=1500)
        assert report.input_violations > 0
        assert report.max_input_excess > 0.0

    def test_certified_points_are_feasible(self, spec_a):
        # terminal set membership implies feasibility of the labeling problem
        ell = EllipsoidSet(CART_SPRING_P, 0.5)
        for point in ell.sample_inside(10, seed=3):
            assert solve_feasibility(spec_a, point).label == 1
