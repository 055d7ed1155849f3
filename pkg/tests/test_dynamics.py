import numpy as np
import pytest

from feasmap.dynamics import (
    BoxSet,
    PiecewiseConstant,
    SystemModel,
    eval_rhs,
    get_model,
    integrate,
    make_cart_spring,
    rk4_step,
)
from feasmap.errors import DivergenceError, InvalidArgumentError

M, K0, HD = 1.8, 1.2, 0.25


@pytest.fixture
def decay_model():
    return SystemModel(
        n=1,
        m=1,
        rhs=lambda x, u, w: -x,
        state_set=BoxSet([-10.0], [10.0]),
        input_set=BoxSet([-1.0], [1.0]),
    )


@pytest.fixture
def drift_model():
    return SystemModel(
        n=1,
        m=1,
        rhs=lambda x, u, w: u.copy(),
        state_set=BoxSet([-10.0], [10.0]),
        input_set=BoxSet([-1.0], [1.0]),
    )


class TestBoxSet:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            BoxSet([1.0], [0.0])
        with pytest.raises(InvalidArgumentError):
            BoxSet([0.5], [1.0])  # origin not interior

    def test_violation_and_contains(self):
        box = BoxSet([-2.0, -2.0], [2.0, 2.0])
        assert box.contains(np.array([1.0, -1.0]))
        assert not box.contains(np.array([2.5, 0.0]))
        assert box.violation(np.array([2.5, 0.0])) == pytest.approx(0.5)
        assert box.violation(np.array([0.0, 0.0])) == 0.0


class TestEvalRhs:
    def test_equilibrium_at_origin(self):
        model = make_cart_spring()
        np.testing.assert_allclose(
            eval_rhs(model, [0.0, 0.0], [0.0]), [0.0, 0.0], atol=1e-15
        )

    def test_spring_term(self):
        model = make_cart_spring()
        out = eval_rhs(model, [1.0, 0.0], [0.0])
        assert out[0] == 0.0
        assert out[1] == pytest.approx(-0.245253, abs=1e-6)
        assert out[1] == pytest.approx(-(K0 / M) * np.exp(-1.0), rel=1e-14)

    def test_damping_term(self):
        model = make_cart_spring()
        out = eval_rhs(model, [0.0, 1.0], [0.0])
        assert out[0] == 1.0
        assert out[1] == pytest.approx(-0.138889, abs=1e-6)
        assert out[1] == pytest.approx(-HD / M, rel=1e-14)

    def test_disturbance_shifts_second_state_only(self):
        model = make_cart_spring()
        delta = 0.007
        base = eval_rhs(model, [0.3, -0.4], [1.0], [0.0])
        pushed = eval_rhs(model, [0.3, -0.4], [1.0], [delta])
        assert pushed[0] == base[0]
        assert pushed[1] - base[1] == pytest.approx(delta, abs=1e-15)

    def test_dimension_mismatch(self):
        model = make_cart_spring()
        with pytest.raises(InvalidArgumentError):
            eval_rhs(model, [0.0], [0.0])
        with pytest.raises(InvalidArgumentError):
            eval_rhs(model, [0.0, 0.0], [0.0, 0.0])

    def test_excess_disturbance_warns(self):
        model = make_cart_spring()
        with pytest.warns(UserWarning, match="disturbance exceeds"):
            eval_rhs(model, [0.0, 0.0], [0.0], [0.5])

    def test_rhs_must_vanish_at_origin(self):
        with pytest.raises(InvalidArgumentError, match="equilibrium"):
            SystemModel(
                n=1,
                m=1,
                rhs=lambda x, u, w: x + 1.0,
                state_set=BoxSet([-1.0], [1.0]),
                input_set=BoxSet([-1.0], [1.0]),
            )


class TestCartSpring:
    def test_registry_and_shape(self):
        model = get_model("cart_spring")
        assert model.n == 2 and model.m == 1
        np.testing.assert_array_equal(model.state_set.lower, [-2.0, -2.0])
        np.testing.assert_array_equal(model.state_set.upper, [2.0, 2.0])
        np.testing.assert_array_equal(model.input_set.lower, [-3.0])
        np.testing.assert_array_equal(model.input_set.upper, [3.0])
        assert model.disturbance_bound == 0.01

    def test_unknown_model(self):
        with pytest.raises(InvalidArgumentError, match="unknown model"):
            get_model("cart_sprang")


class TestIntegrate:
    def test_exponential_decay(self, decay_model):
        traj = integrate(
            decay_model, [1.0], PiecewiseConstant.constant([0.0], 1.0), None, 1.0, 0.01
        )
        assert traj.final_state[0] == pytest.approx(np.exp(-1.0), abs=1e-8)
        assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(1.0)
        np.testing.assert_array_equal(traj.states[0], [1.0])

    def test_constant_drift(self, drift_model):
        traj = integrate(
            drift_model, [0.0], PiecewiseConstant.constant([0.5], 2.0), None, 2.0, 0.01
        )
        assert traj.final_state[0] == pytest.approx(1.0, abs=1e-12)

    def test_rk4_order(self, decay_model):
        errs = {}
        for dt in (0.02, 0.01, 0.005):
            traj = integrate(
                decay_model, [1.0], PiecewiseConstant.constant([0.0], 1.0), None, 1.0, dt
            )
            errs[dt] = abs(traj.final_state[0] - np.exp(-1.0))
        assert 8.0 < errs[0.02] / errs[0.01] < 32.0
        assert 8.0 < errs[0.01] / errs[0.005] < 32.0

    def test_deterministic(self, decay_model):
        kw = dict(
            model=decay_model,
            x0=[1.0],
            control=PiecewiseConstant.constant([0.0], 1.0),
            disturbance=None,
            T=1.0,
            dt=0.01,
        )
        a = integrate(**kw)
        b = integrate(**kw)
        assert np.array_equal(a.states, b.states)

    def test_piecewise_segments(self, drift_model):
        sig = PiecewiseConstant(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))
        traj = integrate(drift_model, [0.0], sig, None, 1.0, 0.01)
        assert traj.final_state[0] == pytest.approx(0.0, abs=1e-12)
        mid = np.argmin(np.abs(traj.times - 0.5))
        assert traj.states[mid, 0] == pytest.approx(0.5, abs=1e-12)

    def test_dt_must_divide_segments(self, drift_model):
        sig = PiecewiseConstant(np.array([[1.0]]), np.array([0.95]))
        with pytest.raises(InvalidArgumentError, match="divide"):
            integrate(drift_model, [0.0], sig, None, 0.95, 0.1)

    def test_divergence_reports_time(self):
        blowup = SystemModel(
            n=1,
            m=1,
            rhs=lambda x, u, w: x * x,
            state_set=BoxSet([-10.0], [10.0]),
            input_set=BoxSet([-1.0], [1.0]),
        )
        with pytest.raises(DivergenceError) as excinfo:
            with np.errstate(over="ignore", invalid="ignore"):
                integrate(
                    blowup, [1.0], PiecewiseConstant.constant([0.0], 5.0), None, 5.0, 0.05
                )
        assert 0.0 < excinfo.value.time <= 5.0

    def test_disturbance_signal(self, drift_model):
        # rhs ignores w here; use the cart to see the disturbance integrate
        cart = make_cart_spring()
        w = PiecewiseConstant.constant([0.01], 1.0)
        u = PiecewiseConstant.constant([0.0], 1.0)
        nominal = integrate(cart, [0.0, 0.0], u, None, 1.0, 0.01)
        perturbed = integrate(cart, [0.0, 0.0], u, w, 1.0, 0.01)
        assert perturbed.final_state[1] > nominal.final_state[1]


def test_rk4_step_batched_matches_single(decay_model):
    x = np.array([[1.0], [2.0], [-0.5]])
    u = np.zeros((3, 1))
    w = np.zeros((3, 1))
    batch = rk4_step(decay_model.rhs, x, u, w, 0.1)
    for k in range(3):
        single = rk4_step(decay_model.rhs, x[k], u[k], w[k], 0.1)
        np.testing.assert_array_equal(batch[k], single)
