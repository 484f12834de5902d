import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from robust_td import RUMEM, RobustTDEstimator, TD0Estimator
from robust_td.contamination import AttackModel, RewardNoise, sample_trajectory
from robust_td.learners import RobustTdConfig, StepSchedule, Td0Config, robust_td_on_trajectory, td0_on_trajectory
from robust_td.rumem import RumemConfig, RumemSchedule, estimate


@pytest.fixture
def traj(small_mrp):
    return sample_trajectory(small_mrp, RewardNoise.gaussian(1.0), AttackModel.constant_bias(0.01, 1e4), 5000, 3)


def test_rumem_estimator_matches_function():
    x = np.random.default_rng(0).normal(size=20_000)
    est = RUMEM(delta=0.1, schedule="practical").fit(x)
    out = estimate(x, RumemConfig(delta=0.1, schedule=RumemSchedule.practical()))
    assert est.location_ == out.estimate
    assert est.plan_ == out.plan
    np.testing.assert_array_equal(est.bucket_means_, out.bucket_means)


def test_rumem_estimator_strict():
    with pytest.raises(ValueError, match="infeasible"):
        RUMEM(delta=0.05).fit(np.zeros(100_000))
    assert RUMEM(delta=0.05, strict=False).fit(np.zeros(100_000)).location_ == 0.0


def test_get_params_and_clone(small_mrp):
    est = RobustTDEstimator(features=small_mrp.features, gamma=0.7, burn_in=500, eps=0.01, schedule="practical")
    params = est.get_params()
    assert params["burn_in"] == 500 and params["schedule"] == "practical"
    c = clone(est)
    assert c.get_params()["eps"] == 0.01
    c.set_params(alpha=0.05)
    assert c.alpha == 0.05 and est.alpha == 0.1


def test_td0_estimator_matches_function(small_mrp, traj):
    est = TD0Estimator(features=small_mrp.features, gamma=small_mrp.discount, step="constant", alpha=0.05)
    est.fit(traj.states, traj.rewards)
    ref = td0_on_trajectory(traj, small_mrp.features, small_mrp.discount, Td0Config(StepSchedule.constant(0.05), 5000))
    np.testing.assert_array_equal(est.coef_, ref.theta_final)
    np.testing.assert_allclose(est.predict(np.arange(8)), small_mrp.features @ ref.theta_final)
    assert est.n_steps_ == 5000


def test_robust_estimator_matches_function(small_mrp, traj):
    est = RobustTDEstimator(features=small_mrp.features, gamma=small_mrp.discount, alpha=0.1, burn_in=500,
                            sigma1=2.0, eps=0.01, tau_mix=2, constant_C=8.0, schedule="practical")
    est.fit(traj)
    cfg = RobustTdConfig(alpha=0.1, T=5000, burn_in=500, sigma1=2.0, K=3, eps=0.01, tau_mix=2, constant_C=8.0,
                         schedule=RumemSchedule.practical())
    ref = robust_td_on_trajectory(traj, small_mrp.features, small_mrp.discount, cfg)
    np.testing.assert_array_equal(est.coef_, ref.theta_final)
    assert est.reset_events_.size == ref.reset_events.size


def test_not_fitted(small_mrp):
    with pytest.raises(NotFittedError):
        TD0Estimator(features=small_mrp.features).predict([0])


def test_input_validation(small_mrp, traj):
    est = TD0Estimator(features=small_mrp.features, gamma=0.7)
    with pytest.raises(ValueError, match="y"):
        est.fit(traj.states)
    with pytest.raises(ValueError, match="not both"):
        est.fit(traj, traj.rewards)
    with pytest.raises(ValueError, match="lie in"):
        est.fit(np.full(11, 9), np.zeros(10))
    with pytest.raises(ValueError):
        TD0Estimator(features=small_mrp.features, step="adam").fit(traj)
    est.fit(traj)
    with pytest.raises(TypeError):
        est.predict([0.5])


def test_horizon_parameter(small_mrp, traj):
    est = TD0Estimator(features=small_mrp.features, gamma=0.7, T=1000).fit(traj)
    assert est.n_steps_ == 1000
