import numpy as np
import pytest
from sklearn.base import clone

from robinsdp import CriterionNotMetError, RobinReconstructor


@pytest.fixture(scope="module")
def fitted_setup():
    est = RobinReconstructor(n_arcs=2, mesh_size=0.1)
    fmap = est.simulate_map(num_currents=3)
    x_true = np.array([1.32, 1.64])
    return est, fmap, x_true, fmap.measurements(x_true).entries


class TestSklearnApi:
    def test_get_set_params_roundtrip(self):
        est = RobinReconstructor(mesh_size=0.07, noise_level=1e-4)
        params = est.get_params()
        assert params["mesh_size"] == 0.07
        other = RobinReconstructor().set_params(**params)
        assert other.get_params() == params

    def test_clone(self):
        est = RobinReconstructor(n_arcs=3, lower=0.5, upper=4.0)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()


class TestFit:
    def test_exact_round_trip(self, fitted_setup):
        est, fmap, x_true, y = fitted_setup
        est = clone(est).fit(y)
        assert np.abs(est.coefficients_ - x_true).max() <= 1e-4
        assert est.constraint_margin_ >= -est.feas_tol
        assert est.criterion_lambda_ > 0
        assert est.error_radius_ == 0.0
        assert est.n_currents_ == 3
        assert est.n_iter_ > 0

    def test_noisy_fit_certifies_radius(self, fitted_setup):
        est, fmap, x_true, y = fitted_setup
        rng = np.random.default_rng(1)
        raw = rng.standard_normal((3, 3))
        noise = 0.5 * (raw + raw.T)
        noise /= np.abs(np.linalg.eigvalsh(noise)).max()
        delta = 1e-4
        noisy_est = clone(est).set_params(noise_level=delta).fit(y + delta * noise)
        radius = 2 * delta * 1 / noisy_est.criterion_lambda_
        assert noisy_est.error_radius_ == pytest.approx(radius)
        assert np.abs(noisy_est.coefficients_ - x_true).max() <= radius + 1e-6

    def test_unchecked_fit_has_no_radius(self, fitted_setup):
        est, fmap, x_true, y = fitted_setup
        est = clone(est).set_params(check_criterion=False).fit(y)
        assert est.criterion_lambda_ is None
        assert est.error_radius_ is None
        assert np.abs(est.coefficients_ - x_true).max() <= 1e-4

    def test_criterion_not_met_raises(self):
        est = RobinReconstructor(n_arcs=2, mesh_size=0.1)
        fmap = est.simulate_map(num_currents=1)
        y = fmap.measurements([1.5, 1.5]).entries
        with pytest.raises(CriterionNotMetError) as excinfo:
            est.fit(y)
        assert excinfo.value.lam < 0

    def test_input_validation(self, fitted_setup):
        est, fmap, x_true, y = fitted_setup
        with pytest.raises(ValueError):
            clone(est).fit(np.ones((2, 3)))
        asym = y.copy()
        asym[0, 1] += 1.0
        with pytest.raises(ValueError):
            clone(est).fit(asym)
        with pytest.raises(ValueError):
            clone(est).set_params(noise_level=-1.0).fit(y)
