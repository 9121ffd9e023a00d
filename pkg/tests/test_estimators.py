import warnings

import numpy as np
import pytest
from scipy import optimize

from sksd.estimators import (ConvergenceWarning, EstimationError, EstimatorSpec, as_estimator,
                             min_ksd_closed_form, min_ksd_normal_equations, min_ksd_numeric,
                             min_ksd_numeric_result, mle_gaussian, project_to_domain,
                             score_matching_closed_form)
from sksd.kernels import KernelSpec
from sksd.models import (ConditionalGaussianFamily, GaussianFamily, GaussianLocationFamily,
                         KernelExpFamily)
from sksd.samplers import ChainConfig
from sksd.stein import v_statistic

LIN = KernelSpec.linear()


def _sm_objective(family, theta, X):
    dec = family.affine_decomposition(X)
    S = dec.score(theta)
    div = dec.divergence_grad @ theta  # theta-independent part of the divergence drops out
    return np.mean(0.5 * np.sum(S**2, axis=1) + div)


def _cg_sample(d, n, seed, reach=1):
    fam = ConditionalGaussianFamily.ring(d, chain=ChainConfig(burn_in=500, thin=2))
    theta = -np.linspace(0.3, 1.0, fam.param_dim)
    return fam, theta, fam.sample(theta, n, np.random.default_rng(seed))


def test_mle_gaussian():
    np.testing.assert_allclose(mle_gaussian([0.0, 2.0]), [1.0, 1.0])
    np.testing.assert_allclose(mle_gaussian([1.0, 2.0, 3.0]), [2.0, np.sqrt(2 / 3)])
    with pytest.raises(EstimationError):
        mle_gaussian([3.0, 3.0])
    with pytest.raises(EstimationError):
        mle_gaussian([3.0])


def test_location_worked_example():
    X = np.array([[1.0], [2.0]])
    fam = GaussianLocationFamily(1)
    th_ksd = min_ksd_closed_form(fam, LIN, X)
    th_sm = score_matching_closed_form(fam, X)
    assert th_ksd[0] == (np.sum(X**2) - 2) / np.sum(X) == 1.0
    assert th_sm[0] == X.mean() == 1.5
    assert v_statistic(fam, th_ksd, LIN, X).value == pytest.approx(0.0, abs=1e-14)
    grid = np.linspace(-5, 5, 2001)
    vals = [v_statistic(fam, [g], LIN, X).value for g in grid]
    assert grid[int(np.argmin(vals))] == pytest.approx(1.0, abs=5e-3)


def test_zero_rhs_gives_zero():
    X = np.array([[-1.0], [1.0]])
    assert score_matching_closed_form(GaussianLocationFamily(1), X)[0] == 0.0
    Q, c = min_ksd_normal_equations(GaussianLocationFamily(1), KernelSpec.gaussian(1.0), X)
    assert c[0] == pytest.approx(0.0, abs=1e-15)
    assert min_ksd_closed_form(GaussianLocationFamily(1), KernelSpec.gaussian(1.0), X)[0] == \
        pytest.approx(0.0, abs=1e-15)


def test_min_ksd_stationary_on_conditional_gaussian():
    fam, _, X = _cg_sample(3, 500, 1)
    spec = KernelSpec.gaussian(1.0)
    theta = min_ksd_closed_form(fam, spec, X)
    assert np.all(theta < 0)
    _, c = min_ksd_normal_equations(fam, spec, X)
    grad = optimize.approx_fprime(theta, lambda t: v_statistic(fam, t, spec, X).value, 1e-6)
    assert np.linalg.norm(grad) <= 1e-6 * (1 + np.linalg.norm(c))


@pytest.mark.parametrize("case", ["location", "kef", "cond_gauss"])
def test_closed_form_matches_numeric(case):
    rng = np.random.default_rng(3)
    if case == "location":
        fam, X = GaussianLocationFamily(2), rng.normal(size=(80, 2)) + [0.5, -1]
    elif case == "kef":
        fam = KernelExpFamily(2, chain=ChainConfig(burn_in=1000, thin=5))
        X = fam.sample([4.0, -1.0], 120, rng)
    else:
        fam, _, X = _cg_sample(3, 200, 4)
    spec = KernelSpec.gaussian(1.2)
    closed = min_ksd_closed_form(fam, spec, X)
    start = closed + 0.3
    numeric = min_ksd_numeric(fam, spec, X, init=start, tol=1e-12, max_iter=20000)
    np.testing.assert_allclose(numeric, closed, atol=1e-4)


def test_score_matching_matches_numeric():
    for seed in range(3):
        fam, _, X = _cg_sample(3, 300, 10 + seed)
        closed = score_matching_closed_form(fam, X)
        res = optimize.minimize(lambda t: _sm_objective(fam, t, X), np.zeros(fam.param_dim),
                                method="BFGS", options={"gtol": 1e-12})
        np.testing.assert_allclose(res.x, closed, atol=1e-6)


def test_score_matching_with_gammas():
    fam = ConditionalGaussianFamily.ring(3, estimate_gammas=True,
                                         chain=ChainConfig(burn_in=500, thin=2))
    truth = np.concatenate([[-0.5, -0.4, -0.6], [2, 2, 2], [-0.5, -0.5, -0.5]])
    X = fam.sample(truth, 4000, np.random.default_rng(0))
    est = score_matching_closed_form(fam, X)
    np.testing.assert_allclose(est, truth, atol=0.25)


def test_quadratic_structure_and_psd(rng):
    fam, _, X = _cg_sample(3, 100, 5)
    spec = KernelSpec.gaussian(0.9)
    f = lambda t: X.shape[0] ** 2 * v_statistic(fam, t, spec, X).value
    a, b = -rng.uniform(0.1, 1, 3), -rng.uniform(0.1, 1, 3)
    pts = [0.0, 0.5, 1.0]
    vals = [f(a + s * (b - a)) for s in pts]
    coef = np.polyfit(pts, vals, 2)
    assert f(a + 1.7 * (b - a)) == pytest.approx(np.polyval(coef, 1.7), rel=1e-9)
    Q, _ = min_ksd_normal_equations(fam, spec, X)
    ev = np.linalg.eigvalsh(Q)
    assert ev.min() >= -1e-8 * np.abs(ev).max()


def test_argmin_property(rng):
    fam, _, X = _cg_sample(3, 150, 6)
    spec = KernelSpec.gaussian(1.0)
    theta = min_ksd_closed_form(fam, spec, X)
    f0 = v_statistic(fam, theta, spec, X).value
    for _ in range(100):
        delta = rng.normal(size=3)
        delta *= 1e-3 / np.linalg.norm(delta)
        t = theta + delta
        if np.all(t <= 0):
            assert v_statistic(fam, t, spec, X).value >= f0 - 1e-15


def test_ill_conditioned_raises():
    X = np.zeros((5, 2))
    X[:, 0] = np.arange(5)
    # second coordinate constant zero: location columns stay fine, but conditional Gaussian
    # interaction columns vanish
    fam = ConditionalGaussianFamily(2)
    with pytest.raises(EstimationError, match="condition number"):
        min_ksd_closed_form(fam, KernelSpec.gaussian(1.0), X)
    with pytest.raises(EstimationError, match="condition number"):
        score_matching_closed_form(fam, X)


def test_closed_form_rejects_non_affine():
    with pytest.raises(EstimationError):
        min_ksd_closed_form(GaussianFamily(), LIN, np.ones((3, 1)))


def test_numeric_gaussian_consistency():
    X = np.random.default_rng(8).normal(size=(200, 1))
    spec = KernelSpec.gaussian(1.0)
    theta = min_ksd_numeric(GaussianFamily(), spec, X)
    assert abs(theta[0]) < 0.3 and abs(theta[1] - 1) < 0.3


def test_numeric_fixed_point_at_closed_form():
    X = np.random.default_rng(9).normal(size=(60, 1)) + 0.4
    fam, spec = GaussianLocationFamily(1), KernelSpec.gaussian(1.0)
    closed = min_ksd_closed_form(fam, spec, X)
    res = min_ksd_numeric_result(fam, spec, X, init=closed)
    assert res.theta[0] == pytest.approx(closed[0], abs=1e-8)


def test_numeric_warns_on_iteration_cap():
    X = np.random.default_rng(10).normal(size=(40, 1))
    with pytest.warns(ConvergenceWarning):
        min_ksd_numeric_result(GaussianFamily(), KernelSpec.gaussian(1.0), X, max_iter=3)


def test_projection():
    fam = ConditionalGaussianFamily(2, estimate_gammas=True)
    inside = np.array([-0.2, 0.3, 0.1, -0.4, -0.9])
    np.testing.assert_array_equal(project_to_domain(fam, inside), inside)
    out = project_to_domain(fam, [-0.2, 0.3, 0.1, 0.2, -0.9])
    assert out[3] == -1e-6
    np.testing.assert_array_equal(project_to_domain(fam, out), out)


def test_consistency_improves_with_n():
    better = 0
    fam = ConditionalGaussianFamily.ring(3, chain=ChainConfig(burn_in=300, thin=2))
    truth = np.array([-0.6, -0.8, -0.4])
    spec = KernelSpec.gaussian(1.0)
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        err = [np.linalg.norm(min_ksd_closed_form(fam, spec, fam.sample(truth, n, rng)) - truth)
               for n in (100, 1000)]
        better += err[1] < err[0]
    assert better >= 8


def test_estimator_spec_dispatch():
    X = np.random.default_rng(1).normal(size=(50, 1))
    g = GaussianFamily()
    np.testing.assert_allclose(EstimatorSpec("mle_gaussian").fit(g, X), mle_gaussian(X))
    with pytest.raises(ValueError):
        EstimatorSpec("bogus")
    with pytest.raises(EstimationError):
        EstimatorSpec("min_ksd_closed").fit(GaussianLocationFamily(1), X)
    with pytest.raises(EstimationError):
        EstimatorSpec("mle_gaussian").fit(GaussianLocationFamily(1), X)
    fixed = EstimatorSpec("min_ksd_closed", kernel=LIN)
    assert fixed.fit(GaussianLocationFamily(1), X, KernelSpec.gaussian(1.0)) == \
        pytest.approx(min_ksd_closed_form(GaussianLocationFamily(1), LIN, X))
    assert as_estimator("score_matching_closed")(GaussianLocationFamily(1), X, None) == \
        pytest.approx(X.mean())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        EstimatorSpec("min_ksd_numeric", max_iter=3).fit(g, X, KernelSpec.gaussian(1.0))
    with pytest.raises(TypeError):
        as_estimator(42)
