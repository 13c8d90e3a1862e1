import math

import numpy as np
import pytest
from scipy import integrate, stats

from relentcode.errors import MutualInformationUnavailable, UndefinedRatioError
from relentcode.models import (AdditiveUnimodalMechanism, CategoricalMechanism, DiscreteUniform,
                               GaussianGaussianMechanism, Laplace, Normal, Uniform,
                               UniformAdditiveMechanism, density_ratio, expected_log_ratio_sup,
                               mechanism_from_params, mutual_information, ratio_sup)
from relentcode.randomness import DeterministicStream

LB_E = math.log2(math.e)


def binary():
    return CategoricalMechanism([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]])


def test_categorical_ratio_and_sup():
    m = binary()
    assert m.marginal == pytest.approx((0.5, 0.5))
    assert density_ratio(m, 0, 0) == pytest.approx(1.6)
    assert density_ratio(m, 0, 1) == pytest.approx(0.4)
    assert density_ratio(m, 1, 1) == pytest.approx(1.6)
    assert ratio_sup(m, 0) == pytest.approx(1.6)


def test_categorical_zero_marginal_mass_is_undefined():
    m = CategoricalMechanism([0.5, 0.5], [[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(UndefinedRatioError):
        m.density_ratio(0, 1)


def test_independent_channel_ratio_is_one():
    m = CategoricalMechanism.independent([0.3, 0.7], 3)
    for x in range(3):
        assert ratio_sup(m, x) == pytest.approx(1.0)
        for y in range(2):
            assert density_ratio(m, x, y) == pytest.approx(1.0)
    assert mutual_information(m) == pytest.approx(0.0, abs=1e-15)
    mean, se = expected_log_ratio_sup(m, DeterministicStream(0), 100)
    assert mean == pytest.approx(0.0, abs=1e-15) and se == 0.0


def test_categorical_information_by_summation():
    m = CategoricalMechanism([0.2, 0.5, 0.3], [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]])
    px = np.array(m.source_pmf)
    w = np.array(m.channel_rows)
    joint = px[:, None] * w
    oracle = float(np.sum(joint * np.log2(joint / (px[:, None] * joint.sum(axis=0)[None, :]))))
    assert mutual_information(m) == pytest.approx(oracle, abs=1e-12)


def test_categorical_rejects_bad_rows():
    with pytest.raises(ValueError):
        CategoricalMechanism([0.5, 0.5], [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValueError):
        CategoricalMechanism([0.5, 0.5], [[1.0]])


def test_gaussian_ratio_at_origin():
    m = GaussianGaussianMechanism(1.0, 0.5)
    assert density_ratio(m, 0.0, 0.0) == pytest.approx(math.sqrt(5.0), rel=1e-14)


@pytest.mark.parametrize("x,y", [(0.0, 0.0), (0.7, -1.2), (-2.0, 1.5), (3.0, 3.1)])
def test_gaussian_ratio_matches_scipy_densities(x, y):
    m = GaussianGaussianMechanism(1.0, 0.5)
    oracle = stats.norm.pdf(y, x, 0.5) / stats.norm.pdf(y, 0, math.sqrt(1.25))
    assert m.density_ratio(x, y) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("x", np.linspace(-3, 3, 10))
def test_gaussian_ratio_integrates_to_one(x):
    m = GaussianGaussianMechanism(1.0, 0.5)
    py = stats.norm(0, m.marginal_std).pdf
    total = integrate.quad(lambda y: m.density_ratio(x, y) * py(y), -np.inf, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("x", np.linspace(-0.0, 15.0, 10))
def test_uniform_additive_ratio_integrates_to_one(x):
    m = UniformAdditiveMechanism(16)
    x = int(round(x))
    total = integrate.quad(lambda y: m.density_ratio(x, y) / 16, -0.5, 15.5,
                           points=[x - 0.5, x + 0.5], limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_gaussian_sup_matches_grid_search():
    m = GaussianGaussianMechanism(1.0, 0.5)
    for x in (-2.5, -0.3, 0.0, 1.1, 2.0):
        grid = np.linspace(-8, 8, 1_600_001)
        logr = stats.norm.logpdf(grid, x, 0.5) - stats.norm.logpdf(grid, 0, m.marginal_std)
        assert m.log_ratio_sup(x) == pytest.approx(logr.max(), abs=1e-6)
        assert m.ratio_argmax(x) == pytest.approx(grid[logr.argmax()], abs=1e-4)


def test_sup_dominates_ratio_on_random_pairs():
    rng = np.random.default_rng(0)
    g = GaussianGaussianMechanism(1.0, 0.5)
    u = UniformAdditiveMechanism(16)
    c = binary()
    for _ in range(10_000):
        x, y = rng.normal(0, 2), rng.normal(0, 3)
        assert g.log_ratio(x, y) <= g.log_ratio_sup(x) + 1e-12
        xi = int(rng.integers(16))
        yu = rng.uniform(-0.5, 15.5)
        assert u.density_ratio(xi, yu) <= u.ratio_sup(xi)
        xc, yc = int(rng.integers(2)), int(rng.integers(2))
        assert c.density_ratio(xc, yc) <= c.ratio_sup(xc) + 1e-15


def test_uniform_additive_values():
    m = UniformAdditiveMechanism(16)
    assert ratio_sup(m, 3) == 16.0
    assert m.density_ratio(3, 3.2) == 16.0
    assert m.density_ratio(3, 4.0) == 0.0
    assert mutual_information(m) == pytest.approx(4.0)
    with pytest.raises(UndefinedRatioError):
        m.density_ratio(0, 20.0)
    mean, se = expected_log_ratio_sup(m, DeterministicStream(1), 1000)
    assert mean == 4.0 and se == 0.0


def test_gaussian_information_closed_form_and_quadrature():
    m = GaussianGaussianMechanism(1.0, 0.5)
    assert mutual_information(m) == pytest.approx(0.5 * math.log2(5), abs=1e-12)
    s = m.marginal_std

    def integrand(y, x):
        pxy = stats.norm.pdf(x) * stats.norm.pdf(y, x, 0.5)
        return pxy * math.log2(stats.norm.pdf(y, x, 0.5) / stats.norm.pdf(y, 0, s))

    oracle = integrate.dblquad(integrand, -9, 9, lambda x: x - 5, lambda x: x + 5)[0]
    assert mutual_information(m) == pytest.approx(oracle, abs=1e-6)


def test_uniform_additive_information_by_quadrature():
    m = UniformAdditiveMechanism(16)
    # h(Y) - h(U): Y is uniform on (-1/2, 15.5) so h(Y) = lb 16 and h(U) = 0
    py = 1 / 16
    h_y = integrate.quad(lambda y: -py * math.log2(py), -0.5, 15.5)[0]
    assert mutual_information(m) == pytest.approx(h_y, abs=1e-9)


def test_gaussian_expected_log_sup_identity():
    m = GaussianGaussianMechanism(1.0, 0.5)
    mean, se = expected_log_ratio_sup(m, DeterministicStream(5), 20_000)
    target = 0.5 * math.log2(5) + 0.5 * LB_E
    assert abs(mean - target) < 3 * se + 1e-9


def test_additive_unimodal_gaussian_matches_gaussian_gaussian():
    a = AdditiveUnimodalMechanism(Normal(0, 1), Normal(0, 0.5))
    g = GaussianGaussianMechanism(1.0, 0.5)
    assert a.mutual_information() == pytest.approx(g.mutual_information())
    assert a.ratio_sup(0.7) == pytest.approx(g.ratio_sup(0.7))
    assert a.density_ratio(0.3, -0.4) == pytest.approx(g.density_ratio(0.3, -0.4))


def test_additive_unimodal_laplace_has_no_closed_form():
    a = AdditiveUnimodalMechanism(Normal(0, 1), Laplace(0, 0.5))
    with pytest.raises(MutualInformationUnavailable):
        a.mutual_information()
    oracle = integrate.quad(lambda t: stats.norm.pdf(t) * stats.laplace.pdf(0.4 - t, 0, 0.5),
                            -np.inf, np.inf)[0]
    assert a.marginal_pdf(0.4) == pytest.approx(oracle, rel=1e-7)


def test_noise_must_be_unimodal():
    with pytest.raises(ValueError):
        AdditiveUnimodalMechanism(Normal(0, 1), DiscreteUniform(4))


@pytest.mark.parametrize("dist,oracle", [
    (Normal(0.5, 2.0), stats.norm(0.5, 2.0)),
    (Laplace(-1.0, 0.7), stats.laplace(-1.0, 0.7)),
    (Uniform(-0.5, 0.5), stats.uniform(-0.5, 1.0)),
])
def test_distribution_cdfs_match_scipy(dist, oracle):
    for t in (-3.0, -0.4, 0.0, 0.2, 1.9):
        assert dist.cdf(t) == pytest.approx(oracle.cdf(t), abs=1e-14)
        assert dist.sf(t) == pytest.approx(oracle.sf(t), abs=1e-14)
        assert dist.pdf(t) == pytest.approx(oracle.pdf(t), abs=1e-14)
    assert dist.entropy_bits() == pytest.approx(oracle.entropy() * LB_E, abs=1e-12)


def test_discrete_uniform_cdf():
    d = DiscreteUniform(16)
    assert d.cdf(7.5) == 0.5
    assert d.cdf(-1) == 0.0 and d.cdf(100) == 1.0
    assert d.pmf(3) == 1 / 16 and d.pmf(16) == 0.0


@pytest.mark.parametrize("mech", [
    binary(),
    GaussianGaussianMechanism(2.0, 0.3),
    UniformAdditiveMechanism(8),
    AdditiveUnimodalMechanism(Normal(0, 1), Laplace(0, 0.5)),
])
def test_params_roundtrip(mech):
    again = mechanism_from_params(mech.mechanism_id, mech.params())
    assert type(again) is type(mech)
    assert again.params() == mech.params()


def test_unknown_mechanism_id():
    with pytest.raises(ValueError):
        mechanism_from_params(99, [])
