import math

import numpy as np
import pytest
from scipy.stats import kendalltau, kstest

from evdep.errors import NumericDomainError, ParameterError
from evdep.models import PickandsModel, copula_cdf, copula_partial_u, pickands_A, pickands_A_prime
from evdep.numerics import RngStream

SWEEP = [
    ("gumbel", 1.0), ("gumbel", 1.5), ("gumbel", 2.0), ("gumbel", 4.0),
    ("husler-reiss", 0.25), ("husler-reiss", 0.5), ("husler-reiss", 1.0), ("husler-reiss", 2.0),
    ("tawn", 0.0), ("tawn", 0.25), ("tawn", 0.5), ("tawn", 1.0),
]


def models():
    return [PickandsModel(f, th) for f, th in SWEEP]


class TestPickandsA:
    def test_gumbel_half(self):
        assert pickands_A(PickandsModel("gumbel", 2), 0.5) == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_tawn_half(self):
        assert pickands_A(PickandsModel("tawn", 0.25), 0.5) == pytest.approx(0.9375, abs=1e-15)

    def test_husler_reiss_half(self):
        expected = 0.5 * (1 + math.erf(0.5 / math.sqrt(2)))
        assert pickands_A(PickandsModel("hr", 0.5), 0.5) == pytest.approx(expected, abs=1e-12)

    def test_independence(self):
        t = np.linspace(0, 1, 11)
        assert np.all(PickandsModel("gumbel", 1).A(t) == 1.0)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_endpoints_exact(self, model):
        assert model.A(0.0) == 1.0
        assert model.A(1.0) == 1.0

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_envelope_and_convexity(self, model):
        t = np.linspace(0, 1, 1001)
        a = model.A(t)
        assert np.all(a <= 1 + 1e-12)
        assert np.all(a >= np.maximum(t, 1 - t) - 1e-12)
        assert np.all(np.diff(a, 2) >= -1e-8)

    @pytest.mark.parametrize(
        "family,theta", [("gumbel", 0.5), ("husler-reiss", 0.0), ("tawn", 1.5), ("tawn", -0.1), ("frank", 1.0)]
    )
    def test_invalid_parameter(self, family, theta):
        with pytest.raises(ParameterError):
            PickandsModel(family, theta)


class TestAPrime:
    def test_gumbel_symmetric_point(self):
        assert abs(pickands_A_prime(PickandsModel("gumbel", 2), 0.5)) < 1e-15

    def test_tawn_near_zero(self):
        assert pickands_A_prime(PickandsModel("tawn", 0.25), 1e-12) == pytest.approx(-0.25, abs=1e-10)

    def test_gumbel_quarter(self):
        # theta = 2: A = sqrt(t^2 + (1-t)^2), A' = (2t - 1) / A
        expected = (2 * 0.25 - 1) / math.sqrt(0.25**2 + 0.75**2)
        assert pickands_A_prime(PickandsModel("gumbel", 2), 0.25) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.6324555, abs=1e-7)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_matches_finite_differences(self, model):
        t = np.linspace(0.01, 0.99, 99)
        step = 1e-6
        fd = (model.A(t + step) - model.A(t - step)) / (2 * step)
        assert np.max(np.abs(model.A_prime(t) - fd)) < 1e-5

    def test_endpoints_rejected(self):
        with pytest.raises(NumericDomainError):
            PickandsModel("gumbel", 2).A_prime(0.0)


class TestCopula:
    def test_independence(self):
        assert copula_cdf(PickandsModel("gumbel", 1), 0.3, 0.7) == pytest.approx(0.21, abs=1e-15)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_uniform_margins(self, model):
        assert model.cdf(0.4, 1.0) == 0.4
        assert model.cdf(1.0, 0.4) == 0.4
        assert model.cdf(0.0, 0.4) == 0.0
        assert model.cdf(0.4, 0.0) == 0.0
        assert model.cdf(1.0, 1.0) == 1.0

    def test_gumbel_value(self):
        assert copula_cdf(PickandsModel("gumbel", 2), 0.5, 0.5) == pytest.approx(0.25 ** math.sqrt(0.5), abs=1e-14)
        assert copula_cdf(PickandsModel("gumbel", 2), 0.5, 0.5) == pytest.approx(0.3752142, abs=1e-7)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_two_increasing(self, model):
        rng = np.random.default_rng(11)
        a = np.sort(rng.random((500, 2)), axis=1)
        b = np.sort(rng.random((500, 2)), axis=1)
        u1, u2, v1, v2 = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        vol = model.cdf(u2, v2) - model.cdf(u1, v2) - model.cdf(u2, v1) + model.cdf(u1, v1)
        assert np.all(vol >= -1e-12)

    @pytest.mark.parametrize("model", models(), ids=str)
    @pytest.mark.parametrize("s", [2, 3, 10])
    def test_max_stability(self, model, s):
        g = np.linspace(0.05, 0.95, 19)
        u, v = np.meshgrid(g, g)
        lhs = model.cdf(u ** (1 / s), v ** (1 / s)) ** s
        assert np.max(np.abs(lhs - model.cdf(u, v))) < 1e-10


class TestPartials:
    def test_independence(self):
        assert copula_partial_u(PickandsModel("gumbel", 1), 0.3, 0.7) == pytest.approx(0.7, abs=1e-14)

    def test_diagonal_identity(self):
        m = PickandsModel("gumbel", 2)
        u, t = 0.49, 0.5
        assert m.partial_u(u ** (1 - t), u**t) == pytest.approx(m.partial_u_diag(u, t), abs=1e-12)
        assert m.partial_v(u ** (1 - t), u**t) == pytest.approx(m.partial_v_diag(u, t), abs=1e-12)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_diagonal_identity_grid(self, model):
        for t in (0.1, 0.3, 0.5, 0.8):
            u = np.linspace(0.05, 0.95, 10)
            assert np.allclose(model.partial_u(u ** (1 - t), u**t), model.partial_u_diag(u, t), atol=1e-12)
            assert np.allclose(model.partial_v(u ** (1 - t), u**t), model.partial_v_diag(u, t), atol=1e-12)

    def test_finite_difference_tawn(self):
        m = PickandsModel("tawn", 0.25)
        h = 1e-6
        fd_u = (m.cdf(0.3 + h, 0.7) - m.cdf(0.3 - h, 0.7)) / (2 * h)
        fd_v = (m.cdf(0.3, 0.7 + h) - m.cdf(0.3, 0.7 - h)) / (2 * h)
        assert m.partial_u(0.3, 0.7) == pytest.approx(fd_u, abs=1e-6)
        assert m.partial_v(0.3, 0.7) == pytest.approx(fd_v, abs=1e-6)

    @pytest.mark.parametrize("model", models(), ids=str)
    def test_in_unit_interval(self, model):
        g = np.linspace(0.01, 0.99, 30)
        u, v = np.meshgrid(g, g)
        for val in (model.partial_u(u, v), model.partial_v(u, v)):
            assert np.all((val >= 0) & (val <= 1))

    def test_boundary_rejected(self):
        with pytest.raises(NumericDomainError):
            PickandsModel("gumbel", 2).partial_u(0.0, 0.5)


def empirical_copula(x, g):
    return np.array([[np.mean((x[:, 0] <= a) & (x[:, 1] <= b)) for b in g] for a in g])


class TestSampler:
    def test_deterministic(self, gumbel2):
        a = gumbel2.sample(50, RngStream(5, 2))
        b = gumbel2.sample(50, RngStream(5, 2))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, gumbel2.sample(50, RngStream(5, 3)))

    def test_independence_kendall(self):
        x = PickandsModel("gumbel", 1).sample(2000, RngStream(1))
        tau, _ = kendalltau(x[:, 0], x[:, 1])
        assert -0.05 < tau < 0.05

    def test_gumbel_kendall(self, gumbel2):
        # Gumbel: tau = 1 - 1/theta
        x = gumbel2.sample(4000, RngStream(2))
        tau, _ = kendalltau(x[:, 0], x[:, 1])
        assert abs(tau - 0.5) < 0.03

    @pytest.mark.parametrize("model", [PickandsModel("gumbel", 2), PickandsModel("hr", 0.5), PickandsModel("tawn", 0.25)], ids=str)
    def test_sup_distance_and_margins(self, model):
        x = model.sample(10000, RngStream(20240, 1))
        assert np.all((x > 0) & (x < 1))
        g = np.linspace(0.05, 1.0, 20)
        uu, vv = np.meshgrid(g, g, indexing="ij")
        assert np.max(np.abs(empirical_copula(x, g) - model.cdf(uu, vv))) <= 0.02
        for j in range(2):
            assert kstest(x[:, j], "uniform").pvalue > 0.001

    def test_resample_count_reported(self, gumbel2):
        x, k = gumbel2.sample(100, RngStream(1), return_resamples=True)
        assert x.shape == (100, 2)
        assert k >= 0

    def test_bad_size(self, gumbel2):
        with pytest.raises(ParameterError):
            gumbel2.sample(0, RngStream(1))
