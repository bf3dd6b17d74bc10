from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gammaincinv

from crib_bse.errors import InvalidParams, ScoreSingularity
from crib_bse.ggd import GgdParams, ggd_log_pdf, ggd_score, kappa_bar, sample_ggd

alphas = st.floats(0.2, 5.0)
gammas = st.floats(0.0, 0.9)


def _mp_log_pdf(s: complex, alpha: float, gamma: float) -> float:
    """Direct high-precision evaluation of the density formula."""
    mpmath.mp.dps = 40
    a, g = mpmath.mpf(alpha), mpmath.mpf(gamma)
    x, y = mpmath.mpf(s.real), mpmath.mpf(s.imag)
    rho = mpmath.gamma(2 / a) / mpmath.gamma(1 / a)
    norm = a * rho / (mpmath.pi * mpmath.gamma(1 / a) * mpmath.sqrt(1 - g**2))
    q = rho * (x**2 / (1 + g) + y**2 / (1 - g))
    return float(mpmath.log(norm) - q**a)


def test_gaussian_peak_and_shape():
    p = GgdParams(1.0, 0.0)
    assert ggd_log_pdf(0.0, p) == pytest.approx(-math.log(math.pi), abs=1e-15)
    s = np.array([0.3 + 0.1j, -2.0 + 1.5j, 4j])
    np.testing.assert_allclose(ggd_log_pdf(s, p) - ggd_log_pdf(0.0, p), -np.abs(s) ** 2, atol=1e-13)


def test_log_pdf_against_high_precision():
    s = 0.3 + 0.4j
    assert ggd_log_pdf(s, GgdParams(0.5, 0.5)) == pytest.approx(_mp_log_pdf(s, 0.5, 0.5), abs=1e-12)


@given(alpha=alphas, gamma=gammas, re=st.floats(-3, 3), im=st.floats(-3, 3))
def test_log_pdf_matches_mpmath(alpha, gamma, re, im):
    s = complex(re, im)
    assert ggd_log_pdf(s, GgdParams(alpha, gamma)) == pytest.approx(_mp_log_pdf(s, alpha, gamma), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("alpha,gamma", [(0.5, 0.0), (1.0, 0.0), (2.0, 0.0), (0.7, 0.5), (3.0, 0.8)])
def test_density_normalisation(alpha, gamma):
    p = GgdParams(alpha, gamma)
    # whitened polar coordinates; the radius bound leaves tail mass 1e-10
    r_max = math.sqrt(gammaincinv(1.0 / alpha, 1.0 - 1e-10) ** (1.0 / alpha) / p.rho)
    jac = math.sqrt(1 - gamma**2)

    def f(r, theta):
        s = complex(math.sqrt(1 + gamma) * r * math.cos(theta), math.sqrt(1 - gamma) * r * math.sin(theta))
        return math.exp(ggd_log_pdf(s, p)) * jac * r

    total, _ = integrate.dblquad(f, 0.0, 2 * math.pi, 0.0, r_max, epsabs=1e-10, epsrel=1e-8)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_gaussian_score_is_conjugate():
    s = np.array([1 + 2j, -0.5j, 3.0])
    np.testing.assert_allclose(ggd_score(s, GgdParams(1.0, 0.0)), s.conj(), atol=1e-14)


def _fd_score(s: complex, p: GgdParams, h: float = 1e-5) -> complex:
    """-d/ds log p = -(d/dx - i d/dy)/2 by central differences."""
    dx = (ggd_log_pdf(s + h, p) - ggd_log_pdf(s - h, p)) / (2 * h)
    dy = (ggd_log_pdf(s + 1j * h, p) - ggd_log_pdf(s - 1j * h, p)) / (2 * h)
    return -0.5 * (dx - 1j * dy)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.9])
@pytest.mark.parametrize("s", [1.0 + 0j, 0.3 - 0.8j])
def test_score_matches_finite_differences(alpha, gamma, s):
    p = GgdParams(alpha, gamma)
    fd = _fd_score(s, p)
    assert abs(ggd_score(s, p) - fd) <= 1e-5 * abs(fd)


def test_score_singular_at_origin_for_super_gaussian():
    p = GgdParams(0.5, 0.0)
    with pytest.raises(ScoreSingularity):
        ggd_score(0.0, p)
    assert np.isfinite(ggd_score(0.0, p, floor=1e-12))
    assert ggd_score(0.0, GgdParams(2.0, 0.0)) == 0


def test_kappa_bar_examples():
    assert kappa_bar(GgdParams(1.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert kappa_bar(GgdParams(1.0, 0.6)) == pytest.approx(1.5625, rel=1e-14)
    assert kappa_bar(GgdParams(2.0, 0.0)) == pytest.approx(4.0 / math.pi, rel=1e-14)


@given(alpha=alphas, gamma=gammas)
def test_kappa_bar_at_least_one(alpha, gamma):
    assert kappa_bar(GgdParams(alpha, gamma)) >= 1.0 - 1e-12


def test_kappa_bar_strictly_above_one_off_gaussian():
    for p in (GgdParams(0.99), GgdParams(1.01), GgdParams(1.0, 0.01)):
        assert kappa_bar(p) > 1.0


def test_invalid_parameters():
    for bad in ((0.0, 0.0), (-1.0, 0.0), (math.inf, 0.0), (1.0, 1.0), (1.0, -0.1)):
        with pytest.raises(InvalidParams):
            GgdParams(*bad)
    with pytest.raises(InvalidParams):
        sample_ggd(GgdParams(1.0), 0, np.random.default_rng(0))


def test_gaussian_sampler_moments():
    s = sample_ggd(GgdParams(1.0, 0.0), 1_000_000, np.random.default_rng(1))
    assert abs(s.mean()) < 0.005
    assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.01


def test_noncircular_pseudo_variance():
    s = sample_ggd(GgdParams(0.5, 0.8), 1_000_000, np.random.default_rng(2))
    assert abs(np.mean(s * s) - 0.8) < 0.01


@pytest.mark.parametrize("alpha,gamma", [(0.3, 0.0), (1.0, 0.0), (2.5, 0.4)])
def test_sampler_radial_law_two_sample(alpha, gamma):
    """Whitened radius of sampled data vs inverse-CDF draws of the radial law."""
    p = GgdParams(alpha, gamma)
    rng = np.random.default_rng(3)
    s = sample_ggd(p, 100_000, rng)
    r_sampled = np.sqrt(s.real**2 / (1 + gamma) + s.imag**2 / (1 - gamma))
    u = gammaincinv(1.0 / alpha, np.random.default_rng(4).uniform(size=100_000))
    r_ref = np.sqrt(u ** (1.0 / alpha) / p.rho)
    assert stats.ks_2samp(r_sampled, r_ref).pvalue > 0.01
    angle = np.angle(s.real / math.sqrt(1 + gamma) + 1j * s.imag / math.sqrt(1 - gamma))
    assert stats.kstest(angle, stats.uniform(-math.pi, 2 * math.pi).cdf).pvalue > 0.01


def test_sampler_is_deterministic():
    p = GgdParams(0.7, 0.3)
    a = sample_ggd(p, 1000, np.random.default_rng(9))
    b = sample_ggd(p, 1000, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
