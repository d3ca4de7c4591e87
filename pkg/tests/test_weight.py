import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from cauchyprod.errors import DomainError, UnsupportedError
from cauchyprod.specfun import ContourSpec
from cauchyprod.weight import (
    EnsembleConfig,
    RadialProfile,
    log_weight,
    radial_cdf,
    radial_integral,
    weight_at_origin,
    weight_closed_n1,
    weight_meijer,
    weight_mellin,
    weight_moment,
    weight_origin_at_zero,
    weight_origin_limit,
    weight_profile,
    weight_quadrature,
    weight_saddle_asymptotic,
)

mp.mp.dps = 25


def factor_weight(u, N, nu):
    """Eigenvalue weight of one factor in u = |x|^2."""
    return u**nu * (1 + u) ** (-(N + nu + 1))


def convolution_oracle(r, N, nu):
    """Weight of a product of independent factors: repeated Mellin convolution in u,
    with the complex-plane measure d^2x/|x|^2 = pi du/u. Uses mpmath throughout."""
    u = mp.mpf(r) ** 2
    if len(nu) == 2:
        f = lambda v: factor_weight(v, N, nu[0]) * factor_weight(u / v, N, nu[1]) / v
        return float(mp.pi * mp.quad(f, [0, u, mp.inf]))
    if len(nu) == 3:
        inner = lambda w: mp.pi * mp.quad(
            lambda v: factor_weight(v, N, nu[1]) * factor_weight(w / v, N, nu[2]) / v, [0, w, mp.inf]
        )
        f = lambda v: factor_weight(v, N, nu[0]) * inner(u / v) / v
        return float(mp.pi * mp.quad(f, [0, u, mp.inf]))
    raise ValueError


# ---------------------------------------------------------------- EnsembleConfig


def test_config_derived_fields():
    cfg = EnsembleConfig(3, (2, 2, 3, 4))
    assert cfg.N == 2 and cfg.nu == (0, 0, 1) and cfg.alpha == 1
    assert not cfg.is_square
    assert EnsembleConfig.square(2, 5).is_square


@pytest.mark.parametrize("n,dims", [(2, (3, 2, 4)), (2, (3, 3)), (0, (1,)), (1, (0, 0))])
def test_config_rejects(n, dims):
    with pytest.raises(DomainError):
        EnsembleConfig(n, dims)


@given(st.integers(1, 30), st.lists(st.integers(0, 5), min_size=0, max_size=3))
def test_from_nu_round_trip(N, rest):
    nu = [0] + sorted(rest)
    cfg = EnsembleConfig.from_nu(N, nu)
    assert cfg.nu == tuple(nu) and cfg.N == N and cfg.alpha == sum(nu)


# ---------------------------------------------------------------- routes


@pytest.mark.parametrize("N", [1, 3, 8])
@pytest.mark.parametrize("r", [0.05, 0.7, 1.0, 2.3, 5.0])
def test_n1_routes_equal_closed_form(N, r):
    cfg = EnsembleConfig.square(1, N)
    ref = (1 + r * r) ** (-(N + 1))
    assert weight_closed_n1(r, N) == pytest.approx(ref, rel=1e-14)
    assert weight_meijer(r, cfg) == pytest.approx(ref, rel=1e-10)
    assert weight_quadrature(r, cfg) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("N,nu", [(1, (0, 0)), (3, (0, 0)), (3, (0, 2)), (6, (0, 1))])
@pytest.mark.parametrize("r", [0.1, 1.0, 3.0])
def test_n2_routes_match_convolution_oracle(N, nu, r):
    cfg = EnsembleConfig.from_nu(N, nu)
    ref = convolution_oracle(r, N, nu)
    assert weight_meijer(r, cfg) == pytest.approx(ref, rel=1e-9)
    assert weight_quadrature(r, cfg) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("N,nu,r", [(2, (0, 0, 0), 0.5), (2, (0, 1, 1), 1.7)])
def test_n3_routes_match_convolution_oracle(N, nu, r):
    mp.mp.dps = 15
    try:
        ref = convolution_oracle(r, N, nu)
    finally:
        mp.mp.dps = 25
    cfg = EnsembleConfig.from_nu(N, nu)
    assert weight_meijer(r, cfg) == pytest.approx(ref, rel=1e-8)
    assert weight_quadrature(r, cfg) == pytest.approx(ref, rel=1e-8)


def test_explicit_contour_route():
    cfg = EnsembleConfig.square(2, 3)
    val = weight_meijer(1.2, cfg, ContourSpec(0.5, 60.0, 8192))
    assert val == pytest.approx(weight_meijer(1.2, cfg), rel=1e-10)
    with pytest.raises(DomainError):
        weight_meijer(1.2, cfg, ContourSpec(5.0, 60.0))


def test_quadrature_limited_to_n4():
    with pytest.raises(UnsupportedError):
        weight_quadrature(1.0, EnsembleConfig.square(5, 2))


def test_unknown_route():
    with pytest.raises(DomainError):
        log_weight(1.0, EnsembleConfig.square(2, 2), route="magic")
    with pytest.raises(DomainError):
        log_weight(1.0, EnsembleConfig.square(2, 2), route="closed")


@given(st.integers(1, 3), st.integers(1, 10), st.floats(0.05, 4.0), st.floats(1.01, 2.0))
@settings(max_examples=40, deadline=None)
def test_square_weight_decreasing(n, N, r, factor):
    cfg = EnsembleConfig.square(n, N)
    assert weight_meijer(r * factor, cfg) < weight_meijer(r, cfg)


@given(st.integers(1, 12), st.floats(0.05, 6.0))
@settings(max_examples=30, deadline=None)
def test_weight_positive_and_bounded(N, r):
    cfg = EnsembleConfig.from_nu(N, (0, 1))
    w = weight_meijer(r, cfg)
    assert 0 < w <= weight_at_origin(cfg) * (1 + 1e-9)


# ---------------------------------------------------------------- origin value


def test_weight_at_origin_values():
    assert weight_at_origin(EnsembleConfig.square(1, 4)) == 1.0
    assert math.isinf(weight_at_origin(EnsembleConfig.square(2, 4)))
    N = 4
    cfg = EnsembleConfig.from_nu(N, (0, 1))
    assert weight_at_origin(cfg) == pytest.approx(math.pi / (N + 1), rel=1e-14)
    assert weight_meijer(1e-6, cfg) == pytest.approx(math.pi / (N + 1), rel=1e-4)
    assert weight_quadrature(0.0, cfg) == weight_at_origin(cfg)


# ---------------------------------------------------------------- moments


@pytest.mark.parametrize("n,dims", [(1, (4, 4)), (2, (3, 3, 4)), (2, (3, 4, 4)), (3, (2, 2, 3, 4))])
def test_moments_match_quadrature(n, dims):
    cfg = EnsembleConfig(n, dims)
    for k in range(cfg.N):
        num = radial_integral(lambda r: weight_meijer(r, cfg), power=2 * k)
        assert num == pytest.approx(weight_moment(k, cfg), rel=1e-8)


def test_n1_moment_closed_form():
    # 2 pi int r^(2k+1) (1+r^2)^-(N+1) dr = pi B(k+1, N-k)
    N = 6
    cfg = EnsembleConfig.square(1, N)
    for k in range(N):
        assert weight_moment(k, cfg) == pytest.approx(math.pi * special.beta(k + 1, N - k), rel=1e-13)


def test_moment_domain():
    cfg = EnsembleConfig.square(2, 3)
    with pytest.raises(DomainError):
        weight_moment(3, cfg)
    with pytest.raises(DomainError):
        weight_moment(1.5, cfg)


@given(st.floats(0.1, 3.9))
@settings(max_examples=15, deadline=None)
def test_mellin_matches_numeric_transform(s):
    cfg = EnsembleConfig.from_nu(3, (0, 1))
    num = radial_integral(lambda r: weight_meijer(r, cfg), power=2 * s - 2) / math.pi
    assert num == pytest.approx(weight_mellin(s, cfg), rel=1e-7)


def test_mellin_at_integers_gives_moments():
    cfg = EnsembleConfig.from_nu(4, (0, 2))
    for k in range(4):
        assert math.pi * weight_mellin(k + 1, cfg) == pytest.approx(weight_moment(k, cfg), rel=1e-13)
    with pytest.raises(DomainError):
        weight_mellin(5.0, cfg)


# ---------------------------------------------------------------- asymptotics


def test_saddle_ratio_improves_with_N():
    ratios = [weight_meijer(1.0, EnsembleConfig.square(2, N)) / weight_saddle_asymptotic(1.0, EnsembleConfig.square(2, N)) for N in (15, 30, 60, 120)]
    dev = np.abs(np.asarray(ratios) - 1)
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 0.01


def test_saddle_n1_is_exact():
    cfg = EnsembleConfig.square(1, 7)
    assert weight_saddle_asymptotic(1.3, cfg) == pytest.approx(weight_closed_n1(1.3, 7), rel=1e-13)


def test_saddle_domain():
    with pytest.raises(DomainError):
        weight_saddle_asymptotic(0.0, EnsembleConfig.square(2, 5))


@pytest.mark.parametrize("nu2", [0, 1, 3])
@pytest.mark.parametrize("x", [0.2, 1.0, 2.5])
def test_origin_limit_bessel_closed_form(nu2, x):
    # n = 2: the limit is 2 pi x^nu K_nu(2x)
    cfg = EnsembleConfig.from_nu(5, (0, nu2))
    ref = 2 * math.pi * x**nu2 * special.kv(nu2, 2 * x)
    assert weight_origin_limit(x, cfg) == pytest.approx(ref, rel=1e-9)
    assert weight_origin_limit(x, cfg, route="mellin") == pytest.approx(ref, rel=1e-10)


def test_origin_limit_n1_is_gaussian():
    cfg = EnsembleConfig.square(1, 3)
    for route in ("integral", "mellin"):
        assert weight_origin_limit(1.3, cfg, route=route) == pytest.approx(math.exp(-1.69), rel=1e-11)


def test_origin_limit_n3_routes_agree():
    cfg = EnsembleConfig.from_nu(4, (0, 1, 2))
    for x in (0.3, 1.0, 2.0):
        assert weight_origin_limit(x, cfg) == pytest.approx(weight_origin_limit(x, cfg, route="mellin"), rel=1e-8)


@pytest.mark.parametrize("nu", [(0, 0), (0, 1)])
def test_origin_limit_is_scaling_limit(nu):
    xi = 0.8
    errs = []
    for N in (50, 200, 800):
        cfg = EnsembleConfig.from_nu(N, nu)
        scaled = N ** cfg.alpha * weight_quadrature(xi / N, cfg)
        errs.append(abs(scaled / weight_origin_limit(xi, cfg) - 1))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 5e-3


def test_origin_at_zero():
    assert weight_origin_at_zero(EnsembleConfig.square(1, 2)) == 1.0
    assert math.isinf(weight_origin_at_zero(EnsembleConfig.square(2, 2)))
    cfg = EnsembleConfig.from_nu(3, (0, 2))
    assert weight_origin_at_zero(cfg) == pytest.approx(math.pi * math.gamma(2), rel=1e-14)
    assert weight_origin_limit(1e-5, cfg) == pytest.approx(weight_origin_at_zero(cfg), rel=1e-6)


# ---------------------------------------------------------------- profiles


def test_profile_validation():
    with pytest.raises(DomainError):
        RadialProfile([0.0, 0.0], [1.0, 1.0], "weight")
    with pytest.raises(DomainError):
        RadialProfile([0.0, 1.0], [1.0, -1.0], "density")
    with pytest.raises(DomainError):
        RadialProfile([0.0, 1.0], [0.5, 0.2], "cdf")
    with pytest.raises(DomainError):
        RadialProfile([], [], "cdf")
    p = RadialProfile([0.0, 1.0], [1.0, 2.0], "weight")
    with pytest.raises(ValueError):
        p.values[0] = 3.0


def test_weight_profile_methods():
    cfg = EnsembleConfig.square(1, 3)
    radii = np.linspace(0.1, 3, 7)
    ref = weight_profile(radii, cfg, "closed").values
    for method in ("meijer", "quad", "saddle"):
        np.testing.assert_allclose(weight_profile(radii, cfg, method).values, ref, rtol=1e-9)
    with pytest.raises(DomainError):
        weight_profile(radii, cfg, "nope")
    with pytest.raises(DomainError):
        weight_profile([], cfg, "closed")
    with pytest.raises(DomainError):
        weight_profile(radii, EnsembleConfig.square(2, 3), "closed")


def test_radial_cdf_of_n1_density():
    radii = np.linspace(0, 20, 4001)
    dens = RadialProfile(radii, 1 / (np.pi * (1 + radii**2) ** 2), "density")
    cdf = radial_cdf(dens)
    np.testing.assert_allclose(cdf.values, radii**2 / (1 + radii**2), atol=1e-5)
    with pytest.raises(DomainError):
        radial_cdf(RadialProfile(radii[1:], dens.values[1:], "density"))


def test_radial_integral_gaussian():
    assert radial_integral(lambda r: math.exp(-r * r)) == pytest.approx(math.pi, rel=1e-12)
    assert radial_integral(lambda r: math.exp(-r * r), power=2) == pytest.approx(math.pi, rel=1e-12)
