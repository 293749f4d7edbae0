import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from bnreduce.bubbles import (BubbleParams, alpha_N, ansatz_residual, bubble,
                              d_bubble_dlambda, d_bubble_dx, interaction_integral,
                              projection_psi, sobolev_energy, standard_bubble)
from bnreduce.green import Ball, BallGreen
from bnreduce.reduced import Config, ProblemParams, rate_constant


def radial_laplacian(f, r, N, h=1e-4):
    return (f(r + h) - 2 * f(r) + f(r - h)) / h ** 2 + (N - 1) / r * (f(r + h) - f(r - h)) / (2 * h)


@pytest.mark.parametrize("N", [3, 4, 5, 6, 7])
def test_standard_bubble_peak_is_one(N):
    assert standard_bubble(N, np.zeros(N)) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_bubble_solves_critical_equation(N):
    b = BubbleParams(np.zeros(N), 2.5)
    e = np.eye(N)[0]
    U = lambda r: bubble(b, r * e)
    p = (N + 2) / (N - 2)
    for r in (0.1, 0.4, 1.3):
        assert -radial_laplacian(U, r, N) == pytest.approx(U(r) ** p, rel=1e-5)


def test_bubble_parameter_derivatives():
    N = 5
    x = np.array([0.1, -0.2, 0.0, 0.3, 0.1])
    lam = 3.0
    y = np.array([[0.2, 0.1, 0.0, -0.1, 0.0], [0.5, 0.5, 0.1, 0.0, 0.2]])
    h = 1e-6
    fd = (bubble(BubbleParams(x, lam + h), y) - bubble(BubbleParams(x, lam - h), y)) / (2 * h)
    assert np.allclose(d_bubble_dlambda(BubbleParams(x, lam), y), fd, rtol=1e-7)
    dx = d_bubble_dx(BubbleParams(x, lam), y)
    for i in range(N):
        e = np.zeros(N)
        e[i] = h
        fd = (bubble(BubbleParams(x + e, lam), y) - bubble(BubbleParams(x - e, lam), y)) / (2 * h)
        assert np.allclose(dx[..., i], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_sobolev_energy_matches_best_constant(N):
    S = np.pi * N * (N - 2) * (gamma(N / 2) / gamma(N)) ** (2 / N)
    assert sobolev_energy(N) == pytest.approx(S ** (N / 2), rel=1e-12)


def test_bubble_params_validation():
    with pytest.raises(ValueError):
        BubbleParams(np.zeros(3), -1.0)


# ---------------------------------------------------------------- projections

def test_psi_matches_bubble_on_boundary_and_pu_positive(ball5):
    b = BubbleParams(np.array([0.3, 0, 0, 0, 0]), 7.0)
    pp = projection_psi(ball5, b)
    bp = np.array([[0, 0.6, 0.8, 0, 0], [-1 + 1e-14, 0, 0, 0, 0]])
    assert np.allclose(pp(bp), bubble(b, bp), rtol=1e-10)
    inner = np.random.default_rng(0).uniform(-0.4, 0.4, (50, 5))
    assert np.all(pp.projected(inner) > 0)
    assert np.all(pp(inner) > 0)


def test_psi_surrogate_gap_decays_like_inverse_square(ball5):
    xs = np.array([0.3, 0, 0, 0, 0])
    y = np.array([0.2, 0.1, 0, 0, 0])
    lams = np.array([10, 30, 100, 300, 1000.0])
    gaps = []
    for lam in lams:
        p = projection_psi(ball5, BubbleParams(xs, lam))
        gaps.append(abs(p(y) - p.surrogate(y)) / abs(p(y)))
    slope = np.polyfit(np.log(lams), np.log(gaps), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.2)


# ---------------------------------------------------------------- interaction integrals

@settings(max_examples=10, deadline=None)
@given(l1=st.floats(0.5, 20), l2=st.floats(0.5, 20), d=st.floats(0.0, 2.0))
def test_interaction_symmetric(l1, l2, d):
    N = 5
    b1 = BubbleParams(np.zeros(N), l1)
    b2 = BubbleParams(np.r_[d, 0, 0, 0, 0], l2)
    assert interaction_integral(b1, b2).value == pytest.approx(
        interaction_integral(b2, b1).value, rel=1e-7)


@pytest.mark.parametrize("N", [3, 5])
def test_interaction_coincident_equals_critical_norm(N):
    b = BubbleParams(np.zeros(N), 4.0)
    assert interaction_integral(b, b).value == pytest.approx(sobolev_energy(N), rel=1e-9)


def test_interaction_bound_ratio_bounded():
    N = 5
    ratios = []
    for lam in np.geomspace(1.0, 10 ** 1.5, 7):          # lam^2 d^2 over three decades
        b1 = BubbleParams(np.zeros(N), lam)
        b2 = BubbleParams(np.r_[1.0, 0, 0, 0, 0], lam)
        ratios.append(interaction_integral(b1, b2).bound_ratio)
    assert max(ratios) <= 10 and min(ratios) > 0.1
    assert ratios[-1] == pytest.approx(1.0, abs=0.01)


# ---------------------------------------------------------------- ansatz residuals

def test_single_peak_residual_shrinks(ball5):
    params = ProblemParams(5, 3.0)
    R = ball5.robin(np.zeros(5))
    res = []
    for lam in (10.0, 100.0, 1000.0):
        eps = rate_constant(params, R) * lam ** -params.rate_exponent
        out = ansatz_residual(ball5, params.with_eps(eps), Config(np.zeros((1, 5)), [lam]))
        res.append(out["relative_residual"])
    assert res[0] > res[1] > res[2]
    assert res[2] < 1e-6


def test_two_peak_energy_additive(ball5):
    params = ProblemParams(5, 3.0)
    cfg = Config([[0.5, 0, 0, 0, 0], [-0.5, 0, 0, 0, 0]], [1000.0, 1000.0])
    e = ansatz_residual(ball5, params, cfg)["energy"]
    assert e / (2 * sobolev_energy(5) / 5) == pytest.approx(1.0, abs=0.05)


def test_large_ball_single_bubble_nearly_exact():
    g = BallGreen(Ball(np.zeros(5), 1e3))
    out = ansatz_residual(g, ProblemParams(5, 3.0), Config(np.zeros((1, 5)), [1.0]))
    assert out["relative_residual"] < 1e-5


def test_alpha_value():
    assert alpha_N(5) == pytest.approx(15 ** 0.75, rel=1e-15)
