import numpy as np
import pytest

from bnreduce import asymptotics as asy
from bnreduce.errors import ExponentOutOfRange, InsufficientData, PreconditionError
from bnreduce.radial import epsilon_for_height, integrate_ivp, sweep
from bnreduce.reduced import ProblemParams, single_peak_lambda

P5 = ProblemParams(5, 3.0)


def profiles(sweep):
    return [e.profile for e in sweep[1] if e.profile is not None]


# ---------------------------------------------------------------- rate tables

@pytest.mark.parametrize("N,q,lam,expected", [
    (6, 2.5, 100.0, 1e-4),
    (4, 3.0, np.e, np.exp(-2.0)),
    (4, 2.5, 10.0, 10.0 ** -1.0),
    (5, 2.2, 10.0, 10.0 ** -(3 * 2.2 - 5)),
    (5, 3.0, 10.0, 1e-2),
    (3, 5.0, 8.0, 0.125),
])
def test_concentration_scale_table(N, q, lam, expected):
    assert asy.F_rate(ProblemParams(N, q), lam) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("N,q,expected", [
    (3, 5.0, (-1.0, 0.0)),
    (4, 2.2, (-(2 * 2.2 - 3), 0.0)),
    (4, 2.5, (-2.0, 0.75)),
    (4, 3.0, (-2.0, 0.0)),
    (5, 2.1, (-(6 * 2.1 - 7) / 2, 0.0)),
    (5, 13 / 6, (-3.0, 0.7)),
    (5, 3.0, (-3.0, 0.0)),
    (6, 2.5, (-4.0, 2 / 3)),
    (7, 2.2, (-4.5, 9 / 14)),
])
def test_remainder_table(N, q, expected):
    e, lp = asy.w_decay_law(N, q)
    assert (e, lp) == pytest.approx(expected, rel=1e-14)


def test_tables_outside_range():
    with pytest.raises(ExponentOutOfRange):
        asy.w_decay_law(3, 3.0)
    with pytest.raises(ExponentOutOfRange):
        asy.F_rate(ProblemParams(3, 3.0), 10.0)


# ---------------------------------------------------------------- fits

def test_loglog_fit_exact_power():
    x = np.geomspace(1, 1e3, 8)
    slope, icpt, r2, n, span = asy.loglog_fit(x, 3.0 * x ** -1.7)
    assert slope == pytest.approx(-1.7, abs=1e-12)
    assert np.exp(icpt) == pytest.approx(3.0, rel=1e-10)
    assert n == 6 and r2 == pytest.approx(1.0)
    with pytest.raises(InsufficientData):
        asy.loglog_fit(x[:4], x[:4])


def test_blowup_fit_on_synthetic_data():
    lam = np.geomspace(10, 1e3, 10)
    C = asy.rate_constant(P5, 1.0 / (3 * asy.omega(5)))
    eps = C * lam ** -2.5 * (1 + 1 / lam)
    fit = asy.verify_blowup_rate(P5, eps, lam)
    assert fit.exponent == pytest.approx(-2.5, abs=0.01)
    assert fit.constant / fit.expected_constant == pytest.approx(1.001, rel=1e-12)
    assert not fit.span_ok                     # six points over 1.1 decades
    assert asy.verify_blowup_rate(P5, eps, lam, last=10).span_ok


def test_exponents_stable_under_denser_sweep(sweep_n5):
    # 31 shots on the same grid refine the 16; the last 11 cover the same lam window as the last 6
    dense = [e.profile for e in sweep(P5, np.geomspace(10.0, 1e4, 31), threads=4)
             if e.profile is not None]

    def exponents(prof, last):
        rate = asy.verify_blowup_rate(P5, [p.eps for p in prof], [p.lam_bubble for p in prof],
                                      last=last).exponent
        dec = [asy.extract_bubble(p, "projection") for p in prof]
        w = asy.verify_w_decay(P5, [d.lam for d in dec], [d.w_norm_h1 for d in dec],
                               last=last).exponent
        return rate, w

    r16, w16 = exponents(profiles(sweep_n5), 6)
    r31, w31 = exponents(dense, 11)
    assert abs(r16 - r31) < 0.1 * 0.05
    assert abs(w16 - w31) < 0.1 * 0.3


# ---------------------------------------------------------------- decomposition

def test_unperturbed_bubble_decomposes_exactly():
    prof = integrate_ivp(P5.with_eps(0.0), 300.0).profile()
    d = asy.extract_bubble(prof, "projection")
    assert d.lam == pytest.approx(prof.lam_bubble, rel=1e-6)
    assert d.w_norm_h1 < 1e-8
    peak = asy.extract_bubble(prof, "peak")
    assert peak.lam == prof.lam_peak
    with pytest.raises(ValueError):
        asy.extract_bubble(prof, "other")


def test_projection_fit_finds_global_minimum():
    # at this height the distance has a second, shallower basin near lam_bubble
    prof = epsilon_for_height(P5, 25.12).profile
    lams = np.exp(np.linspace(-3, 5, 801))
    scan = np.array([asy._w_norm(prof, lam) for lam in lams])
    d = asy.extract_bubble(prof, "projection")
    assert d.w_norm_h1 <= scan.min() + 1e-12
    assert d.lam == pytest.approx(lams[np.argmin(scan)], rel=0.01)


def test_projection_height_converges_to_bubble_height(sweep_n5):
    prof = profiles(sweep_n5)
    gaps = np.array([abs(asy.extract_bubble(p, "projection").lam / p.lam_bubble - 1) for p in prof])
    M = np.array([p.M for p in prof])
    tail = gaps[M >= 100]
    assert np.all(np.diff(tail) < 0)
    assert np.all(gaps[M >= 1000] < 0.01)


@pytest.mark.xfail(strict=True, reason="the projection fit differs from the bubble height "
                                       "by about 8% at M = 100; below 1% only from M ~ 400")
def test_projection_height_within_one_percent_from_M_100(sweep_n5):
    prof = [p for p in profiles(sweep_n5) if p.M >= 100]
    gap = max(abs(asy.extract_bubble(p, "projection").lam / p.lam_bubble - 1) for p in prof)
    assert gap <= 0.01


def test_rescaled_profile_approaches_standard_bubble(sweep_n5):
    gaps = [asy.rescaled_gap(p) for p in profiles(sweep_n5)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


# ---------------------------------------------------------------- pointwise checks

def test_sandwich_constants(sweep_n5):
    reps = [asy.sandwich_check(p) for p in profiles(sweep_n5)]
    assert all(r["ok"] for r in reps)
    assert max(r["C0"] for r in reps) <= 2
    assert asy.sandwich_stability(reps)["ok"]


def test_green_limit_improves(sweep_n5, ball5):
    gaps = [asy.green_limit_check(p, ball5, radii=(0.7,))[0]["gap"] for p in profiles(sweep_n5)]
    assert gaps[-1] < 0.05
    assert gaps[-1] < gaps[len(gaps) // 2] < gaps[0]


def test_concentration_ratio_bounded(sweep_n5, ball5):
    prof = profiles(sweep_n5)
    eps = np.array([e.eps for e in sweep_n5[1] if e.profile is not None])
    lam = np.array([p.lam_bubble for p in prof])
    lam_star = single_peak_lambda(P5, ball5.robin(np.zeros(5)))
    out = asy.verify_concentration(P5, eps, lam, lam_star)
    ratio = np.array(out["ratio"])
    assert out["x_deviation"] == 0.0
    sel = lam >= 10 ** (np.log10(lam.max()) - 2)          # last two decades
    assert ratio[sel].max() / ratio[sel].min() <= 10


# ---------------------------------------------------------------- Pohozaev balances

def test_local_identity_on_unperturbed_bubble():
    prof = integrate_ivp(P5.with_eps(0.0), 100.0).profile()
    for rho in (0.1, 0.3, 0.6, 1.0):
        assert asy.pohozaev_local(prof, rho).relative_residual < 1e-10
    with pytest.raises(PreconditionError):
        asy.pohozaev_global(prof)


def test_pohozaev_on_solution():
    prof = epsilon_for_height(P5, 1000.0).profile
    assert asy.pohozaev_global(prof).relative_residual < 1e-6
    assert asy.pohozaev_local(prof, 0.45).relative_residual < 1e-6
    with pytest.raises(ValueError):
        asy.pohozaev_local(prof, 0.33)


def test_pohozaev_residual_shrinks_with_tolerance():
    res = [asy.pohozaev_global(epsilon_for_height(P5, 300.0, rtol=t).profile).relative_residual
           for t in (1e-7, 1e-9)]
    assert res[1] < res[0] / 10


# ---------------------------------------------------------------- quadratic forms

@pytest.fixture(scope="module")
def fields(ball5):
    xs = np.array([0.2, 0.1, 0, 0, 0])
    zs = np.array([-0.3, 0.2, 0.1, 0, 0])
    ys = np.array([0.1, -0.5, 0, 0, 0])
    return xs, zs, ys, {k: asy.green_field(ball5, p) for k, p in (("x", xs), ("z", zs), ("y", ys))}


def test_quadratic_form_P_table(ball5, fields):
    xs, zs, ys, G = fields
    for th in (0.05, 0.1, 0.2):
        assert asy.quadratic_form_P(G["x"], G["x"], th, xs) == pytest.approx(
            -3 * ball5.robin(xs) / 2, rel=1e-10)
        assert asy.quadratic_form_P(G["x"], G["z"], th, xs) == pytest.approx(
            3 * ball5.green(xs, zs) / 4, rel=1e-10)
        assert abs(asy.quadratic_form_P(G["y"], G["z"], th, xs)) < 1e-12


def test_quadratic_form_Q_table(ball5, fields):
    xs, zs, ys, G = fields
    for i in range(3):
        assert asy.quadratic_form_Q(G["x"], G["x"], 0.1, xs, i) == pytest.approx(
            -ball5.grad_robin(xs)[i], rel=1e-9, abs=1e-13)
        assert asy.quadratic_form_Q(G["x"], G["z"], 0.1, xs, i) == pytest.approx(
            ball5.grad_y_green(zs, xs)[i], rel=1e-9, abs=1e-13)
        assert abs(asy.quadratic_form_Q(G["y"], G["z"], 0.1, xs, i)) < 1e-12
