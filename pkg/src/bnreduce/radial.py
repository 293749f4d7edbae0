"""Positive radial solutions of

    -u'' - (N-1)/r u' = u_+^(2*-1) + eps u_+^(q-1),   u'(0) = 0,  u(1) = 0

on the unit ball, by shooting from the peak value u(0) = M.

The integrator works with the deviation v = u - U from the bubble U with
the same peak value.  U solves the eps = 0 equation exactly, so v is small
and smooth even when M is large, and eps = 0 gives v = 0 identically.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NoConvergence, NoSolution, StepUnderflow
from .quadrature import barycentric_eval, panel_grid, panel_weights
from .reduced import ProblemParams, rate_constant
from .green import omega

PANEL_ORDER = 16
RTOL = 1e-11
START_SCALE = 1e-3          # series start radius, in units of 1/lam
STAR_SHAPED_NOTE = ("no positive solution without the subcritical term: "
                    "the ball is star-shaped, so the Pohozaev identity rules it out")


def bubble_height(N, M):
    """lam with U_{0,lam}(0) = M."""
    alpha = (N * (N - 2.0)) ** ((N - 2) / 4.0)
    return (M / alpha) ** (2.0 / (N - 2))


def _bubble(N, lam, r):
    alpha = (N * (N - 2.0)) ** ((N - 2) / 4.0)
    return alpha * (lam / (1.0 + (lam * r) ** 2)) ** ((N - 2) / 2.0)


def _bubble_prime(N, lam, r):
    alpha = (N * (N - 2.0)) ** ((N - 2) / 4.0)
    return -alpha * (N - 2) * lam ** ((N + 2) / 2.0) * r / (1.0 + (lam * r) ** 2) ** (N / 2.0)


def profile_edges(lam, n_geo=80, step=0.05):
    """Panel edges: geometric near the peak, uniform with spacing ``step``
    further out so that r = 0.05 k are always edges."""
    geo = np.geomspace(1e-2 / lam, 1.0, n_geo) if 1e-2 / lam < 1.0 else np.array([1.0])
    uni = np.round(np.arange(1, int(round(1.0 / step)) + 1) * step, 12)
    e = np.unique(np.concatenate([[0.0], geo, uni]))
    # drop edges that crowd a uniform edge
    keep = [e[0]]
    for v in e[1:]:
        if v - keep[-1] > 1e-9 * max(1.0, v):
            keep.append(v)
    return np.array(keep)


@dataclass(eq=False)
class RadialProfile:
    N: int
    q: float
    eps: float
    M: float
    r: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    panel_order: int = PANEL_ORDER
    meta: dict = field(default_factory=dict)

    @property
    def params(self):
        return ProblemParams(self.N, self.q, self.eps)

    @property
    def lam_peak(self):
        """M^(2/(N-2))."""
        return self.M ** (2.0 / (self.N - 2))

    @property
    def lam_bubble(self):
        """Height of the bubble with the same peak value."""
        return bubble_height(self.N, self.M)

    @property
    def weights(self):
        return panel_weights(self.r, self.panel_order)

    def integrate(self, values, upto=None):
        """int_0^upto values(r) r^(N-1) dr times omega_N.  ``upto`` must be a
        panel edge."""
        w = self.weights
        f = w * np.asarray(values) * self.r ** (self.N - 1)
        if upto is not None:
            k1 = self.panel_order + 1
            edges = self.r[::k1]
            idx = np.nonzero(np.isclose(edges, upto, rtol=0, atol=1e-12))[0]
            if not idx.size:
                raise ValueError(f"r = {upto} is not a panel edge")
            f = f[: idx[0] * k1 + 1]
        return float(omega(self.N) * np.sum(f))

    def _locate(self, t):
        k1 = self.panel_order + 1
        edges = self.r[::k1]
        i = int(np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2))
        return slice(i * k1, (i + 1) * k1 + 1)

    def __call__(self, t, derivative=False):
        data = self.u_prime if derivative else self.u
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for j, tj in enumerate(t):
            sl = self._locate(tj)
            out[j] = barycentric_eval(self.r[sl], data[sl], tj)[0]
        return out

    def check_accepted(self, tol=1e-8):
        """Positive on [0, 1), decreasing, vanishing at r = 1."""
        if not np.all(self.u[:-1] > 0):
            raise AssertionError("profile is not positive inside the ball")
        if not np.all(self.u_prime[1:] < 0):
            raise AssertionError("profile is not decreasing")
        if abs(self.u[-1]) > tol * self.M:
            raise AssertionError("profile does not vanish at r = 1")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "u", "u_prime"])
            for row in zip(self.r, self.u, self.u_prime):
                wr.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, N, q, eps, M, panel_order=PANEL_ORDER, meta=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(N, q, eps, M, data[:, 0], data[:, 1], data[:, 2], panel_order, meta or {})


@dataclass(eq=False)
class ShotResult:
    params: ProblemParams
    M: float
    first_zero: float
    end_value: float
    sol: object = field(repr=False)
    r0: float = 0.0
    c_series: float = 0.0

    def profile(self, n_geo=80):
        """Values and derivatives on a panel grid over [0, min(1, first_zero)]."""
        N, q, eps = self.params.N, self.params.q, self.params.eps
        lam = bubble_height(N, self.M)
        edges = profile_edges(lam, n_geo)
        if self.first_zero is not None and self.first_zero < 1.0:
            edges = np.append(edges[edges < self.first_zero], self.first_zero)
        r, _ = panel_grid(edges, PANEL_ORDER)
        v, vp = self.deviation(r)
        u = _bubble(N, lam, r) + v
        up = _bubble_prime(N, lam, r) + vp
        return RadialProfile(N, q, eps, self.M, r, u, up)

    def deviation(self, r):
        r = np.asarray(r, dtype=float)
        inner = r < self.r0
        v = np.empty_like(r)
        vp = np.empty_like(r)
        v[inner] = -self.c_series * r[inner] ** 2
        vp[inner] = -2.0 * self.c_series * r[inner]
        if np.any(~inner):
            y = self.sol.sol(r[~inner])
            v[~inner] = y[0]
            vp[~inner] = y[1]
        return v, vp


def integrate_ivp(params, M, r_max=1.0, rtol=RTOL):
    """Shoot from u(0) = M.  ``first_zero`` is None when u stays positive up
    to ``r_max``."""
    if not M > 0:
        raise ValueError("peak value must be positive")
    N, q, eps = params.N, params.q, params.eps
    p = params.p
    lam = bubble_height(N, M)

    def rhs(r, y):
        v, vp = y
        U = _bubble(N, lam, r)
        t = v / U
        if t > -1.0:
            f = U ** p * np.expm1(p * np.log1p(t)) + eps * (U + v) ** (q - 1)
        else:
            f = -U ** p
        return [vp, -(N - 1) / r * vp - f]

    def zero(r, y):
        return _bubble(N, lam, r) + y[0]

    r0 = START_SCALE / lam
    # v = u - U satisfies v'' + (N-1)/r v' ~ -eps M^(q-1) near the origin
    c = eps * M ** (q - 1) / (2.0 * N)
    y0 = [-c * r0 ** 2, -2.0 * c * r0]
    atol = rtol * 1e-3 * _bubble(N, lam, r_max)
    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=zero)
    if sol.status == -1:
        raise StepUnderflow(sol.message)
    ev = sol.t_events[0]
    first_zero = float(ev[0]) if len(ev) else None
    end = float(_bubble(N, lam, r_max) + sol.y[0, -1])
    return ShotResult(params, float(M), first_zero, end, sol, r0, c)


def _boundary_ratio(params, M, rtol):
    shot = integrate_ivp(params, M, rtol=rtol)
    return shot.end_value / _bubble(params.N, bubble_height(params.N, M), 1.0)


@dataclass(eq=False)
class EpsilonSolution:
    eps: float
    profile: RadialProfile
    eps0: float
    evaluations: int


def _bracket(f, x0, lo, hi, step=0.5):
    """Walk from x0 in the direction that moves f towards zero, doubling
    the step, until the sign changes or the interval [lo, hi] is exhausted."""
    fa = f(x0)
    a = x0
    direction = 1.0 if fa > 0 else -1.0
    while True:
        b = a + direction * step
        b = min(max(b, lo), hi)
        if b == a:
            return None
        fb = f(b)
        if fa * fb <= 0:
            return (a, fa, b, fb)
        a, fa = b, fb
        step *= 2.0


def default_min_peak(N):
    """Smallest peak value accepted by the sweeps: the bubble with lam = 1."""
    return (N * (N - 2.0)) ** ((N - 2) / 4.0)


def epsilon_for_height(params, M, eps_bounds=None, rtol=RTOL, min_peak=None, n_geo=80):
    """Find eps such that the solution with peak value M vanishes first at r = 1.

    The search runs in log eps, starting from the single-peak balance
    eps0 = C lam^(-k) with lam the bubble height; a sign change of u(1) is
    bracketed and then resolved by Brent's method.  ``eps_bounds`` defaults
    to [eps0/1e3, eps0*1e3]; bounds (0, 0) evaluate the unperturbed problem.
    """
    params.require_rate()
    N = params.N
    if min_peak is None:
        min_peak = default_min_peak(N)
    if M < min_peak:
        raise ValueError(f"peak value {M} below the minimum {min_peak}")
    lam = bubble_height(N, M)
    R0 = 1.0 / ((N - 2) * omega(N))
    eps0 = rate_constant(params, R0) * lam ** (-params.rate_exponent)
    lo, hi = (eps0 / 1e3, eps0 * 1e3) if eps_bounds is None else eps_bounds
    count = [0]

    if hi <= 0.0:
        shot = integrate_ivp(params.with_eps(0.0), M, rtol=rtol)
        count[0] += 1
        if shot.first_zero is None and shot.end_value > 0:
            raise NoSolution(STAR_SHAPED_NOTE)
        raise NoSolution("unexpected sign change with eps = 0")

    def g(le):
        count[0] += 1
        return _boundary_ratio(params.with_eps(float(np.exp(le))), M, rtol)

    x0 = float(np.clip(np.log(eps0), np.log(lo), np.log(hi)))
    br = _bracket(g, x0, np.log(lo), np.log(hi))
    if br is None:
        raise NoSolution(f"no sign change of u(1) for eps in [{lo:.3e}, {hi:.3e}]")
    a, fa, b, fb = br
    if fa == 0.0:
        le = a
    elif fb == 0.0:
        le = b
    else:
        le, info = brentq(g, min(a, b), max(a, b), xtol=1e-14, rtol=1e-15,
                          maxiter=100, full_output=True, disp=False)
        if not info.converged:
            raise NoConvergence("eps iteration did not converge")
    eps = float(np.exp(le))
    prof = integrate_ivp(params.with_eps(eps), M, rtol=rtol).profile(n_geo)
    prof.meta.update({"eps0": eps0, "rtol": rtol})
    return EpsilonSolution(eps, prof, eps0, count[0])


def solve_on_ball(params, M_guess=None, rtol=RTOL, n_geo=80):
    """Peak value M of the positive solution at fixed eps > 0."""
    if not params.eps > 0:
        raise NoSolution(STAR_SHAPED_NOTE)
    N = params.N
    if M_guess is None:
        R0 = 1.0 / ((N - 2) * omega(N))
        lam = (rate_constant(params, R0) / params.eps) ** (1.0 / params.rate_exponent)
        alpha = (N * (N - 2.0)) ** ((N - 2) / 4.0)
        M_guess = alpha * lam ** ((N - 2) / 2.0)
    lo = np.log(default_min_peak(N))

    def g(lm):
        return _boundary_ratio(params, float(np.exp(lm)), rtol)

    x0 = max(float(np.log(M_guess)), lo)
    br = _bracket(g, x0, lo, x0 + 30.0)
    if br is None:
        raise NoSolution("no sign change of u(1) over the admissible peak values")
    a, fa, b, fb = br
    lm, info = brentq(g, min(a, b), max(a, b), xtol=1e-14, rtol=1e-15,
                      maxiter=100, full_output=True, disp=False)
    if not info.converged:
        raise NoConvergence("peak iteration did not converge")
    return integrate_ivp(params, float(np.exp(lm)), rtol=rtol).profile(n_geo)


@dataclass(eq=False)
class SweepEntry:
    M: float
    eps: float = None
    profile: RadialProfile = None
    error: str = None


def sweep(params, M_values, threads=1, rtol=RTOL, n_geo=80):
    """Run epsilon_for_height across peak values; failures are recorded,
    not raised."""

    def one(M):
        try:
            s = epsilon_for_height(params, float(M), rtol=rtol, n_geo=n_geo)
            return SweepEntry(float(M), s.eps, s.profile)
        except (NoSolution, NoConvergence, StepUnderflow, ValueError) as exc:
            return SweepEntry(float(M), error=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, M_values))
    return [one(M) for M in M_values]
