"""Aubin-Talenti bubbles, their Dirichlet projections and interaction
integrals, plus residuals of multi-bubble ansatz functions."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn

from .errors import QuadratureNotConverged
from .quadrature import sphere_area, sphere_rule


def alpha_N(N):
    return (N * (N - 2.0)) ** ((N - 2) / 4.0)


@dataclass(frozen=True, eq=False)
class BubbleParams:
    center: np.ndarray
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("bubble height must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def N(self):
        return len(self.center)


def _r2(b, y):
    y = np.asarray(y, dtype=float)
    return np.sum((y - b.center) ** 2, axis=-1)


def bubble(b, y):
    """U_{x,lam}(y) = alpha_N (lam / (1 + lam^2 |y-x|^2))^((N-2)/2)."""
    N = b.N
    return alpha_N(N) * (b.lam / (1.0 + b.lam ** 2 * _r2(b, y))) ** ((N - 2) / 2.0)


def d_bubble_dlambda(b, y):
    N, lam = b.N, b.lam
    t = lam ** 2 * _r2(b, y)
    return alpha_N(N) * (N - 2) / 2.0 * lam ** ((N - 4) / 2.0) * (1.0 - t) / (1.0 + t) ** (N / 2.0)


def d_bubble_dx(b, y):
    """Gradient of U_{x,lam}(y) with respect to the centre x."""
    N, lam = b.N, b.lam
    y = np.asarray(y, dtype=float)
    t = lam ** 2 * _r2(b, y)
    c = alpha_N(N) * (N - 2) * lam ** ((N + 2) / 2.0) / (1.0 + t) ** (N / 2.0)
    return c[..., None] * (y - b.center)


def standard_bubble(N, y):
    """U_{0,beta_N}, normalised so that its peak value is 1."""
    beta = alpha_N(N) ** (-2.0 / (N - 2))
    return bubble(BubbleParams(np.zeros(N), beta), y)


def sobolev_energy(N):
    """int_{R^N} U_{0,1}^{2*}, the value S^{N/2} with the bubble normalisation above."""
    return alpha_N(N) ** (2.0 * N / (N - 2)) * sphere_area(N) * 0.5 * beta_fn(N / 2.0, N / 2.0)


class ProjectionPsi:
    """psi = U - PU: harmonic in the domain, equal to U on the boundary."""

    def __init__(self, provider, b):
        self.provider = provider
        self.b = b
        self._psi = provider.bubble_psi(b.center, b.lam, alpha_N(b.N))

    def __call__(self, y):
        return self._psi(y)

    def projected(self, y):
        """PU_{x,lam}(y)."""
        return bubble(self.b, y) - self._psi(y)

    def surrogate(self, y):
        """Leading-order expansion alpha_N (N-2) omega_N H(x, y) / lam^((N-2)/2)."""
        N = self.b.N
        H = self.provider.regular_part(self.b.center, y)
        return alpha_N(N) * (N - 2) * sphere_area(N) * H / self.b.lam ** ((N - 2) / 2.0)


def projection_psi(provider, b):
    return ProjectionPsi(provider, b)


@dataclass(frozen=True)
class InteractionResult:
    value: float
    bound_ratio: float
    abs_error: float


def interaction_integral(b1, b2, epsrel=1e-10, tol=1e-8):
    """int_{R^N} U_1^(2*-1) U_2 by shells around the first centre.

    The average of U_2 over each sphere |y - x_1| = r only depends on the
    polar angle towards x_2, so the N-dimensional integral reduces to a
    double integral.  The bound ratio divides by
    A alpha_N (lam1/lam2 + lam2/lam1 + lam1 lam2 |x1-x2|^2)^(-(N-2)/2),
    where A alpha_N is the far-field constant of the integral, so the ratio
    tends to 1 for well-separated bubbles.
    """
    N = b1.N
    p = (N + 2.0) / (N - 2.0)
    d = float(np.linalg.norm(b1.center - b2.center))
    a = alpha_N(N)
    l1, l2 = b1.lam, b2.lam
    w = sphere_area(N)
    wm = sphere_area(N - 1)

    def U1p(r):
        return (a * (l1 / (1.0 + (l1 * r) ** 2)) ** ((N - 2) / 2.0)) ** p

    def U2(rr2):
        return a * (l2 / (1.0 + l2 * l2 * rr2)) ** ((N - 2) / 2.0)

    def shell_mean(r):
        if d == 0.0:
            return U2(r * r)
        f = lambda ph: np.sin(ph) ** (N - 2) * U2(r * r + d * d - 2 * r * d * np.cos(ph))
        val, _ = integrate.quad(f, 0.0, np.pi, epsabs=0, epsrel=epsrel, limit=200)
        return val * wm / w

    def radial(r):
        return w * r ** (N - 1) * U1p(r) * shell_mean(r)

    pts = sorted({1.0 / l1, 1.0 / l2, d} - {0.0})
    edges = [0.0] + pts
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(radial, lo, hi, epsabs=0, epsrel=epsrel, limit=200)
        total += v
        err += e
    v, e = integrate.quad(radial, edges[-1], np.inf, epsabs=0, epsrel=epsrel, limit=200)
    total += v
    err += e
    if not err <= tol * abs(total):
        raise QuadratureNotConverged(f"interaction integral error estimate {err:.2e}")
    bound = a ** (p + 1) * w / N * (l1 / l2 + l2 / l1 + l1 * l2 * d * d) ** (-(N - 2) / 2.0)
    return InteractionResult(float(total), float(total / bound), float(err))


# ----------------------------------------------------------------------------
# ansatz residuals

def _cell_rule(domain, points, j, dirs, dir_w, lam, n_radial):
    """Polar quadrature of the nearest-point cell of points[j], graded at
    scale 1/lam through the radial substitution s = log(1 + lam r)."""
    xj = points[j]
    N = len(xj)
    rmax = np.asarray(domain.ray_exit(xj, dirs), dtype=float)
    for k in range(len(points)):
        if k == j:
            continue
        delta = points[k] - xj
        proj = dirs @ delta
        with np.errstate(divide="ignore"):
            cut = np.where(proj > 0, (delta @ delta) / (2.0 * proj), np.inf)
        rmax = np.minimum(rmax, cut)
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    smax = np.log1p(lam * rmax)                      # (ndir,)
    s = 0.5 * smax[:, None] * (t[None, :] + 1.0)     # (ndir, nr)
    ws = 0.5 * smax[:, None] * wt[None, :]
    r = np.expm1(s) / lam
    jac = np.exp(s) / lam
    weights = dir_w[:, None] * ws * jac * r ** (N - 1)
    pts = xj + r[..., None] * dirs[:, None, :]
    return pts.reshape(-1, N), weights.ravel()


def ansatz_quadrature(provider, config, angular_order=8, n_radial=48):
    """Nodes and weights covering the domain, adapted to every peak."""
    domain = provider.domain
    x, lam = config.points, config.lambdas
    N = x.shape[1]
    dirs, dir_w = sphere_rule(N, angular_order)
    P, W = [], []
    for j in range(len(x)):
        pj, wj = _cell_rule(domain, x, j, dirs, dir_w, lam[j], n_radial)
        P.append(pj)
        W.append(wj)
    return np.concatenate(P), np.concatenate(W)


def ansatz_residual(provider, params, config, angular_order=8, n_radial=48):
    """Residual and energy of u = sum_j PU_{x_j, lam_j}.

    Since -Laplace PU_j = U_j^(2*-1), the equation residual is
    sum_j U_j^(2*-1) - u_+^(2*-1) - eps u_+^(q-1); its L2 norm over the
    domain is returned together with the value relative to
    ||sum_j U_j^(2*-1)||_L2.  The Dirichlet energy uses
    int |grad u|^2 = sum_j int U_j^(2*-1) u.
    """
    N, q, eps = params.N, params.q, params.eps
    p = params.p
    ts = params.two_star
    pts, w = ansatz_quadrature(provider, config, angular_order, n_radial)
    src = np.zeros(len(w))
    u = np.zeros(len(w))
    for xj, lj in zip(config.points, config.lambdas):
        b = BubbleParams(xj, lj)
        Uj = bubble(b, pts)
        src += Uj ** p
        u += Uj - projection_psi(provider, b)(pts)
    up = np.maximum(u, 0.0)
    res = src - up ** p - eps * up ** (q - 1)
    l2 = float(np.sqrt(np.sum(w * res * res)))
    ref = float(np.sqrt(np.sum(w * src * src)))
    grad2 = float(np.sum(w * src * u))
    energy = 0.5 * grad2 - np.sum(w * up ** ts) / ts - eps * np.sum(w * up ** q) / q
    return {"l2_residual": l2, "relative_residual": l2 / ref, "energy": float(energy),
            "dirichlet": grad2}
