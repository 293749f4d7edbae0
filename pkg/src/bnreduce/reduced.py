"""Interaction matrix, the reduced energy Phi_n and its critical points.

For n peaks at points x_1..x_n with heights lam_1..lam_n, put
a_j = lam_j^((N-2)/2) and s = (N-2)(2*-q)/2.  Then

    Phi_n = (A^2/2) <a, M a> - (B/q) sum_j lam_j^s

where M has R(x_i) on the diagonal and -G(x_i, x_j) off it.  Variables are
ordered as [x_1 (N comps), ..., x_n, lam_1, ..., lam_n] throughout.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .errors import (ExponentOutOfRange, LeftDomain, NoConvergence,
                     NonSimpleLowest, NotPositiveDefinite)
from .quadrature import sphere_area

PAIR_FLOOR = 1e-8
BOUNDARY_MARGIN = 1e-6      # times the domain diameter
PD_THRESHOLD = 1e-10        # times the spectral radius
GAP_THRESHOLD = 1e-10


@dataclass(frozen=True)
class ProblemParams:
    N: int
    q: float
    eps: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError("N must be an integer >= 3")
        object.__setattr__(self, "N", int(self.N))
        if not (2.0 < self.q < self.two_star):
            raise ValueError(f"q must lie in (2, {self.two_star:g}), got {self.q}")
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")

    @property
    def two_star(self):
        return 2.0 * self.N / (self.N - 2)

    @property
    def p(self):
        """Critical power 2* - 1."""
        return self.two_star - 1.0

    @property
    def alpha(self):
        return (self.N * (self.N - 2.0)) ** ((self.N - 2) / 4.0)

    @property
    def beta(self):
        return self.alpha ** (-2.0 / (self.N - 2))

    @property
    def s(self):
        """Power of lam in the subcritical term of Phi_n."""
        return (self.N - 2) * (self.two_star - self.q) / 2.0

    @property
    def rate_exponent(self):
        """k with eps * lam^k tending to a positive constant along blow-up."""
        return (self.N - 2) * self.q / 2.0 - 2.0

    def require_phi(self):
        if not self.q > max(2.0, self.N / (self.N - 2.0)):
            raise ExponentOutOfRange(f"q={self.q} too small for the reduced energy in N={self.N}")

    def require_rate(self):
        if not self.q > max(2.0, 4.0 / (self.N - 2.0)):
            raise ExponentOutOfRange(f"q={self.q} outside the blow-up-rate range for N={self.N}")

    def with_eps(self, eps):
        return ProblemParams(self.N, self.q, eps)

    def to_dict(self):
        return {"N": self.N, "q": self.q, "eps": self.eps}


@dataclass(frozen=True)
class Constants:
    A: float
    B: float


def bubble_constants(N, q):
    """A = int U_{0,1}^(2*-1), B = int U_{0,1}^q over R^N in closed form."""
    arg = (N - 2) * q / 2.0 - N / 2.0
    if arg <= 0:
        raise ExponentOutOfRange(f"int U^q diverges for N={N}, q={q}")
    alpha = (N * (N - 2.0)) ** ((N - 2) / 4.0)
    w = sphere_area(N)
    p = (N + 2.0) / (N - 2.0)
    A = alpha ** p * w / N
    B = alpha ** q * w * gamma(N / 2.0) * gamma(arg) / (2.0 * gamma((N - 2) * q / 2.0))
    return Constants(float(A), float(B))


def constants(params):
    return bubble_constants(params.N, params.q)


@dataclass(frozen=True, eq=False)
class Config:
    points: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.array(self.points, dtype=float))
        lam = np.atleast_1d(np.array(self.lambdas, dtype=float))
        if x.shape[0] != lam.shape[0]:
            raise ValueError("need one height per point")
        if np.any(~(lam > 0)):
            raise ValueError("heights must be positive")
        if min_pair_distance(x) < PAIR_FLOOR:
            raise ValueError("concentration points must be pairwise distinct")
        x.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "lambdas", lam)

    @property
    def n(self):
        return len(self.lambdas)

    def flat(self):
        return np.concatenate([self.points.ravel(), self.lambdas])

    @classmethod
    def from_flat(cls, z, n, N):
        return cls(np.asarray(z[:n * N]).reshape(n, N), np.asarray(z[n * N:]))

    def permuted(self, perm):
        return Config(self.points[perm], self.lambdas[perm])

    def check_inside(self, domain):
        margin = BOUNDARY_MARGIN * domain.diameter
        return bool(np.all(domain.contains(self.points, margin=margin)))


def min_pair_distance(x):
    x = np.atleast_2d(x)
    if len(x) < 2:
        return np.inf
    d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=-1)
    return float(np.min(d[np.triu_indices(len(x), 1)]))


def interaction_matrix(provider, points):
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(x)
    M = np.empty((n, n))
    for i in range(n):
        M[i, i] = provider.robin(x[i])
        for j in range(i + 1, n):
            g = 0.5 * (provider.green(x[i], x[j]) + provider.green(x[j], x[i]))
            M[i, j] = M[j, i] = -g
    return M


@dataclass(frozen=True)
class SpectralData:
    rho: float
    Lambda: np.ndarray
    eigenvalues: np.ndarray
    gap: float
    positive_definite: bool


def lowest_eigenpair(M):
    M = np.asarray(M, dtype=float)
    w, v = np.linalg.eigh(M)
    gap = float(w[1] - w[0]) if len(w) > 1 else np.inf
    if gap < GAP_THRESHOLD:
        raise NonSimpleLowest(f"lowest eigenvalue not simple (gap {gap:.3e})", gap=gap)
    lam = v[:, 0] / v[0, 0]
    radius = float(np.max(np.abs(w)))
    pd = bool(w[0] > PD_THRESHOLD * radius)
    return SpectralData(float(w[0]), lam, w, gap, pd)


# ----------------------------------------------------------------------------
# Phi_n and derivatives

def _powers(params, lam):
    N = params.N
    a = lam ** ((N - 2) / 2.0)
    da = (N - 2) / 2.0 * lam ** ((N - 4) / 2.0)
    dda = (N - 2) * (N - 4) / 4.0 * lam ** ((N - 6) / 2.0)
    return a, da, dda


def phi(provider, params, config):
    params.require_phi()
    c = constants(params)
    M = interaction_matrix(provider, config.points)
    a, _, _ = _powers(params, config.lambdas)
    return float(0.5 * c.A ** 2 * a @ M @ a - c.B / params.q * np.sum(config.lambdas ** params.s))


def grad_phi(provider, params, config):
    """Returns (gx, glam): gx has shape (n, N), glam shape (n,)."""
    params.require_phi()
    c = constants(params)
    x, lam = config.points, config.lambdas
    n, N = x.shape
    A2 = c.A ** 2
    M = interaction_matrix(provider, x)
    a, da, _ = _powers(params, lam)
    gx = np.empty((n, N))
    for i in range(n):
        g = 0.5 * A2 * a[i] ** 2 * provider.grad_robin(x[i])
        for l in range(n):
            if l != i:
                g = g - A2 * a[i] * a[l] * provider.grad_x_green(x[i], x[l])
        gx[i] = g
    s = params.s
    glam = A2 * da * (M @ a) - c.B * s / params.q * lam ** (s - 1)
    return gx, glam


def grad_phi_flat(provider, params, config):
    gx, gl = grad_phi(provider, params, config)
    return np.concatenate([gx.ravel(), gl])


def hessian_phi(provider, params, config):
    params.require_phi()
    c = constants(params)
    x, lam = config.points, config.lambdas
    n, N = x.shape
    A2 = c.A ** 2
    M = interaction_matrix(provider, x)
    a, da, dda = _powers(params, lam)
    Ma = M @ a
    H = np.zeros((n * (N + 1), n * (N + 1)))
    L = n * N

    def xs(i):
        return slice(i * N, (i + 1) * N)

    gradG = {}
    for i in range(n):
        for l in range(n):
            if l != i:
                gradG[i, l] = provider.grad_x_green(x[i], x[l])

    for i in range(n):
        # x_i x_i
        blk = 0.5 * A2 * a[i] ** 2 * provider.hess_robin(x[i])
        for l in range(n):
            if l != i:
                blk = blk - A2 * a[i] * a[l] * provider.hess_x_green(x[i], x[l])
        H[xs(i), xs(i)] = blk
        # x_i x_k
        for k in range(n):
            if k != i:
                H[xs(i), xs(k)] = -A2 * a[i] * a[k] * provider.cross_derivs_green(x[i], x[k])
        # x_i lam_i and x_i lam_k
        col = A2 * a[i] * da[i] * provider.grad_robin(x[i])
        for l in range(n):
            if l != i:
                col = col - A2 * da[i] * a[l] * gradG[i, l]
                H[xs(i), L + l] = -A2 * a[i] * da[l] * gradG[i, l]
        H[xs(i), L + i] = col
    H[L:, :L] = H[:L, L:].T
    s = params.s
    ll = A2 * np.outer(da, da) * M
    ll[np.diag_indices(n)] += A2 * dda * Ma - c.B * s * (s - 1) / params.q * lam ** (s - 2)
    H[L:, L:] = ll
    return 0.5 * (H + H.T)


# ----------------------------------------------------------------------------
# critical points

@dataclass
class CriticalPoint:
    config: Config
    grad_norm: float
    hessian_eigenvalues: np.ndarray
    nondegenerate: bool
    rho: float
    iterations: int
    trace: list = field(default_factory=list, repr=False)


def _feasible(domain, z, n, N):
    lam = z[n * N:]
    if np.any(~(lam > 0)):
        return False
    x = z[:n * N].reshape(n, N)
    if min_pair_distance(x) < PAIR_FLOOR:
        return False
    return bool(np.all(domain.contains(x, margin=BOUNDARY_MARGIN * domain.diameter)))


def find_critical(provider, params, x0, lam0, gtol=1e-10, max_iter=200, min_step=1e-12):
    """Damped Newton iteration on grad Phi_n.

    The step is halved until ||grad|| decreases.  Trial points that leave
    the domain, collide, or make a height nonpositive are also halved, never
    projected back.
    """
    cfg = Config(x0, lam0)
    n, N = cfg.points.shape
    domain = provider.domain
    if not cfg.check_inside(domain):
        raise LeftDomain("initial configuration is not interior")
    z = cfg.flat()
    g = grad_phi_flat(provider, params, cfg)
    gn = float(np.linalg.norm(g))
    trace = [(z.copy(), gn)]
    for it in range(1, max_iter + 1):
        if gn <= gtol:
            break
        Hm = hessian_phi(provider, params, Config.from_flat(z, n, N))
        try:
            d = np.linalg.solve(Hm, -g)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(Hm, -g, rcond=None)[0]
        t = 1.0
        hit_wall = False
        while True:
            if t < min_step:
                if hit_wall:
                    raise LeftDomain("iterates pushed out of the feasible set", trace)
                raise NoConvergence("line search stalled", trace)
            zt = z + t * d
            if not _feasible(domain, zt, n, N):
                hit_wall = True
                t *= 0.5
                continue
            gt = grad_phi_flat(provider, params, Config.from_flat(zt, n, N))
            gtn = float(np.linalg.norm(gt))
            if gtn < gn:
                break
            t *= 0.5
        z, g, gn = zt, gt, gtn
        trace.append((z.copy(), gn))
    else:
        if gn > gtol:
            raise NoConvergence(f"no critical point after {max_iter} iterations", trace)
    cfg = Config.from_flat(z, n, N)
    Hm = hessian_phi(provider, params, cfg)
    ev = np.linalg.eigvalsh(Hm)
    radius = float(np.max(np.abs(ev)))
    nondeg = bool(np.min(np.abs(ev)) > 1e-8 * radius)
    rho = float(np.linalg.eigvalsh(interaction_matrix(provider, cfg.points))[0])
    return CriticalPoint(cfg, gn, ev, nondeg, rho, len(trace) - 1, trace)


def single_peak_lambda(params, R):
    """Height balancing D_lam Phi_1 = 0 at a point with Robin value R."""
    c = constants(params)
    ts = params.two_star
    return ((ts - params.q) * c.B / (params.q * c.A ** 2 * R)) ** (1.0 / params.rate_exponent)


def rate_constant(params, R):
    """Limit of eps * lam^k for a single peak at a point with Robin value R."""
    c = constants(params)
    return params.q * c.A ** 2 * R / ((params.two_star - params.q) * c.B)


def unique_lambda(provider, params, points, start=None, tol=1e-14, max_iter=100):
    """Heights solving D_lam Phi_n = 0 at fixed points.

    In the variable a = lam^((N-2)/2) the problem is minimising
    (A^2/2)<a, M a> - (B/q) sum a^(2*-q), strictly convex when q >= 2*-1 and
    M is positive definite.
    """
    params.require_phi()
    t = params.two_star - params.q
    if t > 1.0 + 1e-12:
        raise ExponentOutOfRange(f"q={params.q} below 2*-1; convexity argument unavailable")
    M = interaction_matrix(provider, points)
    spec = np.linalg.eigvalsh(M)
    if not spec[0] > PD_THRESHOLD * np.max(np.abs(spec)):
        raise NotPositiveDefinite("interaction matrix is not positive definite")
    c = constants(params)
    A2, Bq = c.A ** 2, c.B / params.q

    def psi(a):
        return 0.5 * A2 * a @ M @ a - Bq * np.sum(a ** t)

    def grad(a):
        return A2 * M @ a - Bq * t * a ** (t - 1)

    if start is None:
        a = (Bq * t / (A2 * np.diag(M))) ** (1.0 / (2.0 - t))
    else:
        a = np.asarray(start, dtype=float) ** ((params.N - 2) / 2.0)
    for _ in range(max_iter):
        g = grad(a)
        Hm = A2 * M - Bq * t * (t - 1) * np.diag(a ** (t - 2))
        d = np.linalg.solve(Hm, -g)
        step = 1.0
        f0 = psi(a)
        while np.any(a + step * d <= 0) or psi(a + step * d) > f0 + 1e-14 * abs(f0):
            step *= 0.5
            if step < 1e-14:
                break
        a_new = a + step * d
        done = np.max(np.abs(a_new - a)) <= tol * np.max(a)
        a = a_new
        if done:
            break
    else:
        raise NoConvergence("height solve did not converge")
    return a ** (2.0 / (params.N - 2))
