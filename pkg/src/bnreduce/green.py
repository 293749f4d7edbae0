"""Dirichlet Green function of -Laplace on bounded domains.

G(x, y) = S(x, y) - H(x, y) with S the fundamental solution and H the
harmonic regular part; the Robin function is R(x) = H(x, x).

Two providers are available.  :class:`BallGreen` is closed form (image
charge).  :class:`MFSGreen` fits H for an arbitrary smooth domain given by
boundary samples, using exterior point sources (method of fundamental
solutions); its derivatives are central finite differences of the fit.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import norm, qmc

from .errors import (CoincidentPoints, OutsideDomain, ProviderBuildError,
                     ProviderNotBuilt)
from .quadrature import sphere_area

COINCIDENT_TOL = 1e-14
MIN_BOUNDARY_POINTS = 32


def omega(N):
    """|S^{N-1}|, the constant in the fundamental solution."""
    return sphere_area(N)


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r < COINCIDENT_TOL):
        raise CoincidentPoints("x and y coincide")
    return d, r


def singular_S(N, x, y):
    """Fundamental solution 1 / ((N-2) omega_N |x-y|^(N-2))."""
    _, r = _pair(x, y)
    return 1.0 / ((N - 2) * omega(N) * r ** (N - 2))


def grad_singular_S(N, x, y):
    """Gradient of S in its first argument."""
    d, r = _pair(x, y)
    c = 1.0 / ((N - 2) * omega(N))
    return (-c * (N - 2) * r ** (-N))[..., None] * d


def hess_singular_S(N, x, y):
    """Second derivatives of S in its first argument, shape (..., N, N)."""
    d, r = _pair(x, y)
    c = 1.0 / ((N - 2) * omega(N))
    eye = np.eye(N)
    outer = d[..., :, None] * d[..., None, :]
    return -c * (N - 2) * ((r ** (-N))[..., None, None] * eye
                           - N * (r ** (-N - 2))[..., None, None] * outer)


# ----------------------------------------------------------------------------
# domains

@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in np.ravel(self.center))
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if len(c) < 3:
            raise ValueError("dimension must be at least 3")

    @classmethod
    def unit(cls, N):
        return cls(center=(0.0,) * N, radius=1.0)

    @property
    def N(self):
        return len(self.center)

    @property
    def diameter(self):
        return 2.0 * self.radius

    def distance_to_boundary(self, y):
        y = np.asarray(y, dtype=float)
        return self.radius - np.linalg.norm(y - np.asarray(self.center), axis=-1)

    def contains(self, y, margin=0.0):
        return self.distance_to_boundary(y) > margin

    def ray_exit(self, origin, dirs):
        """Distance along each unit direction from ``origin`` to the sphere."""
        o = np.asarray(origin, dtype=float) - np.asarray(self.center)
        dirs = np.atleast_2d(dirs)
        b = dirs @ o
        c = o @ o - self.radius ** 2
        return -b + np.sqrt(b * b - c)

    def to_dict(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Generic:
    """Smooth domain described by boundary samples with outward normals."""

    boundary_points: np.ndarray
    outward_normals: np.ndarray
    min_points: int = MIN_BOUNDARY_POINTS
    _tree: object = field(init=False, repr=False, default=None)

    def __post_init__(self):
        b = np.array(self.boundary_points, dtype=float)
        n = np.array(self.outward_normals, dtype=float)
        if b.ndim != 2 or b.shape != n.shape:
            raise ValueError("boundary points and normals must be matching (m, N) arrays")
        if b.shape[1] < 3:
            raise ValueError("dimension must be at least 3")
        if len(b) < self.min_points:
            raise ValueError(f"need at least {self.min_points} boundary points, got {len(b)}")
        if np.max(np.abs(np.linalg.norm(n, axis=1) - 1.0)) > 1e-12:
            raise ValueError("outward normals must have unit length")
        b.flags.writeable = False
        n.flags.writeable = False
        object.__setattr__(self, "boundary_points", b)
        object.__setattr__(self, "outward_normals", n)
        object.__setattr__(self, "_tree", cKDTree(b))

    @classmethod
    def sphere(cls, N, n_points, center=None, radius=1.0):
        """Sampled sphere: Fibonacci lattice for N = 3, scrambled Sobol otherwise."""
        if N == 3:
            i = np.arange(n_points) + 0.5
            phi = np.arccos(1.0 - 2.0 * i / n_points)
            th = np.pi * (1.0 + 5 ** 0.5) * i
            u = np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])
        else:
            s = qmc.Sobol(N, scramble=True, seed=1234).random(n_points)
            g = norm.ppf(np.clip(s, 1e-12, 1 - 1e-12))
            u = g / np.linalg.norm(g, axis=1, keepdims=True)
        c = np.zeros(N) if center is None else np.asarray(center, dtype=float)
        return cls(c + radius * u, u)

    @classmethod
    def ellipsoid(cls, semi_axes, n_points, center=None):
        """Ellipsoid sampled by mapping sphere points; normals from the gradient
        of the implicit function."""
        a = np.asarray(semi_axes, dtype=float)
        N = len(a)
        u = cls.sphere(N, n_points).boundary_points
        c = np.zeros(N) if center is None else np.asarray(center, dtype=float)
        n = u / a
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return cls(c + u * a, n)

    @property
    def N(self):
        return self.boundary_points.shape[1]

    @property
    def diameter(self):
        b = self.boundary_points
        c = b.mean(axis=0)
        far = b[np.argmax(np.linalg.norm(b - c, axis=1))]
        return float(np.max(np.linalg.norm(b - far, axis=1)))

    def distance_to_boundary(self, y):
        """Signed distance estimate (positive inside) from the nearest sample."""
        y = np.asarray(y, dtype=float)
        d, idx = self._tree.query(y)
        side = np.sum((y - self.boundary_points[idx]) * self.outward_normals[idx], axis=-1)
        return np.where(side < 0, d, -d)

    def contains(self, y, margin=0.0):
        return self.distance_to_boundary(y) > margin

    def ray_exit(self, origin, dirs, iters=60):
        origin = np.asarray(origin, dtype=float)
        dirs = np.atleast_2d(dirs)
        lo = np.zeros(len(dirs))
        hi = np.full(len(dirs), self.diameter)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            inside = self.contains(origin + mid[:, None] * dirs)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return 0.5 * (lo + hi)

    def to_dict(self):
        return {"kind": "generic",
                "boundary_points": self.boundary_points.tolist(),
                "outward_normals": self.outward_normals.tolist()}


def domain_from_dict(d):
    kind = d.get("kind")
    if kind == "ball":
        return Ball(center=d["center"], radius=d.get("radius", 1.0))
    if kind == "generic":
        return Generic(np.asarray(d["boundary_points"]), np.asarray(d["outward_normals"]))
    raise ValueError(f"unknown domain kind {kind!r}")


# ----------------------------------------------------------------------------
# providers

class GreenProvider:
    """Common evaluators; subclasses supply the regular part and its derivatives.

    Points ``x`` are single points of shape (N,); ``y`` may be a single point
    or an (m, N) array, in which case results gain a leading axis.
    """

    def __init__(self, domain):
        self.domain = domain
        self.N = domain.N
        self.cN = 1.0 / ((self.N - 2) * omega(self.N))

    def _inside(self, *pts):
        for p in pts:
            if not np.all(self.domain.contains(p)):
                raise OutsideDomain("point outside the domain")

    # G, H, S
    def singular(self, x, y):
        return singular_S(self.N, x, y)

    def green(self, x, y):
        self._inside(x, y)
        return singular_S(self.N, x, y) - self.regular_part(x, y)

    def grad_x_green(self, x, y):
        self._inside(x, y)
        return grad_singular_S(self.N, x, y) - self.grad_x_regular(x, y)

    def grad_y_green(self, x, y):
        self._inside(x, y)
        return -grad_singular_S(self.N, x, y) - self.grad_y_regular(x, y)

    def hess_x_green(self, x, y):
        self._inside(x, y)
        return hess_singular_S(self.N, x, y) - self.hess_x_regular(x, y)

    def cross_derivs_green(self, x, y):
        """d^2 G / dx_i dy_j; row index follows x, column index follows y."""
        self._inside(x, y)
        return -hess_singular_S(self.N, x, y) - self.cross_regular(x, y)


class BallGreen(GreenProvider):
    """Closed-form Green function of a ball by the image-charge construction."""

    def __init__(self, domain):
        if not isinstance(domain, Ball):
            raise TypeError("BallGreen needs a Ball domain")
        super().__init__(domain)
        self.c = np.asarray(domain.center)
        self.a = domain.radius
        self.diagnostics = self._validate()

    def _rel(self, x, y):
        return np.asarray(x, dtype=float) - self.c, np.asarray(y, dtype=float) - self.c

    def _Q(self, X, Y):
        a2 = self.a ** 2
        return (np.sum(X * X, -1) * np.sum(Y * Y, -1) / a2
                - 2.0 * np.sum(X * Y, -1) + a2)

    def regular_part(self, x, y):
        self._inside(x, y)
        X, Y = self._rel(x, y)
        return self.cN * self._Q(X, Y) ** (-(self.N - 2) / 2.0)

    def grad_x_regular(self, x, y):
        X, Y = self._rel(x, y)
        N, a2 = self.N, self.a ** 2
        Q = self._Q(X, Y)
        gq = np.sum(Y * Y, -1)[..., None] * X / a2 - Y
        return (-self.cN * (N - 2) * Q ** (-N / 2.0))[..., None] * gq

    def grad_y_regular(self, x, y):
        X, Y = self._rel(x, y)
        N, a2 = self.N, self.a ** 2
        Q = self._Q(X, Y)
        gq = np.sum(X * X, -1) * Y / a2 - X
        return (-self.cN * (N - 2) * Q ** (-N / 2.0))[..., None] * gq

    def hess_x_regular(self, x, y):
        X, Y = self._rel(x, y)
        N, a2 = self.N, self.a ** 2
        Q = self._Q(X, Y)[..., None, None]
        y2 = np.sum(Y * Y, -1)[..., None, None]
        g = 2.0 * (np.sum(Y * Y, -1)[..., None] * X / a2 - Y)
        gg = g[..., :, None] * g[..., None, :]
        eye = np.eye(N)
        return self.cN * ((N - 2) * N / 4.0 * Q ** (-N / 2.0 - 1) * gg
                          - (N - 2) / 2.0 * Q ** (-N / 2.0) * 2.0 * y2 / a2 * eye)

    def cross_regular(self, x, y):
        X, Y = self._rel(x, y)
        N, a2 = self.N, self.a ** 2
        Q = self._Q(X, Y)[..., None, None]
        gx = 2.0 * (np.sum(Y * Y, -1)[..., None] * X / a2 - Y)
        gy = 2.0 * (np.sum(X * X, -1)[..., None] * Y / a2 - X)
        XY = X[..., :, None] * Y[..., None, :]
        eye = np.eye(N)
        return self.cN * ((N - 2) * N / 4.0 * Q ** (-N / 2.0 - 1) * gx[..., :, None] * gy[..., None, :]
                          - (N - 2) / 2.0 * Q ** (-N / 2.0) * (4.0 * XY / a2 - 2.0 * eye))

    def robin(self, x):
        self._inside(x)
        X = np.asarray(x, dtype=float) - self.c
        s = np.sum(X * X, -1)
        return self.cN * (self.a / (self.a ** 2 - s)) ** (self.N - 2)

    def grad_robin(self, x):
        self._inside(x)
        X = np.asarray(x, dtype=float) - self.c
        N, a = self.N, self.a
        t = a * a - X @ X
        return self.cN * a ** (N - 2) * (N - 2) * t ** (1 - N) * 2.0 * X

    def hess_robin(self, x):
        self._inside(x)
        X = np.asarray(x, dtype=float) - self.c
        N, a = self.N, self.a
        t = a * a - X @ X
        return self.cN * a ** (N - 2) * (N - 2) * (2.0 * t ** (1 - N) * np.eye(N)
                                                    + 4.0 * (N - 1) * t ** (-N) * np.outer(X, X))

    def bubble_psi(self, center, lam, alpha):
        """Exact harmonic extension of the trace of alpha (lam/(1+lam^2|y-x|^2))^((N-2)/2).

        On the sphere 1 + lam^2 |y - x|^2 coincides with k |y - z|^2 for an
        exterior point z, so the trace is itself the restriction of a
        harmonic function.
        """
        N, a = self.N, self.a
        xh = (np.asarray(center, dtype=float) - self.c) / a
        lh = lam * a
        s = xh @ xh
        b = 1.0 + lh * lh * (1.0 + s)
        k_plus = 0.5 * (b + np.sqrt(max(b * b - 4.0 * lh ** 4 * s, 0.0)))
        k_minus = lh ** 4 * s / k_plus
        pref = alpha * a ** (-(N - 2) / 2.0) * lh ** ((N - 2) / 2.0)

        def psi(y):
            yh = (np.asarray(y, dtype=float) - self.c) / a
            den = k_minus * np.sum(yh * yh, -1) - 2.0 * lh * lh * (yh @ xh) + k_plus
            return pref * den ** (-(N - 2) / 2.0)

        return psi

    def _validate(self):
        """Boundary residual |H - S| on the sphere and discrete harmonicity of H."""
        rng = np.random.default_rng(7)
        N = self.N
        u = rng.normal(size=(64, N))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        bpts = self.c + self.a * u
        res = 0.0
        harm = 0.0
        for _ in range(4):
            x = self.c + 0.6 * self.a * rng.uniform() * u[rng.integers(64)]
            X = x - self.c
            H_b = self.cN * self._Q(X, bpts - self.c) ** (-(N - 2) / 2.0)
            S_b = singular_S(N, x, bpts)
            res = max(res, float(np.max(np.abs(H_b - S_b) / S_b)))
            y = self.c + 0.3 * self.a * rng.normal(size=N) / np.sqrt(N)
            h = 1e-3 * self.a
            Y = y - self.c
            lap = -2 * N * self.cN * self._Q(X, Y) ** (-(N - 2) / 2.0)
            for i in range(N):
                e = np.zeros(N)
                e[i] = h
                lap += self.cN * (self._Q(X, Y + e) ** (-(N - 2) / 2.0) + self._Q(X, Y - e) ** (-(N - 2) / 2.0))
            harm = max(harm, abs(lap / h ** 2) / (self.cN * self._Q(X, Y) ** (-(N - 2) / 2.0)))
        return {"boundary_residual": res, "harmonic_residual": float(harm)}


class MFSGreen(GreenProvider):
    """Regular part fitted by exterior point sources.

    For each x the boundary data S(x, .) on the fit samples is reproduced by
    a combination of fundamental solutions centred outside the domain:
    H(x, y) = sum_k c_k(x) S(z_k, y) with c(x) = K^+ S(x, b), where
    K[m, k] = S(z_k, b_m).  The pseudo-inverse K^+ is computed once.
    """

    def __init__(self, domain, offset_factor=4.0, holdout=6, rcond=1e-14,
                 tol=1e-4, h_fd=None, h_fd2=None):
        if not isinstance(domain, Generic):
            raise TypeError("MFSGreen needs a Generic domain")
        super().__init__(domain)
        self._built = False
        b = domain.boundary_points
        n = domain.outward_normals
        hold = np.zeros(len(b), dtype=bool)
        hold[::holdout] = True
        spacing = domain._tree.query(b, k=2)[0][:, 1]
        self.fit_points = b[~hold]
        self.validation_points = b[hold]
        self.charge_points = self.fit_points + (offset_factor * spacing[~hold])[:, None] * n[~hold]
        K = self._S_matrix(self.fit_points, self.charge_points)
        self.fitted_weights = np.linalg.pinv(K, rcond=rcond)
        self.fitted_weights.flags.writeable = False
        diam = domain.diameter
        self.h_fd = 1e-4 * diam if h_fd is None else h_fd
        self.h_fd2 = 1e-3 * diam if h_fd2 is None else h_fd2
        self._built = True
        self.boundary_residual = self._residual()
        self.diagnostics = {"boundary_residual": self.boundary_residual,
                            "charge_points": len(self.charge_points)}
        if not self.boundary_residual <= tol:
            raise ProviderBuildError(
                f"boundary residual {self.boundary_residual:.3e} exceeds tolerance {tol:.1e}",
                residual=self.boundary_residual)

    def _S_matrix(self, targets, sources):
        d = targets[:, None, :] - sources[None, :, :]
        return self.cN * np.sum(d * d, -1) ** (-(self.N - 2) / 2.0)

    def _coeffs(self, x):
        if not self._built:
            raise ProviderNotBuilt("provider used before build finished")
        return self.fitted_weights @ singular_S(self.N, x, self.fit_points)

    def _residual(self):
        b = self.domain.boundary_points
        c = b.mean(axis=0)
        probes = [c] + [c + 0.5 * (p - c) for p in b[:: max(1, len(b) // 6)][:6]]
        res = 0.0
        for x in probes:
            Hb = self._S_matrix(self.validation_points, self.charge_points) @ self._coeffs(x)
            Sb = singular_S(self.N, x, self.validation_points)
            res = max(res, float(np.max(np.abs(Hb - Sb))))
        return res

    def _H(self, x, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        Y = np.atleast_2d(y)
        out = self._S_matrix(Y, self.charge_points) @ self._coeffs(x)
        return out[0] if single else out

    def regular_part(self, x, y):
        self._inside(x, y)
        return self._H(x, y)

    def harmonic_extension(self, trace):
        """Harmonic function with boundary values ``trace(b)``, as a callable."""
        coef = self.fitted_weights @ trace(self.fit_points)

        def ext(y):
            y = np.asarray(y, dtype=float)
            single = y.ndim == 1
            v = self._S_matrix(np.atleast_2d(y), self.charge_points) @ coef
            return v[0] if single else v

        return ext

    def bubble_psi(self, center, lam, alpha):
        N = self.N
        center = np.asarray(center, dtype=float)

        def trace(b):
            r2 = np.sum((b - center) ** 2, -1)
            return alpha * (lam / (1.0 + lam * lam * r2)) ** ((N - 2) / 2.0)

        return self.harmonic_extension(trace)

    # central differences of the fitted regular part
    def _fd_grad(self, f, x, h):
        x = np.asarray(x, dtype=float)
        cols = []
        for i in range(self.N):
            e = np.zeros(self.N)
            e[i] = h
            cols.append((f(x + e) - f(x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def grad_x_regular(self, x, y):
        return self._fd_grad(lambda xx: self._H(xx, y), x, self.h_fd)

    def grad_y_regular(self, x, y):
        return self._fd_grad(lambda yy: self._H(x, yy), np.asarray(y, dtype=float), self.h_fd)

    def hess_x_regular(self, x, y):
        h = self.h_fd2
        return self._fd_grad(lambda xx: self._fd_grad(lambda x2: self._H(x2, y), xx, h), x, h)

    def cross_regular(self, x, y):
        h = self.h_fd2
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            return np.array([self.cross_regular(x, yy) for yy in y])
        return self._fd_grad(lambda xx: self._fd_grad(lambda yy: self._H(xx, yy), y, h), x, h).T

    def robin(self, x):
        self._inside(x)
        return float(self._H(x, x))

    def grad_robin(self, x):
        self._inside(x)
        return self._fd_grad(lambda xx: self._H(xx, xx), x, self.h_fd)

    def hess_robin(self, x):
        self._inside(x)
        h = self.h_fd2
        return self._fd_grad(lambda xx: self._fd_grad(lambda x2: self._H(x2, x2), xx, h), x, h)


def build_provider(domain, **kwargs):
    """Analytic provider for balls, fitted one otherwise."""
    if isinstance(domain, Ball):
        return BallGreen(domain)
    return MFSGreen(domain, **kwargs)
