import numpy as np
import pytest
from scipy.special import gamma

from bnreduce.quadrature import (barycentric_eval, panel_grid, panel_weights, sphere_area,
                                 sphere_rule)


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_sphere_rule_weights_and_moments(N):
    pts, w = sphere_rule(N, 10)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert w.sum() == pytest.approx(sphere_area(N), rel=1e-13)
    # mean of x_1^2 over the sphere is 1/N, of x_1^4 is 3/(N(N+2))
    assert np.sum(w * pts[:, 0] ** 2) / w.sum() == pytest.approx(1 / N, rel=1e-12)
    assert np.sum(w * pts[:, -1] ** 4) / w.sum() == pytest.approx(3 / (N * (N + 2)), rel=1e-12)
    assert abs(np.sum(w * pts[:, 0] * pts[:, 1] ** 2)) < 1e-13


def test_sphere_area_closed_forms():
    assert sphere_area(3) == pytest.approx(4 * np.pi)
    assert sphere_area(7) == pytest.approx(2 * np.pi ** 3.5 / gamma(3.5))


def test_panel_grid_integrates_polynomials():
    edges = np.array([0.0, 0.1, 0.35, 1.0])
    grid, w = panel_grid(edges, 8)
    assert np.all(w[::9] == 0)
    assert np.array_equal(grid[::9], edges)
    assert np.sum(w * grid ** 15) == pytest.approx(1 / 16, rel=1e-13)
    assert np.array_equal(panel_weights(grid, 8), w)
    with pytest.raises(ValueError):
        panel_weights(grid[:-1], 8)


def test_barycentric_reproduces_polynomial():
    x = np.cos(np.linspace(0, np.pi, 12))
    f = lambda t: 3 * t ** 7 - t ** 2 + 0.5
    t = np.array([-0.93, 0.0, 0.41, x[3]])
    assert np.allclose(barycentric_eval(x, f(x), t), f(t), rtol=1e-12, atol=1e-13)
