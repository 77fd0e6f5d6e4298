import numpy as np
import pytest

from bimartingale.measure import DiscreteMeasure, barycentre, recentre

# Lines collected by the acceptance module and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_measure(rng, dim, n_atoms, scale=1.0):
    pts = rng.normal(scale=scale, size=(n_atoms, dim))
    w = rng.dirichlet(np.ones(n_atoms))
    return DiscreteMeasure(pts, w)


def random_pair(rng, dim, max_atoms, scale=1.0):
    """Two random measures sharing the barycentre 0."""
    mu = random_measure(rng, dim, int(rng.integers(1, max_atoms + 1)), scale)
    nu = random_measure(rng, dim, int(rng.integers(2, max_atoms + 1)), scale)
    origin = np.zeros(dim)
    return recentre(mu, origin), recentre(nu, origin)


def dilate(rng, mu, scale=0.5):
    """Split every atom ``x`` into ``x +- v`` with half its mass."""
    v = rng.normal(scale=scale, size=mu.points.shape)
    pts = np.vstack([mu.points + v, mu.points - v])
    w = np.concatenate([mu.weights, mu.weights]) / 2
    return DiscreteMeasure(pts, w)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cross_pair():
    """Cross-shaped pair: mass 1/4 at (+-1, 0), (+-2, 0) against the same on the y-axis."""
    mu = DiscreteMeasure([[1, 0], [-1, 0], [2, 0], [-2, 0]], [0.25] * 4)
    nu = DiscreteMeasure([[0, 1], [0, -1], [0, 2], [0, -2]], [0.25] * 4)
    return mu, nu


def grid_pair(n):
    """Uniform ``n x n`` grid on ``[-1/2, 1/2]^2`` against five atoms of mass 1/5."""
    g = np.linspace(-0.5, 0.5, n)
    X, Y = np.meshgrid(g, g)
    mu = DiscreteMeasure(np.c_[X.ravel(), Y.ravel()], np.full(n * n, 1.0 / n**2))
    nu = DiscreteMeasure([[0.4, 0], [-0.4, 0], [0, 0.4], [0, -0.4], [0, 0]], [0.2] * 5)
    return mu, nu


__all__ = ["random_measure", "random_pair", "dilate", "grid_pair", "barycentre"]
