import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


def sample_eh_points(rng, n, r_lo=1.2, r_hi=4.0, pole_margin=0.3):
    """Radial-chart sample points away from coordinate poles."""
    pts = np.empty((n, 4))
    pts[:, 0] = rng.uniform(r_lo, r_hi, n)
    pts[:, 1] = rng.uniform(pole_margin, np.pi - pole_margin, n)
    pts[:, 2] = rng.uniform(0.0, 2.0 * np.pi, n)
    pts[:, 3] = rng.uniform(0.0, 4.0 * np.pi, n)
    return pts


def sample_u_points(rng, n, u_lo=0.3, u_hi=3.0, pole_margin=0.3):
    pts = sample_eh_points(rng, n, pole_margin=pole_margin)
    pts[:, 0] = rng.uniform(u_lo, u_hi, n)
    return pts
