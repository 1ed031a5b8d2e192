"""Shared fixtures: canonical latent-type populations with hand-checked
moments, used as ground truth throughout the suite."""

import numpy as np
import pytest

from cativ import DgpSpec


@pytest.fixture(scope="session")
def dgp_a() -> DgpSpec:
    """Single-type population: outcomes independent of take-up.

    p = (0.2, 0.6); mu0 = (0.26, 0.46, 0.28); mu1 = (0.38, 0.38, 0.24);
    pi1 = (0.5, 0.3, 0.2); pi0 = (0.2, 0.5, 0.3); all selection covariances 0.
    """
    return DgpSpec(
        q=3,
        w=np.array([1.0]),
        pd=np.array([[0.2, 0.6]]),
        py=np.array([[[0.2, 0.5, 0.3], [0.5, 0.3, 0.2]]]),
    )


@pytest.fixture(scope="session")
def dgp_b() -> DgpSpec:
    """Two-type population with equal selection covariance across arms.

    Same p and mu as dgp_a; every covariance between category-1 indicators
    and take-up equals 0.02, so the across-arm gaps vanish identically.
    Key cells: joint(c1, d=1, z=0) = 0.12, joint(c1, d=1, z=1) = 0.32.
    """
    return DgpSpec(
        q=3,
        w=np.array([0.5, 0.5]),
        pd=np.array([[0.4, 0.8], [0.0, 0.4]]),
        py=np.array(
            [
                [[0.3, 0.3, 0.4], [0.6, 0.1, 0.3]],
                [[0.1, 0.7, 0.2], [0.4, 0.5, 0.1]],
            ]
        ),
    )


@pytest.fixture(scope="session")
def dgp_c() -> DgpSpec:
    """dgp_b with the high type's treated category-1 mass raised to 0.8
    (category 3 lowered to stay on the simplex): the treated-arm selection
    covariance strictly exceeds the untreated one for category 1
    (gap 0.02 at both instrument values), so only the monotonic restriction
    survives."""
    return DgpSpec(
        q=3,
        w=np.array([0.5, 0.5]),
        pd=np.array([[0.4, 0.8], [0.0, 0.4]]),
        py=np.array(
            [
                [[0.3, 0.3, 0.4], [0.8, 0.1, 0.1]],
                [[0.1, 0.7, 0.2], [0.4, 0.5, 0.1]],
            ]
        ),
    )


@pytest.fixture(scope="session")
def dgp_violator() -> DgpSpec:
    """Opposite-sign selection across instrument arms, strong enough that the
    recovered raw category-1 probability exceeds 1 in the treated arm
    (raw pi1(c1) = 1.7): rejection evidence for the equal-covariance model."""
    return DgpSpec(
        q=2,
        w=np.array([0.5, 0.5]),
        pd=np.array([[0.1, 0.9], [0.7, 0.3]]),
        py=np.array(
            [
                [[0.1, 0.9], [0.9, 0.1]],
                [[0.9, 0.1], [0.1, 0.9]],
            ]
        ),
    )
