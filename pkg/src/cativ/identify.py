"""Closed-form recovery of the two potential-outcome distributions.

With a binary instrument shifting take-up from ``p0`` to ``p1``, the outcome
margins ``mu[k, z]`` satisfy, for every non-baseline category, a 2x2 linear
system in the treated and untreated category probabilities whose selection
terms cancel when the selection covariance is equal across arms.  Solving it
gives the raw estimates below; the baseline category is recovered by
normalisation, and the per-arm selection covariances fall out as residuals of
the treated joint cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WeakInstrumentError
from .moments import DEFAULT_WEAK_IV_TOL, ObservedMoments, check_relevance

__all__ = [
    "PotentialDistributions",
    "identify_point",
    "test_implication",
    "plug_back_residual",
    "omega_fit_residual",
    "truncate_renormalize",
]

# Covariances of binary indicators live in [-1/4, 1/4]; estimates outside are
# flagged, never rejected.
OMEGA_RANGE = 0.25


@dataclass(frozen=True)
class PotentialDistributions:
    """Point-identified categorical potential-outcome distributions.

    ``raw_pi1``/``raw_pi0`` hold the untruncated solution (first ``q - 1``
    entries from the linear solve, baseline by normalisation); out-of-range
    entries there are rejection evidence and stay visible.  ``pi1``/``pi0``
    are clipped to ``[0, 1]`` and renormalised for display.  ``omega[k, z]``
    is the recovered selection covariance for non-baseline category ``k``.
    ``testable_ok[d]`` records whether arm ``d`` passes the model's testable
    implication.
    """

    pi1: np.ndarray
    pi0: np.ndarray
    raw_pi1: np.ndarray
    raw_pi0: np.ndarray
    omega: np.ndarray
    testable_ok: tuple[bool, bool]
    swapped_z: bool = False

    @property
    def q(self) -> int:
        return self.pi1.shape[0]

    @property
    def omega_in_range(self) -> np.ndarray:
        """Boolean mask, False where an omega estimate leaves [-1/4, 1/4]."""
        return np.abs(self.omega) <= OMEGA_RANGE + 1e-12


def _raw_point(mu: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve the per-category 2x2 systems; returns raw (pi1, pi0), length q."""
    p0, p1 = float(p[0]), float(p[1])
    delta = p1 - p0
    free1 = (mu[:-1, 1] * (1.0 - p0) - mu[:-1, 0] * (1.0 - p1)) / delta
    free0 = (mu[:-1, 0] * p1 - mu[:-1, 1] * p0) / delta
    raw1 = np.append(free1, 1.0 - free1.sum())
    raw0 = np.append(free0, 1.0 - free0.sum())
    return raw1, raw0


def truncate_renormalize(raw: np.ndarray) -> np.ndarray:
    """Clip to [0, 1] and rescale to sum 1 (display form, never silent: raw
    values are always carried alongside)."""
    clipped = np.clip(raw, 0.0, 1.0)
    total = clipped.sum()
    return clipped / total


def _testable(raw: np.ndarray) -> bool:
    free = raw[:-1]
    return bool(np.all(free >= 0.0) and free.sum() < 1.0)


def identify_point(
    m: ObservedMoments, tol: float = DEFAULT_WEAK_IV_TOL
) -> PotentialDistributions:
    """Recover both potential-outcome distributions from observed moments.

    The formulas are symmetric in the instrument labels, so the input does
    not need to be oriented; ``swapped_z`` is propagated for reporting.

    Raises
    ------
    WeakInstrumentError
        When ``|p1 - p0| < tol``.
    """
    check_relevance(m, tol)
    raw1, raw0 = _raw_point(m.mu, m.p)
    omega = m.joint[:-1, 1, :] - raw1[:-1, None] * m.p[None, :]
    pi1 = truncate_renormalize(raw1)
    pi0 = truncate_renormalize(raw0)
    for a in (raw1, raw0, omega, pi1, pi0):
        a.setflags(write=False)
    return PotentialDistributions(
        pi1=pi1,
        pi0=pi0,
        raw_pi1=raw1,
        raw_pi0=raw0,
        omega=omega,
        testable_ok=(_testable(raw0), _testable(raw1)),
        swapped_z=m.swapped_z,
    )


def test_implication(pd: PotentialDistributions) -> dict[int, bool]:
    """Evaluate the model's testable implication per treatment arm.

    Arm ``d`` passes iff the raw non-baseline probabilities are all
    nonnegative and sum strictly below 1 (so the baseline probability is
    positive and well defined).  A False value is rejection evidence against
    the equal-selection-covariance restriction.
    """
    return {0: _testable(pd.raw_pi0), 1: _testable(pd.raw_pi1)}


def plug_back_residual(pd: PotentialDistributions, m: ObservedMoments) -> float:
    """Max absolute error of the raw solution plugged back into the outcome
    margins; an algebraic identity of the 2x2 solve, <= 1e-10 on any input."""
    fitted = (
        pd.raw_pi1[:-1, None] * m.p[None, :]
        + pd.raw_pi0[:-1, None] * (1.0 - m.p)[None, :]
    )
    return float(np.abs(m.mu[:-1, :] - fitted).max())


def omega_fit_residual(pd: PotentialDistributions, m: ObservedMoments) -> float:
    """Max absolute misfit of the untreated joint cells against the recovered
    selection covariances, ``joint[k,0,z] - (pi0[k] (1-p_z) - omega[k,z])``."""
    fitted = pd.raw_pi0[:-1, None] * (1.0 - m.p)[None, :] - pd.omega
    return float(np.abs(m.joint[:-1, 0, :] - fitted).max())
