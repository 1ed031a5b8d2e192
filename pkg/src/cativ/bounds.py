"""Interval bounds on the potential-outcome probabilities.

Three regimes:

* ``none`` — worst-case intervals using only the observed joint cells,
  intersected over the two instrument values (valid for every category).
* ``monotonic`` — selection covariance weakly larger under treatment;
  closed-form bounds for the standard orientation ``p1 > p0``.
* ``bounded`` — the across-arm covariance gap is bounded by a known
  ``kappa < 1/2``; symmetric intervals around the point estimates whose
  width scales as ``kappa / (p1 - p0)``, collapsing to the point solution at
  ``kappa = 0``.

The monotonic and bounded formulas cover the non-baseline categories; the
baseline row is completed by complement interval arithmetic over the free
categories.  Raw (untruncated) endpoints are always kept next to the
truncated ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .identify import _raw_point
from .moments import DEFAULT_WEAK_IV_TOL, ObservedMoments, check_relevance

__all__ = [
    "IntervalBounds",
    "bounds_none",
    "bounds_monotonic",
    "bounds_bounded",
    "kappa_sweep",
    "breakdown_kappa",
]

_REGIMES = ("none", "monotonic", "bounded")


@dataclass(frozen=True)
class IntervalBounds:
    """Per-arm, per-category probability intervals.

    ``lower[d, k] <= upper[d, k]`` holds after truncation whenever the data
    are consistent with the regime's restrictions; a crossed interval on real
    data is rejection evidence, so it is reported rather than raised.
    """

    regime: str
    kappa: float | None
    lower: np.ndarray
    upper: np.ndarray
    raw_lower: np.ndarray
    raw_upper: np.ndarray
    swapped_z: bool = False

    @property
    def q(self) -> int:
        return self.lower.shape[1]

    def check(self, atol: float = 1e-12) -> None:
        """Assert the interval invariants (for model-consistent inputs)."""
        assert self.regime in _REGIMES
        assert np.all(self.lower <= self.upper + atol)
        assert np.all(self.lower >= -atol) and np.all(self.upper <= 1 + atol)


def _finish(regime, kappa, raw_lower, raw_upper, swapped_z) -> IntervalBounds:
    lower = np.clip(raw_lower, 0.0, 1.0)
    upper = np.clip(raw_upper, 0.0, 1.0)
    for a in (raw_lower, raw_upper, lower, upper):
        a.setflags(write=False)
    return IntervalBounds(
        regime=regime,
        kappa=kappa,
        lower=lower,
        upper=upper,
        raw_lower=raw_lower,
        raw_upper=raw_upper,
        swapped_z=swapped_z,
    )


def _baseline_complement(raw_lower, raw_upper) -> None:
    # pi_base = 1 - sum of free categories: interval subtraction.
    for d in (0, 1):
        free_lo = raw_lower[d, :-1].sum()
        free_hi = raw_upper[d, :-1].sum()
        raw_lower[d, -1] = 1.0 - free_hi
        raw_upper[d, -1] = 1.0 - free_lo


def bounds_none(m: ObservedMoments) -> IntervalBounds:
    """Assumption-free intervals from the observed joint cells.

    For each category and arm the treated (untreated) cell pins the
    probability from below, and the unobserved complement of the arm adds the
    slack above; intersecting over both instrument values gives the tightest
    version.  No orientation or relevance requirement.
    """
    one_minus_p = 1.0 - m.p
    raw_lower = np.empty((2, m.q))
    raw_upper = np.empty((2, m.q))
    raw_lower[1] = m.joint[:, 1, :].max(axis=1)
    raw_upper[1] = (m.joint[:, 1, :] + one_minus_p[None, :]).min(axis=1)
    raw_lower[0] = m.joint[:, 0, :].max(axis=1)
    raw_upper[0] = (m.joint[:, 0, :] + m.p[None, :]).min(axis=1)
    return _finish("none", None, raw_lower, raw_upper, m.swapped_z)


def bounds_monotonic(m: ObservedMoments) -> IntervalBounds:
    """Intervals under weakly stronger selection covariance in the treated
    arm; requires oriented moments (``p1 > p0``).

    When ``p1 == 1`` the untreated cell of the high arm is empty and the
    corresponding lower-bound constraint is vacuous, so that bound is 0.
    """
    p0, p1 = float(m.p[0]), float(m.p[1])
    if p1 <= p0:
        raise DataError(
            f"monotonic bounds need p1 > p0 (call orient_instrument first); "
            f"got p0={p0:.6g}, p1={p1:.6g}"
        )
    mu0 = m.mu[:-1, 0]
    mu1 = m.mu[:-1, 1]
    lower1 = (mu1 - mu0) / (p1 - p0)
    upper1 = np.minimum(1.0, mu1 / p1)
    if p1 < 1.0:
        lower0 = np.maximum(0.0, (mu0 - p1 * upper1) / (1.0 - p1))
    else:
        lower0 = np.zeros_like(mu0)
    upper0 = (mu0 - p0 * lower1) / (1.0 - p0)

    raw_lower = np.empty((2, m.q))
    raw_upper = np.empty((2, m.q))
    raw_lower[1, :-1], raw_upper[1, :-1] = lower1, upper1
    raw_lower[0, :-1], raw_upper[0, :-1] = lower0, upper0
    _baseline_complement(raw_lower, raw_upper)
    return _finish("monotonic", None, raw_lower, raw_upper, m.swapped_z)


def bounds_bounded(
    m: ObservedMoments,
    kappa: float,
    tol: float = DEFAULT_WEAK_IV_TOL,
) -> IntervalBounds:
    """Sensitivity intervals for a known cap ``kappa`` on the across-arm
    selection-covariance gap.

    At ``kappa = 0`` both endpoints equal the point solution exactly.  The
    formulas are label-symmetric, so unoriented moments are accepted.
    """
    if not (0.0 <= kappa < 0.5):
        raise DataError(f"kappa must be in [0, 0.5), got {kappa}")
    check_relevance(m, tol)
    delta = float(m.p[1] - m.p[0])
    mu0 = m.mu[:-1, 0]
    mu1 = m.mu[:-1, 1]
    a = mu1 * (1.0 - m.p[0]) - mu0 * (1.0 - m.p[1])
    b = mu0 * m.p[1] - mu1 * m.p[0]
    end1 = np.stack([(a - kappa) / delta, (a + kappa) / delta])
    end0 = np.stack([(b - kappa) / delta, (b + kappa) / delta])

    raw_lower = np.empty((2, m.q))
    raw_upper = np.empty((2, m.q))
    raw_lower[1, :-1] = end1.min(axis=0)
    raw_upper[1, :-1] = end1.max(axis=0)
    raw_lower[0, :-1] = end0.min(axis=0)
    raw_upper[0, :-1] = end0.max(axis=0)
    _baseline_complement(raw_lower, raw_upper)
    return _finish("bounded", float(kappa), raw_lower, raw_upper, m.swapped_z)


def kappa_sweep(
    m: ObservedMoments,
    grid: Sequence[float],
    tol: float = DEFAULT_WEAK_IV_TOL,
) -> list[IntervalBounds]:
    """Evaluate :func:`bounds_bounded` over a strictly ascending kappa grid."""
    grid = list(grid)
    if not grid:
        raise DataError("kappa grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError("kappa grid must be strictly ascending")
    return [bounds_bounded(m, k, tol=tol) for k in grid]


def breakdown_kappa(
    m: ObservedMoments,
    k: int,
    null_value: float = 0.0,
    tol: float = DEFAULT_WEAK_IV_TOL,
) -> float | None:
    """Smallest kappa at which the raw interval for the category-``k`` risk
    difference first contains ``null_value``.

    Conservative interval subtraction gives the risk-difference interval a
    half-width of ``2 kappa / |p1 - p0|`` for free categories (and
    ``2 (q-1) kappa / |p1 - p0|`` for the baseline, whose interval comes from
    complement arithmetic), so the crossing kappa is available in closed
    form.  Returns ``None`` when the interval already contains the null at
    ``kappa = 0``, i.e. when the point risk difference equals ``null_value``.
    """
    if not (0 <= k < m.q):
        raise DataError(f"category index {k} out of range for q={m.q}")
    check_relevance(m, tol)
    raw1, raw0 = _raw_point(m.mu, m.p)
    diff = float(raw1[k] - raw0[k]) - null_value
    if diff == 0.0:
        return None
    width_factor = 2.0 * (m.q - 1) if k == m.q - 1 else 2.0
    return abs(m.p[1] - m.p[0]) * abs(diff) / width_factor
