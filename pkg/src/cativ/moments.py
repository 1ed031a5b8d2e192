"""Observed probability objects: propensities, joint tables and outcome
margins conditional on the instrument.

Everything downstream (point identification, interval bounds, effect
functionals) consumes only :class:`ObservedMoments`.  Tables are weighted
relative frequencies accumulated in a fixed (category, treatment, instrument)
cell order with weights sorted within each cell, so results are bit-identical
under any permutation of the input records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError, WeakInstrumentError

__all__ = [
    "DEFAULT_WEAK_IV_TOL",
    "ObservedMoments",
    "estimate_moments",
    "check_relevance",
    "orient_instrument",
    "swap_instrument",
]

DEFAULT_WEAK_IV_TOL = 0.01


@dataclass(frozen=True)
class ObservedMoments:
    """Estimated (or exact) probability tables conditional on the instrument.

    Attributes
    ----------
    q : int
        Number of outcome categories.
    p : ndarray, shape (2,)
        ``p[z]`` is the treatment take-up probability given instrument ``z``.
    joint : ndarray, shape (q, 2, 2)
        ``joint[k, d, z]`` is the probability of outcome ``k`` and treatment
        ``d`` given instrument ``z``.
    mu : ndarray, shape (q, 2)
        ``mu[k, z] = joint[k, 0, z] + joint[k, 1, z]``, the outcome margin.
    n_z : ndarray, shape (2,)
        Effective sample size per instrument arm ((sum w)^2 / sum w^2, which
        reduces to the record count for equal weights); infinite for exact
        population moments.
    swapped_z : bool
        True when instrument labels have been swapped by
        :func:`orient_instrument`.
    """

    q: int
    p: np.ndarray
    joint: np.ndarray
    mu: np.ndarray
    n_z: np.ndarray
    swapped_z: bool = False

    def check(self, atol: float = 1e-12) -> None:
        """Assert the construction invariants; raises AssertionError."""
        assert self.joint.shape == (self.q, 2, 2)
        assert self.mu.shape == (self.q, 2)
        assert self.p.shape == (2,)
        assert np.all(self.joint >= -atol) and np.all(self.joint <= 1 + atol)
        assert np.all(self.p >= -atol) and np.all(self.p <= 1 + atol)
        for z in (0, 1):
            assert abs(self.joint[:, :, z].sum() - 1.0) <= atol
            assert abs(self.mu[:, z].sum() - 1.0) <= atol
            assert abs(self.joint[:, 1, z].sum() - self.p[z]) <= atol
        assert np.array_equal(self.mu, self.joint[:, 0, :] + self.joint[:, 1, :])


def _freeze(*arrays: np.ndarray):
    for a in arrays:
        a.setflags(write=False)


def _moments_from_cells(cells: np.ndarray, n_z: np.ndarray) -> ObservedMoments:
    """Normalise per-arm weighted cell totals into an ObservedMoments."""
    q = cells.shape[0]
    w_z = np.array(
        [cells[:, :, 0].sum(), cells[:, :, 1].sum()], dtype=np.float64
    )
    if w_z[0] <= 0 or w_z[1] <= 0:
        raise DataError("instrument has no variation")
    joint = cells / w_z[None, None, :]
    mu = joint[:, 0, :] + joint[:, 1, :]
    p = joint[:, 1, :].sum(axis=0)
    _freeze(joint, mu, p, n_z)
    return ObservedMoments(q=q, p=p, joint=joint, mu=mu, n_z=n_z)


def estimate_moments(ds: Dataset, stratum: int | None = None) -> ObservedMoments:
    """Estimate weighted relative-frequency moments from microdata.

    Parameters
    ----------
    ds : Dataset
        Validated microdata.
    stratum : int, optional
        Restrict estimation to one stratum; identification then proceeds
        within that stratum.

    Raises
    ------
    DataError
        When the (sub)sample lacks instrument variation, or the requested
        stratum is empty or the dataset is unstratified.
    """
    y, d, z, w = ds.y, ds.d, ds.z, ds.weight
    if stratum is not None:
        if ds.stratum is None:
            raise DataError("dataset has no strata")
        mask = ds.stratum == stratum
        if not mask.any():
            raise DataError(f"empty stratum {stratum}")
        y, d, z, w = y[mask], d[mask], z[mask], w[mask]

    q = ds.q
    codes = (y * 2 + d.astype(np.int64)) * 2 + z.astype(np.int64)
    # Sort by (cell, weight): summing each cell's weights in sorted order
    # makes the totals independent of record order, bit for bit.
    order = np.lexsort((w, codes))
    codes_sorted = codes[order]
    w_sorted = w[order]
    edges = np.searchsorted(codes_sorted, np.arange(4 * q + 1))
    cells = np.empty(4 * q, dtype=np.float64)
    sumsq = np.zeros(2, dtype=np.float64)
    for c in range(4 * q):
        chunk = w_sorted[edges[c] : edges[c + 1]]
        cells[c] = chunk.sum()
        sumsq[c & 1] += (chunk * chunk).sum()
    cells = cells.reshape(q, 2, 2)
    w_z = np.array([cells[:, :, 0].sum(), cells[:, :, 1].sum()])
    with np.errstate(divide="ignore", invalid="ignore"):
        n_z = np.where(sumsq > 0, w_z * w_z / sumsq, 0.0)
    return _moments_from_cells(cells, n_z)


def check_relevance(m: ObservedMoments, tol: float = DEFAULT_WEAK_IV_TOL) -> float:
    """Return ``p1 - p0``; raise :class:`WeakInstrumentError` when its
    magnitude falls below ``tol``.

    Exactly equal propensities always raise, whatever the tolerance: every
    downstream formula divides by the difference.
    """
    diff = float(m.p[1] - m.p[0])
    if abs(diff) < tol or diff == 0.0:
        raise WeakInstrumentError(m.p[0], m.p[1], tol)
    return diff


def swap_instrument(m: ObservedMoments) -> ObservedMoments:
    """Relabel the two instrument values (an involution)."""
    joint = np.ascontiguousarray(m.joint[:, :, ::-1])
    mu = np.ascontiguousarray(m.mu[:, ::-1])
    p = np.ascontiguousarray(m.p[::-1])
    n_z = np.ascontiguousarray(m.n_z[::-1])
    _freeze(joint, mu, p, n_z)
    return ObservedMoments(
        q=m.q, p=p, joint=joint, mu=mu, n_z=n_z, swapped_z=not m.swapped_z
    )


def orient_instrument(m: ObservedMoments) -> ObservedMoments:
    """Return moments with instrument labels arranged so that ``p1 > p0``.

    Interval formulas stated for the standard orientation are applied after
    this single up-front relabel; the ``swapped_z`` flag records it for
    reporting.  Raises :class:`WeakInstrumentError` when ``p1 == p0`` exactly.
    """
    if m.p[1] > m.p[0]:
        return m
    if m.p[1] == m.p[0]:
        raise WeakInstrumentError(
            m.p[0], m.p[1], 0.0, message="instrument propensities are equal"
        )
    return swap_instrument(m)
