"""Latent-type populations with closed-form moments: the testing oracle.

A population is a finite mixture of latent types; within a type, take-up
under each instrument value and the two potential outcomes are drawn
independently.  Any selection-covariance pattern reachable with a binary
take-up and categorical outcomes is reachable with finitely many types, and
every population moment stays in closed form, which is what makes these
specs usable as exact ground truth for the estimators and bounds.

``spec_grid`` manufactures random specs whose selection structure satisfies a
requested profile:

* ``similarity`` — the per-type treated/untreated outcome gap is shared
  across types, which forces the across-arm covariance gap to vanish
  identically (rejection sampling cannot hit that measure-zero set).
* ``monotonic`` — take-up shifts uniformly across types and the outcome gap
  co-moves weakly positively with take-up, giving nonnegative covariance
  gaps.  Generation is confined to designs where the closed-form monotonic
  bounds provably cover the truth (take-up shift at most the remaining
  headroom ``1 - p1``, covariance gaps within the per-category slack).
* ``bounded`` — mixed-sign covariance gaps scaled under a target cap, with
  ``p0 + p1 >= 1`` so that a cap on the raw gaps also caps the effective
  deviation entering the interval formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DataError
from .moments import ObservedMoments

__all__ = [
    "DgpSpec",
    "DgpDiagnostics",
    "exact_moments",
    "diagnostics",
    "sample",
    "spec_grid",
    "sharpness_spec",
]

_PROFILES = ("similarity", "monotonic", "bounded")
_ATOL = 1e-12


@dataclass(frozen=True)
class DgpSpec:
    """A latent-type population.

    Attributes
    ----------
    q : int
        Number of outcome categories.
    w : ndarray, shape (T,)
        Positive type masses summing to one.
    pd : ndarray, shape (T, 2)
        ``pd[t, z]`` is the take-up probability of type ``t`` at instrument
        value ``z``.
    py : ndarray, shape (T, 2, q)
        ``py[t, d, :]`` is the outcome distribution of type ``t`` in
        treatment arm ``d``; each row sums to one.
    """

    q: int
    w: np.ndarray
    pd: np.ndarray
    py: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        pd = np.asarray(self.pd, dtype=np.float64)
        py = np.asarray(self.py, dtype=np.float64)
        for name, arr in (("w", w), ("pd", pd), ("py", py)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.q < 2:
            raise DataError("need at least 2 categories")
        t = w.shape[0]
        if t < 1:
            raise DataError("need at least one latent type")
        if pd.shape != (t, 2) or py.shape != (t, 2, self.q):
            raise DataError("inconsistent spec shapes")
        if (w <= 0).any() or abs(w.sum() - 1.0) > _ATOL:
            raise DataError("type masses must be positive and sum to 1")
        if (pd < 0).any() or (pd > 1).any():
            raise DataError("take-up probabilities must lie in [0, 1]")
        if (py < -0.0).any() or (py > 1).any():
            raise DataError("outcome probabilities must lie in [0, 1]")
        if np.abs(py.sum(axis=2) - 1.0).max() > _ATOL:
            raise DataError("outcome distributions must sum to 1")

    @property
    def n_types(self) -> int:
        return self.w.shape[0]

    @property
    def p(self) -> np.ndarray:
        """Population take-up probability per instrument value."""
        return self.w @ self.pd

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "types": [
                {
                    "weight": float(self.w[t]),
                    "pd0": float(self.pd[t, 0]),
                    "pd1": float(self.pd[t, 1]),
                    "py0": [float(v) for v in self.py[t, 0]],
                    "py1": [float(v) for v in self.py[t, 1]],
                }
                for t in range(self.n_types)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DgpSpec":
        try:
            q = int(obj["q"])
            types = obj["types"]
            w = np.array([t["weight"] for t in types], dtype=np.float64)
            pd = np.array([[t["pd0"], t["pd1"]] for t in types], dtype=np.float64)
            py = np.array([[t["py0"], t["py1"]] for t in types], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed spec object: {exc}") from None
        return cls(q=q, w=w, pd=pd, py=py)


@dataclass(frozen=True)
class DgpDiagnostics:
    """True marginals and selection structure of a spec.

    ``cov[d, k, z]`` is the covariance between the category-``k`` indicator
    of the arm-``d`` potential outcome and latent take-up at instrument value
    ``z``; ``delta`` is its across-arm gap for non-baseline categories.
    ``kappa_min`` is the largest absolute gap, and ``kappa_effective`` the
    largest absolute weighted gap entering the closed-form interval
    numerators (the value that governs bound coverage).
    """

    pi0: np.ndarray
    pi1: np.ndarray
    cov: np.ndarray
    delta: np.ndarray
    similarity: bool
    monotonic: bool
    kappa_min: float
    kappa_effective: float

    def to_dict(self) -> dict:
        return {
            "pi0": [float(v) for v in self.pi0],
            "pi1": [float(v) for v in self.pi1],
            "cov": self.cov.tolist(),
            "delta": self.delta.tolist(),
            "assumption_flags": {
                "similarity": self.similarity,
                "monotonic": self.monotonic,
                "kappa_min": self.kappa_min,
                "kappa_effective": self.kappa_effective,
            },
        }


def exact_moments(spec: DgpSpec) -> ObservedMoments:
    """Closed-form population moments of a spec (no sampling).

    The treated joint cell mixes each type's treated outcome distribution
    with its take-up probability; the untreated cell uses the complement.
    """
    joint = np.empty((spec.q, 2, 2))
    joint[:, 1, :] = np.einsum("t,tk,tz->kz", spec.w, spec.py[:, 1, :], spec.pd)
    joint[:, 0, :] = np.einsum(
        "t,tk,tz->kz", spec.w, spec.py[:, 0, :], 1.0 - spec.pd
    )
    mu = joint[:, 0, :] + joint[:, 1, :]
    p = joint[:, 1, :].sum(axis=0)
    n_z = np.array([np.inf, np.inf])
    for a in (joint, mu, p, n_z):
        a.setflags(write=False)
    return ObservedMoments(q=spec.q, p=p, joint=joint, mu=mu, n_z=n_z)


def diagnostics(spec: DgpSpec) -> DgpDiagnostics:
    """True potential-outcome marginals, selection covariances and the
    assumption classification of a spec."""
    pi = np.einsum("t,tdk->dk", spec.w, spec.py)
    p = spec.w @ spec.pd
    raw = np.einsum("t,tdk,tz->dkz", spec.w, spec.py, spec.pd)
    cov = raw - pi[:, :, None] * p[None, None, :]
    delta = cov[1, :-1, :] - cov[0, :-1, :]
    kappa_min = float(np.abs(delta).max())
    p0, p1 = float(p[0]), float(p[1])
    eff1 = (1.0 - p0) * delta[:, 1] - (1.0 - p1) * delta[:, 0]
    eff0 = p1 * delta[:, 0] - p0 * delta[:, 1]
    kappa_effective = float(max(np.abs(eff1).max(), np.abs(eff0).max()))
    for a in (pi, cov, delta):
        a.setflags(write=False)
    return DgpDiagnostics(
        pi0=pi[0],
        pi1=pi[1],
        cov=cov,
        delta=delta,
        similarity=kappa_min <= _ATOL,
        monotonic=bool(delta.min() >= -_ATOL),
        kappa_min=kappa_min,
        kappa_effective=kappa_effective,
    )


def sample(
    spec: DgpSpec, n: int, z_probability: float, seed: int
) -> Dataset:
    """Draw ``n`` i.i.d. records from a spec.

    Latents first (type, take-up pair, both potential outcomes), then the
    observation equations select what is seen.  Deterministic given ``seed``
    via a counter-based generator.
    """
    if n < 1:
        raise DataError(f"need n >= 1, got {n} (empty dataset)")
    if not (0.0 < z_probability < 1.0):
        raise DataError(f"z_probability must be in (0, 1), got {z_probability}")
    if seed < 0:
        raise DataError("seed must be a nonnegative integer")

    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random((4, n))
    t = np.searchsorted(np.cumsum(spec.w), u[0], side="right")
    t = np.minimum(t, spec.n_types - 1)
    z = (u[1] < z_probability).astype(np.int8)
    d = (u[2] < spec.pd[t, z]).astype(np.int8)
    cum = np.cumsum(spec.py, axis=2)
    cum[:, :, -1] = 1.0  # guard the top edge against rounding
    rows = cum[t, d.astype(np.int64)]
    y = (u[3][:, None] >= rows).sum(axis=1)

    categories = tuple(f"cat{k}" for k in range(spec.q))
    return Dataset(
        y=y.astype(np.int64),
        d=d,
        z=z,
        weight=np.ones(n),
        stratum=None,
        categories=categories,
    )


# ---------------------------------------------------------------------------
# Random spec generation
# ---------------------------------------------------------------------------


def _mixed_simplex(rng, q: int, corner_mix: float = 0.15) -> np.ndarray:
    """Dirichlet draw pulled toward uniform so no entry sits at a corner."""
    x = rng.dirichlet(np.full(q, 1.5))
    return (1.0 - corner_mix) * x + corner_mix / q


def _shared_gap(rng, py0: np.ndarray, q: int) -> np.ndarray:
    """A zero-sum outcome shift feasible for every type in ``py0``."""
    for _ in range(50):
        g = rng.normal(size=q)
        g -= g.mean()
        if np.abs(g).max() < 1e-9:
            continue
        with np.errstate(divide="ignore"):
            room_up = np.where(g > 1e-12, (1.0 - py0) / g, np.inf)
            room_dn = np.where(g < -1e-12, py0 / (-g), np.inf)
        s_max = min(room_up.min(), room_dn.min())
        if not np.isfinite(s_max) or s_max <= 0:
            continue
        return g * (s_max * rng.uniform(0.2, 0.8))
    raise DataError("could not draw a feasible outcome gap")


def _scale_eta_feasible(base: np.ndarray, eta: np.ndarray) -> float:
    """Largest factor in (0, 1] keeping ``base + factor * eta`` in [0, 1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        room_up = np.where(eta > 1e-12, (1.0 - base) / eta, np.inf)
        room_dn = np.where(eta < -1e-12, base / (-eta), np.inf)
    rho = min(room_up.min(), room_dn.min())
    if not np.isfinite(rho):
        return 1.0
    return float(min(1.0, 0.9 * rho))


def _two_type_masses(rng) -> tuple[float, float]:
    w_hi = float(rng.uniform(0.3, 0.7))
    return w_hi, 1.0 - w_hi


def _similarity_spec(rng, q: int) -> DgpSpec:
    n_types = int(rng.integers(1, 4))
    w = rng.dirichlet(np.full(n_types, 2.0)) if n_types > 1 else np.array([1.0])
    pd0 = rng.uniform(0.02, 0.62, size=n_types)
    p0 = float(w @ pd0)
    # Keep the take-up shift within the remaining headroom 1 - p1 so the
    # monotonic bound formulas provably cover the recovered point.
    shift = float(rng.uniform(0.15, min(0.35, 0.5 * (1.0 - p0))))
    pd = np.stack([pd0, pd0 + shift], axis=1)
    py0 = np.stack([_mixed_simplex(rng, q) for _ in range(n_types)])
    gap = _shared_gap(rng, py0, q)
    py = np.stack([py0, py0 + gap[None, :]], axis=1)
    return DgpSpec(q=q, w=w, pd=pd, py=py)


def _monotonic_spec(rng, q: int) -> DgpSpec:
    w_hi, w_lo = _two_type_masses(rng)
    w = np.array([w_hi, w_lo])
    p0 = float(rng.uniform(0.05, 0.55))
    spread_cap = max(min(0.62 - p0, p0 * w_lo / w_hi, 0.45), 0.0)
    spread = float(rng.uniform(0.2, 1.0)) * spread_cap
    pd0 = np.array([p0 + spread, p0 - spread * w_hi / w_lo])
    p0m = float(w @ pd0)
    # Uniform take-up shift within the remaining headroom: the covariance
    # gap is then equal across instrument values and p1 - p0 <= 1 - p1.
    shift = float(rng.uniform(0.15, min(0.35, 0.5 * (1.0 - p0m))))
    pd = np.stack([pd0, pd0 + shift], axis=1)
    p1m = p0m + shift

    py0 = np.stack([_mixed_simplex(rng, q) for _ in range(2)])
    gap = _shared_gap(rng, py0, q)
    base_py1 = py0 + gap[None, :]

    pi0 = w @ py0
    pi1 = w @ base_py1
    dpd0 = float(pd0[0] - pd0[1])
    c = np.zeros(q)
    if dpd0 > 1e-9:
        # Per-category slack below which the closed-form monotonic bounds
        # are provably valid for equal across-instrument covariance gaps.
        slack = p1m - pi1[:-1] * p0m - pi0[:-1] * (p1m - p0m)
        cap = np.minimum(0.04, 0.5 * np.maximum(slack, 0.0))
        targets = rng.uniform(0.2, 1.0, size=q - 1) * cap
        c[:-1] = targets / (w_hi * w_lo * dpd0)
        c[-1] = -c[:-1].sum()
    eta = np.stack([w_lo * c, -w_hi * c])
    eta *= _scale_eta_feasible(base_py1, eta)
    py = np.stack([py0, base_py1 + eta], axis=1)
    return DgpSpec(q=q, w=w, pd=pd, py=py)


def _bounded_spec(rng, q: int, kappa: float) -> DgpSpec:
    w_hi, w_lo = _two_type_masses(rng)
    w = np.array([w_hi, w_lo])
    shift = float(rng.uniform(0.15, 0.3))
    # p0 + p1 >= 1 makes a cap on the raw covariance gaps also cap the
    # effective deviation in the interval numerators.
    p0 = float(rng.uniform(0.5 * (1.0 - shift) + 0.01, 0.6))
    spread_cap = min(0.95 - p0 - shift, p0 * w_lo / w_hi, p0 * w_hi / w_lo, 0.4)
    spread = float(rng.uniform(0.2, 1.0)) * max(spread_cap, 0.0)
    pd0 = np.clip(np.array([p0 + spread, p0 - spread * w_hi / w_lo]), 0.0, 0.95)
    zeta = float(rng.uniform(-0.5, 0.5)) * min(
        0.98 - pd0.max() - shift, pd0.min() + shift, 0.3
    )
    pd1 = np.clip(pd0 + shift + np.array([w_lo * zeta, -w_hi * zeta]), 0.0, 1.0)
    pd = np.stack([pd0, pd1], axis=1)

    py0 = np.stack([_mixed_simplex(rng, q) for _ in range(2)])
    gap = _shared_gap(rng, py0, q)
    base_py1 = py0 + gap[None, :]

    c = np.zeros(q)
    c[:-1] = rng.uniform(-1.0, 1.0, size=q - 1)
    c[-1] = -c[:-1].sum()
    eta = np.stack([w_lo * c, -w_hi * c])
    eta *= _scale_eta_feasible(base_py1, eta)
    py = np.stack([py0, base_py1 + eta], axis=1)
    spec = DgpSpec(q=q, w=w, pd=pd, py=py)

    diag = diagnostics(spec)
    if diag.kappa_min > 0:
        target = kappa * float(rng.uniform(0.3, 0.9))
        factor = min(1.0, target / diag.kappa_min)
        eta *= factor
        py = np.stack([py0, base_py1 + eta], axis=1)
        spec = DgpSpec(q=q, w=w, pd=pd, py=py)
    return spec


def spec_grid(
    profile: str,
    count: int,
    seed: int,
    kappa: float | None = None,
    q_choices: Sequence[int] = (2, 3, 4, 5, 6),
) -> list[DgpSpec]:
    """Generate ``count`` random specs whose diagnostics satisfy ``profile``.

    Profiles: ``"similarity"`` (vanishing across-arm covariance gaps, built
    constructively), ``"monotonic"`` (nonnegative gaps) and ``"bounded"``
    (gaps capped by ``kappa``, which is then required).  Deterministic given
    ``seed``.  Raises :class:`DataError` if the rejection budget is exhausted,
    reporting the acceptance rate.
    """
    if profile not in _PROFILES:
        raise DataError(f"profile must be one of {_PROFILES}, got {profile!r}")
    if count < 1:
        raise DataError("count must be >= 1")
    if profile == "bounded":
        if kappa is None:
            raise DataError("profile 'bounded' requires kappa")
        if not (0.0 < kappa < 0.5):
            raise DataError(f"kappa must be in (0, 0.5), got {kappa}")

    rng = np.random.Generator(np.random.Philox(key=seed))
    out: list[DgpSpec] = []
    attempts = 0
    budget = max(1000, 100 * count)
    while len(out) < count:
        if attempts >= budget:
            raise DataError(
                f"spec generation budget exhausted: {len(out)}/{count} accepted "
                f"in {attempts} attempts "
                f"(acceptance rate {len(out) / attempts:.3f})"
            )
        attempts += 1
        q = int(rng.choice(np.asarray(q_choices)))
        try:
            if profile == "similarity":
                spec = _similarity_spec(rng, q)
            elif profile == "monotonic":
                spec = _monotonic_spec(rng, q)
            else:
                spec = _bounded_spec(rng, q, kappa)
        except DataError:
            continue
        diag = diagnostics(spec)
        if profile == "similarity" and not diag.similarity:
            continue
        if profile == "monotonic" and not diag.monotonic:
            continue
        if profile == "bounded" and diag.kappa_min > kappa:
            continue
        if abs(float(spec.p[1] - spec.p[0])) < 0.1:
            continue
        out.append(spec)
    return out


def sharpness_spec(kappa: float, sign: int, seed: int = 0) -> tuple[DgpSpec, int]:
    """A spec whose truth sits exactly on a bounded-regime interval endpoint.

    Take-up shifts uniformly across two equal-mass types, so the covariance
    gap is the same at both instrument values; setting it to
    ``sign * kappa / (p1 - p0)`` puts the effective deviation at exactly
    ``sign * kappa`` and the true probabilities of the probed category (index
    0, returned) on the lower (``sign=+1``) or upper (``sign=-1``) endpoints
    of both arms' intervals.
    """
    if not (0.0 < kappa < 0.5):
        raise DataError(f"kappa must be in (0, 0.5), got {kappa}")
    if sign not in (-1, 1):
        raise DataError("sign must be +1 or -1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    for _ in range(200):
        shift = float(rng.uniform(0.3, 0.5))
        delta_cov = kappa / shift
        if delta_cov > 0.24:  # keep the raw interval inside [0, 1]
            continue
        lo_dpd0 = 4.0 * delta_cov / 1.4 + 0.02
        hi_dpd0 = 0.94 - shift
        if hi_dpd0 <= lo_dpd0:
            continue
        dpd0 = float(rng.uniform(lo_dpd0, hi_dpd0))
        pd0_lo = float(rng.uniform(0.02, 0.96 - shift - dpd0))
        pd0 = np.array([pd0_lo + dpd0, pd0_lo])
        c = sign * 4.0 * delta_cov / dpd0
        # Baseline outcome rows sit off-centre so the per-type gap has room.
        off = 0.25 * sign
        py0 = np.array([[0.5 - off, 0.5 + off], [0.5 + off, 0.5 - off]])
        py1 = py0 + np.array([[c / 2.0, -c / 2.0], [-c / 2.0, c / 2.0]])
        py = np.stack([py0, py1], axis=1)
        spec = DgpSpec(
            q=2,
            w=np.array([0.5, 0.5]),
            pd=np.stack([pd0, pd0 + shift], axis=1),
            py=py,
        )
        return spec, 0
    raise DataError("could not construct a sharpness spec")
