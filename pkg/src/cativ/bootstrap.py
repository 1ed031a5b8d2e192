"""Nonparametric bootstrap: resample individuals, recompute an estimand,
report percentile confidence intervals and replicate accounting.

Each replicate's resample indices come from a counter-based generator keyed
by ``(seed, replicate index)``, so results are reproducible bit for bit and
independent of any execution order.  Resampling is within-stratum when the
data are stratified, preserving stratum sizes.  Replicates that lose
instrument variation or trip the weak-instrument guard are skipped and
tallied by reason (or, with ``on_degenerate="fail"``, re-raised).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import bounds_bounded, bounds_monotonic, bounds_none
from .data import Dataset
from .errors import DataError, WeakInstrumentError
from .identify import identify_point
from .moments import (
    DEFAULT_WEAK_IV_TOL,
    ObservedMoments,
    estimate_moments,
    orient_instrument,
)

__all__ = ["BootstrapConfig", "BootstrapResult", "Estimand", "bootstrap"]

_KINDS = ("point", "effects", "point+effects", "bounds")
_REGIMES = ("none", "monotonic", "bounded")

# Replicate streams are spaced 2**128 counter blocks apart; a replicate uses
# astronomically fewer draws than that, so streams never overlap.
_STREAM_STRIDE = 1 << 128


@dataclass(frozen=True)
class Estimand:
    """A named pipeline recomputed on every bootstrap replicate."""

    kind: str
    regime: str | None = None
    kappa: float | None = None
    stratum: int | None = None
    tol: float = DEFAULT_WEAK_IV_TOL

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DataError(f"estimand kind must be one of {_KINDS}")
        if self.kind == "bounds":
            if self.regime not in _REGIMES:
                raise DataError(f"bounds estimand needs a regime in {_REGIMES}")
            if self.regime == "bounded":
                if self.kappa is None or not (0.0 <= self.kappa < 0.5):
                    raise DataError("bounded regime needs kappa in [0, 0.5)")

    @classmethod
    def point(cls, stratum: int | None = None, tol: float = DEFAULT_WEAK_IV_TOL):
        return cls(kind="point", stratum=stratum, tol=tol)

    @classmethod
    def effects(cls, stratum: int | None = None, tol: float = DEFAULT_WEAK_IV_TOL):
        return cls(kind="effects", stratum=stratum, tol=tol)

    @classmethod
    def point_effects(
        cls, stratum: int | None = None, tol: float = DEFAULT_WEAK_IV_TOL
    ):
        return cls(kind="point+effects", stratum=stratum, tol=tol)

    @classmethod
    def bounds(
        cls,
        regime: str,
        kappa: float | None = None,
        stratum: int | None = None,
        tol: float = DEFAULT_WEAK_IV_TOL,
    ):
        return cls(kind="bounds", regime=regime, kappa=kappa, stratum=stratum, tol=tol)

    def describe(self) -> str:
        if self.kind == "bounds":
            extra = self.regime if self.kappa is None else f"{self.regime},kappa={self.kappa:g}"
            return f"bounds({extra})"
        return self.kind

    def component_names(self, categories) -> list[str]:
        names: list[str] = []
        if self.kind in ("point", "point+effects"):
            names += [f"pi1[{c}]" for c in categories]
            names += [f"pi0[{c}]" for c in categories]
        if self.kind in ("effects", "point+effects"):
            names += [f"ate[{c}]" for c in categories]
        if self.kind == "bounds":
            names += [f"pi1_lower[{c}]" for c in categories]
            names += [f"pi1_upper[{c}]" for c in categories]
            names += [f"pi0_lower[{c}]" for c in categories]
            names += [f"pi0_upper[{c}]" for c in categories]
        return names

    def evaluate(self, m: ObservedMoments) -> np.ndarray:
        """Component values for one set of moments; raises on weak or
        degenerate inputs (callers decide whether to skip)."""
        parts: list[np.ndarray] = []
        if self.kind in ("point", "effects", "point+effects"):
            pdist = identify_point(m, tol=self.tol)
            if self.kind in ("point", "point+effects"):
                parts += [pdist.pi1, pdist.pi0]
            if self.kind in ("effects", "point+effects"):
                # Truncated basis, fixed across replicates so the percentile
                # interval always aggregates the same functional.
                parts.append(pdist.pi1 - pdist.pi0)
        else:
            if self.regime == "none":
                b = bounds_none(m)
            elif self.regime == "monotonic":
                b = bounds_monotonic(orient_instrument(m))
            else:
                b = bounds_bounded(m, self.kappa, tol=self.tol)
            parts += [b.lower[1], b.upper[1], b.lower[0], b.upper[0]]
        return np.concatenate(parts)


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings; ``seed`` is required for reproducibility."""

    seed: int
    replicates: int = 999
    ci_level: float = 0.95
    on_degenerate: str = "skip"

    def __post_init__(self):
        if self.replicates < 1:
            raise DataError("replicates must be >= 1")
        if not (0.0 < self.ci_level < 1.0):
            raise DataError("ci_level must be in (0, 1)")
        if self.on_degenerate not in ("skip", "fail"):
            raise DataError("on_degenerate must be 'skip' or 'fail'")
        if self.seed < 0 or self.seed >= 2**64:
            raise DataError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BootstrapResult:
    """Full-sample values plus percentile intervals per component.

    Percentile intervals need not contain the full-sample value; the only
    ordering guaranteed is ``ci_lower <= ci_upper`` componentwise.
    """

    point: dict[str, float]
    ci_lower: dict[str, float]
    ci_upper: dict[str, float]
    replicates_used: int
    replicates_skipped: int
    skip_reasons: dict[str, int]
    ci_level: float
    replicates: int
    seed: int
    estimand: str
    method: str = "percentile"


class _SkipReplicate(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def _classify(exc: Exception) -> str:
    if isinstance(exc, WeakInstrumentError):
        return "weak_instrument"
    msg = str(exc)
    if "no variation" in msg:
        return "no_z_variation"
    if "stratum" in msg:
        return "empty_stratum"
    return "degenerate"


def _resample_indices(groups: list[np.ndarray], rng) -> np.ndarray:
    """Within-group draws with replacement, preserving group sizes."""
    if len(groups) == 1:
        g = groups[0]
        return g[rng.integers(0, g.size, g.size)]
    return np.concatenate(
        [g[rng.integers(0, g.size, g.size)] for g in groups]
    )


def _replicate_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=r * _STREAM_STRIDE))


def _fast_moments(cells: np.ndarray, counts_z: np.ndarray) -> ObservedMoments:
    w_z = np.array([cells[:, :, 0].sum(), cells[:, :, 1].sum()])
    if w_z[0] <= 0.0 or w_z[1] <= 0.0:
        raise _SkipReplicate("no_z_variation")
    joint = cells / w_z[None, None, :]
    mu = joint[:, 0, :] + joint[:, 1, :]
    p = joint[:, 1, :].sum(axis=0)
    return ObservedMoments(
        q=cells.shape[0], p=p, joint=joint, mu=mu, n_z=counts_z
    )


def bootstrap(
    ds: Dataset, estimand: Estimand, cfg: BootstrapConfig
) -> BootstrapResult:
    """Percentile bootstrap of ``estimand`` over resampled individuals.

    The full-sample value is computed through the public estimation path;
    replicates use an equivalent in-memory path.  Quantiles follow the
    linear-interpolation convention between order statistics (numpy's
    default), pinned for cross-run comparability.
    """
    names = estimand.component_names(ds.categories)

    full_m = estimate_moments(ds, stratum=estimand.stratum)
    point_values = estimand.evaluate(full_m)

    y, d, z, w = ds.y, ds.d, ds.z, ds.weight
    if estimand.stratum is not None:
        keep = ds.stratum == estimand.stratum
    else:
        keep = None
    q = ds.q
    codes = ((y * 2 + d.astype(np.int64)) * 2 + z.astype(np.int64)).astype(np.int64)
    unweighted = bool((w == 1.0).all())

    if ds.stratum is None:
        groups = [np.arange(ds.n)]
    else:
        groups = [np.flatnonzero(ds.stratum == s) for s in ds.stratum_labels()]

    values = np.empty((cfg.replicates, len(names)))
    used = 0
    skip_reasons: dict[str, int] = {}
    for r in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, r)
        idx = _resample_indices(groups, rng)
        if keep is not None:
            idx = idx[keep[idx]]
        try:
            if idx.size == 0:
                raise _SkipReplicate("empty_stratum")
            sub_codes = codes[idx]
            if unweighted:
                cells = np.bincount(sub_codes, minlength=4 * q).astype(np.float64)
            else:
                cells = np.bincount(sub_codes, weights=w[idx], minlength=4 * q)
            cells = cells.reshape(q, 2, 2)
            counts_z = np.bincount(
                z[idx].astype(np.int64), minlength=2
            ).astype(np.float64)
            m = _fast_moments(cells, counts_z)
            values[used] = estimand.evaluate(m)
        except (_SkipReplicate, WeakInstrumentError, DataError) as exc:
            if cfg.on_degenerate == "fail":
                raise
            reason = exc.reason if isinstance(exc, _SkipReplicate) else _classify(exc)
            skip_reasons[reason] = skip_reasons.get(reason, 0) + 1
            continue
        used += 1

    if used == 0:
        raise DataError(
            f"all {cfg.replicates} bootstrap replicates were degenerate: "
            f"{skip_reasons}"
        )

    alpha = (1.0 - cfg.ci_level) / 2.0
    quantiles = np.quantile(values[:used], [alpha, 1.0 - alpha], axis=0)

    return BootstrapResult(
        point={n: float(v) for n, v in zip(names, point_values)},
        ci_lower={n: float(v) for n, v in zip(names, quantiles[0])},
        ci_upper={n: float(v) for n, v in zip(names, quantiles[1])},
        replicates_used=used,
        replicates_skipped=cfg.replicates - used,
        skip_reasons=skip_reasons,
        ci_level=cfg.ci_level,
        replicates=cfg.replicates,
        seed=cfg.seed,
        estimand=estimand.describe(),
    )
