"""Treatment-effect functionals over categorical potential outcomes.

Per-category risk differences (the ATE vector), relative risks and log-odds
ratios; plus conservative interval arithmetic mapping probability bounds into
risk-difference bounds.  Boundary cases (zero or one probabilities) yield
explicit undefined flags instead of infinities so JSON output stays portable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import IntervalBounds
from .identify import PotentialDistributions

__all__ = ["EffectEstimates", "effects_point", "effects_bounds", "ATE_BOUNDS_NOTE"]

ATE_BOUNDS_NOTE = "conservative, not shown sharp"


@dataclass(frozen=True)
class EffectEstimates:
    """Effect functionals; entries are NaN where the companion defined-mask
    is False.  ``ate_lower``/``ate_upper`` are present only when built from
    interval bounds, and are conservative."""

    ate: np.ndarray | None = None
    rr: np.ndarray | None = None
    log_odds: np.ndarray | None = None
    rr_defined: np.ndarray | None = None
    log_odds_defined: np.ndarray | None = None
    used_raw: bool = False
    testable_warning: bool = False
    ate_lower: np.ndarray | None = None
    ate_upper: np.ndarray | None = None
    ate_note: str | None = None


def effects_point(
    pd: PotentialDistributions, use_raw: bool | None = None
) -> EffectEstimates:
    """Compute point effect functionals from identified distributions.

    By default the truncated-and-renormalised probabilities are used; when
    either arm fails the testable implication the raw values are used instead
    and ``testable_warning`` is set, so the violation stays visible.  Pass
    ``use_raw`` to force either basis.
    """
    ok = pd.testable_ok[0] and pd.testable_ok[1]
    if use_raw is None:
        use_raw = not ok
    if use_raw:
        pi1, pi0 = pd.raw_pi1, pd.raw_pi0
    else:
        pi1, pi0 = pd.pi1, pd.pi0

    ate = pi1 - pi0
    rr_defined = pi0 > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rr = np.where(rr_defined, pi1 / np.where(rr_defined, pi0, 1.0), np.nan)
    lo_defined = (pi1 > 0.0) & (pi1 < 1.0) & (pi0 > 0.0) & (pi0 < 1.0)
    safe1 = np.where(lo_defined, pi1, 0.5)
    safe0 = np.where(lo_defined, pi0, 0.5)
    log_odds = np.where(
        lo_defined,
        np.log(safe1 / (1.0 - safe1)) - np.log(safe0 / (1.0 - safe0)),
        np.nan,
    )
    for a in (ate, rr, log_odds, rr_defined, lo_defined):
        a.setflags(write=False)
    return EffectEstimates(
        ate=ate,
        rr=rr,
        log_odds=log_odds,
        rr_defined=rr_defined,
        log_odds_defined=lo_defined,
        used_raw=bool(use_raw),
        testable_warning=not ok,
    )


def effects_bounds(b: IntervalBounds) -> EffectEstimates:
    """Conservative risk-difference intervals from probability bounds.

    ``[lower1 - upper0, upper1 - lower0]`` per category, clipped to
    ``[-1, 1]``; the treated and untreated perturbations share the same
    selection gaps, so jointly sharp intervals could be tighter — the output
    is labelled accordingly.
    """
    ate_lower = np.clip(b.lower[1] - b.upper[0], -1.0, 1.0)
    ate_upper = np.clip(b.upper[1] - b.lower[0], -1.0, 1.0)
    ate_lower.setflags(write=False)
    ate_upper.setflags(write=False)
    return EffectEstimates(
        ate_lower=ate_lower, ate_upper=ate_upper, ate_note=ATE_BOUNDS_NOTE
    )
