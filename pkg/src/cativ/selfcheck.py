"""End-to-end oracle suites: estimators and bounds checked against random
populations with known truth.

Each suite draws specs from :func:`cativ.dgp.spec_grid`, computes exact
population moments, runs the estimation path under test and compares against
the population's true parameters.  Used by the ``selfcheck`` CLI subcommand
and mirrored by the test suite.
"""

from __future__ import annotations

import numpy as np

from .bounds import bounds_bounded, bounds_monotonic, bounds_none
from .dgp import diagnostics, exact_moments, spec_grid
from .identify import identify_point, plug_back_residual
from .moments import orient_instrument

__all__ = ["run_selfcheck"]

_RECOVERY_TOL = 1e-10
_COVER_SLACK = 1e-10
_COLLAPSE_TOL = 1e-12


def _truth_inside(diag, b, slack=_COVER_SLACK) -> bool:
    truth = np.stack([diag.pi0, diag.pi1])
    return bool(
        np.all(truth >= b.lower - slack) and np.all(truth <= b.upper + slack)
    )


def _check_point_recovery(spec) -> bool:
    m = exact_moments(spec)
    diag = diagnostics(spec)
    pd = identify_point(m)
    err = max(
        np.abs(pd.raw_pi1 - diag.pi1).max(),
        np.abs(pd.raw_pi0 - diag.pi0).max(),
        np.abs(pd.omega - diag.cov[1, :-1, :]).max(),
    )
    return (
        err <= _RECOVERY_TOL
        and plug_back_residual(pd, m) <= _RECOVERY_TOL
        and pd.testable_ok == (True, True)
    )


def _check_monotonic_coverage(spec) -> bool:
    diag = diagnostics(spec)
    b = bounds_monotonic(orient_instrument(exact_moments(spec)))
    return _truth_inside(diag, b)


def _check_point_inside_monotonic(spec) -> bool:
    m = orient_instrument(exact_moments(spec))
    pd = identify_point(m)
    b = bounds_monotonic(m)
    point = np.stack([pd.raw_pi0, pd.raw_pi1])
    return bool(
        np.all(point >= b.raw_lower - _COVER_SLACK)
        and np.all(point <= b.raw_upper + _COVER_SLACK)
    )


def _check_bounded(spec, kappa: float) -> bool:
    m = exact_moments(spec)
    diag = diagnostics(spec)
    b = bounds_bounded(m, kappa)
    if not _truth_inside(diag, b):
        return False
    # kappa = 0 collapses to the point solution
    pd = identify_point(m)
    b0 = bounds_bounded(m, 0.0)
    collapse = max(
        np.abs(b0.raw_lower[1] - pd.raw_pi1).max(),
        np.abs(b0.raw_upper[1] - pd.raw_pi1).max(),
        np.abs(b0.raw_lower[0] - pd.raw_pi0).max(),
        np.abs(b0.raw_upper[0] - pd.raw_pi0).max(),
    )
    if collapse > _COLLAPSE_TOL:
        return False
    # nesting in kappa (raw, pre-truncation)
    b_half = bounds_bounded(m, kappa / 2.0)
    return bool(
        np.all(b_half.raw_lower >= b.raw_lower - _COLLAPSE_TOL)
        and np.all(b_half.raw_upper <= b.raw_upper + _COLLAPSE_TOL)
    )


def _check_manski(spec) -> bool:
    return _truth_inside(diagnostics(spec), bounds_none(exact_moments(spec)))


def run_selfcheck(
    count: int = 50, seed: int = 1, kappa: float = 0.05
) -> dict:
    """Run every oracle property suite; returns a JSON-ready report."""
    similarity = spec_grid("similarity", count, seed)
    monotonic = spec_grid("monotonic", count, seed + 1)
    bounded = spec_grid("bounded", count, seed + 2, kappa=kappa)

    suites = [
        ("point_recovery", similarity, _check_point_recovery),
        ("monotonic_coverage", monotonic, _check_monotonic_coverage),
        ("point_inside_monotonic", similarity, _check_point_inside_monotonic),
        ("bounded_coverage", bounded, lambda s: _check_bounded(s, kappa)),
        ("manski_coverage", similarity + monotonic + bounded, _check_manski),
    ]
    checks = []
    for name, specs, fn in suites:
        failed = sum(0 if fn(s) else 1 for s in specs)
        checks.append(
            {"name": name, "total": len(specs), "passed": len(specs) - failed,
             "failed": failed}
        )
    return {
        "count": count,
        "seed": seed,
        "kappa": kappa,
        "checks": checks,
        "ok": all(c["failed"] == 0 for c in checks),
    }
