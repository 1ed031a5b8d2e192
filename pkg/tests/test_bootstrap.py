"""Bootstrap: determinism, percentile intervals, skip accounting, strata."""

import numpy as np
import pytest

from cativ import (
    BootstrapConfig,
    DataError,
    Dataset,
    Estimand,
    Record,
    WeakInstrumentError,
    bootstrap,
    sample,
)
from cativ.bootstrap import _replicate_rng, _resample_indices


def deterministic_outcome_dataset() -> Dataset:
    """Outcome is a function of treatment within every instrument arm, so the
    identified distributions are invariant across resamples."""
    recs = []
    recs += [Record(y=0, d=1, z=0)] * 2 + [Record(y=1, d=0, z=0)] * 6
    recs += [Record(y=0, d=1, z=1)] * 6 + [Record(y=1, d=0, z=1)] * 2
    return Dataset.from_records(recs, ["good", "bad"])


def stratified_dataset() -> Dataset:
    recs = []
    rng = np.random.default_rng(0)
    for s, size in ((0, 12), (1, 20)):
        for i in range(size):
            recs.append(
                Record(
                    y=int(rng.integers(0, 2)),
                    d=int(rng.integers(0, 2)),
                    z=i % 2,
                    stratum=s,
                )
            )
    return Dataset.from_records(recs, ["a", "b"])


class TestDeterminism:
    def test_same_seed_identical_results(self, dgp_b):
        ds = sample(dgp_b, 400, 0.5, seed=3)
        cfg = BootstrapConfig(seed=17, replicates=99)
        r1 = bootstrap(ds, Estimand.point(), cfg)
        r2 = bootstrap(ds, Estimand.point(), cfg)
        assert r1 == r2

    def test_replicate_streams_depend_only_on_seed_and_index(self):
        a = _replicate_rng(5, 3).random(4)
        b = _replicate_rng(5, 3).random(4)
        c = _replicate_rng(5, 4).random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_different_seeds_differ(self, dgp_b):
        ds = sample(dgp_b, 400, 0.5, seed=3)
        r1 = bootstrap(ds, Estimand.point(), BootstrapConfig(seed=1, replicates=49))
        r2 = bootstrap(ds, Estimand.point(), BootstrapConfig(seed=2, replicates=49))
        assert r1.ci_lower != r2.ci_lower


class TestIntervals:
    def test_zero_variance_collapses_to_point(self):
        ds = deterministic_outcome_dataset()
        res = bootstrap(ds, Estimand.point(), BootstrapConfig(seed=5, replicates=199))
        for name in ("pi1[good]", "pi0[good]"):
            assert abs(res.ci_upper[name] - res.ci_lower[name]) <= 1e-12
            assert abs(res.ci_lower[name] - res.point[name]) <= 1e-12
        assert res.point["pi1[good]"] == pytest.approx(1.0, abs=1e-12)
        assert res.point["pi0[good]"] == pytest.approx(0.0, abs=1e-12)

    def test_ci_levels_nest(self, dgp_b):
        ds = sample(dgp_b, 500, 0.5, seed=21)
        res90 = bootstrap(
            ds, Estimand.effects(), BootstrapConfig(seed=4, replicates=199, ci_level=0.90)
        )
        res99 = bootstrap(
            ds, Estimand.effects(), BootstrapConfig(seed=4, replicates=199, ci_level=0.99)
        )
        for name in res90.point:
            assert res99.ci_lower[name] <= res90.ci_lower[name] + 1e-12
            assert res99.ci_upper[name] >= res90.ci_upper[name] - 1e-12

    def test_lower_below_upper(self, dgp_b):
        ds = sample(dgp_b, 300, 0.5, seed=2)
        res = bootstrap(
            ds,
            Estimand.bounds("bounded", kappa=0.05),
            BootstrapConfig(seed=9, replicates=99),
        )
        for name in res.point:
            assert res.ci_lower[name] <= res.ci_upper[name] + 1e-15

    def test_bounds_estimand_components(self, dgp_b):
        ds = sample(dgp_b, 300, 0.5, seed=2)
        res = bootstrap(
            ds,
            Estimand.bounds("monotonic"),
            BootstrapConfig(seed=9, replicates=49),
        )
        assert "pi1_lower[cat0]" in res.point
        assert "pi0_upper[cat2]" in res.point
        assert len(res.point) == 4 * ds.q


class TestSkipAccounting:
    def test_no_z_variation_skips(self):
        # a single z=0 record: resamples that miss it lose instrument variation
        recs = [Record(y=0, d=0, z=0)]
        recs += [Record(y=i % 2, d=i % 2, z=1) for i in range(11)]
        ds = Dataset.from_records(recs, ["a", "b"])
        res = bootstrap(
            ds, Estimand.point(tol=0.0), BootstrapConfig(seed=13, replicates=200)
        )
        assert res.replicates_used + res.replicates_skipped == 200
        assert res.skip_reasons.get("no_z_variation", 0) > 0

    def test_weak_instrument_skips(self, dgp_b):
        ds = sample(dgp_b, 60, 0.5, seed=8)
        res = bootstrap(
            ds, Estimand.point(tol=0.35), BootstrapConfig(seed=6, replicates=300)
        )
        assert res.skip_reasons.get("weak_instrument", 0) > 0
        assert res.replicates_used + res.replicates_skipped == 300

    def test_fail_mode_raises(self, dgp_b):
        ds = sample(dgp_b, 60, 0.5, seed=8)
        with pytest.raises(WeakInstrumentError):
            bootstrap(
                ds,
                Estimand.point(tol=0.35),
                BootstrapConfig(seed=6, replicates=300, on_degenerate="fail"),
            )

    def test_all_degenerate_raises(self):
        recs = [
            Record(y=0, d=0, z=0),
            Record(y=1, d=1, z=1),
        ]
        ds = Dataset.from_records(recs, ["a", "b"])
        # find a replicate seed whose single resample misses one arm
        seed = next(
            s
            for s in range(50)
            if len(set(_replicate_rng(s, 0).integers(0, 2, 2).tolist())) == 1
        )
        with pytest.raises(DataError, match="degenerate"):
            bootstrap(ds, Estimand.point(tol=0.0), BootstrapConfig(seed=seed, replicates=1))


class TestStrata:
    def test_resample_preserves_stratum_sizes(self):
        ds = stratified_dataset()
        groups = [np.flatnonzero(ds.stratum == s) for s in ds.stratum_labels()]
        for r in range(5):
            idx = _resample_indices(groups, _replicate_rng(3, r))
            counts = np.bincount(ds.stratum[idx], minlength=2)
            assert counts.tolist() == [12, 20]

    def test_stratum_estimand(self):
        ds = stratified_dataset()
        res = bootstrap(
            ds,
            Estimand.point(stratum=1, tol=0.0),
            BootstrapConfig(seed=2, replicates=99),
        )
        assert res.replicates_used + res.replicates_skipped == 99
        assert res.replicates_used > 0


class TestConfig:
    def test_validation(self):
        with pytest.raises(DataError):
            BootstrapConfig(seed=1, replicates=0)
        with pytest.raises(DataError):
            BootstrapConfig(seed=1, ci_level=1.0)
        with pytest.raises(DataError):
            BootstrapConfig(seed=1, on_degenerate="explode")
        with pytest.raises(DataError):
            BootstrapConfig(seed=-1)
        with pytest.raises(DataError):
            BootstrapConfig(seed=2**64)

    def test_estimand_validation(self):
        with pytest.raises(DataError):
            Estimand(kind="magic")
        with pytest.raises(DataError):
            Estimand.bounds("bounded")
        with pytest.raises(DataError):
            Estimand.bounds("sideways")

    def test_metadata_echo(self, dgp_b):
        ds = sample(dgp_b, 200, 0.5, seed=1)
        res = bootstrap(
            ds,
            Estimand.bounds("bounded", kappa=0.05),
            BootstrapConfig(seed=3, replicates=49),
        )
        assert res.method == "percentile"
        assert res.estimand == "bounds(bounded,kappa=0.05)"
        assert res.seed == 3 and res.replicates == 49
