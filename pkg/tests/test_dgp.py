"""The simulation oracle: exact moments, diagnostics, sampling, spec grids."""

import json

import numpy as np
import pytest

from cativ import (
    DataError,
    DgpSpec,
    diagnostics,
    estimate_moments,
    exact_moments,
    sample,
    sharpness_spec,
    spec_grid,
)


class TestExactMoments:
    def test_dgp_a_values(self, dgp_a):
        m = exact_moments(dgp_a)
        np.testing.assert_allclose(m.p, [0.2, 0.6], atol=1e-15)
        np.testing.assert_allclose(m.mu[:, 0], [0.26, 0.46, 0.28], atol=1e-15)
        np.testing.assert_allclose(m.mu[:, 1], [0.38, 0.38, 0.24], atol=1e-15)
        d = diagnostics(dgp_a)
        assert np.abs(d.cov).max() <= 1e-15  # single type: no heterogeneity
        m.check()

    def test_dgp_b_values(self, dgp_b):
        m = exact_moments(dgp_b)
        d = diagnostics(dgp_b)
        np.testing.assert_allclose(m.p, [0.2, 0.6], atol=1e-15)
        assert m.joint[0, 1, 0] == pytest.approx(0.12, abs=1e-15)
        assert m.joint[0, 1, 1] == pytest.approx(0.32, abs=1e-15)
        # E[1{Y0=c1} D0] = 0.5*0.3*0.4 + 0.5*0.1*0 = 0.06; 0.06 - 0.2*0.2 = 0.02
        np.testing.assert_allclose(d.cov[:, 0, :], 0.02, atol=1e-15)
        np.testing.assert_allclose(d.pi1, [0.5, 0.3, 0.2], atol=1e-15)
        np.testing.assert_allclose(d.pi0, [0.2, 0.5, 0.3], atol=1e-15)

    def test_total_probability(self):
        for spec in spec_grid("bounded", 20, 71, kappa=0.2):
            m = exact_moments(spec)
            for z in (0, 1):
                assert abs(m.joint[:, :, z].sum() - 1.0) <= 1e-12

    def test_invalid_specs(self):
        with pytest.raises(DataError, match="sum to 1"):
            DgpSpec(
                q=2,
                w=np.array([0.5, 0.4]),
                pd=np.array([[0.1, 0.5], [0.2, 0.6]]),
                py=np.full((2, 2, 2), 0.5),
            )
        with pytest.raises(DataError, match="outcome distributions"):
            DgpSpec(
                q=2,
                w=np.array([1.0]),
                pd=np.array([[0.1, 0.5]]),
                py=np.array([[[0.5, 0.4], [0.5, 0.5]]]),
            )
        with pytest.raises(DataError, match="take-up"):
            DgpSpec(
                q=2,
                w=np.array([1.0]),
                pd=np.array([[-0.1, 0.5]]),
                py=np.full((1, 2, 2), 0.5),
            )


class TestDiagnostics:
    def test_dgp_b_classification(self, dgp_b):
        d = diagnostics(dgp_b)
        assert d.similarity and d.monotonic
        assert d.kappa_min <= 1e-12
        assert np.abs(d.delta).max() <= 1e-12

    def test_dgp_c_classification(self, dgp_c):
        d = diagnostics(dgp_c)
        assert not d.similarity
        assert d.monotonic
        assert d.kappa_min == pytest.approx(0.02, abs=1e-12)
        assert d.cov[1, 0, 0] > d.cov[0, 0, 0]  # treated side strictly larger

    def test_single_type_all_zero(self, dgp_a):
        d = diagnostics(dgp_a)
        assert d.similarity and d.monotonic and d.kappa_min <= 1e-15


class TestSample:
    def test_determinism(self, dgp_b):
        a = sample(dgp_b, 500, 0.5, seed=9)
        b = sample(dgp_b, 500, 0.5, seed=9)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.d, b.d)
        assert np.array_equal(a.z, b.z)

    def test_different_seeds_differ(self, dgp_b):
        a = sample(dgp_b, 500, 0.5, seed=9)
        b = sample(dgp_b, 500, 0.5, seed=10)
        assert not np.array_equal(a.y, b.y)

    def test_empty_request(self, dgp_b):
        with pytest.raises(DataError, match="empty dataset"):
            sample(dgp_b, 0, 0.5, seed=1)

    @pytest.mark.parametrize("pz", [0.0, 1.0, -0.2, 1.4])
    def test_z_probability_range(self, dgp_b, pz):
        with pytest.raises(DataError, match="z_probability"):
            sample(dgp_b, 10, pz, seed=1)

    def test_moment_convergence(self, dgp_b):
        ds = sample(dgp_b, 200_000, 0.5, seed=123)
        emp = estimate_moments(ds)
        pop = exact_moments(dgp_b)
        assert np.abs(emp.joint - pop.joint).max() <= 0.006  # ~3.5 sigma
        assert np.abs(emp.p - pop.p).max() <= 0.006

    def test_fields_valid(self, dgp_b):
        ds = sample(dgp_b, 1000, 0.3, seed=4)
        assert ds.q == 3
        assert set(np.unique(ds.d)) <= {0, 1}
        assert set(np.unique(ds.z)) <= {0, 1}
        assert ds.y.min() >= 0 and ds.y.max() < 3
        assert abs((ds.z == 1).mean() - 0.3) < 0.06


class TestSpecGrid:
    def test_similarity_profile(self):
        specs = spec_grid("similarity", 25, seed=5)
        assert len(specs) == 25
        for s in specs:
            assert diagnostics(s).kappa_min <= 1e-12

    def test_monotonic_profile(self):
        for s in spec_grid("monotonic", 25, seed=6):
            assert diagnostics(s).delta.min() >= -1e-12

    def test_bounded_profile(self):
        for s in spec_grid("bounded", 25, seed=7, kappa=0.05):
            d = diagnostics(s)
            assert d.kappa_min <= 0.05
            assert d.kappa_effective <= 0.05 + 1e-12

    def test_deterministic(self):
        a = spec_grid("similarity", 5, seed=8)
        b = spec_grid("similarity", 5, seed=8)
        for s, t in zip(a, b):
            assert np.array_equal(s.py, t.py) and np.array_equal(s.pd, t.pd)

    def test_q_choices(self):
        for s in spec_grid("similarity", 10, seed=9, q_choices=(4,)):
            assert s.q == 4

    def test_validation(self):
        with pytest.raises(DataError, match="profile"):
            spec_grid("magic", 5, seed=1)
        with pytest.raises(DataError, match="count"):
            spec_grid("similarity", 0, seed=1)
        with pytest.raises(DataError, match="kappa"):
            spec_grid("bounded", 5, seed=1)


class TestSerialization:
    def test_round_trip(self, dgp_b):
        blob = json.dumps(dgp_b.to_dict())
        back = DgpSpec.from_dict(json.loads(blob))
        assert np.array_equal(back.w, dgp_b.w)
        assert np.array_equal(back.pd, dgp_b.pd)
        assert np.array_equal(back.py, dgp_b.py)

    def test_malformed(self):
        with pytest.raises(DataError, match="malformed"):
            DgpSpec.from_dict({"q": 2})


class TestSharpnessSpec:
    def test_validation(self):
        with pytest.raises(DataError, match="kappa"):
            sharpness_spec(0.0, 1)
        with pytest.raises(DataError, match="sign"):
            sharpness_spec(0.05, 2)

    def test_effective_gap_matches_kappa(self):
        spec, _ = sharpness_spec(0.03, 1, seed=11)
        assert diagnostics(spec).kappa_effective == pytest.approx(0.03, abs=1e-12)
