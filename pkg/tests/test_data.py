"""Dataset model, CSV ingestion/serialisation and support diagnostics."""

import io

import numpy as np
import pytest

from cativ import (
    DataError,
    Dataset,
    EstimandConfig,
    Record,
    load_dataset,
    save_dataset,
    validate_support,
)

CSV_BASIC = "y,d,z\ngood,1,1\nbad,0,0\ngood,0,1\nbad,1,0\n"


def _load(text: str, **kw) -> Dataset:
    return load_dataset(io.BytesIO(text.encode()), **kw)


class TestLoad:
    def test_basic_parse(self):
        ds = _load(CSV_BASIC)
        assert ds.q == 2
        assert ds.n == 4
        assert ds.categories == ("good", "bad")
        assert list(ds.y) == [0, 1, 0, 1]
        assert list(ds.d) == [1, 0, 0, 1]
        assert (ds.weight == 1.0).all()
        assert ds.stratum is None

    def test_no_instrument_variation(self):
        with pytest.raises(DataError, match="instrument has no variation"):
            _load("y,d,z\ngood,1,1\nbad,0,1\n")

    def test_unknown_category_with_map(self):
        with pytest.raises(DataError, match="excellent"):
            _load(
                "y,d,z\ngood,1,1\nexcellent,0,0\n",
                category_map=["good", "fair", "poor"],
            )

    def test_explicit_map_sets_order(self):
        ds = _load(CSV_BASIC, category_map=["bad", "good"])
        assert ds.categories == ("bad", "good")
        assert list(ds.y) == [1, 0, 1, 0]

    def test_map_may_declare_unseen_categories(self):
        ds = _load(CSV_BASIC, category_map=["good", "fair", "bad"])
        assert ds.q == 3

    def test_baseline_moved_last(self):
        ds = _load(CSV_BASIC, baseline="good")
        assert ds.categories == ("bad", "good")

    def test_baseline_missing(self):
        with pytest.raises(DataError, match="not present"):
            _load(CSV_BASIC, baseline="fair")

    def test_baseline_conflicts_with_map(self):
        with pytest.raises(DataError, match="conflicts"):
            _load(CSV_BASIC, category_map=["good", "bad"], baseline="good")

    def test_ordering_deterministic(self):
        a = _load(CSV_BASIC)
        b = _load(CSV_BASIC)
        assert a.categories == b.categories
        assert np.array_equal(a.y, b.y)

    def test_weights_and_strata(self):
        ds = _load("y,d,z,stratum,weight\na,1,1,0,2.5\nb,0,0,1,0.5\n")
        assert ds.weight.tolist() == [2.5, 0.5]
        assert ds.stratum.tolist() == [0, 1]

    @pytest.mark.parametrize(
        "text,match",
        [
            ("y,d,z\ngood,2,1\nbad,0,0\n", "row 2"),
            ("y,d,z\ngood,1.0,1\nbad,0,0\n", "literal 0 or 1"),
            ("y,d,z\ngood,1\nbad,0,0\n", "expected 3 fields"),
            ("y,d,z,weight\ngood,1,1,0\nbad,0,0,1\n", "weight must be > 0"),
            ("y,d,z,weight\ngood,1,1,-2\nbad,0,0,1\n", "weight must be > 0"),
            ("y,d,z,weight\ngood,1,1,abc\nbad,0,0,1\n", "decimal"),
            ("y,d,z,stratum\ngood,1,1,-1\nbad,0,0,0\n", "stratum"),
            ("y,d,z\n", "no data rows"),
            ("", "missing header"),
            ("outcome,d,z\ngood,1,1\n", "unsupported header"),
            ("y,d,z\n,1,1\nbad,0,0\n", "empty outcome label"),
        ],
    )
    def test_malformed_inputs(self, text, match):
        with pytest.raises(DataError, match=match):
            _load(text)

    def test_accepts_path(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(CSV_BASIC)
        assert load_dataset(path).n == 4


class TestRoundTrip:
    def test_identity_with_map(self):
        ds = _load(
            "y,d,z,stratum,weight\nc,1,1,0,1.25\na,0,0,1,3.5\nb,1,0,0,1.0\na,0,1,2,2.0\n",
            category_map=["a", "b", "c"],
        )
        buf = io.StringIO()
        save_dataset(ds, buf)
        back = load_dataset(
            io.BytesIO(buf.getvalue().encode()), category_map=ds.categories
        )
        assert back.categories == ds.categories
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.d, ds.d)
        assert np.array_equal(back.z, ds.z)
        assert np.array_equal(back.weight, ds.weight)
        assert np.array_equal(back.stratum, ds.stratum)

    def test_records_preserved_without_map(self):
        ds = _load(CSV_BASIC, baseline="good")
        buf = io.StringIO()
        save_dataset(ds, buf)
        back = load_dataset(io.BytesIO(buf.getvalue().encode()))
        assert set(back.categories) == set(ds.categories)
        labels = [ds.categories[i] for i in ds.y]
        labels_back = [back.categories[i] for i in back.y]
        assert labels == labels_back

    def test_weight_column_omitted_when_unweighted(self):
        ds = _load(CSV_BASIC)
        buf = io.StringIO()
        save_dataset(ds, buf)
        assert buf.getvalue().splitlines()[0] == "y,d,z"


class TestDatasetValidation:
    def test_from_records(self):
        ds = Dataset.from_records(
            [Record(y=0, d=1, z=1), Record(y=1, d=0, z=0, weight=2.0)],
            categories=["a", "b"],
        )
        assert ds.n == 2
        assert list(ds.records())[1].weight == 2.0

    def test_needs_two_categories(self):
        with pytest.raises(DataError, match="at least 2"):
            Dataset.from_records([Record(0, 1, 1), Record(0, 0, 0)], ["only"])

    def test_unique_labels(self):
        with pytest.raises(DataError, match="unique"):
            Dataset.from_records([Record(0, 1, 1), Record(0, 0, 0)], ["a", "a"])

    def test_y_out_of_range(self):
        with pytest.raises(DataError, match="out of range"):
            Dataset.from_records([Record(5, 1, 1), Record(0, 0, 0)], ["a", "b"])

    def test_mixed_strata_rejected(self):
        with pytest.raises(DataError, match="stratum"):
            Dataset.from_records(
                [Record(0, 1, 1, stratum=1), Record(1, 0, 0)], ["a", "b"]
            )

    def test_nonpositive_weight(self):
        with pytest.raises(DataError, match="positive"):
            Dataset.from_records(
                [Record(0, 1, 1, weight=0.0), Record(1, 0, 0)], ["a", "b"]
            )

    def test_empty(self):
        with pytest.raises(DataError, match="empty"):
            Dataset.from_records([], ["a", "b"])


class TestSupport:
    def test_full_support_empty_diagnostics(self):
        rows = ["y,d,z"]
        for y in ("a", "b"):
            for d in (0, 1):
                for z in (0, 1):
                    rows.append(f"{y},{d},{z}")
        assert validate_support(_load("\n".join(rows) + "\n")) == []

    def test_missing_treated_under_z0(self):
        rows = ["y,d,z"]
        for y in ("a", "b"):
            for d, z in ((0, 0), (0, 1), (1, 1)):
                rows.append(f"{y},{d},{z}")
        diags = validate_support(_load("\n".join(rows) + "\n"))
        assert "cell D=1,Z=0 empty" in [d.message for d in diags]

    def test_stratum_scoped_z_variation(self):
        text = (
            "y,d,z,stratum\n"
            "a,1,1,1\na,0,0,1\nb,1,0,1\nb,0,1,1\n"
            "a,1,1,2\nb,0,1,2\n"
        )
        diags = validate_support(_load(text))
        scoped = [d for d in diags if d.stratum == 2]
        assert any(d.code == "no_z_variation" for d in scoped)


class TestEstimandConfig:
    def test_defaults(self):
        cfg = EstimandConfig()
        assert cfg.assumption == "similarity"
        assert cfg.weak_iv_tolerance == 0.01
        assert cfg.truncate

    def test_bounded_requires_kappa(self):
        with pytest.raises(DataError, match="kappa"):
            EstimandConfig(assumption="bounded")

    @pytest.mark.parametrize("kappa", [-0.01, 0.5, 0.7])
    def test_kappa_range(self, kappa):
        with pytest.raises(DataError, match="kappa"):
            EstimandConfig(assumption="bounded", kappa=kappa)

    def test_unknown_assumption(self):
        with pytest.raises(DataError, match="assumption"):
            EstimandConfig(assumption="magic")
