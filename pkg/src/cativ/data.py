"""Microdata model: records, datasets, CSV ingestion and support diagnostics.

A record is an observed triple (outcome category, binary treatment, binary
instrument) plus an optional stratum label and an optional positive sampling
weight.  Categories are string labels in files and dense integer indices
internally; the baseline category always sits at the last internal index so
that the normalisation step downstream is simply "index q - 1".
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Record",
    "Dataset",
    "EstimandConfig",
    "SupportDiagnostic",
    "load_dataset",
    "save_dataset",
    "validate_support",
]

_ASSUMPTIONS = ("similarity", "monotonic", "bounded", "none")


@dataclass(frozen=True)
class Record:
    """One observation: outcome index ``y`` in ``0..q-1``, treatment ``d`` and
    instrument ``z`` in ``{0, 1}``, optional nonnegative ``stratum`` label and
    positive ``weight`` (default 1)."""

    y: int
    d: int
    z: int
    stratum: int | None = None
    weight: float = 1.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable column-oriented collection of records.

    Attributes
    ----------
    y, d, z : ndarray
        Outcome index, treatment and instrument per record.
    weight : ndarray
        Positive sampling weight per record (all ones when unweighted).
    stratum : ndarray or None
        Per-record stratum labels; ``None`` when the data are unstratified.
        Strata are all-or-nothing: mixed presence is rejected.
    categories : tuple of str
        Ordered category labels; the last one is the baseline category.
    """

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    weight: np.ndarray
    stratum: np.ndarray | None
    categories: tuple[str, ...]

    def __post_init__(self):
        y = _frozen(np.asarray(self.y, dtype=np.int64))
        d = _frozen(np.asarray(self.d, dtype=np.int8))
        z = _frozen(np.asarray(self.z, dtype=np.int8))
        w = _frozen(np.asarray(self.weight, dtype=np.float64))
        s = self.stratum
        if s is not None:
            s = _frozen(np.asarray(s, dtype=np.int64))
        for name, val in (("y", y), ("d", d), ("z", z), ("weight", w)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "stratum", s)
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))

        q = len(self.categories)
        if q < 2:
            raise DataError(f"need at least 2 categories, got {q}")
        if len(set(self.categories)) != q:
            raise DataError("category labels must be unique")
        n = y.shape[0]
        if not (d.shape[0] == z.shape[0] == w.shape[0] == n):
            raise DataError("column lengths differ")
        if s is not None and s.shape[0] != n:
            raise DataError("column lengths differ")
        if n == 0:
            raise DataError("empty dataset")
        if y.min() < 0 or y.max() >= q:
            raise DataError("outcome index out of range")
        for name, col in (("d", d), ("z", z)):
            if not np.isin(col, (0, 1)).all():
                raise DataError(f"{name} must be 0 or 1")
        if not np.all(np.isfinite(w)) or (w <= 0).any():
            raise DataError("weights must be positive and finite")
        if s is not None and (s < 0).any():
            raise DataError("stratum labels must be nonnegative")

    @property
    def q(self) -> int:
        return len(self.categories)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @classmethod
    def from_records(
        cls, records: Iterable[Record], categories: Sequence[str]
    ) -> "Dataset":
        recs = list(records)
        strata = [r.stratum for r in recs]
        has_stratum = any(s is not None for s in strata)
        if has_stratum and any(s is None for s in strata):
            raise DataError("stratum must be present on all records or none")
        return cls(
            y=np.array([r.y for r in recs], dtype=np.int64),
            d=np.array([r.d for r in recs], dtype=np.int8),
            z=np.array([r.z for r in recs], dtype=np.int8),
            weight=np.array([r.weight for r in recs], dtype=np.float64),
            stratum=np.array(strata, dtype=np.int64) if has_stratum else None,
            categories=tuple(categories),
        )

    def records(self) -> Iterator[Record]:
        for i in range(self.n):
            yield Record(
                y=int(self.y[i]),
                d=int(self.d[i]),
                z=int(self.z[i]),
                stratum=None if self.stratum is None else int(self.stratum[i]),
                weight=float(self.weight[i]),
            )

    def stratum_labels(self) -> tuple[int, ...]:
        if self.stratum is None:
            return ()
        return tuple(int(s) for s in np.unique(self.stratum))


@dataclass(frozen=True)
class EstimandConfig:
    """Bundle of estimation choices shared by the CLI and the library.

    ``kappa`` is required exactly when ``assumption == "bounded"`` and must
    lie in ``[0, 0.5)``.  ``baseline_category`` is an internal category index
    (default: the last one).  ``weak_iv_tolerance`` guards the denominator
    ``p1 - p0``.  ``truncate`` selects whether effect functionals are computed
    on truncated-and-renormalised probabilities (default) or raw ones.
    """

    assumption: str = "similarity"
    kappa: float | None = None
    baseline_category: int | None = None
    weak_iv_tolerance: float = 0.01
    truncate: bool = True

    def __post_init__(self):
        if self.assumption not in _ASSUMPTIONS:
            raise DataError(
                f"assumption must be one of {_ASSUMPTIONS}, got {self.assumption!r}"
            )
        if self.assumption == "bounded":
            if self.kappa is None:
                raise DataError("assumption 'bounded' requires kappa")
            if not (0.0 <= self.kappa < 0.5):
                raise DataError(f"kappa must be in [0, 0.5), got {self.kappa}")
        if self.weak_iv_tolerance <= 0:
            raise DataError("weak_iv_tolerance must be positive")


@dataclass(frozen=True)
class SupportDiagnostic:
    """One support problem found in a dataset; ``stratum`` is None for
    dataset-wide diagnostics."""

    code: str
    message: str
    stratum: int | None = None

    def __str__(self) -> str:  # pragma: no cover - convenience only
        if self.stratum is None:
            return self.message
        return f"stratum {self.stratum}: {self.message}"


# ---------------------------------------------------------------------------
# CSV schema: header `y,d,z[,stratum][,weight]`; y is a label string; d and z
# are literal 0/1; stratum is a nonnegative integer; weight a positive
# decimal.  UTF-8, comma separated, labels may not contain commas.
# ---------------------------------------------------------------------------

_HEADERS = (
    ("y", "d", "z"),
    ("y", "d", "z", "stratum"),
    ("y", "d", "z", "weight"),
    ("y", "d", "z", "stratum", "weight"),
)


def _open_source(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True
    if hasattr(source, "read"):
        probe = source.read(0)
        if isinstance(probe, bytes):
            return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
        return source, False
    raise DataError(f"unsupported source type: {type(source)!r}")


def _parse_binary(text: str, name: str, line: int) -> int:
    if text == "0":
        return 0
    if text == "1":
        return 1
    raise DataError(f"row {line}: {name} must be literal 0 or 1, got {text!r}")


def load_dataset(
    source,
    category_map: Sequence[str] | None = None,
    baseline: str | None = None,
) -> Dataset:
    """Parse and validate a CSV stream into a :class:`Dataset`.

    Parameters
    ----------
    source : path, bytes, or file object
        CSV content in the schema documented above.
    category_map : sequence of str, optional
        Explicit category ordering.  When given, every outcome label in the
        file must appear in it, and the map's last entry is the baseline.
    baseline : str, optional
        Baseline category label.  Without ``category_map`` the ordering is
        first-appearance with this label moved last; with ``category_map`` it
        must already be the map's last entry.

    Raises
    ------
    DataError
        On malformed rows (with the offending line number), unknown labels,
        out-of-range fields, nonpositive weights, or an instrument with no
        variation.
    """
    if category_map is not None:
        category_map = [str(c) for c in category_map]
        if len(set(category_map)) != len(category_map):
            raise DataError("category_map labels must be unique")
        if baseline is not None and category_map[-1] != baseline:
            raise DataError(
                f"baseline {baseline!r} conflicts with category_map "
                f"(its last entry is {category_map[-1]!r})"
            )

    handle, close = _open_source(source)
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty input: missing header row") from None
        header = tuple(h.strip() for h in header)
        if header not in _HEADERS:
            raise DataError(
                f"unsupported header {','.join(header)!r}; expected "
                "y,d,z[,stratum][,weight]"
            )
        has_stratum = "stratum" in header
        has_weight = "weight" in header
        ncol = len(header)

        ys: list[str] = []
        ds: list[int] = []
        zs: list[int] = []
        strata: list[int] = []
        weights: list[float] = []
        for row in reader:
            line = reader.line_num
            if len(row) == 0:
                continue
            if len(row) != ncol:
                raise DataError(
                    f"row {line}: expected {ncol} fields, got {len(row)}"
                )
            label = row[0]
            if label == "":
                raise DataError(f"row {line}: empty outcome label")
            ys.append(label)
            ds.append(_parse_binary(row[1], "d", line))
            zs.append(_parse_binary(row[2], "z", line))
            pos = 3
            if has_stratum:
                try:
                    s = int(row[pos])
                except ValueError:
                    raise DataError(
                        f"row {line}: stratum must be an integer, got {row[pos]!r}"
                    ) from None
                if s < 0:
                    raise DataError(f"row {line}: stratum must be >= 0, got {s}")
                strata.append(s)
                pos += 1
            if has_weight:
                try:
                    w = float(row[pos])
                except ValueError:
                    raise DataError(
                        f"row {line}: weight must be a decimal, got {row[pos]!r}"
                    ) from None
                if not (w > 0) or not np.isfinite(w):
                    raise DataError(f"row {line}: weight must be > 0, got {row[pos]}")
                weights.append(w)
    finally:
        if close:
            handle.close()

    if not ys:
        raise DataError("empty dataset: no data rows")

    if category_map is not None:
        categories = list(category_map)
        index = {c: i for i, c in enumerate(categories)}
        for i, label in enumerate(ys):
            if label not in index:
                raise DataError(f"unknown category {label!r} (not in category_map)")
    else:
        categories = list(dict.fromkeys(ys))  # first-appearance order
        if baseline is not None:
            if baseline not in categories:
                raise DataError(f"baseline category {baseline!r} not present in data")
            categories.remove(baseline)
            categories.append(baseline)
        index = {c: i for i, c in enumerate(categories)}

    z_arr = np.array(zs, dtype=np.int8)
    if not ((z_arr == 0).any() and (z_arr == 1).any()):
        raise DataError("instrument has no variation")

    return Dataset(
        y=np.array([index[label] for label in ys], dtype=np.int64),
        d=np.array(ds, dtype=np.int8),
        z=z_arr,
        weight=np.array(weights, dtype=np.float64)
        if has_weight
        else np.ones(len(ys), dtype=np.float64),
        stratum=np.array(strata, dtype=np.int64) if has_stratum else None,
        categories=tuple(categories),
    )


def save_dataset(ds: Dataset, dest) -> None:
    """Write a dataset back to CSV in the schema understood by
    :func:`load_dataset`.

    The stratum column is written only when the dataset is stratified and the
    weight column only when some weight differs from 1.  Reloading with
    ``category_map=ds.categories`` reproduces the dataset exactly; without a
    map the records round-trip but the internal category order follows first
    appearance.
    """
    if isinstance(dest, (str, Path)):
        handle = open(dest, "w", encoding="utf-8", newline="")
        close = True
    else:
        handle = dest
        close = False
    try:
        has_stratum = ds.stratum is not None
        has_weight = bool((ds.weight != 1.0).any())
        header = ["y", "d", "z"]
        if has_stratum:
            header.append("stratum")
        if has_weight:
            header.append("weight")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for i in range(ds.n):
            row = [ds.categories[ds.y[i]], int(ds.d[i]), int(ds.z[i])]
            if has_stratum:
                row.append(int(ds.stratum[i]))
            if has_weight:
                row.append(repr(float(ds.weight[i])))
            writer.writerow(row)
    finally:
        if close:
            handle.close()


def _cell_counts(y, d, z, q: int) -> np.ndarray:
    codes = (y * 2 + d) * 2 + z
    return np.bincount(codes, minlength=4 * q).reshape(q, 2, 2)


def validate_support(ds: Dataset) -> list[SupportDiagnostic]:
    """Report empty support cells; an empty list means full support.

    Checks the ``4 q`` outcome cells ``(y, d, z)`` and the four treatment
    margins ``(d, z)`` on the whole dataset, and per-stratum instrument
    variation plus treatment margins when the data are stratified.  Purely
    diagnostic: nothing is mutated and nothing raises.
    """
    out: list[SupportDiagnostic] = []
    counts = _cell_counts(ds.y, ds.d, ds.z, ds.q)
    margins = counts.sum(axis=0)
    for d in (0, 1):
        for z in (0, 1):
            if margins[d, z] == 0:
                out.append(
                    SupportDiagnostic("empty_margin", f"cell D={d},Z={z} empty")
                )
    for k in range(ds.q):
        for d in (0, 1):
            for z in (0, 1):
                if counts[k, d, z] == 0:
                    out.append(
                        SupportDiagnostic(
                            "empty_cell",
                            f"cell Y={ds.categories[k]},D={d},Z={z} empty",
                        )
                    )
    if ds.stratum is not None:
        for s in ds.stratum_labels():
            mask = ds.stratum == s
            zs = ds.z[mask]
            if not ((zs == 0).any() and (zs == 1).any()):
                out.append(
                    SupportDiagnostic(
                        "no_z_variation", "instrument has no variation", stratum=s
                    )
                )
            sub = _cell_counts(ds.y[mask], ds.d[mask], zs, ds.q).sum(axis=0)
            for d in (0, 1):
                for z in (0, 1):
                    if sub[d, z] == 0:
                        out.append(
                            SupportDiagnostic(
                                "empty_margin", f"cell D={d},Z={z} empty", stratum=s
                            )
                        )
    return out
