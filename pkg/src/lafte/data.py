"""Observational data: ingestion, validation, and derived treatment columns.

The estimation input is a rectangular table with a binary instrument ``z``,
binary enrollment indicators ``d1`` and ``d2`` for the first and second part
of a two-part treatment, a real-valued outcome ``y``, optional real control
columns, and an optional cluster label. Everything downstream consumes
composite columns derived row-locally from these five ingredients:

==============  =============================
``d_and``       ``d1 * d2`` (both parts)
``d_or``        ``d1 + d2 - d1*d2`` (at least one part)
``d_sum``       ``d1 + d2`` (multivalued count)
``g_or``        ``d_or - d2``
``g_and``       ``d_and - d2``
``gy_or``       ``(d_or - d2) * y``
``gy_and``      ``(d_and - d2) * y``
``dand_y``      ``d_and * y``
``untreated_y`` ``(1 - d1) * (1 - d2) * y``
``kernel_y``    ``(1 - d1 - d2 + 2*d1*d2) * y``
==============  =============================

Tables are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .exceptions import ColumnMissingError, ConfigError, DataError

DEFAULT_MAPPING = {"z": "z", "d1": "d1", "d2": "d2", "y": "y"}

# Tokens treated as a missing value when reading delimited text.
_MISSING_TOKENS = {"", ".", "na", "nan"}

_DERIVED_NAMES = (
    "d_and", "d_or", "d_sum", "g_or", "g_and",
    "gy_or", "gy_and", "dand_y", "untreated_y", "kernel_y",
)


@dataclass(frozen=True)
class ValidationReport:
    """Fatal findings and non-fatal warnings collected while building a table."""

    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ObservationTable:
    """Validated rectangular dataset of (z, d1, d2, y, controls, cluster)."""

    z: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    y: np.ndarray
    controls: np.ndarray
    control_names: tuple[str, ...] = ()
    cluster: np.ndarray | None = None
    column_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def cluster_count(self) -> int | None:
        if self.cluster is None:
            return None
        return int(np.unique(self.cluster).size)

    def without_controls(self) -> "ObservationTable":
        """Copy of the table with the control columns removed."""
        return ObservationTable(
            z=self.z, d1=self.d1, d2=self.d2, y=self.y,
            controls=_freeze(np.empty((self.n, 0))), control_names=(),
            cluster=self.cluster, column_names=self.column_names,
            warnings=self.warnings,
        )

    def without_cluster(self) -> "ObservationTable":
        """Copy of the table with the cluster labels removed."""
        return ObservationTable(
            z=self.z, d1=self.d1, d2=self.d2, y=self.y,
            controls=self.controls, control_names=self.control_names,
            cluster=None, column_names=self.column_names,
            warnings=self.warnings,
        )


@dataclass(frozen=True)
class DerivedColumns:
    """All composite regressands, derived row-locally from a table."""

    d_and: np.ndarray
    d_or: np.ndarray
    d_sum: np.ndarray
    g_or: np.ndarray
    g_and: np.ndarray
    gy_or: np.ndarray
    gy_and: np.ndarray
    dand_y: np.ndarray
    untreated_y: np.ndarray
    kernel_y: np.ndarray

    def column(self, name: str) -> np.ndarray:
        if name not in _DERIVED_NAMES:
            raise KeyError(f"unknown derived column {name!r}")
        return getattr(self, name)


def _validate_arrays(z, d1, d2, y, controls, cluster) -> list[str]:
    errors: list[str] = []
    n = z.shape[0]
    for name, col in (("d1", d1), ("d2", d2), ("y", y)):
        if col.shape[0] != n:
            errors.append(f"column '{name}' has {col.shape[0]} rows, expected {n}")
    if controls.shape[0] != n:
        errors.append(f"controls have {controls.shape[0]} rows, expected {n}")
    if errors:
        return errors
    if n < 2:
        errors.append(f"table has {n} rows; at least 2 required")
    bad_z = ~np.isin(z, (0, 1))
    if bad_z.any():
        errors.append(f"non-binary instrument column 'z': value {z[bad_z][0]!r}")
    for name, col in (("d1", d1), ("d2", d2)):
        bad = ~np.isin(col, (0, 1))
        if bad.any():
            errors.append(f"non-binary treatment column '{name}': value {col[bad][0]!r}")
    if not bad_z.any() and n >= 1:
        for arm in (0, 1):
            if not np.any(z == arm):
                errors.append(f"empty instrument arm (z={arm})")
    if not np.isfinite(y).all():
        errors.append("outcome column 'y' contains non-finite values")
    if controls.size and not np.isfinite(controls).all():
        errors.append("control columns contain non-finite values")
    if cluster is not None:
        if cluster.shape[0] != n:
            errors.append(f"cluster column has {cluster.shape[0]} rows, expected {n}")
        elif any(lab is None or str(lab).strip() == "" for lab in cluster):
            errors.append("missing cluster label")
    return errors


def _collect_warnings(table: ObservationTable) -> list[str]:
    warnings: list[str] = []
    for arm in (0, 1):
        count = int(np.sum(table.z == arm))
        if count < 2:
            warnings.append(f"tiny instrument arm: only {count} row(s) with z={arm}")
    if table.cluster is not None and table.cluster_count == table.n:
        warnings.append("every cluster is a singleton; clustering is equivalent to HC1")
    derived = derive(table)
    for name in ("d_and", "d_or", "d_sum", "g_or", "g_and"):
        if np.ptp(derived.column(name)) == 0:
            warnings.append(f"derived column '{name}' is constant")
    return warnings


def from_arrays(z, d1, d2, y, *, controls=None, control_names=(), cluster=None,
                column_names=(), warnings=()) -> ObservationTable:
    """Build a validated table from in-memory arrays.

    Raises
    ------
    DataError
        If any table invariant fails; the message lists every finding.
    """
    z = np.asarray(z)
    d1 = np.asarray(d1)
    d2 = np.asarray(d2)
    y = np.asarray(y, dtype=float)
    if controls is None:
        controls = np.empty((z.shape[0], 0))
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    if cluster is not None:
        cluster = np.asarray(cluster, dtype=object)

    errors = _validate_arrays(z, d1, d2, y, controls, cluster)
    if errors:
        raise DataError("; ".join(errors),
                        report=ValidationReport(tuple(errors), tuple(warnings)))

    table = ObservationTable(
        z=_freeze(z.astype(np.int64)),
        d1=_freeze(d1.astype(np.int64)),
        d2=_freeze(d2.astype(np.int64)),
        y=_freeze(y),
        controls=_freeze(controls),
        control_names=tuple(control_names),
        cluster=None if cluster is None else _freeze(cluster),
        column_names=tuple(column_names),
        warnings=tuple(warnings),
    )
    extra = _collect_warnings(table)
    if extra:
        table = ObservationTable(
            z=table.z, d1=table.d1, d2=table.d2, y=table.y,
            controls=table.controls, control_names=table.control_names,
            cluster=table.cluster, column_names=table.column_names,
            warnings=tuple(warnings) + tuple(extra),
        )
    return table


def validation_report(table: ObservationTable) -> ValidationReport:
    """The (necessarily clean) report of a constructed table."""
    return ValidationReport(errors=(), warnings=table.warnings)


def derive(table: ObservationTable) -> DerivedColumns:
    """Compute all composite columns. Deterministic and row-local."""
    d1 = table.d1.astype(float)
    d2 = table.d2.astype(float)
    y = table.y
    d_and = d1 * d2
    d_or = d1 + d2 - d_and
    g_or = d_or - d2
    g_and = d_and - d2
    return DerivedColumns(
        d_and=_freeze(d_and),
        d_or=_freeze(d_or),
        d_sum=_freeze(d1 + d2),
        g_or=_freeze(g_or),
        g_and=_freeze(g_and),
        gy_or=_freeze(g_or * y),
        gy_and=_freeze(g_and * y),
        dand_y=_freeze(d_and * y),
        untreated_y=_freeze((1 - d1) * (1 - d2) * y),
        kernel_y=_freeze((1 - d1 - d2 + 2 * d_and) * y),
    )


def _parse_binary(token: str, name: str, kind: str) -> int:
    # Accept only 0/1; "true"/"false" are rejected to avoid silent coercion.
    tok = token.strip()
    if tok == "0":
        return 0
    if tok == "1":
        return 1
    raise DataError(f"non-binary {kind} column '{name}': value {token!r}")


def _parse_float(token: str, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"could not parse numeric column '{name}': value {token!r}") from None
    return value


def load_table(path, mapping: Mapping[str, object] | None = None, *,
               delimiter: str = ",", on_missing: str = "drop") -> ObservationTable:
    """Read a delimited text file into a validated :class:`ObservationTable`.

    Parameters
    ----------
    path : str or Path
        UTF-8 delimited text file with a header row.
    mapping : mapping, optional
        Column-name mapping with required keys ``z``, ``d1``, ``d2``, ``y``
        and optional keys ``controls`` (list of names) and ``cluster``.
        Defaults to the identity mapping ``{"z": "z", ...}``.
    delimiter : str
        Field delimiter; comma by default, tab selectable.
    on_missing : {"drop", "fail"}
        Rows with a missing value in any mapped column are dropped (with a
        warning recording the count) or cause an error.
    """
    if on_missing not in ("drop", "fail"):
        raise ConfigError(f"unknown missing-data policy {on_missing!r}")
    mapping = dict(DEFAULT_MAPPING) if mapping is None else dict(mapping)
    allowed = {"z", "d1", "d2", "y", "controls", "cluster"}
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown mapping keys: {sorted(unknown)}")
    for key in ("z", "d1", "d2", "y"):
        if key not in mapping:
            raise ConfigError(f"mapping is missing required key '{key}'")
    control_names = [str(c) for c in mapping.get("controls", []) or []]
    cluster_name = mapping.get("cluster")

    try:
        handle = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"unreadable file {path}: {exc}") from None

    with handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"file {path} is empty") from None
        header = [h.strip() for h in header]
        index: dict[str, int] = {}
        wanted = [("z", mapping["z"]), ("d1", mapping["d1"]),
                  ("d2", mapping["d2"]), ("y", mapping["y"])]
        wanted += [(c, c) for c in control_names]
        if cluster_name:
            wanted.append(("cluster", cluster_name))
        absent = [str(col) for _, col in wanted if str(col) not in header]
        if absent:
            raise ColumnMissingError(
                f"column(s) {absent} not found in {path}; header is {header}")
        for role, col in wanted:
            index[str(col)] = header.index(str(col))

        cols = [str(mapping["z"]), str(mapping["d1"]), str(mapping["d2"]), str(mapping["y"])]
        cols += control_names
        if cluster_name:
            cols.append(str(cluster_name))

        kept: list[list[str]] = []
        dropped = 0
        for rownum, row in enumerate(reader, start=2):
            if not row or all(tok.strip() == "" for tok in row):
                continue
            fields = []
            missing = False
            for col in cols:
                i = index[col]
                tok = row[i] if i < len(row) else ""
                if tok.strip().lower() in _MISSING_TOKENS:
                    missing = True
                fields.append(tok)
            if missing:
                if on_missing == "fail":
                    raise DataError(f"missing value at line {rownum} of {path}")
                dropped += 1
                continue
            kept.append(fields)

    if not kept:
        raise DataError(f"no complete rows in {path}")

    n = len(kept)
    z = np.empty(n, dtype=np.int64)
    d1 = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.int64)
    y = np.empty(n, dtype=float)
    controls = np.empty((n, len(control_names)))
    cluster = np.empty(n, dtype=object) if cluster_name else None
    for i, fields in enumerate(kept):
        z[i] = _parse_binary(fields[0], str(mapping["z"]), "instrument")
        d1[i] = _parse_binary(fields[1], str(mapping["d1"]), "treatment")
        d2[i] = _parse_binary(fields[2], str(mapping["d2"]), "treatment")
        y[i] = _parse_float(fields[3], str(mapping["y"]))
        for j, cname in enumerate(control_names):
            controls[i, j] = _parse_float(fields[4 + j], cname)
        if cluster is not None:
            cluster[i] = fields[-1].strip()

    warnings = []
    if dropped:
        warnings.append(f"dropped {dropped} row(s) with missing values")
    return from_arrays(
        z, d1, d2, y, controls=controls, control_names=tuple(control_names),
        cluster=cluster, column_names=tuple(header), warnings=warnings,
    )


def save_table(table: ObservationTable, path, *, delimiter: str = ",") -> None:
    """Write a table in the delimited format :func:`load_table` reads.

    Binary columns round-trip bit-identically; reals are written with
    ``repr`` so reloading reproduces them exactly.
    """
    names = ["z", "d1", "d2", "y"]
    names += list(table.control_names) or [f"x{j}" for j in range(table.controls.shape[1])]
    if table.cluster is not None:
        names.append("cluster")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter=delimiter)
        writer.writerow(names)
        for i in range(table.n):
            row = [int(table.z[i]), int(table.d1[i]), int(table.d2[i]), repr(float(table.y[i]))]
            row += [repr(float(v)) for v in table.controls[i]]
            if table.cluster is not None:
                row.append(str(table.cluster[i]))
            writer.writerow(row)
