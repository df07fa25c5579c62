"""Classifier tables: the known data points and their predicted classes."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .errors import ValidationError
from .language import DataPoint, Schema


@dataclass(frozen=True, eq=False)
class ClassifierTable:
    """Known data points with the class the classifier predicts for each.

    Row order is preserved: it drives deterministic witness selection.
    Compared by identity; use `same_content` for structural comparison.
    """

    schema: Schema
    points: tuple[DataPoint, ...]
    labels: tuple[str, ...]
    _by_point: dict = field(default=None, compare=False, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValidationError("points and labels differ in length")
        by_point: dict[DataPoint, str] = {}
        for point, label in zip(self.points, self.labels):
            if len(point) != len(self.schema.features):
                raise ValidationError(f"point {point!r} has wrong arity")
            for feature, value in zip(self.schema.features, point):
                if value not in feature.values:
                    raise ValidationError(
                        f"value {value!r} not in domain of feature {feature.name!r}"
                    )
            if label not in self.schema.classes:
                raise ValidationError(f"unknown class {label!r}")
            if point in by_point:
                raise ValidationError(f"duplicate data point {point!r}")
            by_point[point] = label
        object.__setattr__(self, "_by_point", by_point)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, point: DataPoint) -> bool:
        return point in self._by_point

    def label(self, point: DataPoint) -> str:
        try:
            return self._by_point[point]
        except KeyError:
            raise ValidationError(f"point {point!r} not in table") from None

    def same_content(self, other: "ClassifierTable") -> bool:
        return (
            self.schema == other.schema
            and self.points == other.points
            and self.labels == other.labels
        )


def load_table(data: bytes | str, schema: Schema) -> ClassifierTable:
    """Load a classifier table from CSV.

    Header must be the schema's feature names in order plus a final `class`
    column. Duplicate rows with equal classes are dropped; duplicates with
    conflicting classes are rejected.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    expected_header = [f.name for f in schema.features] + ["class"]
    if not rows:
        raise ValidationError(f"missing CSV header {expected_header!r}")
    header = [cell.strip() for cell in rows[0]]
    if header != expected_header:
        raise ValidationError(f"CSV header mismatch: got {header!r}, want {expected_header!r}")
    points: list[DataPoint] = []
    labels: list[str] = []
    seen: dict[DataPoint, str] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        cells = [cell.strip() for cell in row]
        if len(cells) != len(expected_header):
            raise ValidationError(f"row {lineno}: expected {len(expected_header)} cells")
        *values, label = cells
        for feature, value in zip(schema.features, values):
            if value not in feature.values:
                raise ValidationError(
                    f"row {lineno}: value {value!r} not in domain of {feature.name!r}"
                )
        if label not in schema.classes:
            raise ValidationError(f"row {lineno}: unknown class {label!r}")
        point = tuple(values)
        if point in seen:
            if seen[point] != label:
                raise ValidationError(
                    f"row {lineno}: point {point!r} already mapped to {seen[point]!r}, "
                    f"now {label!r}"
                )
            continue
        seen[point] = label
        points.append(point)
        labels.append(label)
    return ClassifierTable(schema, tuple(points), tuple(labels))


def render_table_csv(table: ClassifierTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f.name for f in table.schema.features] + ["class"])
    for point, label in zip(table.points, table.labels):
        writer.writerow(list(point) + [label])
    return out.getvalue()
