"""Attribute schemas, CSV ingestion, and feature standardization.

All downstream modules operate on the encoded standardized space defined
here: numeric attributes are z-scored, categorical attributes are one-hot
encoded (one block of 0/1 coordinates per attribute). Blocks are treated
as a unit for distances and adjustments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    DegenerateAttribute,
    EmptyDataset,
    MissingColumn,
    ParseError,
    SchemaError,
    UnknownLevel,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class AttributeDef:
    """One attribute: numeric with a unit, or categorical with ordered levels."""

    name: str
    kind: str
    unit: str = ""
    levels: tuple[str, ...] = ()
    display_precision: int = 2

    def __post_init__(self):
        if not self.name:
            raise SchemaError("attribute name must be nonempty")
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"unknown attribute kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(set(self.levels)) < 2:
                raise SchemaError(
                    f"categorical attribute {self.name!r} needs >= 2 distinct levels"
                )
        if self.display_precision < 0:
            raise SchemaError("display_precision must be nonnegative")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute definitions plus the regression target."""

    attributes: tuple[AttributeDef, ...]
    target_name: str
    target_unit: str = ""

    def __post_init__(self):
        if not self.attributes:
            raise SchemaError("schema needs at least one attribute")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        if not self.target_name:
            raise SchemaError("target_name must be nonempty")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def attribute(self, name: str) -> AttributeDef:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"no attribute named {name!r}")


@dataclass(frozen=True)
class Instance:
    """Raw attribute values aligned to a schema; numeric floats, categorical strings."""

    values: tuple
    id: str | None = None

    def conform(self, schema: AttributeSchema) -> None:
        if len(self.values) != len(schema.attributes):
            raise SchemaError(
                f"instance has {len(self.values)} values, schema expects "
                f"{len(schema.attributes)}"
            )
        for attr, v in zip(schema.attributes, self.values):
            if attr.is_numeric:
                if not np.isfinite(float(v)):
                    raise SchemaError(f"non-finite value for {attr.name!r}")
            elif str(v) not in attr.levels:
                raise UnknownLevel(attr.name, str(v))


@dataclass(frozen=True)
class Dataset:
    schema: AttributeSchema
    rows: tuple[tuple[Instance, float], ...]
    provenance: str = ""

    def __post_init__(self):
        for inst, y in self.rows:
            inst.conform(self.schema)
            if not np.isfinite(y):
                raise SchemaError("actual_value must be finite")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def actual_values(self) -> np.ndarray:
        return np.array([y for _, y in self.rows], dtype=float)


@dataclass(frozen=True)
class Standardizer:
    """Training-set statistics mapping raw instances into encoded z-space.

    Numeric coordinates carry (mean, std); categorical attributes expand to
    one-hot blocks. `coord_weights` rescales categorical coordinates by 0.5
    so a single level switch costs one standardized unit of L1 distance.
    """

    schema: AttributeSchema
    means: dict[str, float]
    stds: dict[str, float]

    @property
    def coord_names(self) -> list[str]:
        names = []
        for a in self.schema.attributes:
            if a.is_numeric:
                names.append(a.name)
            else:
                names.extend(f"{a.name}={lvl}" for lvl in a.levels)
        return names

    @property
    def dim(self) -> int:
        return sum(1 if a.is_numeric else len(a.levels) for a in self.schema.attributes)

    def blocks(self) -> list[tuple[AttributeDef, slice]]:
        """Per-attribute coordinate slices, schema order."""
        out, start = [], 0
        for a in self.schema.attributes:
            width = 1 if a.is_numeric else len(a.levels)
            out.append((a, slice(start, start + width)))
            start += width
        return out

    @property
    def coord_weights(self) -> np.ndarray:
        w = np.ones(self.dim)
        for a, sl in self.blocks():
            if not a.is_numeric:
                w[sl] = 0.5
        return w

    def transform(self, x: Instance) -> np.ndarray:
        x.conform(self.schema)
        z = np.zeros(self.dim)
        for (a, sl), v in zip(self.blocks(), x.values):
            if a.is_numeric:
                z[sl] = (float(v) - self.means[a.name]) / self.stds[a.name]
            else:
                if str(v) not in a.levels:
                    raise UnknownLevel(a.name, str(v))
                z[sl.start + a.levels.index(str(v))] = 1.0
        return z

    def transform_batch(self, xs: Iterable[Instance]) -> np.ndarray:
        rows = [self.transform(x) for x in xs]
        if not rows:
            return np.zeros((0, self.dim))
        return np.stack(rows)

    def inverse_transform(self, z: np.ndarray) -> Instance:
        if z.shape != (self.dim,):
            raise SchemaError(f"expected vector of dim {self.dim}, got {z.shape}")
        values = []
        for a, sl in self.blocks():
            if a.is_numeric:
                values.append(float(z[sl][0]) * self.stds[a.name] + self.means[a.name])
            else:
                values.append(a.levels[int(np.argmax(z[sl]))])
        return Instance(values=tuple(values))


def fit_standardizer(dataset: Dataset) -> Standardizer:
    """Population mean/std per numeric attribute; constant columns are an error."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot fit a standardizer on an empty dataset")
    means, stds = {}, {}
    for idx, attr in enumerate(dataset.schema.attributes):
        if not attr.is_numeric:
            continue
        col = np.array([float(inst.values[idx]) for inst, _ in dataset.rows])
        mean = float(col.mean())
        std = float(col.std())  # population estimator
        if std == 0.0:
            raise DegenerateAttribute(attr.name)
        means[attr.name] = mean
        stds[attr.name] = std
    return Standardizer(schema=dataset.schema, means=means, stds=stds)


def target_stats(dataset: Dataset) -> tuple[float, float]:
    """(mean, population std) of the actual values; std floored to 1 if constant."""
    ys = dataset.actual_values
    if ys.size == 0:
        raise EmptyDataset("no rows")
    std = float(ys.std())
    return float(ys.mean()), std if std > 0 else 1.0


def load_csv(path: str | Path, schema: AttributeSchema) -> Dataset:
    """Parse a UTF-8 comma-separated file against the schema.

    The header must contain every attribute name plus the target column.
    Any unparseable or missing cell rejects the load, naming the row.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        header = [h.strip() for h in header]
        col_index = {}
        for name in schema.names + [schema.target_name]:
            if name not in header:
                raise MissingColumn(name)
            col_index[name] = header.index(name)

        rows = []
        for row_idx, raw in enumerate(reader):
            values = []
            for attr in schema.attributes:
                cell = raw[col_index[attr.name]].strip() if col_index[attr.name] < len(raw) else ""
                if cell == "":
                    raise ParseError(row_idx, attr.name, "missing value")
                if attr.is_numeric:
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ParseError(row_idx, attr.name, f"not a number: {cell!r}") from None
                    if not np.isfinite(v):
                        raise ParseError(row_idx, attr.name, "non-finite")
                    values.append(v)
                else:
                    if cell not in attr.levels:
                        raise ParseError(row_idx, attr.name, f"unknown level {cell!r}")
                    values.append(cell)
            tcell = raw[col_index[schema.target_name]].strip() if col_index[schema.target_name] < len(raw) else ""
            try:
                y = float(tcell)
            except ValueError:
                raise ParseError(row_idx, schema.target_name, f"not a number: {tcell!r}") from None
            if not np.isfinite(y):
                raise ParseError(row_idx, schema.target_name, "non-finite")
            rows.append((Instance(values=tuple(values), id=str(row_idx)), y))

    if not rows:
        raise EmptyDataset(f"{path} has a header but no rows")
    return Dataset(schema=schema, rows=tuple(rows), provenance=str(path))


def schema_to_dict(schema: AttributeSchema) -> dict:
    attrs = []
    for a in schema.attributes:
        kind: dict = {"type": a.kind}
        if a.is_numeric:
            kind["unit"] = a.unit
        else:
            kind["levels"] = list(a.levels)
        attrs.append(
            {"name": a.name, "kind": kind, "display_precision": a.display_precision}
        )
    return {
        "attributes": attrs,
        "target_name": schema.target_name,
        "target_unit": schema.target_unit,
    }


def schema_from_dict(doc: dict) -> AttributeSchema:
    try:
        attrs = []
        for a in doc["attributes"]:
            kind = a["kind"]
            attrs.append(
                AttributeDef(
                    name=a["name"],
                    kind=kind["type"],
                    unit=kind.get("unit", ""),
                    levels=tuple(kind.get("levels", ())),
                    display_precision=int(a.get("display_precision", 2)),
                )
            )
        return AttributeSchema(
            attributes=tuple(attrs),
            target_name=doc["target_name"],
            target_unit=doc.get("target_unit", ""),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema document: {exc}") from exc


def load_schema_json(path: str | Path) -> AttributeSchema:
    with Path(path).open("r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))
