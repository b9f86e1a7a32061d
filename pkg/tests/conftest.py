import numpy as np
import pytest

from comparables import (
    AttributeDef,
    AttributeSchema,
    Dataset,
    Instance,
    fit_standardizer,
)


@pytest.fixture
def house_schema():
    return AttributeSchema(
        attributes=(
            AttributeDef("bathrooms", "numeric", unit="count", display_precision=1),
            AttributeDef("living_area", "numeric", unit="ksqft", display_precision=2),
            AttributeDef("grade", "numeric", unit="grade", display_precision=0),
            AttributeDef("age", "numeric", unit="years", display_precision=0),
            AttributeDef("condition", "categorical", levels=("2", "3", "4", "5")),
            AttributeDef("dist_downtown", "numeric", unit="miles", display_precision=2),
        ),
        target_name="price",
        target_unit="$",
    )


@pytest.fixture
def house_rows():
    # (bathrooms, living_area, grade, age, condition, dist_downtown) -> price
    return [
        ((1.5, 0.91, 7, 106, "4", 2.34), 459_500.0),
        ((1.0, 1.18, 7, 72, "3", 2.39), 600_000.0),
        ((2.0, 1.53, 8, 35, "4", 3.10), 710_000.0),
        ((2.5, 2.10, 9, 12, "5", 6.50), 905_000.0),
        ((1.0, 0.80, 6, 90, "3", 1.95), 401_000.0),
        ((3.0, 2.71, 9, 1, "3", 19.67), 434_100.0),
        ((2.0, 1.62, 6, 94, "5", 8.74), 515_000.0),
        ((1.5, 1.20, 7, 42, "4", 4.20), 585_000.0),
        ((2.5, 2.81, 9, 6, "4", 20.83), 455_000.0),
        ((2.0, 1.40, 7, 55, "3", 5.60), 560_000.0),
    ]


@pytest.fixture
def house_dataset(house_schema, house_rows):
    rows = tuple(
        (Instance(values=vals, id=str(i)), y) for i, (vals, y) in enumerate(house_rows)
    )
    return Dataset(schema=house_schema, rows=rows, provenance="unit-test fixture")


@pytest.fixture
def house_standardizer(house_dataset):
    return fit_standardizer(house_dataset)


@pytest.fixture
def numeric_schema():
    return AttributeSchema(
        attributes=(
            AttributeDef("a", "numeric", unit="u"),
            AttributeDef("b", "numeric", unit="u"),
        ),
        target_name="y",
    )


def make_numeric_dataset(schema, xs, ys):
    rows = tuple(
        (Instance(values=tuple(float(v) for v in x), id=str(i)), float(y))
        for i, (x, y) in enumerate(zip(xs, ys))
    )
    return Dataset(schema=schema, rows=rows)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
