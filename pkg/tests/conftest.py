import hypothesis
import numpy as np
import pytest

from blauspace import (
    AttributeSchema,
    AttributeTable,
    ColumnSpec,
    FeatureConfig,
    FeatureSpec,
    Standardization,
)

# fixtures used under @given are immutable inputs, so reuse is safe
hypothesis.settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[hypothesis.HealthCheck.function_scoped_fixture],
)
hypothesis.settings.load_profile("suite")


@pytest.fixture
def toy_schema():
    return AttributeSchema(
        columns=(
            ColumnSpec(name="income", kind="continuous"),
            ColumnSpec(name="faith", kind="categorical"),
            ColumnSpec(name="school", kind="ordinal", levels=("none", "primary", "secondary")),
            ColumnSpec(name="farm", kind="mixed_membership", group="work"),
            ColumnSpec(name="trade", kind="mixed_membership", group="work"),
            ColumnSpec(name="home", kind="location"),
        )
    )


@pytest.fixture
def toy_config(toy_schema):
    return FeatureConfig(
        schema=toy_schema,
        entries=(
            FeatureSpec(name="bias", kind="bias"),
            FeatureSpec(name="income_gap", kind="abs_diff", column="income"),
            FeatureSpec(name="faith_mismatch", kind="mismatch", column="faith"),
            FeatureSpec(name="school_gap", kind="ordinal_abs_diff", column="school"),
            FeatureSpec(name="work_l1", kind="mixed_l1", group="work"),
            FeatureSpec(
                name="home_level",
                kind="ordinal_distance",
                column="home",
                bins=(1.0, 5.0, 50.0),
            ),
        ),
    )


def _toy_rows(rng, n):
    faiths = np.array(["a", "b", "c"])
    schools = np.array(["none", "primary", "secondary"])
    farm = rng.random(n)
    return {
        "income": rng.normal(size=n) * 10.0,
        "faith": list(faiths[rng.integers(0, 3, size=n)]),
        "school": list(schools[rng.integers(0, 3, size=n)]),
        "farm": farm,
        "trade": 1.0 - farm,
        "home": rng.random((n, 2)) * 20.0,
    }


@pytest.fixture
def toy_table(toy_schema):
    rng = np.random.default_rng(7)
    n = 40
    return AttributeTable(
        toy_schema,
        ids=[f"p{i}" for i in range(n)],
        columns=_toy_rows(rng, n),
    )


@pytest.fixture
def toy_table_factory(toy_schema):
    def make(n, seed=7, weights=None):
        rng = np.random.default_rng(seed)
        return AttributeTable(
            toy_schema,
            ids=[f"p{i}" for i in range(n)],
            columns=_toy_rows(rng, n),
            weights=weights,
        )

    return make


@pytest.fixture
def identity_std(toy_config):
    return Standardization.identity(toy_config)
