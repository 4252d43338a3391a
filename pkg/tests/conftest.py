from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from interaction_bounds import operators
from interaction_bounds.space import (
    FiniteAxis,
    FiniteProductSpace,
    TabulatedFunction,
)

settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")


@pytest.fixture(autouse=True, scope="session")
def _structural_checks():
    # Re-verify fiber independence of operator outputs throughout the tests.
    operators.STRUCTURAL_CHECKS = True
    yield
    operators.STRUCTURAL_CHECKS = False


def uniform_space(*sizes: int) -> FiniteProductSpace:
    return FiniteProductSpace.uniform(sizes)


def table(space: FiniteProductSpace, fn) -> TabulatedFunction:
    return TabulatedFunction.from_callable(space, fn)


def coordinate_sum(space: FiniteProductSpace) -> TabulatedFunction:
    return table(space, lambda c: float(sum(c)))


def coordinate_product(space: FiniteProductSpace) -> TabulatedFunction:
    return table(space, lambda c: float(np.prod(c)))


# --- hypothesis strategies ---------------------------------------------------


@st.composite
def axes_strategy(draw, max_axes: int = 3, max_size: int = 4):
    n = draw(st.integers(1, max_axes))
    axes = []
    for _ in range(n):
        size = draw(st.integers(1, max_size))
        kind = draw(st.sampled_from(["uniform", "weighted"]))
        if kind == "uniform":
            axes.append(FiniteAxis.uniform(size))
        else:
            raw = draw(
                st.lists(st.integers(1, 9), min_size=size, max_size=size)
            )
            total = sum(raw)
            axes.append(FiniteAxis(weights=tuple(r / total for r in raw)))
    return FiniteProductSpace(axes=tuple(axes))


@st.composite
def tabulated_strategy(draw, max_axes: int = 3, max_size: int = 4):
    space = draw(axes_strategy(max_axes=max_axes, max_size=max_size))
    values = draw(
        st.lists(
            st.floats(-1.0, 1.0, allow_nan=False, width=32),
            min_size=space.size,
            max_size=space.size,
        )
    )
    return TabulatedFunction(space, np.asarray(values))
