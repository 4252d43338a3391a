"""Finite product probability spaces and dense tabulated functions.

A space is a product of finitely many weighted axes.  Real-valued functions
on the space are stored as dense tables in row-major enumeration order (last
axis fastest), which gives every operator random access by configuration.

Everything here is exact: expectations and variances are finite sums, and the
global reductions go through exactly rounded (Shewchuk) summation so that
inequality checks downstream can run at 1e-10 tolerances without budgeting
for accumulation error.

All types are immutable after construction and all operations are pure, so
evaluation over disjoint configuration ranges may run in parallel as long as
the final reduction keeps a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

#: Default cap on the number of configurations an exact enumeration may touch.
DEFAULT_CAP = 10_000_000

#: Axis weights must sum to one within this tolerance.
WEIGHT_SUM_TOL = 1e-12

Configuration = tuple[int, ...]


class CapacityError(Exception):
    """An exact enumeration would exceed the configured configuration cap."""


def fsum(values: Iterable[float] | np.ndarray) -> float:
    """Exactly rounded sum of the given terms (Shewchuk summation)."""
    if isinstance(values, (np.ndarray, np.generic)):
        return math.fsum(np.asarray(values).ravel().tolist())
    return math.fsum(values)


@dataclass(frozen=True)
class FiniteAxis:
    """One coordinate of a product space: a finite set of weighted points.

    Points are addressed by index ``0..size-1``; ``weights[i]`` is the
    probability of point ``i``.  Weights must be nonnegative and sum to one
    within ``WEIGHT_SUM_TOL``.
    """

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.weights) < 1:
            raise ValueError("axis needs at least one point")
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if any(not math.isfinite(x) for x in w):
            raise ValueError("axis weights must be finite")
        if any(x < 0.0 for x in w):
            raise ValueError("axis weights must be nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"axis weights sum to {total!r}, expected 1")

    @property
    def size(self) -> int:
        return len(self.weights)

    @classmethod
    def uniform(cls, size: int) -> "FiniteAxis":
        if size < 1:
            raise ValueError("size must be >= 1")
        return cls(weights=(1.0 / size,) * size)

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class FiniteProductSpace:
    """A product of finite weighted axes carrying the product measure."""

    axes: tuple[FiniteAxis, ...]

    def __post_init__(self) -> None:
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) < 1:
            raise ValueError("space needs at least one axis")
        if not all(isinstance(a, FiniteAxis) for a in axes):
            raise TypeError("axes must be FiniteAxis instances")

    @property
    def n(self) -> int:
        """Number of coordinates."""
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        """Total number of configurations."""
        return math.prod(self.shape)

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "FiniteProductSpace":
        return cls(axes=tuple(FiniteAxis.uniform(s) for s in sizes))

    def check_axis(self, k: int) -> int:
        if not (0 <= k < self.n):
            raise IndexError(f"axis {k} out of range for {self.n} axes")
        return k

    def check_point(self, k: int, y: int) -> int:
        self.check_axis(k)
        if not (0 <= y < self.axes[k].size):
            raise IndexError(f"point {y} out of range for axis {k}")
        return y

    def check_capacity(self, cap: int = DEFAULT_CAP) -> None:
        if self.size > cap:
            raise CapacityError(
                f"{self.size} configurations exceed the cap of {cap}"
            )

    def weight_table(self, cap: int = DEFAULT_CAP) -> np.ndarray:
        """Dense table of the product measure, one weight per configuration."""
        self.check_capacity(cap)
        return _weight_table(self)


@lru_cache(maxsize=128)
def _weight_table(space: FiniteProductSpace) -> np.ndarray:
    table = reduce(np.multiply.outer, (a.weight_array() for a in space.axes))
    table = np.asarray(table, dtype=np.float64).reshape(space.shape)
    table.flags.writeable = False
    return table


@dataclass(frozen=True, eq=False)
class TabulatedFunction:
    """A bounded function on a product space, stored as a dense value table.

    ``values`` has one real per configuration in enumeration order; it is
    held as a read-only ndarray with shape ``space.shape`` so that axis ``k``
    of the array is coordinate ``k`` of the space.
    """

    space: FiniteProductSpace
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            if arr.size != self.space.size:
                raise ValueError(
                    f"flat table has {arr.size} values, space has "
                    f"{self.space.size} configurations"
                )
            arr = arr.reshape(self.space.shape)
        elif arr.shape != self.space.shape:
            raise ValueError(
                f"table shape {arr.shape} does not match space shape "
                f"{self.space.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("table values must be finite")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, space: FiniteProductSpace, value: float) -> "TabulatedFunction":
        return cls(space, np.full(space.shape, float(value)))

    @classmethod
    def from_callable(
        cls,
        space: FiniteProductSpace,
        fn: Callable[[Configuration], float],
        cap: int = DEFAULT_CAP,
    ) -> "TabulatedFunction":
        space.check_capacity(cap)
        flat = np.fromiter(
            (fn(c) for c in np.ndindex(space.shape)),
            dtype=np.float64,
            count=space.size,
        )
        return cls(space, flat)

    def __call__(self, config: Configuration) -> float:
        return float(self.values[tuple(config)])

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def _coerce(self, other: "TabulatedFunction | float") -> np.ndarray:
        if isinstance(other, TabulatedFunction):
            if other.space != self.space:
                raise ValueError("operands live on different spaces")
            return other.values
        return np.float64(other)

    def __add__(self, other: "TabulatedFunction | float") -> "TabulatedFunction":
        return TabulatedFunction(self.space, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other: "TabulatedFunction | float") -> "TabulatedFunction":
        return TabulatedFunction(self.space, self.values - self._coerce(other))

    def __rsub__(self, other: float) -> "TabulatedFunction":
        return TabulatedFunction(self.space, np.float64(other) - self.values)

    def __mul__(self, other: "TabulatedFunction | float") -> "TabulatedFunction":
        return TabulatedFunction(self.space, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "TabulatedFunction":
        return TabulatedFunction(self.space, -self.values)


def enumerate_configurations(
    space: FiniteProductSpace, cap: int = DEFAULT_CAP
) -> Iterator[Configuration]:
    """All configurations in row-major order (last axis fastest)."""
    space.check_capacity(cap)
    yield from np.ndindex(space.shape)


def measure_of(space: FiniteProductSpace, config: Sequence[int]) -> float:
    """Product-measure probability of a single configuration."""
    config = tuple(config)
    if len(config) != space.n:
        raise ValueError(f"configuration of length {len(config)} on {space.n} axes")
    for k, c in enumerate(config):
        space.check_point(k, c)
    return math.prod(space.axes[k].weights[c] for k, c in enumerate(config))


def expectation(f: TabulatedFunction, cap: int = DEFAULT_CAP) -> float:
    """Exact mean of ``f`` under the product measure."""
    w = f.space.weight_table(cap)
    return fsum(w * f.values)


def variance(f: TabulatedFunction, cap: int = DEFAULT_CAP) -> float:
    """Exact variance of ``f``; zero iff ``f`` is a.s. constant."""
    w = f.space.weight_table(cap)
    mu = fsum(w * f.values)
    d = f.values - mu
    return fsum(w * d * d)


# ---------------------------------------------------------------------------
# JSON interchange:  {"axes": [{"weights": [...]}, ...], "values": [...]}
# with values in enumeration order.
# ---------------------------------------------------------------------------


def space_from_json(doc: dict) -> FiniteProductSpace:
    axes_doc = doc.get("axes")
    if not isinstance(axes_doc, list) or not axes_doc:
        raise ValueError("'axes' must be a non-empty list")
    axes = []
    for i, ax in enumerate(axes_doc):
        if not isinstance(ax, dict):
            raise ValueError(f"axis {i} must be an object")
        unknown = set(ax) - {"weights"}
        if unknown:
            raise ValueError(f"axis {i} has unknown fields {sorted(unknown)}")
        axes.append(FiniteAxis(weights=tuple(ax["weights"])))
    return FiniteProductSpace(axes=tuple(axes))


def tabulated_from_json(doc: dict) -> TabulatedFunction:
    """Load a space plus value table from its JSON document form."""
    if not isinstance(doc, dict):
        raise ValueError("document must be an object")
    unknown = set(doc) - {"axes", "values"}
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)}")
    space = space_from_json(doc)
    values = doc.get("values")
    if not isinstance(values, list):
        raise ValueError("'values' must be a list in enumeration order")
    return TabulatedFunction(space, np.asarray(values, dtype=np.float64))


def tabulated_to_json(f: TabulatedFunction) -> dict:
    return {
        "axes": [{"weights": list(a.weights)} for a in f.space.axes],
        "values": [float(v) for v in f.values.ravel()],
    }
