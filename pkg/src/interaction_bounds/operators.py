"""Coordinate operators on tabulated functions.

The calculus needed for jackknife-style variance analysis: substitution of a
coordinate by a fixed point, first differences along a coordinate, conditional
expectation and conditional variance over a coordinate, the sum of conditional
variances (the Efron-Stein surrogate for the variance), second (mixed)
differences, and the self-bounding operator
``Dg = sum_k (g - inf over axis k of g)^2``.

Every operator returns a fresh dense table; there is no in-place mutation and
no lazy composition.  Outputs that are mathematically independent of a
coordinate are built by explicit broadcast, so they are constant along that
fiber by construction.  Setting ``STRUCTURAL_CHECKS = True`` (tests do this)
additionally re-verifies that property numerically after each operator.
"""

from __future__ import annotations

import numpy as np

from .space import FiniteProductSpace, TabulatedFunction

#: When true, operators re-check that fiber-independent outputs really are
#: constant along the eliminated coordinate (cheap structural self-check;
#: meant for debug/test runs only).
STRUCTURAL_CHECKS = False

_FIBER_TOL = 1e-12


def _expand_constant(space: FiniteProductSpace, reduced: np.ndarray, k: int) -> np.ndarray:
    """Re-insert axis ``k`` as a constant dimension and materialize."""
    out = np.broadcast_to(np.expand_dims(np.asarray(reduced), axis=k), space.shape)
    return np.ascontiguousarray(out)


def _check_fiber_constant(values: np.ndarray, k: int) -> None:
    if not STRUCTURAL_CHECKS:
        return
    spread = values.max(axis=k) - values.min(axis=k)
    worst = float(np.max(spread)) if spread.size else 0.0
    if worst > _FIBER_TOL:
        raise AssertionError(
            f"output claimed independent of axis {k} varies by {worst!r}"
        )


def substitute(f: TabulatedFunction, k: int, y: int) -> TabulatedFunction:
    """Freeze coordinate ``k`` at point ``y``.

    The result is independent of coordinate ``k`` and the operation is a
    homomorphism: ``substitute(f * g) == substitute(f) * substitute(g)``.
    Substituting into a function already independent of ``k`` is the identity.
    """
    space = f.space
    space.check_point(k, y)
    reduced = np.take(f.values, y, axis=k)
    out = _expand_constant(space, reduced, k)
    _check_fiber_constant(out, k)
    return TabulatedFunction(space, out)


def difference(f: TabulatedFunction, k: int, y: int, y2: int) -> TabulatedFunction:
    """First difference along coordinate ``k``: value at ``y`` minus at ``y2``.

    Antisymmetric in ``(y, y2)``, zero when ``y == y2`` or when ``f`` does not
    depend on coordinate ``k``.
    """
    space = f.space
    space.check_point(k, y)
    space.check_point(k, y2)
    reduced = np.take(f.values, y, axis=k) - np.take(f.values, y2, axis=k)
    out = _expand_constant(space, reduced, k)
    _check_fiber_constant(out, k)
    return TabulatedFunction(space, out)


def cond_expectation(f: TabulatedFunction, k: int) -> TabulatedFunction:
    """Average out coordinate ``k`` under its axis weights.

    Idempotent, commutes with conditional expectation over other axes and
    with substitution on other axes.
    """
    space = f.space
    space.check_axis(k)
    w = space.axes[k].weight_array()
    reduced = np.tensordot(f.values, w, axes=([k], [0]))
    out = _expand_constant(space, reduced, k)
    _check_fiber_constant(out, k)
    return TabulatedFunction(space, out)


def cond_variance(f: TabulatedFunction, k: int) -> TabulatedFunction:
    """Variance of ``f`` over coordinate ``k`` with the others held fixed.

    Computed as the conditional second moment of the centered fiber, which is
    nonnegative term by term.  ``cond_variance_pairs`` evaluates the same
    quantity through weighted squared first differences; the two must agree
    to 1e-10 and the test suite asserts exactly that.
    """
    space = f.space
    space.check_axis(k)
    w = space.axes[k].weight_array()
    mean = np.tensordot(f.values, w, axes=([k], [0]))
    centered = f.values - np.expand_dims(mean, axis=k)
    reduced = np.tensordot(centered * centered, w, axes=([k], [0]))
    out = _expand_constant(space, reduced, k)
    _check_fiber_constant(out, k)
    return TabulatedFunction(space, out)


def cond_variance_pairs(f: TabulatedFunction, k: int) -> TabulatedFunction:
    """Conditional variance via ``(1/2) E_{(y,y')}[ (f_y - f_{y'})^2 ]``."""
    space = f.space
    space.check_axis(k)
    w = space.axes[k].weight_array()
    fk = np.moveaxis(f.values, k, 0)
    diff = fk[:, None, ...] - fk[None, :, ...]
    pair_w = np.multiply.outer(w, w)
    reduced = 0.5 * np.tensordot(pair_w, diff * diff, axes=([0, 1], [0, 1]))
    # tensordot put the remaining axes in moveaxis order; restore axis k.
    out = _expand_constant(space, reduced, k)
    _check_fiber_constant(out, k)
    return TabulatedFunction(space, out)


def scv(f: TabulatedFunction) -> TabulatedFunction:
    """Sum of conditional variances over all coordinates.

    Its expectation is the Efron-Stein upper bound on ``variance(f)``; it is
    a constant table when ``f`` is a sum of per-coordinate functions.
    """
    total = np.zeros(f.space.shape)
    for k in range(f.space.n):
        total += cond_variance(f, k).values
    return TabulatedFunction(f.space, total)


def self_bounding_operator(g: TabulatedFunction) -> TabulatedFunction:
    """``Dg = sum_k (g - inf over axis k of g)^2``.

    The inner infimum is an exact minimum over the finite axis (ties resolve
    identically regardless of index because only the minimum value enters).
    ``Dg`` is nonnegative and vanishes exactly on constants.
    """
    total = np.zeros(g.space.shape)
    for k in range(g.space.n):
        drop = g.values - g.values.min(axis=k, keepdims=True)
        total += drop * drop
    return TabulatedFunction(g.space, total)


def second_difference(
    f: TabulatedFunction, k: int, l: int, y: int, y2: int, z: int, z2: int
) -> TabulatedFunction:
    """Mixed second difference: difference along ``l`` of the difference along ``k``.

    Requires ``k != l``.  The result is independent of both coordinates and is
    symmetric under swapping the roles ``(k, y, y2)`` and ``(l, z, z2)``; it
    vanishes whenever ``f`` splits as a sum of functions of single coordinates.
    """
    if k == l:
        raise ValueError("second difference needs two distinct axes")
    return difference(difference(f, k, y, y2), l, z, z2)


def pair_second_differences(values: np.ndarray, k: int, l: int) -> np.ndarray:
    """All mixed second differences for the axis pair ``(k, l)`` at once.

    Returns a tensor with axes ``(y, y2, z, z2, *rest)`` where ``rest`` are
    the remaining coordinates in their original relative order; entry
    ``[y, y2, z, z2]`` is the second difference with points ``(y, y2)`` on
    axis ``k`` and ``(z, z2)`` on axis ``l``.
    """
    if k == l:
        raise ValueError("second difference needs two distinct axes")
    fkl = np.moveaxis(values, (k, l), (0, 1))
    return (
        fkl[:, None, :, None] - fkl[None, :, :, None]
        - fkl[:, None, None, :] + fkl[None, :, None, :]
    )


def expand_pair_constant(
    space: FiniteProductSpace, reduced: np.ndarray, k: int, l: int
) -> np.ndarray:
    """Re-insert axes ``k`` and ``l`` as constant dimensions and materialize.

    ``reduced`` must carry the remaining axes in their original relative
    order, as produced by reductions over ``pair_second_differences``.
    """
    a, b = sorted((k, l))
    out = np.expand_dims(np.expand_dims(reduced, a), b)
    return np.ascontiguousarray(np.broadcast_to(out, space.shape))
