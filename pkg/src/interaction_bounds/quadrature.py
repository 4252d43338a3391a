"""Adaptive Simpson quadrature for smooth scalar integrands."""

from __future__ import annotations

from typing import Callable

_MAX_DEPTH = 50


class QuadratureError(Exception):
    """The adaptive subdivision did not converge to the requested tolerance."""


def adaptive_simpson(
    fn: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
) -> float:
    """Integrate ``fn`` on ``[a, b]`` to absolute tolerance ``tol``.

    Classic recursive Simpson with the |S_left + S_right - S_whole| / 15
    error estimate and tolerance halving per split.  Raises QuadratureError
    if the recursion exhausts its depth budget, which for a smooth integrand
    only happens when ``tol`` is below attainable rounding error.
    """
    if not (b >= a):
        raise ValueError("integration interval must have a <= b")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if a == b:
        return 0.0
    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _recurse(fn, a, b, fa, fm, fb, whole, tol, _MAX_DEPTH)


def _recurse(fn, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = fn(lm), fn(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"no convergence on [{a}, {b}] at tolerance {tol}"
        )
    half = 0.5 * tol
    return _recurse(fn, a, m, fa, flm, fm, left, half, depth - 1) + _recurse(
        fn, m, b, fm, frm, fb, right, half, depth - 1
    )
