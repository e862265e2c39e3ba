"""Adaptive Simpson quadrature for piecewise-smooth integrands.

Callers are expected to split integrals at known breakpoints and integrate
panel by panel; within a panel the integrand should be smooth.  Refinement
stops once the Richardson correction drops below the requested absolute
tolerance or below machine-level relative noise, whichever is larger, so
tight absolute tolerances stay safe on large-magnitude integrals.
"""

from __future__ import annotations

_REL_FLOOR = 1e-14


def _simpson(fa: float, fb: float, fm: float, a: float, b: float) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(func, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = func(lm)
    frm = func(rm)
    left = _simpson(fa, fm, flm, a, m)
    right = _simpson(fm, fb, frm, m, b)
    delta = left + right - whole
    noise = _REL_FLOOR * (abs(left) + abs(right))
    if depth <= 0 or abs(delta) <= max(15.0 * tol, noise):
        return left + right + delta / 15.0
    return _adaptive(func, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + _adaptive(
        func, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1
    )


def adaptive_simpson(func, a: float, b: float, tol: float = 1e-10, max_depth: int = 32) -> float:
    """Integrate func over [a, b] to absolute tolerance tol (noise-floored)."""
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(func, b, a, tol=tol, max_depth=max_depth)
    fa = func(a)
    fb = func(b)
    m = 0.5 * (a + b)
    fm = func(m)
    whole = _simpson(fa, fb, fm, a, b)
    return _adaptive(func, a, fa, b, fb, m, fm, whole, tol, max_depth)
