"""Bracketed Newton iteration for the survival-ratio root.

Solves x**(1+alpha2) - x = target on (1, inf).  Newton steps are clamped to
the current bracket and fall back to bisection whenever a step would leave
it, so convergence never depends on the starting point.
"""

from __future__ import annotations

from .errors import NoConvergenceError

_MAX_ITER = 200


def survival_ratio_root(alpha2: float, target: float, rtol: float = 1e-13) -> float:
    """Unique root b > 1 of b**(1+alpha2) - b = target (target > 0)."""
    if target <= 0.0:
        raise NoConvergenceError(f"target must be positive, got {target}")
    expo = 1.0 + alpha2

    def f(x: float) -> float:
        return x**expo - x - target

    lo = 1.0
    hi = 1.0 + target ** (1.0 / expo) + target
    while f(hi) < 0.0:  # defensive; the bound above already works analytically
        hi *= 2.0
        if hi > 1e30:
            raise NoConvergenceError("failed to bracket the survival-ratio root")

    x = 0.5 * (lo + hi)
    tol = rtol * max(1.0, target)
    for _ in range(_MAX_ITER):
        fx = f(x)
        if abs(fx) <= tol:
            return x
        if fx > 0.0:
            hi = x
        else:
            lo = x
        dfx = expo * x ** (expo - 1.0) - 1.0
        step_ok = dfx > 0.0
        if step_ok:
            x_new = x - fx / dfx
            step_ok = lo < x_new < hi
        x = x_new if step_ok else 0.5 * (lo + hi)
    raise NoConvergenceError(
        f"survival-ratio root did not converge for alpha2={alpha2}, target={target}"
    )
