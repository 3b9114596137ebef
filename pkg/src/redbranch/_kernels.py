"""Numba inner loops for the deficit recursions.

The coupled step is

    q1' = q1 - q1**(1+alpha1)/(1+alpha1)
    q2' = q2 - q2**(1+alpha2)/(1+alpha2) + a21*q1     (q1 read pre-update)

The read-before-update ordering is load-bearing: updating q1 first would
shift the type-1 coupling by one generation, which changes results at
order q1 while still passing every asymptotic check.  All kernels must use
the exact same expression trees so that table building and re-iteration
agree bitwise.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "fill_tables",
    "iterate_mono",
    "iterate_pair",
    "iterate_pair_sens",
]


@njit(cache=True)
def fill_tables(alpha1, alpha2, a21, q1, q2, q21):  # pragma: no cover - jitted
    e1 = 1.0 + alpha1
    e2 = 1.0 + alpha2
    for i in range(q1.shape[0] - 1):
        x = q1[i]
        y = q2[i]
        z = q21[i]
        q1[i + 1] = x - x**e1 / e1
        q2[i + 1] = y - y**e2 / e2
        q21[i + 1] = z - z**e2 / e2 + a21 * x


@njit(cache=True)
def iterate_mono(alpha, q, steps):  # pragma: no cover - jitted
    e = 1.0 + alpha
    for _ in range(steps):
        for j in range(q.shape[0]):
            x = q[j]
            q[j] = x - x**e / e


@njit(cache=True)
def iterate_pair(alpha1, alpha2, a21, q1, q2, steps):  # pragma: no cover - jitted
    e1 = 1.0 + alpha1
    e2 = 1.0 + alpha2
    for _ in range(steps):
        for j in range(q1.shape[0]):
            x = q1[j]
            y = q2[j]
            q1[j] = x - x**e1 / e1
            q2[j] = y - y**e2 / e2 + a21 * x


@njit(cache=True)
def iterate_pair_sens(
    alpha1, alpha2, a21, q1, q2, d1s1, d2s1, d2s2, steps
):  # pragma: no cover - jitted
    e1 = 1.0 + alpha1
    e2 = 1.0 + alpha2
    for _ in range(steps):
        for j in range(q1.shape[0]):
            x = q1[j]
            y = q2[j]
            fx = 1.0 - x**alpha1  # d q1'/d q1
            fy = 1.0 - y**alpha2  # d q2'/d q2
            d2s1[j] = fy * d2s1[j] + a21 * d1s1[j]
            d2s2[j] = fy * d2s2[j]
            d1s1[j] = fx * d1s1[j]
            q1[j] = x - x**e1 / e1
            q2[j] = y - y**e2 / e2 + a21 * x
