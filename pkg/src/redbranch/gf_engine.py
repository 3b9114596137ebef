"""Deterministic deficit-space engine for the concrete family.

Everything is computed on extinction-probability deficits q = 1 - F(...)
rather than on generating-function values, which avoids catastrophic
cancellation near s = 1: the iteration maps stay well conditioned down to
deficits around 1e-280, so horizons up to 2**24 are safe for alpha >= 0.4.

The core objects are the tables Q1(n), Q2(n), Q21(n) (survival
probabilities of each type and of the whole two-type process started from
a type-2 particle) and the conditional transform of the reduced process

    1 - E[s1**Z1(m,n) * s2**Z2(m,n) | Z(n) != 0]
        = Q21(m; 1-(1-s1)Q1(n-m), 1-(1-s2)Q21(n-m)) / Q21(n),

obtained by conditioning on the generation-m population.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .errors import CapacityError, RangeError, RegimeError
from .offspring_models import (
    ModelParams,
    Regime,
    type1_pmf_array,
    type2_pmf_table,
)

__all__ = [
    "DeficitTables",
    "DeficitState",
    "ReducedTransformResult",
    "DiagnosticsReport",
    "build_deficits",
    "deficit_iterate",
    "DeficitEngine",
    "TruncatedFamily",
    "TruncatedEngine",
    "PopulationDP",
]

DEFAULT_MAX_ENTRIES = 1 << 24  # 3 float64 tables ~ 400 MB


@dataclass(frozen=True)
class DeficitTables:
    """Survival-probability tables q[n] for n = 0..horizon."""

    horizon: int
    q1: np.ndarray
    q2: np.ndarray
    q21: np.ndarray


@dataclass
class DeficitState:
    """State of the coupled deficit iteration after ``step`` steps.

    The sensitivity block holds derivatives with respect to the transform
    variables that seeded the initial deficits; they are nonpositive along
    any trajectory started from deficits of the form (1-s)*scale.
    """

    q1: float
    q2: float
    step: int
    dq1_ds1: float | None = None
    dq2_ds1: float | None = None
    dq2_ds2: float | None = None


@dataclass(frozen=True)
class ReducedTransformResult:
    """Joint conditional transform value with optional s-derivatives."""

    value: float
    m: int
    n: int
    s1: float
    s2: float
    d_ds1: float | None = None
    d_ds2: float | None = None


def build_deficits(
    params: ModelParams, horizon: int, max_entries: int = DEFAULT_MAX_ENTRIES
) -> DeficitTables:
    """Iterate the exact deficit recurrences up to ``horizon``.

    q1[n+1] = q1[n] - q1[n]**(1+a1)/(1+a1)
    q2[n+1] = q2[n] - q2[n]**(1+a2)/(1+a2)
    q21[n+1] = q21[n] - q21[n]**(1+a2)/(1+a2) + a21*q1[n]
    """
    if horizon < 1:
        raise RangeError(f"horizon must be >= 1, got {horizon}")
    if horizon + 1 > max_entries:
        raise CapacityError(
            f"horizon {horizon} exceeds the configured budget of {max_entries} entries"
        )
    q1 = np.empty(horizon + 1)
    q2 = np.empty(horizon + 1)
    q21 = np.empty(horizon + 1)
    q1[0] = q2[0] = q21[0] = 1.0
    _kernels.fill_tables(params.alpha1, params.alpha2, params.a21, q1, q2, q21)
    return DeficitTables(horizon=horizon, q1=q1, q2=q2, q21=q21)


def deficit_iterate(
    params: ModelParams,
    steps: int,
    q1_0: float,
    q2_0: float,
    with_sensitivity: bool = False,
    seed_sensitivity: tuple[float, float, float] = (-1.0, 0.0, -1.0),
) -> DeficitState:
    """Apply ``steps`` coupled deficit updates from (q1_0, q2_0).

    ``seed_sensitivity`` = (dq1/ds1, dq2/ds1, dq2/ds2) at step 0; the
    default corresponds to initial deficits (1-s1), (1-s2) at unit scale.
    """
    if steps < 0:
        raise RangeError(f"steps must be >= 0, got {steps}")
    q1 = np.array([q1_0])
    q2 = np.array([q2_0])
    if not with_sensitivity:
        _kernels.iterate_pair(params.alpha1, params.alpha2, params.a21, q1, q2, steps)
        return DeficitState(q1=float(q1[0]), q2=float(q2[0]), step=steps)
    d1s1 = np.array([seed_sensitivity[0]])
    d2s1 = np.array([seed_sensitivity[1]])
    d2s2 = np.array([seed_sensitivity[2]])
    _kernels.iterate_pair_sens(
        params.alpha1, params.alpha2, params.a21, q1, q2, d1s1, d2s1, d2s2, steps
    )
    return DeficitState(
        q1=float(q1[0]),
        q2=float(q2[0]),
        step=steps,
        dq1_ds1=float(d1s1[0]),
        dq2_ds1=float(d2s1[0]),
        dq2_ds2=float(d2s2[0]),
    )


@dataclass(frozen=True)
class DiagnosticsReport:
    """Raw asymptotic ratios at one horizon; judgment belongs to the harness."""

    n: int
    q21_over_q2: float
    q21_power_over_a21_q1: float
    survival_norm_type1: float
    survival_norm_type2: float
    trick_ratio_type1: float
    trick_ratio_type2: float
    trick_m: int
    trick_lambda: float


class DeficitEngine:
    """Query layer over a built table set.

    The tables are immutable after construction; every query is a pure
    function of (tables, arguments), so instances can be shared across
    threads and swept in parallel.
    """

    def __init__(
        self,
        params: ModelParams,
        horizon: int,
        max_entries: int = DEFAULT_MAX_ENTRIES,
    ):
        self.params = params
        self.tables = build_deficits(params, horizon, max_entries)
        self._hstar_curve: np.ndarray | None = None
        self._hstar_peak: int | None = None

    @property
    def horizon(self) -> int:
        return self.tables.horizon

    def _check_range(self, m: int, n: int) -> None:
        if not 0 <= m <= n <= self.horizon:
            raise RangeError(
                f"need 0 <= m <= n <= horizon, got m={m}, n={n}, horizon={self.horizon}"
            )

    # -- single-time transforms -------------------------------------------

    def reduced_transform_deficit(
        self,
        m: int,
        n: int,
        u1: float,
        u2: float,
        with_sensitivity: bool = False,
    ) -> ReducedTransformResult:
        """Transform with argument deficits u = 1 - s supplied directly.

        Callers with s of the form exp(-lambda*scale) should pass
        u = -expm1(-lambda*scale) to keep full precision near s = 1.
        """
        self._check_range(m, n)
        t = self.tables
        q1_0 = u1 * t.q1[n - m]
        q2_0 = u2 * t.q21[n - m]
        state = deficit_iterate(
            self.params,
            m,
            q1_0,
            q2_0,
            with_sensitivity=with_sensitivity,
            seed_sensitivity=(-t.q1[n - m], 0.0, -t.q21[n - m]),
        )
        norm = t.q21[n]
        value = 1.0 - state.q2 / norm
        d1 = d2 = None
        if with_sensitivity:
            assert state.dq2_ds1 is not None and state.dq2_ds2 is not None
            d1 = -state.dq2_ds1 / norm
            d2 = -state.dq2_ds2 / norm
        return ReducedTransformResult(
            value=value, m=m, n=n, s1=1.0 - u1, s2=1.0 - u2, d_ds1=d1, d_ds2=d2
        )

    def reduced_transform(
        self, m: int, n: int, s1: float, s2: float, with_sensitivity: bool = False
    ) -> ReducedTransformResult:
        """E[s1**Z1(m,n) * s2**Z2(m,n) | Z(n) != 0, start e2]."""
        if not (0.0 <= s1 <= 1.0 and 0.0 <= s2 <= 1.0):
            raise RangeError(f"(s1, s2) must lie in the unit square, got ({s1}, {s2})")
        return self.reduced_transform_deficit(
            m, n, 1.0 - s1, 1.0 - s2, with_sensitivity=with_sensitivity
        )

    def reduced_transform_grid(
        self, m: int, n: int, u_pairs: np.ndarray
    ) -> np.ndarray:
        """Vectorized transform over rows (u1, u2) of argument deficits."""
        self._check_range(m, n)
        t = self.tables
        q1 = np.ascontiguousarray(u_pairs[:, 0] * t.q1[n - m])
        q2 = np.ascontiguousarray(u_pairs[:, 1] * t.q21[n - m])
        _kernels.iterate_pair(
            self.params.alpha1, self.params.alpha2, self.params.a21, q1, q2, m
        )
        return 1.0 - q2 / t.q21[n]

    def type1_reduced_transform_deficit(self, m: int, n: int, u1: float) -> float:
        """Deficit of the monotype transform: 1 - E[s1**Z1(m,n) | Z1(n) > 0, start e1]."""
        self._check_range(m, n)
        t = self.tables
        q = np.array([u1 * t.q1[n - m]])
        _kernels.iterate_mono(self.params.alpha1, q, m)
        return float(q[0]) / t.q1[n]

    def type1_reduced_transform(self, m: int, n: int, s1: float) -> float:
        return 1.0 - self.type1_reduced_transform_deficit(m, n, 1.0 - s1)

    # -- MRCA ----------------------------------------------------------------

    def mrca_probabilities(self, m: int, n: int) -> tuple[float, float]:
        """(P(Z(m,n) = e1 | survival), P(Z(m,n) = e2 | survival)).

        These are the transform s-derivatives at (0, 0): the probability
        that the reduced process is a single particle of the given type at
        generation m.
        """
        if m < 1:
            raise RangeError(f"m must be >= 1, got {m}")
        if m >= n:
            raise RangeError(f"need m < n, got m={m}, n={n}")
        res = self.reduced_transform(m, n, 0.0, 0.0, with_sensitivity=True)
        assert res.d_ds1 is not None and res.d_ds2 is not None
        return res.d_ds1, res.d_ds2

    def singleton_probabilities(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays p1[m], p2[m] = P(Z(m,n) = e_i | survival) for m = 0..n-1."""
        self._check_range(0, n)
        p1 = np.empty(n)
        p2 = np.empty(n)
        p1[0], p2[0] = 0.0, 1.0
        for m in range(1, n):
            res = self.reduced_transform(m, n, 0.0, 0.0, with_sensitivity=True)
            p1[m], p2[m] = res.d_ds1, res.d_ds2
        return p1, p2

    def mrca_type_distribution(self, n: int) -> tuple[float, float]:
        """Exact (P(T = 1), P(T = 2)) for the MRCA type at horizon n.

        The singleton chain starts as type 2 and can switch to type 1 at
        most once; the switch at generation m+1 given a type-2 singleton
        at m has probability a21*Q1(n-m-1)/Q21(n-m), so summing over the
        switch time gives P(T = 1).
        """
        self._check_range(0, n)
        if n < 2:
            return 0.0, 1.0
        _, p2 = self.singleton_probabilities(n)
        t = self.tables
        m = np.arange(0, n - 1)
        switch = self.params.a21 * t.q1[n - m - 1] / t.q21[n - m]
        p_type1 = float(np.sum(p2[: n - 1] * switch))
        return p_type1, 1.0 - p_type1

    # -- time scales -----------------------------------------------------

    def hstar(self, n: int) -> int:
        """Smallest h with (a1*a21/(1-a1)) * h * Q1(h) <= Q2(n).

        The curve h*Q1(h) rises briefly and then decays like a negative
        power, so the search runs on the post-peak branch.
        """
        if self.params.regime is not Regime.Q1_NEGLIGIBLE:
            raise RegimeError("hstar is defined only in regime Q1_NEGLIGIBLE")
        self._check_range(0, n)
        if self._hstar_curve is None:
            a1 = self.params.alpha1
            h = np.arange(1, self.horizon + 1, dtype=np.float64)
            self._hstar_curve = (
                (a1 * self.params.a21 / (1.0 - a1)) * h * self.tables.q1[1:]
            )
            self._hstar_peak = int(np.argmax(self._hstar_curve))
        curve, peak = self._hstar_curve, self._hstar_peak
        assert peak is not None
        target = self.tables.q2[n]
        if curve[peak] <= target:
            return 1 if curve[0] <= target else peak + 1
        tail = curve[peak:]
        idx = int(np.argmax(tail <= target))
        if tail[idx] > target:
            raise RangeError(
                f"hstar({n}) search needs table values beyond horizon {self.horizon}"
            )
        return peak + idx + 1

    def gstar(self, n: int) -> int:
        """Smallest g with Q2(g) <= Q21(n)."""
        if self.params.regime is not Regime.Q2_NEGLIGIBLE:
            raise RegimeError("gstar is defined only in regime Q2_NEGLIGIBLE")
        self._check_range(0, n)
        target = self.tables.q21[n]
        idx = int(np.searchsorted(-self.tables.q2, -target, side="left"))
        if idx > self.horizon:
            raise RangeError(
                f"gstar({n}) search needs table values beyond horizon {self.horizon}"
            )
        return idx

    # -- two-time joint ----------------------------------------------------

    def two_time_transform_deficit(
        self,
        k0: int,
        k1: int,
        n: int,
        u_first: tuple[float, float],
        u_second: tuple[float, float],
    ) -> float:
        """Joint transform with both argument pairs given as deficits."""
        if not 0 <= k0 < k1 <= n <= self.horizon:
            raise RangeError(
                f"need 0 <= k0 < k1 <= n <= horizon, got ({k0}, {k1}, {n})"
            )
        if u_first == (0.0, 0.0):
            # identity first factor: the composition collapses to one time
            return self.reduced_transform_deficit(k1, n, *u_second).value
        if u_second == (0.0, 0.0):
            return self.reduced_transform_deficit(k0, n, *u_first).value
        inner1_def = self.type1_reduced_transform_deficit(
            k1 - k0, n - k0, u_second[0]
        )
        inner2_def = 1.0 - self.reduced_transform_deficit(
            k1 - k0, n - k0, *u_second
        ).value
        # deficit of a product: 1 - (1-u)*inner = u + (1-u)*(1-inner)
        u1 = u_first[0] + (1.0 - u_first[0]) * inner1_def
        u2 = u_first[1] + (1.0 - u_first[1]) * inner2_def
        return self.reduced_transform_deficit(k0, n, u1, u2).value

    def two_time_transform(
        self,
        k0: int,
        k1: int,
        n: int,
        s_first: tuple[float, float],
        s_second: tuple[float, float],
    ) -> float:
        """E[S0**Z(k0,n) * S1**Z(k1,n) | Z(n) != 0, start e2].

        Computed by the Markov composition of the reduced process: the
        inner conditional transform at k1 given the generation-k0 state is
        folded into the outer single-time transform at k0.
        """
        for s in (*s_first, *s_second):
            if not 0.0 <= s <= 1.0:
                raise RangeError(f"transform arguments must lie in [0, 1], got {s}")
        return self.two_time_transform_deficit(
            k0,
            k1,
            n,
            (1.0 - s_first[0], 1.0 - s_first[1]),
            (1.0 - s_second[0], 1.0 - s_second[1]),
        )

    # -- diagnostics -------------------------------------------------------

    def asymptotics_diagnostics(
        self, n: int, trick_m: int | None = None, trick_lambda: float = 2.0
    ) -> DiagnosticsReport:
        """Raw survival-asymptotics ratios at horizon n (no pass/fail)."""
        self._check_range(0, n)
        t = self.tables
        p = self.params
        if trick_m is None:
            trick_m = max(1, n // 64)
        if trick_m > n:
            raise RangeError(f"trick_m={trick_m} exceeds n={n}")
        ratios = []
        for alpha, q in ((p.alpha1, t.q1), (p.alpha2, t.q2)):
            u = np.array([-np.expm1(-trick_lambda * q[n])])
            _kernels.iterate_mono(alpha, u, trick_m)
            ratios.append(float(u[0]) / (trick_lambda * q[n]))
        e2 = 1.0 + p.alpha2
        return DiagnosticsReport(
            n=n,
            q21_over_q2=float(t.q21[n] / t.q2[n]),
            q21_power_over_a21_q1=float(t.q21[n] ** e2 / (e2 * p.a21 * t.q1[n])),
            survival_norm_type1=float(
                p.alpha1 * n * t.q1[n] ** p.alpha1 / (1.0 + p.alpha1)
            ),
            survival_norm_type2=float(p.alpha2 * n * t.q2[n] ** p.alpha2 / e2),
            trick_ratio_type1=ratios[0],
            trick_ratio_type2=ratios[1],
            trick_m=trick_m,
            trick_lambda=trick_lambda,
        )


# ---------------------------------------------------------------------------
# Truncated-support family: the brute-force cross-check route.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedFamily:
    """Offspring family with support capped at ``kmax``, mass renormalized.

    Used to validate the iteration wiring against an independent
    population-distribution enumeration; the truncation deliberately
    removes the heavy tails so both routes are exactly computable.
    """

    p1: np.ndarray          # type-1 pmf over k = 0..kmax
    p2_zero: float          # P(no children | type 2)
    p2_one: float           # P(one type-1 child | type 2)
    p2_tail: np.ndarray     # P(k type-2 children | type 2), k = 0..kmax

    @classmethod
    def from_params(cls, params: ModelParams, kmax: int = 8) -> "TruncatedFamily":
        p1 = type1_pmf_array(params, kmax)
        p1 = p1 / p1.sum()
        p00, p10, tail = type2_pmf_table(params, kmax)
        total = p00 + p10 + tail.sum()
        return cls(
            p1=p1, p2_zero=p00 / total, p2_one=p10 / total, p2_tail=tail / total
        )

    def f1(self, x: float) -> float:
        return float(np.polynomial.polynomial.polyval(x, self.p1))

    def f21(self, x: float, y: float) -> float:
        return (
            self.p2_zero
            + self.p2_one * x
            + float(np.polynomial.polynomial.polyval(y, self.p2_tail))
        )


class TruncatedEngine:
    """Direct-space transform iteration for a truncated family.

    Mirrors the production engine's wiring (one-generation composition with
    the type-1 iterate read before its own update, then the conditioning
    division) but evaluates the generating functions as explicit
    polynomial sums.
    """

    def __init__(self, family: TruncatedFamily, horizon: int):
        self.family = family
        self.horizon = horizon
        f1_at_zero = [0.0]
        f21_at_zero = [0.0]
        x, y = 0.0, 0.0
        for _ in range(horizon):
            x, y = family.f1(x), family.f21(x, y)
            f1_at_zero.append(x)
            f21_at_zero.append(y)
        self.q1 = 1.0 - np.array(f1_at_zero)
        self.q21 = 1.0 - np.array(f21_at_zero)

    def pgf_iterates(self, m: int, s1: float, s2: float) -> tuple[float, float]:
        """(F1(m; s1), F21(m; (s1, s2))) by direct composition."""
        x, y = s1, s2
        for _ in range(m):
            x, y = self.family.f1(x), self.family.f21(x, y)
        return x, y

    def reduced_transform(self, m: int, n: int, s1: float, s2: float) -> float:
        if not 0 <= m <= n <= self.horizon:
            raise RangeError(f"need 0 <= m <= n <= horizon, got ({m}, {n})")
        x1 = 1.0 - (1.0 - s1) * self.q1[n - m]
        x2 = 1.0 - (1.0 - s2) * self.q21[n - m]
        _, y = self.pgf_iterates(m, x1, x2)
        return 1.0 - (1.0 - y) / self.q21[n]


class PopulationDP:
    """Exact population-distribution enumeration for a truncated family.

    Maintains the full joint pmf of (Z1(g), Z2(g)) as coefficient arrays
    (a polynomial in two variables), advancing one generation at a time by
    convolution powers of the single-particle offspring polynomials.
    States beyond ``cap`` particles of either type are dropped; their
    contribution to any transform evaluated at arguments bounded away
    from 1 is smaller than max(x)**cap.
    """

    def __init__(self, family: TruncatedFamily, horizon: int, cap: int = 768):
        self.family = family
        self.cap = cap
        self.type1_polys: list[np.ndarray] = []
        self.joint_polys: list[np.ndarray] = []
        p1_poly = np.zeros(2)
        p1_poly[1] = 1.0
        joint = np.zeros((1, 2))
        joint[0, 1] = 1.0
        self.type1_polys.append(p1_poly)
        self.joint_polys.append(joint)
        for _ in range(horizon):
            p1_poly = self._advance_type1(p1_poly)
            joint = self._advance_joint(joint)
            self.type1_polys.append(p1_poly)
            self.joint_polys.append(joint)

    def _advance_type1(self, poly: np.ndarray) -> np.ndarray:
        fam = self.family
        out = np.zeros(1)
        out[0] = fam.p1[0]
        power = np.ones(1)
        for k in range(1, fam.p1.shape[0]):
            power = np.convolve(power, poly)[: self.cap + 1]
            if fam.p1[k] != 0.0:
                out = _poly_add(out, fam.p1[k] * power)
        return out

    def _advance_joint(self, joint: np.ndarray) -> np.ndarray:
        fam = self.family
        out = np.zeros((1, 1))
        out[0, 0] = fam.p2_zero
        type1 = self.type1_polys[-1]  # one fewer generations than the target
        out = _poly_add2(out, fam.p2_one * type1[: self.cap + 1, None])
        power = np.ones((1, 1))
        for k in range(1, fam.p2_tail.shape[0]):
            power = fftconvolve(power, joint)[: self.cap + 1, : self.cap + 1]
            if fam.p2_tail[k] != 0.0:
                out = _poly_add2(out, fam.p2_tail[k] * power)
        return out

    def q1(self, n: int) -> float:
        return 1.0 - float(self.type1_polys[n][0])

    def q21(self, n: int) -> float:
        return 1.0 - float(self.joint_polys[n][0, 0])

    def evaluate_joint(self, n: int, x1: float, x2: float) -> float:
        c = self.joint_polys[n]
        pow1 = np.power(x1, np.arange(c.shape[0]))
        pow2 = np.power(x2, np.arange(c.shape[1]))
        return float(pow1 @ c @ pow2)

    def evaluate_type1(self, n: int, x1: float) -> float:
        return float(np.polynomial.polynomial.polyval(x1, self.type1_polys[n]))

    def reduced_transform(self, m: int, n: int, s1: float, s2: float) -> float:
        """Conditioned transform assembled purely from enumerated pmfs."""
        x1 = 1.0 - (1.0 - s1) * self.q1(n - m)
        x2 = 1.0 - (1.0 - s2) * self.q21(n - m)
        return 1.0 - (1.0 - self.evaluate_joint(m, x1, x2)) / self.q21(n)


def _poly_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] < b.shape[0]:
        a, b = b, a
    out = a.copy()
    out[: b.shape[0]] += b
    return out


def _poly_add2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    rows = max(a.shape[0], b.shape[0])
    cols = max(a.shape[1], b.shape[1])
    out = np.zeros((rows, cols))
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out
