"""Concrete two-type critical offspring family with heavy tails.

Type-1 particles reproduce with generating function

    F1(s) = s + (1-s)**(1+alpha1) / (1+alpha1),

type-2 particles with

    F21(s1, s2) = s2 + (1-s2)**(1+alpha2) / (1+alpha2) - a21*(1-s1),

so both types are exactly critical, type-2 parents emit on average ``a21``
type-1 children, and offspring tails decay like k**-(2+alpha), giving
infinite variance for alpha < 1.  The module also provides the shared
polynomial offspring family pmf(k) ~ C(gamma, k) * (-1)**k, k >= 2, used by
the limiting continuous-time processes, together with exact samplers.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._rootfind import survival_ratio_root
from .errors import DomainError, OutOfRangeError

__all__ = [
    "Regime",
    "ModelParams",
    "StableOffspringLaw",
    "validate_params",
    "pgf_type1",
    "pgf_type21",
    "offspring_pmf_type1",
    "offspring_pmf_type2",
    "sample_type1",
    "sample_type2",
    "sample_stable_offspring",
    "stable_law",
    "type1_pmf_array",
    "type2_pmf_table",
    "type1_series_mean",
    "type2_series_mean",
    "w_mixture_weights",
]

# Relative slack when deciding whether 1/alpha1 equals 1 + 1/alpha2; exact
# float comparison would misclassify pairs like (1/3, 1/2).
_REGIME_RTOL = 1e-9


class Regime(str, Enum):
    """Which survival probability dominates asymptotically."""

    Q1_NEGLIGIBLE = "Q1_NEGLIGIBLE"          # 1/alpha1 > 1 + 1/alpha2
    INTERMEDIATE_VASAG = "INTERMEDIATE_VASAG"  # 1/alpha1 = 1 + 1/alpha2
    Q2_NEGLIGIBLE = "Q2_NEGLIGIBLE"          # 1/alpha1 < 1 + 1/alpha2


@dataclass(frozen=True)
class ModelParams:
    """Validated offspring-law parameters plus derived regime constants.

    ``sigma``, ``b`` and ``kappa`` are populated only in the intermediate
    regime: sigma is the limit of n*Q1(n)/Q2(n), b the root of
    x**(1+alpha2) - x = sigma*alpha2*a21 (so Q21 ~ b*Q2), and kappa the
    type-2 event rate ((1+alpha2)*b**alpha2 - 1)/alpha2 of the limiting
    two-type process.  ``gamma1`` = 1 + alpha1*(1+alpha2) is the offspring
    exponent of the monotype limit process that appears in the
    Q2-negligible regime.
    """

    alpha1: float
    alpha2: float
    a21: float
    regime: Regime
    gamma1: float
    sigma: float | None = None
    b: float | None = None
    kappa: float | None = None


def validate_params(alpha1: float, alpha2: float, a21: float) -> ModelParams:
    """Check admissibility bounds and derive the regime constants.

    Raises OutOfRangeError naming the violated bound.  The bound
    a21 <= 1/(1+alpha2) keeps the type-2 zero-offspring probability
    nonnegative, i.e. makes F21 a genuine probability generating function.
    """
    for name, value in (("alpha1", alpha1), ("alpha2", alpha2), ("a21", a21)):
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise OutOfRangeError(f"{name} must be a finite number, got {value!r}")
    if not 0.0 < alpha1 <= 1.0:
        raise OutOfRangeError(f"alpha1 must lie in (0, 1], got {alpha1}")
    if not 0.0 < alpha2 <= 1.0:
        raise OutOfRangeError(f"alpha2 must lie in (0, 1], got {alpha2}")
    bound = 1.0 / (1.0 + alpha2)
    if not 0.0 < a21 <= bound:
        raise OutOfRangeError(
            f"a21 must lie in (0, 1/(1+alpha2)] = (0, {bound:.12g}]; "
            f"a21={a21} would make the zero-offspring probability "
            f"1/(1+alpha2) - a21 negative"
        )

    inv1 = 1.0 / alpha1
    inv2 = 1.0 + 1.0 / alpha2
    gamma1 = 1.0 + alpha1 * (1.0 + alpha2)
    diff = inv1 - inv2
    if abs(diff) <= _REGIME_RTOL * (1.0 + inv1 + inv2):
        sigma = ((1.0 + alpha1) / alpha1) ** (1.0 / alpha1) / (
            (1.0 + alpha2) / alpha2
        ) ** (1.0 / alpha2)
        b = survival_ratio_root(alpha2, sigma * alpha2 * a21)
        kappa = ((1.0 + alpha2) * b**alpha2 - 1.0) / alpha2
        return ModelParams(
            alpha1=alpha1,
            alpha2=alpha2,
            a21=a21,
            regime=Regime.INTERMEDIATE_VASAG,
            gamma1=gamma1,
            sigma=sigma,
            b=b,
            kappa=kappa,
        )
    regime = Regime.Q1_NEGLIGIBLE if diff > 0 else Regime.Q2_NEGLIGIBLE
    if regime is Regime.Q1_NEGLIGIBLE and alpha1 >= 1.0:
        raise OutOfRangeError("alpha1 must be < 1 when 1/alpha1 > 1 + 1/alpha2")
    return ModelParams(
        alpha1=alpha1, alpha2=alpha2, a21=a21, regime=regime, gamma1=gamma1
    )


def pgf_type1(params: ModelParams, s: float) -> float:
    """F1(s) = s + (1-s)**(1+alpha1)/(1+alpha1) on [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    e1 = 1.0 + params.alpha1
    return s + (1.0 - s) ** e1 / e1


def pgf_type21(params: ModelParams, s1: float, s2: float) -> float:
    """F21(s1, s2) = s2 + (1-s2)**(1+alpha2)/(1+alpha2) - a21*(1-s1)."""
    if not (0.0 <= s1 <= 1.0 and 0.0 <= s2 <= 1.0):
        raise DomainError(f"(s1, s2) must lie in the unit square, got ({s1}, {s2})")
    e2 = 1.0 + params.alpha2
    return s2 + (1.0 - s2) ** e2 / e2 - params.a21 * (1.0 - s1)


class StableOffspringLaw:
    """Offspring counts k >= 2 with pmf(k) = c * C(gamma, k) * (-1)**k.

    ``gamma`` in (1, 2]; the normalized law has c = 1/(gamma-1).  The pmf
    obeys pmf(k+1) = pmf(k)*(k-gamma)/(k+1), which generates the cached
    inverse-CDF table without touching gamma functions.  The exact tail

        P(N > k) = c*(gamma-1) * prod_{j=2..k} (j-gamma)/j
                 = c*(gamma-1) * Gamma(k+1-gamma) / (Gamma(2-gamma)*Gamma(k+1))

    provides an analytic handle past the table, so sampling is exact for
    arbitrarily deep tail draws.  The table grows lazily by doubling;
    growth is serialized with a lock, reads are safe concurrently.
    """

    _TABLE_START = 4096
    _TABLE_MAX = 1 << 22

    def __init__(self, gamma: float, normalizer: float | None = None):
        if not 1.0 < gamma <= 2.0:
            raise DomainError(f"gamma must lie in (1, 2], got {gamma}")
        self.gamma = float(gamma)
        self.normalizer = (
            float(normalizer) if normalizer is not None else 1.0 / (gamma - 1.0)
        )
        self._lock = threading.Lock()
        self._build(self._TABLE_START)

    def _build(self, size: int) -> None:
        # tail[j] = P(N > j+2); compensated recurrence keeps the products
        # monotone and positive all the way down.
        g = self.gamma
        total = self.normalizer * (g - 1.0)
        k = np.arange(2, size + 2, dtype=np.float64)
        factors = 1.0 - g / k
        tail = total * np.cumprod(factors)
        self._tail_table = tail
        self._kmax = size + 1  # tail_table[-1] == P(N > kmax)

    def _extend(self) -> bool:
        with self._lock:
            size = self._tail_table.shape[0]
            if 2 * size > self._TABLE_MAX:
                return False
            self._build(2 * size)
        return True

    def pmf(self, k: int) -> float:
        if k < 2:
            return 0.0
        g = self.gamma
        p = self.normalizer * g * (g - 1.0) / 2.0
        for j in range(2, k):
            p *= (j - g) / (j + 1.0)
        return p

    def tail(self, k: int) -> float:
        """P(N > k) for k >= 1, exact via log-gamma."""
        if k <= 1:
            return self.normalizer * (self.gamma - 1.0)
        g = self.gamma
        if g == 2.0:
            return 0.0
        log_t = (
            math.lgamma(k + 1.0 - g)
            - math.lgamma(2.0 - g)
            - math.lgamma(k + 1.0)
        )
        return self.normalizer * (g - 1.0) * math.exp(log_t)

    def mean(self) -> float:
        """Normalized-law mean gamma/(gamma-1), i.e. g'(1-)."""
        return self.normalizer * self.gamma

    def tail_sum(self, k: int) -> float:
        """Sum of P(N > j) over j > k, exact via log-gamma."""
        g = self.gamma
        if g == 2.0:
            return 0.0
        log_s = math.lgamma(k + 2.0 - g) - math.lgamma(2.0 - g) - math.lgamma(k + 1.0)
        return self.normalizer * math.exp(log_s)

    def _tail_invert(self, v: float) -> int:
        # Smallest k with P(N > k) <= v, for v below the cached table.
        k_lo = self._kmax
        k_hi = max(2 * k_lo, 16)
        while self.tail(k_hi) > v:
            k_lo = k_hi
            k_hi *= 2
            if k_hi > 1 << 62:
                raise DomainError("tail inversion overflow")
        while k_hi - k_lo > 1:
            mid = (k_lo + k_hi) // 2
            if self.tail(mid) <= v:
                k_hi = mid
            else:
                k_lo = mid
        return k_hi

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Exact draws; scalar when size is None, else an int64 array."""
        scalar = size is None
        n = 1 if scalar else int(size)
        v = rng.random(n)
        if self.gamma == 2.0:
            out = np.full(n, 2, dtype=np.int64)
            return int(out[0]) if scalar else out
        # v is the tail coordinate: N = min{k >= 2: P(N > k) <= v}.  Working
        # with the tail rather than the CDF keeps full float resolution for
        # deep-tail draws (v near 0 instead of u near 1).
        v *= self.normalizer * (self.gamma - 1.0)
        tail = self._tail_table
        idx = np.searchsorted(-tail, -v, side="left")
        while True:
            deep = idx >= tail.shape[0]
            if not deep.any() or not self._extend():
                break
            tail = self._tail_table
            idx[deep] = np.searchsorted(-tail, -v[deep], side="left")
        out = idx.astype(np.int64) + 2
        for row in np.nonzero(idx >= tail.shape[0])[0]:
            out[row] = self._tail_invert(float(v[row]))
        return int(out[0]) if scalar else out

    def pmf_array(self, kmax: int) -> np.ndarray:
        """pmf(k) for k = 0..kmax as one vectorized recurrence pass."""
        out = np.zeros(kmax + 1)
        if kmax < 2:
            return out
        g = self.gamma
        k = np.arange(2, kmax + 1, dtype=np.float64)
        # pmf(2) = c*g*(g-1)/2, then pmf(k+1)/pmf(k) = (k-g)/(k+1)
        seed = self.normalizer * g * (g - 1.0) / 2.0
        ratios = np.ones(kmax - 1)
        ratios[1:] = (k[:-1] - g) / (k[:-1] + 1.0)
        out[2:] = seed * np.cumprod(ratios)
        return out


_LAW_CACHE: dict[float, StableOffspringLaw] = {}
_LAW_CACHE_LOCK = threading.Lock()


def stable_law(gamma: float) -> StableOffspringLaw:
    """Shared normalized law instance for a given exponent."""
    with _LAW_CACHE_LOCK:
        law = _LAW_CACHE.get(gamma)
        if law is None:
            law = StableOffspringLaw(gamma)
            _LAW_CACHE[gamma] = law
    return law


def sample_stable_offspring(gamma: float, rng: np.random.Generator, size: int | None = None):
    """Draw from the normalized polynomial family, support k >= 2."""
    return stable_law(gamma).sample(rng, size)


def offspring_pmf_type1(params: ModelParams, k: int) -> float:
    """P(type-1 parent has k children): 1/(1+alpha1) at 0, heavy tail at k>=2."""
    if k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k}")
    a1 = params.alpha1
    if k == 0:
        return 1.0 / (1.0 + a1)
    if k == 1:
        return 0.0
    # pmf(k) = C(1+alpha1, k) * (-1)**k / (1+alpha1), via the ratio recurrence
    # seeded at pmf(2) = alpha1/2.
    p = a1 / 2.0
    for j in range(2, k):
        p *= (j - 1.0 - a1) / (j + 1.0)
    return p


def offspring_pmf_type2(params: ModelParams, k1: int, k2: int) -> float:
    """P(type-2 parent has k1 type-1 and k2 type-2 children).

    Support is {(0,0), (1,0)} plus {(0,k): k >= 2}; every other pattern has
    probability zero in this family.
    """
    if k1 < 0 or k2 < 0:
        raise DomainError(f"(k1, k2) must be nonnegative integers, got ({k1}, {k2})")
    a2 = params.alpha2
    if k1 == 0 and k2 == 0:
        return 1.0 / (1.0 + a2) - params.a21
    if k1 == 1 and k2 == 0:
        return params.a21
    if k1 == 0 and k2 >= 2:
        p = a2 / 2.0
        for j in range(2, k2):
            p *= (j - 1.0 - a2) / (j + 1.0)
        return p
    return 0.0


def _type1_zero_probability(params: ModelParams) -> float:
    return 1.0 / (1.0 + params.alpha1)


def sample_type1(params: ModelParams, rng: np.random.Generator, size: int | None = None):
    """Exact type-1 offspring counts: 0 or a stable draw with k >= 2."""
    scalar = size is None
    n = 1 if scalar else int(size)
    out = np.zeros(n, dtype=np.int64)
    hit = rng.random(n) >= _type1_zero_probability(params)
    n_hit = int(hit.sum())
    if n_hit:
        out[hit] = stable_law(1.0 + params.alpha1).sample(rng, n_hit)
    return int(out[0]) if scalar else out


def sample_type2(params: ModelParams, rng: np.random.Generator, size: int | None = None):
    """Exact type-2 offspring vectors (count1, count2).

    At most one component is nonzero: either a single type-1 child
    (probability a21) or k >= 2 type-2 children.
    """
    scalar = size is None
    n = 1 if scalar else int(size)
    p00 = 1.0 / (1.0 + params.alpha2) - params.a21
    u = rng.random(n)
    k1 = np.zeros(n, dtype=np.int64)
    k2 = np.zeros(n, dtype=np.int64)
    emit = (u >= p00) & (u < p00 + params.a21)
    split = u >= p00 + params.a21
    k1[emit] = 1
    n_split = int(split.sum())
    if n_split:
        k2[split] = stable_law(1.0 + params.alpha2).sample(rng, n_split)
    if scalar:
        return int(k1[0]), int(k2[0])
    return k1, k2


def type1_pmf_array(params: ModelParams, kmax: int) -> np.ndarray:
    """Type-1 pmf over k = 0..kmax (zero mass at k = 1)."""
    a1 = params.alpha1
    out = stable_law(1.0 + a1).pmf_array(kmax) * (a1 / (1.0 + a1))
    out[0] = 1.0 / (1.0 + a1)
    return out


def type2_pmf_table(params: ModelParams, kmax: int) -> tuple[float, float, np.ndarray]:
    """(P(0,0), P(1,0), array of P(0,k) for k = 0..kmax)."""
    a2 = params.alpha2
    tail = stable_law(1.0 + a2).pmf_array(kmax) * (a2 / (1.0 + a2))
    return 1.0 / (1.0 + a2) - params.a21, params.a21, tail


def type1_series_mean(params: ModelParams, kmax: int = 1 << 20) -> float:
    """Offspring mean of the type-1 law: truncated series + exact tail.

    Criticality makes this identically 1; the truncated head uses the
    ratio-recurrence pmf while the remainder E[N; N > kmax] is assembled
    from the log-gamma tail, so agreement validates both routes.
    """
    law = stable_law(1.0 + params.alpha1)
    pmf = type1_pmf_array(params, kmax)
    k = np.arange(kmax + 1, dtype=np.float64)
    weight = params.alpha1 / (1.0 + params.alpha1)
    tail = weight * ((kmax + 1) * law.tail(kmax) + law.tail_sum(kmax))
    return float(np.dot(k, pmf)) + tail


def type2_series_mean(params: ModelParams, kmax: int = 1 << 20) -> float:
    """Mean number of type-2 children of a type-2 parent (identically 1)."""
    law = stable_law(1.0 + params.alpha2)
    _, _, pmf = type2_pmf_table(params, kmax)
    k = np.arange(kmax + 1, dtype=np.float64)
    weight = params.alpha2 / (1.0 + params.alpha2)
    tail = weight * ((kmax + 1) * law.tail(kmax) + law.tail_sum(kmax))
    return float(np.dot(k, pmf)) + tail


def w_mixture_weights(params: ModelParams) -> tuple[float, float]:
    """Type-2 event split for the intermediate-regime limit process.

    Returns (P(one type-1 child), P(k >= 2 type-2 children)); the weights
    are sigma*a21/(b*kappa) and b**alpha2/kappa and sum to 1 exactly by the
    defining equation of b.
    """
    if params.regime is not Regime.INTERMEDIATE_VASAG or params.b is None:
        raise DomainError("mixture weights require intermediate-regime parameters")
    assert params.sigma is not None and params.kappa is not None
    p_child = params.sigma * params.a21 / (params.b * params.kappa)
    p_split = params.b**params.alpha2 / params.kappa
    return p_child, p_split
