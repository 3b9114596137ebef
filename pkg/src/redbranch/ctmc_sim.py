"""Exact-event simulation of the limiting continuous-time processes.

Four homogeneous Markov branching processes arise as reduced-tree limits:

  X  monotype type-2, rate 1, polynomial offspring with exponent 1+alpha2
  Y  two-type: type-2 at rate 1+1/alpha2 either emits one sterile immortal
     type-1 particle (weight 1/(1+alpha2)) or splits; type-1 is inert
  V  monotype type-1, rate 1, offspring exponent gamma1 = 1+alpha1(1+alpha2)
  W  two-type: type-1 at rate 1 splits (exponent 1+alpha1); type-2 at rate
     kappa either emits one type-1 child (weight sigma*a21/(b*kappa)) or
     splits (weight b**alpha2/kappa)

Populations are exchangeable within a type, so paths are simulated on the
counts (n1, n2) with Gillespie's method: exponential waiting times at the
total event rate, the event type chosen proportionally to per-type rates.
None of these processes can die out (every event preserves or grows the
population), but heavy-tailed splits can explode the counts, so paths carry
a population cap and a truncation flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError, RegimeError
from .offspring_models import (
    ModelParams,
    Regime,
    StableOffspringLaw,
    stable_law,
    w_mixture_weights,
)

__all__ = [
    "CtmcSpec",
    "CtmcPath",
    "build_spec",
    "gillespie",
    "sample_paths",
    "empirical_pgf",
    "w_first_branching_sample",
]

DEFAULT_PATH_CAP = 10**6


@dataclass(frozen=True)
class CtmcSpec:
    """Rates, offspring laws and mixture weights for one limit process.

    ``mu1``/``mu2`` are None for inactive types; ``p_type1_child`` is the
    probability that a type-2 event emits a single type-1 particle instead
    of splitting.
    """

    process_id: str
    params: ModelParams
    start: tuple[int, int]
    mu1: float | None
    mu2: float | None
    type1_law: StableOffspringLaw | None
    type2_law: StableOffspringLaw | None
    p_type1_child: float


def build_spec(process_id: str, params: ModelParams) -> CtmcSpec:
    a1, a2 = params.alpha1, params.alpha2
    if process_id == "X":
        return CtmcSpec(
            process_id, params, (0, 1), None, 1.0, None, stable_law(1.0 + a2), 0.0
        )
    if process_id == "Y":
        return CtmcSpec(
            process_id,
            params,
            (0, 1),
            None,
            1.0 + 1.0 / a2,
            None,
            stable_law(1.0 + a2),
            1.0 / (1.0 + a2),
        )
    if process_id == "V":
        gamma1 = params.gamma1
        if gamma1 > 2.0:
            raise DomainError(
                f"V offspring exponent gamma1={gamma1:.4g} > 2: the polynomial "
                "family is a probability law only for gamma1 <= 2"
            )
        return CtmcSpec(process_id, params, (1, 0), 1.0, None, stable_law(gamma1), None, 0.0)
    if process_id == "W":
        if params.regime is not Regime.INTERMEDIATE_VASAG or params.kappa is None:
            raise RegimeError("process W requires intermediate-regime parameters")
        p_child, p_split = w_mixture_weights(params)
        if abs(p_child + p_split - 1.0) > 1e-12:
            raise DomainError("W mixture weights do not sum to 1")
        return CtmcSpec(
            process_id,
            params,
            (0, 1),
            1.0,
            params.kappa,
            stable_law(1.0 + a1),
            stable_law(1.0 + a2),
            p_child,
        )
    raise DomainError(f"unknown process id {process_id!r}")


@dataclass
class CtmcPath:
    """Event times and post-event counts; constant between events."""

    times: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    t_max: float
    truncated: bool

    def state_at(self, t: float) -> tuple[int, int]:
        if t > self.t_max:
            raise RangeError(f"t={t} beyond simulated horizon {self.t_max}")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.n1[i]), int(self.n2[i])


def gillespie(
    spec: CtmcSpec,
    t_max: float,
    rng: np.random.Generator,
    population_cap: int = DEFAULT_PATH_CAP,
) -> CtmcPath:
    """One exact-event path on [0, t_max]."""
    if t_max <= 0.0:
        raise RangeError(f"t_max must be positive, got {t_max}")
    n1, n2 = spec.start
    times = [0.0]
    h1 = [n1]
    h2 = [n2]
    t = 0.0
    truncated = False
    while True:
        r1 = spec.mu1 * n1 if spec.mu1 is not None else 0.0
        r2 = spec.mu2 * n2 if spec.mu2 is not None else 0.0
        rate = r1 + r2
        if rate == 0.0:
            break  # frozen state (e.g. Y after its only particle went sterile)
        t += rng.exponential(1.0 / rate)
        if t >= t_max:
            break
        if rng.random() * rate < r1:
            assert spec.type1_law is not None
            n1 += spec.type1_law.sample(rng) - 1
        elif spec.p_type1_child > 0.0 and rng.random() < spec.p_type1_child:
            n1 += 1
            n2 -= 1
        else:
            assert spec.type2_law is not None
            n2 += spec.type2_law.sample(rng) - 1
        times.append(t)
        h1.append(n1)
        h2.append(n2)
        if n1 + n2 > population_cap:
            truncated = True
            break
    return CtmcPath(
        times=np.array(times),
        n1=np.array(h1, dtype=np.int64),
        n2=np.array(h2, dtype=np.int64),
        t_max=t_max,
        truncated=truncated,
    )


def sample_paths(
    spec: CtmcSpec,
    t_max: float,
    count: int,
    rng: np.random.Generator,
    population_cap: int = DEFAULT_PATH_CAP,
) -> list[CtmcPath]:
    return [gillespie(spec, t_max, rng, population_cap) for _ in range(count)]


def empirical_pgf(
    paths: list[CtmcPath], t: float, s1: float, s2: float
) -> tuple[float, float, int, int]:
    """(estimate, stderr, paths used, paths excluded) of E[s1**n1 s2**n2].

    Paths truncated before the query time are excluded (and counted); the
    caller is responsible for checking the exclusion rate.
    """
    vals = []
    excluded = 0
    for p in paths:
        if p.truncated and p.times[-1] <= t:
            excluded += 1
            continue
        n1, n2 = p.state_at(t)
        vals.append(s1**n1 * s2**n2)
    arr = np.array(vals)
    n = arr.shape[0]
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, stderr, n, excluded


def w_first_branching_sample(
    spec: CtmcSpec, rng: np.random.Generator, size: int | None = None
):
    """Sample (T, kind) of the first true branching of the W tree root.

    kind 2: the root type-2 particle splits, T ~ Exp(kappa); kind 1: it
    first emits a type-1 particle which later splits, T ~ Exp(kappa) +
    Exp(1).  The kind is the limiting MRCA type and T its death time.
    """
    if spec.process_id != "W":
        raise DomainError("first-branching sampler is defined for process W")
    kappa = spec.params.kappa
    assert kappa is not None
    scalar = size is None
    n = 1 if scalar else int(size)
    p_child = spec.p_type1_child
    kind = np.where(rng.random(n) < p_child, 1, 2).astype(np.int64)
    t = rng.exponential(1.0 / kappa, n)
    emitted = kind == 1
    n_emit = int(emitted.sum())
    if n_emit:
        t[emitted] += rng.exponential(1.0, n_emit)
    if scalar:
        return float(t[0]), int(kind[0])
    return t, kind
