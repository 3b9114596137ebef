"""Conditioned Galton-Watson tree Monte Carlo with backward reduction.

Trees are simulated generation-synchronously and conditioned on survival
to generation n by rejection, which is unbiased and feasible at desk scale
(the engine's Q21(n) predicts the acceptance rate).  The reduced process
is extracted by marking every particle that has a marked child, starting
from the generation-n survivors; Z_i(m, n) counts marked type-i particles
at generation m.

The throughput-critical path batches many attempts into flat per-generation
arrays (attempt id, type, parent row) so each generation advances with a
handful of vectorized draws regardless of how many attempts are in flight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ExhaustedError, RangeError
from .offspring_models import ModelParams, stable_law

__all__ = [
    "GenealogyLog",
    "ReducedPath",
    "ReducedLawEstimate",
    "simulate_conditioned",
    "reduced_counts",
    "monte_carlo_reduced_law",
    "census_means",
]

DEFAULT_POPULATION_CAP = 10**7


@dataclass
class GenealogyLog:
    """One conditioned tree: per-generation type tags and parent rows.

    ``parents[g][j]`` indexes the row of particle j's parent in generation
    g-1; generation 0 holds the single root (parent -1).  ``attempts`` is
    the number of rejection attempts consumed to produce this log.
    """

    n: int
    start_type: int
    types: list[np.ndarray]
    parents: list[np.ndarray]
    attempts: int

    def census(self) -> np.ndarray:
        """(n+1, 2) array of raw per-generation type counts."""
        out = np.zeros((self.n + 1, 2), dtype=np.int64)
        for g, tp in enumerate(self.types):
            out[g, 0] = int((tp == 1).sum())
            out[g, 1] = int((tp == 2).sum())
        return out


@dataclass
class ReducedPath:
    """Reduced counts plus ancestor statistics for one conditioned tree.

    ``beta`` is the last generation m < n at which the reduced process is
    a single particle, ``mrca_type`` that particle's type, and ``delta2``
    the first generation with no reduced type-2 particles (None if type-2
    reduced particles persist through n).
    """

    z1: np.ndarray
    z2: np.ndarray
    beta: int
    mrca_type: int
    delta2: int | None


def _offspring_step(
    params: ModelParams, types: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Advance one generation; returns child types and parent row indices."""
    m = types.shape[0]
    u = rng.random(m)
    counts = np.zeros(m, dtype=np.int64)
    is_type1 = types == 1
    split1 = is_type1 & (u >= 1.0 / (1.0 + params.alpha1))
    n1 = int(split1.sum())
    if n1:
        counts[split1] = stable_law(1.0 + params.alpha1).sample(rng, n1)
    p00 = 1.0 / (1.0 + params.alpha2) - params.a21
    is_type2 = ~is_type1
    emit = is_type2 & (u >= p00) & (u < p00 + params.a21)
    split2 = is_type2 & (u >= p00 + params.a21)
    counts[emit] = 1
    n2 = int(split2.sum())
    if n2:
        counts[split2] = stable_law(1.0 + params.alpha2).sample(rng, n2)
    # each parent's children share one type: type-1 parents and emitting
    # type-2 parents produce type 1, splitting type-2 parents produce type 2
    child_type = np.where(is_type1 | emit, 1, 2).astype(np.int8)
    child_types = np.repeat(child_type, counts)
    child_parents = np.repeat(np.arange(m, dtype=np.int64), counts)
    return child_types, child_parents


def simulate_conditioned(
    params: ModelParams,
    n: int,
    start_type: int,
    rng: np.random.Generator,
    max_attempts: int = 10**6,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> GenealogyLog:
    """One tree drawn from the law conditioned on survival at generation n.

    Raises ExhaustedError after ``max_attempts`` rejections and
    CapacityError if a single generation exceeds ``population_cap``.
    """
    if n < 1:
        raise RangeError(f"n must be >= 1, got {n}")
    if start_type not in (1, 2):
        raise RangeError(f"start_type must be 1 or 2, got {start_type}")
    for attempt in range(1, max_attempts + 1):
        types = [np.array([start_type], dtype=np.int8)]
        parents = [np.array([-1], dtype=np.int64)]
        alive = True
        for _ in range(n):
            child_types, child_parents = _offspring_step(params, types[-1], rng)
            if child_types.shape[0] == 0:
                alive = False
                break
            if child_types.shape[0] > population_cap:
                raise CapacityError(
                    f"population {child_types.shape[0]} exceeds cap {population_cap}"
                )
            types.append(child_types)
            parents.append(child_parents)
        if alive:
            return GenealogyLog(
                n=n, start_type=start_type, types=types, parents=parents, attempts=attempt
            )
    raise ExhaustedError(
        f"no surviving tree in {max_attempts} attempts (n={n}); "
        "check Q21(n) before choosing n"
    )


def reduced_counts(log: GenealogyLog) -> ReducedPath:
    """Backward-mark survivors' ancestries and extract MRCA statistics."""
    n = log.n
    marked = np.ones(log.types[n].shape[0], dtype=bool)
    z1 = np.zeros(n + 1, dtype=np.int64)
    z2 = np.zeros(n + 1, dtype=np.int64)
    for g in range(n, 0, -1):
        tp = log.types[g]
        z1[g] = int(((tp == 1) & marked).sum())
        z2[g] = int(((tp == 2) & marked).sum())
        prev = np.zeros(log.types[g - 1].shape[0], dtype=bool)
        prev[log.parents[g][marked]] = True
        marked = prev
    tp0 = log.types[0]
    z1[0] = int(((tp0 == 1) & marked).sum())
    z2[0] = int(((tp0 == 2) & marked).sum())
    return _path_from_counts(z1, z2, n)


def _path_from_counts(z1: np.ndarray, z2: np.ndarray, n: int) -> ReducedPath:
    totals = z1 + z2
    singleton = np.nonzero(totals[:n] == 1)[0]
    beta = int(singleton[-1])
    mrca_type = 1 if z1[beta] == 1 else 2
    zeros2 = np.nonzero(z2 == 0)[0]
    delta2 = int(zeros2[0]) if zeros2.shape[0] else None
    return ReducedPath(z1=z1, z2=z2, beta=beta, mrca_type=mrca_type, delta2=delta2)


@dataclass
class ReducedLawEstimate:
    """Monte Carlo estimates of the conditioned reduced-process law.

    ``means[i, j]`` and ``stderrs[i, j]`` refer to m_values[i] and
    s_grid[j]; ``beta``, ``mrca_type`` and ``delta2`` hold one entry per
    replicate (delta2 = -1 when the type-2 line persists through n).
    """

    n: int
    m_values: list[int]
    s_grid: list[tuple[float, float]]
    means: np.ndarray
    stderrs: np.ndarray
    beta: np.ndarray
    mrca_type: np.ndarray
    delta2: np.ndarray
    replicates: int
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return self.replicates / self.attempts

    def beta_cdf(self, m: int) -> float:
        """Empirical P(beta_n <= m)."""
        return float((self.beta <= m).mean())

    def type_frequencies(self) -> tuple[float, float]:
        f1 = float((self.mrca_type == 1).mean())
        return f1, 1.0 - f1


def _simulate_batch(
    params: ModelParams,
    n: int,
    start_type: int,
    batch: int,
    rng: np.random.Generator,
    population_cap: int,
):
    """Flat per-generation arrays for ``batch`` simultaneous attempts."""
    att = [np.arange(batch, dtype=np.int64)]
    types = [np.full(batch, start_type, dtype=np.int8)]
    parents = [np.full(batch, -1, dtype=np.int64)]
    for _ in range(n):
        child_types, child_parents = _offspring_step(params, types[-1], rng)
        child_att = att[-1][child_parents]
        if child_att.shape[0]:
            top = int(np.bincount(child_att, minlength=batch).max())
            if top > population_cap:
                raise CapacityError(
                    f"attempt population {top} exceeds cap {population_cap}"
                )
        att.append(child_att)
        types.append(child_types)
        parents.append(child_parents)
        if child_types.shape[0] == 0:
            # every attempt extinct; later generations stay empty
            for _ in range(n - len(types) + 1):
                att.append(child_att)
                types.append(child_types)
                parents.append(child_parents)
            break
    return att, types, parents


def _batch_reduced_counts(
    att: list[np.ndarray],
    types: list[np.ndarray],
    parents: list[np.ndarray],
    n: int,
    batch: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(accepted ids, z1 matrix, z2 matrix) with rows ordered by attempt id."""
    accepted = np.unique(att[n])
    z1 = np.zeros((batch, n + 1), dtype=np.int64)
    z2 = np.zeros((batch, n + 1), dtype=np.int64)
    marked = np.ones(types[n].shape[0], dtype=bool)
    for g in range(n, 0, -1):
        tp, at = types[g], att[g]
        z1[:, g] = np.bincount(at[(tp == 1) & marked], minlength=batch)
        z2[:, g] = np.bincount(at[(tp == 2) & marked], minlength=batch)
        prev = np.zeros(types[g - 1].shape[0], dtype=bool)
        prev[parents[g][marked]] = True
        marked = prev
    tp, at = types[0], att[0]
    z1[:, 0] = np.bincount(at[(tp == 1) & marked], minlength=batch)
    z2[:, 0] = np.bincount(at[(tp == 2) & marked], minlength=batch)
    return accepted, z1[accepted], z2[accepted]


def monte_carlo_reduced_law(
    params: ModelParams,
    n: int,
    m_list: list[int],
    s_grid: list[tuple[float, float]],
    replicates: int,
    rng: np.random.Generator,
    start_type: int = 2,
    batch_size: int = 8192,
    max_attempts: int = 10**8,
    population_cap: int = DEFAULT_POPULATION_CAP,
) -> ReducedLawEstimate:
    """Estimate the conditioned reduced-law transforms and MRCA statistics.

    For each m and (s1, s2) the estimator is the empirical mean of
    s1**Z1(m,n) * s2**Z2(m,n) over conditioned replicates.
    """
    if replicates < 100:
        raise RangeError(f"replicates must be >= 100, got {replicates}")
    for m in m_list:
        if not 0 <= m <= n:
            raise RangeError(f"m={m} outside [0, {n}]")
    sums = np.zeros((len(m_list), len(s_grid)))
    sums_sq = np.zeros_like(sums)
    betas: list[np.ndarray] = []
    mrca_types: list[np.ndarray] = []
    delta2s: list[np.ndarray] = []
    got = 0
    attempts = 0
    s1v = np.array([s[0] for s in s_grid])
    s2v = np.array([s[1] for s in s_grid])
    while got < replicates:
        if attempts >= max_attempts:
            raise ExhaustedError(
                f"attempt budget {max_attempts} exhausted with {got} acceptances"
            )
        batch = min(batch_size, max_attempts - attempts)
        att, types, parents = _simulate_batch(
            params, n, start_type, batch, rng, population_cap
        )
        attempts += batch
        accepted, z1, z2 = _batch_reduced_counts(att, types, parents, n, batch)
        if accepted.shape[0] == 0:
            continue
        take = min(accepted.shape[0], replicates - got)
        # truncate the final batch so the replicate count is exact
        z1, z2 = z1[:take], z2[:take]
        if take < accepted.shape[0]:
            attempts -= batch - int(accepted[take - 1]) - 1  # unused tail attempts
        got += take
        for i, m in enumerate(m_list):
            vals = s1v[None, :] ** z1[:, m, None] * s2v[None, :] ** z2[:, m, None]
            sums[i] += vals.sum(axis=0)
            sums_sq[i] += (vals**2).sum(axis=0)
        totals = z1 + z2
        single = totals[:, :n] == 1
        beta = n - 1 - np.argmax(single[:, ::-1], axis=1)
        mt = np.where(z1[np.arange(take), beta] == 1, 1, 2)
        has0 = (z2 == 0).any(axis=1)
        d2 = np.where(has0, np.argmax(z2 == 0, axis=1), -1)
        betas.append(beta)
        mrca_types.append(mt)
        delta2s.append(d2)
    means = sums / replicates
    var = np.maximum(sums_sq / replicates - means**2, 0.0)
    stderrs = np.sqrt(var / replicates)
    return ReducedLawEstimate(
        n=n,
        m_values=list(m_list),
        s_grid=list(s_grid),
        means=means,
        stderrs=stderrs,
        beta=np.concatenate(betas),
        mrca_type=np.concatenate(mrca_types),
        delta2=np.concatenate(delta2s),
        replicates=replicates,
        attempts=attempts,
    )


def census_means(
    params: ModelParams,
    n: int,
    start_type: int,
    replicates: int,
    rng: np.random.Generator,
    batch_size: int = 8192,
) -> np.ndarray:
    """Unconditioned mean census E[Z_i(m)] estimates, shape (n+1, 2).

    Criticality check: the start type's mean stays 1 at every generation.
    """
    totals = np.zeros((n + 1, 2))
    done = 0
    while done < replicates:
        batch = min(batch_size, replicates - done)
        types = np.full(batch, start_type, dtype=np.int8)
        totals[0, 0] += int((types == 1).sum())
        totals[0, 1] += int((types == 2).sum())
        for g in range(1, n + 1):
            types, _ = _offspring_step(params, types, rng)
            totals[g, 0] += int((types == 1).sum())
            totals[g, 1] += int((types == 2).sum())
        done += batch
    return totals / replicates
