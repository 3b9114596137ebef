"""Batch harness: configs in, machine-readable reports out.

Experiments are described by INI-style configs (sections [experiment],
[params], [grid], [mc], [criteria]) and produce a CSV of ReportRow lines
plus a JSON summary.  Outputs are deterministic given (config, seed): all
randomness flows through counter-based streams keyed by (seed, row key),
and rows are sorted by key before writing.

Experiment kinds:

  qtable       model validity + survival-probability asymptotics
  reduced      finite-n reduced transforms vs their limit laws
  limits       PDE-solver identity checks
  mrca         finite-n ancestor statistics vs the limit laws
  tree-mc      conditioned-tree Monte Carlo vs the exact engine
  ctmc-mc      limit-process simulation vs Kolmogorov/closed-form PGFs
  convergence  two-time composition, transition-convention study, and the
               truncated-family brute-force oracle

Exit codes: 0 all enabled criteria pass, 1 criterion failure, 2 config
error, 3 resource exhaustion.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from . import ctmc_sim, gf_engine, limit_laws, tree_sim
from .errors import (
    CapacityError,
    ConfigError,
    ExhaustedError,
    RedbranchError,
)
from .offspring_models import (
    ModelParams,
    Regime,
    stable_law,
    type1_pmf_array,
    type1_series_mean,
    type2_pmf_table,
    type2_series_mean,
    validate_params,
    w_mixture_weights,
)
from .rng import make_stream

__all__ = ["ExperimentConfig", "ReportRow", "run", "main"]

KINDS = ("qtable", "reduced", "limits", "mrca", "tree-mc", "ctmc-mc", "convergence")

CSV_COLUMNS = [
    "experiment",
    "point",
    "inputs",
    "finite_value",
    "limit_value",
    "abs_error",
    "prior_error",
    "stderr",
    "status",
]


@dataclass
class ReportRow:
    experiment: str
    point: str
    inputs: str
    finite_value: float | None
    limit_value: float | None
    abs_error: float | None
    prior_error: float | None = None
    stderr: float | None = None
    status: str = "info"

    def key(self) -> tuple[str, str, str]:
        return (self.experiment, self.point, self.inputs)

    def as_record(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            return repr(float(x))

        return [
            self.experiment,
            self.point,
            self.inputs,
            fmt(self.finite_value),
            fmt(self.limit_value),
            fmt(self.abs_error),
            fmt(self.prior_error),
            fmt(self.stderr),
            self.status,
        ]


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    param_sets: list[tuple[float, float, float]]
    n_values: list[int]
    a_values: list[float]
    t_values: list[float]
    s_values: list[float]
    lambda_values: list[float]
    m_values: list[int]
    replicates: int
    paths: int
    batch_size: int
    ceiling: float
    ratio_tolerance: float
    norm_tolerance: float
    sigma_tolerance: float
    require_trend: bool
    description: str
    out_dir: Path
    out_format: str
    threads: int


def _split_floats(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(",", " ").split()]


def _split_ints(raw: str) -> list[int]:
    return [int(x) for x in raw.replace(",", " ").split()]


def parse_config(path: Path) -> ExperimentConfig:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",)
    )
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "experiment" not in parser:
        raise ConfigError(f"{path}: missing [experiment] section")
    exp = parser["experiment"]
    kind = exp.get("kind", "").strip()
    if kind not in KINDS:
        raise ConfigError(f"{path}: kind must be one of {KINDS}, got {kind!r}")
    if "seed" not in exp:
        raise ConfigError(f"{path}: [experiment] seed is required (no default)")
    try:
        seed = int(exp["seed"])
    except ValueError as exc:
        raise ConfigError(f"{path}: seed must be an integer") from exc
    name = exp.get("name", path.stem).strip()

    if "params" not in parser:
        raise ConfigError(f"{path}: missing [params] section")
    par = parser["params"]
    try:
        a1s = _split_floats(par.get("alpha1", ""))
        a2s = _split_floats(par.get("alpha2", ""))
        a21s = _split_floats(par.get("a21", ""))
    except ValueError as exc:
        raise ConfigError(f"{path}: [params] values must be numbers") from exc
    if not (len(a1s) == len(a2s) == len(a21s)) or not a1s:
        raise ConfigError(
            f"{path}: alpha1/alpha2/a21 must be nonempty lists of equal length"
        )
    param_sets = list(zip(a1s, a2s, a21s))

    grid = parser["grid"] if "grid" in parser else {}
    try:
        n_values = _split_ints(grid.get("n", "65536 262144 1048576"))
        a_values = _split_floats(grid.get("a", "0.25 0.5 0.75"))
        t_values = _split_floats(grid.get("t", "0.5 1.0 2.0"))
        s_values = _split_floats(grid.get("s", "0.25 0.5 0.75"))
        lambda_values = _split_floats(grid.get("lambda", "0.5 1.0 2.0"))
        m_values = _split_ints(grid.get("m", "16 32 48"))
    except ValueError as exc:
        raise ConfigError(f"{path}: [grid] values must be numbers") from exc
    for label, values in (
        ("n", n_values),
        ("a", a_values),
        ("t", t_values),
        ("s", s_values),
        ("lambda", lambda_values),
    ):
        if not values:
            raise ConfigError(f"{path}: [grid] {label} must be nonempty")
    if sorted(n_values) != n_values:
        raise ConfigError(f"{path}: [grid] n values must be increasing")

    mc = parser["mc"] if "mc" in parser else {}
    crit = parser["criteria"] if "criteria" in parser else {}
    try:
        cfg = ExperimentConfig(
            kind=kind,
            name=name,
            seed=seed,
            param_sets=param_sets,
            n_values=n_values,
            a_values=a_values,
            t_values=t_values,
            s_values=s_values,
            lambda_values=lambda_values,
            m_values=m_values,
            replicates=int(mc.get("replicates", "100000")),
            paths=int(mc.get("paths", "100000")),
            batch_size=int(mc.get("batch_size", "8192")),
            ceiling=float(crit.get("ceiling", "0.03")),
            ratio_tolerance=float(crit.get("ratio_tolerance", "0.02")),
            norm_tolerance=float(crit.get("norm_tolerance", "0.01")),
            sigma_tolerance=float(crit.get("sigma_tolerance", "3.0")),
            require_trend=str(crit.get("require_trend", "true")).lower()
            in ("1", "true", "yes"),
            description=exp.get("description", "").strip(),
            out_dir=Path(exp.get("out", "out")),
            out_format=exp.get("format", "both").strip(),
            threads=int(exp.get("threads", "1")),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if cfg.out_format not in ("csv", "json", "both"):
        raise ConfigError(f"{path}: format must be csv, json or both")
    for a1, a2, a21 in param_sets:
        validate_params(a1, a2, a21)  # raises OutOfRangeError with the bound
    return cfg


def _inputs(**kw) -> str:
    parts = []
    for k in sorted(kw):
        v = kw[k]
        parts.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
    return ";".join(parts)


def _param_tag(p: ModelParams) -> str:
    return f"a1={p.alpha1:g},a2={p.alpha2:g},a21={p.a21:g}"


@dataclass
class _PointSeries:
    """Error bookkeeping for one comparison point across the n-doubling."""

    rows: list[ReportRow] = field(default_factory=list)
    max_errors: dict[int, float] = field(default_factory=dict)

    def note(self, n: int, err: float) -> None:
        self.max_errors[n] = max(self.max_errors.get(n, 0.0), err)

    def verdict(self, n_values: list[int], ceiling: float, require_trend: bool) -> bool:
        final = self.max_errors.get(n_values[-1], math.inf)
        ok = final <= ceiling
        if require_trend and len(n_values) >= 2:
            errs = [self.max_errors.get(n, math.inf) for n in n_values]
            ok = ok and all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
        return ok


def _series_to_rows(
    experiment: str,
    point: str,
    series_rows: list[tuple[int, str, float, float]],
    n_values: list[int],
    ceiling: float,
    require_trend: bool,
) -> tuple[list[ReportRow], bool]:
    """Rows (n, inputs, finite, limit) -> ReportRows with trend verdict."""
    series = _PointSeries()
    prior: dict[str, float] = {}
    out: list[ReportRow] = []
    for n, inputs, fin, lim in series_rows:
        err = abs(fin - lim)
        series.note(n, err)
        out.append(
            ReportRow(
                experiment=experiment,
                point=point,
                inputs=inputs,
                finite_value=fin,
                limit_value=lim,
                abs_error=err,
                prior_error=prior.get(inputs),
                status="info",
            )
        )
        prior[inputs] = err
    passed = series.verdict(n_values, ceiling, require_trend)
    for row in out:
        if f"n={n_values[-1]}" in row.inputs:
            row.status = "pass" if passed else "fail"
    return out, passed


# ---------------------------------------------------------------------------
# qtable: model validity and survival asymptotics (criteria 1 and 2)
# ---------------------------------------------------------------------------


def run_qtable(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    notes: dict = {}
    all_pass = True
    for trip in cfg.param_sets:
        p = validate_params(*trip)
        tag = _param_tag(p)
        exp = f"{cfg.name}:{tag}"

        def check(point: str, value: float, target: float, tol: float, **inp):
            nonlocal all_pass
            err = abs(value - target)
            ok = err <= tol
            all_pass = all_pass and ok
            rows.append(
                ReportRow(
                    experiment=exp,
                    point=point,
                    inputs=_inputs(**inp),
                    finite_value=value,
                    limit_value=target,
                    abs_error=err,
                    status="pass" if ok else "fail",
                )
            )

        # model validity (offspring pmfs, criticality, cross-mean)
        kmax = 1 << 20
        law1 = stable_law(1.0 + p.alpha1)
        pmf1 = type1_pmf_array(p, kmax)
        mass1 = float(pmf1.sum()) + p.alpha1 / (1.0 + p.alpha1) * law1.tail(kmax)
        check("MODEL.pmf_sum_type1", mass1, 1.0, 1e-10, kmax=kmax)
        law2 = stable_law(1.0 + p.alpha2)
        p00, p10, pmf2 = type2_pmf_table(p, kmax)
        mass2 = (
            p00
            + p10
            + float(pmf2.sum())
            + p.alpha2 / (1.0 + p.alpha2) * law2.tail(kmax)
        )
        check("MODEL.pmf_sum_type2", mass2, 1.0, 1e-10, kmax=kmax)
        check("MODEL.criticality_type1", type1_series_mean(p), 1.0, 1e-6)
        check("MODEL.criticality_type2", type2_series_mean(p), 1.0, 1e-6)
        # cross-mean: F21 is linear in s1, so the centered difference is exact
        from .offspring_models import pgf_type21

        h = 1e-6
        fd = (pgf_type21(p, 0.5 + h, 0.5) - pgf_type21(p, 0.5 - h, 0.5)) / (2 * h)
        check("MODEL.cross_mean_a21", fd, p.a21, 1e-6, step=h)
        if p.regime is Regime.INTERMEDIATE_VASAG:
            assert p.b is not None and p.sigma is not None
            pc, ps = w_mixture_weights(p)
            check("MODEL.w_mixture_identity", pc + ps, 1.0, 1e-12)
            resid = abs(p.b ** (1 + p.alpha2) - p.b - p.sigma * p.alpha2 * p.a21)
            check("MODEL.b_residual", resid, 0.0, 1e-13)

        # survival asymptotics across the n grid
        eng = gf_engine.DeficitEngine(p, cfg.n_values[-1])
        targets = {
            "SURV.norm_type1": (lambda d: d.survival_norm_type1, 1.0, cfg.norm_tolerance),
            "SURV.norm_type2": (lambda d: d.survival_norm_type2, 1.0, cfg.norm_tolerance),
        }
        if p.regime is Regime.Q1_NEGLIGIBLE:
            targets["SURV.q21_over_q2"] = (lambda d: d.q21_over_q2, 1.0, cfg.ratio_tolerance)
        elif p.regime is Regime.INTERMEDIATE_VASAG:
            targets["SURV.q21_over_q2"] = (lambda d: d.q21_over_q2, p.b, cfg.ratio_tolerance * p.b)
        else:
            targets["SURV.q21_power_ratio"] = (
                lambda d: d.q21_power_over_a21_q1,
                1.0,
                cfg.ratio_tolerance,
            )
        diags = {n: eng.asymptotics_diagnostics(n) for n in cfg.n_values}
        for point, (get, target, tol) in targets.items():
            series = [
                (n, _inputs(n=n), get(diags[n]), target) for n in cfg.n_values
            ]
            new_rows, ok = _series_to_rows(
                exp, point, series, cfg.n_values, tol, cfg.require_trend
            )
            rows.extend(new_rows)
            all_pass = all_pass and ok
        n_last = cfg.n_values[-1]
        d = diags[n_last]
        for label, ratio in (
            ("type1", d.trick_ratio_type1),
            ("type2", d.trick_ratio_type2),
        ):
            rows.append(
                ReportRow(
                    experiment=exp,
                    point=f"SURV.trick_lemma_{label}",
                    inputs=_inputs(n=n_last, m=d.trick_m, lam=d.trick_lambda),
                    finite_value=ratio,
                    limit_value=None,
                    abs_error=None,
                    status="info",
                )
            )
    return rows, notes, all_pass


# ---------------------------------------------------------------------------
# reduced: finite-n transforms vs limit laws (criterion 3)
# ---------------------------------------------------------------------------


def _point_grids(
    cfg: ExperimentConfig, p: ModelParams, eng: gf_engine.DeficitEngine, n: int
):
    """Yield (point_id, inputs, finite_value, limit_value) at horizon n."""
    t = eng.tables
    s_vals = cfg.s_values
    a_vals = cfg.a_values
    t_vals = cfg.t_values
    l_vals = cfg.lambda_values
    root_m = max(1, math.isqrt(n))

    if p.regime is Regime.Q1_NEGLIGIBLE:
        hstar = eng.hstar(n)
        for s1 in s_vals:
            for s2 in s_vals:
                fin = eng.reduced_transform(root_m, n, s1, s2).value
                lim = limit_laws.limit_reduced_transform(p, "Q1N.0", s2=s2).value
                yield "Q1N.0", _inputs(n=n, m=root_m, s1=s1, s2=s2), fin, lim
        for a in a_vals:
            m = int(round(a * n))
            for s2 in s_vals:
                fin = eng.reduced_transform(m, n, 0.99, s2).value
                lim = limit_laws.limit_reduced_transform(p, "Q1N.1", a=a, s2=s2).value
                yield "Q1N.1", _inputs(n=n, a=a, s2=s2), fin, lim
        # interior of the sandwich hstar << h << n; the 0.6 weighting
        # balances the type-1 contamination against the h/n scale mismatch
        h_mid = int(round(hstar**0.6 * n**0.4))
        m = n - h_mid
        for s1 in (0.8, 0.9, 0.99):
            for lam2 in l_vals:
                u2 = -math.expm1(-lam2 * t.q2[n] / t.q21[h_mid])
                fin = eng.reduced_transform_deficit(m, n, 1.0 - s1, u2).value
                lim = limit_laws.limit_reduced_transform(p, "Q1N.2", lambda2=lam2).value
                yield "Q1N.2", _inputs(n=n, s1=s1, lam2=lam2), fin, lim
        for tv in t_vals:
            k = int(round(tv * hstar))
            m = n - k
            lam2 = 1.0
            u2 = -math.expm1(-lam2 * t.q2[n] / t.q21[k])
            for s1 in s_vals:
                fin = eng.reduced_transform_deficit(m, n, 1.0 - s1, u2).value
                lim = limit_laws.limit_reduced_transform(
                    p, "Q1N.3", t=tv, s1=s1, lambda2=lam2
                ).value
                yield "Q1N.3", _inputs(n=n, t=tv, s1=s1, lam2=lam2), fin, lim
        h_small = max(2, int(round(math.sqrt(hstar))))
        m = n - h_small
        for lam1 in l_vals:
            for lam2 in l_vals:
                u1 = -math.expm1(-lam1 * t.q1[hstar] / t.q1[h_small])
                u2 = -math.expm1(-lam2 * t.q2[n] / t.q21[h_small])
                fin = eng.reduced_transform_deficit(m, n, u1, u2).value
                lim = limit_laws.limit_reduced_transform(
                    p, "Q1N.4", lambda1=lam1, lambda2=lam2
                ).value
                yield "Q1N.4", _inputs(n=n, lam1=lam1, lam2=lam2), fin, lim

    elif p.regime is Regime.Q2_NEGLIGIBLE:
        gstar = eng.gstar(n)
        m0 = max(1, math.isqrt(gstar))
        for s1 in s_vals:
            for s2 in s_vals:
                fin = eng.reduced_transform(m0, n, s1, s2).value
                lim = limit_laws.limit_reduced_transform(p, "Q2N.0", s2=s2).value
                yield "Q2N.0", _inputs(n=n, m=m0, s1=s1, s2=s2), fin, lim
        for tv in t_vals:
            m = int(round(tv * gstar))
            for s in s_vals:
                fin = eng.reduced_transform(m, n, s, s).value
                lim = limit_laws.limit_reduced_transform(
                    p, "Q2N.1", t=tv, s1=s, s2=s
                ).value
                yield "Q2N.1", _inputs(n=n, t=tv, s=s), fin, lim
        m_mid = int(round(math.sqrt(gstar * n)))
        for s1 in s_vals:
            for s2 in s_vals:
                fin = eng.reduced_transform(m_mid, n, s1, s2).value
                lim = limit_laws.limit_reduced_transform(p, "Q2N.2", s1=s1).value
                yield "Q2N.2", _inputs(n=n, m=m_mid, s1=s1, s2=s2), fin, lim
        for a in a_vals:
            m = int(round(a * n))
            for s1 in s_vals:
                fin = eng.reduced_transform(m, n, s1, 0.5).value
                lim = limit_laws.limit_reduced_transform(p, "Q2N.3", a=a, s1=s1).value
                yield "Q2N.3", _inputs(n=n, a=a, s1=s1), fin, lim
        h = math.isqrt(n)
        m = n - h
        for lam1 in l_vals:
            u1 = -math.expm1(-lam1 * t.q1[n] / t.q1[h])
            for s2 in s_vals:
                fin = eng.reduced_transform_deficit(m, n, u1, 1.0 - s2).value
                lim = limit_laws.limit_reduced_transform(p, "Q2N.4", lambda1=lam1).value
                yield "Q2N.4", _inputs(n=n, lam1=lam1, s2=s2), fin, lim

    else:
        for s1 in s_vals:
            for s2 in s_vals:
                fin = eng.reduced_transform(root_m, n, s1, s2).value
                lim = limit_laws.limit_reduced_transform(p, "IV.0", s2=s2).value
                yield "IV.0", _inputs(n=n, m=root_m, s1=s1, s2=s2), fin, lim
        for a in a_vals:
            m = int(round(a * n))
            for s in s_vals:
                fin = eng.reduced_transform(m, n, s, s).value
                lim = limit_laws.limit_reduced_transform(
                    p, "IV.1", a=a, s1=s, s2=s
                ).value
                yield "IV.1", _inputs(n=n, a=a, s=s), fin, lim
        h = math.isqrt(n)
        m = n - h
        for lam1 in l_vals:
            for lam2 in l_vals:
                u1 = -math.expm1(-lam1 * t.q21[n] / (n * t.q1[h]))
                u2 = -math.expm1(-lam2 * t.q2[n] / t.q2[h])
                fin = eng.reduced_transform_deficit(m, n, u1, u2).value
                lim = limit_laws.limit_reduced_transform(
                    p, "IV.2", lambda1=lam1, lambda2=lam2
                ).value
                yield "IV.2", _inputs(n=n, lam1=lam1, lam2=lam2), fin, lim


def run_reduced(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    notes: dict = {}
    all_pass = True
    for trip in cfg.param_sets:
        p = validate_params(*trip)
        exp = f"{cfg.name}:{_param_tag(p)}"
        eng = gf_engine.DeficitEngine(p, cfg.n_values[-1])
        by_point: dict[str, list[tuple[int, str, float, float]]] = {}
        for n in cfg.n_values:
            for point, inputs, fin, lim in _point_grids(cfg, p, eng, n):
                by_point.setdefault(point, []).append((n, inputs, fin, lim))
        for point, series in sorted(by_point.items()):
            new_rows, ok = _series_to_rows(
                exp, point, series, cfg.n_values, cfg.ceiling, cfg.require_trend
            )
            rows.extend(new_rows)
            all_pass = all_pass and ok
            notes.setdefault("points", {})[f"{exp}:{point}"] = "pass" if ok else "fail"
    return rows, notes, all_pass


# ---------------------------------------------------------------------------
# limits: PDE solver identities (criterion 4)
# ---------------------------------------------------------------------------


def run_limits(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    all_pass = True
    exp = cfg.name

    def check(point: str, value: float, target: float, tol: float, **inp):
        nonlocal all_pass
        err = abs(value - target)
        ok = err <= tol
        all_pass = all_pass and ok
        rows.append(
            ReportRow(
                experiment=exp,
                point=point,
                inputs=_inputs(**inp),
                finite_value=value,
                limit_value=target,
                abs_error=err,
                status="pass" if ok else "fail",
            )
        )

    # explicit-form agreement for the binary-splitting member
    p11 = validate_params(1.0, 1.0, 0.3)
    worst = 0.0
    grid = np.linspace(0.4, 4.0, 10)
    for x in grid:
        for l2 in grid:
            l1 = x / p11.a21
            worst = max(
                worst,
                abs(limit_laws.phi(p11, l1, l2) - limit_laws.phi_tanh_form(p11.a21, l1, l2)),
            )
    check("PDE.tanh_grid", worst, 0.0, 1e-6, grid=10)

    # the l1 = 0 boundary has the closed form l2*(1+l2**a2)**(-1/a2)
    for a2 in (0.5, 0.75, 1.0):
        pp = validate_params(0.9, a2, 0.2)
        worst = max(
            abs(limit_laws.phi(pp, 0.0, l2) - l2 * (1 + l2**a2) ** (-1 / a2))
            for l2 in (0.3, 1.0, 3.0)
        )
        check("PDE.phi_boundary", worst, 0.0, 1e-6, alpha2=a2)

    # large-argument growth constant of phi(x, 0)
    p = validate_params(*cfg.param_sets[0])
    x = 1e4
    ratio = limit_laws.phi(p, x, 0.0) / x ** (1.0 / (1.0 + p.alpha2))
    const = (p.alpha2 * p.a21) ** (1.0 / (1.0 + p.alpha2))
    check("PDE.phi_growth_constant", ratio / const, 1.0, 0.02, x=x)

    # psi initial slopes; the l1 slope needs a smaller eps because of its
    # nonanalytic eps**alpha1 correction
    p_iv = next(
        (
            validate_params(*tr)
            for tr in cfg.param_sets
            if validate_params(*tr).regime is Regime.INTERMEDIATE_VASAG
        ),
        validate_params(0.5, 1.0, 0.3),
    )
    eps = 1e-8
    check("PDE.psi_slope_l1", limit_laws.psi(p_iv, eps, 0.0) / eps, p_iv.a21, 1e-4, eps=eps)
    eps = 1e-6
    check("PDE.psi_slope_l2", limit_laws.psi(p_iv, 0.0, eps) / eps, 1.0, 1e-4, eps=eps)
    return rows, {}, all_pass


# ---------------------------------------------------------------------------
# mrca: finite-n ancestor laws vs limits (criterion 5)
# ---------------------------------------------------------------------------


def run_mrca(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    all_pass = True
    for trip in cfg.param_sets:
        p = validate_params(*trip)
        exp = f"{cfg.name}:{_param_tag(p)}"
        eng = gf_engine.DeficitEngine(p, cfg.n_values[-1])
        by_point: dict[str, list[tuple[int, str, float, float]]] = {}

        def add(point: str, n: int, fin: float, lim: float, **inp):
            by_point.setdefault(point, []).append((n, _inputs(n=n, **inp), fin, lim))

        for n in cfg.n_values:
            if p.regime is Regime.Q1_NEGLIGIBLE:
                for a in cfg.a_values:
                    m = int(round(a * n))
                    p1, p2 = eng.mrca_probabilities(m, n)
                    add("MRCA.Q1N.type2", n, p2,
                        limit_laws.mrca_limit(p, "singleton_type2_at_an", a=a), a=a)
                    add("MRCA.Q1N.type1", n, p1, 0.0, a=a)
            elif p.regime is Regime.Q2_NEGLIGIBLE:
                gstar = eng.gstar(n)
                # plateau sample point gstar << m << n, weighted toward gstar
                # because the late-side m/n drift dominates the error
                m_mid = int(round(gstar**0.7 * n**0.3))
                p1_mid, _ = eng.mrca_probabilities(m_mid, n)
                add("MRCA.Q2N.mid_type1", n, p1_mid,
                    limit_laws.mrca_limit(p, "singleton_type1_mid"), m=m_mid)
                for tv in cfg.t_values:
                    m = int(round(tv * gstar))
                    _, p2 = eng.mrca_probabilities(m, n)
                    add("MRCA.Q2N.early_type2", n, p2,
                        limit_laws.mrca_limit(p, "singleton_type2_at_tg", t=tv), t=tv)
                    dead = eng.reduced_transform(m, n, 1.0, 0.0).value
                    add("DEATH2.Q2N", n, dead,
                        limit_laws.mrca_limit(p, "death2_le_tg", t=tv), t=tv)
                for a in cfg.a_values:
                    m = int(round(a * n))
                    p1_a, _ = eng.mrca_probabilities(m, n)
                    add("MRCA.Q2N.late_type1", n, p1_a,
                        limit_laws.mrca_limit(p, "singleton_type1_at_an", a=a), a=a)
                    add("MRCA.Q2N.window_type1", n, p1_mid - p1_a,
                        limit_laws.mrca_limit(p, "beta_window_type1", a=a), a=a)
            else:
                for a in cfg.a_values:
                    m = int(round(a * n))
                    p1, p2 = eng.mrca_probabilities(m, n)
                    add("MRCA.IV.beta_tail", n, p1 + p2,
                        limit_laws.mrca_limit(p, "beta_gt_an", a=a), a=a)
        for point, series in sorted(by_point.items()):
            new_rows, ok = _series_to_rows(
                exp, point, series, cfg.n_values, cfg.ceiling, cfg.require_trend
            )
            rows.extend(new_rows)
            all_pass = all_pass and ok
    return rows, {}, all_pass


# ---------------------------------------------------------------------------
# tree-mc: conditioned-tree Monte Carlo vs the exact engine (criterion 6)
# ---------------------------------------------------------------------------


def run_tree_mc(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    all_pass = True
    n = cfg.n_values[0] if cfg.n_values else 64
    for trip in cfg.param_sets:
        p = validate_params(*trip)
        exp = f"{cfg.name}:{_param_tag(p)}"
        eng = gf_engine.DeficitEngine(p, n)
        rng = make_stream(cfg.seed, cfg.name, "tree", _param_tag(p))
        s_grid = [(s, s) for s in cfg.s_values]
        est = tree_sim.monte_carlo_reduced_law(
            p,
            n,
            cfg.m_values,
            s_grid,
            cfg.replicates,
            rng,
            batch_size=cfg.batch_size,
        )

        def check(point: str, value: float, target: float, se: float, **inp):
            nonlocal all_pass
            err = abs(value - target)
            tol = cfg.sigma_tolerance * max(se, 1e-12)
            ok = err <= tol
            all_pass = all_pass and ok
            rows.append(
                ReportRow(
                    experiment=exp,
                    point=point,
                    inputs=_inputs(n=n, **inp),
                    finite_value=value,
                    limit_value=target,
                    abs_error=err,
                    stderr=se,
                    status="pass" if ok else "fail",
                )
            )

        for i, m in enumerate(cfg.m_values):
            for j, (s1, s2) in enumerate(s_grid):
                exact = eng.reduced_transform(m, n, s1, s2).value
                check(
                    "TREE.transform",
                    float(est.means[i, j]),
                    exact,
                    float(est.stderrs[i, j]),
                    m=m,
                    s1=s1,
                    s2=s2,
                )
        p1s, p2s = eng.singleton_probabilities(n)
        for m in cfg.m_values:
            if m + 1 < n:
                exact_cdf = 1.0 - (p1s[m + 1] + p2s[m + 1])
                emp = est.beta_cdf(m)
                se = math.sqrt(max(exact_cdf * (1 - exact_cdf), 1e-12) / est.replicates)
                check("TREE.beta_cdf", emp, exact_cdf, se, m=m)
        t1_exact, t2_exact = eng.mrca_type_distribution(n)
        f1, f2 = est.type_frequencies()
        se = math.sqrt(max(t1_exact * (1 - t1_exact), 1e-12) / est.replicates)
        check("TREE.mrca_type1", f1, t1_exact, se)
        check("TREE.mrca_type2", f2, t2_exact, se)
        q21 = float(eng.tables.q21[n])
        se = math.sqrt(q21 * (1 - q21) / est.attempts)
        check("TREE.acceptance_rate", est.acceptance_rate, q21, se)
    return rows, {}, all_pass


# ---------------------------------------------------------------------------
# ctmc-mc: limit-process simulation vs PGFs (criterion 7)
# ---------------------------------------------------------------------------


def run_ctmc_mc(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    all_pass = True
    p = validate_params(*cfg.param_sets[0])
    exp = f"{cfg.name}:{_param_tag(p)}"
    t_points = cfg.t_values[:2] if len(cfg.t_values) >= 2 else [0.5, 1.0]
    t_max = max(t_points)
    s_points = [(0.3, 0.3), (0.3, 0.7), (0.7, 0.3), (0.7, 0.7)]

    def check(point: str, value: float, target: float, se: float, tol=None, **inp):
        nonlocal all_pass
        err = abs(value - target)
        bound = tol if tol is not None else cfg.sigma_tolerance * max(se, 1e-12)
        ok = err <= bound
        all_pass = all_pass and ok
        rows.append(
            ReportRow(
                experiment=exp,
                point=point,
                inputs=_inputs(**inp),
                finite_value=value,
                limit_value=target,
                abs_error=err,
                stderr=se if tol is None else None,
                status="pass" if ok else "fail",
            )
        )

    for pid in ("X", "Y", "V", "W"):
        spec = ctmc_sim.build_spec(pid, p)
        rng = make_stream(cfg.seed, cfg.name, "ctmc", pid)
        paths = ctmc_sim.sample_paths(spec, t_max, cfg.paths, rng)
        excluded_worst = 0
        for t in t_points:
            for s1, s2 in s_points:
                emp, se, used, excluded = ctmc_sim.empirical_pgf(paths, t, s1, s2)
                excluded_worst = max(excluded_worst, excluded)
                target = limit_laws.ctmc_pgf(pid, p, t, s1, s2).value
                check(f"CTMC.{pid}.pgf", emp, target, se, t=t, s1=s1, s2=s2)
        check(
            f"CTMC.{pid}.exclusion_rate",
            excluded_worst / cfg.paths,
            0.0,
            0.0,
            tol=1e-4,
        )

    spec_w = ctmc_sim.build_spec("W", p)
    pc, ps = w_mixture_weights(p)
    check("CTMC.W.mixture_identity", pc + ps, 1.0, 0.0, tol=1e-12)
    rng = make_stream(cfg.seed, cfg.name, "ctmc", "Wfirst")
    t_samples, kinds = ctmc_sim.w_first_branching_sample(spec_w, rng, 10**6)
    frac2 = float((kinds == 2).mean())
    target2 = limit_laws.mrca_limit(p, "type2")
    se = math.sqrt(target2 * (1 - target2) / t_samples.shape[0])
    check("CTMC.W.mrca_type2", frac2, target2, se)
    a2, kappa = p.alpha2, p.kappa

    def cdf(x):
        x = np.asarray(x)
        return 1.0 - np.exp(-x) / (1.0 + a2) - a2 / (1.0 + a2) * np.exp(-kappa * x)

    ks = stats.kstest(t_samples, cdf)
    ok = ks.pvalue >= 1e-3
    all_pass = all_pass and ok
    rows.append(
        ReportRow(
            experiment=exp,
            point="CTMC.W.first_branching_ks",
            inputs=_inputs(samples=t_samples.shape[0]),
            finite_value=float(ks.statistic),
            limit_value=float(ks.pvalue),
            abs_error=None,
            status="pass" if ok else "fail",
        )
    )
    return rows, {}, all_pass


# ---------------------------------------------------------------------------
# convergence: two-time structure and the brute-force oracle (criteria 8, 9)
# ---------------------------------------------------------------------------


def run_convergence(cfg: ExperimentConfig) -> tuple[list[ReportRow], dict, bool]:
    rows: list[ReportRow] = []
    notes: dict = {}
    all_pass = True
    p = next(
        (
            validate_params(*tr)
            for tr in cfg.param_sets
            if validate_params(*tr).regime is Regime.Q1_NEGLIGIBLE
        ),
        validate_params(0.4, 1.0, 0.3),
    )
    exp = f"{cfg.name}:{_param_tag(p)}"
    eng = gf_engine.DeficitEngine(p, cfg.n_values[-1])
    t = eng.tables

    # degenerate compositions must be bitwise equal to single-time values
    n0 = cfg.n_values[0]
    k0, k1 = n0 // 4, n0 // 2
    for s_pair in ((0.3, 0.7), (0.6, 0.2)):
        lhs = eng.two_time_transform(k0, k1, n0, (1.0, 1.0), s_pair)
        rhs = eng.reduced_transform(k1, n0, *s_pair).value
        ok = lhs == rhs
        all_pass = all_pass and ok
        rows.append(
            ReportRow(
                experiment=exp,
                point="TWOTIME.degenerate_first",
                inputs=_inputs(n=n0, k0=k0, k1=k1, s1=s_pair[0], s2=s_pair[1]),
                finite_value=lhs,
                limit_value=rhs,
                abs_error=abs(lhs - rhs),
                status="pass" if ok else "fail",
            )
        )
        lhs = eng.two_time_transform(k0, k1, n0, s_pair, (1.0, 1.0))
        rhs = eng.reduced_transform(k0, n0, *s_pair).value
        ok = lhs == rhs
        all_pass = all_pass and ok
        rows.append(
            ReportRow(
                experiment=exp,
                point="TWOTIME.degenerate_second",
                inputs=_inputs(n=n0, k0=k0, k1=k1, s1=s_pair[0], s2=s_pair[1]),
                finite_value=lhs,
                limit_value=rhs,
                abs_error=abs(lhs - rhs),
                status="pass" if ok else "fail",
            )
        )

    # which marginal time-exponent convention does the finite-n engine obey?
    pairs = [(2.0, 0.5), (3.0, 1.5), (1.5, 0.75)]
    s10, s11 = 0.6, 0.4
    lam20, lam21 = 0.8, 1.2
    series: dict[str, list[tuple[int, str, float, float]]] = {
        "theorem": [],
        "definition": [],
    }
    for n in cfg.n_values:
        hstar = eng.hstar(n)
        for t0, t1 in pairs:
            k_t0, k_t1 = int(round(t0 * hstar)), int(round(t1 * hstar))
            k0, k1 = n - k_t0, n - k_t1
            u_first = (1.0 - s10, -math.expm1(-lam20 * t.q2[n] / t.q21[k_t0]))
            u_second = (1.0 - s11, -math.expm1(-lam21 * t.q2[n] / t.q21[k_t1]))
            fin = eng.two_time_transform_deficit(k0, k1, n, u_first, u_second)
            for conv in series:
                lim = limit_laws.g_process_two_time(
                    p.alpha1, p.alpha2, t0, t1, s10, lam20, s11, lam21, convention=conv
                )
                series[conv].append((n, _inputs(n=n, t0=t0, t1=t1), fin, lim))
    verdicts = {}
    for conv, ser in series.items():
        new_rows, ok = _series_to_rows(
            exp,
            f"TWOTIME.gtransition[{conv}]",
            ser,
            cfg.n_values,
            cfg.ceiling,
            cfg.require_trend,
        )
        rows.extend(new_rows)
        verdicts[conv] = ok
    exactly_one = sum(verdicts.values()) == 1
    all_pass = all_pass and exactly_one
    chosen = [c for c, ok in verdicts.items() if ok]
    notes["g_marginal_convention"] = chosen[0] if len(chosen) == 1 else "ambiguous"
    rows.append(
        ReportRow(
            experiment=exp,
            point="TWOTIME.convention_verdict",
            inputs=_inputs(candidates=2),
            finite_value=float(sum(verdicts.values())),
            limit_value=1.0,
            abs_error=None,
            status="pass" if exactly_one else "fail",
        )
    )

    # brute-force oracle: truncated family engine vs population enumeration
    fam = gf_engine.TruncatedFamily.from_params(p, kmax=8)
    te = gf_engine.TruncatedEngine(fam, 12)
    dp = gf_engine.PopulationDP(fam, 12, cap=768)
    worst_pgf = 0.0
    worst_reduced = 0.0
    for m in (1, 3, 6, 9, 12):
        for s1 in (0.0, 0.3, 0.6):
            for s2 in (0.0, 0.3, 0.6):
                e1, e2 = te.pgf_iterates(m, s1, s2)
                worst_pgf = max(
                    worst_pgf,
                    abs(e1 - dp.evaluate_type1(m, s1)),
                    abs(e2 - dp.evaluate_joint(m, s1, s2)),
                )
    for n in (6, 12):
        for m in (0, n // 2, n):
            for s1 in (0.0, 0.3, 0.6):
                for s2 in (0.0, 0.3, 0.6):
                    worst_reduced = max(
                        worst_reduced,
                        abs(
                            te.reduced_transform(m, n, s1, s2)
                            - dp.reduced_transform(m, n, s1, s2)
                        ),
                    )
    for point, worst in (
        ("ORACLE.population_pgf", worst_pgf),
        ("ORACLE.reduced_transform", worst_reduced),
    ):
        ok = worst <= 1e-10
        all_pass = all_pass and ok
        rows.append(
            ReportRow(
                experiment=exp,
                point=point,
                inputs=_inputs(kmax=8, horizon=12),
                finite_value=worst,
                limit_value=0.0,
                abs_error=worst,
                status="pass" if ok else "fail",
            )
        )
    return rows, notes, all_pass


_RUNNERS = {
    "qtable": run_qtable,
    "reduced": run_reduced,
    "limits": run_limits,
    "mrca": run_mrca,
    "tree-mc": run_tree_mc,
    "ctmc-mc": run_ctmc_mc,
    "convergence": run_convergence,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment config; returns the process exit status."""
    started = time.perf_counter()
    try:
        if cfg.threads > 1 and len(cfg.param_sets) > 1 and cfg.kind in (
            "qtable",
            "reduced",
            "mrca",
        ):
            # shard over parameter sets; each shard sees a single-set config
            shards = []
            for trip in cfg.param_sets:
                sub = ExperimentConfig(**{**cfg.__dict__, "param_sets": [trip]})
                shards.append(sub)
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(lambda c: _RUNNERS[cfg.kind](c), shards))
            rows = [r for res in results for r in res[0]]
            notes = {}
            for res in results:
                notes.update(res[1])
            passed = all(res[2] for res in results)
        else:
            rows, notes, passed = _RUNNERS[cfg.kind](cfg)
    except (CapacityError, ExhaustedError) as exc:
        _write_outputs(cfg, [], {"error": f"{exc.code}: {exc}"}, False, started)
        print(f"resource exhaustion: {exc}", file=sys.stderr)
        return 3
    _write_outputs(cfg, rows, notes, passed, started)
    return 0 if passed else 1


def _write_outputs(
    cfg: ExperimentConfig,
    rows: list[ReportRow],
    notes: dict,
    passed: bool,
    started: float,
) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=lambda r: r.key())
    if cfg.out_format in ("csv", "both"):
        csv_path = cfg.out_dir / f"{cfg.name}.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow(row.as_record())
    if cfg.out_format in ("json", "both"):
        failures = sum(1 for r in rows if r.status == "fail")
        errors = [r.abs_error for r in rows if r.abs_error is not None]
        summary = {
            "experiment": cfg.name,
            "kind": cfg.kind,
            "seed": cfg.seed,
            "pass": passed,
            "rows": len(rows),
            "failures": failures,
            "worst_abs_error": max(errors) if errors else None,
            "wall_clock_seconds": time.perf_counter() - started,
            "notes": notes,
        }
        json_path = cfg.out_dir / f"{cfg.name}.json"
        json_path.write_text(json.dumps(summary, indent=2, sort_keys=True))


def shipped_configs() -> dict[str, Path]:
    """Named criterion configs installed with the package."""
    base = resources.files("redbranch") / "configs"
    out = {}
    for entry in sorted(base.iterdir()):
        if entry.name.endswith(".cfg"):
            out[entry.name[: -len(".cfg")]] = Path(str(entry))
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="redbranch",
        description="Reduced two-type branching-process experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("validate", "run"):
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--format", choices=("csv", "json", "both"), default=None)
    sub.add_parser("list-criteria")
    args = parser.parse_args(argv)

    if args.command == "list-criteria":
        for name, path in shipped_configs().items():
            try:
                cfg = parse_config(path)
                desc = cfg.description or cfg.kind
            except ConfigError as exc:
                desc = f"INVALID: {exc}"
            print(f"{name}: {desc}")
        return 0

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        if args.format is not None:
            cfg.out_format = args.format
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"{args.config}: valid ({cfg.kind}, {len(cfg.param_sets)} parameter sets)")
        return 0
    try:
        return run(cfg)
    except RedbranchError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 3


if __name__ == "__main__":
    sys.exit(main())
