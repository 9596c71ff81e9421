"""Weak-error measurement: references, Monte Carlo estimation, order fitting.

The estimator is plain Monte Carlo over independent paths with per-n error
bars; weak errors are measured against a closed-form/quadrature reference
registry with a fine-grid fallback.  Convergence order is the weighted
least-squares slope of log error against log n, after excluding points that
sit inside their own noise floor.  For fully linear 1-d models a noise-free
propagation oracle computes scheme expectations to near machine precision by
composing per-step factor moments.

Reproducibility: paths are split into fixed-size batches; batch b of the
n_list entry i draws from ``SeedSequence(seed, spawn_key=(i, b))`` and batch
results merge in batch order, so results are bitwise identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigurationError, DomainError, NumericalFailure
from .flows import gaussian_moment, three_point_moment
from .levy import tail_mass
from .models import SdeModel
from .schemes import (
    SchemeConfig,
    StepPlan,
    extrapolation_variants,
    parse_flow_choice,
    simulate_batch,
)

BATCH_SIZE = 4096
NOISE_FLOOR_MULTIPLE = 2.0
DETERMINISTIC_FLOOR = 1e-13
MAX_ABORT_FRACTION = 1e-3


@dataclass(frozen=True)
class TestFunction:
    """Polynomial-growth test function f with declared growth degree."""

    name: str
    func: Callable
    degree: int

    def __call__(self, x):
        return self.func(x)


def monomial(p: int) -> TestFunction:
    if p < 0:
        raise ConfigurationError("monomial degree must be >= 0")
    name = "1" if p == 0 else ("x" if p == 1 else f"x{p}")
    return TestFunction(name=name, func=lambda v: np.asarray(v, dtype=float) ** p, degree=p)


def parse_test_function(name: str) -> TestFunction:
    name = name.strip()
    if name == "1":
        return monomial(0)
    if name == "x":
        return monomial(1)
    if name.startswith("x") and name[1:].isdigit():
        return monomial(int(name[1:]))
    raise ConfigurationError(f"unknown test function {name!r}; use 1, x, x2, ... x6")


def _monomial_degree(f: TestFunction) -> int:
    if f.name == "1":
        return 0
    if f.name == "x":
        return 1
    if f.name.startswith("x") and f.name[1:].isdigit():
        return int(f.name[1:])
    raise ConfigurationError(f"{f.name!r} is not a monomial test function")


# ---------------------------------------------------------------------------
# Reference values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reference:
    value: float
    provenance: str
    stderr: float = 0.0


def _linear_levy_moment_rate(model: SdeModel, p: int) -> float:
    """kappa_p with E[X_T^p] = x^p exp(kappa_p T) for dX = h1 X- dY + mu X dt."""
    info = model.linear
    triplet = model.triplet
    h1 = info.h1
    measure = triplet.measure
    kappa = p * info.drift_tilde + p * float(triplet.b) * h1
    if p >= 2 and info.sigmas:
        kappa += 0.5 * p * (p - 1) * sum(s * s for s in info.sigmas)

    def integrand(y):
        return ((1 + h1 * y) ** p - 1 - p * h1 * y * (abs(y) <= 1)) * measure.density(
            np.array(y)
        )

    if measure.activity == "finite":
        atoms, probs = measure.atoms, measure.probs
        kappa += measure.intensity * float(
            np.sum(probs * ((1 + h1 * atoms) ** p - 1 - p * h1 * atoms * (np.abs(atoms) <= 1)))
        )
    else:
        pos = quad(integrand, 0, np.inf, limit=200)[0]
        neg = quad(lambda y: integrand(-y), 0, np.inf, limit=200)[0]
        kappa += pos + neg
    return kappa


def reference_value(
    model: SdeModel,
    f: TestFunction,
    T: float,
    x0: float,
    *,
    allow_fine_grid: bool = True,
    fine_grid_of=None,
    paths_hint: int = 100_000,
) -> Reference:
    """E[f(X_T)] with a provenance tag: closed form, quadrature or fine grid."""
    if f.name == "1":
        return Reference(1.0, "closed_form")
    if model.name == "zero":
        return Reference(float(f(np.array(x0))), "closed_form")
    if model.name == "gbm" and model.linear is not None:
        p = _monomial_degree(f)
        mu = model.linear.drift_tilde
        sig2 = sum(s * s for s in model.linear.sigmas)
        value = x0**p * math.exp(p * mu * T + 0.5 * p * (p - 1) * sig2 * T)
        return Reference(value, "closed_form")
    if model.name in ("linear_cp", "linear_levy") and model.linear is not None:
        p = _monomial_degree(f)
        kappa = _linear_levy_moment_rate(model, p)
        tag = "closed_form" if model.triplet.measure.activity == "finite" else "quadrature"
        return Reference(x0**p * math.exp(kappa * T), tag)
    if not allow_fine_grid:
        raise ConfigurationError(
            f"no reference oracle for model {model.name!r} with f={f.name!r} "
            "and the fine-grid fallback is disabled"
        )
    return _fine_grid_reference(model, f, T, x0, fine_grid_of, paths_hint)


def _fine_grid_reference(model, f, T, x0, fine_grid_of, paths_hint) -> Reference:
    n_ref = 64 * (fine_grid_of or 16)
    paths = 8 * paths_hint
    cfg = SchemeConfig(kind="euler_maruyama", model=model)
    total, total2, count = 0.0, 0.0, 0
    for b in range(math.ceil(paths / BATCH_SIZE)):
        rng = np.random.default_rng(np.random.SeedSequence(987654321, spawn_key=(b,)))
        size = min(BATCH_SIZE, paths - b * BATCH_SIZE)
        res = simulate_batch(cfg, T, n_ref, x0, size, rng)
        vals = np.asarray(f(res.terminal[~res.aborted]), dtype=float)
        total += vals.sum()
        total2 += (vals * vals).sum()
        count += vals.size
    mean = total / count
    var = max(total2 / count - mean * mean, 0.0)
    return Reference(mean, f"fine_grid(n={n_ref}, paths={paths})", math.sqrt(var / count))


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------


@dataclass
class ReportRow:
    n: int
    estimate: float
    stderr: float
    reference: float
    error: float
    aborted: int
    paths: int


@dataclass
class OrderFit:
    order: float
    ci: float
    status: str               # "ok" or "indeterminate"
    points_used: int
    intercept: float = 0.0


@dataclass
class WeakErrorReport:
    scheme: str
    f_name: str
    T: float
    x0: float
    paths: int
    seed: int
    provenance: str
    rows: list[ReportRow] = field(default_factory=list)
    fit: Optional[OrderFit] = None


def _run_batches(cfg, f, T, n, x0, paths, seed, key, workers, force_branch=None):
    """Fixed-size batches with per-batch substreams; merge order is by batch index."""
    n_batches = math.ceil(paths / BATCH_SIZE)

    def run(b):
        size = min(BATCH_SIZE, paths - b * BATCH_SIZE)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(*key, b)))
        res = simulate_batch(cfg, T, n, x0, size, rng, force_branch=force_branch)
        vals = np.asarray(f(res.terminal[~res.aborted]), dtype=float)
        return float(vals.sum()), float((vals * vals).sum()), vals.size, res.aborted_count

    if workers <= 1:
        parts = [run(b) for b in range(n_batches)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_batches)))
    total = sum(p[0] for p in parts)
    total2 = sum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    aborted = sum(p[3] for p in parts)
    if count == 0:
        raise NumericalFailure("all paths aborted")
    mean = total / count
    var = max(total2 / count - mean * mean, 0.0)
    stderr = math.sqrt(var / count)
    return mean, stderr, count, aborted


def estimate(
    cfg: SchemeConfig,
    f: TestFunction,
    T: float,
    x0: float,
    n_list: list[int],
    paths: int,
    seed: int,
    *,
    workers: int = 1,
    reference: Optional[Reference] = None,
) -> WeakErrorReport:
    """Weak-error report over the step counts in n_list."""
    if paths < 100:
        raise ConfigurationError("need at least 100 paths")
    if sorted(set(n_list)) != list(n_list):
        raise ConfigurationError("n_list must be strictly increasing")
    if len(n_list) < 3:
        raise ConfigurationError("need at least 3 step counts to fit an order")
    ref = reference if reference is not None else reference_value(
        cfg.model, f, T, x0, fine_grid_of=max(n_list)
    )
    report = WeakErrorReport(
        scheme=cfg.kind, f_name=f.name, T=T, x0=x0, paths=paths, seed=seed,
        provenance=ref.provenance,
    )
    for i, n in enumerate(n_list):
        if cfg.kind in ("nv_extrapolated", "fujiwara4"):
            mean, stderr, count, aborted = _combined_estimate(
                cfg, f, T, n, x0, paths, seed, i, workers
            )
        else:
            mean, stderr, count, aborted = _run_batches(
                cfg, f, T, n, x0, paths, seed, (i,), workers
            )
        if aborted > MAX_ABORT_FRACTION * paths:
            raise NumericalFailure(
                f"{aborted} of {paths} paths aborted at n={n} "
                f"(limit {MAX_ABORT_FRACTION:.1%})"
            )
        err_bar = math.hypot(stderr, ref.stderr)
        report.rows.append(
            ReportRow(
                n=n, estimate=mean, stderr=err_bar, reference=ref.value,
                error=abs(mean - ref.value), aborted=aborted, paths=count,
            )
        )
    report.fit = fit_order(report)
    return report


def _combined_estimate(cfg, f, T, n, x0, paths, seed, n_index, workers):
    """Global extrapolated combination: weighted average of per-variant runs."""
    mean, var, count, aborted = 0.0, 0.0, 0, 0
    for k, (weight, sub_cfg, sub_n, branch) in enumerate(extrapolation_variants(cfg, n)):
        m, s, c, a = _run_batches(
            sub_cfg, f, T, sub_n, x0, paths, seed, (n_index, k + 1), workers,
            force_branch=branch,
        )
        mean += weight * m
        var += (weight * s) ** 2
        count += c
        aborted += a
    return mean, math.sqrt(var), count, aborted


def fit_order(report: WeakErrorReport) -> OrderFit:
    """Weighted LS slope of log error vs log n, noise-floor points excluded.

    Points with |error| below twice their error bar are inside the Monte
    Carlo noise floor and carry no order information; with fewer than three
    usable points the result is explicitly indeterminate rather than a guess.
    """
    usable = []
    for row in report.rows:
        floor = NOISE_FLOOR_MULTIPLE * row.stderr if row.stderr > 0 else DETERMINISTIC_FLOOR
        if row.error > floor:
            usable.append(row)
    if len(usable) < 3:
        return OrderFit(order=float("nan"), ci=float("inf"), status="indeterminate",
                        points_used=len(usable))
    xs = np.log([row.n for row in usable])
    ys = np.log([row.error for row in usable])
    if all(row.stderr > 0 for row in usable):
        sig = np.array([row.stderr / row.error for row in usable])
        w = 1.0 / sig**2
        known_var = True
    else:
        w = np.ones_like(xs)
        known_var = False
    X = np.column_stack([np.ones_like(xs), xs])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ ys)
    if not known_var:
        resid = ys - X @ beta
        dof = max(len(usable) - 2, 1)
        cov = cov * float(resid @ resid) / dof
    half_width = 1.96 * math.sqrt(max(cov[1, 1], 0.0))
    return OrderFit(
        order=-float(beta[1]), ci=half_width, status="ok",
        points_used=len(usable), intercept=float(beta[0]),
    )


def romberg_combine(e_n: float, e_2n: float, m: int) -> float:
    """Cancel the leading 1/n^m error term of the (n, 2n) estimate pair."""
    if m < 1:
        raise DomainError("romberg order m must be >= 1")
    return (2**m * e_2n - e_n) / (2**m - 1)


# ---------------------------------------------------------------------------
# Noise-free propagation for fully linear 1-d models
# ---------------------------------------------------------------------------

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)


def _noise_pow_moments(kind: str, p: int, t: float) -> np.ndarray:
    """E[amp^j], j = 0..p, for a duration-t amplitude draw."""
    base = gaussian_moment if kind == "gaussian" else three_point_moment
    return np.array([float(base(j)) * t ** (j / 2.0) for j in range(p + 1)])


def _flow_poly(choice, z: float) -> float:
    """Value of the configured flow on the unit linear field at amplitude z."""
    kind, order = choice
    if kind == "exact":
        return math.exp(z)
    if kind == "taylor":
        return sum(z**k / math.factorial(k) for k in range(order + 1))
    from .flows import TABLEAUS, linear_field, rk_flow

    return float(rk_flow(TABLEAUS[order], linear_field(1.0), z, 1.0))


def _bm_factor_moment(choice, noise: str, sigma: float, dur: float, p: int) -> float:
    """E[R(sigma * amp)^p] over the noise amplitude of duration dur."""
    if sigma == 0.0:
        return 1.0
    if noise == "three_point":
        amps = (-math.sqrt(3 * dur), 0.0, math.sqrt(3 * dur))
        probs = (1 / 6, 2 / 3, 1 / 6)
        return sum(pr * _flow_poly(choice, sigma * a) ** p for pr, a in zip(probs, amps))
    total = 0.0
    for u, w in zip(_GH_NODES, _GH_WEIGHTS):
        amp = math.sqrt(2.0 * dur) * u
        total += w * _flow_poly(choice, sigma * amp) ** p
    return total / math.sqrt(math.pi)


def _poisson_truncated_sum(lam_t: float, term: Callable, tail_tol: float = 1e-14) -> float:
    """sum_k P(N=k) term(k) with the series cut once the Poisson tail < tol."""
    total = 0.0
    pk = math.exp(-lam_t)
    cum = pk
    k = 0
    total += pk * term(0)
    while 1.0 - cum > tail_tol and k < 10_000:
        k += 1
        pk *= lam_t / k
        cum += pk
        total += pk * term(k)
    return total


def _cp_measure_quantities(measure, h1: float, p: int):
    atoms = np.asarray(measure.atoms, dtype=float)
    probs = np.asarray(measure.probs, dtype=float)
    jump_pow = float(np.sum(probs * (1 + h1 * atoms) ** p))
    return jump_pow


def _tail_expectation(measure, eps: float, func: Callable) -> float:
    """integral of func(y) d nu over |y| > eps via quadrature (or atoms)."""
    if measure.activity == "finite":
        mask = np.abs(measure.atoms) > eps
        return float(
            np.sum(measure.intensity * measure.probs[mask] * func(measure.atoms[mask]))
        )
    hi = measure.y_max if getattr(measure, "y_max", None) else np.inf
    pos = quad(lambda y: func(np.array(y)) * measure.density(np.array(y)), eps, hi, limit=200)[0]
    neg = quad(lambda y: func(np.array(-y)) * measure.density(np.array(-y)), eps, hi, limit=200)[0]
    return pos + neg


def _small_expectation(measure, eps: float, func: Callable) -> float:
    if measure.activity == "finite":
        mask = np.abs(measure.atoms) <= eps
        return float(
            np.sum(measure.intensity * measure.probs[mask] * func(measure.atoms[mask]))
        )
    pos = quad(lambda y: func(np.array(y)) * measure.density(np.array(y)), 0, eps, limit=200)[0]
    neg = quad(lambda y: func(np.array(-y)) * measure.density(np.array(-y)), 0, eps, limit=200)[0]
    return pos + neg


def _jump_factor_moment(cfg: SchemeConfig, plan: StepPlan, dur: float, p: int) -> float:
    """E[factor^p] of the jump coordinate map on a linear model.

    For the cutoff variants the inter-jump drift is taken as the exact
    exponential (the oracle's domain); the simulated flows differ from it at
    an order beyond the schemes' targets.
    """
    info = cfg.model.linear
    h1 = info.h1
    jump_kind = plan.jump_kind
    if jump_kind == "none" or h1 == 0.0:
        return 1.0
    measure = cfg.model.triplet.measure
    if jump_kind == "cp_truncate":
        lam = plan._cp_spec.intensity
        M = cfg.jump.M if cfg.jump.M is not None else math.inf
        jump_pow = _cp_measure_quantities(measure, h1, p)
        term = lambda k: jump_pow ** min(k, M) if M != math.inf else jump_pow**k
        return _poisson_truncated_sum(lam * dur, term)
    eps = plan.eps
    rate = plan._em_drift_rate
    c_eps = tail_mass(measure, eps)
    out = math.exp(p * h1 * rate * dur)
    if c_eps > 0:
        mean_pow = _tail_expectation(measure, eps, lambda y: (1 + h1 * y) ** p) / c_eps
        out *= math.exp(c_eps * dur * (mean_pow - 1.0))
    if jump_kind == "ar":
        sigma = math.sqrt(measure.small_moment(2, eps))
        if sigma > 0:
            s = cfg.jump.substeps
            out *= _bm_factor_moment(("taylor", 1), cfg.noise, h1 * sigma, dur / s, p) ** s
    return out


def _decomposed_factor_moment(cfg: SchemeConfig, plan: StepPlan, dur: float, p: int) -> float:
    info = cfg.model.linear
    h1 = info.h1
    measure = cfg.model.triplet.measure
    eps = plan.eps
    # L1: Euler step of the compensated drift.
    out = (1.0 + h1 * plan._em_drift_rate * dur) ** p
    # L2: Gaussianized small jumps, xi integrated exactly via Gaussian moments.
    l2 = plan._l2
    lam_eps = tail_mass(measure, eps, l2, region="small")
    if lam_eps > 0:
        gm = [float(gaussian_moment(j)) for j in range(p + 1)]

        def phi(y):
            a2 = dur * lam_eps / l2(y)
            c2 = (h1 * y) ** 2 * a2
            return sum(
                math.comb(p, j) * c2 ** (j // 2) * gm[j]
                for j in range(0, p + 1, 2)
            )

        out *= _small_expectation(measure, eps, lambda y: phi(y) * l2(y)) / lam_eps
    # L3: Bernoulli tail jumps.
    params = plan._bernoulli
    l3 = params.localization
    c_tail = params.tail
    if params.mode == "one":
        mean_pow = (
            _tail_expectation(measure, eps, lambda y: (1 + h1 * y / l3(y)) ** p) / c_tail
        )
        out *= (1 - params.p) + params.p * mean_pow
    else:
        mean_pow = _tail_expectation(measure, eps, lambda y: (1 + h1 * y) ** p) / c_tail
        out *= (
            (1 - params.p1)
            + params.p1 * (1 - params.p2) * mean_pow
            + params.p1 * params.p2 * mean_pow**2
        )
    return out


def _em_factor_moment(cfg: SchemeConfig, plan: StepPlan, t: float, p: int) -> float:
    """E[(1 + mu t + sigma dB + h1 dY)^p] via independent moment convolution."""
    info = cfg.model.linear
    measure = cfg.model.triplet.measure if cfg.model.has_jumps else None
    base = 1.0 + info.drift_tilde * t
    db_moms = np.zeros(p + 1)
    db_moms[0] = 1.0
    for s in info.sigmas:
        mk = _noise_pow_moments(cfg.noise, p, t)
        db_moms = _convolve_moments(db_moms, np.array([s**j * mk[j] for j in range(p + 1)]), p)
    dy_moms = np.zeros(p + 1)
    dy_moms[0] = 1.0
    if plan.jump_kind != "none" and info.h1 != 0.0:
        dy_moms = _driver_increment_moments(cfg, plan, t, p)
        dy_moms = np.array([info.h1**j * dy_moms[j] for j in range(p + 1)])
    total_moms = _convolve_moments(db_moms, dy_moms, p)
    return sum(math.comb(p, j) * base ** (p - j) * total_moms[j] for j in range(p + 1))


def _convolve_moments(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """Moments of a sum of independents from the moment sequences."""
    out = np.zeros(p + 1)
    for j in range(p + 1):
        out[j] = sum(math.comb(j, k) * a[k] * b[j - k] for k in range(j + 1))
    return out


def _driver_increment_moments(cfg: SchemeConfig, plan: StepPlan, t: float, p: int) -> np.ndarray:
    """E[dY^j], j=0..p, for the approximated driver increment over one step."""
    measure = cfg.model.triplet.measure
    if plan.jump_kind == "cp_truncate":
        M = cfg.jump.M if cfg.jump.M is not None else math.inf
        atoms = np.asarray(measure.atoms, dtype=float)
        probs = np.asarray(measure.probs, dtype=float)
        jm = np.array([float(np.sum(probs * atoms**j)) for j in range(p + 1)])
        lam = plan._cp_spec.intensity

        def sum_moments(k):
            out = np.zeros(p + 1)
            out[0] = 1.0
            for _ in range(min(k, M) if M != math.inf else k):
                out = _convolve_moments(out, jm, p)
            return out

        moms = np.zeros(p + 1)
        pk = math.exp(-lam * t)
        cum, k = pk, 0
        moms += pk * sum_moments(0)
        while 1.0 - cum > 1e-14 and k < 10_000:
            k += 1
            pk *= lam * t / k
            cum += pk
            moms += pk * sum_moments(k)
        return moms
    # ignore / ar: shifted compound Poisson (+ Gaussian for ar) via cumulants.
    eps = plan.eps
    rate = plan._em_drift_rate
    c_eps = tail_mass(measure, eps)
    kappa = np.zeros(p + 1)
    kappa[1] = rate * t
    for j in range(1, p + 1):
        if c_eps > 0:
            kappa[j] += t * _tail_expectation(measure, eps, lambda y, j=j: y**j)
    if plan.jump_kind == "ar" and p >= 2:
        kappa[2] += t * measure.small_moment(2, eps)
    moms = np.zeros(p + 1)
    moms[0] = 1.0
    for n_ in range(1, p + 1):
        moms[n_] = sum(
            math.comb(n_ - 1, k) * kappa[k + 1] * moms[n_ - 1 - k] for k in range(n_)
        )
    return moms


def deterministic_linear_propagation(
    cfg: SchemeConfig, f: TestFunction, T: float, n: int, x0: float = 1.0
) -> float:
    """E[f(X_T^(n))] for fully linear 1-d models, free of Monte Carlo noise.

    Each coordinate map multiplies the state by a factor independent of it,
    and factors within a step are independent, so the expectation is
    x0^p times the product of per-step factor moments raised to n.
    """
    info = cfg.model.linear
    if info is None:
        raise ConfigurationError("deterministic propagation needs a fully linear model")
    p = _monomial_degree(f)
    if p > 6:
        raise ConfigurationError("propagation supports monomials up to degree 6")
    if p == 0:
        return 1.0
    t = T / n
    choice = parse_flow_choice(cfg.diffusion_flow)
    plan = StepPlan(cfg, t)
    kind = cfg.kind

    def drift_factor(dur):
        return _flow_poly(choice, info.strat_drift * dur) ** p

    def bm_factor(i, dur):
        return _bm_factor_moment(choice, cfg.noise, info.sigmas[i], dur, p)

    if kind == "euler_maruyama":
        phi = _em_factor_moment(cfg, plan, t, p)
    elif kind in ("nv_a", "nv_b", "nv_extrapolated"):
        phi = drift_factor(t / 2) ** 2 if kind != "nv_b" else drift_factor(t)
        for i in range(len(info.sigmas)):
            phi *= bm_factor(i, t)
        phi *= _jump_factor_moment(cfg, plan, t, p)
    elif kind == "splitting":
        phi = drift_factor(t / 2) ** 2
        for i in range(len(info.sigmas)):
            phi *= bm_factor(i, t / 2) ** 2
        phi *= _jump_factor_moment(cfg, plan, t, p)
    elif kind == "one_jump_first_order":
        phi = (1.0 + info.strat_drift * t) ** p
        euler_choice = ("taylor", 1)
        for i in range(len(info.sigmas)):
            phi *= _bm_factor_moment(euler_choice, cfg.noise, info.sigmas[i], t, p)
        phi *= _decomposed_factor_moment(cfg, plan, t, p)
    elif kind == "fujiwara4":
        raise ConfigurationError(
            "combine per-variant propagations with the extrapolation weights instead"
        )
    else:
        raise ConfigurationError(f"unsupported scheme kind {kind!r}")
    return x0**p * phi**n


def extrapolated_propagation(cfg: SchemeConfig, f: TestFunction, T: float, n: int, x0: float = 1.0) -> float:
    """Noise-free value of a global extrapolated combination on a linear model."""
    total = 0.0
    for weight, sub_cfg, sub_n, _branch in extrapolation_variants(cfg, n):
        total += weight * deterministic_linear_propagation(sub_cfg, f, T, sub_n, x0)
    return total


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

CSV_HEADER = "scheme,n,paths,estimate,stderr,reference,error,seed"


def report_to_csv(report: WeakErrorReport) -> str:
    lines = [CSV_HEADER]
    for row in report.rows:
        lines.append(
            f"{report.scheme},{row.n},{row.paths},{row.estimate!r},{row.stderr!r},"
            f"{row.reference!r},{row.error!r},{report.seed}"
        )
    return "\n".join(lines) + "\n"


def write_report_csv(report: WeakErrorReport, path) -> None:
    with open(path, "w") as fh:
        fh.write(report_to_csv(report))


PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Log-log weak error vs n with the fitted order line.\"\"\"
import csv
import math
import sys

import matplotlib.pyplot as plt

csv_path = sys.argv[1] if len(sys.argv) > 1 else {csv_path!r}
ns, errors = [], []
with open(csv_path) as fh:
    for row in csv.DictReader(fh):
        ns.append(int(row["n"]))
        errors.append(float(row["error"]))
plt.figure(figsize=(5, 4))
plt.loglog(ns, errors, "o-", label="weak error")
order = float({order!r})
if order == order:  # skip NaN (indeterminate fit)
    c = errors[0] * ns[0] ** order
    plt.loglog(ns, [c / n ** order for n in ns], "--", label=f"slope {{order:.2f}}")
plt.xlabel("n")
plt.ylabel("|E f(X_T) - estimate|")
plt.title({title!r})
plt.legend()
plt.tight_layout()
plt.savefig({png_path!r}, dpi=150)
print("wrote", {png_path!r})
"""


def write_plot_script(report: WeakErrorReport, csv_path, script_path, png_path) -> None:
    order = report.fit.order if report.fit else float("nan")
    with open(script_path, "w") as fh:
        fh.write(
            PLOT_SCRIPT.format(
                csv_path=str(csv_path),
                order=str(order),
                title=f"{report.scheme} / f={report.f_name}",
                png_path=str(png_path),
            )
        )
