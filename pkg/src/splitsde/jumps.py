"""One-step maps for the jump coordinate of a Levy driven SDE.

Variants, in increasing sophistication:

* exact compound Poisson recursion, optionally truncated at M jumps;
* small jumps dropped below a cutoff (finite-activity surrogate driver);
* small jumps replaced by a Gaussian with the matching covariance
  (Asmussen-Rosinski correction), simulated by an inner Strang splitting;
* the drift / small-jump-Gaussian / Bernoulli-jump decomposition that caps
  the work per interval at one or two tail jumps.

All maps are written batch-first: the state is a scalar or an array whose
leading axis indexes paths, and every random input comes from the caller's
generator.  Jump drivers are scalar (d = 1); the measure layer's
multidimensional models are for moment computations only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly

from .exceptions import ConfigurationError, DomainError
from .flows import TABLEAUS, VectorFieldSpec, rk_flow, sample_noise
from .levy import (
    UNIT_LOCALIZATION,
    LevyMeasureModel,
    LevyTriplet,
    Localization,
    sample_small_localized,
    sample_tail,
    tail_mass,
)


@dataclass
class JumpCoefficients:
    """Coefficient h of the jump term dX = ... + h(X-) dY (scalar driver).

    ``linear``/``constant`` record closed structure (h(x) = linear*x or a
    constant) so drift flows and the noise-free propagation oracle can take
    exact shortcuts.
    """

    func: Callable
    lipschitz: Optional[float] = None
    bounded_derivatives: bool = True
    linear: Optional[float] = None
    constant: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return self.func(x)


def linear_jump(h1: float = 1.0) -> JumpCoefficients:
    return JumpCoefficients(
        func=lambda x: h1 * np.asarray(x, dtype=float),
        lipschitz=abs(h1),
        linear=h1,
        name=f"h(x)={h1}*x",
    )


def constant_jump(h0: float = 1.0) -> JumpCoefficients:
    return JumpCoefficients(
        func=lambda x: np.full_like(np.asarray(x, dtype=float), h0),
        lipschitz=0.0,
        constant=h0,
        name=f"h(x)={h0}",
    )


@dataclass
class CompoundPoissonSpec:
    """Finite-activity driver: Poisson arrivals with i.i.d. jump sizes."""

    intensity: float
    sample: Callable  # (rng, size) -> jump sizes
    jump_mean: float

    def __post_init__(self):
        if self.intensity <= 0:
            raise ConfigurationError("compound Poisson intensity must be positive")

    @classmethod
    def from_measure(cls, measure) -> "CompoundPoissonSpec":
        total = measure.localized_mass(math.inf, UNIT_LOCALIZATION, "small")
        mean = measure.signed_small_moment(1, math.inf) / total
        return cls(
            intensity=total,
            sample=lambda rng, size: measure.sample_small(math.inf, UNIT_LOCALIZATION, rng, size=size),
            jump_mean=mean,
        )


def _as_batch(x):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    scalar = np.ndim(x) == 0
    return arr, scalar


def _unbatch(arr, scalar):
    return float(arr[0]) if scalar else arr


def _apply_jump(h, x, y):
    return x + np.asarray(h(x), dtype=float) * y


def default_drift_step(h, rate: float):
    """ODE step for dx/ds = h(x)*rate: exact for recorded structure, RK4 otherwise."""
    if rate == 0.0:
        return lambda dt, x: x
    if h.linear is not None:
        a = h.linear * rate
        return lambda dt, x: np.exp(a * np.asarray(dt, dtype=float)) * x
    if h.constant is not None:
        c = h.constant * rate
        return lambda dt, x: x + np.asarray(dt, dtype=float) * c
    field = VectorFieldSpec(dim=1, func=lambda x: rate * np.asarray(h(x), dtype=float))
    return lambda dt, x: rk_flow(TABLEAUS[4], field, dt, x)


def euler_drift_step(h, rate: float):
    """Plain Euler step for dx/ds = h(x)*rate."""
    return lambda dt, x: x + np.asarray(dt, dtype=float) * rate * np.asarray(h(x), dtype=float)


def effective_drift_rate(triplet: LevyTriplet, eps: float) -> float:
    """Compensated drift b - integral_{eps<|y|<=1} y nu(dy)."""
    band = triplet.measure.band_first_moment(eps, 1.0) if eps < 1.0 else 0.0
    return float(triplet.b) - float(band)


# ---------------------------------------------------------------------------
# Compound Poisson: exact recursion, truncated at M jumps
# ---------------------------------------------------------------------------


def compound_poisson_flow(h, cp: CompoundPoissonSpec, t, x, M, rng, stats=None):
    """G-recursion driven by N ~ Poisson(lambda t), applying min(N, M) jumps."""
    if t < 0:
        raise DomainError("step duration must be nonnegative")
    xb, scalar = _as_batch(x)
    n = rng.poisson(cp.intensity * t, size=xb.shape[0])
    applied = n if M is None or M == math.inf else np.minimum(n, int(M))
    kmax = int(applied.max()) if applied.size else 0
    for k in range(1, kmax + 1):
        mask = applied >= k
        jumps = np.asarray(cp.sample(rng, int(mask.sum())), dtype=float)
        xb[mask] = _apply_jump(h, xb[mask], jumps)
    if stats is not None:
        stats["jumps"] = stats.get("jumps", 0) + int(applied.sum())
    return _unbatch(xb, scalar)


# ---------------------------------------------------------------------------
# Ignoring small jumps: finite-activity surrogate with compensated drift
# ---------------------------------------------------------------------------


def ignore_small_flow(h, triplet: LevyTriplet, eps, t, x, rng, *, drift_step=None, stats=None):
    """One step of the SDE driven by the jumps of size > eps.

    Between the Poisson jump times (order statistics of uniforms), the state
    follows the ODE dx/ds = h(x) * (b - compensator); each jump applies
    x += h(x) y with y drawn from the normalized tail measure.
    """
    if triplet.measure.d != 1:
        raise ConfigurationError("jump one-step maps support scalar drivers only")
    xb, scalar = _as_batch(x)
    rate = effective_drift_rate(triplet, eps)
    if drift_step is None:
        drift_step = default_drift_step(h, rate)
    c_eps = tail_mass(triplet.measure, eps)
    if c_eps == 0.0:
        return _unbatch(drift_step(t, xb), scalar)
    n = rng.poisson(c_eps * t, size=xb.shape[0])
    kmax = int(n.max()) if n.size else 0
    if kmax == 0:
        return _unbatch(drift_step(t, xb), scalar)
    times = np.sort(rng.random((xb.shape[0], kmax)), axis=1) * t
    # Unused slots collapse onto the endpoint so their gaps vanish.
    times[np.arange(kmax)[None, :] >= n[:, None]] = t
    prev = np.zeros(xb.shape[0])
    for k in range(kmax):
        gap = times[:, k] - prev
        xb = drift_step(gap, xb)
        mask = n > k
        y = sample_tail(triplet.measure, eps, UNIT_LOCALIZATION, rng, size=int(mask.sum()))
        xb[mask] = _apply_jump(h, xb[mask], y)
        prev = times[:, k]
    xb = drift_step(t - prev, xb)
    if stats is not None:
        stats["jumps"] = stats.get("jumps", 0) + int(n.sum())
    return _unbatch(xb, scalar)


# ---------------------------------------------------------------------------
# Asmussen-Rosinski correction: small jumps become a Gaussian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArInnerConfig:
    """Inner discretization of the corrected jump-diffusion step.

    One Strang substep is drift half / Gaussian full / jumps full / drift
    half; ``substeps`` repeats the pattern on subintervals.  The Gaussian
    part applies the Ito increment x + h(x) sigma_eps dW, which matches the
    target generator to first order without requiring derivatives of h.
    """

    substeps: int = 1
    noise: str = "gaussian"

    def __post_init__(self):
        if self.substeps < 1:
            raise ConfigurationError("substeps must be >= 1")


def ar_flow(h, triplet: LevyTriplet, eps, t, x, inner: ArInnerConfig, rng, *, drift_step=None, stats=None):
    """One step of the jump-diffusion with small jumps Gaussian-replaced."""
    if triplet.measure.d != 1:
        raise ConfigurationError("jump one-step maps support scalar drivers only")
    xb, scalar = _as_batch(x)
    rate = effective_drift_rate(triplet, eps)
    if drift_step is None:
        drift_step = default_drift_step(h, rate)
    sigma = math.sqrt(triplet.measure.small_moment(2, eps))
    c_eps = tail_mass(triplet.measure, eps)
    dt = t / inner.substeps
    for _ in range(inner.substeps):
        xb = drift_step(dt / 2.0, xb)
        if sigma > 0.0:
            dw = sample_noise(inner.noise, dt, rng, size=xb.shape[0])
            xb = xb + np.asarray(h(xb), dtype=float) * sigma * dw
        if c_eps > 0.0:
            n = rng.poisson(c_eps * dt, size=xb.shape[0])
            kmax = int(n.max()) if n.size else 0
            for k in range(kmax):
                mask = n > k
                y = sample_tail(triplet.measure, eps, UNIT_LOCALIZATION, rng, size=int(mask.sum()))
                xb[mask] = _apply_jump(h, xb[mask], y)
            if stats is not None:
                stats["jumps"] = stats.get("jumps", 0) + int(n.sum())
        xb = drift_step(dt / 2.0, xb)
    return _unbatch(xb, scalar)


# ---------------------------------------------------------------------------
# Decomposed drift / Gaussianized small jumps / Bernoulli tail jumps
# ---------------------------------------------------------------------------


def decomposed_drift_step(h, triplet: LevyTriplet, eps, t, x, ode_flow=None):
    """Deterministic flow of the compensated-drift generator piece.

    Defaults to the plain Euler step (all the first-order composition needs);
    ``ode_flow`` may substitute any callable (dt, x) -> x integrating
    dx/ds = h(x) * rate.
    """
    rate = effective_drift_rate(triplet, eps)
    step = euler_drift_step(h, rate) if ode_flow is None else ode_flow
    xb, scalar = _as_batch(x)
    return _unbatch(step(t, xb), scalar)


def small_jump_gaussian_step(h, model: LevyMeasureModel, eps, l: Localization, t, x, rng):
    """Gaussian surrogate for the small-jump piece, conditional covariance rank one.

    Draws Y from the localized small-jump law and a standard Gaussian xi and
    moves by h(x) * Y * xi * sqrt(t * lambda_eps / l(Y)); the increment's
    unconditional second moment is exactly t * h(x) Sigma_eps h(x)*.
    """
    lam_eps = tail_mass(model, eps, l, region="small")
    xb, scalar = _as_batch(x)
    if lam_eps == 0.0:
        return _unbatch(xb, scalar)
    y = sample_small_localized(model, eps, l, rng, size=xb.shape[0])
    xi = rng.standard_normal(xb.shape[0])
    amp = y * xi * np.sqrt(t * lam_eps / l(y))
    return _unbatch(_apply_jump(h, xb, amp), scalar)


@dataclass(frozen=True)
class BernoulliJumpParams:
    """Success probabilities of the one- and two-jump tail schemes.

    For the one-jump scheme ``p`` obeys |C^-1 p - t| <= c_check * t^2; the
    two-jump probabilities satisfy the second-order premises with zero
    defect: C^-1 p_eps = t and C^-2 q_eps = t^2/2 exactly, where
    p_eps = P1(1+P2) and q_eps = P1*P2.
    """

    mode: str
    tail: float
    t: float
    eps: Optional[float] = None
    localization: Localization = UNIT_LOCALIZATION
    p: Optional[float] = None
    p1: Optional[float] = None
    p2: Optional[float] = None
    c_check: Optional[float] = None

    def __post_init__(self):
        for value in (self.p, self.p1, self.p2):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"probability {value} outside [0, 1]")


def solve_bernoulli(C, t, mode: str, *, eps=None, localization=UNIT_LOCALIZATION) -> BernoulliJumpParams:
    """Construct Bernoulli parameters against a tail mass C over a step t.

    one-jump: p = 1 - exp(-C t), the probability of at least one Poisson
    arrival; its premise defect is below (C/2) t^2.  two-jump: the exact
    solve P1 = C t - (C t)^2/2, P2 = C t/(2 - C t), valid for C t < 1.
    Exact (Fraction) inputs propagate exactly in two-jump mode.
    """
    if C <= 0 or t <= 0:
        raise DomainError("tail mass and step must be positive")
    if mode == "one":
        p = 1.0 - math.exp(-float(C) * float(t))
        return BernoulliJumpParams(
            mode="one", tail=float(C), t=float(t), eps=eps,
            localization=localization, p=p, c_check=float(C) / 2.0,
        )
    if mode == "two":
        if localization.r != 0.0:
            raise ConfigurationError("the two-jump scheme uses localization l == 1")
        exact = isinstance(C, Fraction) or isinstance(t, Fraction)
        u = (Fraction(C) * Fraction(t)) if exact else float(C) * float(t)
        if u >= 1:
            raise DomainError(f"two-jump mode needs C*t < 1, got {float(u)}")
        p1 = u - u * u / 2
        p2 = u / (2 - u)
        if exact:
            return BernoulliJumpParams(
                mode="two", tail=C, t=t, eps=eps, localization=localization,
                p1=p1, p2=p2, c_check=0.0,
            )
        return BernoulliJumpParams(
            mode="two", tail=float(C), t=float(t), eps=eps, localization=localization,
            p1=float(p1), p2=float(p2), c_check=0.0,
        )
    raise ConfigurationError(f"unknown Bernoulli mode {mode!r}")


def one_jump_step(h, model: LevyMeasureModel, params: BernoulliJumpParams, t, x, rng, stats=None):
    """At most one localized tail jump per step."""
    if params.mode != "one":
        raise ConfigurationError("params were not solved for one-jump mode")
    xb, scalar = _as_batch(x)
    hit = rng.random(xb.shape[0]) < params.p
    count = int(hit.sum())
    if count:
        z = sample_tail(model, params.eps, params.localization, rng, size=count)
        xb[hit] = _apply_jump(h, xb[hit], z / params.localization(z))
        if stats is not None:
            stats["jumps"] = stats.get("jumps", 0) + count
    return _unbatch(xb, scalar)


def two_jump_step(h, model: LevyMeasureModel, params: BernoulliJumpParams, t, x, rng, stats=None):
    """At most two tail jumps per step (localization l == 1)."""
    if params.mode != "two":
        raise ConfigurationError("params were not solved for two-jump mode")
    xb, scalar = _as_batch(x)
    u1 = rng.random(xb.shape[0])
    u2 = rng.random(xb.shape[0])
    s1 = u1 < params.p1
    s2 = s1 & (u2 < params.p2)
    n1 = int(s1.sum())
    if n1:
        z1 = sample_tail(model, params.eps, params.localization, rng, size=n1)
        xb[s1] = _apply_jump(h, xb[s1], z1)
        n2 = int(s2.sum())
        if n2:
            z2 = sample_tail(model, params.eps, params.localization, rng, size=n2)
            xb[s2] = _apply_jump(h, xb[s2], z2)
        if stats is not None:
            stats["jumps"] = stats.get("jumps", 0) + n1 + n2
    return _unbatch(xb, scalar)


# ---------------------------------------------------------------------------
# Exact generator defects for polynomial test functions
# ---------------------------------------------------------------------------


def per_step_defect(model: LevyMeasureModel, h, f_coeffs, x: float, eps: float, variant: str) -> float:
    """Exact value of (true generator - approximate generator) f at x.

    Restricted to scalar models, affine h and polynomial f of degree <= 6,
    where expanding f under the jump integral reduces the defect to signed
    small-jump moments: dropping the small jumps leaves all terms of order
    >= 2, the Gaussian correction removes exactly the quadratic one.
    """
    if model.d != 1:
        raise ConfigurationError("defect computation is 1-d only")
    coeffs = np.asarray(f_coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size > 7:
        raise ConfigurationError("f must be a polynomial of degree <= 6 (ascending coefficients)")
    if variant not in ("ignore", "ar"):
        raise ConfigurationError(f"unknown defect variant {variant!r}")
    if h.linear is None and h.constant is None:
        raise ConfigurationError("defect computation needs affine h (linear/constant structure)")
    h1 = h.linear or 0.0
    h0 = h.constant or 0.0
    hx = h1 * x + h0
    degree = coeffs.size - 1
    start = 2 if variant == "ignore" else 3
    total = 0.0
    deriv = coeffs
    for j in range(1, degree + 1):
        deriv = npoly.polyder(deriv)
        if j < start:
            continue
        fj = npoly.polyval(x, deriv)
        total += fj / math.factorial(j) * hx**j * model.signed_small_moment(j, eps)
    return total
