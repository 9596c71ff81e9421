"""SDE model descriptions and the named model catalog.

A model bundles the Ito drift, the Brownian coordinate fields, the jump
coefficient and the driving Levy triplet; the Stratonovich-corrected drift is
derived once at construction.  Fully linear 1-d models additionally record
their coefficients so the noise-free propagation oracle can run on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .exceptions import ConfigurationError
from .flows import VectorFieldSpec, linear_field, stratonovich_drift
from .jumps import JumpCoefficients, linear_jump
from .levy import (
    CompoundPoissonMeasure,
    LevyTriplet,
    TemperedStableMeasure,
    zero_measure,
)


@dataclass(frozen=True)
class LinearModelInfo:
    """Coefficients of a fully linear scalar model (all maps multiply x)."""

    drift_tilde: float
    strat_drift: float
    sigmas: tuple[float, ...]
    h1: float


@dataclass
class SdeModel:
    name: str
    dim: int
    d: int
    drift_tilde: VectorFieldSpec
    brownian: tuple[VectorFieldSpec, ...]
    strat_drift: VectorFieldSpec
    h: Optional[JumpCoefficients]
    triplet: Optional[LevyTriplet]
    linear: Optional[LinearModelInfo] = None
    vectorized: bool = True

    @property
    def has_jumps(self) -> bool:
        return self.triplet is not None and self.h is not None


def make_gbm(mu: float = 0.05, sigma: float = 0.2) -> SdeModel:
    """Geometric Brownian motion: dX = mu X dt + sigma X dB."""
    drift = linear_field(mu, name="mu*x")
    diffusion = linear_field(sigma, name="sigma*x")
    strat = linear_field(mu - sigma**2 / 2.0, name="(mu-sigma^2/2)*x")
    return SdeModel(
        name="gbm",
        dim=1,
        d=1,
        drift_tilde=drift,
        brownian=(diffusion,),
        strat_drift=strat,
        h=None,
        triplet=None,
        linear=LinearModelInfo(mu, mu - sigma**2 / 2.0, (sigma,), 0.0),
    )


def make_linear_cp(intensity: float = 1.0, jump_size: float = 0.1) -> SdeModel:
    """Pure-jump linear model dX = X- dY with a single-atom compound Poisson driver."""
    measure = CompoundPoissonMeasure(intensity, [jump_size])
    zero = linear_field(0.0, name="0")
    return SdeModel(
        name="linear_cp",
        dim=1,
        d=0,
        drift_tilde=zero,
        brownian=(),
        strat_drift=zero,
        h=linear_jump(1.0),
        triplet=LevyTriplet.from_pure_jump(measure),
        linear=LinearModelInfo(0.0, 0.0, (), 1.0),
    )


def make_linear_levy(
    measure,
    b: Optional[float] = None,
    h1: float = 1.0,
    mu: float = 0.0,
    sigma: float = 0.0,
) -> SdeModel:
    """Linear model dX = mu X dt + sigma X dB + h1 X- dY with a general driver.

    ``b`` overrides the driver drift; by default the driver is the raw jump
    process (b = integral of the truncation function).
    """
    triplet = LevyTriplet.from_pure_jump(measure) if b is None else LevyTriplet(b, measure)
    drift = linear_field(mu, name="mu*x")
    sigmas = (sigma,) if sigma != 0.0 else ()
    brownian = tuple(linear_field(s, name="sigma*x") for s in sigmas)
    strat = linear_field(mu - sigma**2 / 2.0)
    return SdeModel(
        name="linear_levy",
        dim=1,
        d=len(brownian),
        drift_tilde=drift,
        brownian=brownian,
        strat_drift=strat,
        h=linear_jump(h1),
        triplet=triplet,
        linear=LinearModelInfo(mu, mu - sigma**2 / 2.0, sigmas, h1),
    )


def make_zero() -> SdeModel:
    """Null dynamics: every scheme must return the initial state."""
    zero = linear_field(0.0, name="0")
    return SdeModel(
        name="zero",
        dim=1,
        d=0,
        drift_tilde=zero,
        brownian=(),
        strat_drift=zero,
        h=linear_jump(0.0),
        triplet=LevyTriplet(0.0, zero_measure()),
        linear=LinearModelInfo(0.0, 0.0, (), 0.0),
    )


def make_custom(drift_tilde, brownian, h=None, triplet=None, name="custom", vectorized=False) -> SdeModel:
    """Library extension point: assemble a model from explicit field specs."""
    strat = stratonovich_drift(drift_tilde, list(brownian)) if brownian else drift_tilde
    return SdeModel(
        name=name,
        dim=drift_tilde.dim,
        d=len(brownian),
        drift_tilde=drift_tilde,
        brownian=tuple(brownian),
        strat_drift=strat,
        h=h,
        triplet=triplet,
        vectorized=vectorized,
    )


def _measure_from_params(params: dict):
    family = params.get("family")
    if family == "tempered_stable":
        return TemperedStableMeasure(
            params["alpha"],
            params.get("c_plus", 1.0),
            params.get("c_minus", 1.0),
            params.get("lambda_plus", 0.0),
            params.get("lambda_minus", 0.0),
            y_max=params.get("y_max"),
        )
    if family == "compound_poisson":
        return CompoundPoissonMeasure(
            params["intensity"],
            params["atoms"],
            params.get("probs"),
        )
    raise ConfigurationError(f"unknown measure family {family!r}")


def from_config(params: dict) -> SdeModel:
    """Build a catalog model from a flat parameter mapping (CLI entry point)."""
    name = params.get("name")
    if name == "gbm":
        return make_gbm(params.get("mu", 0.05), params.get("sigma", 0.2))
    if name == "linear_cp":
        return make_linear_cp(params.get("intensity", 1.0), params.get("jump_size", 0.1))
    if name == "linear_levy":
        measure = _measure_from_params(params.get("measure", {}))
        return make_linear_levy(
            measure,
            b=params.get("b"),
            h1=params.get("h1", 1.0),
            mu=params.get("mu", 0.0),
            sigma=params.get("sigma", 0.0),
        )
    if name == "zero":
        return make_zero()
    raise ConfigurationError(
        f"unknown model {name!r}; catalog: gbm, linear_cp, linear_levy, zero"
    )
