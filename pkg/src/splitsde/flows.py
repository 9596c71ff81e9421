"""One-step flow maps for drift and Brownian coordinate processes.

A coordinate SDE driven by a single Brownian component is solved by the
exponential map of its vector field evaluated at the (signed) Brownian
amplitude.  When no closed form is available the map is approximated by a
truncated Taylor flow ``b_m`` or an explicit Runge-Kutta flow ``c_m``, or by a
high-accuracy reference ODE solve.  Gaussian amplitudes may be replaced by the
three-point variable matching Gaussian moments through order five.

States are numpy arrays; all maps broadcast over a leading batch axis so the
same code serves single paths and vectorized path bundles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import ConfigurationError, DomainError, NumericalFailure

NOISE_KINDS = ("gaussian", "three_point")

_SQRT3 = math.sqrt(3.0)
_EPS = np.finfo(float).eps


@dataclass
class VectorFieldSpec:
    """A smooth vector field with optional analytic extras.

    ``func``      x -> V(x), broadcasting over a batch axis.
    ``flow``      optional closed-form exponential map (t, x) -> exp(tV)x.
    ``iterated``  optional (k, x) -> (V^k e)(x): k-fold application of the
                  field as a derivation to the coordinate functions
                  (k=0 gives x, k=1 gives V(x)).
    ``iterated_order``  largest k served by ``iterated`` (None = unlimited).
    ``jacobian``  optional x -> dV/dx (scalar for 1-d fields).
    ``allow_fd``  permit low-accuracy finite-difference fallbacks for missing
                  derivative data; fallbacks are refused when False.
    """

    dim: int
    func: Callable
    flow: Optional[Callable] = None
    iterated: Optional[Callable] = None
    iterated_order: Optional[int] = None
    jacobian: Optional[Callable] = None
    linear_growth: bool = True
    allow_fd: bool = False
    name: str = ""

    def __call__(self, x):
        return self.func(x)


def linear_field(a: float, name: str = "") -> VectorFieldSpec:
    """1-d field V(x) = a*x with exact flow and iterated derivatives."""
    return VectorFieldSpec(
        dim=1,
        func=lambda x: a * np.asarray(x, dtype=float),
        flow=lambda t, x: np.exp(a * np.asarray(t, dtype=float)) * x,
        iterated=lambda k, x: a**k * np.asarray(x, dtype=float),
        iterated_order=None,
        jacobian=lambda x: np.full_like(np.asarray(x, dtype=float), a),
        name=name or f"linear({a})",
    )


def constant_field(c, dim: int | None = None, name: str = "") -> VectorFieldSpec:
    """Field V(x) = c: the flow is a straight line."""
    c = np.asarray(c, dtype=float)
    dim = dim if dim is not None else (c.size if c.ndim else 1)

    def iterated(k, x):
        x = np.asarray(x, dtype=float)
        if k == 0:
            return x
        if k == 1:
            return np.broadcast_to(c, x.shape).copy()
        return np.zeros_like(x)

    return VectorFieldSpec(
        dim=dim,
        func=lambda x: np.broadcast_to(c, np.shape(x)).copy(),
        flow=lambda t, x: x + np.asarray(t, dtype=float) * c,
        iterated=iterated,
        jacobian=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        name=name or "constant",
    )


def matrix_field(A: np.ndarray, name: str = "") -> VectorFieldSpec:
    """N-d linear field V(x) = A @ x (closed flow via the matrix exponential)."""
    from scipy.linalg import expm

    A = np.asarray(A, dtype=float)

    def flow(t, x):
        return np.asarray(x, dtype=float) @ expm(float(t) * A).T

    def iterated(k, x):
        return np.asarray(x, dtype=float) @ np.linalg.matrix_power(A, k).T

    return VectorFieldSpec(
        dim=A.shape[0],
        func=lambda x: np.asarray(x, dtype=float) @ A.T,
        flow=flow,
        iterated=iterated,
        jacobian=lambda x: A,
        name=name or "matrix_linear",
    )


@dataclass(frozen=True)
class ButcherTableau:
    """Explicit Runge-Kutta tableau: strictly lower-triangular stages."""

    name: str
    alpha: tuple[tuple[float, ...], ...]  # alpha[i] are the i-th stage's couplings
    beta: tuple[float, ...]
    order: int

    def __post_init__(self):
        s = len(self.beta)
        if len(self.alpha) != s:
            raise ConfigurationError("tableau alpha must have one row per stage")
        for i, row in enumerate(self.alpha):
            if len(row) != i:
                raise ConfigurationError(
                    "explicit tableau requires strictly lower-triangular alpha"
                )
        if abs(sum(self.beta) - 1.0) > 1e-12:
            raise ConfigurationError("tableau weights must sum to 1")

    @property
    def stages(self) -> int:
        return len(self.beta)


TABLEAUS = {
    1: ButcherTableau("euler", ((),), (1.0,), 1),
    2: ButcherTableau("midpoint", ((), (0.5,)), (0.0, 1.0), 2),
    3: ButcherTableau(
        "kutta3",
        ((), (0.5,), (-1.0, 2.0)),
        (1 / 6, 2 / 3, 1 / 6),
        3,
    ),
    4: ButcherTableau(
        "classical4",
        ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)),
        (1 / 6, 1 / 3, 1 / 3, 1 / 6),
        4,
    ),
    # Fehlberg's 6-stage fifth-order formula.
    5: ButcherTableau(
        "fehlberg5",
        (
            (),
            (1 / 4,),
            (3 / 32, 9 / 32),
            (1932 / 2197, -7200 / 2197, 7296 / 2197),
            (439 / 216, -8.0, 3680 / 513, -845 / 4104),
            (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
        ),
        (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55),
        5,
    ),
}


def _broadcast_t(t, x):
    """Shape a (possibly per-path) time array against the state array."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.ndim and x.ndim > t.ndim:
        return t.reshape(t.shape + (1,) * (x.ndim - t.ndim))
    return t


def exp_map(V: VectorFieldSpec, t, x, *, rtol: float = 1e-12):
    """Exponential map exp(t*V)x: closed form or reference ODE solve.

    ``t`` may be negative (Brownian amplitudes are signed).  The reference
    solver is adaptive DOP853 at the requested relative tolerance and only
    handles a single state vector; batches need a closed-form flow.
    """
    if V.flow is not None:
        return V.flow(_broadcast_t(t, x), x)
    t = float(t)
    scalar_state = np.ndim(x) == 0
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if x_arr.ndim > 1:
        raise ConfigurationError(
            "reference ODE solve handles one state at a time; "
            "provide a closed-form flow for batched states"
        )
    if t == 0.0:
        return float(x_arr[0]) if scalar_state else x_arr.copy()
    sol = solve_ivp(
        lambda s, y: np.asarray(V.func(y), dtype=float),
        (0.0, t),
        x_arr,
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-2,
    )
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise NumericalFailure(
            f"reference flow solve failed for field {V.name!r}: {sol.message}",
            last_state=sol.y[:, -1] if sol.y.size else x_arr,
        )
    out = sol.y[:, -1]
    return float(out[0]) if scalar_state else out


def _fd_iterated(V: VectorFieldSpec, k: int, x):
    """Nested central differences for (V^k e)(x); low accuracy, flagged."""
    x = np.asarray(x, dtype=float)

    def g(j, y):
        if j == 0:
            return y
        if j == 1:
            return np.asarray(V.func(y), dtype=float)
        norm = np.sqrt(np.sum(np.atleast_1d(y * y), axis=-1))
        h = _EPS ** (1.0 / (j + 2)) * (1.0 + norm)
        hb = _broadcast_t(h, y)
        step = hb * np.asarray(V.func(y), dtype=float)
        return (g(j - 1, y + step) - g(j - 1, y - step)) / (2.0 * hb)

    return g(k, x)


def iterated_derivative(V: VectorFieldSpec, k: int, x):
    """(V^k e)(x) from closed form when available, else the FD fallback."""
    if k == 0:
        return np.asarray(x, dtype=float)
    if V.iterated is not None and (V.iterated_order is None or k <= V.iterated_order):
        return np.asarray(V.iterated(k, x), dtype=float)
    if k == 1:
        return np.asarray(V.func(x), dtype=float)
    if not V.allow_fd:
        raise ConfigurationError(
            f"field {V.name!r} lacks iterated derivatives up to order {k} "
            "and finite-difference fallback is disabled"
        )
    return _fd_iterated(V, k, x)


def taylor_flow(V: VectorFieldSpec, m: int, t, x):
    """Truncated Taylor flow: sum_{k<=m} t^k/k! (V^k e)(x)."""
    if m < 0:
        raise ConfigurationError("taylor order must be >= 0")
    x = np.asarray(x, dtype=float)
    tb = _broadcast_t(t, x)
    acc = np.array(x, dtype=float, copy=True)
    tk = np.ones_like(tb) if np.ndim(tb) else 1.0
    for k in range(1, m + 1):
        tk = tk * tb / k
        acc = acc + tk * iterated_derivative(V, k, x)
    return acc


def rk_flow(tab: ButcherTableau, V: VectorFieldSpec, t, x, *, check: bool = True):
    """Explicit Runge-Kutta flow c_m(t, V)x; non-finite results abort.

    ``check=False`` suppresses the error so batched path engines can freeze
    and count aborted paths themselves.
    """
    x = np.asarray(x, dtype=float)
    tb = _broadcast_t(t, x)
    stages = []
    for i in range(tab.stages):
        xi = x
        for j, a in enumerate(tab.alpha[i]):
            if a != 0.0:
                xi = xi + tb * a * stages[j]
        with np.errstate(all="ignore"):
            stages.append(np.asarray(V.func(xi), dtype=float))
    out = x
    for b, k in zip(tab.beta, stages):
        if b != 0.0:
            out = out + tb * b * k
    if check and not np.all(np.isfinite(out)):
        raise NumericalFailure(
            f"Runge-Kutta flow produced non-finite values for field {V.name!r}",
            last_state=out,
        )
    return out


# ---------------------------------------------------------------------------
# Noise sources
# ---------------------------------------------------------------------------


def sample_noise(kind: str, t, rng, size=None):
    """Brownian amplitude over time t: N(0, t) or the moment-matched sqrt(t)*Z.

    Z takes values {-sqrt(3), 0, +sqrt(3)} with probabilities {1/6, 2/3, 1/6},
    matching Gaussian moments through order five.
    """
    if kind not in NOISE_KINDS:
        raise ConfigurationError(f"unknown noise kind {kind!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("noise duration must be nonnegative")
    if kind == "gaussian":
        return np.sqrt(t) * rng.standard_normal(size)
    u = rng.random(size)
    z = np.where(u < 1 / 6, -_SQRT3, np.where(u < 5 / 6, 0.0, _SQRT3))
    out = np.sqrt(t) * z
    if size is None and np.ndim(out) == 0:
        return float(out)
    return out


def three_point_moment(k: int) -> Fraction:
    """E[Z^k] in exact arithmetic."""
    if k < 0:
        raise DomainError("moment order must be >= 0")
    if k == 0:
        return Fraction(1)
    if k % 2 == 1:
        return Fraction(0)
    return Fraction(3 ** (k // 2), 3)


def gaussian_moment(k: int) -> Fraction:
    """E[N(0,1)^k] in exact arithmetic: (k-1)!! for even k."""
    if k < 0:
        raise DomainError("moment order must be >= 0")
    if k % 2 == 1:
        return Fraction(0)
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return Fraction(out)


def noise_moment(kind: str, k: int, t: float) -> float:
    """E[amplitude^k] for a duration-t draw of the given noise kind."""
    if kind not in NOISE_KINDS:
        raise ConfigurationError(f"unknown noise kind {kind!r}")
    base = gaussian_moment(k) if kind == "gaussian" else three_point_moment(k)
    return float(base) * t ** (k / 2.0)


# ---------------------------------------------------------------------------
# Stratonovich drift correction
# ---------------------------------------------------------------------------


def _apply_jacobian(jac, v):
    jac = np.asarray(jac, dtype=float)
    v = np.asarray(v, dtype=float)
    if jac.shape == v.shape:
        # 1-d fields (possibly batched): dV/dx is scalar per state.
        return jac * v
    return v @ jac.T


def _fd_jacobian(V: VectorFieldSpec, x):
    x = np.asarray(x, dtype=float)
    if V.dim == 1:
        h = _EPS ** (1 / 3) * (1.0 + np.abs(x))
        return (
            np.asarray(V.func(x + h), dtype=float) - np.asarray(V.func(x - h), dtype=float)
        ) / (2 * h)
    x = np.atleast_1d(x)
    n = x.shape[-1]
    h = _EPS ** (1 / 3) * (1.0 + np.abs(x))
    cols = []
    for j in range(n):
        e = np.zeros_like(x)
        e[..., j] = h[..., j]
        cols.append(
            (np.asarray(V.func(x + e), dtype=float) - np.asarray(V.func(x - e), dtype=float))
            / (2 * h[..., j])
        )
    return np.stack(cols, axis=-1)


def stratonovich_drift(
    drift_tilde: VectorFieldSpec, brownian_fields: list[VectorFieldSpec]
) -> VectorFieldSpec:
    """Ito drift corrected to the Stratonovich form.

    Returns the field x -> drift_tilde(x) - 1/2 sum_i (dV_i/dx) V_i(x), so the
    Brownian coordinates become pure flows.  Jacobians come from the field
    specs or, when flagged, finite differences.
    """
    for V in brownian_fields:
        if V.dim != drift_tilde.dim:
            raise ConfigurationError(
                f"field {V.name!r} has dim {V.dim}, drift has {drift_tilde.dim}"
            )
        if V.jacobian is None and not V.allow_fd:
            raise ConfigurationError(
                f"field {V.name!r} lacks a jacobian and finite differences are disabled"
            )

    def func(x):
        out = np.asarray(drift_tilde.func(x), dtype=float).copy()
        for V in brownian_fields:
            v = np.asarray(V.func(x), dtype=float)
            jac = V.jacobian(x) if V.jacobian is not None else _fd_jacobian(V, x)
            out = out - 0.5 * _apply_jacobian(jac, v)
        return out

    return VectorFieldSpec(
        dim=drift_tilde.dim,
        func=func,
        linear_growth=drift_tilde.linear_growth,
        name=f"stratonovich({drift_tilde.name})",
    )
