"""Levy measure models: moments, tail masses, cutoff selection and samplers.

The workhorse is the one-dimensional tempered stable family

    nu(dy) = |y|^(-1-alpha) (c+ exp(-lam+ |y|) 1{y>0} + c- exp(-lam- |y|) 1{y<0}) dy,

which covers gamma (alpha=0, one-sided), variance gamma (alpha=0) and genuine
tempered stable (0<alpha<2) drivers.  Finite-activity measures are described
by atoms.  Multidimensional measures are supported as products of independent
1-d measures (mass concentrated on the axes) or finite-activity empirical
measures.

All quadrature is adaptive with closed forms substituted for pure power-law
integrals; a divergent integral raises ``DomainError`` rather than returning
infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigurationError, DomainError, InfeasibleError, SamplerFailure

_QUAD_REL_TOL = 1e-11
_DEFAULT_REJECTION_CAP = 10**6


@dataclass(frozen=True)
class Localization:
    """Power-law reweighting l(y) = |y|^r of the jump measure (r = 0 is l == 1)."""

    r: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ConfigurationError("localization exponent must be >= 0")

    def __call__(self, y):
        if self.r == 0.0:
            return np.ones_like(np.asarray(y, dtype=float))
        return np.abs(np.asarray(y, dtype=float)) ** self.r


UNIT_LOCALIZATION = Localization(0.0)


def _magnitude(y):
    y = np.asarray(y, dtype=float)
    if y.ndim <= 1:
        return np.abs(y)
    return np.sqrt(np.sum(y * y, axis=-1))


def _power_exp_integral(c: float, lam: float, beta: float, a: float, b: float) -> float:
    """c * integral_a^b y^beta exp(-lam*y) dy over 0 <= a < b <= inf.

    Closed form for lam == 0; adaptive quadrature otherwise, with a power
    substitution soaking up the origin singularity.  Divergence raises.
    """
    if c == 0.0 or a >= b:
        return 0.0
    if lam == 0.0:
        if b == math.inf:
            if beta >= -1.0:
                raise DomainError(
                    f"integral of y^{beta} diverges at infinity; "
                    "a tempering rate or a support cap y_max is required"
                )
            return c * (-(a ** (beta + 1.0)) / (beta + 1.0))
        if a == 0.0 and beta <= -1.0:
            raise DomainError(f"integral of y^{beta} diverges at the origin")
        if beta == -1.0:
            return c * math.log(b / a)
        return c * (b ** (beta + 1.0) - a ** (beta + 1.0)) / (beta + 1.0)
    if a == 0.0 and beta <= -1.0:
        raise DomainError(f"integral of y^{beta} e^(-lam y) diverges at the origin")
    if a == 0.0 and beta < 0.0:
        # u = y^(1+beta) removes the endpoint singularity.
        p = 1.0 + beta
        val, err = quad(
            lambda u: math.exp(-lam * u ** (1.0 / p)),
            0.0,
            b**p if b != math.inf else math.inf,
            epsabs=0.0,
            epsrel=_QUAD_REL_TOL,
            limit=200,
        )
        return c * val / p
    val, err = quad(
        lambda y: y**beta * math.exp(-lam * y),
        a,
        b,
        epsabs=0.0,
        epsrel=_QUAD_REL_TOL,
        limit=200,
    )
    return c * val


class LevyMeasureModel:
    """Interface shared by the concrete measures below.

    ``signed_small_moment(j, eps)``  integral of y^j over |y| <= eps (1-d only);
    ``small_moment(k, eps)``          integral of |y|^k over |y| <= eps;
    ``localized_mass(eps, l, region)`` lambda_eps (region="small") or C_{eps,l}
                                      (region="tail");
    ``band_first_moment(a, b)``       integral of y over a < |y| <= b (the
                                      drift compensator integrand).
    """

    d: int = 1
    activity: str = "infinite"
    is_symmetric: bool = False

    def small_moment(self, k: int, eps: float) -> float:
        raise NotImplementedError

    def signed_small_moment(self, j: int, eps: float) -> float:
        raise NotImplementedError

    def localized_mass(self, eps: float, l: Localization, region: str) -> float:
        raise NotImplementedError

    def band_first_moment(self, a: float, b: float):
        raise NotImplementedError

    def sample_tail(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        raise NotImplementedError

    def sample_small(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        raise NotImplementedError


class TemperedStableMeasure(LevyMeasureModel):
    """Two-sided tempered stable density on the punctured line.

    ``y_max`` optionally truncates the support to |y| <= y_max; it is required
    whenever an untempered side (lam = 0) would make a needed tail integral
    diverge.
    """

    activity = "infinite"

    def __init__(self, alpha, c_plus, c_minus, lam_plus, lam_minus, y_max=None):
        if not 0.0 <= alpha < 2.0:
            raise ConfigurationError(f"alpha must lie in [0, 2), got {alpha}")
        if c_plus < 0 or c_minus < 0 or (c_plus == 0 and c_minus == 0):
            raise ConfigurationError("at least one of c_plus, c_minus must be positive")
        if lam_plus < 0 or lam_minus < 0:
            raise ConfigurationError("tempering rates must be nonnegative")
        if y_max is not None and y_max <= 0:
            raise ConfigurationError("y_max must be positive")
        if alpha >= 1.0 and y_max is None:
            if (c_plus > 0 and lam_plus == 0) or (c_minus > 0 and lam_minus == 0):
                raise ConfigurationError(
                    "alpha >= 1 with an untempered side needs a support cap y_max"
                )
        self.alpha = float(alpha)
        self.c_plus = float(c_plus)
        self.c_minus = float(c_minus)
        self.lam_plus = float(lam_plus)
        self.lam_minus = float(lam_minus)
        self.y_max = float(y_max) if y_max is not None else None
        self.d = 1

    @property
    def is_symmetric(self) -> bool:
        return self.c_plus == self.c_minus and self.lam_plus == self.lam_minus

    def density(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        mag = np.abs(y)
        ok = mag > 0
        if self.y_max is not None:
            ok = ok & (mag <= self.y_max)
        pos = ok & (y > 0)
        neg = ok & (y < 0)
        out[pos] = self.c_plus * mag[pos] ** (-1 - self.alpha) * np.exp(-self.lam_plus * mag[pos])
        out[neg] = self.c_minus * mag[neg] ** (-1 - self.alpha) * np.exp(-self.lam_minus * mag[neg])
        return out

    def _cap(self, b: float) -> float:
        return min(b, self.y_max) if self.y_max is not None else b

    def _sided(self, side: str, beta: float, a: float, b: float) -> float:
        c = self.c_plus if side == "+" else self.c_minus
        lam = self.lam_plus if side == "+" else self.lam_minus
        return _power_exp_integral(c, lam, beta, a, self._cap(b))

    def small_moment(self, k: int, eps: float) -> float:
        if k < 1:
            raise DomainError("moment order must be >= 1")
        if eps <= 0:
            return 0.0
        beta = k - 1 - self.alpha
        return self._sided("+", beta, 0.0, eps) + self._sided("-", beta, 0.0, eps)

    def signed_small_moment(self, j: int, eps: float) -> float:
        if eps <= 0:
            return 0.0
        beta = j - 1 - self.alpha
        sign = -1.0 if j % 2 else 1.0
        return self._sided("+", beta, 0.0, eps) + sign * self._sided("-", beta, 0.0, eps)

    def localized_mass(self, eps: float, l: Localization, region: str) -> float:
        beta = l.r - 1 - self.alpha
        if region == "small":
            if beta <= -1.0:
                raise DomainError(
                    f"localized small-jump mass diverges: need r > alpha "
                    f"(r={l.r}, alpha={self.alpha})"
                )
            return self._sided("+", beta, 0.0, eps) + self._sided("-", beta, 0.0, eps)
        if region == "tail":
            return self._sided("+", beta, eps, math.inf) + self._sided("-", beta, eps, math.inf)
        raise ConfigurationError(f"unknown region {region!r}")

    def band_first_moment(self, a: float, b: float) -> float:
        beta = -self.alpha
        return self._sided("+", beta, a, b) - self._sided("-", beta, a, b)

    # -- samplers ----------------------------------------------------------

    def _side_split(self, eps: float, l: Localization, region: str):
        beta = l.r - 1 - self.alpha
        if region == "tail":
            w_pos = self._sided("+", beta, eps, math.inf)
            w_neg = self._sided("-", beta, eps, math.inf)
        else:
            w_pos = self._sided("+", beta, 0.0, eps)
            w_neg = self._sided("-", beta, 0.0, eps)
        total = w_pos + w_neg
        if total <= 0:
            raise DomainError("no mass in the requested region")
        return beta, w_pos / total

    def _onesided_tail(self, n, beta, lam, eps, rng, cap):
        """Draws from density ~ y^beta exp(-lam y) on (eps, B]."""
        B = self._cap(math.inf)
        out = np.empty(n)
        filled = 0
        spent = 0
        while filled < n:
            todo = n - filled
            batch = max(2 * todo, 64)
            if spent > cap * max(filled, 1):
                raise SamplerFailure(
                    f"tail sampler spent more than {cap} proposals per accepted draw"
                )
            spent += batch
            if lam == 0.0:
                u = rng.random(batch)
                if B == math.inf:
                    # beta < -1 guaranteed by the finite-mass check upstream.
                    y = eps * (1.0 - u) ** (1.0 / (beta + 1.0))
                elif beta == -1.0:
                    y = eps * (B / eps) ** u
                else:
                    y = (eps ** (beta + 1) + u * (B ** (beta + 1) - eps ** (beta + 1))) ** (
                        1.0 / (beta + 1)
                    )
                accept = np.ones(batch, dtype=bool)
            elif beta <= 0.0:
                u = rng.random(batch)
                if B == math.inf:
                    y = eps - np.log1p(-u) / lam
                else:
                    scale = 1.0 - math.exp(-lam * (B - eps))
                    y = eps - np.log1p(-u * scale) / lam
                accept = rng.random(batch) < (y / eps) ** beta
            else:
                y_star = max(eps, 2.0 * beta / lam)
                log_m = beta * math.log(y_star) - 0.5 * lam * y_star
                u = rng.random(batch)
                if B == math.inf:
                    y = eps - np.log1p(-u) / (0.5 * lam)
                else:
                    scale = 1.0 - math.exp(-0.5 * lam * (B - eps))
                    y = eps - np.log1p(-u * scale) / (0.5 * lam)
                log_ratio = beta * np.log(y) - 0.5 * lam * y - log_m
                accept = np.log(rng.random(batch)) < log_ratio
            good = y[accept]
            take = min(todo, good.size)
            out[filled : filled + take] = good[:take]
            filled += take
        return out

    def _onesided_small(self, n, beta, lam, eps, rng, cap):
        """Draws from density ~ y^beta exp(-lam y) on (0, eps]; beta > -1."""
        out = np.empty(n)
        filled = 0
        spent = 0
        while filled < n:
            todo = n - filled
            batch = max(2 * todo, 64)
            if spent > cap * max(filled, 1):
                raise SamplerFailure(
                    f"small-jump sampler spent more than {cap} proposals per accepted draw"
                )
            spent += batch
            y = eps * rng.random(batch) ** (1.0 / (beta + 1.0))
            accept = (
                np.ones(batch, dtype=bool)
                if lam == 0.0
                else rng.random(batch) < np.exp(-lam * y)
            )
            good = y[accept]
            take = min(todo, good.size)
            out[filled : filled + take] = good[:take]
            filled += take
        return out

    def _sample(self, region, eps, l, rng, size, cap):
        beta, p_pos = self._side_split(eps, l, region)
        n = 1 if size is None else int(size)
        signs = np.where(rng.random(n) < p_pos, 1.0, -1.0)
        out = np.empty(n)
        for sign, lam in ((1.0, self.lam_plus), (-1.0, self.lam_minus)):
            idx = np.nonzero(signs == sign)[0]
            if idx.size == 0:
                continue
            if region == "tail":
                vals = self._onesided_tail(idx.size, beta, lam, eps, rng, cap)
            else:
                vals = self._onesided_small(idx.size, beta, lam, eps, rng, cap)
            out[idx] = sign * vals
        return float(out[0]) if size is None else out

    def sample_tail(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample("tail", eps, l, rng, size, cap)

    def sample_small(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        # The finite-normalizer check doubles as the r > alpha guard.
        self.localized_mass(eps, l, "small")
        return self._sample("small", eps, l, rng, size, cap)


class CompoundPoissonMeasure(LevyMeasureModel):
    """Finite-activity atomic measure: nu = intensity * sum_i p_i delta_{y_i}."""

    activity = "finite"

    def __init__(self, intensity: float, atoms: Sequence[float], probs: Optional[Sequence[float]] = None):
        if intensity < 0:
            raise ConfigurationError("intensity must be >= 0")
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim > 1:
            raise ConfigurationError("atomic measures are 1-d here; use EmpiricalMeasure")
        if np.any(atoms == 0.0):
            raise ConfigurationError("jump atoms must be nonzero")
        if probs is None:
            probs = np.full(atoms.size, 1.0 / atoms.size) if atoms.size else np.empty(0)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != atoms.shape or (atoms.size and abs(probs.sum() - 1.0) > 1e-12):
            raise ConfigurationError("atom probabilities must match atoms and sum to 1")
        if intensity > 0 and atoms.size == 0:
            raise ConfigurationError("positive intensity requires at least one atom")
        self.intensity = float(intensity)
        self.atoms = atoms
        self.probs = probs
        self.d = 1

    @property
    def is_symmetric(self) -> bool:
        order = np.argsort(self.atoms)
        rev = np.argsort(-self.atoms)
        return bool(
            np.allclose(self.atoms[order], -self.atoms[rev])
            and np.allclose(self.probs[order], self.probs[rev])
        )

    def _weights(self, mask):
        return self.intensity * self.probs[mask]

    def small_moment(self, k: int, eps: float) -> float:
        mask = np.abs(self.atoms) <= eps
        return float(np.sum(self._weights(mask) * np.abs(self.atoms[mask]) ** k))

    def signed_small_moment(self, j: int, eps: float) -> float:
        mask = np.abs(self.atoms) <= eps
        return float(np.sum(self._weights(mask) * self.atoms[mask] ** j))

    def localized_mass(self, eps: float, l: Localization, region: str) -> float:
        mag = np.abs(self.atoms)
        mask = mag <= eps if region == "small" else mag > eps
        return float(np.sum(self._weights(mask) * l(self.atoms[mask])))

    def band_first_moment(self, a: float, b: float) -> float:
        mag = np.abs(self.atoms)
        mask = (mag > a) & (mag <= b)
        return float(np.sum(self._weights(mask) * self.atoms[mask]))

    def _sample_region(self, eps, l, rng, size, region):
        mag = np.abs(self.atoms)
        mask = mag <= eps if region == "small" else mag > eps
        weights = self._weights(mask) * l(self.atoms[mask])
        total = weights.sum()
        if total <= 0:
            raise DomainError(f"no atoms in the requested {region} region")
        values = self.atoms[mask]
        idx = rng.choice(values.size, size=size, p=weights / total)
        out = values[idx]
        return float(out) if size is None else out

    def sample_tail(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "tail")

    def sample_small(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "small")


def zero_measure() -> CompoundPoissonMeasure:
    """The null jump measure."""
    return CompoundPoissonMeasure(0.0, ())


class EmpiricalMeasure(LevyMeasureModel):
    """Finite-activity measure in R^d given by weighted atoms."""

    activity = "finite"

    def __init__(self, atoms, weights):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 2:
            raise ConfigurationError("EmpiricalMeasure expects atoms of shape (n, d)")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (atoms.shape[0],) or np.any(weights < 0):
            raise ConfigurationError("weights must be nonnegative, one per atom")
        self.atoms = atoms
        self.weights = weights
        self.d = atoms.shape[1]

    def small_moment(self, k: int, eps: float) -> float:
        mag = _magnitude(self.atoms)
        mask = mag <= eps
        return float(np.sum(self.weights[mask] * mag[mask] ** k))

    def sigma_matrix(self, eps: float) -> np.ndarray:
        mag = _magnitude(self.atoms)
        mask = mag <= eps
        ys = self.atoms[mask]
        return (ys.T * self.weights[mask]) @ ys

    def localized_mass(self, eps: float, l: Localization, region: str) -> float:
        mag = _magnitude(self.atoms)
        mask = mag <= eps if region == "small" else mag > eps
        return float(np.sum(self.weights[mask] * l(mag[mask])))

    def band_first_moment(self, a: float, b: float) -> np.ndarray:
        mag = _magnitude(self.atoms)
        mask = (mag > a) & (mag <= b)
        return self.weights[mask] @ self.atoms[mask]

    def _sample_region(self, eps, l, rng, size, region):
        mag = _magnitude(self.atoms)
        mask = mag <= eps if region == "small" else mag > eps
        w = self.weights[mask] * l(mag[mask])
        total = w.sum()
        if total <= 0:
            raise DomainError(f"no atoms in the requested {region} region")
        idx = rng.choice(w.size, size=size, p=w / total)
        return self.atoms[mask][idx]

    def sample_tail(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "tail")

    def sample_small(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "small")


class ProductMeasure(LevyMeasureModel):
    """Independent 1-d coordinates: mass concentrated on the coordinate axes."""

    def __init__(self, components: Sequence[LevyMeasureModel]):
        if not components:
            raise ConfigurationError("need at least one component")
        for c in components:
            if c.d != 1:
                raise ConfigurationError("components must be 1-d measures")
        self.components = list(components)
        self.d = len(components)
        self.activity = (
            "infinite" if any(c.activity == "infinite" for c in components) else "finite"
        )

    def small_moment(self, k: int, eps: float) -> float:
        return sum(c.small_moment(k, eps) for c in self.components)

    def sigma_matrix(self, eps: float) -> np.ndarray:
        return np.diag([c.small_moment(2, eps) for c in self.components])

    def localized_mass(self, eps: float, l: Localization, region: str) -> float:
        return sum(c.localized_mass(eps, l, region) for c in self.components)

    def band_first_moment(self, a: float, b: float) -> np.ndarray:
        return np.array([c.band_first_moment(a, b) for c in self.components])

    def _sample_region(self, eps, l, rng, size, region):
        masses = np.array([c.localized_mass(eps, l, region) for c in self.components])
        total = masses.sum()
        if total <= 0:
            raise DomainError(f"no mass in the requested {region} region")
        n = 1 if size is None else int(size)
        axes = rng.choice(self.d, size=n, p=masses / total)
        out = np.zeros((n, self.d))
        for j, comp in enumerate(self.components):
            idx = np.nonzero(axes == j)[0]
            if idx.size == 0:
                continue
            draw = (
                comp.sample_tail(eps, l, rng, size=idx.size)
                if region == "tail"
                else comp.sample_small(eps, l, rng, size=idx.size)
            )
            out[idx, j] = draw
        return out[0] if size is None else out

    def sample_tail(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "tail")

    def sample_small(self, eps, l, rng, size=None, cap=_DEFAULT_REJECTION_CAP):
        return self._sample_region(eps, l, rng, size, "small")


@dataclass(frozen=True)
class LevyTriplet:
    """Levy triplet (b, 0, nu) under the truncation convention tau(y) = y 1{|y|<=1}."""

    b: float | np.ndarray
    measure: LevyMeasureModel

    @classmethod
    def from_pure_jump(cls, measure: LevyMeasureModel) -> "LevyTriplet":
        """Triplet of the raw jump process (no extra drift): b = integral of tau d nu."""
        if measure.is_symmetric:
            return cls(0.0, measure)
        return cls(measure.band_first_moment(0.0, 1.0), measure)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def small_moment(model: LevyMeasureModel, k: int, eps: float) -> float:
    """integral of |y|^k over {|y| <= eps}."""
    return model.small_moment(k, eps)


def sigma_matrix(model: LevyMeasureModel, eps: float) -> np.ndarray:
    """Second-moment matrix of the small jumps (d x d, PSD)."""
    if hasattr(model, "sigma_matrix"):
        return np.atleast_2d(model.sigma_matrix(eps))
    return np.array([[model.small_moment(2, eps)]])


def sqrt_psd(mat: np.ndarray, *, tol: float = 1e-10) -> np.ndarray:
    """Square root A Lambda^(1/2) of a symmetric PSD matrix via its eigensystem."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, atol=tol):
        raise DomainError("matrix must be symmetric")
    vals, vecs = np.linalg.eigh(mat)
    if np.any(vals < -tol):
        raise DomainError(f"matrix has negative eigenvalue {vals.min()}")
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def tail_mass(
    model: LevyMeasureModel,
    eps: float,
    l: Localization = UNIT_LOCALIZATION,
    *,
    region: str = "tail",
) -> float:
    """C_{eps,l} over {|y| > eps} (default) or lambda_eps over {|y| <= eps}."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if region not in ("tail", "small"):
        raise ConfigurationError(f"unknown region {region!r}")
    return model.localized_mass(eps, l, region)


def eps_power_rule(alpha: float, t: float) -> float:
    """Cutoff rule eps = t^(1/(3-alpha)) for the tempered stable family."""
    if not 0.0 <= alpha < 2.0:
        raise DomainError("alpha must lie in [0, 2)")
    return t ** (1.0 / (3.0 - alpha))


def eps_for_order(
    model: LevyMeasureModel,
    t: float,
    M: int,
    mode: str,
    *,
    cap: float = 1.0,
    rel_tol: float = 1e-9,
    floor: float = 1e-14,
) -> float:
    """Largest eps <= cap with the mode's moment bound <= t^(M+1).

    mode "ignore" bounds the second small-jump moment, mode "ar" the third;
    the boundary is located by bisection to relative tolerance ``rel_tol``.
    """
    if not 0.0 < t <= 1.0:
        raise DomainError("t must lie in (0, 1]")
    if M < 1:
        raise DomainError("M must be >= 1")
    if mode not in ("ignore", "ar"):
        raise ConfigurationError(f"unknown eps rule mode {mode!r}")
    k = 2 if mode == "ignore" else 3
    rhs = t ** (M + 1)
    g = lambda e: model.small_moment(k, e)
    if g(cap) <= rhs:
        return cap
    lo, hi = cap / 2.0, cap
    while g(lo) > rhs:
        hi = lo
        lo /= 2.0
        if lo < floor:
            raise InfeasibleError(
                f"no eps in (0, {cap}] satisfies the {mode} bound at t={t}, M={M}"
            )
    while (hi - lo) > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if g(mid) <= rhs:
            lo = mid
        else:
            hi = mid
    return lo


def sample_tail(
    model: LevyMeasureModel,
    eps: float,
    l: Localization,
    rng,
    size=None,
    *,
    cap: int = _DEFAULT_REJECTION_CAP,
):
    """Draw jumps with |y| > eps from G_{eps,l} = C_{eps,l}^-1 l(y) nu(dy)."""
    return model.sample_tail(eps, l, rng, size=size, cap=cap)


def sample_small_localized(
    model: LevyMeasureModel,
    eps: float,
    l: Localization,
    rng,
    size=None,
    *,
    cap: int = _DEFAULT_REJECTION_CAP,
):
    """Draw jumps with |y| <= eps from F_eps^l = lambda_eps^-1 l(y) nu(dy)."""
    return model.sample_small(eps, l, rng, size=size, cap=cap)
