"""Composition schemes: coordinate one-step maps wired into full paths.

A scheme applies the model's coordinate flows (drift, each Brownian
component, the jump part) in a prescribed order, with half steps and
randomized orderings as required; composing n independent steps of size T/n
yields the path approximation.  The rightmost map of a written composition
applies first.

Everything here is batch-first: states are arrays whose leading axis indexes
paths, so a single step call advances a whole bundle of paths.  Paths that
turn non-finite are frozen at their last finite state and reported as
aborted, never silently dropped.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import algebra
from .exceptions import ConfigurationError, DomainError
from .flows import (
    TABLEAUS,
    VectorFieldSpec,
    exp_map,
    linear_field,
    rk_flow,
    sample_noise,
    taylor_flow,
)
from .jumps import (
    ArInnerConfig,
    CompoundPoissonSpec,
    ar_flow,
    compound_poisson_flow,
    decomposed_drift_step,
    effective_drift_rate,
    euler_drift_step,
    ignore_small_flow,
    one_jump_step,
    small_jump_gaussian_step,
    solve_bernoulli,
    two_jump_step,
)
from .levy import (
    Localization,
    TemperedStableMeasure,
    UNIT_LOCALIZATION,
    eps_for_order,
    eps_power_rule,
    sample_tail,
    tail_mass,
)
from .models import SdeModel

SCHEME_KINDS = (
    "euler_maruyama",
    "nv_a",
    "nv_b",
    "splitting",
    "nv_extrapolated",
    "fujiwara4",
    "one_jump_first_order",
)

JUMP_APPROX_KINDS = ("none", "cp_truncate", "ignore", "ar", "decomposed")

_FLOW_RE = re.compile(r"^(exact|taylor([1-9]\d*)|rk([1-5]))$")


def parse_flow_choice(text: str) -> tuple[str, Optional[int]]:
    match = _FLOW_RE.match(text)
    if match is None:
        raise ConfigurationError(
            f"unknown diffusion flow {text!r}; use exact, taylorN or rkN (N<=5)"
        )
    if match.group(2):
        return "taylor", int(match.group(2))
    if match.group(3):
        return "rk", int(match.group(3))
    return "exact", None


@dataclass(frozen=True)
class JumpApproxConfig:
    """How the jump coordinate is approximated.

    ``eps_mode`` picks the cutoff rule: "explicit" uses ``eps`` verbatim,
    "ignore"/"ar" solve the second/third-moment inequality at the target
    order, "power" applies the tempered stable rule t^(1/(3-alpha)).
    """

    kind: str = "auto"
    M: Optional[int] = None
    eps_mode: str = "ar"
    eps: Optional[float] = None
    order_target: int = 2
    bernoulli: str = "one"
    localization_r: float = 2.0
    l3_r: float = 0.0
    substeps: int = 1

    def __post_init__(self):
        if self.kind not in JUMP_APPROX_KINDS + ("auto",):
            raise ConfigurationError(f"unknown jump approximation {self.kind!r}")
        if self.eps_mode not in ("explicit", "ignore", "ar", "power"):
            raise ConfigurationError(f"unknown eps rule {self.eps_mode!r}")
        if self.eps_mode == "explicit" and self.eps is None:
            raise ConfigurationError("explicit eps rule requires an eps value")
        if self.bernoulli not in ("one", "two"):
            raise ConfigurationError("bernoulli mode must be 'one' or 'two'")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    model: SdeModel
    diffusion_flow: str = "exact"
    noise: str = "gaussian"
    jump: JumpApproxConfig = field(default_factory=JumpApproxConfig)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigurationError(
                f"unknown scheme kind {self.kind!r}; choose from {SCHEME_KINDS}"
            )
        flow_kind, order = parse_flow_choice(self.diffusion_flow)
        if self.kind in ("nv_a", "nv_b", "splitting", "nv_extrapolated"):
            # Second-order target needs coordinate flows of local order 2m+1.
            if flow_kind in ("taylor", "rk") and order < 5:
                raise ConfigurationError(
                    f"{self.kind} targets order 2 and needs flow order >= 5; "
                    f"got {self.diffusion_flow}"
                )
        if self.kind == "fujiwara4" and flow_kind == "rk":
            raise ConfigurationError(
                "fujiwara4 targets order 4 and needs exact flows or taylor order >= 9"
            )
        if self.kind == "fujiwara4" and flow_kind == "taylor" and order < 9:
            raise ConfigurationError(
                "fujiwara4 targets order 4 and needs taylor order >= 9"
            )
        jump_kind = self.resolved_jump_kind()
        if self.kind == "one_jump_first_order" and jump_kind != "decomposed":
            raise ConfigurationError(
                "one_jump_first_order uses the decomposed jump approximation"
            )
        if jump_kind == "decomposed" and self.kind != "one_jump_first_order":
            raise ConfigurationError(
                "the decomposed jump approximation belongs to one_jump_first_order"
            )
        if jump_kind == "decomposed":
            measure = self.model.triplet.measure
            if isinstance(measure, TemperedStableMeasure) and measure.alpha >= 1.0:
                raise ConfigurationError(
                    "decomposed schemes need finite small-jump variation (alpha < 1)"
                )
        if jump_kind == "cp_truncate" and self.model.has_jumps:
            if self.model.triplet.measure.activity != "finite":
                raise ConfigurationError(
                    "cp_truncate applies to finite-activity drivers; use ignore or ar"
                )

    def resolved_jump_kind(self) -> str:
        if not self.model.has_jumps:
            return "none"
        measure = self.model.triplet.measure
        if (
            measure.activity == "finite"
            and measure.localized_mass(math.inf, UNIT_LOCALIZATION, "small") == 0.0
            and self.model.triplet.b == 0.0
        ):
            return "none"
        if self.jump.kind != "auto":
            return self.jump.kind
        if self.kind == "one_jump_first_order":
            return "decomposed"
        if self.model.triplet.measure.activity == "finite":
            return "cp_truncate"
        return "ar"


@dataclass
class StepOutcome:
    state: object
    jumps: int = 0
    branch: Optional[str] = None
    aborted: bool = False


@dataclass
class BatchResult:
    terminal: np.ndarray
    aborted: np.ndarray
    jumps: int

    @property
    def aborted_count(self) -> int:
        return int(self.aborted.sum())


def resolve_eps(cfg: SchemeConfig, t: float) -> Optional[float]:
    """Cutoff for the current step size, per the configured rule."""
    jump_kind = cfg.resolved_jump_kind()
    if jump_kind in ("none", "cp_truncate"):
        return None
    jc = cfg.jump
    measure = cfg.model.triplet.measure
    if jc.eps_mode == "explicit":
        return jc.eps
    if jc.eps_mode == "power":
        if not isinstance(measure, TemperedStableMeasure):
            raise ConfigurationError("the power eps rule needs a tempered stable measure")
        return eps_power_rule(measure.alpha, t)
    return eps_for_order(measure, t, jc.order_target, jc.eps_mode)


def _deterministic_applier(choice, field_spec):
    kind, order = choice
    if kind == "exact":
        if field_spec.flow is not None:
            return lambda amp, x: field_spec.flow(amp, x)
        return lambda amp, x: exp_map(field_spec, amp, x)
    if kind == "taylor":
        return lambda amp, x: taylor_flow(field_spec, order, amp, x)
    tab = TABLEAUS[order]
    return lambda amp, x: rk_flow(tab, field_spec, amp, x, check=False)


def _jump_drift_step(h, rate: float, choice):
    """Inter-jump ODE step dx/ds = h(x)*rate under the configured flow."""
    if rate == 0.0:
        return lambda dt, x: x
    kind, order = choice
    if h.constant is not None:
        c = h.constant * rate
        return lambda dt, x: x + np.asarray(dt, dtype=float) * c
    if h.linear is not None:
        return _deterministic_applier(choice, linear_field(h.linear * rate))
    bare = VectorFieldSpec(dim=1, func=lambda x: rate * np.asarray(h(x), dtype=float))
    if kind == "taylor":
        raise ConfigurationError(
            "taylor drift between jumps needs linear or constant h; use rk or exact"
        )
    return _deterministic_applier(choice, bare)


class StepPlan:
    """Precomputed one-step machinery for a fixed step size."""

    def __init__(self, cfg: SchemeConfig, t: float):
        if t <= 0:
            raise DomainError("step size must be positive")
        self.cfg = cfg
        self.t = t
        model = cfg.model
        self.flow_choice = parse_flow_choice(cfg.diffusion_flow)
        self.jump_kind = cfg.resolved_jump_kind()
        self.eps = resolve_eps(cfg, t)
        self._drift = _deterministic_applier(self.flow_choice, model.strat_drift)
        self._bm = [_deterministic_applier(self.flow_choice, V) for V in model.brownian]
        self._prepare_jump_machinery()

    # -- coordinate actions -------------------------------------------------

    def _prepare_jump_machinery(self):
        cfg, t = self.cfg, self.t
        model = cfg.model
        self._cp_spec = None
        self._bernoulli = None
        self._ar_inner = None
        self._jump_drift = None
        if self.jump_kind == "none":
            return
        triplet = model.triplet
        measure = triplet.measure
        if self.jump_kind == "cp_truncate":
            self._cp_spec = CompoundPoissonSpec.from_measure(measure)
            self._em_drift_rate = 0.0
            return
        rate = effective_drift_rate(triplet, self.eps)
        self._em_drift_rate = rate
        self._jump_drift = _jump_drift_step(model.h, rate, self.flow_choice)
        if self.jump_kind == "ar":
            self._ar_inner = ArInnerConfig(substeps=cfg.jump.substeps, noise=cfg.noise)
        if self.jump_kind == "decomposed":
            l3 = Localization(cfg.jump.l3_r)
            c_tail = tail_mass(measure, self.eps, l3)
            self._bernoulli = solve_bernoulli(
                c_tail, t, cfg.jump.bernoulli, eps=self.eps, localization=l3
            )
            self._l2 = Localization(cfg.jump.localization_r)
            # Fail fast if the localization cannot tame the small jumps.
            tail_mass(measure, self.eps, self._l2, region="small")

    def _apply_drift(self, dur, x, rng, stats):
        return self._drift(dur, x)

    def _apply_bm(self, i, dur, x, rng, stats):
        amp = sample_noise(self.cfg.noise, dur, rng, size=np.shape(x)[0] if np.ndim(x) else None)
        return self._bm[i](amp, x)

    def _apply_jump(self, dur, x, rng, stats):
        cfg = self.cfg
        model = cfg.model
        if self.jump_kind == "none":
            return x
        if self.jump_kind == "cp_truncate":
            M = cfg.jump.M if cfg.jump.M is not None else math.inf
            return compound_poisson_flow(model.h, self._cp_spec, dur, x, M, rng, stats=stats)
        if self.jump_kind == "ignore":
            return ignore_small_flow(
                model.h, model.triplet, self.eps, dur, x, rng,
                drift_step=self._jump_drift, stats=stats,
            )
        if self.jump_kind == "ar":
            return ar_flow(
                model.h, model.triplet, self.eps, dur, x, self._ar_inner, rng,
                drift_step=self._jump_drift, stats=stats,
            )
        raise ConfigurationError(f"jump kind {self.jump_kind!r} has no single-map form")

    # -- schedules ------------------------------------------------------------

    def _apply_sequence(self, seq, x, rng, stats):
        for item in seq:
            x = item(x, rng, stats)
        return x

    def _euler_maruyama(self, x, rng, stats):
        cfg, t = self.cfg, self.t
        model = cfg.model
        size = np.shape(x)[0] if np.ndim(x) else None
        out = x + np.asarray(model.drift_tilde(x), dtype=float) * t
        for V in model.brownian:
            db = sample_noise(cfg.noise, t, rng, size=size)
            out = out + np.asarray(V(x), dtype=float) * db
        if self.jump_kind != "none":
            dy = self._em_jump_increment(x, rng, stats, size)
            out = out + np.asarray(model.h(x), dtype=float) * dy
        return out

    def _em_jump_increment(self, x, rng, stats, size):
        """Driver increment over one step under the configured approximation."""
        cfg, t = self.cfg, self.t
        measure = cfg.model.triplet.measure
        n_paths = size if size is not None else 1
        if self.jump_kind == "cp_truncate":
            M = cfg.jump.M if cfg.jump.M is not None else math.inf
            n = rng.poisson(self._cp_spec.intensity * t, size=n_paths)
            applied = n if M == math.inf else np.minimum(n, int(M))
            dy = np.zeros(n_paths)
            kmax = int(applied.max()) if applied.size else 0
            for k in range(kmax):
                mask = applied > k
                dy[mask] += np.asarray(self._cp_spec.sample(rng, int(mask.sum())), dtype=float)
            if stats is not None:
                stats["jumps"] = stats.get("jumps", 0) + int(applied.sum())
        else:
            dy = np.full(n_paths, self._em_drift_rate * t)
            c_eps = tail_mass(measure, self.eps)
            if c_eps > 0:
                n = rng.poisson(c_eps * t, size=n_paths)
                kmax = int(n.max()) if n.size else 0
                for k in range(kmax):
                    mask = n > k
                    dy[mask] += sample_tail(measure, self.eps, UNIT_LOCALIZATION, rng, size=int(mask.sum()))
                if stats is not None:
                    stats["jumps"] = stats.get("jumps", 0) + int(n.sum())
            if self.jump_kind == "ar":
                sigma = math.sqrt(measure.small_moment(2, self.eps))
                if sigma > 0:
                    dy = dy + sigma * sample_noise(cfg.noise, t, rng, size=n_paths)
        return dy if size is not None else float(dy[0])

    def _one_jump_schedule(self, x, rng, stats):
        cfg, t = self.cfg, self.t
        model = cfg.model
        measure = model.triplet.measure
        size = np.shape(x)[0] if np.ndim(x) else None
        # Tail-jump piece, then small-jump Gaussian, then compensated drift.
        if self._bernoulli.mode == "one":
            x = one_jump_step(model.h, measure, self._bernoulli, t, x, rng, stats=stats)
        else:
            x = two_jump_step(model.h, measure, self._bernoulli, t, x, rng, stats=stats)
        x = small_jump_gaussian_step(model.h, measure, self.eps, self._l2, t, x, rng)
        x = decomposed_drift_step(
            model.h, model.triplet, self.eps, t, x,
            ode_flow=euler_drift_step(model.h, self._em_drift_rate),
        )
        # Euler-Maruyama coordinate flows, ascending to the drift last.
        for i in reversed(range(len(model.brownian))):
            db = sample_noise(cfg.noise, t, rng, size=size)
            x = x + np.asarray(model.brownian[i](x), dtype=float) * db
        x = x + np.asarray(model.strat_drift(x), dtype=float) * t
        return x

    def apply(self, x, rng, stats=None, force_branch=None):
        """One scheme step; returns (state, branch_label)."""
        cfg, t = self.cfg, self.t
        d = len(cfg.model.brownian)
        kind = cfg.kind
        if kind == "euler_maruyama":
            return self._euler_maruyama(x, rng, stats), None
        if kind == "one_jump_first_order":
            return self._one_jump_schedule(x, rng, stats), None
        drift = lambda dur: (lambda x, rng, stats: self._apply_drift(dur, x, rng, stats))
        bm = lambda i, dur: (lambda x, rng, stats: self._apply_bm(i, dur, x, rng, stats))
        jump = lambda dur: (lambda x, rng, stats: self._apply_jump(dur, x, rng, stats))
        inner_fwd = [bm(i, t) for i in range(d)] + [jump(t)]
        if kind in ("nv_a", "nv_b", "nv_extrapolated"):
            if force_branch is None:
                branch = "forward" if rng.random() < 0.5 else "backward"
            else:
                branch = force_branch
            inner = inner_fwd if branch == "forward" else list(reversed(inner_fwd))
            if kind in ("nv_a", "nv_extrapolated"):
                seq = [drift(t / 2)] + inner + [drift(t / 2)]
            else:
                seq = [drift(t)] + inner if branch == "forward" else inner + [drift(t)]
            return self._apply_sequence(seq, x, rng, stats), branch
        if kind == "splitting":
            halves = [drift(t / 2)] + [bm(i, t / 2) for i in range(d)]
            seq = halves + [jump(t)] + list(reversed(halves))
            return self._apply_sequence(seq, x, rng, stats), None
        if kind == "fujiwara4":
            raise ConfigurationError(
                "fujiwara4 is a global extrapolated combination; "
                "simulate its product variants and combine the estimates"
            )
        raise ConfigurationError(f"unhandled scheme kind {kind!r}")


def one_step(cfg: SchemeConfig, t: float, x, rng, *, force_branch=None) -> StepOutcome:
    """Single scheme step from state x over duration t."""
    plan = StepPlan(cfg, t)
    stats = {}
    state, branch = plan.apply(x, rng, stats, force_branch=force_branch)
    aborted = not bool(np.all(np.isfinite(state)))
    return StepOutcome(state=state, jumps=stats.get("jumps", 0), branch=branch, aborted=aborted)


def simulate_batch(
    cfg: SchemeConfig,
    T: float,
    n: int,
    x0,
    n_paths: int,
    rng,
    *,
    force_branch=None,
) -> BatchResult:
    """n-step paths for a bundle of n_paths trajectories.

    Paths hitting non-finite values are frozen at their last finite state and
    flagged; draws for frozen paths keep being consumed so the random stream
    layout does not depend on abort events.
    """
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    plan = StepPlan(cfg, T / n)
    x = np.full(n_paths, float(x0)) if np.ndim(x0) == 0 else np.tile(
        np.asarray(x0, dtype=float), (n_paths, 1)
    )
    aborted = np.zeros(n_paths, dtype=bool)
    frozen = x.copy()
    stats = {}
    for _ in range(n):
        with np.errstate(all="ignore"):
            x_new, _ = plan.apply(x, rng, stats, force_branch=force_branch)
        x_new = np.asarray(x_new, dtype=float)
        finite = (
            np.isfinite(x_new) if x_new.ndim == 1 else np.all(np.isfinite(x_new), axis=-1)
        )
        newly_bad = ~finite & ~aborted
        if newly_bad.any():
            frozen[newly_bad] = x[newly_bad]
            aborted |= newly_bad
        x = x_new
        x[aborted] = frozen[aborted]
    return BatchResult(terminal=x, aborted=aborted, jumps=stats.get("jumps", 0))


@dataclass
class PathResult:
    terminal: float
    aborted: bool
    jumps: int


def simulate_path(cfg: SchemeConfig, T: float, n: int, x0, rng, *, force_branch=None) -> PathResult:
    """One full path: n independent steps of size T/n composed left to right."""
    res = simulate_batch(cfg, T, n, x0, 1, rng, force_branch=force_branch)
    terminal = res.terminal[0]
    return PathResult(
        terminal=float(terminal) if np.ndim(terminal) == 0 else terminal,
        aborted=bool(res.aborted[0]),
        jumps=res.jumps,
    )


# ---------------------------------------------------------------------------
# Bridge to the symbolic engine
# ---------------------------------------------------------------------------


def algebra_dimension(cfg: SchemeConfig) -> int:
    """The d passed to the series engine (alphabet L_0..L_{d+1})."""
    if cfg.kind == "one_jump_first_order":
        # Coordinates 0..d plus the three decomposed jump pieces: d+4 letters.
        return cfg.model.d + 2
    return cfg.model.d


def build_scheme_expr(cfg: SchemeConfig) -> algebra.SchemeExpr:
    """Abstract exponential-product form of the scheme for order certification."""
    d = algebra_dimension(cfg)
    if cfg.kind == "euler_maruyama":
        raise ConfigurationError(
            "euler_maruyama has no coordinate-exponential product form"
        )
    if cfg.kind == "one_jump_first_order":
        return algebra.forward_product_expr(d)
    return algebra.BUILTIN_EXPRS[cfg.kind](d)


def formal_order(cfg: SchemeConfig, m_max: int = 3):
    """Measured symbolic order of the scheme's exponential-product form."""
    return algebra.order_of(build_scheme_expr(cfg), algebra_dimension(cfg), m_max)


# ---------------------------------------------------------------------------
# Extrapolated (global) combinations
# ---------------------------------------------------------------------------


def extrapolation_variants(cfg: SchemeConfig, n: int):
    """Per-variant (weight, cfg, n, force_branch) runs of a global combination.

    The modified second-order scheme averages the all-forward and
    all-backward sandwich runs; the fourth-order combination mixes squared
    half-step and full-step products with 4/3, -1/3 weights.
    """
    if cfg.kind == "nv_extrapolated":
        base = replace(cfg, kind="nv_a")
        return [
            (0.5, base, n, "forward"),
            (0.5, base, n, "backward"),
        ]
    if cfg.kind == "fujiwara4":
        base = replace(cfg, kind="nv_b")
        return [
            (2 / 3, base, 2 * n, "forward"),
            (2 / 3, base, 2 * n, "backward"),
            (-1 / 6, base, n, "forward"),
            (-1 / 6, base, n, "backward"),
        ]
    raise ConfigurationError(f"{cfg.kind} is not a global extrapolated combination")
