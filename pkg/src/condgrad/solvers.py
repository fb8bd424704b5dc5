"""The conditional-gradient solver family.

Implements the blended pairwise solver, its lazified variant, and the
classical baselines (vanilla Frank-Wolfe, away-step, global pairwise)
over a shared active-set/trace data model.  Step sizes are pluggable:
exact line search (closed form for quadratics), the smoothness short
step, or an adaptive backtracking estimate of the smoothness constant.

Each run owns its mutable state; objectives and oracles are shared
read-only, so independent runs may execute concurrently.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .core import (
    ActiveSet,
    Atom,
    ConfigurationError,
    ContractViolation,
    RunTrace,
    StepKind,
    StepRecord,
    inner,
)
from .linesearch import golden_section_minimize
from .lmo import LinearMinimizationOracle
from .objectives import Objective

logger = logging.getLogger(__name__)

GOLDEN_TOL = 1e-10
GOLDEN_MAX_ITER = 200


class StepSizeRule(str, Enum):
    EXACT_LINE_SEARCH = "linesearch"
    SHORT_STEP = "shortstep"
    ADAPTIVE = "adaptive"


class StepChoice(Enum):
    PAIRWISE = "pairwise"
    FRANK_WOLFE = "frank_wolfe"


@dataclass
class SolverConfig:
    """Run limits and strategy knobs shared by every solver.

    ``k_sc`` scales the pairwise-versus-FW selection test to favor local
    steps; ``lazy_accuracy`` is the accuracy parameter of the lazified
    variant and is ignored by the non-lazy solvers.
    """

    max_iterations: int = 1000
    dual_gap_tolerance: float = 1e-8
    step_size: StepSizeRule = StepSizeRule.EXACT_LINE_SEARCH
    k_sc: float = 1.0
    lazy_accuracy: float = 1.0
    seed: int = 0

    def __post_init__(self):
        try:
            self.step_size = StepSizeRule(self.step_size)
        except ValueError:
            raise ConfigurationError(
                f"unknown step-size rule {self.step_size!r}"
            ) from None
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.k_sc < 1.0:
            raise ConfigurationError("k_sc must be >= 1")
        if self.lazy_accuracy < 1.0:
            raise ConfigurationError("lazy accuracy must be >= 1")
        if self.dual_gap_tolerance < 0.0:
            raise ConfigurationError("dual gap tolerance must be >= 0")


@dataclass
class AdaptiveState:
    """Backtracking smoothness estimate carried across one run."""

    l_estimate: Optional[float] = None


def select_step(pairwise_gap: float, fw_gap: float, k_sc: float = 1.0) -> StepChoice:
    """Choose between a local pairwise step and a global FW step.

    Pairwise is taken iff ``k_sc * pairwise_gap >= fw_gap``; with
    ``k_sc=1`` this is the plain blending criterion.  Both gaps scale
    identically in the gradient, so the choice is invariant under
    positive gradient rescaling.
    """
    if not (np.isfinite(pairwise_gap) and np.isfinite(fw_gap)):
        raise ContractViolation("gaps must be finite")
    if k_sc < 1.0:
        raise ConfigurationError("k_sc must be >= 1")
    if k_sc * pairwise_gap >= fw_gap:
        return StepChoice.PAIRWISE
    return StepChoice.FRANK_WOLFE


def _secant_l_estimate(obj: Objective, x, d, g_dot_d: float, d_norm_sq: float) -> float:
    """One-sample curvature estimate along d from a short secant step."""
    probe = 1e-3
    f0 = obj.value(x)
    f1 = obj.value(x - probe * d)
    # f(x - t d) ~ f0 - t <g, d> + t^2/2 L ||d||^2
    curv = 2.0 * (f1 - f0 + probe * g_dot_d) / (probe * probe)
    if not np.isfinite(curv) or curv <= 0.0:
        curv = d_norm_sq
    return max(curv / d_norm_sq, 1e-12)


def step_size(
    obj: Objective,
    x,
    d,
    lambda_max: float,
    strategy: StepSizeRule,
    grad=None,
    adaptive_state: Optional[AdaptiveState] = None,
) -> float:
    """Step length in ``x - lam * d`` for ``lam in [0, lambda_max]``.

    Exact line search uses the closed-form minimizer when the objective
    reports exact curvature and golden-section search otherwise; the
    short step evaluates the smoothness-based formula; the adaptive rule
    backtracks a smoothness estimate (doubling on failure of the
    sufficient-decrease test) and then takes the short step with it.
    """
    strategy = StepSizeRule(strategy)
    if lambda_max <= 0.0:
        raise ContractViolation("lambda_max must be positive")
    if grad is None:
        grad = obj.gradient(x)
    g_dot_d = inner(grad, d)
    d_norm_sq = inner(d, d)
    if d_norm_sq == 0.0 or g_dot_d <= 0.0:
        return 0.0

    if strategy is StepSizeRule.EXACT_LINE_SEARCH:
        qc = obj.quadratic_coefficient(x, d)
        if qc is not None:
            if qc <= 0.0:
                return float(lambda_max)
            return float(min(max(g_dot_d / qc, 0.0), lambda_max))
        lam = golden_section_minimize(
            lambda t: obj.value(x - t * d), 0.0, float(lambda_max),
            tol=GOLDEN_TOL, max_iter=GOLDEN_MAX_ITER,
        )
        if obj.value(x - lam * d) > obj.value(x):
            lam = 0.0
        return float(lam)

    if strategy is StepSizeRule.SHORT_STEP:
        smoothness = obj.smoothness_bound
        if smoothness is None:
            raise ConfigurationError(
                "short-step rule requires a known smoothness bound"
            )
        return float(min(max(g_dot_d / (smoothness * d_norm_sq), 0.0), lambda_max))

    # Adaptive: double the estimate until the smoothness inequality holds
    # at the candidate short step.
    state = adaptive_state if adaptive_state is not None else AdaptiveState()
    if state.l_estimate is None:
        state.l_estimate = _secant_l_estimate(obj, x, d, g_dot_d, d_norm_sq)
    f0 = obj.value(x)
    for _ in range(100):
        lam = min(g_dot_d / (state.l_estimate * d_norm_sq), lambda_max)
        bound = f0 - lam * g_dot_d + 0.5 * lam * lam * state.l_estimate * d_norm_sq
        if obj.value(x - lam * d) <= bound + 1e-15 * max(1.0, abs(f0)):
            return float(lam)
        state.l_estimate *= 2.0
    raise ContractViolation("adaptive step size failed to backtrack")


def _log_rate_constant(obj: Objective, lmo: LinearMinimizationOracle) -> None:
    """Report the theoretical linear-rate constant when delta is supplied."""
    delta = lmo.pyramidal_width
    mu = obj.strong_convexity_bound
    smoothness = obj.smoothness_bound
    if delta and mu and smoothness and np.isfinite(lmo.diameter):
        d_sq = lmo.diameter**2
        c = 0.5 * min(0.5, mu * delta * delta / (4.0 * smoothness * d_sq))
        logger.info("linear rate constant c_f_P=%.6g (delta=%.6g)", c, delta)


@dataclass
class _Run:
    """Shared bookkeeping for one solver run."""

    obj: Objective
    lmo: LinearMinimizationOracle
    config: SolverConfig
    active: ActiveSet
    trace: RunTrace
    adaptive: AdaptiveState = field(default_factory=AdaptiveState)
    started_ns: int = 0

    def start_clock(self):
        self.started_ns = time.perf_counter_ns()

    def elapsed_ns(self) -> int:
        return time.perf_counter_ns() - self.started_ns

    def gradient(self):
        return self.obj.gradient(self.active.iterate)

    def oracle(self, grad) -> Atom:
        atom = self.lmo.minimize(grad)
        self.trace.lmo_calls += 1
        return atom

    def step_length(self, d, lam_max: float, grad) -> float:
        return step_size(
            self.obj,
            self.active.iterate,
            d,
            lam_max,
            self.config.step_size,
            grad=grad,
            adaptive_state=self.adaptive,
        )

    def record(self, **kwargs) -> None:
        rec = StepRecord(
            primal=self.obj.value(self.active.iterate),
            support_size=len(self.active),
            **kwargs,
        )
        self.trace.add(rec, self.elapsed_ns())


def _new_run(obj, lmo, x0: Atom, config: SolverConfig, solver: str) -> _Run:
    if not isinstance(x0, Atom):
        raise ContractViolation("x0 must be an Atom (a vertex of the region)")
    active = ActiveSet.singleton(x0)
    trace = RunTrace(primal_start=obj.value(active.iterate))
    trace.meta.update(
        solver=solver,
        step_size=StepSizeRule(config.step_size).value,
        k_sc=config.k_sc,
        lazy_accuracy=config.lazy_accuracy,
        smoothness=obj.smoothness_bound,
        diameter=lmo.diameter,
    )
    _log_rate_constant(obj, lmo)
    return _Run(obj=obj, lmo=lmo, config=config, active=active, trace=trace)


def run_bpcg(obj: Objective, lmo: LinearMinimizationOracle, x0: Atom,
             config: SolverConfig):
    """Blended pairwise conditional gradients.

    Per iteration: away and local FW atoms over the active set, one LMO
    call for the global FW atom, then either a local pairwise step (when
    ``k_sc * pairwise_gap >= fw_gap``) or a global FW step.  Terminates
    when the FW gap reaches the configured tolerance.  Pairwise steps
    move weight between active atoms only, so no step can empty the away
    weight onto a new atom.
    """
    run = _new_run(obj, lmo, x0, config, "bpcg")
    run.start_clock()
    for _ in range(config.max_iterations):
        x = run.active.iterate
        grad = run.gradient()
        if not np.any(grad):
            break  # stationary point: the LMO direction is undefined
        away, local, pairwise_gap = run.active.away_and_local_fw(grad)
        w = run.oracle(grad)
        fw_gap = inner(grad, x) - inner(grad, w.ambient())
        away_global_gap = inner(grad, away.ambient()) - inner(grad, w.ambient())
        if fw_gap <= config.dual_gap_tolerance:
            break
        if select_step(pairwise_gap, fw_gap, config.k_sc) is StepChoice.PAIRWISE:
            d = away.ambient() - local.ambient()
            lam_max = run.active.weight_of(away)
            lam = run.step_length(d, lam_max, grad)
            kind = run.active.apply_pairwise(away, local, lam)
            run.record(
                kind=kind,
                lam=lam,
                lam_max=lam_max,
                lmo_called=True,
                pairwise_gap=pairwise_gap,
                fw_gap=fw_gap,
                dir_gap=pairwise_gap,
                dir_norm_sq=inner(d, d),
                away_global_gap=away_global_gap,
            )
        else:
            d = x - w.ambient()
            lam = run.step_length(d, 1.0, grad)
            run.active.apply_fw(w, lam)
            run.record(
                kind=StepKind.FW,
                lam=lam,
                lam_max=1.0,
                lmo_called=True,
                pairwise_gap=pairwise_gap,
                fw_gap=fw_gap,
                dir_gap=fw_gap,
                dir_norm_sq=inner(d, d),
                away_global_gap=away_global_gap,
            )
    return run.active, run.trace


def run_lazy_bpcg(obj: Objective, lmo: LinearMinimizationOracle, x0: Atom,
                  config: SolverConfig):
    """Lazified blended pairwise conditional gradients.

    Keeps an upper estimate ``phi`` of half the FW gap.  Local pairwise
    steps are taken without consulting the LMO whenever the pairwise gap
    reaches ``phi``; otherwise one LMO call decides between a global FW
    step (gap at least ``phi / J``) and a gap step that halves ``phi``
    and leaves the iterate unchanged.  Terminates when ``2 phi`` falls
    below the gap tolerance.
    """
    run = _new_run(obj, lmo, x0, config, "lazy-bpcg")
    accuracy = config.lazy_accuracy
    run.start_clock()
    grad = run.gradient()
    if not np.any(grad):
        return run.active, run.trace
    w0 = run.oracle(grad)
    phi = 0.5 * (inner(grad, run.active.iterate) - inner(grad, w0.ambient()))
    run.trace.phi_start = phi
    for _ in range(config.max_iterations):
        if 2.0 * phi <= config.dual_gap_tolerance:
            break
        x = run.active.iterate
        grad = run.gradient()
        if not np.any(grad):
            break
        away, local, pairwise_gap = run.active.away_and_local_fw(grad)
        if pairwise_gap >= phi:
            d = away.ambient() - local.ambient()
            lam_max = run.active.weight_of(away)
            lam = run.step_length(d, lam_max, grad)
            kind = run.active.apply_pairwise(away, local, lam)
            run.record(
                kind=kind,
                lam=lam,
                lam_max=lam_max,
                lmo_called=False,
                pairwise_gap=pairwise_gap,
                phi=phi,
                dir_gap=pairwise_gap,
                dir_norm_sq=inner(d, d),
            )
            continue
        w = run.oracle(grad)
        fw_gap = inner(grad, x) - inner(grad, w.ambient())
        away_global_gap = inner(grad, away.ambient()) - inner(grad, w.ambient())
        if fw_gap >= phi / accuracy:
            d = x - w.ambient()
            lam = run.step_length(d, 1.0, grad)
            run.active.apply_fw(w, lam)
            run.record(
                kind=StepKind.FW,
                lam=lam,
                lam_max=1.0,
                lmo_called=True,
                pairwise_gap=pairwise_gap,
                fw_gap=fw_gap,
                phi=phi,
                dir_gap=fw_gap,
                dir_norm_sq=inner(d, d),
                away_global_gap=away_global_gap,
            )
        else:
            phi = phi / 2.0
            run.record(
                kind=StepKind.GAP,
                lam=0.0,
                lam_max=1.0,
                lmo_called=True,
                pairwise_gap=pairwise_gap,
                fw_gap=fw_gap,
                phi=phi,
                away_global_gap=away_global_gap,
            )
    return run.active, run.trace


def run_vanilla_fw(obj: Objective, lmo: LinearMinimizationOracle, x0: Atom,
                   config: SolverConfig, rule: str = "linesearch"):
    """Vanilla Frank-Wolfe with line-search or 1/(t+1) equal-weight steps.

    Under the equal-weight rule the iterate after T steps is the uniform
    average of the start vertex and the T oracle vertices.
    """
    if rule not in ("linesearch", "equal_weight"):
        raise ConfigurationError(f"unknown vanilla step rule {rule!r}")
    run = _new_run(obj, lmo, x0, config, f"fw-{rule}")
    if rule == "equal_weight":
        run.trace.meta["step_size"] = "equal_weight"
    run.start_clock()
    for t in range(config.max_iterations):
        x = run.active.iterate
        grad = run.gradient()
        if not np.any(grad):
            break
        w = run.oracle(grad)
        fw_gap = inner(grad, x) - inner(grad, w.ambient())
        if fw_gap <= config.dual_gap_tolerance:
            break
        d = x - w.ambient()
        if rule == "equal_weight":
            lam = 1.0 / (t + 2.0)
        else:
            lam = run.step_length(d, 1.0, grad)
        run.active.apply_fw(w, lam)
        run.record(
            kind=StepKind.FW,
            lam=lam,
            lam_max=1.0,
            lmo_called=True,
            fw_gap=fw_gap,
            dir_gap=fw_gap,
            dir_norm_sq=inner(d, d),
        )
    return run.active, run.trace


def run_afw(obj: Objective, lmo: LinearMinimizationOracle, x0: Atom,
            config: SolverConfig):
    """Away-step Frank-Wolfe baseline.

    Chooses between the FW direction and the away direction by comparing
    their gradient gaps; away steps cap the step size at
    ``c_a / (1 - c_a)`` and drop the away atom when it is reached.
    """
    run = _new_run(obj, lmo, x0, config, "afw")
    run.start_clock()
    for _ in range(config.max_iterations):
        x = run.active.iterate
        grad = run.gradient()
        if not np.any(grad):
            break
        away, _, _ = run.active.away_and_local_fw(grad)
        w = run.oracle(grad)
        gx = inner(grad, x)
        fw_gap = gx - inner(grad, w.ambient())
        away_gap = inner(grad, away.ambient()) - gx
        away_global_gap = inner(grad, away.ambient()) - inner(grad, w.ambient())
        if fw_gap <= config.dual_gap_tolerance:
            break
        if fw_gap >= away_gap:
            d = x - w.ambient()
            lam = run.step_length(d, 1.0, grad)
            run.active.apply_fw(w, lam)
            run.record(
                kind=StepKind.FW,
                lam=lam,
                lam_max=1.0,
                lmo_called=True,
                fw_gap=fw_gap,
                dir_gap=fw_gap,
                dir_norm_sq=inner(d, d),
                away_global_gap=away_global_gap,
            )
        else:
            c_away = run.active.weight_of(away)
            if c_away >= 1.0 - 1e-15:
                break  # singleton active set cannot move away from itself
            lam_max = c_away / (1.0 - c_away)
            d = away.ambient() - x
            lam = run.step_length(d, lam_max, grad)
            kind = run.active.apply_away(away, lam, lam_max)
            run.record(
                kind=kind,
                lam=lam,
                lam_max=lam_max,
                lmo_called=True,
                fw_gap=fw_gap,
                dir_gap=away_gap,
                dir_norm_sq=inner(d, d),
                away_global_gap=away_global_gap,
            )
    return run.active, run.trace


def run_pcg(obj: Objective, lmo: LinearMinimizationOracle, x0: Atom,
            config: SolverConfig):
    """Global pairwise conditional gradients baseline.

    Moves weight from the away atom directly onto the global FW atom with
    step cap ``weight(away)``; exhausting the cap while the FW atom is
    new is the classical swap step.  Recorded ``pairwise_gap`` is the gap
    along the actual pairwise direction ``away - w``.
    """
    run = _new_run(obj, lmo, x0, config, "pcg")
    run.start_clock()
    for _ in range(config.max_iterations):
        x = run.active.iterate
        grad = run.gradient()
        if not np.any(grad):
            break
        away, _, _ = run.active.away_and_local_fw(grad)
        w = run.oracle(grad)
        fw_gap = inner(grad, x) - inner(grad, w.ambient())
        if fw_gap <= config.dual_gap_tolerance:
            break
        d = away.ambient() - w.ambient()
        dir_gap = inner(grad, d)
        lam_max = run.active.weight_of(away)
        lam = run.step_length(d, lam_max, grad) if dir_gap > 0.0 else 0.0
        kind = run.active.apply_pairwise(away, w, lam)
        run.record(
            kind=kind,
            lam=lam,
            lam_max=lam_max,
            lmo_called=True,
            pairwise_gap=dir_gap,
            fw_gap=fw_gap,
            dir_gap=dir_gap,
            dir_norm_sq=inner(d, d),
            away_global_gap=dir_gap,
        )
    return run.active, run.trace


SOLVERS = {
    "bpcg": run_bpcg,
    "lazy-bpcg": run_lazy_bpcg,
    "fw": run_vanilla_fw,
    "afw": run_afw,
    "pcg": run_pcg,
}


@dataclass
class InvariantViolation:
    index: int
    check: str
    detail: str


def verify_trace_invariants(
    trace: RunTrace,
    smoothness: Optional[float] = None,
    diameter: Optional[float] = None,
    k_sc: float = 1.0,
    tol: float = 1e-9,
) -> list:
    """Check a finished trace against the per-step progress guarantees.

    Verifies, where the recorded data permits:

    - step-counter consistency and the drop/descent dichotomy,
    - the blending inequality
      ``(k_sc + 1) * <g, d_t> >= <g, a_t - w_t> - tol``,
    - per-step progress
      ``f(x_t) - f(x_{t+1}) >= <g, d_t>**2 / (2 L D**2) - tol``
      on descent steps and on FW steps whose short step is below one,
    - monotonicity of the primal value (gap steps leave it unchanged),
    - exact halving of phi on gap steps.

    Progress checks assume exact line search or short steps and are
    skipped for adaptive runs.  Returns a list of violations.
    """
    out = []
    counted = trace.t_fw + trace.t_desc + trace.t_drop + trace.t_gap
    if counted != len(trace.records):
        out.append(InvariantViolation(-1, "counters", "step counters do not sum"))
    rule = trace.meta.get("step_size")
    check_monotone = rule != "equal_weight"
    check_progress = (
        smoothness is not None
        and diameter is not None
        and np.isfinite(diameter)
        and rule in (StepSizeRule.EXACT_LINE_SEARCH.value, StepSizeRule.SHORT_STEP.value)
    )
    denom = 2.0 * smoothness * diameter * diameter if check_progress else None
    prev_primal = trace.primal_start
    prev_phi = trace.phi_start
    for i, rec in enumerate(trace.records):
        if rec.kind is StepKind.DROP and rec.lam < rec.lam_max - 1e-12:
            out.append(
                InvariantViolation(i, "drop", "drop step without exhausted weight")
            )
        if rec.kind is StepKind.DESCENT and rec.lam >= rec.lam_max:
            out.append(
                InvariantViolation(i, "descent", "descent step with lam >= lam_max")
            )
        if rec.kind is StepKind.GAP:
            if abs(rec.primal - prev_primal) > tol:
                out.append(
                    InvariantViolation(i, "gap", "gap step changed the primal value")
                )
            if prev_phi is not None and rec.phi is not None:
                if abs(rec.phi - 0.5 * prev_phi) > 1e-15 * max(1.0, prev_phi):
                    out.append(
                        InvariantViolation(i, "gap", "phi not halved on gap step")
                    )
        elif check_monotone:
            if rec.primal > prev_primal + tol:
                out.append(
                    InvariantViolation(
                        i, "monotone", f"primal rose by {rec.primal - prev_primal:.3e}"
                    )
                )
        if rec.away_global_gap is not None and rec.dir_gap is not None:
            lhs = (k_sc + 1.0) * rec.dir_gap
            if lhs < rec.away_global_gap - tol:
                out.append(
                    InvariantViolation(
                        i,
                        "blending",
                        f"(k_sc+1)<g,d>={lhs:.3e} < <g,a-w>={rec.away_global_gap:.3e}",
                    )
                )
        if check_progress and rec.dir_gap is not None and rec.dir_norm_sq:
            progress = prev_primal - rec.primal
            short = rec.dir_gap / (smoothness * rec.dir_norm_sq)
            applies = rec.kind is StepKind.DESCENT or (
                rec.kind is StepKind.FW and short < 1.0
            )
            if applies and progress < rec.dir_gap**2 / denom - tol:
                out.append(
                    InvariantViolation(
                        i,
                        "progress",
                        f"progress {progress:.3e} below "
                        f"{rec.dir_gap ** 2 / denom:.3e}",
                    )
                )
        if rec.phi is not None:
            prev_phi = rec.phi
        prev_primal = rec.primal
    return out
