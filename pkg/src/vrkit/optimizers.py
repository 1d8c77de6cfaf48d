"""Iterative methods for finite-sum minimization.

All optimizers share the same conventions:

* one :class:`~vrkit.problems.GradOracleCounters` per run, charged by the
  gradient oracles only (objective values and monitoring gradients in trace
  rows are free);
* a per-run PCG64 generator seeded explicitly, so a (config, seed) pair
  reproduces a run exactly;
* mini-batches drawn uniformly without replacement within a batch,
  independently across steps;
* a divergence guard that stops a run and flags the trace once the
  objective is non-finite or grows past 1e3 * f(w0) + 1.

The variance-reduced methods form the direction

    g_t = grad_B(x_t) - grad_B(w_k) + grad_full(w_k)

which is an unbiased estimate of the exact gradient at x_t; at the first
inner step x_1 = w_k it equals grad_full(w_k) for every sampled batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import PhaseTestState, Trace, TraceRecorder, TraceRow
from .precond import PrecondState, PrecondVariant, ProjectionSpec
from .problems import GradOracleCounters, Problem

TERMINATION_REASONS = ("budget", "target_reached", "adaptive_stop", "diverged")

SNAPSHOT_MODES = ("last", "average")


@dataclass(frozen=True)
class StepSizeRule:
    """How outer-loop step-sizes are chosen.

    ``constant`` uses ``eta`` as-is.  ``heuristic`` estimates the distance
    to the optimum from the full-gradient norm and a running maximum of
    local smoothness estimates; it needs no tuning.  ``bb`` marks the
    Barzilai-Borwein rule and is accepted only by :func:`svrg_bb`, where
    ``eta`` seeds the first outer loop.
    """

    kind: str = "heuristic"
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "heuristic", "bb"):
            raise ValueError(f"unknown step-size rule {self.kind!r}")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")


@dataclass(frozen=True)
class InnerLoopPolicy:
    """Fixed-length inner loops, or growth-test termination up to a cap."""

    kind: str = "fixed"
    m: int | None = None
    theta: float = 0.5
    max_inner: int | None = None
    burn_in: int | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "adaptive"):
            raise ValueError(f"unknown inner-loop policy {self.kind!r}")
        if self.kind == "fixed" and self.m is not None and self.m < 1:
            raise ValueError("fixed inner-loop length must be >= 1")
        if self.theta <= 0:
            raise ValueError("theta must be > 0")


@dataclass
class RunResult:
    """Outcome of one optimizer run."""

    final_iterate: np.ndarray
    trace: Trace
    counters: GradOracleCounters
    termination_reason: str
    averaged_iterate: np.ndarray | None = None
    g_norm_star_steps: np.ndarray | None = None
    notes: dict = field(default_factory=dict)


class _Run:
    """Shared per-run context: counters, RNG, trace recording, divergence."""

    def __init__(self, problem: Problem, w0: np.ndarray, seed: int):
        self.problem = problem
        self.counters = GradOracleCounters()
        self.rng = np.random.default_rng(seed)
        self.recorder = TraceRecorder()
        f0 = problem.loss_value(w0)
        self.diverge_limit = 1e3 * f0 + 1.0
        self.diverged = False

    @property
    def passes(self) -> float:
        return self.counters.effective_passes(self.problem.n)

    def sample(self, batch_size: int) -> np.ndarray:
        return self.rng.choice(self.problem.n, size=batch_size, replace=False)

    def record(
        self,
        x: np.ndarray,
        outer: int = 0,
        eta: float | None = None,
        g_star: float | None = None,
        event: str | None = None,
        force: bool = False,
        grad_norm: float | None = None,
    ) -> None:
        if self.diverged:
            return
        passes = self.passes
        last = self.recorder.last_passes
        if not force and event is None and last is not None and passes - last < 1.0:
            return
        objective = self.problem.loss_value(x)
        if grad_norm is None:
            grad_norm = float(np.linalg.norm(self.problem.grad_full(x)))
        if not np.isfinite(objective) or objective > self.diverge_limit:
            event = "diverged"
            self.diverged = True
        self.recorder.record(
            TraceRow(
                passes=passes,
                objective=objective,
                grad_norm=grad_norm,
                g_norm_star=g_star,
                step_size=eta,
                outer=outer,
                event=event,
            )
        )

    def mark_diverged(self, x: np.ndarray, outer: int, eta: float | None) -> None:
        if self.diverged:
            return
        self.diverged = True
        objective = self.problem.loss_value(x)
        self.recorder.record(
            TraceRow(
                passes=self.passes,
                objective=objective,
                grad_norm=None,
                g_norm_star=None,
                step_size=eta,
                outer=outer,
                event="diverged",
            )
        )

    def result(self, x, *, averaged=None, g_star_steps=None, notes=None, reason=None) -> RunResult:
        return RunResult(
            final_iterate=x,
            trace=self.recorder.trace,
            counters=self.counters,
            termination_reason="diverged" if self.diverged else (reason or "budget"),
            averaged_iterate=averaged,
            g_norm_star_steps=g_star_steps,
            notes=notes or {},
        )


class _HeuristicStepSize:
    """Tuning-free outer-loop step-size from gradient geometry.

    Keeps the previous full-gradient point to form the local smoothness
    estimate L = ||dg|| / ||dw||, tracks the running maximum, and sets
    eta = ||grad|| / (sqrt(2) * max L).  On the first call it probes a
    random nearby point (one extra charged full gradient) to seed the
    estimate.  Degenerate updates reuse the previous value (or 1.0).
    """

    def __init__(self):
        self.lmax = 0.0
        self.prev_point: np.ndarray | None = None
        self.prev_grad: np.ndarray | None = None
        self.prev_eta: float | None = None

    def step_size(self, run: _Run, w: np.ndarray, gfull: np.ndarray) -> float:
        if self.prev_point is None:
            u = run.rng.standard_normal(w.shape[0])
            u *= 1e-3 * (1.0 + float(np.linalg.norm(w))) / float(np.linalg.norm(u))
            probe = w + u
            self.prev_point = probe
            self.prev_grad = run.problem.grad_full(probe, run.counters)
        dw = w - self.prev_point
        dg = gfull - self.prev_grad
        dw_norm = float(np.linalg.norm(dw))
        g_norm = float(np.linalg.norm(gfull))
        if dw_norm > 0:
            self.lmax = max(self.lmax, float(np.linalg.norm(dg)) / dw_norm)
        if dw_norm == 0 or g_norm == 0 or self.lmax == 0:
            eta = self.prev_eta if self.prev_eta is not None else 1.0
        else:
            eta = g_norm / (math.sqrt(2.0) * self.lmax)
        self.prev_point = w
        self.prev_grad = gfull
        self.prev_eta = eta
        return float(eta)


def _resolve_eta(rule: StepSizeRule, heur: _HeuristicStepSize | None, run: _Run,
                 w: np.ndarray, gfull: np.ndarray) -> float:
    if rule.kind == "constant":
        return rule.eta
    if rule.kind == "heuristic":
        return heur.step_size(run, w, gfull)
    raise ValueError("the bb rule applies only to svrg_bb")


def _validate_common(problem: Problem, w0: np.ndarray, batch_size: int, snapshot: str) -> np.ndarray:
    w0 = np.asarray(w0, dtype=np.float64).ravel()
    if w0.shape[0] != problem.d:
        raise ValueError(f"w0 has dimension {w0.shape[0]}, expected {problem.d}")
    if not 1 <= batch_size <= problem.n:
        raise ValueError(f"batch_size must be in [1, {problem.n}]")
    if snapshot not in SNAPSHOT_MODES:
        raise ValueError(f"snapshot must be one of {SNAPSHOT_MODES}")
    return w0


def _adasvrg_engine(
    run: _Run,
    w: np.ndarray,
    outer_loops: int,
    inner_max: int,
    variant: PrecondVariant,
    proj: ProjectionSpec,
    batch_size: int,
    snapshot: str,
    rule: StepSizeRule,
    heur: _HeuristicStepSize | None,
    theta: float | None = None,
    burn_in: int = 0,
    outer_offset: int = 0,
):
    """Outer/inner loop engine shared by the preconditioned VR variants.

    Passing ``theta`` activates the growth-ratio termination test on the
    inner loop (checked at even steps past ``burn_in``, before the iterate
    update, as the accumulator already includes the current gradient).
    Returns the last snapshot, the running average of snapshots, the outer
    indices that stopped adaptively, and per-loop (sum ||g||^2_{A^-1},
    trace A) pairs for the runtime trace-bound check.
    """
    problem = run.problem
    d = problem.d
    snap_sum = np.zeros(d)
    completed = 0
    adaptive_stops: list[int] = []
    precond_checks: list[tuple[float, float]] = []

    for k in range(outer_loops):
        if run.diverged:
            break
        outer = outer_offset + k
        gfull = problem.grad_full(w, run.counters)
        eta = _resolve_eta(rule, heur, run, w, gfull)
        run.record(w, outer=outer, eta=eta, grad_norm=float(np.linalg.norm(gfull)), force=True)
        if run.diverged:
            break

        state = PrecondState(variant, d)
        test = (
            PhaseTestState(theta=theta, burn_in_threshold=burn_in, capacity=inner_max)
            if theta is not None
            else None
        )
        x = w.copy()
        x_sum = np.zeros(d)
        m_k = inner_max
        try:
            for t in range(1, inner_max + 1):
                batch = run.sample(batch_size)
                g = (
                    problem.grad_batch(x, batch, run.counters)
                    - problem.grad_batch(w, batch, run.counters)
                    + gfull
                )
                x_sum += x
                state.accumulate(g)
                if test is not None and test.observe(t, state.trace_G()):
                    m_k = t
                    adaptive_stops.append(outer)
                    run.record(
                        x, outer=outer, eta=eta, g_star=state.g_norm_star(),
                        event="adaptive_stop", force=True,
                    )
                    break
                if state.has_signal():
                    x = state.step(x, g, eta, proj)
                run.record(x, outer=outer, eta=eta, g_star=state.g_norm_star())
                if run.diverged:
                    m_k = t
                    break
        except FloatingPointError:
            run.mark_diverged(x, outer=outer, eta=eta)
            m_k = max(1, state.t)
        precond_checks.append((state.weighted_grad_sq_sum, state.trace_A()))
        w = x_sum / m_k if snapshot == "average" else x
        snap_sum += w
        completed += 1

    averaged = snap_sum / completed if completed else w.copy()
    return w, averaged, adaptive_stops, precond_checks, completed


def adasvrg_fixed(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    inner_loops: int | None = None,
    *,
    variant: PrecondVariant | None = None,
    step: StepSizeRule | None = None,
    proj: ProjectionSpec | None = None,
    batch_size: int = 1,
    snapshot: str = "last",
    seed: int = 0,
) -> RunResult:
    """Variance reduction with an adaptive-metric inner loop of fixed length.

    Each outer loop computes the full gradient at the snapshot, picks a
    step-size, resets the accumulator, and runs ``inner_loops`` steps
    (default n // batch_size).  ``snapshot='average'`` also returns the
    running average of snapshots in ``averaged_iterate``.
    """
    variant = variant or PrecondVariant()
    step = step or StepSizeRule()
    proj = proj or ProjectionSpec()
    w0 = _validate_common(problem, w0, batch_size, snapshot)
    if outer_loops < 0:
        raise ValueError("outer_loops must be >= 0")
    inner = inner_loops if inner_loops is not None else max(1, problem.n // batch_size)
    if inner < 1:
        raise ValueError("inner_loops must be >= 1")

    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    heur = _HeuristicStepSize() if step.kind == "heuristic" else None
    w, averaged, _, checks, completed = _adasvrg_engine(
        run, w0, outer_loops, inner, variant, proj, batch_size, snapshot, step, heur
    )
    run.record(w, outer=max(0, outer_loops - 1), force=True)
    return run.result(
        w,
        averaged=averaged if (snapshot == "average" and completed) else None,
        notes={"precond_checks": checks},
    )


def adasvrg_multistage(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    epsilon: float,
    *,
    variant: PrecondVariant | None = None,
    step: StepSizeRule | None = None,
    proj: ProjectionSpec | None = None,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Staged runs with doubling inner loops until the target accuracy.

    Runs ceil(log2(1/epsilon)) stages; stage i uses inner loops of length
    2^(i+1) and starts from the averaged output of the previous stage.
    """
    variant = variant or PrecondVariant()
    step = step or StepSizeRule()
    proj = proj or ProjectionSpec()
    w0 = _validate_common(problem, w0, batch_size, "average")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if outer_loops < 3:
        raise ValueError("multistage runs need at least 3 outer loops per stage")

    stages = math.ceil(math.log2(1.0 / epsilon))
    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    heur = _HeuristicStepSize() if step.kind == "heuristic" else None

    w = w0
    schedule: list[int] = []
    checks: list[tuple[float, float]] = []
    offset = 0
    for i in range(1, stages + 1):
        m_i = 2 ** (i + 1)
        _, averaged, _, stage_checks, _ = _adasvrg_engine(
            run, w, outer_loops, m_i, variant, proj, batch_size, "average", step, heur,
            outer_offset=offset,
        )
        w = averaged
        schedule.append(m_i)
        checks.extend(stage_checks)
        offset += outer_loops
        run.record(w, outer=offset - 1, event="stage_boundary", force=True)
        if run.diverged:
            break
    return run.result(
        w,
        averaged=w,
        notes={"stage_inner_sizes": schedule, "precond_checks": checks},
    )


def adasvrg_adaptive(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    policy: InnerLoopPolicy | None = None,
    *,
    variant: PrecondVariant | None = None,
    step: StepSizeRule | None = None,
    proj: ProjectionSpec | None = None,
    batch_size: int = 1,
    snapshot: str = "last",
    seed: int = 0,
) -> RunResult:
    """Inner loops terminated by the accumulator growth test.

    Each inner loop runs up to ``max_inner`` steps (default 10n/b); at even
    steps past the burn-in (default n/b) the relative growth ratio of
    ||G||_*^2 over a doubling window is compared against theta, and the
    loop stops once gradient noise dominates.
    """
    variant = variant or PrecondVariant()
    step = step or StepSizeRule()
    proj = proj or ProjectionSpec()
    w0 = _validate_common(problem, w0, batch_size, snapshot)
    if outer_loops < 0:
        raise ValueError("outer_loops must be >= 0")
    n_over_b = max(1, problem.n // batch_size)
    if policy is None:
        policy = InnerLoopPolicy(kind="adaptive")
    if policy.kind != "adaptive":
        raise ValueError("adasvrg_adaptive requires an adaptive inner-loop policy")
    max_inner = policy.max_inner if policy.max_inner is not None else 10 * n_over_b
    burn_in = policy.burn_in if policy.burn_in is not None else n_over_b
    if max_inner < burn_in:
        raise ValueError("max_inner must be at least the burn-in threshold")

    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    heur = _HeuristicStepSize() if step.kind == "heuristic" else None
    w, averaged, stops, checks, completed = _adasvrg_engine(
        run, w0, outer_loops, max_inner, variant, proj, batch_size, snapshot, step, heur,
        theta=policy.theta, burn_in=burn_in,
    )
    run.record(w, outer=max(0, outer_loops - 1), force=True)
    return run.result(
        w,
        averaged=averaged if (snapshot == "average" and completed) else None,
        notes={"adaptive_stops": stops, "precond_checks": checks},
    )


def hybrid_adagrad_adasvrg(
    problem: Problem,
    x1: np.ndarray,
    total_steps: int,
    *,
    max_inner: int | None = None,
    theta: float = 0.5,
    variant: PrecondVariant | None = None,
    step: StepSizeRule | None = None,
    proj: ProjectionSpec | None = None,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Plain adaptive-gradient steps until stalling is detected, then switch.

    Phase 1 runs preconditioned stochastic gradient (no variance reduction)
    with the growth-ratio test, burn-in 2n/b, checks at even steps.  When the
    test fires at step t, phase 2 runs the adaptively-terminated VR method
    from the current iterate with an outer-loop budget of
    (total_steps - t) // (n // b).  If the test never fires (the
    interpolation regime), phase 1 consumes the whole budget.

    With the heuristic rule, the phase-1 step-size is recomputed from a full
    gradient every n/b steps; a constant rule uses ``step.eta`` throughout.
    """
    variant = variant or PrecondVariant()
    step = step or StepSizeRule()
    proj = proj or ProjectionSpec()
    x1 = _validate_common(problem, x1, batch_size, "last")
    if total_steps < 0:
        raise ValueError("total_steps must be >= 0")
    n_over_b = max(1, problem.n // batch_size)
    burn = 2 * n_over_b
    if max_inner is None:
        max_inner = 10 * n_over_b

    run = _Run(problem, x1, seed)
    run.record(x1, force=True)
    heur = _HeuristicStepSize() if step.kind == "heuristic" else None
    state = PrecondState(variant, problem.d)
    test = PhaseTestState(theta=theta, burn_in_threshold=burn, capacity=total_steps)
    x = x1.copy()
    eta = step.eta if step.kind == "constant" else None
    g_stars = np.empty(total_steps)
    steps_done = 0
    switch_step: int | None = None

    try:
        for t in range(1, total_steps + 1):
            if run.diverged:
                break
            if step.kind == "heuristic" and (t - 1) % n_over_b == 0:
                gfull = problem.grad_full(x, run.counters)
                eta = heur.step_size(run, x, gfull)
            batch = run.sample(batch_size)
            g = problem.grad_batch(x, batch, run.counters)
            state.accumulate(g)
            g_stars[t - 1] = state.g_norm_star()
            steps_done = t
            if test.observe(t, state.trace_G()):
                switch_step = t
                run.record(
                    x, outer=0, eta=eta, g_star=state.g_norm_star(),
                    event="switch", force=True,
                )
                break
            if state.has_signal():
                x = state.step(x, g, eta, proj)
            run.record(x, outer=0, eta=eta, g_star=state.g_norm_star())
    except FloatingPointError:
        run.mark_diverged(x, outer=0, eta=eta)

    notes: dict = {
        "switched": switch_step is not None,
        "switch_step": switch_step,
        "phase2_outer_loops": 0,
    }
    if switch_step is not None and not run.diverged:
        k2 = (total_steps - switch_step) // n_over_b
        notes["phase2_outer_loops"] = k2
        if k2 >= 1:
            heur2 = _HeuristicStepSize() if step.kind == "heuristic" else None
            x, _, stops, checks, _ = _adasvrg_engine(
                run, x, k2, max_inner, variant, proj, batch_size, "last", step, heur2,
                theta=theta, burn_in=n_over_b, outer_offset=1,
            )
            notes["adaptive_stops"] = stops
            notes["precond_checks"] = checks
    run.record(x, outer=0 if switch_step is None else notes["phase2_outer_loops"], force=True)
    return run.result(x, g_star_steps=g_stars[:steps_done], notes=notes)


def svrg(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    inner_loops: int | None = None,
    eta: float = 0.1,
    *,
    batch_size: int = 1,
    snapshot: str = "last",
    seed: int = 0,
) -> RunResult:
    """Classic variance reduction with Euclidean constant-step updates."""
    w0 = _validate_common(problem, w0, batch_size, snapshot)
    inner = inner_loops if inner_loops is not None else max(1, problem.n // batch_size)
    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    w = w0
    for k in range(outer_loops):
        if run.diverged:
            break
        gfull = problem.grad_full(w, run.counters)
        run.record(w, outer=k, eta=eta, grad_norm=float(np.linalg.norm(gfull)), force=True)
        if run.diverged:
            break
        x = w.copy()
        x_sum = np.zeros(problem.d)
        for t in range(inner):
            batch = run.sample(batch_size)
            g = (
                problem.grad_batch(x, batch, run.counters)
                - problem.grad_batch(w, batch, run.counters)
                + gfull
            )
            x_sum += x
            x = x - eta * g
            run.record(x, outer=k, eta=eta)
            if run.diverged:
                break
        w = x_sum / inner if snapshot == "average" else x
    run.record(w, outer=max(0, outer_loops - 1), force=True)
    return run.result(w)


def loopless_svrg(
    problem: Problem,
    w0: np.ndarray,
    total_steps: int,
    eta: float,
    *,
    p: float | None = None,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Single-loop variance reduction with coin-flip snapshot refreshes.

    Each step first refreshes the snapshot (and its full gradient) with
    probability ``p`` (default batch_size / n), then takes a VR step.
    """
    w0 = _validate_common(problem, w0, batch_size, "last")
    if p is None:
        p = batch_size / problem.n
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    snap = w0.copy()
    gfull = problem.grad_full(snap, run.counters)
    x = w0.copy()
    refreshes = 0
    for _ in range(total_steps):
        if run.diverged:
            break
        if run.rng.random() < p:
            snap = x.copy()
            gfull = problem.grad_full(snap, run.counters)
            refreshes += 1
        batch = run.sample(batch_size)
        g = (
            problem.grad_batch(x, batch, run.counters)
            - problem.grad_batch(snap, batch, run.counters)
            + gfull
        )
        x = x - eta * g
        run.record(x, outer=0, eta=eta)
    run.record(x, outer=0, force=True)
    return run.result(x, notes={"snapshot_refreshes": refreshes})


def sarah(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    inner_loops: int | None = None,
    eta: float = 0.1,
    *,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Recursive gradient estimates: the correction telescopes across the
    inner loop instead of anchoring at the snapshot.  Snapshot is the last
    iterate; each outer loop performs ``inner_loops`` updates, the first
    with the exact full gradient.
    """
    w0 = _validate_common(problem, w0, batch_size, "last")
    inner = inner_loops if inner_loops is not None else max(1, problem.n // batch_size)
    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    w = w0
    for k in range(outer_loops):
        if run.diverged:
            break
        v = problem.grad_full(w, run.counters)
        run.record(w, outer=k, eta=eta, grad_norm=float(np.linalg.norm(v)), force=True)
        if run.diverged:
            break
        x_prev = w.copy()
        x = w - eta * v
        run.record(x, outer=k, eta=eta)
        for t in range(1, inner):
            if run.diverged:
                break
            batch = run.sample(batch_size)
            v = (
                problem.grad_batch(x, batch, run.counters)
                - problem.grad_batch(x_prev, batch, run.counters)
                + v
            )
            x_prev = x
            x = x - eta * v
            run.record(x, outer=k, eta=eta)
        w = x
    run.record(w, outer=max(0, outer_loops - 1), force=True)
    return run.result(w)


def svrg_bb(
    problem: Problem,
    w0: np.ndarray,
    outer_loops: int,
    inner_loops: int | None = None,
    eta0: float = 0.1,
    *,
    batch_size: int = 1,
    snapshot: str = "last",
    seed: int = 0,
) -> RunResult:
    """SVRG with the Barzilai-Borwein outer-loop step-size.

    For k >= 1, eta_k = ||dw||^2 / (m * <dw, dg>) from consecutive
    snapshots and full gradients.  A non-positive curvature denominator
    reuses the previous step-size and is noted rather than fatal.
    """
    w0 = _validate_common(problem, w0, batch_size, snapshot)
    inner = inner_loops if inner_loops is not None else max(1, problem.n // batch_size)
    run = _Run(problem, w0, seed)
    run.record(w0, force=True)
    w = w0
    eta = float(eta0)
    prev_w: np.ndarray | None = None
    prev_g: np.ndarray | None = None
    fallbacks: list[int] = []
    for k in range(outer_loops):
        if run.diverged:
            break
        gfull = problem.grad_full(w, run.counters)
        if prev_w is not None:
            dw = w - prev_w
            dg = gfull - prev_g
            denom = float(dw @ dg)
            if denom > 0:
                eta = float(dw @ dw) / (inner * denom)
            else:
                fallbacks.append(k)
        prev_w, prev_g = w, gfull
        run.record(w, outer=k, eta=eta, grad_norm=float(np.linalg.norm(gfull)), force=True)
        if run.diverged:
            break
        x = w.copy()
        x_sum = np.zeros(problem.d)
        for t in range(inner):
            batch = run.sample(batch_size)
            g = (
                problem.grad_batch(x, batch, run.counters)
                - problem.grad_batch(w, batch, run.counters)
                + gfull
            )
            x_sum += x
            x = x - eta * g
            run.record(x, outer=k, eta=eta)
            if run.diverged:
                break
        w = x_sum / inner if snapshot == "average" else x
    run.record(w, outer=max(0, outer_loops - 1), force=True)
    return run.result(w, notes={"bb_fallbacks": fallbacks})


def adagrad(
    problem: Problem,
    x1: np.ndarray,
    total_steps: int,
    eta: float,
    *,
    variant: PrecondVariant | None = None,
    proj: ProjectionSpec | None = None,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Constant step-size adaptive gradient on raw stochastic gradients.

    The per-step accumulator magnitude ||G_t||_* is returned in
    ``g_norm_star_steps`` so growth-curve diagnostics can run offline.
    """
    variant = variant or PrecondVariant()
    proj = proj or ProjectionSpec()
    x1 = _validate_common(problem, x1, batch_size, "last")
    run = _Run(problem, x1, seed)
    run.record(x1, force=True)
    state = PrecondState(variant, problem.d)
    x = x1.copy()
    g_stars = np.empty(total_steps)
    steps_done = 0
    try:
        for t in range(1, total_steps + 1):
            if run.diverged:
                break
            batch = run.sample(batch_size)
            g = problem.grad_batch(x, batch, run.counters)
            state.accumulate(g)
            g_stars[t - 1] = state.g_norm_star()
            steps_done = t
            if state.has_signal():
                x = state.step(x, g, eta, proj)
            run.record(x, outer=0, eta=eta, g_star=state.g_norm_star())
    except FloatingPointError:
        run.mark_diverged(x, outer=0, eta=eta)
    run.record(x, outer=0, force=True)
    return run.result(x, g_star_steps=g_stars[:steps_done])


def sgd(
    problem: Problem,
    x1: np.ndarray,
    total_steps: int,
    eta: float,
    *,
    batch_size: int = 1,
    seed: int = 0,
) -> RunResult:
    """Plain constant step-size stochastic gradient descent."""
    x1 = _validate_common(problem, x1, batch_size, "last")
    run = _Run(problem, x1, seed)
    run.record(x1, force=True)
    x = x1.copy()
    for _ in range(total_steps):
        if run.diverged:
            break
        batch = run.sample(batch_size)
        g = problem.grad_batch(x, batch, run.counters)
        x = x - eta * g
        run.record(x, outer=0, eta=eta)
    run.record(x, outer=0, force=True)
    return run.result(x)


def _armijo_max_step_1d(x: float, component: int, a: float, c: float, eta_max: float) -> float:
    """Largest step accepted by the per-component sufficient-decrease test
    for the symmetric pair of 1-d quadratics 'a(x-1)^2' and 'a(x+1)^2',
    searched along the VR direction 2*a*x.  Solved in closed form."""
    ax = abs(x)
    same_side = (component == 1 and x > 0) or (component == 2 and x < 0)
    if same_side:
        bound = (1.0 - 1.0 / ax - c) / a
    else:
        bound = (1.0 + 1.0 / ax - c) / a
    return min(max(bound, 0.0), eta_max)


def svrg_inner_armijo_1d(
    a: float,
    c: float,
    eta_max: float,
    x0: float,
    steps: int,
    seed: int = 0,
) -> np.ndarray:
    """Inner-loop line search on a symmetric two-term 1-d quadratic sum.

    The objective is a*(x^2 + 1), the mean of a*(x-1)^2 and a*(x+1)^2 whose
    minimizers sit symmetrically around the solution x = 0.  The VR
    direction is 2*a*x for either sampled component, and the exact maximal
    Armijo step is applied analytically.  Requires a >= 1/eta_max; under
    that choice any iterate with |x| in (0, min(1/c, 1)) cannot move closer
    to the solution, which this routine also asserts.  Returns |x_t| for
    t = 0..steps.
    """
    if a <= 0 or c <= 0 or eta_max <= 0:
        raise ValueError("a, c and eta_max must be positive")
    if a * eta_max < 1.0:
        raise ValueError("requires a >= 1/eta_max")
    rng = np.random.default_rng(seed)
    trace = np.empty(steps + 1)
    x = float(x0)
    trace[0] = abs(x)
    lock = min(1.0 / c, 1.0)
    for t in range(steps):
        component = int(rng.integers(1, 3))
        if x == 0.0:
            trace[t + 1] = 0.0
            continue
        eta = _armijo_max_step_1d(x, component, a, c, eta_max)
        x_next = (1.0 - 2.0 * a * eta) * x
        if 0.0 < abs(x) < lock and abs(x_next) < abs(x) - 1e-15:
            raise RuntimeError("non-expansion property violated near the solution")
        x = x_next
        trace[t + 1] = abs(x)
    return trace
