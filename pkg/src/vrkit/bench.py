"""Benchmark harness: configs, seeded runs, aggregation, model selection.

A :class:`RunConfig` is the unit of work: dataset source, loss, algorithm,
batch size, a budget in effective passes, and the seeds to repeat over.
Budgets convert to iteration counts with the cost model one full gradient =
one pass and one variance-reduced inner step = two batches, so an outer
loop with n/b inner steps costs about three passes.

Per-seed traces are persisted as CSV (and JSON lines); the aggregate file
is a pure function of those traces and regenerates byte-identically.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, gen_separable, load_libsvm
from .diagnostics import Trace
from .optimizers import (
    InnerLoopPolicy,
    PrecondVariant,
    ProjectionSpec,
    RunResult,
    StepSizeRule,
    adagrad,
    adasvrg_adaptive,
    adasvrg_fixed,
    adasvrg_multistage,
    hybrid_adagrad_adasvrg,
    loopless_svrg,
    sarah,
    sgd,
    svrg,
    svrg_bb,
)
from .problems import Problem

ALGORITHMS = (
    "sgd",
    "adagrad",
    "svrg",
    "lsvrg",
    "sarah",
    "svrg-bb",
    "adasvrg",
    "adasvrg-ms",
    "adasvrg-at",
    "hybrid",
)

_VARIANT_NAMES = {"scalar": "scalar", "diag": "diagonal", "full": "full_matrix"}

DEFAULT_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)

JOBS_ENV_VAR = "VRKIT_JOBS"


@dataclass(frozen=True)
class RunConfig:
    """One benchmark work item.

    ``l2 = None`` resolves to 1/n.  ``eta = None`` means the tuning-free
    heuristic for the adaptive methods and is an error for baselines that
    need a constant step-size.  ``seeds`` may be given as a count (int) or
    an explicit tuple of seeds.
    """

    dataset: str | None = None
    synthetic: SyntheticSpec | None = None
    loss: str = "logistic"
    l2: float | None = None
    huber_delta: float = 1.0
    algo: str = "adasvrg"
    variant: str = "scalar"
    delta: float = 1e-8
    batch_size: int = 64
    epochs: int = 50
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eta: float | None = None
    theta: float = 0.5
    epsilon: float = 0.01
    p: float | None = None
    snapshot: str = "last"
    inner_loops: int | None = None
    outer_loops: int | None = None
    grid: tuple[float, ...] = DEFAULT_GRID
    out: str | None = None
    jobs: int | None = None

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; expected one of {ALGORITHMS}")
        if self.variant not in _VARIANT_NAMES:
            raise ValueError(f"unknown variant {self.variant!r}; expected scalar/diag/full")
        if self.dataset is None and self.synthetic is None:
            raise ValueError("config needs a dataset path or a synthetic spec")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if isinstance(self.seeds, int):
            object.__setattr__(self, "seeds", tuple(range(self.seeds)))
        else:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("at least one seed required")


_CONFIG_FLOAT_KEYS = {"l2", "huber_delta", "delta", "eta", "theta", "epsilon", "p"}
_CONFIG_INT_KEYS = {"batch_size", "epochs", "inner_loops", "outer_loops", "jobs"}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` comments and blank lines skipped."""
    mapping: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def config_from_mapping(mapping: dict) -> RunConfig:
    """Build a config from flat string-or-native values (file or CLI)."""
    kwargs: dict = {}
    synth: dict = {}
    for key, value in mapping.items():
        if key.startswith("synthetic_"):
            synth[key.removeprefix("synthetic_")] = value
            continue
        if value is None:
            continue
        if key in _CONFIG_FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _CONFIG_INT_KEYS:
            kwargs[key] = int(value)
        elif key == "seeds":
            kwargs[key] = _parse_seeds(value)
        elif key == "grid":
            if isinstance(value, str):
                kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                kwargs[key] = tuple(float(v) for v in value)
        else:
            kwargs[key] = value
    if synth:
        kwargs["synthetic"] = SyntheticSpec(
            n=int(synth.get("n", 1000)),
            d=int(synth.get("d", 20)),
            mislabel_fraction=float(synth.get("mislabel", 0.0)),
            margin=float(synth.get("margin", 0.1)),
            seed=int(synth.get("seed", 0)),
        )
    if kwargs.get("dataset") == "synthetic":
        kwargs.pop("dataset")
        if "synthetic" not in kwargs:
            raise ValueError("dataset = synthetic requires synthetic_* keys")
    return RunConfig(**kwargs)


def _parse_seeds(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return tuple(range(value))
    if isinstance(value, str):
        parts = [v for v in value.split(",") if v.strip()]
        if len(parts) == 1:
            return tuple(range(int(parts[0])))
        return tuple(int(v) for v in parts)
    return tuple(int(v) for v in value)


def config_to_text(config: RunConfig) -> str:
    """Stable flat echo of the resolved config (for provenance files)."""
    lines = []
    for key in sorted(config.__dataclass_fields__):
        value = getattr(config, key)
        if value is None:
            continue
        if key == "synthetic":
            for sub, attr in (
                ("n", "n"),
                ("d", "d"),
                ("mislabel", "mislabel_fraction"),
                ("margin", "margin"),
                ("seed", "seed"),
            ):
                lines.append(f"synthetic_{sub} = {getattr(value, attr)!r}")
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def resolve_problem(config: RunConfig) -> Problem:
    if config.dataset is not None:
        dataset = load_libsvm(config.dataset)
    else:
        dataset, _ = gen_separable(config.synthetic)
    loss = config.loss.replace("-", "_")
    l2 = config.l2 if config.l2 is not None else 1.0 / dataset.n
    return Problem(dataset=dataset, loss=loss, l2_reg=l2, huber_delta=config.huber_delta)


def _require_eta(config: RunConfig) -> float:
    if config.eta is None:
        raise ValueError(f"algorithm {config.algo!r} needs a constant step-size (eta)")
    return config.eta


def execute_seed(problem: Problem, config: RunConfig, seed: int) -> RunResult:
    """Run one (config, seed) work item from the zero initial point."""
    w0 = np.zeros(problem.d)
    n, b = problem.n, config.batch_size
    budget = config.epochs
    variant = PrecondVariant(kind=_VARIANT_NAMES[config.variant], delta=config.delta)
    proj = ProjectionSpec()
    step = (
        StepSizeRule(kind="constant", eta=config.eta)
        if config.eta is not None
        else StepSizeRule(kind="heuristic")
    )
    outer = config.outer_loops if config.outer_loops is not None else budget // 3
    steps_per_pass = max(1, n // b)
    algo = config.algo

    if budget == 0 and config.outer_loops is None:
        # zero-pass budget: record the initial point and do no work,
        # regardless of algorithm
        return sgd(problem, w0, 0, 1.0, batch_size=b, seed=seed)
    if algo == "sgd":
        return sgd(problem, w0, budget * steps_per_pass, _require_eta(config),
                   batch_size=b, seed=seed)
    if algo == "adagrad":
        return adagrad(problem, w0, budget * steps_per_pass, _require_eta(config),
                       variant=variant, proj=proj, batch_size=b, seed=seed)
    if algo == "svrg":
        return svrg(problem, w0, outer, config.inner_loops, _require_eta(config),
                    batch_size=b, snapshot=config.snapshot, seed=seed)
    if algo == "lsvrg":
        return loopless_svrg(problem, w0, budget * steps_per_pass // 3,
                             _require_eta(config), p=config.p, batch_size=b, seed=seed)
    if algo == "sarah":
        return sarah(problem, w0, outer, config.inner_loops, _require_eta(config),
                     batch_size=b, seed=seed)
    if algo == "svrg-bb":
        return svrg_bb(problem, w0, outer, config.inner_loops,
                       config.eta if config.eta is not None else 0.1,
                       batch_size=b, snapshot=config.snapshot, seed=seed)
    if algo == "adasvrg":
        return adasvrg_fixed(problem, w0, outer, config.inner_loops, variant=variant,
                             step=step, proj=proj, batch_size=b,
                             snapshot=config.snapshot, seed=seed)
    if algo == "adasvrg-ms":
        return adasvrg_multistage(problem, w0, max(3, outer), config.epsilon,
                                  variant=variant, step=step, proj=proj,
                                  batch_size=b, seed=seed)
    if algo == "adasvrg-at":
        policy = InnerLoopPolicy(kind="adaptive", theta=config.theta)
        return adasvrg_adaptive(problem, w0, outer, policy, variant=variant, step=step,
                                proj=proj, batch_size=b, snapshot=config.snapshot,
                                seed=seed)
    if algo == "hybrid":
        return hybrid_adagrad_adasvrg(problem, w0, budget * steps_per_pass,
                                      theta=config.theta, variant=variant, step=step,
                                      proj=proj, batch_size=b, seed=seed)
    raise ValueError(f"unknown algorithm {algo!r}")


@dataclass
class BenchOutput:
    config: RunConfig
    results: list[RunResult]
    out_dir: Path | None = None
    trace_paths: list[Path] = field(default_factory=list)

    @property
    def traces(self) -> list[Trace]:
        return [r.trace for r in self.results]

    def consistent(self) -> bool:
        """True when every trace validates (non-finite rows are flagged)."""
        try:
            for trace in self.traces:
                trace.validate()
        except ValueError:
            return False
        return True


def _seed_job(problem: Problem, config: RunConfig, seed: int) -> RunResult:
    return execute_seed(problem, config, seed)


def run(config: RunConfig, out_dir: str | Path | None = None) -> BenchOutput:
    """Execute all seeds of a config, optionally persisting traces.

    Writes ``seed<k>.trace.csv``, ``seed<k>.trace.jsonl``, ``config.txt``
    and ``aggregate.csv`` under ``out_dir`` (defaults to ``config.out``).
    """
    problem = resolve_problem(config)
    jobs = config.jobs or int(os.environ.get(JOBS_ENV_VAR, "1"))
    if jobs > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_seed_job, problem, config, s) for s in config.seeds]
            results = [f.result() for f in futures]
    else:
        results = [execute_seed(problem, config, s) for s in config.seeds]

    output = BenchOutput(config=config, results=results)
    target = out_dir if out_dir is not None else config.out
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "config.txt", config_to_text(config))
        for seed, result in zip(config.seeds, results):
            csv_path = out / f"seed{seed}.trace.csv"
            _write(csv_path, result.trace.to_csv())
            _write(out / f"seed{seed}.trace.jsonl", result.trace.to_jsonl())
            output.trace_paths.append(csv_path)
        _write(out / "aggregate.csv", aggregate_to_csv(aggregate(output.traces)))
        output.out_dir = out
    return output


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


AGGREGATE_HEADER = "pass,objective_median,objective_std,grad_norm_median,grad_norm_std"


def aggregate(traces: list[Trace]) -> list[tuple]:
    """Median and std of objective and gradient norm on the integer pass
    grid common to all seeds (step-function alignment)."""
    if not traces:
        raise ValueError("no traces to aggregate")
    last_common = math.floor(min(t.rows[-1].passes for t in traces))
    rows = []
    for p in range(last_common + 1):
        objs = [_value_or_inf(t, p, "objective") for t in traces]
        grads = [_value_or_inf(t, p, "grad_norm") for t in traces]
        rows.append(
            (
                float(p),
                float(np.median(objs)),
                float(np.std(objs)),
                float(np.median(grads)),
                float(np.std(grads)),
            )
        )
    return rows


def _value_or_inf(trace: Trace, p: float, attr: str) -> float:
    value = trace.value_at_pass(p, attr)
    if value is None or not np.isfinite(value):
        return np.inf
    return float(value)


def aggregate_to_csv(rows: list[tuple]) -> str:
    lines = [AGGREGATE_HEADER]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def aggregate_from_csv(text: str) -> list[tuple]:
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != AGGREGATE_HEADER:
        raise ValueError("missing or unexpected aggregate CSV header")
    return [tuple(float(v) for v in line.split(",")) for line in lines[1:]]


def regenerate_aggregate(trace_paths: list[str | Path]) -> str:
    """Rebuild the aggregate CSV from persisted per-seed trace files."""
    traces = []
    for path in sorted(Path(p) for p in trace_paths):
        with open(path, "r", encoding="utf-8") as handle:
            traces.append(Trace.from_csv(handle.read()))
    return aggregate_to_csv(aggregate(traces))


def final_metric(traces: list[Trace]) -> float:
    """Median full-gradient norm at the last pass common to all seeds."""
    last_common = math.floor(min(t.rows[-1].passes for t in traces))
    vals = [_value_or_inf(t, last_common, "grad_norm") for t in traces]
    return float(np.median(vals))


def grid_search(
    config: RunConfig,
    grid: tuple[float, ...] | None = None,
    out_dir: str | Path | None = None,
) -> tuple[float, dict]:
    """Best constant step-size by smallest final median gradient norm.

    Ties break toward the smaller step-size.  Diverged runs keep their last
    recorded metric (infinity when nothing finite was recorded), so the
    ordering is total even on an all-diverging grid.
    """
    grid = tuple(grid if grid is not None else config.grid)
    if not grid:
        raise ValueError("empty step-size grid")
    results: dict = {}
    best_eta, best_metric = None, np.inf
    base_out = Path(out_dir) if out_dir is not None else (
        Path(config.out) if config.out else None
    )
    for eta in sorted(grid):
        sub = replace(config, eta=float(eta), out=None)
        target = base_out / f"eta_{eta:g}" if base_out is not None else None
        output = run(sub, out_dir=target)
        metric = final_metric(output.traces)
        results[float(eta)] = {
            "metric": metric,
            "aggregate": aggregate(output.traces),
            "diverged": [r.termination_reason == "diverged" for r in output.results],
        }
        if metric < best_metric:
            best_eta, best_metric = float(eta), metric
    return best_eta, results


def manual_switch_search(
    config: RunConfig,
    candidates: list[int] | None = None,
) -> tuple[int | None, dict]:
    """Grid-search the epoch at which to hand over from the stochastic
    phase to variance reduction; also evaluates never switching.

    Returns the best candidate (``None`` means never switch) by median
    final loss across seeds.  The first-phase step-size is ``config.eta``
    (default 1.0); the second phase uses the tuning-free rule.
    """
    budget = config.epochs
    if candidates is None:
        candidates = list(range(1, budget + 1))
    problem = resolve_problem(config)
    w0 = np.zeros(problem.d)
    b = config.batch_size
    steps_per_pass = max(1, problem.n // b)
    eta = config.eta if config.eta is not None else 1.0
    variant = PrecondVariant(kind=_VARIANT_NAMES[config.variant], delta=config.delta)

    def final_loss_never(seed: int) -> float:
        result = adagrad(problem, w0, budget * steps_per_pass, eta,
                         variant=variant, batch_size=b, seed=seed)
        return result.trace.final().objective

    def final_loss_switch(s: int, seed: int) -> float:
        phase1 = adagrad(problem, w0, s * steps_per_pass, eta,
                         variant=variant, batch_size=b, seed=seed)
        k2 = max(0, (budget - s) // 3)
        if k2 == 0:
            return phase1.trace.final().objective
        phase2 = adasvrg_fixed(problem, phase1.final_iterate, k2, variant=variant,
                               step=StepSizeRule(kind="heuristic"), batch_size=b,
                               seed=seed + 1)
        return phase2.trace.final().objective

    results: dict = {}
    results[None] = float(np.median([final_loss_never(s) for s in config.seeds]))
    for cand in candidates:
        results[cand] = float(np.median([final_loss_switch(cand, s) for s in config.seeds]))

    best_key, best_val = None, results[None]
    for cand in candidates:
        if results[cand] < best_val:
            best_key, best_val = cand, results[cand]
    return best_key, results
