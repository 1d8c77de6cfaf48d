"""Run traces, the stalling diagnostic, and growth-curve analysis.

A :class:`Trace` is a time series of per-run measurements keyed by effective
passes over the data (per-example gradient evaluations divided by n).  Rows
are recorded roughly once per pass plus at every event, so traces stay small
regardless of the iteration budget.  Objective values and full-gradient
norms in trace rows are monitoring quantities and are never charged to the
run's oracle counters.

The stalling diagnostic watches the accumulator trace ||G_t||_*^2: its
relative growth over a doubling window,

    R = (||G_t||_*^2 - ||G_{t/2}||_*^2) / ||G_{t/2}||_*^2,

stays near zero while the dynamics are effectively deterministic and
approaches one once gradient noise dominates, at which point the growth of
||G_t||_* switches from bounded to O(sqrt(t)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .problems import Problem

TRACE_EVENTS = ("switch", "adaptive_stop", "stage_boundary", "diverged")

CSV_HEADER = "pass,objective,grad_norm,g_norm_star,step_size,outer,event"


@dataclass
class TraceRow:
    passes: float
    objective: float
    grad_norm: float | None = None
    g_norm_star: float | None = None
    step_size: float | None = None
    outer: int = 0
    event: str | None = None


@dataclass
class Trace:
    """Per-run time series; rows are strictly increasing in passes."""

    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def validate(self) -> None:
        passes = [row.passes for row in self.rows]
        if any(b <= a for a, b in zip(passes, passes[1:])):
            raise ValueError("trace passes must be strictly increasing")
        for row in self.rows:
            if row.event is not None and row.event not in TRACE_EVENTS:
                raise ValueError(f"unknown trace event {row.event!r}")
            if row.event != "diverged" and not np.isfinite(row.objective):
                raise ValueError("non-finite objective in a row not flagged as diverged")

    def events(self) -> list[tuple[float, str]]:
        return [(row.passes, row.event) for row in self.rows if row.event is not None]

    def final(self) -> TraceRow:
        return self.rows[-1]

    def value_at_pass(self, p: float, attr: str = "grad_norm") -> float | None:
        """Step-function lookup: the latest recorded value at pass <= p."""
        best = None
        for row in self.rows:
            if row.passes <= p:
                value = getattr(row, attr)
                if value is not None:
                    best = value
            else:
                break
        return best

    # -- serialization -------------------------------------------------

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        _fmt(row.passes),
                        _fmt(row.objective),
                        _fmt(row.grad_norm),
                        _fmt(row.g_norm_star),
                        _fmt(row.step_size),
                        str(int(row.outer)),
                        row.event or "",
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        lines = [line for line in text.splitlines() if line]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError("missing or unexpected trace CSV header")
        rows = []
        for line in lines[1:]:
            parts = line.split(",")
            if len(parts) != 7:
                raise ValueError(f"malformed trace CSV row: {line!r}")
            rows.append(
                TraceRow(
                    passes=float(parts[0]),
                    objective=float(parts[1]),
                    grad_norm=_parse(parts[2]),
                    g_norm_star=_parse(parts[3]),
                    step_size=_parse(parts[4]),
                    outer=int(parts[5]),
                    event=parts[6] or None,
                )
            )
        return cls(rows=rows)

    def to_jsonl(self) -> str:
        lines = []
        for row in self.rows:
            lines.append(
                json.dumps(
                    {
                        "pass": row.passes,
                        "objective": row.objective,
                        "grad_norm": row.grad_norm,
                        "g_norm_star": row.g_norm_star,
                        "step_size": row.step_size,
                        "outer": row.outer,
                        "event": row.event,
                    }
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        rows = []
        for line in text.splitlines():
            if not line:
                continue
            obj = json.loads(line)
            rows.append(
                TraceRow(
                    passes=obj["pass"],
                    objective=obj["objective"],
                    grad_norm=obj["grad_norm"],
                    g_norm_star=obj["g_norm_star"],
                    step_size=obj["step_size"],
                    outer=obj["outer"],
                    event=obj["event"],
                )
            )
        return cls(rows=rows)


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _parse(text: str) -> float | None:
    return float(text) if text else None


class TraceRecorder:
    """Appends rows, merging consecutive records that land on the same pass
    so the strictly-increasing invariant holds even when an event coincides
    with a cadence row."""

    def __init__(self):
        self.trace = Trace()

    @property
    def last_passes(self) -> float | None:
        return self.trace.rows[-1].passes if self.trace.rows else None

    def record(self, row: TraceRow) -> None:
        rows = self.trace.rows
        if rows and row.passes == rows[-1].passes:
            if row.event is None:
                row.event = rows[-1].event
            rows[-1] = row
            return
        if rows and row.passes < rows[-1].passes:
            raise ValueError("trace passes went backwards")
        rows.append(row)


@dataclass
class PhaseTestState:
    """State for the relative-growth termination test.

    ``history[s]`` stores ||G_s||_*^2 for iterations s >= 1 (index 0 is
    unused).  The ratio is defined only at even t at or past the burn-in
    threshold, and a zero comparison value yields no decision.
    """

    theta: float
    burn_in_threshold: int
    capacity: int
    history: np.ndarray = field(init=False)
    last_R: float | None = field(default=None, init=False)

    def __post_init__(self):
        self.history = np.full(self.capacity + 1, np.nan)

    def observe(self, t: int, trace_g: float) -> bool:
        """Record ||G_t||_*^2 and report whether the test fires at t."""
        self.history[t] = trace_g
        if t % 2 != 0 or t < self.burn_in_threshold:
            return False
        half = self.history[t // 2]
        if not np.isfinite(half) or half <= 0:
            return False
        self.last_R = (trace_g - half) / half
        return self.last_R >= self.theta


def phase_ratio(history: np.ndarray, t: int) -> float:
    """Relative growth of ||G||_*^2 between iterations t/2 and t.

    ``history`` is indexed so that ``history[s]`` is the value at iteration
    s (entry 0 is ignored).  Raises ``ValueError`` when t is odd, out of
    range, or the comparison value is zero (callers treat that as "no
    decision").
    """
    history = np.asarray(history, dtype=np.float64)
    if t % 2 != 0:
        raise ValueError("phase ratio is defined only at even iterations")
    if t >= history.shape[0] or t // 2 < 1:
        raise ValueError(f"history does not cover iterations {t // 2} and {t}")
    half = history[t // 2]
    if not np.isfinite(half) or half <= 0:
        raise ValueError("comparison value is zero; ratio undefined")
    return float((history[t] - half) / half)


def estimate_sigma2(
    problem: Problem,
    w: np.ndarray,
    exhaustive: bool = True,
    sample_size: int = 2048,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean squared deviation of per-example gradients from the full gradient.

    Returns ``(value, std_error)``; the error is exactly zero in exhaustive
    mode.  Exhaustive enumeration is capped at n <= 10**4.
    """
    n = problem.n
    if exhaustive:
        if n > 10**4:
            raise ValueError("exhaustive enumeration capped at n <= 10**4")
        grads = problem.per_example_gradients(w)
        mean = grads.mean(axis=0)
        sq = ((grads - mean) ** 2).sum(axis=1)
        return float(sq.mean()), 0.0
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=sample_size)
    full = problem.grad_full(w)
    sq = np.empty(sample_size)
    for j, i in enumerate(idx):
        gi = problem.grad_batch(w, np.array([i]))
        sq[j] = float(((gi - full) ** 2).sum())
    value = float(sq.mean())
    stderr = float(sq.std(ddof=1) / np.sqrt(sample_size))
    return value, stderr


def two_phase_slope_fit(
    g_norm_star: np.ndarray,
    theta: float = 0.5,
    burn_in: int = 4,
) -> tuple[float, float]:
    """Split an accumulator-growth series into flat and sqrt-growth phases.

    ``g_norm_star`` holds ||G_t||_* for t = 1..len.  The knee is the first
    even t >= burn_in where the relative growth ratio reaches ``theta``; if
    it never does, the best two-piece log-log fit locates the split.
    Returns ``(phase1_growth, phase2_exponent)``: the largest ratio observed
    before the knee and the least-squares log-log slope of the series versus
    (t - knee) after it.
    """
    series = np.asarray(g_norm_star, dtype=np.float64).ravel()
    length = series.shape[0]
    if length < 64:
        raise ValueError("series too short; need at least 64 points")
    sq = np.empty(length + 1)
    sq[0] = np.nan
    sq[1:] = series**2

    burn_in = max(4, int(burn_in))
    if burn_in % 2 != 0:
        burn_in += 1

    knee = None
    for t in range(burn_in, length + 1, 2):
        half = sq[t // 2]
        if half > 0 and (sq[t] - half) / half >= theta:
            knee = t
            break
    if knee is None:
        knee = _best_split(series)

    phase1_growth = 0.0
    for t in range(burn_in, min(knee, length + 1), 2):
        half = sq[t // 2]
        if half > 0:
            phase1_growth = max(phase1_growth, float((sq[t] - half) / half))

    ts = np.arange(knee + 1, length + 1)
    vals = sq[knee + 1 :] ** 0.5
    mask = vals > 0
    if mask.sum() < 2:
        return phase1_growth, float("nan")
    slope = _lstsq_slope(np.log(ts[mask] - knee), np.log(vals[mask]))
    return phase1_growth, slope


def _lstsq_slope(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0:
        return 0.0
    return float(x @ (y - y.mean()) / denom)


def _best_split(series: np.ndarray) -> int:
    """Knee of a two-piece log-log fit, minimizing total squared residual."""
    length = series.shape[0]
    ts = np.arange(1, length + 1, dtype=np.float64)
    floor = max(series[series > 0].min() * 1e-3, 1e-300) if np.any(series > 0) else 1e-300
    logy = np.log(np.maximum(series, floor))
    logt = np.log(ts)
    candidates = np.unique(
        np.clip(np.geomspace(8, length - 8, num=33).astype(int), 8, length - 8)
    )
    best_k, best_res = candidates[0], np.inf
    for k in candidates:
        res = _fit_residual(logt[:k], logy[:k]) + _fit_residual(logt[k:], logy[k:])
        if res < best_res:
            best_k, best_res = int(k), res
    return best_k


def _fit_residual(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape[0] < 2:
        return 0.0
    slope = _lstsq_slope(x, y)
    pred = y.mean() + slope * (x - x.mean())
    return float(((y - pred) ** 2).sum())
