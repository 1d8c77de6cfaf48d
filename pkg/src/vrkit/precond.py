"""Adaptive gradient preconditioning: accumulator state, step, projection.

The accumulator G grows monotonically with squared gradients (a scalar sum,
a per-coordinate sum, or a matrix of outer products) and the step metric is
A = G^{1/2}.  The state also tracks the running sum of ||g||^2 in the
A^{-1}-norm, which is bounded by twice the trace of A along any trajectory;
optimizers expose both so the bound can be checked at runtime.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

VARIANT_KINDS = ("scalar", "diagonal", "full_matrix")
PROJECTION_KINDS = ("none", "l2_ball", "box")

# Full-matrix steps cost an O(d^3) eigendecomposition each iteration; warn
# beyond this dimension.
FULL_MATRIX_DIM_CAP = 512


@dataclass(frozen=True)
class PrecondVariant:
    """Choice of accumulator shape and its initialization offset.

    The scalar variant starts at G = 0 and requires a nonzero first gradient
    before stepping; diagonal and full-matrix start at delta * I.  Diagonal
    tolerates delta = 0 (coordinates with no signal simply do not move);
    full-matrix requires delta > 0 to keep the metric invertible.
    """

    kind: str = "scalar"
    delta: float = 1e-8

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant {self.kind!r}; expected one of {VARIANT_KINDS}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.kind == "full_matrix" and self.delta <= 0:
            raise ValueError("full_matrix variant requires delta > 0")


@dataclass(frozen=True)
class ProjectionSpec:
    """Feasible set for the preconditioned step.

    ``none`` is the default.  ``l2_ball`` needs a radius; ``box`` needs
    coordinatewise bounds.  ``tolerance`` controls the root-find in the
    metric-weighted ball projection.
    """

    kind: str = "none"
    radius: float | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.kind not in PROJECTION_KINDS:
            raise ValueError(f"unknown projection {self.kind!r}")
        if self.kind == "l2_ball":
            if self.radius is None or self.radius <= 0:
                raise ValueError("l2_ball projection requires radius > 0")
        if self.kind == "box":
            if self.lo is None or self.hi is None:
                raise ValueError("box projection requires lo and hi")
            lo = np.asarray(self.lo, dtype=np.float64)
            hi = np.asarray(self.hi, dtype=np.float64)
            if lo.shape != hi.shape or np.any(lo > hi):
                raise ValueError("box bounds must satisfy lo <= hi elementwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)

    @property
    def diameter(self) -> float:
        """Euclidean diameter of the feasible set (inf when unconstrained)."""
        if self.kind == "l2_ball":
            return 2.0 * self.radius
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        return np.inf


class PrecondState:
    """Single-owner mutable accumulator for one inner loop.

    Call order per iteration: :meth:`accumulate` with the current gradient,
    then :meth:`step`.  ``accumulate`` must come first so the step metric
    already includes the gradient being applied.
    """

    def __init__(self, variant: PrecondVariant, d: int):
        self.variant = variant
        self.d = int(d)
        self.t = 0
        self.weighted_grad_sq_sum = 0.0
        kind = variant.kind
        if kind == "scalar":
            self.G = 0.0
        elif kind == "diagonal":
            self.G = np.full(self.d, variant.delta, dtype=np.float64)
        else:
            if self.d > FULL_MATRIX_DIM_CAP:
                warnings.warn(
                    f"full_matrix preconditioning is O(d^3) per step; d={self.d} "
                    f"exceeds the desk-scale cap of {FULL_MATRIX_DIM_CAP}",
                    RuntimeWarning,
                    stacklevel=2,
                )
            self.G = np.eye(self.d) * variant.delta
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    def accumulate(self, g: np.ndarray) -> "PrecondState":
        """Add one gradient to the accumulator and advance the step counter."""
        g = np.asarray(g, dtype=np.float64).ravel()
        if g.shape[0] != self.d:
            raise ValueError(f"gradient has dimension {g.shape[0]}, expected {self.d}")
        kind = self.variant.kind
        if kind == "scalar":
            sq = float(g @ g)
            self.G += sq
            if self.G > 0:
                self.weighted_grad_sq_sum += sq / np.sqrt(self.G)
        elif kind == "diagonal":
            self.G += g * g
            mask = self.G > 0
            if mask.any():
                self.weighted_grad_sq_sum += float(
                    np.sum(g[mask] ** 2 / np.sqrt(self.G[mask]))
                )
        else:
            self.G += np.outer(g, g)
            evals, evecs = np.linalg.eigh(self.G)
            # Guard float asymmetry: G >= delta * I holds exactly in theory.
            evals = np.maximum(evals, self.variant.delta / 2.0)
            self._eig = (evals, evecs)
            ainv_g = evecs @ ((evecs.T @ g) / np.sqrt(evals))
            self.weighted_grad_sq_sum += float(g @ ainv_g)
        self.t += 1
        return self

    def trace_G(self) -> float:
        kind = self.variant.kind
        if kind == "scalar":
            return float(self.G)
        if kind == "diagonal":
            return float(self.G.sum())
        return float(np.trace(self.G))

    def g_norm_star(self) -> float:
        """The monitored accumulator magnitude, sqrt of the trace of G."""
        return float(np.sqrt(self.trace_G()))

    def trace_A(self) -> float:
        """Trace of the step metric A = G^{1/2}."""
        kind = self.variant.kind
        if kind == "scalar":
            return float(np.sqrt(self.G))
        if kind == "diagonal":
            return float(np.sqrt(self.G).sum())
        evals, _ = self._eigdecomp()
        return float(np.sqrt(evals).sum())

    def _eigdecomp(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            evals, evecs = np.linalg.eigh(self.G)
            evals = np.maximum(evals, self.variant.delta / 2.0)
            self._eig = (evals, evecs)
        return self._eig

    def has_signal(self) -> bool:
        """Whether the metric is usable (scalar variant needs G > 0)."""
        if self.variant.kind == "scalar":
            return self.G > 0
        return True

    def step(
        self,
        x: np.ndarray,
        g: np.ndarray,
        eta: float,
        proj: ProjectionSpec | None = None,
    ) -> np.ndarray:
        """One preconditioned step x - eta * A^{-1} g, projected if requested.

        Requires :meth:`accumulate` to have been called with this step's
        gradient, so A already includes it.
        """
        x = np.asarray(x, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        kind = self.variant.kind
        if kind == "scalar":
            if self.G <= 0:
                raise ValueError(
                    "scalar accumulator has no signal yet; skip this step until "
                    "a nonzero gradient has been accumulated"
                )
            y = x - (eta / np.sqrt(self.G)) * g
        elif kind == "diagonal":
            root = np.sqrt(self.G)
            direction = np.divide(g, root, out=np.zeros_like(g), where=root > 0)
            y = x - eta * direction
        else:
            evals, evecs = self._eigdecomp()
            ainv_g = evecs @ ((evecs.T @ g) / np.sqrt(evals))
            y = x - eta * ainv_g
        if proj is not None and proj.kind != "none":
            y = project(proj, self, y)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("preconditioned step produced a non-finite iterate")
        return y


def project(proj: ProjectionSpec, state: PrecondState, y: np.ndarray) -> np.ndarray:
    """Project ``y`` onto the feasible set in the metric induced by A.

    Box projections with separable (scalar/diagonal) metrics clip exactly.
    The ball projection under a diagonal metric solves for the Lagrange
    multiplier by bisection; under a scalar metric it reduces to radial
    rescaling.  Full-matrix metrics do not support projection.
    """
    if proj.kind == "none":
        return y
    if state.variant.kind == "full_matrix":
        raise NotImplementedError("projection is not supported for the full_matrix variant")
    y = np.asarray(y, dtype=np.float64)
    if proj.kind == "box":
        return np.clip(y, proj.lo, proj.hi)

    # l2_ball
    radius = float(proj.radius)
    norm = float(np.linalg.norm(y))
    if norm <= radius:
        return y
    if state.variant.kind == "scalar":
        return y * (radius / norm)

    # Diagonal metric: minimize ||x - y||_A^2 subject to ||x|| <= radius.
    # Stationarity gives x(lam) = a * y / (a + lam) coordinatewise with
    # a = sqrt(G); ||x(lam)|| decreases in lam, so bisect on the multiplier.
    a = np.sqrt(state.G)

    def clipped(lam: float) -> np.ndarray:
        denom = a + lam
        return np.divide(a * y, denom, out=np.zeros_like(y), where=denom > 0)

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if np.linalg.norm(clipped(hi)) <= radius:
            break
        hi *= 2.0
    else:
        raise FloatingPointError("ball projection failed to bracket the multiplier")
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        x = clipped(mid)
        gap = np.linalg.norm(x) - radius
        if abs(gap) <= proj.tolerance:
            return x
        if gap > 0:
            lo = mid
        else:
            hi = mid
    return clipped(0.5 * (lo + hi))
