"""Finite-sum convex objectives over sparse data.

The objective is the mean of per-example losses on linear predictions plus
an L2 penalty:

    f(w) = (1/n) * sum_i loss(<a_i, w>, y_i) + (l2_reg / 2) * ||w||^2

Gradient oracles charge a per-run :class:`GradOracleCounters` so benchmark
traces can report work in effective passes over the data.  Loss evaluations
are never charged; they are used for monitoring only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

LOSS_NAMES = ("logistic", "squared", "huber", "squared_hinge")

# Losses whose labels must be -1/+1.  Squared and Huber act on the residual
# <a_i, w> - y_i and accept arbitrary real targets.
_CLASSIFICATION_LOSSES = ("logistic", "squared_hinge")


@dataclass
class GradOracleCounters:
    """Per-run tally of gradient-oracle work.

    One full-gradient evaluation counts as ``n`` per-example evaluations
    when converting to effective passes.
    """

    per_example_grad_evals: int = 0
    full_grad_evals: int = 0

    def charge_batch(self, size: int) -> None:
        self.per_example_grad_evals += int(size)

    def charge_full(self) -> None:
        self.full_grad_evals += 1

    def effective_passes(self, n: int) -> float:
        return (self.per_example_grad_evals + n * self.full_grad_evals) / n


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sparse feature rows plus one label per row.

    ``features`` is an n x d CSR matrix with sorted column indices.
    ``label_mapping`` records any label recoding applied during parsing
    (e.g. {0, 1} -> {-1, +1}); ``None`` means labels are unmodified.
    """

    features: sp.csr_matrix
    labels: np.ndarray
    label_mapping: dict | None = None

    def __post_init__(self):
        feats = sp.csr_matrix(self.features)
        if not feats.has_sorted_indices:
            feats.sort_indices()
        labels = np.ascontiguousarray(self.labels, dtype=np.float64).ravel()
        if feats.shape[0] < 1:
            raise ValueError("empty dataset")
        if labels.shape[0] != feats.shape[0]:
            raise ValueError(
                f"labels length {labels.shape[0]} != number of rows {feats.shape[0]}"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @cached_property
    def max_row_sq_norm(self) -> float:
        sq = self.features.multiply(self.features).sum(axis=1)
        return float(np.asarray(sq).max())

    def equals(self, other: "Dataset") -> bool:
        """Exact structural equality (indices and float values bit-for-bit)."""
        a, b = self.features, other.features
        return (
            a.shape == b.shape
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class Problem:
    """A loss family with L2 regularization over a :class:`Dataset`.

    Immutable after construction and safe to share across threads; oracle
    counters are owned by individual runs, not by the problem.
    """

    dataset: Dataset
    loss: str = "logistic"
    l2_reg: float = 0.0
    huber_delta: float = 1.0

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSS_NAMES}")
        if self.l2_reg < 0:
            raise ValueError("l2_reg must be >= 0")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be > 0")
        if self.loss in _CLASSIFICATION_LOSSES:
            labels = self.dataset.labels
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ValueError(f"{self.loss} loss requires labels in {{-1, +1}}")

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    # -- loss primitives -------------------------------------------------

    def _loss_values(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.loss == "logistic":
            return np.logaddexp(0.0, -y * z)
        if self.loss == "squared":
            return 0.5 * (z - y) ** 2
        if self.loss == "huber":
            r = z - y
            delta = self.huber_delta
            return np.where(
                np.abs(r) <= delta, 0.5 * r * r, delta * (np.abs(r) - 0.5 * delta)
            )
        # squared_hinge
        return np.maximum(0.0, 1.0 - y * z) ** 2

    def _loss_derivs(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Derivative of the loss with respect to the prediction z."""
        if self.loss == "logistic":
            return -y * expit(-y * z)
        if self.loss == "squared":
            return z - y
        if self.loss == "huber":
            return np.clip(z - y, -self.huber_delta, self.huber_delta)
        return -2.0 * y * np.maximum(0.0, 1.0 - y * z)

    def _check_dim(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64).ravel()
        if w.shape[0] != self.d:
            raise ValueError(f"iterate has dimension {w.shape[0]}, expected {self.d}")
        return w

    # -- oracles ---------------------------------------------------------

    def loss_value(self, w: np.ndarray) -> float:
        """Full objective including the L2 term.  Never charged."""
        w = self._check_dim(w)
        z = self.dataset.features @ w
        value = float(self._loss_values(z, self.dataset.labels).mean())
        return value + 0.5 * self.l2_reg * float(w @ w)

    def grad_full(self, w: np.ndarray, counters: GradOracleCounters | None = None) -> np.ndarray:
        """Exact gradient of the full objective."""
        w = self._check_dim(w)
        z = self.dataset.features @ w
        coeffs = self._loss_derivs(z, self.dataset.labels) / self.n
        g = self.dataset.features.T @ coeffs + self.l2_reg * w
        if counters is not None:
            counters.charge_full()
        return np.asarray(g)

    def grad_batch(
        self,
        w: np.ndarray,
        batch: np.ndarray,
        counters: GradOracleCounters | None = None,
    ) -> np.ndarray:
        """Mean gradient over a nonempty set of example indices, plus the L2 term."""
        w = self._check_dim(w)
        batch = np.asarray(batch, dtype=np.intp).ravel()
        if batch.size == 0:
            raise ValueError("empty batch")
        if batch.min() < 0 or batch.max() >= self.n:
            raise IndexError(f"batch index out of range [0, {self.n})")
        rows = self.dataset.features[batch]
        z = rows @ w
        coeffs = self._loss_derivs(z, self.dataset.labels[batch]) / batch.size
        g = rows.T @ coeffs + self.l2_reg * w
        if counters is not None:
            counters.charge_batch(batch.size)
        return np.asarray(g)

    def per_example_gradients(self, w: np.ndarray) -> np.ndarray:
        """Dense n x d matrix of per-example gradients (L2 term included).

        Measurement helper for diagnostics and tests; never charged.
        """
        w = self._check_dim(w)
        z = self.dataset.features @ w
        coeffs = self._loss_derivs(z, self.dataset.labels)
        grads = self.dataset.features.multiply(coeffs[:, None]).toarray()
        return grads + self.l2_reg * w[None, :]

    def smoothness_bound(self) -> float:
        """Analytic upper bound on the worst per-example smoothness constant.

        Used by test harnesses and for anchoring baseline step-size grids;
        the adaptive methods never consume it.
        """
        factor = {"logistic": 0.25, "squared": 1.0, "huber": 1.0, "squared_hinge": 2.0}
        return factor[self.loss] * self.dataset.max_row_sq_norm + self.l2_reg
