import numpy as np
import pytest
import scipy.sparse as sp

from vrkit import Dataset, Problem


def make_problem(
    loss: str = "logistic",
    n: int = 24,
    d: int = 6,
    l2: float = 0.1,
    seed: int = 0,
    density: float = 0.7,
    classification: bool | None = None,
) -> Problem:
    """Random sparse problem with reproducible contents."""
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, d)) * (rng.random((n, d)) < density)
    if classification is None:
        classification = loss in ("logistic", "squared_hinge")
    if classification:
        labels = rng.choice([-1.0, 1.0], size=n)
    else:
        labels = rng.standard_normal(n)
    dataset = Dataset(features=sp.csr_matrix(dense), labels=labels)
    return Problem(dataset=dataset, loss=loss, l2_reg=l2)


def single_example_problem(a, y, loss="squared", l2=0.0, **kw) -> Problem:
    """One-example problem from a dense feature row."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    dataset = Dataset(features=sp.csr_matrix(a), labels=np.asarray([y], dtype=float))
    return Problem(dataset=dataset, loss=loss, l2_reg=l2, **kw)


def central_difference_gradient(problem: Problem, w: np.ndarray, h: float = 1e-6) -> np.ndarray:
    approx = np.empty_like(w, dtype=float)
    for j in range(w.shape[0]):
        e = np.zeros_like(w, dtype=float)
        e[j] = h
        approx[j] = (problem.loss_value(w + e) - problem.loss_value(w - e)) / (2 * h)
    return approx


@pytest.fixture
def quadratic_1d() -> Problem:
    """f(x) = x^2 / 2 as a single-example squared loss (n = 1, d = 1)."""
    return single_example_problem([1.0], 0.0, loss="squared")
