"""Dataset ingestion: LIBSVM text format and synthetic separable data.

The LIBSVM format is one example per line, ``<label> <idx>:<val> ...`` with
1-based, strictly increasing feature indices.  Blank lines and lines starting
with ``#`` are skipped.  Binary labels are recoded to {-1, +1}: {0, 1} and
{1, 2} map to {-1, +1}; {-1, +1} is kept; anything else (regression targets)
is kept verbatim.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np
import scipy.sparse as sp

from .problems import Dataset


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a linearly separable dataset with controlled label noise.

    ``mislabel_fraction`` flips exactly ``floor(fraction * n)`` labels at
    distinct uniformly chosen positions; 0 keeps the data separable with
    the requested margin.
    """

    n: int
    d: int
    mislabel_fraction: float = 0.0
    margin: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not 0.0 <= self.mislabel_fraction <= 1.0:
            raise ValueError("mislabel_fraction must be in [0, 1]")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")


def _iter_lines(source: str | IO[str] | Iterable[str]) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_libsvm(source: str | IO[str] | Iterable[str], d: int | None = None) -> Dataset:
    """Parse LIBSVM text (a string of content, open file, or line iterable).

    The feature dimension is the maximum observed index unless an explicit
    ``d`` override pads it.  Raises ``ValueError`` on malformed tokens,
    non-increasing indices within a row, or an empty dataset.
    """
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    max_index = 0

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric label {tokens[0]!r}") from None
        prev_idx = 0
        for token in tokens[1:]:
            head, sep, tail = token.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: malformed token {token!r}")
            try:
                idx = int(head)
                val = float(tail)
            except ValueError:
                raise ValueError(f"line {lineno}: malformed token {token!r}") from None
            if idx < 1:
                raise ValueError(f"line {lineno}: feature index {idx} is not 1-based")
            if idx <= prev_idx:
                raise ValueError(
                    f"line {lineno}: non-increasing feature index {idx} after {prev_idx}"
                )
            prev_idx = idx
            indices.append(idx - 1)
            values.append(val)
            max_index = max(max_index, idx)
        indptr.append(len(indices))

    if not labels:
        raise ValueError("empty dataset")
    dim = max_index if d is None else int(d)
    if dim < max_index:
        raise ValueError(f"explicit dimension {dim} smaller than max index {max_index}")

    matrix = sp.csr_matrix(
        (
            np.asarray(values, dtype=np.float64),
            np.asarray(indices, dtype=np.int32),
            np.asarray(indptr, dtype=np.int32),
        ),
        shape=(len(labels), dim),
    )
    raw_labels = np.asarray(labels, dtype=np.float64)
    mapped, mapping = _recode_labels(raw_labels)
    return Dataset(features=matrix, labels=mapped, label_mapping=mapping)


def _recode_labels(labels: np.ndarray) -> tuple[np.ndarray, dict | None]:
    distinct = set(np.unique(labels).tolist())
    if distinct <= {-1.0, 1.0}:
        return labels, None
    if distinct <= {0.0, 1.0}:
        mapping = {0.0: -1.0, 1.0: 1.0}
    elif distinct <= {1.0, 2.0}:
        mapping = {1.0: -1.0, 2.0: 1.0}
    else:
        return labels, None
    mapped = np.array([mapping[v] for v in labels], dtype=np.float64)
    return mapped, mapping


def load_libsvm(path, d: int | None = None) -> Dataset:
    """Read a LIBSVM file from disk (UTF-8, LF or CRLF line endings)."""
    with open(path, "r", encoding="utf-8") as handle:
        return parse_libsvm(handle, d=d)


def _format_value(v: float) -> str:
    return repr(float(v))


def serialize_libsvm(dataset: Dataset) -> str:
    """Inverse of :func:`parse_libsvm` up to float formatting.

    Values use the shortest round-trippable decimal representation, so
    ``parse_libsvm(serialize_libsvm(ds))`` reproduces ``ds`` exactly.
    Note that raw {0, 1} or {1, 2} labels would be recoded on reparse;
    parsed and generated datasets never carry them.
    """
    feats = dataset.features
    lines = []
    for i in range(dataset.n):
        label = float(dataset.labels[i])
        if label == 1.0:
            head = "+1"
        elif label == -1.0:
            head = "-1"
        else:
            head = _format_value(label)
        start, stop = feats.indptr[i], feats.indptr[i + 1]
        parts = [head]
        parts.extend(
            f"{feats.indices[j] + 1}:{_format_value(feats.data[j])}"
            for j in range(start, stop)
        )
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def save_libsvm(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(serialize_libsvm(dataset))


def gen_separable(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Draw a linearly separable dataset and its unit-norm separating vector.

    Features are i.i.d. standard normal, rows resampled until the prediction
    margin against the ground-truth vector is at least ``spec.margin``;
    labels are the sign of that prediction, then ``floor(fraction * n)``
    labels are flipped at distinct uniform positions.  Uses the PCG64
    generator, so results are reproducible across runs for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    w_star = rng.standard_normal(spec.d)
    w_star /= np.linalg.norm(w_star)

    rows = np.empty((spec.n, spec.d))
    margins = np.empty(spec.n)
    have = 0
    while have < spec.n:
        need = spec.n - have
        cand = rng.standard_normal((need, spec.d))
        z = cand @ w_star
        keep = np.abs(z) >= spec.margin
        kept = int(keep.sum())
        rows[have : have + kept] = cand[keep]
        margins[have : have + kept] = z[keep]
        have += kept

    labels = np.sign(margins)
    flips = int(np.floor(spec.mislabel_fraction * spec.n))
    if flips > 0:
        positions = rng.choice(spec.n, size=flips, replace=False)
        labels[positions] *= -1.0

    dataset = Dataset(features=sp.csr_matrix(rows), labels=labels)
    return dataset, w_star
