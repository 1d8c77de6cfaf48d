#!/usr/bin/env python3
"""Regenerate the LIBSVM fixtures bundled under datasets/.

Features are rounded to four decimals so the files stay small while still
round-tripping exactly through the parser.
"""

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from vrkit import Dataset, SyntheticSpec, gen_separable, save_libsvm

FIXTURES = {
    "synth_a.libsvm": SyntheticSpec(n=1500, d=30, mislabel_fraction=0.05, margin=0.1, seed=101),
    "synth_b.libsvm": SyntheticSpec(n=2000, d=40, mislabel_fraction=0.15, margin=0.1, seed=202),
}


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "datasets"
    out_dir.mkdir(exist_ok=True)
    for name, spec in FIXTURES.items():
        dataset, _ = gen_separable(spec)
        rounded = sp.csr_matrix(np.round(dataset.features.toarray(), 4))
        save_libsvm(Dataset(features=rounded, labels=dataset.labels), out_dir / name)
        print(f"wrote {out_dir / name} (n={dataset.n}, d={dataset.d})")


if __name__ == "__main__":
    main()
