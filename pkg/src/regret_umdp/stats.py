"""One-sided Welch t-test used to compare methods across instances."""

from __future__ import annotations

import numpy as np
from scipy import stats


def welch_t_test(xs, ys) -> float:
    """One-sided p-value for ``mean(xs) < mean(ys)`` with Welch degrees of freedom."""
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.size < 2 or y.size < 2:
        raise ValueError("each group needs at least two observations")
    if not x.var(ddof=1) + y.var(ddof=1) > 0:
        raise ValueError("both groups have zero variance")
    return float(stats.ttest_ind(x, y, equal_var=False, alternative="less").pvalue)
