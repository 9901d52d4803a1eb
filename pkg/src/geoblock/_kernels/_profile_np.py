"""NumPy fallback for the sliding closure-mass kernel.

Per-row prefix sums turn each candidate's three region masses into m-row gathers;
construction is O(rows * cols), candidates cost O(m) each. Accumulation is
float64 regardless of input storage precision, and the summation structure
matches the compiled kernel (per-row segments, no full-table differencing).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def profile_masses(weights, history, min_block, splits):
    """Region masses for every candidate split.

    Args:
        weights: (rows, cols) nonnegative map; cols = history + rows.
        history: number of leading history columns folded into the past region.
        min_block: width m of the sliding candidate row set C = {x-m+1..x}.
        splits: 1-based candidate split positions, each in [m, rows].

    Returns:
        (s_cc, s_ch, s_cf) float64 arrays aligned with `splits`.
    """
    a = np.ascontiguousarray(weights, dtype=np.float64)
    rows, cols = a.shape
    xs = np.asarray(splits, dtype=np.int64)

    # prefix[r, c] = sum of a[r, :c]
    prefix = np.zeros((rows, cols + 1), dtype=np.float64)
    np.cumsum(a, axis=1, out=prefix[:, 1:])

    # candidate row windows: rows x-m .. x-1 (0-based)
    row_idx = xs[:, None] - min_block + np.arange(min_block)[None, :]
    lo = (history + xs - min_block)[:, None]  # end of the past columns
    hi = (history + xs)[:, None]              # end of the candidate columns

    at_lo = prefix[row_idx, lo]
    at_hi = prefix[row_idx, hi]
    at_end = prefix[row_idx, cols]

    s_ch = at_lo.sum(axis=1)
    s_cc = (at_hi - at_lo).sum(axis=1)
    s_cf = (at_end - at_hi).sum(axis=1)
    return s_cc, s_ch, s_cf
