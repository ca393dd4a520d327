"""Mask/map comparison metrics."""
from __future__ import annotations

import numpy as np


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized cross-correlation between two equally sized real grids.

    Pearson form: sum((a - mean_a) * (b - mean_b)) / (n * std_a * std_b),
    which lands in [-1, 1]. Inputs may be binary masks or real-valued maps.

    Degenerate rule when either grid is constant (zero std): 1.0 when both
    grids are constant with the same value, 0.0 otherwise. This keeps the
    metric total so constant predictions score 0 against any non-trivial
    ground truth.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    sa = a.std()
    sb = b.std()
    if sa == 0.0 or sb == 0.0:
        if sa == 0.0 and sb == 0.0 and a.flat[0] == b.flat[0]:
            return 1.0
        return 0.0
    v = float((da * db).mean() / (sa * sb))
    return float(np.clip(v, -1.0, 1.0))
