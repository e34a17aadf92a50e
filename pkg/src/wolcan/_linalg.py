"""Small shared linear-algebra helpers."""
from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky

JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def chol_upper(mat: np.ndarray, label: str) -> np.ndarray:
    """Upper-triangular R with R'R = mat, jittering the diagonal if needed.

    Jitter scales with the mean diagonal and escalates tenfold from 1e-8 to
    1e-4 before giving up.
    """
    scale = float(np.mean(np.diag(mat)))
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    for jit in JITTERS:
        try:
            return cholesky(mat + jit * scale * np.eye(mat.shape[0]), lower=False)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"{label} is not positive definite even after diagonal jitter up to 1e-4"
    )
