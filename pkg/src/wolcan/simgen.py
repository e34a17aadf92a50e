"""Synthetic population and sample generation for the simulation studies.

Generates auxiliary covariates, selection probabilities with solved intercept
offsets, Poisson samples, latent class assignments, and categorical item
matrices. All generation is seeded and vectorized.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

# Guard for the log(a2) selection term: a2 is standard normal, so log is
# evaluated as log(|a2| + LOG_GUARD) to stay defined on the full support.
LOG_GUARD = 1e-6

J_ITEMS = 30
R_LEVELS = 4
K_CLASSES = 3

# Class-assignment coefficients, rows = classes (row 1 zero for identifiability),
# columns = (intercept, a1, a2, a1*a2).
CLASS_BETA = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.4, -0.5, 0.75, 0.1],
        [-0.2, -1.0, 1.2, 0.25],
    ]
)

# Item-model coefficient columns: (intercept, I(c=2), I(c=3), a1, a3, I(c=2)*a1, I(c=3)*a1).
# One 4x7 block per item, level rows r=1..4, row r=1 zero for identifiability.
_BLOCK_J1_2 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 2.833, 0.0, 0.5, 0.0, 0.0],
    [-2.833, 2.833, 5.666, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 5.666, 2.833, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J3_6 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 2.833, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 5.666, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 5.666, 2.833, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J7_9 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 5.666, 2.833, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 5.666, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 2.833, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J10_15 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 5.666, 2.833, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 2.833, 0.0, 0.0, 0.0, 0.0],
    [-2.833, 2.833, 5.666, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J16_21 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 2.833, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.833, -2.833, -2.833, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 2.833, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J22_28 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 2.833, -2.833, 0.0, 0.0, 0.0, 0.0],
    [2.833, -2.833, -5.666, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -2.833, 0.0, 0.0, 0.0, 0.0],
]
_BLOCK_J29_30 = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 2.833, -2.833, 0.0, 0.0, 2.0, -1.0],
    [2.833, -2.833, -5.666, 2.0, 0.0, -2.0, -2.0],
    [0.0, 0.0, -2.833, 0.0, 0.0, 0.0, -1.0],
]


def _item_beta_baseline() -> np.ndarray:
    """Stack the per-item coefficient blocks into a (J, R, 7) array."""
    blocks = (
        [_BLOCK_J1_2] * 2
        + [_BLOCK_J3_6] * 4
        + [_BLOCK_J7_9] * 3
        + [_BLOCK_J10_15] * 6
        + [_BLOCK_J16_21] * 6
        + [_BLOCK_J22_28] * 7
        + [_BLOCK_J29_30] * 2
    )
    return np.array(blocks, dtype=float)


@dataclass(frozen=True)
class BetaTables:
    """Coefficient tables driving class assignment and item generation.

    Attributes
    ----------
    class_beta : ndarray, shape (3, 4)
        Multinomial-logit coefficients for the latent class assignment;
        first row all zeros.
    item_beta : ndarray, shape (30, 4, 7)
        Per item and level, coefficients on (intercept, I(c=2), I(c=3),
        a1, a3, I(c=2)*a1, I(c=3)*a1); level-1 row all zeros.
    """

    class_beta: np.ndarray = field(default_factory=lambda: CLASS_BETA.copy())
    item_beta: np.ndarray = field(default_factory=_item_beta_baseline)

    def __post_init__(self) -> None:
        if self.class_beta.shape != (K_CLASSES, 4):
            raise ValueError("class_beta must be 3x4")
        if self.item_beta.shape != (J_ITEMS, R_LEVELS, 7):
            raise ValueError("item_beta must be (30, 4, 7)")
        if np.any(self.class_beta[0] != 0.0):
            raise ValueError("class_beta reference row (class 1) must be zero")
        if np.any(self.item_beta[:, 0, :] != 0.0):
            raise ValueError("item_beta reference rows (level 1) must be zero")


def baseline_tables() -> BetaTables:
    """Tables for the disjoint three-pattern design."""
    return BetaTables()


def non_disjoint_tables() -> BetaTables:
    """Tables where patterns 1 and 3 coincide except on items 13-15.

    Class-3 columns (the I(c=3) main effect and I(c=3)*a1 interaction) are
    zeroed for every item outside 13-15, so class-3 units generate exactly
    like class-1 units there; items 13-15 keep the baseline class-3 behavior.
    """
    item_beta = _item_beta_baseline()
    keep = np.zeros(J_ITEMS, dtype=bool)
    keep[12:15] = True  # items 13-15, 1-indexed
    item_beta[~keep, :, 2] = 0.0
    item_beta[~keep, :, 6] = 0.0
    return BetaTables(item_beta=item_beta)


@dataclass(frozen=True)
class SyntheticPopulation:
    """A generated finite population with truth needed for evaluation."""

    aux: np.ndarray          # (N, 3) columns a1, a2, a3
    classes: np.ndarray      # (N,) values in {1,2,3}
    items: np.ndarray        # (N, 30) values in {1..4}
    pi_b: np.ndarray         # (N,) true NPS inclusion probabilities
    pi_r: np.ndarray         # (N,) true PS inclusion probabilities
    offsets: tuple[float, float]

    @property
    def n(self) -> int:
        return self.aux.shape[0]

    @property
    def true_weights(self) -> np.ndarray:
        return 1.0 / self.pi_b


def generate_population(n: int, rho: float, seed) -> np.ndarray:
    """Draw auxiliary covariates (a1, a2, a3).

    (a1, a2) are bivariate standard normal with correlation ``rho``; a3 is
    an independent standard normal.

    Parameters
    ----------
    n : int
        Population size, at least 1.
    rho : float
        Correlation between a1 and a2; |rho| < 1.
    seed : int, SeedSequence, or Generator

    Returns
    -------
    ndarray, shape (n, 3)
    """
    if n < 1:
        raise ValueError("population size must be at least 1")
    if abs(rho) >= 1:
        raise ValueError("|rho| must be below 1")
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    a12 = rng.multivariate_normal(np.zeros(2), cov, size=n, method="cholesky")
    a3 = rng.standard_normal(n)
    return np.column_stack([a12, a3])


def _selection_eta(aux: np.ndarray, which: str, overlap: str) -> np.ndarray:
    """Linear predictor of the selection logit, without the offset."""
    a1, a2, a3 = aux[:, 0], aux[:, 1], aux[:, 2]
    log_a2 = np.log(np.abs(a2) + LOG_GUARD)
    if which == "B":
        # same NPS design in both overlap settings
        return -0.9 * a1 + 0.2 * a1**2 + 0.8 * a2 + 0.2 * log_a2 - 0.1 * np.sin(a1 * a2) + 0.3 * a3
    if overlap == "high":
        return -0.6 * a1 + 0.4 * a1**2 + 0.7 * a2 + 0.1 * log_a2 - 0.05 * np.sin(a1 * a2) + 0.4 * a3
    return 0.7 * a1 - 0.6 * a2 + 0.1 * log_a2 + 0.1 * a1 * a2 - 0.1 * a3


def _solve_offset(eta: np.ndarray, target_total: float) -> float:
    """Bisection for the intercept offset with sum(expit(offset + eta)) = target."""
    lo, hi = -20.0, 20.0

    def total(offset: float) -> float:
        return float(expit(offset + eta).sum())

    # widen once if the target is not bracketed
    if total(lo) > target_total:
        lo = -40.0
    if total(hi) < target_total:
        hi = 40.0
    if total(lo) > target_total or total(hi) < target_total:
        raise RuntimeError(
            f"offset bisection cannot bracket target total {target_total:.3f} "
            f"within [{lo}, {hi}]"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-10:
            break
        if total(mid) < target_total:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def selection_probs(
    aux: np.ndarray, overlap: str, target_fracs: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Selection probabilities for the NPS and PS with solved offsets.

    Parameters
    ----------
    aux : ndarray, shape (N, 3)
    overlap : {"high", "low"}
        Which PS selection design to use; the NPS design is shared.
    target_fracs : (f_B, f_R)
        Expected sampling fractions, each in (0, 1); offsets are solved so
        the probabilities sum to N*f.

    Returns
    -------
    (pi_b, pi_r, (offset_b, offset_r))
    """
    if overlap not in ("high", "low"):
        raise ValueError("overlap must be 'high' or 'low'")
    f_b, f_r = target_fracs
    if not (0 < f_b < 1 and 0 < f_r < 1):
        raise ValueError("target fractions must lie in (0, 1)")
    n = aux.shape[0]
    eta_b = _selection_eta(aux, "B", overlap)
    eta_r = _selection_eta(aux, "R", overlap)
    off_b = _solve_offset(eta_b, n * f_b)
    off_r = _solve_offset(eta_r, n * f_r)
    return expit(off_b + eta_b), expit(off_r + eta_r), (off_b, off_r)


def poisson_sample(pi: np.ndarray, seed) -> np.ndarray:
    """Independent Bernoulli(pi_i) selection; returns the selected indices."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi < 0) or np.any(pi > 1):
        raise ValueError("inclusion probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    return np.nonzero(rng.random(pi.shape[0]) < pi)[0]


def _softmax_rows(eta: np.ndarray) -> np.ndarray:
    shifted = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def class_probs(aux: np.ndarray, class_beta: np.ndarray) -> np.ndarray:
    """Per-unit class membership probabilities under the multinomial logit."""
    a1, a2 = aux[:, 0], aux[:, 1]
    design = np.column_stack([np.ones_like(a1), a1, a2, a1 * a2])
    eta = design @ class_beta.T  # (N, 3), column 1 is zero
    return _softmax_rows(eta)


def generate_classes(aux: np.ndarray, class_beta: np.ndarray, seed) -> np.ndarray:
    """Draw latent class labels in {1,2,3} for every unit."""
    if np.any(class_beta[0] != 0.0):
        raise ValueError("reference class row must be zero")
    probs = class_probs(aux, class_beta)
    rng = np.random.default_rng(seed)
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    return 1 + (u[:, None] >= cum).sum(axis=1).astype(np.int64)


def item_probs(aux: np.ndarray, classes: np.ndarray, tables: BetaTables) -> np.ndarray:
    """Per-unit item level probabilities, shape (N, J, R)."""
    a1, a3 = aux[:, 0], aux[:, 2]
    c2 = (classes == 2).astype(float)
    c3 = (classes == 3).astype(float)
    design = np.column_stack([np.ones_like(a1), c2, c3, a1, a3, c2 * a1, c3 * a1])
    # eta[i, j, r] = design[i] . item_beta[j, r]
    eta = np.einsum("ip,jrp->ijr", design, tables.item_beta)
    shifted = eta - eta.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=2, keepdims=True)


def generate_items(aux: np.ndarray, classes: np.ndarray, tables: BetaTables, seed) -> np.ndarray:
    """Draw the (N, J) item matrix with levels in {1..R}."""
    probs = item_probs(aux, classes, tables)
    rng = np.random.default_rng(seed)
    u = rng.random((probs.shape[0], probs.shape[1]))
    cum = np.cumsum(probs, axis=2)
    return 1 + (u[:, :, None] >= cum).sum(axis=2).astype(np.int64)


def modal_map(tables: BetaTables) -> np.ndarray:
    """Modal item level per (class, item) at a1 = a3 = 0, shape (3, 30)."""
    out = np.empty((K_CLASSES, J_ITEMS), dtype=np.int64)
    for k in range(1, K_CLASSES + 1):
        design = np.array([1.0, float(k == 2), float(k == 3), 0.0, 0.0, 0.0, 0.0])
        eta = tables.item_beta @ design  # (J, R)
        out[k - 1] = 1 + eta.argmax(axis=1)
    return out


def make_population(
    n: int,
    seed,
    overlap: str = "high",
    target_fracs: tuple[float, float] = (0.05, 0.05),
    tables: BetaTables | None = None,
    rho: float = 0.5,
) -> SyntheticPopulation:
    """Generate a full population: covariates, selection probs, classes, items.

    Child seeds are spawned in a fixed order (covariates, classes, items) so
    populations are reproducible bit for bit under a fixed seed.
    """
    if tables is None:
        tables = baseline_tables()
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_cov, s_cls, s_items = ss.spawn(3)
    aux = generate_population(n, rho, s_cov)
    pi_b, pi_r, offsets = selection_probs(aux, overlap, target_fracs)
    classes = generate_classes(aux, tables.class_beta, s_cls)
    items = generate_items(aux, classes, tables, s_items)
    return SyntheticPopulation(
        aux=aux, classes=classes, items=items, pi_b=pi_b, pi_r=pi_r, offsets=offsets
    )
