"""Sum-of-trees Bayesian regression: continuous and probit variants.

The sampler is backfitting MCMC: each iteration sweeps the trees, proposing
one structural move per tree (grow / prune / change) accepted by
Metropolis-Hastings with the leaf means integrated out analytically, then
redraws leaf means from their normal full conditionals. The continuous
variant adds a residual-variance Gibbs step; the probit variant adds
truncated-normal latent draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import chi2

from ._trees import Tree

_MOVE_GROW, _MOVE_PRUNE, _MOVE_CHANGE = 0, 1, 2
_PROB_EPS = 1e-12


@dataclass(frozen=True)
class BartConfig:
    """Hyperparameters and iteration counts for a sum-of-trees fit.

    Attributes
    ----------
    n_trees : int or None
        Ensemble size; None resolves to 200 (continuous) or 50 (probit).
    alpha, beta : float
        Depth prior: P(node at depth d splits) = alpha * (1 + d)^(-beta).
    k : float
        Leaf shrinkage; the leaf prior sd is 0.5/(k*sqrt(T)) on the
        standardized continuous scale and 3/(k*sqrt(T)) for probit.
    nu, q : float
        Residual-variance prior: scaled inverse chi-squared with nu degrees
        of freedom and scale calibrated so P(sigma < sigest) = q.
    n_draws : int
        Number of retained posterior states (consecutive, after burn-in).
    burn : int
        Burn-in iterations.
    n_cutpoints : int
        Size of the per-variable quantile cutpoint grid.
    sigma2 : float or None
        If set, fixes the residual variance on the standardized scale and
        skips its Gibbs update (validation knob; continuous variant only).
    """

    n_trees: int | None = None
    alpha: float = 0.95
    beta: float = 2.0
    k: float = 2.0
    nu: float = 3.0
    q: float = 0.90
    n_draws: int = 1000
    burn: int = 100
    n_cutpoints: int = 100
    sigma2: float | None = None
    move_probs: tuple[float, float, float] = (0.25, 0.25, 0.50)

    def resolved_trees(self, variant: str) -> int:
        if self.n_trees is not None:
            return self.n_trees
        return 200 if variant == "continuous" else 50


class BartPosterior:
    """Retained posterior states and predictive draws of a fitted ensemble."""

    def __init__(
        self,
        variant: str,
        draws_train: np.ndarray,
        draws_test: np.ndarray | None,
        config: BartConfig,
        n_features: int,
        forests: dict | None,
        y_shift: float = 0.0,
        y_scale: float = 1.0,
        offset: float = 0.0,
        sigma2_draws: np.ndarray | None = None,
        constant: float | None = None,
    ):
        self.variant = variant
        self.draws_train = draws_train
        self.draws_test = draws_test
        self.config = config
        self.n_features = n_features
        self.n_draws = draws_train.shape[1]
        self._forests = forests
        self._y_shift = y_shift
        self._y_scale = y_scale
        self._offset = offset
        self.sigma2_draws = sigma2_draws
        self._constant = constant

    def predict(self, new_covariates: np.ndarray) -> np.ndarray:
        """Evaluate every retained state at new rows.

        Parameters
        ----------
        new_covariates : ndarray, shape (m, Q)
            Q must match the training feature count.

        Returns
        -------
        ndarray, shape (m, M)
            Sum-of-trees evaluations per state, on the response scale
            (probability scale for the probit variant).
        """
        x = np.asarray(new_covariates, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} feature columns, got shape {x.shape}"
            )
        if self._constant is not None:
            return np.full((x.shape[0], self.n_draws), self._constant)
        f = self._forests
        m = x.shape[0]
        total = np.zeros((m, self.n_draws))
        starts = f["offsets"]
        var, cut, left, right, mu = f["var"], f["cut"], f["left"], f["right"], f["mu"]
        n_trees = f["n_trees"]
        for s in range(self.n_draws):
            acc = total[:, s]
            for t in range(n_trees):
                block = s * n_trees + t
                lo = starts[block]
                node = np.zeros(m, dtype=np.int64)
                while True:
                    v = var[lo + node]
                    internal = v >= 0
                    if not internal.any():
                        break
                    idx = np.nonzero(internal)[0]
                    go_left = x[idx, v[idx]] <= cut[lo + node[idx]]
                    node[idx] = np.where(
                        go_left, left[lo + node[idx]], right[lo + node[idx]]
                    )
                acc += mu[lo + node]
        if self.variant == "probit":
            return np.clip(ndtr(total + self._offset), _PROB_EPS, 1 - _PROB_EPS)
        return (total + 0.5) * self._y_scale + self._y_shift


def _cutpoint_grids(x: np.ndarray, n_cutpoints: int) -> list[np.ndarray]:
    """Quantile-based cutpoint grid per column; splits at the column max are
    dropped since they would route every row left."""
    grids = []
    probs = np.linspace(0.0, 1.0, n_cutpoints + 2)[1:-1]
    for q in range(x.shape[1]):
        col = x[:, q]
        grid = np.unique(np.quantile(col, probs))
        grid = grid[grid < col.max()]
        grids.append(grid)
    return grids


def _log_marginal(n, s, sigma2: float, tau2: float) -> np.ndarray:
    """Log marginal likelihood contribution of a leaf with ``n`` rows and
    residual sum ``s``, leaf mean integrated out under N(0, tau2)."""
    denom = sigma2 + n * tau2
    return 0.5 * np.log(sigma2 / denom) + tau2 * s * s / (2.0 * sigma2 * denom)


class _Sampler:
    def __init__(
        self,
        x: np.ndarray,
        y_work: np.ndarray,
        variant: str,
        cfg: BartConfig,
        rng: np.random.Generator,
        x_test: np.ndarray | None,
        tau2: float,
    ):
        self.x = x
        self.x_test = x_test
        self.variant = variant
        self.cfg = cfg
        self.rng = rng
        self.tau2 = tau2
        self.n = x.shape[0]
        self.n_trees = cfg.resolved_trees(variant)
        self.grids = _cutpoint_grids(x, cfg.n_cutpoints)
        self.growable = [q for q in range(x.shape[1]) if self.grids[q].size > 0]
        n_test = 0 if x_test is None else x_test.shape[0]
        self.trees = [Tree(self.n, n_test) for _ in range(self.n_trees)]
        self.fits = np.zeros((self.n_trees, self.n))
        self.total_fit = np.zeros(self.n)
        self.fits_test = np.zeros((self.n_trees, n_test)) if n_test else None
        self.total_fit_test = np.zeros(n_test) if n_test else None
        self.y_work = y_work

    def _log_prior_grow(self, depth: int) -> float:
        a, b = self.cfg.alpha, self.cfg.beta
        p_split = a * (1.0 + depth) ** (-b)
        p_child_stays = 1.0 - a * (2.0 + depth) ** (-b)
        return math.log(p_split) + 2.0 * math.log(p_child_stays) - math.log(1.0 - p_split)

    def _propose_rule(self) -> tuple[int, float]:
        var = self.growable[int(self.rng.integers(len(self.growable)))]
        grid = self.grids[var]
        return var, float(grid[int(self.rng.integers(grid.size))])

    def _move_probs(self, tree: Tree) -> tuple[float, float, float]:
        if tree.is_root_only:
            return 1.0, 0.0, 0.0
        return self.cfg.move_probs

    def _update_tree(self, t: int, sigma2: float) -> None:
        tree = self.trees[t]
        resid = self.y_work - self.total_fit + self.fits[t]
        rng = self.rng

        if self.growable:
            p_grow, p_prune, _ = self._move_probs(tree)
            u = rng.random()
            if u < p_grow:
                self._try_grow(tree, resid, sigma2, p_grow)
            elif u < p_grow + p_prune:
                self._try_prune(tree, resid, sigma2)
            else:
                self._try_change(tree, resid, sigma2)

        # leaf means: normal full conditionals with the structure fixed
        leaf_ids = np.asarray(tree.leaves, dtype=np.int64)
        sums = np.bincount(tree.node_of_row, weights=resid, minlength=tree.var.shape[0])
        n_l = tree.counts[leaf_ids].astype(float)
        s_l = sums[leaf_ids]
        post_var = 1.0 / (n_l / sigma2 + 1.0 / self.tau2)
        post_mean = post_var * s_l / sigma2
        tree.mu[leaf_ids] = post_mean + np.sqrt(post_var) * rng.standard_normal(
            leaf_ids.shape[0]
        )

        new_fit = tree.mu[tree.node_of_row]
        self.total_fit += new_fit - self.fits[t]
        self.fits[t] = new_fit
        if self.fits_test is not None:
            new_fit_test = tree.mu[tree.node_of_test]
            self.total_fit_test += new_fit_test - self.fits_test[t]
            self.fits_test[t] = new_fit_test

    def _try_grow(self, tree: Tree, resid: np.ndarray, sigma2: float, p_grow: float) -> None:
        rng = self.rng
        leaf = tree.leaves[int(rng.integers(tree.n_leaves))]
        var, cut = self._propose_rule()
        rows = tree.rows_of(leaf)
        if rows.shape[0] < 2:
            return
        go_left = self.x[rows, var] <= cut
        n_left = int(go_left.sum())
        n_right = rows.shape[0] - n_left
        if n_left == 0 or n_right == 0:
            return
        r_leaf = resid[rows]
        s_all = float(r_leaf.sum())
        s_left = float(r_leaf[go_left].sum())
        s_right = s_all - s_left
        depth = int(tree.depth[leaf])

        log_lik = (
            _log_marginal(n_left, s_left, sigma2, self.tau2)
            + _log_marginal(n_right, s_right, sigma2, self.tau2)
            - _log_marginal(rows.shape[0], s_all, sigma2, self.tau2)
        )
        parent = int(tree.parent[leaf])
        n_prunable_after = tree.n_prunable + 1 - (1 if parent >= 0 and parent in tree.singly else 0)
        p_prune_after = self.cfg.move_probs[1]
        log_trans = (
            math.log(p_prune_after)
            + math.log(tree.n_leaves)
            - math.log(p_grow)
            - math.log(n_prunable_after)
        )
        log_accept = log_trans + self._log_prior_grow(depth) + log_lik
        if math.log(rng.random()) < log_accept:
            x_test_col = self.x_test[:, var] if self.x_test is not None else None
            tree.grow(leaf, var, cut, rows, go_left, x_test_col)

    def _try_prune(self, tree: Tree, resid: np.ndarray, sigma2: float) -> None:
        rng = self.rng
        node = tree.singly[int(rng.integers(tree.n_prunable))]
        lid, rid = int(tree.left[node]), int(tree.right[node])
        rows_l = tree.rows_of(lid)
        rows_r = tree.rows_of(rid)
        s_left = float(resid[rows_l].sum())
        s_right = float(resid[rows_r].sum())
        n_left, n_right = rows_l.shape[0], rows_r.shape[0]
        depth = int(tree.depth[node])

        log_lik = (
            _log_marginal(n_left + n_right, s_left + s_right, sigma2, self.tau2)
            - _log_marginal(n_left, s_left, sigma2, self.tau2)
            - _log_marginal(n_right, s_right, sigma2, self.tau2)
        )
        # grow probability evaluated in the pruned tree
        p_grow_after = 1.0 if tree.n_leaves == 2 else self.cfg.move_probs[0]
        p_prune_now = self.cfg.move_probs[1]
        log_trans = (
            math.log(p_grow_after)
            - math.log(tree.n_leaves - 1)
            - math.log(p_prune_now)
            + math.log(tree.n_prunable)
        )
        log_accept = log_trans - self._log_prior_grow(depth) + log_lik
        if math.log(rng.random()) < log_accept:
            tree.prune(node)

    def _try_change(self, tree: Tree, resid: np.ndarray, sigma2: float) -> None:
        rng = self.rng
        node = tree.singly[int(rng.integers(tree.n_prunable))]
        var, cut = self._propose_rule()
        lid, rid = int(tree.left[node]), int(tree.right[node])
        under = np.nonzero((tree.node_of_row == lid) | (tree.node_of_row == rid))[0]
        old_left = tree.node_of_row[under] == lid
        r_under = resid[under]
        s_old_left = float(r_under[old_left].sum())
        s_total = float(r_under.sum())
        n_old_left = int(old_left.sum())

        new_left = self.x[under, var] <= cut
        n_new_left = int(new_left.sum())
        if n_new_left == 0 or n_new_left == under.shape[0]:
            return
        s_new_left = float(r_under[new_left].sum())

        log_accept = (
            _log_marginal(n_new_left, s_new_left, sigma2, self.tau2)
            + _log_marginal(under.shape[0] - n_new_left, s_total - s_new_left, sigma2, self.tau2)
            - _log_marginal(n_old_left, s_old_left, sigma2, self.tau2)
            - _log_marginal(under.shape[0] - n_old_left, s_total - s_old_left, sigma2, self.tau2)
        )
        if math.log(rng.random()) < log_accept:
            x_test_col = self.x_test[:, var] if self.x_test is not None else None
            tree.change(node, var, cut, under, new_left, x_test_col)


def _validate_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("covariates must be a 2-D matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("covariates contain non-finite values")
    return x


def _snapshot_forest(store: dict, trees: list[Tree]) -> None:
    for tree in trees:
        var, cut, left, right, mu = tree.snapshot()
        store["var"].append(var)
        store["cut"].append(cut)
        store["left"].append(left)
        store["right"].append(right)
        store["mu"].append(mu)


def _pack_forests(store: dict, n_trees: int) -> dict:
    sizes = np.array([a.shape[0] for a in store["var"]], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return {
        "var": np.concatenate(store["var"]),
        "cut": np.concatenate(store["cut"]),
        "left": np.concatenate(store["left"]),
        "right": np.concatenate(store["right"]),
        "mu": np.concatenate(store["mu"]),
        "offsets": offsets,
        "n_trees": n_trees,
    }


def fit_continuous_bart(
    covariates: np.ndarray,
    response: np.ndarray,
    cfg: BartConfig | None = None,
    seed=0,
    x_test: np.ndarray | None = None,
) -> BartPosterior:
    """Fit the continuous-response sum-of-trees model.

    The response is standardized to [-0.5, 0.5] internally and predictions
    are mapped back. A constant response short-circuits to a degenerate
    posterior whose every predictive draw equals that constant.

    Parameters
    ----------
    covariates : ndarray, shape (n, Q)
    response : ndarray, shape (n,)
    cfg : BartConfig, optional
    seed : int, SeedSequence, or Generator
    x_test : ndarray, optional
        Extra rows to track through the sampler; their draws land in
        ``draws_test`` without a separate predict pass.

    Returns
    -------
    BartPosterior
    """
    cfg = cfg or BartConfig()
    x = _validate_matrix(covariates)
    y = np.asarray(response, dtype=float)
    if y.shape != (x.shape[0],):
        raise ValueError("response length must match covariate rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if cfg.n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    if x_test is not None:
        x_test = _validate_matrix(x_test)
        if x_test.shape[1] != x.shape[1]:
            raise ValueError("x_test column count mismatch")

    y_min, y_max = float(y.min()), float(y.max())
    if y_max == y_min:
        # degenerate: no residual scale to calibrate, posterior collapses
        draws_train = np.full((x.shape[0], cfg.n_draws), y_min)
        draws_test = (
            np.full((x_test.shape[0], cfg.n_draws), y_min) if x_test is not None else None
        )
        return BartPosterior(
            "continuous", draws_train, draws_test, cfg, x.shape[1],
            forests=None, constant=y_min,
        )

    rng = np.random.default_rng(seed)
    y_scale = y_max - y_min
    y_std = (y - y_min) / y_scale - 0.5

    n_trees = cfg.resolved_trees("continuous")
    tau2 = (0.5 / (cfg.k * math.sqrt(n_trees))) ** 2

    if cfg.sigma2 is not None:
        sigma2 = float(cfg.sigma2)
        fixed_sigma = True
        nu_lambda = 0.0
    else:
        fixed_sigma = False
        design = np.column_stack([np.ones(x.shape[0]), x])
        coef, _, rank, _ = np.linalg.lstsq(design, y_std, rcond=None)
        dof = x.shape[0] - rank
        if dof > 0:
            sigest2 = float(((y_std - design @ coef) ** 2).sum() / dof)
        else:
            sigest2 = float(np.var(y_std, ddof=1))
        if sigest2 <= 0:
            sigest2 = float(np.var(y_std, ddof=1))
        lam = sigest2 * chi2.ppf(1.0 - cfg.q, cfg.nu) / cfg.nu
        nu_lambda = cfg.nu * lam
        sigma2 = sigest2

    sampler = _Sampler(x, y_std, "continuous", cfg, rng, x_test, tau2)
    n = x.shape[0]
    draws_train = np.empty((n, cfg.n_draws))
    draws_test = np.empty((x_test.shape[0], cfg.n_draws)) if x_test is not None else None
    sigma2_draws = np.empty(cfg.n_draws)
    store = {"var": [], "cut": [], "left": [], "right": [], "mu": []}

    for it in range(cfg.burn + cfg.n_draws):
        for t in range(n_trees):
            sampler._update_tree(t, sigma2)
        if not fixed_sigma:
            ssr = float(((y_std - sampler.total_fit) ** 2).sum())
            sigma2 = (nu_lambda + ssr) / float(rng.chisquare(cfg.nu + n))
        if it >= cfg.burn:
            m = it - cfg.burn
            draws_train[:, m] = (sampler.total_fit + 0.5) * y_scale + y_min
            if draws_test is not None:
                draws_test[:, m] = (sampler.total_fit_test + 0.5) * y_scale + y_min
            sigma2_draws[m] = sigma2
            _snapshot_forest(store, sampler.trees)

    return BartPosterior(
        "continuous", draws_train, draws_test, cfg, x.shape[1],
        forests=_pack_forests(store, n_trees),
        y_shift=y_min, y_scale=y_scale, sigma2_draws=sigma2_draws,
    )


def fit_probit_bart(
    covariates: np.ndarray,
    labels: np.ndarray,
    cfg: BartConfig | None = None,
    seed=0,
    x_test: np.ndarray | None = None,
) -> BartPosterior:
    """Fit the probit sum-of-trees model by latent-variable augmentation.

    Each iteration draws truncated-normal latents given the current fit,
    then updates the trees against the latents. Predictive draws are normal
    CDF transforms of the latent mean and lie strictly inside (0, 1).
    """
    cfg = cfg or BartConfig()
    x = _validate_matrix(covariates)
    y = np.asarray(labels)
    if y.shape != (x.shape[0],):
        raise ValueError("labels length must match covariate rows")
    uniq = np.unique(y)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueError("labels must be binary 0/1")
    if uniq.size < 2:
        raise ValueError("both label classes must be present")
    if cfg.n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    if x_test is not None:
        x_test = _validate_matrix(x_test)
        if x_test.shape[1] != x.shape[1]:
            raise ValueError("x_test column count mismatch")

    rng = np.random.default_rng(seed)
    y = y.astype(np.int64)
    n = x.shape[0]
    offset = float(ndtri(y.mean()))
    n_trees = cfg.resolved_trees("probit")
    tau2 = (3.0 / (cfg.k * math.sqrt(n_trees))) ** 2

    z_work = np.zeros(n)  # latents minus offset; tree target
    sampler = _Sampler(x, z_work, "probit", cfg, rng, x_test, tau2)
    is_one = y == 1

    draws_train = np.empty((n, cfg.n_draws))
    draws_test = np.empty((x_test.shape[0], cfg.n_draws)) if x_test is not None else None
    store = {"var": [], "cut": [], "left": [], "right": [], "mu": []}

    for it in range(cfg.burn + cfg.n_draws):
        mean = sampler.total_fit + offset
        p_neg = ndtr(-mean)
        u = rng.random(n)
        u_trunc = np.where(is_one, p_neg + u * (1.0 - p_neg), u * p_neg)
        np.clip(u_trunc, 1e-15, 1.0 - 1e-15, out=u_trunc)
        sampler.y_work[:] = mean + ndtri(u_trunc) - offset

        for t in range(n_trees):
            sampler._update_tree(t, 1.0)

        if it >= cfg.burn:
            m = it - cfg.burn
            draws_train[:, m] = np.clip(
                ndtr(sampler.total_fit + offset), _PROB_EPS, 1 - _PROB_EPS
            )
            if draws_test is not None:
                draws_test[:, m] = np.clip(
                    ndtr(sampler.total_fit_test + offset), _PROB_EPS, 1 - _PROB_EPS
                )
            _snapshot_forest(store, sampler.trees)

    return BartPosterior(
        "probit", draws_train, draws_test, cfg, x.shape[1],
        forests=_pack_forests(store, n_trees), offset=offset,
    )


def predict(posterior: BartPosterior, new_covariates: np.ndarray) -> np.ndarray:
    """Module-level alias for :meth:`BartPosterior.predict`."""
    return posterior.predict(new_covariates)
