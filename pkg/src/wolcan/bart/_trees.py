"""Array-backed binary decision trees for the sum-of-trees sampler.

Nodes live in flat parallel arrays indexed by node id, with a free list so
pruned slots are reused. Each tree tracks which leaf every training (and
optionally test) row currently occupies, so proposals touch only the rows
under the affected node.
"""
from __future__ import annotations

import numpy as np

_INIT_CAP = 16


class Tree:
    """One decision tree plus its row-to-leaf assignments.

    Leaves carry scalar means; internal nodes carry a split variable and
    cutpoint with the rule ``x[var] <= cut`` routing left.
    """

    def __init__(self, n_train: int, n_test: int = 0):
        cap = _INIT_CAP
        self.var = np.full(cap, -1, dtype=np.int32)
        self.cut = np.zeros(cap, dtype=np.float64)
        self.left = np.full(cap, -1, dtype=np.int32)
        self.right = np.full(cap, -1, dtype=np.int32)
        self.parent = np.full(cap, -1, dtype=np.int32)
        self.depth = np.zeros(cap, dtype=np.int32)
        self.is_leaf = np.zeros(cap, dtype=bool)
        self.mu = np.zeros(cap, dtype=np.float64)
        self.counts = np.zeros(cap, dtype=np.int64)
        self.is_leaf[0] = True
        self.counts[0] = n_train
        self._size = 1
        self._free: list[int] = []
        self.leaves: list[int] = [0]
        self.singly: list[int] = []  # internal nodes whose children are both leaves
        self.node_of_row = np.zeros(n_train, dtype=np.int32)
        self.node_of_test = np.zeros(n_test, dtype=np.int32) if n_test else None

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def n_prunable(self) -> int:
        return len(self.singly)

    @property
    def is_root_only(self) -> bool:
        return len(self.leaves) == 1

    def _alloc(self) -> int:
        if self._free:
            return self._free.pop()
        if self._size >= self.var.shape[0]:
            new_cap = 2 * self.var.shape[0]
            for name in ("var", "left", "right", "parent", "depth"):
                arr = getattr(self, name)
                grown = np.full(new_cap, -1, dtype=arr.dtype)
                grown[: arr.shape[0]] = arr
                setattr(self, name, grown)
            for name, fill in (("cut", 0.0), ("mu", 0.0)):
                arr = getattr(self, name)
                grown = np.full(new_cap, fill, dtype=arr.dtype)
                grown[: arr.shape[0]] = arr
                setattr(self, name, grown)
            grown = np.zeros(new_cap, dtype=bool)
            grown[: self.is_leaf.shape[0]] = self.is_leaf
            self.is_leaf = grown
            grown_c = np.zeros(new_cap, dtype=np.int64)
            grown_c[: self.counts.shape[0]] = self.counts
            self.counts = grown_c
        node = self._size
        self._size += 1
        return node

    def rows_of(self, node: int) -> np.ndarray:
        return np.nonzero(self.node_of_row == node)[0]

    def test_rows_of(self, node: int) -> np.ndarray:
        return np.nonzero(self.node_of_test == node)[0]

    def grow(
        self,
        leaf: int,
        var: int,
        cut: float,
        rows: np.ndarray,
        go_left: np.ndarray,
        x_test_col: np.ndarray | None,
    ) -> tuple[int, int]:
        """Split ``leaf`` on (var, cut); returns the new child ids."""
        lid = self._alloc()
        rid = self._alloc()
        for node in (lid, rid):
            self.is_leaf[node] = True
            self.var[node] = -1
            self.left[node] = -1
            self.right[node] = -1
            self.parent[node] = leaf
            self.depth[node] = self.depth[leaf] + 1
            self.mu[node] = self.mu[leaf]
        self.is_leaf[leaf] = False
        self.var[leaf] = var
        self.cut[leaf] = cut
        self.left[leaf] = lid
        self.right[leaf] = rid

        self.node_of_row[rows[go_left]] = lid
        self.node_of_row[rows[~go_left]] = rid
        n_left = int(go_left.sum())
        self.counts[lid] = n_left
        self.counts[rid] = rows.shape[0] - n_left

        if self.node_of_test is not None:
            trows = self.test_rows_of(leaf)
            tmask = x_test_col[trows] <= cut
            self.node_of_test[trows[tmask]] = lid
            self.node_of_test[trows[~tmask]] = rid

        self.leaves.remove(leaf)
        self.leaves.append(lid)
        self.leaves.append(rid)
        self.singly.append(leaf)
        par = self.parent[leaf]
        if par >= 0 and par in self.singly:
            self.singly.remove(par)
        return lid, rid

    def prune(self, node: int) -> None:
        """Collapse ``node``'s two leaf children back into it."""
        lid, rid = int(self.left[node]), int(self.right[node])
        self.node_of_row[self.node_of_row == lid] = node
        self.node_of_row[self.node_of_row == rid] = node
        if self.node_of_test is not None:
            self.node_of_test[self.node_of_test == lid] = node
            self.node_of_test[self.node_of_test == rid] = node
        self.counts[node] = self.counts[lid] + self.counts[rid]
        for child in (lid, rid):
            self.is_leaf[child] = False
            self.parent[child] = -1
            self.leaves.remove(child)
            self._free.append(child)
        self.is_leaf[node] = True
        self.var[node] = -1
        self.left[node] = -1
        self.right[node] = -1
        self.singly.remove(node)
        self.leaves.append(node)
        par = int(self.parent[node])
        if par >= 0:
            sib = int(self.right[par]) if int(self.left[par]) == node else int(self.left[par])
            if self.is_leaf[sib]:
                self.singly.append(par)

    def change(
        self,
        node: int,
        var: int,
        cut: float,
        rows: np.ndarray,
        go_left: np.ndarray,
        x_test_col: np.ndarray | None,
    ) -> None:
        """Replace the split rule of a singly-internal node."""
        lid, rid = int(self.left[node]), int(self.right[node])
        self.var[node] = var
        self.cut[node] = cut
        self.node_of_row[rows[go_left]] = lid
        self.node_of_row[rows[~go_left]] = rid
        n_left = int(go_left.sum())
        self.counts[lid] = n_left
        self.counts[rid] = rows.shape[0] - n_left
        if self.node_of_test is not None:
            trows = np.nonzero(
                (self.node_of_test == lid) | (self.node_of_test == rid)
            )[0]
            tmask = x_test_col[trows] <= cut
            self.node_of_test[trows[tmask]] = lid
            self.node_of_test[trows[~tmask]] = rid

    def alive_nodes(self) -> np.ndarray:
        alive = np.ones(self._size, dtype=bool)
        if self._free:
            alive[self._free] = False
        return np.nonzero(alive)[0]

    def snapshot(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flatten the live tree into local-index arrays for storage.

        Returns (var, cut, left, right, mu) with -1 child links at leaves;
        the root is local index 0.
        """
        ids = self.alive_nodes()
        local = np.full(self._size, -1, dtype=np.int32)
        local[ids] = np.arange(ids.shape[0], dtype=np.int32)
        var = self.var[ids].copy()
        cut = self.cut[ids].copy()
        mu = self.mu[ids].copy()
        left = np.where(self.left[ids] >= 0, local[np.maximum(self.left[ids], 0)], -1).astype(np.int32)
        right = np.where(self.right[ids] >= 0, local[np.maximum(self.right[ids], 0)], -1).astype(np.int32)
        leaf_mask = self.is_leaf[ids]
        var[leaf_mask] = -1
        return var, cut, left, right, mu
