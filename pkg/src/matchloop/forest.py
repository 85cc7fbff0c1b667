"""A small random forest classifier built from scratch.

Pair match probabilities are the fraction of trees voting "match", so the
forest's granularity is 1/n_trees; probabilities are clamped away from 0
and 1 so that log-based scores stay finite.

The implementation is vectorized for retraining speed: features are binned
once, duplicate binned rows are pooled, every tree is grown level by level
in the same pass, and split search uses per-node class histograms with Gini
impurity.  Bagging is the usual bootstrap (multinomial sample weights per
tree) and each tree draws a random feature subset.
"""

from __future__ import annotations

import numpy as np

PROB_CLAMP = 1e-4


class RandomForestMatcher:
    """Binary classifier over pair feature vectors in [0, 1]."""

    def __init__(self, n_trees: int = 50, max_depth: int = 8, min_leaf: int = 2,
                 seed: int = 0, n_bins: int = 64):
        if n_trees < 1 or max_depth < 1 or min_leaf < 1:
            raise ValueError("n_trees, max_depth, and min_leaf must be positive")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.n_bins = n_bins
        self.n_features: int | None = None
        # Complete-binary-tree arrays, shape (n_trees, 2^(max_depth+1) - 1).
        self._feat: np.ndarray | None = None
        self._thr: np.ndarray | None = None
        self._is_leaf: np.ndarray | None = None
        self._vote: np.ndarray | None = None
        # Vote-count lookup table over bin space, built lazily when the
        # feature count is small; prediction is then a single gather.
        self._table: np.ndarray | None = None
        self._predict_calls = 0

    # -- training ----------------------------------------------------------

    def _bin(self, X: np.ndarray) -> np.ndarray:
        b = np.floor(np.asarray(X, dtype=np.float64) * self.n_bins).astype(np.int64)
        return np.clip(b, 0, self.n_bins - 1)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestMatcher":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("X must be (n, f) with matching non-empty y")
        n, f = X.shape
        self.n_features = f
        T, B, D = self.n_trees, self.n_bins, self.max_depth
        n_nodes = (1 << (D + 1)) - 1
        rng = np.random.default_rng(self.seed)
        weights = rng.multinomial(n, np.full(n, 1.0 / n), size=T).astype(np.float64)
        m = max(1, int(round(np.sqrt(f))))
        feat_allowed = np.zeros((T, f), dtype=bool)
        for t in range(T):
            feat_allowed[t, rng.choice(f, size=m, replace=False)] = True

        Xb = self._bin(X)
        # Samples with identical binned rows route identically through every
        # tree, so they are pooled up front: per (tree, row) the bootstrap
        # weight and the positive weight.  Both are integer-valued, so the
        # pooled histogram sums below are exact and every split decision
        # matches the unpooled computation.
        Xg, row_of = np.unique(Xb, axis=0, return_inverse=True)
        row_of = row_of.reshape(-1)
        R = Xg.shape[0]
        flat = (np.arange(T)[:, None] * R + row_of[None, :]).ravel()
        w_pool = np.bincount(flat, weights=weights.ravel(),
                             minlength=T * R).reshape(T, R)
        wy_pool = np.bincount(flat, weights=(weights * y).ravel(),
                              minlength=T * R).reshape(T, R)

        self._table = None
        self._predict_calls = 0
        self._feat = np.full((T, n_nodes), -1, dtype=np.int16)
        self._thr = np.full((T, n_nodes), -1, dtype=np.int16)
        self._is_leaf = np.zeros((T, n_nodes), dtype=bool)
        self._vote = np.zeros((T, n_nodes), dtype=np.int8)

        # Flattened view of the active (tree, row group) assignments; only
        # split nodes carry groups forward, so work shrinks as leaves close.
        act_t, act_i = np.nonzero(w_pool > 0)
        node = np.zeros(act_t.shape[0], dtype=np.int64)
        w_act = w_pool[act_t, act_i]
        wy_act = wy_pool[act_t, act_i]

        for depth in range(D + 1):
            if act_t.size == 0:
                break
            n_level = 1 << depth
            off = n_level - 1
            # Compact the occupied (tree, node) slots so histogram size tracks
            # the real frontier instead of the full 2^depth level.
            key = act_t * n_level + node
            present = np.zeros(T * n_level, dtype=bool)
            present[key] = True
            uniq = np.flatnonzero(present)
            U = uniq.shape[0]
            inv = np.searchsorted(uniq, key)
            u_tree = uniq // n_level
            u_node = uniq % n_level
            size = U * f * B
            idx = (inv[:, None] * (f * B) + np.arange(f) * B + Xg[act_i]).ravel()
            tot = np.bincount(idx, weights=np.repeat(w_act, f),
                              minlength=size).reshape(U, f, B)
            pos = np.bincount(idx, weights=np.repeat(wy_act, f),
                              minlength=size).reshape(U, f, B)
            n_tot = tot[:, 0, :].sum(axis=-1)  # per-node totals, same for every feature
            n_pos = pos[:, 0, :].sum(axis=-1)

            if depth == D:
                split_ok = np.zeros(U, dtype=bool)
            else:
                blocked = (n_tot < 2 * self.min_leaf) | (n_pos == 0) | (n_pos == n_tot)
                left_tot = np.cumsum(tot, axis=-1)[..., :-1]   # left = bin <= b
                left_pos = np.cumsum(pos, axis=-1)[..., :-1]
                right_tot = n_tot[:, None, None] - left_tot
                right_pos = n_pos[:, None, None] - left_pos
                with np.errstate(divide="ignore", invalid="ignore"):
                    gini = (2.0 * left_pos * (left_tot - left_pos) / left_tot
                            + 2.0 * right_pos * (right_tot - right_pos) / right_tot)
                invalid = ((left_tot < self.min_leaf) | (right_tot < self.min_leaf)
                           | ~feat_allowed[u_tree][:, :, None])
                gini = np.where(invalid, np.inf, gini)
                flat = gini.reshape(U, f * (B - 1))
                best = np.argmin(flat, axis=-1)
                best_gini = flat[np.arange(U), best]
                parent_gini = 2.0 * n_pos * (n_tot - n_pos) / np.maximum(n_tot, 1.0)
                split_ok = (~blocked & np.isfinite(best_gini)
                            & (best_gini < parent_gini - 1e-12))
                best_feat = (best // (B - 1)).astype(np.int16)
                best_bin = (best % (B - 1)).astype(np.int16)

            leaf_u = ~split_ok
            g = off + u_node
            self._is_leaf[u_tree[leaf_u], g[leaf_u]] = True
            self._vote[u_tree[leaf_u], g[leaf_u]] = (
                2 * n_pos[leaf_u] > n_tot[leaf_u]).astype(np.int8)
            if split_ok.any():
                self._feat[u_tree[split_ok], g[split_ok]] = best_feat[split_ok]
                self._thr[u_tree[split_ok], g[split_ok]] = best_bin[split_ok]
                # Route samples sitting in split nodes down to their children.
                keep = split_ok[inv]
                ft = best_feat[inv[keep]]
                goes_right = Xg[act_i[keep], ft] > best_bin[inv[keep]]
                node = node[keep] * 2 + goes_right
                act_t, act_i = act_t[keep], act_i[keep]
                w_act, wy_act = w_act[keep], wy_act[keep]
            else:
                break
        return self

    # -- prediction --------------------------------------------------------

    def _walk_votes(self, Xb: np.ndarray) -> np.ndarray:
        """Total match votes per row of binned features, by tree traversal."""
        T = self.n_trees
        m = Xb.shape[0]
        n_nodes = self._feat.shape[1]
        feat = self._feat.ravel()
        thr = self._thr.ravel()
        is_leaf = self._is_leaf.ravel()
        vote = self._vote.ravel()
        Xf = np.ascontiguousarray(Xb.T).ravel()  # feature-major sample values
        base = (np.arange(T)[:, None] * n_nodes + np.zeros(m, dtype=np.int64)).ravel()
        node = np.zeros(T * m, dtype=np.int64)
        samp = np.tile(np.arange(m), T)
        votes = np.zeros(T * m, dtype=np.int8)
        live = np.arange(T * m)
        for depth in range(self.max_depth + 1):
            g = base[live] + (1 << depth) - 1 + node[live]
            leaf_here = is_leaf[g]
            hit = live[leaf_here]
            votes[hit] = vote[g[leaf_here]]
            live = live[~leaf_here]
            if depth == self.max_depth or live.size == 0:
                break
            g = g[~leaf_here]
            xv = Xf[feat[g] * m + samp[live]]
            node[live] = node[live] * 2 + (xv > thr[g])
        return votes.reshape(T, m).sum(axis=0, dtype=np.int64)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting match, clamped to (0, 1) exclusive."""
        if self._feat is None:
            raise RuntimeError("model is not trained")
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            return np.zeros(0)
        Xb = self._bin(X)
        # Trees only test binned values, so for small feature counts the
        # whole forest collapses into one vote table over the bin grid.
        # Building it costs a grid-sized walk, which only pays off for a
        # model that is queried more than once (or an outsized batch), so
        # the first call on a fresh model walks directly.
        grid_size = self.n_bins ** self.n_features if self.n_features <= 4 else None
        build = grid_size is not None and (
            self._predict_calls >= 1 or X.shape[0] >= grid_size)
        if grid_size is not None and (self._table is not None or build):
            if self._table is None:
                grid = np.indices((self.n_bins,) * self.n_features)
                grid = grid.reshape(self.n_features, -1).T
                self._table = self._walk_votes(grid).reshape(
                    (self.n_bins,) * self.n_features).astype(np.int16)
            votes = self._table[tuple(Xb[:, j] for j in range(self.n_features))]
        else:
            votes = self._walk_votes(Xb)
        self._predict_calls += 1
        p = votes / self.n_trees
        return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)

    # -- serialization -----------------------------------------------------

    def _node_to_json(self, t: int, g: int) -> dict:
        if self._is_leaf[t, g]:
            return {"vote": int(self._vote[t, g])}
        return {
            "feature": int(self._feat[t, g]),
            "bin": int(self._thr[t, g]),
            "left": self._node_to_json(t, 2 * g + 1),
            "right": self._node_to_json(t, 2 * g + 2),
        }

    def to_json(self) -> dict:
        if self._feat is None:
            raise RuntimeError("model is not trained")
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "n_bins": self.n_bins,
            "n_features": self.n_features,
            "trees": [self._node_to_json(t, 0) for t in range(self.n_trees)],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RandomForestMatcher":
        model = cls(n_trees=doc["n_trees"], max_depth=doc["max_depth"],
                    min_leaf=doc["min_leaf"], seed=doc["seed"], n_bins=doc["n_bins"])
        model.n_features = doc["n_features"]
        D = model.max_depth
        n_nodes = (1 << (D + 1)) - 1
        T = model.n_trees
        model._feat = np.full((T, n_nodes), -1, dtype=np.int16)
        model._thr = np.full((T, n_nodes), -1, dtype=np.int16)
        model._is_leaf = np.zeros((T, n_nodes), dtype=bool)
        model._vote = np.zeros((T, n_nodes), dtype=np.int8)

        def walk(t: int, g: int, node: dict) -> None:
            if "vote" in node:
                model._is_leaf[t, g] = True
                model._vote[t, g] = node["vote"]
                return
            model._feat[t, g] = node["feature"]
            model._thr[t, g] = node["bin"]
            walk(t, 2 * g + 1, node["left"])
            walk(t, 2 * g + 2, node["right"])

        for t, tree in enumerate(doc["trees"]):
            walk(t, 0, tree)
        return model
