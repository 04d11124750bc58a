"""CART random forest (Gini) and second-order gradient-boosted trees on small dense features.

Trees are stored as flat node arrays so they serialize to JSON directly:
node ``i`` is a leaf when ``feature[i] == -1``; otherwise rows with
``x[feature] <= threshold`` go to ``left[i]`` and the rest to ``right[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingleClassData

LEAF = -1


@dataclass
class Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        return self._add(LEAF, 0.0, value)

    def add_split(self, feature: int, threshold: float) -> int:
        return self._add(feature, threshold, 0.0)

    def _add(self, feature, threshold, value) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=int)
        while True:
            f = feature[node]
            rows = np.nonzero(f != LEAF)[0]
            if rows.size == 0:
                return np.asarray(self.value)[node]
            at = node[rows]
            go_left = X[rows, f[rows]] <= threshold[at]
            node[rows] = np.where(go_left, left[at], right[at])

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": self.value}

    @classmethod
    def from_dict(cls, obj: dict) -> "Tree":
        tree = cls(list(map(int, obj["feature"])), list(map(float, obj["threshold"])),
                   list(map(int, obj["left"])), list(map(int, obj["right"])),
                   list(map(float, obj["value"])))
        n = len(tree.feature)
        if not n or any(len(getattr(tree, k)) != n for k in ("threshold", "left", "right", "value")):
            raise ValueError("malformed tree node arrays")
        return tree


@dataclass
class TreeEnsemble:
    kind: str
    trees: list[Tree]
    learning_rate: float = 1.0
    base_score: float = 0.0
    n_features: int = 5
    config: dict = field(default_factory=dict)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "random_forest":
            return np.mean([t.predict(X) for t in self.trees], axis=0)
        if self.kind == "gradient_boosted":
            return _sigmoid(self.margin(X))
        raise ValueError(f"unknown ensemble kind {self.kind!r}")

    def margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X)
        return self.base_score + self.learning_rate * total

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "config": self.config,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TreeEnsemble":
        trees = [Tree.from_dict(t) for t in obj["trees"]]
        if not trees:
            raise ValueError("ensemble has no trees")
        return cls(obj["kind"], trees, float(obj["learning_rate"]), float(obj["base_score"]),
                   int(obj["n_features"]), dict(obj.get("config", {})))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _check_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
    if y.size < 2 or np.unique(y).size < 2:
        raise SingleClassData("training data must contain both classes")
    return X, y


def _candidate_splits(col: np.ndarray):
    """Sort order, sorted values and positions where the value changes."""
    order = np.argsort(col, kind="stable")
    values = col[order]
    cut = np.nonzero(values[1:] > values[:-1])[0]  # split after sorted index `cut`
    return order, values, cut


# ---------------------------------------------------------------- random forest

def _best_gini_split(X, y, features, min_leaf):
    n = y.size
    parent_pos = y.sum()
    best = None  # (weighted impurity, feature, threshold)
    for f in features:
        order, values, cut = _candidate_splits(X[:, f])
        if cut.size == 0:
            continue
        pos_left = np.cumsum(y[order])[cut]
        n_left = cut + 1
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        pos_right = parent_pos - pos_left
        # n * weighted gini = n_left*(1 - pl^2 - ql^2) + ...; compared via the
        # equivalent sum of per-child 2*pos*neg/n_child
        impurity = (2.0 * pos_left * (n_left - pos_left) / n_left
                    + 2.0 * pos_right * (n_right - pos_right) / n_right)
        impurity = np.where(ok, impurity, np.inf)
        j = int(np.argmin(impurity))
        if best is None or impurity[j] < best[0]:
            threshold = 0.5 * (values[cut[j]] + values[cut[j] + 1])
            best = (float(impurity[j]), int(f), float(threshold))
    return best


def _grow_cart(X, y, depth, max_depth, min_leaf, features_per_split, rng, tree):
    n = y.size
    pos = int(y.sum())
    node_impurity = 2.0 * pos * (n - pos) / n
    if depth >= max_depth or pos in (0, n) or n < 2 * min_leaf:
        return tree.add_leaf(pos / n)
    features = np.sort(rng.choice(X.shape[1], size=min(features_per_split, X.shape[1]),
                                  replace=False))
    split = _best_gini_split(X, y, features, min_leaf)
    if split is None or split[0] >= node_impurity:
        return tree.add_leaf(pos / n)
    _, f, threshold = split
    node = tree.add_split(f, threshold)
    mask = X[:, f] <= threshold
    tree.left[node] = _grow_cart(X[mask], y[mask], depth + 1, max_depth, min_leaf,
                                 features_per_split, rng, tree)
    tree.right[node] = _grow_cart(X[~mask], y[~mask], depth + 1, max_depth, min_leaf,
                                  features_per_split, rng, tree)
    return node


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 8
    min_leaf: int = 1
    features_per_split: int = 2
    seed: int = 0


def forest_draws(n_rows: int, config: ForestConfig):
    """Per-tree (bootstrap row indices, feature-sampling seed), drawn from the forest seed."""
    rng = np.random.default_rng(config.seed)
    draws = []
    for _ in range(config.n_trees):
        rows = rng.integers(0, n_rows, size=n_rows)
        draws.append((rows, int(rng.integers(0, 2**63 - 1))))
    return draws


def train_random_forest(X, y, config: ForestConfig | None = None, draws=None) -> TreeEnsemble:
    """Bagged CART classifiers; prediction is the mean leaf class-1 frequency.

    `draws` overrides the bootstrap/feature seeds (see ``forest_draws``).
    """
    config = config or ForestConfig()
    X, y = _check_xy(X, y)
    draws = draws if draws is not None else forest_draws(y.size, config)
    trees = []
    for rows, feature_seed in draws:
        tree = Tree()
        _grow_cart(X[rows], y[rows], 0, config.max_depth, config.min_leaf,
                   config.features_per_split, np.random.default_rng(feature_seed), tree)
        trees.append(tree)
    return TreeEnsemble("random_forest", trees, n_features=X.shape[1],
                        config=dict(vars(config)))


# ------------------------------------------------------------- gradient boosting

@dataclass
class BoostConfig:
    rounds: int = 100
    depth: int = 3
    eta: float = 0.1
    lam: float = 1.0
    min_child_weight: float = 1.0
    base_score: float = 0.0
    seed: int = 0


def _leaf_weight(G, H, lam):
    return -G / (H + lam)


def _best_gain_split(X, g, h, lam, min_child_weight):
    G, H = g.sum(), h.sum()
    parent = G * G / (H + lam)
    best = None  # (gain, feature, threshold)
    for f in range(X.shape[1]):
        order, values, cut = _candidate_splits(X[:, f])
        if cut.size == 0:
            continue
        GL = np.cumsum(g[order])[cut]
        HL = np.cumsum(h[order])[cut]
        GR, HR = G - GL, H - HL
        gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - parent)
        ok = (HL >= min_child_weight) & (HR >= min_child_weight)
        gain = np.where(ok, gain, -np.inf)
        j = int(np.argmax(gain))
        if gain[j] > 0 and (best is None or gain[j] > best[0]):
            threshold = 0.5 * (values[cut[j]] + values[cut[j] + 1])
            best = (float(gain[j]), f, float(threshold))
    return best


def _grow_boost(X, g, h, depth, config, tree):
    if depth < config.depth:
        split = _best_gain_split(X, g, h, config.lam, config.min_child_weight)
        if split is not None:
            _, f, threshold = split
            node = tree.add_split(f, threshold)
            mask = X[:, f] <= threshold
            tree.left[node] = _grow_boost(X[mask], g[mask], h[mask], depth + 1, config, tree)
            tree.right[node] = _grow_boost(X[~mask], g[~mask], h[~mask], depth + 1, config, tree)
            return node
    return tree.add_leaf(_leaf_weight(g.sum(), h.sum(), config.lam))


def logistic_loss(y, margin) -> float:
    # log(1 + e^m) - y m, computed stably
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def train_gbt(X, y, config: BoostConfig | None = None) -> TreeEnsemble:
    """Newton boosting on logistic loss with leaf weights -G/(H + lambda)."""
    config = config or BoostConfig()
    X, y = _check_xy(X, y)
    margin = np.full(y.size, config.base_score)
    trees = []
    for _ in range(config.rounds):
        p = _sigmoid(margin)
        g, h = p - y, p * (1.0 - p)
        tree = Tree()
        _grow_boost(X, g, h, 0, config, tree)
        trees.append(tree)
        margin = margin + config.eta * tree.predict(X)
    return TreeEnsemble("gradient_boosted", trees, learning_rate=config.eta,
                        base_score=config.base_score, n_features=X.shape[1],
                        config=dict(vars(config)))
