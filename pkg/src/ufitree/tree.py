"""Single CART-style tree: impurity, best-split search, growth, routing, prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLS_CRITERIA = ("gini", "entropy", "misclassification")
REG_CRITERIA = ("mse", "mae")

# Gains at or below this are treated as zero (no admissible improvement).
GAIN_EPS = 1e-12

# Candidate losses within this relative tolerance of the minimum count as
# tied; ties resolve to the smallest feature index, then smallest threshold.
# Needed because distinct candidates can induce the same partition (e.g. one
# mirrored left/right) whose mathematically equal losses differ in the last
# floating-point bits.
LOSS_TIE_TOL = 1e-9

FORMAT_VERSION = "ufitree/1"


@dataclass(frozen=True)
class Split:
    """Axis-aligned split: rows with x[feature] <= threshold go left."""

    feature: int
    threshold: float


@dataclass
class TreeConfig:
    criterion: str = "gini"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: object = "all"  # "all" | "sqrt" | int count | float fraction
    seed: int = 0

    def validate(self, p: int, task: str):
        valid = CLS_CRITERIA if task == "classification" else REG_CRITERIA
        if self.criterion not in valid:
            raise ValueError(f"criterion {self.criterion!r} not valid for {task}")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_split >= 2 and min_samples_leaf >= 1 required")
        if isinstance(self.max_features, int) and not isinstance(self.max_features, bool):
            if not 1 <= self.max_features <= p:
                raise ValueError("max_features count must be in [1, p]")
        elif isinstance(self.max_features, float):
            if not 0.0 < self.max_features <= 1.0:
                raise ValueError("max_features fraction must be in (0, 1]")
        elif self.max_features not in ("all", "sqrt"):
            raise ValueError(f"bad max_features: {self.max_features!r}")


def resolve_max_features(max_features, p: int) -> int:
    if max_features == "all":
        return p
    if max_features == "sqrt":
        return max(1, int(np.sqrt(p)))
    if isinstance(max_features, float):
        return max(1, int(max_features * p))
    return int(max_features)


def gini_from_counts(counts: np.ndarray) -> float:
    props = counts / counts.sum()
    return predictive_gini(props, props)


def predictive_gini(p_train: np.ndarray, p_test: np.ndarray) -> float:
    """Gini evaluated with train/test proportions mixed: 1 - sum_k p_k p'_k."""
    return 1.0 - float(np.dot(p_train, p_test))


def impurity_from_counts(counts: np.ndarray, criterion: str) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n <= 0:
        raise ValueError("empty node has no impurity")
    p = counts / n
    if criterion == "gini":
        return predictive_gini(p, p)
    if criterion == "entropy":
        nz = p[p > 0]
        return float(-(nz * np.log(nz)).sum())
    if criterion == "misclassification":
        return 1.0 - float(p.max())
    raise ValueError(f"not a classification criterion: {criterion!r}")


def impurity_from_values(y: np.ndarray, criterion: str) -> float:
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("empty node has no impurity")
    if criterion == "mse":
        return float(np.sum((y - y.mean()) ** 2)) / len(y)
    if criterion == "mae":
        return float(np.abs(y - np.median(y)).mean())
    raise ValueError(f"not a regression criterion: {criterion!r}")


def candidate_thresholds(values: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct sorted values."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return np.empty(0)
    return (values[:-1] + values[1:]) / 2.0


class TreeNode:
    """One node; internal nodes carry a split and the recorded train decrease."""

    __slots__ = (
        "node_id", "n", "weight", "class_counts", "mean", "impurity",
        "split", "train_decrease", "left", "right",
    )

    def __init__(self, node_id, n, weight, class_counts, mean, impurity):
        self.node_id = node_id
        self.n = n
        self.weight = weight
        self.class_counts = class_counts  # classification only
        self.mean = mean                  # regression only
        self.impurity = impurity
        self.split = None
        self.train_decrease = 0.0
        self.left = None
        self.right = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


class Tree:
    """A grown tree over a fixed feature space."""

    def __init__(self, root, n_features, n_root, task, n_classes, config):
        self.root = root
        self.n_features = n_features
        self.n_root = n_root
        self.task = task
        self.n_classes = n_classes
        self.config = config

    def nodes(self):
        """Preorder traversal (node_id order)."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def internal_nodes(self):
        return (nd for nd in self.nodes() if not nd.is_leaf)

    def n_nodes(self) -> int:
        return sum(1 for _ in self.nodes())

    def route(self, X: np.ndarray) -> dict[int, np.ndarray]:
        """Assign every row to the nodes along its root-to-leaf path.

        Returns node_id -> row indices (in traversal-stable order).
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape}")
        assign: dict[int, np.ndarray] = {}
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            assign[node.node_id] = idx
            if not node.is_leaf:
                mask = X[idx, node.split.feature] <= node.split.threshold
                stack.append((node.right, idx[~mask]))
                stack.append((node.left, idx[mask]))
        return assign

    def apply(self, X: np.ndarray) -> list[TreeNode]:
        """Leaf reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        leaves = [None] * X.shape[0]
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                for i in idx:
                    leaves[i] = node
            else:
                mask = X[idx, node.split.feature] <= node.split.threshold
                stack.append((node.right, idx[~mask]))
                stack.append((node.left, idx[mask]))
        return leaves

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification tree")
        leaves = self.apply(X)
        out = np.empty((len(leaves), self.n_classes))
        for i, leaf in enumerate(leaves):
            out[i] = leaf.class_counts / leaf.n
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        leaves = self.apply(X)
        if self.task == "classification":
            return np.array([int(np.argmax(leaf.class_counts)) for leaf in leaves])
        return np.array([leaf.mean for leaf in leaves])

    def to_dict(self) -> dict:
        nodes = []
        for nd in sorted(self.nodes(), key=lambda nd: nd.node_id):
            nodes.append({
                "id": nd.node_id,
                "n": int(nd.n),
                "weight": nd.weight,
                "class_counts": None if nd.class_counts is None else [int(c) for c in nd.class_counts],
                "mean": nd.mean,
                "impurity": nd.impurity,
                "split": None if nd.is_leaf else {
                    "feature": nd.split.feature,
                    "threshold": nd.split.threshold,
                },
                "train_decrease": nd.train_decrease,
                "left": None if nd.is_leaf else nd.left.node_id,
                "right": None if nd.is_leaf else nd.right.node_id,
            })
        return {
            "version": FORMAT_VERSION,
            "task": self.task,
            "n_features": self.n_features,
            "n_root": self.n_root,
            "n_classes": self.n_classes,
            "criterion": self.config.criterion,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, d: dict, config: TreeConfig | None = None) -> "Tree":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported tree format: {d.get('version')!r}")
        built = {}
        for nd in d["nodes"]:
            node = TreeNode(
                nd["id"], nd["n"], nd["weight"],
                None if nd["class_counts"] is None else np.array(nd["class_counts"], dtype=np.int64),
                nd["mean"], nd["impurity"],
            )
            node.train_decrease = nd["train_decrease"]
            built[nd["id"]] = (node, nd)
        for node, nd in built.values():
            if nd["split"] is not None:
                node.split = Split(nd["split"]["feature"], nd["split"]["threshold"])
                node.left = built[nd["left"]][0]
                node.right = built[nd["right"]][0]
        config = config or TreeConfig(criterion=d["criterion"])
        return cls(built[0][0], d["n_features"], d["n_root"], d["task"],
                   d["n_classes"], config)


def _node_impurity(y_node, class_counts, criterion):
    if criterion in CLS_CRITERIA:
        return impurity_from_counts(class_counts, criterion)
    return impurity_from_values(y_node, criterion)


def _scan_features(X, y, idx, feats, criterion, n_classes, msl):
    """Vectorized scan over candidate features; returns (feature, threshold, loss) or None.

    Loss is the weighted child impurity L(Q, theta) relative to the node.
    Ties resolve to the smallest feature index, then smallest threshold,
    because candidates are scanned feature-major in ascending order.
    """
    n = len(idx)
    sub = X[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="stable")
    sv = np.take_along_axis(sub, order, axis=0)

    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    if criterion in CLS_CRITERIA:
        yk = y[idx]
        # per-class left counts for every (threshold position, feature) pair
        cums = []
        totals = []
        for k in range(n_classes):
            z = (yk == k).astype(np.float64)
            cums.append(np.cumsum(z[order], axis=0)[:-1])
            totals.append(float(z.sum()))
        if criterion == "gini":
            sl = 0.0
            sr = 0.0
            for cum, tot in zip(cums, totals):
                pl = cum / nl
                pr = (tot - cum) / nr
                sl = sl + pl * pl
                sr = sr + pr * pr
            Hl = 1.0 - sl
            Hr = 1.0 - sr
        elif criterion == "entropy":
            Hl = np.zeros((n - 1, len(feats)))
            Hr = np.zeros((n - 1, len(feats)))
            for cum, tot in zip(cums, totals):
                pl = cum / nl
                pr = (tot - cum) / nr
                Hl -= np.where(pl > 0, pl * np.log(np.where(pl > 0, pl, 1.0)), 0.0)
                Hr -= np.where(pr > 0, pr * np.log(np.where(pr > 0, pr, 1.0)), 0.0)
        else:  # misclassification
            maxl = np.zeros((n - 1, len(feats)))
            maxr = np.zeros((n - 1, len(feats)))
            for cum, tot in zip(cums, totals):
                maxl = np.maximum(maxl, cum / nl)
                maxr = np.maximum(maxr, (tot - cum) / nr)
            Hl = 1.0 - maxl
            Hr = 1.0 - maxr
    elif criterion == "mse":
        yv = y[idx].astype(np.float64)
        ys = yv[order]
        cum = np.cumsum(ys, axis=0)[:-1]
        cum2 = np.cumsum(ys * ys, axis=0)[:-1]
        tot = yv.sum()
        tot2 = float(np.dot(yv, yv))
        Hl = np.maximum(cum2 / nl - (cum / nl) ** 2, 0.0)
        Hr = np.maximum((tot2 - cum2) / nr - ((tot - cum) / nr) ** 2, 0.0)
    else:
        return _scan_features_slow(X, y, idx, feats, criterion, msl)

    loss = (nl * Hl + nr * Hr) / n
    valid = sv[1:] > sv[:-1]
    if msl > 1:
        pos = np.arange(1, n)[:, None]
        valid = valid & (pos >= msl) & (n - pos >= msl)
    if not valid.any():
        return None
    loss = np.where(valid, loss, np.inf)
    flat = loss.T.ravel()  # feature-major, thresholds ascending within feature
    m = flat.min()
    # first candidate within tie tolerance of the minimum
    best = int(np.argmax(flat <= m + LOSS_TIE_TOL * max(1.0, abs(m))))
    f_pos, t_pos = divmod(best, n - 1)
    threshold = float((sv[t_pos, f_pos] + sv[t_pos + 1, f_pos]) / 2.0)
    return int(feats[f_pos]), threshold, float(flat[best])


def _scan_features_slow(X, y, idx, feats, criterion, msl):
    """Scalar fallback used for MAE (median-based, not prefix-summable)."""
    n = len(idx)
    cands = []
    for f in feats:
        vals = np.sort(np.unique(X[idx, f]))
        for s in candidate_thresholds(vals):
            mask = X[idx, f] <= s
            nl = int(mask.sum())
            if nl < msl or n - nl < msl:
                continue
            hl = impurity_from_values(y[idx[mask]], criterion)
            hr = impurity_from_values(y[idx[~mask]], criterion)
            cands.append((int(f), float(s), (nl * hl + (n - nl) * hr) / n))
    if not cands:
        return None
    m = min(c[2] for c in cands)
    tol = LOSS_TIE_TOL * max(1.0, abs(m))
    return next(c for c in cands if c[2] <= m + tol)


def best_split(X, y, idx, feats, criterion, n_classes=None,
               min_samples_leaf=1, parent_impurity=None):
    """Best (feature, threshold) over the candidate features, or None.

    Returns (Split, loss) minimizing the weighted child impurity; None when
    no admissible candidate improves on the parent (gain <= GAIN_EPS).
    """
    feats = np.sort(np.asarray(feats, dtype=np.intp))
    if parent_impurity is None:
        if criterion in CLS_CRITERIA:
            counts = np.bincount(y[idx], minlength=n_classes)
            parent_impurity = impurity_from_counts(counts, criterion)
        else:
            parent_impurity = impurity_from_values(y[idx], criterion)
    found = _scan_features(X, y, idx, feats, criterion, n_classes, min_samples_leaf)
    if found is None:
        return None
    f, s, loss = found
    if parent_impurity - loss <= GAIN_EPS:
        return None
    return Split(f, s), loss


def evaluate_split(X, y, idx, split: Split, criterion, n_root,
                   n_classes=None, min_samples_leaf=1):
    """Loss L(Q, theta) and root-weighted decrease for one concrete split.

    Returns (loss, delta) or None when a child would fall below
    min_samples_leaf (the candidate is inadmissible, not an error).
    """
    idx = np.asarray(idx)
    n = len(idx)
    mask = X[idx, split.feature] <= split.threshold
    nl = int(mask.sum())
    nr = n - nl
    if nl < min_samples_leaf or nr < min_samples_leaf:
        return None
    if criterion in CLS_CRITERIA:
        hm = impurity_from_counts(np.bincount(y[idx], minlength=n_classes), criterion)
        hl = impurity_from_counts(np.bincount(y[idx[mask]], minlength=n_classes), criterion)
        hr = impurity_from_counts(np.bincount(y[idx[~mask]], minlength=n_classes), criterion)
    else:
        hm = impurity_from_values(y[idx], criterion)
        hl = impurity_from_values(y[idx[mask]], criterion)
        hr = impurity_from_values(y[idx[~mask]], criterion)
    loss = (nl * hl + nr * hr) / n
    delta = (n / n_root) * hm - ((nl / n_root) * hl + (nr / n_root) * hr)
    return loss, delta


def grow(X, y, indices, config: TreeConfig, task: str,
         n_classes: int | None = None, rng: np.random.Generator | None = None) -> Tree:
    """Grow a tree on the given row indices of (X, y)."""
    X = np.asarray(X, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.intp)
    if len(indices) == 0:
        raise ValueError("cannot grow a tree on an empty index set")
    config.validate(X.shape[1], task)
    if task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    p = X.shape[1]
    k_feats = resolve_max_features(config.max_features, p)
    n_root = len(indices)
    counter = [0]

    def make_node(idx):
        n = len(idx)
        weight = n / n_root
        if task == "classification":
            counts = np.bincount(y[idx], minlength=n_classes)
            imp = impurity_from_counts(counts, config.criterion)
            node = TreeNode(counter[0], n, weight, counts, None, imp)
        else:
            yv = y[idx]
            imp = impurity_from_values(yv, config.criterion)
            node = TreeNode(counter[0], n, weight, None, float(yv.mean()), imp)
        counter[0] += 1
        return node

    def build(idx, depth):
        node = make_node(idx)
        n = len(idx)
        if (config.max_depth is not None and depth >= config.max_depth) \
                or n < config.min_samples_split or node.impurity <= 0.0:
            return node
        feats = np.sort(rng.choice(p, size=k_feats, replace=False)) if k_feats < p \
            else np.arange(p)
        found = best_split(X, y, idx, feats, config.criterion, n_classes,
                           config.min_samples_leaf, parent_impurity=node.impurity)
        if found is None and k_feats < p:
            # drawn subset unsplittable: fall back to scanning all features
            found = best_split(X, y, idx, np.arange(p), config.criterion, n_classes,
                               config.min_samples_leaf, parent_impurity=node.impurity)
        if found is None:
            return node
        split, _ = found
        mask = X[idx, split.feature] <= split.threshold
        node.split = split
        node.left = build(idx[mask], depth + 1)
        node.right = build(idx[~mask], depth + 1)
        # recompute the decrease from node stats so downstream identities are exact
        node.train_decrease = (
            node.weight * node.impurity
            - (node.left.weight * node.left.impurity
               + node.right.weight * node.right.impurity)
        )
        return node

    root = build(indices, 0)
    return Tree(root, p, n_root, task, n_classes, config)
