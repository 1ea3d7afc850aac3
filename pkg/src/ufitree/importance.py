"""Feature importance measures: split-improvement, its out-of-sample
corrected variants, and out-of-bag permutation importance."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .forest import Forest
from .tree import Tree, predictive_gini


@dataclass
class ImportanceReport:
    method: str  # "si" | "ufi" | "permutation"
    feature_names: list[str]
    scores: np.ndarray
    skipped_nodes: int = 0
    n_trees: int = 1
    per_tree: np.ndarray | None = field(default=None, repr=False)

    def sd_across_trees(self) -> np.ndarray | None:
        if self.per_tree is None:
            return None
        return self.per_tree.std(axis=0, ddof=1) if len(self.per_tree) > 1 \
            else np.zeros(len(self.scores))

    def to_json(self) -> str:
        return json.dumps({
            "method": self.method,
            "feature_names": self.feature_names,
            "scores": [float(s) for s in self.scores],
            "skipped_nodes": self.skipped_nodes,
            "n_trees": self.n_trees,
        }, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "score", "sd_across_trees"])
        sd = self.sd_across_trees()
        for i, name in enumerate(self.feature_names):
            w.writerow([name, repr(float(self.scores[i])),
                        "" if sd is None else repr(float(sd[i]))])
        return buf.getvalue()


def si_tree(tree: Tree) -> np.ndarray:
    """Per-feature sum of recorded train impurity decreases."""
    scores = np.zeros(tree.n_features)
    for node in tree.internal_nodes():
        scores[node.split.feature] += node.train_decrease
    return scores


def si_forest(forest: Forest) -> ImportanceReport:
    per_tree = np.array([si_tree(t) for t in forest.trees])
    return ImportanceReport(
        method="si",
        feature_names=forest.feature_names or _default_names(forest.n_features),
        scores=per_tree.mean(axis=0),
        n_trees=forest.n_trees,
        per_tree=per_tree,
    )


def _default_names(p: int) -> list[str]:
    return [f"x{j}" for j in range(p)]


def _test_class_counts(tree: Tree, assign, y_test, n_classes):
    counts = {}
    for node_id, idx in assign.items():
        counts[node_id] = np.bincount(y_test[idx], minlength=n_classes)
    return counts


def ufi_tree_classification(tree: Tree, X_test, y_test,
                            per_node: bool = False):
    """Corrected split-improvement for one Gini-grown tree.

    Each internal node contributes its decrease in predictive Gini, where
    node impurities mix training proportions with test proportions routed
    through the same tree.  Nodes with an empty test side contribute 0 and
    are counted as skipped.
    """
    if tree.task != "classification":
        raise ValueError("classification tree required")
    y_test = np.asarray(y_test, dtype=np.int64)
    assign = tree.route(X_test)
    tcounts = _test_class_counts(tree, assign, y_test, tree.n_classes)
    scores = np.zeros(tree.n_features)
    node_terms = {}
    skipped = 0
    for node in tree.internal_nodes():
        cm, cl, cr = (tcounts[node.node_id], tcounts[node.left.node_id],
                      tcounts[node.right.node_id])
        if cm.sum() == 0 or cl.sum() == 0 or cr.sum() == 0:
            skipped += 1
            continue
        hm = predictive_gini(node.class_counts / node.n, cm / cm.sum())
        hl = predictive_gini(node.left.class_counts / node.left.n, cl / cl.sum())
        hr = predictive_gini(node.right.class_counts / node.right.n, cr / cr.sum())
        delta_p = node.weight * hm - (node.left.weight * hl + node.right.weight * hr)
        scores[node.split.feature] += delta_p
        if per_node:
            node_terms[node.node_id] = delta_p
    if per_node:
        return scores, skipped, node_terms
    return scores, skipped


def ufi_tree_regression(tree: Tree, X_test, y_test, per_node: bool = False):
    """Corrected split-improvement for one MSE-grown tree.

    Test impurity at a node is the mean squared deviation of routed test
    targets from that node's training mean; each node contributes its train
    decrease plus the (typically negative) test-side decrease.
    """
    if tree.task != "regression":
        raise ValueError("regression tree required")
    y_test = np.asarray(y_test, dtype=np.float64)
    assign = tree.route(X_test)

    def h_prime(node):
        idx = assign[node.node_id]
        return float(np.sum((y_test[idx] - node.mean) ** 2)) / len(idx)

    scores = np.zeros(tree.n_features)
    node_terms = {}
    skipped = 0
    for node in tree.internal_nodes():
        nm = len(assign[node.node_id])
        nl = len(assign[node.left.node_id])
        nr = len(assign[node.right.node_id])
        if nm == 0 or nl == 0 or nr == 0:
            skipped += 1
            continue
        delta_p = (node.weight * h_prime(node)
                   - (node.left.weight * h_prime(node.left)
                      + node.right.weight * h_prime(node.right)))
        term = node.train_decrease + delta_p
        scores[node.split.feature] += term
        if per_node:
            node_terms[node.node_id] = term
    if per_node:
        return scores, skipped, node_terms
    return scores, skipped


def ufi_tree(tree: Tree, X_test, y_test):
    if tree.task == "classification":
        return ufi_tree_classification(tree, X_test, y_test)
    return ufi_tree_regression(tree, X_test, y_test)


def ufi_forest(forest: Forest, X, y, test: str = "oob",
               X_test=None, y_test=None) -> ImportanceReport:
    """Average per-tree corrected importances over the forest.

    ``test="oob"`` uses each tree's out-of-bag rows of the training data
    (X, y); ``test="explicit"`` evaluates every tree on the supplied test set.
    """
    if test == "oob":
        if not forest.config.bootstrap:
            raise ValueError("oob mode requires a bootstrap-trained forest")
    elif test == "explicit":
        if X_test is None or y_test is None:
            raise ValueError("explicit mode requires X_test and y_test")
    else:
        raise ValueError(f"unknown test source {test!r}")

    per_tree = np.zeros((forest.n_trees, forest.n_features))
    skipped = 0
    for b, tree in enumerate(forest.trees):
        if test == "oob":
            rows = forest.oob[b]
            xt, yt = np.asarray(X)[rows], np.asarray(y)[rows]
        else:
            xt, yt = X_test, y_test
        scores, sk = ufi_tree(tree, xt, yt)
        per_tree[b] = scores
        skipped += sk
    return ImportanceReport(
        method="ufi",
        feature_names=forest.feature_names or _default_names(forest.n_features),
        scores=per_tree.mean(axis=0),
        skipped_nodes=skipped,
        n_trees=forest.n_trees,
        per_tree=per_tree,
    )


def _loss_per_sample(pred, y, loss: str) -> float:
    if loss == "zero_one":
        return float(np.mean(pred != y))
    if loss == "mse":
        return float(np.mean((pred - y) ** 2))
    raise ValueError(f"unknown loss {loss!r}")


def _tree_perm_increase(tree: Tree, X, y, j: int, perm: np.ndarray, loss: str) -> float:
    """Per-sample loss increase for one tree when column j is permuted by perm."""
    baseline = _loss_per_sample(tree.predict(X), y, loss)
    Xp = np.array(X, copy=True)
    Xp[:, j] = Xp[perm, j]
    return _loss_per_sample(tree.predict(Xp), y, loss) - baseline


def permutation_importance(forest: Forest, X, y, mode: str = "oob_per_tree",
                           loss: str | None = None, rng=None,
                           X_test=None, y_test=None,
                           n_repeats: int = 1) -> ImportanceReport:
    """Mean per-sample loss increase when one feature's values are shuffled.

    ``oob_per_tree`` permutes within each tree's out-of-bag rows and averages
    the per-tree increases; ``test_set`` evaluates the whole forest on an
    explicit test set.
    """
    if loss is None:
        loss = "zero_one" if forest.task == "classification" else "mse"
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    p = forest.n_features
    scores = np.zeros(p)

    if mode == "oob_per_tree":
        if not forest.config.bootstrap:
            raise ValueError("oob mode requires a bootstrap-trained forest")
        per_tree = np.zeros((forest.n_trees, p))
        used = 0
        for b, tree in enumerate(forest.trees):
            rows = forest.oob[b]
            if len(rows) == 0:
                continue
            used += 1
            xo, yo = X[rows], y[rows]
            for j in range(p):
                inc = 0.0
                for _ in range(n_repeats):
                    perm = rng.permutation(len(rows))
                    inc += _tree_perm_increase(tree, xo, yo, j, perm, loss)
                per_tree[b, j] = inc / n_repeats
        if used == 0:
            raise ValueError("no tree has out-of-bag samples")
        scores = per_tree.sum(axis=0) / used
    elif mode == "test_set":
        if X_test is None or y_test is None:
            raise ValueError("test_set mode requires X_test and y_test")
        X_test = np.asarray(X_test, dtype=np.float64)
        y_test = np.asarray(y_test)
        baseline = _loss_per_sample(forest.predict(X_test), y_test, loss)
        per_tree = None
        for j in range(p):
            inc = 0.0
            for _ in range(n_repeats):
                perm = rng.permutation(len(y_test))
                Xp = np.array(X_test, copy=True)
                Xp[:, j] = Xp[perm, j]
                inc += _loss_per_sample(forest.predict(Xp), y_test, loss) - baseline
            scores[j] = inc / n_repeats
    else:
        raise ValueError(f"unknown mode {mode!r}")

    return ImportanceReport(
        method="permutation",
        feature_names=forest.feature_names or _default_names(p),
        scores=scores,
        n_trees=forest.n_trees,
        per_tree=per_tree,
    )
