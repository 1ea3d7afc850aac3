"""Bagged tree ensembles with per-tree bootstrap and out-of-bag bookkeeping."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .tree import Tree, TreeConfig, grow

FORMAT_VERSION = "ufiforest/1"


@dataclass
class ForestConfig:
    n_trees: int = 100
    tree: TreeConfig = field(default_factory=TreeConfig)
    bootstrap: bool = True
    seed: int = 0
    # None picks the task default: sqrt(p) for classification, all for regression
    max_features: object = None

    def resolved_tree_config(self, task: str) -> TreeConfig:
        cfg = TreeConfig(
            criterion=self.tree.criterion,
            max_depth=self.tree.max_depth,
            min_samples_split=self.tree.min_samples_split,
            min_samples_leaf=self.tree.min_samples_leaf,
            max_features=self.tree.max_features,
            seed=self.tree.seed,
        )
        if self.max_features is not None:
            cfg.max_features = self.max_features
        elif cfg.max_features == "all" and task == "classification":
            cfg.max_features = "sqrt"
        return cfg

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "criterion": self.tree.criterion,
            "max_depth": self.tree.max_depth,
            "min_samples_split": self.tree.min_samples_split,
            "min_samples_leaf": self.tree.min_samples_leaf,
            "max_features": self.tree.max_features
            if isinstance(self.tree.max_features, (str, int, float))
            else str(self.tree.max_features),
        }


class Forest:
    """B grown trees plus their in-bag multisets and out-of-bag index lists."""

    def __init__(self, trees, in_bag, oob, task, n_classes, n_features,
                 config, feature_names=None):
        self.trees: list[Tree] = trees
        self.in_bag: list[np.ndarray] = in_bag
        self.oob: list[np.ndarray] = oob
        self.task = task
        self.n_classes = n_classes
        self.n_features = n_features
        self.config = config
        self.feature_names = feature_names

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification forest")
        acc = np.zeros((np.asarray(X).shape[0], self.n_classes))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / self.n_trees

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.task == "classification":
            # argmax breaks ties toward the smaller class index
            return np.argmax(self.predict_proba(X), axis=1)
        acc = np.zeros(np.asarray(X).shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / self.n_trees

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "task": self.task,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "config": self.config.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
            "in_bag": [b.tolist() for b in self.in_bag],
            "oob": [o.tolist() for o in self.oob],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format: {d.get('version')!r}")
        c = d["config"]
        config = ForestConfig(
            n_trees=c["n_trees"],
            tree=TreeConfig(
                criterion=c["criterion"],
                max_depth=c["max_depth"],
                min_samples_split=c["min_samples_split"],
                min_samples_leaf=c["min_samples_leaf"],
                max_features=c["max_features"],
            ),
            bootstrap=c["bootstrap"],
            seed=c["seed"],
        )
        trees = [Tree.from_dict(td) for td in d["trees"]]
        in_bag = [np.array(b, dtype=np.intp) for b in d["in_bag"]]
        oob = [np.array(o, dtype=np.intp) for o in d["oob"]]
        return cls(trees, in_bag, oob, d["task"], d["n_classes"],
                   d["n_features"], config, d.get("feature_names"))


def bootstrap_indices(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw n rows with replacement; OOB is the complement of the drawn set."""
    if n < 1:
        raise ValueError("n must be >= 1")
    in_bag = rng.integers(0, n, size=n)
    oob = np.setdiff1d(np.arange(n), in_bag)
    return in_bag, oob


def fit(d: Dataset, config: ForestConfig, n_jobs: int = 1) -> Forest:
    """Fit B trees on bootstrap (or full) samples; deterministic per master seed.

    Per-tree seeds are spawned from the master seed by tree index, so the
    result is independent of execution order and of n_jobs.
    """
    tree_cfg = config.resolved_tree_config(d.task)
    tree_cfg.validate(d.p, d.task)
    master = np.random.SeedSequence(config.seed)
    children = master.spawn(config.n_trees)

    def build_one(b: int):
        rng = np.random.default_rng(children[b])
        if config.bootstrap:
            in_bag, oob = bootstrap_indices(d.n, rng)
        else:
            in_bag, oob = np.arange(d.n), np.empty(0, dtype=np.intp)
        tree = grow(d.X, d.y, in_bag, tree_cfg, d.task, d.n_classes, rng=rng)
        return tree, in_bag, oob

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(build_one, range(config.n_trees)))
    else:
        results = [build_one(b) for b in range(config.n_trees)]

    trees = [r[0] for r in results]
    in_bag = [r[1] for r in results]
    oob = [r[2] for r in results]
    return Forest(trees, in_bag, oob, d.task, d.n_classes, d.p, config,
                  feature_names=list(d.feature_names))
