"""Axis-aligned CART partitions grown on a class-labeled sample.

Splits minimize weighted child impurity (gini by default, entropy as an
option) over an exhaustive scan of candidate thresholds, which sit at
midpoints between adjacent distinct sorted values. A node splits only
when the best split strictly decreases impurity and leaves at least
``min_leaf_size`` rows on each side. Ties between equally good splits
resolve to the lowest feature index, then the smallest threshold, so a
refit under permuted row order reproduces the same tree.

Per-node candidate features are drawn without replacement from a stream
derived from the fitting seed. By default every feature is a candidate:
restricting candidates is a variance-reduction trick for classification
accuracy, but for entropy estimation it dilutes leaf posteriors toward
the class marginal whenever informative dimensions are sparse, which
inflates conditional-entropy estimates in high dimension. Set
``n_candidate_features`` explicitly to get classic random-subspace
behavior. The hot loops live in :mod:`uforest.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .rng import generator

__all__ = ["TreeParams", "TreePartition", "fit_tree", "leaf_of"]

_FORMAT = "uforest-tree"
_VERSION = 1

IMPURITY_CODES = {"gini": kernels.GINI, "entropy": kernels.ENTROPY}


@dataclass(frozen=True)
class TreeParams:
    """Growth parameters shared by every tree in a forest.

    ``min_leaf_size=None`` resolves per fit to ceil(2 * sqrt(m)) rows,
    m being the fitting sample size. Leaves that shallow-grow this way
    keep enough voting mass per leaf for frequency estimates to be
    stable while still shrinking leaf cells as the sample grows; a
    fixed floor of 1 purifies the tree and is only the right choice
    when leaf frequencies are not the quantity of interest.
    """

    min_leaf_size: int | None = None
    impurity: str = "gini"
    max_depth: int | None = None
    n_candidate_features: int | None = None

    def __post_init__(self):
        if self.min_leaf_size is not None and self.min_leaf_size < 1:
            raise ConfigError("min_leaf_size must be >= 1 when set")
        if self.impurity not in IMPURITY_CODES:
            raise ConfigError(f"impurity must be one of {sorted(IMPURITY_CODES)}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when set")
        if self.n_candidate_features is not None and self.n_candidate_features < 1:
            raise ConfigError("n_candidate_features must be >= 1 when set")

    def resolve_mtry(self, d: int) -> int:
        if self.n_candidate_features is not None:
            return min(self.n_candidate_features, d)
        return d

    def resolve_min_leaf(self, m: int) -> int:
        if self.min_leaf_size is not None:
            return self.min_leaf_size
        return max(1, int(math.ceil(2.0 * math.sqrt(m))))


@dataclass(frozen=True)
class TreePartition:
    """A fitted tree. Nodes are preorder; leaves numbered in visit order.

    ``feature[i] == -1`` marks a leaf, whose position among the leaves
    is ``leaf_index[i]``. ``node_count`` and ``node_impurity`` record
    the partition rows reaching each node and the node impurity at fit
    time, for diagnostics and the exhaustive-oracle checks.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_count: np.ndarray
    node_impurity: np.ndarray
    leaf_index: np.ndarray
    n_features: int
    params: TreeParams = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index in 0..n_leaves-1 for every row of X."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"expected a 2-d matrix with {self.n_features} columns")
        nodes = kernels.apply_tree(self.feature, self.threshold, self.left,
                                   self.right, X)
        return self.leaf_index[nodes]

    def to_dict(self) -> dict:
        return {
            "format": _FORMAT,
            "version": _VERSION,
            "n_features": self.n_features,
            "params": {
                "min_leaf_size": self.params.min_leaf_size,
                "impurity": self.params.impurity,
                "max_depth": self.params.max_depth,
                "n_candidate_features": self.params.n_candidate_features,
            },
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "node_count": self.node_count.tolist(),
            "node_impurity": self.node_impurity.tolist(),
            "leaf_index": self.leaf_index.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreePartition":
        if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
            raise DataError("not a tree document")
        if doc.get("version") != _VERSION:
            raise DataError(f"unsupported tree document version {doc.get('version')!r}")
        try:
            params = TreeParams(**doc["params"])
            tree = cls(
                feature=np.asarray(doc["feature"], np.int64),
                threshold=np.asarray(doc["threshold"], np.float64),
                left=np.asarray(doc["left"], np.int64),
                right=np.asarray(doc["right"], np.int64),
                node_count=np.asarray(doc["node_count"], np.int64),
                node_impurity=np.asarray(doc["node_impurity"], np.float64),
                leaf_index=np.asarray(doc["leaf_index"], np.int64),
                n_features=int(doc["n_features"]),
                params=params,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"corrupt tree document: {exc}") from exc
        n = tree.n_nodes
        shapes = {len(tree.threshold), len(tree.left), len(tree.right),
                  len(tree.node_count), len(tree.node_impurity),
                  len(tree.leaf_index)}
        if n == 0 or shapes != {n}:
            raise DataError("corrupt tree document: inconsistent node arrays")
        internal = tree.feature >= 0
        kids = np.concatenate([tree.left[internal], tree.right[internal]])
        if internal.any() and (kids.min() < 1 or kids.max() >= n):
            raise DataError("corrupt tree document: child index out of range")
        return tree


def fit_tree(features: np.ndarray, labels: np.ndarray, n_classes: int,
             params: TreeParams, seed: int) -> TreePartition:
    """Grow one partition on the given rows.

    The candidate-feature stream is derived from (seed, "candidates");
    everything else is deterministic in the data, so refitting with the
    same seed reproduces the tree exactly regardless of the kernel
    backend or thread count.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if X.ndim != 2:
        raise DataError("features must be a 2-d matrix")
    m, d = X.shape
    if m < 1 or d < 1:
        raise DataError("cannot fit a tree on an empty sample")
    if y.shape != (m,):
        raise DataError("labels must have one entry per row")
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError(f"label codes must be dense in 0..{n_classes - 1}")

    mtry = params.resolve_mtry(d)
    max_nodes = 2 * m + 1
    if mtry == d:
        candidates = np.tile(np.arange(d, dtype=np.int64), (max_nodes, 1))
    else:
        u = generator(seed, "candidates").random((max_nodes, d))
        candidates = np.sort(np.argsort(u, axis=1)[:, :mtry], axis=1).astype(np.int64)
        candidates = np.ascontiguousarray(candidates)

    max_depth = np.int64(params.max_depth) if params.max_depth is not None \
        else kernels.NO_MAX_DEPTH
    impurity_code = IMPURITY_CODES[params.impurity]
    xlogx = kernels.xlogx_table(m if impurity_code == kernels.ENTROPY else 0)

    out = kernels.grow_tree(X, y, np.int64(n_classes),
                            np.int64(params.resolve_min_leaf(m)), max_depth,
                            np.int64(impurity_code), candidates, xlogx)
    (feature, threshold, left, right, node_count, node_impurity,
     leaf_idx, n_nodes, _) = out
    n_nodes = int(n_nodes)
    return TreePartition(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        node_count=node_count[:n_nodes].copy(),
        node_impurity=node_impurity[:n_nodes].copy(),
        leaf_index=leaf_idx[:n_nodes].copy(),
        n_features=d,
        params=params,
    )


def leaf_of(tree: TreePartition, x: np.ndarray) -> int:
    """Leaf index for a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("expected a single point")
    return int(tree.apply(x[None, :])[0])
