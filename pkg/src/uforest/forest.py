"""Honest forests with finite-sample-corrected class posteriors.

Each of the B trees draws its own row subsample and splits it into a
partition set, which learns the tree structure, and a voting set, whose
class frequencies in each leaf form the tree posterior. Keeping the two
sets disjoint (``honest=true``) removes the overconfidence of reusing
training rows for frequencies; the finite-sample correction then
replaces zero frequencies in a leaf with ``1/(kappa * N)``, where N is
the leaf's voting count, and renormalizes, which bounds the change to
any leaf row by K/(kappa*N) in max norm while keeping plug-in entropies
away from the degenerate log(0) boundary. ``honest=false`` with
``correction=false`` is the plain CART forest baseline.

Two evaluation modes turn posteriors into a conditional entropy:

* ``tree`` (tree-level, default): every tree also re-draws its own
  held-out evaluation set, computes the mean plug-in entropy of its own
  posterior over it, and the B per-tree entropies are averaged.
* ``forest`` (forest-level): one evaluation set is held out up front,
  posteriors are averaged over trees at each evaluation point, and the
  entropy of the averaged posterior is the estimate.

H(Y) is always the plug-in entropy of the label frequencies over all
labeled rows, and the mutual information estimate is the difference,
reported both raw (which may be slightly negative) and normalized by
H(Y).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .io import LabeledDataset
from .rng import derive_key, generator
from .tree import TreeParams, TreePartition, fit_tree

__all__ = [
    "ForestConfig",
    "TreePosterior",
    "UncertaintyForest",
    "EstimateReport",
    "fit_forest",
    "finite_sample_correct",
    "posterior",
    "conditional_entropy_at",
    "estimate_conditional_entropy",
    "estimate_mutual_information",
    "empirical_entropy",
    "save_forest",
    "load_forest",
]

TREE_LEVEL = "tree"
FOREST_LEVEL = "forest"

_FORMAT = "uforest-forest"
_VERSION = 1

_THREADS_ENV = "UFOREST_THREADS"


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; defaults match the package's uf preset."""

    n_trees: int = 300
    tree: TreeParams = field(default_factory=TreeParams)
    kappa: float = 3.0
    frac_partition: float = 0.4
    frac_vote: float = 0.3
    frac_eval: float = 0.3
    subsample_size: int | None = None
    eval_mode: str = TREE_LEVEL
    honest: bool = True
    correction: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if not (self.kappa > 0.0 and np.isfinite(self.kappa)):
            raise ConfigError("kappa must be a finite value > 0")
        for name in ("frac_partition", "frac_vote", "frac_eval"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.frac_partition <= 0.0:
            raise ConfigError("frac_partition must be > 0")
        if self.honest and self.frac_vote <= 0.0:
            raise ConfigError("frac_vote must be > 0 for an honest forest")
        total = self.frac_partition + self.frac_vote + self.frac_eval
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"fractions must sum to 1, got {total!r}")
        if self.subsample_size is not None and self.subsample_size < 1:
            raise ConfigError("subsample_size must be >= 1 when set")
        if self.eval_mode not in (TREE_LEVEL, FOREST_LEVEL):
            raise ConfigError(f"eval_mode must be {TREE_LEVEL!r} or {FOREST_LEVEL!r}")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "min_leaf_size": self.tree.min_leaf_size,
            "impurity": self.tree.impurity,
            "max_depth": self.tree.max_depth,
            "n_candidate_features": self.tree.n_candidate_features,
            "kappa": self.kappa,
            "frac_partition": self.frac_partition,
            "frac_vote": self.frac_vote,
            "frac_eval": self.frac_eval,
            "subsample_size": self.subsample_size,
            "eval_mode": self.eval_mode,
            "honest": self.honest,
            "correction": self.correction,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestConfig":
        doc = dict(doc)
        tree = TreeParams(
            min_leaf_size=doc.pop("min_leaf_size", None),
            impurity=doc.pop("impurity", "gini"),
            max_depth=doc.pop("max_depth", None),
            n_candidate_features=doc.pop("n_candidate_features", None),
        )
        return cls(tree=tree, **doc)


@dataclass(frozen=True)
class TreePosterior:
    """Per-leaf class rows for one tree.

    Rows of leaves that received no voting points hold ``marginal``, the
    tree's voting-set class frequencies; those rows are not corrected
    because the correction scales with a leaf count they do not have.
    """

    leaf_probs: np.ndarray
    leaf_counts: np.ndarray
    marginal: np.ndarray


@dataclass(frozen=True)
class UncertaintyForest:
    """A fitted forest plus what evaluation needs to stay reproducible."""

    config: ForestConfig
    seed: int
    n_rows: int
    n_classes: int
    label_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    class_counts: np.ndarray
    trees: tuple[TreePartition, ...]
    posteriors: tuple[TreePosterior, ...]
    eval_sets: tuple[np.ndarray, ...] | None
    train_features: np.ndarray | None = field(repr=False, default=None)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _split_sizes(n: int, config: ForestConfig) -> tuple[int, int, int]:
    """(n_eval, subsample size s, partition size within the subsample)."""
    n_eval = _round_half_up(config.frac_eval * n)
    pool = n - n_eval
    need = 2 if config.honest else 1
    if pool < need:
        raise DataError(f"{n} rows leave only {pool} after holding out "
                        f"{n_eval} for evaluation; need at least {need}")
    s = pool if config.subsample_size is None else min(config.subsample_size, pool)
    if s < need:
        raise DataError(f"subsample of {s} rows cannot support an "
                        f"{'honest' if config.honest else 'unsplit'} tree")
    if config.honest:
        fpv = config.frac_partition + config.frac_vote
        n_part = _round_half_up(s * config.frac_partition / fpv)
        n_part = min(max(n_part, 1), s - 1)
    else:
        n_part = s
    return n_eval, s, n_part


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        raw = os.environ.get(_THREADS_ENV, "").strip()
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ConfigError(f"{_THREADS_ENV} must be an integer, got {raw!r}")
        else:
            threads = 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def fit_forest(data: LabeledDataset, config: ForestConfig, seed: int,
               threads: int | None = None) -> UncertaintyForest:
    """Fit B trees with honest splits and per-tree held-out evaluation rows.

    All randomness comes from streams derived from the seed: tree b
    consumes (seed, "tree", b) for its subsample and splits and
    (seed, "fit", b) for its candidate features, and forest-level
    evaluation holds out rows using (seed, "eval"). Results are
    identical for any thread count, which only distributes the
    per-tree work.
    """
    if data.labels is None:
        raise DataError("fitting needs labeled rows")
    k = data.n_classes
    if k < 2 or len(np.unique(data.labels)) < 2:
        raise DataError("fitting needs at least two classes present")
    n = data.n
    n_eval, s, n_part = _split_sizes(n, config)
    x_all = np.ascontiguousarray(data.features)
    y_all = data.labels

    if config.eval_mode == FOREST_LEVEL and n_eval > 0:
        perm = generator(seed, "eval").permutation(n)
        shared_eval = perm[:n_eval]
        shared_pool = perm[n_eval:]
    else:
        shared_eval = None
        shared_pool = None

    def build(b: int):
        gen = generator(seed, "tree", b)
        if shared_pool is None:
            perm = gen.permutation(n)
            eval_idx = perm[:n_eval]
            pool = perm[n_eval:]
        else:
            eval_idx = shared_eval
            pool = gen.permutation(shared_pool)
        sub = pool[:s]
        if config.honest:
            part_idx, vote_idx = sub[:n_part], sub[n_part:]
        else:
            part_idx = vote_idx = sub
        tree = fit_tree(x_all[part_idx], y_all[part_idx], k, config.tree,
                        derive_key(seed, "fit", b))
        n_leaves = tree.n_leaves
        leaves = tree.apply(x_all[vote_idx])
        counts = np.zeros((n_leaves, k), dtype=np.int64)
        np.add.at(counts, (leaves, y_all[vote_idx]), 1)
        leaf_counts = counts.sum(axis=1)
        marginal = np.bincount(y_all[vote_idx], minlength=k).astype(np.float64)
        marginal /= marginal.sum()
        occupied = leaf_counts > 0
        probs = np.tile(marginal, (n_leaves, 1))
        probs[occupied] = counts[occupied] / leaf_counts[occupied, None]
        if config.correction:
            probs = finite_sample_correct(probs, leaf_counts, config.kappa)
        post = TreePosterior(leaf_probs=probs, leaf_counts=leaf_counts,
                             marginal=marginal)
        return tree, post, eval_idx

    threads = _resolve_threads(threads)
    if threads == 1:
        built = [build(b) for b in range(config.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool_:
            built = list(pool_.map(build, range(config.n_trees)))

    if n_eval == 0:
        eval_sets = None
    elif config.eval_mode == FOREST_LEVEL:
        eval_sets = (shared_eval,)
    else:
        eval_sets = tuple(t[2] for t in built)

    return UncertaintyForest(
        config=config,
        seed=seed,
        n_rows=n,
        n_classes=k,
        label_names=data.label_names,
        feature_names=data.feature_names,
        class_counts=np.bincount(y_all, minlength=k).astype(np.int64),
        trees=tuple(t[0] for t in built),
        posteriors=tuple(t[1] for t in built),
        eval_sets=eval_sets,
        train_features=x_all,
    )


def finite_sample_correct(probs: np.ndarray, counts: np.ndarray,
                          kappa: float) -> np.ndarray:
    """Replace zero entries of each leaf row with 1/(kappa*N), renormalize.

    ``probs`` holds one probability row per leaf and ``counts`` the
    leaves' voting counts N. Rows with N == 0 pass through unchanged.
    """
    probs = np.array(probs, dtype=np.float64, copy=True)
    counts = np.asarray(counts)
    if probs.ndim != 2 or counts.shape != (probs.shape[0],):
        raise DataError("expected a row per leaf and one count per row")
    if not (kappa > 0.0 and np.isfinite(kappa)):
        raise ConfigError("kappa must be a finite value > 0")
    zero = (probs == 0.0) & (counts[:, None] > 0)
    rows = zero.any(axis=1)
    if rows.any():
        fill = np.broadcast_to((1.0 / (kappa * np.maximum(counts, 1)))[:, None],
                               probs.shape)
        probs[zero] = fill[zero]
        probs[rows] /= probs[rows].sum(axis=1, keepdims=True)
    return probs


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    t = np.where(p > 0.0, -p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return t.sum(axis=-1)


def _as_eval_matrix(forest: UncertaintyForest, eval_rows) -> np.ndarray:
    if isinstance(eval_rows, LabeledDataset):
        eval_rows = eval_rows.features
    x = np.ascontiguousarray(eval_rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise DataError(f"evaluation rows must be a 2-d matrix with "
                        f"{forest.n_features} columns")
    if not np.isfinite(x).all():
        raise DataError("evaluation rows contain non-finite values")
    if x.shape[0] == 0:
        raise DataError("no evaluation rows")
    return x


def posterior(forest: UncertaintyForest, x: np.ndarray) -> np.ndarray:
    """Class posterior at x: the mean of the per-tree leaf rows."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xm = _as_eval_matrix(forest, x[None, :] if single else x)
    acc = np.zeros((xm.shape[0], forest.n_classes))
    for tree, post in zip(forest.trees, forest.posteriors):
        acc += post.leaf_probs[tree.apply(xm)]
    acc /= len(forest.trees)
    return acc[0] if single else acc


def conditional_entropy_at(forest: UncertaintyForest, x: np.ndarray):
    """Plug-in entropy of the forest posterior at x (pointwise)."""
    p = posterior(forest, x)
    ent = _entropy_rows(p)
    return float(ent) if np.isscalar(ent) or ent.ndim == 0 else ent


@dataclass(frozen=True)
class EstimateReport:
    """One estimator run: point estimates plus reproduction context."""

    estimator: str
    h_y_given_x: float
    h_y: float
    mi: float
    mi_normalized: float
    seed: int
    config: dict
    per_tree_values: tuple[float, ...] | None = None


def _entropy_from_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        raise DataError("no labeled rows")
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def empirical_entropy(labels: np.ndarray, n_classes: int | None = None) -> float:
    """Plug-in entropy of a label vector, in nats."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.size == 0:
        raise DataError("labels must be a non-empty vector")
    if labels.min() < 0:
        raise DataError("label codes must be non-negative")
    counts = np.bincount(labels, minlength=n_classes or 0)
    return _entropy_from_counts(counts)


def estimate_conditional_entropy(forest: UncertaintyForest,
                                 eval_rows=None) -> EstimateReport:
    """H(Y|X) from the forest's posteriors, per the config's eval mode.

    ``eval_rows`` may supply external (possibly unlabeled) points to
    evaluate instead of the internal held-out sets; tree-level mode then
    averages per-tree entropies over those shared points.
    """
    if eval_rows is None:
        if forest.eval_sets is None:
            raise DataError("forest holds no internal evaluation rows; "
                            "pass eval_rows")
        if forest.train_features is None:
            raise DataError("loaded forests keep no training rows; "
                            "pass eval_rows")
        per_tree_x = [forest.train_features[idx] for idx in forest.eval_sets]
    else:
        per_tree_x = [_as_eval_matrix(forest, eval_rows)]

    trees, posts = forest.trees, forest.posteriors
    if forest.config.eval_mode == TREE_LEVEL:
        values = []
        for b, (tree, post) in enumerate(zip(trees, posts)):
            xe = per_tree_x[b] if len(per_tree_x) > 1 else per_tree_x[0]
            rows = post.leaf_probs[tree.apply(xe)]
            values.append(float(_entropy_rows(rows).mean()))
        h = float(np.mean(values))
        per_tree: tuple[float, ...] | None = tuple(values)
    else:
        xe = per_tree_x[0]
        acc = np.zeros((xe.shape[0], forest.n_classes))
        for tree, post in zip(trees, posts):
            acc += post.leaf_probs[tree.apply(xe)]
        acc /= len(trees)
        h = float(_entropy_rows(acc).mean())
        per_tree = None

    h_y = _entropy_from_counts(forest.class_counts)
    mi = h_y - h
    return EstimateReport(
        estimator="uf",
        h_y_given_x=h,
        h_y=h_y,
        mi=mi,
        mi_normalized=mi / h_y,
        seed=forest.seed,
        config=forest.config.to_dict(),
        per_tree_values=per_tree,
    )


def estimate_mutual_information(data: LabeledDataset, config: ForestConfig,
                                seed: int,
                                threads: int | None = None) -> EstimateReport:
    """Fit a forest and report I(X;Y) = H(Y) - H(Y|X)."""
    forest = fit_forest(data, config, seed, threads=threads)
    return estimate_conditional_entropy(forest)


def save_forest(forest: UncertaintyForest, path: str) -> None:
    """Write a versioned JSON document; training rows are not persisted,
    so a reloaded forest evaluates external rows only."""
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "config": forest.config.to_dict(),
        "seed": forest.seed,
        "n_rows": forest.n_rows,
        "n_classes": forest.n_classes,
        "label_names": list(forest.label_names),
        "feature_names": list(forest.feature_names),
        "class_counts": forest.class_counts.tolist(),
        "trees": [t.to_dict() for t in forest.trees],
        "posteriors": [
            {
                "leaf_probs": p.leaf_probs.tolist(),
                "leaf_counts": p.leaf_counts.tolist(),
                "marginal": p.marginal.tolist(),
            }
            for p in forest.posteriors
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_forest(path: str) -> UncertaintyForest:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a forest document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise DataError(f"{path}: not a forest document")
    if doc.get("version") != _VERSION:
        raise DataError(f"{path}: unsupported version {doc.get('version')!r}")
    try:
        config = ForestConfig.from_dict(doc["config"])
        trees = tuple(TreePartition.from_dict(t) for t in doc["trees"])
        posts = tuple(
            TreePosterior(
                leaf_probs=np.asarray(p["leaf_probs"], np.float64),
                leaf_counts=np.asarray(p["leaf_counts"], np.int64),
                marginal=np.asarray(p["marginal"], np.float64),
            )
            for p in doc["posteriors"]
        )
        forest = UncertaintyForest(
            config=config,
            seed=int(doc["seed"]),
            n_rows=int(doc["n_rows"]),
            n_classes=int(doc["n_classes"]),
            label_names=tuple(doc["label_names"]),
            feature_names=tuple(doc["feature_names"]),
            class_counts=np.asarray(doc["class_counts"], np.int64),
            trees=trees,
            posteriors=posts,
            eval_sets=None,
            train_features=None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: corrupt forest document: {exc}") from exc
    if len(forest.trees) != config.n_trees or len(posts) != config.n_trees:
        raise DataError(f"{path}: corrupt forest document: tree count mismatch")
    return forest
