"""Estimator registry used by the CLI, sweeps, and figure reproduction.

Each estimator is addressed by a short name. The forest-based ones
("uf", "cart", "irf") resolve a preset on top of the caller's config so
that the name alone pins the recipe; the neighbor-count ones ("ksg",
"mixed-ksg") take only the neighbor count k.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .baselines import fit_irf, irf_estimate, ksg_mi, mixed_ksg_mi
from .errors import ConfigError, DataError
from .forest import (EstimateReport, ForestConfig, _round_half_up,
                     empirical_entropy, estimate_mutual_information,
                     fit_forest, posterior)
from .io import LabeledDataset

__all__ = ["ESTIMATOR_NAMES", "preset_config", "run_estimator",
           "fit_posterior"]

ESTIMATOR_NAMES = ("uf", "cart", "irf", "ksg", "mixed-ksg")


def _with_min_leaf(config: ForestConfig, floor: int) -> ForestConfig:
    if config.tree.min_leaf_size is not None:
        return config
    tree = dataclasses.replace(config.tree, min_leaf_size=floor)
    return dataclasses.replace(config, tree=tree)


def preset_config(name: str, n: int,
                  base: ForestConfig | None = None) -> ForestConfig:
    """Resolve the configuration an estimator actually runs with.

    ``uf`` keeps ``base`` untouched. ``cart`` forces the classic forest
    recipe: no held-out voting split, no zero-count correction,
    forest-level evaluation, fully grown trees, and, unless the caller
    pinned one, a 0.632-of-pool subsample so the trees differ (a full
    subsample makes every tree identical). ``irf`` only pins fully
    grown trees; its fit routine owns the calibration split. The
    neighbor-count estimators return ``base`` unchanged.
    """
    if name not in ESTIMATOR_NAMES:
        raise ConfigError(f"unknown estimator {name!r}")
    config = base if base is not None else ForestConfig()
    if name in ("uf", "ksg", "mixed-ksg"):
        return config
    if name == "irf":
        return _with_min_leaf(config, 1)
    config = _with_min_leaf(config, 1)
    sub = config.subsample_size
    if sub is None:
        pool = max(1, n - _round_half_up(config.frac_eval * n))
        sub = max(1, int(math.ceil(0.632 * pool)))
    return dataclasses.replace(config, honest=False, correction=False,
                               eval_mode="forest", subsample_size=sub)


def run_estimator(name: str, data: LabeledDataset, config: ForestConfig,
                  seed: int, k: int = 3,
                  threads: int | None = None) -> EstimateReport:
    """Run one named estimator on labeled rows.

    The report's config field records the preset-resolved configuration,
    i.e. what actually ran, not what was passed in.
    """
    cfg = preset_config(name, data.n, config)
    if name == "uf":
        return estimate_mutual_information(data, cfg, seed, threads=threads)
    if name == "cart":
        rep = estimate_mutual_information(data, cfg, seed, threads=threads)
        return dataclasses.replace(rep, estimator="cart")
    if name == "irf":
        return irf_estimate(data, cfg, seed)
    if data.labels is None:
        raise DataError(f"estimator {name!r} needs labeled rows")
    if k < 1:
        raise ConfigError("k must be >= 1")
    fn = ksg_mi if name == "ksg" else mixed_ksg_mi
    mi = float(fn(data.features, data.labels.astype(np.float64), k=k))
    h_y = empirical_entropy(data.labels)
    return EstimateReport(
        estimator=name,
        h_y_given_x=h_y - mi,
        h_y=h_y,
        mi=mi,
        mi_normalized=mi / h_y,
        seed=seed,
        config={"k": k},
    )


def fit_posterior(name: str, data: LabeledDataset, config: ForestConfig,
                  seed: int, threads: int | None = None):
    """Fit the named model, returning feature rows -> posterior rows.

    Only the forest-based estimators model the posterior; asking for a
    neighbor-count one is a configuration error.
    """
    cfg = preset_config(name, data.n, config)
    if name in ("uf", "cart"):
        forest = fit_forest(data, cfg, seed, threads=threads)
        return lambda X: posterior(forest, np.asarray(X, dtype=np.float64))
    if name == "irf":
        return fit_irf(data, cfg, seed).posterior
    raise ConfigError(f"estimator {name!r} has no posterior model")
