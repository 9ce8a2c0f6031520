"""Hypothesis testing and feature-subset accounting on top of the
mutual-information estimator.

The permutation test breaks the X-Y pairing by relabeling rows with
seeded permutations and asks how often the relabeled estimate reaches
the observed one. The decomposition splits the full-feature estimate
into the part captured by a named feature subset and the remainder; the
remainder is defined as the difference, so the two parts add back up
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .forest import ForestConfig, estimate_mutual_information
from .io import LabeledDataset
from .rng import derive_key, generator

__all__ = [
    "PermutationTestResult",
    "permutation_test",
    "DecompositionRow",
    "mi_decomposition",
]


@dataclass(frozen=True)
class PermutationTestResult:
    """Observed statistic, its null draws, and the add-one p-value."""

    observed: float
    null_values: tuple[float, ...]
    p_value: float
    seed: int

    @property
    def n_reps(self) -> int:
        return len(self.null_values)


def _relabeled(data: LabeledDataset, perm: np.ndarray) -> LabeledDataset:
    return LabeledDataset(features=data.features,
                          feature_names=data.feature_names,
                          labels=data.labels[perm],
                          label_names=data.label_names)


def permutation_test(data: LabeledDataset, config: ForestConfig,
                     n_reps: int, seed: int,
                     estimator=None) -> PermutationTestResult:
    """Test whether the estimated I(X;Y) exceeds what label shuffling
    produces.

    Each replicate r permutes the labels with its own stream derived
    from (seed, "perm", r) and re-estimates with a seed derived from
    (seed, "perm-fit", r), so replicates are independent and any subset
    of them is reproducible in isolation. The p-value is
    (1 + #{null >= observed}) / (n_reps + 1), never zero.

    ``estimator`` may swap in any callable (data, config, seed) ->
    report with an ``mi`` field; the forest estimator is the default.
    """
    if data.labels is None:
        raise DataError("the permutation test needs labeled rows")
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    est = estimator if estimator is not None else estimate_mutual_information
    observed = est(data, config, seed).mi
    n = data.n
    nulls = []
    for r in range(n_reps):
        perm = generator(seed, "perm", r).permutation(n)
        rep = est(_relabeled(data, perm), config,
                  derive_key(seed, "perm-fit", r))
        nulls.append(float(rep.mi))
    exceed = sum(1 for v in nulls if v >= observed)
    return PermutationTestResult(
        observed=float(observed),
        null_values=tuple(nulls),
        p_value=(1 + exceed) / (n_reps + 1),
        seed=seed,
    )


@dataclass(frozen=True)
class DecompositionRow:
    """MI split for one feature subset: inside part, remainder, total."""

    in_features: tuple[str, ...]
    i_in: float
    i_cond: float
    i_total: float


def mi_decomposition(data: LabeledDataset, in_subsets, config: ForestConfig,
                     seed: int) -> list[DecompositionRow]:
    """Split I(X;Y) over named feature subsets.

    The total uses all columns and the given seed; each subset row
    estimates on its columns alone with a seed derived from the row
    position, and the conditional part is total minus inside, which
    makes the additivity identity exact. An empty subset contributes
    zero inside-information by convention; a subset naming every
    feature reuses the total instead of refitting, so its remainder is
    exactly zero.
    """
    if data.labels is None:
        raise DataError("decomposition needs labeled rows")
    subsets = [tuple(s) for s in in_subsets]
    all_names = set(data.feature_names)
    for names in subsets:
        unknown = [f for f in names if f not in all_names]
        if unknown:
            raise DataError(f"unknown feature name(s): {', '.join(unknown)}")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate feature name in subset: {names}")
    i_total = float(estimate_mutual_information(data, config, seed).mi)
    rows = []
    for pos, names in enumerate(subsets):
        if len(names) == 0:
            i_in = 0.0
        elif set(names) == all_names:
            i_in = i_total
        else:
            sub = data.select_features(names)
            i_in = float(estimate_mutual_information(
                sub, config, derive_key(seed, "in", pos)).mi)
        rows.append(DecompositionRow(
            in_features=names,
            i_in=i_in,
            i_cond=i_total - i_in,
            i_total=i_total,
        ))
    return rows
