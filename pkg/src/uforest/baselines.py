"""Reference estimators the forest is benchmarked against.

Two k-nearest-neighbor mutual information estimators (the classic
digamma-corrected one and the mixture-friendly variant that handles
exact ties), plus a calibrated-forest estimator that fits a plain CART
forest and remaps its scores through per-class isotonic regression on
held-out rows.

All neighbor queries use the max norm. Low-dimensional point sets go
through scipy's kd-tree; wide ones fall back to exact brute-force scans
in :mod:`uforest.kernels`, which beat the degenerating tree there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import ConfigError, DataError
from .forest import EstimateReport, ForestConfig, fit_forest
from .forest import posterior as forest_posterior
from .io import LabeledDataset
from .rng import derive_key, generator

__all__ = [
    "digamma",
    "KnnIndex",
    "ksg_mi",
    "mixed_ksg_mi",
    "CalibrationMap",
    "isotonic_fit",
    "IrfModel",
    "fit_irf",
    "irf_estimate",
]

# past this width the kd-tree visits nearly every node anyway
_BRUTE_DIM_MIN = 16


def digamma(x):
    """Digamma for positive arguments, elementwise.

    Shifts arguments up by the recurrence until they reach 10, where
    the asymptotic expansion through the 1/x^10 term is accurate to
    well below 1e-12.
    """
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).copy()
    if not (z > 0.0).all():
        raise DataError("digamma is only evaluated for arguments > 0")
    acc = np.zeros_like(z)
    # any positive argument reaches 10 after ten unit shifts
    for _ in range(10):
        small = z < 10.0
        if not small.any():
            break
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
    t = 1.0 / (z * z)
    series = t * (1.0 / 12.0 - t * (1.0 / 120.0 - t * (1.0 / 252.0
                 - t * (1.0 / 240.0 - t / 132.0))))
    res = np.log(z) - 0.5 / z - series + acc
    return float(res[0]) if scalar else res


class KnnIndex:
    """Exact max-norm neighbor queries over a fixed point set."""

    def __init__(self, points: np.ndarray):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataError("index needs a non-empty 2-d point matrix")
        if not np.isfinite(pts).all():
            raise DataError("index points contain non-finite values")
        self.points = pts
        self._tree = cKDTree(pts) if pts.shape[1] < _BRUTE_DIM_MIN else None

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def kth_distance(self, k: int) -> np.ndarray:
        """Distance from each point to its k-th nearest other point."""
        if not 1 <= k <= self.n - 1:
            raise ConfigError(f"k must lie in 1..{self.n - 1}")
        if self._tree is not None:
            d, _ = self._tree.query(self.points, k=k + 1, p=np.inf)
            return np.ascontiguousarray(d[:, k])
        return kernels.kth_neighbor_linf(self.points, k)

    def count_within(self, radii, strict: bool = False) -> np.ndarray:
        """Indexed points within each point's radius, self included.

        Closed balls by default; ``strict`` counts distance < radius
        instead, computed exactly: for floats d < r holds iff
        d <= nextafter(r, -inf).
        """
        r = np.asarray(radii, dtype=np.float64)
        if r.ndim == 0:
            r = np.full(self.n, float(r))
        if r.shape != (self.n,):
            raise DataError("need one radius per indexed point")
        if not (np.isfinite(r).all() and (r >= 0.0).all()):
            raise DataError("radii must be finite and non-negative")
        if strict:
            r = np.nextafter(r, -np.inf)
        if self._tree is not None:
            out = self._tree.query_ball_point(self.points, np.maximum(r, 0.0),
                                              p=np.inf, return_length=True)
            counts = np.asarray(out, dtype=np.int64)
            # a negative target radius admits nothing, not even self
            counts[r < 0.0] = 0
            return counts
        return kernels.count_within_linf(self.points,
                                         np.ascontiguousarray(r))


def _tie_jitter(block: np.ndarray, scale: float = 1e-10) -> np.ndarray:
    """Displace duplicated values by tiny deterministic offsets.

    Only entries whose column value occurs more than once move. The
    offset is keyed by (column, value bits, rank of the full row among
    the rows sharing that value), all invariant under row reordering,
    so a permuted input yields the identical point set. Untied data
    passes through bit-identical.
    """
    n, d = block.shape
    out = block.copy()
    # full-row lexicographic rank, primary key = column 0
    lex = np.empty(n, dtype=np.int64)
    lex[np.lexsort(block.T[::-1])] = np.arange(n)
    for c in range(d):
        col = block[:, c]
        order = np.lexsort((lex, col))
        vals = col[order]
        starts = np.flatnonzero(np.r_[True, vals[1:] != vals[:-1]])
        sizes = np.diff(np.r_[starts, n])
        occ = np.arange(n) - np.repeat(starts, sizes)
        dup = np.repeat(sizes > 1, sizes)
        if not dup.any():
            continue
        bits = vals.view(np.uint64)
        for pos in np.flatnonzero(dup):
            u = derive_key("tie-jitter", c, int(bits[pos]), int(occ[pos]))
            out[order[pos], c] = vals[pos] + scale * (u / 2.0 ** 128)
    return out


def _as_blocks(x, y) -> tuple[np.ndarray, np.ndarray]:
    xb = np.asarray(x, dtype=np.float64)
    if xb.ndim == 1:
        xb = xb[:, None]
    yb = np.asarray(y)
    if yb.dtype.kind in "iub":
        yb = yb.astype(np.float64)
    else:
        yb = np.asarray(yb, dtype=np.float64)
    if yb.ndim == 1:
        yb = yb[:, None]
    if xb.ndim != 2 or yb.ndim != 2 or xb.shape[0] != yb.shape[0]:
        raise DataError("x and y must be matrices with matching row counts")
    if xb.shape[0] == 0:
        raise DataError("no rows")
    if not (np.isfinite(xb).all() and np.isfinite(yb).all()):
        raise DataError("non-finite values in the input blocks")
    return np.ascontiguousarray(xb), np.ascontiguousarray(yb)


def ksg_mi(x, y, k: int = 3) -> float:
    """k-NN mutual information with digamma corrections, in nats.

    The variant with a single joint radius per point: the distance to
    the k-th joint neighbor, with strictly-closer marginal counts.
    Duplicated values (categorical columns included) first receive
    sub-1e-9 deterministic offsets, so ties cannot zero out a radius
    and row order cannot change the result.
    """
    xb, yb = _as_blocks(x, y)
    n = xb.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k must lie in 1..{n - 1}")
    dx = xb.shape[1]
    joint = _tie_jitter(np.hstack([xb, yb]))
    eps = KnnIndex(joint).kth_distance(k)
    cx = KnnIndex(joint[:, :dx]).count_within(eps, strict=True)
    cy = KnnIndex(joint[:, dx:]).count_within(eps, strict=True)
    # fixed (sorted) summation order: permuting rows permutes the
    # contributions but not the sum
    contrib = np.sort(digamma(cx) + digamma(cy))
    return float(digamma(k) + digamma(n) - contrib.mean())


def mixed_ksg_mi(x, y, k: int = 3) -> float:
    """k-NN mutual information tolerating exact ties, in nats.

    Points whose k-th joint neighbor sits at distance zero swap the
    neighbor rank for the multiplicity of their duplicates and use
    closed-ball marginal counts, which handles discrete and mixed
    columns without any jitter.  Away from ties the marginal counts
    enter through the same digamma terms as ``ksg_mi``, so on fully
    continuous duplicate-free data the two estimators coincide.
    """
    xb, yb = _as_blocks(x, y)
    n = xb.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k must lie in 1..{n - 1}")
    dx = xb.shape[1]
    joint_index = KnnIndex(np.hstack([xb, yb]))
    rho = joint_index.kth_distance(k)
    xi = KnnIndex(joint_index.points[:, :dx])
    yi = KnnIndex(joint_index.points[:, dx:])
    cx = xi.count_within(rho, strict=True).astype(np.float64)
    cy = yi.count_within(rho, strict=True).astype(np.float64)
    zero = rho == 0.0
    if not zero.any():
        # same contraction as ksg_mi, term for term, so duplicate-free
        # continuous data reproduces its result bit for bit
        contrib = np.sort(digamma(cx) + digamma(cy))
        return float(digamma(k) + digamma(n) - contrib.mean())
    kvec = np.full(n, float(k))
    kvec[zero] = joint_index.count_within(rho)[zero]
    cx[zero] = xi.count_within(rho)[zero]
    cy[zero] = yi.count_within(rho)[zero]
    contrib = np.sort(digamma(kvec) - digamma(cx) - digamma(cy))
    return float(contrib.mean() + digamma(n))


@dataclass(frozen=True)
class CalibrationMap:
    """Non-decreasing step function from a one-dimensional fit.

    ``predict`` returns the value of the block whose left edge is the
    largest one not exceeding the query; queries left of every block
    clamp to the first value.
    """

    breaks: np.ndarray
    values: np.ndarray

    def predict(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        pos = np.searchsorted(self.breaks, q, side="right") - 1
        return self.values[np.clip(pos, 0, len(self.values) - 1)]


def isotonic_fit(x, y) -> CalibrationMap:
    """Least-squares non-decreasing fit by pool-adjacent-violators."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise DataError("need matching non-empty value/target vectors")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DataError("non-finite values in the fit data")
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    # average duplicate inputs first so the result is a function of x
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    weights = np.diff(np.r_[starts, len(xs)]).astype(np.float64)
    means = np.add.reduceat(ys, starts) / weights
    lefts = xs[starts]

    bv: list[float] = []
    bw: list[float] = []
    bx: list[float] = []
    for v, w, xl in zip(means, weights, lefts):
        bv.append(float(v))
        bw.append(float(w))
        bx.append(float(xl))
        while len(bv) > 1 and bv[-2] > bv[-1]:
            v2 = (bv[-2] * bw[-2] + bv[-1] * bw[-1]) / (bw[-2] + bw[-1])
            w2 = bw[-2] + bw[-1]
            x2 = bx[-2]
            bv[-2:] = [v2]
            bw[-2:] = [w2]
            bx[-2:] = [x2]
    return CalibrationMap(breaks=np.array(bx), values=np.array(bv))


@dataclass(frozen=True)
class IrfModel:
    """Plain forest plus per-class isotonic remaps of its scores."""

    forest: object
    maps: tuple[CalibrationMap, ...]
    eval_features: np.ndarray | None = field(repr=False, default=None)
    class_counts: np.ndarray | None = field(repr=False, default=None)
    seed: int = 0

    def posterior(self, X) -> np.ndarray:
        raw = forest_posterior(self.forest, np.atleast_2d(
            np.asarray(X, dtype=np.float64)))
        cal = np.column_stack([m.predict(raw[:, j])
                               for j, m in enumerate(self.maps)])
        cal = np.clip(cal, 0.0, None)
        total = cal.sum(axis=1)
        flat = total <= 0.0
        k = cal.shape[1]
        cal[flat] = 1.0 / k
        cal[~flat] /= total[~flat, None]
        return cal


def fit_irf(data: LabeledDataset, config: ForestConfig, seed: int) -> IrfModel:
    """Split rows once into train/calibration/evaluation, fit a plain
    CART forest on the training part, and calibrate each class's score
    on the held-out calibration rows."""
    if data.labels is None:
        raise DataError("calibrated forests need labeled rows")
    n, k = data.n, data.n_classes
    n_eval = int(np.floor(config.frac_eval * n + 0.5))
    n_calib = int(np.floor(config.frac_vote * n + 0.5))
    n_train = n - n_eval - n_calib
    if n_train < 1 or n_calib < 1:
        raise DataError(f"{n} rows cannot cover train/calibration/evaluation "
                        f"splits of {n_train}/{n_calib}/{n_eval}")
    perm = generator(seed, "irf").permutation(n)
    eval_idx = perm[:n_eval]
    calib_idx = perm[n_eval:n_eval + n_calib]
    train_idx = perm[n_eval + n_calib:]

    sub = config.subsample_size
    inner = replace(config,
                    honest=False, correction=False, eval_mode="forest",
                    frac_partition=1.0, frac_vote=0.0, frac_eval=0.0,
                    subsample_size=min(sub, n_train) if sub is not None
                    else max(1, math.ceil(0.632 * n_train)))
    train = LabeledDataset(features=data.features[train_idx],
                           feature_names=data.feature_names,
                           labels=data.labels[train_idx],
                           label_names=data.label_names)
    forest = fit_forest(train, inner, derive_key(seed, "irf-forest"))
    scores = forest_posterior(forest, data.features[calib_idx])
    targets = data.labels[calib_idx]
    maps = tuple(isotonic_fit(scores[:, j], (targets == j).astype(np.float64))
                 for j in range(k))
    return IrfModel(
        forest=forest,
        maps=maps,
        eval_features=data.features[eval_idx] if n_eval > 0 else None,
        class_counts=np.bincount(data.labels, minlength=k).astype(np.int64),
        seed=seed,
    )


def irf_estimate(data: LabeledDataset, config: ForestConfig,
                 seed: int) -> EstimateReport:
    """H(Y|X) and I(X;Y) from a calibrated plain forest."""
    model = fit_irf(data, config, seed)
    if model.eval_features is None:
        raise DataError("frac_eval leaves no rows to evaluate on")
    p = model.posterior(model.eval_features)
    safe = np.where(p > 0.0, p, 1.0)
    h = float((-p * np.log(safe)).sum(axis=1).mean())
    counts = model.class_counts
    pr = counts[counts > 0] / counts.sum()
    h_y = float(-(pr * np.log(pr)).sum())
    mi = h_y - h
    return EstimateReport(
        estimator="irf",
        h_y_given_x=h,
        h_y=h_y,
        mi=mi,
        mi_normalized=mi / h_y,
        seed=seed,
        config=config.to_dict(),
    )
