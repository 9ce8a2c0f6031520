"""Command-line interface.

Commands
--------
simulate    draw a synthetic labeled dataset and write it as CSV
estimate    run one estimator on a CSV dataset
sweep       grids of (n, d, mu, pi) x trials x estimators, to CSV
permtest    label-permutation test of I(X;Y) > 0
decompose   split I(X;Y) over named feature subsets
reproduce   desk-scale figure presets fig1..fig4

Every run echoes its fully resolved configuration as flat ``key = value``
lines before any results, so console output is self-describing. Result
files never embed wall-clock times (the column is written as 0), which
keeps identical seeds byte-identical across machines and thread counts;
measured times go to stdout only.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, UforestError
from .estimators import ESTIMATOR_NAMES, fit_posterior, preset_config, \
    run_estimator
from .forest import ForestConfig, empirical_entropy
from .inference import mi_decomposition, permutation_test
from .io import RunConfig, _fmt_cell, load_csv, parse_config, save_csv, \
    save_report
from .rng import derive_key
from .sim import SETTING_NAMES, SimSetting, posterior_at, sample, truth
from .svg import Series, line_plot

_FOREST_ESTIMATORS = ("uf", "cart", "irf")
_FIGURES = ("fig1", "fig2", "fig3", "fig4")

# Default feature subsets for the connectome decomposition (fig4); any
# conforming CSV works, these names match the documented schema.
_FIG4_SUBSETS = (
    ("claw",), ("dist",), ("age",), ("cluster",),
    ("cluster", "claw"), ("cluster", "dist"), ("cluster", "age"),
    ("cluster", "claw", "dist"), ("cluster", "claw", "age"),
    ("cluster", "dist", "age"),
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------- helpers

def _int_list(text: str, flag: str) -> list[int]:
    try:
        out = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated integers, "
                          f"got {text!r}") from None
    if not out:
        raise ConfigError(f"{flag}: empty grid")
    return out


def _float_list(text: str, flag: str) -> list[float]:
    try:
        out = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected comma-separated numbers, "
                          f"got {text!r}") from None
    if not out:
        raise ConfigError(f"{flag}: empty grid")
    return out


def _cast_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(s)


def _cast_opt_int(s: str):
    return None if s.lower() == "none" else int(s)


# config-file keys mirror ForestConfig.to_dict(), plus the neighbor count
_FILE_CASTS = {
    "n_trees": int,
    "min_leaf_size": _cast_opt_int,
    "impurity": str,
    "max_depth": _cast_opt_int,
    "n_candidate_features": _cast_opt_int,
    "kappa": float,
    "frac_partition": float,
    "frac_vote": float,
    "frac_eval": float,
    "subsample_size": _cast_opt_int,
    "eval_mode": str,
    "honest": _cast_bool,
    "correction": _cast_bool,
    "k": int,
}


def _add_forest_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("forest options")
    g.add_argument("--trees", type=int, metavar="B",
                   help="trees per forest (default 300)")
    g.add_argument("--min-leaf", type=int, metavar="M",
                   help="smallest splittable node; default adapts to the "
                        "fitting sample as ceil(2*sqrt(m))")
    g.add_argument("--impurity", choices=("gini", "entropy"),
                   help="split criterion (default gini)")
    g.add_argument("--max-depth", type=int, metavar="D",
                   help="depth cap (default unlimited)")
    g.add_argument("--mtry", type=int, metavar="F",
                   help="candidate features per split (default all)")
    g.add_argument("--kappa", type=float, metavar="K",
                   help="zero-count correction strength (default 3)")
    g.add_argument("--frac-partition", type=float, metavar="F",
                   help="fraction of each subsample that shapes the tree "
                        "(default 0.4)")
    g.add_argument("--frac-vote", type=float, metavar="F",
                   help="fraction voting leaf frequencies (default 0.3)")
    g.add_argument("--frac-eval", type=float, metavar="F",
                   help="held-out evaluation fraction (default 0.3)")
    g.add_argument("--subsample", type=int, metavar="S",
                   help="rows drawn per tree (default: the whole pool)")
    g.add_argument("--eval-mode", choices=("tree", "forest"),
                   help="average per-tree entropies, or take the entropy "
                        "of the averaged posterior (default tree)")
    g.add_argument("--dishonest", action="store_true",
                   help="let the same rows shape the tree and vote")
    g.add_argument("--no-correction", action="store_true",
                   help="keep raw leaf frequencies, zeros included")
    g.add_argument("--k", type=int, metavar="K",
                   help="neighbor count for ksg/mixed-ksg (default 3)")
    g.add_argument("--threads", type=int, metavar="T",
                   help="worker threads (default: UFOREST_THREADS or 1)")
    g.add_argument("--config", metavar="PATH",
                   help="key = value file; command-line flags win")


def _resolve_config(ns) -> tuple[ForestConfig, int]:
    """Defaults <- config file <- flags, then validate once."""
    doc = ForestConfig().to_dict()
    k = 3
    path = getattr(ns, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for key, text in raw.items():
            cast = _FILE_CASTS.get(key)
            if cast is None:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                value = cast(text)
            except ValueError:
                raise ConfigError(
                    f"config key {key!r}: bad value {text!r}") from None
            if key == "k":
                k = value
            else:
                doc[key] = value
    flag_map = {
        "n_trees": "trees", "min_leaf_size": "min_leaf",
        "impurity": "impurity", "max_depth": "max_depth",
        "n_candidate_features": "mtry", "kappa": "kappa",
        "frac_partition": "frac_partition", "frac_vote": "frac_vote",
        "frac_eval": "frac_eval", "subsample_size": "subsample",
        "eval_mode": "eval_mode",
    }
    for key, attr in flag_map.items():
        value = getattr(ns, attr, None)
        if value is not None:
            doc[key] = value
    if getattr(ns, "dishonest", False):
        doc["honest"] = False
    if getattr(ns, "no_correction", False):
        doc["correction"] = False
    if getattr(ns, "k", None) is not None:
        k = ns.k
    if k < 1:
        raise ConfigError("k must be >= 1")
    return ForestConfig.from_dict(doc), k


def _echo(command: str, values: dict) -> None:
    shown = {key: ("none" if v is None else v) for key, v in values.items()}
    for line in RunConfig(command, shown).echo_lines():
        print(line)


def _report_row(rep, n: int, d: int, mu: float, pi: float,
                seed: int) -> dict:
    return {
        "estimator": rep.estimator, "n": n, "d": d, "mu": mu, "pi": pi,
        "seed": seed, "h_y": rep.h_y, "h_y_given_x": rep.h_y_given_x,
        "mi": rep.mi, "mi_normalized": rep.mi_normalized,
        "wall_time_ms": 0.0,
    }


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")


def _sim_setting(ns) -> SimSetting:
    return SimSetting(ns.setting, mu=ns.mu, pi=ns.pi, d=ns.d)


# ---------------------------------------------------------------- commands

def _cmd_simulate(ns) -> int:
    setting = _sim_setting(ns)
    _echo("simulate", {
        "setting": ns.setting, "mu": ns.mu, "pi": ns.pi, "d": ns.d,
        "n": ns.n, "seed": ns.seed, "label_column": ns.label_column,
        "out": ns.out,
    })
    ds = sample(setting, ns.n, ns.seed)
    save_csv(ds, ns.out, label_column=ns.label_column)
    print(f"wrote {ns.out} ({ds.n} rows, {ds.d} feature columns)")
    return 0


def _load_labeled(path: str, label_column: str):
    ds = load_csv(path, label_column=label_column)
    if ds.labels is None:
        raise DataError(f"{path}: no usable labels in column "
                        f"{label_column!r}")
    return ds


def _cmd_estimate(ns) -> int:
    config, k = _resolve_config(ns)
    ds = _load_labeled(ns.in_path, ns.label_column)
    resolved = preset_config(ns.estimator, ds.n, config)
    values = {"estimator": ns.estimator, "in": ns.in_path,
              "label_column": ns.label_column, "seed": ns.seed,
              "out": ns.out, "threads": ns.threads}
    if ns.estimator in _FOREST_ESTIMATORS:
        values.update(resolved.to_dict())
    else:
        values["k"] = k
    _echo("estimate", values)
    start = time.perf_counter()
    rep = run_estimator(ns.estimator, ds, config, ns.seed, k=k,
                        threads=ns.threads)
    wall_ms = (time.perf_counter() - start) * 1e3
    for name in ("h_y", "h_y_given_x", "mi", "mi_normalized"):
        print(f"{name} = {format(getattr(rep, name), '.17g')}")
    print(f"wall_time_ms = {wall_ms:.1f}")
    if ns.out:
        nan = float("nan")
        save_report([_report_row(rep, ds.n, ds.d, nan, nan, ns.seed)], ns.out)
        print(f"wrote {ns.out}")
    return 0


def _cmd_sweep(ns) -> int:
    config, k = _resolve_config(ns)
    n_grid = _int_list(ns.n, "--n")
    d_grid = _int_list(ns.d, "--d")
    mu_grid = _float_list(ns.mu, "--mu")
    pi_grid = _float_list(ns.pi, "--pi")
    est_list = [tok.strip() for tok in ns.estimators.split(",") if tok.strip()]
    if not est_list:
        raise ConfigError("--estimators: empty list")
    for est in est_list:
        if est not in ESTIMATOR_NAMES:
            raise ConfigError(f"unknown estimator {est!r}; choose from "
                              f"{', '.join(ESTIMATOR_NAMES)}")
    if ns.trials < 1:
        raise ConfigError("--trials must be >= 1")
    values = {
        "setting": ns.setting, "n": ",".join(map(str, n_grid)),
        "d": ",".join(map(str, d_grid)),
        "mu": ",".join(map(repr, mu_grid)),
        "pi": ",".join(map(repr, pi_grid)),
        "estimators": ",".join(est_list), "trials": ns.trials,
        "seed": ns.seed, "out": ns.out, "threads": ns.threads,
    }
    values.update(config.to_dict())
    if any(e in ("ksg", "mixed-ksg") for e in est_list):
        values["k"] = k
    _echo("sweep", values)

    start = time.perf_counter()
    rows = []
    for n in n_grid:
        for d in d_grid:
            for mu in mu_grid:
                for pi in pi_grid:
                    setting = SimSetting(ns.setting, mu=mu, pi=pi, d=d)
                    for trial in range(ns.trials):
                        tag = (ns.setting, n, d, repr(mu), repr(pi), trial)
                        ds = sample(setting, n,
                                    derive_key(ns.seed, "data", *tag))
                        for est in est_list:
                            est_seed = derive_key(ns.seed, "est", est, *tag)
                            rep = run_estimator(est, ds, config, est_seed,
                                                k=k, threads=ns.threads)
                            rows.append(_report_row(rep, n, d, mu, pi,
                                                    est_seed))
    save_report(rows, ns.out)
    secs = time.perf_counter() - start
    print(f"wrote {ns.out} ({len(rows)} rows, {secs:.1f}s)")
    return 0


def _cmd_permtest(ns) -> int:
    config, k = _resolve_config(ns)
    if ns.in_path:
        ds = _load_labeled(ns.in_path, ns.label_column)
        source = {"in": ns.in_path, "label_column": ns.label_column}
    else:
        if ns.n is None:
            raise ConfigError("--n is required when no --in file is given")
        setting = _sim_setting(ns)
        ds = sample(setting, ns.n, derive_key(ns.seed, "data"))
        source = {"setting": ns.setting, "mu": ns.mu, "pi": ns.pi,
                  "d": ns.d, "n": ns.n}
    if ns.reps < 1:
        raise ConfigError("--reps must be >= 1")
    values = {"estimator": ns.estimator, "reps": ns.reps, "seed": ns.seed,
              "out": ns.out, "threads": ns.threads, **source}
    values.update(preset_config(ns.estimator, ds.n, config).to_dict()
                  if ns.estimator in _FOREST_ESTIMATORS else {"k": k})
    _echo("permtest", values)

    def est(data, cfg, seed):
        return run_estimator(ns.estimator, data, cfg, seed, k=k,
                             threads=ns.threads)

    start = time.perf_counter()
    result = permutation_test(ds, config, ns.reps, ns.seed, estimator=est)
    secs = time.perf_counter() - start
    print(f"observed_mi = {format(result.observed, '.17g')}")
    print(f"n_reps = {result.n_reps}")
    print(f"p_value = {format(result.p_value, '.17g')}")
    print(f"wall_time_s = {secs:.1f}")
    if ns.out:
        rows = [(-1, result.observed)]
        rows += list(enumerate(result.null_values))
        _write_csv(ns.out, ("replicate", "mi"), rows)
        print(f"wrote {ns.out}")
    return 0


def _parse_subsets(specs) -> list[tuple[str, ...]]:
    out = []
    for spec in specs:
        out.append(tuple(tok.strip() for tok in spec.split(",")
                         if tok.strip()))
    return out


def _cmd_decompose(ns) -> int:
    config, _ = _resolve_config(ns)
    ds = _load_labeled(ns.in_path, ns.label_column)
    if ns.subset:
        subsets = _parse_subsets(ns.subset)
    else:
        subsets = [(name,) for name in ds.feature_names]
    values = {"in": ns.in_path, "label_column": ns.label_column,
              "seed": ns.seed, "out": ns.out, "threads": ns.threads,
              "subsets": ";".join(",".join(s) for s in subsets)}
    values.update(config.to_dict())
    _echo("decompose", values)

    rows = mi_decomposition(ds, subsets, config, ns.seed)
    h_y = empirical_entropy(ds.labels)
    print(f"h_y = {format(h_y, '.17g')}")
    print(f"{'in_features':<28} {'i_in':>8} {'i_cond':>8} {'i_total':>8}"
          f" {'i_in/h_y':>9} {'i_cond/h_y':>10}")
    for row in rows:
        name = ",".join(row.in_features) or "(none)"
        print(f"{name:<28} {row.i_in:8.4f} {row.i_cond:8.4f} "
              f"{row.i_total:8.4f} {row.i_in / h_y:9.4f} "
              f"{row.i_cond / h_y:10.4f}")
    if ns.out:
        header = ("in_features", "i_in", "i_cond", "i_total",
                  "i_in_norm", "i_cond_norm", "i_total_norm")
        out_rows = [(";".join(r.in_features), r.i_in, r.i_cond, r.i_total,
                     r.i_in / h_y, r.i_cond / h_y, r.i_total / h_y)
                    for r in rows]
        _write_csv(ns.out, header, out_rows)
        print(f"wrote {ns.out}")
    return 0


# ---------------------------------------------------------------- figures

def _mean_by(rows, key_fn, x_fn, y_fn):
    """Group rows, returning {key: (sorted xs, mean y per x)}."""
    acc: dict = {}
    for row in rows:
        acc.setdefault(key_fn(row), {}).setdefault(x_fn(row), []) \
            .append(y_fn(row))
    out = {}
    for key, per_x in acc.items():
        xs = sorted(per_x)
        out[key] = (xs, [float(np.mean(per_x[x])) for x in xs])
    return out


def _fig_estimator_series(means: dict, truth_key="truth") -> list[Series]:
    series = []
    order = [truth_key] + [k for k in means if k != truth_key]
    for key in order:
        if key not in means:
            continue
        xs, ys = means[key]
        series.append(Series(label=key, x=xs, y=ys,
                             dashed=(key == truth_key),
                             markers=(key != truth_key)))
    return series


def _fig1(ns, out_dir: str) -> None:
    trials = ns.trials if ns.trials is not None else 20
    trees = ns.trees if ns.trees is not None else 300
    n = 6000
    setting = SimSetting("spherical", mu=1.0, pi=0.5, d=1)
    _echo("reproduce", {"figure": "fig1", "setting": "spherical", "mu": 1.0,
                        "pi": 0.5, "d": 1, "n": n, "trials": trials,
                        "trees": trees, "seed": ns.seed,
                        "out_dir": out_dir, "svg": not ns.no_svg,
                        "threads": ns.threads})
    grid = np.linspace(-3.0, 3.0, 61)
    X = grid.reshape(-1, 1)
    config = ForestConfig(n_trees=trees)

    rows = [("truth", -1, x, p) for x, p in
            zip(grid, posterior_at(setting, X)[:, 1])]
    for trial in range(trials):
        ds = sample(setting, n, derive_key(ns.seed, "data", "fig1", trial))
        for est in _FOREST_ESTIMATORS:
            model = fit_posterior(est, ds, config,
                                  derive_key(ns.seed, "est", est, trial),
                                  threads=ns.threads)
            rows += [(est, trial, x, p) for x, p in zip(grid, model(X)[:, 1])]
    path = os.path.join(out_dir, "fig1_posteriors.csv")
    _write_csv(path, ("estimator", "trial", "x", "p1"), rows)
    print(f"wrote {path}")
    if not ns.no_svg:
        means = _mean_by(rows, lambda r: r[0], lambda r: r[2], lambda r: r[3])
        svg_path = os.path.join(out_dir, "fig1_posteriors.svg")
        line_plot(_fig_estimator_series(means), svg_path,
                  title="Estimated P(class 1 | x), spherical mu=1",
                  x_label="x", y_label="posterior")
        print(f"wrote {svg_path}")


_FIG2_PANELS = {
    "A": ("spherical", 1.0, 0.5, 1),
    "B": ("spherical", 1.0, 0.5, 20),
    "C": ("elliptical", 1.0, 0.5, 2),
    "D": ("three-class", 1.0, 1.0 / 3.0, 2),
}


def _fig2(ns, out_dir: str) -> None:
    panels = [tok.strip().upper() for tok in ns.panels.split(",")
              if tok.strip()]
    for p in panels:
        if p not in _FIG2_PANELS:
            raise ConfigError(f"unknown fig2 panel {p!r}; choose from "
                              f"{','.join(_FIG2_PANELS)}")
    n_grid = (500, 1000, 2000, 4000, 6000)
    _echo("reproduce", {"figure": "fig2", "panels": ",".join(panels),
                        "n": ",".join(map(str, n_grid)),
                        "trials": ns.trials, "trees": ns.trees,
                        "seed": ns.seed, "out_dir": out_dir,
                        "svg": not ns.no_svg, "threads": ns.threads})
    rows = []
    for panel in panels:
        name, mu, pi, d = _FIG2_PANELS[panel]
        # the wide panel is much heavier per fit; scale it down by default
        trials = ns.trials if ns.trials is not None else (10 if d >= 20 else 20)
        trees = ns.trees if ns.trees is not None else (100 if d >= 20 else 300)
        config = ForestConfig(n_trees=trees)
        h_true = truth(SimSetting(name, mu=mu, pi=pi, d=d)).h_y_given_x
        rows += [(panel, name, "truth", n, -1, h_true) for n in n_grid]
        for n in n_grid:
            setting = SimSetting(name, mu=mu, pi=pi, d=d)
            for trial in range(trials):
                ds = sample(setting, n,
                            derive_key(ns.seed, "data", panel, n, trial))
                for est in _FOREST_ESTIMATORS:
                    rep = run_estimator(
                        est, ds, config,
                        derive_key(ns.seed, "est", panel, est, n, trial),
                        threads=ns.threads)
                    rows.append((panel, name, est, n, trial,
                                 rep.h_y_given_x))
            print(f"panel {panel}: n={n} done", flush=True)
    path = os.path.join(out_dir, "fig2_convergence.csv")
    _write_csv(path, ("panel", "setting", "estimator", "n", "trial",
                      "h_y_given_x"), rows)
    print(f"wrote {path}")
    if not ns.no_svg:
        for panel in panels:
            sub = [r for r in rows if r[0] == panel]
            means = _mean_by(sub, lambda r: r[2], lambda r: r[3],
                             lambda r: r[5])
            svg_path = os.path.join(out_dir, f"fig2_{panel}.svg")
            name, mu, pi, d = _FIG2_PANELS[panel]
            line_plot(_fig_estimator_series(means), svg_path,
                      title=f"H(Y|X) vs n, {name} mu={mu:g} d={d}",
                      x_label="n", y_label="H(Y|X) (nats)")
            print(f"wrote {svg_path}")


def _fig3(ns, out_dir: str) -> None:
    settings = [tok.strip() for tok in ns.settings.split(",") if tok.strip()]
    for name in settings:
        if name not in SETTING_NAMES:
            raise ConfigError(f"unknown setting {name!r}; choose from "
                              f"{', '.join(SETTING_NAMES)}")
    pi_grid = _float_list(ns.pi_grid, "--pi-grid")
    d_grid = _int_list(ns.d_grid, "--d-grid")
    trials = ns.trials if ns.trials is not None else 5
    trees = ns.trees if ns.trees is not None else 100
    n = ns.n
    estimators = ("uf", "ksg", "mixed-ksg", "irf")
    config = ForestConfig(n_trees=trees)
    _echo("reproduce", {"figure": "fig3", "settings": ",".join(settings),
                        "pi_grid": ",".join(map(repr, pi_grid)),
                        "d_grid": ",".join(map(str, d_grid)), "n": n,
                        "trials": trials, "trees": trees, "k": ns.k or 3,
                        "seed": ns.seed, "out_dir": out_dir,
                        "svg": not ns.no_svg, "threads": ns.threads})
    k = ns.k if ns.k is not None else 3

    def cells(name):
        for pi in pi_grid:
            yield "pi", SimSetting(name, mu=1.0, pi=pi, d=2), pi
        for d in d_grid:
            yield "d", SimSetting(name, mu=1.0, pi=0.5, d=d), d

    rows = []
    for name in settings:
        for panel, setting, point in cells(name):
            tv = truth(setting)
            rows.append((name, panel, setting.pi, setting.d, n, "truth",
                         -1, tv.mi, tv.mi_normalized))
            for trial in range(trials):
                tag = (name, panel, repr(float(point)), trial)
                ds = sample(setting, n, derive_key(ns.seed, "data", *tag))
                for est in estimators:
                    rep = run_estimator(
                        est, ds, config,
                        derive_key(ns.seed, "est", est, *tag),
                        k=k, threads=ns.threads)
                    rows.append((name, panel, setting.pi, setting.d, n,
                                 est, trial, rep.mi, rep.mi_normalized))
            print(f"{name}: {panel}={point:g} done", flush=True)
    path = os.path.join(out_dir, "fig3_mi.csv")
    _write_csv(path, ("setting", "panel", "pi", "d", "n", "estimator",
                      "trial", "mi", "mi_normalized"), rows)
    print(f"wrote {path}")
    if not ns.no_svg:
        for name in settings:
            for panel, x_pos, x_label in (("pi", 2, "class prior"),
                                          ("d", 3, "dimensions")):
                sub = [r for r in rows if r[0] == name and r[1] == panel]
                means = _mean_by(sub, lambda r: r[5], lambda r: r[x_pos],
                                 lambda r: r[8])
                svg_path = os.path.join(out_dir, f"fig3_{name}_{panel}.svg")
                line_plot(_fig_estimator_series(means), svg_path,
                          title=f"Normalized MI vs {x_label}, {name}",
                          x_label=x_label, y_label="I(X;Y) / H(Y)")
                print(f"wrote {svg_path}")


def _fig4(ns, out_dir: str) -> None:
    if not ns.in_path:
        raise ConfigError("fig4 needs --in pointing at the neuron-feature "
                          "CSV (columns like claw,dist,age,cluster,type)")
    reps = ns.reps if ns.reps is not None else 1000
    trees = ns.trees if ns.trees is not None else 300
    config = ForestConfig(n_trees=trees)
    ds = _load_labeled(ns.in_path, ns.label_column)
    _echo("reproduce", {"figure": "fig4", "in": ns.in_path,
                        "label_column": ns.label_column, "reps": reps,
                        "trees": trees, "seed": ns.seed, "out_dir": out_dir,
                        "threads": ns.threads})
    subsets = (_parse_subsets(ns.subset) if ns.subset
               else [list(s) for s in _FIG4_SUBSETS])
    rows = mi_decomposition(ds, subsets, config, ns.seed)
    h_y = empirical_entropy(ds.labels)
    header = ("in_features", "i_in", "i_cond", "i_total",
              "i_in_norm", "i_cond_norm", "i_total_norm")
    out_rows = [(";".join(r.in_features), r.i_in, r.i_cond, r.i_total,
                 r.i_in / h_y, r.i_cond / h_y, r.i_total / h_y)
                for r in rows]
    path = os.path.join(out_dir, "fig4_decomposition.csv")
    _write_csv(path, header, out_rows)
    print(f"h_y = {format(h_y, '.17g')}")
    print(f"i_total = {format(rows[0].i_total, '.17g')} "
          f"(normalized {rows[0].i_total / h_y:.4f})")
    print(f"wrote {path}")

    def est(data, cfg, seed):
        return run_estimator("uf", data, cfg, seed, threads=ns.threads)

    result = permutation_test(ds, config, reps, ns.seed, estimator=est)
    print(f"p_value = {format(result.p_value, '.17g')} ({reps} replicates)")
    null_path = os.path.join(out_dir, "fig4_null.csv")
    _write_csv(null_path, ("replicate", "mi"),
               [(-1, result.observed)] + list(enumerate(result.null_values)))
    print(f"wrote {null_path}")


def _cmd_reproduce(ns) -> int:
    out_dir = ns.out_dir
    os.makedirs(out_dir, exist_ok=True)
    fig = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4}
    fig[ns.figure](ns, out_dir)
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uforest",
                     description="Honest forests for conditional entropy "
                                 "and mutual information.")
    parser.add_argument("--version", action="version",
                        version=f"uforest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def sim_flags(p, n_required: bool):
        p.add_argument("--setting", choices=SETTING_NAMES,
                       default="spherical",
                       help="generative setting (default spherical)")
        p.add_argument("--mu", type=float, default=1.0,
                       help="class-mean separation (default 1)")
        p.add_argument("--pi", type=float, default=0.5,
                       help="first-class prior (default 0.5)")
        p.add_argument("--d", type=int, default=1,
                       help="feature dimensions incl. noise (default 1)")
        p.add_argument("--n", type=int, required=n_required,
                       help="rows to draw" + ("" if n_required
                                              else " (required without --in)"))

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    sim_flags(p, n_required=True)
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--label-column", default="label",
                   help="label column name (default label)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="run one estimator on a CSV")
    p.add_argument("--estimator", choices=ESTIMATOR_NAMES, default="uf",
                   help="estimator name (default uf)")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH",
                   help="input dataset CSV")
    p.add_argument("--label-column", default="label",
                   help="label column name (default label)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", help="optional one-row report CSV")
    _add_forest_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("sweep", help="grid x trials x estimators, to CSV")
    p.add_argument("--setting", choices=SETTING_NAMES, default="spherical",
                   help="generative setting (default spherical)")
    p.add_argument("--n", required=True,
                   help="comma-separated sample sizes, e.g. 500,1000")
    p.add_argument("--d", default="1",
                   help="comma-separated dimensions (default 1)")
    p.add_argument("--mu", default="1.0",
                   help="comma-separated separations (default 1.0)")
    p.add_argument("--pi", default="0.5",
                   help="comma-separated first-class priors (default 0.5)")
    p.add_argument("--estimators", default="uf",
                   help=f"comma-separated subset of "
                        f"{','.join(ESTIMATOR_NAMES)} (default uf)")
    p.add_argument("--trials", type=int, default=20,
                   help="trials per grid cell (default 20)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", required=True, help="report CSV path")
    _add_forest_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("permtest",
                       help="label-permutation test of I(X;Y) > 0")
    p.add_argument("--in", dest="in_path", metavar="PATH",
                   help="input dataset CSV (otherwise simulate)")
    p.add_argument("--label-column", default="label",
                   help="label column name (default label)")
    sim_flags(p, n_required=False)
    p.add_argument("--estimator", choices=ESTIMATOR_NAMES, default="uf",
                   help="estimator under test (default uf)")
    p.add_argument("--reps", type=int, default=199,
                   help="permutation replicates (default 199)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", help="optional CSV of null replicates")
    _add_forest_flags(p)
    p.set_defaults(func=_cmd_permtest)

    p = sub.add_parser("decompose",
                       help="split I(X;Y) over feature subsets")
    p.add_argument("--in", dest="in_path", required=True, metavar="PATH",
                   help="input dataset CSV")
    p.add_argument("--label-column", default="label",
                   help="label column name (default label)")
    p.add_argument("--subset", action="append", metavar="NAMES",
                   help="comma-separated feature names; repeatable; an "
                        "empty string is the empty subset (default: each "
                        "feature alone)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--out", help="optional decomposition CSV")
    _add_forest_flags(p)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("reproduce",
                       help="desk-scale figure presets fig1..fig4")
    p.add_argument("figure", choices=_FIGURES,
                   help="fig1 posteriors, fig2 convergence, fig3 MI "
                        "across settings, fig4 neuron-type decomposition")
    p.add_argument("--out-dir", default=".",
                   help="directory for CSV/SVG outputs (default .)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--trials", type=int,
                   help="trials per cell (defaults: fig1 20, fig2 20 or "
                        "10 for the wide panel, fig3 5)")
    p.add_argument("--trees", type=int,
                   help="trees per forest (defaults: 300, or 100 for "
                        "wide/sweep panels)")
    p.add_argument("--threads", type=int,
                   help="worker threads (default: UFOREST_THREADS or 1)")
    p.add_argument("--no-svg", action="store_true",
                   help="skip SVG plots, write CSVs only")
    p.add_argument("--panels", default="A",
                   help="fig2 panels, comma-separated subset of A,B,C,D "
                        "(default A)")
    p.add_argument("--settings", default=",".join(SETTING_NAMES),
                   help="fig3 settings (default: all three)")
    p.add_argument("--n", type=int, default=3000,
                   help="fig3 sample size (default 3000)")
    p.add_argument("--pi-grid", default="0.1,0.3,0.5,0.7,0.9",
                   help="fig3 prior grid (default 0.1,0.3,0.5,0.7,0.9)")
    p.add_argument("--d-grid", default="2,4,8,16",
                   help="fig3 dimension grid (default 2,4,8,16)")
    p.add_argument("--k", type=int, help="fig3 neighbor count (default 3)")
    p.add_argument("--in", dest="in_path", metavar="PATH",
                   help="fig4 input CSV (neuron features)")
    p.add_argument("--label-column", default="type",
                   help="fig4 label column (default type)")
    p.add_argument("--subset", action="append", metavar="NAMES",
                   help="fig4 feature subsets; default: the documented "
                        "ten rows")
    p.add_argument("--reps", type=int,
                   help="fig4 permutation replicates (default 1000)")
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        code = ns.func(ns)
        return 0 if code is None else code
    except SystemExit as exc:            # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UforestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
