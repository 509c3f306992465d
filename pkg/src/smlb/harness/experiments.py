"""Experiment runners: each turns a resolved config into a :class:`ResultTable`."""

from __future__ import annotations

import os
import warnings
from pathlib import Path

import numpy as np

from .. import __version__
from .. import analysis as an
from .. import schedules as sc
from ..errors import ConfigError
from ..linear_model import parse_model
from ..samplers import parse_sampler
from ..targets import GaussianTarget, parse_target
from .config import ExperimentConfig
from .svg import render_svg
from .table import ResultTable


def point_seed(master: int, index: int) -> int:
    """64-bit seed for sweep point ``index``, independent of evaluation order."""
    a, b = np.random.SeedSequence([int(master), int(index)]).generate_state(2, np.uint32)
    return int(a) << 32 | int(b)


def _schedule(spec):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sched = sc.make_schedule(spec)
    return sched, [str(w.message) for w in caught]


def _column_name(prefix, spec):
    return f"{prefix}_{spec.kind}" if spec.exact else f"{prefix}_{spec.kind}_eps{spec.eps:g}"


def _kl(spec, target, model, sched, cfg, seed, workers):
    method = cfg.method or ("exact" if isinstance(target, GaussianTarget) else "knn")
    if method == "mc":
        raise ConfigError("method: KL experiments take 'exact' or 'knn'")
    return an.kl_target_vs_sampler(
        spec, target, model, sched, method=method, n=cfg.n or 150_000, seed=seed,
        k=cfg.knn["k"], n_boot=cfg.knn["n_boot"], workers=workers,
    )


def _fig1(cfg, workers):
    target = parse_target(cfg.target)
    sched, notes = _schedule(cfg.schedule)
    specs = [parse_sampler(s) for s in cfg.samplers]
    knn = (cfg.method or ("exact" if isinstance(target, GaussianTarget) else "knn")) == "knn"
    cols = ["sigma_y2"] + [_column_name("kl", s) for s in specs]
    if knn:
        cols += [_column_name("stderr", s) for s in specs]
    table = ResultTable(cols, notes=notes)
    for i, s2 in enumerate(cfg.sweep["values"]):
        model = parse_model(dict(cfg.model, sigma_y2=float(s2)), d=target.d)
        seed = point_seed(cfg.seed, i)
        ests = [_kl(spec, target, model, sched, cfg, seed, workers) for spec in specs]
        row = [float(s2)] + [e.value for e in ests]
        if knn:
            row += [e.stderr for e in ests]
        table.add(*row)
    return table, ("sigma_y2", cols[1:1 + len(specs)], False, True)


def _fig2_y(cfg, workers):
    target = parse_target(cfg.target)
    sched, notes = _schedule(cfg.schedule)
    spec = parse_sampler(cfg.samplers[0])
    base = np.asarray(cfg.model["y"], dtype=float)
    table = ResultTable(["y_scale", "w_bias", "kl_limit"], notes=notes)
    for i, s in enumerate(cfg.sweep["values"]):
        model = parse_model(dict(cfg.model, y=(float(s) * base).tolist()), d=target.d)
        rep = an.w_bias(spec, target, model, sched, method=cfg.method or "exact",
                        n=cfg.n or an.MC_N, seed=point_seed(cfg.seed, i), stride=cfg.w_bias_stride)
        kl = _kl(spec, target, model, sched, cfg, point_seed(cfg.seed, i), workers)
        table.add(float(s), rep.w_bias, kl.value)
    return table, ("y_scale", ["kl_limit", "w_bias"], False, False)


def _fig2_rho(cfg, workers):
    if "rho" not in cfg.target:
        raise ConfigError("target: the rho sweep needs a 'variances' + 'p' + 'rho' target")
    sched, notes = _schedule(cfg.schedule)
    spec = parse_sampler(cfg.samplers[0])
    table = ResultTable(["rho", "kl_limit"], notes=notes)
    for i, rho in enumerate(cfg.sweep["values"]):
        target = parse_target(dict(cfg.target, rho=float(rho)))
        model = parse_model(cfg.model, d=target.d)
        kl = _kl(spec, target, model, sched, cfg, point_seed(cfg.seed, i), workers)
        table.add(float(rho), kl.value)
    return table, ("rho", ["kl_limit"], False, True)


def _kl_vs_T(cfg, workers):
    target = parse_target(cfg.target)
    model = parse_model(cfg.model, d=target.d)
    spec = parse_sampler(cfg.samplers[0])
    table = ResultTable(["T", "kl", "stderr"])
    for i, T in enumerate(cfg.sweep["values"]):
        sched, notes = _schedule(dict(cfg.schedule, T=int(T)))
        for n in notes:
            if n not in table.notes:
                table.notes.append(n)
        kl = _kl(spec, target, model, sched, cfg, point_seed(cfg.seed, i), workers)
        table.add(int(T), kl.value, kl.stderr)
    return table, ("T", ["kl"], True, True)


def _schedule_check(cfg, workers):
    sched, notes = _schedule(cfg.schedule)
    rep = sched.report
    table = ResultTable(["p", "sum", "reference", "abs_err"], notes=notes)
    table.notes.append(f"max_t (1-alpha_t) T/ln T = {rep.max_scaled_step:.17g}")
    table.notes.append(f"alpha_bar_T * T = {rep.alpha_bar_T_times_T:.17g}")
    if rep.crossover is not None:
        table.notes.append(f"crossover step = {rep.crossover}")
    c = sched.params["c"]
    for p in cfg.sweep["values"]:
        p = float(p)
        s = sc.coefficient_sum(sched, p)
        if sched.kind == "constant":
            ref = sc.constant_sum_closed_form(sched.T, c, p)
        else:
            ref = sc.exp_sum_upper_bound(sched.T, c, p)
        table.add(p, s, ref, abs(s - ref))
    return table, ("p", ["sum", "reference"], False, False)


def _bias_report(cfg, workers):
    target = parse_target(cfg.target)
    model = parse_model(cfg.model, d=target.d)
    sched, notes = _schedule(cfg.schedule)
    specs = [parse_sampler(s) for s in cfg.samplers]
    method = cfg.method or ("exact" if isinstance(target, GaussianTarget) else "mc")
    reports = [an.w_bias(s, target, model, sched, method=method, n=cfg.n or an.MC_N,
                         seed=point_seed(cfg.seed, 0), stride=cfg.w_bias_stride) for s in specs]
    gaussian = isinstance(target, GaussianTarget)
    bound_col = "bound" if gaussian else ("bound_rhs" if model.canonical else None)
    cols = ["t", "weight"] + [_column_name("e_delta_sq", s) for s in specs]
    cols += [_column_name("stderr", s) for s in specs]
    if bound_col:
        cols.append(bound_col)
    table = ResultTable(cols, notes=notes)
    for i, t in enumerate(reports[0].t):
        row = [int(t), float(reports[0].weights[i])]
        row += [float(r.values[i]) for r in reports] + [float(r.stderr[i]) for r in reports]
        if bound_col == "bound":
            row.append(an.bias_bound_gaussian(target, model, sched, int(t)))
        elif bound_col == "bound_rhs":
            row.append(an.bias_bound_mixture(target, model, sched, int(t)))
        table.add(*row)
    for s, r in zip(specs, reports):
        table.notes.append(f"w_bias[{s.label()}] = {r.w_bias:.17g} +- {r.w_bias_stderr:.3g}")
    return table, ("t", cols[2:2 + len(specs)], False, True)


RUNNERS = {
    "fig1_gaussian": _fig1,
    "fig1_mixture": _fig1,
    "fig2_y_sweep": _fig2_y,
    "fig2_rho_sweep": _fig2_rho,
    "kl_vs_T": _kl_vs_T,
    "schedule_check": _schedule_check,
    "bias_report": _bias_report,
}


def build_table(cfg: ExperimentConfig, workers=None):
    """Compute the table for ``cfg``; returns ``(table, plot_spec)``."""
    table, plot = RUNNERS[cfg.experiment](cfg, workers)
    table.footer["experiment"] = cfg.experiment
    table.footer["config_hash"] = cfg.digest()
    table.footer["seed"] = str(cfg.seed)
    table.footer["version"] = f"smlb {__version__}"
    if cfg.schedule:
        table.footer["schedule"] = " ".join(f"{k}={cfg.schedule[k]}" for k in sorted(cfg.schedule))
    table.footer["config"] = cfg.canonical_json()
    return table, plot


def run_experiment(cfg: ExperimentConfig, out=None, workers=None, svg=None):
    """Run ``cfg`` and write ``<out>/<experiment>.csv`` (plus ``.svg``).

    Files are written to temporary names and moved into place at the end; on any
    failure nothing is left behind.
    """
    out = Path(out or cfg.out)
    svg = cfg.svg if svg is None else svg
    created, moved = [], []
    try:
        table, (x_col, y_cols, logx, logy) = build_table(cfg, workers)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{cfg.experiment}.csv"
        pending = [(csv_path, table.to_csv())]
        if svg:
            text = render_svg(table, x_col, y_cols, logx=logx, logy=logy, title=cfg.experiment)
            pending.append((out / f"{cfg.experiment}.svg", text))
        for path, text in pending:
            tmp = path.with_name(path.name + ".part")
            created.append(tmp)
            tmp.write_text(text)
        for path, _ in pending:
            os.replace(path.with_name(path.name + ".part"), path)
            moved.append(path)
        return table, moved
    except BaseException:
        for path in moved:
            path.unlink(missing_ok=True)
        raise
    finally:
        for tmp in created:
            tmp.unlink(missing_ok=True)
