"""Command-line front end.

Subcommands: ``train`` runs one case end to end and writes the artifact
set (field CSV, loss history, gradient histograms, weights, manifest);
``compare-formulations`` trains the three case-i formulations under one
fixed budget and tabulates accuracy against end-of-training gradient
magnitudes; ``evaluate`` reloads saved weights and recomputes fields and
metrics without training.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure.
Every number in a CSV is printed with 17 significant digits, so reruns
with the same seeds produce byte-identical data files. The manifest is
written last and lists every other emitted file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import mlp, oracle, physics, train
from .autodiff import NonFiniteLossError
from .mlp import WeightFormatError
from .optim import OptimOptions

__all__ = ["main"]

USAGE_ERROR = 1
NUMERICAL_ERROR = 2

_CONFIG_BOOLS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _fmt(x):
    return format(float(x), ".17g")


# --- config file ------------------------------------------------------------


def parse_config_file(path):
    """Read a ``key = value`` file with ``#`` comments into a string dict."""
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ValueError(f"{path}:{lineno}: empty key or value")
        out[key] = value
    return out


def _parse_bool(value, key):
    try:
        return _CONFIG_BOOLS[value.lower()]
    except KeyError:
        raise ValueError(f"config key {key}: expected a boolean, got {value!r}") from None


def _parse_seeds(value):
    return tuple(int(v) for v in value.replace(",", " ").split())


_CONFIG_INT_KEYS = {"n_col", "eval_grid", "hist_bins"}
_OPTIM_INT_KEYS = {"max_iters", "history", "restarts", "plateau_patience", "max_line_search"}
_OPTIM_FLOAT_KEYS = {"c1", "c2", "grad_tol", "loss_tol", "init_step", "plateau_tol"}


def apply_config(cfg_kwargs, optim_kwargs, items):
    """Fold parsed config entries into TrainConfig / OptimOptions kwargs."""
    for key, value in items.items():
        if key in ("case", "formulation"):
            cfg_kwargs[key] = value
        elif key in _CONFIG_INT_KEYS:
            cfg_kwargs[key] = int(value)
        elif key == "seeds":
            cfg_kwargs["seeds"] = _parse_seeds(value)
        elif key == "normalize":
            cfg_kwargs["normalize"] = _parse_bool(value, key)
        elif key.startswith("optim."):
            sub = key[len("optim."):]
            if sub in _OPTIM_INT_KEYS:
                optim_kwargs[sub] = int(value)
            elif sub in _OPTIM_FLOAT_KEYS:
                optim_kwargs[sub] = float(value)
            else:
                raise ValueError(f"unknown config key {key!r}")
        else:
            raise ValueError(f"unknown config key {key!r}")


def build_train_config(args):
    cfg_kwargs, optim_kwargs = {}, {}
    if args.config:
        apply_config(cfg_kwargs, optim_kwargs, parse_config_file(args.config))
    if args.case is not None:
        cfg_kwargs["case"] = args.case
    if getattr(args, "formulation", None) is not None:
        cfg_kwargs["formulation"] = args.formulation
    if args.seed is not None:
        cfg_kwargs["seeds"] = (args.seed,)
    if getattr(args, "n_col", None) is not None:
        cfg_kwargs["n_col"] = args.n_col
    if getattr(args, "normalize", False):
        cfg_kwargs["normalize"] = True
    if getattr(args, "iters", None) is not None:
        optim_kwargs["max_iters"] = args.iters
    if "case" not in cfg_kwargs:
        raise ValueError("no case given (use --case or a config file)")
    cfg_kwargs["optim"] = OptimOptions(**optim_kwargs)
    return train.TrainConfig(**cfg_kwargs)


# --- file writers -----------------------------------------------------------


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


def write_stress_csv(path, pairs):
    """``pairs`` is a list of (pred, exact) StressField couples; rows are
    emitted in the given order and tagged with each field's region."""
    lines = ["r,sigma_r_pred,sigma_theta_pred,sigma_r_exact,sigma_theta_exact,err_r,err_theta,region"]
    for pred, exact in pairs:
        for i in range(pred.r.size):
            lines.append(",".join([
                _fmt(pred.r[i]),
                _fmt(pred.sigma_r[i]), _fmt(pred.sigma_theta[i]),
                _fmt(exact.sigma_r[i]), _fmt(exact.sigma_theta[i]),
                _fmt(pred.sigma_r[i] - exact.sigma_r[i]),
                _fmt(pred.sigma_theta[i] - exact.sigma_theta[i]),
                pred.region,
            ]))
    _write_lines(path, lines)


def combined_ep_rows(result):
    """Plastic rows on [a, c] then elastic rows past c; the shared
    interface point appears once, from the plastic field."""
    pl = (result.plastic.pred, result.plastic.exact)
    el = (result.elastic.pred, result.elastic.exact)
    el_trim = tuple(
        oracle.StressField(f.r[1:], f.sigma_r[1:], f.sigma_theta[1:], f.region)
        for f in el)
    return [pl, el_trim]


def write_loss_history(path, trace):
    """History rows under positional ``term_i`` headers; the manifest maps
    them back to the named loss pieces."""
    names = list(trace.terms[0].keys()) if trace.terms and trace.terms[0] else []
    header = ["iter", "total"] + [f"term_{i+1}" for i in range(len(names))] + ["grad_norm", "step"]
    lines = [",".join(header)]
    for i in range(len(trace)):
        row = [str(i), _fmt(trace.losses[i])]
        row += [_fmt(trace.terms[i][n]) for n in names]
        row += [_fmt(trace.grad_norms[i]), _fmt(trace.steps[i])]
        lines.append(",".join(row))
    _write_lines(path, lines)
    return names


def write_gradhist(path, hists):
    lines = ["layer,bin_low,bin_high,count"]
    for h in hists:
        for b in range(h.counts.size):
            lines.append(",".join([
                str(h.layer), _fmt(h.bin_edges[b]), _fmt(h.bin_edges[b + 1]),
                str(int(h.counts[b])),
            ]))
    _write_lines(path, lines)


def _metrics_dict(m):
    return {"mse_r": m.mse_r, "mse_theta": m.mse_theta,
            "r2_r": m.r2_r, "r2_theta": m.r2_theta,
            "max_abs_err": m.max_abs_err}


def _config_dict(cfg):
    d = {"case": cfg.case, "formulation": cfg.formulation, "n_col": cfg.n_col,
         "seeds": list(cfg.seeds), "normalize": cfg.normalize,
         "eval_grid": cfg.eval_grid, "hist_bins": cfg.hist_bins,
         "optim": asdict(cfg.optim)}
    return d


def write_manifest(out_dir, payload, files):
    """Written last; ``files`` lists every previously emitted artifact."""
    payload = dict(payload)
    payload["files"] = sorted(files)
    payload["finished"] = _now()
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def _now():
    return datetime.now(timezone.utc).isoformat()


# --- SVG plots --------------------------------------------------------------

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def _svg_chart(path, title, xlabel, ylabel, series, log_y=False):
    """Hand-rolled polyline chart; ``series`` is (label, xs, ys) triples."""
    width, height, ml, mr, mt, mb = 720, 480, 70, 160, 40, 55
    pw, ph = width - ml - mr, height - mt - mb

    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    if log_y:
        ys_all = ys_all[ys_all > 0]
        if ys_all.size == 0:
            ys_all = np.array([1e-16, 1.0])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if log_y:
        y0, y1 = np.log10(y0), np.log10(y1)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2}" y="{mt - 14}" text-anchor="middle" font-size="15">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="18" y="{mt + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {mt + ph / 2})">{ylabel}</text>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        gx, gy = px(fx), py(fy)
        ylab = f"1e{fy:.1f}" if log_y else f"{fy:.3g}"
        parts.append(f'<line x1="{gx:.1f}" y1="{mt}" x2="{gx:.1f}" y2="{mt + ph}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<line x1="{ml}" y1="{gy:.1f}" x2="{ml + pw}" y2="{gy:.1f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{gx:.1f}" y="{mt + ph + 18}" text-anchor="middle">{fx:.3g}</text>')
        parts.append(f'<text x="{ml - 8}" y="{gy + 4:.1f}" text-anchor="end">{ylab}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = []
        for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)):
            if log_y:
                if y <= 0:
                    continue
                y = np.log10(y)
            pts.append(f"{px(x):.2f},{py(y):.2f}")
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 16 + 18 * k
        parts.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 34}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw + 40}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _plot_stress(path, pairs, title):
    series = []
    for pred, exact in pairs:
        tag = "" if pred.region == "whole" else f" ({pred.region})"
        series.append((f"radial pred{tag}", pred.r, pred.sigma_r))
        series.append((f"radial exact{tag}", exact.r, exact.sigma_r))
        series.append((f"tangential pred{tag}", pred.r, pred.sigma_theta))
        series.append((f"tangential exact{tag}", exact.r, exact.sigma_theta))
    _svg_chart(path, title, "radius (m)", "stress (kPa)", series)


def _plot_loss(path, traces, title):
    series = [(label, np.arange(len(tr)), np.array(tr.losses)) for label, tr in traces]
    _svg_chart(path, title, "iteration", "loss", series, log_y=True)


# --- subcommands ------------------------------------------------------------


def _prepare_out(args, default_name):
    out = Path(args.out) if args.out else Path(default_name)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args):
    cfg = build_train_config(args)
    out = _prepare_out(args, f"cavex_run_{cfg.case}")
    started = _now()
    files, term_maps, payload_metrics, timing = [], {}, {}, {}

    if cfg.case in train.ELASTIC_CASES:
        rep = train.train_case(cfg)
        _check_finite_report(rep)
        write_stress_csv(out / "stress_field.csv", [(rep.pred, rep.exact)])
        names = write_loss_history(out / "loss_history.csv", rep.trace)
        term_maps["loss_history.csv"] = {f"term_{i+1}": n for i, n in enumerate(names)}
        write_gradhist(out / "gradhist.csv", rep.histograms)
        mlp.save_weights(rep.params, out / "weights.txt")
        files += ["stress_field.csv", "loss_history.csv", "gradhist.csv", "weights.txt"]
        payload_metrics["whole"] = _metrics_dict(rep.metrics)
        payload_metrics["final_loss"] = rep.trace.best_loss
        payload_metrics["winning_seed"] = rep.seed
        timing["train_s"] = rep.seconds
        if args.plot:
            _plot_stress(out / "stress_field.svg", [(rep.pred, rep.exact)],
                         f"case {cfg.case}: predicted vs exact stresses")
            _plot_loss(out / "loss_history.svg", [("total loss", rep.trace)],
                       f"case {cfg.case}: training loss")
            files += ["stress_field.svg", "loss_history.svg"]
    else:
        res = train.train_elastoplastic(cfg)
        _check_finite_report(res.elastic)
        _check_finite_report(res.plastic)
        write_stress_csv(out / "stress_field.csv", combined_ep_rows(res))
        for tag, rep in (("elastic", res.elastic), ("plastic", res.plastic)):
            names = write_loss_history(out / f"loss_history_{tag}.csv", rep.trace)
            term_maps[f"loss_history_{tag}.csv"] = {f"term_{i+1}": n for i, n in enumerate(names)}
            write_gradhist(out / f"gradhist_{tag}.csv", rep.histograms)
            mlp.save_weights(rep.params, out / f"weights_{tag}.txt")
            files += [f"loss_history_{tag}.csv", f"gradhist_{tag}.csv", f"weights_{tag}.txt"]
            payload_metrics[tag] = _metrics_dict(rep.metrics)
            timing[f"train_{tag}_s"] = rep.seconds
        files.append("stress_field.csv")
        payload_metrics["frozen_interface"] = list(res.frozen)
        payload_metrics["recovered_pressure"] = res.recovered_pressure
        payload_metrics["final_loss_elastic"] = res.elastic.trace.best_loss
        payload_metrics["final_loss_plastic"] = res.plastic.trace.best_loss
        if args.plot:
            _plot_stress(out / "stress_field.svg", combined_ep_rows(res),
                         f"case {cfg.case}: predicted vs exact stresses")
            _plot_loss(out / "loss_history.svg",
                       [("elastic stage", res.elastic.trace), ("plastic stage", res.plastic.trace)],
                       f"case {cfg.case}: training loss")
            files += ["stress_field.svg", "loss_history.svg"]

    write_manifest(out, {
        "command": "train", "started": started,
        "config_file": args.config, "config": _config_dict(cfg),
        "term_names": term_maps, "metrics": payload_metrics,
        "timing_s": timing, "exit_status": 0,
    }, files)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


def _check_finite_report(rep):
    if not np.isfinite(rep.trace.best_loss) or rep.trace.reason == "diverged":
        raise NonFiniteLossError(f"training diverged (reason: {rep.trace.reason})")


def cmd_compare(args):
    seed = args.seed if args.seed is not None else 0
    iters = args.iters if args.iters is not None else 200
    # one fixed budget, no tolerance stops, so end-of-training gradients are
    # comparable across formulations; the tail window smooths the
    # iterate-to-iterate gradient swing
    opts = OptimOptions(max_iters=iters, grad_tol=0.0, loss_tol=0.0,
                        plateau_patience=0, capture_grads=50)
    out = _prepare_out(args, "cavex_formulations")
    started = _now()

    rows, files, metrics = [], [], {}
    for form in ("A", "B", "C"):
        cfg = train.TrainConfig(case="i", formulation=form, seeds=(seed,), optim=opts)
        rep = train.train_case(cfg)
        _check_finite_report(rep)
        write_gradhist(out / f"gradhist_{form}.csv", rep.histograms)
        files.append(f"gradhist_{form}.csv")
        means = train.tail_mean_abs_grads(rep.trace, rep.params)
        rows.append([form, rep.metrics.mse_r, rep.metrics.mse_theta] + means)
        metrics[form] = _metrics_dict(rep.metrics)
        metrics[form]["mean_abs_grad"] = means
        metrics[form]["final_loss"] = rep.trace.best_loss

    n_layers = len(rows[0]) - 3
    header = ["formulation", "mse_r", "mse_theta"] + [f"mean_abs_grad_l{i+1}" for i in range(n_layers)]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join([row[0]] + [_fmt(v) for v in row[1:]]))
    _write_lines(out / "formulations.csv", lines)
    files.append("formulations.csv")

    write_manifest(out, {
        "command": "compare-formulations", "started": started,
        "config": {"case": "i", "seed": seed, "iters": iters},
        "metrics": metrics, "exit_status": 0,
    }, files)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


def _load_case_weights(paths, case):
    nets = []
    for p in paths:
        params = mlp.load_weights(p)
        if params.widths[-1] != 2:
            raise ValueError(
                f"{p}: expected a 2-output stress net, found {params.widths[-1]} outputs")
        nets.append(params)
    want = 2 if case in train.EP_CASES else 1
    if len(nets) != want:
        raise ValueError(
            f"case {case} needs {want} weight file(s) (got {len(nets)}); "
            "pass elastic then plastic for the two-region cases")
    return nets


def cmd_evaluate(args):
    case = args.case
    if case not in physics.CASES:
        raise ValueError(f"unknown case {case!r}")
    spec = physics.CASES[case]
    nets = _load_case_weights(args.weights, case)
    grid_n = args.grid if args.grid is not None else 100
    if grid_n < 2:
        raise ValueError("need at least two grid points")
    out = _prepare_out(args, f"cavex_eval_{case}")
    started = _now()
    files, payload_metrics = [], {}

    if case in train.ELASTIC_CASES:
        grid = np.linspace(spec.a, spec.b, grid_n)
        pred_out = mlp.forward(nets[0], grid)
        pred = oracle.StressField(grid, pred_out[:, 0], pred_out[:, 1])
        exact = (oracle.lame_solution(spec, grid) if case == "i"
                 else oracle.aniso_solution(spec, grid))
        pairs = [(pred, exact)]
        payload_metrics["whole"] = _metrics_dict(oracle.metrics(pred, exact))
    else:
        grid_e = np.linspace(spec.c, spec.b, grid_n)
        grid_p = np.linspace(spec.a, spec.c, grid_n)
        ex_e, ex_p = oracle.ep_solution(spec, (grid_e, grid_p))
        out_e = mlp.forward(nets[0], grid_e)
        out_p = mlp.forward(nets[1], grid_p)
        pr_e = oracle.StressField(grid_e, out_e[:, 0], out_e[:, 1], "elastic")
        pr_p = oracle.StressField(grid_p, out_p[:, 0], out_p[:, 1], "plastic")
        el_trim = tuple(oracle.StressField(f.r[1:], f.sigma_r[1:], f.sigma_theta[1:], f.region)
                        for f in (pr_e, ex_e))
        pairs = [(pr_p, ex_p), el_trim]
        payload_metrics["elastic"] = _metrics_dict(oracle.metrics(pr_e, ex_e))
        payload_metrics["plastic"] = _metrics_dict(oracle.metrics(pr_p, ex_p))
        payload_metrics["recovered_pressure"] = float(mlp.forward(nets[1], spec.a)[0])

    write_stress_csv(out / "stress_field.csv", pairs)
    files.append("stress_field.csv")
    if args.plot:
        _plot_stress(out / "stress_field.svg", pairs,
                     f"case {case}: stresses from saved weights")
        files.append("stress_field.svg")

    write_manifest(out, {
        "command": "evaluate", "started": started,
        "config": {"case": case, "weights": [str(p) for p in args.weights], "grid": grid_n},
        "metrics": payload_metrics, "exit_status": 0,
    }, files)
    print(f"wrote {len(files) + 1} files to {out}")
    return 0


# --- entry point ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits with status 2 on usage errors; the contract here
        # reserves 2 for numerical failures
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser():
    parser = _Parser(prog="cavex", description=(
        "Physics-trained neural solver for spherical cavity expansion: "
        "train stress nets, compare loss formulations, evaluate saved weights."))
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one case and write its artifacts")
    p_train.add_argument("--case", choices=sorted(physics.CASES), help="problem case")
    p_train.add_argument("--formulation", choices=("A", "B", "C"),
                         help="governing-equation formulation (case i only for A/B)")
    p_train.add_argument("--config", help="key = value config file")
    p_train.add_argument("--seed", type=int, help="single seed (overrides the restart list)")
    p_train.add_argument("--n-col", type=int, dest="n_col", help="collocation point count")
    p_train.add_argument("--iters", type=int, help="optimizer iteration cap")
    p_train.add_argument("--normalize", action="store_true",
                         help="map the input radius to [-1, 1] during training")
    p_train.add_argument("--out", help="output directory")
    p_train.add_argument("--plot", action="store_true", help="also write SVG charts")
    p_train.set_defaults(func=cmd_train)

    p_cmp = sub.add_parser("compare-formulations",
                           help="train formulations A, B, C on case i with one budget")
    p_cmp.add_argument("--seed", type=int, help="seed (default 0)")
    p_cmp.add_argument("--iters", type=int, help="fixed iteration budget (default 200)")
    p_cmp.add_argument("--out", help="output directory")
    p_cmp.set_defaults(func=cmd_compare)

    p_eval = sub.add_parser("evaluate", help="recompute fields and metrics from saved weights")
    p_eval.add_argument("--case", required=True, help="problem case")
    p_eval.add_argument("--weights", required=True, nargs="+",
                        help="weight file (elastic then plastic for cases iii/iv)")
    p_eval.add_argument("--grid", type=int, help="evaluation grid size (default 100)")
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--plot", action="store_true", help="also write SVG charts")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"cavex: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"cavex: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except WeightFormatError as e:
        print(f"cavex: error: line {e.line}: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, OSError) as e:
        print(f"cavex: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (NonFiniteLossError, FloatingPointError) as e:
        print(f"cavex: numerical failure: {e}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
