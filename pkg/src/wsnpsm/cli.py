"""Command-line front end.

Exit codes: 0 ok, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from pathlib import Path

from . import experiment, multihop, regress
from .experiment import CsvFormatError, ParamPoint, SweepConfig
from .svgplot import line_chart

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def parse_range(text: str) -> tuple[int, int, int]:
    try:
        lo, hi, step = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi, step


def parse_set(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"set members must be >= 1: {text!r}")
    return values


def _load_dataset(path: str) -> experiment.Dataset:
    try:
        return experiment.import_csv(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except CsvFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_model(path: str) -> regress.RegressionModel:
    try:
        return regress.model_from_json(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_sweep(args) -> int:
    cfg = SweepConfig(args.bp, args.ps, args.nc, args.samples, args.seed, grid_ranges=not args.allow_wide)
    try:
        cfg.points()
    except ValueError as exc:
        raise UsageError(f"{exc} (pass --allow-wide for ranges beyond the standard grid)") from None
    data = experiment.run_sweep(cfg, keep_samples=args.raw is not None, workers=args.threads)
    experiment.export_csv(data, args.out)
    if args.raw:
        experiment.export_raw_csv(data, args.raw)
    return 0


def _diagnostics(model: regress.RegressionModel, rows, level: float) -> list[str]:
    lines = [
        f"model psi{model.variant} ({' + '.join(model.predictors)})  response {model.response}"
        f"  n={model.n} dof={model.dof}",
        f"omega {model.omega:.4f}",
        f"{'coefficient':<12}{'estimate':>16}{'ci_lo':>16}{'ci_hi':>16}  nonzero",
    ]
    for name, c, ci in zip(model.names, model.coefficients, regress.coef_confidence_intervals(model, level)):
        lines.append(f"{name:<12}{c:>16.6g}{ci.lo:>16.6g}{ci.hi:>16.6g}  {'yes' if regress.nonzero_test(ci) else 'no'}")
    if len(model.predictors) > 1:
        lines.append("predictor correlations")
        for (i, a), (j, b) in itertools.combinations(enumerate(model.predictors), 2):
            r, ok = regress.predictor_correlation([x[i] for x, _ in rows], [x[j] for x, _ in rows], level)
            lines.append(f"{a}~{b}  r={r:+.4f}  {'uncorrelated' if ok else 'correlated'}")
    return lines


def cmd_fit(args) -> int:
    data = _load_dataset(args.data)
    predictors = regress.VARIANTS[args.variant]
    if args.per_trial:
        if args.response != "psd":
            raise UsageError("--per-trial only applies to PSD models")
        if not args.raw:
            raise UsageError("--per-trial needs --raw with the raw-sample file")
        try:
            raw = experiment.import_raw_csv(args.raw)
        except (FileNotFoundError, CsvFormatError) as exc:
            raise UsageError(str(exc)) from None
        rows = [
            (tuple(float(getattr(r.point, p)) for p in predictors), float(r.sample.psd))
            for r in raw
            if r.node == experiment.NOI
        ]
    else:
        try:
            rows = regress.dataset_rows(data, args.response, predictors)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    model = regress.fit_ols(rows, args.variant, args.response)
    doc = regress.model_to_json(model)
    if args.out:
        Path(args.out).write_text(doc)
    else:
        sys.stdout.write(doc)
    print("\n".join(_diagnostics(model, rows, args.level)))
    return 0


def cmd_report(args) -> int:
    data = _load_dataset(args.data)
    print(f"{'model':<7}{'predictors':<16}{'omega_psd%':>11}{'omega_plr%':>11}  {'nonzero psd':<12}{'nonzero plr':<12}corr")
    for v, names in regress.VARIANTS.items():
        cells = []
        flags = []
        for response in regress.RESPONSES:
            model = regress.fit_dataset(data, v, response)
            cells.append(f"{100 * model.omega:>11.2f}")
            ci = regress.coef_confidence_intervals(model, args.level)[1:]
            flags.append("".join("y" if regress.nonzero_test(i) else "n" for i in ci))
        corr = "-"
        if len(names) > 1:
            verdicts = [
                regress.predictor_correlation([getattr(r.point, a) for r in data], [getattr(r.point, b) for r in data], args.level)[1]
                for a, b in itertools.combinations(names, 2)
            ]
            corr = "y" if all(verdicts) else "n"
        print(f"psi{v:<4}{' + '.join(names):<16}{''.join(cells)}  {flags[0]:<12}{flags[1]:<12}{corr}")
    return 0


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    point = {"b_p": args.bp, "p_s": args.ps, "n_c": args.nc}
    missing = [n for n in model.predictors if point[n] is None]
    if missing:
        raise UsageError(f"model psi{model.variant} needs --{' --'.join(m.replace('_', '') for m in missing)}")
    if args.hops is not None:
        if model.response != "psd":
            raise UsageError("--hops needs a PSD model")
        if args.ps is None:
            raise UsageError("--hops needs --ps for the receive-side processing delay")
        if args.hops < 0:
            raise UsageError("--hops must be non-negative")
        full = ParamPoint(args.bp or 0, args.ps, args.nc or 0)
        value = multihop.predict_e2ed(model, full, args.hops)
    else:
        value = regress.predict(model, point).value
    print(repr(float(value)))
    return 0


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    if model.response != "psd":
        raise UsageError("validation needs a PSD model")
    if args.max_hops < 1 or args.samples < 2:
        raise UsageError("--max-hops must be >= 1 and --samples >= 2")
    point = ParamPoint(args.bp, args.ps, args.nc)
    report = multihop.validate(model, args.max_hops, args.samples, args.seed, point)
    if args.out:
        multihop.export_report_csv(report, args.out)
    else:
        multihop.export_report_csv(report, sys.stdout)
    return 0


def cmd_plot(args) -> int:
    data = _load_dataset(args.data)
    x_attr = {"bp": "b_p", "ps": "p_s"}[args.x]
    fixed_attr = "p_s" if x_attr == "b_p" else "b_p"
    fixed_values = sorted({getattr(r.point, fixed_attr) for r in data})
    fixed = args.fix
    if fixed is None and fixed_values:
        fixed = 10 if fixed_attr == "b_p" and 10 in fixed_values else fixed_values[0]
    sel = [r for r in data if getattr(r.point, fixed_attr) == fixed]
    if args.y == "plr":
        sel = [r for r in sel if r.plr is not None]
    if not sel:
        raise UsageError("selection is empty")

    series: dict[str, list] = {}
    table = []
    for r in sorted(sel, key=lambda r: (r.point.n_c, getattr(r.point, x_attr))):
        x = getattr(r.point, x_attr)
        if args.y == "psd":
            y = r.psd_mean
            err = regress.t_quantile(0.95, r.n_sent - 1) * r.psd_sd / math.sqrt(r.n_sent) if r.n_sent > 1 else 0.0
        else:
            y, err = r.plr, None
        series.setdefault(f"N_C={r.point.n_c}", []).append((x, y, err))
        table.append((r.point.n_c, x, y, err))

    x_label = {"b_p": "backoff period B_P [slots]", "p_s": "packet size P_S [Byte]"}[x_attr]
    y_label = "mean PSD [µs] (95% CI)" if args.y == "psd" else "PLR [ratio]"
    title = f"{args.y.upper()} vs {x_attr.upper()} at {fixed_attr.upper()}={fixed}"
    out = Path(args.out)
    out.write_text(line_chart(series, x_label, y_label, title, markers_only=False))
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_c", x_attr, f"{args.y}", "ci_half_width"])
        for n_c, x, y, err in table:
            w.writerow([n_c, x, repr(y), "" if err is None else repr(err)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsn-psm", description="CSMA delay/loss laboratory and regression models")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run the parameter sweep and write run summaries")
    s.add_argument("--bp", type=parse_range, default=experiment.GRID_BP, metavar="LO:HI:STEP")
    s.add_argument("--ps", type=parse_range, default=experiment.GRID_PS, metavar="LO:HI:STEP")
    s.add_argument("--nc", type=parse_set, default=experiment.GRID_NC, metavar="N,N,...")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="sweep.csv")
    s.add_argument("--raw", help="also write per-trial samples here")
    s.add_argument("--threads", type=int, default=None, help="worker processes (default: $WSN_PSM_THREADS or CPU count)")
    s.add_argument("--allow-wide", action="store_true", help="permit ranges outside the standard grid")
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("fit", help="fit one model variant and print diagnostics")
    f.add_argument("--data", required=True)
    f.add_argument("--response", choices=regress.RESPONSES, default="psd")
    f.add_argument("--variant", type=int, choices=sorted(regress.VARIANTS), required=True)
    f.add_argument("--out", help="write model JSON here instead of stdout")
    f.add_argument("--level", type=float, default=0.95)
    f.add_argument("--per-trial", action="store_true", help="fit PSD on individual trials (needs --raw)")
    f.add_argument("--raw")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="omega / CI / correlation table for all seven variants")
    r.add_argument("--data", required=True)
    r.add_argument("--level", type=float, default=0.95)
    r.set_defaults(func=cmd_report)

    pr = sub.add_parser("predict", help="evaluate a model, or the E2ED forecast with --hops")
    pr.add_argument("--model", required=True)
    pr.add_argument("--bp", type=int)
    pr.add_argument("--ps", type=int)
    pr.add_argument("--nc", type=int)
    pr.add_argument("--hops", type=int)
    pr.set_defaults(func=cmd_predict)

    v = sub.add_parser("validate", help="compare E2ED forecast with simulated tandems")
    v.add_argument("--model", required=True)
    v.add_argument("--max-hops", type=int, default=10)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--bp", type=int, default=multihop.DEFAULT_POINT.b_p)
    v.add_argument("--ps", type=int, default=multihop.DEFAULT_POINT.p_s)
    v.add_argument("--nc", type=int, default=multihop.DEFAULT_POINT.n_c)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    pl = sub.add_parser("plot", help="SVG chart of PSD or PLR with one series per N_C")
    pl.add_argument("--data", required=True)
    pl.add_argument("--x", choices=("bp", "ps"), required=True)
    pl.add_argument("--series", choices=("nc",), default="nc")
    pl.add_argument("--y", choices=("psd", "plr"), required=True)
    pl.add_argument("--fix", type=int, help="value of the parameter not on the x axis")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wsn-psm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except regress.SingularDesignError as exc:
        print(f"wsn-psm {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (regress.UndefinedOmegaError, FloatingPointError, ArithmeticError) as exc:
        print(f"wsn-psm {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
