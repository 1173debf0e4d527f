"""Command-line front end.

Subcommands: ergodic, wideband, outage, dmt, simulate, figure.  Results are
written as CSV (one ``#`` metadata line, header row, data rows) or JSON
(column arrays) to --out or stdout.  SNR is taken in dB and converted to
linear power internally; rates are accepted in bits or nats and reported in
both.  All randomness derives from --seed.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import channel, ergodic, mcsim, outage
from .specfun import ConvergenceError, QuadratureSpec

_LOG2 = math.log(2.0)

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _write_table(path, fmt, meta: dict, columns: list[str], rows: list[dict]):
    if fmt == "json":
        payload = {
            "meta": {k: _fmt(v) for k, v in meta.items()},
            "columns": {c: [_fmt(row[c]) for row in rows] for c in columns},
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = ["# " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(meta.items()))]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(row[c]) for c in columns))
        text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_alpha(text: str):
    if text == "optimal":
        return ("optimal", None)
    if text.startswith("suboptimal:"):
        return ("suboptimal", float(text.split(":", 1)[1]))
    return ("fixed", float(text))


def _parse_power_mode(text: str) -> outage.PowerMode:
    if text == "short-term":
        return outage.PowerMode.short_term()
    if text == "long-term":
        return outage.PowerMode.long_term()
    if text.startswith("explicit:"):
        parts = text.split(":", 1)[1].split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError("explicit mode needs explicit:<P1>,<P0>")
        return outage.PowerMode.explicit(float(parts[0]), float(parts[1]))
    raise argparse.ArgumentTypeError(f"unknown power mode {text!r}")


def _parse_sweep(text: str):
    # <param>=<start>:<stop>:<points>[:log]
    try:
        name, rest = text.split("=", 1)
        parts = rest.split(":")
        log = False
        if len(parts) == 4:
            if parts[3] != "log":
                raise ValueError
            log = True
            parts = parts[:3]
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(
            "sweep must be <param>=<start>:<stop>:<points>[:log]"
        )
    if points < 1:
        raise argparse.ArgumentTypeError("sweep needs at least one point")
    if log:
        values = np.geomspace(start, stop, points)
    else:
        values = np.linspace(start, stop, points)
    return name.replace("-", "_"), [float(v) for v in values]


def _resolve_rho(args) -> channel.CorrelationParams:
    if args.rho is not None:
        return channel.CorrelationParams(args.rho)
    if args.doppler_hz is not None and args.delay_s is not None:
        return channel.rho_from_jakes(
            channel.JakesParams(args.doppler_hz, args.delay_s)
        )
    return channel.CorrelationParams(1.0)


def _rate_nats(args) -> float:
    if args.rate_nats is not None:
        return args.rate_nats
    if args.rate_bits is not None:
        return args.rate_bits * _LOG2
    raise SystemExit(_usage_error("outage commands require --rate-bits or --rate-nats"))


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _add_common(p):
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--doppler-hz", type=float, default=None)
    p.add_argument("--delay-s", type=float, default=None)
    p.add_argument("--alpha", type=str, default=None)
    p.add_argument("--rate-bits", type=float, default=None)
    p.add_argument("--rate-nats", type=float, default=None)
    p.add_argument("--power-mode", type=_parse_power_mode, default=None)
    p.add_argument("--n-blocks", type=int, default=100000)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--sweep", type=_parse_sweep, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="onebitfb",
        description="Performance analysis of 1-bit feedback Rayleigh broadcast channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ergodic", "wideband", "outage", "dmt", "simulate"):
        _add_common(sub.add_parser(name))
    sub.choices["dmt"].add_argument(
        "--scheme", choices=outage.DMT_SCHEMES + ("outdated",), default="longterm_1bit"
    )
    fig = sub.add_parser("figure")
    fig.add_argument("figure_id", choices=FIGURE_IDS)
    _add_common(fig)
    return parser


def _sweep_rows(args, base: dict, param_values):
    """Yield one parameter dict per sweep point (or the single base point)."""
    if param_values is None:
        yield dict(base)
        return
    name, values = param_values
    if name not in base:
        raise SystemExit(_usage_error(f"cannot sweep unknown parameter {name!r}"))
    for v in values:
        row = dict(base)
        row[name] = int(round(v)) if name == "k" else v
        yield row


def _alpha_for(args, k: int, power: float, corr) -> float:
    if args.alpha is None:
        kind, value = ("optimal", None)
    else:
        kind, value = _parse_alpha(args.alpha)
    if kind == "fixed":
        return value
    if kind == "suboptimal":
        return ergodic.suboptimal_threshold(k, value)
    return ergodic.optimal_threshold(k, power, corr)


def _cmd_ergodic(args) -> int:
    base = {"k": args.k, "snr_db": args.snr_db, "rho": _resolve_rho(args).rho}
    rows = []
    for pt in _sweep_rows(args, base, args.sweep):
        corr = channel.CorrelationParams(pt["rho"])
        power = 10.0 ** (pt["snr_db"] / 10.0)
        alpha = _alpha_for(args, pt["k"], power, corr)
        rep = ergodic.ergodic_report(
            ergodic.ErgodicConfig(pt["k"], power, corr, alpha)
        )
        rows.append(
            {
                "k": pt["k"],
                "snr_db": pt["snr_db"],
                "rho": pt["rho"],
                "alpha": alpha,
                "rate_nats": rep.rate_nats,
                "rate_bits": rep.rate_nats / _LOG2,
                "upper_nats": rep.upper_nats,
                "lower_nats": rep.lower_nats,
                "prob_transmit": rep.prob_transmit,
            }
        )
    meta = {"command": "ergodic", "alpha": args.alpha or "optimal", **base}
    _write_table(args.out, args.format, meta, list(rows[0]), rows)
    return 0


def _cmd_wideband(args) -> int:
    base = {"k": args.k, "rho": _resolve_rho(args).rho}
    rows = []
    for pt in _sweep_rows(args, base, args.sweep):
        corr = channel.CorrelationParams(pt["rho"])
        power = 10.0 ** (args.snr_db / 10.0)
        alpha = _alpha_for(args, pt["k"], power, corr)
        rep = ergodic.wideband_metrics(alpha, pt["k"], corr)
        rows.append(
            {
                "k": pt["k"],
                "rho": pt["rho"],
                "alpha": alpha,
                "ebn0_min_db": rep.ebn0_min_db,
                "ebn0_min_linear": rep.ebn0_min_linear,
                "slope_s0": rep.slope_s0,
            }
        )
    meta = {"command": "wideband", **base}
    _write_table(args.out, args.format, meta, list(rows[0]), rows)
    return 0


def _outage_row(k, snr_db, rho, rate, mode, alpha_arg):
    corr = channel.CorrelationParams(rho)
    power = 10.0 ** (snr_db / 10.0)
    if alpha_arg is None:
        alpha = outage.default_threshold(mode, power, rate)
    else:
        kind, value = _parse_alpha(alpha_arg)
        if kind != "fixed":
            raise SystemExit(_usage_error("outage thresholds must be numeric or omitted"))
        alpha = value
    cfg = outage.OutageConfig(k, power, corr, rate, alpha, mode)
    rep = outage.outage_outdated(cfg)
    return {
        "k": k,
        "snr_db": snr_db,
        "rho": rho,
        "rate_nats": rate,
        "rate_bits": rate / _LOG2,
        "alpha": alpha,
        "power_mode": mode.kind,
        "p1": rep.p1,
        "p0": rep.p0,
        "eps": rep.eps,
        "eps1": rep.eps1,
        "eps0": rep.eps0,
    }


def _cmd_outage(args) -> int:
    rate = _rate_nats(args)
    mode = args.power_mode or outage.PowerMode.long_term()
    base = {
        "k": args.k,
        "snr_db": args.snr_db,
        "rho": _resolve_rho(args).rho,
        "rate_nats": rate,
    }
    rows = [
        _outage_row(pt["k"], pt["snr_db"], pt["rho"], pt["rate_nats"], mode, args.alpha)
        for pt in _sweep_rows(args, base, args.sweep)
    ]
    meta = {"command": "outage", "power_mode": mode.kind, **base}
    _write_table(args.out, args.format, meta, list(rows[0]), rows)
    return 0


def _cmd_dmt(args) -> int:
    scheme = "outdated_1bit" if args.scheme == "outdated" else args.scheme
    curve = outage.dmt_analytic(scheme, args.k)
    rows = [{"r": p.r, "d": p.d} for p in curve.points]
    meta = {"command": "dmt", "scheme": scheme, "k": args.k}
    _write_table(args.out, args.format, meta, ["r", "d"], rows)
    return 0


def _cmd_simulate(args) -> int:
    corr = _resolve_rho(args)
    power = 10.0 ** (args.snr_db / 10.0)
    outage_mode = args.rate_bits is not None or args.rate_nats is not None
    alpha_arg = args.alpha
    rows = []
    base = {"k": args.k, "snr_db": args.snr_db, "rho": corr.rho}
    for pt in _sweep_rows(args, base, args.sweep):
        corr_pt = channel.CorrelationParams(pt["rho"])
        power_pt = 10.0 ** (pt["snr_db"] / 10.0)
        if outage_mode:
            rate = _rate_nats(args)
            mode = args.power_mode or outage.PowerMode.long_term()
            if alpha_arg is None:
                alpha = outage.default_threshold(mode, power_pt, rate)
            else:
                alpha = _parse_alpha(alpha_arg)[1]
            cfg = mcsim.SimConfig(
                pt["k"], power_pt, corr_pt, alpha, args.n_blocks, args.seed,
                rate_nats=rate, mode=mode,
            )
            est = mcsim.simulate_outage(cfg)
            pw = mcsim.simulate_avg_power(cfg)
            rows.append(
                {
                    **pt,
                    "alpha": alpha,
                    "eps_mean": est.mean,
                    "eps_stderr": est.stderr,
                    "avg_power": pw.mean,
                    "n_blocks": est.n,
                    "seed": args.seed,
                }
            )
        else:
            alpha = _alpha_for(args, pt["k"], power_pt, corr_pt)
            cfg = mcsim.SimConfig(
                pt["k"], power_pt, corr_pt, alpha, args.n_blocks, args.seed
            )
            est = mcsim.simulate_ergodic_rate(cfg)
            rows.append(
                {
                    **pt,
                    "alpha": alpha,
                    "rate_nats_mean": est.mean,
                    "rate_bits_mean": est.mean / _LOG2,
                    "rate_stderr": est.stderr,
                    "n_blocks": est.n,
                    "seed": args.seed,
                }
            )
    meta = {"command": "simulate", "seed": args.seed, **base}
    _write_table(args.out, args.format, meta, list(rows[0]), rows)
    return 0


def _figure_out(args, series: str) -> str | None:
    if args.out is None:
        return None
    stem, dot, ext = args.out.rpartition(".")
    if dot and ext in ("csv", "json"):
        return f"{stem}_{series}.{ext}"
    return f"{args.out}_{series}.{args.format}"


def _emit_series(args, figure_id: str, series: str, columns, rows):
    meta = {"command": "figure", "figure_id": figure_id, "series": series,
            "seed": args.seed}
    _write_table(_figure_out(args, series), args.format, meta, columns, rows)


def _cmd_figure(args) -> int:
    fid = args.figure_id
    if fid == "fig1":
        _figure1(args)
    elif fid == "fig2":
        _figure2(args)
    elif fid == "fig3":
        _figure3(args)
    elif fid == "fig4":
        _figure4(args)
    else:
        _figure5(args)
    return 0


def _figure1(args):
    """Ergodic sum-rate vs number of users at P = 20 dB."""
    power = 10.0 ** (args.snr_db / 10.0)
    ks = [2 ** i for i in range(1, 11)]
    quad = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-7)
    series = {
        "full_csi": lambda k: ergodic.full_csi_rate(k, power, quad),
        "onebit_rho1.0": lambda k: _opt_rate(k, power, 1.0, quad),
        "onebit_rho0.9": lambda k: _opt_rate(k, power, 0.9, quad),
        "onebit_rho0.5": lambda k: _opt_rate(k, power, 0.5, quad),
        "no_csi": lambda k: ergodic.no_csi_rate(power),
    }
    for name, fn in series.items():
        rows = []
        for k in ks:
            rate = fn(k)
            rows.append({"k": k, "rate_nats": rate, "rate_bits": rate / _LOG2})
        _emit_series(args, "fig1", name, ["k", "rate_nats", "rate_bits"], rows)


def _opt_rate(k: int, power: float, rho: float, quad) -> float:
    corr = channel.CorrelationParams(rho)
    alpha = ergodic.optimal_threshold(k, power, corr, quad)
    return ergodic.sum_rate(ergodic.ErgodicConfig(k, power, corr, alpha), quad)


def _figure2(args):
    """Low-SNR spectral efficiency vs Eb/N0 for K = 100."""
    k = args.k if args.k > 1 else 100
    quad = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)
    grid_db = [(-2.0 + 0.5 * i) for i in range(25)]
    for rho in (1.0, 0.9, 0.5):
        corr = channel.CorrelationParams(rho)
        alpha = ergodic.optimal_threshold(k, 1.0, corr, quad)
        wb = ergodic.wideband_metrics(alpha, k, corr)
        exact_rows, affine_rows = [], []
        for db in grid_db:
            rate, _ = ergodic.rate_at_ebn0(db, k, corr, alpha, quad)
            exact_rows.append(
                {"ebn0_db": db, "rate_nats": rate, "rate_bits": rate / _LOG2}
            )
            approx = ergodic.affine_rate_approx(db, wb)
            affine_rows.append(
                {"ebn0_db": db, "rate_nats": approx, "rate_bits": approx / _LOG2}
            )
        cols = ["ebn0_db", "rate_nats", "rate_bits"]
        _emit_series(args, "fig2", f"exact_rho{rho}", cols, exact_rows)
        _emit_series(args, "fig2", f"affine_rho{rho}", cols, affine_rows)
    # no-CSI reference: single user, alpha = 0
    corr0 = channel.CorrelationParams(0.0)
    rows = []
    for db in grid_db:
        rate, _ = ergodic.rate_at_ebn0(db, 1, corr0, 0.0, quad)
        rows.append({"ebn0_db": db, "rate_nats": rate, "rate_bits": rate / _LOG2})
    _emit_series(args, "fig2", "no_csi", ["ebn0_db", "rate_nats", "rate_bits"], rows)


def _figure3(args):
    """Instantaneous-feedback outage vs SNR, both power constraints."""
    rate = args.rate_bits * _LOG2 if args.rate_bits else 3.0 * _LOG2
    grid_db = [2.0 * i for i in range(21)]
    for k in (1, 8, 16):
        for mode_name, mode in (
            ("short", outage.PowerMode.short_term()),
            ("long", outage.PowerMode.long_term()),
        ):
            rows = []
            for db in grid_db:
                row = _outage_row(k, db, 1.0, rate, mode, None)
                rows.append({"snr_db": db, "eps": row["eps"]})
            _emit_series(args, "fig3", f"k{k}_{mode_name}", ["snr_db", "eps"], rows)


def _figure4(args):
    """Outdated-feedback outage vs SNR for K = 16 under long-term power."""
    rate = args.rate_bits * _LOG2 if args.rate_bits else 3.0 * _LOG2
    k = args.k if args.k > 1 else 16
    mode = outage.PowerMode.long_term()
    grid_db = [2.0 * i for i in range(21)]
    for rho in (0.0, 0.5, 0.9, 1.0):
        rows = []
        for db in grid_db:
            row = _outage_row(k, db, rho, rate, mode, None)
            rows.append({"snr_db": db, "eps": row["eps"]})
        _emit_series(args, "fig4", f"rho{rho}", ["snr_db", "eps"], rows)
    # SISO no-feedback reference at full power
    rows = []
    for db in grid_db:
        power = 10.0 ** (db / 10.0)
        eps = -math.expm1(-math.expm1(rate) / power)
        rows.append({"snr_db": db, "eps": eps})
    _emit_series(args, "fig4", "no_csi", ["snr_db", "eps"], rows)


def _figure5(args):
    """DMT curves for all schemes at K = 16."""
    k = args.k if args.k > 1 else 16
    for scheme in outage.DMT_SCHEMES:
        curve = outage.dmt_analytic(scheme, k)
        rows = [{"r": p.r, "d": p.d} for p in curve.points]
        _emit_series(args, "fig5", scheme, ["r", "d"], rows)


_COMMANDS = {
    "ergodic": _cmd_ergodic,
    "wideband": _cmd_wideband,
    "outage": _cmd_outage,
    "dmt": _cmd_dmt,
    "simulate": _cmd_simulate,
    "figure": _cmd_figure,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConvergenceError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
