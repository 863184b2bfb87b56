"""Command-line interface.

Subcommands: ``capacity``, ``scheme``, ``concavity``, ``simulate``,
``reproduce`` and ``replay``.  Every file written is accompanied by a
``<file>.manifest.json`` recording the command line, resolved parameters,
input digests and tool version; ``replay`` re-runs a manifest.

Exit codes: 0 success, 1 computation or I/O error, 2 usage error.  The only
environment variable consulted is ``OFDMDFE_THREADS`` (sweep parallelism).
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import contextlib
import hashlib
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .channel import BUILTIN_CHANNELS, freq_response, load_channel, subcarrier_snrs
from .exceptions import AccuracyError, ConditioningError, DomainError
from .qam_capacity import (
    SUPPORTED_ORDERS,
    Constellation,
    awgn_qam_capacity,
    convexity_intervals,
    gaussian_capacity,
    tau,
)
from .schemes import (
    capacity_ratio_sweep,
    dfe_capacity_qam,
    dfe_snr,
    ofdm_capacity_qam,
    per_subcarrier_capacities,
)
from .simulator import SimConfig, simulate_ofdm, simulate_scdfe_genie
from ._validation import db_to_linear

THREADS_ENV = "OFDMDFE_THREADS"


class UsageError(Exception):
    pass


def parse_grid(text):
    """Parse ``a:step:b`` into an array, inclusive of ``b`` when it lies on the grid."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        a, step, b = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be a:step:b, got {text!r}") from None
    if not step > 0 or b < a:
        raise argparse.ArgumentTypeError("grid needs step > 0 and b >= a")
    count = (b - a) / step
    n = int(math.floor(count + 1e-9))
    if abs(count - round(count)) <= 1e-9:
        n = int(round(count))
    return a + step * np.arange(n + 1)


def modulation_order(text):
    try:
        m = int(text)
        Constellation(m)
    except (ValueError, DomainError):
        raise argparse.ArgumentTypeError(
            f"invalid modulation order {text!r}; supported: "
            + ", ".join(map(str, SUPPORTED_ORDERS))
        ) from None
    return m


def _executor():
    threads = os.environ.get(THREADS_ENV)
    if not threads:
        return contextlib.nullcontext(None)
    try:
        n = int(threads)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer") from None
    return ThreadPoolExecutor(max_workers=n) if n > 1 else contextlib.nullcontext(None)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve_channel(args):
    if getattr(args, "channel", None):
        path = Path(args.channel)
        try:
            ch = load_channel(path)
        except OSError as exc:
            raise OSError(f"cannot read channel file {path}: {exc.strerror or exc}") from exc
        except (ValueError, DomainError, TypeError) as exc:
            raise OSError(f"invalid channel file {path}: {exc}") from exc
        return ch, {str(path): _digest(path)}
    return BUILTIN_CHANNELS[args.builtin](), {}


def _write_manifest(out_path, args, params, inputs):
    manifest = {
        "command": args.command,
        "argv": args.argv,
        "parameters": params,
        "inputs": inputs,
        "version": __version__,
        "seed": params.get("seed"),
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) if not isinstance(v, str) else v for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_capacity(args):
    gamma = float(db_to_linear(args.snr_db))
    if args.gaussian:
        value = gaussian_capacity(gamma)
    else:
        value = awgn_qam_capacity(gamma, args.mod)
    print(f"{value:.12f}")
    return 0


def cmd_scheme(args):
    channel, inputs = _resolve_channel(args)
    mod = "gaussian" if args.gaussian else args.mod
    with _executor() as pool:
        curve = capacity_ratio_sweep(channel, args.n, mod, args.snr_db, executor=pool)
    text = curve.to_csv()
    if args.out:
        _write_text(args.out, text)
        params = {"n": args.n, "mod": mod, "snr_db": [float(v) for v in args.snr_db],
                  "channel": [[t.real, t.imag] for t in channel.taps]}
        _write_manifest(args.out, args, params, inputs)
        print(f"min ratio {curve.min_ratio():.6f}  max ratio {curve.max_ratio():.6f}")
    else:
        sys.stdout.write(text)
    return 0


def _interval_report(report, mod):
    lines = [f"M={mod} convexity intervals (tau'' > 0):"]
    if not report.intervals:
        lines.append("  none")
    for iv in report.intervals:
        lines.append(
            f"  [{iv.start:.4f}, {iv.stop:.4f}]  peak {iv.max_value:.6e} at x={iv.argmax:.4f}"
        )
    if report.below_resolution:
        lines.append(f"  ({len(report.below_resolution)} interval(s) below resolution ignored)")
    return "\n".join(lines)


def cmd_concavity(args):
    xs = args.x
    if xs.size < 2:
        raise UsageError("--x needs a grid a:step:b")
    # strip float noise from a:step:b so a step of 0.01 stays 0.01
    step = round(float(xs[1] - xs[0]), 12)
    report = convexity_intervals(args.mod, float(xs[0]), float(xs[-1]), step)
    text = _interval_report(report, args.mod)
    print(text)
    if args.out:
        t = tau(report.x, args.mod)
        rows = zip(report.x, t, report.second_derivative)
        _write_text(args.out, _csv_text(["x", "tau", "tau_dd"], rows))
        _write_text(str(args.out) + ".intervals.txt", text + "\n")
        params = {"mod": args.mod, "x_min": float(xs[0]), "x_max": float(xs[-1]), "step": step}
        _write_manifest(args.out, args, params, {})
    return 0


def cmd_simulate(args):
    channel, inputs = _resolve_channel(args)
    config = SimConfig(channel=channel, N=args.n, gamma=float(db_to_linear(args.snr_db)),
                       M=args.mod, n_blocks=args.blocks, seed=args.seed, fb_len=args.fb_len)
    if args.scheme == "ofdm":
        result = simulate_ofdm(config)
    else:
        result = simulate_scdfe_genie(config)
    doc = result.to_dict(config)
    doc["scheme"] = args.scheme
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    measured = np.atleast_1d(doc["measured_snr_db"])
    predicted = np.atleast_1d(doc["predicted_snr_db"])
    if args.scheme == "ofdm":
        ok = [m is not None and p is not None for m, p in zip(measured, predicted)]
        dev = max(abs(m - p) for m, p, o in zip(measured, predicted, ok) if o)
        print(f"ofdm: max |measured - predicted| over subcarriers = {dev:.4f} dB", file=sys.stderr)
    else:
        print(f"sc-dfe: measured {measured[0]:.4f} dB, predicted {predicted[0]:.4f} dB, "
              f"geometric-mean formula {doc['dfe_snr_formula_db']:.4f} dB", file=sys.stderr)
    if args.out:
        _write_text(args.out, text)
        _write_manifest(args.out, args, config.describe(), inputs)
    else:
        sys.stdout.write(text)
    return 0


# Acceptance thresholds echoed in the reproduction summaries.
FIG1_GAP_64_MAX = 0.02
FIG1_SATURATION_MARGIN = 0.05
FIG2_CONCAVE_TOL = 1e-6
FIG3_MIN_RATIO = 0.99
FIG3_EXCESS_RATIO = 1.001
MC_TOL = 1e-3


def _verdict(ok):
    return "PASS" if ok else "FAIL"


FIG1_MC_DRAWS = 10**6


def reproduce_fig1(out):
    from .montecarlo import mc_qam_capacity

    ch = BUILTIN_CHANNELS["fig1"]()
    gamma = float(db_to_linear(11.0))
    prof = subcarrier_snrs(freq_response(ch, 8), gamma)
    per = {m: per_subcarrier_capacities(prof, m) for m in (16, 64)}
    rows = [(k, gk, 10 * math.log10(gk), per[16][k][2], per[64][k][2])
            for k, gk in enumerate(prof.gamma_k)]
    files = {"fig1_subcarriers.csv": _csv_text(
        ["k", "gamma_k", "gamma_k_db", "c16_bits", "c64_bits"], rows)}
    mc_draws = FIG1_MC_DRAWS
    scheme_rows, gaps, mc_dev = [], {}, 0.0
    for m in (16, 64):
        c_ofdm = ofdm_capacity_qam(prof, m)
        c_dfe = dfe_capacity_qam(prof, m)
        gaps[m] = c_dfe - c_ofdm
        mc_ofdm = float(np.mean([mc_qam_capacity(g, m, mc_draws) for g in prof.gamma_k]))
        mc_dfe = mc_qam_capacity(dfe_snr(prof), m, mc_draws)
        mc_dev = max(mc_dev, abs(mc_ofdm - c_ofdm), abs(mc_dfe - c_dfe))
        scheme_rows.append((m, c_ofdm, c_dfe, gaps[m], mc_ofdm, mc_dfe))
    files["fig1_schemes.csv"] = _csv_text(
        ["M", "c_ofdm_bits", "c_dfe_bits", "gap_bits", "mc_c_ofdm_bits", "mc_c_dfe_bits"],
        scheme_rows)
    near_sat = max(c for _, _, c in per[16])
    checks = [
        (f"16-QAM gap {gaps[16]:.6f} > 64-QAM gap {gaps[64]:.6f}", gaps[16] > gaps[64]),
        (f"64-QAM gap {gaps[64]:.6f} < {FIG1_GAP_64_MAX}", gaps[64] < FIG1_GAP_64_MAX),
        (f"max 16-QAM subcarrier capacity {near_sat:.6f} within {FIG1_SATURATION_MARGIN} of 4",
         4.0 - near_sat <= FIG1_SATURATION_MARGIN),
        (f"Monte-Carlo cross-check max deviation {mc_dev:.2e} <= {MC_TOL}", mc_dev <= MC_TOL),
    ]
    return files, checks


FIG2_ORDERS = (4, 16, 64, 256, 1024)


def reproduce_fig2(out):
    scans, reports, checks = {}, [], []
    for m in FIG2_ORDERS:
        rep = convexity_intervals(m, 0.05, 25.0, 0.01)
        scans[m] = rep
        reports.append(_interval_report(rep, m))
        if m in (4, 16):
            peak = float(rep.second_derivative.max())
            checks.append((f"M={m} max tau'' {peak:.3e} <= {FIG2_CONCAVE_TOL}",
                           peak <= FIG2_CONCAVE_TOL))
        if m == 64:
            ok = len(rep.intervals) == 1
            desc = "M=64 one positive interval"
            if ok:
                iv = rep.intervals[0]
                bounds = abs(iv.start - 2.568) <= 0.01 and abs(iv.stop - 2.724) <= 0.01
                peak = abs(iv.max_value - 3.58e-4) <= 0.25 * 3.58e-4
                desc += (f" [{iv.start:.4f}, {iv.stop:.4f}] (target [2.568, 2.724] +-0.01: "
                         f"{_verdict(bounds)}), peak {iv.max_value:.3e} (target 3.58e-4 +-25%: "
                         f"{_verdict(peak)})")
                ok = bounds and peak
            checks.append((desc, ok))
    x = scans[FIG2_ORDERS[0]].x
    rows = zip(x, *(scans[m].second_derivative for m in FIG2_ORDERS))
    files = {
        "fig2_tau_dd.csv": _csv_text(["x"] + [f"tau_dd_M{m}" for m in FIG2_ORDERS], rows),
        "fig2_intervals.txt": "\n".join(reports) + "\n",
    }
    return files, checks


def reproduce_fig3(out):
    from .channel import fig3_channel

    with _executor() as pool:
        curve = capacity_ratio_sweep(fig3_channel(), 512, 1024, np.arange(0, 91) * 0.5,
                                     executor=pool)
    lo, hi = curve.min_ratio(), curve.max_ratio()
    checks = [
        (f"min ratio {lo:.6f} in [{FIG3_MIN_RATIO}, 1)", FIG3_MIN_RATIO <= lo < 1.0),
        (f"max ratio {hi:.6f} > {FIG3_EXCESS_RATIO}", hi > FIG3_EXCESS_RATIO),
    ]
    return {"fig3_ratio.csv": curve.to_csv()}, checks


REPRODUCERS = {"fig1": reproduce_fig1, "fig2": reproduce_fig2, "fig3": reproduce_fig3}


def cmd_reproduce(args):
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    files, checks = REPRODUCERS[args.figure](out)
    summary = [f"{args.figure} reproduction"]
    summary += [f"{_verdict(ok)}  {desc}" for desc, ok in checks]
    files[f"{args.figure}_summary.txt"] = "\n".join(summary) + "\n"
    for name, text in files.items():
        _write_text(out / name, text)
        _write_manifest(out / name, args, {"figure": args.figure}, {})
    print("\n".join(summary))
    return 0


def cmd_replay(args):
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc.strerror}") from exc
    return main(manifest["argv"])


def _add_channel_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--channel", help="channel JSON file")
    g.add_argument("--builtin", choices=sorted(BUILTIN_CHANNELS), help="built-in channel")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ofdmdfe",
        description="Modulation-constrained OFDM vs ideal SC-DFE capacity tools. "
                    "Capacities are in bits per complex symbol.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="AWGN capacity of M-QAM or Gaussian input")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mod", type=modulation_order)
    g.add_argument("--gaussian", action="store_true")
    p.add_argument("--snr-db", type=float, required=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("scheme", help="OFDM vs SC-DFE capacity sweep (CSV)")
    _add_channel_args(p)
    p.add_argument("--n", type=int, required=True, help="DFT size")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mod", type=modulation_order)
    g.add_argument("--gaussian", action="store_true")
    p.add_argument("--snr-db", type=parse_grid, required=True, help="a:step:b in dB")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_scheme)

    p = sub.add_parser("concavity", help="tau'' scan and convexity intervals")
    p.add_argument("--mod", type=modulation_order, required=True)
    p.add_argument("--x", type=parse_grid, default=parse_grid("0.05:0.01:25"))
    p.add_argument("--out", help="CSV path for (x, tau, tau_dd)")
    p.set_defaults(func=cmd_concavity)

    p = sub.add_parser("simulate", help="Monte-Carlo CP block transmission (JSON)")
    _add_channel_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mod", type=modulation_order, default=16)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--blocks", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=["ofdm", "sc-dfe"], required=True)
    p.add_argument("--fb-len", type=int, default=None, help="feedback taps (default L-1)")
    p.add_argument("--out", help="JSON path (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="regenerate a figure's data as CSV")
    p.add_argument("figure", choices=sorted(REPRODUCERS))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, AccuracyError, ConditioningError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
