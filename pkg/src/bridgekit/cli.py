"""Command-line entry point.

Subcommands: schedule-dump, sample, weights, verify, demo.  Exit codes are 0 on
success, 1 when a verification check fails and 2 on bad arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as bio
from .composition import WeightProfile, profile_to_csv, schedule_weights
from .enhance import make_predictor, si_snr_db, synth_pair, PairedSignal
from .samplers import Method, grid_for, sample
from .schedules import Schedule, aux_gtilde_sq, eval_coefficients, make_schedule
from .verification import run_all

DEFAULT_T0 = 1e-4
DEFAULT_TN = 1.0
DEFAULT_STEPS = 5

_PARAM_FLAGS = {
    "gamma": "gamma",
    "c": "c",
    "k": "k",
    "f": "f",
    "sigma": "sigma",
    "sigma_min": "sigma-min",
    "sigma_max": "sigma-max",
}


class UsageError(Exception):
    pass


def _schedule_options(parser: argparse.ArgumentParser, required: bool = True) -> None:
    g = parser.add_argument_group("schedule")
    g.add_argument("--schedule", required=required, help="OUVE, BBED, SB_GENERAL, SBVE, OT_CFM or SB_CFM")
    g.add_argument("--params", help="schedule parameters as a JSON object")
    for name, flag in _PARAM_FLAGS.items():
        g.add_argument(f"--{flag}", dest=name, type=float)


def _grid_options(parser: argparse.ArgumentParser, steps: int = DEFAULT_STEPS) -> None:
    parser.add_argument("--t0", type=float, default=None, help=f"clean-side stop time (default {DEFAULT_T0})")
    parser.add_argument("--tN", type=float, default=None, help=f"noisy-side start time (default {DEFAULT_TN})")
    parser.add_argument("--steps", type=int, default=steps)


def _build_schedule(args: argparse.Namespace) -> Schedule:
    params = {}
    if args.params:
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--params is not valid JSON: {exc}") from None
        if not isinstance(params, dict):
            raise UsageError("--params must be a JSON object")
    for name in _PARAM_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    return make_schedule(args.schedule, params)


def _grid(sched: Schedule, args: argparse.Namespace):
    if sched.clean_time == 0.0:
        t0 = DEFAULT_T0 if args.t0 is None else args.t0
        tn = DEFAULT_TN if args.tN is None else args.tN
    else:
        t0 = 0.0 if args.t0 is None else args.t0
        tn = DEFAULT_TN if args.tN is None else args.tN
    return grid_for(sched, args.steps, t0=t0, tN=tn)


def _emit(text: str, output: str | None) -> None:
    if output:
        bio.write_text(output, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_schedule_dump(args: argparse.Namespace) -> int:
    sched = _build_schedule(args)
    grid = _grid(sched, args)
    rows = []
    for t in grid.points:
        c = eval_coefficients(sched, t)
        try:
            g2 = aux_gtilde_sq(sched, t)
        except ValueError:
            g2 = None
        rows.append({"t": t, "a": c.a, "b": c.b, "sigma": c.sigma, "da": c.da, "db": c.db, "dsigma": c.dsigma, "gtilde_sq": g2})
    if args.format == "json":
        _emit(bio.dumps_json({"schedule": sched.to_dict(), "direction": sched.direction.value, "rows": rows}), args.output)
        return 0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["t", "a", "b", "sigma", "da", "db", "dsigma", "gtilde_sq"]
    writer.writerow(cols)
    for row in rows:
        writer.writerow(["" if row[k] is None else repr(float(row[k])) for k in cols])
    _emit(buf.getvalue(), args.output)
    return 0


def _svg(profile: WeightProfile) -> str:
    width, height, pad = 480, 320, 40
    n = profile.n_steps
    ws = list(profile.w)
    top = max(max(ws), profile.w_y, 1e-300)
    xs = [pad + (width - 2 * pad) * (i / max(n - 1, 1)) for i in range(n)]
    ys = [height - pad - (height - 2 * pad) * (w / top) for w in ws]
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>',
    ]
    lines += [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="steelblue"/>' for x, y in zip(xs, ys)]
    lines += [
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="12">step index n (1 = last call)</text>',
        f'<text x="12" y="{pad - 12}" font-size="12">w_n (max {top!r}), w_y = {profile.w_y!r}</text>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def cmd_weights(args: argparse.Namespace) -> int:
    sched = _build_schedule(args)
    profile = schedule_weights(sched, _grid(sched, args), args.method)
    _emit(profile_to_csv(profile), args.output)
    if args.svg:
        bio.write_text(args.svg, _svg(profile))
    return 0


def _reference(args: argparse.Namespace) -> PairedSignal:
    if args.clean or args.noisy:
        if not (args.clean and args.noisy):
            raise UsageError("--clean and --noisy must be given together")
        s, rate = bio.read_wav(args.clean)
        y, rate_y = bio.read_wav(args.noisy)
        if rate != rate_y or s.shape != y.shape:
            raise UsageError("clean and noisy WAV files differ in rate or length")
        return PairedSignal(s, y, rate, 10.0 * np.log10(np.sum(s**2) / np.sum((y - s) ** 2)))
    return synth_pair(args.tones, args.duration, args.rate, args.snr, args.noise, args.seed)


def cmd_sample(args: argparse.Namespace) -> int:
    sched = _build_schedule(args)
    pair = _reference(args)
    predictor = make_predictor(args.predictor, {"beta": args.beta}, pair)
    trace = sample(sched, pair.y, predictor, _grid(sched, args), args.method, g=args.g, seed=args.seed, record=False)
    bio.write_wav(args.output, trace.final, pair.sample_rate)
    metrics = {
        "schedule": sched.to_dict(),
        "method": Method(args.method).value,
        "steps": args.steps,
        "seed": args.seed,
        "input_si_snr_db": si_snr_db(pair.y, pair.s),
        "output_si_snr_db": si_snr_db(trace.final, pair.s),
    }
    if args.metrics:
        bio.write_json(args.metrics, metrics)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_all(args.seed)
    report = [r.to_dict() for r in results]
    _emit(bio.dumps_json(report), args.output)
    if args.output:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.check}")
    return 0 if all(r.passed for r in results) else 1


def cmd_demo(args: argparse.Namespace) -> int:
    sched = make_schedule("SB_CFM", sigma=args.sigma)
    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for i in range(args.pairs):
        pair = synth_pair(args.tones, args.duration, args.rate, args.snr, args.noise, args.seed + i)
        predictor = make_predictor(args.predictor, {"beta": args.beta}, pair)
        grid = grid_for(sched, args.steps, t0=args.t0)
        trace = sample(sched, pair.y, predictor, grid, "exponential", record=False)
        before, after = si_snr_db(pair.y, pair.s), si_snr_db(trace.final, pair.s)
        print(f"pair {i}: input SI-SNR {before:.3f} dB, output SI-SNR {after:.3f} dB")
        summary.append({"pair": i, "seed": args.seed + i, "input_si_snr_db": before, "output_si_snr_db": after})
        if out_dir:
            bio.write_wav(out_dir / f"pair{i}_clean.wav", pair.s, pair.sample_rate)
            bio.write_wav(out_dir / f"pair{i}_noisy.wav", pair.y, pair.sample_rate)
            bio.write_wav(out_dir / f"pair{i}_enhanced.wav", trace.final, pair.sample_rate)
    if out_dir:
        bio.write_json(out_dir / "metrics.json", summary)
    return 0


# ---------------------------------------------------------------- parser


def _signal_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tones", type=int, default=4)
    parser.add_argument("--duration", type=float, default=1.0, help="seconds")
    parser.add_argument("--rate", type=int, default=16000, help="sample rate in Hz")
    parser.add_argument("--snr", type=float, default=0.0, help="mixing SNR in dB")
    parser.add_argument("--noise", choices=["white", "pink"], default="white")
    parser.add_argument("--predictor", choices=["oracle", "blend", "wiener"], default="wiener")
    parser.add_argument("--beta", type=float, default=0.5, help="blend weight on the clean signal")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgekit", description="Gaussian bridge schedules, samplers and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule-dump", help="tabulate path coefficients on a grid")
    _schedule_options(p)
    _grid_options(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_schedule_dump)

    p = sub.add_parser("sample", help="run a sampler on a clean/noisy pair and write the result")
    _schedule_options(p)
    _grid_options(p)
    _signal_options(p)
    p.add_argument("--method", choices=[m.value for m in Method], default="exponential")
    p.add_argument("--g", type=float, default=0.0, help="diffusion coefficient for euler_maruyama")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--clean", help="clean reference WAV")
    p.add_argument("--noisy", help="noisy input WAV")
    p.add_argument("--output", required=True, help="enhanced WAV path")
    p.add_argument("--metrics", help="optional JSON metrics path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("weights", help="per-call weight profile as CSV")
    _schedule_options(p)
    _grid_options(p)
    p.add_argument("--method", choices=["auto", "closed", "recursion"], default="auto")
    p.add_argument("--output")
    p.add_argument("--svg", help="also write an SVG line chart")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("verify", help="run the numerical certification suite")
    p.add_argument("--all", action="store_true", help="run every check (the default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="JSON report path (stdout if omitted)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("demo", help="synthetic enhancement through SB-CFM sampling")
    _signal_options(p)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--t0", type=float, default=DEFAULT_T0)
    p.add_argument("--pairs", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_demo)
    return parser


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bridgekit {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
