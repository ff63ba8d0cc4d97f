"""Command-line interface: threshold, de-trace, stability, peg, simulate."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .channel import ChannelSpec, build_quantized_channel
from .de import (ReliabilitySchedule, de_run, make_de_runner, optimize_steps,
                 threshold_search)
from .decoders import DecoderConfig
from .ensemble import get_ensemble
from .graph import alist_read, alist_write, degree_sequence, peg_construct
from .harness import SimConfig, run_campaign, write_records_csv
from .quant import QuantizerSpec
from .stability import build_jacobian, spectral_radius


class CliError(RuntimeError):
    pass


def _add_common(p):
    p.add_argument("--ensemble", required=True,
                   help="registry name ('3,6', '4,8', '2/3', ...) or JSON descriptor path")
    p.add_argument("--bits", type=int, default=4, help="message quantizer bits b")
    p.add_argument("--lmax", type=int, default=200, help="max DE iterations")


def _channel_for(args, spec, delta0):
    if getattr(args, "channel_bits", None) is None:
        return spec
    return build_quantized_channel(spec, QuantizerSpec(args.channel_bits, delta0))


def cmd_threshold(args):
    dd = get_ensemble(args.ensemble)
    decoder = args.decoder
    if args.delta is not None and (args.channel_bits is None or args.delta0 is not None):
        qspec = QuantizerSpec(args.bits, args.delta)
        mode = "quantized" if (args.channel_bits is not None and decoder == "mqms") \
            else "unquantized"
        ch_q = None
        if args.channel_bits is not None:
            ch_q = QuantizerSpec(args.channel_bits, args.delta0 or args.delta)
        runner = make_de_runner(dd, qspec, mode=mode, decoder=decoder,
                                channel_qspec=ch_q, l_max=args.lmax)
        result = {"threshold_db": threshold_search(runner, tol_db=args.tol_db),
                  "delta": args.delta, "delta0": args.delta0}
    else:
        best = optimize_steps(dd, args.bits, args.channel_bits, decoder=decoder,
                              l_max=args.lmax, tol_db=args.tol_db)
        result = {"threshold_db": best.threshold_db, "delta": best.delta,
                  "delta0": best.delta0}
    print(json.dumps(result))


def cmd_de_trace(args):
    dd = get_ensemble(args.ensemble)
    qspec = QuantizerSpec(args.bits, args.delta)
    spec = ChannelSpec(ebn0_db=args.ebn0, rate=dd.design_rate())
    channel = _channel_for(args, spec, args.delta0 or args.delta)
    report = de_run(dd, qspec, channel, l_max=args.lmax)
    if args.out_schedule:
        report.schedule.dump(args.out_schedule)
    rows = list(enumerate(report.pe_trajectory))
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "pe"])
            w.writerows(rows)
    print(json.dumps({"converged": report.converged,
                      "iterations": report.iterations_run,
                      "final_pe": float(report.pe_trajectory[-1])}))


def cmd_stability(args):
    dd = get_ensemble(args.ensemble)
    qspec = QuantizerSpec(args.bits, args.delta)
    spec = ChannelSpec(ebn0_db=args.ebn0, rate=dd.design_rate())
    channel = _channel_for(args, spec, args.delta0 or args.delta)
    m = build_jacobian(dd, channel, qspec)
    r = spectral_radius(m)
    print(json.dumps({"spectral_radius": r, "stable": bool(r < 1.0),
                      "alpha": m.alpha, "gamma": m.gamma.tolist()}))


def cmd_peg(args):
    dd = get_ensemble(args.ensemble)
    vn_degs, cn_degs = degree_sequence(args.n, dd)
    g = peg_construct(vn_degs, cn_degs, seed=args.seed)
    text = alist_write(g)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    dd = get_ensemble(args.ensemble) if args.ensemble else None
    if args.alist:
        with open(args.alist) as fh:
            g = alist_read(fh.read())
    else:
        if dd is None:
            raise CliError("simulate needs --alist or --ensemble with --n")
        vn_degs, cn_degs = degree_sequence(args.n, dd)
        g = peg_construct(vn_degs, cn_degs, seed=args.graph_seed)
    qspec = QuantizerSpec(args.bits, args.delta) if args.kind != "spa" else None
    ch_q = None
    if args.channel_bits is not None:
        ch_q = QuantizerSpec(args.channel_bits, args.delta0 or args.delta)
    schedule = ReliabilitySchedule.load(args.schedule) if args.schedule else None
    dec = DecoderConfig(kind=args.kind, l_max=args.iters, qspec=qspec,
                        channel_qspec=ch_q, schedule=schedule,
                        llr_clamp=args.llr_clamp)
    snrs = tuple(float(t) for t in args.snrs.split(","))
    cfg = SimConfig(graph=g, decoder=dec, snrs_db=snrs, max_frames=args.max_frames,
                    target_frame_errors=args.target_errors,
                    master_seed=args.seed, dd=dd)
    records = run_campaign(cfg)
    if args.out:
        write_records_csv(records, args.out)
    for rec in records:
        print(json.dumps({"snr_db": rec.snr_db, "frames": rec.frames,
                          "fer": rec.fer, "ber": rec.ber}))


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mqms",
                                  description="Quantized min-sum LDPC decoding toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="decoding threshold, optionally optimizing steps")
    _add_common(p)
    p.add_argument("--decoder", choices=("mqms", "qms"), default="mqms")
    p.add_argument("--channel-bits", type=int, default=None)
    p.add_argument("--delta", type=float, default=None,
                   help="fix the message step (skip optimization)")
    p.add_argument("--delta0", type=float, default=None,
                   help="fix the channel step")
    p.add_argument("--tol-db", type=float, default=0.01)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("de-trace", help="run DE at one SNR; write Pe CSV and schedule")
    _add_common(p)
    p.add_argument("--ebn0", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--channel-bits", type=int, default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.add_argument("--out-schedule")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_de_trace)

    p = sub.add_parser("stability", help="spectral radius of the DE fixed-point map")
    _add_common(p)
    p.add_argument("--ebn0", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--channel-bits", type=int, default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("peg", help="construct a PEG graph and write it as alist")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_peg)

    p = sub.add_parser("simulate", help="Monte Carlo FER/BER campaign")
    p.add_argument("--ensemble", default=None)
    p.add_argument("--alist", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--graph-seed", type=int, default=0)
    p.add_argument("--kind", choices=("mqms", "qms", "spa"), default="mqms")
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--channel-bits", type=int, default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.add_argument("--schedule", default=None, help="reliability schedule JSON")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--llr-clamp", type=float, default=30.0)
    p.add_argument("--snrs", required=True, help="comma-separated E_b/N_0 list in dB")
    p.add_argument("--max-frames", type=int, default=10_000_000)
    p.add_argument("--target-errors", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, KeyError, ValueError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
