"""Command-line surface: generate instances, decode, verify, benchmark.

Exit codes: 0 ok, 1 oracle mismatch, 2 bad configuration, 3 I/O error.
Log level comes from the MWPMDEC_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
import time

from . import __version__
from .framework import verify_correction
from .fusion import FusionDecoder, make_plan, simulate_schedule
from .graphs import (
    CodeSpec,
    GraphError,
    Syndrome,
    build_surface_code_graph,
    graph_from_json,
    graph_to_json,
    sample_error,
    syndrome_of,
)
from .oracle import DEFAULT_DEFECT_CAP, build_syndrome_graph, exact_mwpm
from .solver import Solver

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("mwpmdec")


class ConfigError(Exception):
    pass


def _parse_code(text: str) -> CodeSpec:
    try:
        parts = text.split(",")
        d, rounds = int(parts[0]), int(parts[1])
        p = float(parts[2])
        resolution = int(parts[3]) if len(parts) > 3 else 1000
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"--code expects d,N,p[,resolution], got {text!r}") from exc
    spec = CodeSpec(d=d, rounds=rounds, p=p, weight_resolution=resolution)
    try:
        spec.validate()
    except GraphError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def _parse_decoder(text: str):
    if text in ("parity", "standard"):
        return "standard"
    if text == "uf":
        return "uf"
    if text.startswith("limited"):
        _, _, arg = text.partition(":")
        if arg in ("", "inf", "none"):
            return ("limited", None)
        try:
            return ("limited", int(arg))
        except ValueError as exc:
            raise ConfigError(f"--decoder limited:k needs an integer k, got {arg!r}") from exc
    if text == "fusion":
        return "fusion"
    raise ConfigError(f"unknown decoder {text!r}")


def _parse_plan(text: str):
    parts = text.split(",")
    kind = parts[0]
    if kind not in ("balanced", "linear", "mixed"):
        raise ConfigError(f"plan kind must be balanced|linear|mixed, got {kind!r}")
    try:
        leaf_rounds = int(parts[1]) if len(parts) > 1 else 100
        mix_height = int(parts[2]) if len(parts) > 2 else 1
    except ValueError as exc:
        raise ConfigError(f"--plan expects kind,M[,h], got {text!r}") from exc
    return kind, leaf_rounds, mix_height


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _config_stamp(args, spec=None) -> dict:
    stamp = {"version": __version__, "seed": args.seed}
    if spec is not None:
        stamp["code"] = {"d": spec.d, "rounds": spec.rounds, "p": spec.p,
                         "weight_resolution": spec.weight_resolution}
    for key in ("decoder", "plan", "workers", "shots"):
        if hasattr(args, key) and getattr(args, key) is not None:
            stamp[key] = getattr(args, key)
    return stamp


def cmd_generate(args) -> int:
    spec = _parse_code(args.code)
    g = build_surface_code_graph(spec)
    os.makedirs(args.out, exist_ok=True)
    graph_obj = json.loads(graph_to_json(g))
    graph_obj["config"] = _config_stamp(args, spec)
    with open(os.path.join(args.out, "graph.json"), "w") as fh:
        fh.write(_canonical(graph_obj))
    shots = []
    for i in range(args.shots):
        err = sample_error(g, seed=args.seed + i)
        shots.append(sorted(syndrome_of(g, err).defects))
    with open(os.path.join(args.out, "syndromes.json"), "w") as fh:
        fh.write(_canonical({"config": _config_stamp(args, spec), "syndromes": shots}))
    log.info("wrote %d shots for d=%d N=%d to %s", args.shots, spec.d, spec.rounds, args.out)
    return EXIT_OK


def _load_instances(args):
    with open(args.graph) as fh:
        g = graph_from_json(fh.read())
    with open(args.syndromes) as fh:
        obj = json.load(fh)
    syndromes = [Syndrome(tuple(s)) for s in obj["syndromes"]]
    return g, syndromes


def _make_decoder(g, decoder, args):
    if decoder == "fusion":
        kind, leaf_rounds, mix_height = _parse_plan(args.plan)
        plan = make_plan(g, leaf_rounds, kind=kind, mix_height=mix_height)
        return FusionDecoder(g, plan), plan
    return Solver(g, primal=decoder), None


def cmd_decode(args) -> int:
    decoder = _parse_decoder(args.decoder)
    g, syndromes = _load_instances(args)
    dec, plan = _make_decoder(g, decoder, args)
    results = []
    for s in syndromes:
        if decoder == "fusion":
            res, _ = dec.decode(s, workers=args.workers)
        else:
            res = dec.decode(s)
        results.append(res.to_obj())
    if decoder == "fusion":
        dec.close()
    payload = {"config": _config_stamp(args), "results": results}
    if plan is not None:
        payload["plan"] = plan.to_obj()
    out = _canonical(payload)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    decoder = _parse_decoder(args.decoder)
    g, syndromes = _load_instances(args)
    dec, _ = _make_decoder(g, decoder, args)
    exact = decoder not in ("uf",) and not (isinstance(decoder, tuple) and decoder[1] is not None)
    mismatches = 0
    skipped = 0
    for i, s in enumerate(syndromes):
        if len(s) > args.cap:
            skipped += 1
            continue
        if decoder == "fusion":
            res, _ = dec.decode(s, workers=args.workers)
        else:
            res = dec.decode(s)
        oracle_w, _, _ = exact_mwpm(build_syndrome_graph(g, s, cap=args.cap))
        ok = verify_correction(g, s, res.correction)
        if exact:
            ok = ok and res.primal_weight == oracle_w == res.dual_objective
        else:
            ok = ok and res.primal_weight >= oracle_w
        if not ok:
            mismatches += 1
            log.error("shot %d: decoder weight %d, oracle weight %d",
                      i, res.primal_weight, oracle_w)
    if decoder == "fusion":
        dec.close()
    print(f"verified {len(syndromes) - skipped} shots "
          f"({skipped} over the defect cap), {mismatches} mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


def cmd_bench(args) -> int:
    spec = _parse_code(args.code)
    decoder = _parse_decoder(args.decoder)
    g = build_surface_code_graph(spec)
    dec, plan = _make_decoder(g, decoder, args)
    syndromes = [syndrome_of(g, sample_error(g, seed=args.seed + i))
                 for i in range(args.shots)]
    rows = []
    times_ns = []
    for i, s in enumerate(syndromes):
        t0 = time.perf_counter_ns()
        if decoder == "fusion":
            res, report = dec.decode(s, workers=args.workers)
        else:
            res = dec.decode(s)
            report = None
        t1 = time.perf_counter_ns()
        t_ns = t1 - t0
        times_ns.append(t_ns)
        rounds = max(spec.rounds, 1)
        row = {
            "d": spec.d,
            "N": spec.rounds,
            "M": plan.leaf_rounds if plan else "",
            "decoder": args.decoder,
            "workers": args.workers if decoder == "fusion" else 1,
            "seed": args.seed,
            "shot": i,
            "T_ns": t_ns,
            "per_round_ns": t_ns // rounds,
            "latency_virtual": "",
            "fusion_time_mean_ns": "",
            "fusion_touched_mean": "",
        }
        if report is not None:
            _, lat = simulate_schedule(plan, report.job_work_units,
                                       workers=max(args.workers, 1), stream=True)
            row["latency_virtual"] = f"{lat:.4f}"
            if report.fusion_durations:
                mean_fuse = statistics.mean(report.fusion_durations)
                row["fusion_time_mean_ns"] = int(mean_fuse * 1e9)
                row["fusion_touched_mean"] = f"{statistics.mean(report.fusion_touched):.2f}"
        rows.append(row)
    if decoder == "fusion":
        dec.close()
    header = list(rows[0].keys())
    lines = [",".join(header)]
    lines.extend(",".join(str(r[k]) for k in header) for r in rows)
    lines.append("")
    csv_text = "\n".join(lines)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# mwpmdec {__version__} config={_canonical(_config_stamp(args, spec))}\n")
            fh.write(csv_text)
    else:
        print(csv_text)
    mean_ns = statistics.mean(times_ns)
    median_ns = statistics.median(times_ns)
    print(f"shots={args.shots} mean={mean_ns / 1e6:.3f}ms median={median_ns / 1e6:.3f}ms "
          f"per_round_mean={mean_ns / max(spec.rounds, 1) / 1e3:.2f}us")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwpmdec",
        description="matching-based surface-code decoder: generate, decode, verify, bench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a decoding graph and sampled syndromes")
    gen.add_argument("--code", required=True, help="d,N,p[,resolution]")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--shots", type=int, default=100)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    dec = sub.add_parser("decode", help="decode syndromes from files")
    dec.add_argument("--graph", required=True)
    dec.add_argument("--syndromes", required=True)
    dec.add_argument("--decoder", default="parity")
    dec.add_argument("--plan", default="balanced,100,1", help="kind,M[,h] for fusion")
    dec.add_argument("--workers", type=int, default=1)
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--out", default=None)
    dec.set_defaults(func=cmd_decode)

    ver = sub.add_parser("verify", help="decode and compare against the exact oracle")
    ver.add_argument("--graph", required=True)
    ver.add_argument("--syndromes", required=True)
    ver.add_argument("--decoder", default="parity")
    ver.add_argument("--plan", default="balanced,100,1")
    ver.add_argument("--workers", type=int, default=1)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--cap", type=int, default=DEFAULT_DEFECT_CAP)
    ver.set_defaults(func=cmd_verify)

    ben = sub.add_parser("bench", help="timing benchmark, CSV output")
    ben.add_argument("--code", required=True, help="d,N,p[,resolution]")
    ben.add_argument("--decoder", default="parity")
    ben.add_argument("--plan", default="balanced,100,1")
    ben.add_argument("--workers", type=int, default=1)
    ben.add_argument("--shots", type=int, default=100)
    ben.add_argument("--seed", type=int, required=True)
    ben.add_argument("--out", default=None)
    ben.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MWPMDEC_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"io error: malformed JSON input: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
