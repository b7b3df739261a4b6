"""Command-line interface: ``mjbd synth | decompose | diagnose | spectrum``.

Exit codes: 0 success, 2 input error, 3 rank undetectable, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, io
from .core import MatrixSet, Partition, stack_underline
from .diagnostics import compare_solutions, identifiability
from .driver import solve_bjbdp
from .exceptions import BJBDError, RankUndetectableError
from .subspace import DEFAULT_XI, spectral_profile
from .synth import gen_example1, gen_isa_covariances, remark_family

REPORT_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_RANK, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("bjbd.cli")


class InputError(Exception):
    pass


def jsonable(x):
    """Recursively convert numpy values to JSON-safe Python; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(float(x.real)), jsonable(float(x.imag))]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, Partition):
        return str(x)
    return x


def _dump_json(obj, path=None):
    text = json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _timing(t0):
    return {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "wall_time_s": time.perf_counter() - t0}


def _partition(text) -> Partition:
    try:
        return Partition.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _delta(text):
    if text == "auto":
        return "auto"
    try:
        v = float(text)
    except ValueError as exc:
        raise InputError(f"--delta must be 'auto' or a number, got {text!r}") from exc
    if not v >= 0:
        raise InputError("--delta must be nonnegative")
    return v


def _whiten(text):
    return {"auto": "auto", "on": True, "off": False}[text]


def _float(text):
    try:
        return float(text)
    except ValueError as exc:
        raise InputError(f"not a number: {text!r}") from exc


def sidecar_paths(out) -> dict:
    out = Path(out)
    stem = out.with_suffix("") if out.suffix == ".mjbd" else out
    return {"truth": Path(f"{stem}.truth.json"), "A": Path(f"{stem}.A.mjbd"),
            "blocks": Path(f"{stem}.blocks.mjbd")}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MJBD_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    if args.remark:
        C = remark_family(m=args.m, seed=args.seed)
        extras = {"kind": "remark", "partition": "2,2", "seed": args.seed}
        io.write(args.out, C, extras)
        return EXIT_OK
    tau = _partition(args.tau)
    if args.p is not None and args.p != tau.total:
        raise InputError(f"partition {tau} sums to {tau.total}, not --p {args.p}")
    if args.isa:
        inst = gen_isa_covariances(tau, d=args.n, m=args.m, samples_per_domain=args.samples,
                                   seed=args.seed)
        kind, snr = "isa", None
    else:
        inst = gen_example1(m=args.m, n=args.n, p=args.p, tau=tau, snr_db=args.snr,
                            seed=args.seed)
        kind, snr = "example1", args.snr
    side = sidecar_paths(args.out)
    extras = {"kind": kind, "partition": str(tau), "seed": args.seed, "snr_db": snr}
    io.write(args.out, inst.observed, extras)
    io.write(side["A"], inst.truth_A, {"role": "truth_A"})
    io.write(side["blocks"], inst.truth_blocks, {"role": "truth_blocks"})
    truth = {"partition": str(tau), "seed": args.seed, "sigma": inst.sigma, "snr_db": snr,
             "kind": kind, "A": side["A"].name, "blocks": side["blocks"].name}
    _dump_json(truth, side["truth"])
    return EXIT_OK


# ------------------------------------------------------------ decompose

def _solve(C, args, seed):
    return solve_bjbdp(C, xi=args.xi, delta=_delta(args.delta), seed=seed,
                       restarts=args.restarts, whiten=_whiten(args.whiten),
                       allow_full_rank=not args.no_full_rank)


def _solution_summary(C: MatrixSet, sol) -> dict:
    info = sol.info
    history = [{"block": h["block"], "size": h["size"], "sizes": h["sizes"],
                "x_star_spectrum": np.sort_complex(h["eigenvalues"]),
                "split_residual": h["split_residual"], "discarded_norm": h["discarded_norm"],
                "condition": h["condition"]} for h in info["history"]]
    return {
        "rank": info["rank"],
        "singular_values": info["singular_values"],
        "noise_level": info["noise_level"],
        "partition": str(sol.partition),
        "partition_parts": list(sol.partition.parts),
        "residual": sol.residual,
        "residual_relative": sol.residual / max(C.fro_norm(), np.finfo(float).tiny),
        "deltas": info["deltas"],
        "whitened": info["whitened"],
        "condition": info["condition"],
        "history": history,
        "warnings": info["warnings"],
    }


def cmd_decompose(args) -> int:
    t0 = time.perf_counter()
    C = io.read_set(args.input)
    params = {"xi": args.xi, "delta": args.delta, "seed": args.seed, "restarts": args.restarts,
              "whiten": args.whiten, "full_rank_allowed": not args.no_full_rank}
    report = {"report_version": REPORT_VERSION, "command": "decompose", "version": __version__,
              "input": {"m": C.m, "d": C.d}, "parameters": params}
    if args.trials > 1:
        seeds = [args.seed + i for i in range(args.trials)]
        with ThreadPoolExecutor(max_workers=min(_threads(), len(seeds))) as pool:
            sols = list(pool.map(lambda s: _solve(C, args, s), seeds))
        sol = sols[0]
        counts = {}
        for s in sols:
            counts[str(s.partition)] = counts.get(str(s.partition), 0) + 1
        report["trials"] = [{"seed": s, "partition": str(x.partition), "residual": x.residual}
                            for s, x in zip(seeds, sols)]
        report["partition_counts"] = dict(sorted(counts.items()))
    else:
        sol = _solve(C, args, args.seed)
    report.update(_solution_summary(C, sol))
    if args.out_A:
        io.write(args.out_A, sol.diagonalizer, {"role": "diagonalizer",
                                                "partition": str(sol.partition)})
        report["diagonalizer_file"] = os.fspath(args.out_A)
    report["timing"] = _timing(t0)
    _dump_json(report, args.out_report)
    return EXIT_OK


# ------------------------------------------------------------- diagnose

def _constants(text):
    out = {"C": 1.0, "kappa": 1.0}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise InputError(f"--constants expects key=value pairs, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in out:
            raise InputError(f"unknown constant {k!r} (use C and kappa)")
        out[k] = _float(v)
    return out


def _load_truth(path):
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
        tau = _partition(meta["partition"])
        A = io.read_matrix(path.parent / meta["A"])
        blocks = io.read_set(path.parent / meta["blocks"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read truth {path}: {exc}") from exc
    return tau, A, blocks


def cmd_diagnose(args) -> int:
    t0 = time.perf_counter()
    consts = _constants(args.constants)
    C = io.read_set(args.input)
    report = {"report_version": REPORT_VERSION, "command": "diagnose", "version": __version__,
              "input": {"m": C.m, "d": C.d}, "constants": consts}
    kw = dict(C_const=consts["C"], kappa_const=consts["kappa"])
    if args.tau:
        tau = _partition(args.tau)
        rep = identifiability(C, tau, **kw)
        report["source"] = "blocks"
    elif args.truth:
        tau, A, blocks = _load_truth(args.truth)
        rep = identifiability(blocks, tau, A=A, observed=C, **kw)
        report["source"] = "truth"
        if args.candidate:
            A_hat = io.read_matrix(args.candidate)
            tau_hat = _partition(io.read(args.candidate).extras.get("partition", ""))
        else:
            sol = _solve(C, args, args.seed)
            A_hat, tau_hat = sol.diagonalizer, sol.partition
            report["solution"] = _solution_summary(C, sol)
        report["comparison"] = compare_solutions((tau, A), (tau_hat, A_hat),
                                                 tol=args.tol).to_dict()
    else:
        sol = _solve(C, args, args.seed)
        rep = identifiability(sol.blocks, sol.partition, A=sol.diagonalizer, observed=C, **kw)
        report["source"] = "solution"
        report["solution"] = _solution_summary(C, sol)
    report["identifiability"] = rep.to_dict()
    report["timing"] = _timing(t0)
    _dump_json(report, args.out)
    return EXIT_OK


# ------------------------------------------------------------- spectrum

def cmd_spectrum(args) -> int:
    C = io.read_set(args.input)
    s = spectral_profile(C).singular_values
    k = args.count
    if k < 1:
        raise InputError("--count must be positive")
    if k > s.size:
        log.warning("--count %d exceeds d=%d; clamped", k, s.size)
        k = s.size
    idx = sorted(set(range(k)) | set(range(s.size - k, s.size)))
    rows = [(i + 1, float(s[i])) for i in idx]
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        if args.format == "json":
            out.write(json.dumps({"report_version": REPORT_VERSION, "d": int(s.size),
                                  "norm_fro": float(np.linalg.norm(stack_underline(C))),
                                  "values": [{"index": i, "value": v} for i, v in rows]},
                                 indent=2) + "\n")
        else:
            w = csv.writer(out, lineterminator="\n")
            w.writerow(["index", "value"])
            for i, v in rows:
                w.writerow([i, repr(v)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_solver_flags(p):
    p.add_argument("--xi", type=float, default=DEFAULT_XI, help="rank gap ratio")
    p.add_argument("--delta", default="auto", help="'auto' or a nonnegative null-space level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=16)
    p.add_argument("--whiten", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--no-full-rank", action="store_true",
                   help="reject p = d when no interior spectral gap exists")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mjbd", description="Blind joint block diagonalization.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic instance")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--n", type=int, default=15, help="matrix dimension")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--tau", default="2,3,3,4")
    p.add_argument("--snr", type=float, default=40.0, help="dB; 'inf' for noiseless")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--isa", action="store_true", help="ISA covariance model instead")
    p.add_argument("--samples", type=int, default=6000, help="samples per domain (ISA)")
    p.add_argument("--remark", action="store_true",
                   help="write the non-unique 2+2 example family instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="solve the block diagonalization problem")
    p.add_argument("--in", dest="input", required=True)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=1, help="repeat with seeds seed..seed+N-1")
    p.add_argument("--out-report", default=None)
    p.add_argument("--out-A", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("diagnose", help="identifiability report")
    p.add_argument("--in", dest="input", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tau", help="input already holds the block-diagonal matrices")
    g.add_argument("--truth", help="truth sidecar JSON written by synth")
    p.add_argument("--candidate", help="diagonalizer file to compare instead of solving")
    p.add_argument("--constants", default="", help="e.g. C=1,kappa=1")
    p.add_argument("--tol", type=float, default=1e-6, help="equivalence tolerance")
    _add_solver_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("spectrum", help="smallest and largest singular values")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RankUndetectableError as exc:
        print(f"error: rank undetectable: {exc}", file=sys.stderr)
        return EXIT_RANK
    except (InputError, io.FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BJBDError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
