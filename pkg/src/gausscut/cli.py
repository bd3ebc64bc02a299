"""Command line entry point: ``gausscut maxkcut | maxagree | sparsify | report``.

Exit codes: 0 success, 2 solver stopped before the gap closed, 1 error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .graph import GraphFormatError, serialize_gset
from .memory import MemoryBudgetExceeded
from .harness import ConfigError, RunConfig, emit_report, load_config, read_reports, run
from .penalty import MAXAGREE, MAXKCUT
from .sparsifier import SparsifierState, finalize, ingest, parse_edge_stream

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="graph file")
    p.add_argument("--config", help="flat key = value file; command line flags take precedence")
    p.add_argument("--eps", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--p", type=float, dest="p", help="Lanczos failure probability")
    p.add_argument("--reps", type=int, help="rounding replications")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float, help="sparsify the input first")
    p.add_argument("--sparsify-c", type=float, dest="sparsify_c")
    p.add_argument("--shadow", action="store_const", const=True, help="track the dense iterate too")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--dataset", help="name used in the report")
    p.add_argument("--out", help="write OUT.csv and OUT.json instead of printing CSV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gausscut", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    kc = sub.add_parser(MAXKCUT, help="Max-k-Cut on a GSet file")
    _solver_args(kc)
    kc.add_argument("--k", type=int)

    ma = sub.add_parser(MAXAGREE, help="Max-Agree on a signed graph")
    _solver_args(ma)
    ma.add_argument("--format", dest="input_format", choices=["gset", "signed"])
    ma.add_argument("--jaccard", action="store_const", const=True, help="convert a GSet graph by Jaccard labels")
    ma.add_argument("--jaccard-delta", type=float, dest="jaccard_delta")
    ma.add_argument("--samples", type=int, choices=[2, 3])

    sp = sub.add_parser("sparsify", help="sparsify an 'i j w' edge stream read from stdin")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--c", type=float, default=4.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write the GSet result here instead of stdout")

    rp = sub.add_parser("report", help="merge JSON reports into one table")
    rp.add_argument("reports", nargs="+")
    rp.add_argument("--out")
    return ap


def _config_from(args, kind: str) -> RunConfig:
    values = {"kind": kind}
    if args.config:
        values.update(load_config(args.config))
        values["kind"] = kind
    for key in ("input", "eps", "eta", "p", "reps", "seed", "tau", "sparsify_c", "shadow", "max_iters",
                "dataset", "out", "k", "input_format", "jaccard", "jaccard_delta", "samples"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return RunConfig(**values).validate()


def _write(reports, out) -> None:
    if out:
        emit_report(reports, out + ".csv", out + ".json")
    else:
        csv_text, _ = emit_report(reports)
        sys.stdout.write(csv_text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in (MAXKCUT, MAXAGREE):
            cfg = _config_from(args, args.command)
            rep = run(cfg)
            _write([rep], cfg.out)
            if not rep.converged:
                print(f"gausscut: stopped after {rep.iterations} iterations before the gap closed",
                      file=sys.stderr)
                return EXIT_NOT_CONVERGED
            return EXIT_OK
        if args.command == "sparsify":
            state = SparsifierState.create(args.n, args.tau, args.c, args.seed)
            for e in parse_edge_stream(sys.stdin):
                ingest(state, e)
            text = serialize_gset(finalize(state))
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        reports = [r for path in args.reports for r in read_reports(path)]
        _write(reports, args.out)
        return EXIT_OK
    except (ConfigError, GraphFormatError, FileNotFoundError, ValueError, OSError,
            MemoryBudgetExceeded) as exc:
        print(f"gausscut: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
