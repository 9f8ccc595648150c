"""Command line entry point (``paraprod``)."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .harness import EXPERIMENTS, ExperimentReport, _jsonable
from .kernel import MomentCache, kernel_norm_ratio, kernel_series, diagonal_ratio, required_cap
from .norms import QuadratureConfig, WeightModifier, bergman_norm, bloch_seminorm
from .series import parse_series
from .weights import parse_weight, self_check
from .words import Word, apply_word, canonical_decomposition_H0, full_decomposition


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _ArgError(message)


def _weight(text):
    try:
        return parse_weight(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _series(text):
    try:
        return parse_series(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _word(text):
    try:
        return Word.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weight", type=_weight, default=parse_weight("w0:1:1"), help="w<level>:<alpha>:<c>")
    common.add_argument("--p", type=_positive, default=2.0)
    common.add_argument("--degree", type=int, default=6, help="maximal symbol degree for random families")
    common.add_argument("--count", type=int, default=None, help="number of random symbols (default 30, or 50 for radicality and littlewood-paley)")
    common.add_argument("--cap", type=int, default=None, help="truncation cap for word application")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--tol", type=_positive, default=None, help="radial relative tolerance")
    common.add_argument("--out", default="-", help="output path, '-' for standard output")
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--cache", default=None, help="directory for moment-table caches")

    parser = _Parser(prog="paraprod", description="Analytic paraproducts and weighted Bergman norms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("check-weight", parents=[common], help="run the weight self-checks")
    sp = sub.add_parser("norm", parents=[common], help="weighted Bergman norm of a series")
    sp.add_argument("--f", type=_series, required=True)
    sp.add_argument("--littlewood-paley", action="store_true", help="use the damped derivative weight")
    sp = sub.add_parser("bloch", parents=[common], help="Bloch-type seminorm of a symbol")
    sp.add_argument("--g", type=_series, required=True)
    sp.add_argument("--q", type=float, default=1.0)
    sp = sub.add_parser("apply-word", parents=[common], help="apply a g-word to a series")
    sp.add_argument("--word", type=_word, required=True)
    sp.add_argument("--g", type=_series, required=True)
    sp.add_argument("--f", type=_series, required=True)
    sp = sub.add_parser("decompose", parents=[common], help="integer canonical form of a word")
    sp.add_argument("--word", type=_word, required=True)
    sp.add_argument("--full", action="store_true", help="also solve the full-space form")
    sp = sub.add_parser("kernel", parents=[common], help="reproducing kernel diagnostics at a point")
    sp.add_argument("--a", type=complex, required=True)
    sp = sub.add_parser("verify", parents=[common], help="run an experiment and apply its gates")
    sp.add_argument("experiment", choices=sorted(EXPERIMENTS))
    sp.add_argument("--words", nargs="*", default=None)
    sp.add_argument("--manifest", default=None, help="where to write MANIFEST.json")
    return parser


def _cfg(args) -> QuadratureConfig:
    return QuadratureConfig(radial_rel_tol=args.tol) if args.tol else QuadratureConfig()


def _emit(records, args):
    if args.format == "jsonl":
        text = "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in records)
    else:
        rep = ExperimentReport("records", {}, list(records))
        text = rep.to_csv()
    _write(text, args.out)


def _write(text, out):
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_check_weight(args):
    rep = self_check(args.weight)
    _emit([rep.to_dict()], args)
    return 0 if rep.passed else 1


def _cmd_norm(args):
    mod = WeightModifier.littlewood_paley(args.p) if args.littlewood_paley else WeightModifier.plain()
    est = bergman_norm(args.f, args.weight, args.p, mod, _cfg(args))
    print(est, file=sys.stderr)
    _emit([{"weight": str(args.weight), "p": args.p, **est.to_dict()}], args)
    return 0


def _cmd_bloch(args):
    est = bloch_seminorm(args.g, args.weight, args.q, _cfg(args))
    print(est, file=sys.stderr)
    _emit([{"weight": str(args.weight), "q": args.q, **est.to_dict()}], args)
    return 0


def _cmd_apply_word(args):
    h = apply_word(args.word, args.g, args.f, args.cap)
    _emit([{"word": str(args.word), "coeffs": json.loads(h.to_json())}], args)
    return 0


def _cmd_decompose(args):
    form = canonical_decomposition_H0(args.word)
    print(form, file=sys.stderr)
    rec = form.to_dict()
    if args.full and args.word.n > 0:
        rec["full"] = full_decomposition(args.word).to_dict()
    _emit([rec], args)
    return 0


def _cmd_kernel(args):
    spec = args.weight
    if abs(args.a) >= 1:
        raise _ArgError("|a| must be < 1")
    cache = MomentCache(args.cache) if args.cache else None
    cap, table = required_cap(abs(args.a), spec, table=cache.get(spec, 127) if cache else None)
    if cache:
        table = cache.get(spec, table.J)
    h = kernel_series(args.a, table, cap=cap, normalize=True)
    rec = {"weight": str(spec), "a": args.a, "cap": cap, "tail_bound_relative": h.tail_bound / h.partial
           if h.partial and math.isfinite(h.tail_bound) else None,
           "diagonal_ratio": diagonal_ratio(args.a, spec, table),
           "kernel_norm_ratio": kernel_norm_ratio(args.a, spec, args.p, table, _cfg(args)),
           "moment_hash": table.content_hash()}
    _emit([rec], args)
    return 0


def _cmd_verify(args):
    args.weight = str(args.weight)
    rep = EXPERIMENTS[args.experiment](args)
    text = rep.to_jsonl() if args.format == "jsonl" else rep.to_csv()
    _write(text, args.out)
    manifest = rep.manifest(seed=args.seed)
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    elif args.out != "-":
        Path(args.out).with_name("MANIFEST.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    status = "PASS" if rep.passed else "FAIL"
    print(f"{rep.name}: {status} {json.dumps(_jsonable(rep.gates), sort_keys=True)} ({rep.seconds:.1f}s)",
          file=sys.stderr)
    return 0 if rep.passed else 1


COMMANDS = {
    "check-weight": _cmd_check_weight,
    "norm": _cmd_norm,
    "bloch": _cmd_bloch,
    "apply-word": _cmd_apply_word,
    "decompose": _cmd_decompose,
    "kernel": _cmd_kernel,
    "verify": _cmd_verify,
}


def run_cli(argv=None) -> int:
    """Run the command line; returns 2 on argument errors, 1 on failed gates, 0 otherwise."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise _ArgError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except _ArgError as exc:
        print(f"paraprod: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
