"""Command-line interface.

Exit codes: 0 success, 1 oracle mismatch, 2 malformed input,
3 infeasible target, 4 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from lfseqtrain import bench, io, lattice, oracle, sweep
from lfseqtrain.core import InfeasibleTargetError, PosteriorTable, Vocabulary
from lfseqtrain.criteria import Settings, evaluate, needs_alignment
from lfseqtrain.fullsum import viterbi_align
from lfseqtrain.lfmbr import MbrConfig
from lfseqtrain.lfsegmbr import DegenerateInputError, SegMbrConfig
from lfseqtrain.lm import NGramPhonemeLM, ScoreScales
from lfseqtrain.toytrain import TRAIN_CRITERIA, ToyModel, make_dataset, train

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_CAP = 4

LOSS_CRITERIA = ("cefs", "lfmmi", "lfsegmbr", "lfmbr", "nbest-mbr")


class UsageError(Exception):
    """Bad input reported with exit code 2."""


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _settings(args) -> Settings:
    return Settings(
        scales=ScoreScales(args.alpha, args.beta),
        seg=SegMbrConfig(L=args.L, c=args.c, I=args.I),
        mbr=MbrConfig(L=args.L, gamma=args.gamma, W=args.len_window),
        mmi_scale=args.mmi_scale,
        beam=args.beam,
        nbest=args.nbest,
    )


def cmd_loss(args) -> int:
    try:
        table = io.load_table(args.table)
        target = io.load_target(args.target)
        lm = io.load_lm(args.lm) if args.lm else NGramPhonemeLM.uniform(table.V, table.k)
        settings = _settings(args)
    except (OSError, ValueError) as err:
        _err(str(err))
        return EXIT_INPUT
    if len(target) > table.T:
        # the list risk is defined for any target, but no alignment exists
        _err(f"target of length {len(target)} cannot align to {table.T} frames")
        return EXIT_INFEASIBLE
    criterion = args.criterion
    if needs_alignment(criterion) and settings.mmi_scale > 0:
        criterion += "+mmi"
    try:
        res = evaluate(criterion, table, target, lm, settings)
    except (InfeasibleTargetError, DegenerateInputError) as err:
        _err(str(err))
        return EXIT_INFEASIBLE
    except ValueError as err:
        _err(str(err))
        return EXIT_INPUT
    if not math.isfinite(res.value):
        _err(f"loss is {res.value}: target has no probability mass")
        return EXIT_INFEASIBLE
    report = {"criterion": criterion, "loss": res.value}
    components = {k: v for k, v in res.info.items() if isinstance(v, float)}
    if components:
        report["components"] = components
    if args.grad:
        io.save_table(PosteriorTable(res.grad, table.k, Vocabulary(table.V), check=False), args.grad)
        report["grad"] = str(args.grad)
    print(json.dumps(report))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    try:
        if args.inject_fault:
            with lattice.injected_fault(args.inject_fault):
                rows = sweep.run_sweep(args.T_values, args.V_values, args.k_values, args.seed, cap=args.cap)
        else:
            rows = sweep.run_sweep(args.T_values, args.V_values, args.k_values, args.seed, cap=args.cap)
    except oracle.EnumerationCapError as err:
        _err(str(err))
        return EXIT_CAP
    print(sweep.format_rows(rows))
    failed = sum(not r.passed for r in rows)
    worst = max(r.error for r in rows)
    print(f"# {len(rows) - failed}/{len(rows)} passed, max error {worst:.1e}")
    return EXIT_MISMATCH if failed else EXIT_OK


def cmd_bench(args) -> int:
    settings = Settings(beam=args.beam, nbest=args.nbest)
    rows = bench.run_bench(args.T, args.V, args.k, args.reps, args.seed, settings)
    for line in bench.machine_info():
        print(f"# {line}")
    print(f"# reps {args.reps}, seed {args.seed}")
    print("criterion,T,V,k,ms_per_utt")
    for r in rows:
        print(f"{r['criterion']},{r['T']},{r['V']},{r['k']},{r['ms_per_utt']:.3f}")
    saved = bench.speedups(rows)
    if saved:
        print("# time saved vs nbest-mbr: " + ", ".join(f"{c} {100 * s:.0f}%" for c, s in saved.items()))
    return EXIT_OK


def cmd_make_data(args) -> int:
    data = make_dataset(args.utterances, args.vocab, args.seed)
    io.save_dataset(data, args.out)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    try:
        data = io.load_dataset(args.data) if args.data else make_dataset(seed=args.seed)
        if args.model_in:
            model = io.load_model(args.model_in)
        else:
            model = ToyModel.init(data.n_features, data.vocab_size, args.k, seed=args.seed)
        if (model.n_features, model.vocab_size) != (data.n_features, data.vocab_size):
            raise UsageError("model and dataset sizes differ")
        settings = Settings(scales=ScoreScales(args.alpha, args.beta), mmi_scale=args.mmi_scale)
        result = train(model, data, args.criterion, args.lr, args.epochs, args.seed, settings=settings)
    except (OSError, ValueError, UsageError) as err:
        _err(str(err))
        return EXIT_INPUT
    io.save_model(result.model, args.model_out)
    trace = {"criterion": args.criterion, "seed": args.seed, "loss": result.losses, "blank": result.blank}
    Path(args.trace_out).write_text(json.dumps(trace, indent=1))
    print(f"loss {result.losses[0]:.6f} -> {result.losses[-1]:.6f}, blank {result.blank[0]:.4f} -> {result.blank[-1]:.4f}")
    return EXIT_OK


def cmd_align(args) -> int:
    try:
        table = io.load_table(args.table)
        target = io.load_target(args.target)
    except (OSError, ValueError) as err:
        _err(str(err))
        return EXIT_INPUT
    try:
        path, seg = viterbi_align(table, target)
    except InfeasibleTargetError as err:
        _err(str(err))
        return EXIT_INFEASIBLE
    except ValueError as err:
        _err(str(err))
        return EXIT_INPUT
    print(f"alignment {table.vocab.format(path)}")
    print(f"boundaries ({','.join(map(str, seg.boundaries))})")
    print(f"positions ({','.join(map(str, seg.positions))})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lfseqtrain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("loss", help="evaluate one criterion on a posterior table")
    q.add_argument("--criterion", choices=LOSS_CRITERIA, required=True)
    q.add_argument("--table", required=True)
    q.add_argument("--target", required=True)
    q.add_argument("--lm", help="LM JSON; a uniform LM is used when omitted")
    q.add_argument("--alpha", type=float, default=1.2)
    q.add_argument("--beta", type=float, default=0.3)
    q.add_argument("--L", type=int, default=3)
    q.add_argument("--c", type=float, default=0.3)
    q.add_argument("--I", type=int, default=3)
    q.add_argument("--gamma", type=float, default=1.1)
    q.add_argument("--len-window", type=int, default=4)
    q.add_argument("--mmi-scale", type=float, default=0.2, help="weight of the added LF-MMI term for MBR criteria")
    q.add_argument("--beam", type=int, default=16)
    q.add_argument("--nbest", type=int, default=4)
    q.add_argument("--grad", help="write the table gradient here (binary, or JSON for a .json path)")
    q.set_defaults(func=cmd_loss)

    q = sub.add_parser("oracle-check", help="compare DP losses with brute-force enumeration")
    q.add_argument("--T-values", "--T", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    q.add_argument("--V-values", "--V", type=int, nargs="+", default=[1, 2, 3])
    q.add_argument("--k-values", "--k", type=int, nargs="+", default=[1, 2])
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    q.add_argument("--inject-fault", type=float, nargs="?", const=1e-3, default=0.0, help=argparse.SUPPRESS)
    q.set_defaults(func=cmd_oracle_check)

    q = sub.add_parser("bench", help="time loss+gradient per criterion")
    q.add_argument("--T", type=int, default=100)
    q.add_argument("--V", type=int, default=40)
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--reps", type=int, default=3)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--beam", type=int, default=16)
    q.add_argument("--nbest", type=int, default=4)
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("make-data", help="write the synthetic toy dataset as JSON lines")
    q.add_argument("--out", required=True)
    q.add_argument("--utterances", type=int, default=5)
    q.add_argument("--vocab", type=int, default=3)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_make_data)

    q = sub.add_parser("train-toy", help="train the toy lookup model")
    q.add_argument("--data", help="JSON-lines dataset; the synthetic set is used when omitted")
    q.add_argument("--criterion", choices=TRAIN_CRITERIA, default="cefs")
    q.add_argument("--lr", type=float, default=0.5)
    q.add_argument("--epochs", type=int, default=50)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--alpha", type=float, default=1.2)
    q.add_argument("--beta", type=float, default=0.3)
    q.add_argument("--mmi-scale", type=float, default=0.2)
    q.add_argument("--model-in")
    q.add_argument("--model-out", required=True)
    q.add_argument("--trace-out", required=True)
    q.set_defaults(func=cmd_train_toy)

    q = sub.add_parser("align", help="print the Viterbi alignment of a target")
    q.add_argument("--table", required=True)
    q.add_argument("--target", required=True)
    q.set_defaults(func=cmd_align)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
