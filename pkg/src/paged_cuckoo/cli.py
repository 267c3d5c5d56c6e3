"""Command line entry point: ``paged-cuckoo <command> ...``.

Every command writes CSV to standard output unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .bounds import INFINITE, BoundConfig, SolverError, solve_beta_infinite, solve_beta_paged
from .oracle import verify_battery

log = logging.getLogger("paged_cuckoo")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _variants(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load_sweep(text: str) -> list[float]:
    lo, hi, step = (float(v) for v in text.split(":"))
    count = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) for i in range(count + 1)]


def _common_table_args(p: argparse.ArgumentParser):
    p.add_argument("--variant", type=_variants, default=["choose"],
                   help="disjoint, overlap or choose (comma list allowed)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n", type=int, default=ex.DESK_N)
    p.add_argument("--full", action="store_true", help=f"use n={ex.FULL_N}")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--relaxed", action="store_true",
                   help="allow t not divisible by k for overlap/choose")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paged-cuckoo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("threshold", parents=[common], help="load at first insertion failure")
    _common_table_args(p)
    p.add_argument("--t", type=_int_list, default=[8], help="page size (comma list allowed)")

    p = sub.add_parser("insert-cost", parents=[common], help="mean lookups per insert near a load")
    _common_table_args(p)
    p.add_argument("--t", type=_int_list, default=[8])
    p.add_argument("--t-sweep", type=_int_list, help="page sizes, overrides --t")
    p.add_argument("--load", type=float, default=0.92)
    p.add_argument("--load-sweep", type=_load_sweep, help="LO:HI:STEP, overrides --load")
    p.add_argument("--unit", choices=["bucket", "cell"], default="bucket",
                   help="count bucket examinations or cell reads")

    p = sub.add_parser("bounds", parents=[common], help="theoretical lower bound on the load")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--t", default=INFINITE, help="page size, comma list, or 'infinite'")
    p.add_argument("--x-step", type=float, default=BoundConfig.x_grid_step)
    p.add_argument("--beta-tol", type=float, default=BoundConfig.beta_tolerance)
    p.add_argument("--margin", type=float, default=BoundConfig.margin)
    p.add_argument("--delta", type=float, default=BoundConfig.delta)
    p.add_argument("--starts", type=int, default=BoundConfig.random_starts)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("fit", parents=[common], help="evaluate the page-size approximation formula")
    p.add_argument("--model", choices=sorted(ex.MODELS), default="choose2")
    p.add_argument("--t-sweep", type=_int_list, default=[2, 4, 8, 16, 32, 64])
    p.add_argument("--refit", action="store_true",
                   help="refit coefficients to fresh threshold runs over the sweep")
    p.add_argument("--n", type=int, default=ex.DESK_N)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", parents=[common], help="table vs. matching oracle on random small instances")
    p.add_argument("--n", type=int, default=32, help="largest table size drawn")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _n(args) -> int:
    return ex.FULL_N if args.full else args.n


def cmd_threshold(args) -> str:
    out = []
    for variant in args.variant:
        for t in args.t:
            out.append(ex.run_threshold(variant, args.d, args.k, t, _n(args), args.trials,
                                        args.seed, args.workers, args.relaxed))
    return ex.emit_csv("threshold", out)


def cmd_insert_cost(args) -> str:
    ts = args.t_sweep or args.t
    loads = args.load_sweep or [args.load]
    out = []
    for variant in args.variant:
        for t in ts:
            s = ex.run_insert_cost(variant, args.d, args.k, t, _n(args), loads, args.trials,
                                   args.seed, args.workers, args.relaxed, args.unit)
            if s.failed_trials:
                log.warning("%s t=%d: trials %s failed before load %.4f", variant, t,
                            s.failed_trials, max(loads))
            out.append(s)
    return ex.emit_csv("insert-cost", out)


def cmd_bounds(args) -> str:
    cfg = BoundConfig(x_grid_step=args.x_step, beta_tolerance=args.beta_tol, margin=args.margin,
                      delta=args.delta, random_starts=args.starts, seed=args.seed,
                      workers=args.workers)
    out = []
    for t in args.t.split(","):
        t = t.strip()
        if t == INFINITE:
            out.append(solve_beta_infinite(args.d, args.k, cfg))
        else:
            out.append(solve_beta_paged(args.d, args.k, int(t), cfg))
    return ex.emit_csv("bounds", out)


def cmd_fit(args) -> str:
    model = ex.MODELS[args.model]
    if args.refit:
        k = 2 if args.model == "choose2" else 3
        betas = [ex.run_threshold("choose", 2, k, t, args.n, args.trials, args.seed,
                                  relaxed=True).mean_beta for t in args.t_sweep]
        model = ex.refit(args.model, args.t_sweep, betas)
    return ex.to_csv(ex.FIT_COLUMNS, ex.fit_rows(model, args.t_sweep))


def cmd_verify(args) -> str:
    rep = verify_battery(args.trials, args.seed, max_n=args.n)
    for line in rep.failures:
        log.error(line)
    row = {"instances": rep.instances, "mismatches": rep.mismatches,
           "hall_checked": rep.hall_checked, "hall_mismatches": rep.hall_mismatches,
           "seed": args.seed}
    text = ex.to_csv(list(row), [row])
    if rep.mismatches or rep.hall_mismatches:
        raise RuntimeError(f"{rep.mismatches + rep.hall_mismatches} oracle disagreements")
    return text


COMMANDS = {"threshold": cmd_threshold, "insert-cost": cmd_insert_cost, "bounds": cmd_bounds,
            "fit": cmd_fit, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except (ValueError, SolverError, RuntimeError, OSError) as exc:
        print(f"paged-cuckoo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
